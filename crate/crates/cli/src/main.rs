use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use robustmix::construction::{self, build_family, hypercube, paper_size_audit, torus, FamilyParams, LabeledFamily};
use robustmix::electrical::{self, StretchedTreeSpec, Truncation};
use robustmix::experiment::{self, BoundSuiteSpec, ExperimentSpec, RobustnessSpec, StartPolicy};
use robustmix::mixing::{self, StartSet, Walk};
use robustmix::report::{Record, Report};
use robustmix::spectral;
use robustmix::{VertexSet, WeightedGraph};

#[derive(Parser)]
#[command(name = "robustmix", version, about = "Mixing times and stretch sensitivity of weighted graphs")]
struct Cli {
    /// Family parameter file (`key = value` lines).
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Vertex budget for family construction.
    #[arg(long, global = true, default_value_t = construction::DEFAULT_BUDGET)]
    budget: usize,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build G_n (or G'_n) and write the graph, labels and vertex sets.
    Generate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        primed: bool,
    },
    /// Exact big-integer check of the size formulas, plus a desk family audit.
    Audit {
        #[arg(long)]
        n: usize,
    },
    /// L_p mixing time of a graph.
    Measure {
        #[command(flatten)]
        src: GraphSource,
        /// `inf` for L_∞.
        #[arg(long, default_value = "inf")]
        p: String,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// `all` or a comma-separated list of vertices (indices or labels).
        #[arg(long, default_value = "all")]
        starts: String,
        #[arg(long, default_value_t = mixing::DEFAULT_T_CAP)]
        t_cap: u64,
    },
    /// Spectral gap, and on small graphs the Cheeger constant and ρ.
    Spectral {
        #[command(flatten)]
        src: GraphSource,
        /// Also report λ(A) and Φ(A) for this set.
        #[arg(long)]
        set: Option<String>,
    },
    /// Effective conductance between a vertex and a set.
    Conductance {
        #[command(flatten)]
        src: GraphSource,
        #[arg(long)]
        source: String,
        #[arg(long)]
        sinks: String,
    },
    /// Harmonic measure of a boundary set seen from a start vertex.
    Harmonic {
        #[command(flatten)]
        src: GraphSource,
        #[arg(long)]
        start: String,
        #[arg(long)]
        boundary: String,
    },
    /// Left-subtree absorption probability of a stretched binary tree.
    TreeLemma {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        depth: usize,
        /// Stretch both sides by q instead of q and 2q.
        #[arg(long)]
        uniform: bool,
        #[arg(long)]
        reflecting: bool,
    },
    /// Run an experiment; exits nonzero on any violation.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        /// Family sizes for the sensitivity experiment.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        ns: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Policy::Roots)]
        policy: Policy,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 32)]
        sample_starts: usize,
        #[arg(long, default_value_t = 50)]
        corpus: usize,
        #[arg(long, default_value_t = 12)]
        max_vertices: usize,
        /// Adds a kernel with a defective row to the bound suite.
        #[arg(long)]
        inject_faulty_kernel: bool,
        /// Weight perturbation bound for the robustness probe.
        #[arg(long, default_value_t = 2.0)]
        c: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Sensitivity,
    Bounds,
    Robustness,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    All,
    Roots,
    TopRoot,
}

#[derive(Args)]
struct GraphSource {
    /// Graph file in the `N M` / `u v c` text format.
    #[arg(long, conflicts_with = "generator")]
    graph: Option<PathBuf>,
    /// Label sidecar for `--graph`.
    #[arg(long, requires = "graph")]
    labels: Option<PathBuf>,
    /// `torus:SIDE,DIM`, `hypercube:D`, `cycle:N`, `path:N`, `family:N`
    /// or `family-primed:N`.
    #[arg(long)]
    generator: Option<String>,
}

struct Loaded {
    graph: WeightedGraph,
    family: Option<LabeledFamily>,
}

impl Loaded {
    fn vertex(&self, s: &str) -> Result<usize> {
        if let Some(f) = &self.family {
            if let Ok(set) = f.set(s) {
                if set.len() == 1 {
                    return Ok(set.as_slice()[0]);
                }
            }
        }
        if let Some(x) = self.graph.find_label(s) {
            return Ok(x);
        }
        let x: usize = s.parse().with_context(|| format!("unknown vertex {s}"))?;
        if x >= self.graph.vertex_count() {
            bail!("vertex {x} out of range");
        }
        Ok(x)
    }

    fn set(&self, s: &str) -> Result<VertexSet> {
        if let Some(f) = &self.family {
            if let Ok(set) = f.set(s) {
                return Ok(set.clone());
            }
        }
        let xs = s.split(',').map(|t| self.vertex(t.trim())).collect::<Result<Vec<_>>>()?;
        Ok(VertexSet::from_iter_dedup(xs, self.graph.vertex_count())?)
    }
}

fn family_params(cli: &Cli, n: Option<usize>) -> Result<FamilyParams> {
    let mut p = match &cli.params {
        Some(path) => FamilyParams::parse(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?,
        None => FamilyParams::desk(n.context("--n or --params is required")?),
    };
    if let Some(n) = n {
        if n != p.n {
            bail!("--n {n} disagrees with n = {} in the parameter file", p.n);
        }
    }
    p.seed = cli.seed;
    p.budget = cli.budget;
    p.validate()?;
    Ok(p)
}

fn load(cli: &Cli, src: &GraphSource) -> Result<Loaded> {
    if let Some(path) = &src.graph {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let labels = src.labels.as_ref().map(fs::read_to_string).transpose()?;
        let graph = WeightedGraph::from_text(&text, labels.as_deref())?;
        return Ok(Loaded { graph, family: None });
    }
    let spec = match &src.generator {
        Some(s) => s.as_str(),
        None if cli.params.is_some() => "family",
        None => bail!("give --graph FILE, --generator SPEC or --params FILE"),
    };
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let nums = || -> Result<Vec<usize>> {
        arg.split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad number in {spec}")))
            .collect()
    };
    let graph = match name {
        "torus" => match nums()?[..] {
            [side, dim] => torus(side, dim)?,
            _ => bail!("torus:SIDE,DIM"),
        },
        "hypercube" => hypercube(*nums()?.first().context("hypercube:D")?)?,
        "cycle" => {
            let n = *nums()?.first().context("cycle:N")?;
            WeightedGraph::unweighted(n, (0..n).map(|i| (i, (i + 1) % n)))?
        }
        "path" => {
            let n = *nums()?.first().context("path:N")?;
            WeightedGraph::unweighted(n, (1..n).map(|i| (i - 1, i)))?
        }
        "family" | "family-primed" => {
            let n = nums()?.first().copied();
            let fam = build_family(&family_params(cli, n)?, name == "family-primed")?;
            return Ok(Loaded {
                graph: fam.graph.clone(),
                family: Some(fam),
            });
        }
        other => bail!("unknown generator {other}"),
    };
    Ok(Loaded { graph, family: None })
}

fn parse_p(s: &str) -> Result<f64> {
    match s {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => Ok(s.parse()?),
    }
}

/// Writes `name` into `--out`, or stdout.
fn emit(cli: &Cli, name: &str, body: &str) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn emit_report(cli: &Cli, name: &str, report: &Report) -> Result<()> {
    match cli.format {
        Format::Json => emit(cli, &format!("{name}.json"), &(report.to_json() + "\n")),
        Format::Csv => emit(cli, &format!("{name}.csv"), &report.to_csv()),
    }
}

/// Extra CSV artifacts only go to `--out`; stdout carries the report.
fn emit_artifact(cli: &Cli, name: &str, body: &str) -> Result<()> {
    if cli.out.is_some() {
        emit(cli, name, body)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Generate { n, primed } => {
            let params = family_params(cli, *n)?;
            let fam = build_family(&params, *primed)?;
            let g = &fam.graph;
            let h = g.content_hash();
            let mut r = Report::new("generate", cli.seed, &params);
            r.push(Record::new("vertices", g.vertex_count(), "count", &h));
            r.push(Record::new("edges", g.edge_count(), "count", &h));
            r.push(Record::new("max_degree", g.max_degree(), "count", &h));
            r.push(Record::new("degree_bound", construction::family_degree_bound(params.n), "construction", &h));
            for (name, set) in &fam.sets {
                r.push(Record::new(format!("|{name}|"), set.len(), "count", &h));
            }
            if g.max_degree() > construction::family_degree_bound(params.n) {
                r.violations.push("maximum degree exceeds the family bound".into());
            }
            let stem = if *primed { "family_primed" } else { "family" };
            if cli.out.is_some() {
                emit(cli, &format!("{stem}.graph"), &g.to_text())?;
                emit(cli, &format!("{stem}.labels"), &g.labels_to_text())?;
                emit(cli, &format!("{stem}.sets"), &fam.sets_to_text())?;
                emit(cli, "params.txt", &params.to_text())?;
            }
            emit_report(cli, stem, &r)?;
            Ok(r.passed())
        }
        Command::Audit { n } => {
            let mut r = Report::new("audit", cli.seed, n);
            let audit = paper_size_audit(*n)?;
            r.push(Record::new("size_formulas", &audit, "arbitrary-precision", ""));
            if !audit.all_hold {
                r.violations.push(format!("size formulas fail for n = {n}"));
            }
            let params = family_params(cli, Some(*n))?;
            match construction::estimate_size(&params, false) {
                Ok(est) => r.push(Record::new("desk_size_estimate", est, "construction", "")),
                Err(e) => r.warnings.push(format!("desk family: {e}")),
            }
            emit_report(cli, "audit", &r)?;
            Ok(r.passed())
        }
        Command::Measure {
            src,
            p,
            eps,
            starts,
            t_cap,
        } => {
            let l = load(cli, src)?;
            let p = parse_p(p)?;
            let set = if starts == "all" {
                StartSet::All
            } else {
                StartSet::List(l.set(starts)?.as_slice().to_vec())
            };
            let walk = Walk::new(&l.graph)?;
            let m = mixing::mixing_time_for_walk(&walk, p, *eps, &set, *t_cap)?;
            let h = l.graph.content_hash();
            let mut r = Report::new("measure", cli.seed, (p.to_string(), eps, starts, t_cap));
            r.push(Record::new("tau", m.tau, "exact-evolution", &h));
            r.push(Record::new("worst_start", l.graph.display_name(m.worst_start), "exact-evolution", &h));
            let curve = walk.worst_start_curve(p, &set, m.tau.max(1))?;
            emit_artifact(cli, "mixing_curve.csv", &curve.to_csv())?;
            emit_report(cli, "measure", &r)?;
            Ok(true)
        }
        Command::Spectral { src, set } => {
            let l = load(cli, src)?;
            let g = &l.graph;
            let h = g.content_hash();
            let mut r = Report::new("spectral", cli.seed, set);
            let (gap, method) = spectral::spectral_gap_with_method(g)?;
            r.push(Record::new("gap", gap, tag(&method), &h));
            let n = g.vertex_count();
            if n <= spectral::CHEEGER_LIMIT {
                let c = spectral::cheeger(g)?;
                r.push(Record::new("cheeger", c.value, "connected-set-exact", &h));
            } else {
                r.push(Record::new("sweep_cut_bound", spectral::sweep_cut_bound(g)?, "sweep-cut-upper-bound", &h));
            }
            if n <= spectral::PROFILE_LIMIT {
                let curve = spectral::spectral_profile(g)?;
                r.push(Record::new("rho", spectral::rho_from_parts(gap, &curve), "connected-set-exact", &h));
                emit_artifact(cli, "spectral_profile.csv", &curve.to_csv())?;
            }
            if let Some(s) = set {
                let a = l.set(s)?;
                r.push(Record::new("restricted_gap", spectral::restricted_gap(g, &a)?, "restricted-kernel", &h));
                if a.len() <= spectral::RESTRICTED_CHEEGER_LIMIT {
                    r.push(Record::new("restricted_cheeger", spectral::restricted_cheeger(g, &a)?, "exhaustive", &h));
                }
            }
            emit_report(cli, "spectral", &r)?;
            Ok(true)
        }
        Command::Conductance { src, source, sinks } => {
            let l = load(cli, src)?;
            let s = l.vertex(source)?;
            let b = l.set(sinks)?;
            let h = l.graph.content_hash();
            let mut r = Report::new("conductance", cli.seed, (source, sinks));
            let c = electrical::effective_conductance(&l.graph, s, &b)?;
            r.push(Record::new("effective_conductance", c, "linear-solve", &h));
            r.push(Record::new("effective_resistance", 1.0 / c, "linear-solve", &h));
            emit_report(cli, "conductance", &r)?;
            Ok(true)
        }
        Command::Harmonic { src, start, boundary } => {
            let l = load(cli, src)?;
            let x = l.vertex(start)?;
            let b = l.set(boundary)?;
            let h = l.graph.content_hash();
            let mut r = Report::new("harmonic", cli.seed, (start, boundary));
            let mu = electrical::harmonic_measure(&l.graph, x, &b)?;
            for y in b.iter() {
                r.push(Record::new(l.graph.display_name(y), mu.as_slice()[y], "linear-solve", &h));
            }
            emit_report(cli, "harmonic", &r)?;
            Ok(true)
        }
        Command::TreeLemma {
            q,
            depth,
            uniform,
            reflecting,
        } => {
            let mut spec = if *uniform {
                StretchedTreeSpec::uniform(*depth, *q)
            } else {
                StretchedTreeSpec::primed(*depth, *q)
            };
            if *reflecting {
                spec.truncation = Truncation::Reflecting;
            }
            let mut r = Report::new("tree-lemma", cli.seed, spec);
            let v = electrical::truncated_tree_left_prob(spec)?;
            r.push(Record::new("left_probability", v.value, tag(&v.method), ""));
            if !*uniform {
                let fp = electrical::tree_fixed_point(*q as f64)?;
                r.push(Record::new("infinite_depth_limit", fp.left_fraction(), "fixed-point", ""));
            }
            emit_report(cli, "tree_lemma", &r)?;
            Ok(true)
        }
        Command::Experiment {
            kind,
            ns,
            policy,
            eps,
            sample_starts,
            corpus,
            max_vertices,
            inject_faulty_kernel,
            c,
        } => match kind {
            ExperimentKind::Sensitivity => {
                let mut spec = ExperimentSpec {
                    ns: ns.clone(),
                    start_policy: match policy {
                        Policy::All => StartPolicy::All,
                        Policy::Roots => StartPolicy::Roots,
                        Policy::TopRoot => StartPolicy::TopRoot,
                    },
                    seed: cli.seed,
                    budget: cli.budget,
                    eps: *eps,
                    sample_starts: *sample_starts,
                    ..Default::default()
                };
                if cli.params.is_some() {
                    spec.params.push(family_params(cli, None)?);
                }
                let out = experiment::run_sensitivity_experiment(&spec);
                emit_artifact(cli, "sensitivity_table.csv", &out.to_csv())?;
                emit_artifact(cli, "nice_tail.csv", &out.nice_tail_csv())?;
                let mut r = out.report;
                r.push(Record::new("ratio_strictly_increasing", out.ratio_strictly_increasing, "derived", ""));
                r.push(Record::new("tau1_primed_exceeds_tau_inf", out.top_exceeds_everywhere, "derived", ""));
                emit_report(cli, "sensitivity", &r)?;
                Ok(r.passed() && out.gaps.is_empty())
            }
            ExperimentKind::Bounds => {
                let spec = BoundSuiteSpec {
                    corpus_size: *corpus,
                    max_vertices: *max_vertices,
                    seed: cli.seed,
                    inject_faulty_kernel: *inject_faulty_kernel,
                    ..Default::default()
                };
                let r = experiment::run_bound_suite(&spec)?;
                emit_report(cli, "bounds", &r)?;
                Ok(r.passed())
            }
            ExperimentKind::Robustness => {
                let spec = RobustnessSpec {
                    c: *c,
                    seed: cli.seed,
                    ..Default::default()
                };
                let (rows, r) = experiment::run_robustness_probe(&spec)?;
                let mut csv = String::from("family,perturbation,tau_before,tau_after,ratio\n");
                for row in &rows {
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        row.family, row.perturbation, row.tau_before, row.tau_after, row.ratio
                    ));
                }
                emit_artifact(cli, "robustness.csv", &csv)?;
                emit_report(cli, "robustness", &r)?;
                Ok(r.passed())
            }
        },
    }
}

fn tag(m: &impl serde::Serialize) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
