//! Exact evolution of the lazy walk, `L_p` distances, mixing times, hitting
//! solves and the exit-tail, decomposition and Poincaré checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{Distribution, VertexSet, WeightedGraph};
use crate::kernel::TransitionKernel;
use crate::linalg::grounded_laplacian;
use crate::numeric::neumaier_sum;
use crate::spectral;

/// Default cap on the time scanned by [`mixing_time`].
pub const DEFAULT_T_CAP: u64 = 10_000_000;
/// Largest graph for which [`mixing_time`] evolves from every start.
pub const ALL_STARTS_LIMIT: usize = 5_000;

/// `‖μ − ν‖_{p,π}`; `p = f64::INFINITY` gives the uniform norm.
pub fn lp_distance(mu: &[f64], nu: &[f64], pi: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid(format!("L_p distance needs p >= 1, got {p}")));
    }
    if mu.len() != pi.len() || nu.len() != pi.len() {
        return Err(invalid("length mismatch in L_p distance"));
    }
    for x in 0..pi.len() {
        if pi[x] <= 0.0 && mu[x] != nu[x] {
            return Err(invalid(format!("π({x}) = 0 but the laws differ there")));
        }
    }
    let terms = (0..pi.len()).filter(|&x| pi[x] > 0.0).map(|x| ((mu[x] - nu[x]).abs(), pi[x]));
    Ok(if p.is_infinite() {
        terms.map(|(d, w)| d / w).fold(0.0, f64::max)
    } else if p == 1.0 {
        neumaier_sum(terms.map(|(d, _)| d))
    } else if p == 2.0 {
        neumaier_sum(terms.map(|(d, w)| d * d / w)).sqrt()
    } else {
        neumaier_sum(terms.map(|(d, w)| w * (d / w).powf(p))).powf(1.0 / p)
    })
}

/// Which starting vertices a worst-case quantity ranges over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartSet {
    All,
    List(Vec<usize>),
}

impl StartSet {
    pub fn resolve(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            StartSet::All => Ok((0..n).collect()),
            StartSet::List(v) => {
                if v.is_empty() {
                    return Err(invalid("empty start list"));
                }
                if let Some(&x) = v.iter().find(|&&x| x >= n) {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
                Ok(v.clone())
            }
        }
    }
}

/// Worst-start distance `max_x ‖Pr_x^t − π‖_{p,π}` for `t = 0..=t_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingCurve {
    pub p: f64,
    pub starts: StartSet,
    pub points: Vec<(u64, f64)>,
}

impl MixingCurve {
    /// First `t` on the curve whose distance is at most `eps`.
    pub fn first_below(&self, eps: f64) -> Option<u64> {
        self.points.iter().find(|&&(_, d)| d <= eps).map(|&(t, _)| t)
    }

    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.points.windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,distance\n");
        for (t, d) in &self.points {
            s.push_str(&format!("{t},{d}\n"));
        }
        s
    }
}

/// The lazy kernel, its stationary law and reusable evolution helpers.
#[derive(Debug, Clone)]
pub struct Walk {
    pub kernel: TransitionKernel,
    pub pi: Vec<f64>,
}

impl Walk {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        let kernel = TransitionKernel::lazy(g)?;
        let pi = g.stationary()?.into_vec();
        Ok(Self { kernel, pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Distances `‖Pr_x^t − π‖_{p,π}` for `t = 0..=t_max`, one per `p`.
    pub fn distance_series(&self, x: usize, ps: &[f64], t_max: u64) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut cur = vec![0.0; n];
        cur[x] = 1.0;
        let mut next = vec![0.0; n];
        let mut out = vec![Vec::with_capacity(t_max as usize + 1); ps.len()];
        for t in 0..=t_max {
            for (k, &p) in ps.iter().enumerate() {
                out[k].push(lp_distance(&cur, &self.pi, &self.pi, p).expect("π has full support"));
            }
            if t < t_max {
                self.kernel.apply_left(&cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        out
    }

    /// Worst-start curve over `starts`.
    pub fn worst_start_curve(&self, p: f64, starts: &StartSet, t_max: u64) -> Result<MixingCurve> {
        let list = starts.resolve(self.len())?;
        let per_start: Vec<Vec<f64>> = list
            .par_iter()
            .map(|&x| self.distance_series(x, &[p], t_max).remove(0))
            .collect();
        let points = (0..=t_max)
            .map(|t| (t, per_start.iter().map(|s| s[t as usize]).fold(0.0, f64::max)))
            .collect();
        Ok(MixingCurve {
            p,
            starts: starts.clone(),
            points,
        })
    }

    /// First time the walk from `x` is within `eps` in `L_p`.
    ///
    /// For `p ∈ {2, ∞}` the distance is nonincreasing and the first crossing
    /// is the answer. For other `p` monotonicity is not assumed: the scan
    /// records the last time above `eps` and stops once the dominating
    /// monotone norm (`L_2` for `p < 2`, `L_∞` for `p > 2`) is itself below.
    pub fn first_time_within(&self, x: usize, p: f64, eps: f64, t_cap: u64) -> Result<u64> {
        let n = self.len();
        let mut cur = vec![0.0; n];
        cur[x] = 1.0;
        let mut next = vec![0.0; n];
        let monotone = p == 2.0 || p.is_infinite();
        let envelope = if p < 2.0 { 2.0 } else { f64::INFINITY };
        let mut last_above: Option<u64> = None;
        let mut t = 0u64;
        loop {
            let d = lp_distance(&cur, &self.pi, &self.pi, p)?;
            if monotone {
                if d <= eps {
                    return Ok(t);
                }
            } else {
                if d > eps {
                    last_above = Some(t);
                }
                let env = lp_distance(&cur, &self.pi, &self.pi, envelope)?;
                if env <= eps {
                    return Ok(last_above.map_or(0, |s| s + 1));
                }
            }
            if t >= t_cap {
                return Err(Error::TimeCap(t_cap));
            }
            self.kernel.apply_left(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            t += 1;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingTime {
    pub tau: u64,
    pub worst_start: usize,
    pub p: f64,
    pub eps: f64,
}

/// `τ_p(ε)` over the given starts, evolving each start independently.
pub fn mixing_time_from(g: &WeightedGraph, p: f64, eps: f64, starts: &StartSet, t_cap: u64) -> Result<MixingTime> {
    if !(eps > 0.0) {
        return Err(invalid("mixing threshold must be positive"));
    }
    let walk = Walk::new(g)?;
    mixing_time_for_walk(&walk, p, eps, starts, t_cap)
}

pub fn mixing_time_for_walk(walk: &Walk, p: f64, eps: f64, starts: &StartSet, t_cap: u64) -> Result<MixingTime> {
    let list = starts.resolve(walk.len())?;
    if matches!(starts, StartSet::All) && walk.len() > ALL_STARTS_LIMIT {
        return Err(Error::SizeLimit {
            what: "mixing time over all starts (pass a start list)",
            size: walk.len(),
            limit: ALL_STARTS_LIMIT,
        });
    }
    let times: Vec<Result<(u64, usize)>> = list
        .par_iter()
        .map(|&x| walk.first_time_within(x, p, eps, t_cap).map(|t| (t, x)))
        .collect();
    let mut best = (0u64, list[0]);
    for r in times {
        let (t, x) = r?;
        if t > best.0 {
            best = (t, x);
        }
    }
    Ok(MixingTime {
        tau: best.0,
        worst_start: best.1,
        p,
        eps,
    })
}

/// `τ_p(ε) = min{t : max_x ‖Pr_x^t − π‖_{p,π} ≤ ε}` over all starts.
pub fn mixing_time(g: &WeightedGraph, p: f64, eps: f64) -> Result<u64> {
    mixing_time_from(g, p, eps, &StartSet::All, DEFAULT_T_CAP).map(|m| m.tau)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L2LinftyReport {
    pub t_max: u64,
    /// Largest `|max_x ‖Pr_x^{2t}−π‖_∞ − (max_x ‖Pr_x^t−π‖_2)^2|`, relative to `max(1, rhs)`.
    pub max_deviation: f64,
    pub holds: bool,
    pub a: f64,
    pub tau_inf: u64,
    pub tau_2_sqrt_a: u64,
    /// `|τ_∞(a) − 2τ_2(√a)| ≤ 1`.
    pub time_contract_holds: bool,
}

/// Checks `max_x ‖Pr_x^{2t}−π‖_{∞,π} = (max_x ‖Pr_x^t−π‖_{2,π})²` for
/// `t ≤ t_max` and compares `τ_∞(a)` with `2τ_2(√a)`.
pub fn l2_linfty_relation_check(g: &WeightedGraph, a: f64, t_max: u64) -> Result<L2LinftyReport> {
    let walk = Walk::new(g)?;
    let n = walk.len();
    let series: Vec<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|x| walk.distance_series(x, &[2.0, f64::INFINITY], 2 * t_max))
        .collect();
    let mut max_dev = 0.0f64;
    for t in 0..=t_max as usize {
        let l2 = series.iter().map(|s| s[0][t]).fold(0.0, f64::max);
        let linf = series.iter().map(|s| s[1][2 * t]).fold(0.0, f64::max);
        let rhs = l2 * l2;
        max_dev = max_dev.max((linf - rhs).abs() / rhs.max(1.0));
    }
    let tau_inf = mixing_time_for_walk(&walk, f64::INFINITY, a, &StartSet::All, DEFAULT_T_CAP)?.tau;
    let tau_2 = mixing_time_for_walk(&walk, 2.0, a.sqrt(), &StartSet::All, DEFAULT_T_CAP)?.tau;
    Ok(L2LinftyReport {
        t_max,
        max_deviation: max_dev,
        holds: max_dev <= 1e-9,
        a,
        tau_inf,
        tau_2_sqrt_a: tau_2,
        time_contract_holds: (tau_inf as i64 - 2 * tau_2 as i64).abs() <= 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HittingMethod {
    LinearSolve,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HittingSolveResult {
    /// One value per vertex.
    pub values: Vec<f64>,
    pub method: HittingMethod,
}

/// `h(x) = Pr_x[T_A < T_B]`: harmonic off `A ∪ B`, one on `A`, zero on `B`.
pub fn hit_probability(g: &WeightedGraph, a: &VertexSet, b: &VertexSet) -> Result<HittingSolveResult> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if a.is_empty() || b.is_empty() {
        return Err(invalid("hit_probability needs nonempty target sets"));
    }
    if !a.is_disjoint(b) {
        return Err(invalid("target sets overlap"));
    }
    for x in a.iter().chain(b.iter()) {
        g.check_vertex(x)?;
    }
    let in_a = a.mask(n);
    let in_b = b.mask(n);
    let interior: Vec<bool> = (0..n).map(|x| !in_a[x] && !in_b[x]).collect();
    let (lap, index) = grounded_laplacian(g, &interior);
    let mut rhs = vec![0.0; lap.order()];
    for x in 0..n {
        if interior[x] {
            rhs[index[x]] = g
                .neighbors(x)
                .iter()
                .filter(|&&(y, _)| in_a[y])
                .map(|&(_, c)| c)
                .sum();
        }
    }
    let sol = lap.solve_spd(&rhs)?;
    let values = (0..n)
        .map(|x| {
            if in_a[x] {
                1.0
            } else if in_b[x] {
                0.0
            } else {
                sol[index[x]].clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(HittingSolveResult {
        values,
        method: HittingMethod::LinearSolve,
    })
}

/// `E_x[T_D]` for the lazy walk, from `(I − P_{V∖D}) k = 1`.
pub fn expected_hitting_time(g: &WeightedGraph, d: &VertexSet) -> Result<HittingSolveResult> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if d.is_empty() {
        return Err(invalid("expected hitting time of an empty set"));
    }
    for x in d.iter() {
        g.check_vertex(x)?;
    }
    let in_d = d.mask(n);
    let interior: Vec<bool> = in_d.iter().map(|&b| !b).collect();
    let (lap, index) = grounded_laplacian(g, &interior);
    let mut rhs = vec![0.0; lap.order()];
    for x in 0..n {
        if interior[x] {
            rhs[index[x]] = 2.0 * g.vertex_conductance(x);
        }
    }
    let sol = lap.solve_spd(&rhs)?;
    let values = (0..n).map(|x| if in_d[x] { 0.0 } else { sol[index[x]] }).collect();
    Ok(HittingSolveResult {
        values,
        method: HittingMethod::LinearSolve,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExitTail {
    /// `Pr_a[T_{Ω∖A} > t]` for `t = 0..=t_max`.
    pub exact: Vec<f64>,
    /// `|A| max_b sqrt(π(b)/π(a)) e^{−λ(A) t}`.
    pub bound: Vec<f64>,
    /// Mass leaving `A` at each step `1..=t_max`.
    pub exits: Vec<f64>,
    pub restricted_gap: f64,
}

impl ExitTail {
    /// Worst `exact − bound` over times where the bound is below one.
    pub fn worst_excess(&self) -> f64 {
        self.exact
            .iter()
            .zip(&self.bound)
            .filter(|(_, &b)| b < 1.0)
            .map(|(e, b)| e - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact survival probability in `A` from `start`, and its spectral bound.
pub fn exit_tail(g: &WeightedGraph, set: &VertexSet, start: usize, t_max: u64) -> Result<ExitTail> {
    if !set.contains(start) {
        return Err(invalid(format!("start {start} is not in the set")));
    }
    let lambda = spectral::restricted_gap(g, set)?;
    let walk = Walk::new(g)?;
    let pa = walk.kernel.restricted(set)?;
    let ratio = set
        .iter()
        .map(|b| (walk.pi[b] / walk.pi[start]).sqrt())
        .fold(0.0, f64::max);
    let prefactor = set.len() as f64 * ratio;
    let n = walk.len();
    let mut cur = vec![0.0; n];
    cur[start] = 1.0;
    let mut next = vec![0.0; n];
    let mut exact = vec![1.0];
    let mut exits = Vec::new();
    let mut bound = vec![prefactor];
    for t in 1..=t_max {
        pa.apply_left(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        let m = neumaier_sum(cur.iter().copied());
        exits.push(exact[exact.len() - 1] - m);
        exact.push(m);
        bound.push(prefactor * (-lambda * t as f64).exp());
    }
    Ok(ExitTail {
        exact,
        bound,
        exits,
        restricted_gap: lambda,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub ell: f64,
    pub t: u64,
    /// `Pr_x[T_S > t]`.
    pub event_probability: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`, nonnegative by the triangle inequality.
    pub gap: f64,
}

/// Compares `‖Pr_x^t−π‖_ℓ` with the split over the event `{T_S > t}` and its
/// complement. The conditional law on the event comes from the restricted
/// kernel, renormalised.
pub fn conditional_decomposition_check(
    g: &WeightedGraph,
    x: usize,
    t: u64,
    s: &VertexSet,
    ell: f64,
) -> Result<DecompositionReport> {
    if !(ell >= 1.0) {
        return Err(invalid("decomposition needs ℓ >= 1"));
    }
    let walk = Walk::new(g)?;
    let n = walk.len();
    g.check_vertex(x)?;
    let full = walk.kernel.evolve(&Distribution::point_mass(x, n)?, t);
    let survive = if s.contains(x) {
        vec![0.0; n]
    } else {
        let pa = walk.kernel.restricted(&s.complement(n))?;
        pa.evolve(&Distribution::point_mass(x, n)?, t).into_vec()
    };
    let p_event = neumaier_sum(survive.iter().copied()).clamp(0.0, 1.0);
    let lhs = lp_distance(full.as_slice(), &walk.pi, &walk.pi, ell)?;
    let mut rhs = 0.0;
    if p_event > 0.0 {
        let cond: Vec<f64> = survive.iter().map(|m| m / p_event).collect();
        rhs += p_event * lp_distance(&cond, &walk.pi, &walk.pi, ell)?;
    }
    if p_event < 1.0 {
        let q = 1.0 - p_event;
        let cond: Vec<f64> = full
            .as_slice()
            .iter()
            .zip(&survive)
            .map(|(f, s)| (f - s).max(0.0) / q)
            .collect();
        rhs += q * lp_distance(&cond, &walk.pi, &walk.pi, ell)?;
    }
    Ok(DecompositionReport {
        ell,
        t,
        event_probability: p_event,
        lhs,
        rhs,
        gap: rhs - lhs,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoincareReport {
    pub gap: f64,
    pub initial_distance: f64,
    pub t_max: u64,
    /// Largest `‖Pr_μ^t−π‖_2 − e^{−λt}‖μ−π‖_2` over `t ≤ t_max`.
    pub max_violation: f64,
    pub holds: bool,
}

/// `‖Pr_μ^t−π‖_{2,π} ≤ e^{−λt}‖μ−π‖_{2,π}` for every `t ≤ t_max` (1e-12).
pub fn poincare_check(g: &WeightedGraph, mu: &Distribution, t_max: u64) -> Result<PoincareReport> {
    let walk = Walk::new(g)?;
    if mu.len() != walk.len() {
        return Err(invalid("distribution length does not match the graph"));
    }
    let gap = spectral::spectral_gap(g)?;
    let d0 = lp_distance(mu.as_slice(), &walk.pi, &walk.pi, 2.0)?;
    let mut cur = mu.as_slice().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut worst = f64::NEG_INFINITY;
    for t in 0..=t_max {
        let d = lp_distance(&cur, &walk.pi, &walk.pi, 2.0)?;
        worst = worst.max(d - (-gap * t as f64).exp() * d0);
        walk.kernel.apply_left(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(PoincareReport {
        gap,
        initial_distance: d0,
        t_max,
        max_violation: worst,
        holds: worst <= 1e-12,
    })
}

/// Survival curve `Pr_x[T_D > t]` for `t = 0..=t_max` via the restricted kernel.
pub fn survival_curve(walk: &Walk, x: usize, d: &VertexSet, t_max: u64) -> Result<Vec<f64>> {
    let n = walk.len();
    if d.contains(x) {
        return Ok(vec![0.0; t_max as usize + 1]);
    }
    let pa = walk.kernel.restricted(&d.complement(n))?;
    let mut cur = vec![0.0; n];
    cur[x] = 1.0;
    let mut next = vec![0.0; n];
    let mut out = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        out.push(neumaier_sum(cur.iter().copied()));
        if t < t_max {
            pa.apply_left(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok(out)
}
