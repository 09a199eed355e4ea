//! Machine-readable measurement records.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One measured quantity with the method that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub quantity: String,
    pub value: serde_json::Value,
    pub method: String,
    pub graph_hash: String,
}

impl Record {
    pub fn new(quantity: impl Into<String>, value: impl Serialize, method: impl Into<String>, graph_hash: &str) -> Self {
        Self {
            quantity: quantity.into(),
            value: serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
            method: method.into(),
            graph_hash: graph_hash.to_string(),
        }
    }
}

/// A report body. Nothing time-dependent goes in, so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub seed: u64,
    pub params: serde_json::Value,
    /// SHA-256 over the canonical JSON of `kind`, `seed` and `params`.
    pub input_hash: String,
    pub records: Vec<Record>,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(kind: &str, seed: u64, params: impl Serialize) -> Self {
        let params = serde_json::to_value(params).unwrap_or(serde_json::Value::Null);
        let canonical = serde_json::to_string(&(kind, seed, &params)).unwrap_or_default();
        let input_hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        Self {
            kind: kind.to_string(),
            seed,
            params,
            input_hash,
            records: Vec::new(),
            violations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    /// `quantity,value,method,graph_hash`, one line per record.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,value,method,graph_hash\n");
        for r in &self.records {
            let v = match &r.value {
                serde_json::Value::String(x) => x.clone(),
                other => other.to_string(),
            };
            s.push_str(&format!("{},{},{},{}\n", csv_field(&r.quantity), csv_field(&v), csv_field(&r.method), r.graph_hash));
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_hash_is_stable() {
        let a = Report::new("x", 3, vec![1, 2]);
        let b = Report::new("x", 3, vec![1, 2]);
        assert_eq!(a.input_hash, b.input_hash);
        assert_ne!(a.input_hash, Report::new("x", 4, vec![1, 2]).input_hash);
    }

    #[test]
    fn csv_quotes_commas() {
        let mut r = Report::new("x", 0, ());
        r.push(Record::new("a,b", 1.5, "m", "h"));
        assert!(r.to_csv().contains("\"a,b\",1.5,m,h"));
    }
}
