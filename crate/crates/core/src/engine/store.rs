use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ChainOutput, ChainStats, EngineError};

/// Retained draws of every chain, one row per draw, columns named
/// `beta.<dim>.<cov>`, `sigma.<dim>`, `alpha.<pair>.<cov>`, `gamma.<cell>.<cov>`.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawStore {
    names: Vec<String>,
    values: Vec<f64>,
    chain: Vec<usize>,
    iteration: Vec<usize>,
    stats: Vec<ChainStats>,
}

fn store_err(e: impl std::fmt::Display) -> EngineError {
    EngineError::Store(e.to_string())
}

impl DrawStore {
    pub fn from_chains(names: Vec<String>, chains: Vec<ChainOutput>) -> Self {
        let mut s = Self {
            names,
            values: Vec::new(),
            chain: Vec::new(),
            iteration: Vec::new(),
            stats: Vec::new(),
        };
        for (c, out) in chains.into_iter().enumerate() {
            for (row, it) in out.rows.into_iter().zip(out.iterations) {
                assert_eq!(row.len(), s.names.len(), "draw width mismatch");
                s.values.extend(row);
                s.chain.push(c);
                s.iteration.push(it);
            }
            s.stats.push(out.stats);
        }
        s
    }

    /// Store without sampler statistics; iterations are numbered from 0.
    pub fn from_rows(names: Vec<String>, chains: Vec<Vec<Vec<f64>>>) -> Result<Self, EngineError> {
        let mut s = Self {
            names,
            values: Vec::new(),
            chain: Vec::new(),
            iteration: Vec::new(),
            stats: Vec::new(),
        };
        for (c, rows) in chains.into_iter().enumerate() {
            for (t, row) in rows.into_iter().enumerate() {
                if row.len() != s.names.len() {
                    return Err(store_err(format!("row {t} of chain {c} has {} values", row.len())));
                }
                s.values.extend(row);
                s.chain.push(c);
                s.iteration.push(t);
            }
        }
        Ok(s)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn n_chains(&self) -> usize {
        self.chain.iter().map(|c| c + 1).max().unwrap_or(0)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.names.len();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn chain_of(&self, r: usize) -> usize {
        self.chain[r]
    }

    pub fn iteration_of(&self, r: usize) -> usize {
        self.iteration[r]
    }

    /// Chain statistics; empty for stores read back from CSV.
    pub fn stats(&self) -> &[ChainStats] {
        &self.stats
    }

    pub fn set_stats(&mut self, stats: Vec<ChainStats>) {
        self.stats = stats;
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// All draws of one column, chains concatenated.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let w = self.names.len();
        (0..self.len()).map(|r| self.values[r * w + j]).collect()
    }

    /// One column split by chain.
    pub fn column_by_chain(&self, j: usize) -> Vec<Vec<f64>> {
        let w = self.names.len();
        let mut out = vec![Vec::new(); self.n_chains()];
        for r in 0..self.len() {
            out[self.chain[r]].push(self.values[r * w + j]);
        }
        out
    }

    /// CSV with leading `chain,iteration` columns. Floats are written in
    /// shortest round-trip form, so reading back is exact.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EngineError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header).map_err(store_err)?;
        let mut rec = Vec::with_capacity(header.len());
        for r in 0..self.len() {
            rec.clear();
            rec.push(self.chain[r].to_string());
            rec.push(self.iteration[r].to_string());
            rec.extend(self.row(r).iter().map(|v| v.to_string()));
            wr.write_record(&rec).map_err(store_err)?;
        }
        wr.flush().map_err(store_err)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, EngineError> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(store_err)?.clone();
        if header.len() < 2 || &header[0] != "chain" || &header[1] != "iteration" {
            return Err(store_err("draw file must start with chain,iteration columns"));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut s = Self {
            names,
            values: Vec::new(),
            chain: Vec::new(),
            iteration: Vec::new(),
            stats: Vec::new(),
        };
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(store_err)?;
            let bad = |what: &str| store_err(format!("row {}: bad {what}", line + 1));
            s.chain.push(rec[0].parse().map_err(|_| bad("chain"))?);
            s.iteration.push(rec[1].parse().map_err(|_| bad("iteration"))?);
            for f in rec.iter().skip(2) {
                s.values.push(f.parse().map_err(|_| bad("value"))?);
            }
        }
        Ok(s)
    }
}

/// Sidecar written next to the draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: serde_json::Value,
    pub seed: u64,
    pub chains: Vec<ChainStats>,
    pub versions: std::collections::BTreeMap<String, String>,
    pub wall_time_seconds: f64,
    pub workers: usize,
}

impl RunMetadata {
    pub fn new(config: serde_json::Value, seed: u64, chains: Vec<ChainStats>, wall_time_seconds: f64) -> Self {
        let mut versions = std::collections::BTreeMap::new();
        versions.insert("corrgress".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            config,
            seed,
            chains,
            versions,
            wall_time_seconds,
            workers: rayon::current_num_threads(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(c: usize) -> ChainStats {
        ChainStats {
            chain: c,
            alpha_names: vec![],
            alpha_proposals: vec![],
            alpha_rejections: vec![],
            step_constants: vec![],
            sigma_names: vec![],
            sigma_acceptance: vec![],
            rebaselines: 0,
            max_drift: 0.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let out = |c: usize| ChainOutput {
            rows: vec![vec![0.1 + c as f64, -1e-300], vec![std::f64::consts::PI, 2.5e17]],
            iterations: vec![10, 11],
            stats: stats(c),
        };
        let s = DrawStore::from_chains(vec!["a".into(), "b".into()], vec![out(0), out(1)]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let mut back = DrawStore::read_csv(buf.as_slice()).unwrap();
        back.set_stats(s.stats().to_vec());
        assert_eq!(back, s);
        assert_eq!(s.column_by_chain(0), vec![vec![0.1, std::f64::consts::PI], vec![1.1, std::f64::consts::PI]]);
    }
}
