//! Binned density estimates with standard errors and CSV output.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::stats::MeanAcc;
use crate::Result;

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// A histogram over consecutive bins given by their edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: u64,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Self {
        let k = edges.len().saturating_sub(1);
        Histogram { edges, counts: vec![0; k], n: 0 }
    }

    /// Equal-width bins on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        Self::new((0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect())
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin containing `x`, if any. Bins are half-open `[lo, hi)`.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if self.edges.len() < 2 || !(x >= self.edges[0]) || x >= *self.edges.last().unwrap() {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= x) - 1)
    }

    /// Records one sample; `x = None` counts a sample outside every bin.
    pub fn record(&mut self, x: Option<f64>) {
        self.n += 1;
        if let Some(b) = x.and_then(|x| self.bin_of(x)) {
            self.counts[b] += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        self.n += other.n;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn width(&self, b: usize) -> f64 {
        self.edges[b + 1] - self.edges[b]
    }

    /// Probability density per unit length in bin `b` with its stderr.
    pub fn density(&self, b: usize) -> (f64, f64) {
        let n = self.n.max(1) as f64;
        let p = self.counts[b] as f64 / n;
        let w = self.width(b);
        (p / w, (p * (1.0 - p) / n).sqrt() / w)
    }

    /// Writes `bin_lo,bin_hi,count,density,stderr` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_lo,bin_hi,count,density,stderr")?;
        for b in 0..self.bins() {
            let (d, s) = self.density(b);
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(self.edges[b]),
                fmt17(self.edges[b + 1]),
                self.counts[b],
                fmt17(d),
                fmt17(s)
            )?;
        }
        Ok(())
    }
}

/// Per-bin mean of weighted contributions, for estimators whose samples are
/// not simple counts.
#[derive(Debug, Clone, Default)]
pub struct WeightedBins {
    pub acc: Vec<MeanAcc>,
}

impl WeightedBins {
    pub fn new(bins: usize) -> Self {
        WeightedBins { acc: vec![MeanAcc::default(); bins] }
    }

    pub fn merge(&mut self, other: &WeightedBins) {
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            a.merge(b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_round_trips() {
        for x in [1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn bins_and_csv() {
        let mut h = Histogram::uniform(0.0, 1.0, 4);
        for x in [0.1, 0.3, 0.3, 0.99, 1.5] {
            h.record(Some(x));
        }
        h.record(None);
        assert_eq!(h.counts, vec![1, 2, 0, 1]);
        assert_eq!(h.n, 6);
        let mut buf = vec![];
        h.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("bin_lo,bin_hi,count,density,stderr\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
