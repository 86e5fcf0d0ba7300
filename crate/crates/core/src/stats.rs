//! Length statistics over a gold alignment: the (l1, l2) scatter and a
//! histogram of the standardized difference δ.

use std::fmt::Write as _;

use crate::corpus::{Alignment, BeadClass, Document};
use crate::length_model::{delta, LengthModelParams, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub class: BeadClass,
    pub l1: u64,
    pub l2: u64,
    pub delta: f64,
}

/// One point per gold bead with passages on both sides.
pub fn scatter(
    gold: &Alignment,
    english: &Document,
    chinese: &Document,
    params: &LengthModelParams,
) -> Result<Vec<ScatterPoint>, ModelError> {
    gold.beads
        .iter()
        .filter(|b| !b.eng.is_empty() && !b.chi.is_empty())
        .map(|b| {
            let l1 = english.range_length(b.eng.clone()).get();
            let l2 = chinese.range_length(b.chi.clone()).get();
            let d = delta(l1 as f64, l2 as f64, params)?;
            Ok(ScatterPoint { class: b.cls(), l1, l2, delta: d.0 })
        })
        .collect()
}

pub fn scatter_tsv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("class\tl1\tl2\tdelta\n");
    for p in points {
        let _ = writeln!(out, "{}\t{}\t{}\t{:.6}", p.class, p.l1, p.l2, p.delta);
    }
    out
}

/// Fixed-width bins over `[lo, lo + width * bins)` plus the two tails.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, width: f64, bins: usize) -> Self {
        assert!(width > 0.0 && bins > 0, "histogram needs positive width and bins");
        Histogram { lo, width, counts: vec![0; bins], underflow: 0, overflow: 0 }
    }

    /// The default δ histogram: bins of 0.25 over [-6, 6].
    pub fn for_delta() -> Self {
        Self::new(-6.0, 0.25, 48)
    }

    pub fn add(&mut self, x: f64) {
        let k = ((x - self.lo) / self.width).floor();
        if k < 0.0 {
            self.underflow += 1;
        } else if k >= self.counts.len() as f64 {
            self.overflow += 1;
        } else {
            self.counts[k as usize] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// `lo\thi\tcount` rows; the tails use `-inf` and `inf`.
    pub fn to_tsv(&self) -> String {
        let hi = self.lo + self.width * self.counts.len() as f64;
        let mut out = String::from("lo\thi\tcount\n");
        let _ = writeln!(out, "-inf\t{:.2}\t{}", self.lo, self.underflow);
        for (k, c) in self.counts.iter().enumerate() {
            let a = self.lo + self.width * k as f64;
            let _ = writeln!(out, "{:.2}\t{:.2}\t{}", a, a + self.width, c);
        }
        let _ = writeln!(out, "{:.2}\tinf\t{}", hi, self.overflow);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; zero for fewer than two values.
    pub variance: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { n, mean: 0.0, variance: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = if n < 2 { 0.0 } else { values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 };
    Summary { n, mean, variance }
}
