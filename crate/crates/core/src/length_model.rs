//! Gaussian length model: parameter estimation, the standardized length
//! difference, and per-bead match costs with class priors.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::BeadClass;
use crate::length_metric::HybridLength;

/// Chinese length units per English length unit.
pub const DEFAULT_C: f64 = 0.506;
/// Standard deviation of the per-unit length noise.
pub const DEFAULT_SIGMA: f64 = 0.166;
/// `DEFAULT_SIGMA` squared, written out so the parameter file is exact.
pub const DEFAULT_SIGMA2: f64 = 0.027556;
/// Probabilities below this are clamped before taking the log.
pub const DEFAULT_PROB_FLOOR: f64 = 1e-30;

/// Default bead-class priors, in [`BeadClass::PRODUCIBLE`] order.
/// They sum to 1.0988; only relative values matter for the argmin.
const TABLE_PRIORS: [f64; 6] = [0.89, 0.089, 0.089, 0.011, 0.0099, 0.0099];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPriors([f64; 6]);

impl Default for ClassPriors {
    fn default() -> Self {
        ClassPriors(TABLE_PRIORS)
    }
}

impl ClassPriors {
    pub fn get(&self, cls: BeadClass) -> Option<f64> {
        cls.rank().map(|r| self.0[r])
    }

    pub fn set(&mut self, cls: BeadClass, p: f64) -> Result<(), ModelError> {
        let r = cls.rank().ok_or(ModelError::NonProducibleClass(cls))?;
        self.0[r] = p;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (BeadClass, f64)> + '_ {
        BeadClass::PRODUCIBLE.iter().copied().zip(self.0.iter().copied())
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Rescaled to sum to one.
    pub fn normalized(&self) -> Self {
        let total = self.sum();
        ClassPriors(self.0.map(|p| p / total))
    }
}

/// How `Pr(delta | match)` is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DeltaProbability {
    /// `2 * (1 - Phi(|delta|))`.
    #[default]
    TwoTailed,
    /// Standard normal density at `delta`.
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthModelParams {
    pub c: f64,
    pub sigma2: f64,
    pub priors: ClassPriors,
    pub probability: DeltaProbability,
    pub floor: f64,
}

impl Default for LengthModelParams {
    fn default() -> Self {
        LengthModelParams {
            c: DEFAULT_C,
            sigma2: DEFAULT_SIGMA2,
            priors: ClassPriors::default(),
            probability: DeltaProbability::default(),
            floor: DEFAULT_PROB_FLOOR,
        }
    }
}

impl LengthModelParams {
    pub fn new(c: f64, sigma2: f64, priors: ClassPriors) -> Result<Self, ModelError> {
        let params = LengthModelParams { c, sigma2, priors, ..Default::default() };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ModelError::BadParameter(format!("c must be positive, got {}", self.c)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(ModelError::BadParameter(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if let Some((cls, p)) = self.priors.iter().find(|&(_, p)| !(p > 0.0 && p.is_finite())) {
            return Err(ModelError::BadParameter(format!("prior for {cls} must be positive, got {p}")));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(ModelError::BadParameter(format!("probability floor must be in (0, 1), got {}", self.floor)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Flat `key=value` parameter file.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("c={}\nsigma2={}\n", self.c, self.sigma2);
        for (cls, p) in self.priors.iter() {
            out.push_str(&format!("prior_{}_{}={}\n", cls.a, cls.b, p));
        }
        out
    }

    /// Parses the parameter file. `c` and `sigma2` are required; missing
    /// priors keep their defaults.
    pub fn parse_file(input: &str) -> Result<Self, ParamFileError> {
        let mut c = None;
        let mut sigma2 = None;
        let mut priors = ClassPriors::default();
        let mut seen = Vec::new();
        for (idx, raw) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ParamFileError { line: line_no, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let value: f64 = value.parse().map_err(|_| err(format!("`{value}` is not a number")))?;
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            match key {
                "c" => c = Some(value),
                "sigma2" => sigma2 = Some(value),
                _ => {
                    let cls = key
                        .strip_prefix("prior_")
                        .and_then(|rest| rest.split_once('_'))
                        .and_then(|(a, b)| Some(BeadClass::new(a.parse().ok()?, b.parse().ok()?)))
                        .filter(|cls| cls.is_producible())
                        .ok_or_else(|| err(format!("unknown key `{key}`")))?;
                    priors.set(cls, value).map_err(|e| err(e.to_string()))?;
                }
            }
        }
        let missing = |k: &str| ParamFileError { line: 0, message: format!("missing key `{k}`") };
        let params = LengthModelParams {
            c: c.ok_or_else(|| missing("c"))?,
            sigma2: sigma2.ok_or_else(|| missing("sigma2"))?,
            priors,
            ..Default::default()
        };
        params.validate().map_err(|e| ParamFileError { line: 0, message: e.to_string() })?;
        Ok(params)
    }
}

/// Result of fitting `c` and `sigma2` to training pairs. `sigma2` may be zero
/// for perfectly proportional data, which is not usable for scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthEstimate {
    pub c: f64,
    pub sigma2: f64,
    pub pairs: usize,
}

impl LengthEstimate {
    pub fn into_params(self, priors: ClassPriors) -> Result<LengthModelParams, ModelError> {
        if self.sigma2 <= 0.0 {
            return Err(ModelError::DegenerateVariance);
        }
        LengthModelParams::new(self.c, self.sigma2, priors)
    }
}

/// Fits the length model to `(l1, l2)` pairs.
///
/// `c` is the mean ratio `l2 / l1` weighted by `l1`, which reduces to
/// `sum(l2) / sum(l1)`. `sigma2` is the mean of `(l2 - c*l1)^2 / l1`, the
/// variance per unit of English length.
pub fn estimate_params(pairs: &[(HybridLength, HybridLength)]) -> Result<LengthEstimate, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    if pairs.iter().any(|&(l1, _)| l1.get() == 0) {
        return Err(ModelError::ZeroEnglishLength);
    }
    let sum1: f64 = pairs.iter().map(|&(l1, _)| l1.as_f64()).sum();
    let sum2: f64 = pairs.iter().map(|&(_, l2)| l2.as_f64()).sum();
    let c = sum2 / sum1;
    let sigma2 = pairs
        .iter()
        .map(|&(l1, l2)| {
            let (l1, l2) = (l1.as_f64(), l2.as_f64());
            (l2 - c * l1).powi(2) / l1
        })
        .sum::<f64>()
        / pairs.len() as f64;
    Ok(LengthEstimate { c, sigma2, pairs: pairs.len() })
}

/// Standardized length difference; approximately standard normal for
/// matching passages.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Delta(pub f64);

impl Delta {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `(l2 - l1*c) / sqrt(l1*sigma2)`.
pub fn delta(l1: f64, l2: f64, params: &LengthModelParams) -> Result<Delta, ModelError> {
    if !(l1 > 0.0) {
        return Err(ModelError::Domain(l1));
    }
    Ok(Delta((l2 - l1 * params.c) / (l1 * params.sigma2).sqrt()))
}

/// `2 * (1 - Phi(|z|))`, computed through `erfc` to keep precision in the
/// tail.
pub fn two_tailed_probability(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn standard_normal_density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `-ln Pr(z | match)` with the probability clamped at `floor`.
pub fn neg_log_probability(z: f64, form: DeltaProbability, floor: f64) -> f64 {
    let p = match form {
        DeltaProbability::TwoTailed => two_tailed_probability(z),
        DeltaProbability::Density => standard_normal_density(z),
    };
    -p.max(floor).ln()
}

/// Delta for a bead with side lengths `l1`, `l2`. For beads with an empty
/// side the existing side takes the `l2` role and the empty side is clamped
/// to length 1.
pub fn bead_delta(l1: HybridLength, l2: HybridLength, cls: BeadClass, params: &LengthModelParams) -> Result<Delta, ModelError> {
    match (cls.a, cls.b) {
        (0, _) => delta(1.0, l2.as_f64(), params),
        (_, 0) => delta(1.0, l1.as_f64(), params),
        _ => delta(l1.as_f64().max(1.0), l2.as_f64(), params),
    }
}

/// `-ln Pr(delta | match) - ln prior(cls)`.
pub fn match_cost(l1: HybridLength, l2: HybridLength, cls: BeadClass, params: &LengthModelParams) -> Result<f64, ModelError> {
    let prior = params.priors.get(cls).ok_or(ModelError::NonProducibleClass(cls))?;
    let d = bead_delta(l1, l2, cls, params)?;
    Ok(neg_log_probability(d.0, params.probability, params.floor) - prior.ln())
}

impl FromStr for DeltaProbability {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-tailed" | "tail" => Ok(DeltaProbability::TwoTailed),
            "density" => Ok(DeltaProbability::Density),
            _ => Err(ModelError::BadParameter(format!("unknown probability form `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("no training pairs")]
    EmptyTraining,
    #[error("training pair with zero English length")]
    ZeroEnglishLength,
    #[error("estimated variance is zero; the training pairs are exactly proportional")]
    DegenerateVariance,
    #[error("delta is undefined for English length {0}")]
    Domain(f64),
    #[error("bead class {0} is not scored by the model")]
    NonProducibleClass(BeadClass),
    #[error("{0}")]
    BadParameter(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parameter file line {line}: {message}")]
pub struct ParamFileError {
    pub line: usize,
    pub message: String,
}
