//! Synthetic parallel corpora drawn from the length model itself.
//!
//! Each bead's Chinese length is `round(c*l1 + sqrt(l1)*sigma*eps)` with
//! standard normal `eps`. Passage text is filler of the right width, so the
//! hybrid length of every passage is exactly the drawn value.

use std::ops::Range;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{Alignment, Bead, BeadClass, Document, Lang};
use crate::length_metric::hybrid_length;
use crate::length_model::{ClassPriors, DEFAULT_C, DEFAULT_SIGMA};
use crate::lexical::CueLexicon;

// No letter here can spell a lowercase cue, and all cues except one start
// with a capital.
const ENGLISH_FILLER: &[u8] = b"abcdefghijklmnpqrstuwxyz";
// Wide characters that occur in no bundled cue.
const CHINESE_FILLER: &[char] = &[
    '的', '是', '在', '有', '人', '這', '中', '大', '為', '上', '個', '國', '我', '以', '要', '他', '時', '來', '用', '們',
    '生', '到', '作', '地', '於', '出', '就', '分', '對', '成', '會', '可',
];

/// Passage length used inside a header stretch, in English units.
const STRETCH_ENGLISH_LENGTH: u64 = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum LengthDist {
    /// Uniform over `lo..=hi`.
    Uniform { lo: u64, hi: u64 },
    Fixed(u64),
}

impl LengthDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            LengthDist::Uniform { lo, hi } => rng.random_range(lo..=hi),
            LengthDist::Fixed(n) => n,
        }
    }
}

/// A run of near-equal-length passages at the head of the document,
/// starting with one bead of class `perturbation` and continuing with 1-1
/// beads. `length` counts beads.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaderStretch {
    pub length: usize,
    pub perturbation: BeadClass,
}

/// Matched cue insertion. Ordinary beads get one cue pair with probability
/// `rate`; every passage of a header stretch gets one.
#[derive(Debug, Clone, PartialEq)]
pub struct CueInjection {
    pub rate: f64,
    pub lexicon: CueLexicon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub c: f64,
    pub sigma: f64,
    pub class_mix: Vec<(BeadClass, f64)>,
    pub n_beads: usize,
    pub seed: u64,
    pub english_length: LengthDist,
    pub header_stretch: Option<HeaderStretch>,
    pub cue_injection: Option<CueInjection>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            c: DEFAULT_C,
            sigma: DEFAULT_SIGMA,
            class_mix: default_class_mix(),
            n_beads: 100,
            seed: 0,
            english_length: LengthDist::Uniform { lo: 20, hi: 200 },
            header_stretch: None,
            cue_injection: None,
        }
    }
}

/// The default priors rescaled into a proper distribution.
pub fn default_class_mix() -> Vec<(BeadClass, f64)> {
    ClassPriors::default().normalized().iter().collect()
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.class_mix.is_empty() {
            return bad("class mix is empty".into());
        }
        for &(cls, p) in &self.class_mix {
            if cls.a == 0 && cls.b == 0 {
                return bad("class 0-0 is not a bead".into());
            }
            if !(p >= 0.0 && p.is_finite()) {
                return bad(format!("weight for {cls} must be non-negative, got {p}"));
            }
        }
        let total: f64 = self.class_mix.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class mix sums to {total}, not 1"));
        }
        match self.english_length {
            LengthDist::Uniform { lo, hi } if lo == 0 || lo > hi => {
                return bad(format!("bad English length range {lo}..={hi}"))
            }
            LengthDist::Fixed(0) => return bad("English length must be positive".into()),
            _ => {}
        }
        if let Some(s) = &self.header_stretch {
            if s.length == 0 || s.perturbation.a == 0 || s.perturbation.b == 0 {
                return bad("header stretch needs a positive length and a perturbation with both sides".into());
            }
        }
        if let Some(inj) = &self.cue_injection {
            if !(0.0..=1.0).contains(&inj.rate) {
                return bad(format!("cue rate must be in [0, 1], got {}", inj.rate));
            }
            if inj.lexicon.independent_cues().is_empty() {
                return bad("cue lexicon has no usable cues".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub english: Document,
    pub chinese: Document,
    pub gold: Alignment,
    /// Indices into `gold.beads` of the header stretch; empty without one.
    pub stretch: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("cue text does not fit in a {0}-unit passage")]
    CueDoesNotFit(u64),
}

struct Builder<'c> {
    cfg: &'c GenConfig,
    rng: ChaCha8Rng,
    english: Vec<String>,
    chinese: Vec<String>,
    beads: Vec<Bead>,
    cues: Vec<(String, String)>,
}

pub fn generate(cfg: &GenConfig) -> Result<SyntheticCorpus, SynthError> {
    cfg.validate()?;
    let cues = match &cfg.cue_injection {
        Some(inj) => inj
            .lexicon
            .independent_cues()
            .into_iter()
            .map(|i| {
                let cue = &inj.lexicon.cues()[i];
                (cue.english.clone(), cue.chinese.clone())
            })
            .collect(),
        None => Vec::new(),
    };
    let mut b = Builder {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        english: Vec::new(),
        chinese: Vec::new(),
        beads: Vec::new(),
        cues,
    };
    let stretch = match &cfg.header_stretch {
        Some(s) => b.stretch(s)?,
        None => 0..0,
    };
    let weights = WeightedIndex::new(cfg.class_mix.iter().map(|&(_, p)| p))
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    for _ in 0..cfg.n_beads {
        let cls = cfg.class_mix[weights.sample(&mut b.rng)].0;
        b.bead(cls)?;
    }
    let english = Document::from_sentences(Lang::English, b.english).expect("generated passages are non-empty");
    let chinese = Document::from_sentences(Lang::Chinese, b.chinese).expect("generated passages are non-empty");
    Ok(SyntheticCorpus { english, chinese, gold: Alignment::new(b.beads, 0.0), stretch })
}

impl Builder<'_> {
    fn push(&mut self, english: Vec<String>, chinese: Vec<String>) {
        let (i, j) = (self.english.len(), self.chinese.len());
        let bead = Bead::new(i..i + english.len(), j..j + chinese.len()).expect("generated bead is well formed");
        self.english.extend(english);
        self.chinese.extend(chinese);
        self.beads.push(bead);
    }

    fn chinese_total(&mut self, l1: u64, parts: usize) -> u64 {
        let eps: f64 = self.rng.sample(StandardNormal);
        let l1 = l1 as f64;
        let l2 = (self.cfg.c * l1 + l1.sqrt() * self.cfg.sigma * eps).round();
        (l2.max(parts as f64)) as u64
    }

    /// Splits `total` into `parts` positive pieces with random weights in
    /// [0.3, 0.7].
    fn split(&mut self, total: u64, parts: usize) -> Vec<u64> {
        if parts <= 1 {
            return vec![total; parts];
        }
        let weights: Vec<f64> = (0..parts).map(|_| self.rng.random_range(0.3..=0.7)).collect();
        let sum: f64 = weights.iter().sum();
        let spare = total - parts as u64;
        let mut out: Vec<u64> = weights.iter().map(|w| 1 + (spare as f64 * w / sum).floor() as u64).collect();
        let short = total - out.iter().sum::<u64>();
        out[0] += short;
        out
    }

    fn bead(&mut self, cls: BeadClass) -> Result<(), SynthError> {
        let eng_lengths: Vec<u64> = (0..cls.a).map(|_| self.cfg.english_length.sample(&mut self.rng)).collect();
        let l1 = if cls.a == 0 { self.cfg.english_length.sample(&mut self.rng) } else { eng_lengths.iter().sum() };
        let chi_lengths = if cls.b == 0 {
            Vec::new()
        } else {
            let l2 = self.chinese_total(l1, cls.b as usize);
            self.split(l2, cls.b as usize)
        };

        // One matched cue, placed in the first passage on each side with room.
        let mut eng_cues = vec![Vec::new(); eng_lengths.len()];
        let mut chi_cues = vec![Vec::new(); chi_lengths.len()];
        if let Some(inj) = &self.cfg.cue_injection {
            if cls.a > 0 && cls.b > 0 && self.rng.random_bool(inj.rate) {
                let (e, c) = self.cues[self.rng.random_range(0..self.cues.len())].clone();
                let e_slot = eng_lengths.iter().position(|&l| english_fits(l, &[&e]));
                let c_slot = chi_lengths.iter().position(|&l| chinese_fits(l, &[&c]));
                if let (Some(es), Some(cs)) = (e_slot, c_slot) {
                    eng_cues[es].push(e);
                    chi_cues[cs].push(c);
                }
            }
        }
        let english = self.english_texts(&eng_lengths, &eng_cues)?;
        let chinese = self.chinese_texts(&chi_lengths, &chi_cues)?;
        self.push(english, chinese);
        Ok(())
    }

    fn stretch(&mut self, s: &HeaderStretch) -> Result<Range<usize>, SynthError> {
        let chi_base = (self.cfg.c * STRETCH_ENGLISH_LENGTH as f64).round() as u64;
        let mut cue_index = 0;
        for k in 0..s.length {
            let cls = if k == 0 { s.perturbation } else { BeadClass::ONE_ONE };
            let eng_lengths: Vec<u64> =
                (0..cls.a).map(|_| STRETCH_ENGLISH_LENGTH - 1 + self.rng.random_range(0..=2)).collect();
            // Chinese lengths ignore the English ones, so shifting the pairing
            // by a passage costs next to nothing. The jitter is kept to one
            // unit so that merging two correct 1-1 beads never pays off.
            let chi_lengths: Vec<u64> = (0..cls.b).map(|_| chi_base + self.rng.random_range(0..=1)).collect();
            let mut eng_cues = vec![Vec::new(); eng_lengths.len()];
            let mut chi_cues = vec![Vec::new(); chi_lengths.len()];
            if !self.cues.is_empty() {
                for slot in eng_cues.iter_mut() {
                    let (e, c) = self.cues[cue_index % self.cues.len()].clone();
                    cue_index += 1;
                    slot.push(e);
                    chi_cues[0].push(c);
                }
            }
            let english = self.english_texts(&eng_lengths, &eng_cues)?;
            let chinese = self.chinese_texts(&chi_lengths, &chi_cues)?;
            self.push(english, chinese);
        }
        Ok(0..s.length)
    }

    fn english_texts(&mut self, lengths: &[u64], cues: &[Vec<String>]) -> Result<Vec<String>, SynthError> {
        lengths.iter().zip(cues).map(|(&l, c)| english_text(&mut self.rng, l, c)).collect()
    }

    fn chinese_texts(&mut self, lengths: &[u64], cues: &[Vec<String>]) -> Result<Vec<String>, SynthError> {
        lengths.iter().zip(cues).map(|(&l, c)| chinese_text(&mut self.rng, l, c)).collect()
    }
}

fn english_cue_units<S: AsRef<str>>(cues: &[S]) -> u64 {
    cues.iter().map(|c| c.as_ref().chars().count() as u64 + 1).sum()
}

fn english_fits<S: AsRef<str>>(len: u64, cues: &[S]) -> bool {
    len >= english_cue_units(cues) + 2
}

fn chinese_cue_units<S: AsRef<str>>(cues: &[S]) -> u64 {
    cues.iter().map(|c| hybrid_length(c.as_ref()).get()).sum()
}

fn chinese_fits<S: AsRef<str>>(len: u64, cues: &[S]) -> bool {
    cues.is_empty() || len >= chinese_cue_units(cues) + 2
}

/// `len` narrow characters: cues (each followed by a space), filler words,
/// and a closing period.
fn english_text(rng: &mut ChaCha8Rng, len: u64, cues: &[String]) -> Result<String, SynthError> {
    if !english_fits(len, cues) {
        return Err(SynthError::CueDoesNotFit(len));
    }
    let mut s = String::with_capacity(len as usize);
    for cue in cues {
        s.push_str(cue);
        s.push(' ');
    }
    let mut remaining = len - english_cue_units(cues) - 1;
    while remaining > 0 {
        let word = if remaining <= 8 { remaining } else { rng.random_range(2..=7) };
        for _ in 0..word {
            s.push(ENGLISH_FILLER[rng.random_range(0..ENGLISH_FILLER.len())] as char);
        }
        remaining -= word;
        if remaining > 0 {
            s.push(' ');
            remaining -= 1;
        }
    }
    s.push('.');
    Ok(s)
}

/// `len` hybrid units: cues, a narrow digit if the remainder is odd, wide
/// filler, and a full stop.
fn chinese_text(rng: &mut ChaCha8Rng, len: u64, cues: &[String]) -> Result<String, SynthError> {
    if !chinese_fits(len, cues) {
        return Err(SynthError::CueDoesNotFit(len));
    }
    let mut s: String = cues.concat();
    let mut remaining = len - chinese_cue_units(cues);
    if remaining % 2 == 1 {
        s.push(char::from(b'0' + rng.random_range(0..10u8)));
        remaining -= 1;
    }
    if remaining >= 2 {
        for _ in 0..remaining / 2 - 1 {
            s.push(CHINESE_FILLER[rng.random_range(0..CHINESE_FILLER.len())]);
        }
        s.push('。');
    }
    Ok(s)
}
