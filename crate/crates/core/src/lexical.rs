//! Lexical cues: bilingual pattern pairs whose occurrence counts should
//! balance across a correct bead.
//!
//! Each cue contributes an independent Gaussian term on the count difference
//! `w - v`, added to the length cost of the bead.

use std::ops::Range;

use thiserror::Error;

use crate::corpus::{Bead, BeadClass, Document, Lang, Passage};
use crate::length_metric::HybridLength;
use crate::length_model::{bead_delta, neg_log_probability, LengthModelParams, ModelError, DEFAULT_PROB_FLOOR};

/// Variance shared by all cue deltas unless a lexicon overrides it.
pub const DEFAULT_CUE_VARIANCE: f64 = 0.07;

const SENTENCE_LEXICON: &str = include_str!("../data/legco-sentence.lexicon");
const PARAGRAPH_LEXICON: &str = include_str!("../data/legco-paragraph.lexicon");

#[derive(Debug, Clone, PartialEq)]
pub struct Cue {
    pub english: String,
    pub chinese: String,
    /// Per-cue variance; `None` uses the lexicon-wide value.
    pub variance: Option<f64>,
}

impl Cue {
    pub fn new(english: impl Into<String>, chinese: impl Into<String>) -> Self {
        Cue { english: english.into(), chinese: chinese.into(), variance: None }
    }

    pub fn pattern(&self, side: Lang) -> &str {
        match side {
            Lang::English => &self.english,
            Lang::Chinese => &self.chinese,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CueLexicon {
    cues: Vec<Cue>,
    variance: f64,
}

impl Default for CueLexicon {
    fn default() -> Self {
        Self::empty()
    }
}

impl CueLexicon {
    pub fn new(cues: Vec<Cue>, variance: f64) -> Result<Self, LexiconError> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(LexiconError::BadVariance(variance));
        }
        for (i, cue) in cues.iter().enumerate() {
            if cue.english.is_empty() || cue.chinese.is_empty() {
                return Err(LexiconError::EmptyPattern(i));
            }
            if let Some(v) = cue.variance {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(LexiconError::BadVariance(v));
                }
            }
        }
        Ok(CueLexicon { cues, variance })
    }

    /// No cues: scoring reduces to the length model.
    pub fn empty() -> Self {
        CueLexicon { cues: Vec::new(), variance: DEFAULT_CUE_VARIANCE }
    }

    /// Honorifics, months, weekdays and governor/總督.
    pub fn legco_sentence() -> Self {
        Self::parse_file(SENTENCE_LEXICON).expect("bundled sentence lexicon parses")
    }

    /// Colon and governor/總督, for aligning paragraphs.
    pub fn legco_paragraph() -> Self {
        Self::parse_file(PARAGRAPH_LEXICON).expect("bundled paragraph lexicon parses")
    }

    pub fn cues(&self) -> &[Cue] {
        &self.cues
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    fn std_devs(&self) -> Vec<f64> {
        self.cues.iter().map(|c| c.variance.unwrap_or(self.variance).sqrt()).collect()
    }

    /// Indices of cues none of whose patterns contain another cue's pattern
    /// on the same side (十一月 contains 一月, so November is excluded).
    /// Injecting such a cue raises exactly one count per side.
    pub fn independent_cues(&self) -> Vec<usize> {
        (0..self.cues.len())
            .filter(|&i| {
                [Lang::English, Lang::Chinese].iter().all(|&side| {
                    let p = self.cues[i].pattern(side);
                    self.cues.iter().enumerate().all(|(j, other)| j == i || !p.contains(other.pattern(side)))
                })
            })
            .collect()
    }

    /// Tab-separated `english<TAB>chinese[<TAB>variance]` lines, `#`
    /// comments, and an optional `variance=<real>` line.
    pub fn parse_file(input: &str) -> Result<Self, LexiconError> {
        let mut variance = DEFAULT_CUE_VARIANCE;
        let mut cues = Vec::new();
        for (idx, raw) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| LexiconError::Syntax { line: line_no, message };
            if !line.contains('\t') {
                if let Some(v) = line.trim().strip_prefix("variance=") {
                    variance = v.trim().parse().map_err(|_| bad(format!("bad variance `{v}`")))?;
                    continue;
                }
                return Err(bad("expected english<TAB>chinese".into()));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let cue = match fields.as_slice() {
                [e, c] => Cue::new(*e, *c),
                [e, c, v] => Cue {
                    variance: Some(v.trim().parse().map_err(|_| bad(format!("bad variance `{v}`")))?),
                    ..Cue::new(*e, *c)
                },
                _ => return Err(bad(format!("expected 2 or 3 fields, found {}", fields.len()))),
            };
            if cue.english.is_empty() || cue.chinese.is_empty() {
                return Err(bad("empty pattern".into()));
            }
            cues.push(cue);
        }
        Self::new(cues, variance)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!("variance={}\n", self.variance);
        for cue in &self.cues {
            match cue.variance {
                Some(v) => out.push_str(&format!("{}\t{}\t{}\n", cue.english, cue.chinese, v)),
                None => out.push_str(&format!("{}\t{}\n", cue.english, cue.chinese)),
            }
        }
        out
    }
}

/// Non-overlapping literal occurrences of `pattern` in `text`.
fn occurrences(text: &str, pattern: &str) -> u32 {
    text.matches(pattern).count() as u32
}

/// Occurrences of each cue's `side` pattern, summed over passages. Matches do
/// not span passage boundaries.
pub fn count_cues(passages: &[Passage], lexicon: &CueLexicon, side: Lang) -> Vec<u32> {
    lexicon
        .cues
        .iter()
        .map(|cue| passages.iter().map(|p| occurrences(p.text(), cue.pattern(side))).sum())
        .collect()
}

/// Bead costs are snapped to a grid of 2^-24 so that sums along a path are
/// exact. Path comparison then no longer depends on the order of additions,
/// and equal-cost alignments are genuine ties.
const COST_GRID: f64 = (1u64 << 24) as f64;

fn snap(cost: f64) -> f64 {
    (cost * COST_GRID).round() / COST_GRID
}

fn cue_term(v: u32, w: u32, sd: f64, floor: f64) -> f64 {
    let d = w as f64 - v as f64;
    if d == 0.0 {
        return 0.0;
    }
    neg_log_probability(d / sd, Default::default(), floor)
}

fn sum_cue_terms(v: &[u32], w: &[u32], sds: &[f64], floor: f64) -> f64 {
    v.iter().zip(w).zip(sds).fold(0.0, |acc, ((&v, &w), &sd)| acc + cue_term(v, w, sd, floor))
}

/// `sum_i -ln Pr(w_i - v_i | match)` with the default probability floor.
pub fn lexical_cost(v: &[u32], w: &[u32], lexicon: &CueLexicon) -> Result<f64, LexiconError> {
    lexical_cost_with_floor(v, w, lexicon, DEFAULT_PROB_FLOOR)
}

pub fn lexical_cost_with_floor(v: &[u32], w: &[u32], lexicon: &CueLexicon, floor: f64) -> Result<f64, LexiconError> {
    if v.len() != lexicon.len() || w.len() != lexicon.len() {
        return Err(LexiconError::SizeMismatch { cues: lexicon.len(), english: v.len(), chinese: w.len() });
    }
    Ok(sum_cue_terms(v, w, &lexicon.std_devs(), floor))
}

/// Length cost plus cue cost of one bead, computed directly from the passage
/// texts.
pub fn combined_cost(
    bead: &Bead,
    english: &Document,
    chinese: &Document,
    params: &LengthModelParams,
    lexicon: &CueLexicon,
) -> Result<f64, ScoreError> {
    if bead.eng.end > english.len() || bead.chi.end > chinese.len() {
        return Err(ScoreError::OutOfRange);
    }
    let eng = &english.passages()[bead.eng.clone()];
    let chi = &chinese.passages()[bead.chi.clone()];
    let l1: HybridLength = eng.iter().map(Passage::length).sum();
    let l2: HybridLength = chi.iter().map(Passage::length).sum();
    let length = crate::length_model::match_cost(l1, l2, bead.cls(), params)?;
    let v = count_cues(eng, lexicon, Lang::English);
    let w = count_cues(chi, lexicon, Lang::Chinese);
    Ok(snap(length + lexical_cost_with_floor(&v, &w, lexicon, params.floor)?))
}

/// Prefix sums of lengths and cue counts over a run of passages.
#[derive(Debug, Clone)]
struct SideProfile {
    lengths: Vec<u64>,
    counts: Vec<u32>,
    cues: usize,
}

impl SideProfile {
    fn new(passages: &[Passage], lexicon: &CueLexicon, side: Lang) -> Self {
        let units: Vec<Range<usize>> = (0..passages.len()).map(|i| i..i + 1).collect();
        Self::grouped(passages, &units, lexicon, side)
    }

    /// One unit per group; a unit's length and counts are the sums over its
    /// passages.
    fn grouped(passages: &[Passage], groups: &[Range<usize>], lexicon: &CueLexicon, side: Lang) -> Self {
        let k = lexicon.len();
        let mut lengths = Vec::with_capacity(groups.len() + 1);
        let mut counts = vec![0u32; (groups.len() + 1) * k];
        lengths.push(0);
        for (i, g) in groups.iter().enumerate() {
            let unit = &passages[g.clone()];
            lengths.push(lengths[i] + unit.iter().map(|p| p.length().get()).sum::<u64>());
            for (q, cue) in lexicon.cues.iter().enumerate() {
                let c: u32 = unit.iter().map(|p| occurrences(p.text(), cue.pattern(side))).sum();
                counts[(i + 1) * k + q] = counts[i * k + q] + c;
            }
        }
        SideProfile { lengths, counts, cues: k }
    }

    fn len(&self) -> usize {
        self.lengths.len() - 1
    }

    fn length(&self, r: Range<usize>) -> HybridLength {
        HybridLength(self.lengths[r.end] - self.lengths[r.start])
    }

    fn count(&self, r: &Range<usize>, q: usize) -> u32 {
        self.counts[r.end * self.cues + q] - self.counts[r.start * self.cues + q]
    }
}

/// Scores candidate beads in O(cues) time from per-document prefix sums.
#[derive(Debug, Clone)]
pub struct BeadScorer<'a> {
    eng: SideProfile,
    chi: SideProfile,
    params: &'a LengthModelParams,
    sds: Vec<f64>,
    prior_costs: [f64; 6],
}

impl<'a> BeadScorer<'a> {
    pub fn new(
        english: &[Passage],
        chinese: &[Passage],
        params: &'a LengthModelParams,
        lexicon: &CueLexicon,
    ) -> Result<Self, ScoreError> {
        params.validate()?;
        Ok(Self::from_profiles(
            SideProfile::new(english, lexicon, Lang::English),
            SideProfile::new(chinese, lexicon, Lang::Chinese),
            params,
            lexicon,
        ))
    }

    /// Scores beads over groups of passages (paragraphs, say) rather than
    /// single passages. Groups must lie within their passage slices.
    pub fn grouped(
        english: &[Passage],
        english_groups: &[Range<usize>],
        chinese: &[Passage],
        chinese_groups: &[Range<usize>],
        params: &'a LengthModelParams,
        lexicon: &CueLexicon,
    ) -> Result<Self, ScoreError> {
        params.validate()?;
        let fits = |groups: &[Range<usize>], n: usize| groups.iter().all(|g| g.start <= g.end && g.end <= n);
        if !fits(english_groups, english.len()) || !fits(chinese_groups, chinese.len()) {
            return Err(ScoreError::OutOfRange);
        }
        Ok(Self::from_profiles(
            SideProfile::grouped(english, english_groups, lexicon, Lang::English),
            SideProfile::grouped(chinese, chinese_groups, lexicon, Lang::Chinese),
            params,
            lexicon,
        ))
    }

    fn from_profiles(eng: SideProfile, chi: SideProfile, params: &'a LengthModelParams, lexicon: &CueLexicon) -> Self {
        let mut prior_costs = [0.0; 6];
        for (slot, (_, p)) in prior_costs.iter_mut().zip(params.priors.iter()) {
            *slot = -p.ln();
        }
        BeadScorer { eng, chi, params, sds: lexicon.std_devs(), prior_costs }
    }

    pub fn english_len(&self) -> usize {
        self.eng.len()
    }

    pub fn chinese_len(&self) -> usize {
        self.chi.len()
    }

    /// Cost of the bead of class `cls` starting at English passage `i` and
    /// Chinese passage `j`. `cls` must be producible and the bead must fit.
    pub fn cost(&self, cls: BeadClass, i: usize, j: usize) -> f64 {
        let rank = cls.rank().expect("scored classes are producible");
        let er = i..i + cls.a as usize;
        let cr = j..j + cls.b as usize;
        let d = bead_delta(self.eng.length(er.clone()), self.chi.length(cr.clone()), cls, self.params)
            .expect("clamped delta is defined");
        let length = neg_log_probability(d.0, self.params.probability, self.params.floor) + self.prior_costs[rank];
        let lexical = self.sds.iter().enumerate().fold(0.0, |acc, (q, &sd)| {
            acc + cue_term(self.eng.count(&er, q), self.chi.count(&cr, q), sd, self.params.floor)
        });
        snap(length + lexical)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cue {0} has an empty pattern")]
    EmptyPattern(usize),
    #[error("cue variance must be positive, got {0}")]
    BadVariance(f64),
    #[error("count vectors ({english}, {chinese}) do not match the lexicon size {cues}")]
    SizeMismatch { cues: usize, english: usize, chinese: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("bead lies outside the documents")]
    OutOfRange,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PassageKind;
    use proptest::prelude::*;

    fn passages(lang: Lang, texts: &[&str]) -> Document {
        Document::new(lang, texts.iter().map(|t| (*t, PassageKind::Sentence)), [0]).unwrap()
    }

    fn lex(pairs: &[(&str, &str)]) -> CueLexicon {
        CueLexicon::new(pairs.iter().map(|(e, c)| Cue::new(*e, *c)).collect(), DEFAULT_CUE_VARIANCE).unwrap()
    }

    #[test]
    fn counting_examples() {
        let doc = passages(Lang::English, &["THE HONOURABLE TIK CHI-YUEN"]);
        assert_eq!(count_cues(doc.passages(), &lex(&[("J.P.", "J.P.")]), Lang::English), vec![0]);

        let doc = passages(Lang::Chinese, &["¶布政司霍德爵士議員, K.B.E., L.V.O., J.P."]);
        let l = lex(&[("K.B.E.", "K.B.E."), ("L.V.O.", "L.V.O."), ("J.P.", "J.P.")]);
        assert_eq!(count_cues(doc.passages(), &l, Lang::Chinese), vec![1, 1, 1]);

        let doc = passages(Lang::English, &["January January"]);
        assert_eq!(count_cues(doc.passages(), &lex(&[("January", "一月")]), Lang::English), vec![2]);
    }

    #[test]
    fn counting_is_case_sensitive_and_per_passage() {
        let doc = passages(Lang::English, &["The Governor spoke.", "the governor", "gover", "nor"]);
        assert_eq!(count_cues(doc.passages(), &lex(&[("governor", "總督")]), Lang::English), vec![1]);
    }

    #[test]
    fn lexical_cost_examples() {
        let l3 = lex(&[("a", "b"), ("c", "d"), ("e", "f")]);
        assert_eq!(lexical_cost(&[0, 0, 0], &[0, 0, 0], &l3), Ok(0.0));
        let l1 = lex(&[("J.P.", "J.P.")]);
        assert_eq!(lexical_cost(&[1], &[1], &l1), Ok(0.0));
        // 2 * (1 - Phi(1 / sqrt(0.07))) = 1.5710e-4 from a quadrature oracle
        // (see length_model tests); -ln of that is 8.7586.
        let cost = lexical_cost(&[1], &[0], &l1).unwrap();
        assert!((cost - 8.7586).abs() < 1e-3, "{cost}");
        assert_eq!(
            lexical_cost(&[1, 2], &[1], &l1),
            Err(LexiconError::SizeMismatch { cues: 1, english: 2, chinese: 1 })
        );
    }

    #[test]
    fn combined_cost_examples() {
        let params = LengthModelParams::default();
        let en = passages(Lang::English, &["Sunday is a day of rest in J.P.'s view."]);
        let zh = passages(Lang::Chinese, &["星期日是休息日，J.P.說。"]);
        let bead = Bead::new(0..1, 0..1).unwrap();
        let l1 = en.passages()[0].length();
        let l2 = zh.passages()[0].length();
        let length_only = crate::length_model::match_cost(l1, l2, BeadClass::ONE_ONE, &params).unwrap();
        let empty = combined_cost(&bead, &en, &zh, &params, &CueLexicon::empty()).unwrap();
        assert!((empty - length_only).abs() < 1e-7);
        let matched = combined_cost(&bead, &en, &zh, &params, &lex(&[("Sunday", "星期日"), ("J.P.", "J.P.")])).unwrap();
        assert_eq!(matched, empty);
        assert_eq!(empty * f64::from(1u32 << 24), (empty * f64::from(1u32 << 24)).round());
        let one_sided = combined_cost(&bead, &en, &zh, &params, &lex(&[("Sunday", "星期一")])).unwrap();
        assert!(one_sided > length_only);
    }

    #[test]
    fn scorer_matches_direct_route() {
        let params = LengthModelParams::default();
        let en = passages(Lang::English, &["On Monday, J.P.", "the governor said", "x", "Sunday and Monday."]);
        let zh = passages(Lang::Chinese, &["星期一", "總督說J.P.", "星期日", "好"]);
        let lexicon = CueLexicon::legco_sentence();
        let scorer = BeadScorer::new(en.passages(), zh.passages(), &params, &lexicon).unwrap();
        for cls in BeadClass::PRODUCIBLE {
            for i in 0..=en.len() - cls.a as usize {
                for j in 0..=zh.len() - cls.b as usize {
                    let bead = Bead::at(cls, i, j);
                    let direct = combined_cost(&bead, &en, &zh, &params, &lexicon).unwrap();
                    assert_eq!(scorer.cost(cls, i, j), direct, "{cls} at {i},{j}");
                }
            }
        }
    }

    #[test]
    fn bundled_lexicons() {
        let s = CueLexicon::legco_sentence();
        assert_eq!(s.len(), 30);
        assert_eq!(s.variance(), 0.07);
        assert_eq!(s.cues()[0], Cue::new("C.B.E.", "C.B.E."));
        assert_eq!(s.cues().last().unwrap(), &Cue::new("governor", "總督"));
        let p = CueLexicon::legco_paragraph();
        assert_eq!(p.cues(), &[Cue::new(":", ":"), Cue::new("governor", "總督")]);
        let independent = s.independent_cues();
        let names: Vec<&str> = independent.iter().map(|&i| s.cues()[i].english.as_str()).collect();
        assert!(!names.contains(&"November") && !names.contains(&"December"));
        assert!(names.contains(&"January") && names.contains(&"J.P."));
        assert_eq!(names.len(), 28);
    }

    #[test]
    fn lexicon_file_parsing() {
        let l = CueLexicon::parse_file("# c\nvariance=0.5\nA\tB\nC\tD\t0.2\n").unwrap();
        assert_eq!(l.variance(), 0.5);
        assert_eq!(l.cues()[1].variance, Some(0.2));
        assert_eq!(CueLexicon::parse_file(&l.to_file_string()).unwrap(), l);
        assert!(matches!(CueLexicon::parse_file("A B\n"), Err(LexiconError::Syntax { line: 1, .. })));
        assert!(matches!(CueLexicon::parse_file("x\t\n"), Err(LexiconError::Syntax { .. })));
        assert!(CueLexicon::parse_file("variance=0\n").is_err());
        assert!(CueLexicon::parse_file("").unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn lexical_cost_properties(pairs in prop::collection::vec((0u32..5, 0u32..5), 0..8)) {
            let cues: Vec<(String, String)> = (0..pairs.len()).map(|i| (format!("e{i}"), format!("c{i}"))).collect();
            let l = CueLexicon::new(cues.iter().map(|(e, c)| Cue::new(e.clone(), c.clone())).collect(), 0.07).unwrap();
            let v: Vec<u32> = pairs.iter().map(|p| p.0).collect();
            let w: Vec<u32> = pairs.iter().map(|p| p.1).collect();
            let cost = lexical_cost(&v, &w, &l).unwrap();
            prop_assert!(cost >= 0.0);
            prop_assert_eq!(cost == 0.0, v == w);
            // Swapping sides flips every delta's sign.
            prop_assert_eq!(lexical_cost(&w, &v, &l).unwrap(), cost);
            // Additive across cues.
            let single = |i: usize| {
                let li = CueLexicon::new(vec![l.cues()[i].clone()], 0.07).unwrap();
                lexical_cost(&v[i..=i], &w[i..=i], &li).unwrap()
            };
            let parts: f64 = (0..pairs.len()).map(single).sum();
            prop_assert!((parts - cost).abs() <= 1e-9 * cost.max(1.0));
        }
    }
}
