//! Minimum-cost monotone alignment by dynamic programming.
//!
//! `D(i, j)` is the cheapest way to align the first `i` English and first `j`
//! Chinese passages; each cell looks back over the six producible bead
//! classes. Ties go to the earlier class in [`BeadClass::PRODUCIBLE`].

use std::ops::Range;

use thiserror::Error;

use crate::corpus::{Alignment, Bead, BeadClass, Document, Passage};
use crate::length_model::LengthModelParams;
use crate::lexical::{combined_cost, BeadScorer, CueLexicon, ScoreError};

/// Largest document size [`align_bruteforce`] accepts on either side.
pub const BRUTEFORCE_LIMIT: usize = 8;

const NO_BACK: u8 = u8::MAX;

/// Cells of the DP table that may be visited: for each English prefix `i`, a
/// contiguous run of Chinese prefixes.
#[derive(Debug, Clone)]
struct Band {
    lo: Vec<usize>,
    hi: Vec<usize>,
    offset: Vec<usize>,
}

impl Band {
    fn full(n1: usize, n2: usize) -> Self {
        Self::from_bounds(vec![0; n1 + 1], vec![n2; n1 + 1])
    }

    /// Cells with `|i*n2/n1 - j| <= width`.
    fn diagonal(n1: usize, n2: usize, width: usize) -> Self {
        if n1 == 0 {
            return Self::full(n1, n2);
        }
        let (n1i, n2i, w) = (n1 as i128, n2 as i128, width as i128);
        let (lo, hi) = (0..=n1 as i128)
            .map(|i| {
                let lo = (i * n2i - w * n1i).div_euclid(n1i) + i128::from((i * n2i - w * n1i).rem_euclid(n1i) != 0);
                let hi = (i * n2i + w * n1i).div_euclid(n1i);
                (lo.clamp(0, n2i) as usize, hi.clamp(0, n2i) as usize)
            })
            .unzip();
        Self::from_bounds(lo, hi)
    }

    fn from_bounds(lo: Vec<usize>, hi: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(lo.len() + 1);
        offset.push(0);
        for (l, h) in lo.iter().zip(&hi) {
            offset.push(offset.last().unwrap() + (h + 1 - l));
        }
        Band { lo, hi, offset }
    }

    fn cells(&self) -> usize {
        *self.offset.last().unwrap()
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        if j < self.lo[i] || j > self.hi[i] {
            return None;
        }
        Some(self.offset[i] + j - self.lo[i])
    }
}

/// Runs the DP over an arbitrary bead cost. `cost(cls, i, j)` scores the bead
/// of class `cls` whose ranges start at English `i` and Chinese `j`.
///
/// Returns `None` only when `band` leaves no path from `(0, 0)` to
/// `(n1, n2)`.
pub fn solve<F>(n1: usize, n2: usize, band: Option<usize>, cost: F) -> Option<Alignment>
where
    F: Fn(BeadClass, usize, usize) -> f64,
{
    let band = match band {
        Some(w) if w < n2.max(1) => Band::diagonal(n1, n2, w),
        _ => Band::full(n1, n2),
    };
    let mut total = vec![f64::INFINITY; band.cells()];
    let mut back = vec![NO_BACK; band.cells()];
    for i in 0..=n1 {
        for j in band.lo[i]..=band.hi[i] {
            let here = band.index(i, j).unwrap();
            if i == 0 && j == 0 {
                total[here] = 0.0;
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_rank = NO_BACK;
            for (rank, cls) in BeadClass::PRODUCIBLE.iter().enumerate() {
                let (a, b) = (cls.a as usize, cls.b as usize);
                if a > i || b > j {
                    continue;
                }
                let Some(prev) = band.index(i - a, j - b) else { continue };
                if total[prev] == f64::INFINITY {
                    continue;
                }
                let candidate = total[prev] + cost(*cls, i - a, j - b);
                if candidate < best {
                    best = candidate;
                    best_rank = rank as u8;
                }
            }
            total[here] = best;
            back[here] = best_rank;
        }
    }
    let end = band.index(n1, n2)?;
    if total[end] == f64::INFINITY {
        return None;
    }
    let mut beads = Vec::new();
    let (mut i, mut j) = (n1, n2);
    while i > 0 || j > 0 {
        let cls = BeadClass::PRODUCIBLE[back[band.index(i, j).unwrap()] as usize];
        i -= cls.a as usize;
        j -= cls.b as usize;
        beads.push(Bead::at(cls, i, j));
    }
    beads.reverse();
    Some(Alignment::new(beads, total[end]))
}

fn align_slices(
    english: &[Passage],
    chinese: &[Passage],
    params: &LengthModelParams,
    lexicon: &CueLexicon,
    band: Option<usize>,
) -> Result<Alignment, AlignError> {
    let scorer = BeadScorer::new(english, chinese, params, lexicon)?;
    let (n1, n2) = (english.len(), chinese.len());
    let mut width = band;
    loop {
        if let Some(al) = solve(n1, n2, width, |cls, i, j| scorer.cost(cls, i, j)) {
            return Ok(al);
        }
        // The band admits no path; widen it until it does.
        width = width.map(|w| (w.max(1) * 2).min(n1.max(n2)));
    }
}

/// Minimum-cost alignment of two documents over the six producible classes.
pub fn align(
    english: &Document,
    chinese: &Document,
    params: &LengthModelParams,
    lexicon: &CueLexicon,
) -> Result<Alignment, AlignError> {
    align_slices(english.passages(), chinese.passages(), params, lexicon, None)
}

/// [`align`] restricted to cells within `band` passages of the diagonal. The
/// band is widened automatically if it admits no complete path.
pub fn align_banded(
    english: &Document,
    chinese: &Document,
    params: &LengthModelParams,
    lexicon: &CueLexicon,
    band: usize,
) -> Result<Alignment, AlignError> {
    align_slices(english.passages(), chinese.passages(), params, lexicon, Some(band))
}

/// Exhaustive search over every valid alignment, scoring each bead directly
/// from the passage text. Exponential; only for documents of at most
/// [`BRUTEFORCE_LIMIT`] passages per side.
pub fn align_bruteforce(
    english: &Document,
    chinese: &Document,
    params: &LengthModelParams,
    lexicon: &CueLexicon,
) -> Result<Alignment, AlignError> {
    let (n1, n2) = (english.len(), chinese.len());
    if n1 > BRUTEFORCE_LIMIT || n2 > BRUTEFORCE_LIMIT {
        return Err(AlignError::SizeLimit { n1, n2, limit: BRUTEFORCE_LIMIT });
    }
    params.validate().map_err(ScoreError::from)?;
    // Precompute every bead cost so enumeration only adds.
    let mut table = vec![[f64::NAN; 6]; (n1 + 1) * (n2 + 1)];
    for i in 0..=n1 {
        for j in 0..=n2 {
            for (rank, cls) in BeadClass::PRODUCIBLE.iter().enumerate() {
                if i + cls.a as usize <= n1 && j + cls.b as usize <= n2 {
                    let bead = Bead::at(*cls, i, j);
                    table[i * (n2 + 1) + j][rank] = combined_cost(&bead, english, chinese, params, lexicon)?;
                }
            }
        }
    }

    struct Search<'t> {
        n1: usize,
        n2: usize,
        table: &'t [[f64; 6]],
        path: Vec<u8>,
        best: Option<(f64, Vec<u8>)>,
    }

    impl Search<'_> {
        fn walk(&mut self, i: usize, j: usize, cost: f64) {
            if i == self.n1 && j == self.n2 {
                let better = match &self.best {
                    None => true,
                    Some((c, p)) => cost < *c || (cost == *c && reversed_less(&self.path, p)),
                };
                if better {
                    self.best = Some((cost, self.path.clone()));
                }
                return;
            }
            for (rank, cls) in BeadClass::PRODUCIBLE.iter().enumerate() {
                let (a, b) = (cls.a as usize, cls.b as usize);
                if i + a > self.n1 || j + b > self.n2 {
                    continue;
                }
                let c = self.table[i * (self.n2 + 1) + j][rank];
                self.path.push(rank as u8);
                self.walk(i + a, j + b, cost + c);
                self.path.pop();
            }
        }
    }

    let mut search = Search { n1, n2, table: &table, path: Vec::new(), best: None };
    search.walk(0, 0, 0.0);
    let (cost, ranks) = search.best.expect("at least one alignment exists");
    let (mut i, mut j) = (0, 0);
    let beads = ranks
        .iter()
        .map(|&r| {
            let cls = BeadClass::PRODUCIBLE[r as usize];
            let bead = Bead::at(cls, i, j);
            i += cls.a as usize;
            j += cls.b as usize;
            bead
        })
        .collect();
    Ok(Alignment::new(beads, cost))
}

/// Tie-break between equal-cost alignments: compare class ranks from the last
/// bead backwards, lower rank first. This is the order the DP backtrace
/// realizes.
fn reversed_less(a: &[u8], b: &[u8]) -> bool {
    a.iter().rev().lt(b.iter().rev())
}

/// Two-pass alignment: paragraphs first with `paragraph_lexicon`, then
/// sentences inside each aligned paragraph block with `sentence_lexicon`.
pub fn align_anchored(
    english: &Document,
    chinese: &Document,
    params: &LengthModelParams,
    paragraph_lexicon: &CueLexicon,
    sentence_lexicon: &CueLexicon,
) -> Result<Alignment, AlignError> {
    let eng_paras = english.paragraphs();
    let chi_paras = chinese.paragraphs();
    let scorer = BeadScorer::grouped(english.passages(), &eng_paras, chinese.passages(), &chi_paras, params, paragraph_lexicon)?;
    let coarse = solve(eng_paras.len(), chi_paras.len(), None, |cls, i, j| scorer.cost(cls, i, j))
        .expect("full table always has a path");
    let span = |paras: &[Range<usize>], r: &Range<usize>| -> Range<usize> {
        if r.is_empty() {
            // Position of an empty block: start of the next paragraph.
            let at = paras.get(r.start).map_or_else(|| paras.last().map_or(0, |p| p.end), |p| p.start);
            at..at
        } else {
            paras[r.start].start..paras[r.end - 1].end
        }
    };
    let mut out = Alignment::default();
    for block in &coarse.beads {
        let er = span(&eng_paras, &block.eng);
        let cr = span(&chi_paras, &block.chi);
        let fine = align_slices(&english.passages()[er], &chinese.passages()[cr], params, sentence_lexicon, None)?;
        out.extend_shifted(&fine);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("exhaustive search is limited to {limit} passages per side, got {n1} and {n2}")]
    SizeLimit { n1: usize, n2: usize, limit: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{validate_alignment, Lang, PassageKind};
    use crate::length_metric::HybridLength;
    use crate::length_model::match_cost;
    use proptest::prelude::*;

    fn filler(width: u64, wide: bool) -> String {
        if wide {
            let mut s = "中".repeat((width / 2) as usize);
            if width % 2 == 1 {
                s.push('x');
            }
            s
        } else {
            "a".repeat(width as usize)
        }
    }

    fn doc_of(lang: Lang, lengths: &[u64]) -> Document {
        Document::from_sentences(lang, lengths.iter().map(|&l| filler(l, lang == Lang::Chinese))).unwrap()
    }

    #[test]
    fn empty_documents() {
        let p = LengthModelParams::default();
        let al = align(&Document::empty(Lang::English), &Document::empty(Lang::Chinese), &p, &CueLexicon::empty()).unwrap();
        assert!(al.beads.is_empty());
        assert_eq!(al.total_cost, 0.0);
    }

    #[test]
    fn one_empty_side() {
        let p = LengthModelParams::default();
        let en = doc_of(Lang::English, &[10, 20, 30]);
        let al = align(&en, &Document::empty(Lang::Chinese), &p, &CueLexicon::empty()).unwrap();
        assert_eq!(al.classes().collect::<Vec<_>>(), vec![BeadClass::ONE_ZERO; 3]);
        let zh = doc_of(Lang::Chinese, &[10, 20]);
        let al = align(&Document::empty(Lang::English), &zh, &p, &CueLexicon::empty()).unwrap();
        assert_eq!(al.classes().collect::<Vec<_>>(), vec![BeadClass::ZERO_ONE; 2]);
    }

    #[test]
    fn single_pair_prefers_one_to_one() {
        let p = LengthModelParams::default();
        let en = doc_of(Lang::English, &[100]);
        let zh = doc_of(Lang::Chinese, &[51]);
        let one = match_cost(HybridLength(100), HybridLength(51), BeadClass::ONE_ONE, &p).unwrap();
        let split = match_cost(HybridLength(100), HybridLength(0), BeadClass::ONE_ZERO, &p).unwrap()
            + match_cost(HybridLength(0), HybridLength(51), BeadClass::ZERO_ONE, &p).unwrap();
        assert!(one < 0.5 && split > 9.23, "{one} {split}");
        let al = align(&en, &zh, &p, &CueLexicon::empty()).unwrap();
        assert_eq!(al.beads, vec![Bead::new(0..1, 0..1).unwrap()]);
        assert!((al.total_cost - one).abs() < 1e-7);
    }

    #[test]
    fn bruteforce_small_enumerations() {
        let p = LengthModelParams::default();
        let lex = CueLexicon::empty();
        let en = doc_of(Lang::English, &[40, 35]);
        let zh = doc_of(Lang::Chinese, &[38]);
        let brute = align_bruteforce(&en, &zh, &p, &lex).unwrap();
        // Candidates: {2-1}, {1-1, 1-0}, {1-0, 1-1}, {1-0, 1-0, 0-1}, and
        // orderings of the orphans.
        let c = |cls, i, j| combined_cost(&Bead::at(cls, i, j), &en, &zh, &p, &lex).unwrap();
        let options = [
            c(BeadClass::TWO_ONE, 0, 0),
            c(BeadClass::ONE_ONE, 0, 0) + c(BeadClass::ONE_ZERO, 1, 1),
            c(BeadClass::ONE_ZERO, 0, 0) + c(BeadClass::ONE_ONE, 1, 0),
        ];
        let min = options.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(brute.total_cost, min);
        assert_eq!(brute.classes().collect::<Vec<_>>(), vec![BeadClass::TWO_ONE]);
        assert_eq!(align(&en, &zh, &p, &lex).unwrap(), brute);
    }

    #[test]
    fn bruteforce_guard() {
        let p = LengthModelParams::default();
        let en = doc_of(Lang::English, &[10; 9]);
        let zh = doc_of(Lang::Chinese, &[5; 2]);
        assert!(matches!(
            align_bruteforce(&en, &zh, &p, &CueLexicon::empty()),
            Err(AlignError::SizeLimit { n1: 9, .. })
        ));
    }

    #[test]
    fn ties_go_to_the_earlier_class() {
        // 1-1 ties with 1-0 + 0-1; 1-1 comes first.
        let al = solve(1, 1, None, |cls, _, _| if cls == BeadClass::ONE_ONE { 2.0 } else { 1.0 }).unwrap();
        assert_eq!(al.classes().collect::<Vec<_>>(), vec![BeadClass::ONE_ONE]);
        // Both orphan orders tie; the last bead is decided first and 0-1 wins it.
        let al = solve(1, 1, None, |cls, _, _| if cls == BeadClass::ONE_ONE { 3.0 } else { 1.0 }).unwrap();
        assert_eq!(al.classes().collect::<Vec<_>>(), vec![BeadClass::ONE_ZERO, BeadClass::ZERO_ONE]);
    }

    #[test]
    fn band_geometry() {
        let b = Band::diagonal(4, 8, 1);
        assert_eq!(b.lo, vec![0, 1, 3, 5, 7]);
        assert_eq!(b.hi, vec![1, 3, 5, 7, 8]);
        assert!(b.index(2, 2).is_none());
        let b = Band::diagonal(3, 3, 0);
        assert_eq!((b.lo.clone(), b.hi.clone()), (vec![0, 1, 2, 3], vec![0, 1, 2, 3]));
    }

    #[test]
    fn narrow_band_is_widened() {
        let p = LengthModelParams::default();
        // The true path leaves the zero-width diagonal.
        let en = doc_of(Lang::English, &[50, 50, 100, 40, 40, 40]);
        let zh = doc_of(Lang::Chinese, &[51, 25, 25, 20, 20, 20]);
        let full = align(&en, &zh, &p, &CueLexicon::empty()).unwrap();
        let banded = align_banded(&en, &zh, &p, &CueLexicon::empty(), 0).unwrap();
        assert!(validate_alignment(&banded, 6, 6).is_ok());
        assert!(banded.total_cost >= full.total_cost);
        assert_eq!(align_banded(&en, &zh, &p, &CueLexicon::empty(), 6).unwrap(), full);
    }

    #[test]
    fn anchored_alignment_respects_paragraphs() {
        let p = LengthModelParams::default();
        let en = Document::new(
            Lang::English,
            [("a".repeat(60), PassageKind::Sentence), ("b".repeat(80), PassageKind::Sentence), ("c".repeat(40), PassageKind::Sentence)],
            [0, 2],
        )
        .unwrap();
        let zh = Document::new(
            Lang::Chinese,
            [("中".repeat(15), PassageKind::Sentence), ("中".repeat(20), PassageKind::Sentence), ("中".repeat(10), PassageKind::Sentence)],
            [0, 2],
        )
        .unwrap();
        let lex = CueLexicon::empty();
        let al = align_anchored(&en, &zh, &p, &lex, &lex).unwrap();
        assert!(validate_alignment(&al, 3, 3).is_ok());
        assert_eq!(al, align(&en, &zh, &p, &lex).unwrap());
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<u64>, Vec<u64>)> {
        (prop::collection::vec(1u64..120, 0..6), prop::collection::vec(1u64..70, 0..6))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_bruteforce((e, c) in arb_instance()) {
            let p = LengthModelParams::default();
            let en = doc_of(Lang::English, &e);
            let zh = doc_of(Lang::Chinese, &c);
            let dp = align(&en, &zh, &p, &CueLexicon::empty()).unwrap();
            let brute = align_bruteforce(&en, &zh, &p, &CueLexicon::empty()).unwrap();
            prop_assert_eq!(&dp.beads, &brute.beads);
            prop_assert!((dp.total_cost - brute.total_cost).abs() <= 1e-9);
            prop_assert!(validate_alignment(&dp, e.len(), c.len()).is_ok());
        }

        #[test]
        fn prefixes_are_optimal((e, c) in arb_instance()) {
            let p = LengthModelParams::default();
            let en = doc_of(Lang::English, &e);
            let zh = doc_of(Lang::Chinese, &c);
            let full = align(&en, &zh, &p, &CueLexicon::empty()).unwrap();
            let mut running = 0.0;
            for k in 0..full.beads.len() {
                let bead = &full.beads[k];
                running += combined_cost(bead, &en, &zh, &p, &CueLexicon::empty()).unwrap();
                let (i, j) = (bead.eng.end, bead.chi.end);
                let pe = doc_of(Lang::English, &e[..i]);
                let pz = doc_of(Lang::Chinese, &c[..j]);
                let prefix = align(&pe, &pz, &p, &CueLexicon::empty()).unwrap();
                prop_assert!((prefix.total_cost - running).abs() <= 1e-9 * running.max(1.0));
            }
        }

        #[test]
        fn positive_scaling_keeps_argmin((e, c) in arb_instance(), k in 0.1f64..10.0) {
            let p = LengthModelParams::default();
            let en = doc_of(Lang::English, &e);
            let zh = doc_of(Lang::Chinese, &c);
            let scorer = BeadScorer::new(en.passages(), zh.passages(), &p, &CueLexicon::empty()).unwrap();
            let base = solve(e.len(), c.len(), None, |cls, i, j| scorer.cost(cls, i, j)).unwrap();
            let scaled = solve(e.len(), c.len(), None, |cls, i, j| k * scorer.cost(cls, i, j)).unwrap();
            // Exact ties may resolve differently after rounding, so compare
            // the optimum rather than the bead sequence.
            let rescored: f64 = scaled.beads.iter().map(|b| scorer.cost(b.cls(), b.eng.start, b.chi.start)).sum();
            prop_assert!((rescored - base.total_cost).abs() <= 1e-9 * base.total_cost.max(1.0));
            prop_assert!((scaled.total_cost - k * base.total_cost).abs() <= 1e-9 * scaled.total_cost.max(1.0));
        }

        #[test]
        fn generous_band_equals_full((e, c) in (prop::collection::vec(1u64..120, 1..30), prop::collection::vec(1u64..70, 1..30))) {
            let p = LengthModelParams::default();
            let en = doc_of(Lang::English, &e);
            let zh = doc_of(Lang::Chinese, &c);
            let full = align(&en, &zh, &p, &CueLexicon::empty()).unwrap();
            let banded = align_banded(&en, &zh, &p, &CueLexicon::empty(), e.len().max(c.len())).unwrap();
            prop_assert_eq!(full, banded);
        }
    }
}
