//! Scoring a produced alignment against a gold alignment.
//!
//! A gold bead is correct only if the output contains the identical bead.
//! Type I is the share of gold beads reproduced; Type II is the share of
//! output 1-1 beads that are correct.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_alignment, Alignment, Bead, BeadClass, Violation};

/// Passage-id window for restricted scoring. A bead is inside when every
/// passage it covers is inside; an empty side must sit within the window's
/// bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub eng: Range<usize>,
    pub chi: Range<usize>,
}

impl Region {
    pub fn contains(&self, bead: &Bead) -> bool {
        fn side(window: &Range<usize>, r: &Range<usize>) -> bool {
            window.start <= r.start && r.end <= window.end
        }
        side(&self.eng, &bead.eng) && side(&self.chi, &bead.chi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRow {
    #[serde(with = "class_string")]
    pub class: BeadClass,
    pub total: usize,
    pub correct: usize,
    pub incorrect: usize,
}

impl ClassRow {
    pub fn percent_correct(&self) -> f64 {
        rate(self.correct, self.total) * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub type1_accuracy: f64,
    pub type2_precision: f64,
    pub gold_beads: usize,
    pub correct_beads: usize,
    pub output_one_one: usize,
    pub output_one_one_correct: usize,
    /// One row per gold bead class, in display order.
    pub per_class: Vec<ClassRow>,
    /// Output bead counts per class, in display order.
    pub output_counts: Vec<(String, usize)>,
}

/// Column order: the multi-sentence classes first, orphans after, then
/// anything else.
fn display_rank(cls: BeadClass) -> (usize, BeadClass) {
    const ORDER: [(u8, u8); 9] = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (3, 3), (0, 1), (1, 0)];
    let pos = ORDER.iter().position(|&(a, b)| cls == BeadClass::new(a, b)).unwrap_or(ORDER.len());
    (pos, cls)
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `output` against `gold`. With a region, beads not wholly inside it
/// are ignored on both sides.
pub fn evaluate(output: &Alignment, gold: &Alignment, region: Option<&Region>) -> Result<EvalReport, EvalError> {
    let out_cov = output.coverage();
    let gold_cov = gold.coverage();
    if out_cov != gold_cov {
        return Err(EvalError::CoverageMismatch { output: out_cov, gold: gold_cov });
    }
    validate_alignment(output, out_cov.0, out_cov.1).map_err(EvalError::InvalidOutput)?;
    validate_alignment(gold, gold_cov.0, gold_cov.1).map_err(EvalError::InvalidGold)?;

    let inside = |b: &&Bead| region.is_none_or(|r| r.contains(b));
    let produced: HashSet<&Bead> = output.beads.iter().collect();
    let gold_set: HashSet<&Bead> = gold.beads.iter().collect();

    let mut rows: BTreeMap<(usize, BeadClass), ClassRow> = BTreeMap::new();
    for bead in gold.beads.iter().filter(inside) {
        let cls = bead.cls();
        let row = rows
            .entry(display_rank(cls))
            .or_insert(ClassRow { class: cls, total: 0, correct: 0, incorrect: 0 });
        row.total += 1;
        if produced.contains(bead) {
            row.correct += 1;
        } else {
            row.incorrect += 1;
        }
    }
    let per_class: Vec<ClassRow> = rows.into_values().collect();
    let gold_beads = per_class.iter().map(|r| r.total).sum();
    let correct_beads = per_class.iter().map(|r| r.correct).sum();

    let mut counts: BTreeMap<(usize, BeadClass), usize> = BTreeMap::new();
    let (mut one_one, mut one_one_correct) = (0, 0);
    for bead in output.beads.iter().filter(inside) {
        *counts.entry(display_rank(bead.cls())).or_default() += 1;
        if bead.cls() == BeadClass::ONE_ONE {
            one_one += 1;
            if gold_set.contains(bead) {
                one_one_correct += 1;
            }
        }
    }

    Ok(EvalReport {
        type1_accuracy: rate(correct_beads, gold_beads),
        type2_precision: rate(one_one_correct, one_one),
        gold_beads,
        correct_beads,
        output_one_one: one_one,
        output_one_one_correct: one_one_correct,
        per_class,
        output_counts: counts.into_iter().map(|((_, c), n)| (c.to_string(), n)).collect(),
    })
}

impl EvalReport {
    /// Tab-separated per-class breakdown followed by the two summary rates.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, label: &str, cell: &dyn Fn(&ClassRow) -> String| {
            out.push_str(label);
            for r in &self.per_class {
                out.push('\t');
                out.push_str(&cell(r));
            }
            out.push('\n');
        };
        row(&mut out, "", &|r| r.class.to_string());
        row(&mut out, "Total", &|r| r.total.to_string());
        row(&mut out, "Correct", &|r| r.correct.to_string());
        row(&mut out, "Incorrect", &|r| r.incorrect.to_string());
        row(&mut out, "% Correct", &|r| format!("{:.1}", r.percent_correct()));
        let _ = writeln!(
            out,
            "Type I accuracy\t{:.1}%\t({}/{})",
            self.type1_accuracy * 100.0,
            self.correct_beads,
            self.gold_beads
        );
        let _ = writeln!(
            out,
            "Type II precision\t{:.1}%\t({}/{})",
            self.type2_precision * 100.0,
            self.output_one_one_correct,
            self.output_one_one
        );
        out
    }

    pub fn row(&self, cls: BeadClass) -> Option<&ClassRow> {
        self.per_class.iter().find(|r| r.class == cls)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("alignments cover different documents: output {output:?}, gold {gold:?}")]
    CoverageMismatch { output: (usize, usize), gold: (usize, usize) },
    #[error("output alignment is invalid: {0}")]
    InvalidOutput(Violation),
    #[error("gold alignment is invalid: {0}")]
    InvalidGold(Violation),
}

mod class_string {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::corpus::BeadClass;

    pub fn serialize<S: Serializer>(cls: &BeadClass, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(cls)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BeadClass, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn al(classes: &[BeadClass]) -> Alignment {
        let (mut i, mut j) = (0, 0);
        let beads = classes
            .iter()
            .map(|&c| {
                let b = Bead::at(c, i, j);
                i += c.a as usize;
                j += c.b as usize;
                b
            })
            .collect();
        Alignment::new(beads, 0.0)
    }

    #[test]
    fn identical_alignments_score_perfectly() {
        let gold = al(&[BeadClass::ONE_ONE, BeadClass::TWO_ONE, BeadClass::ZERO_ONE, BeadClass::ONE_ONE]);
        let r = evaluate(&gold, &gold, None).unwrap();
        assert_eq!((r.type1_accuracy, r.type2_precision), (1.0, 1.0));
        assert_eq!(r.per_class.iter().map(|r| r.total).sum::<usize>(), 4);
        assert_eq!(r.row(BeadClass::ONE_ONE).unwrap().correct, 2);
    }

    #[test]
    fn empty_alignments() {
        let r = evaluate(&Alignment::default(), &Alignment::default(), None).unwrap();
        assert_eq!((r.type1_accuracy, r.type2_precision, r.gold_beads), (1.0, 1.0, 0));
    }

    #[test]
    fn merged_output_is_wrong_for_both_gold_beads() {
        let gold = al(&[BeadClass::ONE_ONE, BeadClass::ONE_ONE, BeadClass::ONE_ONE]);
        let out = al(&[BeadClass::TWO_TWO, BeadClass::ONE_ONE]);
        let r = evaluate(&out, &gold, None).unwrap();
        assert_eq!((r.correct_beads, r.gold_beads), (1, 3));
        assert_eq!((r.output_one_one_correct, r.output_one_one), (1, 1));
        assert_eq!(r.output_counts, vec![("1-1".to_string(), 1), ("2-2".to_string(), 1)]);
    }

    #[test]
    fn coverage_mismatch() {
        let gold = al(&[BeadClass::ONE_ONE]);
        let out = al(&[BeadClass::ONE_TWO]);
        assert_eq!(
            evaluate(&out, &gold, None),
            Err(EvalError::CoverageMismatch { output: (1, 2), gold: (1, 1) })
        );
    }

    #[test]
    fn region_excludes_outside_beads() {
        let gold = al(&[BeadClass::ONE_ONE, BeadClass::ONE_ONE, BeadClass::ONE_ONE]);
        let out = al(&[BeadClass::ONE_TWO, BeadClass::ONE_ZERO, BeadClass::ONE_ONE]);
        let all = evaluate(&out, &gold, None).unwrap();
        assert_eq!((all.correct_beads, all.gold_beads), (1, 3));
        let tail = Region { eng: 2..3, chi: 2..3 };
        let r = evaluate(&out, &gold, Some(&tail)).unwrap();
        assert_eq!((r.correct_beads, r.gold_beads, r.type2_precision), (1, 1, 1.0));
    }

    #[test]
    fn table_layout() {
        let gold = al(&[BeadClass::ONE_ONE, BeadClass::ONE_TWO, BeadClass::new(3, 1)]);
        let out = al(&[BeadClass::ONE_ONE, BeadClass::ONE_ONE, BeadClass::ONE_ONE, BeadClass::TWO_ONE]);
        let r = evaluate(&out, &gold, None).unwrap();
        let expected = "\t1-1\t1-2\t3-1\nTotal\t1\t1\t1\nCorrect\t1\t0\t0\nIncorrect\t0\t1\t1\n% Correct\t100.0\t0.0\t0.0\n\
                        Type I accuracy\t33.3%\t(1/3)\nType II precision\t33.3%\t(1/3)\n";
        assert_eq!(r.to_table(), expected);
    }

    fn arb_classes() -> impl Strategy<Value = Vec<BeadClass>> {
        prop::collection::vec(prop::sample::select(BeadClass::PRODUCIBLE.to_vec()), 0..30)
    }

    proptest! {
        #[test]
        fn rates_are_bounded(g in arb_classes(), o in arb_classes()) {
            let gold = al(&g);
            let out = al(&o);
            match evaluate(&out, &gold, None) {
                Ok(r) => {
                    prop_assert!((0.0..=1.0).contains(&r.type1_accuracy));
                    prop_assert!((0.0..=1.0).contains(&r.type2_precision));
                    let gold_one_one = g.iter().filter(|&&c| c == BeadClass::ONE_ONE).count();
                    prop_assert!(r.output_one_one_correct <= r.output_one_one.min(gold_one_one));
                    prop_assert_eq!(r.per_class.iter().map(|r| r.total).sum::<usize>(), g.len());
                    prop_assert!(r.per_class.iter().all(|r| r.correct + r.incorrect == r.total));
                }
                Err(e) => {
                    let mismatch = matches!(e, EvalError::CoverageMismatch { .. });
                    prop_assert!(mismatch);
                }
            }
            let self_report = evaluate(&gold, &gold, None).unwrap();
            prop_assert_eq!(self_report.correct_beads, g.len());
        }
    }
}
