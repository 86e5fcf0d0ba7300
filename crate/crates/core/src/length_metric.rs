//! Hybrid character length for mixed English/Chinese text.
//!
//! Chinese characters count 2, everything else counts 1. For text that can be
//! stored in Big-5 this is the encoded byte count.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Length in single-byte-equivalent characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HybridLength(pub u64);

impl HybridLength {
    pub const fn get(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl Add for HybridLength {
    type Output = HybridLength;

    fn add(self, rhs: Self) -> Self {
        HybridLength(self.0 + rhs.0)
    }
}

impl AddAssign for HybridLength {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sum for HybridLength {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        HybridLength(iter.map(|l| l.0).sum())
    }
}

impl From<u64> for HybridLength {
    fn from(v: u64) -> Self {
        HybridLength(v)
    }
}

impl From<HybridLength> for f64 {
    fn from(l: HybridLength) -> f64 {
        l.0 as f64
    }
}

impl fmt::Display for HybridLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    Wide,
    Narrow,
}

impl Width {
    pub const fn units(self) -> u64 {
        match self {
            Width::Wide => 2,
            Width::Narrow => 1,
        }
    }
}

// Inclusive code point ranges counted as wide.
const WIDE_RANGES: &[(u32, u32)] = &[
    (0x2E80, 0x2FDF),   // CJK radicals, Kangxi radicals
    (0x2FF0, 0x2FFF),   // ideographic description
    (0x3000, 0x303F),   // CJK symbols and punctuation
    (0x3040, 0x30FF),   // kana
    (0x3100, 0x312F),   // bopomofo
    (0x3190, 0x31EF),   // kanbun, bopomofo ext, strokes
    (0x3200, 0x33FF),   // enclosed CJK, CJK compatibility
    (0x3400, 0x4DBF),   // extension A
    (0x4E00, 0x9FFF),   // unified ideographs
    (0xF900, 0xFAFF),   // compatibility ideographs
    (0xFE10, 0xFE1F),   // vertical forms
    (0xFE30, 0xFE6F),   // compatibility forms, small form variants
    (0xFF01, 0xFF60),   // full-width ASCII variants
    (0xFFE0, 0xFFE6),   // full-width signs
    (0x20000, 0x3FFFF), // extensions B and later
];

/// Wide for CJK ideographs, CJK punctuation and full-width forms; narrow for
/// everything else, including characters outside both ASCII and CJK.
pub fn classify_char(ch: char) -> Width {
    let cp = ch as u32;
    if cp < 0x2E80 {
        return Width::Narrow;
    }
    // Ranges are sorted and disjoint.
    let idx = WIDE_RANGES.partition_point(|&(_, hi)| hi < cp);
    match WIDE_RANGES.get(idx) {
        Some(&(lo, _)) if lo <= cp => Width::Wide,
        _ => Width::Narrow,
    }
}

pub fn hybrid_length(text: &str) -> HybridLength {
    HybridLength(text.chars().map(|c| classify_char(c).units()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(hybrid_length(""), HybridLength(0));
        assert_eq!(hybrid_length("AB, x"), HybridLength(5));
        assert_eq!(hybrid_length("李華明議員問"), HybridLength(12));
        assert_eq!(classify_char('a'), Width::Narrow);
        assert_eq!(classify_char('中'), Width::Wide);
        assert_eq!(classify_char('，'), Width::Wide);
        assert_eq!(classify_char('。'), Width::Wide);
        assert_eq!(classify_char('¶'), Width::Narrow);
        assert_eq!(classify_char('é'), Width::Narrow);
    }

    #[test]
    fn range_table_is_sorted_and_disjoint() {
        for w in WIDE_RANGES.windows(2) {
            assert!(w[0].0 <= w[0].1 && w[0].1 < w[1].0);
        }
    }

    #[test]
    fn range_edges() {
        for &(lo, hi) in WIDE_RANGES {
            for cp in [lo, hi] {
                if let Some(c) = char::from_u32(cp) {
                    assert_eq!(classify_char(c), Width::Wide, "U+{cp:04X}");
                }
            }
            if let Some(c) = char::from_u32(lo - 1) {
                let inside_prev = WIDE_RANGES.iter().any(|&(l, h)| l <= lo - 1 && lo - 1 <= h);
                assert_eq!(classify_char(c) == Width::Wide, inside_prev, "U+{:04X}", lo - 1);
            }
        }
    }

    // Full-width comma is a two-byte code in Big-5.
    #[test]
    fn fullwidth_comma_matches_big5() {
        let (bytes, _, had_errors) = encoding_rs::BIG5.encode("，");
        assert!(!had_errors);
        assert_eq!(bytes.len() as u64, classify_char('，').units());
    }

    proptest! {
        #[test]
        fn additive(s in "\\PC{0,40}", t in "\\PC{0,40}") {
            let joined = format!("{s}{t}");
            prop_assert_eq!(hybrid_length(&joined), hybrid_length(&s) + hybrid_length(&t));
        }
    }
}
