//! Sentence alignment for parallel English-Chinese text.
//!
//! Passages are scored with a Gaussian model of hybrid character lengths
//! (Chinese characters count double), optionally combined with bilingual
//! lexical cues, and the minimum-cost monotone alignment is found by dynamic
//! programming over six bead shapes.

pub mod aligner;
pub mod corpus;
pub mod evaluator;
pub mod length_metric;
pub mod length_model;
pub mod lexical;
pub mod segmenter;
pub mod stats;
pub mod synth;

pub use aligner::{align, align_anchored, align_banded, align_bruteforce, AlignError};
pub use corpus::{validate_alignment, Alignment, Bead, BeadClass, Document, Lang, Passage, PassageKind};
pub use evaluator::{evaluate, EvalReport, Region};
pub use length_metric::{classify_char, hybrid_length, HybridLength, Width};
pub use length_model::{delta, estimate_params, match_cost, LengthModelParams};
pub use lexical::{combined_cost, count_cues, lexical_cost, CueLexicon};
pub use segmenter::{emit_markup, parse_markup, segment, SegmentationRules};
pub use synth::{generate, GenConfig, SyntheticCorpus};
