//! Passages, documents, beads and alignments.
//!
//! Beads refer to passages by contiguous index ranges. An [`Alignment`] is a
//! monotone sequence of beads that covers both documents exactly once.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::length_metric::{hybrid_length, HybridLength};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    English,
    Chinese,
}

impl Lang {
    pub fn tag(self) -> &'static str {
        match self {
            Lang::English => "en",
            Lang::Chinese => "zh",
        }
    }
}

impl FromStr for Lang {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" | "eng" | "english" => Ok(Lang::English),
            "zh" | "chi" | "chinese" => Ok(Lang::Chinese),
            _ => Err(CorpusError::UnknownLanguage(s.to_string())),
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassageKind {
    #[default]
    Sentence,
    Heading,
    ListItem,
    Other,
}

impl PassageKind {
    pub fn name(self) -> &'static str {
        match self {
            PassageKind::Sentence => "sentence",
            PassageKind::Heading => "heading",
            PassageKind::ListItem => "list-item",
            PassageKind::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sentence" => Some(PassageKind::Sentence),
            "heading" => Some(PassageKind::Heading),
            "list-item" => Some(PassageKind::ListItem),
            "other" => Some(PassageKind::Other),
            _ => None,
        }
    }
}

/// One segmented unit of text: a sentence, heading, list item or similar.
///
/// The hybrid length is computed once at construction and the text cannot be
/// mutated afterwards, so the cached value always agrees with the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    id: usize,
    text: String,
    kind: PassageKind,
    length: HybridLength,
}

impl Passage {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> PassageKind {
        self.kind
    }

    pub fn length(&self) -> HybridLength {
        self.length
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    lang: Lang,
    passages: Vec<Passage>,
    paragraph_breaks: BTreeSet<usize>,
}

impl Document {
    /// Builds a document from passage texts in order.
    ///
    /// Ids are assigned 0..n. Index 0 is added to `paragraph_breaks` when the
    /// document is non-empty and ignored when it is empty.
    pub fn new<I, S>(
        lang: Lang,
        passages: I,
        paragraph_breaks: impl IntoIterator<Item = usize>,
    ) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, PassageKind)>,
        S: Into<String>,
    {
        let passages: Vec<Passage> = passages
            .into_iter()
            .enumerate()
            .map(|(id, (text, kind))| {
                let text = text.into();
                if text.trim().is_empty() {
                    return Err(CorpusError::EmptyPassage(id));
                }
                let length = hybrid_length(&text);
                Ok(Passage { id, text, kind, length })
            })
            .collect::<Result<_, _>>()?;
        let mut breaks: BTreeSet<usize> = paragraph_breaks.into_iter().collect();
        if passages.is_empty() {
            // Index 0 is the implicit document start, not a real break.
            breaks.remove(&0);
        }
        if let Some(&bad) = breaks.iter().find(|&&b| b >= passages.len()) {
            return Err(CorpusError::BreakOutOfRange { index: bad, len: passages.len() });
        }
        if !passages.is_empty() {
            breaks.insert(0);
        }
        Ok(Document { lang, passages, paragraph_breaks: breaks })
    }

    /// A single-paragraph document of plain sentences.
    pub fn from_sentences<I, S>(lang: Lang, texts: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(lang, texts.into_iter().map(|t| (t, PassageKind::Sentence)), [0])
    }

    pub fn empty(lang: Lang) -> Self {
        Document { lang, passages: Vec::new(), paragraph_breaks: BTreeSet::new() }
    }

    pub fn lang(&self) -> Lang {
        self.lang
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn paragraph_breaks(&self) -> &BTreeSet<usize> {
        &self.paragraph_breaks
    }

    /// Passage-id ranges of each paragraph, in order.
    pub fn paragraphs(&self) -> Vec<Range<usize>> {
        let starts: Vec<usize> = self.paragraph_breaks.iter().copied().collect();
        starts
            .iter()
            .enumerate()
            .map(|(k, &s)| s..starts.get(k + 1).copied().unwrap_or(self.passages.len()))
            .collect()
    }

    pub fn lengths(&self) -> Vec<HybridLength> {
        self.passages.iter().map(Passage::length).collect()
    }

    /// Sum of hybrid lengths over a passage range.
    pub fn range_length(&self, range: Range<usize>) -> HybridLength {
        self.passages[range].iter().map(Passage::length).sum()
    }
}

/// Shape of a bead: `a` English passages against `b` Chinese passages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeadClass {
    pub a: u8,
    pub b: u8,
}

impl BeadClass {
    pub const ZERO_ONE: BeadClass = BeadClass { a: 0, b: 1 };
    pub const ONE_ZERO: BeadClass = BeadClass { a: 1, b: 0 };
    pub const ONE_ONE: BeadClass = BeadClass { a: 1, b: 1 };
    pub const ONE_TWO: BeadClass = BeadClass { a: 1, b: 2 };
    pub const TWO_ONE: BeadClass = BeadClass { a: 2, b: 1 };
    pub const TWO_TWO: BeadClass = BeadClass { a: 2, b: 2 };

    /// The six classes the aligner can produce, in tie-break order.
    pub const PRODUCIBLE: [BeadClass; 6] = [
        Self::ONE_ONE,
        Self::ONE_TWO,
        Self::TWO_ONE,
        Self::TWO_TWO,
        Self::ZERO_ONE,
        Self::ONE_ZERO,
    ];

    pub const fn new(a: u8, b: u8) -> Self {
        BeadClass { a, b }
    }

    pub fn is_producible(self) -> bool {
        Self::PRODUCIBLE.contains(&self)
    }

    /// Position in [`BeadClass::PRODUCIBLE`]; `None` for gold-only classes.
    pub fn rank(self) -> Option<usize> {
        Self::PRODUCIBLE.iter().position(|&c| c == self)
    }
}

impl fmt::Display for BeadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

impl FromStr for BeadClass {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::BadClass(s.to_string());
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        Ok(BeadClass { a: a.trim().parse().map_err(|_| bad())?, b: b.trim().parse().map_err(|_| bad())? })
    }
}

/// An aligned group of consecutive English and Chinese passages.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bead {
    pub eng: Range<usize>,
    pub chi: Range<usize>,
}

impl Bead {
    pub fn new(eng: Range<usize>, chi: Range<usize>) -> Result<Self, CorpusError> {
        if eng.start > eng.end || chi.start > chi.end {
            return Err(CorpusError::ReversedRange);
        }
        if eng.is_empty() && chi.is_empty() {
            return Err(CorpusError::EmptyBead);
        }
        if eng.len() > u8::MAX as usize || chi.len() > u8::MAX as usize {
            return Err(CorpusError::BeadTooLarge);
        }
        Ok(Bead { eng, chi })
    }

    /// Bead of class `cls` whose ranges start at `(i, j)`.
    pub fn at(cls: BeadClass, i: usize, j: usize) -> Self {
        Bead { eng: i..i + cls.a as usize, chi: j..j + cls.b as usize }
    }

    pub fn cls(&self) -> BeadClass {
        BeadClass { a: self.eng.len() as u8, b: self.chi.len() as u8 }
    }

    fn shifted(&self, de: usize, dc: usize) -> Bead {
        Bead { eng: self.eng.start + de..self.eng.end + de, chi: self.chi.start + dc..self.chi.end + dc }
    }
}

impl fmt::Display for Bead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.cls(), RangeField(&self.eng), RangeField(&self.chi))
    }
}

struct RangeField<'a>(&'a Range<usize>);

impl fmt::Display for RangeField<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("-")
        } else {
            write!(f, "{}..{}", self.0.start, self.0.end)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    pub beads: Vec<Bead>,
    /// Sum of bead costs (negative log probabilities).
    pub total_cost: f64,
}

/// Header line of the alignment file format.
pub const ALIGNMENT_HEADER: &str = "#bitext-align v1";

impl Alignment {
    pub fn new(beads: Vec<Bead>, total_cost: f64) -> Self {
        Alignment { beads, total_cost }
    }

    /// Number of English and Chinese passages covered.
    pub fn coverage(&self) -> (usize, usize) {
        self.beads.iter().fold((0, 0), |(e, c), b| (e + b.eng.len(), c + b.chi.len()))
    }

    pub fn classes(&self) -> impl Iterator<Item = BeadClass> + '_ {
        self.beads.iter().map(Bead::cls)
    }

    /// Appends `other`, shifting its ranges so they continue where this
    /// alignment ends.
    pub fn extend_shifted(&mut self, other: &Alignment) {
        let (de, dc) = self.coverage();
        self.beads.extend(other.beads.iter().map(|b| b.shifted(de, dc)));
        self.total_cost += other.total_cost;
    }

    /// Serializes in the line-oriented alignment file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::with_capacity(16 * (self.beads.len() + 1));
        out.push_str(ALIGNMENT_HEADER);
        out.push('\n');
        for bead in &self.beads {
            out.push_str(&bead.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the alignment file format. The total cost is not stored in the
    /// file and comes back as zero.
    ///
    /// Empty sides are positioned where the preceding bead ended, matching
    /// what the aligner produces.
    pub fn parse_file(input: &str) -> Result<Self, AlignmentFileError> {
        let mut lines = input.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == ALIGNMENT_HEADER => {}
            _ => return Err(AlignmentFileError { line: 1, message: format!("expected header `{ALIGNMENT_HEADER}`") }),
        }
        let mut beads: Vec<Bead> = Vec::new();
        let (mut e, mut c) = (0usize, 0usize);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| AlignmentFileError { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let cls: BeadClass = fields[0].parse().map_err(|e: CorpusError| err(e.to_string()))?;
            let eng = parse_range(fields[1], e).map_err(&err)?;
            let chi = parse_range(fields[2], c).map_err(&err)?;
            let bead = Bead::new(eng, chi).map_err(|e| err(e.to_string()))?;
            if bead.cls() != cls {
                return Err(err(format!("class {cls} disagrees with ranges ({})", bead.cls())));
            }
            e = bead.eng.end;
            c = bead.chi.end;
            beads.push(bead);
        }
        Ok(Alignment { beads, total_cost: 0.0 })
    }
}

/// An empty side (`-`) is placed at `cursor`, where the previous bead ended.
fn parse_range(field: &str, cursor: usize) -> Result<Range<usize>, String> {
    if field == "-" {
        return Ok(cursor..cursor);
    }
    let (s, e) = field.split_once("..").ok_or_else(|| format!("bad range `{field}`"))?;
    let s: usize = s.parse().map_err(|_| format!("bad range start `{s}`"))?;
    let e: usize = e.parse().map_err(|_| format!("bad range end `{e}`"))?;
    if e <= s {
        return Err(format!("range `{field}` is empty or reversed; write `-` for an empty side"));
    }
    Ok(s..e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// The bead has no passages on either side.
    EmptyBead,
    /// English range starts before the previous bead ended.
    EnglishOverlap,
    /// English range starts after the previous bead ended.
    EnglishGap,
    ChineseOverlap,
    ChineseGap,
    /// A range extends beyond the document.
    EnglishOutOfRange,
    ChineseOutOfRange,
    /// The beads end before the document does.
    EnglishUncovered,
    ChineseUncovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("alignment violation at bead {bead_index}: {kind:?}")]
pub struct Violation {
    /// Index of the offending bead; equals the bead count when coverage ends
    /// short of the document.
    pub bead_index: usize,
    pub kind: ViolationKind,
}

/// Checks that `al` is monotone and covers `n1` English and `n2` Chinese
/// passages exactly once.
pub fn validate_alignment(al: &Alignment, n1: usize, n2: usize) -> Result<(), Violation> {
    let (mut e, mut c) = (0usize, 0usize);
    for (bead_index, bead) in al.beads.iter().enumerate() {
        let fail = |kind| Err(Violation { bead_index, kind });
        if bead.eng.is_empty() && bead.chi.is_empty() {
            return fail(ViolationKind::EmptyBead);
        }
        // Empty sides sit at the running cursor.
        if bead.eng.start < e {
            return fail(ViolationKind::EnglishOverlap);
        }
        if bead.eng.start > e {
            return fail(ViolationKind::EnglishGap);
        }
        if bead.eng.end > n1 {
            return fail(ViolationKind::EnglishOutOfRange);
        }
        if bead.chi.start < c {
            return fail(ViolationKind::ChineseOverlap);
        }
        if bead.chi.start > c {
            return fail(ViolationKind::ChineseGap);
        }
        if bead.chi.end > n2 {
            return fail(ViolationKind::ChineseOutOfRange);
        }
        e = bead.eng.end;
        c = bead.chi.end;
    }
    let bead_index = al.beads.len();
    if e < n1 {
        return Err(Violation { bead_index, kind: ViolationKind::EnglishUncovered });
    }
    if c < n2 {
        return Err(Violation { bead_index, kind: ViolationKind::ChineseUncovered });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("passage {0} is empty")]
    EmptyPassage(usize),
    #[error("paragraph break {index} is outside the document ({len} passages)")]
    BreakOutOfRange { index: usize, len: usize },
    #[error("bead has no passages")]
    EmptyBead,
    #[error("bead range is reversed")]
    ReversedRange,
    #[error("bead spans more than 255 passages on one side")]
    BeadTooLarge,
    #[error("bad bead class `{0}`")]
    BadClass(String),
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("alignment file line {line}: {message}")]
pub struct AlignmentFileError {
    pub line: usize,
    pub message: String,
}
