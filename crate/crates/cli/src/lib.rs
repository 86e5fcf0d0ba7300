//! Commands behind the `bitext-align` binary.
//!
//! Every command checks its input paths before doing any work and writes
//! outputs through a temporary file in the destination directory, so a
//! failed run never leaves a partial file behind.

use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bitext_core::aligner::align_anchored;
use bitext_core::corpus::{Alignment, BeadClass, Document, Lang};
use bitext_core::evaluator::{evaluate, Region};
use bitext_core::length_model::{estimate_params, ClassPriors, DeltaProbability, LengthModelParams};
use bitext_core::lexical::CueLexicon;
use bitext_core::segmenter::{emit_markup, parse_markup, segment, SegmentationRules};
use bitext_core::stats::{scatter, scatter_tsv, summarize, Histogram};
use bitext_core::synth::{generate, CueInjection, GenConfig, HeaderStretch, LengthDist};
use bitext_core::{align, align_banded};
use clap::{Args, Parser, Subcommand, ValueEnum};
use encoding_rs::{DecoderResult, Encoding};
use rayon::prelude::*;

#[derive(Debug, Parser)]
#[command(name = "bitext-align", version, about = "Sentence alignment for English-Chinese parallel text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split raw text into paragraphs and passages and write markup.
    Segment(SegmentArgs),
    /// Fit the length model to a gold alignment.
    Estimate(EstimateArgs),
    /// Align marked-up documents.
    Align(AlignArgs),
    /// Score an alignment against a gold alignment.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic parallel corpus with its gold alignment.
    Generate(GenerateArgs),
    /// Emit the length scatter and delta histogram of a gold alignment.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextEncoding {
    #[value(name = "utf-8", alias = "utf8")]
    Utf8,
    #[value(name = "big5", alias = "big-5")]
    Big5,
}

impl TextEncoding {
    fn encoding(self) -> &'static Encoding {
        match self {
            TextEncoding::Utf8 => encoding_rs::UTF_8,
            TextEncoding::Big5 => encoding_rs::BIG5,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// `en` or `zh`.
    #[arg(long)]
    pub lang: Lang,
    #[arg(long, value_enum, default_value = "utf-8")]
    pub encoding: TextEncoding,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub english: PathBuf,
    #[arg(long)]
    pub chinese: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

/// Model options shared by `align`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Parameter file; the built-in defaults are used when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Cue lexicon: a file path, `builtin`, or `none`.
    #[arg(long, default_value = "builtin")]
    pub lexicon: String,
    /// Rescale the class priors to sum to one.
    #[arg(long)]
    pub normalize_priors: bool,
    /// Lower bound on probabilities before taking logs.
    #[arg(long)]
    pub prob_floor: Option<f64>,
    /// Score delta with the normal density instead of the two-tailed
    /// probability.
    #[arg(long)]
    pub density: bool,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub english: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub chinese: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub output: Option<PathBuf>,
    /// Tab-separated `english chinese output` lines, aligned in parallel.
    /// Relative paths are resolved against the manifest's directory.
    #[arg(long, conflicts_with_all = ["english", "chinese", "output"])]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Only consider cells within this many passages of the diagonal.
    #[arg(long)]
    pub band: Option<usize>,
    /// Align paragraphs first, then sentences within aligned paragraphs.
    #[arg(long)]
    pub anchor_paragraphs: bool,
    /// Paragraph-level lexicon for `--anchor-paragraphs`: a path, `builtin`,
    /// or `none`.
    #[arg(long, default_value = "builtin")]
    pub paragraph_lexicon: String,
    /// Worker threads for `--manifest`; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Alignment produced by `align`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Only score beads inside `e_start..e_end,c_start..c_end`.
    #[arg(long, value_parser = parse_region)]
    pub region: Option<Region>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub english: PathBuf,
    #[arg(long)]
    pub chinese: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub beads: usize,
    #[arg(long, default_value_t = bitext_core::length_model::DEFAULT_C)]
    pub c: f64,
    #[arg(long, default_value_t = bitext_core::length_model::DEFAULT_SIGMA)]
    pub sigma: f64,
    /// Class weights such as `1-1=0.9,2-1=0.1`; the default priors
    /// renormalized when absent.
    #[arg(long, value_parser = parse_mix)]
    pub mix: Option<Vec<(BeadClass, f64)>>,
    #[arg(long, default_value_t = 20)]
    pub min_length: u64,
    #[arg(long, default_value_t = 200)]
    pub max_length: u64,
    /// Beads in a header stretch of near-equal passages.
    #[arg(long)]
    pub stretch: Option<usize>,
    #[arg(long, default_value = "2-1")]
    pub stretch_class: BeadClass,
    /// Probability of a matched cue pair in each ordinary bead. Enables cue
    /// injection, including one cue per stretch passage.
    #[arg(long)]
    pub cue_rate: Option<f64>,
    /// Lexicon to draw cues from: a path or `builtin`.
    #[arg(long, default_value = "builtin")]
    pub lexicon: String,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub english: PathBuf,
    #[arg(long)]
    pub chinese: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Per-bead `class l1 l2 delta` table.
    #[arg(long)]
    pub scatter: PathBuf,
    /// Delta histogram table.
    #[arg(long)]
    pub histogram: PathBuf,
}

fn parse_range(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected start..end, got `{s}`"))?;
    let a = a.trim().parse().map_err(|_| format!("bad range start in `{s}`"))?;
    let b = b.trim().parse().map_err(|_| format!("bad range end in `{s}`"))?;
    if b < a {
        return Err(format!("range `{s}` is reversed"));
    }
    Ok(a..b)
}

pub fn parse_region(s: &str) -> Result<Region, String> {
    let (e, c) = s.split_once(',').ok_or_else(|| format!("expected e0..e1,c0..c1, got `{s}`"))?;
    Ok(Region { eng: parse_range(e)?, chi: parse_range(c)? })
}

pub fn parse_mix(s: &str) -> Result<Vec<(BeadClass, f64)>, String> {
    s.split(',')
        .map(|item| {
            let (cls, w) = item.split_once('=').ok_or_else(|| format!("expected class=weight, got `{item}`"))?;
            let cls: BeadClass = cls.trim().parse().map_err(|e| format!("{e}"))?;
            let w: f64 = w.trim().parse().map_err(|_| format!("bad weight in `{item}`"))?;
            Ok((cls, w))
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment(a) => cmd_segment(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Align(a) => cmd_align(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Stats(a) => cmd_stats(&a),
    }
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist or is not a regular file", path.display());
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<()> {
    if path.is_dir() {
        bail!("output path {} is a directory", path.display());
    }
    let dir = parent_dir(path);
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    Ok(())
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path))
        .with_context(|| format!("creating temporary file for {}", path.display()))?;
    tmp.write_all(contents).with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path).map_err(|e| anyhow!(e.error)).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

/// Decodes `bytes` strictly, reporting the byte offset of the first
/// malformed sequence.
pub fn decode(bytes: &[u8], encoding: TextEncoding) -> Result<String, usize> {
    let mut decoder = encoding.encoding().new_decoder_without_bom_handling();
    let capacity = decoder.max_utf8_buffer_length_without_replacement(bytes.len()).unwrap_or(bytes.len() * 3);
    let mut out = String::with_capacity(capacity);
    let (result, read) = decoder.decode_to_string_without_replacement(bytes, &mut out, true);
    match result {
        DecoderResult::InputEmpty => Ok(out),
        DecoderResult::Malformed(bad, extra) => Err(read - bad as usize - extra as usize),
        DecoderResult::OutputFull => unreachable!("buffer sized for the worst case"),
    }
}

fn read_text(path: &Path, encoding: TextEncoding) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes, encoding)
        .map_err(|offset| anyhow!("{}: invalid {:?} at byte offset {offset}", path.display(), encoding))
}

fn load_document(path: &Path, lang: Lang) -> Result<Document> {
    let text = read_text(path, TextEncoding::Utf8)?;
    parse_markup(&text, lang).with_context(|| format!("parsing {}", path.display()))
}

fn load_alignment(path: &Path) -> Result<Alignment> {
    let text = read_text(path, TextEncoding::Utf8)?;
    Alignment::parse_file(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_params(path: Option<&Path>) -> Result<LengthModelParams> {
    match path {
        None => Ok(LengthModelParams::default()),
        Some(p) => {
            let text = read_text(p, TextEncoding::Utf8)?;
            LengthModelParams::parse_file(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

/// `builtin` and `none` are keywords; anything else is a path.
fn lexicon_source(spec: &str) -> Option<&Path> {
    match spec {
        "builtin" | "none" => None,
        path => Some(Path::new(path)),
    }
}

fn load_lexicon(spec: &str, builtin: fn() -> CueLexicon) -> Result<CueLexicon> {
    match spec {
        "builtin" => Ok(builtin()),
        "none" => Ok(CueLexicon::empty()),
        path => {
            let text = read_text(Path::new(path), TextEncoding::Utf8)?;
            CueLexicon::parse_file(&text).with_context(|| format!("parsing {path}"))
        }
    }
}

impl ModelArgs {
    fn check(&self) -> Result<()> {
        if let Some(p) = &self.params {
            check_input(p)?;
        }
        if let Some(p) = lexicon_source(&self.lexicon) {
            check_input(p)?;
        }
        Ok(())
    }

    fn params(&self) -> Result<LengthModelParams> {
        let mut params = load_params(self.params.as_deref())?;
        if self.normalize_priors {
            params.priors = params.priors.normalized();
        }
        if let Some(f) = self.prob_floor {
            params.floor = f;
        }
        if self.density {
            params.probability = DeltaProbability::Density;
        }
        params.validate()?;
        Ok(params)
    }
}

pub fn cmd_segment(a: &SegmentArgs) -> Result<()> {
    check_input(&a.input)?;
    check_output(&a.output)?;
    let raw = read_text(&a.input, a.encoding)?;
    let doc = segment(&raw, a.lang, &SegmentationRules::default());
    let mut out = emit_markup(&doc);
    out.push('\n');
    write_atomic(&a.output, out.as_bytes())
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    for p in [&a.english, &a.chinese, &a.gold] {
        check_input(p)?;
    }
    check_output(&a.output)?;
    let english = load_document(&a.english, Lang::English)?;
    let chinese = load_document(&a.chinese, Lang::Chinese)?;
    let gold = load_alignment(&a.gold)?;
    check_coverage(&gold, &english, &chinese, &a.gold)?;
    let pairs: Vec<_> = gold
        .beads
        .iter()
        .filter(|b| !b.eng.is_empty() && !b.chi.is_empty())
        .map(|b| (english.range_length(b.eng.clone()), chinese.range_length(b.chi.clone())))
        .collect();
    let params = estimate_params(&pairs)?.into_params(ClassPriors::default())?;
    write_atomic(&a.output, params.to_file_string().as_bytes())
}

fn check_coverage(al: &Alignment, english: &Document, chinese: &Document, path: &Path) -> Result<()> {
    bitext_core::validate_alignment(al, english.len(), chinese.len())
        .with_context(|| format!("{} does not match the documents", path.display()))
}

struct AlignJob {
    english: PathBuf,
    chinese: PathBuf,
    output: PathBuf,
}

fn read_manifest(path: &Path) -> Result<Vec<AlignJob>> {
    let text = read_text(path, TextEncoding::Utf8)?;
    let base = parent_dir(path);
    let mut jobs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [e, c, o] = fields.as_slice() else {
            bail!("{}:{}: expected english<TAB>chinese<TAB>output", path.display(), idx + 1);
        };
        jobs.push(AlignJob { english: base.join(e), chinese: base.join(c), output: base.join(o) });
    }
    Ok(jobs)
}

pub fn cmd_align(a: &AlignArgs) -> Result<()> {
    let jobs = match &a.manifest {
        Some(m) => {
            check_input(m)?;
            read_manifest(m)?
        }
        None => vec![AlignJob {
            english: a.english.clone().expect("required by clap"),
            chinese: a.chinese.clone().expect("required by clap"),
            output: a.output.clone().expect("required by clap"),
        }],
    };
    for job in &jobs {
        check_input(&job.english)?;
        check_input(&job.chinese)?;
        check_output(&job.output)?;
    }
    a.model.check()?;
    if a.anchor_paragraphs {
        if let Some(p) = lexicon_source(&a.paragraph_lexicon) {
            check_input(p)?;
        }
    }
    let params = a.model.params()?;
    let lexicon = load_lexicon(&a.model.lexicon, CueLexicon::legco_sentence)?;
    let paragraph_lexicon = load_lexicon(&a.paragraph_lexicon, CueLexicon::legco_paragraph)?;

    let run_one = |job: &AlignJob| -> Result<()> {
        let english = load_document(&job.english, Lang::English)?;
        let chinese = load_document(&job.chinese, Lang::Chinese)?;
        let al = if a.anchor_paragraphs {
            align_anchored(&english, &chinese, &params, &paragraph_lexicon, &lexicon)?
        } else if let Some(band) = a.band {
            align_banded(&english, &chinese, &params, &lexicon, band)?
        } else {
            align(&english, &chinese, &params, &lexicon)?
        };
        write_atomic(&job.output, al.to_file_string().as_bytes())
            .with_context(|| format!("aligning {} with {}", job.english.display(), job.chinese.display()))
    };
    if jobs.len() == 1 {
        return run_one(&jobs[0]);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs.unwrap_or(0)).build()?;
    let results: Vec<Result<()>> = pool.install(|| jobs.par_iter().map(run_one).collect());
    results.into_iter().collect()
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    check_input(&a.output)?;
    check_input(&a.gold)?;
    if let Some(j) = &a.json {
        check_output(j)?;
    }
    let output = load_alignment(&a.output)?;
    let gold = load_alignment(&a.gold)?;
    let report = evaluate(&output, &gold, a.region.as_ref())?;
    if let Some(j) = &a.json {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(j, json.as_bytes())?;
    }
    print!("{}", report.to_table());
    Ok(())
}

pub fn gen_config(a: &GenerateArgs) -> Result<GenConfig> {
    let cue_injection = match a.cue_rate {
        Some(rate) => Some(CueInjection { rate, lexicon: load_lexicon(&a.lexicon, CueLexicon::legco_sentence)? }),
        None => None,
    };
    Ok(GenConfig {
        c: a.c,
        sigma: a.sigma,
        class_mix: a.mix.clone().unwrap_or_else(bitext_core::synth::default_class_mix),
        n_beads: a.beads,
        seed: a.seed,
        english_length: LengthDist::Uniform { lo: a.min_length, hi: a.max_length },
        header_stretch: a.stretch.map(|length| HeaderStretch { length, perturbation: a.stretch_class }),
        cue_injection,
    })
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    for p in [&a.english, &a.chinese, &a.gold] {
        check_output(p)?;
    }
    if a.cue_rate.is_some() {
        if let Some(p) = lexicon_source(&a.lexicon) {
            check_input(p)?;
        }
    }
    let corpus = generate(&gen_config(a)?)?;
    let with_newline = |s: String| if s.is_empty() { s } else { s + "\n" };
    let english = with_newline(emit_markup(&corpus.english));
    let chinese = with_newline(emit_markup(&corpus.chinese));
    write_atomic(&a.english, english.as_bytes())?;
    write_atomic(&a.chinese, chinese.as_bytes())?;
    write_atomic(&a.gold, corpus.gold.to_file_string().as_bytes())
}

pub fn cmd_stats(a: &StatsArgs) -> Result<()> {
    for p in [&a.english, &a.chinese, &a.gold] {
        check_input(p)?;
    }
    if let Some(p) = &a.params {
        check_input(p)?;
    }
    check_output(&a.scatter)?;
    check_output(&a.histogram)?;
    let english = load_document(&a.english, Lang::English)?;
    let chinese = load_document(&a.chinese, Lang::Chinese)?;
    let gold = load_alignment(&a.gold)?;
    check_coverage(&gold, &english, &chinese, &a.gold)?;
    let params = load_params(a.params.as_deref())?;
    let points = scatter(&gold, &english, &chinese, &params)?;
    let mut hist = Histogram::for_delta();
    let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    deltas.iter().for_each(|&d| hist.add(d));
    write_atomic(&a.scatter, scatter_tsv(&points).as_bytes())?;
    write_atomic(&a.histogram, hist.to_tsv().as_bytes())?;
    let s = summarize(&deltas);
    println!("n\t{}\nmean\t{:.6}\nvariance\t{:.6}", s.n, s.mean, s.variance);
    Ok(())
}
