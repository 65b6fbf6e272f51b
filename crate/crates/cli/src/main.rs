use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lagmeter::aligner::{
    train_bidirectional, AlignModel, AlignerConfig, AlignmentSet, BidirectionalModel, Direction,
    DocPair, PruneRule,
};
use lagmeter::ingest::{
    parse_incremental_log, read_parallel_corpus, validate_manifest, write_side, TimedTranscript,
    Tokenizer, Track,
};
use lagmeter::latency::{
    finalized_transcript, link_latencies, summarize_with, DEFAULT_PERCENTILES,
};
use lagmeter::pipeline::{
    latency_table, render_report, run_pipeline, ExperimentConfig, LatencyRow, ReportFormat,
};
use lagmeter::quality::{bleu, BleuConfig, Segmentation, Smoothing};
use lagmeter::shortenfilter::{
    filter_corpus, BpeModel, FilterConfig, SubwordModels, DEFAULT_MAX_RATIO,
};
use lagmeter::textmetrics::{
    build_rank_table, compression, log_rank_stats, two_sample_z, CompressionReport,
    DocumentCompression, LogBase, OovPolicy, RankTable, SampleSummary, SyllableRule,
};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "lagmeter",
    version,
    about = "Latency and quality evaluation for speech translation"
)]
struct Cli {
    /// Worker threads for document-level and EM parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Lowercase tokens when reading text.
    #[arg(long, global = true)]
    lowercase: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus manifest and print unit and word counts.
    IngestValidate {
        manifest: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Train forward and backward alignment models.
    AlignTrain(AlignTrainArgs),
    /// Align two timed transcripts and print Pharaoh links.
    AlignRun(AlignRunArgs),
    /// Turn an incremental MT log into a timed transcript of finalization times.
    Finalize {
        log: PathBuf,
        #[arg(long)]
        session_end: Option<f64>,
        #[arg(long, default_value = "xx")]
        language: String,
        /// Document id to write; defaults to the log's file stem.
        #[arg(long)]
        doc_id: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Latency statistics for one aligned document.
    Latency(LatencyArgs),
    /// Syllable and character length ratios to the source.
    Compress(CompressArgs),
    /// Log word-frequency rank statistics.
    Complexity(ComplexityArgs),
    /// Corpus BLEU; each file is one document.
    Bleu(BleuArgs),
    /// Keep pairs whose target is short relative to the source in subword units.
    FilterCorpus(FilterArgs),
    /// Run a full experiment from a TOML config.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Model1,
    Model2,
}

#[derive(Clone, Copy, ValueEnum)]
enum PruneArg {
    StartStart,
    EndStart,
    None,
}

#[derive(Args)]
struct AlignTrainArgs {
    /// Output directory for the model files.
    #[arg(short, long)]
    out: PathBuf,
    /// A source/target document pair (TSV transcript, JSONL log or text).
    #[arg(long, num_args = 2, value_names = ["SRC", "TGT"], action = clap::ArgAction::Append)]
    pair: Vec<PathBuf>,
    /// Sentence-aligned text files appended to the training data.
    #[arg(long, num_args = 2, value_names = ["SRC", "TGT"])]
    corpus: Option<Vec<PathBuf>>,
    #[arg(long, value_enum, default_value = "model2")]
    model: ModelArg,
    #[arg(long)]
    iterations: Option<usize>,
    /// Characters kept per token before alignment.
    #[arg(long)]
    trim: Option<usize>,
    /// Aligner settings as TOML; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AlignRunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, value_enum)]
    prune: Option<PruneArg>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LatencyArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Pharaoh links; alternatively align with `--model`.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    alignment: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PERCENTILES)]
    percentiles: Vec<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long)]
    src_lang: String,
    #[arg(long)]
    tgt_lang: String,
    /// Source and output of one document; repeat for more documents.
    #[arg(long, num_args = 2, value_names = ["SRC", "TGT"], required = true, action = clap::ArgAction::Append)]
    pair: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Files to score; with exactly two a z-test is added.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(
        long,
        conflicts_with = "rank_corpus",
        required_unless_present = "rank_corpus"
    )]
    rank_table: Option<PathBuf>,
    #[arg(long)]
    rank_corpus: Option<PathBuf>,
    /// Save the rank table built from `--rank-corpus`.
    #[arg(long)]
    write_table: Option<PathBuf>,
    #[arg(long, default_value = "e")]
    log_base: LogBase,
    #[arg(long, default_value = "exclude")]
    oov: OovPolicy,
    /// Tokens ignored for ranking and scoring.
    #[arg(long, value_delimiter = ',', default_values = [",", "."])]
    symbols: Vec<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BleuModeArg {
    Agg,
    One,
    Both,
}

#[derive(Args)]
struct BleuArgs {
    #[arg(long, required = true, num_args = 1..)]
    hyp: Vec<PathBuf>,
    #[arg(long = "ref", required = true, num_args = 1..)]
    reference: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    mode: BleuModeArg,
    #[arg(long, default_value_t = 4)]
    max_order: usize,
    /// Add-one smoothing of higher-order precisions.
    #[arg(long)]
    smooth: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// BPE merges for both sides, or the source side with `--tgt-bpe`.
    #[arg(long)]
    bpe: PathBuf,
    #[arg(long)]
    tgt_bpe: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_RATIO)]
    max_ratio: f64,
    #[arg(long)]
    out_src: PathBuf,
    #[arg(long)]
    out_tgt: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    config: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Write here instead of stdout and the config's output_dir.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Override a config value, e.g. `--set latency.percentiles=[50,95]`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

/// `Ok(false)` signals partial failure; any error is fatal.
type Outcome = anyhow::Result<bool>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let tok = Tokenizer {
        lowercase: cli.lowercase,
    };
    let result = match cli.command {
        Command::IngestValidate { manifest, json } => ingest_validate(&manifest, json),
        Command::AlignTrain(a) => align_train(a, &tok),
        Command::AlignRun(a) => align_run(a, &tok),
        Command::Finalize {
            log,
            session_end,
            language,
            doc_id,
            out,
        } => finalize(&log, session_end, &language, doc_id, out, &tok),
        Command::Latency(a) => latency(a, &tok),
        Command::Compress(a) => compress(a, &tok),
        Command::Complexity(a) => complexity(a, &tok),
        Command::Bleu(a) => run_bleu(a, &tok),
        Command::FilterCorpus(a) => filter(a, &tok),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json(value: &impl serde::Serialize) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn is_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Timed transcript from a TSV (any track) or the finalized output of a JSONL log.
fn read_timed(path: &Path, tok: &Tokenizer) -> anyhow::Result<TimedTranscript> {
    if is_ext(path, "jsonl") {
        let log = parse_incremental_log(path, None)?;
        return Ok(finalized_transcript(&log, tok, "xx")?);
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut last = None;
    for track in [Track::Source, Track::Interpreter, Track::Mt] {
        match TimedTranscript::parse_tsv(&text, track, "xx") {
            Ok(t) => return Ok(t),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("tried a track")).with_context(|| format!("parsing {}", path.display()))
}

/// Tokens of a timed transcript, incremental log or plain text file.
fn read_tokens(path: &Path, tok: &Tokenizer) -> anyhow::Result<Vec<String>> {
    if is_ext(path, "tsv") || is_ext(path, "jsonl") {
        let mut words = read_timed(path, tok)?.surfaces();
        if tok.lowercase {
            words = words.iter().map(|w| w.to_lowercase()).collect();
        }
        return Ok(words);
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(tok.tokenize(&text))
}

fn ingest_validate(manifest: &Path, as_json: bool) -> Outcome {
    let (_, stats) = validate_manifest(manifest)?;
    if as_json {
        emit(None, &json(&stats)?)?;
    } else {
        emit(None, &stats.to_markdown())?;
    }
    Ok(true)
}

fn align_train(a: AlignTrainArgs, tok: &Tokenizer) -> Outcome {
    let mut config: AlignerConfig = match &a.config {
        Some(p) => toml::from_str(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )
        .with_context(|| format!("parsing {}", p.display()))?,
        None => AlignerConfig::default(),
    };
    config.em.model = match a.model {
        ModelArg::Model1 => AlignModel::Model1,
        ModelArg::Model2 => AlignModel::Model2Diagonal,
    };
    if let Some(n) = a.iterations {
        config.em.iterations = n;
    }
    if let Some(n) = a.trim {
        if n == 0 {
            bail!("--trim must be at least 1");
        }
        config.trim_length = n;
    }
    let docs = a
        .pair
        .chunks(2)
        .map(|p| Ok((read_tokens(&p[0], tok)?, read_tokens(&p[1], tok)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let extra = match &a.corpus {
        Some(p) => Some(read_parallel_corpus(&p[0], &p[1], tok)?.0),
        None => None,
    };
    if docs.is_empty() && extra.is_none() {
        bail!("nothing to train on; give --pair or --corpus");
    }
    let model = train_bidirectional(&docs, extra.as_ref(), &config)?;
    model.save(&a.out)?;
    for (name, t) in [("forward", &model.forward), ("backward", &model.backward)] {
        let ll: Vec<String> = t.log_likelihood.iter().map(|x| format!("{x:.4}")).collect();
        println!("{name} log-likelihood: {}", ll.join(" "));
    }
    println!("model written to {}", a.out.display());
    Ok(true)
}

fn load_model(dir: &Path, prune: Option<PruneArg>) -> anyhow::Result<(BidirectionalModel, bool)> {
    let mut model = BidirectionalModel::load(dir)
        .with_context(|| format!("loading model from {}", dir.display()))?;
    let mut config = model.config().clone();
    let prune_links = match prune {
        Some(PruneArg::None) => false,
        Some(PruneArg::StartStart) => {
            config.prune_rule = PruneRule::StartStart;
            true
        }
        Some(PruneArg::EndStart) => {
            config.prune_rule = PruneRule::EndStart;
            true
        }
        None => true,
    };
    model = BidirectionalModel::from_tables(model.forward.table, model.backward.table, config);
    Ok((model, prune_links))
}

fn align_pair(
    model: &BidirectionalModel,
    prune: bool,
    src: &TimedTranscript,
    tgt: &TimedTranscript,
) -> anyhow::Result<AlignmentSet> {
    Ok(if prune {
        model.align_timed(src, tgt)?
    } else {
        let docs = DocPair::new(src.doc_id.clone(), tgt.doc_id.clone());
        model
            .align(&src.surfaces(), &tgt.surfaces(), docs)
            .intersection
    })
}

fn align_run(a: AlignRunArgs, tok: &Tokenizer) -> Outcome {
    let (model, prune) = load_model(&a.model, a.prune)?;
    let src = read_timed(&a.src, tok)?;
    let tgt = read_timed(&a.tgt, tok)?;
    let links = align_pair(&model, prune, &src, &tgt)?;
    emit(a.out.as_deref(), &format!("{}\n", links.to_pharaoh()))?;
    Ok(true)
}

fn finalize(
    log: &Path,
    session_end: Option<f64>,
    language: &str,
    doc_id: Option<String>,
    out: Option<PathBuf>,
    tok: &Tokenizer,
) -> Outcome {
    let mut log = parse_incremental_log(log, session_end)?;
    if let Some(id) = doc_id {
        log.doc_id = id;
    }
    let t = finalized_transcript(&log, tok, language)?;
    emit(out.as_deref(), &t.to_tsv())?;
    Ok(true)
}

fn latency(a: LatencyArgs, tok: &Tokenizer) -> Outcome {
    let src = read_timed(&a.src, tok)?;
    let tgt = read_timed(&a.tgt, tok)?;
    let links = match (&a.alignment, &a.model) {
        (Some(p), _) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let docs = DocPair::new(src.doc_id.clone(), tgt.doc_id.clone());
            AlignmentSet::parse_pharaoh(text.lines().next().unwrap_or(""), docs, Direction::Pruned)?
        }
        (None, Some(dir)) => {
            let (model, _) = load_model(dir, None)?;
            model.align_timed(&src, &tgt)?
        }
        (None, None) => unreachable!("clap requires one"),
    };
    let samples = link_latencies(&links, &src.start_times(), &tgt.start_times())?;
    let report = summarize_with(&samples, &a.percentiles)?
        .with_coverage(links.linked_sources().len(), src.len());
    if a.json {
        emit(None, &json(&report)?)?;
    } else {
        let row = LatencyRow {
            system: tgt.doc_id.clone(),
            report,
            documents: vec![src.doc_id.clone()],
        };
        emit(None, &latency_table(&[row], &a.percentiles))?;
    }
    Ok(true)
}

fn compress(a: CompressArgs, tok: &Tokenizer) -> Outcome {
    let src_rule = SyllableRule::for_language(&a.src_lang)?;
    let tgt_rule = SyllableRule::for_language(&a.tgt_lang)?;
    let mut docs = Vec::new();
    for pair in a.pair.chunks(2) {
        let ratio = compression(
            &read_tokens(&pair[0], tok)?,
            &src_rule,
            &read_tokens(&pair[1], tok)?,
            &tgt_rule,
        )
        .with_context(|| format!("{} vs {}", pair[0].display(), pair[1].display()))?;
        docs.push(DocumentCompression {
            doc_id: pair[1].display().to_string(),
            ratio,
        });
    }
    let report = CompressionReport::from_documents(docs);
    if a.json {
        emit(None, &json(&report)?)?;
    } else {
        let mut out = String::from("| document | syllables | characters |\n|---|---:|---:|\n");
        for d in &report.documents {
            out.push_str(&format!(
                "| {} | {:.3} | {:.3} |\n",
                d.doc_id, d.ratio.syllables, d.ratio.characters
            ));
        }
        if let (Some(s), Some(c)) = (report.syllables, report.characters) {
            out.push_str(&format!(
                "| avg ± std | {:.2} ± {:.2} | {:.2} ± {:.2} |\n",
                s.mean, s.std, c.mean, c.std
            ));
        }
        emit(None, &out)?;
    }
    Ok(true)
}

fn complexity(a: ComplexityArgs, tok: &Tokenizer) -> Outcome {
    let symbols = a.symbols.iter().cloned().collect();
    let table = match (&a.rank_table, &a.rank_corpus) {
        (Some(p), _) => RankTable::read(p)?,
        (None, Some(p)) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            build_rank_table(&tok.tokenize(&text), &symbols)?
        }
        (None, None) => unreachable!("clap requires one"),
    };
    if let Some(p) = &a.write_table {
        emit(Some(p), &table.to_tsv())?;
    }
    let mut rows = Vec::new();
    for f in &a.files {
        let report = log_rank_stats(&read_tokens(f, tok)?, &table, &symbols, a.log_base, a.oov)?;
        rows.push((f.display().to_string(), report));
    }
    let z = match rows.as_slice() {
        [(_, x), (_, y)] => match (x.mean, x.std, y.mean, y.std) {
            (Some(mx), Some(sx), Some(my), Some(sy)) => Some(two_sample_z(
                SampleSummary::new(mx, sx, x.sample_size),
                SampleSummary::new(my, sy, y.sample_size),
            )?),
            _ => None,
        },
        _ => None,
    };
    if a.json {
        let rows: Vec<_> = rows
            .iter()
            .map(|(f, r)| serde_json::json!({ "file": f, "report": r }))
            .collect();
        emit(
            None,
            &json(&serde_json::json!({ "rows": rows, "z_test": z }))?,
        )?;
    } else {
        let mut out = String::from("| file | avg ± std | words | OOV |\n|---|---:|---:|---:|\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        for (f, r) in &rows {
            out.push_str(&format!(
                "| {f} | {} ± {} | {} | {:.2}% |\n",
                opt(r.mean),
                opt(r.std),
                r.sample_size,
                r.oov_proportion * 100.0
            ));
        }
        if let Some(z) = z {
            out.push_str(&format!("\nz = {:.4}, p = {:.3e}\n", z.z, z.p));
        }
        emit(None, &out)?;
    }
    Ok(true)
}

fn run_bleu(a: BleuArgs, tok: &Tokenizer) -> Outcome {
    if a.hyp.len() != a.reference.len() {
        bail!(
            "{} hypothesis files but {} reference files",
            a.hyp.len(),
            a.reference.len()
        );
    }
    let read_all = |files: &[PathBuf]| {
        files
            .iter()
            .map(|f| read_tokens(f, tok))
            .collect::<anyhow::Result<Vec<_>>>()
    };
    let hyps = read_all(&a.hyp)?;
    let refs = read_all(&a.reference)?;
    let base = BleuConfig {
        max_order: a.max_order,
        lowercase: tok.lowercase,
        smoothing: if a.smooth {
            Smoothing::AddOne
        } else {
            Smoothing::None
        },
        mode: Segmentation::Agg,
    };
    let modes: &[Segmentation] = match a.mode {
        BleuModeArg::Agg => &[Segmentation::Agg],
        BleuModeArg::One => &[Segmentation::One],
        BleuModeArg::Both => &[Segmentation::Agg, Segmentation::One],
    };
    let mut reports = Vec::new();
    for &mode in modes {
        reports.push(bleu(&hyps, &refs, &BleuConfig { mode, ..base })?);
    }
    if a.json {
        emit(None, &json(&reports)?)?;
    } else {
        for r in &reports {
            let p: Vec<String> = r
                .precisions
                .iter()
                .map(|p| format!("{:.1}", p * 100.0))
                .collect();
            println!(
                "BLEU ({:?}) = {:.2} {} (BP = {:.3}, hyp_len = {}, ref_len = {})",
                r.config.mode,
                r.score,
                p.join("/"),
                r.brevity_penalty,
                r.hyp_len,
                r.ref_len
            );
        }
    }
    Ok(true)
}

fn filter(a: FilterArgs, tok: &Tokenizer) -> Outcome {
    let (corpus, skipped) = read_parallel_corpus(&a.src, &a.tgt, tok)?;
    let source = BpeModel::read(&a.bpe)?;
    let models = match &a.tgt_bpe {
        Some(p) => SubwordModels {
            source,
            target: BpeModel::read(p)?,
        },
        None => SubwordModels::joint(source),
    };
    let out = filter_corpus(
        &corpus,
        &FilterConfig {
            max_ratio: a.max_ratio,
        },
        &models,
    )?;
    emit(Some(&a.out_src), &write_side(out.kept.pairs(), true))?;
    emit(Some(&a.out_tgt), &write_side(out.kept.pairs(), false))?;
    if a.json {
        emit(None, &json(&out.stats)?)?;
    } else {
        let s = &out.stats;
        println!(
            "kept {} dropped {} (empty lines skipped: {skipped})",
            s.kept, s.dropped
        );
        match s.mean_kept_ratio {
            Some(r) => println!("mean retained ratio {r:.4} (threshold {})", s.max_ratio),
            None => println!("mean retained ratio - (threshold {})", s.max_ratio),
        }
    }
    Ok(true)
}

fn report(a: ReportArgs) -> Outcome {
    let cfg = ExperimentConfig::load_with(&a.config, &a.overrides)?;
    let report = run_pipeline(&cfg)?;
    for f in &report.failures {
        eprintln!(
            "warning: {} {}: {}",
            f.doc_id,
            f.system.as_deref().unwrap_or("-"),
            f.error
        );
    }
    match (&a.out, &cfg.output_dir) {
        (Some(p), _) => emit(Some(p), &render_report(&report, a.format))?,
        (None, Some(dir)) => {
            let dir = cfg.resolve(dir);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, format) in [
                ("report.json", ReportFormat::Json),
                ("report.md", ReportFormat::Markdown),
                ("report.csv", ReportFormat::Csv),
            ] {
                emit(Some(&dir.join(name)), &render_report(&report, format))?;
            }
            eprintln!("reports written to {}", dir.display());
        }
        (None, None) => emit(None, &render_report(&report, a.format))?,
    }
    Ok(!report.has_failures())
}
