use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dihmm::corpus::{Corpus, LabeledSequence, LineForm};
use dihmm::decode::{classify, score, DecodeConfig, GapMode};
use dihmm::eval::{confusion, EvalReport, Prediction, Preset};
use dihmm::ingest::{dedupe_rhythms, hop_for_tempo, on_off_alphabet, split_bars, tokenize_wav_file, AudioParams};
use dihmm::model::{DihmmModel, Variant};
use dihmm::synth::{generate, GenPolicy, JitterSpec, JitterTarget, Selection, SymbolScheme};
use dihmm::train::{fit_label_set, fit_model, TrainingConfig};
use rayon::prelude::*;

/// Duration and interval hidden Markov models.
#[derive(Parser)]
#[command(name = "dihmm", version, about)]
struct Cli {
    /// Overrides every seed in policies and presets.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    /// Worker threads for parallel work; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus as JSON Lines.
    Synth(SynthArgs),
    /// Turn 16-bit mono WAV files into an on/off corpus.
    Ingest(IngestArgs),
    /// Fit one model per label and write them to a directory.
    Train(TrainArgs),
    /// Score every sequence of a corpus against one model.
    Score(ScoreArgs),
    /// Classify a corpus against a directory of models.
    Classify(ClassifyArgs),
    /// Run an experiment preset.
    Eval(EvalArgs),
    /// Run a timing preset.
    Bench(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Ticks,
    Events,
}

impl From<Form> for LineForm {
    fn from(f: Form) -> Self {
        match f {
            Form::Ticks => LineForm::Ticks,
            Form::Events => LineForm::Events,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON generation policy; the flags below are ignored when given.
    #[arg(long, conflicts_with_all = ["n", "d", "l", "t", "count"])]
    policy: Option<PathBuf>,
    /// Number of states per sequence.
    #[arg(long, required_unless_present = "policy")]
    n: Option<usize>,
    /// Duration range, `lo:hi`.
    #[arg(long, value_parser = parse_range, required_unless_present = "policy")]
    d: Option<(usize, usize)>,
    /// Interval range, `lo:hi`.
    #[arg(long, value_parser = parse_range, required_unless_present = "policy")]
    l: Option<(usize, usize)>,
    /// Fixed total length; unconstrained when omitted.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, required_unless_present = "policy")]
    count: Option<usize>,
    #[arg(long, value_enum, default_value = "odometer")]
    selection: SelectionArg,
    /// Use one shared event symbol instead of one per position.
    #[arg(long)]
    shared_symbol: bool,
    #[arg(long, default_value = "_")]
    gap: String,
    /// Shift each duration and interval by up to this many ticks.
    #[arg(long)]
    jitter_shift: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    jitter_prob: f64,
    #[arg(long, value_enum, default_value = "events")]
    form: Form,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Odometer,
    Uniform,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Samples per tick.
    #[arg(long, conflicts_with = "tempo")]
    hop: Option<usize>,
    /// Beats per minute; sets the hop to four ticks per beat.
    #[arg(long)]
    tempo: Option<f64>,
    /// Required when deriving the hop from a tempo; otherwise checked against each file.
    #[arg(long)]
    sample_rate: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    rms_threshold: f64,
    #[arg(long, default_value_t = 16)]
    ticks_per_bar: usize,
    #[arg(long, default_value_t = 1)]
    bars_per_seq: usize,
    /// Label each chunk with a rhythm id shared by identical patterns.
    #[arg(long)]
    dedupe: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "dihmm")]
    variant: VariantArg,
    /// Additive smoothing.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = dihmm::model::DEFAULT_THETA_PT)]
    theta_pt: f64,
    /// Out-of-support interval attenuation.
    #[arg(long, default_value_t = dihmm::model::DEFAULT_FALLBACK_FACTOR)]
    c: f64,
    #[arg(long, default_value_t = dihmm::model::DEFAULT_SIGMA_FLOOR)]
    sigma_floor: f64,
    /// Largest state duration.
    #[arg(long, default_value_t = dihmm::model::DEFAULT_MAX_DURATION)]
    d_cap: usize,
    #[arg(long)]
    allow_self_transitions: bool,
    /// Fit a single model under this label from the whole corpus.
    #[arg(long)]
    label: Option<String>,
    /// Gap symbol for tick-form lines that do not name one.
    #[arg(long, default_value = "_")]
    gap: String,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Hsmm,
    Dihmm,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Hsmm => Variant::Hsmm,
            VariantArg::Dihmm => Variant::Dihmm,
        }
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, default_value = "strict")]
    gap_mode: GapMode,
    /// Largest interval considered between two segments.
    #[arg(long)]
    max_interval: Option<usize>,
    #[arg(long)]
    no_leading_gap: bool,
    #[arg(long)]
    no_trailing_gap: bool,
}

impl DecodeArgs {
    fn config(&self, normalize: bool) -> DecodeConfig {
        DecodeConfig {
            gap_mode: self.gap_mode,
            allow_leading_gap: !self.no_leading_gap,
            allow_trailing_gap: !self.no_trailing_gap,
            normalize_scores: normalize,
            max_interval: self.max_interval,
            ..DecodeConfig::default()
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Score only the sequence with this id.
    #[arg(long)]
    id: Option<String>,
    #[arg(long, default_value = "_")]
    gap: String,
    #[command(flatten)]
    decode: DecodeArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "_")]
    gap: String,
    #[command(flatten)]
    decode: DecodeArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    preset: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(':').unwrap_or((s, s));
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad lower bound `{lo}`: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad upper bound `{hi}`: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_corpus(path: &Path, gap: &str) -> Result<Corpus> {
    let file = File::open(path).with_context(|| format!("cannot open corpus {}", path.display()))?;
    Corpus::read_jsonl(BufReader::new(file), gap).with_context(|| format!("corpus {}", path.display()))
}

fn read_preset(path: &Path, seed: Option<u64>) -> Result<Preset> {
    let bytes = fs::read(path).with_context(|| format!("cannot read preset {}", path.display()))?;
    let preset = Preset::from_json(&bytes).with_context(|| format!("preset {}", path.display()))?;
    Ok(match seed {
        Some(s) => preset.with_seed(s),
        None => preset,
    })
}

fn synth(args: &SynthArgs, seed: Option<u64>) -> Result<()> {
    let mut policy = match &args.policy {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("cannot read policy {}", path.display()))?;
            serde_json::from_slice::<GenPolicy>(&bytes).with_context(|| format!("policy {}", path.display()))?
        }
        None => {
            let (d_min, d_max) = args.d.expect("required by clap");
            let (l_min, l_max) = args.l.expect("required by clap");
            GenPolicy {
                states: args.n.expect("required by clap"),
                d_min,
                d_max,
                l_min,
                l_max,
                total: args.t,
                count: args.count.expect("required by clap"),
                seed: 0,
                selection: match args.selection {
                    SelectionArg::Odometer => Selection::Odometer,
                    SelectionArg::Uniform => Selection::Uniform,
                },
                symbols: if args.shared_symbol { SymbolScheme::Shared } else { SymbolScheme::PerPosition },
                gap: args.gap.clone(),
                jitter: args.jitter_shift.map(|max_shift| JitterSpec {
                    max_shift,
                    prob: args.jitter_prob,
                    target: JitterTarget::Both,
                }),
            }
        }
    };
    if let Some(s) = seed {
        policy.seed = s;
    }
    let corpus = generate(&policy)?;
    let mut out = sink(args.output.as_deref())?;
    corpus.write_jsonl(&mut out, args.form.into())?;
    out.flush()?;
    Ok(())
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let hop = match (args.hop, args.tempo) {
        (Some(h), _) => h,
        (None, Some(bpm)) => {
            let Some(rate) = args.sample_rate else {
                bail!("--tempo needs --sample-rate to derive the hop");
            };
            hop_for_tempo(rate, bpm, 4)?
        }
        (None, None) => bail!("one of --hop or --tempo is required"),
    };
    let params = AudioParams {
        sample_rate: args.sample_rate,
        hop,
        rms_threshold: args.rms_threshold,
        ticks_per_bar: args.ticks_per_bar,
        bars_per_sequence: args.bars_per_seq,
    };
    params.validate()?;
    let chunks: Vec<Vec<_>> = args
        .inputs
        .par_iter()
        .map(|path| {
            let seq = tokenize_wav_file(path, &params).with_context(|| format!("audio {}", path.display()))?;
            Ok(split_bars(&seq, &params)?)
        })
        .collect::<Result<_>>()?;
    let chunks: Vec<_> = chunks.into_iter().flatten().collect();
    let alphabet = on_off_alphabet();
    let items = if args.dedupe {
        dedupe_rhythms(&chunks)
            .into_iter()
            .map(|(_, seq)| LabeledSequence::from_ticks(seq, &alphabet))
            .collect()
    } else {
        chunks.into_iter().map(|seq| LabeledSequence::from_ticks(seq, &alphabet)).collect()
    };
    let corpus = Corpus::new(alphabet, items);
    log::info!("ingested {} sequences", corpus.len());
    let mut out = sink(args.output.as_deref())?;
    corpus.write_jsonl(&mut out, LineForm::Ticks)?;
    out.flush()?;
    Ok(())
}

/// File name for a model label: characters outside `[A-Za-z0-9._-]` become `_`.
fn model_file_name(label: &str) -> String {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.model.json")
}

fn train(args: &TrainArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus, &args.gap)?;
    let cfg = TrainingConfig {
        smoothing: args.alpha,
        sigma_floor: args.sigma_floor,
        theta_pt: args.theta_pt,
        fallback_factor: args.c,
        max_duration: args.d_cap,
        forbid_self_transition: !args.allow_self_transitions,
    };
    let variant = args.variant.into();
    let models = match &args.label {
        Some(label) => {
            BTreeMap::from([(label.clone(), fit_model(&corpus.alphabet, &corpus.items, &cfg, variant, label)?)])
        }
        None => fit_label_set(&corpus.alphabet, &corpus.items, &cfg, variant)?,
    };
    fs::create_dir_all(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?;
    let mut names = BTreeMap::new();
    for (label, model) in &models {
        let name = model_file_name(label);
        if let Some(other) = names.insert(name.clone(), label) {
            bail!("labels `{other}` and `{label}` map to the same file name {name}");
        }
        let path = args.output.join(&name);
        model.save(&path).with_context(|| format!("cannot write {}", path.display()))?;
    }
    log::info!("wrote {} models to {}", models.len(), args.output.display());
    Ok(())
}

fn load_models(dir: &Path) -> Result<BTreeMap<String, DihmmModel>> {
    let mut models = BTreeMap::new();
    let entries = fs::read_dir(dir).with_context(|| format!("cannot read model directory {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    paths.retain(|p| p.to_string_lossy().ends_with(".model.json"));
    paths.sort();
    for path in paths {
        let model = DihmmModel::load(&path).with_context(|| format!("model {}", path.display()))?;
        if models.insert(model.label().to_string(), model).is_some() {
            bail!("model {} repeats an earlier label", path.display());
        }
    }
    if models.is_empty() {
        bail!("no *.model.json files in {}", dir.display());
    }
    Ok(models)
}

fn score_cmd(args: &ScoreArgs) -> Result<()> {
    let model = DihmmModel::load(&args.model).with_context(|| format!("model {}", args.model.display()))?;
    let corpus = read_corpus(&args.corpus, &args.gap)?
        .reencode(model.alphabet())
        .with_context(|| format!("corpus {} against model {}", args.corpus.display(), args.model.display()))?;
    let items: Vec<_> = corpus
        .items
        .iter()
        .filter(|s| args.id.as_deref().is_none_or(|id| s.id() == id))
        .collect();
    if let (Some(id), true) = (&args.id, items.is_empty()) {
        bail!("no sequence with id `{id}` in {}", args.corpus.display());
    }
    let cfg = args.decode.config(false);
    let mut out = sink(args.output.as_deref())?;
    for item in items {
        let s = score(&model, &item.ticks, &cfg).with_context(|| format!("sequence `{}`", item.id()))?;
        let path = s.best_path.as_ref().map(|p| {
            p.segments()
                .iter()
                .map(|seg| {
                    let sym = model.alphabet().symbol_of_state(seg.state).and_then(|id| model.alphabet().name(id));
                    serde_json::json!({"state": seg.state, "sym": sym, "start": seg.start, "dur": seg.duration})
                })
                .collect::<Vec<_>>()
        });
        let line = serde_json::json!({
            "id": item.id(),
            "model": model.label(),
            "log_likelihood": s.log_likelihood,
            "best_path": path,
        });
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn classify_cmd(args: &ClassifyArgs) -> Result<()> {
    let models = load_models(&args.models)?;
    let alphabet = models.values().next().expect("non-empty").alphabet().clone();
    let corpus = read_corpus(&args.corpus, &args.gap)?
        .reencode(&alphabet)
        .with_context(|| format!("corpus {} against models in {}", args.corpus.display(), args.models.display()))?;
    let cfg = args.decode.config(true);
    let mut out = sink(args.output.as_deref())?;
    writeln!(out, "id,truth,predicted,unique,log_likelihood,normalized")?;
    let mut preds = Vec::with_capacity(corpus.len());
    for item in &corpus.items {
        let c = classify(&models, &item.ticks, &cfg).with_context(|| format!("sequence `{}`", item.id()))?;
        let best = c.label.as_ref().and_then(|l| c.scores.iter().find(|(m, _)| m == l)).map(|(_, s)| s);
        writeln!(
            out,
            "{},{},{},{},{},{}",
            item.id(),
            item.label(),
            c.label.as_deref().unwrap_or(""),
            c.unique,
            best.map_or(f64::NEG_INFINITY, |s| s.log_likelihood),
            best.and_then(|s| s.normalized).unwrap_or(0.0),
        )?;
        preds.push(Prediction {
            id: item.id().to_string(),
            truth: item.label().to_string(),
            predicted: if c.unique { c.label } else { None },
        });
    }
    out.flush()?;
    let conf = confusion(&models, &preds);
    log::info!(
        "precision {:.3} recall {:.3} f-measure {:.3}",
        conf.precision(),
        conf.recall(),
        conf.f_measure()
    );
    Ok(())
}

fn write_report(report: &EvalReport, format: Format, output: Option<&Path>) -> Result<()> {
    let mut out = sink(output)?;
    match format {
        Format::Csv => out.write_all(report.to_csv().as_bytes())?,
        Format::Json => out.write_all(&report.to_json())?,
    }
    out.flush()?;
    Ok(())
}

fn eval(args: &EvalArgs, seed: Option<u64>, timing_only: bool) -> Result<()> {
    let preset = read_preset(&args.preset, seed)?;
    if timing_only && !matches!(preset, Preset::Timing(_)) {
        bail!("preset {}: bench needs a timing experiment", args.preset.display());
    }
    let report = preset.run().with_context(|| format!("preset {}", args.preset.display()))?;
    write_report(&report, args.format, args.output.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build_global()
        .context("cannot start the thread pool")?;
    match &cli.command {
        Command::Synth(a) => synth(a, cli.seed),
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Eval(a) => eval(a, cli.seed, false),
        Command::Bench(a) => eval(a, cli.seed, true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
