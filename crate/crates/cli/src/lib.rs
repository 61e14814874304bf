//! The `urbanpulse` command line: training, tagging, classification, impact
//! and similarity reports, fixture generation and the HTTP service.
//!
//! Exit status is 0 on success, 1 on usage or configuration errors and 2 on
//! data errors.

pub mod fixtures;
pub mod service;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use urbanpulse_core::cnn::{self, read_pos_corpus, CnnModel, ENTITY_TAGS, UPOS};
use urbanpulse_core::crf::{self, CrfModel, FeatureExtractor, TaggedSentence};
use urbanpulse_core::fusion::{self, tag_text, FusionModel};
use urbanpulse_core::impact::score_impacts;
use urbanpulse_core::ingest::{parse_disruptions, parse_listings, replay_reader, ParseWarning};
use urbanpulse_core::pipeline::{annotations_csv, located_events};
use urbanpulse_core::similarity::{build_graph, similarity_report};
use urbanpulse_core::text::corpus::read_annotated;
use urbanpulse_core::{
    AuthorityRecord, Error, EventAnnotation, EventClass, Gazetteer, Pipeline, PipelineConfig, Result, Tweet,
};

#[derive(Debug, Parser)]
#[command(name = "urbanpulse", version, about = "City-event extraction from short texts")]
pub struct Cli {
    /// Pipeline configuration file; falls back to $URBANPULSE_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnnotationFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the CRF tagger on annotated JSON Lines with token tags.
    TrainCrf {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the windowed tagger on a part-of-speech corpus.
    TrainCnn {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the fusion classifier on labelled tweets, using both taggers.
    TrainFusion {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Per-token tags for each tweet, or for one `--text`.
    Tag {
        #[arg(long = "in", conflicts_with = "text")]
        input: Option<PathBuf>,
        #[arg(long)]
        text: Option<String>,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Classify a tweet stream into scored event annotations.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: AnnotationFormat,
    },
    /// Recompute severity, likelihood and impact of annotation JSON Lines.
    Impact {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Spatial similarity of annotated events against authority records.
    Correlate {
        #[arg(long)]
        events: PathBuf,
        /// Authority records as JSON Lines.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Road-disruption feed (JSON array).
        #[arg(long)]
        disruptions: Option<PathBuf>,
        /// Scheduled-event listings page (HTML).
        #[arg(long)]
        listings: Option<PathBuf>,
        /// Classes to report; defaults to all seven event classes.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
        #[arg(long)]
        lead_class: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Serve the replayed stream over HTTP.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Write the synthetic fixture tree (and train its models).
    GenFixtures {
        #[arg(long, default_value = "fixtures")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Only write data files.
        #[arg(long)]
        no_train: bool,
    },
}

/// A failure together with the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            e => CliError::Data(e),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(Error::Io(e))
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> CliResult<PipelineConfig> {
    Ok(PipelineConfig::load(path.as_deref())?)
}

fn open_in(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| {
        CliError::Data(Error::File {
            path: path.into(),
            source: e,
        })
    })?;
    Ok(Box::new(BufReader::new(f)))
}

fn read_to_string(path: &Path) -> CliResult<String> {
    let mut s = String::new();
    open_in(path)?.read_to_string(&mut s)?;
    Ok(s)
}

fn open_out(path: &Path) -> CliResult<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = File::create(path).map_err(|e| {
        CliError::Data(Error::File {
            path: path.into(),
            source: e,
        })
    })?;
    Ok(Box::new(BufWriter::new(f)))
}

fn warn_skipped(what: &str, skipped: &[(usize, String)]) {
    for (line, reason) in skipped {
        eprintln!("warning: {what} line {line} skipped: {reason}");
    }
}

fn ensure_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Data(Error::File {
                path: dir.into(),
                source: e,
            })
        }),
        _ => Ok(()),
    }
}

fn required(opt: Option<PathBuf>, flag: &str, key: &str) -> CliResult<PathBuf> {
    opt.ok_or_else(|| CliError::Usage(format!("pass {flag} or set {key} in the config")))
}

fn parse_class(s: &str) -> CliResult<EventClass> {
    s.parse().map_err(|_| CliError::Usage(format!("unknown class {s:?}")))
}

fn execute(cli: Cli) -> CliResult {
    match cli.command {
        Command::TrainCrf {
            corpus,
            out,
            seed,
            epochs,
        } => {
            let cfg = load_config(&cli.config)?;
            let corpus = required(corpus.or(cfg.corpora.crf.clone()), "--corpus", "corpora.crf")?;
            let out = out.unwrap_or(cfg.models.crf.clone());
            let mut tc = cfg.crf_train.clone();
            tc.seed = seed.unwrap_or(tc.seed);
            tc.epochs = epochs.unwrap_or(tc.epochs);
            let lines = read_annotated(open_in(&corpus)?)?;
            warn_skipped("corpus", &lines.skipped);
            let sentences = lines
                .items
                .iter()
                .map(TaggedSentence::from_annotated)
                .collect::<Result<Vec<_>>>()?;
            let extractor = FeatureExtractor::new(cfg.load_dictionaries()?);
            let (model, report) =
                crf::train_with_report(&sentences, extractor, urbanpulse_core::text::full_tag_set(), &tc)?;
            ensure_parent(&out)?;
            model.save(&out)?;
            eprintln!(
                "crf: {} sentences, {} epochs, loss {:.4} -> {:.4}, wrote {}",
                sentences.len(),
                report.epochs_run,
                report.losses[0],
                report.losses.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::TrainCnn {
            corpus,
            out,
            seed,
            epochs,
        } => {
            let cfg = load_config(&cli.config)?;
            let corpus = required(corpus.or(cfg.corpora.cnn.clone()), "--corpus", "corpora.cnn")?;
            let out = out.unwrap_or(cfg.models.cnn.clone());
            let mut tc = cfg.cnn_train.clone();
            tc.seed = seed.unwrap_or(tc.seed);
            tc.epochs = epochs.unwrap_or(tc.epochs);
            let lines = read_pos_corpus(open_in(&corpus)?)?;
            warn_skipped("corpus", &lines.skipped);
            let (model, report) = cnn::train_with_report(&lines.items, &tc)?;
            ensure_parent(&out)?;
            model.save(&out)?;
            eprintln!(
                "cnn: {} sentences, final loss {:.4}, wrote {}",
                lines.items.len(),
                report.epoch_losses.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::TrainFusion {
            corpus,
            out,
            seed,
            epochs,
        } => {
            let cfg = load_config(&cli.config)?;
            let corpus = required(corpus.or(cfg.corpora.fusion.clone()), "--corpus", "corpora.fusion")?;
            let out = out.unwrap_or(cfg.models.fusion.clone());
            let mut tc = cfg.fusion_train.clone();
            tc.seed = seed.unwrap_or(tc.seed);
            tc.epochs = epochs.unwrap_or(tc.epochs);
            tc.tau = cfg.tau;
            let crf = CrfModel::load(&cfg.models.crf)?;
            let cnn = CnnModel::load(&cfg.models.cnn)?;
            let lines = read_annotated(open_in(&corpus)?)?;
            warn_skipped("corpus", &lines.skipped);
            let items = lines
                .items
                .iter()
                .map(|a| fusion::fusion_item(&crf, &cnn, &a.tweet.text, a.labels.clone()))
                .collect::<Result<Vec<_>>>()?;
            let (model, report) = fusion::train_model(FusionModel::for_views(), &items, &tc)?;
            ensure_parent(&out)?;
            model.save(&out)?;
            eprintln!(
                "fusion: {} items used, {} dropped, loss {:.4} -> {:.4}, wrote {}",
                report.items_used,
                report.items_dropped,
                report.losses[0],
                report.losses.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Tag { input, text, out } => {
            let cfg = load_config(&cli.config)?;
            let crf = CrfModel::load(&cfg.models.crf)?;
            let cnn = CnnModel::load(&cfg.models.cnn)?;
            let items: Vec<(String, String)> = match (input, text) {
                (_, Some(t)) => vec![("text".into(), t)],
                (Some(path), None) => {
                    let lines = replay_reader(open_in(&path)?, &Default::default())?;
                    warn_skipped("input", &lines.skipped);
                    lines.items.into_iter().map(|t| (t.id, t.text)).collect()
                }
                (None, None) => return Err(CliError::Usage("pass --in or --text".into())),
            };
            let mut w = open_out(&out)?;
            for (id, text) in items {
                let t = tag_text(&crf, &cnn, &text)?;
                let (pos, ner) = cnn.tag(&t.words);
                let spans: Vec<_> = t
                    .spans
                    .iter()
                    .map(|s| json!({"class": s.class, "start": s.start, "end": s.end, "text": t.span_text(s)}))
                    .collect();
                let line = json!({
                    "id": id,
                    "tokens": t.words,
                    "crf_tags": t.crf_tags,
                    "tags": t.tags,
                    "pos": pos.iter().map(|&p| UPOS[p]).collect::<Vec<_>>(),
                    "entities": ner.iter().map(|&e| ENTITY_TAGS[e]).collect::<Vec<_>>(),
                    "spans": spans,
                });
                writeln!(w, "{line}")?;
            }
            w.flush()?;
        }
        Command::Classify { input, out, format } => {
            let cfg = load_config(&cli.config)?;
            let pipeline = Pipeline::from_config(&cfg)?;
            let lines = replay_reader(open_in(&input)?, &cfg.stream)?;
            warn_skipped("input", &lines.skipped);
            let annotations = pipeline.annotate_all(&lines.items)?;
            write_annotations(&out, &annotations, format)?;
        }
        Command::Impact { input, out } => {
            let cfg = load_config(&cli.config)?;
            let mut annotations = read_annotations(&input)?;
            score_impacts(&mut annotations, &cfg.frame()?, cfg.grid_cell_deg, cfg.delta_t())?;
            write_annotations(&out, &annotations, AnnotationFormat::Jsonl)?;
        }
        Command::Correlate {
            events,
            records,
            disruptions,
            listings,
            classes,
            lead_class,
            format,
            out,
        } => correlate(
            &cli.config,
            CorrelateArgs {
                events,
                records,
                disruptions,
                listings,
                classes,
                lead_class,
                format,
                out,
            },
        )?,
        Command::Serve { bind, replay } => serve(&cli.config, bind, replay)?,
        Command::GenFixtures {
            out_dir,
            seed,
            no_train,
        } => {
            fixtures::generate(&out_dir, seed, !no_train)?;
            eprintln!("fixtures written to {}", out_dir.display());
        }
    }
    Ok(())
}

fn read_annotations(path: &Path) -> CliResult<Vec<EventAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in open_in(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let a: EventAnnotation = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(Error::Format(format!("{}:{}: {e}", path.display(), i + 1))))?;
        out.push(a);
    }
    Ok(out)
}

fn write_annotations(out: &Path, annotations: &[EventAnnotation], format: AnnotationFormat) -> CliResult {
    let mut w = open_out(out)?;
    match format {
        AnnotationFormat::Jsonl => {
            for a in annotations {
                serde_json::to_writer(&mut w, a).map_err(Error::from)?;
                w.write_all(b"\n")?;
            }
        }
        AnnotationFormat::Csv => w.write_all(annotations_csv(annotations)?.as_bytes())?,
    }
    w.flush()?;
    Ok(())
}

struct CorrelateArgs {
    events: PathBuf,
    records: Option<PathBuf>,
    disruptions: Option<PathBuf>,
    listings: Option<PathBuf>,
    classes: Vec<String>,
    lead_class: Option<String>,
    format: ReportFormat,
    out: PathBuf,
}

/// Reads authority records from JSON Lines.
pub fn read_records(reader: impl BufRead) -> Result<Vec<AuthorityRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format(format!("record line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn correlate(config: &Option<PathBuf>, args: CorrelateArgs) -> CliResult {
    // the report only needs the city centre, so a missing config falls back
    // to the London defaults
    let cfg = if config.is_some() || std::env::var_os(urbanpulse_core::pipeline::CONFIG_ENV).is_some() {
        Some(load_config(config)?)
    } else {
        None
    };
    let frame = match &cfg {
        Some(c) => c.frame()?,
        None => urbanpulse_core::CityFrame::london(),
    };
    if args.records.is_none() && args.disruptions.is_none() && args.listings.is_none() {
        return Err(CliError::Usage(
            "pass at least one of --records, --disruptions, --listings".into(),
        ));
    }
    let mut records = Vec::new();
    if let Some(p) = &args.records {
        records.extend(read_records(open_in(p)?)?);
    }
    if let Some(p) = &args.disruptions {
        let mapping = cfg.as_ref().map(|c| c.disruptions.clone()).unwrap_or_default();
        let outcome = parse_disruptions(&read_to_string(p)?, &mapping)?;
        for (i, reason) in &outcome.dropped {
            eprintln!("warning: disruption {i} dropped: {reason}");
        }
        records.extend(outcome.records);
    }
    if let Some(p) = &args.listings {
        let (rules, gazetteer) = match &cfg {
            Some(c) => (c.listings.clone(), c.load_gazetteer()?),
            None => (Default::default(), Gazetteer::default()),
        };
        let outcome = parse_listings(&read_to_string(p)?, &rules, &gazetteer)?;
        if outcome.warning == Some(ParseWarning::EmptyParse) {
            eprintln!("warning: listings page produced no records");
        }
        for u in &outcome.unlocated {
            eprintln!("warning: listing {:?} at {:?} could not be located", u.title, u.venue);
        }
        records.extend(outcome.records);
    }
    let annotations = read_annotations(&args.events)?;
    let events = located_events(&annotations);
    let graph = build_graph(&records, frame.centre)?;
    let classes = if args.classes.is_empty() {
        EventClass::EVENTS.to_vec()
    } else {
        args.classes
            .iter()
            .map(|c| parse_class(c))
            .collect::<CliResult<Vec<_>>>()?
    };
    let lead = args.lead_class.as_deref().map(parse_class).transpose()?;
    let report = similarity_report(&events, &graph, &classes, lead);
    let mut w = open_out(&args.out)?;
    match args.format {
        ReportFormat::Csv => report.write_csv(&mut w)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, &report).map_err(Error::from)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Builds the replay engine and the initial snapshot for `serve`.
pub fn prepare_service(
    cfg: &PipelineConfig,
    replay: Option<PathBuf>,
) -> Result<(service::ReplayEngine, Arc<service::AppState>)> {
    let pipeline = Pipeline::from_config(cfg)?;
    let tweets: Vec<Tweet> = match replay.or(cfg.service.replay.clone()) {
        Some(p) => {
            let lines = urbanpulse_core::ingest::replay_tweets(&p, &cfg.stream)?;
            warn_skipped("replay", &lines.skipped);
            lines.items
        }
        None => Vec::new(),
    };
    let mut engine = service::ReplayEngine::new(pipeline, tweets, None);
    let first = engine.advance_to(engine.clock())?;
    let state = Arc::new(service::AppState::new(
        first,
        cfg.service.annotations_out.clone(),
        cfg.window_seconds,
    ));
    Ok((engine, state))
}

fn serve(config: &Option<PathBuf>, bind: Option<String>, replay: Option<PathBuf>) -> CliResult {
    let cfg = load_config(config)?;
    let (engine, state) = prepare_service(&cfg, replay)?;
    let bind = bind.unwrap_or(cfg.service.bind.clone());
    service::spawn_replay(
        engine,
        state.clone(),
        cfg.window_seconds,
        cfg.service.replay_step_seconds,
    );
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, service::router(state)).await
    })?;
    Ok(())
}
