use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use jobbert::config::RunConfig;
use jobbert::corpus::{self, balance_report, filter_records, parse_records, RecordFormat};
use jobbert::metrics::evaluate_run;
use jobbert::ranker::{build_index, rank_titles, write_trec_run, SkillIndex};
use jobbert::synthetic::SyntheticCorpus;
use jobbert::trainer::{train_with_callback, OptimizerKind};
use jobbert::translate::{
    parse_target, translate_corpus, write_failures_jsonl, ChatCompletionsProvider, LookupProvider,
    TranslationProvider,
};
use jobbert::{Error, JobAdRecord, Language, ModelParams, Qrels, Result, Run, Space};

#[derive(Parser)]
#[command(
    name = "jobbert",
    version,
    about = "Job-title and skill embedding pipeline"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice (initialization, shuffling, generation).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a corpus and report per-language balance.
    Prepare(PrepareArgs),
    /// Translate English records into the target languages.
    Translate(TranslateArgs),
    /// Train the encoder and title projection.
    Train(TrainArgs),
    /// Write embeddings for titles or skill sets as JSONL.
    Embed(EmbedArgs),
    /// Rank candidate titles or gazetteer skills for each query.
    Rank(RankArgs),
    /// Score a TREC run against qrels.
    Eval(EvalArgs),
    /// Write the bundled four-language synthetic corpus and its judgments.
    GenSynthetic(GenArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// JSONL or TSV corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    min_title_chars: Option<usize>,
    #[arg(long)]
    min_skills: Option<usize>,
    /// Allowed absolute deviation of a language count from the mean.
    #[arg(long)]
    balance_tolerance: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TranslateArgs {
    /// English records to translate.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Lookup TSV: source title, language tag, translation.
    #[arg(long)]
    lookup: Option<PathBuf>,
    /// Use the `[translate.live]` endpoint from the config instead of a lookup file.
    #[arg(long)]
    live: bool,
    /// Comma-separated target tags.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Prepared training records.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Resolves skill ids to labels; ids are used verbatim without it.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    optimizer: Option<Optimizer>,
    /// Average both InfoNCE directions.
    #[arg(long)]
    symmetric: bool,
    #[arg(long)]
    hash_buckets: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    proj_dim: Option<usize>,
    /// Also write `model-epochNNN.ckpt` after every epoch.
    #[arg(long)]
    checkpoint_every_epoch: bool,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// TSV of `id<TAB>text`; for skill sets the text is `label;label;...`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = EmbedKind::Title)]
    kind: EmbedKind,
    #[arg(long, value_enum, default_value_t = SpaceArg::Projected)]
    space: SpaceArg,
    /// Output JSONL; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Mode,
    /// `id<TAB>title` or the four-column record TSV.
    #[arg(long)]
    queries: PathBuf,
    /// Candidate titles, same formats as the queries (titles mode).
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Skill gazetteer (skills mode).
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Title-matching space; skills mode always uses the encoder space.
    #[arg(long, value_enum, default_value_t = SpaceArg::Projected)]
    space: SpaceArg,
    /// Keep at most this many candidates per query.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value = "jobbert")]
    tag: String,
    /// Output run file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Comma-separated precision cutoffs.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Truncate every ranking before scoring.
    #[arg(long)]
    depth: Option<usize>,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Encoder,
    Projected,
}

impl From<SpaceArg> for Space {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Encoder => Space::Encoder,
            SpaceArg::Projected => Space::Projected,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedKind {
    Title,
    Skills,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Titles,
    Skills,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match cli.command {
        Command::Prepare(a) => prepare(&cfg, a),
        Command::Translate(a) => translate(&cfg, a),
        Command::Train(a) => train(&cfg, a),
        Command::Embed(a) => embed(&cfg, a),
        Command::Rank(a) => rank(&cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::GenSynthetic(a) => gen_synthetic(&cfg, a),
    }
}

fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| Error::Config(format!("no {name} given (flag or config file)")))
}

fn seed(cfg: &RunConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| {
        Error::Config("no seed given: pass --seed or set `seed` in the config".into())
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::file(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::file(path, e))
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = required(flag, &cfg.paths.output_dir, "output directory")?;
    fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
    Ok(dir)
}

fn read_records(path: &Path, format: Option<Format>) -> Result<Vec<JobAdRecord>> {
    let format = match format {
        Some(Format::Jsonl) => RecordFormat::Jsonl,
        Some(Format::Tsv) => RecordFormat::Tsv,
        None => RecordFormat::from_path(path),
    };
    parse_records(open(path)?, format).map_err(|e| in_file(path, e))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// `id<TAB>text` rows, or four-column record rows whose title is the text.
fn read_id_text(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rows = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::file(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (id, text) = match cols.len() {
            2 => (cols[0], cols[1]),
            4 => (cols[0], cols[2]),
            n => {
                return Err(Error::Parse {
                    line: idx + 1,
                    column: 1,
                    message: format!(
                        "{}: expected 2 or 4 tab-separated columns, found {n}",
                        path.display()
                    ),
                })
            }
        };
        rows.push((id.to_string(), text.to_string()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput {
            context: Some(path.display().to_string()),
        });
    }
    Ok(rows)
}

fn load_gazetteer(path: &Path) -> Result<jobbert::SkillGazetteer> {
    let reader = open(path)?;
    let gaz = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => jobbert::SkillGazetteer::from_tsv(reader),
        _ => jobbert::SkillGazetteer::from_jsonl(reader),
    };
    gaz.map_err(|e| in_file(path, e))
}

fn prepare(cfg: &RunConfig, a: PrepareArgs) -> Result<()> {
    let corpus_path = required(a.corpus, &cfg.paths.corpus, "corpus")?;
    let dir = out_dir(a.out_dir, cfg)?;
    let mut filter = cfg.filter_config();
    if let Some(n) = a.min_title_chars {
        filter.min_title_chars = n;
    }
    if let Some(n) = a.min_skills {
        filter.min_unique_skills = n;
    }
    let tolerance = a.balance_tolerance.unwrap_or(cfg.filter.balance_tolerance);

    let records = read_records(&corpus_path, a.format)?;
    let (kept, rejections) = filter_records(records, &filter)?;
    let stats = balance_report(&kept, tolerance);

    let mut out = create(&dir.join("filtered.jsonl"))?;
    corpus::write_jsonl(&mut out, &kept)?;
    out.flush()?;
    let mut out = create(&dir.join("rejections.jsonl"))?;
    rejections.write_jsonl(&mut out)?;
    out.flush()?;
    write_json(&dir.join("stats.json"), &stats)?;

    println!("kept {} records, rejected {}", kept.len(), rejections.len());
    for (lang, n) in &stats.counts {
        println!("  {lang}: {n}");
    }
    println!(
        "balanced: {} (max deviation {}, tolerance {})",
        stats.balanced, stats.max_deviation, stats.tolerance
    );
    Ok(())
}

fn translate(cfg: &RunConfig, a: TranslateArgs) -> Result<()> {
    let corpus_path = required(a.corpus, &cfg.paths.corpus, "corpus")?;
    let dir = out_dir(a.out_dir, cfg)?;
    let tags = a.targets.unwrap_or_else(|| cfg.translate.targets.clone());
    let targets = tags
        .iter()
        .map(|t| parse_target(t))
        .collect::<Result<Vec<Language>>>()?;

    let provider: Box<dyn TranslationProvider> = if a.live {
        let live = cfg.translate.live.clone().ok_or_else(|| {
            Error::Config("--live needs a [translate.live] section in the config".into())
        })?;
        Box::new(ChatCompletionsProvider::new(live))
    } else {
        let path = required(a.lookup, &cfg.translate.lookup, "translation lookup file")?;
        Box::new(LookupProvider::from_tsv(open(&path)?).map_err(|e| in_file(&path, e))?)
    };

    let sources = read_records(&corpus_path, a.format)?;
    let (translated, failures) = translate_corpus(&sources, provider.as_ref(), &targets)?;
    let mut all = sources;
    all.extend(translated);

    let mut out = create(&dir.join("translated.jsonl"))?;
    corpus::write_jsonl(&mut out, &all)?;
    out.flush()?;
    let mut out = create(&dir.join("translation_failures.jsonl"))?;
    write_failures_jsonl(&mut out, &failures)?;
    out.flush()?;

    println!("wrote {} records, {} failures", all.len(), failures.len());
    for f in &failures {
        eprintln!("translation failed: {} -> {}: {}", f.id, f.lang, f.error);
    }
    Ok(())
}

fn train(cfg: &RunConfig, a: TrainArgs) -> Result<()> {
    let data = required(a.data, &cfg.paths.corpus, "training data")?;
    let dir = out_dir(a.out_dir, cfg)?;
    let gazetteer = a
        .gazetteer
        .or_else(|| cfg.paths.gazetteer.clone())
        .map(|p| load_gazetteer(&p))
        .transpose()?;

    let mut enc = cfg.encoder;
    if let Some(h) = a.hash_buckets {
        enc.hash_buckets = h;
    }
    if let Some(d) = a.embed_dim {
        enc.embed_dim = d;
    }
    if let Some(p) = a.proj_dim {
        enc.proj_dim = p;
    }
    let mut tc = cfg.train.clone();
    tc.seed = seed(cfg)?;
    if let Some(n) = a.epochs {
        tc.epochs = n;
    }
    if let Some(n) = a.batch_size {
        tc.batch_size = n;
    }
    if let Some(t) = a.temperature {
        tc.temperature = t;
    }
    if let Some(lr) = a.learning_rate {
        tc.learning_rate = lr;
    }
    if let Some(o) = a.optimizer {
        tc.optimizer = match o {
            Optimizer::Sgd => OptimizerKind::Sgd,
            Optimizer::Adam => OptimizerKind::Adam,
        };
    }
    tc.symmetric |= a.symmetric;

    let records = read_records(&data, a.format)?;
    let every_epoch = a.checkpoint_every_epoch;
    let (params, report) =
        train_with_callback(&records, gazetteer.as_ref(), &enc, &tc, |epoch, params| {
            if every_epoch {
                params.save(&dir.join(format!("model-epoch{epoch:03}.ckpt")))?;
            }
            Ok(())
        })?;
    params.save(&dir.join("model.ckpt"))?;
    write_json(&dir.join("train_report.json"), &report)?;

    for e in &report.epochs {
        println!(
            "epoch {:>3}  loss {:.6}  grad norm {:.4}",
            e.epoch, e.mean_loss, e.mean_grad_norm
        );
    }
    println!("checksum {}", report.checksum);
    Ok(())
}

fn load_checkpoint(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<ModelParams> {
    let path = required(flag, &cfg.paths.checkpoint, "checkpoint")?;
    ModelParams::load(&path)
}

fn embed(cfg: &RunConfig, a: EmbedArgs) -> Result<()> {
    let params = load_checkpoint(a.checkpoint, cfg)?;
    let rows = read_id_text(&a.input)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for (id, text) in rows {
        let v = match a.kind {
            EmbedKind::Title => params.embed_title(&text, a.space.into()),
            EmbedKind::Skills => {
                let labels: Vec<&str> = text
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .collect();
                params.embed_skill_set(&labels)
            }
        }
        .map_err(|e| match e {
            Error::EmptyInput { .. } => Error::EmptyInput {
                context: Some(format!("row {id}")),
            },
            other => other,
        })?;
        let line =
            serde_json::json!({ "id": id, "space": v.space.to_string(), "vector": v.values });
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn rank(cfg: &RunConfig, a: RankArgs) -> Result<()> {
    let params = load_checkpoint(a.checkpoint, cfg)?;
    let queries = read_id_text(&a.queries)?;
    let depth = a.depth.or(cfg.eval.depth);
    let lists = match a.mode {
        Mode::Titles => {
            let path = a
                .candidates
                .ok_or_else(|| Error::Config("titles mode needs --candidates".into()))?;
            let index = build_index(&params, &read_id_text(&path)?, a.space.into())?;
            queries
                .iter()
                .map(|(qid, text)| rank_titles(&params, qid, text, &index, depth))
                .collect::<Result<Vec<_>>>()?
        }
        Mode::Skills => {
            let path = required(a.gazetteer, &cfg.paths.gazetteer, "gazetteer")?;
            let index = SkillIndex::build(&params, &load_gazetteer(&path)?)?;
            queries
                .iter()
                .map(|(qid, text)| {
                    let mut list = index.rank(&params, qid, text)?;
                    if let Some(d) = depth {
                        list.entries.truncate(d);
                    }
                    Ok(list)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    write_trec_run(&mut out, &lists, &a.tag)?;
    out.flush()?;
    Ok(())
}

fn eval(cfg: &RunConfig, a: EvalArgs) -> Result<()> {
    let qrels_path = required(a.qrels, &cfg.paths.qrels, "qrels")?;
    let run = Run::from_trec(open(&a.run)?).map_err(|e| in_file(&a.run, e))?;
    let qrels = Qrels::from_trec(open(&qrels_path)?).map_err(|e| in_file(&qrels_path, e))?;
    let ks = a.ks.unwrap_or_else(|| cfg.eval.ks.clone());
    let report = evaluate_run(&run, &qrels, &ks, a.depth.or(cfg.eval.depth))?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    print!("{}", report.summary_table());
    Ok(())
}

fn gen_synthetic(cfg: &RunConfig, a: GenArgs) -> Result<()> {
    let dir = out_dir(a.out_dir, cfg)?;
    let corpus = SyntheticCorpus::generate(seed(cfg)?);

    let write_records = |name: &str, records: &[JobAdRecord]| -> Result<()> {
        let mut out = create(&dir.join(name))?;
        corpus::write_jsonl(&mut out, records)?;
        out.flush()?;
        Ok(())
    };
    let write_text = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::file(&path, e))
    };
    let tsv = |rows: Vec<(String, String)>| -> String {
        rows.iter().map(|(id, t)| format!("{id}\t{t}\n")).collect()
    };

    write_records("corpus.jsonl", &corpus.train_records())?;
    write_records("corpus_en.jsonl", &corpus.english_sources())?;
    write_records("held_out.jsonl", &corpus.held_out_records())?;
    write_text("translations.tsv", &corpus.translations_tsv())?;
    let mut out = create(&dir.join("gazetteer.jsonl"))?;
    corpus.gazetteer.write_jsonl(&mut out)?;
    out.flush()?;

    for lang in Language::ALL {
        write_text(&format!("queries_{lang}.tsv"), &tsv(corpus.queries(lang)))?;
        write_text(
            &format!("candidates_{lang}.tsv"),
            &tsv(corpus.candidates(lang)),
        )?;
        write_text(
            &format!("qrels_titles_{lang}_{lang}.trec"),
            &corpus.title_qrels(lang, lang).to_trec(),
        )?;
        write_text(
            &format!("qrels_skills_{lang}.trec"),
            &corpus.skill_qrels(lang).to_trec(),
        )?;
    }
    for lang in [Language::De, Language::Es, Language::Zh] {
        write_text(
            &format!("qrels_titles_en_{lang}.trec"),
            &corpus.title_qrels(Language::En, lang).to_trec(),
        )?;
    }
    println!(
        "wrote {} training and {} held-out records to {}",
        corpus.train_records().len(),
        corpus.held_out_records().len(),
        dir.display()
    );
    Ok(())
}
