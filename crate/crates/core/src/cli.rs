//! The `scanqa` command line: run configuration, argument parsing and
//! subcommand dispatch. `main.rs` only forwards `argv` here.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::appearance::generate_color_qa;
use crate::dataset::{
    accuracy, build_answer_vocabulary, classify_answer_type, classify_question_type, parse_record, read_jsonl,
    reject_easy_question, write_jsonl, KnownClasses, QaRecord, QuestionTypeLexicon, Split,
};
use crate::error::{Error, Result};
use crate::fusion::{load_checkpoint, save_checkpoint, Ablation, FusionConfig};
use crate::geometry::{propose_objects, PeCodebook, ProposalConfig, ProposalMode, ProposalRecord};
use crate::linguistic::{build_vocabulary, TokenVocabulary};
use crate::scene::{export_ply, load_ply, Scene};
use crate::train::{
    color_qa_corpus, evaluate, generate_synthetic_benchmark, predict_records, render_table, train, unanimous_record,
    EvalReport, SceneBank, SyntheticSceneSpec, TrainConfig,
};

/// Default cap on the token vocabulary built by `train` and
/// `build-token-vocab`.
pub const DEFAULT_TOKEN_VOCAB_SIZE: usize = 4096;

/// Everything a command may need besides its own flags. Loaded from a
/// `key = value` file (dotted keys reach nested sections, e.g.
/// `train.lr_max = 1e-3`) or from JSON when the file ends in `.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene_dir: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub token_vocab: Option<PathBuf>,
    pub answer_vocab: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    pub known_objects: Option<PathBuf>,
    pub known_scenes: Option<PathBuf>,
    pub question_types: Option<PathBuf>,
    pub log_level: String,
    pub model: FusionConfig,
    pub train: TrainConfig,
    pub proposals: ProposalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene_dir: None,
            dataset: None,
            token_vocab: None,
            answer_vocab: None,
            checkpoint_dir: None,
            known_objects: None,
            known_scenes: None,
            question_types: None,
            log_level: "warn".into(),
            model: FusionConfig::default(),
            train: TrainConfig::default(),
            proposals: ProposalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            Self::parse_key_values(&text)
        }
    }

    /// Parses `key = value` lines. `#` starts a comment line. Values that
    /// parse as JSON (numbers, booleans, quoted strings) are taken as such;
    /// anything else is a bare string.
    pub fn parse_key_values(text: &str) -> Result<Self> {
        let mut root = Map::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key = value, got {line:?}") })?;
            set_dotted(&mut root, key.trim(), value.trim()).map_err(|m| Error::Parse { line: i + 1, message: m })?;
        }
        Self::from_json(Value::Object(root))
    }

    /// Applies `key=value` overrides on top of this configuration.
    pub fn with_overrides(&self, pairs: &[String]) -> Result<Self> {
        let Value::Object(mut root) = serde_json::to_value(self)? else {
            unreachable!("a struct serializes to an object")
        };
        for pair in pairs {
            let (key, value) =
                pair.split_once('=').ok_or_else(|| Error::Config(format!("override {pair:?} is not key=value")))?;
            set_dotted(&mut root, key.trim(), value.trim()).map_err(Error::Config)?;
        }
        Self::from_json(Value::Object(root))
    }

    fn from_json(v: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Fails with an I/O error naming the first configured input path that
    /// does not exist.
    pub fn check_inputs(&self) -> Result<()> {
        let inputs = [
            &self.scene_dir,
            &self.dataset,
            &self.token_vocab,
            &self.known_objects,
            &self.known_scenes,
            &self.question_types,
        ];
        for p in inputs.into_iter().flatten() {
            if !p.exists() {
                return Err(Error::io(p, io::Error::new(io::ErrorKind::NotFound, "configured path does not exist")));
            }
        }
        Ok(())
    }

    pub fn lexicon(&self) -> Result<QuestionTypeLexicon> {
        match &self.question_types {
            Some(p) => QuestionTypeLexicon::load(p),
            None => Ok(QuestionTypeLexicon::default()),
        }
    }

    pub fn known_classes(&self) -> Result<KnownClasses> {
        match (&self.known_objects, &self.known_scenes) {
            (None, None) => Ok(KnownClasses::default()),
            (Some(o), Some(s)) => KnownClasses::load(o, s),
            _ => Err(Error::Config("known_objects and known_scenes must be given together".into())),
        }
    }
}

fn set_dotted(root: &mut Map<String, Value>, key: &str, raw: &str) -> std::result::Result<(), String> {
    if key.is_empty() {
        return Err("empty key".into());
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut node = root;
    for p in parts {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
        node = entry.as_object_mut().ok_or_else(|| format!("{key}: {p} is not a section"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "scanqa", version, about = "Question answering over colored point-cloud scenes")]
pub struct Cli {
    /// Run configuration (`key = value` lines, or JSON for *.json).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Configuration override `key=value`; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a PLY scene and report its contents.
    Ingest {
        input: PathBuf,
        /// Also check instance indices and coordinate ranges (always done on load).
        #[arg(long)]
        validate: bool,
        /// Re-export the parsed scene as binary PLY.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Object proposals of one scene, one JSON object per line.
    Propose {
        input: PathBuf,
        #[arg(long, value_parser = ["gt", "heur"])]
        mode: Option<String>,
        #[arg(long)]
        max_k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Color questions from instance-annotated scenes.
    GenColorQa {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Split assigned to every generated record.
        #[arg(long, default_value = "train")]
        split: Split,
    },
    /// Synthetic benchmark: scenes, questions and layouts.
    GenBench {
        #[arg(long, default_value_t = 200)]
        scenes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        /// Scene generator settings (JSON); the seed flag still wins.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Subword vocabulary from the questions of a dataset.
    BuildTokenVocab {
        dataset: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOKEN_VOCAB_SIZE)]
        max_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Candidate answers voted from the train split.
    BuildVocab {
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Whether a question matches one of the easy-question patterns.
    CheckQuestion { question: String },
    /// Answer type and question type of every record.
    Classify { dataset: PathBuf },
    /// Agreement score of an answer against a record's annotations.
    Metric {
        #[arg(long)]
        answer: String,
        /// A JSON record, or a JSONL file of records.
        #[arg(long)]
        record: PathBuf,
    },
    /// Train a model; writes a checkpoint and its loss curve.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Combine saved evaluation reports into one table.
    Report {
        /// `label=report.json`, or a bare path labeled by its file stem.
        #[arg(required = true)]
        reports: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub ablation: Option<Ablation>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Checkpoint directory to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Where to write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write per-question predictions as JSONL.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    init_logging(&cfg.log_level);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &cfg, &mut out) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    base.with_overrides(&cli.overrides)
}

/// `SCANQA_LOG` takes precedence over the configured level.
fn init_logging(default_level: &str) {
    let mut b = env_logger::Builder::new();
    b.parse_filters(default_level);
    if let Ok(spec) = std::env::var("SCANQA_LOG") {
        b.parse_filters(&spec);
    }
    let _ = b.format_timestamp(None).try_init();
}

/// Executes one parsed command, writing results to `out`.
pub fn run(cli: &Cli, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.check_inputs()?;
    let json = cli.json;
    match &cli.command {
        Command::Ingest { input, validate, out: dest } => {
            let scene = load_ply(input)?;
            let n_inst = scene.instances().map_or(0, <[_]>::len);
            if let Some(d) = dest {
                export_ply(&scene, d)?;
            }
            let e = scene.extents();
            let summary = json!({
                "scene_id": scene.scene_id(),
                "points": scene.len(),
                "instances": n_inst,
                "extents": [e.x(), e.y(), e.z()],
                "valid": true,
            });
            if json {
                emit_json(out, &summary)
            } else {
                let status = if *validate { " (valid)" } else { "" };
                emit(
                    out,
                    &format!(
                        "{}: {} points, {} instances, extents {:.3} x {:.3} x {:.3}{status}",
                        scene.scene_id(),
                        scene.len(),
                        n_inst,
                        e.x(),
                        e.y(),
                        e.z()
                    ),
                )
            }
        }
        Command::Propose { input, mode, max_k, out: dest } => {
            let scene = load_ply(input)?;
            let mut pc = cfg.proposals;
            if let Some(m) = mode {
                pc.mode = if m == "gt" { ProposalMode::GroundTruth } else { ProposalMode::Heuristic };
            }
            if let Some(k) = max_k {
                pc.max_k = *k;
            }
            let mut text = String::new();
            for p in propose_objects(&scene, &pc)? {
                text.push_str(&serde_json::to_string(&ProposalRecord::new(scene.scene_id(), &p))?);
                text.push('\n');
            }
            write_or_print(dest.as_deref(), &text, out)
        }
        Command::GenColorQa { inputs, out: dest, split } => {
            let mut records = Vec::new();
            for path in inputs {
                let scene = load_ply(path)?;
                for (j, r) in generate_color_qa(&scene).into_iter().enumerate() {
                    let id = format!("{}_c{j:02}", r.scene_id);
                    records.push(unanimous_record(id, &r.scene_id, &r.question, &r.answer, *split)?);
                }
            }
            write_jsonl(dest, &records)?;
            summarize(out, json, json!({ "records": records.len(), "out": dest }), || {
                format!("{} color questions written to {}", records.len(), dest.display())
            })
        }
        Command::GenBench { scenes, seed, out: dir, spec } => {
            let mut s = match spec {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => SyntheticSceneSpec::default(),
            };
            s.seed = *seed;
            write_benchmark(&s, *scenes, dir)?;
            summarize(out, json, json!({ "scenes": scenes, "seed": seed, "out": dir }), || {
                format!("{scenes} scenes written to {}", dir.display())
            })
        }
        Command::BuildTokenVocab { dataset, max_size, out: dest } => {
            let records = read_jsonl(dataset)?;
            let vocab = token_vocab_from(&records, *max_size)?;
            match dest {
                Some(d) => {
                    vocab.save(d)?;
                    summarize(out, json, json!({ "tokens": vocab.len(), "out": d }), || {
                        format!("{} tokens written to {}", vocab.len(), d.display())
                    })
                }
                None => emit(out, vocab.tokens().join("\n").as_str()),
            }
        }
        Command::BuildVocab { dataset, out: dest } => {
            let vocab = build_answer_vocabulary(&read_jsonl(dataset)?);
            match dest.as_ref().or(cfg.answer_vocab.as_ref()) {
                Some(d) => {
                    vocab.save(d)?;
                    summarize(out, json, json!({ "answers": vocab.len(), "out": d }), || {
                        format!("{} answers written to {}", vocab.len(), d.display())
                    })
                }
                None if json => emit_json(out, &json!({ "answers": vocab.answers() })),
                None => emit(out, vocab.answers().join("\n").as_str()),
            }
        }
        Command::CheckQuestion { question } => {
            let reason = reject_easy_question(question, &cfg.known_classes()?);
            let label = reason.map_or_else(|| "accepted".to_string(), |r| r.to_string());
            summarize(out, json, json!({ "question": question, "rejected": reason.is_some(), "reason": reason }), || {
                label.clone()
            })
        }
        Command::Classify { dataset } => {
            let lexicon = cfg.lexicon()?;
            let mut text = String::new();
            for r in read_jsonl(dataset)? {
                let qt = classify_question_type(&r.question, &lexicon);
                let at = classify_answer_type(&r);
                if json {
                    let line = json!({ "question_id": r.question_id, "answer_type": at, "question_type": qt });
                    text.push_str(&line.to_string());
                } else {
                    text.push_str(&format!("{}\t{}\t{}", r.question_id, at.name(), qt.map_or("-", |t| t.name())));
                }
                text.push('\n');
            }
            out.write_all(text.as_bytes()).map_err(stdout_err)
        }
        Command::Metric { answer, record } => {
            let records = read_records(record)?;
            let mut text = String::new();
            for r in &records {
                let score = accuracy(answer, r);
                if json {
                    text.push_str(&json!({ "question_id": r.question_id, "answer": answer, "accuracy": score }).to_string());
                } else if records.len() == 1 {
                    text.push_str(&format!("{score:?}"));
                } else {
                    text.push_str(&format!("{}\t{score:?}", r.question_id));
                }
                text.push('\n');
            }
            out.write_all(text.as_bytes()).map_err(stdout_err)
        }
        Command::Train(args) => run_train(args, cfg, json, out),
        Command::Eval(args) => run_eval(args, cfg, json, out),
        Command::Report { reports } => {
            let mut rows = Vec::new();
            for spec in reports {
                let (label, path) = match spec.split_once('=') {
                    Some((l, p)) => (l.to_string(), PathBuf::from(p)),
                    None => {
                        let p = PathBuf::from(spec);
                        let stem = p.file_stem().map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned());
                        (stem, p)
                    }
                };
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let report: EvalReport = serde_json::from_str(&text)
                    .map_err(|e| Error::Validation(format!("{}: not an evaluation report: {e}", path.display())))?;
                rows.push((label, report));
            }
            if json {
                let obj: Map<String, Value> = rows
                    .iter()
                    .map(|(l, r)| Ok((l.clone(), serde_json::to_value(r)?)))
                    .collect::<Result<_>>()?;
                emit_json(out, &Value::Object(obj))
            } else {
                let refs: Vec<(&str, &EvalReport)> = rows.iter().map(|(l, r)| (l.as_str(), r)).collect();
                out.write_all(render_table(&refs).as_bytes()).map_err(stdout_err)
            }
        }
    }
}

/// Writes `scenes/<id>.ply`, `qa.jsonl`, `color_qa.jsonl` and
/// `layouts.json` under `dir`.
pub fn write_benchmark(spec: &SyntheticSceneSpec, n_scenes: usize, dir: &Path) -> Result<()> {
    let bench = generate_synthetic_benchmark(spec, n_scenes)?;
    let scene_dir = dir.join("scenes");
    fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
    for scene in &bench.scenes {
        export_ply(scene, scene_dir.join(format!("{}.ply", scene.scene_id())))?;
    }
    write_jsonl(&dir.join("qa.jsonl"), &bench.records)?;
    write_jsonl(&dir.join("color_qa.jsonl"), &color_qa_corpus(&bench)?)?;
    let layouts = dir.join("layouts.json");
    let text = serde_json::to_string_pretty(&json!({ "spec": spec, "scenes": bench.specs }))?;
    fs::write(&layouts, text + "\n").map_err(|e| Error::io(&layouts, e))
}

/// Every `*.ply` directly under `dir`, in file-name order.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<Scene>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")))
        .collect();
    paths.sort();
    paths.iter().map(load_ply).collect()
}

/// Token vocabulary over the train and val questions.
fn token_vocab_from(records: &[QaRecord], max_size: usize) -> Result<TokenVocabulary> {
    let questions: Vec<&str> =
        records.iter().filter(|r| r.split != Split::Test).map(|r| r.question.as_str()).collect();
    build_vocabulary(&questions, max_size)
}

fn required<'a>(flag: Option<&'a PathBuf>, key: Option<&'a PathBuf>, name: &str) -> Result<&'a Path> {
    flag.or(key).map(PathBuf::as_path).ok_or_else(|| Error::Config(format!("no {name} given (flag or config key)")))
}

fn scene_bank(dir: &Path, proposals: &ProposalConfig, d_model: usize, needed: bool) -> Result<SceneBank> {
    let scenes = if needed { load_scene_dir(dir)? } else { Vec::new() };
    SceneBank::new(&scenes, proposals, &PeCodebook::new(d_model)?)
}

fn run_train(args: &TrainArgs, cfg: &RunConfig, json: bool, out: &mut dyn Write) -> Result<()> {
    let mut tc = cfg.train;
    if let Some(a) = args.ablation {
        tc.ablation = a;
    }
    if let Some(s) = args.seed {
        tc.seed = s;
    }
    if let Some(e) = args.epochs {
        tc.epochs = e;
    }
    let dataset = required(args.dataset.as_ref(), cfg.dataset.as_ref(), "dataset")?;
    let ckpt_dir = required(args.out.as_ref(), cfg.checkpoint_dir.as_ref(), "checkpoint directory")?;
    let records = read_jsonl(dataset)?;
    let tokens = match &cfg.token_vocab {
        Some(p) => TokenVocabulary::load(p)?,
        None => token_vocab_from(&records, DEFAULT_TOKEN_VOCAB_SIZE)?,
    };
    let needs_scenes = tc.ablation != Ablation::Qonly;
    let bank = match args.scenes.as_ref().or(cfg.scene_dir.as_ref()) {
        Some(d) => scene_bank(d, &cfg.proposals, cfg.model.d_model, needs_scenes)?,
        None if needs_scenes => return Err(Error::Config("no scene directory given (flag or config key)".into())),
        None => SceneBank::new(&[], &cfg.proposals, &PeCodebook::new(cfg.model.d_model)?)?,
    };
    info!("training {} on {} records, {} scenes", tc.ablation, records.len(), bank.len());
    let outcome = train(&records, &bank, &tokens, &cfg.model, &tc)?;
    save_checkpoint(ckpt_dir, &outcome.checkpoint)?;
    let curve = json!({
        "ablation": tc.ablation,
        "seed": tc.seed,
        "examples": outcome.examples,
        "skipped": outcome.skipped,
        "epoch_losses": outcome.epoch_losses,
    });
    let curve_path = ckpt_dir.join("loss.json");
    fs::write(&curve_path, serde_json::to_string_pretty(&curve)? + "\n").map_err(|e| Error::io(&curve_path, e))?;
    summarize(out, json, curve.clone(), || {
        let last = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
        format!(
            "trained {} for {} epochs on {} examples ({} skipped); final loss {last:.4}; checkpoint in {}",
            tc.ablation,
            outcome.epoch_losses.len(),
            outcome.examples,
            outcome.skipped,
            ckpt_dir.display()
        )
    })
}

fn run_eval(args: &EvalArgs, cfg: &RunConfig, json: bool, out: &mut dyn Write) -> Result<()> {
    let ckpt_dir = required(args.checkpoint.as_ref(), cfg.checkpoint_dir.as_ref(), "checkpoint directory")?;
    let dataset = required(args.dataset.as_ref(), cfg.dataset.as_ref(), "dataset")?;
    let ckpt = load_checkpoint(ckpt_dir)?;
    let records: Vec<QaRecord> = read_jsonl(dataset)?.into_iter().filter(|r| r.split == args.split).collect();
    let needs_scenes = ckpt.ablation != Ablation::Qonly;
    let d_model = ckpt.model.config().d_model;
    let bank = match args.scenes.as_ref().or(cfg.scene_dir.as_ref()) {
        Some(d) => scene_bank(d, &cfg.proposals, d_model, needs_scenes)?,
        None if needs_scenes => return Err(Error::Config("no scene directory given (flag or config key)".into())),
        None => SceneBank::new(&[], &cfg.proposals, &PeCodebook::new(d_model)?)?,
    };
    if let Some(p) = &args.predictions {
        let preds = predict_records(&ckpt, &records, &bank)?;
        let mut text = String::new();
        for pr in &preds {
            text.push_str(&serde_json::to_string(pr)?);
            text.push('\n');
        }
        fs::write(p, text).map_err(|e| Error::io(p, e))?;
    }
    let report = evaluate(&ckpt, &records, &bank, &cfg.lexicon()?)?;
    if let Some(p) = &args.out {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(p, e))?;
    }
    if json {
        emit_json(out, &serde_json::to_value(&report)?)
    } else {
        let label = ckpt.ablation.to_string();
        out.write_all(render_table(&[(label.as_str(), &report)]).as_bytes()).map_err(stdout_err)
    }
}

/// A single JSON record, or JSONL when the file holds several lines.
fn read_records(path: &Path) -> Result<Vec<QaRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let compact: Result<Value> = serde_json::from_str(&text).map_err(Error::from);
    match compact {
        Ok(v) => Ok(vec![parse_record(&v.to_string(), 1)?]),
        Err(_) => read_jsonl(path),
    }
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(stdout_err)
}

fn emit_json(out: &mut dyn Write, v: &Value) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(v)?)
}

fn summarize(out: &mut dyn Write, json: bool, v: Value, human: impl FnOnce() -> String) -> Result<()> {
    if json {
        emit_json(out, &v)
    } else {
        emit(out, &human())
    }
}

fn write_or_print(dest: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match dest {
        Some(d) => fs::write(d, text).map_err(|e| Error::io(d, e)),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}
