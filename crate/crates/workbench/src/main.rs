use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bioinvert_core::corpus::{parse_corpus_jsonl, CorpusDoc, Verdict};
use bioinvert_core::inversion::{EngineeringKB, ScreenVerdict};
use bioinvert_core::knowledge::{parse_document, parse_frame, Dimension};
use bioinvert_workbench::api::{self, AppState, Envelope};
use bioinvert_workbench::project::{AuditorKind, BackendKind, SampleParams};
use bioinvert_workbench::{Config, Engine, EventKind, ProjectDir, Stage, StageParams, Workbench, WorkbenchError};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "bioinvert", version, about = "Strategy-inversion workbench")]
struct Cli {
    /// Project directory.
    #[arg(long, global = true, default_value = ".")]
    project: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Log redacted LLM requests and replies to llm-trace.jsonl in the project.
    #[arg(long, global = true)]
    trace_llm: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Lexicon,
    Llm,
    Mock,
}

impl From<Backend> for BackendKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Lexicon => BackendKind::Lexicon,
            Backend::Llm => BackendKind::Llm,
            Backend::Mock => BackendKind::Mock,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Create a project in --project.
    New {
        #[arg(long)]
        name: Option<String>,
    },
    /// Segment documents: .jsonl files of {"doc_id","text"} records, anything else as plain text.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    Classify {
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        force: bool,
    },
    /// Draw training samples from the reviewed corpus.
    Samples {
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    Review {
        #[command(subcommand)]
        action: ReviewCmd,
    },
    Frame {
        #[command(subcommand)]
        action: Option<FrameCmd>,
    },
    Invert {
        /// Engineering knowledge base to set first.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Frame ids whose unresolved terms are accepted.
        #[arg(long, value_delimiter = ',')]
        waive: Vec<String>,
        #[arg(long)]
        force: bool,
    },
    Screen {
        #[arg(long, value_delimiter = ',')]
        keep: Vec<String>,
        /// `id=reason`
        #[arg(long)]
        drop: Vec<String>,
        #[arg(long)]
        force: bool,
    },
    Rank {
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        target_env: Option<PathBuf>,
        #[arg(long)]
        judgment: Option<PathBuf>,
        #[arg(long)]
        manual_scores: Option<PathBuf>,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        force: bool,
    },
    Cluster {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        force: bool,
    },
    /// Serve the HTTP API over the projects under --root.
    Serve {
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the project from its event log and compare with the snapshot.
    Replay,
}

#[derive(Subcommand)]
enum ReviewCmd {
    /// Build batches and draw audit samples.
    Run {
        #[arg(long, value_enum, default_value = "pending")]
        auditor: Auditor,
        #[arg(long)]
        max_rounds: Option<u32>,
        #[arg(long)]
        force: bool,
    },
    Batches,
    /// Record verdicts: `sentence_id=pass|fail`.
    Verdict {
        batch: u32,
        #[arg(required = true)]
        verdicts: Vec<String>,
    },
    /// Relabel Dirty batches and redraw their audits.
    Step {
        /// JSON map of sentence id to corrected labels.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Auditor {
    Pending,
    Pass,
}

#[derive(Subcommand)]
enum FrameCmd {
    /// Build one frame per document from the reviewed sentences.
    Run {
        #[arg(long)]
        force: bool,
    },
    List,
    Show { id: String },
    /// Replace or add a frame from a frame document.
    Edit { file: PathBuf },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let project = cli.project.display().to_string();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let envelope = match e.downcast_ref::<WorkbenchError>() {
                Some(w) => Envelope {
                    code: w.code().into(),
                    message: w.to_string(),
                    path: w.pointer().unwrap_or(project),
                    violations: match w {
                        WorkbenchError::Validation(r) => r.violations.clone(),
                        _ => vec![],
                    },
                },
                None => Envelope {
                    code: "ERROR".into(),
                    message: format!("{e:#}"),
                    path: project,
                    violations: vec![],
                },
            };
            eprintln!("{}", serde_json::to_string_pretty(&envelope).expect("envelope serializes"));
            ExitCode::FAILURE
        }
    }
}

fn print(value: &impl serde::Serialize) {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => eprintln!("stdout: {e}"),
        _ => {}
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    Ok(parse_document(&text).map_err(WorkbenchError::from)?)
}

struct Session {
    dir: ProjectDir,
    engine: Engine,
    seed: Option<u64>,
    backend: Option<BackendKind>,
}

impl Session {
    fn exec(&self, kind: EventKind) -> anyhow::Result<()> {
        let outcome = self.dir.execute(&self.engine, kind, None, None)?;
        print(&outcome);
        Ok(())
    }

    /// Adds the global --seed and --backend where the stage reads them.
    fn stage(&self, stage: Stage, mut params: StageParams) -> anyhow::Result<()> {
        if stage == Stage::Reviewed {
            params.seed = params.seed.or(self.seed);
        }
        if matches!(stage, Stage::Classified | Stage::Reviewed | Stage::Framed | Stage::Inverted) {
            params.backend = params.backend.or(self.backend);
        }
        self.exec(EventKind::StageRun { stage, params })
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Serve { root, bind, port } = &cli.command {
        let config = Config::discover(root)?;
        let bind = bind.clone().unwrap_or_else(|| config.bind.clone());
        let port = port.unwrap_or(config.port);
        let engine = Engine::new(config).with_trace(cli.trace_llm);
        let state = AppState::new(Workbench::new(root.clone(), engine));
        let rt = tokio::runtime::Runtime::new()?;
        rt.block_on(api::serve(state, &bind, port))?;
        return Ok(());
    }

    let config = Config::discover(&cli.project)?;
    let s = Session {
        dir: ProjectDir::new(cli.project.clone()),
        engine: Engine::new(config).with_trace(cli.trace_llm),
        seed: cli.seed,
        backend: cli.backend.map(Into::into),
    };
    let only_force = |force: bool| StageParams {
        force,
        ..Default::default()
    };
    match cli.command {
        Command::Serve { .. } => unreachable!("handled above"),
        Command::New { name } => {
            let abs = std::path::absolute(&cli.project)?;
            let id = abs
                .file_name()
                .and_then(|n| n.to_str())
                .context("--project needs a directory name")?
                .to_string();
            let name = name.unwrap_or_else(|| id.clone());
            let (_, outcome) = ProjectDir::create(&cli.project, &id, &name, &s.engine)?;
            print(&outcome);
        }
        Command::Ingest { files } => {
            let mut docs = Vec::new();
            for f in &files {
                let text = std::fs::read_to_string(f).with_context(|| f.display().to_string())?;
                if f.extension().is_some_and(|e| e == "jsonl") {
                    docs.extend(parse_corpus_jsonl(&text).map_err(|source| WorkbenchError::Corpus {
                        stage: Stage::Ingested,
                        source,
                    })?);
                } else {
                    let doc_id = f.file_stem().and_then(|n| n.to_str()).context("unnamed file")?;
                    docs.push(CorpusDoc {
                        doc_id: doc_id.to_string(),
                        text,
                    });
                }
            }
            s.stage(
                Stage::Ingested,
                StageParams {
                    docs: Some(docs),
                    ..Default::default()
                },
            )?;
        }
        Command::Classify { threshold, force } => s.stage(
            Stage::Classified,
            StageParams {
                threshold,
                ..only_force(force)
            },
        )?,
        Command::Samples { target, ratio } => {
            let d = &s.engine.config().defaults;
            let params = SampleParams {
                seed: s.seed.unwrap_or(d.seed),
                target_size: target.unwrap_or(d.target_size),
                ratio_real: ratio.unwrap_or(d.ratio_real),
                backend: s.backend.unwrap_or(d.backend),
            };
            s.exec(EventKind::SamplesGenerated { params })?;
        }
        Command::Review { action } => match action {
            ReviewCmd::Run {
                auditor,
                max_rounds,
                force,
            } => s.stage(
                Stage::Reviewed,
                StageParams {
                    auditor: Some(match auditor {
                        Auditor::Pending => AuditorKind::Pending,
                        Auditor::Pass => AuditorKind::Pass,
                    }),
                    max_rounds,
                    ..only_force(force)
                },
            )?,
            ReviewCmd::Batches => print(&s.dir.load()?.batches),
            ReviewCmd::Verdict { batch, verdicts } => {
                let mut map = BTreeMap::new();
                for v in &verdicts {
                    let (id, verdict) = v.split_once('=').context("verdicts are sentence_id=pass|fail")?;
                    let verdict = match verdict.to_ascii_lowercase().as_str() {
                        "pass" => Verdict::Pass,
                        "fail" => Verdict::Fail,
                        other => anyhow::bail!("unknown verdict {other:?}"),
                    };
                    map.insert(id.to_string(), verdict);
                }
                s.exec(EventKind::VerdictsRecorded {
                    batch_no: batch,
                    verdicts: map,
                })?;
            }
            ReviewCmd::Step { labels } => {
                let labels: BTreeMap<String, Vec<Dimension>> = match labels {
                    Some(p) => read_json(&p)?,
                    None => BTreeMap::new(),
                };
                let seed = s.seed.unwrap_or(s.engine.config().defaults.seed);
                s.exec(EventKind::ReviewStepped { seed, labels })?;
            }
        },
        Command::Frame { action } => match action.unwrap_or(FrameCmd::Run { force: false }) {
            FrameCmd::Run { force } => s.stage(Stage::Framed, only_force(force))?,
            FrameCmd::List => print(&s.dir.load()?.frames),
            FrameCmd::Show { id } => {
                let p = s.dir.load()?;
                let f = p.frame(&id).ok_or_else(|| WorkbenchError::NotFound(format!("frame {id}")))?;
                print(f);
            }
            FrameCmd::Edit { file } => {
                let text = std::fs::read_to_string(&file).with_context(|| file.display().to_string())?;
                let frame = parse_frame(&text).map_err(WorkbenchError::from)?;
                s.exec(EventKind::FrameEdited { frame })?;
            }
        },
        Command::Invert { kb, waive, force } => {
            if let Some(kb) = kb {
                let text = std::fs::read_to_string(&kb).with_context(|| kb.display().to_string())?;
                let kb = EngineeringKB::from_json(&text).map_err(|source| WorkbenchError::Inversion {
                    stage: Stage::Inverted,
                    source,
                })?;
                s.exec(EventKind::KbSet { kb })?;
            }
            s.stage(Stage::Inverted, only_force(force))?;
            for frame_id in waive {
                s.exec(EventKind::UnresolvedWaived { frame_id, waived: true })?;
            }
        }
        Command::Screen { keep, drop, force } => {
            let mut verdicts: BTreeMap<String, ScreenVerdict> =
                keep.into_iter().map(|id| (id, ScreenVerdict::Keep)).collect();
            for d in drop {
                let (id, reason) = d.split_once('=').context("--drop takes id=reason")?;
                verdicts.insert(
                    id.to_string(),
                    ScreenVerdict::Drop {
                        reason: reason.to_string(),
                    },
                );
            }
            if !verdicts.is_empty() {
                s.exec(EventKind::ScreenVerdictsSet { verdicts })?;
            }
            s.stage(Stage::Screened, only_force(force))?;
        }
        Command::Rank {
            problem,
            target_env,
            judgment,
            manual_scores,
            v,
            force,
        } => {
            if let Some(p) = problem {
                s.exec(EventKind::ProblemSet {
                    problem: read_json(&p)?,
                    target_env: target_env.map(|t| read_json(&t)).transpose()?,
                })?;
            }
            if let Some(j) = judgment {
                s.exec(EventKind::JudgmentSet { judgment: read_json(&j)? })?;
            }
            if let Some(m) = manual_scores {
                s.exec(EventKind::ManualScoresSet { scores: read_json(&m)? })?;
            }
            s.stage(
                Stage::Ranked,
                StageParams {
                    v,
                    ..only_force(force)
                },
            )?;
        }
        Command::Cluster { k, threshold, force } => s.stage(
            Stage::Clustered,
            StageParams {
                k,
                cluster_threshold: threshold,
                ..only_force(force)
            },
        )?,
        Command::Export { out } => {
            let text = s.dir.export()?;
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| path.display().to_string())?,
                None => print!("{text}"),
            }
        }
        Command::Replay => {
            let snapshot = s.dir.load()?;
            let replayed = bioinvert_workbench::replay(&s.engine, &s.dir.events()?)?;
            let same = bioinvert_workbench::store::snapshot_text(&snapshot)
                == bioinvert_workbench::store::snapshot_text(&replayed);
            print(&serde_json::json!({ "head": replayed.head, "identical": same }));
            if !same {
                anyhow::bail!("replayed state differs from the snapshot");
            }
        }
    }
    Ok(())
}
