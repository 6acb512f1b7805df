//! The `guis` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::agent::{Agent, EpisodeLimits, EpisodeStatus};
use crate::augmentation::{augment, AugmentConfig};
use crate::clients::{ClientError, HttpLlm, HttpLlmConfig, LlmClient, ScriptedLlm, TableCaptioner};
use crate::geometry::{rectify, Point};
use crate::perception::{build_document, render_document, DetectionFile, PerceptionConfig};
use crate::raster::Image;
use crate::retrieval::{read_cases, CaseIndex, TaskRetriever};
use crate::simulator::{evaluate_taskset, load_tasks, AppGraph, SimDevice, SimState, TaskSpec};

#[derive(Debug, Parser)]
#[command(name = "guis", version, about = "Parse GUI screens and drive an app-operation agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a detection file as a screen document.
    Parse {
        #[arg(long)]
        detections: PathBuf,
        /// JSON object mapping icon fingerprints to captions.
        #[arg(long)]
        captions: Option<PathBuf>,
    },
    /// Cut a screen quadrilateral out of a photo.
    Rectify {
        #[arg(long)]
        image: PathBuf,
        /// Eight numbers: top-left, top-right, bottom-right, bottom-left.
        #[arg(long, value_parser = parse_corners)]
        corners: Corners,
        /// Output size as WxH.
        #[arg(long, value_parser = parse_size)]
        size: (u32, u32),
        /// Output PNG; written to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Augment every PNG of a directory.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Case database operations.
    Cases {
        #[command(subcommand)]
        command: CasesCommand,
    },
    /// Run one task on a simulated app.
    Run {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        task: String,
        /// Screen to start on; defaults to the graph's start screen.
        #[arg(long)]
        start: Option<String>,
        #[command(flatten)]
        common: AgentArgs,
        /// Scripted replies separated by `---` lines.
        #[arg(long)]
        script: Option<PathBuf>,
        /// JSON Lines trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score a task set on a simulated app.
    Eval {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[command(flatten)]
        common: AgentArgs,
        /// Directory holding `<task id>.txt` reply scripts.
        #[arg(long)]
        script_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum CasesCommand {
    /// Print the nearest cases to a task as JSON.
    Query {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(short, long, default_value_t = 1)]
        k: usize,
    },
}

#[derive(Debug, Args)]
struct AgentArgs {
    /// Case database for prompt examples.
    #[arg(long)]
    cases: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    max_steps: usize,
}

impl AgentArgs {
    fn limits(&self) -> EpisodeLimits {
        EpisodeLimits { max_steps: self.max_steps, ..Default::default() }
    }

    fn index(&self) -> anyhow::Result<Option<CaseIndex>> {
        self.cases.as_deref().map(load_index).transpose()
    }
}

type Corners = [Point; 4];

fn parse_corners(s: &str) -> Result<Corners, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 8 {
        return Err(format!("expected 8 numbers, got {}", v.len()));
    }
    Ok([0, 2, 4, 6].map(|i| Point::new(v[i], v[i + 1])))
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let dim = |t: &str| t.parse::<u32>().ok().filter(|&n| n > 0).ok_or(format!("bad dimension {t:?}"));
    Ok((dim(w)?, dim(h)?))
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_index(path: &Path) -> anyhow::Result<CaseIndex> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let cases = read_cases(BufReader::new(file)).with_context(|| path.display().to_string())?;
    Ok(CaseIndex::build(cases)?)
}

fn load_graph(path: &Path) -> anyhow::Result<AppGraph> {
    AppGraph::from_json(&read(path)?).with_context(|| path.display().to_string())
}

fn env_llm() -> Result<Box<dyn LlmClient>, ClientError> {
    Ok(Box::new(HttpLlm::new(HttpLlmConfig::from_env()?)))
}

fn script_llm(path: &Path) -> Result<Box<dyn LlmClient>, ClientError> {
    let text = fs::read_to_string(path).map_err(|e| ClientError::Config(format!("{}: {e}", path.display())))?;
    Ok(Box::new(ScriptedLlm::from_script(&text)?))
}

fn write_out(out: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(stdout.write_all(bytes)?),
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    match cmd {
        Command::Parse { detections, captions } => {
            let file = DetectionFile::from_json(&read(&detections)?).with_context(|| detections.display().to_string())?;
            let captioner = match captions {
                Some(p) => TableCaptioner::from_json(&read(&p)?)?,
                None => TableCaptioner::default(),
            };
            let report = build_document(&file.elements, file.image, &captioner, &PerceptionConfig::default())?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            writeln!(stdout, "{}", render_document(&report.document))?;
        }
        Command::Rectify { image, corners, size: (w, h), out } => {
            let img = Image::load_png(&image).with_context(|| image.display().to_string())?;
            let png = rectify(&img, &corners, w, h)?.encode_png()?;
            write_out(out.as_deref(), stdout, &png)?;
        }
        Command::Augment { input, out, config } => {
            let cfg = AugmentConfig::from_json(&read(&config)?).with_context(|| config.display().to_string())?;
            let mut files: Vec<PathBuf> = fs::read_dir(&input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            files.sort();
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (i, path) in files.iter().enumerate() {
                let img = Image::load_png(path).with_context(|| path.display().to_string())?;
                let (aug, record) = augment(&img, &cfg, i as u64).with_context(|| path.display().to_string())?;
                let name = path.file_name().expect("listed files have names");
                aug.save_png(out.join(name))?;
                writeln!(stdout, "{}", json!({ "file": name.to_string_lossy(), "record": record }))?;
            }
        }
        Command::Cases { command: CasesCommand::Query { db, task, k } } => {
            let index = load_index(&db)?;
            let hits: Vec<_> = index
                .query(&task, k)
                .into_iter()
                .map(|h| json!({ "index": h.index, "similarity": h.similarity, "case": h.case }))
                .collect();
            writeln!(stdout, "{}", serde_json::to_string_pretty(&hits)?)?;
        }
        Command::Run { graph, task, start, common, script, trace } => {
            let graph = load_graph(&graph)?;
            let state = match start {
                Some(s) if graph.screen(&s).is_none() => bail!("unknown start screen {s:?}"),
                Some(s) => SimState::at(&s),
                None => graph.initial_state(),
            };
            let llm = match &script {
                Some(p) => script_llm(p)?,
                None => env_llm()?,
            };
            let index = common.index()?;
            let mut agent = Agent::new(llm.as_ref()).with_limits(common.limits());
            agent.retriever = index.as_ref().map(|i| i as &dyn TaskRetriever);
            let mut device = SimDevice::new(&graph, state);
            let episode = agent.run(&task, &mut device);
            if let Some(p) = &trace {
                fs::write(p, episode.trace_jsonl()).with_context(|| format!("writing {}", p.display()))?;
            }
            let summary = json!({
                "status": episode.status.to_string(),
                "steps": episode.steps,
                "screen": device.state().screen,
            });
            writeln!(stdout, "{summary}")?;
            if let EpisodeStatus::Aborted(why) = &episode.status {
                bail!("episode aborted: {why}");
            }
        }
        Command::Eval { graph, tasks, common, script_dir, out } => {
            let graph = load_graph(&graph)?;
            let task_list = load_tasks(&read(&tasks)?).with_context(|| tasks.display().to_string())?;
            let index = common.index()?;
            let mut llm_for = |t: &TaskSpec| match &script_dir {
                Some(dir) => script_llm(&dir.join(format!("{}.txt", t.id))),
                None => env_llm(),
            };
            let retriever = index.as_ref().map(|i| i as &dyn TaskRetriever);
            let eval = evaluate_taskset(&graph, &task_list, &mut llm_for, retriever, common.limits())?;
            let text = serde_json::to_string_pretty(&eval.metrics)? + "\n";
            write_out(out.as_deref(), stdout, text.as_bytes())?;
        }
    }
    Ok(0)
}

/// Runs the command line `argv` (including the program name) and returns
/// the exit code: 0 on success, 1 on domain errors, 2 on usage errors.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}
