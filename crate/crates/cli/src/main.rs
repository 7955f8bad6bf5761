use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use scenecmd_core::gateway::{one_shot_pair, render_system_prompt, system_template, ChatMessage};
use scenecmd_core::scene::{Scene, SceneFile};
use scenecmd_core::server::{self, AppState, ServerConfig};
use scenecmd_core::session::{
    load_scene_file, replay_trace, shipped_scene, InteractionMode, ProviderChoice, RunConfig, SessionConfig, TaskKind,
};

#[derive(Parser)]
#[command(name = "scenecmd", version, about = "Speech + gesture scene manipulation service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP/WebSocket session service.
    Serve(ServeArgs),
    /// Replay a recorded trace and report the final state.
    Replay(ReplayArgs),
    /// Print the system prompt (or the pinned messages) for a scene.
    RenderPrompt(PromptArgs),
    /// Replay a trace and compare its final scene with a golden scene file.
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Control,
    Voice,
    Mover,
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneTask {
    Task1a,
    Task1b,
    Sandbox,
}

impl From<Mode> for InteractionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Control => InteractionMode::Control,
            Mode::Voice => InteractionMode::Voice,
            Mode::Mover => InteractionMode::Mover,
        }
    }
}

impl From<SceneTask> for TaskKind {
    fn from(t: SceneTask) -> Self {
        match t {
            SceneTask::Task1a => TaskKind::Task1a,
            SceneTask::Task1b => TaskKind::Task1b,
            SceneTask::Sandbox => TaskKind::Sandbox,
        }
    }
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, value_enum, default_value = "sandbox")]
    task: SceneTask,
    /// Scene file (defaults to the shipped scene for the task).
    #[arg(long)]
    scene: Option<PathBuf>,
}

impl SceneArgs {
    fn load(&self) -> Result<SceneFile> {
        Ok(match &self.scene {
            Some(p) => load_scene_file(p)?,
            None => shipped_scene(self.task.into()),
        })
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, value_enum, default_value = "mover")]
    mode: Mode,
    #[command(flatten)]
    scene: SceneArgs,
    /// Mock provider script (JSON).
    #[arg(long, conflicts_with = "provider")]
    mock: Option<PathBuf>,
    /// OpenAI-compatible provider config (JSON). The API key is read from the
    /// environment variable the config names (default SCENECMD_API_KEY).
    #[arg(long)]
    provider: Option<PathBuf>,
    /// Ask the model to explain each call.
    #[arg(long)]
    debug: bool,
    /// Write one JSONL trace per session into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Log wall-clock first-action latency for each request.
    #[arg(long)]
    measure_latency: bool,
}

#[derive(Args)]
struct ReplayArgs {
    trace: PathBuf,
    /// Write the final scene (full precision) here.
    #[arg(long)]
    scene_out: Option<PathBuf>,
    /// Write the outcome log (JSONL) here.
    #[arg(long)]
    outcomes_out: Option<PathBuf>,
}

#[derive(Args)]
struct PromptArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Print the pinned messages (system prompt + example exchange) as JSON.
    #[arg(long)]
    messages: bool,
}

#[derive(Args)]
struct CheckArgs {
    trace: PathBuf,
    #[arg(long)]
    golden: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn serve(args: ServeArgs) -> Result<()> {
    let provider = match (&args.mock, &args.provider) {
        (Some(m), _) => ProviderChoice::Mock(m.clone()),
        (None, Some(p)) => ProviderChoice::Endpoint(p.clone()),
        (None, None) => ProviderChoice::None,
    };
    // Surface provider config errors at startup, not on the first session.
    scenecmd_core::session::load_provider(&provider)?;
    if let Some(dir) = &args.trace_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let defaults = RunConfig {
        session: SessionConfig {
            mode: args.mode.into(),
            task: args.scene.task.into(),
            debug: args.debug,
            ..Default::default()
        },
        scene: args.scene.scene.clone(),
        provider,
        trace: None,
        measure_latency: args.measure_latency,
    };
    defaults.validate()?;
    // Fail fast on a bad scene rather than on the first session.
    args.scene.load()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = server::bind(&args.addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        let state = AppState::new(ServerConfig {
            defaults,
            trace_dir: args.trace_dir,
        });
        server::serve(listener, state).await?;
        Ok(())
    })
}

fn replay(args: ReplayArgs) -> Result<()> {
    let r = replay_trace(&read(&args.trace)?)?;
    let s = &r.session;
    let m = s.metrics();
    println!("records: {}", s.records().len());
    println!("revision: {}", s.scene().revision());
    println!("objects: {}", s.scene().objects().len());
    for o in s.scene().objects() {
        let p = o.position;
        println!(
            "  {:>8}  {:<20} ({:.2}, {:.2}, {:.2})",
            o.object_id, o.display_name, p.x, p.y, p.z
        );
    }
    if !m.targets.is_empty() {
        println!("metrics: {}", serde_json::to_string(m)?);
    }
    if !m.first_action_latency_s.is_empty() {
        println!("first-action latency (s): {:?}", m.first_action_latency_s);
    }
    if let Some(p) = args.scene_out {
        std::fs::write(&p, s.scene().to_file().to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = args.outcomes_out {
        std::fs::write(&p, s.outcome_log()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn render_prompt(args: PromptArgs) -> Result<()> {
    let file = args.scene.load()?;
    let scene = Scene::from_file(&file)?;
    let task: TaskKind = args.scene.task.into();
    let system = render_system_prompt(system_template(task.task_mode()), &scene)?;
    if args.messages {
        let (u, a) = one_shot_pair();
        let msgs = [ChatMessage::system(system), u, a];
        println!("{}", serde_json::to_string_pretty(&msgs)?);
    } else {
        print!("{system}");
    }
    Ok(())
}

fn check(args: CheckArgs) -> Result<bool> {
    let r = replay_trace(&read(&args.trace)?)?;
    let golden = read(&args.golden)?;
    let got = r.session.scene().to_file().to_json();
    if got == golden {
        println!("PASS final scene matches {}", args.golden.display());
        return Ok(true);
    }
    let golden_file = SceneFile::from_json(&golden).context("parsing golden scene")?;
    let want = golden_file.objects;
    let have = r.session.scene().to_file().objects;
    println!("FAIL final scene differs from {}", args.golden.display());
    for w in &want {
        match have.iter().find(|h| h.object_id == w.object_id) {
            None => println!("  missing {} ({})", w.object_id, w.object_name),
            Some(h) if h != w => println!("  differs {} ({})", w.object_id, w.object_name),
            Some(_) => {}
        }
    }
    for h in &have {
        if !want.iter().any(|w| w.object_id == h.object_id) {
            println!("  extra   {} ({})", h.object_id, h.object_name);
        }
    }
    Ok(false)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Serve(a) => serve(a).map(|_| true),
        Command::Replay(a) => replay(a).map(|_| true),
        Command::RenderPrompt(a) => render_prompt(a).map(|_| true),
        Command::Check(a) => check(a),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
