//! The `worldmem` command line.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, unreadable input,
//! unwritable output), 2 validation or divergence failure.

pub mod script;

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use worldmem_core::dynamics::advance_in_place;
use worldmem_core::level::{generate_map, load_map, rasterize_minimap, save_map, validate_map, LevelError, LevelSpec, MapDocument};
use worldmem_core::metrics::evaluate_rollout;
use worldmem_core::observation::{
    backend_by_name, viewpoint_readout, ObservationBackend, ObservationContext, RaycastBackend, BACKEND_NAMES,
};
use worldmem_core::replay::{replay_from_log, ReplayError, ReplayLog};
use worldmem_core::{ActionSet, MotionConfig, PlayerId, Pose, ViewConfig, WorldState};
use worldmem_server::{RenderMode, SessionConfig};

use crate::script::parse_script;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "worldmem",
    version,
    about = "Shared-world multiplayer engine: maps, serving, replay and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a map from a seed.
    GenMap(GenMapArgs),
    /// Check a map file against every map invariant.
    Validate(ValidateArgs),
    /// Rasterize a map top-down as a PPM image.
    Minimap(MinimapArgs),
    /// Run the multiplayer server until interrupted.
    Serve(ServeArgs),
    /// Re-run a replay log and check its hashes.
    Replay(ReplayArgs),
    /// Score opponent presence in rendered rollouts against geometry.
    EvalPresence(EvalArgs),
    /// Render first-person frames and minimaps for a scripted rollout.
    RenderRollout(RenderArgs),
}

#[derive(Debug, Args)]
pub struct GenMapArgs {
    #[arg(long)]
    pub seed: u64,
    /// Number of rooms.
    #[arg(long, default_value_t = LevelSpec::default().room_count)]
    pub rooms: usize,
    /// Corridor width; also the generator's grid cell side.
    #[arg(long, default_value_t = LevelSpec::default().corridor_width)]
    pub corridor_width: f64,
    #[arg(long, default_value_t = LevelSpec::default().room_size_range.0)]
    pub min_room: f64,
    #[arg(long, default_value_t = LevelSpec::default().room_size_range.1)]
    pub max_room: f64,
    /// Side of the square area rooms are placed in.
    #[arg(long, default_value_t = LevelSpec::default().grid_extent)]
    pub extent: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Player collision radius used for clearance and connectivity.
    #[arg(long, default_value_t = MotionConfig::default().collision_radius)]
    pub radius: f64,
}

#[derive(Debug, Args)]
pub struct MinimapArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pixels per world unit.
    #[arg(long, default_value_t = 8.0)]
    pub scale: f64,
    /// Draw an arrow at every spawn point.
    #[arg(long)]
    pub spawns: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// JSON configuration document; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub tick_rate: Option<f64>,
    #[arg(long)]
    pub max_players: Option<usize>,
    /// Write a replay log of the session to this path.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long, value_parser = ["readout", "frames"])]
    pub render_mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, value_parser = BACKEND_NAMES)]
    pub backend: String,
    /// Where to write the text report.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = worldmem_core::observation::DEFAULT_WIDTH)]
    pub width: usize,
    #[arg(long, default_value_t = worldmem_core::observation::DEFAULT_HEIGHT)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Action script: lines of `tick player move strafe turn attack`.
    #[arg(long)]
    pub actions: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Players p1..pN placed at tick 0; the script may only name these.
    #[arg(long, default_value_t = 1)]
    pub players: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = worldmem_core::observation::DEFAULT_WIDTH)]
    pub width: usize,
    #[arg(long, default_value_t = worldmem_core::observation::DEFAULT_HEIGHT)]
    pub height: usize,
    /// Minimap pixels per world unit.
    #[arg(long, default_value_t = 8.0)]
    pub minimap_scale: f64,
}

/// An error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(e: impl Display) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
}

fn invalid(e: impl Display) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: e.to_string(),
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name), runs the command, and returns
/// the process exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::GenMap(a) => gen_map(a),
        Command::Validate(a) => validate(a),
        Command::Minimap(a) => minimap(a),
        Command::Serve(a) => serve(a),
        Command::Replay(a) => replay(a),
        Command::EvalPresence(a) => eval_presence(a),
        Command::RenderRollout(a) => render_rollout(a),
    }
}

/// Parse and validation failures are exit 2; I/O failures are exit 1.
fn map_failure(path: &Path, e: LevelError) -> Failure {
    match e {
        LevelError::Io(_) => usage(format!("{}: {e}", path.display())),
        other => invalid(format!("{}: {other}", path.display())),
    }
}

fn gen_map(a: GenMapArgs) -> CmdResult {
    let spec = LevelSpec {
        seed: a.seed,
        room_count: a.rooms,
        room_size_range: (a.min_room, a.max_room),
        corridor_width: a.corridor_width,
        grid_extent: a.extent,
    };
    spec.validate().map_err(usage)?;
    let map = generate_map(&spec).map_err(invalid)?;
    save_map(&map, &a.out).map_err(|e| usage(format!("{}: {e}", a.out.display())))?;
    println!(
        "wrote {} ({} vertices, {} edges, {} spawns)",
        a.out.display(),
        map.vertices().len(),
        map.edges().len(),
        map.spawns().len()
    );
    Ok(())
}

fn validate(a: ValidateArgs) -> CmdResult {
    if !(a.radius > 0.0 && a.radius.is_finite()) {
        return Err(usage(format!("--radius must be positive, got {}", a.radius)));
    }
    let text = fs::read_to_string(&a.map).map_err(|e| usage(format!("{}: {e}", a.map.display())))?;
    let map = MapDocument::parse(&text)
        .and_then(MapDocument::into_map_unvalidated)
        .map_err(|e| map_failure(&a.map, e))?;
    let report = validate_map(&map, a.radius);
    if report.is_valid() {
        println!("valid: {} ({} edges, {} spawns)", map.name(), map.edges().len(), map.spawns().len());
        Ok(())
    } else {
        for v in &report.violations {
            println!("{v}");
        }
        Err(invalid(format!("{}: {} violation(s)", a.map.display(), report.violations.len())))
    }
}

fn minimap(a: MinimapArgs) -> CmdResult {
    if !(a.scale > 0.0 && a.scale.is_finite()) {
        return Err(usage(format!("--scale must be positive, got {}", a.scale)));
    }
    let map = load_map(&a.map).map_err(|e| map_failure(&a.map, e))?;
    let poses: Vec<(PlayerId, Pose)> = if a.spawns {
        map.spawns()
            .iter()
            .enumerate()
            .map(|(i, s)| (PlayerId::new(format!("p{}", i + 1)), Pose::from(*s)))
            .collect()
    } else {
        Vec::new()
    };
    let img = rasterize_minimap(&map, &poses, a.scale);
    write_file(&a.out, &img.frame.to_ppm())?;
    println!("wrote {} ({}x{})", a.out.display(), img.frame.width, img.frame.height);
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn serve(a: ServeArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SessionConfig>(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => SessionConfig::default(),
    };
    cfg.map = Some(a.map);
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.port.is_some() || a.config.is_none() {
        let port = a.port.unwrap_or(7777);
        cfg.listen = format!("{}:{port}", a.host);
    }
    if let Some(r) = a.tick_rate {
        cfg.tick_rate = r;
    }
    if let Some(m) = a.max_players {
        cfg.max_players = m;
    }
    if a.record.is_some() {
        cfg.record = a.record;
    }
    if let Some(m) = a.render_mode {
        cfg.render_mode = m.parse::<RenderMode>().map_err(usage)?;
    }
    cfg.validate().map_err(usage)?;

    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let rt = tokio::runtime::Runtime::new().map_err(usage)?;
    let summary = rt.block_on(worldmem_server::run_server(cfg)).map_err(|e| match e {
        worldmem_server::ServerError::Map(e) => invalid(e),
        other => usage(other),
    })?;
    println!("final_tick {}", summary.final_tick);
    println!("final_hash {}", summary.final_hash);
    Ok(())
}

fn load_log(path: &Path) -> Result<ReplayLog, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    ReplayLog::parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn replay(a: ReplayArgs) -> CmdResult {
    let log = load_log(&a.log)?;
    match replay_from_log(&log) {
        Ok(out) => {
            println!("final_tick {}", out.state.tick());
            println!("final_hash {:016x}", out.state.canonical_hash());
            Ok(())
        }
        Err(e @ ReplayError::Divergence { .. }) | Err(e @ ReplayError::Apply { .. }) => {
            let tick = e.divergent_tick().expect("divergence has a tick");
            println!("divergent_tick {tick}");
            Err(invalid(e))
        }
        Err(e) => Err(invalid(e)),
    }
}

fn eval_presence(a: EvalArgs) -> CmdResult {
    if a.width == 0 || a.height == 0 {
        return Err(usage("frame size must be nonzero"));
    }
    let log = load_log(&a.log)?;
    let backend = backend_by_name(&a.backend).ok_or_else(|| usage(format!("unknown backend {}", a.backend)))?;
    let report = evaluate_rollout(&log, backend.as_ref(), a.width, a.height).map_err(invalid)?;
    write_file(&a.out, report.to_text().as_bytes())?;
    let ratio = |r: Option<f64>| r.map_or_else(|| "absent".to_string(), |v| format!("{v:.6}"));
    println!(
        "{}: labels {} accuracy {} precision {} recall {}",
        report.backend,
        report.score.total(),
        ratio(report.score.accuracy),
        ratio(report.score.precision),
        ratio(report.score.recall)
    );
    Ok(())
}

/// Renders the state each scripted tick acts from: ticks 0..T for a T-tick
/// script, or tick 0 alone when the script is empty.
fn render_rollout(a: RenderArgs) -> CmdResult {
    if a.players == 0 || a.width == 0 || a.height == 0 {
        return Err(usage("--players, --width and --height must be positive"));
    }
    if !(a.minimap_scale > 0.0 && a.minimap_scale.is_finite()) {
        return Err(usage("--minimap-scale must be positive"));
    }
    let map = load_map(&a.map).map_err(|e| map_failure(&a.map, e))?;
    let text = fs::read_to_string(&a.actions).map_err(|e| usage(format!("{}: {e}", a.actions.display())))?;
    let script = parse_script(&text).map_err(|e| invalid(format!("{}: {e}", a.actions.display())))?;
    let ids: Vec<PlayerId> = (1..=a.players).map(|i| PlayerId::new(format!("p{i}"))).collect();
    if let Some(unknown) = script.players().find(|p| !ids.contains(p)) {
        return Err(invalid(format!("script names {unknown}, but only p1..p{} are placed", a.players)));
    }

    let motion = MotionConfig::default();
    let view = ViewConfig::default();
    let mut state = WorldState::new(map, a.seed, motion.collision_radius).map_err(invalid)?;
    for id in &ids {
        state.add_player(id.clone()).map_err(|e| invalid(format!("placing {id}: {e}")))?;
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| usage(format!("{}: {e}", a.out_dir.display())))?;

    let mut contexts: Vec<ObservationContext> = ids.iter().map(|_| ObservationContext::new(4, a.width, a.height)).collect();
    let mut emit = |state: &WorldState, actions: &ActionSet| -> CmdResult {
        let tick = state.tick();
        for (id, ctx) in ids.iter().zip(contexts.iter_mut()) {
            if !state.player(id).is_some_and(|p| p.is_active()) {
                continue;
            }
            let readout = viewpoint_readout(state, id, &view).map_err(invalid)?;
            let action = actions.get(id).copied().unwrap_or_default();
            let frame = RaycastBackend.observe(ctx, &readout, &action, a.width, a.height).map_err(invalid)?;
            write_file(&a.out_dir.join(format!("frame_{id}_{tick:05}.ppm")), &frame.to_ppm())?;
            ctx.push(frame).map_err(invalid)?;
        }
        let poses: Vec<(PlayerId, Pose)> = state.active_players().map(|p| (p.id.clone(), p.pose)).collect();
        let img = rasterize_minimap(state.map(), &poses, a.minimap_scale);
        write_file(&a.out_dir.join(format!("minimap_{tick:05}.ppm")), &img.frame.to_ppm())
    };

    if script.is_empty() {
        emit(&state, &ActionSet::new())?;
    }
    for t in 0..script.len() {
        let actions = script.actions_at(t);
        emit(&state, &actions)?;
        advance_in_place(&mut state, &actions, &motion).map_err(|e| invalid(format!("tick {t}: {e}")))?;
    }
    let last = script.len().max(1) - 1;
    println!("rendered ticks 0..={last} for {} player(s) into {}", a.players, a.out_dir.display());
    Ok(())
}
