use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use koopman_core::analysis::{attitude_bounds, controllability_at, Equilibration, RankTolerance};
use koopman_core::attitude_lift::TruncationConfig;
use koopman_core::harness::output::{emit_results, summarize, RunSummary};
use koopman_core::harness::overrides::{document_with_overrides, parse_override, Document, Override};
use koopman_core::harness::presets;
use koopman_core::harness::scenario::{InertiaSpec, NamedInertia};
use koopman_core::harness::{prepare, ScenarioConfig, ScenarioKind, ScenarioResult};
use koopman_core::quad_control::{run_quad, QuadConfig, QuadRun};
use koopman_core::rigid_body::{BodyParams, RigidBodyState, Vec3, STANDARD_GRAVITY};
use koopman_core::Error;

/// `println!` that exits quietly when the reader has gone away.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
    }};
}

#[derive(Parser, Debug)]
#[command(name = "koopman", version, about = "Koopman lifting of rigid-body dynamics: validation, bounds and quadrotor control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare truncated attitude models against the nonlinear body.
    ValidateAttitude(RunArgs),
    /// Compare truncated attitude and position models against the nonlinear body.
    ValidateFull(RunArgs),
    /// Evaluate the ladder norm bounds and the validity horizon.
    Bounds(BoundsArgs),
    /// Rank test of the lifted input matrix at a state.
    Controllability(ControllabilityArgs),
    /// Fly the quadrotor square with the lifted LQI controller.
    SimulateQuad(QuadArgs),
    /// List the shipped presets.
    Presets {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Shipped preset name (see `presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set sim.record_every=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory (default `out/<scenario>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the truncation sweep (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Print the run summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct BodyArgs {
    /// Named inertia (J0..J4, JQ, JI) or `Jx,Jy,Jz`.
    #[arg(long, default_value = "J0")]
    inertia: String,
    /// Body rate [rad/s]: one value for every axis or `x,y,z`.
    #[arg(long, default_value = "0.001")]
    nu: String,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    body: BodyArgs,
    /// Highest ladder index.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Torque norm [N m].
    #[arg(long, default_value_t = 0.0)]
    torque: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ControllabilityArgs {
    #[command(flatten)]
    body: BodyArgs,
    /// Truncations as `N` or `Nnu:Nz`, comma separated.
    #[arg(long, default_value = "2,3,4,5,6")]
    truncations: String,
    /// Position [m] as `x,y,z`.
    #[arg(long, default_value = "0,0,0")]
    position: String,
    /// Body velocity [m/s] as `x,y,z`.
    #[arg(long, default_value = "0,0,0")]
    velocity: String,
    /// Roll, pitch, yaw [rad] as `x,y,z`.
    #[arg(long, default_value = "0,0,0")]
    euler: String,
    /// Skip row/column equilibration before the rank test.
    #[arg(long)]
    no_equilibration: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct QuadArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(e) => match e {
                Error::Config(_) | Error::InvalidParameter(_) | Error::SymmetryViolation(_) | Error::ZeroNormalizer(_) => 2,
                Error::Io(_) => 1,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::ValidateAttitude(a) => validate(a, ScenarioKind::Attitude),
        Command::ValidateFull(a) => validate(a, ScenarioKind::Full),
        Command::Bounds(a) => bounds(a),
        Command::Controllability(a) => controllability(a),
        Command::SimulateQuad(a) => simulate_quad(a),
        Command::Presets { json } => {
            let names = presets::names();
            if json {
                print_json(&names)?;
            } else {
                for n in names {
                    out!("{n}");
                }
            }
            Ok(())
        }
    }
}

/// `fig1` and `fig01` name the same preset.
fn canonical_preset(name: &str) -> String {
    match name.strip_prefix("fig").and_then(|d| d.parse::<u32>().ok()) {
        Some(n) => format!("fig{n:02}"),
        None => name.to_string(),
    }
}

fn load_document(source: &Source) -> CliResult<Document> {
    let overrides = source.overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<Override>, _>>()?;
    let text = match (&source.preset, &source.config) {
        (Some(name), _) => presets::text(&canonical_preset(name))
            .ok_or_else(|| Failure::Usage(format!("unknown preset '{name}' (run `koopman presets`)")))?
            .to_string(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => return Err(Failure::Usage("one of --preset or --config is required".into())),
    };
    Ok(document_with_overrides(&text, &overrides)?)
}

fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn validate(args: RunArgs, kind: ScenarioKind) -> CliResult<()> {
    let cfg = ScenarioConfig::from_value(load_document(&args.source)?)?;
    if cfg.kind != kind {
        return Err(Failure::Core(Error::Config(format!(
            "scenario '{}' is of kind {:?}; use validate-{}",
            cfg.name,
            cfg.kind,
            if cfg.kind == ScenarioKind::Full { "full" } else { "attitude" }
        ))));
    }
    let started = Instant::now();
    let prepared = prepare(&cfg)?;
    let pool = thread_pool(args.jobs)?;
    let series = pool.install(|| {
        cfg.truncations.par_iter().map(|t| prepared.run_truncation(*t)).collect::<Result<Vec<_>, _>>()
    })?;
    let result = prepared.finish(series);
    let out = args.out.unwrap_or_else(|| Path::new("out").join(&cfg.name));
    emit_results(&result, &out)?;
    let summary = summarize(&result);
    if args.json {
        print_json(&summary)?;
    } else {
        print_validation(&result, &summary, &out, started.elapsed().as_secs_f64());
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"))
}

fn print_validation(result: &ScenarioResult, summary: &RunSummary, out: &Path, seconds: f64) {
    let r = &result.resolved;
    out!("scenario   {}", summary.scenario);
    out!("t_lim      {}", fmt_opt(r.t_lim));
    out!("dt         {:.4e} s ({:?})", r.dt, r.dt_source);
    out!("horizon    {:.4e} s ({:?})", r.horizon, r.horizon_source);
    let quantities: Vec<&String> = result.normalizers.keys().collect();
    print!("{:<10}", "model");
    for q in &quantities {
        print!(" {:>12}", format!("max e_{q}"));
    }
    out!(" {:>12} {:>12} {:>12}", "total", "diverged", "onset");
    for s in &summary.series {
        print!("{:<10}", s.label);
        for q in &quantities {
            print!(" {:>12}", fmt_opt(s.maxima.get(*q).copied()));
        }
        out!(" {:>12} {:>12} {:>12}", fmt_opt(s.total), fmt_opt(s.divergence_time), fmt_opt(s.onset_time));
    }
    out!("wrote {} ({seconds:.1} s)", out.display());
}

fn parse_vec3(text: &str, what: &str) -> CliResult<Vec3> {
    let parts = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(format!("{what}: {e}")))?;
    match parts.as_slice() {
        [v] => Ok(Vec3::repeat(*v)),
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(Failure::Usage(format!("{what} needs one or three comma-separated values, got '{text}'"))),
    }
}

fn body_params(body: &BodyArgs) -> CliResult<BodyParams> {
    let spec = match NamedInertia::parse(&body.inertia) {
        Ok(n) => InertiaSpec::Named(n),
        Err(_) => {
            let d = parse_vec3(&body.inertia, "--inertia")?;
            InertiaSpec::Diagonal { diag: [d.x, d.y, d.z] }
        }
    };
    Ok(BodyParams::new(Vec3::from(spec.diagonal()), body.mass, STANDARD_GRAVITY)?)
}

fn bounds(args: BoundsArgs) -> CliResult<()> {
    let params = body_params(&args.body)?;
    let nu = parse_vec3(&args.body.nu, "--nu")?;
    let gamma = params.inertia() * nu;
    let report = attitude_bounds(&params, gamma.norm(), nu.norm(), args.torque, args.k);
    if args.json {
        return print_json(&report);
    }
    out!("|J^-1|     {:.6e}", report.inv_inertia_norm);
    out!("|gamma|    {:.6e}", report.gamma_norm);
    out!("|nu|       {:.6e}", report.nu_norm);
    out!("t_lim      {}", fmt_opt(report.t_lim));
    out!("{:>3} {:>14} {:>14} {:>14} {:>14} {:>14}", "k", "|nu_k+1|", "|gamma_k+1|", "|H_k|", "|nu_k'|", "relaxed nu");
    for k in 0..=args.k {
        out!(
            "{k:>3} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            report.nu[k], report.gamma[k], report.big_h[k], report.nu_dot[k], report.nu_relaxed[k]
        );
    }
    Ok(())
}

fn parse_truncations(text: &str) -> CliResult<Vec<TruncationConfig>> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let (a, b) = item.split_once(':').unwrap_or((item, item));
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| Failure::Usage(format!("truncation '{item}': {e}")));
            Ok(TruncationConfig::new(parse(a)?, parse(b)?)?)
        })
        .collect()
}

#[derive(serde::Serialize)]
struct RankRow {
    label: String,
    rank: usize,
    full_rank: bool,
    singular_values: Vec<f64>,
    tolerance: f64,
}

fn controllability(args: ControllabilityArgs) -> CliResult<()> {
    let params = body_params(&args.body)?;
    let s = RigidBodyState::from_euler(
        parse_vec3(&args.position, "--position")?,
        parse_vec3(&args.velocity, "--velocity")?,
        &parse_vec3(&args.euler, "--euler")?,
        parse_vec3(&args.body.nu, "--nu")?,
    );
    let eq = if args.no_equilibration { Equilibration::None } else { Equilibration::Ruiz };
    let rows = parse_truncations(&args.truncations)?
        .into_iter()
        .map(|t| {
            let r = controllability_at(&s, &params, &t, RankTolerance::Default, eq)?;
            Ok(RankRow {
                label: t.label(),
                rank: r.rank,
                full_rank: r.full_rank,
                singular_values: r.singular_values.iter().copied().collect(),
                tolerance: r.tolerance,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    if args.json {
        return print_json(&rows);
    }
    out!("{:<10} {:>4} {:>6} {:>12} {:>12}", "model", "rank", "full", "sigma_max", "sigma_min");
    for r in rows {
        out!(
            "{:<10} {:>4} {:>6} {:>12.4e} {:>12.4e}",
            r.label,
            r.rank,
            r.full_rank,
            r.singular_values[0],
            r.singular_values[r.singular_values.len() - 1]
        );
    }
    Ok(())
}

fn simulate_quad(args: QuadArgs) -> CliResult<()> {
    let mut source = args.source;
    if source.preset.is_none() && source.config.is_none() {
        source.preset = Some(presets::QUAD_SQUARE.0.to_string());
    }
    let cfg = QuadConfig::from_value(load_document(&source)?)?;
    let started = Instant::now();
    let run = run_quad(&cfg)?;
    let out = args.out.unwrap_or_else(|| Path::new("out").join(&cfg.name));
    run.emit(&out)?;
    if args.json {
        print_json(&run.summary())
    } else {
        print_quad(&run, &out, started.elapsed().as_secs_f64());
        Ok(())
    }
}

fn print_quad(run: &QuadRun, out: &Path, seconds: f64) {
    let s = &run.stats;
    let side = run.config.trajectory.side;
    out!("scenario          {}", run.config.name);
    out!("riccati residual  {:.3e}", run.controller.care.relative_residual);
    out!("closed-loop max Re {:.4e}", run.controller.care.abscissa);
    out!("max tracking err  {:.4e} m ({:.3}% of side)", s.max_tracking_error, 100.0 * s.max_tracking_error / side);
    let corners: Vec<String> = s.corner_errors.iter().map(|e| format!("{e:.3e}")).collect();
    out!("corner errors     {}", corners.join(" "));
    out!("thrust range      [{:.4}, {:.4}] N", s.min_thrust, s.max_thrust);
    out!("max |M|           {:.4e} N m", s.max_torque_norm);
    out!(
        "delta_bu %        median {:.3e}  p95 {:.3e}  max {:.3e}  below {}%: {:.1}%",
        s.median_residual_pct,
        s.p95_residual_pct,
        s.max_residual_pct,
        s.residual_threshold_pct,
        100.0 * s.fraction_residual_below
    );
    out!("integrator clamps {}", s.clamp_events);
    out!("wrote {} ({seconds:.1} s)", out.display());
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    out!("{text}");
    Ok(())
}
