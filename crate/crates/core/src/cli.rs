//! The `rslc` command-line front end.
//!
//! Every run writes its outputs plus a `manifest.json` into `--out`. The
//! manifest records the argument vector, the resolved configuration, the seed,
//! the tool version and SHA-256 hashes of input files; `rslc rerun --manifest`
//! replays it. Exit codes: 0 success, 1 input or validation error, 2
//! numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    compose, compose_linear, game_bruteforce_check, path_integral_estimate, sample_trajectories,
    stationary_distribution, CompositionRequest, DivergenceOrder, GameCheckOptions,
};
use crate::discretizer::{build_hill_car_with, DeterministicAxis, HillCarConfig, TerrainModel};
use crate::divergence::LIMIT_THRESHOLD;
use crate::model::{validate, HorizonKind, Policy, ProblemSpec};
use crate::solver::{extract_policy, extract_policy_schedule, solve, ZFunction};
use crate::specfile::{load_spec, save_spec};
use crate::{Error, Result, SolverOptions};

#[derive(Debug, Parser, Serialize)]
#[command(name = "rslc", version, about = "Risk-sensitive linearly solvable control solver")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Check a problem and print a validation report.
    Validate(RunArgs),
    /// Solve for each alpha and write values, z, policy and report.
    Solve(RunArgs),
    /// Solve and write only the optimal policy.
    Policy(RunArgs),
    /// Stationary distribution of the optimally controlled chain (average cost).
    Stationary(RunArgs),
    /// Passive-dynamics rollouts and the path-integral value estimate.
    Sample(SampleArgs),
    /// Compose first-exit or finite-horizon solutions with weights.
    Compose(ComposeArgs),
    /// Brute-force min-max check of the equivalent zero-sum game.
    GameCheck(GameArgs),
    /// Write a preset problem as a problem file.
    Discretize(RunArgs),
    /// Replay a run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Preset {
    HillCar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OutputFormat {
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum AxisMode {
    Interpolate,
    Nearest,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Problem file (JSON, or TOML by extension).
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Built-in problem.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Rescale passive rows that do not sum to one.
    #[arg(long)]
    pub renormalize: bool,
    #[command(flatten)]
    pub hill: HillCarArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HillCarArgs {
    /// Height ratio of the hill at -0.9.
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub v1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub v2: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Euler step.
    #[arg(long)]
    pub h: Option<f64>,
    /// Gravitational acceleration.
    #[arg(long)]
    pub g: Option<f64>,
    /// Grid shape as NxM (position x velocity).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub deterministic_axis: Option<AxisMode>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Risk parameter(s), comma separated; defaults to the problem's own.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "rslc-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Rollouts per start state.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Start states, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub start: Vec<usize>,
    /// Step cap for first-exit rollouts.
    #[arg(long, default_value_t = 100_000)]
    pub t_max: usize,
    /// Also write every trajectory.
    #[arg(long)]
    pub write_paths: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComposeArgs {
    /// Component problems (same dynamics and running cost), repeatable.
    #[arg(long = "component", required = true)]
    pub components: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub weights: Vec<f64>,
    #[arg(long)]
    pub renormalize: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OrderArg {
    PassiveFirst,
    ControlFirst,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GameArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Simplex grid steps, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.005")]
    pub grid_step: Vec<f64>,
    #[arg(long, value_enum, default_value = "passive-first")]
    pub order: OrderArg,
    #[arg(long, default_value_t = 500_000_000)]
    pub max_evaluations: u64,
    /// Fail (exit 2) when the gap at the first grid step exceeds this.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    argv: Vec<String>,
    seed: Option<u64>,
    inputs: Vec<InputHash>,
    config: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct InputHash {
    path: PathBuf,
    sha256: String,
}

/// Runs the CLI on an argument vector (program name first) and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a, cli, argv),
        Command::Solve(a) => cmd_solve(a, cli, argv, false),
        Command::Policy(a) => cmd_solve(a, cli, argv, true),
        Command::Stationary(a) => cmd_stationary(a, cli, argv),
        Command::Sample(a) => cmd_sample(a, cli, argv),
        Command::Compose(a) => cmd_compose(a, cli, argv),
        Command::GameCheck(a) => cmd_game_check(a, cli, argv),
        Command::Discretize(a) => cmd_discretize(a, cli, argv),
        Command::Rerun(a) => cmd_rerun(a),
    }
}

fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let parsed: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("grid `{s}` is not NxM")))?;
    match parsed.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::Parse(format!("grid `{s}` is not NxM"))),
    }
}

fn hill_config(h: &HillCarArgs) -> Result<HillCarConfig> {
    let d = HillCarConfig::default();
    let t = TerrainModel {
        r: h.r.unwrap_or(d.terrain.r),
        v1: h.v1.unwrap_or(d.terrain.v1),
        v2: h.v2.unwrap_or(d.terrain.v2),
        g: h.g.unwrap_or(d.terrain.g),
    };
    Ok(HillCarConfig {
        terrain: t,
        sigma: h.sigma.unwrap_or(d.sigma),
        h: h.h.unwrap_or(d.h),
        grid_shape: match &h.grid {
            Some(g) => parse_grid(g)?,
            None => d.grid_shape,
        },
        deterministic_axis: match h.deterministic_axis {
            Some(AxisMode::Nearest) => DeterministicAxis::Nearest,
            _ => DeterministicAxis::Interpolate,
        },
    })
}

fn load_input(input: &InputArgs) -> Result<ProblemSpec> {
    let preset_flags = input.hill.r.is_some()
        || input.hill.v1.is_some()
        || input.hill.v2.is_some()
        || input.hill.sigma.is_some()
        || input.hill.h.is_some()
        || input.hill.g.is_some()
        || input.hill.grid.is_some()
        || input.hill.deterministic_axis.is_some();
    match (&input.spec, input.preset) {
        (Some(path), None) => {
            if preset_flags {
                return Err(Error::Parse("preset parameters need --preset".into()));
            }
            load_spec(path, input.renormalize)
        }
        (None, Some(Preset::HillCar)) => build_hill_car_with(&hill_config(&input.hill)?),
        _ => Err(Error::Parse("give exactly one of --spec or --preset".into())),
    }
}

fn alphas(spec: &ProblemSpec, common: &CommonArgs) -> Result<Vec<f64>> {
    if common.alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Parse("alpha values must be finite".into()));
    }
    Ok(if common.alpha.is_empty() {
        vec![spec.alpha()]
    } else {
        common.alpha.clone()
    })
}

fn solver_options(common: &CommonArgs) -> Result<SolverOptions> {
    if !(common.tol > 0.0) {
        return Err(Error::Parse(format!("--tol must be positive, got {}", common.tol)));
    }
    Ok(SolverOptions {
        tol: common.tol,
        max_iter: common.max_iter,
        ..SolverOptions::default()
    })
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn write_manifest(
    out: &Path,
    cli: &Cli,
    argv: &[String],
    seed: Option<u64>,
    inputs: &[&Path],
) -> Result<()> {
    let manifest = Manifest {
        tool: "rslc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: argv.to_vec(),
        seed,
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.to_path_buf(),
                    sha256: sha256_hex(p)?,
                })
            })
            .collect::<Result<_>>()?,
        config: serde_json::to_value(cli).map_err(|e| Error::Parse(e.to_string()))?,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn alpha_tag(alpha: f64) -> String {
    format!("alpha{alpha}")
}

fn coord_header(spec: &ProblemSpec) -> String {
    match spec.grid() {
        Some(g) => (0..g.shape.len()).map(|d| format!(",x{d}")).collect(),
        None => String::new(),
    }
}

fn coord_cells(spec: &ProblemSpec, state: usize) -> String {
    match spec.grid() {
        Some(g) => g.coordinates(state).iter().map(|c| format!(",{c}")).collect(),
        None => String::new(),
    }
}

fn stage_header(prefix: &str, n_stages: usize) -> String {
    if n_stages == 1 {
        format!(",{prefix}")
    } else {
        (0..n_stages).map(|t| format!(",{prefix}_{t}")).collect()
    }
}

fn vector_csv(spec: &ProblemSpec, prefix: &str, stages: &[Vec<f64>]) -> String {
    let mut s = format!("state{}{}\n", coord_header(spec), stage_header(prefix, stages.len()));
    for x in 0..spec.n_states() {
        let _ = write!(s, "{x}{}", coord_cells(spec, x));
        for st in stages {
            let _ = write!(s, ",{}", st[x]);
        }
        s.push('\n');
    }
    s
}

fn policy_csv(policies: &[Policy]) -> String {
    let timed = policies.len() > 1;
    let mut s = String::from(if timed { "t,from,to,prob\n" } else { "from,to,prob\n" });
    for (t, p) in policies.iter().enumerate() {
        for (i, j, v) in p.matrix.triplets() {
            if timed {
                let _ = writeln!(s, "{t},{i},{j},{v}");
            } else {
                let _ = writeln!(s, "{i},{j},{v}");
            }
        }
    }
    s
}

fn optimal_policies(spec: &ProblemSpec, v: &crate::ValueFunction) -> Result<Vec<Policy>> {
    match spec.kind() {
        HorizonKind::FiniteHorizon { .. } => extract_policy_schedule(spec, v),
        _ => Ok(vec![extract_policy(spec, v)?]),
    }
}

fn input_paths(input: &InputArgs) -> Vec<&Path> {
    input.spec.iter().map(|p| p.as_path()).collect()
}

fn cmd_validate(a: &RunArgs, cli: &Cli, argv: &[String]) -> Result<()> {
    let spec = load_input(&a.input)?;
    let report = validate(&spec);
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
    println!("{text}");
    prepare_out(&a.common.out)?;
    write_json(&a.common.out.join("validation.json"), &report)?;
    write_manifest(&a.common.out, cli, argv, None, &input_paths(&a.input))?;
    if report.is_solvable() {
        Ok(())
    } else {
        Err(Error::InvalidProblem(
            "problem does not meet its solver's preconditions".into(),
        ))
    }
}

fn cmd_solve(a: &RunArgs, cli: &Cli, argv: &[String], policy_only: bool) -> Result<()> {
    let base = load_input(&a.input)?;
    let opts = solver_options(&a.common)?;
    let out = &a.common.out;
    prepare_out(out)?;
    for alpha in alphas(&base, &a.common)? {
        let spec = base.with_alpha(alpha)?;
        let (v, report) = solve(&spec, &opts)?;
        let tag = alpha_tag(alpha);
        let policies = optimal_policies(&spec, &v)?;
        fs::write(out.join(format!("policy_{tag}.csv")), policy_csv(&policies))?;
        if !policy_only {
            fs::write(out.join(format!("value_{tag}.csv")), vector_csv(&spec, "v", &v.stages))?;
            if (alpha - 1.0).abs() >= LIMIT_THRESHOLD {
                let z = ZFunction::from_values(&spec, &v);
                fs::write(out.join(format!("z_{tag}.csv")), vector_csv(&spec, "log_z", &z.log_stages))?;
            }
            write_json(&out.join(format!("report_{tag}.json")), &report)?;
        }
        println!(
            "alpha {alpha}: {} iterations, residual {:e}{}",
            report.iterations,
            report.final_residual,
            report
                .average_cost
                .map(|c| format!(", average cost {c}"))
                .unwrap_or_default()
        );
    }
    write_manifest(out, cli, argv, None, &input_paths(&a.input))
}

fn cmd_stationary(a: &RunArgs, cli: &Cli, argv: &[String]) -> Result<()> {
    let base = load_input(&a.input)?;
    if !matches!(base.kind(), HorizonKind::InfiniteHorizonAverage) {
        return Err(Error::InvalidProblem(
            "stationary distributions need an average-cost (ih) problem".into(),
        ));
    }
    let opts = solver_options(&a.common)?;
    let out = &a.common.out;
    prepare_out(out)?;
    for alpha in alphas(&base, &a.common)? {
        let spec = base.with_alpha(alpha)?;
        let (v, report) = solve(&spec, &opts)?;
        let policy = extract_policy(&spec, &v)?;
        let st = stationary_distribution(&policy, opts.tol, opts.max_iter)?;
        let mu = st.distribution.probs().to_vec();
        let tag = alpha_tag(alpha);
        fs::write(
            out.join(format!("stationary_{tag}.csv")),
            vector_csv(&spec, "probability", &[mu]),
        )?;
        write_json(&out.join(format!("report_{tag}.json")), &report)?;
        println!(
            "alpha {alpha}: stationary residual {:e} after {} iterations",
            st.residual, st.iterations
        );
    }
    write_manifest(out, cli, argv, None, &input_paths(&a.input))
}

fn cmd_sample(a: &SampleArgs, cli: &Cli, argv: &[String]) -> Result<()> {
    let base = load_input(&a.run.input)?;
    let common = &a.run.common;
    let out = &common.out;
    prepare_out(out)?;
    for alpha in alphas(&base, common)? {
        let spec = base.with_alpha(alpha)?;
        let tag = alpha_tag(alpha);
        let estimates = a
            .start
            .iter()
            .map(|&s| path_integral_estimate(&spec, s, a.n, common.seed, a.t_max))
            .collect::<Result<Vec<_>>>()?;
        write_json(&out.join(format!("path_integral_{tag}.json")), &estimates)?;
        for e in &estimates {
            println!(
                "alpha {alpha}, start {}: estimate {} (std error {:e}, truncated {})",
                e.start, e.estimate, e.std_error, e.truncated_fraction
            );
        }
        if a.write_paths {
            let paths =
                sample_trajectories(&spec, spec.passive(), &a.start, a.n, common.seed, a.t_max)?;
            let mut s = String::from("index,start,length,terminated,accumulated_cost,states\n");
            for (k, t) in paths.iter().enumerate() {
                let states: Vec<String> = t.states.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(
                    s,
                    "{k},{},{},{},{},{}",
                    t.start,
                    t.length,
                    t.terminated,
                    t.accumulated_cost,
                    states.join(";")
                );
            }
            fs::write(out.join(format!("trajectories_{tag}.csv")), s)?;
        }
    }
    write_manifest(out, cli, argv, Some(common.seed), &input_paths(&a.run.input))
}

fn cmd_compose(a: &ComposeArgs, cli: &Cli, argv: &[String]) -> Result<()> {
    let specs = a
        .components
        .iter()
        .map(|p| load_spec(p, a.renormalize))
        .collect::<Result<Vec<_>>>()?;
    let opts = solver_options(&a.common)?;
    let out = &a.common.out;
    prepare_out(out)?;
    let base = &specs[0];
    for alpha in alphas(base, &a.common)? {
        let solved = specs
            .iter()
            .map(|s| {
                let s = s.with_alpha(alpha)?;
                let (v, _) = solve(&s, &opts)?;
                Ok((s, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = &solved[0].0;
        let tag = alpha_tag(alpha);
        let residual = if (alpha - 1.0).abs() < LIMIT_THRESHOLD {
            let comps: Vec<_> = solved.iter().map(|(s, v)| (v.clone(), s.costs().clone())).collect();
            let c = compose_linear(spec, &comps, &a.weights)?;
            fs::write(out.join(format!("value_{tag}.csv")), vector_csv(spec, "v", &c.values.stages))?;
            c.residual
        } else {
            let req = CompositionRequest {
                components: solved.iter().map(|(s, v)| ZFunction::from_values(s, v)).collect(),
                weights: a.weights.clone(),
            };
            let c = compose(spec, &req)?;
            fs::write(out.join(format!("z_{tag}.csv")), vector_csv(spec, "log_z", &c.z.log_stages))?;
            fs::write(
                out.join(format!("final_cost_{tag}.csv")),
                vector_csv(spec, "q_final", std::slice::from_ref(&c.final_cost)),
            )?;
            c.residual
        };
        write_json(
            &out.join(format!("compose_{tag}.json")),
            &serde_json::json!({ "alpha": alpha, "weights": a.weights, "residual": residual }),
        )?;
        println!("alpha {alpha}: composed residual {residual:e}");
    }
    let paths: Vec<&Path> = a.components.iter().map(|p| p.as_path()).collect();
    write_manifest(out, cli, argv, None, &paths)
}

fn cmd_game_check(a: &GameArgs, cli: &Cli, argv: &[String]) -> Result<()> {
    let base = load_input(&a.run.input)?;
    let out = &a.run.common.out;
    prepare_out(out)?;
    let opts = GameCheckOptions {
        order: match a.order {
            OrderArg::PassiveFirst => DivergenceOrder::PassiveFirst,
            OrderArg::ControlFirst => DivergenceOrder::ControlFirst,
        },
        max_evaluations: a.max_evaluations,
    };
    let mut failed = None;
    for alpha in alphas(&base, &a.run.common)? {
        let spec = base.with_alpha(alpha)?;
        let reports = a
            .grid_step
            .iter()
            .map(|&step| game_bruteforce_check(&spec, step, &opts))
            .collect::<Result<Vec<_>>>()?;
        for r in &reports {
            println!("alpha {alpha}, grid step {}: gap {:e}", r.grid_step, r.gap);
        }
        if let (Some(th), Some(first)) = (a.threshold, reports.first()) {
            if first.gap > th {
                failed = Some(format!(
                    "gap {:e} at alpha {alpha} exceeds the threshold {th:e}",
                    first.gap
                ));
            }
        }
        write_json(&out.join(format!("game_check_{}.json", alpha_tag(alpha))), &reports)?;
    }
    write_manifest(out, cli, argv, None, &input_paths(&a.run.input))?;
    match failed {
        Some(msg) => Err(Error::Numerical(msg)),
        None => Ok(()),
    }
}

fn cmd_discretize(a: &RunArgs, cli: &Cli, argv: &[String]) -> Result<()> {
    if a.input.preset.is_none() {
        return Err(Error::Parse("discretize needs --preset".into()));
    }
    let spec = load_input(&a.input)?;
    let spec = match a.common.alpha.as_slice() {
        [] => spec,
        [alpha] => spec.with_alpha(*alpha)?,
        _ => return Err(Error::Parse("discretize takes a single --alpha".into())),
    };
    let out = &a.common.out;
    prepare_out(out)?;
    let path = out.join("hill_car.json");
    save_spec(&spec, &path)?;
    println!("wrote {} ({} states)", path.display(), spec.n_states());
    write_manifest(out, cli, argv, None, &[])
}

fn cmd_rerun(a: &RerunArgs) -> Result<()> {
    let text = fs::read_to_string(&a.manifest)?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if m.tool != "rslc" {
        return Err(Error::Parse(format!("manifest is for `{}`", m.tool)));
    }
    for input in &m.inputs {
        let now = sha256_hex(&input.path)?;
        if now != input.sha256 {
            return Err(Error::InvalidProblem(format!(
                "{} changed since the recorded run",
                input.path.display()
            )));
        }
    }
    let mut argv = m.argv.clone();
    if matches!(argv.get(1).map(String::as_str), Some("rerun")) {
        return Err(Error::Parse("a manifest cannot replay another rerun".into()));
    }
    if let Some(out) = &a.out {
        argv.push("--out".into());
        argv.push(out.display().to_string());
    }
    match run(argv) {
        0 => Ok(()),
        2 => Err(Error::Numerical("replayed run failed".into())),
        _ => Err(Error::InvalidProblem("replayed run failed".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("101x51").unwrap(), [101, 51]);
        assert!(parse_grid("101").is_err());
        assert!(parse_grid("ax3").is_err());
    }

    #[test]
    fn negative_alpha_list_parses() {
        let cli = Cli::try_parse_from([
            "rslc", "solve", "--preset", "hill-car", "--alpha", "-0.1,0,0.1",
        ])
        .unwrap();
        let Command::Solve(a) = cli.command else { panic!() };
        assert_eq!(a.common.alpha, vec![-0.1, 0.0, 0.1]);
    }

    #[test]
    fn exactly_one_input() {
        assert_eq!(run(["rslc", "solve", "--out", "/nonexistent-dir/x"]), 1);
        assert_eq!(run(["rslc", "bogus"]), 1);
    }
}
