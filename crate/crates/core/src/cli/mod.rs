//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid or malformed input,
//! 3 a `verify` check failed.

pub mod files;
pub mod report;
mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::error::Error;
use crate::model::{platform_utility, policy_utilities, PersuasionInstance};
use crate::reduction::solve_one_shot;
use crate::repeated::{sender_value, solve_repeated, SolverConfig};
use crate::segmentation::{bbm_segmentation, pareto_mix, surplus_triangle, surpluses};
use crate::simulate::{punishment_hazard, simulate, write_trajectory, SenderMode, SimConfig};

use files::{read_instance, read_json, read_market, write_json, PolicyFile};
use report::Report;

/// Replications behind the punishment-hazard estimate of `simulate --deviate`.
const HAZARD_REPLICATIONS: u64 = 10_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Malformed { .. } | CliError::Invalid(_) => 2,
            CliError::ChecksFailed(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "persuasion", version, about = "Disclosure policies for persuasion platforms")]
pub struct Cli {
    /// Print machine-readable JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// User-optimal one-shot policy.
    SolveOneshot {
        instance: PathBuf,
        /// Write the policy file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Consumer-optimal segmentation of a market file.
    Segment {
        market: PathBuf,
        /// Mix the consumer-optimal and full-revelation segmentations.
        #[arg(long, value_name = "LAMBDA")]
        pareto_mix: Option<f64>,
    },
    /// Optimal policy with a truthful segment for the repeated game.
    SolveRepeated {
        instance: PathBuf,
        /// Grid points per axis of the mass-split search.
        #[arg(long, default_value_t = 32)]
        grid: usize,
        /// Best grid cells refined locally.
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo play of the repeated game under a policy file.
    Simulate {
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        periods: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lie at the threshold of type K (1-based) on the truthful segment.
        #[arg(long, value_name = "K")]
        deviate: Option<usize>,
        /// Write the per-period trajectory here.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Run invariant and oracle checks on an instance and optional policy.
    Verify {
        instance: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and prints its report.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let json = cli.json;
    let (report, outcome) = match execute(cli.command) {
        Ok(report) => (Some(report), Ok(())),
        Err((report, e)) => (report, Err(e)),
    };
    if let Some(report) = report {
        let text = if json { report.render_json() } else { report.render_human() };
        let mut stdout = std::io::stdout().lock();
        if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
            return ExitCode::from(1);
        }
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// A failed `verify` still returns its report so it can be printed.
type Outcome = Result<Report, (Option<Report>, CliError)>;

fn execute(command: Command) -> Outcome {
    let plain = |r: Result<Report, CliError>| r.map_err(|e| (None, e));
    match command {
        Command::SolveOneshot { instance, out } => plain(cmd_solve_oneshot(&instance, out)),
        Command::Segment { market, pareto_mix } => plain(cmd_segment(&market, pareto_mix)),
        Command::SolveRepeated {
            instance,
            grid,
            restarts,
            out,
        } => plain(cmd_solve_repeated(&instance, grid, restarts, out)),
        Command::Simulate {
            instance,
            policy,
            periods,
            seed,
            deviate,
            trajectory,
        } => plain(cmd_simulate(&instance, &policy, periods, seed, deviate, trajectory)),
        Command::Verify { instance, policy } => {
            let report = verify::cmd_verify(&instance, policy.as_deref()).map_err(|e| (None, e))?;
            match report.failed {
                0 => Ok(report.report),
                n => Err((Some(report.report), CliError::ChecksFailed(n))),
            }
        }
    }
}

fn push_policy(report: &mut Report, policy: &PolicyFile) {
    report.push("segments", policy.segments.len());
    for (i, s) in policy.segments.iter().enumerate() {
        let tag = format!("segment.{}", i + 1);
        report.push(format!("{tag}.weight"), s.weight);
        report.push(format!("{tag}.posterior"), s.posterior.clone());
        report.push(format!("{tag}.lie_prob"), s.lie_prob);
        if s.truthful {
            report.push(format!("{tag}.truthful"), true);
        }
    }
    report.push("sender_utility", policy.utilities.sender);
    report.push("platform_utility", policy.utilities.platform);
    report.push("per_type_utility", policy.utilities.per_type.clone());
}

pub fn cmd_solve_oneshot(
    instance: &std::path::Path,
    out: Option<PathBuf>,
) -> Result<Report, CliError> {
    let inst = read_instance(instance)?;
    let sol = solve_one_shot(&inst)?;
    let file = PolicyFile::from_parts(&sol.policy, &sol.sender, &sol.utilities);
    let mut report = Report::new();
    push_policy(&mut report, &file);
    if let Some(path) = out {
        write_json(&path, &file)?;
    }
    Ok(report)
}

pub fn cmd_segment(market: &std::path::Path, lambda: Option<f64>) -> Result<Report, CliError> {
    let market = read_market(market)?;
    let seg = match lambda {
        Some(l) => pareto_mix(&market, l)?,
        None => bbm_segmentation(&market)?,
    };
    let mut report = Report::new();
    report.push("segments", seg.len());
    for (i, s) in seg.segments().iter().enumerate() {
        let tag = format!("segment.{}", i + 1);
        report.push(format!("{tag}.weight"), s.weight);
        report.push(format!("{tag}.masses"), s.masses.clone());
        report.push(format!("{tag}.price"), seg.price_value(i));
    }
    let w = surpluses(&seg);
    report.push("consumer_surplus", w.consumer);
    report.push("producer_surplus", w.producer);
    report.push("total_surplus", w.total);
    let tri = surplus_triangle(&market);
    report.push("triangle.a", tri.a.to_vec());
    report.push("triangle.b", tri.b.to_vec());
    report.push("triangle.c", tri.c.to_vec());
    Ok(report)
}

pub fn cmd_solve_repeated(
    instance: &std::path::Path,
    grid: usize,
    restarts: usize,
    out: Option<PathBuf>,
) -> Result<Report, CliError> {
    let inst = read_instance(instance)?;
    let cfg = SolverConfig {
        grid_points_per_axis: grid,
        restarts,
        ..SolverConfig::default()
    };
    let res = solve_repeated(&inst, &cfg)?;
    let utilities = policy_utilities(&inst, res.policy.policy(), &res.sender)?;
    let file = PolicyFile::from_parts(res.policy.policy(), &res.sender, &utilities);

    let mut report = Report::new();
    report.push("alpha_truthful", res.policy.alpha());
    if let Some(x_t) = res.policy.truthful_posterior() {
        report.push("truthful_posterior", x_t.weights());
    }
    push_policy(&mut report, &file);
    report.push("sender_value", res.sender_value);
    report.push("platform_value", res.platform_value);
    for (k, slack) in res.ic_certificate.slacks.iter().enumerate() {
        match slack {
            Some(s) => report.push(format!("ic_slack.{}", k + 1), *s),
            None => report.push(format!("ic_slack.{}", k + 1), "skipped (zero tail)"),
        }
    }
    report.push("ic_compatible", res.ic_certificate.compatible);
    report.push("fallback_used", res.fallback_used);
    report.push("grid_points", res.grid_points);
    report.push("evaluations", res.evaluations);
    if let Some(path) = out {
        write_json(&path, &file)?;
    }
    Ok(report)
}

/// Expected per-period utilities while the reputation is high, with the
/// truthful segment's lie set by `mode`.
fn high_state_utilities(
    inst: &PersuasionInstance,
    policy: &crate::repeated::RepeatedPolicy,
    sender: &crate::model::SenderPolicy,
    mode: SenderMode,
) -> (f64, f64) {
    let base = policy.policy();
    let (mut s, mut u) = (0.0, 0.0);
    for (i, seg) in base.segments().iter().enumerate() {
        let p = match (base.is_truthful(i), mode) {
            (false, _) => sender.lie(i),
            (true, SenderMode::Truthful) => 0.0,
            (true, SenderMode::DeviateAt(k)) => inst.threshold(k),
        };
        let r = platform_utility(inst, &seg.posterior, p);
        s += seg.weight * r.sender;
        u += seg.weight * r.platform;
    }
    (s, u)
}

pub fn cmd_simulate(
    instance: &std::path::Path,
    policy_path: &std::path::Path,
    periods: u64,
    seed: u64,
    deviate: Option<usize>,
    trajectory: Option<PathBuf>,
) -> Result<Report, CliError> {
    let inst = read_instance(instance)?;
    let file: PolicyFile = read_json(policy_path)?;
    let (policy, sender) = file.to_policies(&inst)?;
    let mode = match deviate {
        None => SenderMode::Truthful,
        Some(k) if (1..=inst.n()).contains(&k) => SenderMode::DeviateAt(k - 1),
        Some(k) => {
            return Err(Error::InconsistentPolicy(format!(
                "deviation type {k} is outside 1..={}",
                inst.n()
            ))
            .into())
        }
    };
    let cfg = SimConfig {
        periods,
        seed,
        mode,
        record_trajectory: trajectory.is_some(),
    };
    let sim = simulate(&inst, &policy, &sender, &cfg)?;
    let (theory_sender, theory_user) = high_state_utilities(&inst, &policy, &sender, mode);

    let mut report = Report::new();
    report.push(
        "mode",
        match mode {
            SenderMode::Truthful => "truthful".to_string(),
            SenderMode::DeviateAt(k) => format!("deviate at type {}", k + 1),
        },
    );
    report.push("periods", periods);
    report.push("seed", seed);
    report.push("empirical_high_sender_utility", sim.high_sender_utility);
    report.push("theoretical_high_sender_utility", theory_sender);
    report.push("empirical_high_user_utility", sim.high_user_utility);
    report.push("theoretical_high_user_utility", theory_user);
    report.push("empirical_avg_user_utility", sim.avg_user_utility);
    report.push("avg_user_utility_std_error", sim.user_utility_std_error);
    report.push("discounted_sender_utility", sim.discounted_sender_utility);
    report.push("theoretical_sender_value", sender_value(&inst, &policy));
    report.push("discount_tail_bound", sim.tail_bound);
    report.push("high_periods", sim.high_periods);
    if let Some(t) = sim.punishment_period {
        report.push("punishment_period", t);
    }
    if let SenderMode::DeviateAt(k) = mode {
        let x_t = policy.truthful_posterior().expect("deviation checked by simulate");
        let theory = policy.alpha() * (1.0 - inst.mu()) * x_t.tail_mass(k) * inst.threshold(k);
        let est = punishment_hazard(
            &inst,
            &policy,
            &sender,
            mode,
            HAZARD_REPLICATIONS,
            periods,
            seed,
        )?;
        report.push("hazard_replications", HAZARD_REPLICATIONS);
        report.push("empirical_hazard", est.hazard);
        report.push("hazard_std_error", est.std_error);
        report.push("theoretical_hazard", theory);
    }
    if let (Some(path), Some(log)) = (trajectory, sim.trajectory.as_deref()) {
        let io = |source| CliError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io)?);
        write_trajectory(&mut out, log).map_err(io)?;
        out.flush().map_err(io)?;
    }
    Ok(report)
}
