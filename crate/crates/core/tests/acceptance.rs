//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use persuasion::model::{
    improve_counting, is_lowest_type_targeting, platform_utility, policy_utilities,
    PersuasionInstance, PlatformPolicy, Posterior, SenderPolicy,
};
use persuasion::oracle::{analytic_v_star, grid_repeated_search, grid_segmentation_search, GridSpec};
use persuasion::reduction::{solve_one_shot, to_market};
use persuasion::repeated::{
    closed_form_report, deviation_value, ic_rhs, is_incentive_compatible, sender_value,
    solve_repeated, RepeatedPolicy, SolverConfig,
};
use persuasion::segmentation::{bbm_segmentation, surpluses};
use persuasion::simulate::{punishment_hazard, simulate, Reputation, SenderMode, SimConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<String, String> {
    let took = start.elapsed();
    ensure(took <= limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(format!("{took:.2?}"))
}

fn greedy(inst: &PersuasionInstance, policy: &PlatformPolicy) -> (f64, f64) {
    let u = policy_utilities(inst, policy, &SenderPolicy::greedy(inst, policy)).unwrap();
    (u.sender, u.platform)
}

/// Revenue-maximizing price index of a mass vector, lowest among ties.
fn monopoly(values: &[f64], masses: &[f64]) -> (usize, f64) {
    let revenues: Vec<f64> = (0..values.len())
        .map(|k| values[k] * masses[k..].iter().sum::<f64>())
        .collect();
    let best = revenues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (revenues.iter().position(|r| *r >= best - 1e-12).unwrap(), best)
}

fn persuasion_equals_market() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut checks = 0;
    for _ in 0..1000 {
        let inst = random_instance(&mut r, 2, 4);
        let values = to_market(&inst).market().values().to_vec();
        let x = Posterior::new(random_simplex(&mut r, inst.n(), 0.3)).unwrap();
        let mut lies = inst.thresholds().to_vec();
        lies.push(0.0);
        for p in lies {
            let price = inst.mu() + (1.0 - inst.mu()) * p;
            let buys: Vec<bool> = values.iter().map(|v| price <= v + 1e-12).collect();
            let producer: f64 = (0..inst.n()).filter(|&j| buys[j]).map(|j| x.weights()[j] * price).sum();
            let u = platform_utility(&inst, &x, p);
            ensure((u.sender - producer).abs() <= 1e-12, || format!("sender {} vs {producer}", u.sender))?;
            for j in 0..inst.n() {
                let consumer = if buys[j] { values[j] - price } else { 0.0 };
                ensure((u.per_type[j] - consumer).abs() <= 1e-12, || {
                    format!("type {j}: {} vs {consumer}", u.per_type[j])
                })?;
            }
            checks += 1;
        }
    }
    let t = within_time(start, Duration::from_secs(5))?;
    Ok(format!("{checks} (x, p) pairs in {t}"))
}

fn segmentation_pinning() -> Outcome {
    let mut r = rng(202);
    for _ in 0..1000 {
        let n = r.random_range(1..=6);
        let market = random_market(&mut r, n);
        let seg = bbm_segmentation(&market).unwrap();
        let w = surpluses(&seg);
        let (_, revenue) = monopoly(market.values(), market.masses());
        ensure((w.producer - revenue).abs() <= 1e-9, || format!("producer {} vs {revenue}", w.producer))?;
        ensure((w.consumer + w.producer - market.total_value()).abs() <= 1e-9, || "inefficient".into())?;
        ensure(seg.len() <= n, || format!("{} segments for {n} values", seg.len()))?;
        for s in seg.segments() {
            let (_, best) = monopoly(market.values(), &s.masses);
            let charged = market.values()[s.price] * s.masses[s.price..].iter().sum::<f64>();
            ensure(charged >= best - 1e-12, || format!("price {} not optimal", s.price))?;
        }
    }
    Ok("1000 markets".into())
}

fn segmentation_vs_grid() -> Outcome {
    let start = Instant::now();
    let spec = GridSpec::new(50, 2).unwrap();
    let mut r = rng(303);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = r.random_range(1..=3);
        let market = random_market(&mut r, n);
        let best = surpluses(&bbm_segmentation(&market).unwrap()).consumer;
        let found = grid_segmentation_search(&market, &spec);
        worst = worst.max(found - best);
        ensure(found <= best + 1e-3, || format!("grid {found} beats {best}"))?;
    }
    let t = within_time(start, Duration::from_secs(120))?;
    Ok(format!("max excess {worst:.2e} in {t}"))
}

fn instance_a_one_shot() -> Outcome {
    let u = solve_one_shot(&instance_a()).unwrap().utilities;
    ensure((u.platform - 0.12).abs() <= 1e-9 && (u.sender - 0.72).abs() <= 1e-9, || {
        format!("({}, {})", u.platform, u.sender)
    })?;
    Ok(format!("(U_P, U_S) = ({}, {})", u.platform, u.sender))
}

fn incentive_consistency() -> Outcome {
    let mut r = rng(505);
    let mut compatible = 0;
    for _ in 0..1000 {
        let inst = random_repeated_instance(&mut r, 2, 4);
        let params = inst.repeated().unwrap();
        let k = r.random_range(1..=4);
        let policy = random_repeated_policy(&mut r, &inst, k);
        let cert = is_incentive_compatible(&inst, &policy, params);
        let worst = (0..inst.n())
            .filter_map(|k| deviation_value(&inst, &policy, params, k).ok())
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(cert.compatible == (worst <= 1e-12), || format!("{cert:?} vs gain {worst}"))?;
        compatible += usize::from(cert.compatible);
        let x_t = policy.truthful_posterior().unwrap();
        let first = ic_rhs(&inst, params, x_t, 0).unwrap();
        for k in 1..inst.n() {
            if let Ok(rhs) = ic_rhs(&inst, params, x_t, k) {
                ensure(rhs <= first + 1e-12, || format!("rhs {k} = {rhs} above {first}"))?;
            }
        }
    }
    Ok(format!("1000 policies, {compatible} compatible"))
}

fn closed_form_identities() -> Outcome {
    let mut r = rng(606);
    for _ in 0..1000 {
        let inst = random_instance(&mut r, 2, 4);
        let k = r.random_range(1..=4);
        let raw = random_repeated_policy(&mut r, &inst, k);
        let policy = RepeatedPolicy::new(improve_counting(&inst, raw.policy()).policy);
        let base = policy.policy();
        ensure(is_lowest_type_targeting(&inst, base), || "improved policy not lowest-targeting".into())?;
        let closed = closed_form_report(&inst, &policy).unwrap();
        let lies = SenderPolicy::greedy(&inst, base);
        let rest = 1.0 - policy.alpha();
        let (mut s_rest, mut p_rest) = (0.0, 0.0);
        for (i, seg) in base.segments().iter().enumerate() {
            if !base.is_truthful(i) {
                let u = platform_utility(&inst, &seg.posterior, lies.lie(i));
                s_rest += seg.weight * u.sender;
                p_rest += seg.weight * u.platform;
            }
        }
        if let (Some(s), Some(p)) = (closed.sender_rest, closed.platform_rest) {
            ensure((s - s_rest / rest).abs() <= 1e-12, || format!("sender rest {s}"))?;
            ensure((p - p_rest / rest).abs() <= 1e-12, || format!("platform rest {p}"))?;
        }
        let value = sender_value(&inst, &policy);
        let platform = policy_utilities(&inst, base, &SenderPolicy::truthful(&inst, base)).unwrap().platform;
        ensure((closed.sender_value - value).abs() <= 1e-12, || format!("value {}", closed.sender_value))?;
        ensure((closed.platform - platform).abs() <= 1e-12, || format!("platform {}", closed.platform))?;
        ensure((platform + value - inst.total_welfare()).abs() <= 1e-12, || "welfare identity".into())?;
    }
    Ok("1000 policies".into())
}

fn improvement_monotone() -> Outcome {
    let mut r = rng(707);
    let mut tested = 0;
    let mut splits = 0;
    while tested < 500 {
        let inst = random_instance(&mut r, 2, 4);
        let k = r.random_range(1..=5);
        let policy = random_policy(&mut r, &inst, k);
        if is_lowest_type_targeting(&inst, &policy) {
            continue;
        }
        let improved = improve_counting(&inst, &policy);
        let (s0, p0) = greedy(&inst, &policy);
        let (s1, p1) = greedy(&inst, &improved.policy);
        ensure(s1 > s0, || format!("sender {s0} -> {s1}"))?;
        ensure(p1 >= p0 - 1e-12, || format!("platform {p0} -> {p1}"))?;
        for (a, b) in improved.policy.mean().iter().zip(inst.prior()) {
            ensure((a - b).abs() <= 1e-9, || "not Bayes-plausible".into())?;
        }
        ensure(is_lowest_type_targeting(&inst, &improved.policy), || "not a fixpoint".into())?;
        splits += improved.splits;
        tested += 1;
    }
    Ok(format!("500 policies, {splits} splits"))
}

fn repeated_fixtures() -> Outcome {
    let start = Instant::now();
    let spec = GridSpec::new(400, 2).unwrap();
    let mut lines = Vec::new();
    for (delta, u_bar, expected) in [(0.9, 0.3, 0.34), (0.75, 0.3, 0.20667), (0.5, 0.45, 0.12)] {
        let inst = instance_a_repeated(delta, u_bar);
        let res = solve_repeated(&inst, &SolverConfig::default()).unwrap();
        let grid = grid_repeated_search(&inst, &spec).unwrap();
        let analytic = analytic_v_star(&inst).unwrap();
        let step = spec.value_step(inst.prior());
        ensure((res.platform_value - expected).abs() <= 1e-5, || {
            format!("delta {delta}: U_P {} vs {expected}", res.platform_value)
        })?;
        ensure((res.platform_value - grid.platform_value).abs() <= 1e-3, || {
            format!("delta {delta}: solver {} vs grid {}", res.platform_value, grid.platform_value)
        })?;
        ensure((res.sender_value - analytic).abs() <= 2.0 * step, || {
            format!("delta {delta}: V {} vs analytic {analytic}", res.sender_value)
        })?;
        lines.push(format!("{:.5}", res.platform_value));
    }
    let t = within_time(start, Duration::from_secs(60))?;
    Ok(format!("U_P = {} in {t}", lines.join(", ")))
}

fn simulation_convergence() -> Outcome {
    let start = Instant::now();
    let inst = instance_a_repeated(0.9, 0.3);
    let x = Posterior::new(vec![0.2, 0.8]).unwrap();
    let policy = RepeatedPolicy::from_split(&inst, 1.0, x.clone(), x).unwrap();
    let sender = SenderPolicy::truthful(&inst, policy.policy());
    let cfg = |mode, record| SimConfig {
        periods: 1_000_000,
        seed: 2024,
        mode,
        record_trajectory: record,
    };
    let truthful = simulate(&inst, &policy, &sender, &cfg(SenderMode::Truthful, false)).unwrap();
    let se = truthful.user_utility_std_error;
    ensure(truthful.punishment_period.is_none(), || "truthful play punished".into())?;
    ensure((truthful.avg_user_utility - 0.34).abs() <= 3.0 * se, || {
        format!("user utility {} ± {se}", truthful.avg_user_utility)
    })?;

    let mode = SenderMode::DeviateAt(0);
    let hazard = punishment_hazard(&inst, &policy, &sender, mode, 100_000, 1_000_000, 2024).unwrap();
    ensure((hazard.hazard - 0.1).abs() <= 3.0 * hazard.std_error, || format!("{hazard:?}"))?;

    let deviating = simulate(&inst, &policy, &sender, &cfg(mode, true)).unwrap();
    let mut trajectories = vec![deviating.trajectory.unwrap()];
    for seed in 0..100 {
        let short = SimConfig {
            periods: 200,
            seed,
            mode,
            record_trajectory: true,
        };
        trajectories.push(simulate(&inst, &policy, &sender, &short).unwrap().trajectory.unwrap());
    }
    for log in &trajectories {
        let first_low = log.iter().position(|p| p.reputation == Reputation::Low).unwrap_or(log.len());
        ensure(log[first_low..].iter().all(|p| p.reputation == Reputation::Low), || {
            "high reputation after low".into()
        })?;
    }
    let t = within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "user {:.5} ± {se:.1e}, hazard {:.5} ± {:.1e}, {} trajectories absorbing, {t}",
        truthful.avg_user_utility,
        hazard.hazard,
        hazard.std_error,
        trajectories.len()
    ))
}

fn cli_golden() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let inst = dir.path().join("a.json");
    std::fs::write(
        &inst,
        r#"{"theta":[0.2,0.8],"prior":[0.2,0.8],"mu":0.5,"repeated":{"delta":0.9,"u_bar":0.3}}"#,
    )
    .unwrap();
    let market = dir.path().join("m.json");
    std::fs::write(&market, r#"{"values":[0.6,0.9],"masses":[0.2,0.8]}"#).unwrap();
    let policy = dir.path().join("p.json");
    let trajectory = dir.path().join("t.csv");
    let p = |path: &Path| path.to_str().unwrap().to_string();
    let run = |args: &[String]| {
        Command::new(env!("CARGO_BIN_EXE_persuasion"))
            .args(args)
            .output()
            .expect("binary runs")
    };
    let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let verify = run(&strings(&["verify", &p(&inst)]));
    ensure(verify.status.code() == Some(0), || String::from_utf8_lossy(&verify.stdout).into())?;

    let commands = [
        strings(&["solve-oneshot", &p(&inst), "--out", &p(&policy)]),
        strings(&["segment", &p(&market), "--pareto-mix", "0.5"]),
        strings(&["--json", "solve-repeated", &p(&inst), "--out", &p(&policy)]),
        strings(&["simulate", &p(&inst), "--policy", &p(&policy), "--periods", "5000", "--seed", "7", "--deviate", "1", "--trajectory", &p(&trajectory)]),
        strings(&["--json", "verify", &p(&inst), "--policy", &p(&policy)]),
    ];
    for args in &commands {
        let first = run(args);
        let files = (std::fs::read(&policy).ok(), std::fs::read(&trajectory).ok());
        let second = run(args);
        ensure(first.status.code() == Some(0), || format!("{args:?} failed"))?;
        ensure(first.stdout == second.stdout, || format!("{args:?} output differs"))?;
        let again = (std::fs::read(&policy).ok(), std::fs::read(&trajectory).ok());
        ensure(files == again, || format!("{args:?} files differ"))?;
    }
    Ok(format!("verify passed, {} commands reproducible", commands.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("persuasion utilities equal market surpluses", persuasion_equals_market),
        ("consumer-optimal segmentation pinned to the surplus triangle", segmentation_pinning),
        ("segmentation optimal against grid oracle", segmentation_vs_grid),
        ("instance A one-shot fixture", instance_a_one_shot),
        ("incentive verdicts match deviation gains", incentive_consistency),
        ("closed forms and welfare identity", closed_form_identities),
        ("lowest-type improvement is monotone", improvement_monotone),
        ("repeated solver fixtures", repeated_fixtures),
        ("simulation convergence", simulation_convergence),
        ("CLI golden and reproducibility", cli_golden),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
