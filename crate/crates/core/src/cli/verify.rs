use std::path::Path;

use crate::cli::files::{read_instance, read_json, PolicyFile};
use crate::cli::report::Report;
use crate::cli::CliError;
use crate::model::{
    improve_counting, is_lowest_type_targeting, platform_utility, policy_utilities,
    PersuasionInstance,
};
use crate::oracle::{
    analytic_v_star, enumerate_one_shot_utilities, grid_repeated_search, grid_segmentation_search,
    GridSpec,
};
use crate::reduction::{reduction_identity_holds, solve_one_shot, to_market};
use crate::repeated::{
    closed_form_report, deviation_value, is_incentive_compatible, sender_value, solve_repeated,
    SolverConfig,
};
use crate::segmentation::{bbm_segmentation, optimal_uniform_price, revenue, surpluses};

pub(super) struct Verification {
    pub report: Report,
    pub failed: usize,
}

struct Checks {
    report: Report,
    failed: usize,
}

impl Checks {
    fn check(&mut self, name: &str, tolerance: f64, passed: bool) {
        let verdict = if passed { "PASS" } else { "FAIL" };
        let text = if tolerance == 0.0 {
            format!("{verdict} (exact)")
        } else {
            format!("{verdict} (tol {tolerance:e})")
        };
        self.report.push(name, text);
        if !passed {
            self.failed += 1;
        }
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.report.push(name, format!("SKIP ({why})"));
    }
}

/// Per-axis resolution of the repeated-game oracle grid, if affordable.
fn repeated_oracle_resolution(n: usize) -> Option<usize> {
    match n {
        1 | 2 => Some(400),
        3 => Some(60),
        _ => None,
    }
}

fn one_shot_checks(c: &mut Checks, inst: &PersuasionInstance) -> Result<f64, CliError> {
    let sol = solve_one_shot(inst)?;
    let map = to_market(inst);
    let identity = sol.policy.segments().iter().enumerate().all(|(i, s)| {
        reduction_identity_holds(inst, &map, &s.posterior, sol.sender.lie(i))
    });
    c.check("oneshot.market_identity", 1e-12, identity);

    let enumerated = sol.policy.segments().iter().enumerate().all(|(i, s)| {
        let closed = platform_utility(inst, &s.posterior, sol.sender.lie(i));
        let brute = enumerate_one_shot_utilities(inst, &s.posterior, sol.sender.lie(i));
        (closed.sender - brute.sender).abs() <= 1e-12
            && closed
                .per_type
                .iter()
                .zip(&brute.per_type)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
    });
    c.check("oneshot.enumeration_oracle", 1e-12, enumerated);

    let market = map.market();
    let seg = bbm_segmentation(market)?;
    let w = surpluses(&seg);
    let monopoly = revenue(market, optimal_uniform_price(market));
    c.check("segmentation.plausible", 1e-9, seg.check_plausible(market).is_ok());
    c.check("segmentation.producer_is_monopoly", 1e-9, (w.producer - monopoly).abs() <= 1e-9);
    c.check(
        "segmentation.efficient",
        1e-9,
        (w.consumer + w.producer - market.total_value()).abs() <= 1e-9,
    );
    c.check("segmentation.prices_optimal", 1e-12, seg.prices_optimal());
    c.check("segmentation.segment_count", 0.0, seg.len() <= inst.n());
    if inst.n() <= 3 {
        let best = grid_segmentation_search(market, &GridSpec::new(50, 2)?);
        c.check("segmentation.grid_oracle", 1e-3, best <= w.consumer + 1e-3);
    } else {
        c.skip("segmentation.grid_oracle", "more than 3 types");
    }

    let u = &sol.utilities;
    c.check("oneshot.lowest_type_targeting", 0.0, is_lowest_type_targeting(inst, &sol.policy));
    c.check(
        "oneshot.welfare_identity",
        1e-12,
        (u.platform + u.sender - inst.total_welfare()).abs() <= 1e-12,
    );
    c.check(
        "oneshot.improvement_fixpoint",
        0.0,
        improve_counting(inst, &sol.policy).splits == 0,
    );
    Ok(u.platform)
}

fn repeated_checks(
    c: &mut Checks,
    inst: &PersuasionInstance,
    one_shot_platform: f64,
) -> Result<(), CliError> {
    let Some(params) = inst.repeated() else {
        c.skip("repeated", "no repeated block");
        return Ok(());
    };
    let res = solve_repeated(inst, &SolverConfig::default())?;
    let cert = is_incentive_compatible(inst, &res.policy, params);
    c.check("repeated.incentive_compatible", 1e-12, cert.compatible);
    let deviations_agree = (0..inst.n()).all(|k| match deviation_value(inst, &res.policy, params, k) {
        Ok(gain) => gain <= 1e-12,
        Err(_) => true,
    });
    c.check("repeated.deviation_gains", 1e-12, deviations_agree == cert.compatible);
    c.check(
        "repeated.lowest_type_targeting",
        0.0,
        is_lowest_type_targeting(inst, res.policy.policy()),
    );
    let direct_value = sender_value(inst, &res.policy);
    let closed = closed_form_report(inst, &res.policy)?;
    c.check(
        "repeated.closed_forms",
        1e-12,
        (closed.sender_value - direct_value).abs() <= 1e-12
            && (closed.platform - res.platform_value).abs() <= 1e-12,
    );
    c.check(
        "repeated.welfare_identity",
        1e-12,
        (res.platform_value + direct_value - inst.total_welfare()).abs() <= 1e-12,
    );
    c.check(
        "repeated.not_worse_than_oneshot",
        1e-9,
        res.platform_value >= one_shot_platform - 1e-9,
    );
    c.check(
        "repeated.below_first_best",
        1e-9,
        res.platform_value <= inst.first_best() + 1e-9,
    );
    let analytic = analytic_v_star(inst)?;
    c.check("repeated.analytic_lower_bound", 1e-9, res.sender_value >= analytic - 1e-9);
    match repeated_oracle_resolution(inst.n()) {
        Some(r) => {
            let spec = GridSpec::new(r, 2)?;
            let grid = grid_repeated_search(inst, &spec)?;
            c.check("repeated.grid_oracle", 1e-9, res.sender_value <= grid.sender_value + 1e-9);
            let step = 2.0 * spec.value_step(inst.prior());
            c.check(
                "repeated.grid_vs_analytic",
                step,
                (grid.sender_value - analytic).abs() <= step,
            );
        }
        None => c.skip("repeated.grid_oracle", "more than 3 types"),
    }
    Ok(())
}

fn policy_checks(c: &mut Checks, inst: &PersuasionInstance, path: &Path) -> Result<(), CliError> {
    let file: PolicyFile = read_json(path)?;
    let weights_ok = file.segments.iter().all(|s| s.weight >= 0.0)
        && (file.segments.iter().map(|s| s.weight).sum::<f64>() - 1.0).abs() <= 1e-9;
    c.check("policy.weights", 1e-9, weights_ok);
    let posteriors_ok = file.segments.iter().all(|s| {
        s.posterior.len() == inst.n()
            && s.posterior.iter().all(|x| *x >= 0.0)
            && (s.posterior.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    });
    c.check("policy.posteriors", 1e-9, posteriors_ok);
    let plausible = file.plausibility_gap(inst.prior()) <= 1e-9;
    c.check("policy.bayes_plausible", 1e-9, plausible);
    let lies_ok = file.segments.iter().all(|s| (0.0..=1.0).contains(&s.lie_prob));
    c.check("policy.lie_range", 0.0, lies_ok);
    if !(weights_ok && posteriors_ok && plausible && lies_ok) {
        c.skip("policy.utilities", "policy file is inconsistent");
        return Ok(());
    }
    let (policy, sender) = file.to_policies(inst)?;
    let u = policy_utilities(inst, policy.policy(), &sender)?;
    let stated = &file.utilities;
    let utilities_ok = (u.sender - stated.sender).abs() <= 1e-9
        && (u.platform - stated.platform).abs() <= 1e-9
        && u.per_type.len() == stated.per_type.len()
        && u.per_type.iter().zip(&stated.per_type).all(|(a, b)| (a - b).abs() <= 1e-9);
    c.check("policy.utilities", 1e-9, utilities_ok);
    if let (Some(params), Some(_)) = (inst.repeated(), policy.truthful_posterior()) {
        let cert = is_incentive_compatible(inst, &policy, params);
        c.check("policy.incentive_compatible", 1e-12, cert.compatible);
    }
    Ok(())
}

pub(super) fn cmd_verify(instance: &Path, policy: Option<&Path>) -> Result<Verification, CliError> {
    let inst = read_instance(instance)?;
    let mut c = Checks {
        report: Report::new(),
        failed: 0,
    };
    let one_shot = one_shot_checks(&mut c, &inst)?;
    repeated_checks(&mut c, &inst, one_shot)?;
    if let Some(path) = policy {
        policy_checks(&mut c, &inst, path)?;
    }
    let Checks { mut report, failed } = c;
    report.push("failed", failed);
    Ok(Verification { report, failed })
}
