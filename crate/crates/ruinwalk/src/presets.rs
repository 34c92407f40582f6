//! Bundled experiments, one per result being reproduced.

use ruinwalk_core::dists::TailModel;
use ruinwalk_core::exceed::StopRule;
use ruinwalk_core::mc::{RunConfig, Sampler};
use ruinwalk_core::models::{
    BgRegime, BjorkGrandell, CompoundCycle, Granularity, ModelKind, Modulator, Phi, ProcessModel,
    RateConstruction, StepLaw,
};

use crate::error::{Error, Result};
use crate::spec::{Check, CrossCheck, ExperimentSpec, Statistic, Verdict};

pub const PRESET_NAMES: [&str; 14] = [
    "thm11-asymptote",
    "thm12-pareto",
    "thm12-weibull",
    "thm13-regenerative",
    "thm35-quadruple",
    "thm41-modulated",
    "lem51-decomposition",
    "ex61-piecewise",
    "ex62-bg-i",
    "ex62-bg-ii",
    "ex62-bg-iii-cor71",
    "ex63-fluid",
    "thm72-bound",
    "ex73-construction",
];

const SEED: u64 = 20_240_917;

fn pareto(alpha: f64, sigma: f64) -> TailModel {
    TailModel::pareto(alpha, sigma).expect("valid preset parameters")
}

fn exp(rate: f64) -> TailModel {
    TailModel::exponential(rate).expect("valid preset parameters")
}

fn model(kind: ModelKind) -> ProcessModel {
    ProcessModel::new(kind).expect("valid preset model")
}

/// ξ = Pareto(2.5, 1) − 5/3, so a = 1.
pub fn pareto_walk() -> ProcessModel {
    model(ModelKind::IidWalk {
        step: StepLaw::shifted(pareto(2.5, 1.0), 5.0 / 3.0),
    })
}

/// Exponential(1) cycles, unit-rate Pareto(2.5, 1) jumps, drift 2.
pub fn compound_cycle() -> CompoundCycle {
    CompoundCycle {
        length: exp(1.0),
        jump_rate: 1.0,
        jump: pareto(2.5, 1.0),
        drift: 2.0,
    }
}

fn bg(
    intensity: TailModel,
    claim: TailModel,
    high: TailModel,
    lambda0: Option<f64>,
    regime: BgRegime,
) -> ProcessModel {
    model(ModelKind::BjorkGrandell(BjorkGrandell {
        intensity,
        claim,
        length_low: exp(1.0),
        length_high: high,
        lambda0,
        regime,
    }))
}

fn big_jump(n_paths: u64, barrier_mult: f64) -> RunConfig {
    RunConfig {
        n_paths,
        seed: SEED,
        stop: StopRule {
            barrier_mult,
            max_cycles: 10_000_000,
        },
        sampler: Sampler::BigJump,
        workers: 1,
    }
}

fn base(name: &str, description: &str, budget: &str, check: Check) -> ExperimentSpec {
    ExperimentSpec {
        name: name.to_string(),
        description: description.to_string(),
        budget: budget.to_string(),
        model: None,
        x_grid: Vec::new(),
        run: big_jump(2_000_000, 30.0),
        target_hits: 2000,
        check,
        expect: Verdict::Pass,
        out_dir: None,
    }
}

fn tau_limit(statistic: Statistic, ks_threshold: f64) -> Check {
    Check::TauLimit {
        statistic,
        ks_threshold,
        conditions: false,
        cross_check: None,
    }
}

/// Preset by name.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let grid5 = vec![20.0, 50.0, 100.0, 200.0, 400.0];
    let spec = match name {
        "thm11-asymptote" => ExperimentSpec {
            model: Some(pareto_walk()),
            x_grid: vec![10.0, 20.0, 40.0, 73.6],
            run: RunConfig { sampler: Sampler::Crude, ..big_jump(2_000_000, 9.0) },
            target_hits: 0,
            ..base(
                name,
                "P(M > x) against (1/a) F^I(x) for a Pareto(2.5) walk, crude Monte Carlo up to asymptote 1e-3",
                "about 2 min",
                Check::Asymptote { band: [0.75, 1.25], max_inversions: 1 },
            )
        },
        "thm12-pareto" => ExperimentSpec {
            model: Some(pareto_walk()),
            x_grid: grid5,
            ..base(
                name,
                "a tau_rw / x given M > x against G(t) = (1 + t)^-1.5, cross-checked by crude sampling at the smallest x",
                "about 10 s",
                Check::TauLimit {
                    statistic: Statistic::TauRw,
                    ks_threshold: 0.10,
                    conditions: false,
                    cross_check: Some(CrossCheck { n_paths: 2_000_000, ks_max: 0.05 }),
                },
            )
        },
        "thm12-weibull" => ExperimentSpec {
            model: Some(model(ModelKind::IidWalk {
                step: StepLaw::shifted(TailModel::weibull_heavy(0.5, 1.0).expect("valid"), 3.0),
            })),
            x_grid: vec![1000.0, 3000.0, 10000.0, 30000.0, 100000.0],
            ..base(
                name,
                "a tau_rw / e(x) given M > x against Exp(1) for a Weibull(0.5) walk, e the mean excess function",
                "about 10 s",
                tau_limit(Statistic::TauRw, 0.10),
            )
        },
        "thm13-regenerative" => ExperimentSpec {
            model: Some(model(ModelKind::Regenerative(compound_cycle()))),
            x_grid: grid5,
            ..base(
                name,
                "tau / x given M > x against the law of mu W / a for a compound regenerative process",
                "about 20 s",
                tau_limit(Statistic::Tau, 0.10),
            )
        },
        "thm35-quadruple" => ExperimentSpec {
            model: Some(pareto_walk()),
            x_grid: vec![100.0, 1000.0, 10000.0],
            target_hits: 4000,
            ..base(
                name,
                "joint law of (a tau_hat/x, Z_before/x, max deviation, overshoot/x) for the Pareto walk",
                "about 30 s",
                Check::Quadruple { grid: vec![0.25, 0.5, 1.0], joint_tol: 0.05, q3_max: 0.05, corr_min: 0.9 },
            )
        },
        "thm41-modulated" => ExperimentSpec {
            model: Some(model(ModelKind::ModulatedRegenerative(Modulator {
                transition: vec![vec![0.3, 0.7], vec![0.6, 0.4]],
                state_laws: vec![
                    compound_cycle(),
                    CompoundCycle { length: exp(2.0), jump_rate: 0.5, jump: pareto(2.5, 1.0), drift: 1.5 },
                ],
                regen_state: 0,
                reference: pareto(2.5, 1.0),
                unit: Granularity::Step,
            }))),
            x_grid: grid5,
            ..base(
                name,
                "Markov-modulated compound cycles: tau_rw = tau_hat_rw given M > x, asymptote C/a F^I(x) and tau / x limit",
                "about 30 s",
                Check::Agreement { min_fraction: 0.95, ratio_band: [0.75, 1.25], ks_threshold: Some(0.10) },
            )
        },
        "lem51-decomposition" => ExperimentSpec {
            model: Some(model(ModelKind::Regenerative(compound_cycle()))),
            x_grid: vec![100.0, 200.0, 400.0],
            ..base(
                name,
                "tau = T_pre + t_in_cycle: T_pre about mu tau_hat and t_in_cycle negligible against x",
                "about 15 s",
                Check::Decomposition { min_agree: 0.95, mean_rel_tol: 0.10, median_max: 0.10 },
            )
        },
        "ex61-piecewise" => ExperimentSpec {
            model: Some(model(ModelKind::ModulatedWalk(Modulator {
                transition: vec![vec![0.5, 0.5], vec![0.7, 0.3]],
                state_laws: vec![StepLaw::shifted(pareto(2.5, 1.0), 2.0), StepLaw::shifted(exp(1.0), 1.5)],
                regen_state: 0,
                reference: pareto(2.5, 1.0),
                unit: Granularity::Cycle,
            }))),
            x_grid: grid5,
            ..base(
                name,
                "piecewise-constant modulated walk viewed as a regenerative process: conditions and the tau / x limit",
                "about 15 s",
                Check::TauLimit { statistic: Statistic::Tau, ks_threshold: 0.10, conditions: true, cross_check: None },
            )
        },
        "ex62-bg-i" => ExperimentSpec {
            model: Some(bg(exp(2.0), pareto(2.5, 1.0), exp(1.0), None, BgRegime::HeavyClaims)),
            x_grid: grid5,
            ..base(
                name,
                "Bjork-Grandell with heavy claims: tau / x against mu W / a",
                "about 45 s",
                tau_limit(Statistic::Tau, 0.10),
            )
        },
        "ex62-bg-ii" => ExperimentSpec {
            model: Some(bg(pareto(2.5, 0.75), exp(1.0), exp(1.0), None, BgRegime::HeavyIntensity)),
            x_grid: grid5,
            ..base(
                name,
                "Bjork-Grandell with heavy intensity: tau / x against mu W / a",
                "about 60 s",
                tau_limit(Statistic::Tau, 0.10),
            )
        },
        "ex62-bg-iii-cor71" => ExperimentSpec {
            model: Some(bg(exp(2.0), exp(1.0), pareto(2.5, 1.0), Some(1.5), BgRegime::HeavyLength)),
            x_grid: vec![50.0, 100.0, 200.0, 400.0, 800.0],
            // each proposal costs about (1 + s) x / a cycles; W truncation at s = 10 stays under 3%
            run: big_jump(2_000_000, 10.0),
            ..base(
                name,
                "Bjork-Grandell with heavy cycle lengths above lambda0: P(M > x) about c1 x F(x), tau / x against both candidate limits",
                "about 60 s",
                Check::BgHeavyLength { slope_rel_tol: 0.25, ks_threshold: 0.15 },
            )
        },
        "ex63-fluid" => ExperimentSpec {
            model: Some(model(ModelKind::FluidTwoStage {
                a1: 3.0,
                up: TailModel::weibull_heavy(0.5, 1.0).expect("valid"),
            })),
            x_grid: vec![10.0, 20.0, 40.0, 80.0],
            expect: Verdict::Fail,
            ..base(
                name,
                "two-stage fluid model: the tau / e(x) limit must fail because the final up-slope lasts of order x",
                "about 10 s",
                Check::Fluid { ks_threshold: 0.10, median_floor: 0.5 },
            )
        },
        "thm72-bound" => ExperimentSpec {
            target_hits: 0,
            ..base(
                name,
                "growth bound feasibility for f_x ~ x^-(alpha+1) and phi(x) = x^beta",
                "about 1 s",
                Check::GrowthBound { alpha: 3.0, beta: 2.0, cutoff: None },
            )
        },
        "ex73-construction" => ExperimentSpec {
            model: Some(model(ModelKind::RateConstruction(RateConstruction {
                law: TailModel::discrete_power(3.0, 100_000).expect("valid"),
                phi: Phi::Power { beta: 2.0 },
                down: None,
            }))),
            x_grid: vec![10.0, 20.0, 40.0],
            ..base(
                name,
                "rate construction with phi(x) = x^2: exceedance times grow like phi(x), far beyond e(x) = x",
                "about 10 s",
                Check::Construction { min_fraction: 0.95 },
            )
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(spec)
}

/// Every bundled experiment, in catalog order.
pub fn list_presets() -> Vec<ExperimentSpec> {
    PRESET_NAMES
        .iter()
        .map(|n| preset(n).expect("bundled preset"))
        .collect()
}
