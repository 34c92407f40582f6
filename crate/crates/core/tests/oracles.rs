use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ruinwalk_core::dists::TailModel;
use ruinwalk_core::exceed::{decomposition_stats, StopRule};
use ruinwalk_core::mc::{
    big_jump_sampler, conditional_sample_crude, estimate_ruin_prob, exponential_walk_ruin,
    RunConfig, Sequential,
};
use ruinwalk_core::models::{
    BgRegime, BjorkGrandell, CompoundCycle, Granularity, ModelKind, Modulator, Phi, ProcessModel,
    RateConstruction, StepLaw,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pareto_walk() -> ProcessModel {
    ProcessModel::iid_walk(StepLaw::shifted(
        TailModel::pareto(2.5, 1.0).unwrap(),
        5.0 / 3.0,
    ))
    .unwrap()
}

fn bg_iii() -> BjorkGrandell {
    BjorkGrandell {
        intensity: TailModel::exponential(1.0).unwrap(),
        claim: TailModel::exponential(1.0).unwrap(),
        length_low: TailModel::exponential(1.0).unwrap(),
        length_high: TailModel::pareto(2.5, 1.0).unwrap(),
        lambda0: Some(1.5),
        regime: BgRegime::HeavyLength,
    }
}

/// Mean and standard error of ξ over n cycles.
fn xi_stats(m: &ProcessModel, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let xs: Vec<f64> = (0..n).map(|_| m.generate_cycle(&mut r).xi()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[test]
fn sampler_matches_tail_on_grid() {
    let n = 1_000_000;
    for (model, grid) in [
        (
            TailModel::pareto(2.0, 1.0).unwrap(),
            [0.1, 0.5, 1.0, 3.0, 10.0],
        ),
        (
            TailModel::lognormal(0.0, 1.0).unwrap(),
            [0.2, 0.5, 1.0, 3.0, 8.0],
        ),
        (
            TailModel::weibull_heavy(0.5, 1.0).unwrap(),
            [0.1, 0.5, 1.0, 4.0, 12.0],
        ),
        (
            TailModel::discrete_power(2.0, 10_000).unwrap(),
            [0.0, 1.0, 2.0, 5.0, 20.0],
        ),
    ] {
        let mut r = rng(11);
        let xs: Vec<f64> = (0..n).map(|_| model.sample(&mut r)).collect();
        for x in grid {
            let p = model.tail(x);
            let emp = xs.iter().filter(|&&v| v > x).count() as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() <= 4.0 * sd, "{model} at {x}: {emp} vs {p}");
        }
    }
}

#[test]
fn pareto_draw_examples() {
    let n = 1_000_000;
    let mut r = rng(1);
    let p = TailModel::pareto(2.0, 1.0).unwrap();
    let emp = (0..n).filter(|_| p.sample(&mut r) > 1.0).count() as f64 / n as f64;
    assert!((emp - 0.25).abs() < 0.002);
    let e = TailModel::exponential(1.0).unwrap();
    let mean = (0..n).map(|_| e.sample(&mut r)).sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.005);
    let c: Vec<f64> = (0..200_000)
        .map(|_| p.conditional_tail_sample(9.0, &mut r).unwrap())
        .collect();
    let frac = c.iter().filter(|&&v| v > 19.0).count() as f64 / c.len() as f64;
    let sd = (0.25f64 * 0.75 / c.len() as f64).sqrt();
    assert!((frac - 0.25).abs() < 4.0 * sd, "{frac}");
}

#[test]
fn cycle_means_match_closed_forms() {
    let pareto = TailModel::pareto(2.5, 1.0).unwrap();
    let rc = RateConstruction {
        law: TailModel::discrete_power(3.0, 100_000).unwrap(),
        phi: Phi::Power { beta: 2.0 },
        down: None,
    };
    let models = [
        pareto_walk(),
        ProcessModel::new(ModelKind::Regenerative(CompoundCycle {
            length: TailModel::exponential(1.0).unwrap(),
            jump_rate: 1.0,
            jump: pareto,
            drift: 2.0,
        }))
        .unwrap(),
        ProcessModel::new(ModelKind::FluidTwoStage {
            a1: 3.0,
            up: TailModel::weibull_heavy(0.5, 1.0).unwrap(),
        })
        .unwrap(),
        ProcessModel::new(ModelKind::BjorkGrandell(bg_iii())).unwrap(),
        ProcessModel::new(ModelKind::RateConstruction(rc)).unwrap(),
    ];
    for (i, m) in models.iter().enumerate() {
        let (mean, se) = xi_stats(m, 1_000_000, 100 + i as u64);
        let want = -m.theoretical_params().a;
        assert!(
            (mean - want).abs() < 5.0 * se,
            "model {i}: {mean} vs {want} (se {se})"
        );
    }
}

#[test]
fn bjork_grandell_wald_identity() {
    let bg = bg_iii();
    let m = ProcessModel::new(ModelKind::BjorkGrandell(bg)).unwrap();
    let (mean, se) = xi_stats(&m, 1_000_000, 7);
    let wald = bg.claim.mean() * bg.mean_lambda_length().unwrap() - bg.mean_length();
    assert!((mean - wald).abs() < 5.0 * se, "{mean} vs {wald}");
}

#[test]
fn rate_construction_drift() {
    let law = TailModel::discrete_power(3.0, 100_000).unwrap();
    let rc = RateConstruction {
        law,
        phi: Phi::Power { beta: 2.0 },
        down: None,
    };
    let m = ProcessModel::new(ModelKind::RateConstruction(rc)).unwrap();
    let want = law.mean() - rc.down_step() * law.cdf(0.0);
    let (mean, se) = xi_stats(&m, 1_000_000, 9);
    assert!(mean < 0.0);
    assert!((mean - want).abs() < 5.0 * se);
}

#[test]
fn single_state_modulation_is_an_iid_walk() {
    let step = StepLaw::shifted(TailModel::pareto(2.5, 1.0).unwrap(), 5.0 / 3.0);
    let walk = ProcessModel::iid_walk(step.clone()).unwrap();
    let modulated = ProcessModel::new(ModelKind::ModulatedWalk(Modulator {
        transition: vec![vec![1.0]],
        state_laws: vec![step],
        regen_state: 0,
        reference: TailModel::pareto(2.5, 1.0).unwrap(),
        unit: Granularity::Step,
    }))
    .unwrap();
    let (pa, pb) = (walk.theoretical_params(), modulated.theoretical_params());
    assert!((pa.a - pb.a).abs() < 1e-12 && (pa.b_const - pb.b_const).abs() < 1e-9);
    let (mut ra, mut rb) = (rng(4), rng(4));
    for _ in 0..10_000 {
        assert_eq!(
            walk.generate_cycle(&mut ra).xi(),
            modulated.generate_cycle(&mut rb).xi()
        );
    }
    let cfg = RunConfig::new(2_000, 5);
    let ea = estimate_ruin_prob(&walk, 10.0, &cfg, &Sequential).unwrap();
    let eb = estimate_ruin_prob(&modulated, 10.0, &cfg, &Sequential).unwrap();
    assert_eq!(ea.n_hits, eb.n_hits);
}

#[test]
fn modulated_step_examples() {
    let pareto = TailModel::pareto(2.0, 1.0).unwrap();
    let m = ProcessModel::new(ModelKind::ModulatedWalk(Modulator {
        transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        state_laws: vec![
            StepLaw::shifted(TailModel::deterministic(0.0).unwrap(), 1.0),
            StepLaw::shifted(pareto, 3.0),
        ],
        regen_state: 0,
        reference: pareto,
        unit: Granularity::Step,
    }))
    .unwrap();
    let mut r = rng(3);
    let mut y = 0;
    for k in 0..10 {
        assert_eq!(y, k % 2);
        let (xi, next) = m.modulated_step(y, &mut r).unwrap();
        if y == 0 {
            assert_eq!(xi, -1.0);
        }
        y = next;
    }
    let n = 1_000_000;
    let mean = (0..n)
        .map(|_| m.modulated_step(1, &mut r).unwrap().0)
        .sum::<f64>()
        / n as f64;
    // infinite-variance increments: the band is wider than a CLT band
    assert!((mean + 2.0).abs() < 0.01, "{mean}");
    assert!((m.theoretical_params().a - 1.5).abs() < 1e-12);
    assert!(m.modulated_step(5, &mut r).is_err());
}

#[test]
fn control_model_ci_coverage() {
    let (rate, c, x) = (1.0, 1.5, 4.0);
    let exact = exponential_walk_ruin(rate, c, x).unwrap();
    let m =
        ProcessModel::iid_walk(StepLaw::shifted(TailModel::exponential(rate).unwrap(), c)).unwrap();
    let mut covered = 0;
    for rep in 0..100 {
        let mut cfg = RunConfig::new(4_000, 1000 + rep);
        cfg.stop = StopRule::new(8.0, 1_000_000).unwrap();
        let r = estimate_ruin_prob(&m, x, &cfg, &Sequential).unwrap();
        if r.ci95[0] <= exact && exact <= r.ci95[1] {
            covered += 1;
        }
    }
    assert!(covered >= 90, "coverage {covered}/100");
}

#[test]
fn replicate_variance_and_independence() {
    let m = pareto_walk();
    let x = 5.0;
    let small = estimate_ruin_prob(&m, x, &RunConfig::new(50_000, 21), &Sequential).unwrap();
    let big = estimate_ruin_prob(&m, x, &RunConfig::new(100_000, 21), &Sequential).unwrap();
    let ratio = small.stderr.powi(2) / big.stderr.powi(2);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    let other = estimate_ruin_prob(&m, x, &RunConfig::new(50_000, 22), &Sequential).unwrap();
    let z = (small.p_hat - other.p_hat) / (small.stderr.powi(2) + other.stderr.powi(2)).sqrt();
    assert!(z.abs() < 4.0, "{z}");
}

#[test]
fn crude_hit_fraction_matches_estimate() {
    let m = pareto_walk();
    let cfg = RunConfig::new(40_000, 8);
    let est = estimate_ruin_prob(&m, 8.0, &cfg, &Sequential).unwrap();
    let s = conditional_sample_crude(&m, 8.0, &cfg, usize::MAX, &Sequential).unwrap();
    assert!(s.records.iter().all(|r| r.weight == 1.0));
    assert_eq!(s.records.len() as u64, est.n_hits);
    assert!(est.ci95[0] <= s.p_hat && s.p_hat <= est.ci95[1]);
}

#[test]
fn decomposition_examples() {
    // unit steps: T_pre / (τ̂ − 1) = 1
    let s = conditional_sample_crude(
        &pareto_walk(),
        5.0,
        &RunConfig::new(20_000, 2),
        500,
        &Sequential,
    )
    .unwrap();
    for r in &s.records {
        if let Some(l) = decomposition_stats(r, 5.0).unwrap().mean_length {
            assert_eq!(l, 1.0);
        }
    }
    // exponential cycle lengths with mean 2
    let m = ProcessModel::new(ModelKind::Regenerative(CompoundCycle {
        length: TailModel::exponential(0.5).unwrap(),
        jump_rate: 1.0,
        jump: TailModel::pareto(2.5, 1.0).unwrap(),
        drift: 1.5,
    }))
    .unwrap();
    // the pre-jump cycles are length-biased at small x; by x = 300 the bias is below 1%
    let x = 300.0;
    let s = big_jump_sampler(&m, x, &RunConfig::new(400_000, 6), 3000, &Sequential).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for r in &s.records {
        let n = r.tau_hat_rw.unwrap();
        if n > 1 {
            num += r.weight * r.t_pre;
            den += r.weight * (n - 1) as f64;
        }
    }
    assert!((num / den - 2.0).abs() < 0.06, "{}", num / den);
}

#[test]
fn fluid_hits_in_final_up_slope() {
    let a1 = 3.0;
    let m = ProcessModel::new(ModelKind::FluidTwoStage {
        a1,
        up: TailModel::weibull_heavy(0.5, 1.0).unwrap(),
    })
    .unwrap();
    let x = 5.0;
    let s = conditional_sample_crude(&m, x, &RunConfig::new(50_000, 12), 300, &Sequential).unwrap();
    assert!(!s.records.is_empty());
    for r in &s.records {
        // from Z_before the path drops by a1, then climbs at slope 1
        let want = a1 + (x - r.z_before + a1);
        assert!((r.t_in_cycle - want).abs() < 1e-9);
        assert!(r.overshoot.abs() < 1e-9);
    }
}
