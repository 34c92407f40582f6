use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ruinwalk_core::dists::{LimitLawG, TailModel};
use ruinwalk_core::exceed::{run_path, HitStatus, StopRule};
use ruinwalk_core::limits::{EmpiricalDistribution, LimitLaw};
use ruinwalk_core::mc::{estimate_ruin_prob, RunConfig, Sequential};
use ruinwalk_core::models::{
    BgRegime, BjorkGrandell, CompoundCycle, ModelKind, Phi, ProcessModel, RateConstruction, StepLaw,
};

fn heavy_model() -> impl Strategy<Value = TailModel> {
    prop_oneof![
        (1.05f64..6.0, 0.1f64..10.0).prop_map(|(a, s)| TailModel::pareto(a, s).unwrap()),
        (-2.0f64..2.0, 0.2f64..2.5).prop_map(|(m, s)| TailModel::lognormal(m, s).unwrap()),
        (0.1f64..0.95, 0.1f64..10.0).prop_map(|(b, s)| TailModel::weibull_heavy(b, s).unwrap()),
        (1.1f64..5.0, 50u64..5000).prop_map(|(a, c)| TailModel::discrete_power(a, c).unwrap()),
    ]
}

fn any_model() -> impl Strategy<Value = TailModel> {
    prop_oneof![
        heavy_model(),
        (0.1f64..5.0).prop_map(|r| TailModel::exponential(r).unwrap()),
        (0.5f64..5.0, 0.2f64..4.0).prop_map(|(k, r)| TailModel::gamma(k, r).unwrap()),
    ]
}

fn process() -> impl Strategy<Value = ProcessModel> {
    let pareto = TailModel::pareto(2.5, 1.0).unwrap();
    prop_oneof![
        (1.8f64..4.0)
            .prop_map(move |c| ProcessModel::iid_walk(StepLaw::shifted(pareto, c)).unwrap()),
        (0.5f64..2.0).prop_map(move |l| {
            ProcessModel::new(ModelKind::Regenerative(CompoundCycle {
                length: TailModel::exponential(1.0).unwrap(),
                jump_rate: l,
                jump: pareto,
                drift: 2.0 * l,
            }))
            .unwrap()
        }),
        (2.5f64..6.0).prop_map(|a1| {
            ProcessModel::new(ModelKind::FluidTwoStage {
                a1,
                up: TailModel::weibull_heavy(0.5, 1.0).unwrap(),
            })
            .unwrap()
        }),
        Just(
            ProcessModel::new(ModelKind::BjorkGrandell(BjorkGrandell {
                intensity: TailModel::exponential(1.0).unwrap(),
                claim: TailModel::exponential(1.0).unwrap(),
                length_low: TailModel::exponential(1.0).unwrap(),
                length_high: TailModel::pareto(2.5, 1.0).unwrap(),
                lambda0: Some(1.5),
                regime: BgRegime::HeavyLength,
            }))
            .unwrap()
        ),
        Just(
            ProcessModel::new(ModelKind::RateConstruction(RateConstruction {
                law: TailModel::discrete_power(3.0, 10_000).unwrap(),
                phi: Phi::Power { beta: 2.0 },
                down: None,
            }))
            .unwrap()
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_is_a_nonincreasing_probability(m in any_model(), x in 0.0f64..1e3, dx in 0.0f64..1e3) {
        let (t0, t1) = (m.tail(x), m.tail(x + dx));
        prop_assert!((0.0..=1.0).contains(&t0));
        prop_assert!(t1 <= t0 + 1e-15);
        prop_assert!(m.tail(0.0) <= 1.0);
        prop_assert!((m.cdf(x) + t0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrated_tail_is_nonincreasing(m in heavy_model(), x in 0.0f64..500.0, dx in 0.01f64..500.0) {
        let (i0, i1) = (m.integrated_tail(x).unwrap(), m.integrated_tail(x + dx).unwrap());
        prop_assert!(i1 >= 0.0);
        prop_assert!(i1 <= i0 * (1.0 + 1e-9) + 1e-300);
        prop_assert!(i0 <= 1.0);
    }

    #[test]
    fn conditional_draws_exceed_threshold(m in heavy_model(), q in 0.01f64..0.99, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = m.upper_quantile_log(q.ln() * 20.0);
        if m.tail(u) > 0.0 {
            for _ in 0..20 {
                prop_assert!(m.conditional_tail_sample(u, &mut rng).unwrap() > u);
            }
        }
    }

    #[test]
    fn cycle_invariants(model in process(), seed in any::<u64>(), l1 in 0.0f64..20.0, dl in 0.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let c = model.generate_cycle(&mut rng);
            prop_assert!(c.xi_star() >= c.xi() - 1e-12);
            prop_assert!(c.xi_star() >= 0.0);
            let (f1, f2) = (c.first_passage(l1), c.first_passage(l1 + dl));
            prop_assert!(f1 <= f2);
            prop_assert!(f2 <= c.length());
            prop_assert_eq!(c.crossing(l1).is_some(), c.xi_star() > l1);
            if c.xi_star() > l1 {
                prop_assert!(f1 < c.length() || c.xi() > l1);
            }
        }
    }

    #[test]
    fn record_invariants(model in process(), seed in any::<u64>(), x in 0.5f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = StopRule::new(4.0, 100_000).unwrap();
        for _ in 0..10 {
            let r = run_path(&model, x, &rule, &mut rng).unwrap();
            prop_assert!(r.weight > 0.0);
            match r.status {
                HitStatus::Hit => {
                    let tau = r.tau.unwrap();
                    let th = r.tau_hat_rw.unwrap();
                    prop_assert_eq!(tau, r.t_pre + r.t_in_cycle);
                    prop_assert!(r.overshoot >= 0.0);
                    prop_assert!(r.z_before <= x);
                    prop_assert!(th >= 1);
                    if let Some(t) = r.tau_rw {
                        prop_assert!(t >= th);
                    }
                }
                _ => {
                    prop_assert!(r.tau.is_none() && r.tau_rw.is_none());
                    prop_assert!(r.steps_run >= 1);
                }
            }
        }
    }

    #[test]
    fn empirical_cdf_is_a_distribution(vals in prop::collection::vec(-1e3f64..1e3, 1..200), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = vals.iter().map(|_| rand::Rng::random_range(&mut rng, 0.01..10.0)).collect();
        let e = EmpiricalDistribution::new(&vals, Some(&w)).unwrap();
        let mut prev = 0.0;
        for &v in e.values() {
            let f = e.cdf(v);
            prop_assert!(f >= prev);
            prev = f;
        }
        prop_assert!((prev - 1.0).abs() < 1e-12);
        prop_assert_eq!(e.cdf(-2e3), 0.0);
    }

    #[test]
    fn limit_law_cdfs_are_monotone(exp in 0.2f64..5.0, scale in 0.1f64..10.0, t in 0.0f64..50.0, dt in 0.0f64..50.0) {
        for law in [
            LimitLaw::G { g: LimitLawG::ParetoTail { exponent: exp } },
            LimitLaw::ScaledG { scale, g: LimitLawG::StdExp },
        ] {
            let (a, b) = (law.cdf(t).unwrap(), law.cdf(t + dt).unwrap());
            prop_assert!((0.0..=1.0).contains(&a) && b >= a);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn estimates_are_deterministic(seed in any::<u64>()) {
        let m = ProcessModel::iid_walk(StepLaw::shifted(TailModel::pareto(2.5, 1.0).unwrap(), 5.0 / 3.0)).unwrap();
        let cfg = RunConfig::new(500, seed);
        let a = estimate_ruin_prob(&m, 5.0, &cfg, &Sequential).unwrap();
        let b = estimate_ruin_prob(&m, 5.0, &cfg, &Sequential).unwrap();
        prop_assert_eq!(a, b);
    }
}
