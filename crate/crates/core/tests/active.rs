mod common;

use common::{assert_rel, quad, random_stream};
use olu_core::active::{
    active_sigma, chained_shift_bound, newton_correction, phase_distance_bound, required_iters, run_active,
    run_active_second_order, ActiveConfig,
};
use olu_core::domain::{BallDomain, CostFn, CostStream, DeletionSchedule, FnClass, Matrix, QuadraticSum, Vector};
use olu_core::passive::{run_ogd, UnlearnerConfig};
use olu_core::ogd::RateSchedule;
use olu_core::rng::NoiseSource;
use olu_core::Error;
use proptest::prelude::*;

fn acfg(i1: Option<usize>, i2: Option<usize>) -> ActiveConfig {
    ActiveConfig { i1, i2, ..ActiveConfig::new(UnlearnerConfig::new(4.0, 1.0)) }
}

/// Unconstrained minimizer of the sum of the given quadratics, solved directly.
fn erm_oracle(costs: &[CostFn]) -> Vector {
    let d = costs[0].dim();
    let mut h = Matrix::zeros(d, d);
    let mut b = Vector::zeros(d);
    for f in costs {
        let q = f.as_quadratic().unwrap();
        h += q.curvature();
        b += q.curvature() * q.center();
    }
    h.lu().solve(&b).unwrap()
}

#[test]
fn required_iters_examples() {
    assert_eq!(required_iters(0.5, 1.0, 2.0, 1.0, 10, 1).unwrap(), (5, 0));
    assert_eq!(required_iters(0.5, 1.0, 2.0, 1.0, 10, 4).unwrap().1, 5);
    assert_eq!(required_iters(0.5, 1.0, 2.0, 1.0, 16, 2).unwrap().0, 5);
    assert_eq!(required_iters(0.5, 1.0, 0.1, 1.0, 1, 1).unwrap().0, 0, "negative log floors at zero");
    assert!(matches!(required_iters(1.0, 1.0, 2.0, 1.0, 10, 2), Err(Error::NotStronglyConvex(_))));
    assert!(required_iters(0.0, 1.0, 2.0, 1.0, 10, 2).is_err());
}

#[test]
fn active_sigma_examples() {
    let c = acfg(None, Some(4));
    let s1 = active_sigma(&c, 1, 10, 8, 0.125, 1.0, 1.0, 0.5).unwrap();
    assert_rel(s1, 0.0625 * 3f64.sqrt() * (6.03125 / 10.0), 1e-12);
    assert!((s1 - 0.06529).abs() < 5e-6);
    // 0.0625 * sqrt(2^1.2 * 1.2 / 0.4) * 1.203125 = 0.197410...
    let s2 = active_sigma(&c, 2, 10, 8, 0.125, 1.0, 1.0, 0.5).unwrap();
    assert_rel(s2, 0.0625 * (2f64.powf(1.2) * 1.2 / 0.4).sqrt() * 1.203125, 1e-12);
    assert!((s2 - 0.197410).abs() < 5e-6);
    let vanishing = active_sigma(&acfg(None, Some(2000)), 1, 10, 8, 0.125, 1.0, 1.0, 0.5).unwrap();
    assert!(vanishing < 1e-300);
    assert!(active_sigma(&acfg(None, None), 1, 10, 8, 0.125, 1.0, 1.0, 0.5).is_err());
    assert!(active_sigma(&c, 1, 10, 8, 0.125, 1.0, 0.0, 0.5).is_err());
}

#[test]
fn active_sigma_follows_the_inverse_tau_law() {
    let c = acfg(None, Some(0));
    let taus = [10usize, 20, 40, 80, 160, 320];
    let sig: Vec<f64> = taus.iter().map(|&t| active_sigma(&c, 3, t, 5, 0.01, 1.0, 1.0, 0.5).unwrap()).collect();
    for (w, t) in sig.windows(2).zip(taus.windows(2)) {
        assert!(w[1] < w[0]);
        assert!((w[0] * t[0] as f64 - w[1] * t[1] as f64).abs() <= 1e-3 * w[0] * t[0] as f64);
    }
}

#[test]
fn chained_shift_bound_value() {
    assert_rel(chained_shift_bound(0.5, 2, 1, 1.0, 10, 1.0), 2.0 * 2.0 * 0.25 / 10.0, 1e-15);
    assert_rel(phase_distance_bound(0.5, 1, 2, 2.0, 1, 1.0, 10, 1.0), 0.25 * (0.5 * 2.0 + 0.2), 1e-15);
}

#[test]
fn common_minimizer_is_recovered() {
    let dom = BallDomain::new(1.0).unwrap();
    let mut rng = NoiseSource::new(3);
    let c = [0.2, -0.3, 0.1];
    let costs: Vec<CostFn> = (0..30)
        .map(|_| {
            let e: Vec<f64> = (0..3).map(|_| rng.uniform_range(1.0, 3.0)).collect();
            quad(Matrix::from_diagonal(&Vector::from_vec(e)), &c, &dom)
        })
        .collect();
    let l = costs.iter().map(|f| f.class().lipschitz).fold(0.0, f64::max);
    let cls = FnClass::new(l, 3.0, 1.0).unwrap();
    let stream = CostStream::from_costs(costs).unwrap();
    let sched = DeletionSchedule::from_pairs(&[(4, 10), (12, 20)]).unwrap();
    let tr = run_active(&stream, &sched, &RateSchedule::ScDecreasing { mu: 1.0 }, &acfg(Some(200), Some(200)), &cls, &dom, 1).unwrap();
    assert_eq!(tr.phases.len(), 2);
    for ph in &tr.phases {
        assert!((&ph.post_phase - Vector::from_row_slice(&c)).norm() < 1e-6);
    }
}

#[test]
fn empty_schedule_matches_plain_ogd() {
    let dom = BallDomain::new(1.0).unwrap();
    let (stream, cls) = random_stream(7, 3, 40, 1.0, 3.0, &dom);
    let rs = RateSchedule::ScDecreasing { mu: 1.0 };
    let ogd = run_ogd(&stream, &rs, &cls, &dom).unwrap();
    let tr = run_active(&stream, &DeletionSchedule::empty(), &rs, &acfg(None, None), &cls, &dom, 5).unwrap();
    assert_eq!(tr.outputs, ogd.outputs);
    assert_eq!(tr.cost.unlearning, 0);
    let tr2 = run_active_second_order(&stream, &DeletionSchedule::empty(), &rs, &acfg(None, None), &cls, &dom, 5).unwrap();
    assert_eq!(tr2.outputs, ogd.outputs);
    assert!(tr2.experimental);
}

#[test]
fn shape_violations() {
    let dom = BallDomain::new(1.0).unwrap();
    let (stream, cls) = random_stream(7, 2, 30, 1.0, 3.0, &dom);
    let sched = DeletionSchedule::from_pairs(&[(5, 10), (3, 20)]).unwrap();
    let rs = RateSchedule::ScDecreasing { mu: 1.0 };
    let err = run_active(&stream, &sched, &rs, &acfg(None, None), &cls, &dom, 5).unwrap_err();
    assert!(matches!(err, Error::ScheduleShape(_)), "{err}");
    let lax = ActiveConfig { strict_shape: false, ..acfg(None, None) };
    let tr = run_active(&stream, &sched, &rs, &lax, &cls, &dom, 5).unwrap();
    assert!(tr.certification_refused);
    let convex = FnClass::new(cls.lipschitz, 3.0, 0.0).unwrap();
    assert!(matches!(
        run_active(&stream, &sched, &rs, &lax, &convex, &dom, 5),
        Err(Error::NotStronglyConvex(_))
    ));
}

#[test]
fn newton_correction_with_isotropic_hessian() {
    let z = Vector::from_row_slice(&[0.1, 0.2]);
    let g = Vector::from_row_slice(&[0.6, -0.9]);
    let out = newton_correction(&z, &(Matrix::identity(2, 2) * 3.0), &g).unwrap();
    assert!((out - (&z + &g / 3.0)).norm() < 1e-15);
    assert!(matches!(newton_correction(&z, &Matrix::zeros(2, 2), &g), Err(Error::Numeric(_))));
}

#[test]
fn newton_step_lands_on_the_retained_minimizer() {
    let dom = BallDomain::new(2.0).unwrap();
    let mut rng = NoiseSource::new(12);
    let costs: Vec<CostFn> = (0..15).map(|_| quad(Matrix::identity(2, 2), rng.in_ball(2, 1.0).as_slice(), &dom)).collect();
    let l = costs.iter().map(|f| f.class().lipschitz).fold(0.0, f64::max);
    let cls = FnClass::new(l, 1.0, 1.0).unwrap();
    let stream = CostStream::from_costs(costs.clone()).unwrap();
    let sched = DeletionSchedule::from_pairs(&[(6, 12)]).unwrap();
    let tr = run_active_second_order(&stream, &sched, &RateSchedule::ScDecreasing { mu: 1.0 }, &acfg(Some(200), None), &cls, &dom, 2).unwrap();
    let kept: Vec<CostFn> = (1..=12).filter(|&t| t != 6).map(|t| costs[t - 1].clone()).collect();
    let oracle = erm_oracle(&kept);
    assert!((&tr.phases[0].post_phase - oracle).norm() < 1e-8);
    assert_eq!(tr.phases[0].inner_steps, 201);
    assert!(tr.warnings.iter().any(|w| w.contains("experimental")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn each_inner_step_contracts_towards_the_average_minimizer(seed in any::<u64>(), tau in 5usize..30, i1 in 1usize..6) {
        let dom = BallDomain::new(4.0).unwrap();
        let (stream, cls) = random_stream(seed, 3, 30, 0.5, 2.0, &dom);
        let sched = DeletionSchedule::from_pairs(&[(tau, tau)]).unwrap();
        let rs = RateSchedule::ScDecreasing { mu: 0.5 };
        let tr = run_active(&stream, &sched, &rs, &acfg(Some(i1), Some(0)), &cls, &dom, seed).unwrap();
        let before = run_ogd(&stream, &rs, &cls, &dom).unwrap().output(tau).clone();
        let seen: Vec<CostFn> = (1..=tau).map(|t| stream.at(t).cost().unwrap().clone()).collect();
        let target = erm_oracle(&seen);
        prop_assume!(target.norm() < dom.radius());
        let gamma_in = cls.beta / (cls.beta + cls.mu);
        let d0 = (&before - &target).norm();
        let d1 = (&tr.phases[0].post_phase - &target).norm();
        prop_assert!(d1 <= gamma_in.powi(i1 as i32) * d0 + 1e-10);
    }

    #[test]
    fn post_phase_distance_to_retained_erm_is_bounded(seed in any::<u64>(), gap in 0usize..5, k in 1usize..4) {
        let dom = BallDomain::new(2.0).unwrap();
        let (stream, cls) = random_stream(seed, 2, 60, 1.0, 3.0, &dom);
        let pairs: Vec<(usize, usize)> = (1..=k).map(|i| (15 * i - gap, 15 * i)).collect();
        let sched = DeletionSchedule::from_pairs(&pairs).unwrap();
        let rs = RateSchedule::ScDecreasing { mu: 1.0 };
        let c = acfg(None, None);
        let tr = run_active(&stream, &sched, &rs, &c, &cls, &dom, seed).unwrap();
        let gamma_in = cls.beta / (cls.beta + cls.mu);
        for ph in &tr.phases {
            let deleted = sched.first(ph.i).indices();
            let kept: Vec<CostFn> = (1..=ph.t).filter(|t| !deleted.contains(t)).map(|t| stream.at(t).cost().unwrap().clone()).collect();
            let oracle = erm_oracle(&kept);
            prop_assume!(oracle.norm() < dom.radius());
            let b = phase_distance_bound(gamma_in, ph.i1, ph.i2, dom.diameter(), ph.i, cls.lipschitz, ph.t, cls.mu);
            let hand = gamma_in.powi(ph.i2 as i32)
                * (gamma_in.powi(ph.i1 as i32) * dom.diameter() + 2.0 * ph.i as f64 * cls.lipschitz / (ph.t as f64 * cls.mu));
            prop_assert!((b - hand).abs() <= 1e-14 * hand);
            prop_assert!((&ph.post_phase - oracle).norm() <= b + 1e-8);
        }
    }

    #[test]
    fn inner_step_counts_are_recorded(seed in any::<u64>(), k in 1usize..5) {
        let dom = BallDomain::new(1.0).unwrap();
        let (stream, cls) = random_stream(seed, 2, 80, 1.0, 3.0, &dom);
        let pairs: Vec<(usize, usize)> = (1..=k).map(|i| (15 * i - 3, 15 * i + 2)).collect();
        let sched = DeletionSchedule::from_pairs(&pairs).unwrap();
        let rs = RateSchedule::ScDecreasing { mu: 1.0 };
        let tr = run_active(&stream, &sched, &rs, &acfg(None, None), &cls, &dom, seed).unwrap();
        let gamma_in = cls.beta / (cls.beta + cls.mu);
        let mut total = 0;
        for (ph, d) in tr.phases.iter().zip(sched.entries()) {
            let (i1, i2) = required_iters(gamma_in, cls.mu, dom.diameter(), cls.lipschitz, d.time, k).unwrap();
            prop_assert_eq!((ph.i1, ph.i2, ph.inner_steps), (i1, i2, i1 + i2));
            total += ph.inner_steps;
        }
        prop_assert_eq!(tr.cost.unlearning, total);
        prop_assert_eq!(tr.cost.learning, 80);
    }

    #[test]
    fn zero_deletions_are_plain_ogd(seed in any::<u64>()) {
        let dom = BallDomain::new(1.0).unwrap();
        let (stream, cls) = random_stream(seed, 3, 25, 0.5, 2.0, &dom);
        let rs = RateSchedule::adaptive(dom.diameter(), cls.beta);
        let tr = run_active(&stream, &DeletionSchedule::empty(), &rs, &acfg(None, None), &cls, &dom, seed).unwrap();
        let ogd = run_ogd(&stream, &rs, &cls, &dom).unwrap();
        prop_assert_eq!(tr.outputs, ogd.outputs);
        prop_assert_eq!(tr.p_history, ogd.p_history);
    }
}

#[test]
fn quadratic_sum_matches_the_oracle_minimizer() {
    let dom = BallDomain::new(1.0).unwrap();
    let (stream, _) = random_stream(1, 3, 10, 1.0, 3.0, &dom);
    let costs: Vec<CostFn> = stream.items().iter().filter_map(|i| i.cost().cloned()).collect();
    let s = QuadraticSum::from_costs(&costs).unwrap();
    let x = erm_oracle(&costs);
    assert!((&s.hessian * &x - &s.linear).norm() < 1e-12);
}
