mod common;

use std::sync::Arc;

use common::{assert_rel, diag, quad, random_stream, v};
use olu_core::domain::{BallDomain, CostFn, CostStream, CustomLoss, DeletionSchedule, FnClass, Matrix, Quadratic, Vector};
use olu_core::ogd::RateSchedule;
use olu_core::passive::{run_ogd, run_passive, UnlearnerConfig};
use olu_core::regret::{
    bound_rhs, g_functions, implicit_bound, measure_qg, p_history_from_outputs, regret_dynamic, regret_with, solve_erm,
    table2_computation, BoundParams, ComparatorSet, Table2Row, Theorem,
};
use olu_core::rng::NoiseSource;
use olu_core::Error;
use proptest::prelude::*;

fn unit(c: &[f64], dom: &BallDomain) -> CostFn {
    quad(Matrix::identity(c.len(), c.len()), c, dom)
}

/// Sum of `f_t(z_{t-1}) − f_t(z_e*)` with the comparator for each round given explicitly.
fn brute_regret(trace: &olu_core::trace::RunTrace, stream: &CostStream, comp: impl Fn(usize) -> Vector) -> f64 {
    let mut total = 0.0;
    for t in 1..=stream.len() {
        if let Some(f) = stream.at(t).cost() {
            total += f.eval_grad(trace.played(t)).unwrap().0 - f.eval_grad(&comp(t)).unwrap().0;
        }
    }
    total
}

fn closed_form(costs: &[&CostFn]) -> Vector {
    let d = costs[0].dim();
    let (mut h, mut b) = (Matrix::zeros(d, d), Vector::zeros(d));
    for f in costs {
        let q = f.as_quadratic().unwrap();
        h += q.curvature();
        b += q.curvature() * q.center();
    }
    h.lu().solve(&b).unwrap()
}

#[test]
fn erm_examples() {
    let r2 = BallDomain::new(2.0).unwrap();
    let two = [unit(&[0.0, 0.0], &r2), unit(&[2.0, 0.0], &r2)];
    let s = solve_erm(&two, &r2, 1e-10).unwrap();
    assert!((s.z - v(&[1.0, 0.0])).norm() < 1e-10 && !s.binding);
    let one = [quad(diag(&[1.0, 4.0]), &[0.3, -0.2], &r2)];
    assert!((solve_erm(&one, &r2, 1e-10).unwrap().z - v(&[0.3, -0.2])).norm() < 1e-10);

    let r1 = BallDomain::new(1.0).unwrap();
    // The second center lies outside the ball, so its class is supplied by hand: L = 1 + 4.
    let out_of_ball = Quadratic::new(Matrix::identity(2, 2), v(&[4.0, 0.0]), 0.0).unwrap();
    let far = [unit(&[0.0, 0.0], &r1), CostFn::quadratic_with_class(out_of_ball, FnClass::new(5.0, 1.0, 1.0).unwrap()).unwrap()];
    let s = solve_erm(&far, &r1, 1e-10).unwrap();
    assert!(s.binding);
    assert!((s.z.clone() - v(&[1.0, 0.0])).norm() < 1e-9);
    // Grid oracle over the unit disc.
    let value = |z: &Vector| far.iter().map(|f| f.eval_grad(z).unwrap().0).sum::<f64>();
    let mut best = f64::INFINITY;
    for i in -200..=200 {
        for j in -200..=200 {
            let z = v(&[i as f64 / 200.0, j as f64 / 200.0]);
            if z.norm() <= 1.0 {
                best = best.min(value(&z));
            }
        }
    }
    assert!(value(&s.z) <= best + 1e-12);
}

#[test]
fn flat_aggregate_picks_the_minimum_norm_minimizer() {
    let dom = BallDomain::new(2.0).unwrap();
    let f = [quad(diag(&[1.0, 0.0]), &[0.5, 0.7], &dom)];
    let s = solve_erm(&f, &dom, 1e-10).unwrap();
    assert!(s.non_unique);
    assert!((s.z - v(&[0.5, 0.0])).norm() < 1e-9);
}

#[derive(Debug)]
struct Shifted(Vector);

impl CustomLoss for Shifted {
    fn id(&self) -> &str {
        "shifted"
    }
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn value_grad(&self, z: &Vector) -> (f64, Vector) {
        let d = z - &self.0;
        (0.5 * d.norm_squared(), d)
    }
}

#[test]
fn custom_losses_use_projected_descent() {
    let dom = BallDomain::new(1.0).unwrap();
    let cls = FnClass::new(4.0, 1.0, 1.0).unwrap();
    let fs: Vec<CostFn> = [v(&[0.2, 0.1]), v(&[0.4, -0.3])].into_iter().map(|c| CostFn::custom(Arc::new(Shifted(c)), cls)).collect();
    let s = solve_erm(&fs, &dom, 1e-10).unwrap();
    assert!((s.z - v(&[0.3, -0.1])).norm() < 1e-8);
    let out: Vec<CostFn> = [v(&[2.0, 0.0]), v(&[2.0, 0.0])].into_iter().map(|c| CostFn::custom(Arc::new(Shifted(c)), cls)).collect();
    let s = solve_erm(&out, &dom, 1e-10).unwrap();
    assert!((s.z - v(&[1.0, 0.0])).norm() < 1e-8);
    assert!(solve_erm(&[], &dom, 1e-10).is_err());
}

#[test]
fn staying_at_the_common_minimizer_has_zero_regret() {
    let dom = BallDomain::new(1.0).unwrap();
    let stream = CostStream::from_costs((0..10).map(|_| unit(&[0.0, 0.0], &dom)).collect()).unwrap();
    let cls = stream.class().unwrap();
    let tr = run_ogd(&stream, &RateSchedule::Constant { eta: 0.5 }, &cls, &dom).unwrap();
    assert_eq!(regret_dynamic(&tr, &stream, &DeletionSchedule::empty(), &dom).unwrap(), 0.0);
}

#[test]
fn two_step_regret_matches_direct_summation() {
    let dom = BallDomain::new(2.0).unwrap();
    let fs = vec![unit(&[1.0, 0.0], &dom), quad(diag(&[2.0, 1.0]), &[0.0, 1.0], &dom)];
    let stream = CostStream::from_costs(fs.clone()).unwrap();
    let cls = stream.class().unwrap();
    let tr = run_ogd(&stream, &RateSchedule::Constant { eta: 0.25 }, &cls, &dom).unwrap();
    // z0 = 0, z1 = (0.25, 0); comparator solves (I + diag(2,1)) z = (1, 1).
    let zs = v(&[1.0 / 3.0, 0.5]);
    assert!((closed_form(&[&fs[0], &fs[1]]) - &zs).norm() < 1e-15);
    let f1 = |z: &Vector| 0.5 * ((z[0] - 1.0).powi(2) + z[1].powi(2));
    let f2 = |z: &Vector| 0.5 * (2.0 * z[0].powi(2) + (z[1] - 1.0).powi(2));
    let hand = f1(&v(&[0.0, 0.0])) - f1(&zs) + f2(&v(&[0.25, 0.0])) - f2(&zs);
    assert_rel(regret_dynamic(&tr, &stream, &DeletionSchedule::empty(), &dom).unwrap(), hand, 1e-12);
}

#[test]
fn multi_epoch_regret_matches_brute_force() {
    let dom = BallDomain::new(2.0).unwrap();
    let (stream, cls) = random_stream(3, 2, 5, 0.5, 2.0, &dom);
    let sched = DeletionSchedule::from_pairs(&[(2, 3), (1, 4)]).unwrap();
    let tr = run_passive(&stream, &sched, &RateSchedule::ScDecreasing { mu: 0.5 }, &UnlearnerConfig::new(2.0, 1.0), &cls, &dom, 5).unwrap();
    let all: Vec<&CostFn> = (1..=5).map(|t| stream.at(t).cost().unwrap()).collect();
    let z0 = closed_form(&all);
    let z1 = closed_form(&[all[0], all[2], all[3], all[4]]);
    let z2 = closed_form(&[all[2], all[3], all[4]]);
    let brute = brute_regret(&tr, &stream, |t| match t {
        1..=3 => z0.clone(),
        4 => z1.clone(),
        _ => z2.clone(),
    });
    assert_rel(regret_dynamic(&tr, &stream, &sched, &dom).unwrap(), brute, 1e-12);

    let comps = ComparatorSet::full_horizon(&stream, &sched, &dom).unwrap();
    let b = regret_with(&tr, &stream, &sched, &comps).unwrap();
    assert_eq!(b.per_interval.len(), 3);
    assert_eq!(b.cumulative.len(), 5);
    let first: f64 = (1..=3).map(|t| all[t - 1].eval_grad(tr.played(t)).unwrap().0 - all[t - 1].eval_grad(&z0).unwrap().0).sum();
    assert_rel(b.per_interval[0], first, 1e-12);
    let prefix = ComparatorSet::per_prefix(&stream, &sched, &dom).unwrap();
    assert!((prefix.z_star[0].z.clone() - closed_form(&all[..3])).norm() < 1e-12);
}

#[test]
fn g_function_examples() {
    let s = DeletionSchedule::from_pairs(&[(8, 10)]).unwrap();
    assert_rel(g_functions(&s, 0.5, None).unwrap().g1, 0.009765625, 1e-12);
    let s = DeletionSchedule::from_pairs(&[(3, 9)]).unwrap();
    let g = g_functions(&s, 0.5, None).unwrap();
    assert_rel(g.g2, 1.0, 1e-12);
    assert!(g.g3.is_none());
}

#[test]
fn g3_recomputed_from_outputs_matches_the_live_history() {
    let dom = BallDomain::new(1.0).unwrap();
    let (stream, cls) = random_stream(8, 3, 60, 0.5, 2.0, &dom);
    let sched = DeletionSchedule::from_pairs(&[(5, 20), (30, 40)]).unwrap();
    let rs = RateSchedule::adaptive(dom.diameter(), cls.beta);
    let tr = run_passive(&stream, &sched, &rs, &UnlearnerConfig::new(2.0, 1.0).with_omega(1.5), &cls, &dom, 1).unwrap();
    let live = tr.p_history.clone().unwrap();
    let replay = p_history_from_outputs(&stream, &tr.initial, &tr.outputs).unwrap();
    for (a, b) in live.iter().zip(&replay) {
        assert_rel(*b, *a, 1e-12);
    }
    let g_live = g_functions(&sched, 0.5, Some((&live, cls.beta))).unwrap().g3.unwrap();
    let g_replay = g_functions(&sched, 0.5, Some((&replay, cls.beta))).unwrap().g3.unwrap();
    assert_rel(g_replay, g_live, 1e-12);
}

fn params() -> BoundParams {
    BoundParams { lipschitz: 1.0, mu: 1.0, beta: 1.0, diameter: 1.0, horizon: 100, k: 1, d: 2, eps: 1.0, ..Default::default() }
}

#[test]
fn bound_examples() {
    let p = BoundParams { g1: 0.009765625, ..params() };
    let t2 = bound_rhs(Theorem::T2, &p).unwrap();
    assert_rel(t2.total, 100f64.ln() + 2.0 + 3f64.sqrt() * 2.0 * 0.009765625, 1e-12);
    assert!((t2.total - 6.639).abs() < 5e-4);
    assert!(!t2.order_form);

    let p = BoundParams { k: 0, ..params() };
    assert_rel(bound_rhs(Theorem::T5, &p).unwrap().total, 200f64.sqrt(), 1e-12);

    let p = BoundParams { kappa: Some(1.0), g2: 1.0, ..params() };
    assert_rel(bound_rhs(Theorem::T3, &p).unwrap().total, 35.0, 1e-12);
    assert!(matches!(bound_rhs(Theorem::T3, &params()), Err(Error::InvalidConfig(_))));
    assert!(matches!(bound_rhs(Theorem::T5, &params()), Err(Error::InvalidConfig(_))));
    assert!(bound_rhs(Theorem::T2, &BoundParams { mu: 0.0, ..params() }).is_err());
    assert!(bound_rhs(Theorem::T4, &params()).unwrap().order_form);
    assert!(bound_rhs(Theorem::T6, &params()).unwrap().order_form);
    assert!(bound_rhs(Theorem::Table2(Table2Row::RetrainSc), &params()).unwrap().order_form);
}

#[test]
fn table2_computation_ordering() {
    let (tau, g) = (500, 0.5);
    let cost = |r| table2_computation(r, tau, g, 3, 1.0, 2.0, 1.0);
    assert_eq!(cost(Table2Row::PassiveSc), 1.0);
    assert_eq!(cost(Table2Row::DiscardC), 1.0);
    assert_eq!(cost(Table2Row::RetrainSc), 500.0);
    assert!(cost(Table2Row::Active) > 1.0 && cost(Table2Row::Active) < 500.0);
    assert_rel(cost(Table2Row::Active), (3000f64).log2(), 1e-12);
}

#[test]
fn qg_measurement_examples() {
    let dom = BallDomain::new(1.0).unwrap();
    let units: Vec<CostFn> = (0..7).map(|i| unit(&[0.05 * i as f64, 0.0], &dom)).collect();
    let m = measure_qg(&units, &dom, 1000).unwrap();
    assert_rel(m.exact.unwrap(), 7.0, 1e-12);
    assert_rel(m.sampled, 7.0, 1e-9);

    let flat = [quad(diag(&[1.0, 0.0]), &[0.1, 0.0], &dom), quad(diag(&[2.0, 0.0]), &[0.0, 0.0], &dom)];
    let m = measure_qg(&flat, &dom, 1000).unwrap();
    assert!(m.exact.unwrap() < 1e-9);
    assert!(m.sampled < 0.05);

    let mut rng = NoiseSource::new(4);
    let mixed: Vec<CostFn> = (0..5).map(|_| common::random_quadratic_within(&mut rng, 2, 0.2, 3.0, 0.05, &dom)).collect();
    let m = measure_qg(&mixed, &dom, 1000).unwrap();
    let sum: Matrix = mixed.iter().map(|f| f.as_quadratic().unwrap().curvature().clone()).fold(Matrix::zeros(2, 2), |a, b| a + b);
    let lmin = sum.symmetric_eigen().eigenvalues.min();
    assert_rel(m.exact.unwrap(), lmin, 1e-10);
    assert!(m.sampled >= lmin * (1.0 - 1e-9) && m.sampled <= lmin * 1.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn sc_erm_stability(seed in any::<u64>(), i in 1usize..6) {
        let dom = BallDomain::new(1.0).unwrap();
        let horizon = 40;
        let (stream, cls) = random_stream(seed, 3, horizon, 0.5, 2.0, &dom);
        let full = solve_erm(&stream.costs_up_to(horizon, &[]), &dom, 1e-12).unwrap().z;
        let deleted: Vec<usize> = (1..=i).map(|j| 7 * j).collect();
        let kept = solve_erm(&stream.costs_up_to(horizon, &deleted), &dom, 1e-12).unwrap().z;
        let bound = 2.0 * i as f64 * cls.lipschitz / (cls.mu * horizon as f64);
        prop_assert!((full - kept).norm() <= bound + 1e-6);
    }

    #[test]
    fn qg_erm_stability(seed in any::<u64>(), k in 1usize..4) {
        let dom = BallDomain::new(1.0).unwrap();
        let mut rng = NoiseSource::new(seed);
        let costs: Vec<CostFn> = (0..24)
            .map(|_| {
                let r = rng.standard_normal_vector(2).normalize();
                let a = &r * r.transpose() * rng.uniform_range(0.5, 2.0);
                CostFn::quadratic(Quadratic::new(a, rng.in_ball(2, 0.5), 0.0).unwrap(), &dom).unwrap()
            })
            .collect();
        let l = costs.iter().map(|f| f.class().lipschitz).fold(0.0, f64::max);
        let deleted: Vec<usize> = (1..=k).map(|j| 5 * j).collect();
        let kept: Vec<CostFn> = costs.iter().enumerate().filter(|(t, _)| !deleted.contains(&(t + 1))).map(|(_, f)| f.clone()).collect();
        let kappa = measure_qg(&kept, &dom, 16).unwrap().exact.unwrap();
        prop_assume!(kappa > 1e-3);
        let full = solve_erm(&costs, &dom, 1e-12).unwrap().z;
        let hat = solve_erm(&kept, &dom, 1e-12).unwrap().z;
        prop_assert!((full - hat).norm() <= 2.0 * k as f64 * l / kappa + 1e-6);
    }

    #[test]
    fn static_regret_is_the_k0_case(seed in any::<u64>()) {
        let dom = BallDomain::new(1.0).unwrap();
        let (stream, cls) = random_stream(seed, 2, 30, 0.5, 2.0, &dom);
        let tr = run_ogd(&stream, &RateSchedule::ScDecreasing { mu: 0.5 }, &cls, &dom).unwrap();
        let star = solve_erm(&stream.costs_up_to(30, &[]), &dom, 1e-12).unwrap().z;
        let mut total = 0.0;
        for t in 1..=30 {
            let f = stream.at(t).cost().unwrap();
            total += f.eval_grad(tr.played(t)).unwrap().0 - f.eval_grad(&star).unwrap().0;
        }
        prop_assert_eq!(regret_dynamic(&tr, &stream, &DeletionSchedule::empty(), &dom).unwrap(), total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn implicit_bound_lemma(a in 1e-3f64..100.0, b in 0.0f64..100.0, c in 1e-3f64..100.0, frac in 0.0f64..=1.0) {
        // Largest x with x − √(ax + b) ≤ c solves x = c + √(ax + b); sample below it.
        let r = c + (a + (a * a + 4.0 * (b + a * c)).sqrt()) / 2.0;
        let x = frac * r + (1.0 - frac) * c.min(r);
        prop_assume!(x - (a * x + b).sqrt() <= c);
        prop_assert!(x <= implicit_bound(a, b, c) + 1e-9 * r);
    }
}
