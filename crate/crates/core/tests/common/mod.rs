#![allow(dead_code)]

use olu_core::domain::{BallDomain, CostFn, CostStream, FnClass, Matrix, Quadratic, Vector};
use olu_core::rng::NoiseSource;

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

pub fn diag(xs: &[f64]) -> Matrix {
    Matrix::from_diagonal(&v(xs))
}

pub fn quad(a: Matrix, c: &[f64], dom: &BallDomain) -> CostFn {
    CostFn::quadratic(Quadratic::new(a, v(c), 0.0).unwrap(), dom).unwrap()
}

/// Random quadratic with spectrum in `[mu, beta]` and center in the ball of radius `center_r`.
pub fn random_quadratic_within(rng: &mut NoiseSource, d: usize, mu: f64, beta: f64, center_r: f64, dom: &BallDomain) -> CostFn {
    let g = Matrix::from_fn(d, d, |_, _| rng.standard_normal());
    let q = g.qr().q();
    let eig: Vec<f64> = (0..d).map(|_| rng.uniform_range(mu, beta)).collect();
    let a = &q * diag(&eig) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let c = rng.in_ball(d, center_r);
    CostFn::quadratic(Quadratic::new(a, c, 0.0).unwrap(), dom).unwrap()
}

/// Random quadratic with spectrum in `[mu, beta]` and center in the `R/2` ball.
pub fn random_quadratic(rng: &mut NoiseSource, d: usize, mu: f64, beta: f64, dom: &BallDomain) -> CostFn {
    random_quadratic_within(rng, d, mu, beta, dom.radius() / 2.0, dom)
}

/// Stream of random quadratics tagged with the common class `(L, beta, mu)`.
pub fn random_stream(seed: u64, d: usize, horizon: usize, mu: f64, beta: f64, dom: &BallDomain) -> (CostStream, FnClass) {
    random_stream_within(seed, d, horizon, mu, beta, dom.radius() / 2.0, dom)
}

/// As [`random_stream`] with centers in the ball of radius `center_r`.
pub fn random_stream_within(seed: u64, d: usize, horizon: usize, mu: f64, beta: f64, center_r: f64, dom: &BallDomain) -> (CostStream, FnClass) {
    let mut rng = NoiseSource::new(seed);
    let costs: Vec<CostFn> = (0..horizon).map(|_| random_quadratic_within(&mut rng, d, mu, beta, center_r, dom)).collect();
    let l = costs.iter().map(|f| f.class().lipschitz).fold(0.0, f64::max);
    let cls = FnClass::new(l, beta, mu).unwrap();
    let costs = costs
        .into_iter()
        .map(|f| CostFn::quadratic_with_class(f.as_quadratic().unwrap().clone(), cls).unwrap())
        .collect();
    (CostStream::from_costs(costs).unwrap(), cls)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

#[track_caller]
pub fn assert_rel(a: f64, b: f64, tol: f64) {
    assert!(rel_close(a, b, tol), "{a} vs {b} (rel tol {tol})");
}
