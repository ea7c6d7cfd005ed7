//! Synthetic quadratic streams with known class constants.

use serde::{Deserialize, Serialize};

use crate::domain::{
    class_bound_lipschitz, BallDomain, CostFn, CostStream, DeletionSchedule, FnClass, Matrix, Quadratic, QuadraticSum,
    Vector,
};
use crate::error::{Error, Result};
use crate::regret::measure_qg;
use crate::rng::NoiseSource;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Full-rank quadratics with spectra in `[μ, β]` and centers in the `R/2` ball.
    ScQuadratic,
    /// Rank-one quadratics of curvature `β` cycling through an orthonormal basis, so every
    /// window of `d` consecutive items sums to `β·I`.
    ConvexQg {
        #[serde(default = "yes")]
        rotate: bool,
        /// Quadratic-growth constant per unit of epoch length; defaults to `β/(2d−1)`.
        #[serde(default)]
        kappa: Option<f64>,
    },
    /// Strongly convex items whose stationary point is shared within each deletion segment.
    Assumption2Segments {
        #[serde(default = "yes")]
        common_minimizer: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LipschitzPolicy {
    /// Largest per-item gradient bound over the ball.
    #[default]
    Auto,
    /// A caller-chosen constant; must dominate the automatic one.
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub dimension: usize,
    pub horizon: usize,
    pub radius: f64,
    pub mu: f64,
    pub beta: f64,
    pub lipschitz: LipschitzPolicy,
    /// Deletion times, used for segment boundaries and epoch-wise growth checks.
    pub deletion_times: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GeneratedStream {
    pub stream: CostStream,
    pub class: FnClass,
    /// Quadratic growth per unit of epoch length.
    pub kappa: f64,
    /// `λmin` of the summed curvature over the whole stream.
    pub kappa_aggregate: f64,
    /// Segment stationary points, for `assumption2-segments`.
    pub anchors: Vec<Vector>,
}

/// Haar-distributed orthogonal matrix.
pub fn random_orthogonal(d: usize, rng: &mut NoiseSource) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.standard_normal());
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn spectrum_matrix(d: usize, mu: f64, beta: f64, rng: &mut NoiseSource) -> Matrix {
    if mu == beta {
        return Matrix::identity(d, d) * mu;
    }
    let eig: Vec<f64> = (0..d)
        .map(|j| match (d, j) {
            (1, _) => rng.uniform_range(mu, beta),
            (_, 0) => mu,
            (_, 1) => beta,
            _ => rng.uniform_range(mu, beta),
        })
        .collect();
    let q = random_orthogonal(d, rng);
    let a = &q * Matrix::from_diagonal(&Vector::from_vec(eig)) * q.transpose();
    (&a + a.transpose()) * 0.5
}

fn validate(p: &GenParams) -> Result<()> {
    let bad = |m: String| Err(Error::Generator(m));
    if p.dimension == 0 || p.horizon == 0 {
        return bad("dimension and horizon must be positive".into());
    }
    if !(p.radius.is_finite() && p.radius > 0.0) {
        return bad(format!("radius must be positive, got {}", p.radius));
    }
    if !(p.mu >= 0.0 && p.beta > 0.0 && p.mu <= p.beta && p.beta.is_finite()) {
        return bad(format!("need 0 <= mu <= beta, beta > 0; got mu={}, beta={}", p.mu, p.beta));
    }
    Ok(())
}

fn segment_of(t: usize, ends: &[usize]) -> usize {
    ends.iter().take_while(|&&e| e < t).count()
}

pub fn gen_stream(spec: &GeneratorSpec, p: &GenParams, seed: u64) -> Result<GeneratedStream> {
    validate(p)?;
    let dom = BallDomain::new(p.radius)?;
    let d = p.dimension;
    let mut rng = NoiseSource::for_stream(seed, 0x6e);
    let center_radius = p.radius / 2.0;
    let mut anchors = Vec::new();
    let mut quads = Vec::with_capacity(p.horizon);
    let kappa;
    match spec {
        GeneratorSpec::ScQuadratic => {
            need_mu(p)?;
            for _ in 0..p.horizon {
                let a = spectrum_matrix(d, p.mu, p.beta, &mut rng);
                let c = rng.in_ball(d, center_radius);
                quads.push(Quadratic::new(a, c, 0.0)?);
            }
            kappa = p.mu;
        }
        GeneratorSpec::ConvexQg { rotate, kappa: target } => {
            if p.mu != 0.0 {
                return Err(Error::Generator("convex-qg items are rank-deficient; set mu = 0".into()));
            }
            let basis = if *rotate { random_orthogonal(d, &mut rng) } else { Matrix::identity(d, d) };
            for t in 0..p.horizon {
                let r = basis.column(t % d).into_owned();
                let a = &r * r.transpose() * p.beta;
                let a = (&a + a.transpose()) * 0.5;
                let c = rng.in_ball(d, center_radius);
                quads.push(Quadratic::new(a, c, 0.0)?);
            }
            let k = target.unwrap_or(p.beta / (2 * d - 1) as f64);
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Generator(format!("kappa target must be positive, got {k}")));
            }
            kappa = k;
        }
        GeneratorSpec::Assumption2Segments { common_minimizer } => {
            need_mu(p)?;
            let segments = p.deletion_times.len() + 1;
            let shared = rng.in_ball(d, center_radius);
            anchors = (0..segments)
                .map(|_| if *common_minimizer { shared.clone() } else { rng.in_ball(d, center_radius) })
                .collect();
            for t in 1..=p.horizon {
                let a = spectrum_matrix(d, p.mu, p.beta, &mut rng);
                quads.push(Quadratic::new(a, anchors[segment_of(t, &p.deletion_times)].clone(), 0.0)?);
            }
            kappa = p.mu;
        }
    }

    let mut lipschitz: f64 = 0.0;
    let mut probe = Vec::with_capacity(quads.len());
    for q in quads {
        let f = CostFn::quadratic(q, &dom)?;
        lipschitz = lipschitz.max(class_bound_lipschitz(&f, &dom)?);
        probe.push(f);
    }
    if let LipschitzPolicy::Fixed { value } = p.lipschitz {
        if !(value >= lipschitz) {
            return Err(Error::Generator(format!(
                "fixed Lipschitz constant {value} is below the stream's gradient bound {lipschitz}"
            )));
        }
        lipschitz = value;
    }
    let class = FnClass::new(lipschitz, p.beta, p.mu)?;
    let costs = probe
        .into_iter()
        .map(|f| CostFn::quadratic_with_class(f.as_quadratic().expect("generated quadratic").clone(), class))
        .collect::<Result<Vec<_>>>()?;

    if matches!(spec, GeneratorSpec::ConvexQg { .. }) {
        check_epoch_growth(&costs, &p.deletion_times, p.horizon, kappa)?;
    }
    let qg = measure_qg(&costs, &dom, 256)?;
    let kappa_aggregate = qg.exact.unwrap_or(qg.sampled);
    Ok(GeneratedStream { stream: CostStream::from_costs(costs)?, class, kappa, kappa_aggregate, anchors })
}

fn need_mu(p: &GenParams) -> Result<()> {
    if p.mu > 0.0 {
        Ok(())
    } else {
        Err(Error::Generator("this generator needs mu > 0".into()))
    }
}

/// `λmin(Σ_{t≤τᵢ} Aₜ) ≥ κ (τᵢ − τᵢ₋₁)` for every epoch end, allowing 1% slack.
fn check_epoch_growth(costs: &[CostFn], times: &[usize], horizon: usize, kappa: f64) -> Result<()> {
    let mut prev = 0;
    for &end in times.iter().chain(std::iter::once(&horizon)) {
        if end <= prev {
            continue;
        }
        let lam = QuadraticSum::from_costs(&costs[..end]).map_or(0.0, |s| s.lambda_min());
        let need = kappa * (end - prev) as f64;
        if lam < 0.99 * need {
            return Err(Error::Generator(format!(
                "infeasible kappa target {kappa}: prefix 1..={end} has growth {lam} < {need}"
            )));
        }
        prev = end;
    }
    Ok(())
}

/// Epoch-wise growth of a quadratic stream: `λmin` of each prefix `1..=τᵢ` divided by the epoch length.
pub fn epoch_growth(stream: &CostStream, sched: &DeletionSchedule) -> Vec<f64> {
    let costs = stream.costs_up_to(stream.len(), &[]);
    let mut prev = 0;
    let mut out = Vec::new();
    for end in sched.entries().iter().map(|d| d.time).chain(std::iter::once(stream.len())) {
        if end <= prev {
            continue;
        }
        let lam = QuadraticSum::from_costs(&costs[..end]).map_or(0.0, |s| s.lambda_min());
        out.push(lam / (end - prev) as f64);
        prev = end;
    }
    out
}
