//! Parameter domain, loss functions, streams and deletion schedules.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative tolerance used when checking symmetry and PSD-ness of curvature matrices.
const MATRIX_TOL: f64 = 1e-10;

pub fn ensure_finite(x: &Vector, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite coordinates")))
    }
}

/// Semicolon-joined coordinates with 17 significant digits, round-trip exact.
pub fn format_vector(x: &Vector) -> String {
    x.iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_vector(s: &str) -> Result<Vector> {
    let coords = s
        .split(';')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad coordinate {p:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Vector::from_vec(coords))
}

/// Centered closed Euclidean ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDomain {
    radius: f64,
}

impl BallDomain {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.norm() <= self.radius
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        project(x, self)
    }
}

/// Euclidean projection onto the ball. The result always satisfies `‖Π(x)‖ ≤ R`
/// in floating point, which makes the map exactly idempotent.
pub fn project(x: &Vector, dom: &BallDomain) -> Result<Vector> {
    ensure_finite(x, "projection input")?;
    Ok(project_unchecked(x, dom.radius))
}

pub(crate) fn project_unchecked(x: &Vector, radius: f64) -> Vector {
    let norm = x.norm();
    if norm <= radius {
        return x.clone();
    }
    let mut y = x * (radius / norm);
    while y.norm() > radius {
        y *= 1.0 - f64::EPSILON;
    }
    y
}

/// Class constants: Lipschitz `L`, smoothness `beta`, strong convexity `mu`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FnClass {
    pub lipschitz: f64,
    pub beta: f64,
    pub mu: f64,
}

impl FnClass {
    pub fn new(lipschitz: f64, beta: f64, mu: f64) -> Result<Self> {
        let ok = [lipschitz, beta, mu].iter().all(|v| v.is_finite() && *v >= 0.0);
        if !ok || mu > beta {
            return Err(Error::InvalidInput(format!(
                "class needs 0 <= mu <= beta and L >= 0, got L={lipschitz}, beta={beta}, mu={mu}"
            )));
        }
        Ok(Self { lipschitz, beta, mu })
    }

    /// Smallest class containing both.
    pub fn join(&self, other: &FnClass) -> FnClass {
        FnClass {
            lipschitz: self.lipschitz.max(other.lipschitz),
            beta: self.beta.max(other.beta),
            mu: self.mu.min(other.mu),
        }
    }
}

/// `½ (z−c)ᵀ A (z−c) + b` with symmetric PSD `A` and `b ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    curvature: Matrix,
    center: Vector,
    offset: f64,
    eig_min: f64,
    eig_max: f64,
}

impl Quadratic {
    pub fn new(curvature: Matrix, center: Vector, offset: f64) -> Result<Self> {
        let d = center.len();
        if d == 0 || curvature.nrows() != d || curvature.ncols() != d {
            return Err(Error::InvalidInput(format!(
                "curvature is {}x{} but center has dimension {d}",
                curvature.nrows(),
                curvature.ncols()
            )));
        }
        ensure_finite(&center, "center")?;
        if !curvature.iter().all(|v| v.is_finite()) || !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::InvalidInput("curvature or offset not finite/nonnegative".into()));
        }
        let scale = curvature.amax().max(1.0);
        if (&curvature - curvature.transpose()).amax() > MATRIX_TOL * scale {
            return Err(Error::InvalidInput("curvature is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(curvature.clone()).eigenvalues;
        let eig_min = eig.min();
        let eig_max = eig.max();
        if eig_min < -MATRIX_TOL * scale {
            return Err(Error::InvalidInput(format!("curvature is not PSD (eigenvalue {eig_min})")));
        }
        Ok(Self { curvature, center, offset, eig_min: eig_min.max(0.0), eig_max })
    }

    /// `a·I` centered at `c`.
    pub fn isotropic(a: f64, center: Vector) -> Result<Self> {
        let d = center.len();
        Self::new(Matrix::identity(d, d) * a, center, 0.0)
    }

    pub fn curvature(&self) -> &Matrix {
        &self.curvature
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn eig_min(&self) -> f64 {
        self.eig_min
    }

    pub fn eig_max(&self) -> f64 {
        self.eig_max
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn value_grad(&self, z: &Vector) -> (f64, Vector) {
        let r = z - &self.center;
        let g = &self.curvature * &r;
        (0.5 * r.dot(&g) + self.offset, g)
    }
}

/// Escape hatch for non-quadratic losses; no certification oracle applies.
pub trait CustomLoss: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn value_grad(&self, z: &Vector) -> (f64, Vector);
}

#[derive(Debug, Clone)]
pub enum CostKind {
    Quadratic(Quadratic),
    Custom(Arc<dyn CustomLoss>),
}

#[derive(Debug, Clone)]
pub struct CostFn {
    kind: CostKind,
    class: FnClass,
}

impl CostFn {
    /// Quadratic loss with class constants read off its spectrum and `class_bound_lipschitz`.
    pub fn quadratic(q: Quadratic, dom: &BallDomain) -> Result<Self> {
        let lipschitz = quadratic_lipschitz(&q, dom)?;
        let class = FnClass::new(lipschitz, q.eig_max, q.eig_min)?;
        Ok(Self { kind: CostKind::Quadratic(q), class })
    }

    /// Quadratic loss tagged with a caller-supplied class, which must contain its spectrum.
    pub fn quadratic_with_class(q: Quadratic, class: FnClass) -> Result<Self> {
        let tol = MATRIX_TOL * q.eig_max.max(1.0);
        if q.eig_min + tol < class.mu || q.eig_max > class.beta + tol {
            return Err(Error::InvalidInput(format!(
                "spectrum [{}, {}] not within [mu={}, beta={}]",
                q.eig_min, q.eig_max, class.mu, class.beta
            )));
        }
        Ok(Self { kind: CostKind::Quadratic(q), class })
    }

    pub fn custom(f: Arc<dyn CustomLoss>, class: FnClass) -> Self {
        Self { kind: CostKind::Custom(f), class }
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn class(&self) -> &FnClass {
        &self.class
    }

    pub fn as_quadratic(&self) -> Option<&Quadratic> {
        match &self.kind {
            CostKind::Quadratic(q) => Some(q),
            CostKind::Custom(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            CostKind::Quadratic(q) => q.dim(),
            CostKind::Custom(f) => f.dim(),
        }
    }

    pub fn eval_grad(&self, z: &Vector) -> Result<(f64, Vector)> {
        if z.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {} but loss has dimension {}",
                z.len(),
                self.dim()
            )));
        }
        ensure_finite(z, "evaluation point")?;
        Ok(self.value_grad_unchecked(z))
    }

    pub(crate) fn value_grad_unchecked(&self, z: &Vector) -> (f64, Vector) {
        match &self.kind {
            CostKind::Quadratic(q) => q.value_grad(z),
            CostKind::Custom(f) => f.value_grad(z),
        }
    }
}

pub fn eval_grad(f: &CostFn, z: &Vector) -> Result<(f64, Vector)> {
    f.eval_grad(z)
}

/// `λmax(A)·(R + ‖c‖)`, an upper bound on the gradient norm over the ball.
pub fn class_bound_lipschitz(f: &CostFn, dom: &BallDomain) -> Result<f64> {
    match &f.kind {
        CostKind::Quadratic(q) => quadratic_lipschitz(q, dom),
        CostKind::Custom(c) => Err(Error::Unsupported(format!(
            "custom loss {:?} needs a caller-supplied Lipschitz constant",
            c.id()
        ))),
    }
}

fn quadratic_lipschitz(q: &Quadratic, dom: &BallDomain) -> Result<f64> {
    let cn = q.center.norm();
    if cn > dom.radius() * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "center norm {cn} lies outside the domain of radius {}",
            dom.radius()
        )));
    }
    Ok(q.eig_max * (dom.radius() + cn))
}

#[derive(Debug, Clone)]
pub enum StreamItem {
    Cost(CostFn),
    Skip,
}

impl StreamItem {
    pub fn is_skip(&self) -> bool {
        matches!(self, StreamItem::Skip)
    }

    pub fn cost(&self) -> Option<&CostFn> {
        match self {
            StreamItem::Cost(f) => Some(f),
            StreamItem::Skip => None,
        }
    }
}

/// Time-ordered losses; time `t` (1-based) holds `items[t-1]`.
#[derive(Debug, Clone)]
pub struct CostStream {
    items: Vec<StreamItem>,
}

impl CostStream {
    pub fn new(items: Vec<StreamItem>) -> Result<Self> {
        let mut dim = None;
        for f in items.iter().filter_map(StreamItem::cost) {
            match dim {
                None => dim = Some(f.dim()),
                Some(d) if d != f.dim() => {
                    return Err(Error::InvalidInput(format!(
                        "mixed dimensions in stream: {d} and {}",
                        f.dim()
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { items })
    }

    pub fn from_costs(costs: Vec<CostFn>) -> Result<Self> {
        Self::new(costs.into_iter().map(StreamItem::Cost).collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[StreamItem] {
        &self.items
    }

    /// Item at 1-based time `t`.
    pub fn at(&self, t: usize) -> &StreamItem {
        &self.items[t - 1]
    }

    pub fn dim(&self) -> Option<usize> {
        self.items.iter().find_map(StreamItem::cost).map(CostFn::dim)
    }

    /// Join of all item classes, `None` for an all-Skip stream.
    pub fn class(&self) -> Option<FnClass> {
        self.items
            .iter()
            .filter_map(StreamItem::cost)
            .map(|f| *f.class())
            .reduce(|a, b| a.join(&b))
    }

    /// Replace every scheduled deletion index by Skip.
    pub fn retained(&self, sched: &DeletionSchedule) -> CostStream {
        self.retained_first(sched, sched.len())
    }

    /// Replace the first `i` deletion indices by Skip.
    pub fn retained_first(&self, sched: &DeletionSchedule, i: usize) -> CostStream {
        let mut items = self.items.clone();
        for del in &sched.entries()[..i] {
            if del.index >= 1 && del.index <= items.len() {
                items[del.index - 1] = StreamItem::Skip;
            }
        }
        CostStream { items }
    }

    /// Same stream with item at time `t` replaced.
    pub fn with_item(&self, t: usize, item: StreamItem) -> CostStream {
        let mut items = self.items.clone();
        items[t - 1] = item;
        CostStream { items }
    }

    /// Items at times `from..=to` as a new stream.
    pub fn window(&self, from: usize, to: usize) -> CostStream {
        CostStream { items: self.items[from - 1..to].to_vec() }
    }

    /// Non-skip losses among times `1..=t` whose index is not in `excluded`.
    pub fn costs_up_to(&self, t: usize, excluded: &[usize]) -> Vec<CostFn> {
        self.items[..t]
            .iter()
            .enumerate()
            .filter(|(j, _)| !excluded.contains(&(j + 1)))
            .filter_map(|(_, it)| it.cost().cloned())
            .collect()
    }
}

/// One deletion request: loss index `index` (u) removed at time `time` (τ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Deletion {
    pub index: usize,
    pub time: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DeletionSchedule {
    entries: Vec<Deletion>,
}

impl DeletionSchedule {
    pub fn new(entries: Vec<Deletion>) -> Result<Self> {
        for (n, d) in entries.iter().enumerate() {
            if d.index == 0 || d.time == 0 {
                return Err(Error::InvalidSchedule(format!("entry {n}: indices are 1-based")));
            }
            if d.index > d.time {
                return Err(Error::InvalidSchedule(format!(
                    "entry {n}: cannot delete index {} before it arrives at time {}",
                    d.index, d.time
                )));
            }
            if n > 0 && d.time <= entries[n - 1].time {
                return Err(Error::InvalidSchedule(format!(
                    "entry {n}: deletion times must be strictly increasing"
                )));
            }
            if entries[..n].iter().any(|e| e.index == d.index) {
                return Err(Error::InvalidSchedule(format!(
                    "entry {n}: index {} deleted twice",
                    d.index
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(index, time)| Deletion { index, time }).collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        match self.entries.last() {
            Some(d) if d.time > horizon => Err(Error::InvalidSchedule(format!(
                "deletion time {} exceeds horizon {horizon}",
                d.time
            ))),
            _ => Ok(()),
        }
    }

    pub fn entries(&self) -> &[Deletion] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 0-based ordinal of the deletion processed at time `t`.
    pub fn ordinal_at(&self, t: usize) -> Option<usize> {
        self.entries.iter().position(|d| d.time == t)
    }

    pub fn first(&self, i: usize) -> DeletionSchedule {
        Self { entries: self.entries[..i].to_vec() }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|d| d.index).collect()
    }

    /// Output window of interval `i` (1-based ordinal): `(τᵢ, τᵢ₊₁−1)`, ending at `horizon` for the last.
    pub fn interval(&self, i: usize, horizon: usize) -> (usize, usize) {
        let start = self.entries[i - 1].time;
        let end = self.entries.get(i).map_or(horizon, |d| d.time - 1);
        (start, end)
    }
}

/// `Σⱼ fⱼ` for quadratic losses, stored as `½ zᵀHz − zᵀg + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSum {
    pub hessian: Matrix,
    pub linear: Vector,
    pub constant: f64,
    pub count: usize,
}

impl QuadraticSum {
    /// `None` if any loss is not quadratic or the list is empty.
    pub fn from_costs<'a>(costs: impl IntoIterator<Item = &'a CostFn>) -> Option<Self> {
        let mut acc: Option<QuadraticSum> = None;
        for f in costs {
            let q = f.as_quadratic()?;
            let s = acc.get_or_insert_with(|| QuadraticSum {
                hessian: Matrix::zeros(q.dim(), q.dim()),
                linear: Vector::zeros(q.dim()),
                constant: 0.0,
                count: 0,
            });
            let ac = q.curvature() * q.center();
            s.hessian += q.curvature();
            s.constant += 0.5 * q.center().dot(&ac) + q.offset();
            s.linear += ac;
            s.count += 1;
        }
        acc
    }

    pub fn value(&self, z: &Vector) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) - z.dot(&self.linear) + self.constant
    }

    pub fn grad(&self, z: &Vector) -> Vector {
        &self.hessian * z - &self.linear
    }

    pub fn lambda_min(&self) -> f64 {
        SymmetricEigen::new(self.hessian.clone()).eigenvalues.min()
    }

    pub fn scaled(&self, s: f64) -> QuadraticSum {
        QuadraticSum {
            hessian: &self.hessian * s,
            linear: &self.linear * s,
            constant: self.constant * s,
            count: self.count,
        }
    }
}

/// `(1/n) Σ fⱼ`, with a closed-form fast path when every loss is quadratic.
#[derive(Debug, Clone)]
pub(crate) enum AverageLoss {
    Quadratic(QuadraticSum),
    General(Vec<CostFn>),
}

impl AverageLoss {
    pub fn new(costs: Vec<CostFn>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::InvalidInput("average over an empty set of losses".into()));
        }
        let n = costs.len() as f64;
        Ok(match QuadraticSum::from_costs(&costs) {
            Some(s) => AverageLoss::Quadratic(s.scaled(1.0 / n)),
            None => AverageLoss::General(costs),
        })
    }

    pub fn grad(&self, z: &Vector) -> Vector {
        match self {
            AverageLoss::Quadratic(s) => s.grad(z),
            AverageLoss::General(fs) => {
                let mut g = Vector::zeros(z.len());
                for f in fs {
                    g += f.value_grad_unchecked(z).1;
                }
                g / fs.len() as f64
            }
        }
    }
}
