//! Linear and nonlinear processes on a time set.
//!
//! A [`LinearProcess`] stores the fundamental matrix `F(tᵢ) = Φ(tᵢ, t_min)` at
//! every point of its time set; two-parameter evaluations are recovered from
//! the cocycle `Φ(t, s) = F(t) F(s)⁻¹`. Nonlinear flows are integrated on
//! demand with a fixed-step classical Runge-Kutta scheme whose nodes include
//! every time-set point.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::timeset::TimeSet;

pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Default cap on the condition number of stored fundamental matrices.
pub const DEFAULT_CONDITION_BOUND: f64 = 1e12;

/// Number of integration steps across the time span when no step is given.
pub const DEFAULT_STEPS_PER_SPAN: f64 = 2048.0;

#[derive(Clone)]
pub enum SystemKind {
    LinearConstant(DMatrix<f64>),
    LinearTimeVarying(MatrixFn),
    Nonlinear { field: FieldFn, jacobian: JacobianFn },
}

/// A vector field `ẋ = f(t, x)` together with its state Jacobian.
#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    dim: usize,
    kind: SystemKind,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            SystemKind::LinearConstant(_) => "linear-constant",
            SystemKind::LinearTimeVarying(_) => "linear-time-varying",
            SystemKind::Nonlinear { .. } => "nonlinear",
        };
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("kind", &kind)
            .finish()
    }
}

impl SystemSpec {
    pub fn linear_constant(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidSystem("coefficient matrix must be square and nonempty".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem("coefficient matrix has non-finite entries".into()));
        }
        Ok(Self {
            name: "linear".into(),
            dim: a.nrows(),
            kind: SystemKind::LinearConstant(a),
        })
    }

    pub fn linear_time_varying(dim: usize, a: MatrixFn) -> Self {
        Self {
            name: "linear-tv".into(),
            dim,
            kind: SystemKind::LinearTimeVarying(a),
        }
    }

    pub fn nonlinear(dim: usize, field: FieldFn, jacobian: JacobianFn) -> Self {
        Self {
            name: "nonlinear".into(),
            dim,
            kind: SystemKind::Nonlinear { field, jacobian },
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self.kind, SystemKind::Nonlinear { .. })
    }

    /// `A(t)` for linear systems.
    pub fn matrix_at(&self, t: f64) -> Option<DMatrix<f64>> {
        match &self.kind {
            SystemKind::LinearConstant(a) => Some(a.clone()),
            SystemKind::LinearTimeVarying(a) => Some(a(t)),
            SystemKind::Nonlinear { .. } => None,
        }
    }

    pub fn rhs(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            SystemKind::LinearConstant(a) => a * x,
            SystemKind::LinearTimeVarying(a) => a(t) * x,
            SystemKind::Nonlinear { field, .. } => field(t, x),
        }
    }

    pub fn jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            SystemKind::LinearConstant(a) => a.clone(),
            SystemKind::LinearTimeVarying(a) => a(t),
            SystemKind::Nonlinear { jacobian, .. } => jacobian(t, x),
        }
    }

    /// Largest relative discrepancy between the Jacobian and central finite
    /// differences of the field over the given sample states.
    pub fn jacobian_consistency(&self, samples: &[(f64, DVector<f64>)]) -> f64 {
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (t, x) in samples {
            let jac = self.jacobian(*t, x);
            let mut fd = DMatrix::<f64>::zeros(self.dim, self.dim);
            for j in 0..self.dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                fd.set_column(j, &((self.rhs(*t, &xp) - self.rhs(*t, &xm)) / (2.0 * h)));
            }
            let scale = jac.amax().max(1.0);
            worst = worst.max((jac - fd).amax() / scale);
        }
        worst
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }
}

/// Built-in catalog.
pub mod catalog {
    use super::*;

    /// `ẋ = diag(entries) x`.
    pub fn diag(entries: &[f64]) -> Result<SystemSpec> {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(entries));
        Ok(SystemSpec::linear_constant(a)?.with_name("diag"))
    }

    /// Planar rotation `ẋ = [[0, −ω], [ω, 0]] x`.
    pub fn rotation(omega: f64) -> SystemSpec {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -omega, omega, 0.0]);
        SystemSpec::linear_constant(a)
            .expect("rotation matrix is valid")
            .with_name("rotation")
    }

    /// `A(t) = Σ_k C_k t^k`.
    pub fn linear_polynomial(coefficients: Vec<DMatrix<f64>>) -> Result<SystemSpec> {
        let Some(first) = coefficients.first() else {
            return Err(Error::InvalidSystem("polynomial needs at least one coefficient".into()));
        };
        let n = first.nrows();
        if coefficients.iter().any(|c| c.nrows() != n || c.ncols() != n) || n == 0 {
            return Err(Error::InvalidSystem("polynomial coefficients must be equal square matrices".into()));
        }
        if coefficients.len() == 1 {
            return Ok(SystemSpec::linear_constant(coefficients[0].clone())?.with_name("linear_poly"));
        }
        let coeffs = Arc::new(coefficients);
        let a: MatrixFn = Arc::new(move |t| {
            let mut acc = DMatrix::<f64>::zeros(n, n);
            for c in coeffs.iter().rev() {
                acc = acc * t + c;
            }
            acc
        });
        Ok(SystemSpec::linear_time_varying(n, a).with_name("linear_poly"))
    }

    /// `ẋ = −x + y², ẏ = y + x²`.
    pub fn saddle_quadratic() -> SystemSpec {
        let field: FieldFn = Arc::new(|_, z| {
            let (x, y) = (z[0], z[1]);
            DVector::from_vec(vec![-x + y * y, y + x * x])
        });
        let jacobian: JacobianFn = Arc::new(|_, z| {
            let (x, y) = (z[0], z[1]);
            DMatrix::from_row_slice(2, 2, &[-1.0, 2.0 * y, 2.0 * x, 1.0])
        });
        SystemSpec::nonlinear(2, field, jacobian).with_name("saddle_quadratic")
    }

    /// `ẋ = −x + x³`.
    pub fn cubic_contraction() -> SystemSpec {
        let field: FieldFn = Arc::new(|_, z| DVector::from_element(1, -z[0] + z[0].powi(3)));
        let jacobian: JacobianFn =
            Arc::new(|_, z| DMatrix::from_element(1, 1, -1.0 + 3.0 * z[0] * z[0]));
        SystemSpec::nonlinear(1, field, jacobian).with_name("cubic_contraction")
    }

    /// `ẋ = x − x³`.
    pub fn cubic_expansion() -> SystemSpec {
        let field: FieldFn = Arc::new(|_, z| DVector::from_element(1, z[0] - z[0].powi(3)));
        let jacobian: JacobianFn =
            Arc::new(|_, z| DMatrix::from_element(1, 1, 1.0 - 3.0 * z[0] * z[0]));
        SystemSpec::nonlinear(1, field, jacobian).with_name("cubic_expansion")
    }

    pub const BUILTIN_NAMES: &[&str] = &[
        "diag",
        "rotation",
        "saddle_quadratic",
        "cubic_contraction",
        "cubic_expansion",
    ];

    /// Built-in system by name with default parameters.
    pub fn builtin(name: &str) -> Option<SystemSpec> {
        match name {
            "diag" => diag(&[-1.0, 2.0]).ok(),
            "rotation" => Some(rotation(1.0)),
            "saddle_quadratic" => Some(saddle_quadratic()),
            "cubic_contraction" => Some(cubic_contraction()),
            "cubic_expansion" => Some(cubic_expansion()),
            _ => None,
        }
    }
}

/// Integration step to use for a time set when none is given.
pub fn default_step(ts: &TimeSet) -> f64 {
    let span = ts.span();
    if span > 0.0 {
        span / DEFAULT_STEPS_PER_SPAN
    } else {
        1.0
    }
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("integration step must be positive (got {step})")))
    }
}

fn rk4_step<F>(rhs: &F, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = rhs(t, x);
    let k2 = rhs(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = rhs(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = rhs(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Classical RK4 from `(t0, x0)` through `nodes` (monotone in the direction of
/// integration), with at most `step` between substeps. Returns the state at
/// each node.
pub(crate) fn rk4_through<F>(
    rhs: F,
    t0: f64,
    x0: &DVector<f64>,
    nodes: &[f64],
    step: f64,
) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut out = Vec::with_capacity(nodes.len());
    let mut t = t0;
    let mut x = x0.clone();
    for &target in nodes {
        let span = target - t;
        if span != 0.0 {
            let substeps = (span.abs() / step).ceil().max(1.0) as usize;
            let h = span / substeps as f64;
            for i in 0..substeps {
                let ti = t + i as f64 * h;
                x = rk4_step(&rhs, ti, &x, h);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::IntegrationBlowup { t: ti + h });
                }
            }
            t = target;
        }
        out.push(x.clone());
    }
    Ok(out)
}

fn vec_to_matrix(v: &DVector<f64>, n: usize, offset: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, &v.as_slice()[offset..offset + n * n])
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smin = sv.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

/// A linear invertible process tabulated on a time set.
#[derive(Debug, Clone)]
pub struct LinearProcess {
    timeset: TimeSet,
    fundamental: Vec<DMatrix<f64>>,
    derivative: Option<Vec<DMatrix<f64>>>,
    condition_bound: f64,
}

impl LinearProcess {
    /// Builds a process from `F(tᵢ) = Φ(tᵢ, t_min)` and, for interval time
    /// sets, `Ḟ(tᵢ) = A(tᵢ) F(tᵢ)`. Derivatives are dropped for finite sets.
    pub fn from_table(
        timeset: TimeSet,
        fundamental: Vec<DMatrix<f64>>,
        derivative: Option<Vec<DMatrix<f64>>>,
        condition_bound: f64,
    ) -> Result<Self> {
        if fundamental.len() != timeset.len() {
            return Err(Error::DimensionMismatch {
                expected: timeset.len(),
                found: fundamental.len(),
            });
        }
        let n = fundamental[0].nrows();
        for (i, f) in fundamental.iter().enumerate() {
            if f.nrows() != n || f.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: f.ncols() });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationBlowup { t: timeset.points()[i] });
            }
            let c = condition_number(f);
            if !(c <= condition_bound) {
                return Err(Error::IllConditionedProcess {
                    t: timeset.points()[i],
                    condition: c,
                    bound: condition_bound,
                });
            }
        }
        if (&fundamental[0] - DMatrix::<f64>::identity(n, n)).amax() > 1e-12 {
            return Err(Error::InvalidArgument("F(t_min) must be the identity".into()));
        }
        let derivative = if timeset.has_limit_points() {
            let Some(d) = derivative else {
                return Err(Error::RequiresIntervalTimeSet);
            };
            if d.len() != timeset.len() {
                return Err(Error::DimensionMismatch { expected: timeset.len(), found: d.len() });
            }
            Some(d)
        } else {
            None
        };
        Ok(Self { timeset, fundamental, derivative, condition_bound })
    }

    pub fn timeset(&self) -> &TimeSet {
        &self.timeset
    }

    pub fn dim(&self) -> usize {
        self.fundamental[0].nrows()
    }

    pub fn condition_bound(&self) -> f64 {
        self.condition_bound
    }

    /// `F(tᵢ) = Φ(tᵢ, t_min)` at every grid point.
    pub fn fundamental(&self) -> &[DMatrix<f64>] {
        &self.fundamental
    }

    /// `Ḟ(tᵢ)` at every grid point, present iff the time set has limit points.
    pub fn derivative(&self) -> Option<&[DMatrix<f64>]> {
        self.derivative.as_deref()
    }

    fn index(&self, t: f64) -> Result<usize> {
        self.timeset.index_of(t).ok_or(Error::TimeNotInSet(t))
    }

    /// `Φ(t, s) = F(t) F(s)⁻¹`, via a linear solve.
    pub fn evaluate(&self, t: f64, s: f64) -> Result<DMatrix<f64>> {
        let i = self.index(t)?;
        let j = self.index(s)?;
        if i == j {
            return Ok(DMatrix::identity(self.dim(), self.dim()));
        }
        // X F(s) = F(t)  ⇔  F(s)ᵀ Xᵀ = F(t)ᵀ
        let lu = self.fundamental[j].transpose().lu();
        let xt = lu
            .solve(&self.fundamental[i].transpose())
            .ok_or(Error::NotInvertible)?;
        Ok(xt.transpose())
    }

    /// The exponentially weighted process `e^{−γ(t−s)} Φ(t, s)`.
    pub fn shift(&self, gamma: f64) -> LinearProcess {
        let t0 = self.timeset.t_min();
        let weights: Vec<f64> = self
            .timeset
            .points()
            .iter()
            .map(|&t| (-gamma * (t - t0)).exp())
            .collect();
        let fundamental = self
            .fundamental
            .iter()
            .zip(&weights)
            .map(|(f, w)| f * *w)
            .collect();
        let derivative = self.derivative.as_ref().map(|d| {
            d.iter()
                .zip(&self.fundamental)
                .zip(&weights)
                .map(|((fd, f), w)| (fd - f * gamma) * *w)
                .collect()
        });
        LinearProcess {
            timeset: self.timeset.clone(),
            fundamental,
            derivative,
            condition_bound: self.condition_bound,
        }
    }

    /// Restriction to a subset of the grid, re-based at the subset's first point.
    pub fn restrict(&self, subset: &TimeSet) -> Result<LinearProcess> {
        let idx: Vec<usize> = subset
            .points()
            .iter()
            .map(|&t| self.index(t))
            .collect::<Result<_>>()?;
        let base = &self.fundamental[idx[0]];
        let base_inv = base.clone().try_inverse().ok_or(Error::NotInvertible)?;
        let mut fundamental: Vec<DMatrix<f64>> =
            idx.iter().map(|&i| &self.fundamental[i] * &base_inv).collect();
        let n = self.dim();
        fundamental[0] = DMatrix::identity(n, n);
        let derivative = if subset.has_limit_points() {
            let d = self.derivative.as_ref().ok_or(Error::RequiresIntervalTimeSet)?;
            Some(idx.iter().map(|&i| &d[i] * &base_inv).collect())
        } else {
            None
        };
        let ts = subset.clone();
        LinearProcess::from_table(ts, fundamental, derivative, f64::INFINITY).map(|mut p| {
            p.condition_bound = self.condition_bound;
            p
        })
    }
}

/// Fundamental matrix of a linear system on a time set.
///
/// Constant coefficient matrices use the matrix exponential; time-varying
/// ones are integrated with fixed-step RK4 (default step: span / 2048).
pub fn solve_linear(sys: &SystemSpec, ts: &TimeSet, step: Option<f64>) -> Result<LinearProcess> {
    solve_linear_with_bound(sys, ts, step, DEFAULT_CONDITION_BOUND)
}

pub fn solve_linear_with_bound(
    sys: &SystemSpec,
    ts: &TimeSet,
    step: Option<f64>,
    condition_bound: f64,
) -> Result<LinearProcess> {
    let n = sys.dim();
    let t0 = ts.t_min();
    let fundamental: Vec<DMatrix<f64>> = match sys.kind() {
        SystemKind::LinearConstant(a) => {
            let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
            ts.points()
                .iter()
                .map(|&t| {
                    let dt = t - t0;
                    if is_diag {
                        DMatrix::from_diagonal(&a.diagonal().map(|d| (d * dt).exp()))
                    } else {
                        (a * dt).exp()
                    }
                })
                .collect()
        }
        SystemKind::LinearTimeVarying(a) => {
            let step = step.unwrap_or_else(|| default_step(ts));
            check_step(step)?;
            let a = a.clone();
            let rhs = move |t: f64, y: &DVector<f64>| {
                let y = vec_to_matrix(y, n, 0);
                let d = a(t) * y;
                DVector::from_column_slice(d.as_slice())
            };
            let id = DMatrix::<f64>::identity(n, n);
            let y0 = DVector::from_column_slice(id.as_slice());
            rk4_through(rhs, t0, &y0, ts.points(), step)?
                .iter()
                .map(|y| vec_to_matrix(y, n, 0))
                .collect()
        }
        SystemKind::Nonlinear { .. } => {
            return Err(Error::InvalidSystem(
                "solve_linear needs a linear system; use linearize for nonlinear ones".into(),
            ))
        }
    };
    let derivative = ts.has_limit_points().then(|| {
        ts.points()
            .iter()
            .zip(&fundamental)
            .map(|(&t, f)| sys.matrix_at(t).expect("linear system") * f)
            .collect()
    });
    LinearProcess::from_table(ts.clone(), fundamental, derivative, condition_bound)
}

/// States of a solution at the points of a time set.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

/// A nonlinear (or linear) system viewed as a process on a time set.
#[derive(Debug, Clone)]
pub struct NonlinearProcess {
    system: SystemSpec,
    timeset: TimeSet,
    step: f64,
}

impl NonlinearProcess {
    pub fn new(system: SystemSpec, timeset: TimeSet, step: Option<f64>) -> Result<Self> {
        let step = step.unwrap_or_else(|| default_step(&timeset));
        check_step(step)?;
        Ok(Self { system, timeset, step })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn timeset(&self) -> &TimeSet {
        &self.timeset
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// `φ(tᵢ, t_min, x0)` at every grid point.
    pub fn trajectory(&self, x0: &DVector<f64>) -> Result<Trajectory> {
        self.system.check_state(x0)?;
        let sys = &self.system;
        let states = rk4_through(
            |t, x| sys.rhs(t, x),
            self.timeset.t_min(),
            x0,
            self.timeset.points(),
            self.step,
        )?;
        Ok(Trajectory { times: self.timeset.points().to_vec(), states })
    }

    /// `φ(t, s, x)` for arbitrary `t`, `s`; integrates backward when `t < s`.
    pub fn flow(&self, t: f64, s: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.system.check_state(x)?;
        let sys = &self.system;
        let mut out = rk4_through(|tt, xx| sys.rhs(tt, xx), s, x, &[t], self.step)?;
        Ok(out.pop().expect("one node"))
    }
}

/// States of `ẋ = f(t, x)` at every point of `ts`, starting from `x0` at `t_min`.
pub fn solve_nonlinear(
    sys: &SystemSpec,
    ts: &TimeSet,
    x0: &DVector<f64>,
    step: Option<f64>,
) -> Result<Trajectory> {
    NonlinearProcess::new(sys.clone(), ts.clone(), step)?.trajectory(x0)
}

/// Fundamental matrix of the variational equation `Ẏ = ∂ₓf(t, φ(t, t_min, x0)) Y`,
/// integrated together with the reference trajectory.
pub fn linearize(
    sys: &SystemSpec,
    ts: &TimeSet,
    x0: &DVector<f64>,
    step: Option<f64>,
) -> Result<LinearProcess> {
    linearize_with_bound(sys, ts, x0, step, DEFAULT_CONDITION_BOUND)
}

pub fn linearize_with_bound(
    sys: &SystemSpec,
    ts: &TimeSet,
    x0: &DVector<f64>,
    step: Option<f64>,
    condition_bound: f64,
) -> Result<LinearProcess> {
    sys.check_state(x0)?;
    let step = step.unwrap_or_else(|| default_step(ts));
    check_step(step)?;
    let n = sys.dim();
    let rhs = |t: f64, z: &DVector<f64>| {
        let x = z.rows(0, n).into_owned();
        let y = vec_to_matrix(z, n, n);
        let dx = sys.rhs(t, &x);
        let dy = sys.jacobian(t, &x) * y;
        let mut out = DVector::<f64>::zeros(n + n * n);
        out.rows_mut(0, n).copy_from(&dx);
        out.rows_mut(n, n * n).copy_from_slice(dy.as_slice());
        out
    };
    let mut z0 = DVector::<f64>::zeros(n + n * n);
    z0.rows_mut(0, n).copy_from(x0);
    for i in 0..n {
        z0[n + i * n + i] = 1.0;
    }
    let path = rk4_through(rhs, ts.t_min(), &z0, ts.points(), step)?;
    let fundamental: Vec<DMatrix<f64>> = path.iter().map(|z| vec_to_matrix(z, n, n)).collect();
    let derivative = ts.has_limit_points().then(|| {
        path.iter()
            .zip(ts.points())
            .zip(&fundamental)
            .map(|((z, &t), f)| sys.jacobian(t, &z.rows(0, n).into_owned()) * f)
            .collect()
    });
    LinearProcess::from_table(ts.clone(), fundamental, derivative, condition_bound)
}

/// `e^{−γ(t−s)} Φ(t, s)`.
pub fn shift(p: &LinearProcess, gamma: f64) -> LinearProcess {
    p.shift(gamma)
}

pub fn evaluate(p: &LinearProcess, t: f64, s: f64) -> Result<DMatrix<f64>> {
    p.evaluate(t, s)
}

/// `H(t, x) = φ(t, t_min, Φ(t_min, t) x)`: carries a trajectory of the
/// linear process onto one of the nonlinear process.
pub fn conjugacy_map(
    phi: &NonlinearProcess,
    p: &LinearProcess,
    t: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let t0 = p.timeset().t_min();
    let back = p.evaluate(t0, t)? * x;
    phi.flow(t, t0, &back)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn diag_process() -> LinearProcess {
        let sys = catalog::diag(&[-1.0, 2.0]).unwrap();
        solve_linear(&sys, &TimeSet::interval(0.0, 1.0, 11).unwrap(), None).unwrap()
    }

    #[test]
    fn closed_form_diagonal() {
        let p = diag_process();
        let f1 = p.evaluate(1.0, 0.0).unwrap();
        let expected = DMatrix::from_diagonal(&v(&[(-1f64).exp(), 2f64.exp()]));
        assert!((f1 - expected).amax() < 1e-10);
        assert_eq!(p.evaluate(0.3, 0.3).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn rotation_stays_orthogonal() {
        let p = solve_linear(&catalog::rotation(1.0), &TimeSet::interval(0.0, 3.0, 31).unwrap(), None)
            .unwrap();
        for f in p.fundamental() {
            assert!((f.transpose() * f - DMatrix::identity(2, 2)).amax() < 1e-8);
        }
    }

    #[test]
    fn time_varying_diagonal_matches_quadrature() {
        let sys = catalog::linear_polynomial(vec![
            DMatrix::from_diagonal(&v(&[-1.0, 2.0])),
            DMatrix::from_diagonal(&v(&[-1.0, 2.0])),
        ])
        .unwrap();
        let p = solve_linear(&sys, &TimeSet::interval(0.0, 1.0, 5).unwrap(), None).unwrap();
        let f1 = p.evaluate(1.0, 0.0).unwrap();
        assert_relative_eq!(f1[(0, 0)], (-1.5f64).exp(), epsilon = 1e-6);
        assert_relative_eq!(f1[(1, 1)], 3f64.exp(), epsilon = 1e-6 * 3f64.exp());
        assert!(f1[(0, 1)].abs() < 1e-12 && f1[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn derivative_table_is_a_times_f() {
        let p = diag_process();
        let d = p.derivative().unwrap();
        for (i, &t) in p.timeset().points().iter().enumerate() {
            let expected = DMatrix::from_diagonal(&v(&[-(-t).exp(), 2.0 * (2.0 * t).exp()]));
            assert!((&d[i] - expected).amax() < 1e-10);
        }
        let finite = solve_linear(
            &catalog::diag(&[-1.0, 2.0]).unwrap(),
            &TimeSet::finite(&[0.0, 1.0]).unwrap(),
            None,
        )
        .unwrap();
        assert!(finite.derivative().is_none());
    }

    #[test]
    fn off_grid_evaluation_fails() {
        let p = diag_process();
        assert!(matches!(p.evaluate(0.55, 0.0), Err(Error::TimeNotInSet(_))));
    }

    #[test]
    fn ill_conditioning_is_detected() {
        let sys = catalog::diag(&[-20.0, 20.0]).unwrap();
        let r = solve_linear(&sys, &TimeSet::interval(0.0, 1.0, 3).unwrap(), None);
        assert!(matches!(r, Err(Error::IllConditionedProcess { .. })));
    }

    #[test]
    fn nonlinear_trajectories() {
        let ts = TimeSet::interval(0.0, 1.0, 11).unwrap();
        let cubic = catalog::cubic_contraction();
        let zero = solve_nonlinear(&cubic, &ts, &v(&[0.0]), None).unwrap();
        assert!(zero.states.iter().all(|s| s[0] == 0.0));
        // Bernoulli closed form: x(t)⁻² = 1 + (x0⁻² − 1) e^{2t}.
        let half = solve_nonlinear(&cubic, &ts, &v(&[0.5]), None).unwrap();
        let exact = 1.0 / (1.0 + 3.0 * 2f64.exp()).sqrt();
        assert_relative_eq!(half.states[10][0], exact, epsilon = 1e-10);
        assert_relative_eq!(half.states[10][0], 0.207_760_758_999_4, epsilon = 1e-10);

        let decay = SystemSpec::linear_constant(DMatrix::from_element(1, 1, -1.0)).unwrap();
        let traj = solve_nonlinear(&decay, &ts, &v(&[1.0]), None).unwrap();
        assert_relative_eq!(traj.states[10][0], (-1f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn blowup_is_reported() {
        let ts = TimeSet::interval(0.0, 1.0, 3).unwrap();
        let r = solve_nonlinear(&catalog::cubic_contraction(), &ts, &v(&[1.5]), None);
        assert!(matches!(r, Err(Error::IntegrationBlowup { .. })));
    }

    #[test]
    fn backward_flow_inverts_forward_flow() {
        let ts = TimeSet::interval(0.0, 1.0, 3).unwrap();
        let phi = NonlinearProcess::new(catalog::saddle_quadratic(), ts, None).unwrap();
        let x = v(&[0.1, -0.05]);
        let y = phi.flow(1.0, 0.0, &x).unwrap();
        let back = phi.flow(0.0, 1.0, &y).unwrap();
        assert!((back - x).amax() < 1e-10);
    }

    #[test]
    fn linearization_examples() {
        let ts = TimeSet::interval(0.0, 1.0, 11).unwrap();
        let p = linearize(&catalog::cubic_contraction(), &ts, &v(&[0.0]), None).unwrap();
        for &t in ts.points() {
            for &s in ts.points() {
                assert_relative_eq!(
                    p.evaluate(t, s).unwrap()[(0, 0)],
                    (-(t - s)).exp(),
                    epsilon = 1e-10
                );
            }
        }
        let p = linearize(&catalog::saddle_quadratic(), &ts, &v(&[0.0, 0.0]), None).unwrap();
        for (i, &t) in ts.points().iter().enumerate() {
            let expected = DMatrix::from_diagonal(&v(&[(-t).exp(), t.exp()]));
            assert!((&p.fundamental()[i] - expected).amax() < 1e-10);
        }
        assert_eq!(p.evaluate(0.0, 0.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn shift_examples() {
        let p = diag_process();
        let same = p.shift(0.0);
        assert_eq!(same.fundamental(), p.fundamental());
        let s = p.shift(2.0);
        let f1 = s.evaluate(1.0, 0.0).unwrap();
        assert!((f1 - DMatrix::from_diagonal(&v(&[(-3f64).exp(), 1.0]))).amax() < 1e-12);
        let ab = p.shift(0.7).shift(-0.2);
        let direct = p.shift(0.5);
        for (x, y) in ab.fundamental().iter().zip(direct.fundamental()) {
            assert!((x - y).amax() < 1e-12 * y.amax());
        }
        for (x, y) in ab.derivative().unwrap().iter().zip(direct.derivative().unwrap()) {
            assert!((x - y).amax() < 1e-12 * y.amax());
        }
    }

    #[test]
    fn conjugacy_examples() {
        let ts = TimeSet::interval(0.0, 1.0, 5).unwrap();
        let sys = catalog::saddle_quadratic();
        let phi = NonlinearProcess::new(sys.clone(), ts.clone(), None).unwrap();
        let p = linearize(&sys, &ts, &v(&[0.0, 0.0]), None).unwrap();
        let x = v(&[0.01, 0.02]);
        assert!((conjugacy_map(&phi, &p, 0.0, &x).unwrap() - &x).amax() < 1e-15);

        let lin = catalog::diag(&[-1.0, 2.0]).unwrap();
        let lin_phi = NonlinearProcess::new(lin.clone(), ts.clone(), None).unwrap();
        let lin_p = solve_linear(&lin, &ts, None).unwrap();
        let h = conjugacy_map(&lin_phi, &lin_p, 0.75, &x).unwrap();
        assert!((h - &x).amax() < 1e-10);

        // Saddle, small x: H(t, x) stays close to x and keeps its sign pattern.
        let h = conjugacy_map(&phi, &p, 1.0, &x).unwrap();
        let back = p.evaluate(0.0, 1.0).unwrap() * &x;
        let dense = NonlinearProcess::new(sys, ts, Some(1e-5)).unwrap();
        let reference = dense.flow(1.0, 0.0, &back).unwrap();
        assert!((&h - &reference).amax() < 1e-9);
        assert!(h.iter().zip(x.iter()).all(|(a, b)| a.signum() == b.signum()));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let sys = catalog::linear_polynomial(vec![
            DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 1.2, -0.4]),
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.8, 0.1, 0.9]),
        ])
        .unwrap();
        let ts = TimeSet::finite(&[0.0, 2.0]).unwrap();
        let reference = solve_linear(&sys, &ts, Some(1e-4)).unwrap().fundamental()[1].clone();
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| (solve_linear(&sys, &ts, Some(h)).unwrap().fundamental()[1].clone() - &reference).amax())
            .collect();
        let fit = ((errs[0] / errs[1]).log2() + (errs[1] / errs[2]).log2()) / 2.0;
        assert!(fit >= 3.5, "order fit {fit} from {errs:?}");
    }

    #[test]
    fn variational_matches_finite_differences() {
        let ts = TimeSet::interval(0.0, 1.0, 5).unwrap();
        let sys = catalog::saddle_quadratic();
        let x0 = v(&[0.2, -0.1]);
        let p = linearize(&sys, &ts, &x0, None).unwrap();
        let phi = NonlinearProcess::new(sys, ts.clone(), None).unwrap();
        let dir = v(&[0.6, 0.8]);
        let mut errs = Vec::new();
        for h in [1e-3, 1e-4] {
            let plus = phi.trajectory(&(&x0 + &dir * h)).unwrap();
            let minus = phi.trajectory(&(&x0 - &dir * h)).unwrap();
            let worst = (0..ts.len())
                .map(|i| (&p.fundamental()[i] * &dir - (&plus.states[i] - &minus.states[i]) / (2.0 * h)).amax())
                .fold(0.0, f64::max);
            errs.push(worst);
        }
        // O(h²): a tenfold smaller h shrinks the error by about a hundred.
        assert!(errs[1] < errs[0] / 30.0 || errs[1] < 1e-9, "{errs:?}");
    }

    #[test]
    fn builtin_jacobians_are_consistent() {
        let samples: Vec<(f64, DVector<f64>)> = vec![(0.0, v(&[0.3, -0.7])), (0.5, v(&[1.1, 0.2]))];
        assert!(catalog::saddle_quadratic().jacobian_consistency(&samples) < 1e-4);
        let samples: Vec<(f64, DVector<f64>)> = vec![(0.0, v(&[0.3])), (0.5, v(&[-1.4]))];
        assert!(catalog::cubic_contraction().jacobian_consistency(&samples) < 1e-4);
        assert!(catalog::cubic_expansion().jacobian_consistency(&samples) < 1e-4);
    }

    #[test]
    fn restriction_rebases() {
        let p = diag_process();
        let sub = TimeSet::finite(&[0.2, 0.6, 1.0]).unwrap();
        let r = p.restrict(&sub).unwrap();
        assert_eq!(r.timeset().t_min(), 0.2);
        let expected = p.evaluate(1.0, 0.6).unwrap();
        assert!((r.evaluate(1.0, 0.6).unwrap() - expected).amax() < 1e-12);
        assert!(r.derivative().is_none());
        assert!(matches!(
            p.restrict(&TimeSet::finite(&[0.25]).unwrap()),
            Err(Error::TimeNotInSet(_))
        ));
    }

    proptest! {
        #[test]
        fn cocycle_on_random_triples(i in 0usize..11, j in 0usize..11, k in 0usize..11,
                                      a in -1.5f64..1.5, b in -1.5f64..1.5, c in -1.5f64..1.5, d in -1.5f64..1.5) {
            let sys = catalog::linear_polynomial(vec![
                DMatrix::from_row_slice(2, 2, &[a, b, c, d]),
                DMatrix::from_row_slice(2, 2, &[0.2, -0.3, 0.4, 0.1]),
            ]).unwrap();
            let ts = TimeSet::interval(0.0, 1.0, 11).unwrap();
            let p = solve_linear(&sys, &ts, Some(1e-2)).unwrap();
            let pts = ts.points();
            let (t, s, r) = (pts[i], pts[j], pts[k]);
            let lhs = p.evaluate(t, s).unwrap() * p.evaluate(s, r).unwrap();
            let rhs = p.evaluate(t, r).unwrap();
            prop_assert!((lhs - &rhs).amax() <= 1e-8 * rhs.amax().max(1.0));
        }
    }
}
