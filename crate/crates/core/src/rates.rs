//! Logarithmic difference quotients and growth rates.
//!
//! Growth rates of a direction are the extremes of the logarithmic difference
//! quotient of its trajectory norm over all unequal time pairs. On a sampled
//! interval the candidate set also contains the instantaneous rates at every
//! grid time (the diagonal limits of the quotient).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{complement_basis, hemisphere_coordinates, NormSpec, Subspace};
use crate::process::{LinearProcess, NonlinearProcess, Trajectory};
use crate::timeset::{TimePair, TimeSet};

/// Norms below this are treated as a collapse of the trajectory.
pub const NORM_FLOOR: f64 = 1e-300;

/// Number of golden-section refinement rounds after a grid search.
pub const REFINE_ROUNDS: usize = 3;

/// Bracket shrink factor between refinement rounds.
pub const REFINE_SHRINK: f64 = 8.0;

/// Coordinate sweeps per bracket level, repeated while they still improve.
pub(crate) const MAX_SWEEPS: usize = 12;

pub(crate) fn improved(old: f64, new: f64) -> bool {
    new < old - 1e-13 * (1.0 + old.abs())
}

const GOLDEN_ITERS: usize = 48;

/// Where an extremal rate is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness {
    Pair(TimePair),
    Instant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub value: f64,
    pub witness: Option<Witness>,
    pub direction: Option<DVector<f64>>,
}

impl RateResult {
    fn bare(value: f64) -> Self {
        Self { value, witness: None, direction: None }
    }
}

/// Candidate rate with its witness, before the direction is attached.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub value: f64,
    pub witness: Witness,
}

/// `(ln f(t) − ln f(s)) / (t − s)` for a positive table over a time set.
pub fn log_diff_quotient(ts: &TimeSet, values: &[f64], pair: TimePair) -> Result<f64> {
    if values.len() != ts.len() {
        return Err(Error::DimensionMismatch { expected: ts.len(), found: values.len() });
    }
    if let Some(&bad) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonpositiveNorm { value: bad });
    }
    let i = ts.index_of(pair.t).ok_or(Error::TimeNotInSet(pair.t))?;
    let j = ts.index_of(pair.s).ok_or(Error::TimeNotInSet(pair.s))?;
    if i == j {
        return Err(Error::InvalidArgument("time pair must consist of distinct times".into()));
    }
    Ok((values[i].ln() - values[j].ln()) / (pair.t - pair.s))
}

fn checked_ln(v: f64) -> Result<f64> {
    if v > NORM_FLOOR {
        Ok(v.ln())
    } else {
        Err(Error::NonpositiveNorm { value: v })
    }
}

/// Extremes of the difference quotients of `ln |y(tᵢ)|` (given as `logs`)
/// together with the instantaneous candidates `inst`.
fn extremes(times: &[f64], logs: &[f64], inst: Option<&[f64]>) -> (Candidate, Candidate) {
    let mut lo = Candidate { value: f64::INFINITY, witness: Witness::Instant(times[0]) };
    let mut hi = Candidate { value: f64::NEG_INFINITY, witness: Witness::Instant(times[0]) };
    for i in 1..times.len() {
        for j in 0..i {
            let d = (logs[i] - logs[j]) / (times[i] - times[j]);
            if d < lo.value {
                lo = Candidate { value: d, witness: Witness::Pair(TimePair { t: times[i], s: times[j] }) };
            }
            if d > hi.value {
                hi = Candidate { value: d, witness: Witness::Pair(TimePair { t: times[i], s: times[j] }) };
            }
        }
    }
    if let Some(inst) = inst {
        for (&t, &r) in times.iter().zip(inst) {
            if r < lo.value {
                lo = Candidate { value: r, witness: Witness::Instant(t) };
            }
            if r > hi.value {
                hi = Candidate { value: r, witness: Witness::Instant(t) };
            }
        }
    }
    (lo, hi)
}

/// Fundamental-matrix table in coordinates where the norm is Euclidean,
/// optionally restricted to the column space of a frame.
#[derive(Debug, Clone)]
pub(crate) struct RateTable {
    times: Vec<f64>,
    y: Vec<DMatrix<f64>>,
    ydot: Option<Vec<DMatrix<f64>>>,
}

impl RateTable {
    pub fn new(p: &LinearProcess, nm: &NormSpec) -> Result<Self> {
        nm.check_dim(p.dim())?;
        let (root, _) = nm.whitening(p.dim());
        Ok(Self {
            times: p.timeset().points().to_vec(),
            y: p.fundamental().iter().map(|f| &root * f).collect(),
            ydot: p.derivative().map(|d| d.iter().map(|f| &root * f).collect()),
        })
    }

    /// Table acting on coefficient vectors of `frame`.
    pub fn restrict(&self, frame: &DMatrix<f64>) -> Self {
        Self {
            times: self.times.clone(),
            y: self.y.iter().map(|f| f * frame).collect(),
            ydot: self.ydot.as_ref().map(|d| d.iter().map(|f| f * frame).collect()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.y[0].ncols()
    }

    pub fn rates(&self, v: &DVector<f64>) -> Result<(Candidate, Candidate)> {
        let ys: Vec<DVector<f64>> = self.y.iter().map(|f| f * v).collect();
        let logs: Vec<f64> = ys.iter().map(|y| checked_ln(y.norm())).collect::<Result<_>>()?;
        if self.times.len() == 1 {
            let c = Candidate { value: f64::NAN, witness: Witness::Instant(self.times[0]) };
            return Ok((c, c));
        }
        let inst: Option<Vec<f64>> = self.ydot.as_ref().map(|d| {
            ys.iter()
                .zip(d)
                .map(|(y, fd)| y.dot(&(fd * v)) / y.norm_squared())
                .collect()
        });
        Ok(extremes(&self.times, &logs, inst.as_deref()))
    }

    pub fn lower(&self, v: &DVector<f64>) -> f64 {
        self.rates(v).map(|r| r.0.value).unwrap_or(f64::NAN)
    }

    pub fn upper(&self, v: &DVector<f64>) -> f64 {
        self.rates(v).map(|r| r.1.value).unwrap_or(f64::NAN)
    }
}

/// Directions used for the coarse search on the unit sphere of a
/// `k`-dimensional coefficient space.
pub(crate) fn coefficient_grid(k: usize, resolution: usize) -> Vec<DVector<f64>> {
    let r = resolution.max(4);
    match k {
        0 => Vec::new(),
        1 => hemisphere_coordinates(1, 1),
        2 => hemisphere_coordinates(2, r),
        3 => hemisphere_coordinates(3, 4 * r),
        _ => hemisphere_coordinates(k, k * r),
    }
}

/// Bracket half-width for refining from a grid of `count` points on the
/// unit sphere of `R^k` (hemisphere, antipodes identified).
pub(crate) fn bracket_for(k: usize, count: usize) -> f64 {
    let count = count.max(1) as f64;
    match k {
        0 | 1 => 0.0,
        2 => std::f64::consts::PI / count,
        3 => 2.0 * (2.0 * std::f64::consts::PI / count).sqrt(),
        _ => 0.5,
    }
}

/// Minimizes `g` on `[−h, h]` by golden-section search; returns `(a, g(a))`
/// for the best point seen, including `a = 0`.
pub(crate) fn golden_section<G: FnMut(f64) -> f64>(mut g: G, h: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = (0.0, g(0.0));
    let consider = |a: f64, v: f64, best: &mut (f64, f64)| {
        if v < best.1 {
            *best = (a, v);
        }
    };
    let (mut a, mut b) = (-h, h);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
            consider(d, fd, &mut best);
        }
    }
    best
}

/// Coordinate-wise golden-section descent of `g` on the unit sphere,
/// starting at unit vector `start` with bracket half-width `h0`.
pub(crate) fn refine_on_sphere<G: Fn(&DVector<f64>) -> f64>(
    g: G,
    start: DVector<f64>,
    start_value: f64,
    h0: f64,
) -> (DVector<f64>, f64) {
    let k = start.len();
    if k < 2 {
        return (start, start_value);
    }
    let mut c = start;
    let mut value = start_value;
    let mut h = h0;
    for _ in 0..REFINE_ROUNDS {
        for _ in 0..MAX_SWEEPS {
            let before = value;
            for l in 0..k - 1 {
                let frame = DMatrix::from_columns(&[c.clone()]);
                let tangent = complement_basis(&frame);
                let u = tangent.column(l).into_owned();
                let (a, v) = golden_section(|a| g(&(&c * a.cos() + &u * a.sin())), h);
                if v < value {
                    c = (&c * a.cos() + &u * a.sin()).normalize();
                    value = v;
                }
            }
            if k == 2 || !improved(before, value) {
                break;
            }
        }
        h /= REFINE_SHRINK;
    }
    (c, value)
}

/// Grid search plus local refinement of the lower and upper rates over the
/// unit sphere of the table's coefficient space. Returns
/// `((lower, coeffs), (upper, coeffs))`.
pub(crate) fn sphere_extremes(
    table: &RateTable,
    resolution: usize,
) -> Result<((Candidate, DVector<f64>), (Candidate, DVector<f64>))> {
    let k = table.input_dim();
    let grid = coefficient_grid(k, resolution);
    let mut best_lo: Option<(f64, usize)> = None;
    let mut best_hi: Option<(f64, usize)> = None;
    for (idx, c) in grid.iter().enumerate() {
        let (lo, hi) = table.rates(c)?;
        if best_lo.is_none_or(|(v, _)| lo.value < v) {
            best_lo = Some((lo.value, idx));
        }
        if best_hi.is_none_or(|(v, _)| hi.value > v) {
            best_hi = Some((hi.value, idx));
        }
    }
    let (lo_v, lo_i) = best_lo.expect("nonempty grid");
    let (hi_v, hi_i) = best_hi.expect("nonempty grid");
    let h0 = bracket_for(k, grid.len());
    let (c_lo, _) = refine_on_sphere(|c| table.lower(c), grid[lo_i].clone(), lo_v, h0);
    let (c_hi, _) = refine_on_sphere(|c| -table.upper(c), grid[hi_i].clone(), -hi_v, h0);
    let lo = table.rates(&c_lo)?.0;
    let hi = table.rates(&c_hi)?.1;
    Ok(((lo, c_lo), (hi, c_hi)))
}

/// `(|Φ(·, t_min) x|)′(t) / |Φ(t, t_min) x|` at a grid time of an interval process.
pub fn instantaneous_rate(p: &LinearProcess, nm: &NormSpec, x: &DVector<f64>, t: f64) -> Result<f64> {
    nm.check_dim(p.dim())?;
    check_vector(p.dim(), x)?;
    let d = p.derivative().ok_or(Error::RequiresIntervalTimeSet)?;
    let i = p.timeset().index_of(t).ok_or(Error::TimeNotInSet(t))?;
    let y = &p.fundamental()[i] * x;
    let ny = nm.eval(&y);
    if !(ny > NORM_FLOOR) {
        return Err(Error::NonpositiveNorm { value: ny });
    }
    let grad = nm.gradient(&y)?;
    Ok(grad.dot(&(&d[i] * x)) / ny)
}

fn check_vector(n: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    Ok(())
}

/// Lower and upper growth rates `μ̲`, `μ̄` of the direction `x`.
pub fn direction_rates(
    p: &LinearProcess,
    nm: &NormSpec,
    x: &DVector<f64>,
) -> Result<(RateResult, RateResult)> {
    check_vector(p.dim(), x)?;
    if p.timeset().len() == 1 {
        return Err(Error::InvalidTimeSet("growth rates need at least two time points".into()));
    }
    let table = RateTable::new(p, nm)?;
    let (lo, hi) = table.rates(x)?;
    let dir = nm.normalize(x);
    Ok((
        RateResult { value: lo.value, witness: Some(lo.witness), direction: Some(dir.clone()) },
        RateResult { value: hi.value, witness: Some(hi.witness), direction: Some(dir) },
    ))
}

/// Re-evaluates the rate named by a witness for the witness direction.
pub fn evaluate_witness(p: &LinearProcess, nm: &NormSpec, r: &RateResult) -> Result<f64> {
    let (Some(w), Some(x)) = (r.witness, r.direction.as_ref()) else {
        return Err(Error::InvalidArgument("rate result carries no witness".into()));
    };
    match w {
        Witness::Instant(t) => instantaneous_rate(p, nm, x, t),
        Witness::Pair(pair) => {
            let values: Vec<f64> = p.fundamental().iter().map(|f| nm.eval(&(f * x))).collect();
            log_diff_quotient(p.timeset(), &values, pair)
        }
    }
}

/// Growth rates of the difference between two solutions, given their
/// trajectories on the process time set.
pub(crate) fn difference_rates(
    phi: &NonlinearProcess,
    nm: &NormSpec,
    a: &Trajectory,
    b: &Trajectory,
) -> Result<(Candidate, Candidate)> {
    let times = &a.times;
    let mut logs = Vec::with_capacity(times.len());
    let mut diffs = Vec::with_capacity(times.len());
    for (i, (xa, xb)) in a.states.iter().zip(&b.states).enumerate() {
        let d = xa - xb;
        let nd = nm.eval(&d);
        if !(nd > NORM_FLOOR) {
            return Err(Error::TrajectoryCollision { t: times[i] });
        }
        logs.push(nd.ln());
        diffs.push(d);
    }
    let inst: Option<Vec<f64>> = phi.timeset().has_limit_points().then(|| {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let dd = phi.system().rhs(t, &a.states[i]) - phi.system().rhs(t, &b.states[i]);
                nm.log_derivative(&diffs[i], &dd)
            })
            .collect()
    });
    Ok(extremes(times, &logs, inst.as_deref()))
}

/// `μ̲`, `μ̄` of the difference `φ(·, t_min, x) − φ(·, t_min, reference)`.
pub fn direction_rates_nonlinear(
    phi: &NonlinearProcess,
    nm: &NormSpec,
    x: &DVector<f64>,
    reference: &DVector<f64>,
) -> Result<(RateResult, RateResult)> {
    nm.check_dim(phi.dim())?;
    if phi.timeset().len() == 1 {
        return Err(Error::InvalidTimeSet("growth rates need at least two time points".into()));
    }
    let a = phi.trajectory(x)?;
    let b = phi.trajectory(reference)?;
    let (lo, hi) = difference_rates(phi, nm, &a, &b)?;
    let dir = nm.normalize(&(x - reference));
    Ok((
        RateResult { value: lo.value, witness: Some(lo.witness), direction: Some(dir.clone()) },
        RateResult { value: hi.value, witness: Some(hi.witness), direction: Some(dir) },
    ))
}

/// Lower and upper growth rates `lgr(X)`, `ugr(X)` of a subspace.
pub fn subspace_growth_rates(
    p: &LinearProcess,
    nm: &NormSpec,
    x: &Subspace,
    resolution: usize,
) -> Result<(RateResult, RateResult)> {
    if x.ambient_dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: x.ambient_dim() });
    }
    if x.dim() == 0 {
        return Ok((RateResult::bare(f64::INFINITY), RateResult::bare(f64::NEG_INFINITY)));
    }
    if p.timeset().len() == 1 {
        return Err(Error::InvalidTimeSet("growth rates need at least two time points".into()));
    }
    let table = RateTable::new(p, nm)?.restrict(x.frame());
    let ((lo, c_lo), (hi, c_hi)) = sphere_extremes(&table, resolution)?;
    let dir = |c: &DVector<f64>| nm.normalize(&(x.frame() * c));
    Ok((
        RateResult { value: lo.value, witness: Some(lo.witness), direction: Some(dir(&c_lo)) },
        RateResult { value: hi.value, witness: Some(hi.witness), direction: Some(dir(&c_hi)) },
    ))
}
