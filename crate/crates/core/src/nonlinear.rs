//! Cones, domains of attraction/repulsion and related radii around a
//! reference trajectory of a nonlinear process.
//!
//! All states passed in are initial states at `t_min`; the reference
//! trajectory starts at `reference` and trajectory differences are measured
//! against it.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{hemisphere_coordinates, NormSpec, Subspace};
use crate::process::{linearize, LinearProcess, NonlinearProcess, SystemSpec, Trajectory};
use crate::rates::{difference_rates, RateTable};
use crate::spectral::compute_spectrum;
use crate::timeset::TimeSet;

/// Dead zone around 0 for sign classification of rates.
pub const MARGIN_TOL: f64 = 1e-6;

/// Number of radii re-tested below a bisected radius.
pub const VERIFY_RADII: usize = 16;

/// Halvings of `r_max` tried before a radius is declared 0.
pub const MIN_RADIUS_HALVINGS: i32 = 10;

const SHELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeLabel {
    Stable,
    Unstable,
    Neither,
}

impl ConeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConeLabel::Stable => "stable",
            ConeLabel::Unstable => "unstable",
            ConeLabel::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainLabel {
    Attracted,
    Repelled,
    Neither,
}

impl DomainLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainLabel::Attracted => "attracted",
            DomainLabel::Repelled => "repelled",
            DomainLabel::Neither => "neither",
        }
    }
}

fn cone_label(lgr: f64, ugr: f64) -> ConeLabel {
    if ugr < -MARGIN_TOL {
        ConeLabel::Stable
    } else if lgr > MARGIN_TOL {
        ConeLabel::Unstable
    } else {
        ConeLabel::Neither
    }
}

fn domain_label(mu_lower: f64, mu_upper: f64) -> DomainLabel {
    if mu_upper < -MARGIN_TOL {
        DomainLabel::Attracted
    } else if mu_lower > MARGIN_TOL {
        DomainLabel::Repelled
    } else {
        DomainLabel::Neither
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionClass {
    pub direction: DVector<f64>,
    pub label: ConeLabel,
    pub lgr: f64,
    pub ugr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeClassification {
    pub directions: Vec<DirectionClass>,
    /// Angle of each direction in `[0, π)` for planar systems.
    pub angles: Option<Vec<f64>>,
    /// Stable direction with the most negative `ugr`.
    pub best_stable: Option<usize>,
    /// Unstable direction with the most positive `lgr`.
    pub best_unstable: Option<usize>,
    /// Planar systems: whether the stable directions form one arc of lines.
    pub stable_arc_contiguous: Option<bool>,
}

impl ConeClassification {
    pub fn count(&self, label: ConeLabel) -> usize {
        self.directions.iter().filter(|d| d.label == label).count()
    }

    /// Boundary angles of the arcs of lines with the given label, as
    /// midpoints between the last labeled and first unlabeled grid angle
    /// (planar sweeps only). An arc may wrap through `π ≡ 0`.
    pub fn arc_boundaries(&self, label: ConeLabel) -> Vec<(f64, f64)> {
        let Some(angles) = &self.angles else { return Vec::new() };
        let m = angles.len();
        let step = std::f64::consts::PI / m as f64;
        let is = |i: usize| self.directions[i % m].label == label;
        if (0..m).all(is) || !(0..m).any(is) {
            return Vec::new();
        }
        let mut out = Vec::new();
        for i in 0..m {
            if is(i) && !is(i + m - 1) {
                let mut j = i;
                while is(j + 1) {
                    j += 1;
                }
                let start = angles[i] - 0.5 * step;
                let end = (angles[j % m] + 0.5 * step).rem_euclid(std::f64::consts::PI);
                out.push((start.rem_euclid(std::f64::consts::PI), end));
            }
        }
        out
    }
}

/// Cone label of a direction under a linear process.
pub fn classify_direction(p: &LinearProcess, nm: &NormSpec, x: &DVector<f64>) -> Result<DirectionClass> {
    let (lo, hi) = crate::rates::direction_rates(p, nm, x)?;
    Ok(DirectionClass {
        direction: nm.normalize(x),
        label: cone_label(lo.value, hi.value),
        lgr: lo.value,
        ugr: hi.value,
    })
}

/// Unit directions representing `Gr(1, Rⁿ)` for sweeps.
fn line_directions(n: usize, resolution: usize) -> Vec<DVector<f64>> {
    let r = resolution.max(2);
    match n {
        1 => vec![DVector::from_element(1, 1.0)],
        2 => hemisphere_coordinates(2, r),
        _ => hemisphere_coordinates(n, r),
    }
}

/// Unit directions covering the whole sphere (both signs).
fn sphere_directions(n: usize, resolution: usize) -> Vec<DVector<f64>> {
    line_directions(n, resolution)
        .into_iter()
        .flat_map(|d| [d.clone(), -d])
        .collect()
}

/// Classifies a grid of lines; for planar systems also checks that the
/// stable set is one open arc.
pub fn cone_sweep(p: &LinearProcess, nm: &NormSpec, resolution: usize) -> Result<ConeClassification> {
    let n = p.dim();
    let table = RateTable::new(p, nm)?;
    let dirs = line_directions(n, resolution);
    let directions: Vec<DirectionClass> = dirs
        .par_iter()
        .map(|d| {
            let (lo, hi) = table.rates(d)?;
            Ok(DirectionClass {
                direction: nm.normalize(d),
                label: cone_label(lo.value, hi.value),
                lgr: lo.value,
                ugr: hi.value,
            })
        })
        .collect::<Result<_>>()?;
    let mut best_stable: Option<usize> = None;
    let mut best_unstable: Option<usize> = None;
    for (i, d) in directions.iter().enumerate() {
        if d.label == ConeLabel::Stable && best_stable.is_none_or(|b| d.ugr < directions[b].ugr) {
            best_stable = Some(i);
        }
        if d.label == ConeLabel::Unstable && best_unstable.is_none_or(|b| d.lgr > directions[b].lgr) {
            best_unstable = Some(i);
        }
    }
    let angles = (n == 2).then(|| dirs.iter().map(|d| d[1].atan2(d[0]).rem_euclid(std::f64::consts::PI)).collect::<Vec<f64>>());
    let mut out = ConeClassification {
        directions,
        angles,
        best_stable,
        best_unstable,
        stable_arc_contiguous: None,
    };
    if n == 2 {
        let arcs = out.arc_boundaries(ConeLabel::Stable).len();
        let all = out.count(ConeLabel::Stable) == out.directions.len();
        out.stable_arc_contiguous = Some(arcs <= 1 || all);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainPoint {
    pub state: DVector<f64>,
    pub label: DomainLabel,
    pub mu_lower: f64,
    pub mu_upper: f64,
}

/// Attraction/repulsion label of `x` relative to the reference solution.
pub fn domain_membership(
    phi: &NonlinearProcess,
    nm: &NormSpec,
    reference: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DomainPoint> {
    let reference_traj = phi.trajectory(reference)?;
    membership_with(phi, nm, &reference_traj, x)
}

fn membership_with(
    phi: &NonlinearProcess,
    nm: &NormSpec,
    reference: &Trajectory,
    x: &DVector<f64>,
) -> Result<DomainPoint> {
    nm.check_dim(phi.dim())?;
    if phi.timeset().len() < 2 {
        return Err(Error::InvalidTimeSet("growth rates need at least two time points".into()));
    }
    let traj = phi.trajectory(x)?;
    let (lo, hi) = difference_rates(phi, nm, &traj, reference)?;
    Ok(DomainPoint {
        state: x.clone(),
        label: domain_label(lo.value, hi.value),
        mu_lower: lo.value,
        mu_upper: hi.value,
    })
}

/// Labels for a list of states; per-point failures are kept in place.
pub fn domain_classification(
    phi: &NonlinearProcess,
    nm: &NormSpec,
    reference: &DVector<f64>,
    points: &[DVector<f64>],
) -> Result<Vec<Result<DomainPoint>>> {
    let reference_traj = phi.trajectory(reference)?;
    Ok(points
        .par_iter()
        .map(|x| membership_with(phi, nm, &reference_traj, x))
        .collect())
}

/// Largest `r ≤ r_max` such that `ok` holds on `(0, r]`, by bisection under a
/// monotonicity assumption, followed by a re-test of [`VERIFY_RADII`] radii.
fn largest_good_radius(ok: impl Fn(f64) -> bool, r_max: f64, tol: f64) -> f64 {
    let r_min = r_max * 2f64.powi(-MIN_RADIUS_HALVINGS);
    if !ok(r_min) {
        return 0.0;
    }
    let mut r = if ok(r_max) {
        r_max
    } else {
        let (mut lo, mut hi) = (r_min, r_max);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let probes: Vec<f64> = (1..=VERIFY_RADII).map(|i| r * i as f64 / VERIFY_RADII as f64).collect();
    if let Some(first_bad) = probes.iter().position(|&q| !ok(q)) {
        r = if first_bad == 0 { 0.0 } else { probes[first_bad - 1] };
    }
    r
}

/// Which domain a cone radius refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSide {
    /// `η`: stable direction, attraction.
    Stable,
    /// `η̂`: unstable direction, repulsion.
    Unstable,
}

/// Radius along the line `X` (both signs) within which initial states are
/// attracted (`Stable`) or repelled (`Unstable`).
#[allow(clippy::too_many_arguments)]
pub fn cone_radius(
    phi: &NonlinearProcess,
    p: &LinearProcess,
    nm: &NormSpec,
    reference: &DVector<f64>,
    x: &Subspace,
    side: ConeSide,
    r_max: f64,
    tol: f64,
) -> Result<f64> {
    if x.dim() != 1 {
        return Err(Error::InvalidArgument("cone radius needs a one-dimensional subspace".into()));
    }
    if !(r_max > 0.0 && tol > 0.0) {
        return Err(Error::InvalidArgument("r_max and tolerance must be positive".into()));
    }
    let u = nm.normalize(&x.frame().column(0).into_owned());
    let class = classify_direction(p, nm, &u)?;
    let (want_cone, want_domain) = match side {
        ConeSide::Stable => (ConeLabel::Stable, DomainLabel::Attracted),
        ConeSide::Unstable => (ConeLabel::Unstable, DomainLabel::Repelled),
    };
    if class.label != want_cone {
        return Err(Error::InvalidArgument(format!(
            "direction is {} under the linearization, not {}",
            class.label.as_str(),
            want_cone.as_str()
        )));
    }
    let reference_traj = phi.trajectory(reference)?;
    let ok = |r: f64| {
        [1.0, -1.0].iter().all(|s| {
            matches!(
                membership_with(phi, nm, &reference_traj, &(reference + &u * (s * r))),
                Ok(DomainPoint { label, .. }) if label == want_domain
            )
        })
    };
    Ok(largest_good_radius(ok, r_max, tol))
}

pub fn cone_radius_eta(
    phi: &NonlinearProcess,
    p: &LinearProcess,
    nm: &NormSpec,
    reference: &DVector<f64>,
    x: &Subspace,
    r_max: f64,
    tol: f64,
) -> Result<f64> {
    cone_radius(phi, p, nm, reference, x, ConeSide::Stable, r_max, tol)
}

pub fn cone_radius_eta_hat(
    phi: &NonlinearProcess,
    p: &LinearProcess,
    nm: &NormSpec,
    reference: &DVector<f64>,
    y: &Subspace,
    r_max: f64,
    tol: f64,
) -> Result<f64> {
    cone_radius(phi, p, nm, reference, y, ConeSide::Unstable, r_max, tol)
}

/// Sampled `m(η)`: the largest rate deviation between the nonlinear
/// differences and the linearization over 8 radial shells of the ball of
/// radius `η` (a lower bound of the supremum).
pub fn nonlinearity_measure(
    phi: &NonlinearProcess,
    p: &LinearProcess,
    nm: &NormSpec,
    reference: &DVector<f64>,
    eta: f64,
    samples: usize,
) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be nonnegative (got {eta})")));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let n = phi.dim();
    if p.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
    }
    let table = RateTable::new(p, nm)?;
    let reference_traj = phi.trajectory(reference)?;
    let dirs: Vec<DVector<f64>> = sphere_directions(n, samples).iter().map(|d| nm.normalize(d)).collect();
    let linear: Vec<(f64, f64)> = dirs
        .iter()
        .map(|d| table.rates(d).map(|(lo, hi)| (lo.value, hi.value)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (1..=SHELLS).flat_map(|s| (0..dirs.len()).map(move |d| (s, d))).collect();
    let devs: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, d)| {
            let r = eta * s as f64 / SHELLS as f64;
            let pt = membership_with(phi, nm, &reference_traj, &(reference + &dirs[d] * r))?;
            let (lo, hi) = linear[d];
            Ok((pt.mu_lower - lo).abs().max((pt.mu_upper - hi).abs()))
        })
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractionVerdict {
    Attractive,
    Repulsive,
    HyperbolicSaddle,
    NotHyperbolic,
}

impl AttractionVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttractionVerdict::Attractive => "attractive",
            AttractionVerdict::Repulsive => "repulsive",
            AttractionVerdict::HyperbolicSaddle => "hyperbolic-saddle",
            AttractionVerdict::NotHyperbolic => "not-hyperbolic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    pub verdict: AttractionVerdict,
    /// Radius of the sampled ball found attracted/repelled; 0 for saddles.
    pub radius: f64,
    pub emd_k: Option<usize>,
}

/// Linearizes at `x0`, classifies the linearization and, when it is
/// attractive or repulsive, bisects the radius of a ball around `x0` whose
/// sampled boundary is attracted/repelled.
pub fn linearized_attraction_test(
    sys: &SystemSpec,
    ts: &TimeSet,
    x0: &DVector<f64>,
    search_radius: f64,
    step: Option<f64>,
    resolution: usize,
) -> Result<AttractionReport> {
    if !(search_radius > 0.0) {
        return Err(Error::InvalidArgument("search radius must be positive".into()));
    }
    let p = linearize(sys, ts, x0, step)?;
    let nm = NormSpec::Euclidean;
    let s = compute_spectrum(&p, &nm, resolution)?;
    let n = sys.dim();
    let (verdict, want) = match (s.hyperbolic, s.emd_k) {
        (true, Some(k)) if k == n => (AttractionVerdict::Attractive, DomainLabel::Attracted),
        (true, Some(0)) => (AttractionVerdict::Repulsive, DomainLabel::Repelled),
        (true, Some(k)) => {
            return Ok(AttractionReport { verdict: AttractionVerdict::HyperbolicSaddle, radius: 0.0, emd_k: Some(k) })
        }
        _ => return Ok(AttractionReport { verdict: AttractionVerdict::NotHyperbolic, radius: 0.0, emd_k: None }),
    };
    let phi = NonlinearProcess::new(sys.clone(), ts.clone(), step)?;
    let reference_traj = phi.trajectory(x0)?;
    let dirs = sphere_directions(n, 16);
    let ok = |r: f64| {
        dirs.iter().all(|d| {
            matches!(
                membership_with(&phi, &nm, &reference_traj, &(x0 + d * r)),
                Ok(DomainPoint { label, .. }) if label == want
            )
        })
    };
    let radius = largest_good_radius(ok, search_radius, search_radius * 1e-4);
    Ok(AttractionReport { verdict, radius, emd_k: s.emd_k })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberEntry {
    /// Direction at `t_min`.
    pub direction: DVector<f64>,
    /// Its image direction in the fiber at `t`.
    pub fiber_direction: DVector<f64>,
    pub stable: bool,
    /// Largest probed radius whose backward image is attracted; 0 if none.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberReport {
    pub t: f64,
    pub entries: Vec<FiberEntry>,
}

impl FiberReport {
    /// Whether every stable fiber direction found a positive radius.
    pub fn all_positive(&self) -> bool {
        self.entries.iter().filter(|e| e.stable).all(|e| e.radius > 0.0)
    }
}

/// Probes the extended stable cone at time `t`: for each stable direction
/// `x`, with `y = Φ(t, t_min)x / |·|`, finds the largest `r = r_probe·2⁻ʲ`
/// such that `φ(t_min, t, ref(t) + r y)` is attracted.
#[allow(clippy::too_many_arguments)]
pub fn extension_fiber_check(
    phi: &NonlinearProcess,
    p: &LinearProcess,
    nm: &NormSpec,
    reference: &DVector<f64>,
    t: f64,
    directions: &[DVector<f64>],
    r_probe: f64,
    probes: usize,
) -> Result<FiberReport> {
    let t0 = p.timeset().t_min();
    let fwd: DMatrix<f64> = p.evaluate(t, t0)?;
    let reference_traj = phi.trajectory(reference)?;
    let ref_t = phi.flow(t, t0, reference)?;
    let entries: Vec<FiberEntry> = directions
        .par_iter()
        .map(|x| {
            let class = classify_direction(p, nm, x)?;
            let y = nm.normalize(&(&fwd * x));
            let stable = class.label == ConeLabel::Stable;
            let mut radius = 0.0;
            if stable {
                for j in 0..probes.max(1) {
                    let r = r_probe * 2f64.powi(-(j as i32));
                    let ok = [1.0, -1.0].iter().all(|s| {
                        let Ok(start) = phi.flow(t0, t, &(&ref_t + &y * (s * r))) else { return false };
                        matches!(
                            membership_with(phi, nm, &reference_traj, &start),
                            Ok(DomainPoint { label: DomainLabel::Attracted, .. })
                        )
                    });
                    if ok {
                        radius = r;
                        break;
                    }
                }
            }
            Ok(FiberEntry { direction: class.direction, fiber_direction: y, stable, radius })
        })
        .collect::<Result<_>>()?;
    Ok(FiberReport { t, entries })
}
