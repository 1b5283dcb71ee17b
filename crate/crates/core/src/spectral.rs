//! Extremal growth rates, the dichotomy spectrum and derived radii.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    complement_basis, complementarity_margin, grassmann_grid, rotate_frame, NormSpec, Subspace,
    DEFAULT_GRID_SEED,
};
use crate::process::LinearProcess;
use crate::rates::{bracket_for, golden_section, improved, MAX_SWEEPS, sphere_extremes, subspace_growth_rates, RateTable, REFINE_ROUNDS, REFINE_SHRINK};
use crate::timeset::TimeSet;

/// Spectral endpoints closer than this are merged; hyperbolicity needs a
/// resolvent-gap margin above it.
pub const MERGE_TOLERANCE: f64 = 1e-6;

/// Smallest singular value of a combined frame accepted as complementary.
pub const COMPLEMENTARITY_TOLERANCE: f64 = 1e-8;

/// Inner (direction) resolution cap used while optimizing over subspaces.
pub const INNER_RESOLUTION: usize = 64;

const REFINED_CANDIDATES: usize = 3;
const KEPT_CANDIDATES: usize = 8;

/// `elgr_k` and `eugr_k` for `k = 0..=n`, with extremal subspaces.
#[derive(Debug, Clone)]
pub struct ExtremalRates {
    pub elgr: Vec<f64>,
    pub eugr: Vec<f64>,
    /// Subspace realizing `elgr_k`.
    pub argmax_subspace: Vec<Subspace>,
    /// Subspace realizing `eugr_k`.
    pub argmin_subspace: Vec<Subspace>,
    pub certified: bool,
    pub resolution: usize,
    /// Best subspaces by `lgr`, descending, per `k`.
    pub lower_candidates: Vec<Vec<(f64, Subspace)>>,
    /// Best subspaces by `ugr`, ascending, per `k`.
    pub upper_candidates: Vec<Vec<(f64, Subspace)>>,
}

impl ExtremalRates {
    pub fn dim(&self) -> usize {
        self.elgr.len() - 1
    }

    /// `elgr_n, eugr_1, elgr_{n−1}, eugr_2, …, elgr_1, eugr_n`.
    pub fn chain(&self) -> Vec<f64> {
        let n = self.dim();
        (1..=n).flat_map(|j| [self.elgr[n - j + 1], self.eugr[j]]).collect()
    }

    /// Largest violation of the ordering chain (0 when it holds exactly).
    pub fn chain_violation(&self) -> f64 {
        let c = self.chain();
        c.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    /// Rates of `Φ_γ` given those of `Φ`: every finite rate moves by `−γ`.
    pub fn shifted(&self, gamma: f64) -> ExtremalRates {
        let mv = |v: &Vec<f64>| v.iter().map(|x| if x.is_finite() { x - gamma } else { *x }).collect();
        let mvc = |v: &Vec<Vec<(f64, Subspace)>>| {
            v.iter()
                .map(|c| c.iter().map(|(x, s)| (x - gamma, s.clone())).collect())
                .collect()
        };
        ExtremalRates {
            elgr: mv(&self.elgr),
            eugr: mv(&self.eugr),
            argmax_subspace: self.argmax_subspace.clone(),
            argmin_subspace: self.argmin_subspace.clone(),
            certified: self.certified,
            resolution: self.resolution,
            lower_candidates: mvc(&self.lower_candidates),
            upper_candidates: mvc(&self.upper_candidates),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDiagnostics {
    /// Intervals assembled without merging nearby endpoints.
    pub raw_intervals: Vec<[f64; 2]>,
    pub merge_tolerance: f64,
    pub complementarity_margin: Option<f64>,
    pub complementarity_failure: bool,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub extremal: ExtremalRates,
    pub intervals: Vec<[f64; 2]>,
    /// Open gaps `(eugr_{i_k}, elgr_{n−i_k})`; the outer ones are unbounded.
    pub resolvent_gaps: Vec<(f64, f64)>,
    pub hyperbolic: bool,
    pub emd_k: Option<usize>,
    /// `(image, kernel)` of an EMD projection.
    pub emd_projection: Option<(Subspace, Subspace)>,
    /// Distance from 0 to the spectrum; 0 when not hyperbolic.
    pub radius: f64,
    pub diagnostics: SpectrumDiagnostics,
}

impl SpectrumResult {
    pub fn is_attractive(&self) -> bool {
        self.hyperbolic && self.emd_k == Some(self.extremal.dim())
    }

    pub fn is_repulsive(&self) -> bool {
        self.hyperbolic && self.emd_k == Some(0)
    }
}

/// Outcome of the dichotomy test.
#[derive(Debug, Clone)]
pub struct EmdVerdict {
    pub hyperbolic: bool,
    pub k: Option<usize>,
    pub projection: Option<(Subspace, Subspace)>,
    pub margin: Option<f64>,
}

fn frame_rates(table: &RateTable, frame: &DMatrix<f64>, inner: usize) -> Result<(f64, f64)> {
    let sub = table.restrict(frame);
    let ((lo, _), (hi, _)) = sphere_extremes(&sub, inner)?;
    Ok((lo.value, hi.value))
}

/// Coordinate-wise golden-section search over `Gr(k, n)` using plane
/// rotations of one frame vector toward one complement vector at a time.
fn refine_subspace(
    table: &RateTable,
    start: &Subspace,
    start_value: f64,
    objective: impl Fn(f64, f64) -> f64,
    h0: f64,
    inner: usize,
) -> (Subspace, f64) {
    let (n, k) = (start.ambient_dim(), start.dim());
    let mut frame = start.frame().clone();
    let mut value = start_value;
    let g = |f: &DMatrix<f64>| match frame_rates(table, f, inner) {
        Ok((lo, hi)) => {
            let v = objective(lo, hi);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        }
        Err(_) => f64::INFINITY,
    };
    let mut h = h0;
    for _ in 0..REFINE_ROUNDS {
        for _ in 0..MAX_SWEEPS {
            let before = value;
            for j in 0..k {
                for l in 0..n - k {
                    let comp = complement_basis(&frame);
                    if l >= comp.ncols() {
                        continue;
                    }
                    let u: DVector<f64> = comp.column(l).into_owned();
                    let (a, v) = golden_section(|a| g(&rotate_frame(&frame, j, &u, a)), h);
                    if v < value {
                        frame = rotate_frame(&frame, j, &u, a);
                        value = v;
                    }
                }
            }
            if k * (n - k) == 1 || !improved(before, value) {
                break;
            }
        }
        h /= REFINE_SHRINK;
    }
    let sub = Subspace::from_matrix(&frame).unwrap_or_else(|_| start.clone());
    (sub, value)
}

/// Extremal growth rates with the default grid seed.
pub fn extremal_growth_rates(p: &LinearProcess, nm: &NormSpec, resolution: usize) -> Result<ExtremalRates> {
    extremal_growth_rates_seeded(p, nm, resolution, DEFAULT_GRID_SEED)
}

/// Max of `lgr` and min of `ugr` over `Gr(k, Rⁿ)` for every `k`: grid search
/// followed by local refinement of the best few grid members.
pub fn extremal_growth_rates_seeded(
    p: &LinearProcess,
    nm: &NormSpec,
    resolution: usize,
    seed: u64,
) -> Result<ExtremalRates> {
    if p.timeset().len() < 2 {
        return Err(Error::InvalidTimeSet("growth rates need at least two time points".into()));
    }
    let n = p.dim();
    let table = RateTable::new(p, nm)?;
    let resolution = resolution.max(4);
    let inner = resolution.min(INNER_RESOLUTION);

    let mut elgr = vec![f64::INFINITY; n + 1];
    let mut eugr = vec![f64::NEG_INFINITY; n + 1];
    let mut argmax = vec![Subspace::zero(n); n + 1];
    let mut argmin = vec![Subspace::zero(n); n + 1];
    let mut lower_candidates = vec![vec![(f64::INFINITY, Subspace::zero(n))]; n + 1];
    let mut upper_candidates = vec![vec![(f64::NEG_INFINITY, Subspace::zero(n))]; n + 1];
    let mut certified = true;

    for k in 1..=n {
        let grid = grassmann_grid(k, n, resolution, seed.wrapping_add(k as u64))?;
        certified &= grid.certified;
        // Lines of R^n (and their complements) are indexed by the sphere of R^n.
        let h0 = bracket_for(if n <= 3 { n } else { 4 }, grid.members.len());
        let scored: Vec<(f64, f64)> = grid
            .members
            .par_iter()
            .map(|x| frame_rates(&table, x.frame(), inner))
            .collect::<Result<_>>()?;

        let mut by_lower: Vec<usize> = (0..scored.len()).collect();
        by_lower.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b)));
        let mut by_upper: Vec<usize> = (0..scored.len()).collect();
        by_upper.sort_by(|&a, &b| scored[a].1.total_cmp(&scored[b].1).then(a.cmp(&b)));

        let refine = k < n;
        let pick = if refine { REFINED_CANDIDATES } else { 1 };
        let lower_starts: Vec<usize> = by_lower.iter().copied().take(pick).collect();
        let upper_starts: Vec<usize> = by_upper.iter().copied().take(pick).collect();

        let refined_lower: Vec<(f64, Subspace)> = lower_starts
            .par_iter()
            .map(|&i| {
                let x = &grid.members[i];
                if !refine {
                    return (scored[i].0, x.clone());
                }
                let (s, v) = refine_subspace(&table, x, -scored[i].0, |lo, _| -lo, h0, inner);
                (-v, s)
            })
            .collect();
        let refined_upper: Vec<(f64, Subspace)> = upper_starts
            .par_iter()
            .map(|&i| {
                let x = &grid.members[i];
                if !refine {
                    return (scored[i].1, x.clone());
                }
                let (s, v) = refine_subspace(&table, x, scored[i].1, |_, hi| hi, h0, inner);
                (v, s)
            })
            .collect();

        let mut lows = refined_lower;
        lows.extend(
            by_lower.iter().skip(pick).take(KEPT_CANDIDATES).map(|&i| (scored[i].0, grid.members[i].clone())),
        );
        lows.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut ups = refined_upper;
        ups.extend(
            by_upper.iter().skip(pick).take(KEPT_CANDIDATES).map(|&i| (scored[i].1, grid.members[i].clone())),
        );
        ups.sort_by(|a, b| a.0.total_cmp(&b.0));

        elgr[k] = lows[0].0;
        argmax[k] = lows[0].1.clone();
        eugr[k] = ups[0].0;
        argmin[k] = ups[0].1.clone();
        lower_candidates[k] = lows;
        upper_candidates[k] = ups;
    }

    Ok(ExtremalRates {
        elgr,
        eugr,
        argmax_subspace: argmax,
        argmin_subspace: argmin,
        certified,
        resolution,
        lower_candidates,
        upper_candidates,
    })
}

/// Dichotomy verdict from precomputed extremal rates.
pub fn emd_from_extremal(e: &ExtremalRates) -> Result<EmdVerdict> {
    let n = e.dim();
    let Some(k) = (0..=n).find(|&k| e.eugr[k] < -MERGE_TOLERANCE && e.elgr[n - k] > MERGE_TOLERANCE) else {
        return Ok(EmdVerdict { hyperbolic: false, k: None, projection: None, margin: None });
    };
    let images: Vec<&Subspace> = std::iter::once(&e.argmin_subspace[k])
        .chain(e.upper_candidates[k].iter().filter(|(v, _)| *v < -MERGE_TOLERANCE).map(|(_, s)| s))
        .collect();
    let kernels: Vec<&Subspace> = std::iter::once(&e.argmax_subspace[n - k])
        .chain(e.lower_candidates[n - k].iter().filter(|(v, _)| *v > MERGE_TOLERANCE).map(|(_, s)| s))
        .collect();
    for im in &images {
        for ker in &kernels {
            let m = complementarity_margin(im, ker);
            if m > COMPLEMENTARITY_TOLERANCE {
                return Ok(EmdVerdict {
                    hyperbolic: true,
                    k: Some(k),
                    projection: Some(((*im).clone(), (*ker).clone())),
                    margin: Some(m),
                });
            }
        }
    }
    Err(Error::ComplementarityFailure { k })
}

/// Tests for an exponential monotonicity dichotomy.
pub fn emd_check(p: &LinearProcess, nm: &NormSpec, resolution: usize) -> Result<EmdVerdict> {
    emd_from_extremal(&extremal_growth_rates(p, nm, resolution)?)
}

/// Spectral intervals and resolvent gaps for a given membership rule of the
/// index set `{j : eugr_j < elgr_{n−j}}`.
fn assemble_intervals(e: &ExtremalRates, tol: f64) -> (Vec<[f64; 2]>, Vec<(f64, f64)>) {
    let n = e.dim();
    let idx: Vec<usize> = (0..=n)
        .filter(|&j| j == 0 || j == n || e.eugr[j] + tol < e.elgr[n - j])
        .collect();
    let mut intervals = Vec::with_capacity(idx.len() - 1);
    for w in idx.windows(2) {
        let a = e.elgr[n - w[0]];
        let b = e.eugr[w[1]];
        intervals.push([a.min(b), a.max(b)]);
    }
    let gaps = idx.iter().map(|&j| (e.eugr[j], e.elgr[n - j])).collect();
    (intervals, gaps)
}

/// Assembles the dichotomy spectrum from extremal rates.
pub fn spectrum_from_extremal(extremal: ExtremalRates) -> SpectrumResult {
    let (raw_intervals, _) = assemble_intervals(&extremal, 0.0);
    let (intervals, resolvent_gaps) = assemble_intervals(&extremal, MERGE_TOLERANCE);
    let (verdict, failure) = match emd_from_extremal(&extremal) {
        Ok(v) => (v, false),
        Err(Error::ComplementarityFailure { k }) => (
            EmdVerdict { hyperbolic: true, k: Some(k), projection: None, margin: None },
            true,
        ),
        Err(_) => unreachable!("emd_from_extremal only fails on complementarity"),
    };
    let radius = if verdict.hyperbolic { distance_to_intervals(0.0, &intervals) } else { 0.0 };
    SpectrumResult {
        extremal,
        intervals,
        resolvent_gaps,
        hyperbolic: verdict.hyperbolic,
        emd_k: verdict.k,
        emd_projection: verdict.projection,
        radius,
        diagnostics: SpectrumDiagnostics {
            raw_intervals,
            merge_tolerance: MERGE_TOLERANCE,
            complementarity_margin: verdict.margin,
            complementarity_failure: failure,
        },
    }
}

/// The finite-time dichotomy spectrum `Σ_𝕀(Φ)`.
pub fn compute_spectrum(p: &LinearProcess, nm: &NormSpec, resolution: usize) -> Result<SpectrumResult> {
    Ok(spectrum_from_extremal(extremal_growth_rates(p, nm, resolution)?))
}

pub fn compute_spectrum_seeded(
    p: &LinearProcess,
    nm: &NormSpec,
    resolution: usize,
    seed: u64,
) -> Result<SpectrumResult> {
    Ok(spectrum_from_extremal(extremal_growth_rates_seeded(p, nm, resolution, seed)?))
}

fn distance_to_intervals(x: f64, intervals: &[[f64; 2]]) -> f64 {
    intervals
        .iter()
        .map(|&[a, b]| if x < a { a - x } else if x > b { x - b } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

/// Signed position of the spectral point nearest to 0.
pub fn nearest_spectral_point(s: &SpectrumResult) -> f64 {
    let mut best = f64::NAN;
    let mut dist = f64::INFINITY;
    for &[a, b] in &s.intervals {
        let p = 0f64.clamp(a, b);
        if p.abs() < dist {
            dist = p.abs();
            best = p;
        }
    }
    best
}

/// `dist(0, Σ)` for a hyperbolic process.
pub fn hyperbolicity_radius(s: &SpectrumResult) -> Result<f64> {
    if !s.hyperbolic {
        return Err(Error::NotHyperbolic);
    }
    Ok(s.radius)
}

/// `min(−eugr_k, elgr_{n−k})`: any process within this `d̃` distance keeps
/// the dichotomy with the same rank.
pub fn robustness_certificate(s: &SpectrumResult) -> Result<f64> {
    let (true, Some(k)) = (s.hyperbolic, s.emd_k) else {
        return Err(Error::NotHyperbolic);
    };
    let n = s.extremal.dim();
    Ok((-s.extremal.eugr[k]).min(s.extremal.elgr[n - k]))
}

/// `−ugr(Rⁿ, Φ)` for an attractive process.
pub fn stability_radius(p: &LinearProcess, nm: &NormSpec, resolution: usize) -> Result<f64> {
    let (_, ugr) = subspace_growth_rates(p, nm, &Subspace::full(p.dim()), resolution)?;
    if ugr.value < -MERGE_TOLERANCE {
        Ok(-ugr.value)
    } else {
        Err(Error::NotAttractive)
    }
}

/// Estimate of the semimetric `d̃` together with the grid it was taken on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DTildeEstimate {
    pub value: f64,
    pub resolution: usize,
}

fn check_comparable(p: &LinearProcess, q: &LinearProcess) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    if p.timeset().points() != q.timeset().points() {
        return Err(Error::InvalidArgument("processes live on different time sets".into()));
    }
    Ok(())
}

/// Supremum over lines of the largest growth-rate difference, estimated on a
/// line grid with local refinement (a lower bound of the true value).
pub fn semimetric_dtilde(
    p: &LinearProcess,
    q: &LinearProcess,
    nm: &NormSpec,
    resolution: usize,
) -> Result<DTildeEstimate> {
    check_comparable(p, q)?;
    let n = p.dim();
    let tp = RateTable::new(p, nm)?;
    let tq = RateTable::new(q, nm)?;
    let gap = |x: &DVector<f64>| -> f64 {
        match (tp.rates(x), tq.rates(x)) {
            (Ok((lp, up)), Ok((lq, uq))) => (lp.value - lq.value).abs().max((up.value - uq.value).abs()),
            _ => f64::NAN,
        }
    };
    let resolution = resolution.max(4);
    let grid = grassmann_grid(1, n, resolution, DEFAULT_GRID_SEED)?;
    let values: Vec<f64> = grid
        .members
        .par_iter()
        .map(|x| gap(&x.frame().column(0).into_owned()))
        .collect();
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if n > 1 {
        let h0 = bracket_for(n, grid.members.len());
        let start = grid.members[best_i].frame().clone();
        let mut frame = start;
        let mut h = h0;
        for _ in 0..REFINE_ROUNDS {
            for l in 0..n - 1 {
                let u: DVector<f64> = complement_basis(&frame).column(l).into_owned();
                let (a, v) = golden_section(
                    |a| {
                        let g = gap(&rotate_frame(&frame, 0, &u, a).column(0).into_owned());
                        if g.is_nan() { f64::INFINITY } else { -g }
                    },
                    h,
                );
                if -v > best {
                    best = -v;
                    frame = rotate_frame(&frame, 0, &u, a);
                }
            }
            h /= REFINE_SHRINK;
        }
    }
    Ok(DTildeEstimate { value: best, resolution })
}

/// `max(sup_{t, x ∈ 𝕊} |(Φ(t, t_min) − Ψ(t, t_min)) x|, d̃)`; the first term is
/// an induced operator norm and is computed exactly.
pub fn metric_d(p: &LinearProcess, q: &LinearProcess, nm: &NormSpec, resolution: usize) -> Result<f64> {
    check_comparable(p, q)?;
    nm.check_dim(p.dim())?;
    let sup = p
        .fundamental()
        .iter()
        .zip(q.fundamental())
        .map(|(a, b)| nm.operator_norm(&(a - b)))
        .fold(0.0, f64::max);
    Ok(sup.max(semimetric_dtilde(p, q, nm, resolution)?.value))
}

/// Spectra of the restrictions of `p` to each subset of its grid.
pub fn spectrum_timeset_sweep(
    p: &LinearProcess,
    subsets: &[TimeSet],
    nm: &NormSpec,
    resolution: usize,
) -> Result<Vec<SpectrumResult>> {
    subsets
        .iter()
        .map(|j| compute_spectrum(&p.restrict(j)?, nm, resolution))
        .collect()
}

fn point_to_set(x: f64, intervals: &[[f64; 2]]) -> f64 {
    distance_to_intervals(x, intervals)
}

fn directed_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let mut worst = 0.0f64;
    for &[lo, hi] in a {
        let mut probes = vec![lo, hi];
        for w in b.windows(2) {
            let mid = 0.5 * (w[0][1] + w[1][0]);
            if mid > lo && mid < hi {
                probes.push(mid);
            }
        }
        for x in probes {
            worst = worst.max(point_to_set(x, b));
        }
    }
    worst
}

/// Hausdorff distance between two finite unions of sorted compact intervals.
pub fn interval_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{catalog, solve_linear};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn diag(entries: &[f64]) -> LinearProcess {
        solve_linear(&catalog::diag(entries).unwrap(), &TimeSet::interval(0.0, 1.0, 11).unwrap(), None).unwrap()
    }

    #[test]
    fn diagonal_extremal_rates() {
        let e = extremal_growth_rates(&diag(&[-1.0, 2.0]), &NormSpec::Euclidean, 64).unwrap();
        assert_eq!(e.elgr[0], f64::INFINITY);
        assert_eq!(e.eugr[0], f64::NEG_INFINITY);
        assert_relative_eq!(e.elgr[1], 2.0, epsilon = 1e-6);
        assert_relative_eq!(e.eugr[1], -1.0, epsilon = 1e-6);
        assert_relative_eq!(e.elgr[2], -1.0, epsilon = 1e-6);
        assert_relative_eq!(e.eugr[2], 2.0, epsilon = 1e-6);
        assert!(e.chain_violation() < 1e-6);
        assert!(e.certified);
    }

    #[test]
    fn two_point_diagonal() {
        let ts = TimeSet::finite(&[0.0, 1.0]).unwrap();
        let sys = catalog::diag(&[2f64.ln(), -(2f64.ln())]).unwrap();
        let p = solve_linear(&sys, &ts, None).unwrap();
        let e = extremal_growth_rates(&p, &NormSpec::Euclidean, 32).unwrap();
        assert_relative_eq!(e.elgr[1], 2f64.ln(), epsilon = 1e-9);
        assert_relative_eq!(e.eugr[1], -(2f64.ln()), epsilon = 1e-9);
    }

    #[test]
    fn rotation_spectrum_is_zero() {
        let p = solve_linear(&catalog::rotation(1.0), &TimeSet::interval(0.0, 1.0, 11).unwrap(), None).unwrap();
        let s = compute_spectrum(&p, &NormSpec::Euclidean, 32).unwrap();
        for k in 1..=2 {
            assert!(s.extremal.elgr[k].abs() < 1e-8 && s.extremal.eugr[k].abs() < 1e-8);
        }
        assert_eq!(s.intervals.len(), 1);
        assert!(s.intervals[0][0].abs() < 1e-8 && s.intervals[0][1].abs() < 1e-8);
        assert!(!s.hyperbolic);
        assert_eq!(s.radius, 0.0);
        assert!(matches!(hyperbolicity_radius(&s), Err(Error::NotHyperbolic)));
        assert!(matches!(emd_check(&p, &NormSpec::Euclidean, 16).unwrap(), EmdVerdict { hyperbolic: false, .. }));
    }

    #[test]
    fn saddle_emd_and_spectrum() {
        let p = diag(&[-1.0, 2.0]);
        let nm = NormSpec::Euclidean;
        let verdict = emd_check(&p, &nm, 64).unwrap();
        assert_eq!(verdict.k, Some(1));
        let (im, ker) = verdict.projection.unwrap();
        let e1 = Subspace::from_frame(&[v(&[1.0, 0.0])]).unwrap();
        let e2 = Subspace::from_frame(&[v(&[0.0, 1.0])]).unwrap();
        assert!(crate::geometry::gap_distance(&im, &e1).unwrap() < 1e-3);
        assert!(crate::geometry::gap_distance(&ker, &e2).unwrap() < 1e-3);

        let s = compute_spectrum(&p, &nm, 64).unwrap();
        assert_eq!(s.intervals.len(), 2);
        assert!((s.intervals[0][0] + 1.0).abs() < 1e-6 && (s.intervals[0][1] + 1.0).abs() < 1e-6);
        assert!((s.intervals[1][0] - 2.0).abs() < 1e-6 && (s.intervals[1][1] - 2.0).abs() < 1e-6);
        assert!(s.hyperbolic);
        assert_relative_eq!(hyperbolicity_radius(&s).unwrap(), 1.0, epsilon = 1e-6);
        assert_relative_eq!(robustness_certificate(&s).unwrap(), 1.0, epsilon = 1e-6);
        assert!(s.diagnostics.complementarity_margin.unwrap() > 0.99);

        let shifted = compute_spectrum(&p.shift(1.0), &nm, 64).unwrap();
        assert!((shifted.intervals[0][0] + 2.0).abs() < 1e-6);
        assert!((shifted.intervals[1][1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn attractive_process() {
        let p = diag(&[-1.0, -2.0]);
        let nm = NormSpec::Euclidean;
        let s = compute_spectrum(&p, &nm, 64).unwrap();
        assert!(s.is_attractive());
        assert_relative_eq!(robustness_certificate(&s).unwrap(), 1.0, epsilon = 1e-6);
        assert_relative_eq!(stability_radius(&p, &nm, 64).unwrap(), 1.0, epsilon = 1e-6);
        let (im, ker) = s.emd_projection.unwrap();
        assert_eq!((im.dim(), ker.dim()), (2, 0));

        let scalar = solve_linear(&catalog::diag(&[-3.0]).unwrap(), &TimeSet::interval(0.0, 1.0, 5).unwrap(), None).unwrap();
        assert_relative_eq!(stability_radius(&scalar, &nm, 8).unwrap(), 3.0, epsilon = 1e-12);
        assert!(matches!(stability_radius(&diag(&[-1.0, 2.0]), &nm, 64), Err(Error::NotAttractive)));
    }

    #[test]
    fn radius_examples() {
        let p = diag(&[-1.0, 2.0]);
        let mut s = compute_spectrum(&p, &NormSpec::Euclidean, 16).unwrap();
        s.intervals = vec![[0.5, 3.0]];
        s.radius = distance_to_intervals(0.0, &s.intervals);
        assert_eq!(hyperbolicity_radius(&s).unwrap(), 0.5);
    }

    #[test]
    fn dtilde_examples() {
        let p = diag(&[-1.0, 2.0]);
        let nm = NormSpec::Euclidean;
        assert_eq!(semimetric_dtilde(&p, &p, &nm, 32).unwrap().value, 0.0);
        for gamma in [0.3, 1.7] {
            let d = semimetric_dtilde(&p, &p.shift(gamma), &nm, 32).unwrap().value;
            assert!((d - gamma).abs() < 1e-9);
        }
        let q = diag(&[-1.1, 2.0]);
        let a = semimetric_dtilde(&p, &q, &nm, 32).unwrap().value;
        let b = semimetric_dtilde(&q, &p, &nm, 32).unwrap().value;
        assert_eq!(a, b);
        let d = metric_d(&p, &q, &nm, 32).unwrap();
        assert!(d >= 0.1 - 1e-9 && d >= a);
        assert_eq!(metric_d(&p, &p, &nm, 32).unwrap(), 0.0);
    }

    #[test]
    fn sweep_and_hausdorff() {
        let p = diag(&[-1.0, 2.0]);
        let nm = NormSpec::Euclidean;
        let subsets = vec![p.timeset().clone(), TimeSet::finite(&[0.0, 1.0]).unwrap()];
        let spectra = spectrum_timeset_sweep(&p, &subsets, &nm, 32).unwrap();
        for s in &spectra {
            assert!(interval_hausdorff(&s.intervals, &[[-1.0, -1.0], [2.0, 2.0]]) < 1e-6);
        }
        assert!(matches!(
            spectrum_timeset_sweep(&p, &[TimeSet::finite(&[0.05, 1.0]).unwrap()], &nm, 8),
            Err(Error::TimeNotInSet(_))
        ));
        assert_eq!(interval_hausdorff(&[[0.0, 1.0]], &[[0.0, 1.0]]), 0.0);
        assert_eq!(interval_hausdorff(&[[0.0, 4.0]], &[[0.0, 1.0], [3.0, 4.0]]), 1.0);
        assert_eq!(interval_hausdorff(&[[0.0, 0.0]], &[[2.0, 3.0]]), 3.0);
    }

    #[test]
    fn chain_order() {
        let e = extremal_growth_rates(&diag(&[-1.0, 0.5, 2.0]), &NormSpec::Euclidean, 32).unwrap();
        let c = e.chain();
        assert_eq!(c.len(), 6);
        assert!(e.chain_violation() < 1e-6, "{c:?}");
        assert_relative_eq!(e.elgr[3], -1.0, epsilon = 1e-6);
        assert_relative_eq!(e.eugr[1], -1.0, epsilon = 1e-6);
        assert_relative_eq!(e.elgr[2], 0.5, epsilon = 1e-4);
        assert_relative_eq!(e.eugr[2], 0.5, epsilon = 1e-4);
        let s = spectrum_from_extremal(e);
        assert_eq!(s.intervals.len(), 3);
    }
}
