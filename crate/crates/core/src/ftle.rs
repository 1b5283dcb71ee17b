//! Two-point spectra from singular values, and FTLE fields.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::emit::{format_sci, Json};
use crate::error::{Error, Result};
use crate::geometry::{NormSpec, Subspace};
use crate::process::{default_step, linearize_with_bound, LinearProcess, SystemSpec};
use crate::spectral::{extremal_growth_rates, spectrum_from_extremal, ExtremalRates, SpectrumResult};
use crate::timeset::{TimeSet, TimeSetKind};

/// Singular values (descending) and right singular vectors of `m`, via the
/// symmetric eigendecomposition of `mᵀm`.
fn singular_pairs(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(m.transpose() * m);
    let mut order: Vec<usize> = (0..m.ncols()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (values, vectors)
}

/// Exponents `(1/T) ln σ_i` of `m` in the given norm, largest first.
pub fn lyapunov_exponents(m: &DMatrix<f64>, t: f64, nm: &NormSpec) -> Result<Vec<f64>> {
    nm.check_dim(m.nrows())?;
    let (root, inv_root) = nm.whitening(m.nrows());
    let (sv, _) = singular_pairs(&(&root * m * &inv_root));
    Ok(sv.iter().map(|s| s.ln() / t).collect())
}

/// Extremal rates and spectrum of the two-point process `{0 ↦ I, T ↦ M}`
/// in closed form: `elgr_k = ln σ_k / T`, `eugr_k = ln σ_{n−k+1} / T`.
pub fn two_point_spectrum(m: &DMatrix<f64>, t: f64, nm: &NormSpec) -> Result<SpectrumResult> {
    Ok(spectrum_from_extremal(two_point_extremal(m, t, nm)?))
}

pub fn two_point_extremal(m: &DMatrix<f64>, t: f64, nm: &NormSpec) -> Result<ExtremalRates> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidArgument("matrix must be square and nonempty".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time span must be positive (got {t})")));
    }
    nm.check_dim(m.nrows())?;
    let n = m.nrows();
    let (root, inv_root) = nm.whitening(n);
    let (sv, vecs) = singular_pairs(&(&root * m * &inv_root));
    if !(sv[n - 1] > sv[0] * 1e-14) {
        return Err(Error::NotInvertible);
    }
    let span = |idx: &[usize]| -> Subspace {
        if idx.is_empty() {
            return Subspace::zero(n);
        }
        let cols: Vec<DVector<f64>> = idx.iter().map(|&i| &inv_root * &vecs[i]).collect();
        Subspace::from_frame(&cols).expect("singular vectors are independent")
    };
    let mut elgr = vec![f64::INFINITY; n + 1];
    let mut eugr = vec![f64::NEG_INFINITY; n + 1];
    let mut argmax = vec![Subspace::zero(n); n + 1];
    let mut argmin = vec![Subspace::zero(n); n + 1];
    for k in 1..=n {
        elgr[k] = sv[k - 1].ln() / t;
        eugr[k] = sv[n - k].ln() / t;
        argmax[k] = span(&(0..k).collect::<Vec<_>>());
        argmin[k] = span(&(n - k..n).collect::<Vec<_>>());
    }
    let lower_candidates = (0..=n).map(|k| vec![(elgr[k], argmax[k].clone())]).collect();
    let upper_candidates = (0..=n).map(|k| vec![(eugr[k], argmin[k].clone())]).collect();
    Ok(ExtremalRates {
        elgr,
        eugr,
        argmax_subspace: argmax,
        argmin_subspace: argmin,
        certified: true,
        resolution: 0,
        lower_candidates,
        upper_candidates,
    })
}

/// Deviation of the optimizer from the closed form on a two-point set.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub max_deviation: f64,
    /// `(|Δ elgr_k|, |Δ eugr_k|)` for `k = 1..=n`.
    pub per_k: Vec<(f64, f64)>,
    pub optimizer: ExtremalRates,
    pub oracle: ExtremalRates,
}

pub fn two_point_oracle_check(p: &LinearProcess, nm: &NormSpec, resolution: usize) -> Result<OracleReport> {
    let ts = p.timeset();
    if ts.kind() != TimeSetKind::FiniteSet || ts.len() != 2 {
        return Err(Error::InvalidTimeSet("oracle check needs a two-point finite time set".into()));
    }
    let m = p.evaluate(ts.t_max(), ts.t_min())?;
    let oracle = two_point_extremal(&m, ts.span(), nm)?;
    let optimizer = extremal_growth_rates(p, nm, resolution)?;
    let per_k: Vec<(f64, f64)> = (1..=p.dim())
        .map(|k| {
            ((optimizer.elgr[k] - oracle.elgr[k]).abs(), (optimizer.eugr[k] - oracle.eugr[k]).abs())
        })
        .collect();
    let max_deviation = per_k.iter().fold(0.0f64, |a, &(x, y)| a.max(x).max(y));
    Ok(OracleReport { max_deviation, per_k, optimizer, oracle })
}

/// `∂ₓφ(t0 + T, t0, x)` from the variational equation.
pub fn flow_map_gradient(
    sys: &SystemSpec,
    t0: f64,
    t: f64,
    x: &DVector<f64>,
    step: Option<f64>,
) -> Result<DMatrix<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("integration time must be positive (got {t})")));
    }
    let ts = TimeSet::finite(&[t0, t0 + t])?;
    let step = step.unwrap_or_else(|| default_step(&ts));
    let p = linearize_with_bound(sys, &ts, x, Some(step), f64::INFINITY)?;
    Ok(p.fundamental()[1].clone())
}

/// Rectangle of initial conditions, `nx × ny` points including the edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Square box of half-width `h` around `center`.
    pub fn centered(center: (f64, f64), h: f64, nx: usize, ny: usize) -> Self {
        Self {
            x_range: (center.0 - h, center.0 + h),
            y_range: (center.1 - h, center.1 + h),
            nx,
            ny,
        }
    }

    fn axis(range: (f64, f64), count: usize, i: usize) -> f64 {
        if count <= 1 {
            0.5 * (range.0 + range.1)
        } else {
            range.0 + (range.1 - range.0) * i as f64 / (count - 1) as f64
        }
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (Self::axis(self.x_range, self.nx, i), Self::axis(self.y_range, self.ny, j))
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidArgument("grid needs at least one point per axis".into()));
        }
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::InvalidArgument("grid ranges must be finite and ordered".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FtleField {
    pub grid: GridSpec,
    pub t0: f64,
    pub t: f64,
    pub step: f64,
    pub system: String,
    /// Largest exponent per grid point, `y`-index outer; NaN marks blow-up.
    pub values: Vec<f64>,
    pub nan_count: usize,
}

impl FtleField {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    /// Min and max over finite cells.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,ftle\n");
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let (x, y) = self.grid.point(i, j);
                out.push_str(&format!("{},{},{}\n", format_sci(x), format_sci(y), format_sci(self.value(i, j))));
            }
        }
        out
    }

    pub fn metadata(&self) -> Json {
        Json::obj()
            .with("system", self.system.as_str())
            .with("t0", self.t0)
            .with("T", self.t)
            .with("step", self.step)
            .with(
                "grid",
                Json::obj()
                    .with("x_range", vec![self.grid.x_range.0, self.grid.x_range.1])
                    .with("y_range", vec![self.grid.y_range.0, self.grid.y_range.1])
                    .with("nx", self.grid.nx)
                    .with("ny", self.grid.ny),
            )
            .with("nan_count", self.nan_count)
    }
}

/// Largest finite-time Lyapunov exponent over a grid of initial conditions.
pub fn ftle_field(sys: &SystemSpec, t0: f64, t: f64, grid: GridSpec, step: Option<f64>) -> Result<FtleField> {
    if sys.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: sys.dim() });
    }
    grid.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("integration time must be positive (got {t})")));
    }
    let step = step.unwrap_or(t / crate::process::DEFAULT_STEPS_PER_SPAN);
    let cells: Vec<(usize, usize)> = (0..grid.ny).flat_map(|j| (0..grid.nx).map(move |i| (i, j))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = grid.point(i, j);
            match flow_map_gradient(sys, t0, t, &DVector::from_vec(vec![x, y]), Some(step)) {
                Ok(g) if g.iter().all(|v| v.is_finite()) => {
                    let (sv, _) = singular_pairs(&g);
                    sv[0].ln() / t
                }
                _ => f64::NAN,
            }
        })
        .collect();
    let nan_count = values.iter().filter(|v| v.is_nan()).count();
    Ok(FtleField { grid, t0, t, step, system: sys.name().to_string(), values, nan_count })
}
