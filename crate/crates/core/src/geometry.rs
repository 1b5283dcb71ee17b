//! Norms, subspaces as orthonormal frames, the gap metric, and the direction
//! and Grassmannian grids shared by every optimizer in the crate.
//!
//! Frames are always orthonormal in the Euclidean sense, even when a weighted
//! norm is active. The weighted norm only changes how vectors are measured.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seed used for the quasi-random direction grids in dimension four and up.
pub const DEFAULT_GRID_SEED: u64 = 0x5eed_f1e1d;

/// A vector norm with a gradient away from the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    Euclidean,
    /// `|x| = sqrt(xᵀ G x)` for a symmetric positive-definite `G`.
    Weighted(WeightedNorm),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNorm {
    gamma: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

impl WeightedNorm {
    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// `G^{1/2}`.
    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    /// `G^{-1/2}`.
    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }
}

impl NormSpec {
    pub fn weighted(gamma: DMatrix<f64>) -> Result<Self> {
        if !gamma.is_square() || gamma.nrows() == 0 {
            return Err(Error::InvalidNorm("weight matrix must be square and nonempty".into()));
        }
        if gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidNorm("weight matrix has non-finite entries".into()));
        }
        let scale = gamma.amax().max(f64::MIN_POSITIVE);
        let asym = (&gamma - gamma.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidNorm(format!(
                "weight matrix is not symmetric (asymmetry {asym:e})"
            )));
        }
        let sym = (&gamma + gamma.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let lmin = eig.eigenvalues.min();
        if lmin <= 0.0 {
            return Err(Error::InvalidNorm(format!(
                "weight matrix is not positive definite (smallest eigenvalue {lmin:e})"
            )));
        }
        let v = &eig.eigenvectors;
        let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let inv_root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        Ok(NormSpec::Weighted(WeightedNorm {
            gamma: sym,
            sqrt: v * root * v.transpose(),
            inv_sqrt: v * inv_root * v.transpose(),
        }))
    }

    /// Ambient dimension the norm is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NormSpec::Euclidean => None,
            NormSpec::Weighted(w) => Some(w.gamma.nrows()),
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != n => Err(Error::DimensionMismatch { expected: n, found: d }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            NormSpec::Euclidean => x.norm(),
            NormSpec::Weighted(w) => x.dot(&(&w.gamma * x)).max(0.0).sqrt(),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let nx = self.eval(x);
        if nx == 0.0 {
            return Err(Error::NormNotDifferentiableAtZero);
        }
        Ok(match self {
            NormSpec::Euclidean => x / nx,
            NormSpec::Weighted(w) => (&w.gamma * x) / nx,
        })
    }

    /// Logarithmic derivative `(d/dt |y(t)|) / |y(t)|` given `y` and `ẏ`.
    pub(crate) fn log_derivative(&self, y: &DVector<f64>, ydot: &DVector<f64>) -> f64 {
        match self {
            NormSpec::Euclidean => y.dot(ydot) / y.norm_squared(),
            NormSpec::Weighted(w) => {
                let gy = &w.gamma * y;
                gy.dot(ydot) / gy.dot(y)
            }
        }
    }

    /// Scale `x` to unit length in this norm.
    pub fn normalize(&self, x: &DVector<f64>) -> DVector<f64> {
        x / self.eval(x)
    }

    /// Change of coordinates turning this norm into the Euclidean one:
    /// returns `(G^{1/2}, G^{-1/2})`, or identities for the Euclidean norm.
    pub(crate) fn whitening(&self, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        match self {
            NormSpec::Euclidean => (DMatrix::identity(n, n), DMatrix::identity(n, n)),
            NormSpec::Weighted(w) => (w.sqrt.clone(), w.inv_sqrt.clone()),
        }
    }

    /// Operator norm of `m` induced by this vector norm.
    pub fn operator_norm(&self, m: &DMatrix<f64>) -> f64 {
        let (root, inv_root) = self.whitening(m.nrows());
        let t = &root * m * &inv_root;
        largest_singular_value(&t)
    }
}

pub fn norm_eval(nm: &NormSpec, x: &DVector<f64>) -> f64 {
    nm.eval(x)
}

pub fn norm_gradient(nm: &NormSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    nm.gradient(x)
}

fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    SymmetricEigen::new(gram).eigenvalues.max().max(0.0).sqrt()
}

/// A `k`-dimensional subspace of `Rⁿ`, stored as an `n × k` orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    frame: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(n: usize) -> Self {
        Self { frame: DMatrix::zeros(n, 0) }
    }

    pub fn full(n: usize) -> Self {
        Self { frame: DMatrix::identity(n, n) }
    }

    /// Orthonormalizes the columns of `vectors` (Gram-Schmidt, in order).
    pub fn from_frame(vectors: &[DVector<f64>]) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::InvalidArgument("a frame needs at least one vector".into()));
        };
        let n = first.len();
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        let m = DMatrix::from_columns(vectors);
        Self::from_matrix(&m)
    }

    /// Orthonormalizes the columns of an `n × k` matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = m.shape();
        if k > n {
            return Err(Error::DimensionMismatch { expected: n, found: k });
        }
        if k == 0 {
            return Ok(Self::zero(n));
        }
        let sv = m.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        if !(ratio >= 1e-10) {
            return Err(Error::DegenerateFrame { ratio });
        }
        Ok(Self { frame: gram_schmidt(m) })
    }

    /// Wraps a frame that is already orthonormal.
    pub(crate) fn from_orthonormal(frame: DMatrix<f64>) -> Self {
        Self { frame }
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn basis(&self) -> Vec<DVector<f64>> {
        self.frame.column_iter().map(|c| c.into_owned()).collect()
    }

    /// Euclidean orthogonal projector onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    /// Orthonormal basis of the Euclidean orthogonal complement.
    pub fn complement(&self) -> Subspace {
        Subspace { frame: complement_basis(&self.frame) }
    }

    /// Distance of `x` from the subspace relative to `|x|`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        let r = x - self.projector() * x;
        r.norm() / x.norm().max(f64::MIN_POSITIVE)
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
fn gram_schmidt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = m.shape();
    let mut q = DMatrix::<f64>::zeros(n, k);
    for j in 0..k {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dot(&v);
                v -= qi * c;
            }
        }
        let nv = v.norm();
        q.set_column(j, &(v / nv));
    }
    q
}

/// Orthonormal completion of an orthonormal frame.
pub(crate) fn complement_basis(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = frame.shape();
    let mut cols: Vec<DVector<f64>> = frame.column_iter().map(|c| c.into_owned()).collect();
    // Feed unit vectors in order of smallest overlap with the span.
    let mut order: Vec<usize> = (0..n).collect();
    let overlap = |i: usize| -> f64 { (0..k).map(|j| frame[(i, j)].powi(2)).sum() };
    order.sort_by(|&a, &b| overlap(a).total_cmp(&overlap(b)));
    let mut out = Vec::with_capacity(n - k);
    for i in order {
        if out.len() == n - k {
            break;
        }
        let mut v = DVector::<f64>::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            let v = v / nv;
            cols.push(v.clone());
            out.push(v);
        }
    }
    if out.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&out)
    }
}

/// Gap between two subspaces: spectral norm of the difference of the
/// Euclidean orthogonal projectors.
pub fn gap_distance(x: &Subspace, y: &Subspace) -> Result<f64> {
    if x.ambient_dim() != y.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: x.ambient_dim(),
            found: y.ambient_dim(),
        });
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    let d = x.projector() - y.projector();
    if d.is_empty() {
        return Ok(0.0);
    }
    let eig = SymmetricEigen::new(d);
    Ok(eig.eigenvalues.amax().min(1.0))
}

/// Sign-canonical form: the first clearly nonzero entry is positive.
pub(crate) fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax();
    if let Some(first) = v.iter().copied().find(|c| c.abs() > 1e-12 * scale) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Unit directions on a hemisphere of `Rᵏ` (antipodal points identified).
///
/// `k = 1` gives the single vector `e1`, `k = 2` an angle grid on `[0, π)`,
/// `k = 3` a Fibonacci grid on the upper hemisphere, and larger `k` a seeded
/// Gaussian sample folded onto the hemisphere.
pub(crate) fn hemisphere_coordinates(k: usize, resolution: usize) -> Vec<DVector<f64>> {
    match k {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0)],
        2 => (0..resolution)
            .map(|j| {
                let th = std::f64::consts::PI * j as f64 / resolution as f64;
                DVector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect(),
        3 => fibonacci_hemisphere(resolution),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_GRID_SEED ^ (k as u64) << 32);
            (0..resolution)
                .map(|_| {
                    let v = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
                    canonical_sign(v.normalize())
                })
                .collect()
        }
    }
}

fn fibonacci_hemisphere(count: usize) -> Vec<DVector<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Unit vectors (in `nm`) lying in `x`, covering its unit sphere up to sign.
pub fn sphere_grid(nm: &NormSpec, x: &Subspace, resolution: usize) -> Vec<DVector<f64>> {
    let frame = x.frame();
    hemisphere_coordinates(x.dim(), resolution.max(2))
        .into_iter()
        .map(|c| {
            let v = frame * c;
            let v = if x.dim() == 1 { canonical_sign(v) } else { v };
            nm.normalize(&v)
        })
        .collect()
}

/// A deterministic sample of `Gr(k, Rⁿ)`.
#[derive(Debug, Clone)]
pub struct GrassmannGrid {
    pub members: Vec<Subspace>,
    /// `false` when the grid is a seeded random sample rather than a
    /// parameterized covering.
    pub certified: bool,
}

/// Grid on `Gr(k, Rⁿ)`. Exhaustive parameterizations for `n ≤ 3`, seeded
/// random frames otherwise.
pub fn grassmann_grid(k: usize, n: usize, resolution: usize, seed: u64) -> Result<GrassmannGrid> {
    if k > n {
        return Err(Error::DimensionMismatch { expected: n, found: k });
    }
    let resolution = resolution.max(2);
    let certified = n <= 3;
    let members = if k == 0 {
        vec![Subspace::zero(n)]
    } else if k == n {
        vec![Subspace::full(n)]
    } else if n <= 3 {
        // Here k = 1 with n ∈ {2, 3}, or k = 2 with n = 3 (complements of lines).
        let lines: Vec<Subspace> = hemisphere_coordinates(n, resolution)
            .into_iter()
            .map(|v| Subspace::from_orthonormal(DMatrix::from_columns(&[v])))
            .collect();
        if k == 1 {
            lines
        } else {
            lines.iter().map(Subspace::complement).collect()
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(resolution);
        while out.len() < resolution {
            let m = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
            if let Ok(s) = Subspace::from_matrix(&m) {
                out.push(s);
            }
        }
        out
    };
    Ok(GrassmannGrid { members, certified })
}

/// Rotates column `j` of `frame` toward the unit vector `toward` (orthogonal
/// to the span) by `angle`. Orthonormality is preserved.
pub(crate) fn rotate_frame(
    frame: &DMatrix<f64>,
    j: usize,
    toward: &DVector<f64>,
    angle: f64,
) -> DMatrix<f64> {
    let mut out = frame.clone();
    let col = frame.column(j).into_owned() * angle.cos() + toward * angle.sin();
    out.set_column(j, &col);
    out
}

/// Smallest singular value of the concatenated frames, a complementarity
/// margin for `X ⊕ Y = Rⁿ` when `dim X + dim Y = n`.
pub fn complementarity_margin(x: &Subspace, y: &Subspace) -> f64 {
    let n = x.ambient_dim();
    if x.dim() + y.dim() != n {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (j, c) in x.frame().column_iter().chain(y.frame().column_iter()).enumerate() {
        m.set_column(j, &c);
    }
    m.svd(false, false).singular_values.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn line(theta: f64) -> Subspace {
        Subspace::from_frame(&[v(&[theta.cos(), theta.sin()])]).unwrap()
    }

    #[test]
    fn norm_values() {
        assert_eq!(norm_eval(&NormSpec::Euclidean, &v(&[3.0, 4.0])), 5.0);
        let w = NormSpec::weighted(DMatrix::from_diagonal(&v(&[4.0, 1.0]))).unwrap();
        assert_relative_eq!(norm_eval(&w, &v(&[1.0, 0.0])), 2.0, epsilon = 1e-15);
        assert_eq!(norm_eval(&w, &v(&[0.0, 0.0])), 0.0);
        assert_eq!(norm_eval(&NormSpec::Euclidean, &v(&[0.0, 0.0])), 0.0);
    }

    #[test]
    fn norm_gradients() {
        let e = NormSpec::Euclidean;
        assert_eq!(norm_gradient(&e, &v(&[0.0, 2.0])).unwrap(), v(&[0.0, 1.0]));
        let g = norm_gradient(&e, &v(&[3.0, 4.0])).unwrap();
        assert_relative_eq!(g, v(&[0.6, 0.8]), epsilon = 1e-15);
        assert_eq!(
            norm_gradient(&e, &v(&[0.0, 0.0])),
            Err(Error::NormNotDifferentiableAtZero)
        );
    }

    #[test]
    fn weighted_gradient_matches_finite_differences() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let nm = NormSpec::weighted(g).unwrap();
        let x = v(&[0.3, -1.2]);
        let grad = nm.gradient(&x).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (nm.eval(&xp) - nm.eval(&xm)) / (2.0 * h);
            assert_relative_eq!(grad[i], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn weighted_rejects_bad_matrices() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(matches!(NormSpec::weighted(asym), Err(Error::InvalidNorm(_))));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(NormSpec::weighted(indefinite), Err(Error::InvalidNorm(_))));
    }

    #[test]
    fn frames() {
        let s = Subspace::from_frame(&[v(&[2.0, 0.0])]).unwrap();
        assert_eq!(s.frame().column(0).into_owned(), v(&[1.0, 0.0]));
        let s = Subspace::from_frame(&[v(&[1.0, 0.0]), v(&[1.0, 1.0])]).unwrap();
        assert_relative_eq!(s.frame().column(0).into_owned(), v(&[1.0, 0.0]), epsilon = 1e-15);
        assert_relative_eq!(s.frame().column(1).into_owned(), v(&[0.0, 1.0]), epsilon = 1e-15);
        assert!(matches!(
            Subspace::from_frame(&[v(&[1.0, 1.0]), v(&[2.0, 2.0])]),
            Err(Error::DegenerateFrame { .. })
        ));
    }

    #[test]
    fn gap_examples() {
        let e1 = line(0.0);
        let e2 = line(std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(gap_distance(&e1, &e1).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(gap_distance(&e1, &e2).unwrap(), 1.0, epsilon = 1e-15);
        // Independent route: ‖P1 − P2‖ for lines equals |sin(angle)|.
        let d45 = gap_distance(&e1, &line(std::f64::consts::FRAC_PI_4)).unwrap();
        assert_relative_eq!(d45, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        let plane = Subspace::full(2);
        assert!(matches!(gap_distance(&e1, &plane), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sphere_grid_shapes() {
        let nm = NormSpec::Euclidean;
        let x1 = line(2.0);
        let g = sphere_grid(&nm, &x1, 17);
        assert_eq!(g.len(), 1);
        assert!(g[0][0] >= 0.0);

        let g = sphere_grid(&nm, &Subspace::full(2), 4);
        assert_eq!(g.len(), 4);
        for (j, d) in g.iter().enumerate() {
            let th = d[1].atan2(d[0]);
            assert_relative_eq!(th, j as f64 * std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        }

        let g = sphere_grid(&nm, &Subspace::full(3), 100);
        assert_eq!(g.len(), 100);
        let mut min_angle = f64::INFINITY;
        for i in 0..g.len() {
            for j in 0..i {
                min_angle = min_angle.min(g[i].dot(&g[j]).clamp(-1.0, 1.0).acos());
            }
        }
        assert!(min_angle > 0.05, "min pairwise angle {min_angle}");
    }

    #[test]
    fn sphere_grid_is_unit_and_inside() {
        let g = DMatrix::from_row_slice(3, 3, &[3.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 2.0]);
        let nm = NormSpec::weighted(g).unwrap();
        let x = Subspace::from_frame(&[v(&[1.0, 2.0, 0.0]), v(&[0.0, 1.0, -1.0])]).unwrap();
        for d in sphere_grid(&nm, &x, 32) {
            assert_relative_eq!(nm.eval(&d), 1.0, epsilon = 1e-10);
            assert!(x.residual(&d) < 1e-10);
        }
    }

    #[test]
    fn grassmann_grid_examples() {
        let g = grassmann_grid(1, 2, 2, 0).unwrap();
        assert_eq!(g.members.len(), 2);
        assert!(g.certified);
        assert_relative_eq!(gap_distance(&g.members[0], &g.members[1]).unwrap(), 1.0, epsilon = 1e-14);

        let g = grassmann_grid(2, 3, 10, 0).unwrap();
        assert_eq!(g.members.len(), 10);
        let normals = grassmann_grid(1, 3, 10, 0).unwrap();
        for (plane, normal) in g.members.iter().zip(&normals.members) {
            assert_eq!(plane.dim(), 2);
            let nrm = normal.frame().column(0);
            assert!((plane.frame().transpose() * nrm).amax() < 1e-12);
        }

        for n in 1..5 {
            let g = grassmann_grid(n, n, 8, 0).unwrap();
            assert_eq!(g.members.len(), 1);
            assert_eq!(g.members[0].dim(), n);
        }
        assert!(matches!(grassmann_grid(3, 2, 4, 0), Err(Error::DimensionMismatch { .. })));
        let g = grassmann_grid(2, 4, 6, 7).unwrap();
        assert!(!g.certified);
        assert_eq!(g.members.len(), 6);
    }

    #[test]
    fn grid_members_roundtrip_through_from_frame() {
        for (k, n) in [(1, 2), (1, 3), (2, 3), (2, 4), (3, 5)] {
            for x in grassmann_grid(k, n, 9, 3).unwrap().members {
                assert!((x.frame().transpose() * x.frame() - DMatrix::identity(k, k)).amax() < 1e-10);
                let y = Subspace::from_frame(&x.basis()).unwrap();
                assert!(gap_distance(&x, &y).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn complement_spans_the_rest() {
        let x = Subspace::from_frame(&[v(&[1.0, 1.0, 0.0, 0.0])]).unwrap();
        let c = x.complement();
        assert_eq!(c.dim(), 3);
        assert!(complementarity_margin(&x, &c) > 0.999);
    }

    proptest! {
        #[test]
        fn gap_is_a_metric_on_lines(a in 0.0f64..3.2, b in 0.0f64..3.2, c in 0.0f64..3.2) {
            let (x, y, z) = (line(a), line(b), line(c));
            let xy = gap_distance(&x, &y).unwrap();
            prop_assert!((xy - gap_distance(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert!(xy <= gap_distance(&x, &z).unwrap() + gap_distance(&z, &y).unwrap() + 1e-10);
            prop_assert!((0.0..=1.0).contains(&xy));
        }

        #[test]
        fn line_grid_covers(theta in 0.0f64..std::f64::consts::PI, r in 2usize..64) {
            let target = line(theta);
            let grid = grassmann_grid(1, 2, r, 0).unwrap();
            let best = grid.members.iter()
                .map(|m| gap_distance(m, &target).unwrap())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best <= (std::f64::consts::PI / (2.0 * r as f64)).sin() + 1e-12);
        }
    }
}
