//! Gaussian-state primitives in shot-noise units.
//!
//! States are tracked through their covariance matrices only; every source in
//! this crate is zero-mean, so first moments never enter a key-rate formula.
//! Quadratures are interleaved as `(q1, p1, q2, p2, ...)`, which keeps every
//! one-mode operation a 2x2 block on the diagonal.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::{domain, Error, Result};

/// Symplectic eigenvalues within `CLAMP_TOL` of 1 are reported as exactly 1.
/// Rounding in the spectrum of a nearly pure state with large variances
/// lands on either side of 1, and `h` is steep there.
pub const CLAMP_TOL: f64 = 1e-9;
/// Symplectic eigenvalues below `1 - PHYSICAL_TOL` mark a state as non-physical.
pub const PHYSICAL_TOL: f64 = 1e-6;

const SYMMETRY_TOL: f64 = 1e-12;

static MIN_SYMPLECTIC_BITS: AtomicU64 = AtomicU64::new(0x7ff0_0000_0000_0000);

/// Smallest raw (unclamped) symplectic eigenvalue accepted by
/// [`symplectic_eigenvalues`] since the last [`reset_symplectic_watermark`].
/// Rejected spectra are reported as errors and not recorded. `f64::INFINITY`
/// if none.
pub fn symplectic_watermark() -> f64 {
    f64::from_bits(MIN_SYMPLECTIC_BITS.load(Ordering::Relaxed))
}

pub fn reset_symplectic_watermark() {
    MIN_SYMPLECTIC_BITS.store(f64::INFINITY.to_bits(), Ordering::Relaxed);
}

fn record_symplectic(d: f64) {
    // bit patterns of non-negative doubles sort like the values themselves
    if d >= 0.0 {
        MIN_SYMPLECTIC_BITS.fetch_min(d.to_bits(), Ordering::Relaxed);
    }
}

/// Covariance matrix of an `n`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    data: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps a matrix after checking shape, symmetry and positive diagonal.
    /// The matrix is re-symmetrized as `(A + A^T) / 2`.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = data.shape();
        if rows != cols {
            return Err(Error::Dimension { expected: rows, found: cols });
        }
        if rows == 0 || rows % 2 != 0 {
            return domain(format!("covariance matrix dimension {rows} is not a positive even number"));
        }
        for i in 0..rows {
            if !(data[(i, i)] > 0.0) {
                return domain(format!("diagonal entry {i} is {} (must be > 0)", data[(i, i)]));
            }
            for j in (i + 1)..rows {
                let (a, b) = (data[(i, j)], data[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Numerical(format!("non-finite entry at ({i}, {j})")));
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return domain(format!("matrix is not symmetric at ({i}, {j}): {a} vs {b}"));
                }
            }
        }
        Ok(Self::symmetrized(data))
    }

    fn symmetrized(data: DMatrix<f64>) -> Self {
        let sym = (&data + data.transpose()) * 0.5;
        Self { data: sym }
    }

    /// Row-major construction, convenient for matrix literals.
    pub fn from_row_slice(n_modes: usize, entries: &[f64]) -> Result<Self> {
        let dim = 2 * n_modes;
        if entries.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, found: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Vacuum on `n_modes` modes.
    pub fn vacuum(n_modes: usize) -> Self {
        Self { data: DMatrix::identity(2 * n_modes, 2 * n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    /// 2x2 block coupling `mode_a` (rows) with `mode_b` (columns).
    pub fn block(&self, mode_a: usize, mode_b: usize) -> Matrix2<f64> {
        self.data.fixed_view::<2, 2>(2 * mode_a, 2 * mode_b).into_owned()
    }

    /// Reduced state on the listed modes, in the order given.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let n = self.n_modes();
        for &m in modes {
            if m >= n {
                return Err(Error::ModeIndex { index: m, modes: n });
            }
        }
        if modes.is_empty() {
            return domain("reduced state over zero modes");
        }
        let idx = quadrature_indices(modes);
        let data = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.data[(idx[i], idx[j])]);
        Ok(Self { data })
    }

    pub fn determinant(&self) -> f64 {
        self.data.determinant()
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(self)
    }

    pub fn entropy(&self) -> Result<f64> {
        von_neumann_entropy(self)
    }

    /// True when all symplectic eigenvalues are at least `1 - CLAMP_TOL`.
    pub fn is_physical(&self) -> bool {
        match raw_symplectic_eigenvalues(&self.data) {
            Ok(d) => d.iter().all(|&x| x >= 1.0 - CLAMP_TOL),
            Err(_) => false,
        }
    }
}

fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

/// Symplectic form `Omega = (+) [[0, 1], [-1, 0]]` on `n_modes` modes.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Two-mode squeezed vacuum with local variance `v`.
pub fn tmsv_cm(v: f64) -> Result<CovarianceMatrix> {
    if !(v >= 1.0) || !v.is_finite() {
        return domain(format!("sub-vacuum modulation V = {v} (need V >= 1)"));
    }
    let z = (v * v - 1.0).sqrt();
    let data = DMatrix::from_row_slice(
        4,
        4,
        &[
            v, 0.0, z, 0.0, //
            0.0, v, 0.0, -z, //
            z, 0.0, v, 0.0, //
            0.0, -z, 0.0, v,
        ],
    );
    Ok(CovarianceMatrix { data })
}

/// Single-mode thermal state with mean photon number `n_bar`.
pub fn thermal_cm(n_bar: f64) -> Result<CovarianceMatrix> {
    if !(n_bar >= 0.0) || !n_bar.is_finite() {
        return domain(format!("negative mean photon number {n_bar}"));
    }
    Ok(CovarianceMatrix { data: DMatrix::identity(2, 2) * (1.0 + 2.0 * n_bar) })
}

/// Direct sum `a (+) b`, modes of `a` first.
pub fn tensor(a: &CovarianceMatrix, b: &CovarianceMatrix) -> CovarianceMatrix {
    let (da, db) = (a.data.nrows(), b.data.nrows());
    let mut data = DMatrix::zeros(da + db, da + db);
    data.view_mut((0, 0), (da, da)).copy_from(&a.data);
    data.view_mut((da, da), (db, db)).copy_from(&b.data);
    CovarianceMatrix { data }
}

/// Gaussian completely positive map `sigma -> X sigma X^T + Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCPMap {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl GaussianCPMap {
    /// Checks dimensions, symmetry of `Y` and the complete-positivity
    /// condition `Y + i Omega - i X Omega X^T >= 0`.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let dim = x.nrows();
        if x.ncols() != dim {
            return Err(Error::Dimension { expected: dim, found: x.ncols() });
        }
        if y.shape() != (dim, dim) {
            return Err(Error::Dimension { expected: dim, found: y.nrows() });
        }
        if dim == 0 || !dim.is_multiple_of(2) {
            return domain(format!("map dimension {dim} is not a positive even number"));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (y[(i, j)] - y[(j, i)]).abs() > SYMMETRY_TOL * y[(i, j)].abs().max(1.0) {
                    return domain("Y matrix is not symmetric");
                }
            }
        }
        let map = Self { x, y: (&y + y.transpose()) * 0.5 };
        let min_eig = map.complete_positivity_margin();
        if min_eig < -CLAMP_TOL {
            return domain(format!("map is not completely positive (margin {min_eig:.3e})"));
        }
        Ok(map)
    }

    /// Symplectic (unitary) map, `Y = 0`.
    pub fn symplectic(s: DMatrix<f64>) -> Result<Self> {
        let dim = s.nrows();
        let y = DMatrix::zeros(dim, s.ncols());
        Self::new(s, y)
    }

    pub fn identity(n_modes: usize) -> Self {
        let dim = 2 * n_modes;
        Self { x: DMatrix::identity(dim, dim), y: DMatrix::zeros(dim, dim) }
    }

    pub(crate) fn from_parts(x: DMatrix<f64>, y: DMatrix<f64>) -> Self {
        Self { x, y }
    }

    pub fn n_modes(&self) -> usize {
        self.x.nrows() / 2
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Smallest eigenvalue of the Hermitian matrix `Y + i(Omega - X Omega X^T)`.
    pub fn complete_positivity_margin(&self) -> f64 {
        let n = self.x.nrows();
        let omega = symplectic_form(n / 2);
        let im = &omega - &self.x * &omega * self.x.transpose();
        // real embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix
        let mut emb = DMatrix::zeros(2 * n, 2 * n);
        emb.view_mut((0, 0), (n, n)).copy_from(&self.y);
        emb.view_mut((n, n), (n, n)).copy_from(&self.y);
        emb.view_mut((0, n), (n, n)).copy_from(&(-&im));
        emb.view_mut((n, 0), (n, n)).copy_from(&im);
        SymmetricEigen::new(emb).eigenvalues.min()
    }

    /// `next` applied after `self`.
    pub fn then(&self, next: &GaussianCPMap) -> Result<GaussianCPMap> {
        if next.x.nrows() != self.x.nrows() {
            return Err(Error::Dimension { expected: self.x.nrows(), found: next.x.nrows() });
        }
        let x = &next.x * &self.x;
        let y = &next.x * &self.y * next.x.transpose() + &next.y;
        Ok(Self { x, y })
    }
}

pub fn apply_cp(sigma: &CovarianceMatrix, map: &GaussianCPMap) -> Result<CovarianceMatrix> {
    if sigma.data.nrows() != map.x.nrows() {
        return Err(Error::Dimension { expected: map.x.nrows(), found: sigma.data.nrows() });
    }
    let out = &map.x * &sigma.data * map.x.transpose() + &map.y;
    Ok(CovarianceMatrix::symmetrized(out))
}

/// Lifts a map on `target_modes.len()` modes to `total_modes`, acting as
/// the identity on every other mode.
pub fn embed_on_modes(map: &GaussianCPMap, target_modes: &[usize], total_modes: usize) -> Result<GaussianCPMap> {
    if target_modes.len() != map.n_modes() {
        return Err(Error::Dimension { expected: map.n_modes(), found: target_modes.len() });
    }
    for (i, &m) in target_modes.iter().enumerate() {
        if m >= total_modes {
            return Err(Error::ModeIndex { index: m, modes: total_modes });
        }
        if target_modes[..i].contains(&m) {
            return domain(format!("mode {m} listed twice"));
        }
    }
    let dim = 2 * total_modes;
    let mut x = DMatrix::identity(dim, dim);
    let mut y = DMatrix::zeros(dim, dim);
    for &m in target_modes {
        x.fixed_view_mut::<2, 2>(2 * m, 2 * m).fill(0.0);
    }
    for (a, &ta) in target_modes.iter().enumerate() {
        for (b, &tb) in target_modes.iter().enumerate() {
            x.fixed_view_mut::<2, 2>(2 * ta, 2 * tb).copy_from(&map.x.fixed_view::<2, 2>(2 * a, 2 * b));
            y.fixed_view_mut::<2, 2>(2 * ta, 2 * tb).copy_from(&map.y.fixed_view::<2, 2>(2 * a, 2 * b));
        }
    }
    Ok(GaussianCPMap { x, y })
}

/// Two-mode beam splitter with transmissivity `t`:
/// `[[sqrt(t) 1, sqrt(1-t) 1], [-sqrt(1-t) 1, sqrt(t) 1]]`.
pub fn beam_splitter_symplectic(t: f64) -> Result<GaussianCPMap> {
    if !(0.0..=1.0).contains(&t) {
        return domain(format!("transmissivity {t} outside [0, 1]"));
    }
    let (c, s) = (t.sqrt(), (1.0 - t).sqrt());
    let x = DMatrix::from_row_slice(
        4,
        4,
        &[
            c, 0.0, s, 0.0, //
            0.0, c, 0.0, s, //
            -s, 0.0, c, 0.0, //
            0.0, -s, 0.0, c,
        ],
    );
    Ok(GaussianCPMap { x, y: DMatrix::zeros(4, 4) })
}

/// Quadrature probed by a homodyne detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrature {
    Q,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::Q => 0,
            Quadrature::P => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasurementKind {
    HomodyneQ,
    HomodyneP,
    Heterodyne,
}

impl MeasurementKind {
    pub fn homodyne(quadrature: Quadrature) -> Self {
        match quadrature {
            Quadrature::Q => MeasurementKind::HomodyneQ,
            Quadrature::P => MeasurementKind::HomodyneP,
        }
    }
}

/// Covariance matrix of the remaining modes after a Gaussian measurement on
/// `measured_mode`. Homodyne detection is the rank-one limit of the Schur
/// complement, `sigma_A - c c^T / sigma_B[x, x]` with `c` the column of the
/// measured quadrature. The result does not depend on the outcome.
pub fn condition_on_measurement(
    sigma: &CovarianceMatrix,
    measured_mode: usize,
    kind: MeasurementKind,
) -> Result<CovarianceMatrix> {
    let n = sigma.n_modes();
    if measured_mode >= n {
        return Err(Error::ModeIndex { index: measured_mode, modes: n });
    }
    if n < 2 {
        return domain("conditioning a single-mode state leaves nothing behind");
    }
    let rest: Vec<usize> = (0..n).filter(|&m| m != measured_mode).collect();
    let ri = quadrature_indices(&rest);
    let dim = ri.len();
    let s = &sigma.data;
    let base = 2 * measured_mode;
    let mut cond = DMatrix::from_fn(dim, dim, |i, j| s[(ri[i], ri[j])]);
    match kind {
        MeasurementKind::HomodyneQ | MeasurementKind::HomodyneP => {
            let col = base
                + match kind {
                    MeasurementKind::HomodyneQ => 0,
                    _ => 1,
                };
            let var = s[(col, col)];
            if !(var > 0.0) {
                return Err(Error::Numerical(format!("measured quadrature variance {var} <= 0")));
            }
            for i in 0..dim {
                for j in 0..dim {
                    cond[(i, j)] -= s[(ri[i], col)] * s[(ri[j], col)] / var;
                }
            }
        }
        MeasurementKind::Heterodyne => {
            let b = sigma.block(measured_mode, measured_mode) + Matrix2::identity();
            let inv = b.try_inverse().ok_or_else(|| Error::Numerical("singular heterodyne kernel".into()))?;
            let c = DMatrix::from_fn(dim, 2, |i, j| s[(ri[i], base + j)]);
            let inv = DMatrix::from_fn(2, 2, |i, j| inv[(i, j)]);
            cond -= &c * inv * c.transpose();
        }
    }
    Ok(CovarianceMatrix::symmetrized(cond))
}

/// Variance of `quadrature` on `mode`.
pub fn quadrature_variance(sigma: &CovarianceMatrix, mode: usize, quadrature: Quadrature) -> f64 {
    let i = 2 * mode + quadrature.offset();
    sigma.data[(i, i)]
}

fn raw_symplectic_eigenvalues(sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = sigma.nrows() / 2;
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::NonPhysical(min));
    }
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    // A = sigma^1/2 Omega sigma^1/2 is antisymmetric; A^T A carries d_k^2 twice
    let a = &root * symplectic_form(n) * &root;
    let gram = a.transpose() * &a;
    let mut squares: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
    squares.sort_by(|x, y| y.total_cmp(x));
    Ok(squares.chunks(2).map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt()).collect())
}

/// Symplectic spectrum in descending order. Values within `CLAMP_TOL` of
/// one are clamped to one; anything under `1 - PHYSICAL_TOL` is an error.
pub fn symplectic_eigenvalues(sigma: &CovarianceMatrix) -> Result<Vec<f64>> {
    let mut d = raw_symplectic_eigenvalues(&sigma.data)?;
    for x in d.iter_mut() {
        if *x < 1.0 - PHYSICAL_TOL {
            return Err(Error::NonPhysical(*x));
        }
    }
    for x in d.iter_mut() {
        record_symplectic(*x);
        if (*x - 1.0).abs() <= CLAMP_TOL {
            *x = 1.0;
        }
    }
    Ok(d)
}

/// Entropy in bits of a thermal mode with symplectic eigenvalue `x`.
pub fn entropy_h(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 1.0 - PHYSICAL_TOL {
        return domain(format!("symplectic eigenvalue {x} below 1"));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    let plus = 0.5 * (x + 1.0);
    let minus = 0.5 * (x - 1.0);
    Ok(plus * plus.log2() - minus * minus.log2())
}

/// Von Neumann entropy in bits, `sum_k h(d_k)`.
pub fn von_neumann_entropy(sigma: &CovarianceMatrix) -> Result<f64> {
    symplectic_eigenvalues(sigma)?.into_iter().map(entropy_h).sum()
}
