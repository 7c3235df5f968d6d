//! Dense truncated Fock-space linear algebra.
//!
//! Multimode basis ordering: a basis state |n_0, n_1, ..., n_{m-1}> sits at
//! flat index `sum_i n_i * d^(m-1-i)`, so mode 0 is the slowest-varying
//! index. Every module that builds or reads multimode vectors uses this
//! convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-8;

/// Mode count and per-mode cutoff of a truncated Fock space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FockSpec {
    num_modes: usize,
    cutoff: usize,
}

impl FockSpec {
    pub fn new(num_modes: usize, cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidCutoff(cutoff));
        }
        if num_modes == 0 {
            return Err(Error::InvalidArgument("need at least one mode".into()));
        }
        Ok(Self { num_modes, cutoff })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn total_dim(&self) -> usize {
        self.cutoff.pow(self.num_modes as u32)
    }

    /// Stride of `mode` in the flat index.
    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.num_modes - 1 - mode) as u32)
    }

    pub fn index_of(&self, occupation: &[usize]) -> Result<usize> {
        if occupation.len() != self.num_modes {
            return Err(Error::DimensionMismatch { expected: self.num_modes, actual: occupation.len() });
        }
        let mut idx = 0;
        for &n in occupation {
            if n >= self.cutoff {
                return Err(Error::RankTooLarge { rank: n, modes: self.num_modes, cutoff: self.cutoff });
            }
            idx = idx * self.cutoff + n;
        }
        Ok(idx)
    }

    pub fn occupation_of(&self, mut idx: usize) -> Vec<usize> {
        let mut occ = vec![0; self.num_modes];
        for slot in occ.iter_mut().rev() {
            *slot = idx % self.cutoff;
            idx /= self.cutoff;
        }
        occ
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes {
            return Err(Error::ModeOutOfRange { mode, modes: self.num_modes });
        }
        Ok(())
    }

    /// Cutoff heuristic for generated states: `r + ceil(10 xi_max) + 6`,
    /// clamped to [8, 24].
    pub fn heuristic_cutoff(stellar_rank: usize, xi_max: f64) -> usize {
        let d = stellar_rank + (10.0 * xi_max).ceil().max(0.0) as usize + 6;
        d.clamp(8, 24)
    }
}

/// Normalized pure state vector.
#[derive(Clone, Debug)]
pub struct PureState {
    pub spec: FockSpec,
    pub amplitudes: DVector<C64>,
}

impl PureState {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(spec: FockSpec, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != spec.total_dim() {
            return Err(Error::DimensionMismatch { expected: spec.total_dim(), actual: amplitudes.len() });
        }
        let norm = amplitudes.norm();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self { spec, amplitudes: amplitudes.unscale(norm) })
    }

    pub fn vacuum(spec: FockSpec) -> Self {
        let mut amps = DVector::zeros(spec.total_dim());
        amps[0] = C64::new(1.0, 0.0);
        Self { spec, amplitudes: amps }
    }

    pub fn basis(spec: FockSpec, occupation: &[usize]) -> Result<Self> {
        let mut amps = DVector::zeros(spec.total_dim());
        amps[spec.index_of(occupation)?] = C64::new(1.0, 0.0);
        Ok(Self { spec, amplitudes: amps })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Population of the highest Fock level of `mode`.
    pub fn top_level_population(&self, mode: usize) -> f64 {
        let d = self.spec.cutoff;
        let stride = self.spec.stride(mode);
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / stride) % d == d - 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Fails when any mode's top level holds at least `tol` population.
    pub fn check_truncation(&self, tol: f64) -> Result<()> {
        for mode in 0..self.spec.num_modes {
            let population = self.top_level_population(mode);
            if population >= tol {
                return Err(Error::Truncation { mode, population });
            }
        }
        Ok(())
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { spec: self.spec, elements: &self.amplitudes * self.amplitudes.adjoint() }
    }

    /// Reduced single-mode state, computed without forming the full density matrix.
    pub fn reduced(&self, keep_mode: usize) -> Result<DensityMatrix> {
        self.spec.check_mode(keep_mode)?;
        let d = self.spec.cutoff;
        let stride = self.spec.stride(keep_mode);
        let outer = self.spec.total_dim() / (d * stride);
        let mut red = DMatrix::<C64>::zeros(d, d);
        for hi in 0..outer {
            for lo in 0..stride {
                let base = hi * d * stride + lo;
                for n in 0..d {
                    let an = self.amplitudes[base + n * stride];
                    if an == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for k in 0..d {
                        red[(n, k)] += an * self.amplitudes[base + k * stride].conj();
                    }
                }
            }
        }
        Ok(DensityMatrix { spec: FockSpec::new(1, d)?, elements: red })
    }
}

/// Density matrix on a truncated multimode Fock space.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub spec: FockSpec,
    pub elements: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking shape, Hermiticity and unit trace.
    pub fn new(spec: FockSpec, elements: DMatrix<C64>) -> Result<Self> {
        let dim = spec.total_dim();
        if elements.nrows() != dim || elements.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: elements.nrows() });
        }
        let dev = hermitian_deviation(&elements);
        if dev > 1e-9 {
            return Err(Error::NotHermitian(dev));
        }
        let rho = Self { spec, elements };
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!("density matrix trace {tr} differs from 1")));
        }
        Ok(rho)
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    /// Photon-number populations of a single-mode state.
    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = hermitian_eig(&self.elements)?;
        Ok(vals[0])
    }

    /// Checks trace, Hermiticity and positivity invariants.
    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.elements);
        if dev > 1e-9 {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue()?;
        if min < -1e-8 {
            return Err(Error::Numerical(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// Divides by the trace.
    pub fn renormalized(mut self) -> Self {
        let tr = self.trace();
        self.elements.unscale_mut(tr);
        self
    }

    pub fn top_level_population(&self, mode: usize) -> f64 {
        let d = self.spec.cutoff;
        let stride = self.spec.stride(mode);
        (0..self.dim()).filter(|i| (i / stride) % d == d - 1).map(|i| self.elements[(i, i)].re).sum()
    }
}

pub(crate) fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Truncated annihilation operator: `sqrt(n)` at (n-1, n).
pub fn annihilation_matrix(d: usize) -> Result<DMatrix<C64>> {
    if d < 2 {
        return Err(Error::InvalidCutoff(d));
    }
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Number operator `diag(0, 1, ..., d-1)`.
pub fn number_matrix(d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Quadrature `cos(phi) x + sin(phi) p` with `x = (a + a^dag)/sqrt 2`.
pub fn quadrature_matrix(d: usize, phi: f64) -> Result<DMatrix<C64>> {
    let a = annihilation_matrix(d)?;
    let e = C64::from_polar(1.0, -phi);
    let q = a.map(|z| z * e) + a.adjoint().map(|z| z * e.conj());
    Ok(q.unscale(std::f64::consts::SQRT_2))
}

/// Embeds a single-mode operator as `I ⊗ op ⊗ I` on the full space.
pub fn embed_single_mode_op(op: &DMatrix<C64>, mode: usize, spec: FockSpec) -> Result<DMatrix<C64>> {
    spec.check_mode(mode)?;
    let d = spec.cutoff;
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: op.nrows() });
    }
    let left = d.pow(mode as u32);
    let right = spec.stride(mode);
    let id_l = DMatrix::<C64>::identity(left, left);
    let id_r = DMatrix::<C64>::identity(right, right);
    Ok(id_l.kronecker(op).kronecker(&id_r))
}

/// Applies a d x d operator to one mode of a flat state vector.
pub fn apply_single_mode(vec: &mut DVector<C64>, op: &DMatrix<C64>, mode: usize, spec: FockSpec) -> Result<()> {
    spec.check_mode(mode)?;
    let d = spec.cutoff;
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: op.nrows() });
    }
    apply_single_mode_slice(vec.as_mut_slice(), op, mode, spec);
    Ok(())
}

fn apply_single_mode_slice(data: &mut [C64], op: &DMatrix<C64>, mode: usize, spec: FockSpec) {
    let d = spec.cutoff;
    let stride = spec.stride(mode);
    let outer = spec.total_dim() / (d * stride);
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for hi in 0..outer {
        for lo in 0..stride {
            let base = hi * d * stride + lo;
            for (k, b) in buf.iter_mut().enumerate() {
                *b = data[base + k * stride];
            }
            for n in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (k, b) in buf.iter().enumerate() {
                    acc += op[(n, k)] * b;
                }
                data[base + n * stride] = acc;
            }
        }
    }
}

/// Applies a d^2 x d^2 operator to the ordered mode pair `(first, second)`;
/// the operator's own index is `n_first * d + n_second`.
pub fn apply_two_mode(
    vec: &mut DVector<C64>,
    op: &DMatrix<C64>,
    first: usize,
    second: usize,
    spec: FockSpec,
) -> Result<()> {
    spec.check_mode(first)?;
    spec.check_mode(second)?;
    if first == second {
        return Err(Error::InvalidArgument("two-mode operator needs distinct modes".into()));
    }
    let d = spec.cutoff;
    if op.nrows() != d * d || op.ncols() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, actual: op.nrows() });
    }
    let (s1, s2) = (spec.stride(first), spec.stride(second));
    let mut buf = vec![C64::new(0.0, 0.0); d * d];
    let data = vec.as_mut_slice();
    for base in 0..spec.total_dim() {
        if (base / s1) % d != 0 || (base / s2) % d != 0 {
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                buf[i * d + j] = data[base + i * s1 + j * s2];
            }
        }
        for i in 0..d {
            for j in 0..d {
                let row = i * d + j;
                let mut acc = C64::new(0.0, 0.0);
                for (k, b) in buf.iter().enumerate() {
                    if *b != C64::new(0.0, 0.0) {
                        acc += op[(row, k)] * b;
                    }
                }
                data[base + i * s1 + j * s2] = acc;
            }
        }
    }
    Ok(())
}

/// `(op on mode) * rho * (op on mode)^dag`, without building the embedded operator.
pub fn conjugate_single_mode(rho: &DMatrix<C64>, op: &DMatrix<C64>, mode: usize, spec: FockSpec) -> DMatrix<C64> {
    let mut left = rho.clone();
    for mut col in left.column_iter_mut() {
        let mut v: Vec<C64> = col.iter().copied().collect();
        apply_single_mode_slice(&mut v, op, mode, spec);
        for (c, x) in col.iter_mut().zip(v) {
            *c = x;
        }
    }
    let mut adj = left.adjoint();
    for mut col in adj.column_iter_mut() {
        let mut v: Vec<C64> = col.iter().copied().collect();
        apply_single_mode_slice(&mut v, op, mode, spec);
        for (c, x) in col.iter_mut().zip(v) {
            *c = x;
        }
    }
    adj.adjoint()
}

/// Reduced state of `keep_mode`.
pub fn partial_trace_keep(rho: &DensityMatrix, keep_mode: usize) -> Result<DensityMatrix> {
    let spec = rho.spec;
    spec.check_mode(keep_mode)?;
    let d = spec.cutoff;
    let stride = spec.stride(keep_mode);
    let outer = spec.total_dim() / (d * stride);
    let mut red = DMatrix::<C64>::zeros(d, d);
    for hi in 0..outer {
        for lo in 0..stride {
            let base = hi * d * stride + lo;
            for n in 0..d {
                for k in 0..d {
                    red[(n, k)] += rho.elements[(base + n * stride, base + k * stride)];
                }
            }
        }
    }
    Ok(DensityMatrix { spec: FockSpec::new(1, d)?, elements: red })
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues ascending,
/// eigenvectors as orthonormal columns in matching order.
pub fn hermitian_eig(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
    }
    let dev = hermitian_deviation(m);
    let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    // symmetrize so the solver sees an exactly Hermitian input
    let h = (m + m.adjoint()).unscale(2.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// `exp(-i t H)` for Hermitian `H`, via its eigen-decomposition.
pub fn unitary_from_hermitian(h: &DMatrix<C64>, t: f64) -> Result<DMatrix<C64>> {
    let (vals, vecs) = hermitian_eig(h)?;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::from_polar(1.0, -t * l)),
    ));
    Ok(&vecs * phases * vecs.adjoint())
}

/// `exp(K)` for anti-Hermitian `K` (so `iK` is Hermitian).
pub fn expm_anti_hermitian(k: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let h = k.map(|z| z * C64::new(0.0, 1.0));
    // exp(K) = exp(-i H) with H = iK
    unitary_from_hermitian(&h, 1.0)
}

/// Expectation value `Tr(rho A)`.
pub fn expectation(rho: &DMatrix<C64>, op: &DMatrix<C64>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            acc += rho[(i, j)] * op[(j, i)];
        }
    }
    acc
}
