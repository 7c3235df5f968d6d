//! Gaussian states as means and covariances, with single-photon
//! subtraction or addition handled analytically.
//!
//! Quadratures are ordered `(x_0, p_0, x_1, p_1, ...)` with
//! `x = (a + a^dag)/sqrt 2`, so the vacuum covariance is `I/2`. The homodyne
//! quadrature at phase `theta` is `x cos(theta) + p sin(theta)`.
//!
//! For a Gaussian Wigner function `W0` with mean `d` and covariance `V`,
//! the heralded states `a_k rho a_k^dag` and `a_k^dag rho a_k` have
//!
//! ```text
//! W(r) = (|a + w.s|^2 + c) W0(r) / N,    s = r - d
//! ```
//!
//! where `e` is the complex unit vector with `1` at `x_k` and `i` at `p_k`,
//! `M = I - G/2` (subtraction) or `I + G/2` (addition), `G = V^-1`,
//! `a = conj(e).d`, `w = M conj(e)`, `c = +-(M_xx + M_pp)/2` and `N` the
//! normalization `|a|^2 + w^T V conj(w) + c`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::states::circuit::{BeamSplitter, GaussianCircuit};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianState {
    pub num_modes: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(num_modes: usize) -> Self {
        Self {
            num_modes,
            mean: DVector::zeros(2 * num_modes),
            cov: DMatrix::identity(2 * num_modes, 2 * num_modes) * 0.5,
        }
    }

    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() % 2 != 0 || mean.is_empty() {
            return Err(Error::InvalidArgument("mean must have even nonzero length".into()));
        }
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), actual: cov.nrows() });
        }
        let g = Self { num_modes: mean.len() / 2, mean, cov };
        g.validate()?;
        Ok(g)
    }

    /// Checks symmetry and the uncertainty relation `V + i Omega / 2 >= 0`.
    pub fn validate(&self) -> Result<()> {
        let asym = (&self.cov - self.cov.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::Numerical(format!("covariance asymmetric by {asym:e}")));
        }
        let min = self.symplectic_eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < 0.5 - 1e-9 {
            return Err(Error::Numerical(format!("symplectic eigenvalue {min} below 1/2")));
        }
        Ok(())
    }

    /// Symplectic eigenvalues: the positive half of the spectrum of the
    /// Hermitian matrix `V^1/2 (i Omega) V^1/2`.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let n = 2 * self.num_modes;
        let eig = self.cov.clone().symmetric_eigen();
        let sqrt_v = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        let sv = sqrt_v.map(|v| C64::new(v, 0.0));
        let herm = &sv * DMatrix::from_fn(n, n, |i, j| C64::new(0.0, omega(i, j))) * &sv;
        let mut nus: Vec<f64> = match crate::fock::hermitian_eig(&herm) {
            Ok((vals, _)) => vals.into_iter().skip(self.num_modes).collect(),
            Err(_) => vec![f64::NAN; self.num_modes],
        };
        nus.sort_by(|a, b| a.total_cmp(b));
        nus
    }

    pub fn quadrature_direction(&self, mode: usize, theta: f64) -> Result<DVector<f64>> {
        if mode >= self.num_modes {
            return Err(Error::ModeOutOfRange { mode, modes: self.num_modes });
        }
        let mut u = DVector::zeros(2 * self.num_modes);
        u[2 * mode] = theta.cos();
        u[2 * mode + 1] = theta.sin();
        Ok(u)
    }

    /// Mean photon number of one mode.
    pub fn mean_photons(&self, mode: usize) -> f64 {
        let (x, p) = (2 * mode, 2 * mode + 1);
        (self.cov[(x, x)] + self.cov[(p, p)] - 1.0 + self.mean[x].powi(2) + self.mean[p].powi(2)) / 2.0
    }

    fn apply_symplectic(&mut self, s: &DMatrix<f64>) {
        self.mean = s * &self.mean;
        self.cov = s * &self.cov * s.transpose();
    }

    /// Gaussian Wigner function at phase-space point `r`.
    pub fn wigner(&self, r: &DVector<f64>) -> Result<f64> {
        let gamma = self.precision()?;
        let s = r - &self.mean;
        Ok(self.wigner_prefactor()? * (-0.5 * s.dot(&(&gamma * &s))).exp())
    }

    fn precision(&self) -> Result<DMatrix<f64>> {
        self.cov.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Numerical("covariance not positive definite".into()))
    }

    fn wigner_prefactor(&self) -> Result<f64> {
        let det = self.cov.determinant();
        if !(det > 0.0) {
            return Err(Error::Numerical("covariance not positive definite".into()));
        }
        Ok(1.0 / ((2.0 * PI).powi(self.num_modes as i32) * det.sqrt()))
    }
}

/// Symplectic form `Omega = (+) [[0, 1], [-1, 0]]`.
fn omega(i: usize, j: usize) -> f64 {
    if i / 2 != j / 2 {
        0.0
    } else if i % 2 == 0 && j % 2 == 1 {
        1.0
    } else if i % 2 == 1 && j % 2 == 0 {
        -1.0
    } else {
        0.0
    }
}

/// Phase-space action of a passive mode transform `a_j -> sum_k U_jk a_k`
/// restricted to `modes`.
fn passive_symplectic(n_modes: usize, modes: &[usize], u: &[[C64; 2]; 2]) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
    for (a, &ja) in modes.iter().enumerate() {
        for (b, &jb) in modes.iter().enumerate() {
            let z = u[a][b];
            s[(2 * ja, 2 * jb)] = z.re;
            s[(2 * ja, 2 * jb + 1)] = -z.im;
            s[(2 * ja + 1, 2 * jb)] = z.im;
            s[(2 * ja + 1, 2 * jb + 1)] = z.re;
        }
    }
    s
}

fn beam_splitter_symplectic(n_modes: usize, bs: &BeamSplitter) -> DMatrix<f64> {
    passive_symplectic(n_modes, &[bs.modes.0, bs.modes.1], &bs.mode_matrix())
}

/// Squeezer `S(xi)` on one mode: `a -> a cosh r - e^{i phi} a^dag sinh r`.
fn squeezer_symplectic(n_modes: usize, mode: usize, xi: C64) -> DMatrix<f64> {
    let (r, phi) = (xi.norm(), xi.arg());
    let mu = C64::new(r.cosh(), 0.0);
    let nu = -C64::from_polar(r.sinh(), phi);
    let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
    let (x, p) = (2 * mode, 2 * mode + 1);
    s[(x, x)] = (mu + nu).re;
    s[(x, p)] = -(mu - nu).im;
    s[(p, x)] = (mu + nu).im;
    s[(p, p)] = (mu - nu).re;
    s
}

/// Moments of `G |0>` for the circuit `G`.
pub fn circuit_to_gaussian(circuit: &GaussianCircuit) -> Result<GaussianState> {
    circuit.validate()?;
    let m = circuit.num_modes;
    let mut g = GaussianState::vacuum(m);
    for bs in &circuit.pre {
        g.apply_symplectic(&beam_splitter_symplectic(m, bs));
    }
    for mode in 0..m {
        let alpha = circuit.displacement[mode];
        g.mean[2 * mode] += 2f64.sqrt() * alpha.re;
        g.mean[2 * mode + 1] += 2f64.sqrt() * alpha.im;
        if circuit.squeezing[mode].norm() > 0.0 {
            g.apply_symplectic(&squeezer_symplectic(m, mode, circuit.squeezing[mode]));
        }
    }
    for bs in &circuit.post {
        g.apply_symplectic(&beam_splitter_symplectic(m, bs));
    }
    Ok(g)
}

/// Pure-loss channel on every mode.
pub fn loss_on_gaussian(g: &GaussianState, eta: &[f64]) -> Result<GaussianState> {
    if eta.len() != g.num_modes {
        return Err(Error::DimensionMismatch { expected: g.num_modes, actual: eta.len() });
    }
    if let Some(&bad) = eta.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::InvalidEfficiency(bad));
    }
    let n = 2 * g.num_modes;
    let k = DVector::from_fn(n, |i, _| eta[i / 2].sqrt());
    let mean = g.mean.component_mul(&k);
    let mut cov = DMatrix::from_fn(n, n, |i, j| k[i] * k[j] * g.cov[(i, j)]);
    for i in 0..n {
        cov[(i, i)] += (1.0 - eta[i / 2]) / 2.0;
    }
    Ok(GaussianState { num_modes: g.num_modes, mean, cov })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegaussKind {
    None,
    Subtracted,
    Added,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DegaussifiedState {
    pub base: GaussianState,
    pub kind: DegaussKind,
    pub mode: usize,
}

/// Precomputed pieces of the polynomial-times-Gaussian form.
#[derive(Clone, Debug)]
struct Analytic {
    a: C64,
    w: DVector<C64>,
    c: f64,
    norm: f64,
}

/// Heralded single-photon subtraction or addition on `mode`.
pub fn degaussify(g: &GaussianState, kind: DegaussKind, mode: usize) -> Result<DegaussifiedState> {
    if mode >= g.num_modes {
        return Err(Error::ModeOutOfRange { mode, modes: g.num_modes });
    }
    g.validate()?;
    let state = DegaussifiedState { base: g.clone(), kind, mode };
    if kind == DegaussKind::Subtracted {
        let p = g.mean_photons(mode);
        if p <= 1e-9 {
            return Err(Error::ZeroProbability(p));
        }
    }
    Ok(state)
}

impl DegaussifiedState {
    pub fn gaussian(base: GaussianState) -> Self {
        Self { base, kind: DegaussKind::None, mode: 0 }
    }

    pub fn num_modes(&self) -> usize {
        self.base.num_modes
    }

    fn analytic(&self) -> Result<Analytic> {
        let gamma = self.base.precision()?;
        let n = 2 * self.base.num_modes;
        let (x, p) = (2 * self.mode, 2 * self.mode + 1);
        let sign = match self.kind {
            DegaussKind::Subtracted => -1.0,
            _ => 1.0,
        };
        let m = DMatrix::<f64>::identity(n, n) + &gamma * (0.5 * sign);
        let (dx, dp) = (self.base.mean[x], self.base.mean[p]);
        let a = C64::new(dx, -dp);
        let w = DVector::from_fn(n, |i, _| C64::new(m[(i, x)], -m[(i, p)]));
        let c = -sign * 0.5 * (m[(x, x)] + m[(p, p)]);
        let vw = self.base.cov.map(|v| C64::new(v, 0.0)) * w.map(|z| z.conj());
        let norm = a.norm_sqr() + w.dot(&vw).re + c;
        if !(norm > 1e-12) {
            return Err(Error::ZeroProbability(norm));
        }
        Ok(Analytic { a, w, c, norm })
    }

    /// Wigner function at phase-space point `r`.
    pub fn wigner(&self, r: &DVector<f64>) -> Result<f64> {
        let w0 = self.base.wigner(r)?;
        if self.kind == DegaussKind::None {
            return Ok(w0);
        }
        let an = self.analytic()?;
        let s = r - &self.base.mean;
        let g = an.a + an.w.iter().zip(s.iter()).map(|(w, s)| w * s).sum::<C64>();
        Ok((g.norm_sqr() + an.c) * w0 / an.norm)
    }

    /// Mean photon number of the tagged mode before the heralded operation.
    pub fn base_photons(&self) -> f64 {
        self.base.mean_photons(self.mode)
    }
}

/// Density of the quadrature `x_mode(theta)` on `grid`.
pub fn marginal_density(state: &DegaussifiedState, mode: usize, theta: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let g = &state.base;
    let u = g.quadrature_direction(mode, theta)?;
    let vu = &g.cov * &u;
    let var = u.dot(&vu);
    let mu = u.dot(&g.mean);
    let gauss = |y: f64| (-(y - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    let out: Vec<f64> = if state.kind == DegaussKind::None {
        grid.iter().map(|&y| gauss(y)).collect()
    } else {
        let an = state.analytic()?;
        // conditional law of s given the measured quadrature y:
        // mean vu (y - mu) / var, covariance V - vu vu^T / var
        let wv: C64 = an.w.iter().zip(vu.iter()).map(|(w, v)| w * v).sum::<C64>() / var;
        let cond = &g.cov - &vu * vu.transpose() / var;
        let wc = cond.map(|v| C64::new(v, 0.0)) * an.w.map(|z| z.conj());
        let spread = an.w.dot(&wc).re;
        grid.iter()
            .map(|&y| {
                let q = an.a + wv * (y - mu);
                ((q.norm_sqr() + spread + an.c) / an.norm * gauss(y)).max(0.0)
            })
            .collect()
    };
    check_mass(grid, &out)?;
    Ok(out)
}

pub(crate) fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    grid.windows(2).zip(f.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn check_mass(grid: &[f64], density: &[f64]) -> Result<()> {
    let mass = trapezoid(grid, density);
    if (1.0 - mass).abs() > 1e-3 {
        return Err(Error::GridMassLoss(1.0 - mass));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WignerMinimum {
    pub value: f64,
    pub converged: bool,
}

/// Global minimum of the Wigner function (0 when it is nonnegative).
///
/// The polynomial factor depends on `s` only through the 2-vector
/// `z = b + A s` with rows of `A` the real and imaginary parts of `w`. For
/// fixed `z` the Gaussian factor is largest at the minimum-norm `s`, which
/// leaves a problem in at most two variables:
/// `(|z|^2 + c) exp(-(z - b)^T K^-1 (z - b) / 2)` with `K = A V A^T`.
pub fn wigner_min(state: &DegaussifiedState) -> Result<WignerMinimum> {
    if state.kind == DegaussKind::None {
        return Ok(WignerMinimum { value: 0.0, converged: true });
    }
    let an = state.analytic()?;
    if an.c >= 0.0 {
        return Ok(WignerMinimum { value: 0.0, converged: true });
    }
    let v = &state.base.cov;
    let n = v.nrows();
    let a_mat = DMatrix::from_fn(2, n, |i, j| if i == 0 { an.w[j].re } else { an.w[j].im });
    let k = &a_mat * v * a_mat.transpose();
    let k = Matrix2::new(k[(0, 0)], k[(0, 1)], k[(1, 0)], k[(1, 1)]);
    let b = Vector2::new(an.a.re, an.a.im);
    let eig = k.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    // directions with K eigenvalue ~0 cannot move z
    let dirs: Vec<Vector2<f64>> = (0..2)
        .filter(|&i| eig.eigenvalues[i] > 1e-14 * scale && eig.eigenvalues[i] > 1e-300)
        .map(|i| eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt())
        .collect();
    let c = an.c;
    let f = |t: &[f64]| -> f64 {
        let z = dirs.iter().zip(t).fold(b, |acc, (d, ti)| acc + d * *ti);
        let tt: f64 = t.iter().map(|x| x * x).sum();
        (z.norm_squared() + c) * (-0.5 * tt).exp()
    };
    let grad = |t: &[f64]| -> Vec<f64> {
        let z = dirs.iter().zip(t).fold(b, |acc, (d, ti)| acc + d * *ti);
        let tt: f64 = t.iter().map(|x| x * x).sum();
        let e = (-0.5 * tt).exp();
        let poly = z.norm_squared() + c;
        dirs.iter().zip(t).map(|(d, ti)| (2.0 * z.dot(d) - poly * ti) * e).collect()
    };
    let (best, converged) = multistart_minimize(dirs.len(), &f, &grad);
    let pref = state.base.wigner_prefactor()? / an.norm;
    Ok(WignerMinimum { value: (best.min(0.0)) * pref, converged })
}

/// 32-start gradient descent with backtracking on a function of `dim <= 2`
/// variables. Returns the smallest value found and whether the start that
/// found it reached the gradient tolerance.
fn multistart_minimize(dim: usize, f: &dyn Fn(&[f64]) -> f64, grad: &dyn Fn(&[f64]) -> Vec<f64>) -> (f64, bool) {
    if dim == 0 {
        return (f(&[]), true);
    }
    let mut best = f64::INFINITY;
    let mut best_converged = false;
    for start in 0..32 {
        let radius = 0.25 + 0.75 * (start / 8) as f64;
        let angle = 2.0 * PI * (start % 8) as f64 / 8.0 + 0.3 * (start / 8) as f64;
        let mut t: Vec<f64> = if dim == 1 {
            vec![radius * angle.cos().signum() * (1.0 + (start % 4) as f64 * 0.5)]
        } else {
            vec![radius * angle.cos(), radius * angle.sin()]
        };
        let mut val = f(&t);
        let mut step: f64 = 1.0;
        let mut converged = false;
        for _ in 0..5000 {
            let g = grad(&t);
            let gn2: f64 = g.iter().map(|x| x * x).sum();
            if gn2.sqrt() < 1e-8 {
                converged = true;
                break;
            }
            step = (step * 2.0).min(1e3);
            loop {
                let trial: Vec<f64> = t.iter().zip(&g).map(|(x, gi)| x - step * gi).collect();
                let tv = f(&trial);
                if tv <= val - 1e-4 * step * gn2 {
                    t = trial;
                    val = tv;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
            if step < 1e-16 {
                // no further decrease possible at machine precision
                converged = true;
                break;
            }
        }
        if val < best {
            best = val;
            best_converged = converged;
        }
    }
    (best, best_converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mode_squeezed(xi: f64) -> GaussianState {
        let mut c = GaussianCircuit::identity(1);
        c.squeezing[0] = C64::new(xi, 0.0);
        circuit_to_gaussian(&c).unwrap()
    }

    #[test]
    fn empty_circuit_is_vacuum() {
        let g = circuit_to_gaussian(&GaussianCircuit::identity(3)).unwrap();
        assert_eq!(g, GaussianState::vacuum(3));
    }

    #[test]
    fn real_squeezing_convention() {
        let g = single_mode_squeezed(0.3);
        assert!((g.cov[(0, 0)] - (-0.6f64).exp() / 2.0).abs() < 1e-14);
        assert!((g.cov[(1, 1)] - 0.6f64.exp() / 2.0).abs() < 1e-14);
        assert!(g.cov[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn loss_on_squeezed() {
        let g = loss_on_gaussian(&single_mode_squeezed(0.3), &[0.8]).unwrap();
        assert!((g.cov[(0, 0)] - (0.8 * (-0.6f64).exp() / 2.0 + 0.1)).abs() < 1e-14);
        assert!((g.cov[(1, 1)] - (0.8 * 0.6f64.exp() / 2.0 + 0.1)).abs() < 1e-14);
        let vac = loss_on_gaussian(&GaussianState::vacuum(2), &[0.3, 0.9]).unwrap();
        assert!((&vac.cov - GaussianState::vacuum(2).cov).norm() < 1e-15);
        assert!(loss_on_gaussian(&vac, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn symplectic_eigenvalues_of_pure_and_mixed() {
        let g = single_mode_squeezed(0.7);
        assert!((g.symplectic_eigenvalues()[0] - 0.5).abs() < 1e-10);
        let lossy = loss_on_gaussian(&g, &[0.5]).unwrap();
        assert!(lossy.symplectic_eigenvalues()[0] > 0.5);
        let bad = GaussianState { num_modes: 1, mean: DVector::zeros(2), cov: DMatrix::identity(2, 2) * 0.2 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn subtraction_preconditions() {
        assert!(matches!(degaussify(&GaussianState::vacuum(2), DegaussKind::Subtracted, 1), Err(Error::ZeroProbability(_))));
        let s = degaussify(&single_mode_squeezed(0.4), DegaussKind::Subtracted, 0).unwrap();
        assert!(s.base_photons() > 0.0);
        assert!(degaussify(&GaussianState::vacuum(1), DegaussKind::Added, 1).is_err());
    }

    #[test]
    fn photon_added_vacuum_is_single_photon() {
        let s = degaussify(&GaussianState::vacuum(1), DegaussKind::Added, 0).unwrap();
        let w0 = s.wigner(&DVector::zeros(2)).unwrap();
        assert!((w0 + 1.0 / PI).abs() < 1e-14);
        let min = wigner_min(&s).unwrap();
        assert!((min.value + 1.0 / PI).abs() < 1e-4);
        let grid: Vec<f64> = (0..401).map(|i| -8.0 + 16.0 * i as f64 / 400.0).collect();
        let dens = marginal_density(&s, 0, 0.0, &grid).unwrap();
        for (x, p) in grid.iter().zip(&dens) {
            let expected = 2.0 * x * x * (-x * x).exp() / PI.sqrt();
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn subtracted_coherent_state_is_unchanged() {
        let mut c = GaussianCircuit::identity(1);
        c.displacement[0] = C64::new(0.7, -0.2);
        let g = circuit_to_gaussian(&c).unwrap();
        let s = degaussify(&g, DegaussKind::Subtracted, 0).unwrap();
        for r in [DVector::from_vec(vec![0.3, -0.1]), DVector::from_vec(vec![1.0, 0.5])] {
            assert!((s.wigner(&r).unwrap() - g.wigner(&r).unwrap()).abs() < 1e-14);
        }
        assert_eq!(wigner_min(&s).unwrap().value, 0.0);
    }

    #[test]
    fn vacuum_marginal_any_phase() {
        let grid: Vec<f64> = (0..401).map(|i| -8.0 + 16.0 * i as f64 / 400.0).collect();
        let s = DegaussifiedState::gaussian(GaussianState::vacuum(2));
        for theta in [0.0, 0.4, 2.0] {
            let dens = marginal_density(&s, 1, theta, &grid).unwrap();
            for (x, p) in grid.iter().zip(&dens) {
                assert!((p - (-x * x).exp() / PI.sqrt()).abs() < 1e-14);
            }
        }
        assert!(matches!(marginal_density(&s, 0, 0.0, &[-0.5, 0.0, 0.5]), Err(Error::GridMassLoss(_))));
    }

    #[test]
    fn wigner_min_is_rotation_invariant() {
        // a R rho R^dag a^dag = R a rho a^dag R^dag up to a phase
        let g = single_mode_squeezed(0.6);
        let s = degaussify(&g, DegaussKind::Subtracted, 0).unwrap();
        let base = wigner_min(&s).unwrap();
        assert!(base.value < 0.0 && base.converged, "{base:?}");
        let t = 0.7f64;
        let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let mut rotated = g.clone();
        rotated.apply_symplectic(&rot);
        let moved = wigner_min(&degaussify(&rotated, DegaussKind::Subtracted, 0).unwrap()).unwrap();
        assert!((moved.value - base.value).abs() < 1e-9);
    }

    #[test]
    fn wigner_min_matches_grid_search() {
        let mut c = GaussianCircuit::identity(1);
        c.squeezing[0] = C64::from_polar(0.5, 0.9);
        c.displacement[0] = C64::new(0.3, 0.2);
        let g = loss_on_gaussian(&circuit_to_gaussian(&c).unwrap(), &[0.9]).unwrap();
        for kind in [DegaussKind::Subtracted, DegaussKind::Added] {
            let s = degaussify(&g, kind, 0).unwrap();
            let mut grid_min: f64 = f64::INFINITY;
            for i in 0..=400 {
                for j in 0..=400 {
                    let r = DVector::from_vec(vec![-4.0 + 0.02 * i as f64, -4.0 + 0.02 * j as f64]);
                    grid_min = grid_min.min(s.wigner(&r).unwrap());
                }
            }
            let min = wigner_min(&s).unwrap().value;
            assert!(min <= grid_min + 1e-12);
            assert!((min - grid_min.min(0.0)).abs() < 1e-3, "{kind:?}: {min} vs {grid_min}");
        }
    }

    #[test]
    fn gaussian_min_is_zero() {
        let s = DegaussifiedState::gaussian(single_mode_squeezed(0.5));
        assert_eq!(wigner_min(&s).unwrap().value, 0.0);
    }
}
