//! Ground-truth property calculators: fidelity, purity, quantum Fisher
//! information, Wigner functions and histogram overlaps.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{self, hermitian_deviation, quadrature_matrix, DensityMatrix, PureState, HERMITIAN_TOL};
use crate::homodyne::Histogram;

/// Support cutoff on `lambda_k + lambda_l` in the QFI sum.
pub const QFI_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Purity,
    Fidelity,
    Qfi,
    CatSize,
    NegativityClass,
    WignerMin,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PropertyLabel {
    pub kind: LabelKind,
    pub value: f64,
}

impl PropertyLabel {
    pub fn validate(&self) -> Result<()> {
        let v = self.value;
        let ok = match self.kind {
            LabelKind::Purity => v > 0.0 && v <= 1.0 + 1e-9,
            LabelKind::Fidelity => (-1e-9..=1.0 + 1e-9).contains(&v),
            LabelKind::Qfi | LabelKind::CatSize => v >= 0.0,
            LabelKind::NegativityClass => v == 0.0 || v == 1.0,
            LabelKind::WignerMin => v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{:?} label out of range: {v}", self.kind)))
        }
    }
}

/// `<psi| rho |psi>`.
pub fn state_fidelity(rho: &DensityMatrix, ideal: &PureState) -> Result<f64> {
    if rho.dim() != ideal.amplitudes.len() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: ideal.amplitudes.len() });
    }
    let psi = &ideal.amplitudes;
    Ok(psi.dotc(&(&rho.elements * psi)).re)
}

/// `tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // tr(rho rho) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho
    rho.elements.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigen-decomposed state, reused across observables.
pub struct Spectral {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Spectral {
    pub fn new(rho: &DMatrix<C64>) -> Result<Self> {
        let (values, vectors) = fock::hermitian_eig(rho)?;
        Ok(Self { values, vectors })
    }

    /// `2 sum_{k,l} (lambda_k - lambda_l)^2 / (lambda_k + lambda_l) |<k|A|l>|^2`
    /// over pairs with `lambda_k + lambda_l > QFI_EPS`.
    pub fn qfi(&self, a: &DMatrix<C64>) -> Result<f64> {
        let dev = hermitian_deviation(a);
        if dev > HERMITIAN_TOL * a.norm().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        let ak = self.vectors.adjoint() * a * &self.vectors;
        Ok(self.weighted_sum(|k, l| ak[(k, l)].norm_sqr()))
    }

    fn weighted_sum(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let n = self.values.len();
        let mut total = 0.0;
        for k in 0..n {
            for l in 0..n {
                let (lk, ll) = (self.values[k].max(0.0), self.values[l].max(0.0));
                let s = lk + ll;
                if s > QFI_EPS && lk != ll {
                    total += (lk - ll).powi(2) / s * f(k, l);
                }
            }
        }
        2.0 * total
    }
}

pub fn qfi(rho: &DensityMatrix, a: &DMatrix<C64>) -> Result<f64> {
    if a.nrows() != rho.dim() || a.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), actual: a.nrows() });
    }
    Spectral::new(&rho.elements)?.qfi(a)
}

/// QFI maximized over quadratures `cos(phi) x + sin(phi) p`, `phi` in `[0, pi)`:
/// a 64-point scan refined by golden-section search.
pub fn qfi_optimal_quadrature(rho: &DensityMatrix) -> Result<(f64, f64)> {
    if rho.spec.num_modes() != 1 {
        return Err(Error::InvalidArgument("optimal-quadrature QFI needs a single-mode state".into()));
    }
    let d = rho.dim();
    let sp = Spectral::new(&rho.elements)?;
    let x = quadrature_matrix(d, 0.0)?;
    let p = quadrature_matrix(d, PI / 2.0)?;
    let xk = sp.vectors.adjoint() * x * &sp.vectors;
    let pk = sp.vectors.adjoint() * p * &sp.vectors;
    // F(phi) = A cos^2 + B sin^2 + 2 C sin cos
    let fa = sp.weighted_sum(|k, l| xk[(k, l)].norm_sqr());
    let fb = sp.weighted_sum(|k, l| pk[(k, l)].norm_sqr());
    let fc = sp.weighted_sum(|k, l| (xk[(k, l)] * pk[(k, l)].conj()).re);
    let f = |phi: f64| fa * phi.cos().powi(2) + fb * phi.sin().powi(2) + 2.0 * fc * phi.sin() * phi.cos();
    let n = 64;
    let step = PI / n as f64;
    let best = (0..n).max_by(|&i, &j| f(i as f64 * step).total_cmp(&f(j as f64 * step))).unwrap_or(0);
    let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut e) = (hi - g * (hi - lo), lo + g * (hi - lo));
    while hi - lo > 1e-12 {
        if f(c) > f(e) {
            hi = e;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        e = lo + g * (hi - lo);
    }
    let phi = (0.5 * (lo + hi)).rem_euclid(PI);
    Ok((f(phi), phi))
}

/// Histogram overlap `(sum_k sqrt(P_k Q_k))^2`, or the plain Bhattacharyya
/// coefficient when `squared` is false.
pub fn classical_fidelity_with(p: &Histogram, q: &Histogram, squared: bool) -> Result<f64> {
    if p.bins.len() != q.bins.len() {
        return Err(Error::BinningMismatch(format!("{} vs {} bins", p.bins.len(), q.bins.len())));
    }
    let bc: f64 = p.bins.iter().zip(&q.bins).map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt()).sum();
    let bc = bc.min(1.0);
    Ok(if squared { bc * bc } else { bc })
}

pub fn classical_fidelity(p: &Histogram, q: &Histogram) -> Result<f64> {
    classical_fidelity_with(p, q, true)
}

/// `10 log10(e^{2 xi})`.
pub fn squeezing_db(xi: f64) -> f64 {
    20.0 * xi / std::f64::consts::LN_10
}

pub fn xi_from_db(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

/// Wigner function of a single-mode state on the grid `xs x ps`, with
/// `W[(i, j)]` at `(xs[i], ps[j])`, by the iterative Laguerre recursion.
pub fn wigner_numeric(rho: &DensityMatrix, xs: &[f64], ps: &[f64]) -> Result<DMatrix<f64>> {
    if rho.spec.num_modes() != 1 {
        return Err(Error::InvalidArgument("Wigner evaluation needs a single-mode state".into()));
    }
    let w = DMatrix::from_fn(xs.len(), ps.len(), |i, j| wigner_point(&rho.elements, xs[i], ps[j]));
    if xs.len() > 1 && ps.len() > 1 {
        let row: Vec<f64> = (0..xs.len())
            .map(|i| crate::phase_space::trapezoid(ps, &w.row(i).iter().copied().collect::<Vec<_>>()))
            .collect();
        let mass = crate::phase_space::trapezoid(xs, &row);
        if (1.0 - mass).abs() > 1e-3 {
            return Err(Error::GridMassLoss(1.0 - mass));
        }
    }
    Ok(w)
}

/// Wigner function of a single-mode density matrix at one point.
pub fn wigner_point(rho: &DMatrix<C64>, x: f64, p: f64) -> f64 {
    let d = rho.nrows();
    let a = C64::new(x, p) / 2f64.sqrt();
    let mut wl = vec![C64::new(0.0, 0.0); d];
    wl[0] = C64::new((-2.0 * a.norm_sqr()).exp() / PI, 0.0);
    let mut w = rho[(0, 0)].re * wl[0].re;
    for n in 1..d {
        wl[n] = 2.0 * a * wl[n - 1] / (n as f64).sqrt();
        w += 2.0 * (rho[(0, n)] * wl[n]).re;
    }
    for m in 1..d {
        let mut temp = wl[m];
        wl[m] = (2.0 * a.conj() * temp - (m as f64).sqrt() * wl[m - 1]) / (m as f64).sqrt();
        w += (rho[(m, m)] * wl[m]).re;
        for n in m + 1..d {
            let next = (2.0 * a * wl[n - 1] - (m as f64).sqrt() * temp) / (n as f64).sqrt();
            temp = wl[n];
            wl[n] = next;
            w += 2.0 * (rho[(m, n)] * wl[n]).re;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpec;
    use crate::homodyne::NUM_BINS;
    use crate::states::{cat_ideal, coherent_state, make_cat, make_noon, make_squeezed_vacuum, noon_ideal};

    fn spec1(d: usize) -> FockSpec {
        FockSpec::new(1, d).unwrap()
    }

    #[test]
    fn fidelity_basics() {
        let psi = coherent_state(C64::new(0.5, 0.1), 12).unwrap();
        assert!((state_fidelity(&psi.to_density(), &psi).unwrap() - 1.0).abs() < 1e-12);
        let zero = PureState::basis(spec1(3), &[0]).unwrap();
        let one = PureState::basis(spec1(3), &[1]).unwrap();
        assert_eq!(state_fidelity(&one.to_density(), &zero).unwrap(), 0.0);
        assert!(state_fidelity(&one.to_density(), &PureState::vacuum(spec1(4))).is_err());
    }

    #[test]
    fn noon_one_fidelity_with_one_lossy_arm() {
        // (|1,0> + |0,1>)/sqrt 2 with loss eta on mode 1 only: the |1,0> branch
        // keeps amplitude, the |0,1> branch survives with sqrt(eta), and the
        // vacuum picks up weight (1 - eta)/2, so F = (1 + sqrt(eta))^2 / 4
        for eta in [0.3, 0.8] {
            let rho = make_noon(1, 0.0, [1.0, eta], 2).unwrap();
            let f = state_fidelity(&rho, &noon_ideal(1, 0.0, 2).unwrap()).unwrap();
            assert!((f - (1.0 + eta.sqrt()).powi(2) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn purity_values() {
        let mixed = DensityMatrix::new(spec1(2), DMatrix::from_diagonal(&nalgebra::dvector![C64::new(0.5, 0.0), C64::new(0.5, 0.0)])).unwrap();
        assert!((purity(&mixed) - 0.5).abs() < 1e-15);
        let cat = make_cat(C64::new(1.0, 0.0), 0.0, 0.7, 24).unwrap();
        let (vals, _) = fock::hermitian_eig(&cat.elements).unwrap();
        let from_eig: f64 = vals.iter().map(|l| l * l).sum();
        assert!((purity(&cat) - from_eig).abs() < 1e-10);
        assert!((purity(&cat_ideal(C64::new(1.0, 0.0), 0.0, 24).unwrap().to_density()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qfi_of_pure_state_is_four_variances() {
        let psi = coherent_state(C64::new(0.3, -0.4), 16).unwrap();
        let rho = psi.to_density();
        let x = quadrature_matrix(16, 0.3).unwrap();
        let mean = fock::expectation(&rho.elements, &x).re;
        let var = fock::expectation(&rho.elements, &(&x * &x)).re - mean * mean;
        assert!((qfi(&rho, &x).unwrap() - 4.0 * var).abs() < 1e-6);
    }

    #[test]
    fn qfi_zero_for_maximally_mixed_block() {
        let rho = DensityMatrix::new(spec1(2), DMatrix::identity(2, 2).map(|v: C64| v * 0.5)).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[C64::new(0.3, 0.0), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::new(-1.0, 0.0)]);
        assert_eq!(qfi(&rho, &a).unwrap(), 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(qfi(&rho, &bad), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn optimal_quadrature_qfi() {
        let (f, _) = qfi_optimal_quadrature(&PureState::vacuum(spec1(6)).to_density()).unwrap();
        assert!((f - 2.0).abs() < 1e-9);
        let rho = make_squeezed_vacuum(0.5, 1.0).unwrap();
        let (f, phi) = qfi_optimal_quadrature(&rho).unwrap();
        assert!((f - 2.0 * 1f64.exp()).abs() < 1e-6);
        assert!((phi - PI / 2.0).abs() < 1e-5);
        let p = quadrature_matrix(rho.dim(), PI / 2.0).unwrap();
        assert!((qfi(&rho, &p).unwrap() - 2.0 * 1f64.exp()).abs() < 1e-4);
    }

    #[test]
    fn classical_fidelity_cases() {
        let u = Histogram::uniform();
        assert!((classical_fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        let mut left = vec![0.0; NUM_BINS];
        let mut right = vec![0.0; NUM_BINS];
        for k in 0..25 {
            left[k] = 0.04;
            right[k + 25] = 0.04;
        }
        let (l, r) = (Histogram { bins: left }, Histogram { bins: right });
        assert_eq!(classical_fidelity(&l, &r).unwrap(), 0.0);
        assert!((classical_fidelity(&u, &l).unwrap() - 0.5).abs() < 1e-12);
        assert!((classical_fidelity_with(&u, &l, false).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(classical_fidelity(&u, &Histogram { bins: vec![1.0] }).is_err());
    }

    #[test]
    fn decibel_conversion() {
        assert_eq!(squeezing_db(0.0), 0.0);
        assert!((squeezing_db(1.2) - 10.42).abs() < 5e-3);
        assert!((xi_from_db(8.0) - 0.9210).abs() < 1e-4);
    }

    #[test]
    fn wigner_of_vacuum_photon_coherent() {
        let vac = PureState::vacuum(spec1(4)).to_density();
        assert!((wigner_point(&vac.elements, 0.0, 0.0) - 1.0 / PI).abs() < 1e-14);
        let one = PureState::basis(spec1(4), &[1]).unwrap().to_density();
        assert!((wigner_point(&one.elements, 0.0, 0.0) + 1.0 / PI).abs() < 1e-6);
        // coherent state peaks at (sqrt 2 Re alpha, sqrt 2 Im alpha)
        let alpha = C64::new(0.6, -0.9);
        let coh = coherent_state(alpha, 30).unwrap().to_density();
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        assert!((wigner_point(&coh.elements, x0, p0) - 1.0 / PI).abs() < 1e-8);
        assert!((wigner_point(&coh.elements, x0 + 0.5, p0 - 0.2) - (-0.29f64).exp() / PI).abs() < 1e-8);
        let grid: Vec<f64> = (0..121).map(|i| -6.0 + 0.1 * i as f64).collect();
        let w = wigner_numeric(&coh, &grid, &grid).unwrap();
        assert!(w.iter().all(|v| *v > -1e-10));
    }

    #[test]
    fn odd_cat_has_negative_center() {
        let cat = make_cat(C64::new(1.5, 0.0), PI, 1.0, 24).unwrap();
        let grid: Vec<f64> = (0..161).map(|i| -8.0 + 0.1 * i as f64).collect();
        let w = wigner_numeric(&cat, &grid, &grid).unwrap();
        assert!(w.min() < -0.05);
        assert!(wigner_point(&cat.elements, 0.0, 0.0) < -0.3);
    }
}
