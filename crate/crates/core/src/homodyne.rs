//! Homodyne statistics: quadrature marginals of Fock-space states, 50-bin
//! histograms, and context/query measurement plans.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{partial_trace_keep, DensityMatrix};
use crate::phase_space::trapezoid;

pub const NUM_BINS: usize = 50;
pub const X_LO: f64 = -8.0;
pub const X_HI: f64 = 8.0;
pub const GRID_POINTS: usize = 401;
pub const PHASES_PER_MODE: usize = 100;

/// Local quadrature measurement `x_mode(phase)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HomodyneSetting {
    pub mode: usize,
    pub phase: f64,
}

impl HomodyneSetting {
    pub fn new(mode: usize, phase: f64, num_modes: usize) -> Result<Self> {
        if mode >= num_modes {
            return Err(Error::ModeOutOfRange { mode, modes: num_modes });
        }
        if !(0.0..PI).contains(&phase) {
            return Err(Error::InvalidArgument(format!("phase {phase} outside [0, pi)")));
        }
        Ok(Self { mode, phase })
    }
}

/// Outcome distribution over 50 equal bins spanning `[X_LO, X_HI]`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Histogram {
    pub bins: Vec<f64>,
}

impl Histogram {
    pub fn new(bins: Vec<f64>) -> Result<Self> {
        let h = Self { bins };
        h.validate()?;
        Ok(h)
    }

    pub fn uniform() -> Self {
        Self { bins: vec![1.0 / NUM_BINS as f64; NUM_BINS] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.len() != NUM_BINS {
            return Err(Error::BinningMismatch(format!("expected {NUM_BINS} bins, found {}", self.bins.len())));
        }
        if self.bins.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::Numerical("negative or non-finite histogram bin".into()));
        }
        let total: f64 = self.bins.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!("histogram sums to {total}")));
        }
        Ok(())
    }

    pub fn bin_width() -> f64 {
        (X_HI - X_LO) / NUM_BINS as f64
    }

    pub fn bin_centers() -> Vec<f64> {
        (0..NUM_BINS).map(|k| X_LO + (k as f64 + 0.5) * Self::bin_width()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HomodyneRecord {
    pub setting: HomodyneSetting,
    pub histogram: Histogram,
}

/// The 401-point uniform grid on `[X_LO, X_HI]`.
pub fn standard_grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|i| X_LO + (X_HI - X_LO) * i as f64 / (GRID_POINTS - 1) as f64).collect()
}

/// Hermite functions `psi_0..psi_{n-1}` at `x` by the normalized recurrence
/// `psi_{k+1} = sqrt(2/(k+1)) x psi_k - sqrt(k/(k+1)) psi_{k-1}`.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(PI.powf(-0.25) * (-x * x / 2.0).exp());
    if n > 1 {
        out.push(2f64.sqrt() * x * out[0]);
    }
    for k in 1..n.saturating_sub(1) {
        let next = (2.0 / (k + 1) as f64).sqrt() * x * out[k] - (k as f64 / (k + 1) as f64).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Precomputed Hermite-function table for fast marginals of one cutoff.
#[derive(Clone, Debug)]
pub struct MarginalEvaluator {
    grid: Vec<f64>,
    /// `psi[(n, j)] = psi_n(grid[j])`
    psi: DMatrix<f64>,
}

impl MarginalEvaluator {
    pub fn new(cutoff: usize, grid: Vec<f64>) -> Self {
        let mut psi = DMatrix::zeros(cutoff, grid.len());
        for (j, &x) in grid.iter().enumerate() {
            for (n, v) in hermite_functions(cutoff, x).into_iter().enumerate() {
                psi[(n, j)] = v;
            }
        }
        Self { grid, psi }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `p(x|theta) = sum_{n,n'} rho_{n n'} e^{i (n' - n) theta} psi_n(x) psi_{n'}(x)`
    /// for a single-mode density matrix.
    pub fn density(&self, rho: &DMatrix<C64>, theta: f64) -> Result<Vec<f64>> {
        let d = self.psi.nrows();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: rho.nrows() });
        }
        // u_n(x) = e^{i n theta} psi_n(x), p = u^dag rho u
        let u = DMatrix::from_fn(d, self.grid.len(), |n, j| C64::from_polar(self.psi[(n, j)], n as f64 * theta));
        let ru = rho * &u;
        let out: Vec<f64> = (0..self.grid.len())
            .map(|j| u.column(j).iter().zip(ru.column(j).iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re.max(0.0))
            .collect();
        let mass = trapezoid(&self.grid, &out);
        if (1.0 - mass).abs() > 1e-3 {
            return Err(Error::GridMassLoss(1.0 - mass));
        }
        Ok(out)
    }

    pub fn histogram(&self, rho: &DMatrix<C64>, theta: f64) -> Result<Histogram> {
        Ok(bin_histogram(&self.density(rho, theta)?, &self.grid)?.0)
    }
}

/// Quadrature density of one mode of `rho` on `grid`.
pub fn fock_marginal(rho: &DensityMatrix, setting: HomodyneSetting, grid: &[f64]) -> Result<Vec<f64>> {
    let reduced = if rho.spec.num_modes() == 1 {
        if setting.mode != 0 {
            return Err(Error::ModeOutOfRange { mode: setting.mode, modes: 1 });
        }
        rho.clone()
    } else {
        partial_trace_keep(rho, setting.mode)?
    };
    MarginalEvaluator::new(reduced.dim(), grid.to_vec()).density(&reduced.elements, setting.phase)
}

/// Integrates a density into the 50 bins by the trapezoid rule on each grid
/// interval, assigned by interval midpoint. Mass outside `[X_LO, X_HI]` is
/// folded into the edge bins; its amount is returned alongside.
pub fn bin_histogram(density: &[f64], grid: &[f64]) -> Result<(Histogram, f64)> {
    if density.len() != grid.len() || grid.len() < 2 {
        return Err(Error::DimensionMismatch { expected: grid.len(), actual: density.len() });
    }
    let width = Histogram::bin_width();
    let mut bins = vec![0.0; NUM_BINS];
    let mut folded = 0.0;
    for j in 0..grid.len() - 1 {
        let mass = 0.5 * (grid[j + 1] - grid[j]) * (density[j] + density[j + 1]);
        let mid = 0.5 * (grid[j] + grid[j + 1]);
        let k = if mid < X_LO {
            folded += mass;
            0
        } else if mid >= X_HI {
            folded += mass;
            NUM_BINS - 1
        } else {
            (((mid - X_LO) / width) as usize).min(NUM_BINS - 1)
        };
        bins[k] += mass;
    }
    let total: f64 = bins.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroDensity);
    }
    if folded > 0.0 {
        log::warn!("folded {folded:e} of out-of-range mass into edge bins");
    }
    bins.iter_mut().for_each(|b| *b /= total);
    Ok((Histogram { bins }, folded))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStage {
    Pretrain,
    MultimodeNegativity,
    Noon,
    Cat,
    Squeezed,
}

impl std::str::FromStr for PlanStage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" | "ood" => Ok(Self::Pretrain),
            "multimode-negativity" | "negativity" => Ok(Self::MultimodeNegativity),
            "noon" => Ok(Self::Noon),
            "cat" => Ok(Self::Cat),
            "squeezed" => Ok(Self::Squeezed),
            other => Err(Error::InvalidArgument(format!("unknown measurement stage {other}"))),
        }
    }
}

/// The `k`-th phase of the per-mode grid, `k pi / 100`.
pub fn grid_phase(k: usize) -> f64 {
    PI * k as f64 / PHASES_PER_MODE as f64
}

/// Fixed phases per mode for the stages that do not sample.
pub fn fixed_phases(stage: PlanStage) -> Option<Vec<f64>> {
    match stage {
        PlanStage::MultimodeNegativity => Some(vec![0.0, PI / 3.0, 2.0 * PI / 3.0]),
        PlanStage::Squeezed => Some(vec![0.0, PI / 4.0, PI / 2.0]),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeasurementPlan {
    pub all_settings: Vec<HomodyneSetting>,
    /// Indices into `all_settings`.
    pub context: Vec<usize>,
    pub query: Vec<usize>,
}

impl MeasurementPlan {
    pub fn context_settings(&self) -> Vec<HomodyneSetting> {
        self.context.iter().map(|&i| self.all_settings[i]).collect()
    }

    pub fn query_settings(&self) -> Vec<HomodyneSetting> {
        self.query.iter().map(|&i| self.all_settings[i]).collect()
    }
}

/// Context sizes per mode drawn uniformly from `[10, 15]`.
pub const CONTEXT_PER_MODE: (usize, usize) = (10, 15);

/// Samples a context subset of the full 100-phase grid of each mode, or the
/// fixed settings of the negativity and squeezed stages.
pub fn sample_measurement_plan(num_modes: usize, stage: PlanStage, seed: u64) -> Result<MeasurementPlan> {
    if num_modes == 0 {
        return Err(Error::InvalidArgument("plan needs at least one mode".into()));
    }
    if let Some(phases) = fixed_phases(stage) {
        let all_settings: Vec<HomodyneSetting> =
            (0..num_modes).flat_map(|mode| phases.iter().map(move |&phase| HomodyneSetting { mode, phase })).collect();
        let context = (0..all_settings.len()).collect();
        return Ok(MeasurementPlan { all_settings, context, query: Vec::new() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all_settings: Vec<HomodyneSetting> = (0..num_modes)
        .flat_map(|mode| (0..PHASES_PER_MODE).map(move |k| HomodyneSetting { mode, phase: grid_phase(k) }))
        .collect();
    let mut context = Vec::new();
    for mode in 0..num_modes {
        let s = rand::Rng::random_range(&mut rng, CONTEXT_PER_MODE.0..=CONTEXT_PER_MODE.1);
        let mut picked: Vec<usize> = sample(&mut rng, PHASES_PER_MODE, s).into_iter().collect();
        picked.sort_unstable();
        context.extend(picked.into_iter().map(|k| mode * PHASES_PER_MODE + k));
    }
    let query = (0..all_settings.len()).filter(|i| context.binary_search(i).is_err()).collect();
    Ok(MeasurementPlan { all_settings, context, query })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockSpec, PureState};
    use crate::states::make_squeezed_vacuum;

    fn vacuum(d: usize) -> DensityMatrix {
        PureState::vacuum(FockSpec::new(1, d).unwrap()).to_density()
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let grid: Vec<f64> = (0..4001).map(|i| -10.0 + 20.0 * i as f64 / 4000.0).collect();
        let table: Vec<Vec<f64>> = grid.iter().map(|&x| hermite_functions(8, x)).collect();
        for n in 0..8 {
            for k in 0..8 {
                let f: Vec<f64> = table.iter().map(|row| row[n] * row[k]).collect();
                let overlap = trapezoid(&grid, &f);
                assert!((overlap - if n == k { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vacuum_and_single_photon_marginals() {
        let grid = standard_grid();
        let one = PureState::basis(FockSpec::new(1, 4).unwrap(), &[1]).unwrap().to_density();
        for theta in [0.0, 1.1, 3.0] {
            let setting = HomodyneSetting { mode: 0, phase: theta };
            let p0 = fock_marginal(&vacuum(6), setting, &grid).unwrap();
            let p1 = fock_marginal(&one, setting, &grid).unwrap();
            for (j, &x) in grid.iter().enumerate() {
                assert!((p0[j] - (-x * x).exp() / PI.sqrt()).abs() < 1e-12);
                assert!((p1[j] - 2.0 * x * x * (-x * x).exp() / PI.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn squeezed_variance_at_zero_phase() {
        let rho = make_squeezed_vacuum(0.1, 1.0).unwrap();
        let grid = standard_grid();
        let p = fock_marginal(&rho, HomodyneSetting { mode: 0, phase: 0.0 }, &grid).unwrap();
        let x2: Vec<f64> = grid.iter().zip(&p).map(|(x, p)| x * x * p).collect();
        assert!((trapezoid(&grid, &x2) - (-0.2f64).exp() / 2.0).abs() < 1e-5);
    }

    #[test]
    fn phase_shift_by_pi_mirrors() {
        let spec = FockSpec::new(1, 5).unwrap();
        let psi = PureState::from_amplitudes(
            spec,
            nalgebra::DVector::from_fn(5, |n, _| C64::from_polar(1.0 + n as f64, 0.7 * n as f64)),
        )
        .unwrap();
        let ev = MarginalEvaluator::new(5, standard_grid());
        let a = ev.density(&psi.to_density().elements, 0.4).unwrap();
        let b = ev.density(&psi.to_density().elements, 0.4 + PI).unwrap();
        for j in 0..GRID_POINTS {
            assert!((a[j] - b[GRID_POINTS - 1 - j]).abs() < 1e-9);
        }
    }

    #[test]
    fn binning_properties() {
        let grid = standard_grid();
        let uniform = vec![1.0 / 16.0; GRID_POINTS];
        let (h, folded) = bin_histogram(&uniform, &grid).unwrap();
        assert_eq!(folded, 0.0);
        assert!(h.bins.iter().all(|b| (b - 0.02).abs() < 1e-12));
        let gauss: Vec<f64> = grid.iter().map(|x| (-x * x).exp() / PI.sqrt()).collect();
        let (h, _) = bin_histogram(&gauss, &grid).unwrap();
        h.validate().unwrap();
        for k in 0..NUM_BINS {
            assert!((h.bins[k] - h.bins[NUM_BINS - 1 - k]).abs() < 1e-9);
        }
        assert!(matches!(bin_histogram(&vec![0.0; GRID_POINTS], &grid), Err(Error::ZeroDensity)));
    }

    #[test]
    fn out_of_range_mass_is_folded() {
        let grid: Vec<f64> = (0..=500).map(|i| -10.0 + 0.04 * i as f64).collect();
        let dens: Vec<f64> = grid.iter().map(|&x| if x < -8.5 { 1.0 } else { 0.0 }).collect();
        let (h, folded) = bin_histogram(&dens, &grid).unwrap();
        assert!(folded > 0.0);
        assert!((h.bins[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_stage_plans() {
        let plan = sample_measurement_plan(1, PlanStage::Squeezed, 0).unwrap();
        let phases: Vec<f64> = plan.context_settings().iter().map(|s| s.phase).collect();
        assert_eq!(phases, vec![0.0, PI / 4.0, PI / 2.0]);
        let plan = sample_measurement_plan(5, PlanStage::MultimodeNegativity, 0).unwrap();
        assert_eq!(plan.context.len(), 15);
    }

    #[test]
    fn pretrain_plans_are_disjoint_and_deterministic() {
        for seed in 0..20 {
            let plan = sample_measurement_plan(2, PlanStage::Pretrain, seed).unwrap();
            assert!((20..=30).contains(&plan.context.len()));
            assert_eq!(plan.context.len() + plan.query.len(), 200);
            assert!(plan.context.iter().all(|c| !plan.query.contains(c)));
            assert_eq!(plan, sample_measurement_plan(2, PlanStage::Pretrain, seed).unwrap());
        }
        assert!("bogus".parse::<PlanStage>().is_err());
    }

    #[test]
    fn setting_validation() {
        assert!(HomodyneSetting::new(0, PI, 1).is_err());
        assert!(HomodyneSetting::new(2, 0.1, 2).is_err());
        assert!(HomodyneSetting::new(1, 0.1, 2).is_ok());
    }
}
