use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::types::{Dataset, DatasetManifest, Family, GenConfig, Split, StateDatasetEntry, StateMeta};
use crate::error::{Error, ErrorClass, Result};
use crate::fock::FockSpec;
use crate::homodyne::{
    bin_histogram, fock_marginal, grid_phase, sample_measurement_plan, standard_grid, HomodyneRecord,
    HomodyneSetting, MarginalEvaluator, PlanStage, PHASES_PER_MODE,
};
use crate::phase_space::{circuit_to_gaussian, degaussify, loss_on_gaussian, marginal_density, wigner_min, DegaussKind, DegaussifiedState};
use crate::properties::{purity, qfi_optimal_quadrature, state_fidelity, LabelKind, PropertyLabel};
use crate::seeds::derive_seed;
use crate::states::{
    apply_gaussian_circuit, apply_single_mode_loss, cat_ideal, make_cat, make_noon, make_squeezed_vacuum, noon_ideal,
    random_core_state, squeezed_vacuum_ideal, CircuitRanges, GaussianCircuit, CAT_CUTOFF,
};

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn label(kind: LabelKind, value: f64) -> PropertyLabel {
    PropertyLabel { kind, value }
}

/// Failures worth a fresh draw rather than aborting generation.
fn retryable(e: &Error) -> bool {
    e.class() == ErrorClass::Numerical
}

/// Runs `build` with per-attempt seeds until it succeeds or the retry
/// budget is spent.
fn with_retries<T>(cfg: &GenConfig, index: usize, build: impl Fn(&mut ChaCha8Rng) -> Result<T>) -> Result<T> {
    let mut last = None;
    for attempt in 0..=cfg.max_retries {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[index as u64, attempt as u64]));
        match build(&mut rng) {
            Ok(v) => return Ok(v),
            Err(e) if retryable(&e) => {
                log::debug!("entry {index} attempt {attempt} resampled: {e}");
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Numerical("generation failed".into())))
}

struct Built {
    meta: StateMeta,
    labels: Vec<PropertyLabel>,
    records: Vec<HomodyneRecord>,
}

/// Random core state through a random circuit, then per-mode loss. Only
/// single-mode marginals are measured, and loss acts locally, so each mode's
/// reduced state is attenuated on its own.
fn stellar_state(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<Built> {
    let m = *cfg.modes.choose(rng).expect("validated nonempty");
    let r = *cfg.ranks.choose(rng).expect("validated nonempty");
    let ranges =
        CircuitRanges { xi_min: cfg.xi_range[0], xi_max: cfg.xi_range[1], max_displacement: cfg.max_displacement, real_squeezing: false };
    let circuit = GaussianCircuit::random(m, &ranges, rng);
    let cutoff = FockSpec::heuristic_cutoff(r, cfg.xi_range[1]) + (2.0 * cfg.max_displacement).ceil() as usize;
    let spec = FockSpec::new(m, cutoff)?;
    let core = random_core_state(spec, r, rng.random())?;
    let psi = apply_gaussian_circuit(&core, &circuit, spec)?;
    let eta: Vec<f64> = (0..m).map(|_| uniform(rng, cfg.eta_range)).collect();
    let eval = MarginalEvaluator::new(cutoff, standard_grid());
    let mut records = Vec::with_capacity(m * PHASES_PER_MODE);
    for (mode, &e) in eta.iter().enumerate() {
        let reduced = apply_single_mode_loss(&psi.reduced(mode)?, e, cfg.kraus_truncation)?;
        for k in 0..PHASES_PER_MODE {
            let phase = grid_phase(k);
            records.push(HomodyneRecord { setting: HomodyneSetting { mode, phase }, histogram: eval.histogram(&reduced.elements, phase)? });
        }
    }
    let mut params = BTreeMap::new();
    params.insert("core_terms".into(), core.terms.len() as f64);
    let meta = StateMeta {
        num_modes: m,
        stellar_rank: Some(r),
        xi: circuit.squeezing.iter().map(|z| z.norm()).collect(),
        eta,
        params,
    };
    Ok(Built { meta, labels: Vec::new(), records })
}

struct NegativityDraw {
    built: Built,
    wigner_min: f64,
}

fn negativity_state(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<NegativityDraw> {
    let m = cfg.modes[0];
    let ranges = CircuitRanges { xi_min: cfg.xi_range[0], xi_max: cfg.xi_range[1], max_displacement: cfg.max_displacement, real_squeezing: false };
    let circuit = GaussianCircuit::random(m, &ranges, rng);
    let eta: Vec<f64> = (0..m).map(|_| uniform(rng, cfg.eta_range)).collect();
    let base = loss_on_gaussian(&circuit_to_gaussian(&circuit)?, &eta)?;
    let kind = if rng.random::<f64>() < cfg.degauss_fraction {
        if rng.random::<bool>() { DegaussKind::Subtracted } else { DegaussKind::Added }
    } else {
        DegaussKind::None
    };
    let mode = rng.random_range(0..m);
    let state = match kind {
        DegaussKind::None => DegaussifiedState::gaussian(base),
        k => degaussify(&base, k, mode)?,
    };
    let wm = wigner_min(&state)?;
    if !wm.converged {
        return Err(Error::Numerical("Wigner minimization did not converge".into()));
    }
    let grid = standard_grid();
    let plan = sample_measurement_plan(m, PlanStage::MultimodeNegativity, 0)?;
    let records = plan
        .context_settings()
        .into_iter()
        .map(|setting| {
            let density = marginal_density(&state, setting.mode, setting.phase, &grid)?;
            Ok(HomodyneRecord { setting, histogram: bin_histogram(&density, &grid)?.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut params = BTreeMap::new();
    params.insert("degauss".into(), kind as u8 as f64);
    params.insert("degauss_mode".into(), if kind == DegaussKind::None { -1.0 } else { mode as f64 });
    let meta = StateMeta {
        num_modes: m,
        stellar_rank: Some(usize::from(kind != DegaussKind::None)),
        xi: circuit.squeezing.iter().map(|z| z.norm()).collect(),
        eta,
        params,
    };
    Ok(NegativityDraw { built: Built { meta, labels: vec![label(LabelKind::WignerMin, wm.value)], records }, wigner_min: wm.value })
}

fn plan_records(rho: &crate::fock::DensityMatrix, stage: PlanStage, seed: u64) -> Result<Vec<HomodyneRecord>> {
    let m = rho.spec.num_modes();
    let grid = standard_grid();
    let plan = sample_measurement_plan(m, stage, seed)?;
    plan.context_settings()
        .into_iter()
        .map(|setting| Ok(HomodyneRecord { setting, histogram: bin_histogram(&fock_marginal(rho, setting, &grid)?, &grid)?.0 }))
        .collect()
}

fn noon_state(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<Built> {
    let n = rng.random_range(1..=cfg.max_photons);
    let phase = rng.random_range(0.0..2.0 * PI);
    let eta = [uniform(rng, cfg.eta_range), uniform(rng, cfg.eta_range)];
    let rho = make_noon(n, phase, eta, n + 1)?;
    let ideal = noon_ideal(n, phase, n + 1)?;
    let labels = vec![label(LabelKind::Purity, purity(&rho)), label(LabelKind::Fidelity, state_fidelity(&rho, &ideal)?)];
    let records = plan_records(&rho, PlanStage::Noon, rng.random())?;
    let params = BTreeMap::from([("n".to_string(), n as f64), ("phase".to_string(), phase)]);
    let meta = StateMeta { num_modes: 2, stellar_rank: Some(n), xi: vec![0.0; 2], eta: eta.to_vec(), params };
    Ok(Built { meta, labels, records })
}

fn cat_state(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<Built> {
    let alpha = uniform(rng, [0.0, cfg.max_alpha]);
    let phase = rng.random_range(0.0..2.0 * PI);
    let eta = uniform(rng, cfg.eta_range);
    let a = C64::new(alpha, 0.0);
    let rho = make_cat(a, phase, eta, CAT_CUTOFF)?;
    let ideal = cat_ideal(a, phase, CAT_CUTOFF)?;
    let labels = vec![label(LabelKind::CatSize, alpha * alpha), label(LabelKind::Fidelity, state_fidelity(&rho, &ideal)?)];
    let records = plan_records(&rho, PlanStage::Cat, rng.random())?;
    let params = BTreeMap::from([("alpha".to_string(), alpha), ("phase".to_string(), phase)]);
    let meta = StateMeta { num_modes: 1, stellar_rank: None, xi: vec![0.0], eta: vec![eta], params };
    Ok(Built { meta, labels, records })
}

fn squeezed_state(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<Built> {
    let xi = uniform(rng, cfg.xi_range);
    let eta = uniform(rng, cfg.eta_range);
    let rho = make_squeezed_vacuum(xi, eta)?;
    let ideal = squeezed_vacuum_ideal(C64::new(xi, 0.0), rho.dim())?;
    let (qfi, _) = qfi_optimal_quadrature(&rho)?;
    let labels = vec![label(LabelKind::Qfi, qfi), label(LabelKind::Fidelity, state_fidelity(&rho, &ideal)?)];
    let records = plan_records(&rho, PlanStage::Squeezed, 0)?;
    let meta = StateMeta { num_modes: 1, stellar_rank: Some(0), xi: vec![xi], eta: vec![eta], params: BTreeMap::new() };
    Ok(Built { meta, labels, records })
}

fn entry(cfg: &GenConfig, index: usize, built: Built) -> StateDatasetEntry {
    StateDatasetEntry {
        id: index as u64,
        family: cfg.family,
        split: if index < cfg.train_count { Split::Train } else { Split::Test },
        meta: built.meta,
        labels: built.labels,
        records: built.records,
    }
}

/// Median with the midpoint rule for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Generates a whole dataset. Entries are built in parallel from per-entry
/// seeds, so the result does not depend on the thread count.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let indices: Vec<usize> = (0..cfg.count).collect();
    let build = |i: usize| -> Result<StateDatasetEntry> {
        let built = match cfg.family {
            Family::Pretrain | Family::Ood => with_retries(cfg, i, |rng| stellar_state(cfg, rng))?,
            Family::Noon => with_retries(cfg, i, |rng| noon_state(cfg, rng))?,
            Family::Cat => with_retries(cfg, i, |rng| cat_state(cfg, rng))?,
            Family::Squeezed => with_retries(cfg, i, |rng| squeezed_state(cfg, rng))?,
            Family::Negativity => unreachable!("handled separately"),
        };
        Ok(entry(cfg, i, built))
    };
    if cfg.family == Family::Negativity {
        let draws: Vec<NegativityDraw> =
            indices.par_iter().map(|&i| with_retries(cfg, i, |rng| negativity_state(cfg, rng))).collect::<Result<_>>()?;
        let mins: Vec<f64> = draws.iter().map(|d| d.wigner_min).collect();
        let tau = median(&mins).expect("count validated positive");
        let entries = draws
            .into_iter()
            .enumerate()
            .map(|(i, mut d)| {
                d.built.labels.push(label(LabelKind::NegativityClass, f64::from(u8::from(d.wigner_min < tau))));
                entry(cfg, i, d.built)
            })
            .collect();
        log::info!("negativity threshold tau = {tau:.6e}");
        return Ok(Dataset { manifest: DatasetManifest::new(cfg, Some(tau)), entries });
    }
    let entries = indices.par_iter().map(|&i| build(i)).collect::<Result<Vec<_>>>()?;
    Ok(Dataset { manifest: DatasetManifest::new(cfg, None), entries })
}
