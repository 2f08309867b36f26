//! Least-squares estimation: a damped (Levenberg-Marquardt) nonlinear fit of
//! scattering maps over (offset, phase) grids, and a linear bounded fit of
//! noise maps with bath occupations as the free parameters.
//!
//! Residuals are taken on |S|^2 in linear scale with uniform weights unless
//! per-point sigmas are supplied; decibel residuals would overweight deep
//! isolation nulls where measurement noise dominates.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{
    build_expanded_network, effective_parameters, DeviceModel, DriveTone, EffectiveParameters,
};

/// One model parameter exposed to the nonlinear fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FreeParam {
    /// Driven coupling magnitude of one tone, Hz.
    DriveCoupling { cavity: usize, mech: usize },
    /// Drive frequency offset from its exact red sideband, Hz.
    DriveDetuning { cavity: usize, mech: usize },
    /// Drive phase, radians.
    DrivePhase { cavity: usize, mech: usize },
    /// Total cavity linewidth, Hz.
    CavityLinewidth { cavity: usize },
    /// Cavity coupling efficiency.
    CavityEfficiency { cavity: usize },
    /// Intrinsic mechanical linewidth, Hz.
    MechLinewidth { mech: usize },
}

impl FreeParam {
    pub fn name(&self) -> String {
        match self {
            FreeParam::DriveCoupling { cavity, mech } => {
                format!("drive_coupling[{}][{}]", cavity + 1, mech + 1)
            }
            FreeParam::DriveDetuning { cavity, mech } => {
                format!("drive_detuning[{}][{}]", cavity + 1, mech + 1)
            }
            FreeParam::DrivePhase { cavity, mech } => {
                format!("drive_phase[{}][{}]", cavity + 1, mech + 1)
            }
            FreeParam::CavityLinewidth { cavity } => format!("cavity_linewidth[{}]", cavity + 1),
            FreeParam::CavityEfficiency { cavity } => {
                format!("cavity_efficiency[{}]", cavity + 1)
            }
            FreeParam::MechLinewidth { mech } => format!("mech_linewidth[{}]", mech + 1),
        }
    }

    fn drive_index(drives: &[DriveTone; 4], cavity: usize, mech: usize) -> usize {
        drives
            .iter()
            .position(|d| d.cavity == cavity && d.mech == mech)
            .expect("drive layout validated at problem construction")
    }

    pub fn get(&self, device: &DeviceModel, drives: &[DriveTone; 4]) -> f64 {
        match *self {
            FreeParam::DriveCoupling { cavity, mech } => {
                drives[Self::drive_index(drives, cavity, mech)].coupling
            }
            FreeParam::DriveDetuning { cavity, mech } => {
                let d = &drives[Self::drive_index(drives, cavity, mech)];
                d.frequency - device.red_sideband(cavity, mech)
            }
            FreeParam::DrivePhase { cavity, mech } => {
                drives[Self::drive_index(drives, cavity, mech)].phase
            }
            FreeParam::CavityLinewidth { cavity } => device.cavity_linewidth[cavity],
            FreeParam::CavityEfficiency { cavity } => device.cavity_efficiency[cavity],
            FreeParam::MechLinewidth { mech } => device.mech_linewidth[mech],
        }
    }

    pub fn set(&self, device: &mut DeviceModel, drives: &mut [DriveTone; 4], value: f64) {
        match *self {
            FreeParam::DriveCoupling { cavity, mech } => {
                drives[Self::drive_index(drives, cavity, mech)].coupling = value;
            }
            FreeParam::DriveDetuning { cavity, mech } => {
                let sideband = device.red_sideband(cavity, mech);
                drives[Self::drive_index(drives, cavity, mech)].frequency = sideband + value;
            }
            FreeParam::DrivePhase { cavity, mech } => {
                drives[Self::drive_index(drives, cavity, mech)].phase = value;
            }
            FreeParam::CavityLinewidth { cavity } => device.cavity_linewidth[cavity] = value,
            FreeParam::CavityEfficiency { cavity } => device.cavity_efficiency[cavity] = value,
            FreeParam::MechLinewidth { mech } => device.mech_linewidth[mech] = value,
        }
    }
}

/// A free parameter with its initial guess and box bounds. A missing initial
/// value falls back to the value already present in the problem's device and
/// drive description.
#[derive(Debug, Clone, Serialize)]
pub struct FreeParamSpec {
    pub param: FreeParam,
    pub initial: Option<f64>,
    pub bounds: (f64, f64),
}

/// One observed |S|^2 value at a grid point. Phases are in radians and add
/// to the loop phase implied by the drive tones.
#[derive(Debug, Clone, Serialize)]
pub struct Observation {
    pub offset_hz: f64,
    pub phase_rad: f64,
    pub port_out: String,
    pub port_in: String,
    pub value: f64,
    pub sigma: Option<f64>,
}

/// Nonlinear fit of an observed scattering map to the expanded-network model.
#[derive(Debug, Clone)]
pub struct ScatteringFitProblem {
    pub device: DeviceModel,
    pub drives: [DriveTone; 4],
    /// Off-resonant expansion depth of the forward model.
    pub depth: usize,
    pub free: Vec<FreeParamSpec>,
    pub observations: Vec<Observation>,
}

/// Solver knobs shared by the fits.
#[derive(Debug, Clone, Serialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative residual-decrease tolerance.
    pub residual_tol: f64,
    /// Relative step tolerance.
    pub step_tol: f64,
    /// Relative forward-difference step for Jacobians.
    pub jacobian_step: f64,
    /// Extra random restarts around the initial guess.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            residual_tol: 1e-9,
            step_tol: 1e-9,
            jacobian_step: 1e-6,
            restarts: 0,
            seed: 0,
        }
    }
}

/// Fit outcome: parameter estimates with standard errors from the residual
/// covariance, achieved residual norms, convergence diagnostics, and the
/// effective four-mode parameters of the fitted model.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub parameter_names: Vec<String>,
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Euclidean norm of the weighted residual vector at the solution.
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub jacobian_rank: usize,
    /// Unit parameter-space directions the data cannot constrain.
    pub null_directions: Vec<Vec<f64>>,
    pub effective: Option<EffectiveParameters>,
}

/// Apply parameter values to a copy of the problem's device and drives.
pub fn apply_parameters(
    device: &DeviceModel,
    drives: &[DriveTone; 4],
    free: &[FreeParamSpec],
    values: &[f64],
) -> (DeviceModel, [DriveTone; 4]) {
    let mut dev = device.clone();
    let mut drv = drives.clone();
    for (spec, &v) in free.iter().zip(values) {
        spec.param.set(&mut dev, &mut drv, v);
    }
    (dev, drv)
}

fn grid_key(offset: f64, phase: f64) -> (u64, u64) {
    (offset.to_bits(), phase.to_bits())
}

impl ScatteringFitProblem {
    fn initial_values(&self) -> Result<Vec<f64>> {
        self.free
            .iter()
            .map(|spec| {
                let v = spec
                    .initial
                    .unwrap_or_else(|| spec.param.get(&self.device, &self.drives));
                if !(spec.bounds.0 <= v && v <= spec.bounds.1) {
                    return Err(Error::InvalidParameter(format!(
                        "initial value {v} of {} lies outside bounds [{}, {}]",
                        spec.param.name(),
                        spec.bounds.0,
                        spec.bounds.1
                    )));
                }
                Ok(v)
            })
            .collect()
    }

    /// Weighted residual vector (model - observation) / sigma.
    fn residuals(&self, values: &[f64]) -> Result<DVector<f64>> {
        let (device, drives) = apply_parameters(&self.device, &self.drives, &self.free, values);
        let network = build_expanded_network(&device, &drives, self.depth)?;

        let mut keys: Vec<(f64, f64)> = Vec::new();
        let mut seen = HashMap::new();
        for obs in &self.observations {
            seen.entry(grid_key(obs.offset_hz, obs.phase_rad))
                .or_insert_with(|| {
                    keys.push((obs.offset_hz, obs.phase_rad));
                });
        }
        let evaluated: Vec<((u64, u64), Result<crate::linalg::ComplexMatrix>)> = keys
            .par_iter()
            .map(|&(offset, phase)| {
                let net = network.with_loop_phase(network.loop_phase() + phase);
                (grid_key(offset, phase), net.scattering(offset))
            })
            .collect();
        let mut table = HashMap::new();
        for (key, s) in evaluated {
            table.insert(key, s?);
        }

        let mut r = DVector::zeros(self.observations.len());
        for (i, obs) in self.observations.iter().enumerate() {
            let s = &table[&grid_key(obs.offset_hz, obs.phase_rad)];
            let out = network.mode_index(&obs.port_out)?;
            let inp = network.mode_index(&obs.port_in)?;
            let model = s[(out, inp)].norm_sqr();
            let sigma = obs.sigma.unwrap_or(1.0);
            r[i] = (model - obs.value) / sigma;
        }
        Ok(r)
    }
}

/// Fit an observed |S|^2 map by damped least squares with forward-difference
/// Jacobians, projecting iterates onto the parameter bounds.
pub fn fit_scattering(problem: &ScatteringFitProblem, options: &FitOptions) -> Result<FitReport> {
    let n = problem.free.len();
    let m = problem.observations.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no free parameters".into()));
    }
    if m < n {
        return Err(Error::Underdetermined {
            observations: m,
            parameters: n,
        });
    }
    let x0 = problem.initial_values()?;

    let mut best: Option<(Vec<f64>, LmOutcome)> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for attempt in 0..=options.restarts {
        let mut start = x0.clone();
        if attempt > 0 {
            for (v, spec) in start.iter_mut().zip(&problem.free) {
                let span = spec.bounds.1 - spec.bounds.0;
                let scale = if span.is_finite() && span > 0.0 {
                    0.05 * span
                } else {
                    0.2 * v.abs().max(1e-12)
                };
                *v = (*v + rng.random_range(-1.0..1.0) * scale).clamp(spec.bounds.0, spec.bounds.1);
            }
        }
        let outcome = levenberg_marquardt(problem, &start, options)?;
        let better = match &best {
            None => true,
            Some((_, prev)) => outcome.cost < prev.cost,
        };
        if better {
            best = Some((start, outcome));
        }
    }
    let (_, outcome) = best.expect("at least one attempt");

    if !outcome.converged {
        return Err(Error::FitNonConvergence {
            iterations: outcome.iterations,
            residual_norm: outcome.cost.sqrt(),
            best: outcome.x,
        });
    }

    // covariance and rank diagnostics from the final Jacobian
    let jac = &outcome.jacobian;
    let svd = jac.clone().svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank_tol = smax * 1e-10;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rank_tol)
        .count();
    let v_t = svd.v_t.as_ref().expect("requested");
    let mut null_directions = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= rank_tol {
            null_directions.push(v_t.row(i).iter().cloned().collect());
        }
    }
    let dof = (m - n).max(1) as f64;
    let sigma2 = outcome.cost / dof;
    let standard_errors: Vec<f64> = (0..n)
        .map(|i| {
            let var: f64 = (0..svd.singular_values.len())
                .filter(|&k| svd.singular_values[k] > rank_tol)
                .map(|k| {
                    let v_ik = v_t[(k, i)];
                    (v_ik / svd.singular_values[k]).powi(2)
                })
                .sum();
            (sigma2 * var).sqrt()
        })
        .collect();

    let (device, drives) =
        apply_parameters(&problem.device, &problem.drives, &problem.free, &outcome.x);
    let effective = effective_parameters(&device, &drives).ok();

    Ok(FitReport {
        parameter_names: problem.free.iter().map(|s| s.param.name()).collect(),
        values: outcome.x,
        standard_errors,
        residual_norm: outcome.cost.sqrt(),
        initial_residual_norm: outcome.initial_cost.sqrt(),
        iterations: outcome.iterations,
        converged: outcome.converged,
        jacobian_rank: rank,
        null_directions,
        effective,
    })
}

struct LmOutcome {
    x: Vec<f64>,
    cost: f64,
    initial_cost: f64,
    iterations: usize,
    converged: bool,
    jacobian: DMatrix<f64>,
}

fn levenberg_marquardt(
    problem: &ScatteringFitProblem,
    x0: &[f64],
    options: &FitOptions,
) -> Result<LmOutcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = problem.residuals(&x)?;
    let mut cost = r.norm_squared();
    let initial_cost = cost;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut jacobian = DMatrix::zeros(problem.observations.len(), n);

    while iterations < options.max_iterations {
        iterations += 1;
        // forward-difference Jacobian with per-parameter relative steps
        for p in 0..n {
            let spec = &problem.free[p];
            let span = (spec.bounds.1 - spec.bounds.0).abs();
            let floor = if span.is_finite() && span > 0.0 {
                1e-3 * span
            } else {
                1e-9
            };
            let h = options.jacobian_step * x[p].abs().max(floor);
            let mut xp = x.clone();
            xp[p] = (x[p] + h).min(spec.bounds.1);
            let h_actual = xp[p] - x[p];
            if h_actual == 0.0 {
                // pinned at the upper bound; step downward instead
                xp[p] = (x[p] - h).max(spec.bounds.0);
            }
            let hp = xp[p] - x[p];
            let rp = problem.residuals(&xp)?;
            for i in 0..r.len() {
                jacobian[(i, p)] = (rp[i] - r[i]) / hp;
            }
        }

        let jt = jacobian.transpose();
        let a = &jt * &jacobian;
        let g = &jt * &r;

        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = a.clone();
            for d in 0..n {
                damped[(d, d)] += lambda * a[(d, d)].max(1e-30);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut x_trial = x.clone();
            for p in 0..n {
                x_trial[p] =
                    (x[p] + step[p]).clamp(problem.free[p].bounds.0, problem.free[p].bounds.1);
            }
            let r_trial = match problem.residuals(&x_trial) {
                Ok(rt) => rt,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let cost_trial = r_trial.norm_squared();
            if cost_trial < cost {
                let rel_step = x_trial
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                    .fold(0.0, f64::max);
                let rel_decrease = (cost - cost_trial) / cost.max(1e-300);
                x = x_trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda / 10.0).max(1e-14);
                accepted = true;
                if rel_decrease < options.residual_tol || rel_step < options.step_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at any damping: local optimum
            converged = true;
        }
        if converged {
            break;
        }
    }

    Ok(LmOutcome {
        x,
        cost,
        initial_cost,
        iterations,
        converged,
        jacobian,
    })
}

/// One observed output-noise value, in device-referred quanta (or quanta
/// above the vacuum floor when amplifier noise is fitted alongside).
#[derive(Debug, Clone, Serialize)]
pub struct NoiseObservation {
    pub offset_hz: f64,
    pub phase_rad: f64,
    pub port: String,
    pub value: f64,
    pub sigma: Option<f64>,
}

/// Linear fit of noise maps: scattering parameters stay fixed (from a prior
/// [`fit_scattering`]) and the mechanical bath occupations, plus optionally a
/// per-port amplifier offset, are solved for.
#[derive(Debug, Clone)]
pub struct NoiseFitProblem {
    pub device: DeviceModel,
    pub drives: [DriveTone; 4],
    pub depth: usize,
    /// Also fit one constant noise offset per port.
    pub fit_amplifier_noise: bool,
    pub observations: Vec<NoiseObservation>,
}

/// Solve the linear noise model by nonnegative least squares (active-set
/// handling on the nonnegativity bounds).
pub fn fit_noise(problem: &NoiseFitProblem) -> Result<FitReport> {
    let network = build_expanded_network(&problem.device, &problem.drives, problem.depth)?;
    let m = problem.observations.len();

    // columns: one per mechanical bath, then one offset per distinct port
    let mut port_columns: Vec<String> = Vec::new();
    if problem.fit_amplifier_noise {
        for obs in &problem.observations {
            if !port_columns.contains(&obs.port) {
                port_columns.push(obs.port.clone());
            }
        }
    }
    let n = 2 + port_columns.len();
    if m < n {
        return Err(Error::Underdetermined {
            observations: m,
            parameters: n,
        });
    }

    // bath weight per mode: which mechanical oscillator it belongs to
    let mech_of_mode: Vec<Option<usize>> = network
        .modes()
        .iter()
        .map(|mode| match mode.oscillator.as_str() {
            "mech1" => Some(0),
            "mech2" => Some(1),
            _ => None,
        })
        .collect();

    let mut keys: Vec<(f64, f64)> = Vec::new();
    let mut seen = HashMap::new();
    for obs in &problem.observations {
        seen.entry(grid_key(obs.offset_hz, obs.phase_rad))
            .or_insert_with(|| keys.push((obs.offset_hz, obs.phase_rad)));
    }
    let evaluated: Vec<((u64, u64), Result<crate::linalg::ComplexMatrix>)> = keys
        .par_iter()
        .map(|&(offset, phase)| {
            let net = network.with_loop_phase(network.loop_phase() + phase);
            (grid_key(offset, phase), net.scattering(offset))
        })
        .collect();
    let mut table = HashMap::new();
    for (key, s) in evaluated {
        table.insert(key, s?);
    }

    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (i, obs) in problem.observations.iter().enumerate() {
        let s = &table[&grid_key(obs.offset_hz, obs.phase_rad)];
        let row = network
            .mode_index(&obs.port)
            .map_err(|_| Error::UnknownPort(obs.port.clone()))?;
        let sigma = obs.sigma.unwrap_or(1.0);
        for (k, mech) in mech_of_mode.iter().enumerate() {
            if let Some(bath) = mech {
                a[(i, *bath)] += s[(row, k)].norm_sqr() / sigma;
            }
        }
        if let Some(col) = port_columns.iter().position(|p| p == &obs.port) {
            a[(i, 2 + col)] = 1.0 / sigma;
        }
        b[i] = obs.value / sigma;
    }

    // rank check: indistinguishable baths make the normal equations singular
    let svd = a.clone().svd(false, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-10)
        .count();
    if rank < n {
        return Err(Error::RankDeficient(format!(
            "only {rank} of {n} noise columns are independent; \
             the observed grid cannot distinguish the baths"
        )));
    }

    let (x, active_iterations) = nonnegative_least_squares(&a, &b)?;
    let residual = &a * &x - &b;
    let cost = residual.norm_squared();
    let dof = (m - n).max(1) as f64;
    let sigma2 = cost / dof;
    let ata_inv = (a.transpose() * &a)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("normal equations are singular".into()))?;
    let standard_errors: Vec<f64> = (0..n).map(|i| (sigma2 * ata_inv[(i, i)]).sqrt()).collect();

    let mut parameter_names = vec![
        "bath_occupation[1]".to_string(),
        "bath_occupation[2]".to_string(),
    ];
    parameter_names.extend(port_columns.iter().map(|p| format!("amplifier_noise[{p}]")));

    let effective = effective_parameters(&problem.device, &problem.drives).ok();
    Ok(FitReport {
        parameter_names,
        values: x.iter().cloned().collect(),
        standard_errors,
        residual_norm: cost.sqrt(),
        initial_residual_norm: b.norm(),
        iterations: active_iterations,
        converged: true,
        jacobian_rank: rank,
        null_directions: Vec::new(),
        effective,
    })
}

/// Lawson-Hanson nonnegative least squares.
fn nonnegative_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm() * b.norm().max(1.0);
    let mut iterations = 0;

    for _ in 0..(3 * n + 10) {
        iterations += 1;
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&i| !passive[i])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }

        loop {
            // least squares on the passive set
            let cols: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sub = a.select_columns(cols.iter());
            let z_sub = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-14)
                .map_err(|e| Error::RankDeficient(e.to_string()))?;
            if z_sub.iter().all(|&z| z > 0.0) {
                x.fill(0.0);
                for (idx, &col) in cols.iter().enumerate() {
                    x[col] = z_sub[idx];
                }
                break;
            }
            // step back to the boundary and drop the blocking variable
            let mut alpha = f64::INFINITY;
            for (idx, &col) in cols.iter().enumerate() {
                if z_sub[idx] <= 0.0 {
                    let denom = x[col] - z_sub[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(x[col] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (idx, &col) in cols.iter().enumerate() {
                x[col] += alpha * (z_sub[idx] - x[col]);
                if x[col] <= tol {
                    x[col] = 0.0;
                    passive[col] = false;
                }
            }
        }
    }
    Ok((x, iterations))
}
