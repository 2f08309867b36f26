//! The six subcommands: spectrum, sweep, design, noise, reduce, fit.

use std::path::Path;

use modenet::expansion::{build_expanded_network, effective_parameters_at, eliminate_modes};
use modenet::fit::{fit_noise, fit_scattering, FitOptions, NoiseFitProblem, ScatteringFitProblem};
use modenet::isolator::{
    matched_transmission_difference, nonreciprocal_bandwidth, optimal_detuning, optimal_loop_phase,
    optimize_design,
};
use modenet::network::ModeNetwork;
use modenet::noise::{noise_map, AmplifierChain, HBAR};

use crate::config::RunConfig;
use crate::output::{db, fmt, read_noise_observations, read_observations, Table};
use crate::CliError;

fn expanded_network(config: &RunConfig, depth: usize) -> Result<ModeNetwork, CliError> {
    let device = config.device()?;
    let drives = config.drive_tones(&device)?;
    build_expanded_network(&device, &drives, depth).map_err(CliError::numerical)
}

fn sweep_table(config: &RunConfig, command: &str) -> Result<Table, CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("missing [sweep] section"))?;
    let network = expanded_network(config, sweep.depth)?;
    let offsets = sweep.offsets_hz.values()?;
    let phases_deg = sweep.phases_deg.values()?;
    let phases: Vec<f64> = phases_deg.iter().map(|p| p.to_radians()).collect();
    let pairs: Vec<(String, String)> = sweep
        .ports
        .iter()
        .map(|[out, inp]| (out.clone(), inp.clone()))
        .collect();

    let result = network
        .sweep_scattering(&offsets, &phases, &pairs, false)
        .map_err(CliError::numerical)?;

    let precision = config.output.precision;
    let mut table = Table::new(
        command,
        &[
            "offset_hz",
            "phase_deg",
            "port_out",
            "port_in",
            "value",
            "value_db",
        ],
    );
    table.note("modes", network.n_modes());
    table.note("couplings", network.couplings().len());
    table.note("failed_points", result.failures.len());
    for (ip, pdeg) in phases_deg.iter().enumerate() {
        for (io, off) in offsets.iter().enumerate() {
            for (k, pair) in pairs.iter().enumerate() {
                let v = result.value(ip, io, k);
                table.push(vec![
                    fmt(*off, precision),
                    fmt(*pdeg, precision),
                    pair.0.clone(),
                    pair.1.clone(),
                    fmt(v, precision),
                    fmt(db(v), precision),
                ]);
            }
        }
    }
    Ok(table)
}

/// |S|^2 versus offset for the configured port pairs and phases.
pub fn cmd_spectrum(config: &RunConfig) -> Result<Table, CliError> {
    sweep_table(config, "spectrum")
}

/// Full 2D (offset x phase) map; same table layout as `spectrum`.
pub fn cmd_sweep(config: &RunConfig) -> Result<Table, CliError> {
    sweep_table(config, "sweep")
}

/// Optimal loop phase, detunings, transmission difference, and bandwidth for
/// the configured cooperativities and linewidths.
pub fn cmd_design(config: &RunConfig) -> Result<Table, CliError> {
    let d = config
        .design
        .as_ref()
        .ok_or_else(|| CliError::config("missing [design] section"))?;
    if !(d.c3 > 0.0 && d.c4 > 0.0) {
        return Err(CliError::config("design cooperativities must be positive"));
    }
    if !(d.gamma3_hz > 0.0 && d.gamma4_hz > 0.0) {
        return Err(CliError::config("design linewidths must be positive"));
    }
    if !((0.0..=1.0).contains(&d.eta1) && (0.0..=1.0).contains(&d.eta2)) {
        return Err(CliError::config("design efficiencies must lie in [0, 1]"));
    }

    let designs = optimize_design(d.c3, d.c4, d.eta1, d.eta2, d.gamma3_hz, d.gamma4_hz)
        .map_err(CliError::numerical)?;

    let precision = config.output.precision;
    let mut table = Table::new(
        "design",
        &[
            "branch",
            "phase_deg",
            "delta3",
            "delta4",
            "delta_t",
            "bandwidth_hz",
        ],
    );
    if let Ok((phase, _)) = optimal_loop_phase(d.c3, d.c4) {
        table.note("closed_form_phase_deg", fmt(phase.to_degrees(), precision));
        if let Ok(branches) = optimal_detuning(d.c3, d.c4, phase) {
            table.note("closed_form_delta3", fmt(branches[0].0, precision));
        }
        if let Ok(dt) = matched_transmission_difference(d.c3, d.c4, d.eta1, d.eta2, phase) {
            table.note("closed_form_delta_t", fmt(dt, precision));
        }
    }
    table.note(
        "nonreciprocal_bandwidth_hz",
        fmt(nonreciprocal_bandwidth(d.gamma3_hz, d.gamma4_hz), precision),
    );
    for (name, point) in ["forward", "reverse"].iter().zip(designs.iter()) {
        table.push(vec![
            name.to_string(),
            fmt(point.phase.to_degrees(), precision),
            fmt(point.delta3, precision),
            fmt(point.delta4, precision),
            fmt(point.delta_t, precision),
            fmt(point.bandwidth_hz, precision),
        ]);
        println!(
            "{name}: phase = {:.4} deg, delta3 = {:.6}, delta4 = {:.6}, dT = {:.6}, bandwidth = {:.1} Hz",
            point.phase.to_degrees(),
            point.delta3,
            point.delta4,
            point.delta_t,
            point.bandwidth_hz
        );
    }
    Ok(table)
}

/// Output-noise maps over the sweep grids for the configured ports.
pub fn cmd_noise(config: &RunConfig) -> Result<Table, CliError> {
    let noise = config
        .noise
        .as_ref()
        .ok_or_else(|| CliError::config("missing [noise] section"))?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("missing [sweep] section"))?;

    let mut device = config.device()?;
    if let Some(baths) = noise.bath_occupations {
        device.bath_occupation = baths;
    }
    let drives = config.drive_tones(&device)?;
    let network =
        build_expanded_network(&device, &drives, sweep.depth).map_err(CliError::numerical)?;

    let chain = match &noise.chain {
        None => None,
        Some(entries) => {
            let mut chain = AmplifierChain::new();
            for e in entries {
                chain = chain
                    .insert(&e.port, e.gain, e.added_noise)
                    .map_err(|err| CliError::config(format!("noise chain: {err}")))?;
            }
            Some(chain)
        }
    };

    let offsets = sweep.offsets_hz.values()?;
    let phases_deg = sweep.phases_deg.values()?;
    let phases: Vec<f64> = phases_deg.iter().map(|p| p.to_radians()).collect();
    let map = noise_map(&network, &noise.ports, &offsets, &phases).map_err(CliError::numerical)?;

    let precision = config.output.precision;
    let columns: &[&str] = if chain.is_some() {
        &["offset_hz", "phase_deg", "port", "quanta", "watts_per_hz"]
    } else {
        &["offset_hz", "phase_deg", "port", "quanta"]
    };
    let mut table = Table::new("noise", columns);
    table.note("failed_points", map.failures.len());
    for (ip, pdeg) in phases_deg.iter().enumerate() {
        for (io, off) in offsets.iter().enumerate() {
            for (k, port) in noise.ports.iter().enumerate() {
                let quanta = map.value(ip, io, k);
                let mut row = vec![
                    fmt(*off, precision),
                    fmt(*pdeg, precision),
                    port.clone(),
                    fmt(quanta, precision),
                ];
                if let Some(chain) = &chain {
                    let amp = chain.get(port).ok_or_else(|| {
                        CliError::config(format!("noise chain has no entry for port `{port}`"))
                    })?;
                    let idx = network.mode_index(port).map_err(CliError::numerical)?;
                    let freq = network.modes()[idx].signal_freq + *off;
                    let w = HBAR
                        * 2.0
                        * std::f64::consts::PI
                        * freq
                        * amp.gain
                        * (1.0 + amp.added_noise + quanta);
                    row.push(fmt(w, precision));
                }
                table.push(row);
            }
        }
    }
    Ok(table)
}

/// Effective parameters and the generated mode/coupling lists.
pub fn cmd_reduce(config: &RunConfig) -> Result<Table, CliError> {
    let depth = config.reduce.as_ref().map(|r| r.depth).unwrap_or(1);
    if depth == 0 {
        return Err(CliError::config("reduce depth must be at least 1"));
    }
    let device = config.device()?;
    let drives = config.drive_tones(&device)?;
    let network = build_expanded_network(&device, &drives, depth).map_err(CliError::numerical)?;
    println!(
        "{} modes, {} couplings",
        network.n_modes(),
        network.couplings().len()
    );

    let eff = effective_parameters_at(&device, &drives, depth, 0.0).map_err(CliError::numerical)?;
    println!(
        "effective mechanical linewidths: {:.4} Hz, {:.4} Hz",
        eff.mech_linewidth_eff[0], eff.mech_linewidth_eff[1]
    );
    println!(
        "effective cooperativities: C11 = {:.4}, C12 = {:.4}, C21 = {:.4}, C22 = {:.4}",
        eff.cooperativity_eff[0][0],
        eff.cooperativity_eff[0][1],
        eff.cooperativity_eff[1][0],
        eff.cooperativity_eff[1][1]
    );
    println!(
        "effective bath occupations: {:.4}, {:.4}",
        eff.bath_occupation_eff[0], eff.bath_occupation_eff[1]
    );

    let precision = config.output.precision;
    let mut table = Table::new(
        "reduce",
        &["record", "a", "b", "value1", "value2", "value3"],
    );
    table.note("modes", network.n_modes());
    table.note("couplings", network.couplings().len());
    for (k, label) in ["gamma1_eff_hz", "gamma2_eff_hz"].iter().enumerate() {
        table.note(label, fmt(eff.mech_linewidth_eff[k], precision));
    }
    for j in 0..2 {
        for k in 0..2 {
            table.note(
                &format!("c{}{}_eff", j + 1, k + 1),
                fmt(eff.cooperativity_eff[j][k], precision),
            );
        }
    }
    for (k, label) in ["n1_eff", "n2_eff"].iter().enumerate() {
        table.note(label, fmt(eff.bath_occupation_eff[k], precision));
    }
    // depth convergence of the effective linewidths
    if depth > 1 {
        for d in 1..depth {
            let lower =
                effective_parameters_at(&device, &drives, d, 0.0).map_err(CliError::numerical)?;
            for k in 0..2 {
                table.note(
                    &format!("gamma{}_eff_depth{}_hz", k + 1, d),
                    fmt(lower.mech_linewidth_eff[k], precision),
                );
                table.note(
                    &format!("gamma{}_eff_shift_depth{}_to_{}_hz", k + 1, d, depth),
                    fmt(
                        eff.mech_linewidth_eff[k] - lower.mech_linewidth_eff[k],
                        precision,
                    ),
                );
            }
        }
    }

    for mode in network.modes() {
        table.push(vec![
            "mode".to_string(),
            mode.id.clone(),
            mode.oscillator.clone(),
            fmt(mode.signal_freq, precision),
            fmt(mode.resonance_freq, precision),
            fmt(mode.linewidth, precision),
        ]);
    }
    for c in network.couplings() {
        table.push(vec![
            "coupling".to_string(),
            c.mode_a.clone(),
            c.mode_b.clone(),
            fmt(c.magnitude, precision),
            fmt(c.phase.to_degrees(), precision),
            c.drive.clone(),
        ]);
    }
    // rotating-wave diagnostic: largest correction contributed per
    // eliminated mode
    let m = network.assemble_m(0.0);
    let aux: Vec<usize> = (4..network.n_modes()).collect();
    if !aux.is_empty() {
        let red = eliminate_modes(&m, &aux).map_err(CliError::numerical)?;
        for (idx, corr) in &red.max_corrections {
            table.push(vec![
                "elimination".to_string(),
                network.modes()[*idx].id.clone(),
                String::new(),
                fmt(*corr, precision),
                String::new(),
                String::new(),
            ]);
        }
    }
    Ok(table)
}

/// Nonlinear scattering fit, optionally followed by the linear noise fit
/// with the scattering parameters held fixed.
pub fn cmd_fit(config: &RunConfig, config_dir: &Path, seed: u64) -> Result<Table, CliError> {
    let fit = config
        .fit
        .as_ref()
        .ok_or_else(|| CliError::config("missing [fit] section"))?;
    let device = config.device()?;
    let drives = config.drive_tones(&device)?;
    let free = config.free_params(fit)?;
    if free.is_empty() {
        return Err(CliError::config("fit needs at least one free parameter"));
    }
    let observations = read_observations(&config_dir.join(&fit.data))?;

    let problem = ScatteringFitProblem {
        device: device.clone(),
        drives: drives.clone(),
        depth: fit.depth,
        free,
        observations,
    };
    let options = FitOptions {
        restarts: fit.restarts,
        seed,
        ..FitOptions::default()
    };
    let report = fit_scattering(&problem, &options).map_err(CliError::numerical)?;

    let precision = config.output.precision;
    let mut table = Table::new("fit", &["stage", "parameter", "value", "standard_error"]);
    table.note("residual_norm", fmt(report.residual_norm, precision));
    table.note(
        "initial_residual_norm",
        fmt(report.initial_residual_norm, precision),
    );
    table.note("iterations", report.iterations);
    table.note("converged", report.converged);
    table.note("jacobian_rank", report.jacobian_rank);
    if let Some(eff) = &report.effective {
        table.note("gamma1_eff_hz", fmt(eff.mech_linewidth_eff[0], precision));
        table.note("gamma2_eff_hz", fmt(eff.mech_linewidth_eff[1], precision));
        for j in 0..2 {
            for k in 0..2 {
                table.note(
                    &format!("c{}{}_eff", j + 1, k + 1),
                    fmt(eff.cooperativity_eff[j][k], precision),
                );
            }
        }
    }
    for ((name, value), se) in report
        .parameter_names
        .iter()
        .zip(&report.values)
        .zip(&report.standard_errors)
    {
        println!("{name} = {value:.6e} +- {se:.2e}");
        table.push(vec![
            "scattering".to_string(),
            name.clone(),
            fmt(*value, precision),
            fmt(*se, precision),
        ]);
    }

    if let Some(noise_path) = &fit.noise_data {
        let noise_obs = read_noise_observations(&config_dir.join(noise_path))?;
        // hold the fitted scattering parameters fixed
        let (fitted_device, fitted_drives) = modenet::fit::apply_parameters(
            &problem.device,
            &problem.drives,
            &problem.free,
            &report.values,
        );
        let noise_problem = NoiseFitProblem {
            device: fitted_device,
            drives: fitted_drives,
            depth: fit.depth,
            fit_amplifier_noise: fit.fit_amplifier_noise,
            observations: noise_obs,
        };
        let noise_report = fit_noise(&noise_problem).map_err(CliError::numerical)?;
        table.note(
            "noise_residual_norm",
            fmt(noise_report.residual_norm, precision),
        );
        for ((name, value), se) in noise_report
            .parameter_names
            .iter()
            .zip(&noise_report.values)
            .zip(&noise_report.standard_errors)
        {
            println!("{name} = {value:.6e} +- {se:.2e}");
            table.push(vec![
                "noise".to_string(),
                name.clone(),
                fmt(*value, precision),
                fmt(*se, precision),
            ]);
        }
    }
    Ok(table)
}
