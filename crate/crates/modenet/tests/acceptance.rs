//! Acceptance suite: one test per criterion, each asserting its stated
//! tolerance and runtime budget and printing a PASS line on success.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use modenet::expansion::{
    build_expanded_network, effective_occupation, eliminate_modes, DeviceModel, DriveTone,
};
use modenet::fit::{
    fit_noise, fit_scattering, FitOptions, FreeParam, FreeParamSpec, NoiseFitProblem,
    NoiseObservation, Observation, ScatteringFitProblem,
};
use modenet::isolator::{
    four_mode_network, lorentzian_profile, matched_transmission_difference,
    nonreciprocal_bandwidth, optimal_loop_phase, optimize_design, optimize_detunings, profile_fwhm,
    reciprocal_bandwidth, IsolatorSpec,
};
use modenet::linalg::scattering_from_matrix;
use modenet::network::{Coupling, Mode, ModeNetwork};
use modenet::noise::output_noise;

fn pass(n: usize, what: &str, elapsed: std::time::Duration) {
    println!("PASS criterion {n:2}: {what} ({elapsed:.2?})");
}

fn reference_device() -> DeviceModel {
    DeviceModel {
        cavity_freq: [6.528e9, 6.733e9],
        cavity_linewidth: [1.3e6, 2.0e6],
        cavity_efficiency: [0.99, 0.98],
        mech_freq: [6.7e6, 9.4e6],
        mech_linewidth: [15.0, 19.0],
        vacuum_coupling: [[50.0, 40.0], [60.0, 20.0]],
        bath_occupation: [439.0, 998.0],
    }
}

fn reference_drives(device: &DeviceModel) -> [DriveTone; 4] {
    [
        DriveTone::red_detuned(device, 0, 0, 21.945e3, 103.0e3, 0.0),
        DriveTone::red_detuned(device, 0, 1, -5.201e3, 45.6e3, 0.0),
        DriveTone::red_detuned(device, 1, 0, 21.945e3, 127.7e3, 0.0),
        DriveTone::red_detuned(device, 1, 1, -5.201e3, 56.6e3, 0.0),
    ]
}

/// A random connected network under the gauge convention: zero static
/// coupling phases, one designated drive carrying the loop phase.
fn random_network(rng: &mut StdRng, eta_one: bool) -> ModeNetwork {
    let n = rng.random_range(2..=8);
    let mut modes = Vec::with_capacity(n);
    for i in 0..n {
        let linewidth = 10f64.powf(rng.random_range(1.0..6.0));
        let resonance = rng.random_range(1.0e6..1.0e9);
        let eta = if eta_one {
            1.0
        } else {
            rng.random_range(0.0..=1.0)
        };
        let signal = resonance + rng.random_range(-2.0..2.0) * linewidth;
        modes.push(
            Mode::new(format!("m{i}"), format!("o{i}"), resonance, linewidth)
                .unwrap()
                .with_efficiency(eta)
                .unwrap()
                .with_signal_freq(signal),
        );
    }
    // random spanning tree plus extra edges keeps the graph connected
    let mut couplings = Vec::new();
    let mut pairs = std::collections::HashSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        pairs.insert((j, i));
    }
    for _ in 0..rng.random_range(0..=n) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in pairs {
        let drive = format!("d{}", rng.random_range(0..3));
        couplings.push(
            Coupling::new(
                format!("m{a}"),
                format!("m{b}"),
                rng.random_range(0.0..4.0),
                drive,
            )
            .unwrap(),
        );
    }
    let phase_drive = couplings
        .iter()
        .any(|c| c.drive == "d0")
        .then(|| "d0".to_string());
    let loop_phase = rng.random_range(-3.0..3.0);
    ModeNetwork::new(modes, couplings, loop_phase, phase_drive).unwrap()
}

#[test]
fn criterion_01_ideal_isolator_limit() {
    let t0 = Instant::now();
    let spec = IsolatorSpec::optimal(1.0e4, 1.0e4, 1.0, 1.0, 100.0, 100.0).unwrap();
    let s = spec.network().scattering(0.0).unwrap();
    let ideal = [
        [0.0, 0.0, 0.5, 0.5],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.25, 0.25],
        [0.0, 0.5, 0.25, 0.25],
    ];
    for i in 0..4 {
        for j in 0..4 {
            let got = s[(i, j)].norm_sqr();
            assert!(
                (got - ideal[i][j]).abs() < 0.01,
                "|S|^2[{i}][{j}] = {got}, ideal {}",
                ideal[i][j]
            );
        }
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "budget 1 s, took {elapsed:?}");
    pass(
        1,
        "ideal-isolator |S|^2 within 1% absolute at C = 1e4",
        elapsed,
    );
}

#[test]
fn criterion_02_closed_form_numeric_agreement() {
    let t0 = Instant::now();
    let c = 100.0;
    let designs = optimize_design(c, c, 1.0, 1.0, 1.0e3, 1.0e3).unwrap();
    let forward = &designs[0];
    let (phase_closed, _) = optimal_loop_phase(c, c).unwrap();
    let dt_closed = 1.0 - 1.0 / (2.0 * c);
    let phase_err = (forward.phase - phase_closed).abs() / phase_closed;
    let dt_err = (forward.delta_t - dt_closed).abs() / dt_closed;
    assert!(phase_err < 0.02, "phase relative error {phase_err}");
    assert!(dt_err < 0.02, "dT relative error {dt_err}");
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "budget 10 s, took {elapsed:?}"
    );
    pass(
        2,
        "numeric optimum matches closed forms within 2% at C = 100",
        elapsed,
    );
}

#[test]
fn criterion_03_bandwidth_law() {
    let t0 = Instant::now();
    let (gamma3, gamma4) = (1.6e3, 7.5e3);
    let expected = nonreciprocal_bandwidth(gamma3, gamma4);
    assert!(
        (expected - 5.274725e3).abs() < 1.0,
        "4 g3 g4/(g3+g4) = {expected}"
    );

    let spec = IsolatorSpec::optimal(100.0, 100.0, 1.0, 1.0, gamma3, gamma4).unwrap();
    let net = spec.network();
    let profile = |dw: f64| {
        let s = net.scattering(dw).unwrap();
        s[(1, 0)].norm_sqr() - s[(0, 1)].norm_sqr()
    };
    let fwhm = profile_fwhm(profile, expected / 2.0).expect("half-max crossings");
    let rel = (fwhm - expected).abs() / expected;
    assert!(
        rel < 0.05,
        "FWHM {fwhm} vs {expected}: relative error {rel}"
    );
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "budget 10 s, took {elapsed:?}"
    );
    pass(
        3,
        "numeric FWHM matches 4 g3 g4/(g3+g4) = 5.27 kHz within 5%",
        elapsed,
    );
}

#[test]
fn criterion_04_paper_operating_point() {
    let t0 = Instant::now();
    let c = [[5.4, 5.7], [2.9, 2.0]];
    let eta = [0.99, 0.98];
    let gamma = [1.6e3, 7.5e3];
    let kappa = [1.3e6, 2.0e6];
    for sign in [1.0, -1.0] {
        let phase = sign * 38.0_f64.to_radians();
        let ((d3, d4), _) = optimize_detunings(c, eta, phase).unwrap();
        let net = four_mode_network(c, eta, gamma, kappa, [d3, d4], phase);
        let s = net.scattering(0.0).unwrap();
        let (fwd, rev) = if sign > 0.0 {
            ((1, 0), (0, 1))
        } else {
            ((0, 1), (1, 0))
        };
        let insertion_loss = -10.0 * s[fwd].norm_sqr().log10();
        let isolation = -10.0 * s[rev].norm_sqr().log10();
        assert!(
            (insertion_loss - 1.5).abs() <= 0.4,
            "insertion loss {insertion_loss} dB outside 1.5 +- 0.4 dB at phase sign {sign}"
        );
        assert!(
            isolation >= 18.0,
            "isolation {isolation} dB below 18 dB at phase sign {sign}"
        );
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "budget 1 s, took {elapsed:?}");
    pass(
        4,
        "effective-model point at +-38 deg: IL 1.5 +- 0.4 dB, isolation >= 18 dB",
        elapsed,
    );
}

#[test]
fn criterion_05_reduction_exactness() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(5);
    for instance in 0..100 {
        let device = DeviceModel {
            cavity_freq: [6.5e9, 6.7e9],
            cavity_linewidth: [
                10f64.powf(rng.random_range(5.5..6.5)),
                10f64.powf(rng.random_range(5.5..6.5)),
            ],
            cavity_efficiency: [rng.random_range(0.5..1.0), rng.random_range(0.5..1.0)],
            mech_freq: [
                rng.random_range(5.0e6..8.0e6),
                rng.random_range(8.5e6..12.0e6),
            ],
            mech_linewidth: [rng.random_range(5.0..50.0), rng.random_range(5.0..50.0)],
            vacuum_coupling: [
                [rng.random_range(20.0..80.0), rng.random_range(20.0..80.0)],
                [rng.random_range(20.0..80.0), rng.random_range(20.0..80.0)],
            ],
            bath_occupation: [0.0, 0.0],
        };
        // one detuning per mechanical mode, shared by both of its drives,
        // so the four tones close the loop
        let detuning = [rng.random_range(-3e4..3e4), rng.random_range(-3e4..3e4)];
        let drives = [
            DriveTone::red_detuned(
                &device,
                0,
                0,
                detuning[0],
                rng.random_range(2e4..2e5),
                rng.random_range(-3.0..3.0),
            ),
            DriveTone::red_detuned(
                &device,
                0,
                1,
                detuning[1],
                rng.random_range(2e4..2e5),
                rng.random_range(-3.0..3.0),
            ),
            DriveTone::red_detuned(
                &device,
                1,
                0,
                detuning[0],
                rng.random_range(2e4..2e5),
                rng.random_range(-3.0..3.0),
            ),
            DriveTone::red_detuned(
                &device,
                1,
                1,
                detuning[1],
                rng.random_range(2e4..2e5),
                rng.random_range(-3.0..3.0),
            ),
        ];
        let net = build_expanded_network(&device, &drives, 1).unwrap();
        assert_eq!(net.n_modes(), 10, "instance {instance}");
        let etas = net.efficiencies();
        let aux: Vec<usize> = (4..10).collect();
        for _ in 0..50 {
            let dw = rng.random_range(-5.0e6..5.0e6);
            let m = net.assemble_m(dw);
            let full = scattering_from_matrix(&m, &etas, dw).unwrap();
            let red = eliminate_modes(&m, &aux).unwrap();
            let s_red = scattering_from_matrix(&red.matrix, &etas[0..4], dw).unwrap();
            let mut num = 0.0_f64;
            let mut den = 0.0_f64;
            for i in 0..4 {
                for j in 0..4 {
                    num += (full[(i, j)] - s_red[(i, j)]).norm_sqr();
                    den += full[(i, j)].norm_sqr();
                }
            }
            let rel = (num / den).sqrt();
            assert!(rel < 1e-10, "instance {instance}, offset {dw}: rel {rel}");
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "budget 30 s, took {elapsed:?}"
    );
    pass(
        5,
        "retained-port S equals full S within 1e-10 on 100 networks x 50 offsets",
        elapsed,
    );
}

#[test]
fn criterion_06_unitarity_passivity() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(6);
    for instance in 0..1000 {
        let unitary_case = instance % 2 == 0;
        let net = random_network(&mut rng, unitary_case);
        let dw = rng.random_range(-3.0..3.0)
            * net.modes().iter().map(|m| m.linewidth).fold(0.0, f64::max);
        let s = net.scattering(dw).unwrap();
        let n = net.n_modes();
        if unitary_case {
            let product = s.adjoint() * &s;
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    let dev = (product[(i, j)] - num_complex::Complex64::new(expect, 0.0)).norm();
                    assert!(dev < 1e-10, "instance {instance}: S not unitary, dev {dev}");
                }
            }
        } else {
            for k in 0..n {
                let col: f64 = (0..n).map(|j| s[(j, k)].norm_sqr()).sum();
                assert!(col <= 1.0 + 1e-10, "instance {instance}: column sum {col}");
            }
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "budget 30 s, took {elapsed:?}"
    );
    pass(
        6,
        "1000 random networks: unitary at full coupling, passive otherwise",
        elapsed,
    );
}

#[test]
fn criterion_07_transposition_property() {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(7);
    for instance in 0..100 {
        let net = random_network(&mut rng, false);
        let dw = rng.random_range(-2.0..2.0)
            * net.modes().iter().map(|m| m.linewidth).fold(0.0, f64::max);
        let phase = net.loop_phase();
        let s_plus = net.with_loop_phase(phase).scattering(dw).unwrap();
        let s_minus = net.with_loop_phase(-phase).scattering(dw).unwrap();
        let n = net.n_modes();
        for i in 0..n {
            for j in 0..n {
                let dev = (s_minus[(i, j)] - s_plus[(j, i)]).norm();
                assert!(dev < 1e-12, "instance {instance}: transposition dev {dev}");
            }
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "budget 10 s, took {elapsed:?}"
    );
    pass(
        7,
        "S(-phi) = S(phi)^T to 1e-12 on 100 random networks",
        elapsed,
    );
}

#[test]
fn criterion_08_noise_routing() {
    let t0 = Instant::now();
    let spec = IsolatorSpec::optimal(1.0e4, 1.0e4, 1.0, 1.0, 100.0, 100.0).unwrap();
    let base = spec.network();
    let modes: Vec<Mode> = base
        .modes()
        .iter()
        .cloned()
        .map(|mut m| {
            if m.id == "b1" {
                m.bath_occupation = 0.89;
            }
            if m.id == "b2" {
                m.bath_occupation = 12.0;
            }
            m
        })
        .collect();
    let net = ModeNetwork::new(
        modes,
        base.couplings().to_vec(),
        base.loop_phase(),
        base.phase_drive().map(String::from),
    )
    .unwrap();
    let isolated = output_noise(&net, "a1", &[0.0], None).unwrap().quanta[0];
    let transmitting = output_noise(&net, "a2", &[0.0], None).unwrap().quanta[0];
    assert!(
        (isolated - 6.4).abs() <= 0.2,
        "isolated-port noise {isolated} quanta outside 6.4 +- 0.2"
    );
    assert!(
        transmitting < 0.2,
        "transmitting-port noise {transmitting} quanta not below 0.2"
    );
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "budget 1 s, took {elapsed:?}");
    pass(
        8,
        "mechanical thermal noise routes to the isolated port only",
        elapsed,
    );
}

#[test]
fn criterion_09_effective_occupation() {
    let t0 = Instant::now();
    // inverting the quoted values reproduces them exactly
    let n_exact = 0.89 * 1600.0 / 15.0;
    let n_eff = effective_occupation(15.0, 1600.0, n_exact);
    assert!((n_eff - 0.89).abs() < 1e-12, "round trip gave {n_eff}");
    // and the rounded 95-quanta bath lands on 0.89 at two decimals
    let n_eff_95 = effective_occupation(15.0, 1600.0, 95.0);
    assert!(
        (n_eff_95 - 0.89).abs() < 0.005,
        "n_eff({}) = {n_eff_95}, expected 0.89 to rounding",
        95.0
    );
    let elapsed = t0.elapsed();
    pass(
        9,
        "n_eff = gamma n / gamma_eff reproduces 0.89 from (15 Hz, 1.6 kHz, ~95)",
        elapsed,
    );
}

#[test]
fn criterion_10_fit_recovery() {
    let t0 = Instant::now();
    let device = reference_device();
    let drives = reference_drives(&device);
    let g_true = [103.0e3, 45.6e3, 127.7e3, 56.6e3];
    let network = build_expanded_network(&device, &drives, 1).unwrap();

    let offsets: Vec<f64> = (0..41)
        .map(|i| -40.0e3 + 80.0e3 * i as f64 / 40.0)
        .collect();
    let phases: Vec<f64> = (0..37)
        .map(|i| (-180.0 + 10.0 * i as f64).to_radians())
        .collect();
    let pairs = vec![
        ("a2".to_string(), "a1".to_string()),
        ("a1".to_string(), "a2".to_string()),
    ];
    let sweep = network
        .sweep_scattering(&offsets, &phases, &pairs, false)
        .unwrap();

    let mut rng = StdRng::seed_from_u64(10);
    let gauss = move |rng: &mut StdRng| {
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut observations = Vec::new();
    for (ip, &phase) in phases.iter().enumerate() {
        for (io, &offset) in offsets.iter().enumerate() {
            for (k, pair) in pairs.iter().enumerate() {
                observations.push(Observation {
                    offset_hz: offset,
                    phase_rad: phase,
                    port_out: pair.0.clone(),
                    port_in: pair.1.clone(),
                    value: sweep.value(ip, io, k) * (1.0 + 0.01 * gauss(&mut rng)),
                    sigma: None,
                });
            }
        }
    }

    // perturbed initial guesses, +-20%
    let perturb = [1.2, 0.8, 0.82, 1.18];
    let free: Vec<FreeParamSpec> = (0..4)
        .map(|i| FreeParamSpec {
            param: FreeParam::DriveCoupling {
                cavity: i / 2,
                mech: i % 2,
            },
            initial: Some(g_true[i] * perturb[i]),
            bounds: (g_true[i] * 0.3, g_true[i] * 3.0),
        })
        .collect();
    let problem = ScatteringFitProblem {
        device: device.clone(),
        drives: drives.clone(),
        depth: 1,
        free,
        observations,
    };
    let report = fit_scattering(&problem, &FitOptions::default()).unwrap();
    assert!(report.converged);
    let cooperativity = |g: f64, cavity: usize, mech: usize| {
        4.0 * g * g / (device.cavity_linewidth[cavity] * device.mech_linewidth[mech])
    };
    for i in 0..4 {
        let (cavity, mech) = (i / 2, i % 2);
        let c_fit = cooperativity(report.values[i], cavity, mech);
        let c_true = cooperativity(g_true[i], cavity, mech);
        let rel = (c_fit - c_true).abs() / c_true;
        assert!(
            rel < 0.05,
            "cooperativity[{cavity}][{mech}]: fitted {c_fit}, true {c_true}, rel {rel}"
        );
    }

    // noise stage: paper-like effective occupations, 5% multiplicative noise
    let eff = modenet::expansion::effective_parameters(&device, &drives).unwrap();
    let mut noisy_device = device.clone();
    noisy_device.bath_occupation = [
        0.89 * eff.mech_linewidth_eff[0] / device.mech_linewidth[0],
        12.0 * eff.mech_linewidth_eff[1] / device.mech_linewidth[1],
    ];
    let noise_net = build_expanded_network(&noisy_device, &drives, 1).unwrap();
    let ports = vec!["a1".to_string(), "a2".to_string()];
    let map = modenet::noise::noise_map(&noise_net, &ports, &offsets, &phases).unwrap();
    let mut noise_obs = Vec::new();
    for (ip, &phase) in phases.iter().enumerate() {
        for (io, &offset) in offsets.iter().enumerate() {
            for (k, port) in ports.iter().enumerate() {
                let v = map.value(ip, io, k);
                noise_obs.push(NoiseObservation {
                    offset_hz: offset,
                    phase_rad: phase,
                    port: port.clone(),
                    value: v * (1.0 + 0.05 * gauss(&mut rng)),
                    sigma: Some(0.05 * v.max(0.05)),
                });
            }
        }
    }
    let noise_problem = NoiseFitProblem {
        device: noisy_device.clone(),
        drives: drives.clone(),
        depth: 1,
        fit_amplifier_noise: false,
        observations: noise_obs,
    };
    let noise_report = fit_noise(&noise_problem).unwrap();
    for k in 0..2 {
        let rel = (noise_report.values[k] - noisy_device.bath_occupation[k]).abs()
            / noisy_device.bath_occupation[k];
        assert!(rel < 0.10, "bath {k}: rel error {rel}");
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "budget 5 min, took {elapsed:?}"
    );
    pass(
        10,
        "41x37 synthetic fit: cooperativities within 5%, baths within 10%",
        elapsed,
    );
}

#[test]
fn criterion_11_side_formula_consistency() {
    let t0 = Instant::now();
    // invert the damped widths for the implied cooperativities
    let c1: f64 = (70.0e3 / 15.0 - 1.0) / 2.0;
    let c2: f64 = (7.0e3 / 19.0 - 1.0) / 2.0;
    assert!(c1.is_finite() && c1 > 0.0, "C1 = {c1}");
    assert!(c2.is_finite() && c2 > 0.0, "C2 = {c2}");
    assert!((c1 - 2332.8).abs() / 2332.8 < 0.01, "C1 = {c1}");
    assert!((c2 - 183.7).abs() / 183.7 < 0.01, "C2 = {c2}");
    // and the formula reproduces the widths from those cooperativities
    assert!((reciprocal_bandwidth(15.0, c1) - 70.0e3).abs() < 1e-6);
    assert!((reciprocal_bandwidth(19.0, c2) - 7.0e3).abs() < 1e-6);
    let elapsed = t0.elapsed();
    pass(
        11,
        "gamma (1 + 2C) inverts to positive finite C for 70 kHz / 7 kHz",
        elapsed,
    );
}

// cross-checks used by several criteria

#[test]
fn profile_matches_lorentzian_within_five_percent_of_peak() {
    let spec = IsolatorSpec::optimal(100.0, 100.0, 1.0, 1.0, 1.6e3, 7.5e3).unwrap();
    let net = spec.network();
    let g = nonreciprocal_bandwidth(1.6e3, 7.5e3);
    for i in 0..=160 {
        let dw = -4.0 * g + 8.0 * g * i as f64 / 160.0;
        let s = net.scattering(dw).unwrap();
        let numeric = s[(1, 0)].norm_sqr() - s[(0, 1)].norm_sqr();
        let closed = lorentzian_profile(1.0, 1.0, 1.6e3, 7.5e3, dw);
        assert!(
            (numeric - closed).abs() < 0.05,
            "offset {dw}: numeric {numeric} vs closed {closed}"
        );
    }
}

#[test]
fn fwhm_converges_with_cooperativity() {
    let g = nonreciprocal_bandwidth(1.6e3, 7.5e3);
    for (c, tol) in [(100.0, 0.05), (1.0e4, 0.01)] {
        let spec = IsolatorSpec::optimal(c, c, 1.0, 1.0, 1.6e3, 7.5e3).unwrap();
        let net = spec.network();
        let profile = |dw: f64| {
            let s = net.scattering(dw).unwrap();
            s[(1, 0)].norm_sqr() - s[(0, 1)].norm_sqr()
        };
        let fwhm = profile_fwhm(profile, g / 2.0).unwrap();
        let rel = (fwhm - g).abs() / g;
        assert!(rel < tol, "C = {c}: FWHM rel error {rel} >= {tol}");
    }
}

#[test]
fn low_cooperativity_numeric_optimum_beats_closed_form() {
    let designs = optimize_design(1.0, 1.0, 1.0, 1.0, 100.0, 100.0).unwrap();
    let (phase_closed, _) = optimal_loop_phase(1.0, 1.0).unwrap();
    let closed = matched_transmission_difference(1.0, 1.0, 1.0, 1.0, phase_closed).unwrap();
    assert!(
        designs[0].delta_t >= closed - 1e-12,
        "numeric {} below closed form {closed}",
        designs[0].delta_t
    );
}
