//! Output noise spectra through the scattering matrix and an amplifier-chain
//! model, plus steady-state mode occupancies from the internal response.
//!
//! The device-referred output noise at a port is the bath-occupation-weighted
//! row sum `sum_k |S_jk|^2 n_k`, in quanta. Referred through an amplifier of
//! power gain `G` and added noise `n_amp` (taken in the large-gain limit),
//! the spectrum in W/Hz becomes `hbar w G (1 + n_amp + sum_k |S_jk|^2 n_k)`.

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::eliminate_modes;
use crate::network::ModeNetwork;

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Gain and added noise of the amplification chain behind one port.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PortAmplifier {
    /// Power gain, at least 1.
    pub gain: f64,
    /// Added noise referred to the amplifier input, in quanta.
    pub added_noise: f64,
}

/// Per-port amplifier chain parameters.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AmplifierChain {
    ports: HashMap<String, PortAmplifier>,
}

impl AmplifierChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(mut self, port: impl Into<String>, gain: f64, added_noise: f64) -> Result<Self> {
        if !(gain >= 1.0) {
            return Err(Error::InvalidParameter(
                "amplifier gain must be >= 1".into(),
            ));
        }
        if !(added_noise >= 0.0) {
            return Err(Error::InvalidParameter(
                "amplifier added noise must be nonnegative".into(),
            ));
        }
        self.ports
            .insert(port.into(), PortAmplifier { gain, added_noise });
        Ok(self)
    }

    pub fn get(&self, port: &str) -> Option<PortAmplifier> {
        self.ports.get(port).copied()
    }
}

/// Output noise at one port over a probe-offset grid: device-referred quanta
/// and, when an amplifier chain is supplied, the chain-referred spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseSpectrum {
    pub port: String,
    pub offsets: Vec<f64>,
    /// Device-referred output noise in quanta.
    pub quanta: Vec<f64>,
    /// Chain-referred spectrum in W/Hz, when requested.
    pub watts_per_hz: Option<Vec<f64>>,
}

/// Device-referred output noise at `port` over the offsets, optionally
/// referred through the amplifier chain. Chain referral needs the port's
/// absolute signal frequency to be positive.
pub fn output_noise(
    network: &ModeNetwork,
    port: &str,
    offsets: &[f64],
    chain: Option<&AmplifierChain>,
) -> Result<NoiseSpectrum> {
    let row = network
        .mode_index(port)
        .map_err(|_| Error::UnknownPort(port.to_string()))?;
    let occupations = network.bath_occupations();
    let amp = match chain {
        None => None,
        Some(c) => Some(c.get(port).ok_or_else(|| {
            Error::InvalidParameter(format!("no amplifier entry for port `{port}`"))
        })?),
    };
    let port_freq = network.modes()[row].signal_freq;
    if amp.is_some() && port_freq <= 0.0 {
        return Err(Error::InvalidParameter(
            "chain-referred spectra need a positive absolute signal frequency".into(),
        ));
    }

    let mut quanta = Vec::with_capacity(offsets.len());
    for &dw in offsets {
        let s = network.scattering(dw)?;
        let q: f64 = occupations
            .iter()
            .enumerate()
            .filter(|(_, n)| **n > 0.0)
            .map(|(k, n)| s[(row, k)].norm_sqr() * n)
            .sum();
        quanta.push(q);
    }
    let watts_per_hz = amp.map(|a| {
        offsets
            .iter()
            .zip(&quanta)
            .map(|(&dw, &q)| {
                let omega = 2.0 * std::f64::consts::PI * (port_freq + dw);
                HBAR * omega * a.gain * (1.0 + a.added_noise + q)
            })
            .collect()
    });
    Ok(NoiseSpectrum {
        port: port.to_string(),
        offsets: offsets.to_vec(),
        quanta,
        watts_per_hz,
    })
}

/// Device-referred noise tabulated over an (offset, phase) grid per port,
/// stored row-major as `[phase][offset][port]`. Failed grid points hold NaN
/// and are listed in `failures`.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseMap {
    pub ports: Vec<String>,
    pub offsets: Vec<f64>,
    /// Loop phases in radians, added to the network's own loop phase.
    pub phases: Vec<f64>,
    values: Vec<f64>,
    pub failures: Vec<crate::network::GridFailure>,
}

impl NoiseMap {
    pub fn value(&self, phase_index: usize, offset_index: usize, port_index: usize) -> f64 {
        self.values
            [(phase_index * self.offsets.len() + offset_index) * self.ports.len() + port_index]
    }
}

/// Grid evaluation of [`output_noise`] in device-referred quanta; pure per
/// point and evaluated in parallel.
pub fn noise_map(
    network: &ModeNetwork,
    ports: &[String],
    offsets: &[f64],
    phases: &[f64],
) -> Result<NoiseMap> {
    if ports.is_empty() || offsets.is_empty() || phases.is_empty() {
        return Err(Error::InvalidParameter(
            "noise map needs nonempty ports and grids".into(),
        ));
    }
    let rows: Vec<usize> = ports
        .iter()
        .map(|p| {
            network
                .mode_index(p)
                .map_err(|_| Error::UnknownPort(p.clone()))
        })
        .collect::<Result<_>>()?;
    let occupations = network.bath_occupations();

    let points: Vec<(usize, usize)> = (0..phases.len())
        .flat_map(|ip| (0..offsets.len()).map(move |io| (ip, io)))
        .collect();
    let evaluated: Vec<(Vec<f64>, Option<String>)> = points
        .par_iter()
        .map(|&(ip, io)| {
            let net = network.with_loop_phase(network.loop_phase() + phases[ip]);
            match net.scattering(offsets[io]) {
                Ok(s) => {
                    let vals = rows
                        .iter()
                        .map(|&row| {
                            occupations
                                .iter()
                                .enumerate()
                                .filter(|(_, n)| **n > 0.0)
                                .map(|(k, n)| s[(row, k)].norm_sqr() * n)
                                .sum()
                        })
                        .collect();
                    (vals, None)
                }
                Err(e) => (vec![f64::NAN; rows.len()], Some(e.to_string())),
            }
        })
        .collect();

    let mut values = Vec::with_capacity(points.len() * rows.len());
    let mut failures = Vec::new();
    for (&(ip, io), (vals, err)) in points.iter().zip(evaluated) {
        values.extend(vals);
        if let Some(message) = err {
            failures.push(crate::network::GridFailure {
                phase_index: ip,
                offset_index: io,
                message,
            });
        }
    }
    Ok(NoiseMap {
        ports: ports.to_vec(),
        offsets: offsets.to_vec(),
        phases: phases.to_vec(),
        values,
        failures,
    })
}

/// Steady-state occupancy of one mode, in quanta: the bath-weighted internal
/// response integrated over probe offset,
/// `n_j = (2 pi gamma_j)^{-1} Int sum_k |(M^{-1})_{jk}|^2 n_k dw`.
/// Valid for beam-splitter networks in steady state. The integral runs over
/// a compactified axis centered on the mode's resonance with adaptive
/// refinement; failure to converge reports the partial value.
pub fn mode_occupancy(network: &ModeNetwork, mode: &str) -> Result<f64> {
    let j = network.mode_index(mode)?;
    let target = &network.modes()[j];
    let occupations = network.bath_occupations();
    let n = network.n_modes();

    let integrand = |dw: f64| -> f64 {
        let m = network.assemble_m(dw);
        let lu = m.transpose().lu();
        let mut e = DVector::from_element(n, Complex64::new(0.0, 0.0));
        e[j] = Complex64::new(1.0, 0.0);
        match lu.solve(&e) {
            // y is row j of M^{-1}
            Some(y) => occupations
                .iter()
                .enumerate()
                .filter(|(_, nk)| **nk > 0.0)
                .map(|(k, nk)| y[k].norm_sqr() * nk)
                .sum(),
            None => 0.0,
        }
    };

    // center where the mode is resonant; scale from its damped linewidth
    let center = target.resonance_freq - target.signal_freq;
    let scale = damped_linewidth(network, j).unwrap_or(target.linewidth);

    let u_max = std::f64::consts::FRAC_PI_2 - 1e-8;
    let f = |u: f64| {
        let c = u.cos();
        integrand(center + scale * u.tan()) * scale / (c * c)
    };
    let integral = adaptive_simpson(&f, -u_max, u_max, 1e-8, 40);
    let occupancy = integral.value / (2.0 * std::f64::consts::PI * target.linewidth);
    if !integral.converged {
        return Err(Error::IntegrationNonConvergence { partial: occupancy });
    }
    Ok(occupancy)
}

/// Damped linewidth of mode `j` in Hz: eliminate every other mode at the
/// frequency where `j` is resonant and read the imaginary part of the
/// remaining diagonal.
fn damped_linewidth(network: &ModeNetwork, j: usize) -> Option<f64> {
    let target = &network.modes()[j];
    let m = network.assemble_m(target.resonance_freq - target.signal_freq);
    let others: Vec<usize> = (0..network.n_modes()).filter(|&i| i != j).collect();
    let red = eliminate_modes(&m, &others).ok()?;
    Some(2.0 * red.matrix[(0, 0)].im * target.linewidth)
}

struct Quadrature {
    value: f64,
    converged: bool,
}

fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Quadrature {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        converged: &mut bool,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        if depth == 0 {
            *converged = false;
            return left + right;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, converged)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, converged)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    // absolute tolerance referenced to a first coarse estimate
    let tol_abs = tol * whole.abs().max(1e-300);
    let mut converged = true;
    let value = recurse(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol_abs,
        max_depth,
        &mut converged,
    );
    Quadrature { value, converged }
}
