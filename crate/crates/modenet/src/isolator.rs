//! Four-mode isolator design: closed-form optima for the drive detunings and
//! loop phase, the transmission-difference figure of merit, nonreciprocal and
//! reciprocal bandwidths, and a numeric optimizer that supersedes the closed
//! forms at low cooperativity.
//!
//! The figure of merit throughout is the transmission difference
//! `dT = |S21|^2 - |S12|^2`, which lies in [-1, 1] and simultaneously rewards
//! high forward transmission and deep reverse isolation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Coupling, Mode, ModeNetwork};
use crate::optim::nelder_mead;

/// Cavity linewidth used for synthetic four-mode networks, as a multiple of
/// the widest mechanical linewidth. Large enough that the cavity response is
/// flat over the mechanical band, where the closed forms apply.
pub const CAVITY_LINEWIDTH_FACTOR: f64 = 2000.0;

/// Parameters of a four-mode isolator in which each mechanical mode couples
/// equally to both cavities: `C3` belongs to mechanical mode 1 of the loop,
/// `C4` to mechanical mode 2. Detunings are normalized to the respective
/// mechanical linewidth.
#[derive(Debug, Clone, Serialize)]
pub struct IsolatorSpec {
    pub c3: f64,
    pub c4: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Mechanical linewidths in Hz (intrinsic or effective).
    pub gamma3: f64,
    pub gamma4: f64,
    /// Loop phase in radians.
    pub loop_phase: f64,
    /// Normalized drive detunings, in units of the respective gamma.
    pub delta3: f64,
    pub delta4: f64,
}

impl IsolatorSpec {
    pub fn new(c3: f64, c4: f64, eta1: f64, eta2: f64, gamma3: f64, gamma4: f64) -> Result<Self> {
        if !(c3 > 0.0 && c4 > 0.0) {
            return Err(Error::InvalidParameter(
                "cooperativities must be positive".into(),
            ));
        }
        if !((0.0..=1.0).contains(&eta1) && (0.0..=1.0).contains(&eta2)) {
            return Err(Error::InvalidParameter(
                "coupling efficiencies must lie in [0, 1]".into(),
            ));
        }
        if !(gamma3 > 0.0 && gamma4 > 0.0) {
            return Err(Error::InvalidParameter(
                "mechanical linewidths must be positive".into(),
            ));
        }
        Ok(IsolatorSpec {
            c3,
            c4,
            eta1,
            eta2,
            gamma3,
            gamma4,
            loop_phase: 0.0,
            delta3: 0.0,
            delta4: 0.0,
        })
    }

    pub fn with_loop_phase(mut self, phase: f64) -> Self {
        self.loop_phase = phase;
        self
    }

    pub fn with_detunings(mut self, delta3: f64, delta4: f64) -> Self {
        self.delta3 = delta3;
        self.delta4 = delta4;
        self
    }

    /// Spec at the closed-form optimum: positive-branch loop phase and the
    /// matched detuning branch that isolates port `a1` (positive `dT`).
    pub fn optimal(
        c3: f64,
        c4: f64,
        eta1: f64,
        eta2: f64,
        gamma3: f64,
        gamma4: f64,
    ) -> Result<Self> {
        let (phase, _) = optimal_loop_phase(c3, c4)?;
        let branches = optimal_detuning(c3, c4, phase)?;
        let base = IsolatorSpec::new(c3, c4, eta1, eta2, gamma3, gamma4)?.with_loop_phase(phase);
        let pick = branches
            .iter()
            .map(|&(d3, d4)| base.clone().with_detunings(d3, d4))
            .max_by(|a, b| {
                transmission_difference(a)
                    .unwrap_or(f64::NEG_INFINITY)
                    .total_cmp(&transmission_difference(b).unwrap_or(f64::NEG_INFINITY))
            })
            .expect("two branches");
        Ok(pick)
    }

    /// Realize the spec as a four-mode network with ports `a1`, `a2` (cavity
    /// modes) and `b1`, `b2` (mechanical modes). Frequencies are laid out in
    /// an offset frame around zero; only detunings enter the scattering.
    pub fn network(&self) -> ModeNetwork {
        let kappa = CAVITY_LINEWIDTH_FACTOR * self.gamma3.max(self.gamma4);
        four_mode_network(
            [[self.c3, self.c4], [self.c3, self.c4]],
            [self.eta1, self.eta2],
            [self.gamma3, self.gamma4],
            [kappa, kappa],
            [self.delta3, self.delta4],
            self.loop_phase,
        )
    }
}

/// Result of an isolator design: one loop-phase branch with its detunings,
/// transmission difference, and nonreciprocal bandwidth. The two branches of
/// [`optimize_design`] share detunings; flipping the phase sign reverses the
/// direction of isolation and the sign of `delta_t`.
#[derive(Debug, Clone, Serialize)]
pub struct DesignPoint {
    /// Loop phase in radians.
    pub phase: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub delta_t: f64,
    /// Nonreciprocal bandwidth in Hz.
    pub bandwidth_hz: f64,
}

/// Build a four-mode loop network with independent cooperativities
/// `c[cavity][mech]`, mechanical drive detunings normalized to the
/// mechanical linewidths, and the loop phase on the `a1`--`b2` edge.
pub fn four_mode_network(
    cooperativity: [[f64; 2]; 2],
    eta: [f64; 2],
    mech_linewidth: [f64; 2],
    cavity_linewidth: [f64; 2],
    detuning: [f64; 2],
    loop_phase: f64,
) -> ModeNetwork {
    let modes = vec![
        Mode::new("a1", "cavity1", 0.0, cavity_linewidth[0])
            .and_then(|m| m.with_efficiency(eta[0]))
            .expect("valid cavity mode"),
        Mode::new("a2", "cavity2", 0.0, cavity_linewidth[1])
            .and_then(|m| m.with_efficiency(eta[1]))
            .expect("valid cavity mode"),
        Mode::new("b1", "mech1", 0.0, mech_linewidth[0])
            .expect("valid mechanical mode")
            .with_signal_freq(detuning[0] * mech_linewidth[0]),
        Mode::new("b2", "mech2", 0.0, mech_linewidth[1])
            .expect("valid mechanical mode")
            .with_signal_freq(detuning[1] * mech_linewidth[1]),
    ];
    let beta = |c: f64| c.max(0.0).sqrt() / 2.0;
    let couplings = vec![
        Coupling::new("a1", "b1", beta(cooperativity[0][0]), "d11").expect("valid coupling"),
        Coupling::new("a1", "b2", beta(cooperativity[0][1]), "d12").expect("valid coupling"),
        Coupling::new("a2", "b1", beta(cooperativity[1][0]), "d21").expect("valid coupling"),
        Coupling::new("a2", "b2", beta(cooperativity[1][1]), "d22").expect("valid coupling"),
    ];
    ModeNetwork::new(modes, couplings, loop_phase, Some("d12".to_string()))
        .expect("four-mode network is always valid")
}

/// Optimal loop phase `+-acos(1 - 1/sqrt(c3 c4))`, returned as the
/// `(positive, negative)` branch pair.
pub fn optimal_loop_phase(c3: f64, c4: f64) -> Result<(f64, f64)> {
    if !(c3 > 0.0 && c4 > 0.0) {
        return Err(Error::InvalidParameter(
            "cooperativities must be positive".into(),
        ));
    }
    let x = 1.0 - 1.0 / (c3 * c4).sqrt();
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::PhaseDomain(x));
    }
    let phase = x.acos();
    Ok((phase, -phase))
}

/// Impedance-matched drive detunings at a given loop phase. Matching forces
/// `delta4 = -delta3`; both sign branches are returned. The first branch,
/// `(-d, +d)`, pairs with positive loop phases to isolate port `a1`.
pub fn optimal_detuning(c3: f64, c4: f64, phase: f64) -> Result<[(f64, f64); 2]> {
    if !(c3 > 0.0 && c4 > 0.0) {
        return Err(Error::InvalidParameter(
            "cooperativities must be positive".into(),
        ));
    }
    let radicand = 2.0 * c3 * c4 * (1.0 - phase.cos()) - 1.0;
    if radicand < 0.0 {
        return Err(Error::NoMatchedDetuning(radicand));
    }
    let d = 0.5 * radicand.sqrt();
    Ok([(-d, d), (d, -d)])
}

/// Transmission difference at the impedance-matched detuning for this loop
/// phase, evaluated in closed form in the wide-cavity limit. When no matched
/// detuning exists at this phase, the detunings are instead optimized
/// numerically through the exact scattering and the best value is returned.
pub fn matched_transmission_difference(
    c3: f64,
    c4: f64,
    eta1: f64,
    eta2: f64,
    phase: f64,
) -> Result<f64> {
    if !(c3 > 0.0 && c4 > 0.0) {
        return Err(Error::InvalidParameter(
            "cooperativities must be positive".into(),
        ));
    }
    let cosp = phase.cos();
    let radicand = 2.0 * c3 * c4 * (1.0 - cosp) - 1.0;
    if radicand >= 0.0 {
        let num = 4.0 * eta1 * eta2 * phase.sin() * radicand.sqrt();
        let den =
            2.0 + (1.0 - cosp) * (c3 * c3 + c4 * c4 + 2.0 * c3 + 2.0 * c4 - 2.0 * c3 * c4 * cosp);
        return Ok(num / den);
    }
    // no matched point: report the best exactly-computed value at this phase
    let c = [[c3, c4], [c3, c4]];
    let eta = [eta1, eta2];
    let objective = |x: &[f64]| -delta_t_on_resonance(c, eta, phase, x[0], x[1]);
    let r = nelder_mead(objective, &[0.0, 0.0], &[0.25, -0.25], 1e-10, 1e-14, 2000);
    Ok(-r.value)
}

/// Transmission difference at the optimal loop phase, in the wide-cavity
/// high-cooperativity closed form.
pub fn peak_transmission_difference(c3: f64, c4: f64, eta1: f64, eta2: f64) -> Result<f64> {
    if !(c3 > 0.0 && c4 > 0.0) {
        return Err(Error::InvalidParameter(
            "cooperativities must be positive".into(),
        ));
    }
    let s3 = c3.sqrt();
    let s4 = c4.sqrt();
    Ok(eta1 * eta2 * (8.0 * s3 * s4 - 4.0) / ((c3 - c4).powi(2) + 2.0 * (s3 + s4).powi(2)))
}

/// Exact on-resonance transmission difference `|S21|^2 - |S12|^2` for the
/// given spec, through the full scattering computation.
pub fn transmission_difference(spec: &IsolatorSpec) -> Result<f64> {
    let s = spec.network().scattering(0.0)?;
    Ok(s[(1, 0)].norm_sqr() - s[(0, 1)].norm_sqr())
}

fn delta_t_on_resonance(
    cooperativity: [[f64; 2]; 2],
    eta: [f64; 2],
    phase: f64,
    d3: f64,
    d4: f64,
) -> f64 {
    // on resonance only normalized detunings matter; unit mechanical lines
    let net = four_mode_network(
        cooperativity,
        eta,
        [1.0, 1.0],
        [CAVITY_LINEWIDTH_FACTOR, CAVITY_LINEWIDTH_FACTOR],
        [d3, d4],
        phase,
    );
    match net.scattering(0.0) {
        Ok(s) => s[(1, 0)].norm_sqr() - s[(0, 1)].norm_sqr(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Numerically maximize |dT| over the two drive detunings at a fixed loop
/// phase, for a four-mode loop with independent cooperativities
/// `c[cavity][mech]`. Returns the detunings and the signed transmission
/// difference there. The sign of the phase picks the direction of isolation;
/// the magnitude of the optimum is phase-sign symmetric.
pub fn optimize_detunings(
    cooperativity: [[f64; 2]; 2],
    eta: [f64; 2],
    phase: f64,
) -> Result<((f64, f64), f64)> {
    let forward = phase >= 0.0;
    let objective = |x: &[f64]| {
        let dt = delta_t_on_resonance(cooperativity, eta, phase, x[0], x[1]);
        if forward {
            -dt
        } else {
            dt
        }
    };
    // coarse scan, then simplex refinement
    let mut best = (f64::INFINITY, [0.0_f64, 0.0]);
    for i in -12..=12 {
        for j in -12..=12 {
            let x = [i as f64 * 0.5, j as f64 * 0.5];
            let v = objective(&x);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    let r = nelder_mead(objective, &best.1, &[0.2, -0.2], 1e-12, 1e-15, 3000);
    if !r.converged {
        return Err(Error::OptimizerNonConvergence {
            iterations: r.iterations,
            best: -r.value,
            point: r.point,
        });
    }
    let dt = delta_t_on_resonance(cooperativity, eta, phase, r.point[0], r.point[1]);
    Ok(((r.point[0], r.point[1]), dt))
}

/// Numerically maximize the transmission difference over loop phase and both
/// drive detunings, through the exact scattering computation. Returns both
/// phase branches: `[0]` isolates port `a1` (positive `delta_t`), `[1]` is
/// the mirrored design with opposite phase and sign. Seeded at the
/// closed-form optimum after a coarse phase scan that avoids the reciprocal
/// saddle at zero phase.
pub fn optimize_design(
    c3: f64,
    c4: f64,
    eta1: f64,
    eta2: f64,
    gamma3: f64,
    gamma4: f64,
) -> Result<[DesignPoint; 2]> {
    // validate via the spec constructor
    IsolatorSpec::new(c3, c4, eta1, eta2, gamma3, gamma4)?;
    let c = [[c3, c4], [c3, c4]];
    let eta = [eta1, eta2];

    // coarse scan over (0, pi), trying matched detunings where they exist
    let mut best = (0.0_f64, 0.0_f64, 0.0_f64, f64::NEG_INFINITY);
    for i in 1..=60 {
        let phase = std::f64::consts::PI * i as f64 / 61.0;
        let mut candidates = vec![(0.0, 0.0)];
        if let Ok(branches) = optimal_detuning(c3, c4, phase) {
            candidates.extend_from_slice(&branches);
        }
        for (d3, d4) in candidates {
            let value = delta_t_on_resonance(c, eta, phase, d3, d4);
            if value > best.3 {
                best = (phase, d3, d4, value);
            }
        }
    }

    let objective = |x: &[f64]| -delta_t_on_resonance(c, eta, x[0], x[1], x[2]);
    let dscale = 0.1 * (1.0 + best.1.abs().max(best.2.abs()));
    let r = nelder_mead(
        objective,
        &[best.0, best.1, best.2],
        &[0.05, dscale, -dscale],
        1e-12,
        1e-15,
        4000,
    );
    if !r.converged {
        return Err(Error::OptimizerNonConvergence {
            iterations: r.iterations,
            best: -r.value,
            point: r.point,
        });
    }
    let bandwidth_hz = nonreciprocal_bandwidth(gamma3, gamma4);
    let forward = DesignPoint {
        phase: r.point[0],
        delta3: r.point[1],
        delta4: r.point[2],
        delta_t: -r.value,
        bandwidth_hz,
    };
    // flipping only the loop phase transposes S, reversing the isolation
    let reverse = DesignPoint {
        phase: -forward.phase,
        delta3: forward.delta3,
        delta4: forward.delta4,
        delta_t: -forward.delta_t,
        bandwidth_hz,
    };
    Ok([forward, reverse])
}

/// Nonreciprocal bandwidth `4 g3 g4 / (g3 + g4)`, independent of
/// cooperativity. Linewidths in Hz.
pub fn nonreciprocal_bandwidth(gamma3: f64, gamma4: f64) -> f64 {
    assert!(gamma3 > 0.0 && gamma4 > 0.0, "linewidths must be positive");
    4.0 * gamma3 * gamma4 / (gamma3 + gamma4)
}

/// Reciprocal conversion bandwidth `gamma (1 + 2C)` in Hz.
pub fn reciprocal_bandwidth(gamma: f64, c: f64) -> f64 {
    assert!(gamma > 0.0, "linewidth must be positive");
    assert!(c >= 0.0, "cooperativity must be nonnegative");
    gamma * (1.0 + 2.0 * c)
}

/// Exact transmission-difference profile over probe offsets (Hz).
pub fn delta_t_profile(spec: &IsolatorSpec, offsets: &[f64]) -> Result<Vec<f64>> {
    let net = spec.network();
    offsets
        .iter()
        .map(|&dw| {
            let s = net.scattering(dw)?;
            Ok(s[(1, 0)].norm_sqr() - s[(0, 1)].norm_sqr())
        })
        .collect()
}

/// High-cooperativity limit of the transmission-difference profile: a
/// Lorentzian in the probe offset whose full width at half maximum equals
/// the nonreciprocal bandwidth.
pub fn lorentzian_profile(eta1: f64, eta2: f64, gamma3: f64, gamma4: f64, offset: f64) -> f64 {
    let g = nonreciprocal_bandwidth(gamma3, gamma4);
    eta1 * eta2 * g * g / (g * g + 4.0 * offset * offset)
}

/// Full width at half maximum of a peaked profile centered near zero, found
/// by bracketing and bisection on each side. `half_width_guess` sets the
/// initial search step. Returns `None` when no half-maximum crossing is
/// found within 10^4 steps on either side.
pub fn profile_fwhm(f: impl Fn(f64) -> f64, half_width_guess: f64) -> Option<f64> {
    let peak = f(0.0);
    if !(peak > 0.0) {
        return None;
    }
    let half = peak / 2.0;
    let crossing = |sign: f64| -> Option<f64> {
        let step = sign * half_width_guess / 4.0;
        let mut prev = 0.0;
        let mut x = step;
        for _ in 0..10_000 {
            if f(x) < half {
                // bisect in (prev, x)
                let (mut lo, mut hi) = (prev, x);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < half {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            prev = x;
            x += step;
        }
        None
    };
    let right = crossing(1.0)?;
    let left = crossing(-1.0)?;
    Some(right - left)
}
