//! Coupled-mode networks: modes, couplings, the mode-coupling matrix, and
//! scattering.
//!
//! A network is a graph of modes (resonances evaluated at specific Fourier
//! frequencies) joined by beam-splitter couplings. The mode-coupling matrix
//! at probe offset `dw` has diagonal entries
//!
//! ```text
//! M_jj = (signal_freq_j + dw - resonance_freq_j) / linewidth_j + i/2
//! ```
//!
//! and off-diagonal entries `beta_jk` on coupled pairs, with the conjugate on
//! the transposed entry. The scattering matrix follows as
//! `S = i H M^{-1} H - 1` with `H = diag(sqrt(eta_j))`.
//!
//! All externally visible frequencies and linewidths are ordinary frequencies
//! in Hz; the normalization happens inside the matrix assembly, so no factors
//! of 2*pi appear in the API.

use std::collections::{HashMap, HashSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

/// One resonance evaluated at one Fourier (signal) frequency.
///
/// Two modes may live in the same physical oscillator; duplicates evaluated
/// at different signal frequencies count as distinct modes.
#[derive(Debug, Clone, Serialize)]
pub struct Mode {
    /// Unique label within a network.
    pub id: String,
    /// Physical resonator this mode lives in. Modes sharing an oscillator
    /// label must share `resonance_freq` and `linewidth`.
    pub oscillator: String,
    /// Resonance frequency in Hz. Any consistent reference frame is allowed;
    /// only differences from the signal frequency enter the matrix.
    pub resonance_freq: f64,
    /// Total linewidth in Hz, strictly positive.
    pub linewidth: f64,
    /// Fraction of the linewidth coupled to the measured port, in [0, 1].
    pub coupling_efficiency: f64,
    /// Fourier frequency at which this mode is evaluated, in Hz.
    pub signal_freq: f64,
    /// Mean thermal quanta of this mode's input field.
    pub bath_occupation: f64,
}

impl Mode {
    /// Create a mode evaluated at its own resonance, with unit coupling
    /// efficiency and an empty bath. Adjust fields afterwards as needed.
    pub fn new(
        id: impl Into<String>,
        oscillator: impl Into<String>,
        resonance_freq: f64,
        linewidth: f64,
    ) -> Result<Self> {
        let mode = Mode {
            id: id.into(),
            oscillator: oscillator.into(),
            resonance_freq,
            linewidth,
            coupling_efficiency: 1.0,
            signal_freq: resonance_freq,
            bath_occupation: 0.0,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn with_signal_freq(mut self, signal_freq: f64) -> Self {
        self.signal_freq = signal_freq;
        self
    }

    pub fn with_efficiency(mut self, eta: f64) -> Result<Self> {
        self.coupling_efficiency = eta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_bath_occupation(mut self, n: f64) -> Result<Self> {
        self.bath_occupation = n;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidMode {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.is_empty() {
            return fail("empty id");
        }
        if !(self.linewidth > 0.0) {
            return fail("linewidth must be strictly positive");
        }
        if !(0.0..=1.0).contains(&self.coupling_efficiency) {
            return fail("coupling efficiency must lie in [0, 1]");
        }
        if !(self.bath_occupation >= 0.0) {
            return fail("bath occupation must be nonnegative");
        }
        if !self.resonance_freq.is_finite() || !self.signal_freq.is_finite() {
            return fail("frequencies must be finite");
        }
        Ok(())
    }
}

/// A beam-splitter coupling between two modes, normalized by the geometric
/// mean of the two linewidths. Stored as magnitude and phase; under the
/// network gauge convention all phases are zero except the loop phase, which
/// lives on the network's designated edge.
#[derive(Debug, Clone, Serialize)]
pub struct Coupling {
    pub mode_a: String,
    pub mode_b: String,
    /// |beta|, dimensionless.
    pub magnitude: f64,
    /// Static phase of beta in radians.
    pub phase: f64,
    /// Label of the drive tone producing this coupling.
    pub drive: String,
}

impl Coupling {
    pub fn new(
        mode_a: impl Into<String>,
        mode_b: impl Into<String>,
        magnitude: f64,
        drive: impl Into<String>,
    ) -> Result<Self> {
        let c = Coupling {
            mode_a: mode_a.into(),
            mode_b: mode_b.into(),
            magnitude,
            phase: 0.0,
            drive: drive.into(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Complex coupling strength beta.
    pub fn beta(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }

    fn validate(&self) -> Result<()> {
        if self.mode_a == self.mode_b {
            return Err(Error::InvalidCoupling {
                a: self.mode_a.clone(),
                b: self.mode_b.clone(),
                reason: "a mode cannot couple to itself".into(),
            });
        }
        if !(self.magnitude >= 0.0) {
            return Err(Error::InvalidCoupling {
                a: self.mode_a.clone(),
                b: self.mode_b.clone(),
                reason: "magnitude must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// An immutable coupled-mode network: the mode list fixes the matrix index
/// order. Safe to share across threads; scattering is a pure function of
/// `(network, probe_offset)`.
#[derive(Debug, Clone)]
pub struct ModeNetwork {
    modes: Vec<Mode>,
    couplings: Vec<Coupling>,
    loop_phase: f64,
    phase_drive: Option<String>,
    index: HashMap<String, usize>,
}

impl ModeNetwork {
    /// Build and validate a network. `phase_drive`, when present, names the
    /// drive whose couplings carry the loop phase: each such coupling's
    /// matrix entry `M[mode_a][mode_b]` is multiplied by
    /// `exp(i * loop_phase)`. Phasing every edge of one drive (rather than a
    /// single edge) keeps all spurious cycles of an expanded network
    /// phase-free, exactly as shifting that drive's phase does physically.
    /// In a plain four-mode loop the designated drive owns a single edge.
    pub fn new(
        modes: Vec<Mode>,
        couplings: Vec<Coupling>,
        loop_phase: f64,
        phase_drive: Option<String>,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, mode) in modes.iter().enumerate() {
            mode.validate()?;
            if index.insert(mode.id.clone(), i).is_some() {
                return Err(Error::InvalidMode {
                    id: mode.id.clone(),
                    reason: "duplicate mode id".into(),
                });
            }
        }
        // modes sharing an oscillator share resonance frequency and linewidth
        let mut osc: HashMap<&str, (f64, f64)> = HashMap::new();
        for mode in &modes {
            match osc.get(mode.oscillator.as_str()) {
                None => {
                    osc.insert(&mode.oscillator, (mode.resonance_freq, mode.linewidth));
                }
                Some(&(f, w)) => {
                    if f != mode.resonance_freq || w != mode.linewidth {
                        return Err(Error::InvalidMode {
                            id: mode.id.clone(),
                            reason: format!(
                                "oscillator `{}` already defined with different resonance or linewidth",
                                mode.oscillator
                            ),
                        });
                    }
                }
            }
        }
        let mut pairs = HashSet::new();
        for c in &couplings {
            c.validate()?;
            for end in [&c.mode_a, &c.mode_b] {
                if !index.contains_key(end) {
                    return Err(Error::UnknownMode(end.clone()));
                }
            }
            let key = ordered_pair(&c.mode_a, &c.mode_b);
            if !pairs.insert(key) {
                return Err(Error::InvalidCoupling {
                    a: c.mode_a.clone(),
                    b: c.mode_b.clone(),
                    reason: "at most one coupling per mode pair".into(),
                });
            }
        }
        if let Some(drive) = &phase_drive {
            if !couplings.iter().any(|c| &c.drive == drive) {
                return Err(Error::InvalidParameter(format!(
                    "designated phase drive `{drive}` owns no coupling"
                )));
            }
        }

        let network = ModeNetwork {
            modes,
            couplings,
            loop_phase,
            phase_drive,
            index,
        };
        if !network.is_connected() {
            log::warn!("mode network has disconnected components");
        }
        Ok(network)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn loop_phase(&self) -> f64 {
        self.loop_phase
    }

    /// Drive whose couplings carry the loop phase.
    pub fn phase_drive(&self) -> Option<&str> {
        self.phase_drive.as_deref()
    }

    /// Same network with a different loop phase.
    pub fn with_loop_phase(&self, loop_phase: f64) -> Self {
        let mut n = self.clone();
        n.loop_phase = loop_phase;
        n
    }

    /// Matrix index of a mode label.
    pub fn mode_index(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownMode(id.to_string()))
    }

    /// Coupling efficiencies in mode order.
    pub fn efficiencies(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.coupling_efficiency).collect()
    }

    /// Bath occupations in mode order.
    pub fn bath_occupations(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.bath_occupation).collect()
    }

    fn is_connected(&self) -> bool {
        if self.modes.len() <= 1 {
            return true;
        }
        let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
        for c in &self.couplings {
            let (a, b) = (self.index[&c.mode_a], self.index[&c.mode_b]);
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
        let mut seen = vec![false; self.modes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in adjacency.get(&i).map(Vec::as_slice).unwrap_or(&[]) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Assemble the mode-coupling matrix at the given probe offset. The
    /// offset rigidly shifts every mode's signal frequency, encoding a single
    /// injected tone that maps to one signal frequency per mode.
    pub fn assemble_m(&self, probe_offset: f64) -> ComplexMatrix {
        let n = self.modes.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (j, mode) in self.modes.iter().enumerate() {
            let detuning = (mode.signal_freq + probe_offset - mode.resonance_freq) / mode.linewidth;
            m[(j, j)] = Complex64::new(detuning, 0.5);
        }
        for c in &self.couplings {
            let (ia, ib) = (self.index[&c.mode_a], self.index[&c.mode_b]);
            let mut beta = c.beta();
            if self.phase_drive.as_deref() == Some(c.drive.as_str()) {
                beta *= Complex64::from_polar(1.0, self.loop_phase);
            }
            m[(ia, ib)] = beta;
            m[(ib, ia)] = beta.conj();
        }
        m
    }

    /// Scattering matrix at the given probe offset, computed by dense LU
    /// factorization and per-column solves.
    pub fn scattering(&self, probe_offset: f64) -> Result<ComplexMatrix> {
        let m = self.assemble_m(probe_offset);
        linalg::scattering_from_matrix(&m, &self.efficiencies(), probe_offset)
    }

    /// One scattering element by port labels (out, in).
    pub fn scattering_element(
        &self,
        out: &str,
        input: &str,
        probe_offset: f64,
    ) -> Result<Complex64> {
        let s = self.scattering(probe_offset)?;
        Ok(s[(self.mode_index(out)?, self.mode_index(input)?)])
    }

    /// Tabulate |S|^2 (and optionally complex S) over an offset x phase grid
    /// for the requested (out, in) port pairs. Phase grid values add to the
    /// network's own loop phase. Grid points are independent pure evaluations
    /// and run in parallel; per-point failures are recorded as NaN values
    /// plus a flag instead of aborting the sweep.
    pub fn sweep_scattering(
        &self,
        offsets: &[f64],
        phases: &[f64],
        pairs: &[(String, String)],
        keep_complex: bool,
    ) -> Result<SweepResult> {
        if offsets.is_empty() || phases.is_empty() || pairs.is_empty() {
            return Err(Error::InvalidParameter(
                "sweep grids and port pairs must be nonempty".into(),
            ));
        }
        let mut pair_idx = Vec::with_capacity(pairs.len());
        for (out, input) in pairs {
            pair_idx.push((self.mode_index(out)?, self.mode_index(input)?));
        }

        let np = pairs.len();
        let points: Vec<(usize, usize)> = (0..phases.len())
            .flat_map(|ip| (0..offsets.len()).map(move |io| (ip, io)))
            .collect();

        let evaluated: Vec<(Vec<f64>, Vec<Complex64>, Option<String>)> = points
            .par_iter()
            .map(|&(ip, io)| {
                let net = self.with_loop_phase(self.loop_phase + phases[ip]);
                match net.scattering(offsets[io]) {
                    Ok(s) => {
                        let mut vals = Vec::with_capacity(np);
                        let mut cplx = Vec::with_capacity(if keep_complex { np } else { 0 });
                        for &(o, i) in &pair_idx {
                            let e = s[(o, i)];
                            vals.push(e.norm_sqr());
                            if keep_complex {
                                cplx.push(e);
                            }
                        }
                        (vals, cplx, None)
                    }
                    Err(e) => (
                        vec![f64::NAN; np],
                        if keep_complex {
                            vec![Complex64::new(f64::NAN, f64::NAN); np]
                        } else {
                            Vec::new()
                        },
                        Some(e.to_string()),
                    ),
                }
            })
            .collect();

        let mut values = Vec::with_capacity(points.len() * np);
        let mut complex = if keep_complex {
            Some(Vec::with_capacity(points.len() * np))
        } else {
            None
        };
        let mut failures = Vec::new();
        for (&(ip, io), (vals, cplx, err)) in points.iter().zip(evaluated) {
            values.extend(vals);
            if let Some(cv) = complex.as_mut() {
                cv.extend(cplx);
            }
            if let Some(message) = err {
                failures.push(GridFailure {
                    phase_index: ip,
                    offset_index: io,
                    message,
                });
            }
        }

        Ok(SweepResult {
            offsets: offsets.to_vec(),
            phases: phases.to_vec(),
            pairs: pairs.to_vec(),
            values,
            complex,
            failures,
        })
    }
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// A grid point whose scattering evaluation failed; its values are NaN.
#[derive(Debug, Clone, Serialize)]
pub struct GridFailure {
    pub phase_index: usize,
    pub offset_index: usize,
    pub message: String,
}

/// |S|^2 values tabulated over an (offset, phase) grid for a list of port
/// pairs, stored row-major as `[phase][offset][pair]`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub offsets: Vec<f64>,
    /// Loop phases in radians.
    pub phases: Vec<f64>,
    /// (out, in) port labels.
    pub pairs: Vec<(String, String)>,
    values: Vec<f64>,
    #[serde(skip)]
    complex: Option<Vec<Complex64>>,
    pub failures: Vec<GridFailure>,
}

impl SweepResult {
    fn flat(&self, phase_index: usize, offset_index: usize, pair_index: usize) -> usize {
        (phase_index * self.offsets.len() + offset_index) * self.pairs.len() + pair_index
    }

    /// |S|^2 at a grid point; NaN if that point failed.
    pub fn value(&self, phase_index: usize, offset_index: usize, pair_index: usize) -> f64 {
        self.values[self.flat(phase_index, offset_index, pair_index)]
    }

    /// Complex S at a grid point, when the sweep kept complex values.
    pub fn complex_value(
        &self,
        phase_index: usize,
        offset_index: usize,
        pair_index: usize,
    ) -> Option<Complex64> {
        self.complex
            .as_ref()
            .map(|c| c[self.flat(phase_index, offset_index, pair_index)])
    }
}
