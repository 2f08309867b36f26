//! Dense complex linear algebra shared across the crate: factorized solves,
//! condition estimation, and the scattering formula.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex matrix indexed by a network's mode order.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Soft condition-number threshold: above this a warning is logged.
pub const CONDITION_WARN: f64 = 1e8;
/// Hard condition-number threshold: above this the solve is refused.
pub const CONDITION_ERROR: f64 = 1e13;

/// 1-norm (maximum absolute column sum) of a complex matrix.
pub fn one_norm(m: &ComplexMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Estimate the 1-norm condition number of `m` from its factorization,
/// using Hager-style power iteration on the implicit inverse. A handful of
/// solves; the inverse is never formed.
pub fn condition_estimate(m: &ComplexMatrix) -> Option<f64> {
    let n = m.nrows();
    if n == 0 {
        return Some(0.0);
    }
    let lu = m.clone().lu();
    let lu_adj = m.adjoint().lu();

    let mut x = DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0_f64;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        est = y.iter().map(|c| c.norm()).sum::<f64>();
        // unit-modulus sign vector of y
        let xi = y.map(|c| {
            let r = c.norm();
            if r == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                c / r
            }
        });
        let z = lu_adj.solve(&xi)?;
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, c)| (j, c.norm()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let zx: f64 = z
            .iter()
            .zip(x.iter())
            .map(|(zi, xi)| (zi.conj() * xi).re)
            .sum();
        if zmax <= zx || j == last_j {
            break;
        }
        x = DVector::from_element(n, Complex64::new(0.0, 0.0));
        x[j] = Complex64::new(1.0, 0.0);
        last_j = j;
    }

    // safeguard vector, as in standard condition estimators
    let v = DVector::from_fn(n, |i, _| {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(s * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0)), 0.0)
    });
    if let Some(w) = lu.solve(&v) {
        let alt = 2.0 * w.iter().map(|c| c.norm()).sum::<f64>() / (3.0 * n as f64);
        est = est.max(alt);
    }

    Some(one_norm(m) * est)
}

/// Compute `S = i H M^{-1} H - 1` with `H = diag(sqrt(eta))`, by factorizing
/// `M` once and solving per column. `offset_hz` is only used to annotate
/// errors with the offending frequency.
pub fn scattering_from_matrix(
    m: &ComplexMatrix,
    etas: &[f64],
    offset_hz: f64,
) -> Result<ComplexMatrix> {
    let n = m.nrows();
    assert_eq!(etas.len(), n, "one efficiency per mode");

    let cond = condition_estimate(m).ok_or(Error::Singular { offset_hz })?;
    if cond > CONDITION_ERROR {
        return Err(Error::IllConditioned { offset_hz, cond });
    }
    if cond > CONDITION_WARN {
        log::warn!(
            "mode-coupling matrix poorly conditioned at offset {offset_hz} Hz (cond ~ {cond:.3e})"
        );
    }

    let h: Vec<f64> = etas.iter().map(|e| e.sqrt()).collect();
    let mut rhs = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        rhs[(k, k)] = Complex64::new(h[k], 0.0);
    }
    let lu = m.clone().lu();
    let x = lu.solve(&rhs).ok_or(Error::Singular { offset_hz })?;

    let mut s = x;
    for j in 0..n {
        let factor = Complex64::new(0.0, h[j]);
        for k in 0..n {
            s[(j, k)] *= factor;
        }
        s[(j, j)] -= Complex64::new(1.0, 0.0);
    }
    Ok(s)
}
