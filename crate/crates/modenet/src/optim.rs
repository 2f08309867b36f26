//! Derivative-free simplex minimizer used by the design routines.

/// Outcome of a simplex minimization.
pub(crate) struct SimplexResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` with the Nelder-Mead simplex method, starting from `x0` with
/// per-coordinate initial steps `step`. Converges when both the simplex
/// spread and the value spread fall below the tolerances.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> SimplexResult {
    let n = x0.len();
    assert!(n > 0 && step.len() == n);
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        // order best..worst
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread_x = (0..n)
            .map(|d| {
                simplex
                    .iter()
                    .map(|v| (v[d] - simplex[best][d]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread_f = values[worst] - values[best];
        if spread_x < x_tol && spread_f.abs() < f_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (i, v) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for d in 0..n {
                centroid[d] += v[d] / n as f64;
            }
        }

        let reflect: Vec<f64> = (0..n)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[best] {
            let expand: Vec<f64> = (0..n)
                .map(|d| centroid[d] + gamma * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|d| centroid[d] + rho * (simplex[worst][d] - centroid[d]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                // shrink toward the best vertex
                let best_v = simplex[best].clone();
                for (i, v) in simplex.iter_mut().enumerate() {
                    if i == best {
                        continue;
                    }
                    for d in 0..n {
                        v[d] = best_v[d] + sigma * (v[d] - best_v[d]);
                    }
                    values[i] = f(v);
                }
            }
        }
    }

    let (ibest, &value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty simplex");
    SimplexResult {
        point: simplex[ibest].clone(),
        value,
        iterations,
        converged,
    }
}
