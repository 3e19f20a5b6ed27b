//! Deterministic derivative-free minimization: a coarse grid scan over a
//! bounding box followed by Nelder-Mead refinement of the best starting
//! points. All fit routines in this crate are built on this; the landscapes
//! are 1-, 2-, or 4-dimensional and cheap to evaluate, but may hold several
//! exact minima (couplings are periodic), so refinement runs from multiple
//! grid basins and the overall winner is chosen by lowest objective with
//! lexicographically smallest parameters as the tie-break.

/// Parameter tolerance at which the simplex is considered converged.
pub const PARAM_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A local minimum plus any competing minima found from other starts.
#[derive(Debug, Clone)]
pub struct MultiStartOutcome {
    pub best: Minimum,
    /// Distinct refined minima other than the best, sorted by objective.
    pub others: Vec<Minimum>,
    pub evaluations: usize,
}

fn clamp_to_box(x: &mut [f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut dist2 = 0.0;
    for ((xi, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        let c = xi.clamp(l, h);
        dist2 += (*xi - c) * (*xi - c);
        *xi = c;
    }
    dist2
}

/// Nelder-Mead with standard coefficients, box bounds enforced through
/// projection plus a quadratic penalty, and the convergence test on the
/// simplex diameter.
pub fn nelder_mead<F>(
    objective: &mut F,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    assert!(n >= 1 && lo.len() == n && hi.len() == n);
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut eval = |x: &[f64]| -> f64 {
        let mut xc = x.to_vec();
        let dist2 = clamp_to_box(&mut xc, lo, hi);
        let f = objective(&xc);
        if f.is_finite() {
            f + 1e6 * dist2 * (1.0 + f.abs())
        } else {
            f64::INFINITY
        }
    };

    // Initial simplex: the start plus one step along each axis, sized from
    // the box and kept inside it.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(start);
    simplex.push((start.to_vec(), f0));
    for d in 0..n {
        let mut p = start.to_vec();
        let span = (hi[d] - lo[d]).max(1e-6);
        let step = 0.05 * span;
        p[d] = if p[d] + step <= hi[d] {
            p[d] + step
        } else {
            p[d] - step
        };
        let f = eval(&p);
        simplex.push((p, f));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        });

        let diameter = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < PARAM_TOL {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|(p, _)| p[d]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();

        let reflect: Vec<f64> = (0..n)
            .map(|d| centroid[d] + alpha * (centroid[d] - worst.0[d]))
            .collect();
        let f_reflect = eval(&reflect);

        if f_reflect < simplex[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|d| centroid[d] + gamma * (reflect[d] - centroid[d]))
                .collect();
            let f_expand = eval(&expand);
            simplex[n] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[n - 1].1 {
            simplex[n] = (reflect, f_reflect);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|d| centroid[d] + rho * (worst.0[d] - centroid[d]))
                .collect();
            let f_contract = eval(&contract);
            if f_contract < worst.1 {
                simplex[n] = (contract, f_contract);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (vd, bd) in v.0.iter_mut().zip(&best) {
                        *vd = bd + sigma * (*vd - bd);
                    }
                    v.1 = eval(&v.0);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut x = simplex[0].0.clone();
    clamp_to_box(&mut x, lo, hi);
    Minimum {
        f: simplex[0].1,
        x,
        iterations,
        converged,
    }
}

/// Coarse grid scan over the box followed by Nelder-Mead refinement of the
/// most promising grid points (the global grid best plus the best point of
/// each well-separated basin, up to `starts`). A final polishing run from
/// the winner tightens convergence.
pub fn grid_then_refine<F>(
    objective: &mut F,
    lo: &[f64],
    hi: &[f64],
    grid_points_per_dim: usize,
    starts: usize,
    max_iter: usize,
) -> MultiStartOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = lo.len();
    assert!(n >= 1 && hi.len() == n && grid_points_per_dim >= 2);

    let axis = |d: usize, idx: usize| -> f64 {
        lo[d] + (hi[d] - lo[d]) * idx as f64 / (grid_points_per_dim - 1) as f64
    };

    let total = grid_points_per_dim.pow(n as u32);
    let mut evaluations = 0;
    let mut grid: Vec<(Vec<f64>, f64)> = Vec::with_capacity(total);
    for flat in 0..total {
        let mut idx = flat;
        let mut x = vec![0.0; n];
        for (d, xd) in x.iter_mut().enumerate() {
            *xd = axis(d, idx % grid_points_per_dim);
            idx /= grid_points_per_dim;
        }
        let f = objective(&x);
        evaluations += 1;
        if f.is_finite() {
            grid.push((x, f));
        }
    }
    grid.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
    });

    // Pick starts separated by at least two grid steps in some coordinate.
    let min_sep: Vec<f64> = (0..n)
        .map(|d| 2.0 * (hi[d] - lo[d]) / (grid_points_per_dim - 1) as f64)
        .collect();
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    for (x, _) in &grid {
        if chosen.len() >= starts {
            break;
        }
        let far = chosen.iter().all(|c| {
            c.iter()
                .zip(x)
                .enumerate()
                .any(|(d, (a, b))| (a - b).abs() > min_sep[d])
        });
        if chosen.is_empty() || far {
            chosen.push(x.clone());
        }
    }
    if chosen.is_empty() {
        chosen.push(lo.to_vec());
    }

    let mut minima: Vec<Minimum> = chosen
        .iter()
        .map(|s| {
            let m = nelder_mead(objective, s, lo, hi, max_iter);
            evaluations += m.iterations;
            m
        })
        .collect();
    minima.sort_by(|a, b| {
        a.f.partial_cmp(&b.f)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal))
    });

    // Objectives that agree to within rounding are ties; among tied minima
    // the lexicographically smallest parameters win, which keeps periodic
    // landscapes (several exact reparameterizations of the same model) on
    // the canonical branch.
    let f_best = minima[0].f;
    let tie_tol = 1e-9 * (1.0 + f_best.abs());
    let winner_idx = minima
        .iter()
        .enumerate()
        .take_while(|(_, m)| m.f <= f_best + tie_tol)
        .min_by(|(_, a), (_, b)| a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let winner = minima.remove(winner_idx);

    // Polish the winner.
    let mut best = {
        let polish = nelder_mead(objective, &winner.x, lo, hi, max_iter);
        evaluations += polish.iterations;
        if polish.f <= winner.f {
            Minimum {
                iterations: winner.iterations + polish.iterations,
                ..polish
            }
        } else {
            winner.clone()
        }
    };
    best.converged = best.converged || winner.converged;

    // Keep other refined minima that are genuinely distinct in parameters.
    let others: Vec<Minimum> = minima
        .into_iter()
        .filter(|m| m.x.iter().zip(&best.x).any(|(a, b)| (a - b).abs() > 1e-6))
        .collect();

    MultiStartOutcome {
        best,
        others,
        evaluations,
    }
}

/// Covariance of a chi-square-style objective at its minimum from the
/// finite-difference Hessian: `cov = 2 H^{-1}`. Returns `None` when the
/// Hessian is not positive definite or not invertible.
pub fn covariance_at_minimum<F>(
    objective: &mut F,
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Option<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let h: Vec<f64> = (0..n).map(|d| 1e-5 * (hi[d] - lo[d]).max(1e-4)).collect();
    let mut eval = |p: &[f64]| -> f64 {
        let mut pc = p.to_vec();
        clamp_to_box(&mut pc, lo, hi);
        objective(&pc)
    };

    let f0 = eval(x);
    let mut hess = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let v = if a == b {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h[a];
                xm[a] -= h[a];
                (eval(&xp) - 2.0 * f0 + eval(&xm)) / (h[a] * h[a])
            } else {
                let mut xpp = x.to_vec();
                let mut xpm = x.to_vec();
                let mut xmp = x.to_vec();
                let mut xmm = x.to_vec();
                xpp[a] += h[a];
                xpp[b] += h[b];
                xpm[a] += h[a];
                xpm[b] -= h[b];
                xmp[a] -= h[a];
                xmp[b] += h[b];
                xmm[a] -= h[a];
                xmm[b] -= h[b];
                (eval(&xpp) - eval(&xpm) - eval(&xmp) + eval(&xmm)) / (4.0 * h[a] * h[b])
            };
            if !v.is_finite() {
                return None;
            }
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }

    invert_spd(&hess).map(|inv| {
        inv.iter()
            .map(|row| row.iter().map(|v| 2.0 * v).collect())
            .collect()
    })
}

/// Gauss-Jordan inverse for the tiny symmetric Hessians used here; bails
/// out on non-positive pivots.
fn invert_spd(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv = vec![vec![0.0; n]; n];
    for (d, row) in inv.iter_mut().enumerate() {
        row[d] = 1.0;
    }
    for col in 0..n {
        let pivot = a[col][col];
        if pivot.is_nan() || pivot <= 1e-300 {
            return None;
        }
        let scale = 1.0 / pivot;
        for k in 0..n {
            a[col][k] *= scale;
            inv[col][k] *= scale;
        }
        for row in 0..n {
            if row != col {
                let factor = a[row][col];
                for k in 0..n {
                    a[row][k] -= factor * a[col][k];
                    inv[row][k] -= factor * inv[col][k];
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_is_found() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.4).powi(2);
        let out = grid_then_refine(&mut f, &[-2.0, -2.0], &[2.0, 2.0], 17, 3, 500);
        assert!(out.best.converged);
        assert!((out.best.x[0] - 0.3).abs() < 1e-8);
        assert!((out.best.x[1] + 0.4).abs() < 1e-8);
        assert!(out.best.f < 1e-15);
    }

    #[test]
    fn bounds_are_respected() {
        let mut f = |x: &[f64]| (x[0] - 5.0).powi(2);
        let out = grid_then_refine(&mut f, &[0.0], &[1.0], 11, 2, 300);
        assert!((out.best.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn multimodal_ties_break_lexicographically() {
        // Two exactly equal minima at x = 0.25 and x = 0.75.
        let mut f = |x: &[f64]| ((x[0] - 0.25) * (x[0] - 0.75)).powi(2);
        let out = grid_then_refine(&mut f, &[0.0], &[1.0], 21, 4, 500);
        assert!((out.best.x[0] - 0.25).abs() < 1e-7, "x = {}", out.best.x[0]);
        assert!(!out.others.is_empty());
        assert!((out.others[0].x[0] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn covariance_of_parabola() {
        // f = ((x - 1)/0.2)^2 is a one-parameter chi-square with sigma 0.2.
        let mut f = |x: &[f64]| ((x[0] - 1.0) / 0.2).powi(2);
        let cov = covariance_at_minimum(&mut f, &[1.0], &[0.0], &[2.0]).unwrap();
        assert!((cov[0][0].sqrt() - 0.2).abs() < 1e-3);
    }
}
