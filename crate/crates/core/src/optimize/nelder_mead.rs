//! Bounded Nelder–Mead simplex search on the unit cube with restarts.

/// Outcome of one bounded minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Initial edge length in unit-cube coordinates.
    pub initial_step: f64,
    /// Restart once the simplex spread in value falls below this.
    pub value_tol: f64,
    /// ... and its diameter below this.
    pub size_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { initial_step: 0.1, value_tol: 1e-10, size_tol: 1e-6 }
    }
}

fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect();
    clamp_unit(&mut out);
    out
}

/// Minimize `f` over `[0,1]^n` starting at `x0` with at most `max_evals` calls.
///
/// Vertices are projected onto the cube. When the simplex collapses it is
/// rebuilt around the incumbent with half the previous edge.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], max_evals: usize, opts: &SimplexOptions) -> Minimum {
    let n = x0.len();
    let mut evals = 0;
    let mut start: Vec<f64> = x0.to_vec();
    clamp_unit(&mut start);
    let mut best = Minimum { x: start.clone(), value: f64::INFINITY, evaluations: 0 };
    if max_evals == 0 {
        return best;
    }
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut Minimum| -> f64 {
        *evals += 1;
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < best.value {
            best.value = v;
            best.x = x.to_vec();
        }
        v
    };
    let first = eval(&start, &mut evals, &mut best);
    if n == 0 {
        best.evaluations = evals;
        return best;
    }
    let mut step = opts.initial_step;
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), first)];

    'outer: while evals < max_evals {
        // Build the remaining vertices around the first.
        let base = simplex[0].0.clone();
        simplex.truncate(1);
        for i in 0..n {
            if evals >= max_evals {
                break 'outer;
            }
            let mut v = base.clone();
            v[i] = if v[i] + step <= 1.0 { v[i] + step } else { v[i] - step };
            clamp_unit(&mut v);
            let fv = eval(&v, &mut evals, &mut best);
            simplex.push((v, fv));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            let size = simplex[1..]
                .iter()
                .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if (spread.is_finite() && spread <= opts.value_tol && size <= opts.size_tol * 100.0) || size <= opts.size_tol {
                step = (step / 2.0).max(opts.size_tol * 10.0);
                simplex.truncate(1);
                continue 'outer;
            }
            if evals >= max_evals {
                break 'outer;
            }
            let centroid: Vec<f64> =
                (0..n).map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64).collect();
            let worst = simplex[n].clone();
            let reflected = combine(&centroid, &worst.0, -1.0);
            let fr = eval(&reflected, &mut evals, &mut best);
            if fr < simplex[0].1 {
                if evals >= max_evals {
                    simplex[n] = (reflected, fr);
                    break 'outer;
                }
                let expanded = combine(&centroid, &worst.0, -2.0);
                let fe = eval(&expanded, &mut evals, &mut best);
                simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (reflected, fr);
                continue;
            }
            if evals >= max_evals {
                break 'outer;
            }
            let (target, ft) = if fr < worst.1 { (reflected.clone(), fr) } else { (worst.0.clone(), worst.1) };
            let contracted = combine(&centroid, &target, 0.5);
            let fc = eval(&contracted, &mut evals, &mut best);
            if fc < ft {
                simplex[n] = (contracted, fc);
                continue;
            }
            // Shrink towards the best vertex.
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                if evals >= max_evals {
                    break 'outer;
                }
                let v = combine(&anchor, &vertex.0, 0.5);
                let fv = eval(&v, &mut evals, &mut best);
                *vertex = (v, fv);
            }
        }
    }
    best.evaluations = evals;
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_interior_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + 10.0 * (x[1] - 0.7).powi(2);
        let m = minimize(&mut f, &[0.9, 0.1], 400, &SimplexOptions::default());
        assert!((m.x[0] - 0.3).abs() < 1e-4 && (m.x[1] - 0.7).abs() < 1e-4, "{m:?}");
        assert!(m.evaluations <= 400);
    }

    #[test]
    fn respects_bounds() {
        let mut f = |x: &[f64]| -x[0] - x[1];
        let m = minimize(&mut f, &[0.5, 0.5], 200, &SimplexOptions::default());
        assert!(m.x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(m.value <= -1.99);
    }

    #[test]
    fn rosenbrock_in_cube() {
        let mut f = |x: &[f64]| {
            let (a, b) = (4.0 * x[0] - 2.0, 4.0 * x[1] - 2.0);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let m = minimize(&mut f, &[0.2, 0.2], 2000, &SimplexOptions::default());
        assert!(m.value < 1e-6, "{m:?}");
    }

    #[test]
    fn nan_is_treated_as_infinite() {
        let mut f = |x: &[f64]| if x[0] > 0.6 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let m = minimize(&mut f, &[0.1], 100, &SimplexOptions::default());
        assert!((m.x[0] - 0.5).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn never_worse_than_start_and_deterministic(x0 in 0.0f64..1.0, y0 in 0.0f64..1.0, budget in 1usize..80) {
            let g = |x: &[f64]| (x[0] * 7.0).sin() + (x[1] * 3.0).cos();
            let mut f = g;
            let m = minimize(&mut f, &[x0, y0], budget, &SimplexOptions::default());
            prop_assert!(m.value <= g(&[x0, y0]));
            prop_assert!(m.evaluations <= budget);
            let mut f2 = g;
            prop_assert_eq!(minimize(&mut f2, &[x0, y0], budget, &SimplexOptions::default()), m);
        }
    }
}
