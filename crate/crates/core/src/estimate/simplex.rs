//! Nelder-Mead simplex search with dimension-adaptive coefficients.

/// Stopping and shape controls for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Iteration budget summed over all restarts.
    pub max_iter: usize,
    /// Spread `f_worst - f_best` at convergence.
    pub f_tol: f64,
    /// Largest coordinate distance from the best vertex at convergence.
    pub x_tol: f64,
    pub initial_step: f64,
    /// Fresh simplices built at the converged point while they still improve.
    pub restarts: usize,
    pub record_trace: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            f_tol: 1e-10,
            x_tol: 1e-6,
            initial_step: 0.1,
            restarts: 2,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// `(iteration, best value)` per iteration when requested.
    pub trace: Vec<(usize, f64)>,
}

struct Coefficients {
    reflect: f64,
    expand: f64,
    contract: f64,
    shrink: f64,
}

impl Coefficients {
    // Gao & Han (2012) values for n >= 3; classic values below that, where
    // the adaptive shrink factor degenerates.
    fn for_dim(n: usize) -> Self {
        if n < 3 {
            return Self { reflect: 1.0, expand: 2.0, contract: 0.5, shrink: 0.5 };
        }
        let n = n as f64;
        Self {
            reflect: 1.0,
            expand: 1.0 + 2.0 / n,
            contract: 0.75 - 1.0 / (2.0 * n),
            shrink: 1.0 - 1.0 / n,
        }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `f` from `x0`. Non-finite values count as `+inf`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexOutcome {
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        sanitize(f(x))
    };
    if n == 0 {
        let fx = eval(x0, &mut evaluations);
        return SimplexOutcome {
            x: Vec::new(),
            fx,
            iterations: 0,
            evaluations,
            converged: fx.is_finite(),
            trace: Vec::new(),
        };
    }

    let k = Coefficients::for_dim(n);
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evaluations);
    let mut iterations = 0usize;
    let mut trace = Vec::new();
    let mut converged = false;

    for round in 0..=opts.restarts {
        let start_f = best_f;
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
        pts.push(best_x.clone());
        vals.push(best_f);
        for i in 0..n {
            let mut p = best_x.clone();
            p[i] += opts.initial_step;
            vals.push(eval(&p, &mut evaluations));
            pts.push(p);
        }
        converged = false;
        let mut order: Vec<usize> = (0..=n).collect();
        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];

        while iterations < opts.max_iter {
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
            let (ib, iw, is) = (order[0], order[n], order[n - 1]);
            let spread = vals[iw] - vals[ib];
            let diameter = pts
                .iter()
                .flat_map(|p| p.iter().zip(&pts[ib]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if vals[ib].is_finite() && spread <= opts.f_tol && diameter <= opts.x_tol {
                converged = true;
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for &i in &order[..n] {
                for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                    *c += v;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= n as f64);

            for j in 0..n {
                trial[j] = centroid[j] + k.reflect * (centroid[j] - pts[iw][j]);
            }
            let fr = eval(&trial, &mut evaluations);

            if fr < vals[ib] {
                for j in 0..n {
                    trial2[j] = centroid[j] + k.expand * (trial[j] - centroid[j]);
                }
                let fe = eval(&trial2, &mut evaluations);
                if fe < fr {
                    pts[iw].copy_from_slice(&trial2);
                    vals[iw] = fe;
                } else {
                    pts[iw].copy_from_slice(&trial);
                    vals[iw] = fr;
                }
            } else if fr < vals[is] {
                pts[iw].copy_from_slice(&trial);
                vals[iw] = fr;
            } else {
                let outside = fr < vals[iw];
                for j in 0..n {
                    trial2[j] = if outside {
                        centroid[j] + k.contract * (trial[j] - centroid[j])
                    } else {
                        centroid[j] + k.contract * (pts[iw][j] - centroid[j])
                    };
                }
                let fc = eval(&trial2, &mut evaluations);
                let accept = if outside { fc <= fr } else { fc < vals[iw] };
                if accept {
                    pts[iw].copy_from_slice(&trial2);
                    vals[iw] = fc;
                } else {
                    let anchor = pts[ib].clone();
                    for i in 0..=n {
                        if i == ib {
                            continue;
                        }
                        for j in 0..n {
                            pts[i][j] = anchor[j] + k.shrink * (pts[i][j] - anchor[j]);
                        }
                        vals[i] = eval(&pts[i], &mut evaluations);
                    }
                }
            }
            if opts.record_trace {
                let b = vals.iter().copied().fold(f64::INFINITY, f64::min);
                trace.push((iterations, b));
            }
        }

        let ib = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b))).unwrap();
        if vals[ib] <= best_f {
            best_f = vals[ib];
            best_x.clone_from(&pts[ib]);
        }
        let gained = start_f - best_f;
        if !converged || (round > 0 && gained <= opts.f_tol) {
            break;
        }
    }

    SimplexOutcome { x: best_x, fx: best_f, iterations, evaluations, converged, trace }
}
