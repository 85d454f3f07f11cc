//! Derivative-free minimisation (Nelder–Mead with restarts).

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    /// and the simplex diameter falls below this.
    pub x_tol: f64,
    pub initial_step: f64,
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_evals: 20_000, f_tol: 1e-24, x_tol: 1e-12, initial_step: 0.25, restarts: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, start: &[f64]) -> Minimum {
        let mut best = Minimum { x: start.to_vec(), value: eval(&mut f, start), evals: 1 };
        let mut step = self.initial_step;
        for _ in 0..=self.restarts {
            let run = self.run(&mut f, &best.x, step);
            let evals = best.evals + run.evals;
            let improved = run.value < best.value;
            if improved {
                best = Minimum { evals, ..run };
            } else {
                best.evals = evals;
                step *= 0.1;
            }
            if best.evals >= self.max_evals {
                break;
            }
        }
        best
    }

    fn run<F: FnMut(&[f64]) -> f64>(&self, f: &mut F, start: &[f64], step: f64) -> Minimum {
        let n = start.len();
        let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
        for i in 0..n {
            let mut p = start.to_vec();
            p[i] += if p[i].abs() > 1e-8 { step * p[i].abs().max(0.1) } else { step };
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(f, p)).collect();
        let mut evals = n + 1;
        let budget = self.max_evals;

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        while evals < budget {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let diam = simplex[1..]
                .iter()
                .map(|p| sqrt(p.iter().zip(&simplex[0]).map(|(a, b)| (a - b) * (a - b)).sum()))
                .fold(0.0, f64::max);
            if spread <= self.f_tol * (1.0 + values[0].abs()) && diam <= self.x_tol {
                break;
            }
            if diam <= 1e-15 {
                break;
            }

            let mut centroid = vec![0.0; n];
            for p in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(p) {
                    *c += x / n as f64;
                }
            }
            let toward = |t: f64, p: &[f64]| -> Vec<f64> { centroid.iter().zip(p).map(|(c, x)| c + t * (x - c)).collect() };

            let xr = toward(-alpha, &simplex[n]);
            let fr = eval(f, &xr);
            evals += 1;
            if fr < values[0] {
                let xe = toward(-gamma, &simplex[n]);
                let fe = eval(f, &xe);
                evals += 1;
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = toward(-rho, &simplex[n]);
                    let fc = eval(f, &xc);
                    (xc, fc)
                } else {
                    let xc = toward(rho, &simplex[n]);
                    let fc = eval(f, &xc);
                    (xc, fc)
                };
                evals += 1;
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    let best = simplex[0].clone();
                    for i in 1..=n {
                        for (x, b) in simplex[i].iter_mut().zip(&best) {
                            *x = b + sigma * (*x - b);
                        }
                        values[i] = eval(f, &simplex[i]);
                    }
                    evals += n;
                }
            }
        }
        let i = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
        Minimum { x: simplex[i].clone(), value: values[i], evals }
    }
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}
