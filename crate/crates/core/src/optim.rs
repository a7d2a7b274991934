//! Small derivative-free minimisers shared by the orbit and axis searches.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;

/// Golden-section minimum of `f` on `[a, b]`; returns `(x, f(x))`.
pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

struct Cost<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Cost<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok((self.0)(p))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Nelder–Mead from `x0` with an axis-aligned initial simplex of size `step`.
pub(crate) fn nelder_mead<F>(f: F, x0: &[f64], step: f64, sd_tol: f64, max_iter: u64) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let f0 = f(x0);
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = match NelderMead::new(simplex).with_sd_tolerance(sd_tol) {
        Ok(s) => s,
        Err(_) => {
            return Minimum {
                x: x0.to_vec(),
                value: f0,
                converged: false,
            }
        }
    };
    let run = Executor::new(Cost(&f), solver)
        .configure(|s| s.max_iters(max_iter))
        .run();
    match run {
        Ok(res) => {
            let state = res.state();
            let converged = state.get_iter() < max_iter;
            match (state.get_best_param(), state.get_best_cost()) {
                (Some(x), c) if c <= f0 => Minimum {
                    x: x.clone(),
                    value: c,
                    converged,
                },
                _ => Minimum {
                    x: x0.to_vec(),
                    value: f0,
                    converged,
                },
            }
        }
        Err(_) => Minimum {
            x: x0.to_vec(),
            value: f0,
            converged: false,
        },
    }
}
