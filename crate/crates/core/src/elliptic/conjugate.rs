use std::sync::Arc;

use super::nonlinearity::ScalarFn;
use crate::error::{Error, Result};
use crate::optim::golden_min;

const GRID_POINTS: usize = 2001;
const MAX_DOUBLINGS: usize = 40;

/// `Ĝ(s) = sup_τ (sτ − G(τ))` by a τ-grid search refined with golden
/// section.
#[derive(Clone)]
pub struct LegendreTransform {
    big_g: ScalarFn,
    tau_range: (f64, f64),
}

impl std::fmt::Debug for LegendreTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LegendreTransform")
            .field("tau_range", &self.tau_range)
            .finish_non_exhaustive()
    }
}

impl LegendreTransform {
    /// Searches `τ ∈ tau_range`.
    pub fn with_range(big_g: ScalarFn, tau_range: (f64, f64)) -> Self {
        Self { big_g, tau_range }
    }

    pub fn tau_range(&self) -> (f64, f64) {
        self.tau_range
    }

    /// Maximiser `τ*` and value `Ĝ(s)`; a maximiser on the edge of the
    /// search interval is reported as an unbounded supremum.
    pub fn argmax(&self, s: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.tau_range;
        let h = (hi - lo) / (GRID_POINTS - 1) as f64;
        let f = |tau: f64| s * tau - (self.big_g)(tau);
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..GRID_POINTS {
            let v = f(lo + h * i as f64);
            if v > best.1 {
                best = (i, v);
            }
        }
        if !best.1.is_finite() || best.0 == 0 || best.0 == GRID_POINTS - 1 {
            return Err(Error::UnboundedSupremum(s));
        }
        let (tau, neg) = golden_min(
            |x| -f(x),
            lo + h * (best.0 - 1) as f64,
            lo + h * (best.0 + 1) as f64,
            1e-13 * (1.0 + lo.abs().max(hi.abs())),
        );
        Ok((tau, (-neg).max(best.1)))
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        self.argmax(s).map(|(_, v)| v)
    }

    /// `Ĝ` on `s_grid`.
    pub fn tabulate(&self, s_grid: &[f64]) -> Result<Vec<f64>> {
        s_grid.iter().map(|&s| self.eval(s)).collect()
    }

    /// `Ĝ(s) + G(τ) − sτ`, non-negative by construction.
    pub fn fenchel_young_gap(&self, s: f64, tau: f64) -> Result<f64> {
        Ok(self.eval(s)? + (self.big_g)(tau) - s * tau)
    }
}

/// Builds the transform of `G` with a τ interval wide enough that every
/// `s ∈ s_grid` has an interior maximiser, doubling from `[−1, 1]`.
pub fn legendre_transform(big_g: ScalarFn, s_grid: &[f64]) -> Result<LegendreTransform> {
    let mut half = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let t = LegendreTransform::with_range(big_g.clone(), (-half, half));
        let interior = s_grid.iter().all(|&s| t.argmax(s).is_ok());
        if interior {
            return Ok(t);
        }
        half *= 2.0;
    }
    let worst = s_grid
        .iter()
        .copied()
        .find(|&s| {
            LegendreTransform::with_range(big_g.clone(), (-half, half))
                .argmax(s)
                .is_err()
        })
        .unwrap_or(f64::NAN);
    Err(Error::UnboundedSupremum(worst))
}

/// Convenience wrapper for closures.
pub fn legendre_transform_of<F>(big_g: F, s_grid: &[f64]) -> Result<LegendreTransform>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    legendre_transform(Arc::new(big_g), s_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{extend_nonlinearity, NonlinearitySpec};
    use approx::assert_relative_eq;

    fn grid() -> Vec<f64> {
        (0..21).map(|i| -3.0 + 0.3 * i as f64).collect()
    }

    #[test]
    fn quadratic_is_self_dual() {
        let t = legendre_transform_of(|s| 0.5 * s * s, &grid()).unwrap();
        for s in grid() {
            assert_relative_eq!(t.eval(s).unwrap(), 0.5 * s * s, epsilon = 1e-10);
        }
    }

    #[test]
    fn scaled_quadratic() {
        let t = legendre_transform_of(|s| 3.0 * s * s, &grid()).unwrap();
        for s in grid().into_iter().step_by(2) {
            assert_relative_eq!(t.eval(s).unwrap(), s * s / 12.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn concave_g_is_unbounded() {
        assert!(matches!(
            legendre_transform_of(|s| -s * s, &[0.0, 1.0]),
            Err(Error::UnboundedSupremum(_))
        ));
    }

    #[test]
    fn fenchel_young_for_extended_nonlinearity() {
        let g = extend_nonlinearity(&NonlinearitySpec::tanh(1.0, 0.5, (-1.0, 1.0)).unwrap());
        let taus: Vec<f64> = (0..13).map(|i| -3.0 + 0.5 * i as f64).collect();
        let s: Vec<f64> = taus.iter().map(|&t| g.eval(t)).collect();
        let t = legendre_transform(g.antiderivative_fn(), &s).unwrap();
        for (&tau, &si) in taus.iter().zip(&s) {
            assert!(t.fenchel_young_gap(si, tau).unwrap().abs() < 1e-8);
            for &other in &taus {
                assert!(t.fenchel_young_gap(si, other).unwrap() >= -1e-10);
            }
        }
    }
}
