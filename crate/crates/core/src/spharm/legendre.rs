//! Orthonormal associated Legendre functions with Condon–Shortley phase.
//!
//! `P̄_j^m(μ)` is normalised so that `Y_j^m = P̄_j^m(μ) e^{imλ}` has unit
//! `L²(S²)` norm. Values are generated by the sectoral recurrence followed by
//! the three-term recurrence in degree, which stays bounded well past the
//! degrees where unnormalised factorials overflow.

use std::f64::consts::PI;

/// Offset of `(j, m)`, `0 ≤ m ≤ j`, in triangular storage.
#[inline]
pub fn tri_index(j: usize, m: usize) -> usize {
    j * (j + 1) / 2 + m
}

#[inline]
pub fn tri_len(trunc: usize) -> usize {
    (trunc + 1) * (trunc + 2) / 2
}

/// Fills `out[tri_index(j, m)] = P̄_j^m(mu)` for all `j ≤ trunc`.
pub fn fill_alf(trunc: usize, mu: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= tri_len(trunc));
    let sin_theta = (1.0 - mu * mu).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=trunc {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta;
        }
        out[tri_index(m, m)] = pmm;
        if m == trunc {
            break;
        }
        let mut p_prev = pmm;
        let mut p_cur = (2.0 * m as f64 + 3.0).sqrt() * mu * pmm;
        out[tri_index(m + 1, m)] = p_cur;
        for j in (m + 2)..=trunc {
            let jf = j as f64;
            let mf = m as f64;
            let a = ((4.0 * jf * jf - 1.0) / (jf * jf - mf * mf)).sqrt();
            let b = (((jf - 1.0).powi(2) - mf * mf) / (4.0 * (jf - 1.0).powi(2) - 1.0)).sqrt();
            let p_next = a * (mu * p_cur - b * p_prev);
            out[tri_index(j, m)] = p_next;
            p_prev = p_cur;
            p_cur = p_next;
        }
    }
}

/// Fills `out[tri_index(j, m)] = (1 − μ²) dP̄_j^m/dμ` given the table `alf`.
pub fn fill_alf_derivative(trunc: usize, mu: f64, alf: &[f64], out: &mut [f64]) {
    for j in 0..=trunc {
        let jf = j as f64;
        for m in 0..=j {
            let mf = m as f64;
            let mut v = -jf * mu * alf[tri_index(j, m)];
            if m < j {
                let c = ((2.0 * jf + 1.0) / (2.0 * jf - 1.0) * (jf * jf - mf * mf)).sqrt();
                v += c * alf[tri_index(j - 1, m)];
            }
            out[tri_index(j, m)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table(trunc: usize, mu: f64) -> Vec<f64> {
        let mut out = vec![0.0; tri_len(trunc)];
        fill_alf(trunc, mu, &mut out);
        out
    }

    #[test]
    fn low_degree_closed_forms() {
        let mu: f64 = 0.3;
        let s = (1.0 - mu * mu).sqrt();
        let p = table(2, mu);
        assert_relative_eq!(p[tri_index(0, 0)], 1.0 / (4.0 * PI).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(p[tri_index(1, 0)], (3.0 / (4.0 * PI)).sqrt() * mu, epsilon = 1e-15);
        assert_relative_eq!(p[tri_index(1, 1)], -(3.0 / (8.0 * PI)).sqrt() * s, epsilon = 1e-15);
        assert_relative_eq!(
            p[tri_index(2, 0)],
            (5.0 / (16.0 * PI)).sqrt() * (3.0 * mu * mu - 1.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            p[tri_index(2, 1)],
            -(15.0 / (8.0 * PI)).sqrt() * mu * s,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            p[tri_index(2, 2)],
            (15.0 / (32.0 * PI)).sqrt() * s * s,
            epsilon = 1e-15
        );
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let trunc = 12;
        let h = 1e-6;
        for &mu in &[-0.7, 0.1, 0.55] {
            let p = table(trunc, mu);
            let mut d = vec![0.0; tri_len(trunc)];
            fill_alf_derivative(trunc, mu, &p, &mut d);
            let pp = table(trunc, mu + h);
            let pm = table(trunc, mu - h);
            for idx in 0..tri_len(trunc) {
                let fd = (1.0 - mu * mu) * (pp[idx] - pm[idx]) / (2.0 * h);
                assert!((fd - d[idx]).abs() < 1e-7, "idx {idx}: {fd} vs {}", d[idx]);
            }
        }
    }

    #[test]
    fn stays_finite_at_high_degree() {
        let p = table(200, 0.999);
        assert!(p.iter().all(|v| v.is_finite()));
    }
}
