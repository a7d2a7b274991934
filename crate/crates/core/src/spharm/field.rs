use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use super::legendre::{tri_index, tri_len};
use crate::error::{Error, Result};

/// Band-limited real field on the sphere as orthonormal complex
/// spherical-harmonic coefficients `a_{j,m}` (Condon–Shortley phase).
///
/// Only `m ≥ 0` is stored; negative orders follow from the reality condition
/// `a_{j,-m} = (-1)^m conj(a_{j,m})`. Zonal coefficients are kept real.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    trunc: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(trunc: usize) -> Self {
        Self {
            trunc,
            coeffs: vec![Complex64::new(0.0, 0.0); tri_len(trunc)],
        }
    }

    pub(crate) fn from_raw(trunc: usize, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), tri_len(trunc));
        let mut f = Self { trunc, coeffs };
        f.enforce_real_zonal();
        f
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    /// Coefficients with `m ≥ 0` in triangular order.
    pub fn raw(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Gaussian coefficients on degrees `lo..=hi` with unit variance along
    /// each real orthonormal basis direction.
    pub fn random<R: Rng + ?Sized>(trunc: usize, lo: usize, hi: usize, rng: &mut R) -> Self {
        let mut f = Self::zeros(trunc);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for j in lo..=hi.min(trunc) {
            for m in 0..=j {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                f.raw_mut()[tri_index(j, m)] = if m == 0 {
                    Complex64::new(re, 0.0)
                } else {
                    Complex64::new(h * re, h * im)
                };
            }
        }
        f
    }

    /// `a_{j,m}` for any `-j ≤ m ≤ j`; zero beyond the truncation.
    pub fn get(&self, j: usize, m: i64) -> Complex64 {
        let ma = m.unsigned_abs() as usize;
        if j > self.trunc || ma > j {
            return Complex64::new(0.0, 0.0);
        }
        let c = self.coeffs[tri_index(j, ma)];
        if m >= 0 {
            c
        } else if ma % 2 == 0 {
            c.conj()
        } else {
            -c.conj()
        }
    }

    /// Sets `a_{j,m}` and, implicitly, its `-m` partner. Imaginary parts of
    /// zonal coefficients are dropped.
    pub fn set(&mut self, j: usize, m: i64, value: Complex64) {
        assert!(j <= self.trunc, "degree {j} above truncation {}", self.trunc);
        let ma = m.unsigned_abs() as usize;
        assert!(ma <= j, "order {m} out of range for degree {j}");
        let stored = if m >= 0 {
            value
        } else if ma % 2 == 0 {
            value.conj()
        } else {
            -value.conj()
        };
        self.coeffs[tri_index(j, ma)] = if ma == 0 {
            Complex64::new(stored.re, 0.0)
        } else {
            stored
        };
    }

    fn enforce_real_zonal(&mut self) {
        for j in 0..=self.trunc {
            self.coeffs[tri_index(j, 0)].im = 0.0;
        }
    }

    /// Copy at a different truncation (zero padded or truncated).
    pub fn with_trunc(&self, trunc: usize) -> Self {
        let mut out = Self::zeros(trunc);
        let n = tri_len(trunc.min(self.trunc));
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    /// Constant field with value `c`.
    pub fn constant(trunc: usize, c: f64) -> Self {
        let mut f = Self::zeros(trunc);
        f.coeffs[0] = Complex64::new(c * (4.0 * PI).sqrt(), 0.0);
        f
    }

    /// The linear field `x ↦ q·x` (a degree-1 harmonic).
    pub fn linear(trunc: usize, q: Vector3<f64>) -> Self {
        assert!(trunc >= 1, "linear fields need truncation at least 1");
        let mut f = Self::zeros(trunc);
        f.coeffs[tri_index(1, 0)] = Complex64::new(q.z * (4.0 * PI / 3.0).sqrt(), 0.0);
        f.coeffs[tri_index(1, 1)] = Complex64::new(-q.x, q.y) * (2.0 * PI / 3.0).sqrt();
        f
    }

    /// `∫ x ζ dσ`, read off the degree-1 coefficients.
    pub fn moment(&self) -> Vector3<f64> {
        if self.trunc == 0 {
            return Vector3::zeros();
        }
        let a10 = self.coeffs[tri_index(1, 0)];
        let a11 = self.coeffs[tri_index(1, 1)];
        let c = (8.0 * PI / 3.0).sqrt();
        Vector3::new(-c * a11.re, c * a11.im, (4.0 * PI / 3.0).sqrt() * a10.re)
    }

    /// `∫ ζ dσ`.
    pub fn integral(&self) -> f64 {
        self.coeffs[0].re * (4.0 * PI).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / (4.0 * PI).sqrt()
    }

    pub fn is_mean_zero(&self, tol: f64) -> bool {
        self.coeffs[0].norm() <= tol
    }

    pub fn remove_mean(&mut self) -> f64 {
        let c = self.coeffs[0].re;
        self.coeffs[0] = Complex64::new(0.0, 0.0);
        c
    }

    /// `∫ u v dσ` by Parseval.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for j in 0..=self.trunc.min(other.trunc) {
            for m in 0..=j {
                let idx = tri_index(j, m);
                let p = (self.coeffs[idx] * other.coeffs[idx].conj()).re;
                s += if m == 0 { p } else { 2.0 * p };
            }
        }
        s
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `Σ_m |a_{j,m}|²` over `-j ≤ m ≤ j`.
    pub fn degree_energy(&self, j: usize) -> f64 {
        if j > self.trunc {
            return 0.0;
        }
        (0..=j)
            .map(|m| {
                let n = self.coeffs[tri_index(j, m)].norm_sqr();
                if m == 0 {
                    n
                } else {
                    2.0 * n
                }
            })
            .sum()
    }

    /// Keeps only degree `j`.
    pub fn degree_part(&self, j: usize) -> Self {
        self.filter_degrees(|d| d == j)
    }

    pub fn filter_degrees(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut out = Self::zeros(self.trunc);
        for j in (0..=self.trunc).filter(|&j| keep(j)) {
            for m in 0..=j {
                out.coeffs[tri_index(j, m)] = self.coeffs[tri_index(j, m)];
            }
        }
        out
    }

    /// Keeps only `m = 0` (the zonal mean about the polar axis).
    pub fn zonal_part(&self) -> Self {
        let mut out = Self::zeros(self.trunc);
        for j in 0..=self.trunc {
            out.coeffs[tri_index(j, 0)] = self.coeffs[tri_index(j, 0)];
        }
        out
    }

    /// Applies `a_{j,m} ↦ f(j) a_{j,m}`.
    pub fn map_degree(&self, f: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        for j in 0..=self.trunc {
            let s = f(j);
            for m in 0..=j {
                out.coeffs[tri_index(j, m)] *= s;
            }
        }
        out
    }

    /// Applies `a_{j,m} ↦ f(j, m) a_{j,m}` for `m ≥ 0`.
    pub(crate) fn map_coeffs(&self, f: impl Fn(usize, usize, Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for j in 0..=self.trunc {
            for m in 0..=j {
                let idx = tri_index(j, m);
                out.coeffs[idx] = f(j, m, self.coeffs[idx]);
            }
        }
        out.enforce_real_zonal();
        out
    }

    /// `∂ζ/∂λ`: multiplies `a_{j,m}` by `im`.
    pub fn d_lambda(&self) -> Self {
        self.map_coeffs(|_, m, c| c * Complex64::new(0.0, m as f64))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let t = self.trunc.max(other.trunc);
        let a = self.with_trunc(t);
        let b = other.with_trunc(t);
        a.coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Text dump: a header line then one `j m re im` record per coefficient,
    /// all orders `-j..=j`.
    pub fn to_dump(&self) -> String {
        let mut s = format!(
            "# spharm-coeffs J={} norm=orthonormal phase=CS\n",
            self.trunc
        );
        for j in 0..=self.trunc {
            for m in -(j as i64)..=(j as i64) {
                let c = self.get(j, m);
                writeln!(s, "{j} {m} {:e} {:e}", c.re, c.im).unwrap();
            }
        }
        s
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_dump().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_dump())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_dump(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: Some(path.to_path_buf()),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        Self::read_dump(text.as_bytes())
    }

    pub fn read_dump<R: BufRead>(reader: R) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: None,
            line,
            msg,
        };
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty input".into()))?;
        let header = header?;
        let trunc = parse_header(&header).ok_or_else(|| {
            parse_err(1, format!("expected '# spharm-coeffs J=<J> ...', got {header:?}"))
        })?;
        let mut field = Self::zeros(trunc);
        let mut seen_negative = Vec::new();
        for (n, line) in lines {
            let line = line?;
            let lineno = n + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(parse_err(lineno, format!("expected 4 columns, got {}", parts.len())));
            }
            let j: usize = parts[0]
                .parse()
                .map_err(|e| parse_err(lineno, format!("degree: {e}")))?;
            let m: i64 = parts[1]
                .parse()
                .map_err(|e| parse_err(lineno, format!("order: {e}")))?;
            let re: f64 = parts[2]
                .parse()
                .map_err(|e| parse_err(lineno, format!("real part: {e}")))?;
            let im: f64 = parts[3]
                .parse()
                .map_err(|e| parse_err(lineno, format!("imaginary part: {e}")))?;
            if j > trunc || m.unsigned_abs() as usize > j {
                return Err(parse_err(lineno, format!("(j={j}, m={m}) outside J={trunc}")));
            }
            let c = Complex64::new(re, im);
            if m >= 0 {
                field.coeffs[tri_index(j, m as usize)] = c;
            } else {
                seen_negative.push((lineno, j, m, c));
            }
        }
        for (lineno, j, m, c) in seen_negative {
            let expected = field.get(j, m);
            let tol = 1e-12 * (1.0 + expected.norm());
            if (expected - c).norm() > tol {
                return Err(parse_err(
                    lineno,
                    format!("a({j},{m}) violates the real-field symmetry"),
                ));
            }
        }
        field.enforce_real_zonal();
        Ok(field)
    }
}

fn parse_header(line: &str) -> Option<usize> {
    let mut it = line.split_whitespace();
    if it.next()? != "#" || it.next()? != "spharm-coeffs" {
        return None;
    }
    let j = it.next()?.strip_prefix("J=")?.parse().ok()?;
    let rest: Vec<&str> = it.collect();
    if rest != ["norm=orthonormal", "phase=CS"] {
        return None;
    }
    Some(j)
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.with_trunc(self.trunc.max(rhs.trunc));
        out += rhs;
        out
    }
}

impl Add for SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: SpectralField) -> SpectralField {
        &self + &rhs
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.with_trunc(self.trunc.max(rhs.trunc));
        out -= rhs;
        out
    }
}

impl Sub for SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: SpectralField) -> SpectralField {
        &self - &rhs
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        assert!(rhs.trunc <= self.trunc, "truncation mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        assert!(rhs.trunc <= self.trunc, "truncation mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        SpectralField {
            trunc: self.trunc,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

impl Mul<f64> for SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        &self * s
    }
}

impl Neg for SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        &self * -1.0
    }
}

impl SpectralField {
    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SpectralField) {
        assert!(other.trunc <= self.trunc, "truncation mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }
}
