use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Slopes below this magnitude count as zero when choosing an extension.
const FLAT_SLOPE: f64 = 1e-12;
const BOUND_SAMPLES: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Decreasing,
    Increasing,
}

/// Scalar nonlinearity `g` of the steady relation `ζ = g(Gζ + βp·x)`.
#[derive(Clone)]
pub struct NonlinearitySpec {
    name: String,
    g: ScalarFn,
    g_prime: ScalarFn,
    antiderivative: Option<ScalarFn>,
    monotonicity: Monotonicity,
    derivative_bounds: (f64, f64),
    interval: (f64, f64),
    saturation: Option<(f64, f64)>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("name", &self.name)
            .field("monotonicity", &self.monotonicity)
            .field("derivative_bounds", &self.derivative_bounds)
            .field("interval", &self.interval)
            .field("saturation", &self.saturation)
            .finish_non_exhaustive()
    }
}

fn sample_slopes(g_prime: &ScalarFn, (a, b): (f64, f64)) -> (f64, f64) {
    (0..BOUND_SAMPLES)
        .map(|i| g_prime(a + (b - a) * i as f64 / (BOUND_SAMPLES - 1) as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

impl NonlinearitySpec {
    /// Monotonicity and derivative bounds are read off `g′` sampled on
    /// `interval`.
    pub fn new(
        name: impl Into<String>,
        g: ScalarFn,
        g_prime: ScalarFn,
        interval: (f64, f64),
    ) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!(
                "extension interval [{a}, {b}] is empty"
            )));
        }
        let bounds = sample_slopes(&g_prime, interval);
        let monotonicity = if bounds.1 <= 0.0 {
            Monotonicity::Decreasing
        } else if bounds.0 >= 0.0 {
            Monotonicity::Increasing
        } else {
            return Err(Error::InvalidArgument(format!(
                "g′ changes sign on [{a}, {b}] (range {:?})",
                bounds
            )));
        };
        Ok(Self {
            name: name.into(),
            g,
            g_prime,
            antiderivative: None,
            monotonicity,
            derivative_bounds: bounds,
            interval,
            saturation: None,
            breakpoints: Vec::new(),
        })
    }

    /// Supplies a closed-form `G` with `G′ = g`.
    pub fn with_antiderivative(mut self, big_g: ScalarFn) -> Self {
        self.antiderivative = Some(big_g);
        self
    }

    /// Clips values of `g` to `[lo, hi]`; stands in for infinite-valued `g`.
    pub fn with_saturation(mut self, lo: f64, hi: f64) -> Self {
        self.saturation = Some((lo, hi));
        self
    }

    /// `g(s) = c·s`.
    pub fn linear(c: f64, interval: (f64, f64)) -> Result<Self> {
        Ok(Self::new(
            format!("linear:{c}"),
            Arc::new(move |s| c * s),
            Arc::new(move |_| c),
            interval,
        )?
        .with_antiderivative(Arc::new(move |s| 0.5 * c * s * s)))
    }

    /// `g(s) = a·s + b·s³`.
    pub fn cubic(a: f64, b: f64, interval: (f64, f64)) -> Result<Self> {
        Ok(Self::new(
            format!("cubic:{a},{b}"),
            Arc::new(move |s| a * s + b * s * s * s),
            Arc::new(move |s| a + 3.0 * b * s * s),
            interval,
        )?
        .with_antiderivative(Arc::new(move |s| 0.5 * a * s * s + 0.25 * b * s.powi(4))))
    }

    /// `g(s) = a·s + b·tanh s`.
    pub fn tanh(a: f64, b: f64, interval: (f64, f64)) -> Result<Self> {
        Ok(Self::new(
            format!("tanh:{a},{b}"),
            Arc::new(move |s| a * s + b * s.tanh()),
            Arc::new(move |s| a + b / s.cosh().powi(2)),
            interval,
        )?
        .with_antiderivative(Arc::new(move |s| 0.5 * a * s * s + b * s.cosh().ln())))
    }

    /// `g(s) = s²`, the flat-endpoint example at `s = 0`.
    pub fn square(interval: (f64, f64)) -> Result<Self> {
        Ok(Self::new(
            "square",
            Arc::new(|s| s * s),
            Arc::new(|s| 2.0 * s),
            interval,
        )?
        .with_antiderivative(Arc::new(|s| s * s * s / 3.0)))
    }

    /// Monotone cubic Hermite interpolant of `(s, g)` pairs, continued
    /// linearly with the end slopes.
    pub fn from_table(name: impl Into<String>, s: &[f64], g: &[f64]) -> Result<Self> {
        let table = Arc::new(Pchip::new(s, g)?);
        let interval = (s[0], s[s.len() - 1]);
        let (t1, t2) = (table.clone(), table.clone());
        let mut spec = Self::new(
            name,
            Arc::new(move |x| t1.eval(x).0),
            Arc::new(move |x| t2.eval(x).1),
            interval,
        )?;
        spec.breakpoints = s.to_vec();
        Ok(spec)
    }

    /// Reads a two-column table `s g`; blank lines and `#` comments skipped.
    pub fn load_table(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut s = Vec::new();
        let mut g = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: Some(path.to_path_buf()),
                line: i + 1,
                msg,
            };
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|c| !c.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(parse_err(format!("expected 2 columns, found {}", cols.len())));
            }
            let parse = |c: &str| {
                c.parse::<f64>()
                    .map_err(|e| parse_err(format!("`{c}`: {e}")))
            };
            s.push(parse(cols[0])?);
            g.push(parse(cols[1])?);
        }
        Self::from_table(path.display().to_string(), &s, &g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn derivative_bounds(&self) -> (f64, f64) {
        self.derivative_bounds
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn saturation(&self) -> Option<(f64, f64)> {
        self.saturation
    }

    /// True when `0 ≤ g′ ≤ 6` on the working interval.
    pub fn is_bounded_increasing(&self) -> bool {
        self.monotonicity == Monotonicity::Increasing && self.derivative_bounds.1 <= 6.0
    }

    pub fn eval(&self, s: f64) -> f64 {
        let v = (self.g)(s);
        match self.saturation {
            Some((lo, hi)) => v.clamp(lo, hi),
            None => v,
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self.saturation {
            Some((lo, hi)) => {
                let v = (self.g)(s);
                if v <= lo || v >= hi {
                    0.0
                } else {
                    (self.g_prime)(s)
                }
            }
            None => (self.g_prime)(s),
        }
    }

    /// `G(s) = ∫₀ˢ g`, closed form when supplied, otherwise by piecewise
    /// Gauss–Legendre quadrature split at the known breakpoints.
    pub fn antiderivative(&self, s: f64) -> f64 {
        if let (Some(big_g), None) = (&self.antiderivative, self.saturation) {
            return big_g(s) - big_g(0.0);
        }
        let (a, b, sign) = if s >= 0.0 { (0.0, s, 1.0) } else { (s, 0.0, -1.0) };
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints.iter().copied().filter(|x| *x > a && *x < b));
        cuts.push(b);
        let total: f64 = cuts
            .windows(2)
            .map(|w| integrate(|x| self.eval(x), w[0], w[1]))
            .sum();
        sign * total
    }

    /// The antiderivative as a shareable callable.
    pub fn antiderivative_fn(&self) -> ScalarFn {
        let me = self.clone();
        Arc::new(move |s| me.antiderivative(s))
    }
}

impl FromStr for NonlinearitySpec {
    type Err = Error;

    /// Presets `linear:c`, `cubic:a,b`, `tanh:a,b`, `square`, optionally
    /// followed by `@m1,m2` for the working interval (default `[-1, 1]`).
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown nonlinearity preset `{text}`"));
        let (body, interval) = match text.split_once('@') {
            Some((b, iv)) => {
                let v = parse_list(iv).ok_or_else(bad)?;
                if v.len() != 2 {
                    return Err(bad());
                }
                (b, (v[0], v[1]))
            }
            None => (text, (-1.0, 1.0)),
        };
        let (kind, args) = body.split_once(':').unwrap_or((body, ""));
        let args = if args.is_empty() {
            Vec::new()
        } else {
            parse_list(args).ok_or_else(bad)?
        };
        match (kind, args.as_slice()) {
            ("linear", [c]) => Self::linear(*c, interval),
            ("cubic", [a, b]) => Self::cubic(*a, *b, interval),
            ("tanh", [a, b]) => Self::tanh(*a, *b, interval),
            ("square", []) => Self::square(interval),
            _ => Err(bad()),
        }
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

/// 16-point Gauss–Legendre rule on `[a, b]`, composite over 8 panels.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = RULE.get_or_init(|| crate::spharm::gauss_legendre(16).expect("fixed rule"));
    const PANELS: usize = 8;
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for k in 0..PANELS {
        let mid = a + (k as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            total += wi * f(mid + 0.5 * h * xi);
        }
    }
    0.5 * h * total
}

/// Fritsch–Carlson monotone piecewise cubic Hermite interpolant.
#[derive(Debug)]
struct Pchip {
    s: Vec<f64>,
    g: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(s: &[f64], g: &[f64]) -> Result<Self> {
        let table_err = |msg: &str| Error::Parse {
            path: None,
            line: 0,
            msg: msg.into(),
        };
        if s.len() != g.len() || s.len() < 2 {
            return Err(table_err("table needs at least two (s, g) pairs"));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(table_err("table abscissae must be strictly increasing"));
        }
        if s.iter().chain(g).any(|v| !v.is_finite()) {
            return Err(table_err("table entries must be finite"));
        }
        let n = s.len();
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (g[k + 1] - g[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self {
            s: s.to_vec(),
            g: g.to_vec(),
            d,
        })
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.s.len();
        if x <= self.s[0] {
            return (self.g[0] + self.d[0] * (x - self.s[0]), self.d[0]);
        }
        if x >= self.s[n - 1] {
            return (self.g[n - 1] + self.d[n - 1] * (x - self.s[n - 1]), self.d[n - 1]);
        }
        let k = self.s.partition_point(|v| *v <= x) - 1;
        let h = self.s[k + 1] - self.s[k];
        let t = (x - self.s[k]) / h;
        let (g0, g1, d0, d1) = (self.g[k], self.g[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * g0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * g1
            + (t3 - t2) * d1;
        let dv = (6.0 * t2 - 6.0 * t) * g0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * g1
            + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv / h)
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy)]
enum Tail {
    Linear { slope: f64 },
    /// `±(s − m)²` on a unit interval, then slope `±2`.
    Patch { curvature: f64 },
}

fn tail_for(slope: f64, mono: Monotonicity, upper: bool) -> Tail {
    if slope.abs() > FLAT_SLOPE {
        return Tail::Linear { slope };
    }
    let up = mono == Monotonicity::Increasing;
    // The patch bends away from the flat end so monotonicity is preserved.
    let curvature = match (up, upper) {
        (true, true) | (false, false) => 1.0,
        (true, false) | (false, true) => -1.0,
    };
    Tail::Patch { curvature }
}

fn tail_eval(tail: Tail, end: f64, g_end: f64, s: f64, upper: bool) -> (f64, f64) {
    match tail {
        Tail::Linear { slope } => (g_end + slope * (s - end), slope),
        Tail::Patch { curvature } => {
            let d = s - end;
            if d.abs() <= 1.0 {
                (g_end + curvature * d * d, 2.0 * curvature * d)
            } else {
                let dir = if upper { 1.0 } else { -1.0 };
                let slope = 2.0 * curvature * dir;
                (g_end + curvature + slope * (d - dir), slope)
            }
        }
    }
}

/// Continues `g` outside `[m₁, m₂]` so that it is C¹, grows linearly at
/// `±∞` and keeps its monotonicity: linearly with the end slope when that
/// slope is nonzero, otherwise by a unit quadratic patch followed by a
/// slope-2 line.
pub fn extend_nonlinearity(spec: &NonlinearitySpec) -> NonlinearitySpec {
    let (m1, m2) = spec.interval;
    let (g1, g2) = (spec.eval(m1), spec.eval(m2));
    let lower = tail_for(spec.derivative(m1), spec.monotonicity, false);
    let upper = tail_for(spec.derivative(m2), spec.monotonicity, true);
    let inner = spec.clone();
    let inner2 = spec.clone();
    let value = move |s: f64| {
        if s < m1 {
            tail_eval(lower, m1, g1, s, false).0
        } else if s > m2 {
            tail_eval(upper, m2, g2, s, true).0
        } else {
            inner.eval(s)
        }
    };
    let slope = move |s: f64| {
        if s < m1 {
            tail_eval(lower, m1, g1, s, false).1
        } else if s > m2 {
            tail_eval(upper, m2, g2, s, true).1
        } else {
            inner2.derivative(s)
        }
    };
    let mut breakpoints = spec.breakpoints.clone();
    breakpoints.extend([m1 - 1.0, m1, m2, m2 + 1.0]);
    breakpoints.sort_by(f64::total_cmp);
    NonlinearitySpec {
        name: format!("{}+ext", spec.name),
        g: Arc::new(value),
        g_prime: Arc::new(slope),
        antiderivative: None,
        monotonicity: spec.monotonicity,
        derivative_bounds: spec.derivative_bounds,
        interval: spec.interval,
        saturation: None,
        breakpoints,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn presets_parse() {
        let g: NonlinearitySpec = "cubic:-2,-0.1".parse().unwrap();
        assert_eq!(g.monotonicity(), Monotonicity::Decreasing);
        assert_relative_eq!(g.eval(1.0), -2.1);
        let g: NonlinearitySpec = "linear:6@-2,3".parse().unwrap();
        assert_eq!(g.interval(), (-2.0, 3.0));
        assert!(g.is_bounded_increasing());
        assert!("wobble:1".parse::<NonlinearitySpec>().is_err());
        assert!("cubic:1".parse::<NonlinearitySpec>().is_err());
    }

    #[test]
    fn sign_changing_slope_is_rejected() {
        assert!(NonlinearitySpec::cubic(-1.0, 1.0, (-1.0, 1.0)).is_err());
    }

    #[test]
    fn linear_extension_is_identity_for_linear_g() {
        let g = NonlinearitySpec::linear(6.0, (-1.0, 1.0)).unwrap();
        let e = extend_nonlinearity(&g);
        for s in [-7.5, -1.0, -0.3, 0.9, 1.0, 4.2] {
            assert_relative_eq!(e.eval(s), 6.0 * s, epsilon = 1e-14);
            assert_relative_eq!(e.derivative(s), 6.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn flat_end_gets_quadratic_patch() {
        let g = NonlinearitySpec::square((0.0, 1.0)).unwrap();
        let e = extend_nonlinearity(&g);
        for s in [-1.0, -0.5, -0.1] {
            assert_relative_eq!(e.eval(s), -s * s, epsilon = 1e-15);
        }
        // beyond the patch: g(m₁) − 1 + 2(s − m₁ + 1)
        assert_relative_eq!(e.eval(-3.0), -1.0 + 2.0 * (-2.0), epsilon = 1e-14);
        assert_relative_eq!(e.derivative(-3.0), 2.0);
        // upper end slope 2 > 0: linear
        assert_relative_eq!(e.eval(2.0), 1.0 + 2.0, epsilon = 1e-14);
        for s in [0.0, 0.25, 0.6, 1.0] {
            assert_eq!(e.eval(s), g.eval(s));
        }
    }

    #[test]
    fn decreasing_flat_ends_mirror() {
        let g = NonlinearitySpec::new(
            "flat-dec",
            Arc::new(|s: f64| -s.powi(3)),
            Arc::new(|s: f64| -3.0 * s * s),
            (0.0, 1.0),
        )
        .unwrap();
        let e = extend_nonlinearity(&g);
        assert_relative_eq!(e.eval(-0.5), 0.25, epsilon = 1e-15);
        assert_relative_eq!(e.derivative(-2.0), -2.0);
        let xs: Vec<f64> = (0..200).map(|i| -5.0 + 0.05 * i as f64).collect();
        assert!(xs.windows(2).all(|w| e.eval(w[1]) <= e.eval(w[0])));
    }

    #[test]
    fn quadrature_antiderivative_matches_closed_form() {
        let g = NonlinearitySpec::tanh(1.0, 0.5, (-1.0, 1.0)).unwrap();
        let e = extend_nonlinearity(&g);
        for s in [-0.8, 0.0, 0.3, 1.0] {
            assert_relative_eq!(e.antiderivative(s), g.antiderivative(s), epsilon = 1e-13);
        }
    }

    #[test]
    fn table_interpolant() {
        let s: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let g: Vec<f64> = s.iter().map(|x| 2.0 * x + x.powi(3)).collect();
        let t = NonlinearitySpec::from_table("t", &s, &g).unwrap();
        assert_eq!(t.monotonicity(), Monotonicity::Increasing);
        for (x, y) in s.iter().zip(&g) {
            assert_relative_eq!(t.eval(*x), *y, epsilon = 1e-14);
        }
        assert!((t.eval(0.1) - 0.201).abs() < 1e-2);
        assert!(NonlinearitySpec::from_table("bad", &[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn load_table_reports_line() {
        let dir = std::env::temp_dir().join(format!("sphvort-g-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("g.txt");
        fs::write(&p, "# s g\n0 0\n1 2\n2 x\n").unwrap();
        match NonlinearitySpec::load_table(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "0, 0\n1, 2\n2, 5\n").unwrap();
        assert_relative_eq!(NonlinearitySpec::load_table(&p).unwrap().eval(1.0), 2.0);
    }

    #[test]
    fn saturation_clips() {
        let g = NonlinearitySpec::linear(-2.0, (-1.0, 1.0))
            .unwrap()
            .with_saturation(-1.0, 1.0);
        assert_eq!(g.eval(3.0), -1.0);
        assert_eq!(g.derivative(3.0), 0.0);
        assert_eq!(g.eval(0.2), -0.4);
    }
}
