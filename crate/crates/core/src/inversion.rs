//! Numerical inverse Laplace transforms of complex-valued (not necessarily
//! real) time functions.
//!
//! * `BromwichFft`: trapezoidal Bromwich integral on a vertical line, all
//!   nodes folded onto one FFT of period P, which yields the whole uniform
//!   grid at once. The aliasing error is about e^{−aP}. Known large-|s|
//!   asymptotics are subtracted as Σ d_j/(s+b)^{j+1} and added back in the
//!   time domain, which removes the jump at t = 0 and speeds up the decay of
//!   the remaining transform.
//! * `Dehoog`: the quotient-difference accelerated Fourier series, evaluated
//!   separately for each output time. The number of terms it needs grows
//!   with t times the bandwidth of the signal, so it suits short windows.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markovian::uniform_grid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default highest angular frequency sampled by `BromwichFft`. With the
/// asymptotic tail removed the transform is negligible beyond it, while the
/// recurrence for far sites loses accuracy as |s| grows.
pub const DEFAULT_CUTOFF: f64 = 100.0;

/// Nodes evaluated per parallel batch before folding, which keeps the
/// summation order (and so the output bits) independent of thread count.
const BATCH: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BromwichFft,
    Dehoog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSettings {
    pub method: Method,
    /// Abscissa a of the Bromwich line (dehoog: the assumed bound on the
    /// singularities' real parts, to which the tolerance shift is added).
    pub contour_shift: f64,
    /// bromwich-fft: nodes on each side of the real axis;
    /// dehoog: M, giving 2M+1 terms of the series.
    pub n_nodes: usize,
    pub t_end: f64,
    pub n_samples: usize,
    /// bromwich-fft: the period P is at least this multiple of 1/a.
    pub alias_exponent: f64,
    /// bromwich-fft: asymptotic terms subtracted from the transform.
    pub tail_terms: usize,
    /// bromwich-fft: largest change tolerated when the contour shift is
    /// doubled. `None` skips the re-run.
    pub aliasing_check: Option<f64>,
    /// dehoog: target relative accuracy, which sets the contour shift.
    pub dehoog_tolerance: f64,
}

impl InversionSettings {
    pub fn new(method: Method, t_end: f64, n_samples: usize) -> Self {
        let mut s = InversionSettings {
            method,
            contour_shift: 2.0 / t_end,
            n_nodes: 24,
            t_end,
            n_samples,
            alias_exponent: 32.0,
            tail_terms: 5,
            aliasing_check: Some(1e-6),
            dehoog_tolerance: 1e-14,
        };
        if method == Method::BromwichFft {
            s.set_cutoff(DEFAULT_CUTOFF);
        }
        s
    }

    /// FFT length and period P used by `BromwichFft` for abscissa `a`.
    pub fn fft_period(&self, a: f64) -> (usize, f64) {
        let dt = self.t_end / (self.n_samples - 1) as f64;
        let min_period = (self.alias_exponent / a).max(2.0 * self.t_end);
        let len = ((min_period / dt).ceil() as usize).next_power_of_two();
        (len, len as f64 * dt)
    }

    /// Chooses `n_nodes` so the `BromwichFft` nodes reach |Im s| = `omega`.
    pub fn set_cutoff(&mut self, omega: f64) {
        let (_, period) = self.fft_period(self.contour_shift);
        self.n_nodes = (omega * period / (2.0 * std::f64::consts::PI)).ceil().max(1.0) as usize;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSettings(m));
        if !(self.contour_shift.is_finite() && self.contour_shift > 0.0) {
            return bad(format!(
                "contour shift must be positive (right of every singularity), got {}",
                self.contour_shift
            ));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.n_samples < 2 || self.n_nodes < 1 {
            return bad("n_samples must be ≥ 2 and n_nodes ≥ 1".into());
        }
        if !(self.alias_exponent > 0.0) {
            return bad("alias_exponent must be positive".into());
        }
        if !(self.dehoog_tolerance > 0.0 && self.dehoog_tolerance < 1.0) {
            return bad("dehoog_tolerance must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.t_end, self.n_samples)
    }
}

/// Inverts a scalar transform onto the settings' grid.
pub fn invert_laplace<F>(f: F, settings: &InversionSettings) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let rows = invert_laplace_vec(|s| f(s).map(|v| vec![v]), 1, &[], settings)?;
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

/// Inverts `width` transforms evaluated together. `derivatives[m]` holds the
/// m-th time derivatives at 0 (the large-|s| coefficients); fewer than
/// `tail_terms` may be supplied, including none.
pub fn invert_laplace_vec<F>(
    f: F,
    width: usize,
    derivatives: &[Vec<Complex64>],
    settings: &InversionSettings,
) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    settings.validate()?;
    if derivatives.iter().any(|d| d.len() != width) {
        return Err(Error::DimensionMismatch("derivative rows must match the transform width".into()));
    }
    match settings.method {
        Method::BromwichFft => {
            let first = bromwich_fft(&f, width, derivatives, settings, settings.contour_shift)?;
            if let Some(tol) = settings.aliasing_check {
                let second = bromwich_fft(&f, width, derivatives, settings, 2.0 * settings.contour_shift)?;
                let change = first
                    .iter()
                    .zip(&second)
                    .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
                    .fold(0.0, f64::max);
                if change > tol {
                    return Err(Error::Inversion(format!(
                        "result moved by {change:e} when the contour shift was doubled (tolerance {tol:e})"
                    )));
                }
            }
            Ok(first)
        }
        Method::Dehoog => dehoog(&f, width, derivatives, settings),
    }
}

/// Growth rate of the derivative sequence, used as the decay rate of the
/// subtracted tail functions.
fn tail_rate(derivatives: &[Vec<Complex64>]) -> f64 {
    let mut rate: f64 = 1.0;
    for (m, row) in derivatives.iter().enumerate().skip(1) {
        let mag = row.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if mag > 0.0 {
            rate = rate.max(mag.powf(1.0 / m as f64));
        }
    }
    rate
}

/// Tail coefficients d_j with e^{−bt} Σ d_j t^j/j! matching the Taylor series
/// of the target through the supplied order.
fn tail_coefficients(derivatives: &[Vec<Complex64>], b: f64, width: usize) -> Vec<Vec<Complex64>> {
    (0..derivatives.len())
        .map(|j| {
            (0..width)
                .map(|w| {
                    let mut sum = ZERO;
                    let mut binom = 1.0;
                    for m in 0..=j {
                        sum += binom * b.powi((j - m) as i32) * derivatives[m][w];
                        binom *= (j - m) as f64 / (m + 1) as f64;
                    }
                    sum
                })
                .collect()
        })
        .collect()
}

fn bromwich_fft<F>(
    f: &F,
    width: usize,
    derivatives: &[Vec<Complex64>],
    settings: &InversionSettings,
    a: f64,
) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    let (len, period) = settings.fft_period(a);
    let d_omega = 2.0 * std::f64::consts::PI / period;

    let terms = &derivatives[..derivatives.len().min(settings.tail_terms)];
    let b = tail_rate(terms);
    let tail = tail_coefficients(terms, b, width);
    let residual = |s: Complex64| -> Result<Vec<Complex64>> {
        let mut v = f(s)?;
        if v.len() != width {
            return Err(Error::DimensionMismatch("transform returned the wrong width".into()));
        }
        let inv = 1.0 / (s + b);
        let mut p = inv;
        for d in &tail {
            for (x, dj) in v.iter_mut().zip(d) {
                *x -= dj * p;
            }
            p *= inv;
        }
        Ok(v)
    };

    // bins[w][m] accumulates the nodes with index ≡ m (mod len)
    let mut bins = vec![vec![ZERO; len]; width];
    let k_max = settings.n_nodes as i64;
    let mut start = -k_max;
    while start <= k_max {
        let stop = (start + BATCH as i64 - 1).min(k_max);
        let values: Vec<Vec<Complex64>> = (start..=stop)
            .into_par_iter()
            .map(|k| residual(Complex64::new(a, k as f64 * d_omega)))
            .collect::<Result<_>>()?;
        for (offset, v) in values.into_iter().enumerate() {
            let k = start + offset as i64;
            let weight = if k.abs() == k_max { 0.5 } else { 1.0 };
            let bin = k.rem_euclid(len as i64) as usize;
            for (w, x) in v.into_iter().enumerate() {
                bins[w][bin] += weight * x;
            }
        }
        start = stop + 1;
    }

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(len);
    for row in bins.iter_mut() {
        fft.process(row);
    }
    let times = settings.times();
    Ok(times
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let scale = (a * t).exp() / period;
            (0..width)
                .map(|w| {
                    let mut v = bins[w][n] * scale;
                    // add the subtracted functions back: d_j t^j e^{−bt}/j!
                    let decay = (-b * t).exp();
                    let mut basis = 1.0;
                    for (j, d) in tail.iter().enumerate() {
                        if j > 0 {
                            basis *= t / j as f64;
                        }
                        v += d[w] * basis * decay;
                    }
                    v
                })
                .collect()
        })
        .collect())
}

/// Continued-fraction coefficients of the power series Σ c_k z^k by the
/// quotient-difference algorithm.
fn qd_coefficients(c: &[Complex64]) -> Option<Vec<Complex64>> {
    let terms = c.len(); // 2M + 1
    let m = (terms - 1) / 2;
    let mut d = vec![ZERO; terms];
    d[0] = c[0];
    let mut q: Vec<Complex64> = (0..terms - 1).map(|i| c[i + 1] / c[i]).collect();
    let mut e_prev = vec![ZERO; terms];
    for r in 1..=m {
        // e^{(r)}_i = q^{(r)}_{i+1} − q^{(r)}_i + e^{(r−1)}_{i+1}
        let len_e = q.len() - 1;
        let e: Vec<Complex64> = (0..len_e).map(|i| q[i + 1] - q[i] + e_prev[i + 1]).collect();
        d[2 * r - 1] = -q[0];
        d[2 * r] = -e[0];
        if r < m {
            let len_q = e.len() - 1;
            q = (0..len_q).map(|i| q[i + 1] * e[i + 1] / e[i]).collect();
        }
        e_prev = e;
    }
    if d.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return None;
    }
    Some(d)
}

/// Value of the continued fraction d₀/(1 + d₁z/(1 + d₂z/(1 + …))) with the
/// remainder estimate for the final tail.
fn continued_fraction(d: &[Complex64], z: Complex64) -> Complex64 {
    let terms = d.len();
    let one = Complex64::new(1.0, 0.0);
    let mut a_prev = ZERO; // A_{−1}
    let mut a_cur = d[0]; // A_0
    let mut b_prev = one;
    let mut b_cur = one;
    for n in 1..terms - 1 {
        let a_next = a_cur + d[n] * z * a_prev;
        let b_next = b_cur + d[n] * z * b_prev;
        a_prev = a_cur;
        a_cur = a_next;
        b_prev = b_cur;
        b_cur = b_next;
    }
    let last = terms - 1;
    let h = 0.5 * (one + (d[last - 1] - d[last]) * z);
    let rz = -h * (one - (one + d[last] * z / (h * h)).sqrt());
    let a_fin = a_cur + rz * a_prev;
    let b_fin = b_cur + rz * b_prev;
    a_fin / b_fin
}

fn dehoog<F>(
    f: &F,
    width: usize,
    derivatives: &[Vec<Complex64>],
    settings: &InversionSettings,
) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>> + Sync,
{
    let m = settings.n_nodes;
    let times = settings.times();
    times
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return match derivatives.first() {
                    Some(c0) => Ok(c0.clone()),
                    None => Err(Error::Inversion(
                        "dehoog cannot evaluate t = 0 without the initial values".into(),
                    )),
                };
            }
            let period = 2.0 * t;
            let gamma = settings.contour_shift - settings.dehoog_tolerance.ln() / (2.0 * period);
            let step = std::f64::consts::PI / period;
            let upper: Vec<Vec<Complex64>> = (0..=2 * m)
                .map(|k| f(Complex64::new(gamma, k as f64 * step)))
                .collect::<Result<_>>()?;
            let lower: Vec<Vec<Complex64>> = (0..=2 * m)
                .map(|k| {
                    if k == 0 {
                        Ok(upper[0].clone())
                    } else {
                        f(Complex64::new(gamma, -(k as f64) * step))
                    }
                })
                .collect::<Result<_>>()?;
            let z = Complex64::from_polar(1.0, std::f64::consts::PI * t / period);
            (0..width)
                .map(|w| {
                    let mut sum = ZERO;
                    for (series, zz) in [(&upper, z), (&lower, z.conj())] {
                        let mut c: Vec<Complex64> = series.iter().map(|v| v[w]).collect();
                        c[0] *= 0.5;
                        let value = if c.iter().all(|x| *x == ZERO) {
                            ZERO
                        } else {
                            let d = qd_coefficients(&c).ok_or_else(|| {
                                Error::Inversion(format!("quotient-difference table broke down at t = {t}"))
                            })?;
                            continued_fraction(&d, zz)
                        };
                        sum += value;
                    }
                    let v = sum * (gamma * t).exp() / (2.0 * period);
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(Error::Inversion(format!("accelerated series diverged at t = {t}")));
                    }
                    Ok(v)
                })
                .collect()
        })
        .collect()
}
