//! Adaptive Dormand–Prince 5(4) integrator for complex first-order systems,
//! with the classic fourth-order continuous extension for sampling.

use num_complex::Complex64;

use crate::error::{Error, Result};

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// error coefficients (5th minus 4th order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_max: f64,
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.dt_max > 0.0) {
            return Err(Error::InvalidSettings(format!(
                "tolerances and dt_max must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

fn axpy(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..out.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, k) in terms {
            acc += *a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Integrates `y' = f(t, y)` from `t = 0` and returns the state at every
/// entry of `sample_times` (non-decreasing, starting at or after 0).
pub fn integrate<F>(
    mut f: F,
    y0: &[Complex64],
    sample_times: &[f64],
    control: StepControl,
) -> Result<Vec<Vec<Complex64>>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    control.validate()?;
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.first().is_some_and(|&t| t < 0.0)
    {
        return Err(Error::InvalidSettings("sample times must be non-decreasing and ≥ 0".into()));
    }
    let n = y0.len();
    let zero = Complex64::new(0.0, 0.0);
    let t_end = sample_times.last().copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(sample_times.len());
    let mut next = 0;
    while next < sample_times.len() && sample_times[next] == 0.0 {
        out.push(y0.to_vec());
        next += 1;
    }

    let mut y = y0.to_vec();
    let mut k: Vec<Vec<Complex64>> = vec![vec![zero; n]; 7];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut t = 0.0;
    f(t, &y, &mut k[0]);
    let mut h = control.dt_max.min(0.01 * t_end.max(1e-3));
    let mut err_prev: f64 = 1e-4;

    while next < sample_times.len() {
        if t + h > t_end {
            h = t_end - t;
        }
        if h < 1e-13 * t.abs().max(1.0) {
            return Err(Error::StepSizeCollapse { t, step: h });
        }

        let (k1, rest) = k.split_at_mut(1);
        let k1 = &k1[0];
        axpy(&mut tmp, &y, h, &[(A21, k1)]);
        f(t + C2 * h, &tmp, &mut rest[0]);
        axpy(&mut tmp, &y, h, &[(A31, k1), (A32, &rest[0])]);
        f(t + C3 * h, &tmp, &mut rest[1]);
        axpy(&mut tmp, &y, h, &[(A41, k1), (A42, &rest[0]), (A43, &rest[1])]);
        f(t + C4 * h, &tmp, &mut rest[2]);
        axpy(
            &mut tmp,
            &y,
            h,
            &[(A51, k1), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])],
        );
        f(t + C5 * h, &tmp, &mut rest[3]);
        axpy(
            &mut tmp,
            &y,
            h,
            &[
                (A61, k1),
                (A62, &rest[0]),
                (A63, &rest[1]),
                (A64, &rest[2]),
                (A65, &rest[3]),
            ],
        );
        f(t + h, &tmp, &mut rest[4]);
        axpy(
            &mut y_new,
            &y,
            h,
            &[
                (A71, k1),
                (A73, &rest[1]),
                (A74, &rest[2]),
                (A75, &rest[3]),
                (A76, &rest[4]),
            ],
        );
        f(t + h, &y_new, &mut rest[5]);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i]
                    + E3 * rest[1][i]
                    + E4 * rest[2][i]
                    + E5 * rest[3][i]
                    + E6 * rest[4][i]
                    + E7 * rest[5][i]);
            let sc = control.abs_tol + control.rel_tol * y[i].norm().max(y_new[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / n.max(1) as f64).sqrt();

        if err <= 1.0 {
            let t_new = t + h;
            // dense output on [t, t_new]
            while next < sample_times.len() && sample_times[next] <= t_new {
                let theta = (sample_times[next] - t) / h;
                let theta1 = 1.0 - theta;
                let row = (0..n)
                    .map(|i| {
                        let ydiff = y_new[i] - y[i];
                        let bspl = h * k1[i] - ydiff;
                        let r4 = ydiff - h * rest[5][i] - bspl;
                        let r5 = h
                            * (D1 * k1[i]
                                + D3 * rest[1][i]
                                + D4 * rest[2][i]
                                + D5 * rest[3][i]
                                + D6 * rest[4][i]
                                + D7 * rest[5][i]);
                        y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)))
                    })
                    .collect();
                out.push(row);
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            let last = k.pop().expect("seven stages");
            k[0] = last;
            k.push(vec![zero; n]);
            // PI step-size controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h = (h * fac.clamp(0.2, 5.0)).min(control.dt_max);
            err_prev = err.max(1e-4);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> StepControl {
        StepControl {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            dt_max: 1.0,
        }
    }

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.37).collect();
        let rate = Complex64::new(-0.3, 2.0);
        let ys = integrate(
            |_, y, dy| dy[0] = rate * y[0],
            &[Complex64::new(1.0, 0.0)],
            &times,
            ctl(),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (rate * t).exp()).norm() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_on_dense_grid() {
        // dense output must be as accurate as the steps themselves
        let times: Vec<f64> = (0..=997).map(|i| i as f64 * 0.0301).collect();
        let ys = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            &times,
            ctl(),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0].re - t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_control() {
        let mut c = ctl();
        c.rel_tol = 0.0;
        assert!(integrate(|_, _, _| {}, &[Complex64::new(1.0, 0.0)], &[1.0], c).is_err());
    }
}
