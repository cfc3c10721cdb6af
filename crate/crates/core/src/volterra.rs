//! Time-domain solver for the chain with a memory kernel on the last site:
//!
//! dc̃_i/dt = −i(𝒥/2)(c̃_{i−1} + c̃_{i+1}),   i < N
//! dc̃_N/dt = −i(𝒥/2)c̃_{N−1} − ∫₀^t R(t−t′) c̃_N(t′) dt′
//!
//! Crank–Nicolson for the local part and a second-order rule for the history
//! integral, repeated on successively halved steps and Richardson
//! extrapolated. The history sums are accumulated with a dyadic blocked FFT
//! convolution, so a level with n steps costs O(n log² n).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::chain::{AmplitudeTrajectory, ChainConfig, Frame};
use crate::error::{Error, Result};
use crate::kernels::{kernel_for, MemoryKernel};
use crate::markovian::uniform_grid;
use crate::reservoir::SpectralDensity;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Squares of history pairs below this block size are summed directly.
const DIRECT_BLOCK_LOG2: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Trapezoidal rule on the kernel samples.
    Trapezoid,
    /// Piecewise-linear interpolation of c̃_N integrated exactly against R
    /// (the moments are computed with Gauss–Legendre per step).
    ProductIntegration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum History {
    Direct,
    Fft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolterraSettings {
    /// Largest base step; the actual step divides the output spacing.
    pub dt: f64,
    pub t_end: f64,
    pub n_samples: usize,
    pub quadrature: Quadrature,
    pub history: History,
    /// Number of step halvings combined by Richardson extrapolation (1 = none).
    pub extrapolation_levels: usize,
    /// Limit on the population change when the whole ladder is refined once
    /// more. `None` skips the check.
    pub convergence_gate: Option<f64>,
}

impl VolterraSettings {
    pub fn new(t_end: f64, n_samples: usize) -> Self {
        VolterraSettings {
            dt: 0.05,
            t_end,
            n_samples,
            quadrature: Quadrature::Trapezoid,
            history: History::Fft,
            extrapolation_levels: 3,
            convergence_gate: Some(1e-6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidSettings(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidSettings(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidSettings("n_samples must be at least 2".into()));
        }
        if !(1..=6).contains(&self.extrapolation_levels) {
            return Err(Error::InvalidSettings("extrapolation_levels must be in 1..=6".into()));
        }
        if let Some(g) = self.convergence_gate {
            if !(g > 0.0) {
                return Err(Error::InvalidSettings("convergence gate must be positive".into()));
            }
        }
        Ok(())
    }

    /// Substeps per output interval on the coarsest level.
    fn substeps(&self) -> usize {
        let spacing = self.t_end / (self.n_samples - 1) as f64;
        ((spacing / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolterraDiagnostics {
    /// Finest step that entered the returned result.
    pub finest_step: f64,
    pub levels: usize,
    /// Largest population change seen by the convergence gate.
    pub gate_change: Option<f64>,
}

pub fn solve_volterra(
    cfg: &ChainConfig,
    sd: &SpectralDensity,
    settings: &VolterraSettings,
) -> Result<AmplitudeTrajectory> {
    solve_volterra_with_diagnostics(cfg, sd, settings).map(|(t, _)| t)
}

pub fn solve_volterra_with_diagnostics(
    cfg: &ChainConfig,
    sd: &SpectralDensity,
    settings: &VolterraSettings,
) -> Result<(AmplitudeTrajectory, VolterraDiagnostics)> {
    settings.validate()?;
    let kernel = kernel_for(sd)?;
    let levels = settings.extrapolation_levels;
    let runs = levels + usize::from(settings.convergence_gate.is_some());
    let m = settings.substeps();
    let base_h = settings.t_end / ((settings.n_samples - 1) * m) as f64;

    let ladder: Vec<Vec<Vec<Complex64>>> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let refine = 1usize << k;
            march(
                cfg,
                &kernel,
                base_h / refine as f64,
                (settings.n_samples - 1) * m * refine,
                m * refine,
                settings.quadrature,
                settings.history,
            )
        })
        .collect::<Result<_>>()?;

    let result = richardson(&ladder[runs - levels..]);
    let mut gate_change = None;
    if let Some(limit) = settings.convergence_gate {
        let coarser = richardson(&ladder[..levels]);
        let change = max_population_change(&coarser, &result);
        gate_change = Some(change);
        if change > limit {
            return Err(Error::ConvergenceGate {
                max_change: change,
                limit,
            });
        }
    }
    let traj = AmplitudeTrajectory::new(
        uniform_grid(settings.t_end, settings.n_samples),
        result,
        Frame::Tilde,
    )?;
    let finest = base_h / (1usize << (runs - 1)) as f64;
    Ok((
        traj,
        VolterraDiagnostics {
            finest_step: finest,
            levels,
            gate_change,
        },
    ))
}

fn max_population_change(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs()))
        .fold(0.0, f64::max)
}

/// Extrapolates results on steps h, h/2, h/4, … assuming an even-power error
/// expansion.
fn richardson(ladder: &[Vec<Vec<Complex64>>]) -> Vec<Vec<Complex64>> {
    let mut table: Vec<Vec<Vec<Complex64>>> = ladder.to_vec();
    for j in 1..table.len() {
        let factor = 4f64.powi(j as i32) - 1.0;
        for i in (j..table.len()).rev() {
            let (lo, hi) = table.split_at_mut(i);
            let prev = &lo[i - 1];
            for (row, prow) in hi[0].iter_mut().zip(prev) {
                for (v, p) in row.iter_mut().zip(prow) {
                    *v += (*v - *p) / factor;
                }
            }
        }
    }
    table.pop().expect("non-empty ladder")
}

/// History weights: I_n = w₀x_n + Σ_{0<j<n} w_{n−j}x_j + e_n x₀.
struct Weights {
    w: Vec<Complex64>,
    e: Vec<Complex64>,
}

impl Weights {
    fn new(kernel: &MemoryKernel, h: f64, n_steps: usize, lag_len: usize, quad: Quadrature) -> Self {
        match quad {
            Quadrature::Trapezoid => {
                let r: Vec<Complex64> = (0..lag_len.max(n_steps + 1))
                    .into_par_iter()
                    .map(|l| kernel.r_of_t(l as f64 * h))
                    .collect();
                let mut w: Vec<Complex64> = r.iter().take(lag_len).map(|v| h * v).collect();
                w[0] *= 0.5;
                let e = r[..=n_steps].iter().map(|v| 0.5 * h * v).collect();
                Weights { w, e }
            }
            Quadrature::ProductIntegration => {
                let (nodes, gw) = gauss_legendre(8);
                // p_m pairs with the later endpoint of interval m, q_m with the earlier
                let moments: Vec<(Complex64, Complex64)> = (0..lag_len.max(n_steps + 1))
                    .into_par_iter()
                    .map(|m| {
                        let mut p = ZERO;
                        let mut q = ZERO;
                        for (x, wt) in nodes.iter().zip(&gw) {
                            let frac = 0.5 * (x + 1.0);
                            let r = kernel.r_of_t((m as f64 + frac) * h) * (0.5 * h * wt);
                            p += r * (1.0 - frac);
                            q += r * frac;
                        }
                        (p, q)
                    })
                    .collect();
                let mut w = vec![ZERO; lag_len];
                w[0] = moments[0].0;
                for l in 1..lag_len {
                    w[l] = moments[l].0 + moments[l - 1].1;
                }
                let mut e = vec![ZERO; n_steps + 1];
                for n in 1..=n_steps {
                    e[n] = moments[n - 1].1;
                }
                Weights { w, e }
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Running lagged convolution acc[t] = Σ_{s<t} w[t−s] x[s], filled in just in
/// time: once x[0..p) is known, every term of acc[p] is present.
struct HistoryAccumulator {
    mode: History,
    acc: Vec<Complex64>,
    planner: FftPlanner<f64>,
    /// Per block level: forward/inverse plans and the transformed weights.
    cache: Vec<Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>, Vec<Complex64>)>>,
    scratch: Vec<Complex64>,
}

impl HistoryAccumulator {
    fn new(mode: History, n_targets: usize) -> Self {
        HistoryAccumulator {
            mode,
            acc: vec![ZERO; n_targets],
            planner: FftPlanner::new(),
            cache: Vec::new(),
            scratch: Vec::new(),
        }
    }

    fn update(&mut self, p: usize, x: &[Complex64], w: &[Complex64]) {
        let n_targets = self.acc.len();
        if self.mode == History::Direct {
            if p < n_targets {
                self.acc[p] = (0..p).map(|s| w[p - s] * x[s]).sum();
            }
            return;
        }
        // sources [p−L, p) → targets [p, p+L) with L the largest power of two dividing p
        let k = p.trailing_zeros();
        let len = 1usize << k;
        let end = (p + len).min(n_targets);
        if p >= end {
            return;
        }
        if k < DIRECT_BLOCK_LOG2 {
            for t in p..end {
                let mut sum = ZERO;
                for s in p - len..p {
                    sum += w[t - s] * x[s];
                }
                self.acc[t] += sum;
            }
            return;
        }
        let level = k as usize;
        if self.cache.len() <= level {
            self.cache.resize(level + 1, None);
        }
        if self.cache[level].is_none() {
            let size = 2 * len;
            let fwd = self.planner.plan_fft_forward(size);
            let inv = self.planner.plan_fft_inverse(size);
            let mut spec: Vec<Complex64> = w[..size].to_vec();
            spec[0] = ZERO;
            fwd.process(&mut spec);
            self.cache[level] = Some((fwd, inv, spec));
        }
        let (fwd, inv, spec) = self.cache[level].as_ref().expect("cached above");
        let size = 2 * len;
        self.scratch.clear();
        self.scratch.extend_from_slice(&x[p - len..p]);
        self.scratch.resize(size, ZERO);
        fwd.process(&mut self.scratch);
        for (a, b) in self.scratch.iter_mut().zip(spec) {
            *a *= b;
        }
        inv.process(&mut self.scratch);
        let norm = 1.0 / size as f64;
        for t in p..end {
            self.acc[t] += self.scratch[len + t - p] * norm;
        }
    }
}

/// One Crank–Nicolson march of `n_steps` steps of size `h`, keeping every
/// `stride`-th state (including the initial one).
fn march(
    cfg: &ChainConfig,
    kernel: &MemoryKernel,
    h: f64,
    n_steps: usize,
    stride: usize,
    quad: Quadrature,
    history: History,
) -> Result<Vec<Vec<Complex64>>> {
    let n = cfg.n_qubits();
    let last = n - 1;
    let lag_len = 2 * (n_steps + 1).next_power_of_two() + 1;
    let weights = Weights::new(kernel, h, n_steps, lag_len, quad);
    let (w, e) = (&weights.w, &weights.e);

    let hop = cfg.hopping_matrix();
    let eye = DMatrix::<Complex64>::identity(n, n);
    let mut implicit = &eye - hop.scale(0.5 * h);
    implicit[(last, last)] += 0.5 * h * w[0];
    let implicit_inv = implicit.try_inverse().ok_or_else(|| {
        Error::InvalidSettings(format!("Crank–Nicolson matrix is singular at step {h}"))
    })?;
    let explicit = &eye + hop.scale(0.5 * h);
    let propagate = &implicit_inv * explicit;
    let inject = implicit_inv.column(last).into_owned();

    let mut c = DVector::from_column_slice(cfg.initial_amplitudes());
    let mut x = vec![ZERO; n_steps + 1];
    x[0] = c[last];
    let mut hist = HistoryAccumulator::new(history, n_steps + 1);
    let mut out = Vec::with_capacity(n_steps / stride + 1);
    out.push(c.as_slice().to_vec());
    let mut i_prev = ZERO;

    for p in 1..=n_steps {
        hist.update(p, &x, w);
        let s_next = hist.acc[p] + (e[p] - w[p]) * x[0];
        let forcing = -0.5 * h * (i_prev + s_next);
        c = &propagate * &c + &inject * forcing;
        x[p] = c[last];
        i_prev = w[0] * x[p] + s_next;
        if p % stride == 0 {
            out.push(c.as_slice().to_vec());
        }
    }
    Ok(out)
}
