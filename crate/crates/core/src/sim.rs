//! Monte Carlo simulation of the mild solution for noise white in time.
//!
//! The line is replaced by the periodic interval `[-L, L)` and the noise by its spectral
//! truncation to the modes `xi_m = m pi / L`, `1 <= m <= n_modes`. Each path is kept in mode
//! space. The product `u dW` is formed on a grid of `n_grid >= 3 n_modes + 1` points, which
//! keeps the quadratic product free of aliasing, and truncated back to `n_modes`.
//!
//! The kernel acting on the increment of step `j` at lag `l = k - j` is the root mean square
//! of `F Y` over the lag cell, `Phi_l(xi)^2 = (1/dt) int_{l dt}^{(l+1) dt} |F Y(r, xi)|^2 dr`,
//! signed like `F Y` at the cell midpoint. With this choice the first chaos is exact in law.
//! For exponential kernels the history sum collapses to a one-step recursion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::chaos::shape::Shape;
use crate::chaos::second_moment_truncated;
use crate::cli::format_f64;
use crate::error::{Error, Result};
use crate::kernels::{j0, weighted_energy, ModelParams};
use crate::regimes::check_existence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub t_max: f64,
    /// Number of time steps.
    pub n_time: usize,
    /// Half-width `L` of the periodic domain.
    pub half_width: f64,
    /// Positive frequencies kept, `xi_m = m pi / L`.
    pub n_modes: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Chaos order of the reference second moment, `0` for none.
    pub n_chaos_ref: usize,
}

impl SimConfig {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            t_max: 0.5,
            n_time: 500,
            half_width: 20.0,
            n_modes: 512,
            n_paths: 200,
            seed: 0,
            n_chaos_ref: 0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_time as f64
    }

    pub fn d_xi(&self) -> f64 {
        PI / self.half_width
    }

    /// Highest simulated frequency.
    pub fn max_frequency(&self) -> f64 {
        self.n_modes as f64 * self.d_xi()
    }

    /// Size of the spatial grid: the smallest power of two `>= 3 n_modes + 1`.
    pub fn n_grid(&self) -> usize {
        (3 * self.n_modes + 1).next_power_of_two()
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_grid();
        let dx = 2.0 * self.half_width / n as f64;
        (0..n).map(|i| -self.half_width + i as f64 * dx).collect()
    }

    /// Checks the invariants and returns warnings for soft ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        let p = &self.params;
        let bad = |m: String| Err(Error::Config(m));
        if p.h0() != 0.5 {
            return bad(format!("simulation needs H0 = 1/2, got {}", p.h0()));
        }
        if !check_existence(p).0 {
            return bad("the existence condition fails".into());
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return bad(format!("L must be positive, got {}", self.half_width));
        }
        if self.n_time == 0 || self.n_modes == 0 || self.n_paths == 0 {
            return bad("n_time, n_modes and n_paths must be positive".into());
        }
        if self.n_chaos_ref > 4 {
            return bad(format!("n_chaos_ref must be at most 4, got {}", self.n_chaos_ref));
        }
        let mut warnings = Vec::new();
        let heuristic = weighted_energy(p, self.t_max, p.spectral_exponent())
            .map(|e| e.cutoff)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.max_frequency() < heuristic {
            warnings.push(format!(
                "n_modes pi / L = {} is below the spectral cutoff heuristic {heuristic}",
                self.max_frequency()
            ));
        }
        Ok(warnings)
    }
}

/// One noise increment: coefficients of `cos` and `sin` per mode and the field on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseIncrement {
    /// `(a_m, b_m)` for `m = 1..=n_modes` in `sum_m a_m cos(xi_m x) + b_m sin(xi_m x)`.
    pub coefficients: Vec<(f64, f64)>,
    pub values: Vec<f64>,
}

/// Standard deviation of each mode coefficient over one time step.
///
/// The spectral density `c_H |xi|^(1-2H)` lives on the whole line; folding `-xi` onto `xi`
/// gives weight `2 c_H xi^(1-2H) d_xi` per positive mode.
pub fn mode_scales(cfg: &SimConfig) -> Vec<f64> {
    let p = &cfg.params;
    let (d, h) = (cfg.d_xi(), p.spectral_exponent());
    (1..=cfg.n_modes)
        .map(|m| (2.0 * p.c_h() * (m as f64 * d).powf(h) * d * cfg.dt()).sqrt())
        .collect()
}

/// Draws one increment `dW` on the grid of `cfg`.
pub fn sample_noise_increment<R: Rng>(cfg: &SimConfig, rng: &mut R) -> NoiseIncrement {
    let sig = mode_scales(cfg);
    let coefficients: Vec<(f64, f64)> = sig
        .iter()
        .map(|s| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (s * a, s * b)
        })
        .collect();
    let d = cfg.d_xi();
    let values = cfg
        .grid()
        .iter()
        .map(|&x| {
            coefficients
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| {
                    let (s, c) = ((i + 1) as f64 * d * x).sin_cos();
                    a * c + b * s
                })
                .sum()
        })
        .collect();
    NoiseIncrement {
        coefficients,
        values,
    }
}

/// Generator for path `path` and step `step`; streams never overlap for fewer than `2^40`
/// words per step.
fn step_rng(seed: u64, path: usize, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng.set_word_pos((step as u128) << 40);
    rng
}

/// Simulated fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub config: SimConfig,
    /// Spatial grid.
    pub x: Vec<f64>,
    /// Grid indices of the probe points.
    pub probe_index: Vec<usize>,
    /// Time steps (and times) with stored probe values, increasing; the last is `n_time`.
    pub snapshot_steps: Vec<usize>,
    pub snapshot_times: Vec<f64>,
    /// `[path][snapshot][probe]`.
    pub probes: Vec<Vec<Vec<f64>>>,
    /// `[path][grid]` at `t_max`.
    pub final_fields: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl Ensemble {
    /// Writes `path,t,x,u` rows for every stored probe value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "path,t,x,u")?;
        for (k, path) in self.probes.iter().enumerate() {
            for (s, row) in path.iter().enumerate() {
                for (q, u) in row.iter().enumerate() {
                    let x = self.x[self.probe_index[q]];
                    let (t, x, u) = (format_f64(self.snapshot_times[s]), format_f64(x), format_f64(*u));
                    writeln!(w, "{k},{t},{x},{u}")?;
                }
            }
        }
        Ok(())
    }

    /// Grid index of the point nearest to `x`.
    pub fn grid_index(&self, x: f64) -> usize {
        let l = self.config.half_width;
        let n = self.x.len();
        let i = ((x + l) / (2.0 * l) * n as f64).round() as i64;
        i.rem_euclid(n as i64) as usize
    }
}

/// Number of probe points and the time steps kept for the estimators.
const PROBES: usize = 64;

fn snapshot_steps(n_time: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (1..=8).map(|q| (n_time * q) / 8).collect();
    let mut lag = 1;
    while 2 * lag <= n_time {
        steps.push(n_time - lag);
        lag *= 2;
    }
    steps.retain(|&s| s > 0);
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Per-run tables shared by all paths.
struct Plan {
    cfg: SimConfig,
    n: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    sigma: Vec<f64>,
    /// `kernels[l][m]`, lag cell `l`; only `l = 0` for the exponential recursion.
    kernels: Vec<Vec<f64>>,
    /// One-step propagator `F Y(dt, xi_m)` when the kernel is a semigroup.
    propagator: Option<Vec<f64>>,
    snapshots: Vec<usize>,
    probes: Vec<usize>,
}

impl Plan {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let p = &cfg.params;
        let shape = Shape::new(p)?;
        let (n, m) = (cfg.n_grid(), cfg.n_modes);
        let mut planner = FftPlanner::new();
        let dt = cfg.dt();
        let omega = |k: usize| {
            let xi = k as f64 * cfg.d_xi();
            (0.5 * p.nu()).powf(1.0 / p.beta()) * xi.powf(p.alpha() / p.beta())
        };
        let cell = |l: usize, k: usize| {
            let w = omega(k);
            let lo = shape.moment(0, w, l as f64 * dt);
            let hi = shape.moment(0, w, (l + 1) as f64 * dt);
            let rms = ((hi - lo).max(0.0) / dt).sqrt();
            if shape.e(w * (l as f64 + 0.5) * dt) < 0.0 {
                -rms
            } else {
                rms
            }
        };
        let exponential = shape.is_exponential();
        let lags = if exponential { 1 } else { cfg.n_time };
        let kernels = (0..lags)
            .map(|l| (0..=m).map(|k| cell(l, k)).collect())
            .collect();
        let propagator = exponential.then(|| (0..=m).map(|k| (-omega(k) * dt).exp()).collect());
        let stride = (n / PROBES).max(1);
        Ok(Self {
            cfg: *cfg,
            n,
            m,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            sigma: mode_scales(cfg),
            kernels,
            propagator,
            snapshots: snapshot_steps(cfg.n_time),
            probes: (0..n).step_by(stride).collect(),
        })
    }

    /// Runs one path; returns probe values per snapshot and the final field.
    fn path(&self, index: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (n, m) = (self.n, self.m);
        let cfg = &self.cfg;
        let p = &cfg.params;
        let dt = cfg.dt();
        let lam = p.lambda();
        // half spectra (modes 0..=m) of the stochastic part and of past increments
        let mut s = vec![Complex64::new(0.0, 0.0); m + 1];
        let mut history: Vec<Vec<Complex64>> = Vec::new();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        let mut field = vec![0.0; n];
        let mut snaps = Vec::with_capacity(self.snapshots.len());
        let mut next_snap = 0;
        for k in 0..cfg.n_time {
            let mut rng = step_rng(cfg.seed, index, k);
            // buf = S + i W in the grid's Fourier basis (coefficient of e^(2 pi i m j / n))
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            buf[0] = s[0];
            for q in 1..=m {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let sg = 0.5 * self.sigma[q - 1];
                // a cos + b sin = Re[(a - i b) e^(i xi x)], x = -L + j dx contributes (-1)^q
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                let w = Complex64::new(sg * a, -sg * b) * sign;
                let iw = Complex64::new(0.0, 1.0) * w;
                let iwc = Complex64::new(0.0, 1.0) * w.conj();
                buf[q] = s[q] + iw;
                buf[n - q] = s[q].conj() + iwc;
            }
            self.inv.process_with_scratch(&mut buf, &mut scratch);
            let jk = j0(p, k as f64 * dt);
            for z in buf.iter_mut() {
                *z = Complex64::new((jk + z.re) * z.im, 0.0);
            }
            self.fwd.process_with_scratch(&mut buf, &mut scratch);
            let scale = 1.0 / n as f64;
            let g: Vec<Complex64> = (0..=m).map(|q| buf[q] * scale).collect();
            match &self.propagator {
                Some(prop) => {
                    for q in 0..=m {
                        s[q] = prop[q] * s[q] + lam * self.kernels[0][q] * g[q];
                    }
                }
                None => {
                    history.push(g);
                    for q in 0..=m {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (j, gj) in history.iter().enumerate() {
                            acc += self.kernels[k - j][q] * gj[q];
                        }
                        s[q] = lam * acc;
                    }
                }
            }
            let step = k + 1;
            let is_final = step == cfg.n_time;
            if next_snap < self.snapshots.len() && self.snapshots[next_snap] == step || is_final {
                self.to_grid(&s, j0(p, step as f64 * dt), &mut buf, &mut scratch, &mut field);
                if next_snap < self.snapshots.len() && self.snapshots[next_snap] == step {
                    snaps.push(self.probes.iter().map(|&i| field[i]).collect());
                    next_snap += 1;
                }
            }
        }
        (snaps, field)
    }

    fn to_grid(
        &self,
        s: &[Complex64],
        j: f64,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
        out: &mut [f64],
    ) {
        let (n, m) = (self.n, self.m);
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        buf[0] = s[0];
        for q in 1..=m {
            buf[q] = s[q];
            buf[n - q] = s[q].conj();
        }
        self.inv.process_with_scratch(buf, scratch);
        for (o, z) in out.iter_mut().zip(buf.iter()) {
            *o = j + z.re;
        }
    }
}

/// Simulates `n_paths` independent paths; paths run in parallel and are collected in order.
pub fn simulate_paths(cfg: &SimConfig) -> Result<Ensemble> {
    let warnings = cfg.validate()?;
    let plan = Plan::new(cfg)?;
    let runs: Vec<(Vec<Vec<f64>>, Vec<f64>)> =
        (0..cfg.n_paths).into_par_iter().map(|i| plan.path(i)).collect();
    let (probes, final_fields) = runs.into_iter().unzip();
    let dt = cfg.dt();
    Ok(Ensemble {
        config: *cfg,
        x: cfg.grid(),
        probe_index: plan.probes.clone(),
        snapshot_times: plan.snapshots.iter().map(|&k| k as f64 * dt).collect(),
        snapshot_steps: plan.snapshots,
        probes,
        final_fields,
        warnings,
    })
}

/// Mean of `values` and its delete-one jackknife standard error.
pub fn jackknife_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let sum: f64 = values.iter().sum();
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let loo: Vec<f64> = values.iter().map(|v| (sum - v) / (n - 1) as f64).collect();
    let m: f64 = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (mean, var.sqrt())
}

/// Least-squares Hölder fit of `log E|increment|^2` against `log separation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub separations: Vec<f64>,
    /// Mean squared increments.
    pub structure: Vec<f64>,
    /// Half the slope, with its regression standard error; `None` when the increments vanish.
    pub exponent: Option<(f64, f64)>,
}

impl HolderFit {
    pub fn degenerate(&self) -> bool {
        self.exponent.is_none()
    }

    fn fit(separations: Vec<f64>, structure: Vec<f64>) -> Self {
        if structure.iter().any(|&s| !(s > 0.0)) {
            return Self {
                separations,
                structure,
                exponent: None,
            };
        }
        let xs: Vec<f64> = separations.iter().map(|s| s.ln()).collect();
        let ys: Vec<f64> = structure.iter().map(|s| s.ln()).collect();
        let k = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - my - slope * (x - mx);
                r * r
            })
            .sum();
        let se = (rss / (k - 2.0) / sxx).sqrt();
        Self {
            separations,
            structure,
            exponent: Some((0.5 * slope, 0.5 * se)),
        }
    }
}

/// Dyadic separations that must fit between the resolution scale and the domain or run length.
pub const HOLDER_LEVELS: usize = 8;

/// Empirical space and time Hölder exponents at `t_max`.
///
/// Separations are `2^k` grid cells and lags `2^k` steps. The fit uses those between the
/// smallest resolved scale (`pi / max_frequency` in space, its image under the kernel rate in
/// time) and the correlation scale of the kernel at `t_max` (`(nu t^beta)^(1/alpha)` in space,
/// `t_max / 8` in time). Beyond it the structure functions saturate.
pub fn estimate_holder(ens: &Ensemble) -> Result<(HolderFit, HolderFit)> {
    let cfg = &ens.config;
    let p = &cfg.params;
    let n = ens.x.len();
    let dx = 2.0 * cfg.half_width / n as f64;
    let resolve = PI / cfg.max_frequency();
    let spatial: Vec<usize> = (0..)
        .map(|k| 1usize << k)
        .take_while(|&d| d <= n / 4)
        .filter(|&d| d as f64 * dx >= resolve)
        .collect();
    if spatial.len() < HOLDER_LEVELS {
        return Err(Error::InsufficientResolution(format!(
            "{n} grid points fit {} dyadic separations above {resolve}",
            spatial.len()
        )));
    }
    let dt = cfg.dt();
    let t_res = (2.0 / p.nu()).powf(1.0 / p.beta()) * cfg.max_frequency().powf(-p.alpha() / p.beta());
    let lags: Vec<usize> = (0..)
        .map(|k| 1usize << k)
        .take_while(|&l| 2 * l <= cfg.n_time)
        .filter(|&l| l as f64 * dt >= t_res)
        .collect();
    if lags.len() < HOLDER_LEVELS {
        return Err(Error::InsufficientResolution(format!(
            "{} time steps fit {} dyadic lags above {t_res}",
            cfg.n_time,
            lags.len()
        )));
    }
    let corr = (p.nu() * cfg.t_max.powf(p.beta())).powf(1.0 / p.alpha());
    let (mut seps, mut space) = (Vec::new(), Vec::new());
    for &d in spatial.iter().filter(|&&d| d as f64 * dx <= corr) {
        let mut acc = 0.0;
        for f in &ens.final_fields {
            for i in 0..n {
                let v = f[(i + d) % n] - f[i];
                acc += v * v;
            }
        }
        seps.push(d as f64 * dx);
        space.push(acc / (n * ens.final_fields.len()) as f64);
    }
    let last = ens.snapshot_steps.len() - 1;
    let (mut times, mut time) = (Vec::new(), Vec::new());
    for &lag in lags.iter().filter(|&&l| 8 * l <= cfg.n_time) {
        let s = ens
            .snapshot_steps
            .iter()
            .position(|&x| x == cfg.n_time - lag)
            .ok_or_else(|| Error::InsufficientResolution(format!("no snapshot at lag {lag}")))?;
        let mut acc = 0.0;
        let mut count = 0usize;
        for path in &ens.probes {
            for (a, b) in path[last].iter().zip(&path[s]) {
                acc += (a - b) * (a - b);
                count += 1;
            }
        }
        times.push(lag as f64 * dt);
        time.push(acc / count as f64);
    }
    for (name, k) in [("space", seps.len()), ("time", times.len())] {
        if k < 3 {
            return Err(Error::InsufficientResolution(format!(
                "only {k} {name} separations below the correlation scale"
            )));
        }
    }
    Ok((HolderFit::fit(seps, space), HolderFit::fit(times, time)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub t: f64,
    pub x: f64,
    /// `p -> (E|u(t, x)|^p, standard error)` over paths.
    pub moments: BTreeMap<u32, (f64, f64)>,
    /// The same moments averaged over the whole grid first (stationarity).
    pub moments_averaged: BTreeMap<u32, (f64, f64)>,
    /// `E u(t, x)`.
    pub mean: (f64, f64),
    /// `(time, E|u(time, 0)|^2, standard error)` over the snapshots, averaged over probes.
    pub second_moment_path: Vec<(f64, f64, f64)>,
    pub space_holder_slope: Option<(f64, f64)>,
    pub time_holder_slope: Option<(f64, f64)>,
    /// Truncated chaos series `(value, abs_err)` when `n_chaos_ref > 0`.
    pub reference_second_moment: Option<(f64, f64)>,
}

/// Moment estimates at `(t_max, 0)` with jackknife errors over paths.
pub fn estimate_moments(ens: &Ensemble, p_list: &[u32]) -> Result<SimEstimate> {
    estimate_moments_at(ens, p_list, 0.0)
}

/// As [`estimate_moments`] at `(t_max, x)`.
pub fn estimate_moments_at(ens: &Ensemble, p_list: &[u32], x: f64) -> Result<SimEstimate> {
    if ens.final_fields.is_empty() {
        return Err(Error::Config("empty ensemble".into()));
    }
    let cfg = &ens.config;
    let i = ens.grid_index(x);
    let point: Vec<f64> = ens.final_fields.iter().map(|f| f[i]).collect();
    let mut moments = BTreeMap::new();
    let mut moments_averaged = BTreeMap::new();
    for &p in p_list {
        let pf = p as f64;
        let vals: Vec<f64> = point.iter().map(|u| u.abs().powf(pf)).collect();
        moments.insert(p, jackknife_mean(&vals));
        let avg: Vec<f64> = ens
            .final_fields
            .iter()
            .map(|f| f.iter().map(|u| u.abs().powf(pf)).sum::<f64>() / f.len() as f64)
            .collect();
        moments_averaged.insert(p, jackknife_mean(&avg));
    }
    let second_moment_path = ens
        .snapshot_steps
        .iter()
        .enumerate()
        .map(|(s, _)| {
            let vals: Vec<f64> = ens
                .probes
                .iter()
                .map(|path| path[s].iter().map(|u| u * u).sum::<f64>() / path[s].len() as f64)
                .collect();
            let (m, e) = jackknife_mean(&vals);
            (ens.snapshot_times[s], m, e)
        })
        .collect();
    let (space, time) = match estimate_holder(ens) {
        Ok((s, t)) => (s.exponent, t.exponent),
        Err(Error::InsufficientResolution(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let reference_second_moment = if cfg.n_chaos_ref > 0 {
        let r = second_moment_truncated(&cfg.params, cfg.t_max, cfg.n_chaos_ref)?;
        Some((r.value, r.abs_err))
    } else {
        None
    };
    Ok(SimEstimate {
        t: cfg.t_max,
        x: ens.x[i],
        moments,
        moments_averaged,
        mean: jackknife_mean(&point),
        second_moment_path,
        space_holder_slope: space,
        time_holder_slope: time,
        reference_second_moment,
    })
}
