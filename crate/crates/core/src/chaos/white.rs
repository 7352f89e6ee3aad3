//! Norms for noise white in time (`H0 = 1/2`).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::qmc::{integrate as qmc_integrate, ParetoLine, QmcOptions};
use super::shape::Shape;
use super::{half_line, ChaosMethod, ChaosNormResult};
use crate::error::{domain, Error, Result};
use crate::kernels::{c_constant, ModelParams};
use crate::quad::{integrate_panels_par, QuadOptions};
use crate::regimes::necessity_white_time;

const TOL_OUTER: f64 = 1e-8;
const TOL_INNER: f64 = 1e-9;
/// Looser tolerances of the three nested levels of the general n = 2 route.
const GENERAL_TOL: [f64; 3] = [1e-6, 1e-7, 1e-8];

/// First error raised inside an integrand that must return plain numbers.
pub(crate) struct Failure(OnceLock<Error>);

impl Failure {
    pub fn new() -> Self {
        Self(OnceLock::new())
    }

    pub fn take(&self, r: Result<f64>) -> f64 {
        r.unwrap_or_else(|e| {
            let _ = self.0.set(e);
            f64::NAN
        })
    }

    pub fn finish<T>(self, v: T) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// Model constants and the tabulated kernel shared by all routes.
pub(crate) struct Ctx {
    pub shape: Shape,
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
    pub h: f64,
    pub nu: f64,
    pub mu0: f64,
    pub mu1: f64,
    /// `lambda^2 c_H`, the factor contributed by each chaos order.
    pub pre: f64,
    wc: f64,
}

impl Ctx {
    pub fn new(p: &ModelParams) -> Result<Self> {
        Ok(Self {
            shape: Shape::new(p)?,
            alpha: p.alpha(),
            beta: p.beta(),
            b: p.b(),
            h: p.spectral_exponent(),
            nu: p.nu(),
            mu0: p.mu0(),
            mu1: if p.beta() > 1.0 { p.mu1() } else { 0.0 },
            pre: p.lambda() * p.lambda() * p.c_h(),
            wc: (0.5 * p.nu()).powf(1.0 / p.beta()),
        })
    }

    pub fn omega(&self, eta: f64) -> f64 {
        self.wc * eta.abs().powf(self.alpha / self.beta)
    }

    /// Frequency where `omega tau = 1`.
    pub fn scale(&self, tau: f64) -> f64 {
        (self.wc * tau).powf(-self.beta / self.alpha)
    }

    pub fn j0(&self, s: f64) -> f64 {
        self.mu0 + self.mu1 * s
    }

    /// `int_0^T (A - mu1 tau)^2 |F Y(tau, eta)|^2 dtau`.
    pub fn r(&self, t: f64, a: f64, eta: f64) -> f64 {
        let om = self.omega(eta);
        let p0 = self.shape.moment(0, om, t);
        if self.mu1 == 0.0 {
            return a * a * p0;
        }
        let p1 = self.shape.moment(1, om, t);
        let p2 = self.shape.moment(2, om, t);
        (a * a * p0 - 2.0 * a * self.mu1 * p1 + self.mu1 * self.mu1 * p2).max(0.0)
    }

    fn exponential(&self) -> bool {
        self.shape.is_exponential()
    }
}

/// `int_{tau_j >= 0, sum tau_j < t} exp(-sum_j a_j tau_j) dtau` for `a_j >= 0`, at most 7 rates.
///
/// This is the divided difference of `x -> exp(-t x)` at `0, a_1, ..., a_n` up to the sign
/// `(-1)^n`, evaluated by recursion on well-separated nodes and by a Taylor expansion otherwise.
pub fn simplex_exp_integral(t: f64, rates: &[f64]) -> f64 {
    assert!(rates.len() < 8, "at most 7 rates");
    let mut x = [0.0; 8];
    x[1..=rates.len()].copy_from_slice(rates);
    let x = &mut x[..=rates.len()];
    x.sort_by(f64::total_cmp);
    signed_divided_difference(t, x)
}

fn signed_divided_difference(t: f64, x: &[f64]) -> f64 {
    let m = x.len() - 1;
    if m == 0 {
        return (-t * x[0]).exp();
    }
    let span = x[m] - x[0];
    if t * span >= 1.0 {
        return (signed_divided_difference(t, &x[..m]) - signed_divided_difference(t, &x[1..]))
            / span;
    }
    let mut hk = [0.0; 64];
    hk[0] = 1.0;
    for &xi in &x[1..] {
        let y = xi - x[0];
        for k in 1..hk.len() {
            hk[k] += y * hk[k - 1];
        }
    }
    let mut coef = t.powi(m as i32) / (1..=m).map(|i| i as f64).product::<f64>();
    let mut sum = 0.0;
    for (k, h) in hk.iter().enumerate() {
        let term = coef * h;
        sum += if k % 2 == 0 { term } else { -term };
        if k > 0 && term.abs() < 1e-18 * sum.abs() {
            break;
        }
        coef *= t / (m + k + 1) as f64;
    }
    (-t * x[0]).exp() * sum
}

/// How a white-noise norm is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteOptions {
    /// Restrict every `|eta_j|` to at most this frequency.
    pub cutoff: Option<f64>,
    /// Use the generic shape-function quadrature instead of the closed forms available
    /// for `n = 1` and for exponential kernels.
    pub general_route: bool,
    pub qmc: QmcOptions,
}

impl Default for WhiteOptions {
    fn default() -> Self {
        Self {
            cutoff: None,
            general_route: false,
            qmc: QmcOptions::default(),
        }
    }
}

/// `n! |f~_n(t, x)|^2` for `n <= 4`: quadrature for `n <= 2`, quasi-Monte Carlo beyond.
pub fn chaos_norm_white(p: &ModelParams, n: usize, t: f64) -> Result<ChaosNormResult> {
    chaos_norm_white_with(p, n, t, &WhiteOptions::default())
}

/// The norm with every frequency `eta_j` restricted to `|eta_j| <= cutoff`. Defined even when
/// the full norm diverges.
pub fn chaos_norm_white_truncated(
    p: &ModelParams,
    n: usize,
    t: f64,
    cutoff: f64,
) -> Result<ChaosNormResult> {
    if !(cutoff > 0.0) {
        return domain(format!("cutoff must be positive, got {cutoff}"));
    }
    chaos_norm_white_with(
        p,
        n,
        t,
        &WhiteOptions {
            cutoff: Some(cutoff),
            ..Default::default()
        },
    )
}

pub fn chaos_norm_white_with(
    p: &ModelParams,
    n: usize,
    t: f64,
    opts: &WhiteOptions,
) -> Result<ChaosNormResult> {
    check_args(p, n, t)?;
    if opts.cutoff.is_none() && !necessity_white_time(p)? {
        return Err(Error::DivergentIntegral(format!(
            "the existence condition fails, so the order-{n} norm grows without bound in the frequency cutoff"
        )));
    }
    let ctx = Ctx::new(p)?;
    let limit = opts.cutoff;
    let quad = |(value, abs_err, reach): (f64, f64, f64)| ChaosNormResult {
        n,
        value,
        abs_err,
        cutoff: limit.unwrap_or(reach),
        method: ChaosMethod::Quadrature,
    };
    match n {
        1 if limit.is_none() && !opts.general_route => norm1_closed(p, &ctx, t),
        1 => norm1_quadrature(&ctx, t, limit).map(quad),
        2 if ctx.exponential() && !opts.general_route => {
            norm2_exponential(&ctx, t, limit).map(quad)
        }
        2 => norm2_time_outer(&ctx, t, limit).map(quad),
        _ => qmc_norm(&ctx, n, t, limit, &opts.qmc),
    }
}

/// Quasi-Monte Carlo evaluation for any `n <= 4`; used for `n >= 3` and as an oracle.
pub fn chaos_norm_qmc(
    p: &ModelParams,
    n: usize,
    t: f64,
    opts: &QmcOptions,
) -> Result<ChaosNormResult> {
    check_args(p, n, t)?;
    if !necessity_white_time(p)? {
        return Err(Error::DivergentIntegral(
            "the existence condition fails".into(),
        ));
    }
    qmc_norm(&Ctx::new(p)?, n, t, None, opts)
}

fn check_args(p: &ModelParams, n: usize, t: f64) -> Result<()> {
    if p.h0() != 0.5 {
        return domain(format!("white-noise norms need H0 = 1/2, got {}", p.h0()));
    }
    if !(1..=4).contains(&n) {
        return domain(format!("order must be in 1..=4, got {n}"));
    }
    if !(t > 0.0) {
        return domain(format!("t must be positive, got {t}"));
    }
    Ok(())
}

/// `lambda^2 c_H C [m^2 t^(e+1)/(e+1) - 2 m mu1 t^(e+2)/(e+2) + mu1^2 t^(e+3)/(e+3)]`
/// from the scaling `int |F Y(tau)|^2 |xi|^h = C tau^e`.
fn norm1_closed(p: &ModelParams, ctx: &Ctx, t: f64) -> Result<ChaosNormResult> {
    let (h, b) = (ctx.h, ctx.b);
    let e = 2.0 * b - 2.0 - ctx.beta * (h + 1.0) / ctx.alpha;
    if e <= -1.0 {
        return Err(Error::DivergentIntegral(format!(
            "time exponent {e} is not integrable"
        )));
    }
    let c = c_constant(p, h, b, b)?;
    let mu1 = ctx.mu1;
    let m = ctx.j0(t);
    let poly = m * m * t.powf(e + 1.0) / (e + 1.0) - 2.0 * m * mu1 * t.powf(e + 2.0) / (e + 2.0)
        + mu1 * mu1 * t.powf(e + 3.0) / (e + 3.0);
    let unit = (0.5 * ctx.nu * t.powf(ctx.beta)).powf(-1.0 / ctx.alpha);
    Ok(ChaosNormResult {
        n: 1,
        value: ctx.pre * c.value * poly,
        abs_err: ctx.pre * (c.abs_err + c.tail_bound) * poly.abs(),
        cutoff: c.cutoff * unit,
        method: ChaosMethod::Quadrature,
    })
}

fn norm1_quadrature(ctx: &Ctx, t: f64, limit: Option<f64>) -> Result<(f64, f64, f64)> {
    let a = ctx.j0(t);
    let f = |x: f64| x.powf(ctx.h) * ctx.r(t, a, x);
    let (v, e, reach) = half_line(&f, ctx.scale(t), &[], limit, TOL_INNER)?;
    let k = 2.0 * ctx.pre;
    Ok((k * v, k * e, reach))
}

/// Exponential kernel: the time integral over the simplex is exact, leaving the plane in `eta`.
fn norm2_exponential(ctx: &Ctx, t: f64, limit: Option<f64>) -> Result<(f64, f64, f64)> {
    let scale = (ctx.nu * t).powf(-1.0 / ctx.alpha);
    let fail = Failure::new();
    let outer = |x1: f64| {
        let a1 = ctx.nu * x1.powf(ctx.alpha);
        let inner = |x2: f64| {
            let w = (x2 - x1).abs().powf(ctx.h) + (x1 + x2).powf(ctx.h);
            w * simplex_exp_integral(t, &[a1, ctx.nu * x2.powf(ctx.alpha)])
        };
        x1.powf(ctx.h) * fail.take(half_line(&inner, scale, &[x1], limit, TOL_INNER).map(|r| r.0))
    };
    let r = half_line(&outer, scale, &[], limit, TOL_OUTER);
    let (v, e, reach) = fail.finish(r?)?;
    let k = 2.0 * ctx.pre * ctx.pre * ctx.mu0 * ctx.mu0;
    Ok((k * v, k * (e + TOL_INNER * v), reach))
}

/// Generic route: outer integral over the first gap `tau_1`, then `eta_1`, then `eta_2`
/// with the `tau_2` integral in closed form through the shape moments.
fn norm2_time_outer(ctx: &Ctx, t: f64, limit: Option<f64>) -> Result<(f64, f64, f64)> {
    let h = ctx.h;
    let b = ctx.b;
    // small-gap exponents of the tau_1 and T = t - tau_1 integrands
    let (w_left, w_right) = match limit {
        None => {
            let w = 2.0 * b - 2.0 - ctx.beta * (2.0 * h + 1.0) / ctx.alpha;
            if w <= -1.0 {
                return Err(Error::DivergentIntegral(format!(
                    "gap exponent {w} is not integrable"
                )));
            }
            (w, 2.0 * b - 1.0 - ctx.beta * (h + 1.0) / ctx.alpha)
        }
        Some(_) => (2.0 * b - 2.0, 2.0 * b - 1.0),
    };
    let fail = Failure::new();
    let reach = std::sync::Mutex::new(0.0f64);
    let at = |tau1: f64| -> f64 {
        let big_t = t - tau1;
        if tau1 <= 0.0 || big_t <= 0.0 {
            return 0.0;
        }
        let a = ctx.j0(big_t);
        let (s1, s2) = (ctx.scale(tau1), ctx.scale(big_t));
        let eta1 = |x1: f64| {
            let q = ctx.shape.q(ctx.omega(x1), tau1);
            if q == 0.0 {
                return 0.0;
            }
            let eta2 =
                |x2: f64| ((x2 - x1).abs().powf(h) + (x1 + x2).powf(h)) * ctx.r(big_t, a, x2);
            x1.powf(h)
                * q
                * fail.take(half_line(&eta2, s2, &[x1], limit, GENERAL_TOL[2]).map(|r| r.0))
        };
        match half_line(&eta1, s1, &[s2], limit, GENERAL_TOL[1]) {
            Ok((v, _, r)) => {
                let mut g = reach.lock().unwrap();
                *g = g.max(r);
                v
            }
            Err(e) => fail.take(Err(e)),
        }
    };
    let half = 0.5 * t;
    // tau = half v^(1/(1+w)) absorbs the tau^w endpoint behaviour on each side
    let left = |v: f64| {
        let k = 1.0 / (1.0 + w_left);
        let tau = half * v.powf(k);
        if tau <= 0.0 {
            return 0.0;
        }
        at(tau) * half * k * v.powf(k - 1.0)
    };
    let right = |v: f64| {
        let k = 1.0 / (1.0 + w_right);
        let gap = half * v.powf(k);
        if gap <= 0.0 {
            return 0.0;
        }
        at(t - gap) * half * k * v.powf(k - 1.0)
    };
    let mut pts = vec![0.0, 1.0 / 64.0, 1.0 / 16.0, 0.25, 0.5, 1.0];
    if let Some(xi) = limit {
        // where the kernel frequency scale of the gap crosses the cutoff
        let tau_star = 1.0 / (ctx.wc * xi.powf(ctx.alpha / ctx.beta));
        let v_star = (tau_star / half).powf(1.0 + w_left);
        pts.extend(
            (-3..=3)
                .map(|k| v_star * 4f64.powi(k))
                .filter(|&v| v > 0.0 && v < 1.0),
        );
        pts.sort_by(f64::total_cmp);
    }
    let opts = QuadOptions {
        rel_tol: GENERAL_TOL[0],
        abs_tol: 0.0,
        max_intervals: 400,
    };
    let l = integrate_panels_par(&left, &pts, &opts);
    let r = integrate_panels_par(&right, &[0.0, 1.0 / 16.0, 0.25, 1.0], &opts);
    let reach = *reach.lock().unwrap();
    let (l, r) = fail.finish((l, r))?;
    if !(l.converged && r.converged) && (l.abs_err + r.abs_err) > 1e-5 * (l.value + r.value) {
        return Err(Error::NonConvergence(format!(
            "time quadrature stalled at abs_err {:e}",
            l.abs_err + r.abs_err
        )));
    }
    let k = 2.0 * ctx.pre * ctx.pre;
    Ok((k * (l.value + r.value), k * (l.abs_err + r.abs_err), reach))
}

/// Pareto tail index matched to the decay `|eta|^(-1-eps)` of the integrand in one frequency.
pub(crate) fn pareto_eps(ctx: &Ctx, last: bool) -> f64 {
    let d = ctx.alpha * ((2.0 * ctx.b - 1.0) / ctx.beta).min(2.0);
    let growth = if last { ctx.h } else { 2.0 * ctx.h };
    (d - growth - 1.0).clamp(0.05, 2.0)
}

fn qmc_norm(
    ctx: &Ctx,
    n: usize,
    t: f64,
    limit: Option<f64>,
    opts: &QmcOptions,
) -> Result<ChaosNormResult> {
    let scale = (2.0 / (ctx.nu * t.powf(ctx.beta))).powf(1.0 / ctx.alpha);
    let samplers: Vec<ParetoLine> = (0..n)
        .map(|j| ParetoLine {
            scale,
            eps: pareto_eps(ctx, j + 1 == n),
        })
        .collect();
    let exponential = ctx.exponential();
    let dims = if exponential { n } else { 2 * n };
    let pre_n = ctx.pre.powi(n as i32);
    let b = ctx.b;
    let (mean, se) = qmc_integrate(dims, opts, |u| {
        let mut eta = [0.0; 4];
        let mut weight = pre_n;
        let mut prev = 0.0;
        for j in 0..n {
            let (x, pdf) = samplers[j].sample(u[j]);
            if limit.is_some_and(|l| x.abs() > l) {
                return 0.0;
            }
            eta[j] = x;
            weight *= (x - prev).abs().powf(ctx.h) / pdf;
            prev = x;
        }
        if exponential {
            let mut rates = [0.0; 4];
            for j in 0..n {
                rates[j] = ctx.nu * eta[j].abs().powf(ctx.alpha);
            }
            return weight * ctx.mu0 * ctx.mu0 * simplex_exp_integral(t, &rates[..n]);
        }
        // gap tau_j drawn from |F Y(., eta_j)|^2 restricted to [0, t]
        let mut used = 0.0;
        for j in 0..n {
            let om = ctx.omega(eta[j]);
            weight *= ctx.shape.moment(0, om, t);
            let v = u[n + j];
            let tau = if om * t > 0.0 {
                ctx.shape.phi0_inverse(v * ctx.shape.phi(0, om * t)) / om
            } else {
                t * v.powf(1.0 / (2.0 * b - 1.0))
            };
            used += tau;
        }
        if used >= t {
            return 0.0;
        }
        let j = ctx.j0(t - used);
        weight * j * j
    });
    Ok(ChaosNormResult {
        n,
        value: mean,
        abs_err: se,
        cutoff: limit.unwrap_or(f64::INFINITY),
        method: ChaosMethod::MonteCarloQuadrature,
    })
}

/// Values of a truncated norm under repeated doubling of the frequency cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffStudy {
    pub cutoffs: Vec<f64>,
    pub values: Vec<f64>,
    /// `values[k+1] / values[k]`.
    pub ratios: Vec<f64>,
    /// Every doubling raised the value by more than 5%.
    pub divergent: bool,
}

pub fn cutoff_doubling(
    p: &ModelParams,
    n: usize,
    t: f64,
    first: f64,
    doublings: usize,
) -> Result<CutoffStudy> {
    if doublings == 0 {
        return domain("need at least one doubling");
    }
    let cutoffs: Vec<f64> = (0..=doublings)
        .map(|k| first * 2f64.powi(k as i32))
        .collect();
    let values = cutoffs
        .iter()
        .map(|&c| chaos_norm_white_truncated(p, n, t, c).map(|r| r.value))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    let divergent = ratios.iter().all(|&r| r > 1.05);
    Ok(CutoffStudy {
        cutoffs,
        values,
        ratios,
        divergent,
    })
}
