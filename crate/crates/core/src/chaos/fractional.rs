//! Norms for noise fractional in time (`1/2 < H0 < 1`).
//!
//! The time covariance `H0 (2H0-1) |s-r|^(2H0-2)` couples two copies of the kernel
//! product; for `n = 2` both the same-order and the swapped pairing of the time points
//! contribute.

use super::qmc::{integrate as qmc_integrate, ParetoLine, QmcOptions};
use super::white::{pareto_eps, Ctx, Failure};
use super::{ChaosMethod, ChaosNormResult};
use crate::error::{domain, Error, Result};
use crate::kernels::{cross_energy, ModelParams};
use crate::quad::{integrate_panels, QuadOptions};
use crate::regimes::check_existence;

fn check_args(p: &ModelParams, n: usize, t: f64) -> Result<()> {
    if !(p.h0() > 0.5 && p.h0() < 1.0) {
        return domain(format!(
            "fractional norms need 1/2 < H0 < 1, got {}",
            p.h0()
        ));
    }
    if !(1..=2).contains(&n) {
        return domain(format!("order must be 1 or 2, got {n}"));
    }
    if !(t > 0.0) {
        return domain(format!("t must be positive, got {t}"));
    }
    if !check_existence(p).0 {
        return Err(Error::DivergentIntegral(
            "the existence condition fails".into(),
        ));
    }
    Ok(())
}

/// `n! |f~_n|^2` for `n = 1` (nested quadrature) and `n = 2` (quasi-Monte Carlo).
pub fn chaos_norm_fractional(p: &ModelParams, n: usize, t: f64) -> Result<ChaosNormResult> {
    check_args(p, n, t)?;
    if n == 1 {
        norm1(p, t)
    } else {
        qmc_norm(p, n, t, &QmcOptions::default())
    }
}

/// Quasi-Monte Carlo evaluation over frequencies, ordered times and the covariance offsets.
pub fn chaos_norm_fractional_qmc(
    p: &ModelParams,
    n: usize,
    t: f64,
    opts: &QmcOptions,
) -> Result<ChaosNormResult> {
    check_args(p, n, t)?;
    qmc_norm(p, n, t, opts)
}

/// With `u = t - s`, `v = t - r` and `v = rho u` the spatial integral scales as
/// `u^e chi(rho)`, so the norm reduces to two moments of `chi` against `(1-rho)^(2H0-2)`.
fn norm1(p: &ModelParams, t: f64) -> Result<ChaosNormResult> {
    let (al, be, b, h, h0) = (p.alpha(), p.beta(), p.b(), p.spectral_exponent(), p.h0());
    let e = 2.0 * b - 2.0 - be * (h + 1.0) / al;
    let c = 2.0 * h0 + e;
    if c <= 0.0 {
        return Err(Error::DivergentIntegral(format!(
            "time exponent {c} is not integrable"
        )));
    }
    let fail = Failure::new();
    let chi = |rho: f64| fail.take(cross_energy(p, 1.0, rho, h).map(|r| r.value));
    let w0 = (b - 1.0 - be * (h + 1.0 - al).max(0.0) / al).clamp(-0.999, 0.0);
    let g = 2.0 * h0 - 1.0;
    let opts = QuadOptions {
        rel_tol: 1e-9,
        abs_tol: 0.0,
        max_intervals: 400,
    };
    let mut m = [0.0; 2];
    let mut err = 0.0;
    for (k, slot) in m.iter_mut().enumerate() {
        let weight = |rho: f64| if k == 0 { 1.0 } else { rho };
        // rho = v^(1/(1+w0)) / 2 near the origin
        let left = |v: f64| {
            let q = 1.0 / (1.0 + w0);
            let rho = 0.5 * v.powf(q);
            if rho <= 0.0 {
                return 0.0;
            }
            weight(rho) * (1.0 - rho).powf(2.0 * h0 - 2.0) * chi(rho) * 0.5 * q * v.powf(q - 1.0)
        };
        // 1 - rho = v^(1/g) / 2 absorbs the covariance singularity
        let right = |v: f64| {
            let rho = 1.0 - 0.5 * v.powf(1.0 / g);
            weight(rho) * chi(rho) * 0.5f64.powf(g) / g
        };
        let l = integrate_panels(&left, &[0.0, 0.25, 1.0], &opts);
        let r = integrate_panels(&right, &[0.0, 0.25, 1.0], &opts);
        *slot = l.value + r.value;
        err += l.abs_err + r.abs_err;
    }
    let at_one = cross_energy(p, 1.0, 1.0, h)?;
    fail.finish(())?;
    let mu1 = if be > 1.0 { p.mu1() } else { 0.0 };
    let mm = p.mu0() + mu1 * t;
    let poly = mm * mm * m[0] * t.powf(c) / c
        - mm * mu1 * (m[0] + m[1]) * t.powf(c + 1.0) / (c + 1.0)
        + mu1 * mu1 * m[1] * t.powf(c + 2.0) / (c + 2.0);
    let k = p.lambda().powi(2) * p.c_h() * h0 * (2.0 * h0 - 1.0) * 2.0;
    let scale_err = err / (m[0] + m[1]).max(f64::MIN_POSITIVE);
    Ok(ChaosNormResult {
        n: 1,
        value: k * poly,
        abs_err: (k * poly).abs() * scale_err,
        cutoff: at_one.cutoff * t.powf(-be / al),
        method: ChaosMethod::Quadrature,
    })
}

fn qmc_norm(p: &ModelParams, n: usize, t: f64, opts: &QmcOptions) -> Result<ChaosNormResult> {
    let ctx = Ctx::new(p)?;
    let h0 = p.h0();
    let g = 2.0 * h0 - 1.0;
    let scale = (2.0 / (ctx.nu * t.powf(ctx.beta))).powf(1.0 / ctx.alpha);
    let samplers: Vec<ParetoLine> = (0..n)
        .map(|j| ParetoLine {
            scale,
            eps: pareto_eps(&ctx, j + 1 == n),
        })
        .collect();
    let fy = |tau: f64, eta: f64| {
        let e = ctx.shape.e(ctx.omega(eta) * tau);
        if ctx.b == 1.0 {
            e
        } else {
            tau.powf(ctx.b - 1.0) * e
        }
    };
    // |delta| = t u^(1/g) has density proportional to |delta|^(2H0-2) on [-t, t]
    let offset = |u: f64| {
        let (side, v) = if u < 0.5 {
            (-1.0, 2.0 * u)
        } else {
            (1.0, 2.0 * u - 1.0)
        };
        side * t * v.powf(1.0 / g)
    };
    let pair_weight = 2.0 * h0 * t.powf(g);
    let pre = ctx.pre.powi(n as i32);
    let (mean, se) = qmc_integrate(3 * n, opts, |u| {
        let mut eta = [0.0; 2];
        let mut w = pre;
        let mut prev = 0.0;
        for j in 0..n {
            let (x, pdf) = samplers[j].sample(u[j]);
            eta[j] = x;
            w *= (x - prev).abs().powf(ctx.h) / pdf;
            prev = x;
        }
        if n == 1 {
            let s = t * u[1];
            let r = s + offset(u[2]);
            if !(0.0..t).contains(&r) {
                return 0.0;
            }
            let k = fy(t - s, eta[0]) * fy(t - r, eta[0]) * ctx.j0(s) * ctx.j0(r);
            return w * t * pair_weight * k;
        }
        let (a, b) = (t * u[2], t * u[3]);
        let (s1, s2) = if a < b { (a, b) } else { (b, a) };
        let (r1, r2) = (s1 + offset(u[4]), s2 + offset(u[5]));
        if !((0.0..t).contains(&r1) && (0.0..t).contains(&r2)) {
            return 0.0;
        }
        let first = fy(s2 - s1, eta[0]) * fy(t - s2, eta[1]) * ctx.j0(s1);
        let second = if r1 < r2 {
            fy(r2 - r1, eta[0]) * fy(t - r2, eta[1]) * ctx.j0(r1)
        } else {
            fy(r1 - r2, eta[1] - eta[0]) * fy(t - r1, eta[1]) * ctx.j0(r2)
        };
        w * 0.5 * t * t * pair_weight * pair_weight * first * second
    });
    Ok(ChaosNormResult {
        n,
        value: mean,
        abs_err: se,
        cutoff: f64::INFINITY,
        method: ChaosMethod::MonteCarloQuadrature,
    })
}
