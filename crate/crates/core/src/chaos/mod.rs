//! Wiener-chaos coefficient norms `n! |f~_n|^2`, truncated second moments and the
//! closed-form identities behind the moment bounds.
//!
//! Norms are computed in the frequency parameterisation `eta_j = xi_1 + ... + xi_j`,
//! where the `n`-th norm is
//!
//! ```text
//! lambda^2n c_H^n int_{T_n(t)} J0(s_1)^2 int prod_j |F Y(s_{j+1}-s_j, eta_j)|^2 |eta_j - eta_{j-1}|^(1-2H) deta ds
//! ```
//!
//! for white time noise. The solution is stationary in space, so `x` never appears.

mod fractional;
mod qmc;
pub(crate) mod shape;
mod white;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{j0, ModelParams};
use crate::mlf::MittagLeffler;
use crate::quad::{geometric_points, integrate_panels, QuadOptions};
use crate::regimes::{check_existence, theta};
use crate::special::{cos_pi, gamma, ln_gamma};
use crate::tail::Term;

pub use fractional::{chaos_norm_fractional, chaos_norm_fractional_qmc};
pub use qmc::QmcOptions;
pub use white::{
    chaos_norm_qmc, chaos_norm_white, chaos_norm_white_truncated, chaos_norm_white_with,
    cutoff_doubling, simplex_exp_integral, CutoffStudy, WhiteOptions,
};

/// Exponents of one term in the expansion of `prod_j (|eta_j|^h + |eta_{j-1}|^h)`, `h = 1-2H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndex {
    pub entries: Vec<f64>,
}

/// The `2^(n-1)` multi-indices with `a_1 in {h, 2h}`, `a_n in {0, h}` and `|a| = n h`.
pub fn multi_indices(n: usize, h: f64) -> Vec<MultiIndex> {
    if n == 0 {
        return vec![MultiIndex { entries: vec![] }];
    }
    // bit j-2 set: factor j >= 2 contributes |eta_j|^h (factor 1 always does, eta_0 = 0)
    (0..1usize << (n - 1))
        .map(|mask| {
            let picks_own = |j: usize| j == 1 || (j <= n && mask >> (j - 2) & 1 == 1);
            let entries = (1..=n)
                .map(|j| {
                    let own = picks_own(j) as u8;
                    let next = (j < n && !picks_own(j + 1)) as u8;
                    h * (own + next) as f64
                })
                .collect();
            MultiIndex { entries }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChaosMethod {
    Quadrature,
    MonteCarloQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosNormResult {
    pub n: usize,
    /// `n! |f~_n|^2`.
    pub value: f64,
    /// Quadrature error estimate, or the standard error for quasi-Monte Carlo.
    pub abs_err: f64,
    /// Frequency where the integral was truncated or closed analytically; infinite when none.
    pub cutoff: f64,
    pub method: ChaosMethod,
}

impl ChaosNormResult {
    /// The `n = 0` term `J0(t)^2`.
    pub fn zeroth(p: &ModelParams, t: f64) -> Self {
        let v = j0(p, t);
        Self {
            n: 0,
            value: v * v,
            abs_err: 0.0,
            cutoff: 0.0,
            method: ChaosMethod::Quadrature,
        }
    }
}

/// `int_{0<s_1<...<s_n<t} prod_j (s_{j+1} - s_j)^(b_j) ds` with `s_{n+1} = t`.
pub fn dirichlet_simplex_integral(t: f64, b: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("t must be positive, got {t}"));
    }
    if let Some(bad) = b.iter().find(|&&x| !(x > -1.0)) {
        return domain(format!("exponents must exceed -1, got {bad}"));
    }
    let n = b.len() as f64;
    let sum: f64 = b.iter().sum();
    let ln = b.iter().map(|&x| ln_gamma(x + 1.0)).sum::<f64>() - ln_gamma(sum + n + 1.0)
        + (sum + n) * t.ln();
    Ok(ln.exp())
}

/// Large-`n` equivalent of `Gamma(a n + b) / (n!)^a`.
pub fn gamma_ratio_asymptotic(a: f64, b: f64, n: usize) -> f64 {
    let nf = n as f64;
    ((0.5 - 0.5 * a) * (2.0 * std::f64::consts::PI).ln()
        + (a * nf + b - 0.5) * a.ln()
        + (b - 0.5 - 0.5 * a) * nf.ln())
    .exp()
}

fn ln_gamma_ratio(a: f64, b: f64, n: usize) -> f64 {
    ln_gamma(a * n as f64 + b) - a * ln_gamma(n as f64 + 1.0)
}

/// Constants `(c, C)` with `c^n (n!)^a <= Gamma(a n + b) <= C^n (n!)^a` for `1 <= n <= n_max`.
///
/// The ratio grows like `(a^a)^n` times a power of `n`; the constants are the extreme
/// per-step rates over the range, compared against the limiting rate `a^a`.
pub fn gamma_factorial_bounds(a: f64, b: f64, n_max: usize) -> Result<(f64, f64)> {
    if !(a > 0.0) || !b.is_finite() {
        return domain(format!("need a > 0 and finite b, got a={a}, b={b}"));
    }
    if n_max == 0 {
        return domain("n_max must be positive");
    }
    if let Some(n) = (1..=n_max).find(|&n| a * n as f64 + b <= 0.0) {
        return domain(format!("a n + b <= 0 at n = {n}"));
    }
    let limit = a * a.ln();
    let rates: Vec<f64> = (1..=n_max)
        .map(|n| ln_gamma_ratio(a, b, n) / n as f64)
        .collect();
    let lo = rates.iter().cloned().fold(limit, f64::min);
    let hi = rates.iter().cloned().fold(limit, f64::max);
    let safety = 1e-12 + 8.0 * f64::EPSILON * (lo.abs() + hi.abs());
    let (c, cc) = ((lo - safety).exp(), (hi + safety).exp());
    for n in 1..=n_max {
        let l = ln_gamma_ratio(a, b, n);
        let nf = n as f64;
        if l < nf * c.ln() || l > nf * cc.ln() {
            return Err(Error::NonConvergence(format!(
                "gamma bound construction failed at n = {n}"
            )));
        }
    }
    Ok((c, cc))
}

/// Constants of `c1 exp(c2 x^(1/a)) <= sum_n x^n / (n!)^a <= upper1 exp(upper2 x^(1/a))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumBounds {
    pub c1: f64,
    pub c2: f64,
    pub upper1: f64,
    pub upper2: f64,
}

/// Writes the terms as `y_n^a` with `y_n = (x^(1/a))^n / n!` and compares with `sum y_n`
/// through Hölder's inequality against a geometric weight of ratio 2.
pub fn estimate_sum_constants(a: f64) -> Result<SumBounds> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("need a > 0, got {a}"));
    }
    Ok(if a == 1.0 {
        SumBounds {
            c1: 1.0,
            c2: 1.0,
            upper1: 1.0,
            upper2: 1.0,
        }
    } else if a < 1.0 {
        let upper1 = (1.0 - 2f64.powf(-a / (1.0 - a))).powf(-(1.0 - a));
        SumBounds {
            c1: 1.0,
            c2: a,
            upper1,
            upper2: 2.0 * a,
        }
    } else {
        let c1 = (1.0 - 2f64.powf(-a / (a - 1.0))).powf(a - 1.0);
        SumBounds {
            c1,
            c2: 0.5 * a,
            upper1: 1.0,
            upper2: a,
        }
    })
}

/// `sum_{n>=0} x^n / (n!)^a`, summed in log space.
pub fn factorial_power_series(x: f64, a: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let lx = x.ln();
    let mut terms = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    for n in 0..1_000_000usize {
        let l = n as f64 * lx - a * ln_gamma(n as f64 + 1.0);
        terms.push(l);
        peak = peak.max(l);
        if n > 2 && l < peak - 50.0 && l < terms[n - 1] {
            break;
        }
    }
    peak.exp() * terms.iter().map(|l| (l - peak).exp()).sum::<f64>()
}

/// `int_0^inf e^-r r^(b-1) E_{beta,b}(-nu/2 eta^alpha r^beta) dr`, checked against `1/(1 + nu/2 eta^alpha)`.
pub fn exp_weighted_ml_integral(p: &ModelParams, eta: f64) -> Result<f64> {
    let limit = (2.0 / p.nu()).powf(1.0 / p.alpha());
    if !(eta > 0.0 && eta < limit) {
        return domain(format!("eta must lie in (0, {limit}), got {eta}"));
    }
    let c = 0.5 * p.nu() * eta.powf(p.alpha());
    let b = p.b();
    let ml = MittagLeffler::new(p.beta(), b)?;
    let value = crate::kernels::guarded(|u| {
        let f = |r: f64| (-r).exp() * r.powf(b - 1.0) * u(ml.value(-c * r.powf(p.beta())));
        // r = v^(1/b) removes the r^(b-1) weight on [0, 1]
        let head = |v: f64| {
            let r = v.powf(1.0 / b);
            (-r).exp() * u(ml.value(-c * r.powf(p.beta()))) / b
        };
        let opts = QuadOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_intervals: 4000,
        };
        let h = integrate_panels(&head, &[0.0, 1.0], &opts);
        let pts: Vec<f64> = (1..=90).map(|k| k as f64).collect();
        let body = integrate_panels(&f, &pts, &opts);
        Ok(h.value + body.value)
    })?;
    let want = 1.0 / (1.0 + c);
    if (value - want).abs() > 1e-6 * want {
        return Err(Error::NonConvergence(format!(
            "quadrature {value} disagrees with 1/(1+c) = {want}"
        )));
    }
    Ok(value)
}

/// `int_R sin^2(sqrt(nu/2) |eta|^(alpha/2)) |eta|^(1-2H-alpha) d eta`, by quadrature.
pub fn wave_sine_integral(p: &ModelParams) -> Result<f64> {
    let (al, h) = (p.alpha(), p.spectral_exponent());
    if !(al > h + 1.0) {
        return Err(Error::DivergentIntegral(format!(
            "need alpha > 2 - 2H, got alpha = {al}"
        )));
    }
    // y = sqrt(nu/2) |eta|^(alpha/2) gives (4/alpha) k0^-s int_0^inf sin^2(y) y^(s-1) dy
    let s = 2.0 / al * (h + 1.0 - al);
    let k0 = (0.5 * p.nu()).sqrt();
    let pi = std::f64::consts::PI;
    let opts = QuadOptions {
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_intervals: 8000,
    };
    let w = s + 1.0;
    let head = |v: f64| {
        let y = pi * v.powf(1.0 / (w + 1.0));
        y.sin().powi(2) * y.powf(s - 1.0) * pi / (w + 1.0) * v.powf(1.0 / (w + 1.0) - 1.0)
    };
    let n_per = 64;
    let h0 = integrate_panels(&head, &[0.0, 0.5, 1.0], &opts);
    let pts: Vec<f64> = (1..=n_per).map(|k| k as f64 * pi).collect();
    let body = integrate_panels(&|y: f64| y.sin().powi(2) * y.powf(s - 1.0), &pts, &opts);
    let y_end = n_per as f64 * pi;
    let terms = [
        Term::power(0.5, s - 1.0),
        Term::new(
            num_complex::Complex64::new(-0.25, 0.0),
            s - 1.0,
            num_complex::Complex64::new(0.0, 2.0),
            1.0,
        ),
        Term::new(
            num_complex::Complex64::new(-0.25, 0.0),
            s - 1.0,
            num_complex::Complex64::new(0.0, -2.0),
            1.0,
        ),
    ];
    let mut tail = 0.0;
    for t in &terms {
        tail += t.tail_integral(y_end)?.0.re;
    }
    Ok(4.0 / al * k0.powf(-s) * (h0.value + body.value + tail))
}

/// Closed-form value of `int_0^inf sin^2(y) y^(s-1) dy` for `-2 < s < 0`.
pub fn sine_power_integral(s: f64) -> f64 {
    -(2f64).powf(-s - 1.0) * gamma(s) * cos_pi(0.5 * s)
}

/// `int_R F Y(r, eta) F Y(s, eta) |eta|^(1-2H) d eta` for the wave equation.
pub fn wave_cross_energy(p: &ModelParams, r: f64, s: f64) -> Result<f64> {
    if !(p.is_wave() && p.gamma() == 0.0) {
        return domain("wave_cross_energy needs beta = 2 and gamma = 0");
    }
    if !check_existence(p).0 {
        return domain("existence condition fails");
    }
    if !(r > 0.0 && s > 0.0) {
        return domain(format!("times must be positive, got {r}, {s}"));
    }
    let k = 2.0 / p.alpha() * (p.alpha() + 2.0 * p.h() - 2.0);
    let sine = wave_sine_integral(p)?;
    Ok(2.0 / p.nu() * ((0.5 * (r + s)).powf(k) - (0.5 * (r - s).abs()).powf(k)) * sine)
}

/// `C^n lambda^2n J0(t)^2 (n!)^(2H0-1) (t^(n(theta+1)) / Gamma(n(theta+1)+1))^(2H0)`.
///
/// Meaningful when the existence condition holds.
pub fn chaos_upper_bound_term(p: &ModelParams, n: usize, t: f64, c_user: f64) -> f64 {
    let j = j0(p, t);
    if n == 0 {
        return j * j;
    }
    let nf = n as f64;
    let a = nf * (theta(p) + 1.0);
    let h0 = p.h0();
    let ln = nf * c_user.ln()
        + 2.0 * nf * p.lambda().abs().ln()
        + 2.0 * j.ln()
        + (2.0 * h0 - 1.0) * ln_gamma(nf + 1.0)
        + 2.0 * h0 * (a * t.ln() - ln_gamma(a + 1.0));
    ln.exp()
}

/// `lambda^2n mu0^2 t^(n(theta+1)) / Gamma(n(theta+1)+1)`, the growth profile of the lower bound.
pub fn lower_bound_shape(p: &ModelParams, n: usize, t: f64) -> f64 {
    let a = n as f64 * (theta(p) + 1.0);
    let ln = 2.0 * n as f64 * p.lambda().abs().ln() + 2.0 * p.mu0().ln() + a * t.ln()
        - ln_gamma(a + 1.0);
    ln.exp()
}

/// `(K1, K2)` with `sum_n chaos_upper_bound_term(n) <= K1 exp(K2 |lambda|^(2/d) t^(2H0(theta+1)/d))`,
/// `d = 2 H0 theta + 1`.
pub fn upper_series_envelope(p: &ModelParams, t: f64, c_user: f64) -> Result<(f64, f64)> {
    if !check_existence(p).0 {
        return domain("existence condition fails");
    }
    let th = theta(p);
    let ag = th + 1.0;
    let h0 = p.h0();
    let d = 2.0 * h0 * th + 1.0;
    // Gamma(ag n + 1) >= cg^n (n!)^ag for every n >= 1
    let (cg, _) = gamma_factorial_bounds(ag, 1.0, 2000)?;
    let cg = cg.min(ag.powf(ag) * (1.0 - 1e-9));
    let sb = estimate_sum_constants(d)?;
    let j = j0(p, t);
    let k1 = j * j * sb.upper1;
    let k2 = sb.upper2 * (c_user * cg.powf(-2.0 * h0)).powf(1.0 / d);
    Ok((k1, k2))
}

/// Rigorous bound on `n! |f~_n|^2` for white time noise from `|x - y|^h <= |x|^h + |y|^h`.
///
/// Each multi-index term factorises into weighted kernel energies
/// `C_{a_j} tau^(e(a_j))` integrated over the simplex in closed form.
pub fn chaos_bound_white(p: &ModelParams, n: usize, t: f64) -> Result<f64> {
    if p.h0() != 0.5 {
        return domain("the explicit bound is for H0 = 1/2");
    }
    if n == 0 {
        let j = j0(p, t);
        return Ok(j * j);
    }
    let h = p.spectral_exponent();
    let (al, be, b) = (p.alpha(), p.beta(), p.b());
    let mut consts = Vec::new();
    for k in 0..3 {
        let a = h * k as f64;
        let c = crate::kernels::c_constant(p, a, b, b).map(|r| r.value);
        consts.push((a, c, 2.0 * b - 2.0 - be * (a + 1.0) / al));
    }
    let mut sum = 0.0;
    for mi in multi_indices(n, h) {
        let mut prod = 1.0;
        let mut exps = Vec::with_capacity(n);
        for &a in &mi.entries {
            let k = (a / h).round() as usize;
            let (_, c, e) = &consts[k];
            prod *= c.clone()?;
            exps.push(*e);
        }
        sum += prod
            * dirichlet_simplex_integral(t, &exps).map_err(|_| {
                Error::DivergentIntegral("a time exponent of the bound is not integrable".into())
            })?;
    }
    let jmax = j0(p, t).max(j0(p, 0.0));
    Ok(p.lambda().powi(2 * n as i32) * p.c_h().powi(n as i32) * jmax * jmax * sum)
}

/// `C` with `chaos_bound_white(n) <= chaos_upper_bound_term(n, C)` for every `n` when `J0` is
/// constant: `2 c_H max_a C_a Gamma(e(a)+1)` over `a in {0, h, 2h}`.
pub fn bound_order_constant(p: &ModelParams) -> Result<f64> {
    if p.h0() != 0.5 {
        return domain("the explicit bound is for H0 = 1/2");
    }
    let h = p.spectral_exponent();
    let (al, be, b) = (p.alpha(), p.beta(), p.b());
    let mut m: f64 = 0.0;
    for k in 0..3 {
        let a = h * k as f64;
        let e = 2.0 * b - 2.0 - be * (a + 1.0) / al;
        if e <= -1.0 {
            return Err(Error::DivergentIntegral(format!(
                "time exponent {e} is not integrable"
            )));
        }
        let c = crate::kernels::c_constant(p, a, b, b)?.value;
        m = m.max(c * gamma(e + 1.0));
    }
    Ok(2.0 * p.c_h() * m)
}

/// Second moment `J0(t)^2 + sum_{n=1}^N n! |f~_n|^2` of the truncated chaos expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    pub value: f64,
    pub abs_err: f64,
    /// Terms `n = 0..=N`.
    pub terms: Vec<ChaosNormResult>,
}

pub fn second_moment_truncated(p: &ModelParams, t: f64, n_max: usize) -> Result<SecondMoment> {
    if n_max > 4 || (p.h0() > 0.5 && n_max > 2) {
        return domain(format!(
            "truncation order {n_max} not available for H0 = {}",
            p.h0()
        ));
    }
    let mut terms = vec![ChaosNormResult::zeroth(p, t)];
    for n in 1..=n_max {
        terms.push(if p.h0() == 0.5 {
            chaos_norm_white(p, n, t)?
        } else {
            chaos_norm_fractional(p, n, t)?
        });
    }
    let value = terms.iter().map(|r| r.value).sum();
    let abs_err = terms.iter().map(|r| r.abs_err).sum();
    Ok(SecondMoment {
        value,
        abs_err,
        terms,
    })
}

/// Piecewise-constant function on cells `[x0 + i dx, x0 + (i+1) dx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFn {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlsCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Sharp one-dimensional Hardy-Littlewood-Sobolev constant for the kernel `|t-s|^(2H-2)`
/// and exponent `1/H` (Lieb's diagonal case).
pub fn hls_sharp_constant(h: f64) -> f64 {
    std::f64::consts::PI.powf(1.5 - 2.0 * h) * gamma(h - 0.5) / gamma(h)
}

/// Both sides of `int int phi(t) phi(s) |t-s|^(2H-2) <= C (int phi^(1/H))^(2H)`.
pub fn hls_check_n1(h: f64, phi: &TabulatedFn, constant: Option<f64>) -> Result<HlsCheck> {
    if !(h > 0.5 && h < 1.0) {
        return domain(format!("H must lie in (1/2, 1), got {h}"));
    }
    if !(phi.dx > 0.0) || phi.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return domain("phi must be nonnegative on a grid with dx > 0");
    }
    let c = constant.unwrap_or_else(|| hls_sharp_constant(h));
    // cell-pair integrals of |t-s|^(2H-2) are second differences of F(x) = |x|^(2H) / (2H(2H-1))
    let big_f = |k: f64| k.abs().powf(2.0 * h) / (2.0 * h * (2.0 * h - 1.0));
    let m = phi.values.len();
    let scale = phi.dx.powf(2.0 * h);
    let kern: Vec<f64> = (0..m)
        .map(|k| scale * (big_f(k as f64 + 1.0) - 2.0 * big_f(k as f64) + big_f(k as f64 - 1.0)))
        .collect();
    let mut lhs = 0.0;
    for (i, &a) in phi.values.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, &b) in phi.values.iter().enumerate() {
            lhs += a * b * kern[i.abs_diff(j)];
        }
    }
    let norm: f64 = phi.values.iter().map(|v| v.powf(1.0 / h)).sum::<f64>() * phi.dx;
    let rhs = c * norm.powf(2.0 * h);
    Ok(HlsCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Breakpoints used by the half-line integrals: `0` then a geometric ladder up to `scale`.
fn head_points(scale: f64, extra: &[f64], limit: Option<f64>) -> Vec<f64> {
    let top = limit.map_or(scale, |l| l.min(scale));
    let mut pts = vec![0.0];
    pts.extend(
        geometric_points(scale / 64.0, scale, 2.0)
            .into_iter()
            .filter(|&x| x < top),
    );
    pts.push(top);
    pts.extend(extra.iter().cloned().filter(|&x| x > 0.0 && x < top));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `int_0^inf f` (or `int_0^limit f`) for a nonnegative `f` with algebraic or faster decay.
///
/// Integrates doubling panels beyond `scale` and closes the integral with the geometric
/// extrapolation of the panel sums once their ratio has settled. Returns
/// `(value, abs_err, last panel end)`.
pub(crate) fn half_line<F: Fn(f64) -> f64>(
    f: &F,
    scale: f64,
    extra: &[f64],
    limit: Option<f64>,
    rel_tol: f64,
) -> Result<(f64, f64, f64)> {
    let opts = QuadOptions {
        rel_tol,
        abs_tol: 0.0,
        max_intervals: 2000,
    };
    let head = integrate_panels(f, &head_points(scale, extra, limit), &opts);
    let mut total = head.value;
    let mut err = head.abs_err;
    let mut x = scale;
    if limit.is_some_and(|l| l <= scale) {
        return Ok((total, err, limit.unwrap()));
    }
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    for _ in 0..600 {
        let x1 = limit.map_or(2.0 * x, |l| (2.0 * x).min(l));
        let mut pts = vec![x];
        pts.extend(extra.iter().cloned().filter(|&e| e > x && e < x1));
        pts.push(x1);
        let r = integrate_panels(f, &pts, &opts);
        total += r.value;
        err += r.abs_err;
        if let Some(l) = limit {
            if x1 >= l {
                return Ok((total, err, l));
            }
        }
        if !total.is_finite() {
            return Err(Error::NonConvergence(
                "half-line integrand produced a non-finite value".into(),
            ));
        }
        if r.value == 0.0 && prev == Some(0.0) {
            return Ok((total, err, x1));
        }
        if let (Some(pv), None) = (prev, limit) {
            if pv > 0.0 {
                let ratio = r.value / pv;
                if (0.0..0.98).contains(&ratio) {
                    let tail = r.value * ratio / (1.0 - ratio);
                    let drift = prev_ratio.map_or(1.0, |q: f64| (ratio - q).abs());
                    let tail_err =
                        r.value * drift / ((1.0 - ratio) * (1.0 - ratio)) + rel_tol * tail;
                    if tail_err <= rel_tol * total.abs() {
                        return Ok((total + tail, err + tail_err, x1));
                    }
                }
                prev_ratio = Some(ratio);
            }
        }
        prev = Some(r.value);
        x = x1;
    }
    Err(Error::NonConvergence(
        "half-line integral did not settle into a power-law tail".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_set() {
        let h = 0.4;
        for n in 1..=6 {
            let set = multi_indices(n, h);
            assert_eq!(set.len(), 1 << (n - 1));
            for mi in &set {
                let s: f64 = mi.entries.iter().sum();
                assert!((s - n as f64 * h).abs() < 1e-12);
                assert!(mi.entries[0] > 0.5 * h);
                assert!(mi.entries[n - 1] < 1.5 * h);
            }
        }
    }

    #[test]
    fn half_line_power_tail() {
        // int_0^inf 1/(1+x)^1.3 = 1/0.3
        let (v, e, _) = half_line(&|x: f64| (1.0 + x).powf(-1.3), 1.0, &[], None, 1e-9).unwrap();
        assert!((v - 1.0 / 0.3).abs() < 1e-7, "{v} {e}");
        let (v, _, _) = half_line(&|x: f64| (-x).exp(), 1.0, &[], Some(3.0), 1e-12).unwrap();
        assert!((v - (1.0 - (-3f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn hls_indicator() {
        let phi = TabulatedFn {
            x0: 0.0,
            dx: 1.0,
            values: vec![1.0],
        };
        let r = hls_check_n1(0.75, &phi, None).unwrap();
        assert!((r.lhs - 8.0 / 3.0).abs() < 1e-14);
        assert!(r.holds);
    }
}
