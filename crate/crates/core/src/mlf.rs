//! Two-parameter Mittag-Leffler function `E_{a,b}(z) = sum_k z^k / Gamma(a k + b)` on the real line.
//!
//! Small arguments use the power series, first in compensated `f64` and, when the
//! alternating cancellation is too large for the requested tolerance, in MPFR
//! arithmetic. Large negative arguments use the asymptotic expansion truncated at
//! its smallest term. The switch is decided on `|zeta| = |z|^(1/a)`, the quantity
//! that controls both the series cancellation (`~ e^|zeta|`) and the asymptotic
//! remainder (`~ e^-|zeta|`).
//!
//! All error estimates in [`MLResult`] are absolute.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{cos_pi, ln_gamma, reciprocal_gamma, sin_pi};

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLQuery {
    pub a: f64,
    pub b: f64,
    pub z: f64,
    pub tol: f64,
}

impl MLQuery {
    pub fn new(a: f64, b: f64, z: f64) -> Self {
        Self {
            a,
            b,
            z,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return domain(format!("a must be positive, got {}", self.a));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return domain(format!("tol must lie in (0,1), got {}", self.tol));
        }
        if !self.b.is_finite() || !self.z.is_finite() {
            return domain("b and z must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Series,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLResult {
    pub value: f64,
    pub method: Method,
    pub terms_used: usize,
    /// Absolute error bound estimate.
    pub err_estimate: f64,
}

/// Switching thresholds, all measured in `|zeta| = |z|^(1/a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlConfig {
    /// Series below, asymptotic above.
    pub crossover: f64,
    /// Both methods are evaluated and compared on `[crossover, crossover * overlap)`.
    pub overlap: f64,
    /// Largest `|zeta|` for which the series is attempted.
    pub series_radius: f64,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            crossover: 30.0,
            overlap: 1.25,
            series_radius: 60.0,
        }
    }
}

/// Evaluator for fixed `(a, b)` with cached series coefficients.
#[derive(Debug)]
pub struct MittagLeffler {
    a: f64,
    b: f64,
    cfg: MlConfig,
    coef: Vec<f64>,
    mp: OnceLock<MpTable>,
}

#[derive(Debug)]
struct MpTable {
    prec: u32,
    coef: Vec<Float>,
}

/// Pieces of the asymptotic evaluation at one argument.
#[derive(Debug, Clone, Copy)]
struct Asym {
    value: f64,
    err: f64,
    /// Sum of magnitudes of the contributions, used as the comparison scale.
    scale: f64,
    terms: usize,
}

impl MittagLeffler {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        Self::with_config(a, b, MlConfig::default())
    }

    pub fn with_config(a: f64, b: f64, cfg: MlConfig) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
            return domain(format!("Mittag-Leffler parameters a={a}, b={b} invalid"));
        }
        let ln_r = cfg.series_radius.ln();
        let mut coef = Vec::new();
        let mut k = 0usize;
        loop {
            let arg = a * k as f64 + b;
            coef.push(reciprocal_gamma(arg));
            // stop once |z|^k / Gamma(ak+b) at the series radius is far below e^-|zeta|
            if arg > 2.0 && a * k as f64 * ln_r - ln_gamma(arg) < -110.0 {
                break;
            }
            k += 1;
        }
        Ok(Self {
            a,
            b,
            cfg,
            coef,
            mp: OnceLock::new(),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn config(&self) -> &MlConfig {
        &self.cfg
    }

    /// `|z|^(1/a)`.
    pub fn zeta(&self, z: f64) -> f64 {
        z.abs().powf(1.0 / self.a)
    }

    fn mp_table(&self) -> &MpTable {
        self.mp.get_or_init(|| {
            let prec = (self.cfg.series_radius * std::f64::consts::LOG2_E).ceil() as u32 + 120;
            let coef = (0..self.coef.len())
                .map(|k| {
                    let mut arg = Float::with_val(prec, self.a);
                    arg *= k as u32;
                    arg += self.b;
                    if arg.is_integer() && arg <= 0 {
                        Float::with_val(prec, 0)
                    } else {
                        arg.gamma().recip()
                    }
                })
                .collect();
            MpTable { prec, coef }
        })
    }

    /// Power series. Fails with `NonConvergence` beyond the configured radius.
    pub fn series(&self, z: f64, tol: f64) -> Result<MLResult> {
        if z == 0.0 {
            return Ok(MLResult {
                value: self.coef[0],
                method: Method::Series,
                terms_used: 1,
                err_estimate: 0.0,
            });
        }
        let zeta = self.zeta(z);
        if zeta > self.cfg.series_radius {
            return Err(Error::NonConvergence(format!(
                "|z|^(1/a) = {zeta:.3} exceeds the series radius {} for E_{{{},{}}}",
                self.cfg.series_radius, self.a, self.b
            )));
        }
        let fast = self.series_f64(z);
        if fast.err_estimate <= tol * fast.value.abs() || z > 0.0 {
            return Ok(fast);
        }
        Ok(self.series_mp(z))
    }

    fn series_f64(&self, z: f64) -> MLResult {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut abs_sum = 0.0f64;
        let mut zk = 1.0f64;
        let mut used = 0;
        let mut tail = 0.0;
        let zeta = self.zeta(z);
        for (k, &c) in self.coef.iter().enumerate() {
            let t = zk * c;
            let s = sum + t;
            comp += if sum.abs() >= t.abs() {
                (sum - s) + t
            } else {
                (t - s) + sum
            };
            sum = s;
            abs_sum += t.abs();
            used = k + 1;
            zk *= z;
            let past_peak = self.a * k as f64 + self.b > zeta + 1.0;
            if past_peak && t.abs() <= 1e-18 * (sum + comp).abs() {
                let next = (self.coef.get(k + 1).copied().unwrap_or(0.0) * zk).abs();
                tail = 2.0 * next;
                break;
            }
        }
        let value = sum + comp;
        MLResult {
            value,
            method: Method::Series,
            terms_used: used,
            err_estimate: 8.0 * f64::EPSILON * abs_sum + tail,
        }
    }

    fn series_mp(&self, z: f64) -> MLResult {
        let table = self.mp_table();
        let prec = table.prec;
        let zf = Float::with_val(prec, z);
        let mut zk = Float::with_val(prec, 1);
        let mut acc = Float::with_val(prec, 0);
        let mut term = Float::with_val(prec, 0);
        let mut abs_sum = 0.0f64;
        let mut used = 0;
        let zeta = self.zeta(z);
        for (k, c) in table.coef.iter().enumerate() {
            term.assign(&zk * c);
            acc += &term;
            let t = term.to_f64().abs();
            abs_sum += t;
            used = k + 1;
            zk *= &zf;
            let past_peak = self.a * k as f64 + self.b > zeta + 1.0;
            if past_peak && t <= 1e-34 * acc.to_f64().abs() {
                break;
            }
        }
        let value = acc.to_f64();
        let err = 0.5 * f64::EPSILON * value.abs() + abs_sum * 2f64.powi(8 - prec as i32);
        MLResult {
            value,
            method: Method::Series,
            terms_used: used,
            err_estimate: err,
        }
    }

    /// Bound on the magnitude of the k-th algebraic asymptotic term `|1/Gamma(b-ak)| / x^k`.
    fn envelope(&self, k: usize, ln_x: f64) -> f64 {
        let arg = self.a * k as f64 + 1.0 - self.b;
        if arg <= 0.0 && arg == arg.floor() {
            (reciprocal_gamma(self.b - self.a * k as f64).abs().ln() - k as f64 * ln_x).exp()
        } else {
            (ln_gamma(arg) - PI.ln() - k as f64 * ln_x).exp()
        }
    }

    /// Exponentially small or oscillating residue contribution for `1 <= a <= 2`.
    fn residue_part(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        if a < 1.0 {
            return 0.0;
        }
        if a == 1.0 {
            return x.powf(1.0 - b) * cos_pi(1.0 - b) * (-x).exp();
        }
        if a == 2.0 {
            let s = x.sqrt();
            let c = cos_pi(0.5 * (1.0 - b));
            let sn = sin_pi(0.5 * (1.0 - b));
            return x.powf(0.5 * (1.0 - b)) * (s.cos() * c - s.sin() * sn);
        }
        let r = x.powf(1.0 / a);
        let ln_amp = (1.0 - b) * x.ln() / a + r * (PI / a).cos();
        let phase = r * (PI / a).sin() + (1.0 - b) * PI / a;
        (2.0 / a) * ln_amp.exp() * phase.cos()
    }

    fn residue_amplitude(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        if a < 1.0 {
            return 0.0;
        }
        let w = if a == 1.0 { 1.0 } else { 2.0 / a };
        let ln_amp = (1.0 - b) * x.ln() / a + x.powf(1.0 / a) * (PI / a).cos();
        w * ln_amp.exp()
    }

    fn asym_fixed(&self, x: f64, n_terms: usize) -> Asym {
        let z = -x;
        let mut sum = 0.0;
        let mut scale = 0.0;
        let mut zk = 1.0;
        for k in 1..=n_terms {
            zk *= z;
            let t = -reciprocal_gamma(self.b - self.a * k as f64) / zk;
            sum += t;
            scale += t.abs();
        }
        let res = self.residue_part(x);
        let amp = self.residue_amplitude(x);
        let err = self.envelope(n_terms + 1, x.ln());
        Asym {
            value: sum + res,
            err,
            scale: scale + amp,
            terms: n_terms,
        }
    }

    /// Number of algebraic asymptotic terms minimising the truncation envelope at `z = -x`.
    pub fn optimal_terms(&self, x: f64) -> usize {
        let ln_x = x.ln();
        let amp = self.residue_amplitude(x);
        let k_max = (2.0 * x.powf(1.0 / self.a) / self.a) as usize + 8;
        let mut n = 0;
        let mut prev = f64::INFINITY;
        let mut leading = 0.0f64;
        for k in 1..=k_max.min(20_000) {
            let e = self.envelope(k, ln_x);
            if k == 1 {
                leading = e;
            }
            // Gamma(ak+1-b) is only log-convex once its argument exceeds ~1.5
            let settled = self.a * k as f64 + 1.0 - self.b > 1.5;
            if settled && e > prev {
                break;
            }
            n = k;
            if settled {
                prev = e;
            }
            if settled && e < 1e-3 * f64::EPSILON * (leading + amp) {
                break;
            }
        }
        n
    }

    /// Coefficient `C_k` of the remainder bound `C_k / x^k` after `k - 1` algebraic terms.
    pub fn envelope_coefficient(&self, k: usize) -> f64 {
        let arg = self.a * k as f64 + 1.0 - self.b;
        let refl = ln_gamma(arg).exp() / PI;
        refl.max(reciprocal_gamma(self.b - self.a * k as f64).abs())
    }

    fn asym_optimal(&self, x: f64) -> Asym {
        let n = self.optimal_terms(x);
        let mut r = self.asym_fixed(x, n);
        r.err += 4.0 * f64::EPSILON * r.scale;
        r
    }

    /// Asymptotic expansion with a fixed number of algebraic terms (`z < 0`, `0 < a <= 2`).
    pub fn asymptotic(&self, z: f64, n_terms: usize) -> Result<MLResult> {
        if self.a > 2.0 {
            return domain(format!("asymptotic expansion needs a <= 2, got {}", self.a));
        }
        if !(z < 0.0) {
            return domain(format!("asymptotic expansion needs z < 0, got {z}"));
        }
        let r = self.asym_fixed(-z, n_terms);
        Ok(MLResult {
            value: r.value,
            method: Method::Asymptotic,
            terms_used: r.terms,
            err_estimate: r.err,
        })
    }

    /// Asymptotic expansion truncated at its smallest term.
    pub fn asymptotic_optimal(&self, z: f64) -> Result<MLResult> {
        if self.a > 2.0 || !(z < 0.0) {
            return domain("optimal asymptotic expansion needs a <= 2 and z < 0");
        }
        let r = self.asym_optimal(-z);
        Ok(MLResult {
            value: r.value,
            method: Method::Asymptotic,
            terms_used: r.terms,
            err_estimate: r.err,
        })
    }

    /// Dispatching evaluation.
    pub fn eval(&self, z: f64, tol: f64) -> Result<MLResult> {
        if self.a > 2.0 {
            return domain(format!(
                "E_{{a,b}} is supported for 0 < a <= 2, got a = {}",
                self.a
            ));
        }
        if z >= 0.0 {
            return self.series(z, tol);
        }
        let zeta = self.zeta(z);
        let zc = self.cfg.crossover;
        if zeta < zc {
            return self.series(z, tol);
        }
        let asym = self.asym_optimal(-z);
        let asym_res = MLResult {
            value: asym.value,
            method: Method::Asymptotic,
            terms_used: asym.terms,
            err_estimate: asym.err,
        };
        let scale = asym.scale.max(asym.value.abs());
        if zeta < zc * self.cfg.overlap && zeta <= self.cfg.series_radius {
            let ser = self.series(z, tol)?;
            if asym.err <= tol * scale && (ser.value - asym.value).abs() > 10.0 * tol * scale {
                return Err(Error::NonConvergence(format!(
                    "series {} and asymptotic {} disagree for E_{{{},{}}}({z})",
                    ser.value, asym.value, self.a, self.b
                )));
            }
            return Ok(ser);
        }
        if asym.err > tol * scale && zeta <= self.cfg.series_radius {
            return self.series(z, tol);
        }
        Ok(asym_res)
    }

    /// Shorthand for `eval(z, DEFAULT_TOL)` returning the value.
    pub fn value(&self, z: f64) -> Result<f64> {
        self.eval(z, DEFAULT_TOL).map(|r| r.value)
    }

    /// Agreement check used by the overlap invariant: `(series, asymptotic, scale)`.
    pub fn overlap_pair(&self, z: f64, tol: f64) -> Result<(f64, f64, f64)> {
        let ser = self.series(z, tol)?;
        let asym = self.asym_optimal(-z);
        Ok((ser.value, asym.value, asym.scale.max(asym.value.abs())))
    }
}

/// `1/Gamma(x)`, zero at the poles.
pub fn reciprocal_gamma_fn(x: f64) -> f64 {
    reciprocal_gamma(x)
}

pub fn ml_series(q: MLQuery) -> Result<MLResult> {
    q.validate()?;
    MittagLeffler::new(q.a, q.b)?.series(q.z, q.tol)
}

pub fn ml_asymptotic(a: f64, b: f64, z: f64, n_terms: usize) -> Result<MLResult> {
    if n_terms == 0 {
        return domain("n_terms must be positive");
    }
    MittagLeffler::new(a, b)?.asymptotic(z, n_terms)
}

pub fn ml_eval(q: MLQuery) -> Result<MLResult> {
    q.validate()?;
    if q.a > 2.0 {
        return domain(format!("ml_eval supports 0 < a <= 2, got a = {}", q.a));
    }
    MittagLeffler::new(q.a, q.b)?.eval(q.z, q.tol)
}

/// `z^(b-n-1) E_{a,b-n}(lam z^a)`, the n-th derivative of `z^(b-1) E_{a,b}(lam z^a)`.
pub fn ml_weighted_derivative(a: f64, b: f64, lam: f64, z: f64, n: u32) -> Result<f64> {
    if !(z > 0.0) {
        return domain(format!("weighted derivative needs z > 0, got {z}"));
    }
    if n == 0 {
        return domain("derivative order must be positive");
    }
    let bn = b - n as f64;
    let e = ml_eval(MLQuery::new(a, bn, lam * z.powf(a)))?;
    Ok(z.powf(bn - 1.0) * e.value)
}
