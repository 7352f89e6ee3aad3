//! Closed-form tails of integrals whose integrand is a finite sum of terms
//! `coef * x^p * exp(f * x^m)` with `Re f <= 0`, as produced by products of
//! Mittag-Leffler asymptotic expansions.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mlf::MittagLeffler;
use crate::quad::{integrate_panels, QuadOptions};
use crate::special::{cos_pi, reciprocal_gamma};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `exp(ln_mag) * phase * x^p * exp(f x^m)`. Magnitudes are kept in log form so that
/// large expansion coefficients paired with tiny powers of `x` never overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub ln_mag: f64,
    pub phase: Complex64,
    pub p: f64,
    pub f: Complex64,
    pub m: f64,
}

impl Term {
    pub fn new(coef: Complex64, p: f64, f: Complex64, m: f64) -> Self {
        let r = coef.norm();
        let phase = if r > 0.0 { coef / r } else { C0 };
        Self {
            ln_mag: r.ln(),
            phase,
            p,
            f,
            m,
        }
    }

    pub fn power(coef: f64, p: f64) -> Self {
        Self::new(Complex64::new(coef, 0.0), p, C0, 1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.ln_mag == f64::NEG_INFINITY || self.phase == C0
    }

    pub fn is_algebraic(&self) -> bool {
        self.f == C0
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        if self.is_zero() {
            return C0;
        }
        let mut z = Complex64::new(self.ln_mag + self.p * x.ln(), 0.0);
        if !self.is_algebraic() {
            z += self.f * x.powf(self.m);
        }
        self.phase * z.exp()
    }

    pub fn mul(&self, o: &Term) -> Term {
        let m = if self.is_algebraic() { o.m } else { self.m };
        debug_assert!(self.is_algebraic() || o.is_algebraic() || (self.m - o.m).abs() < 1e-12);
        Term {
            ln_mag: self.ln_mag + o.ln_mag,
            phase: self.phase * o.phase,
            p: self.p + o.p,
            f: self.f + o.f,
            m,
        }
    }

    /// `int_x0^inf term(x) dx` and an absolute error estimate.
    pub fn tail_integral(&self, x0: f64) -> Result<(Complex64, f64)> {
        if self.is_zero() {
            return Ok((C0, 0.0));
        }
        if self.is_algebraic() {
            if self.p >= -1.0 {
                return Err(Error::DivergentIntegral(format!(
                    "tail term x^{} is not integrable",
                    self.p
                )));
            }
            let mag = (self.ln_mag + (self.p + 1.0) * x0.ln()).exp() / (-self.p - 1.0);
            return Ok((self.phase * mag, 0.0));
        }
        if self.f.re > 0.0 {
            return Err(Error::DivergentIntegral(
                "exponentially growing tail term".into(),
            ));
        }
        // y = x^m: int_x0^inf = (1/m) int_y0^inf y^(s-1) e^(f y) dy, normalised by y0^(s-1)
        let m = self.m;
        let s = (self.p + 1.0) / m;
        let y0 = x0.powf(m);
        let fa = self.f.norm();
        let y1 = if fa * y0 >= ASYM_SWITCH {
            y0
        } else {
            ASYM_SWITCH / fa
        };
        let mut head = C0;
        let mut head_err = 0.0;
        if y1 > y0 {
            if y1 / y0 > 1e200 {
                return Err(Error::DivergentIntegral(
                    "tail phase too slow to resolve".into(),
                ));
            }
            let f = self.f;
            // v = ln(y/y0)
            let g = move |v: f64| (f * (y0 * v.exp()) + s * v).exp();
            let v1 = (y1 / y0).ln();
            let mut pts = vec![0.0];
            let mut v = 0.0f64;
            loop {
                let y = y0 * v.exp();
                v += (PI / (f.im.abs() * y).max(1e-300)).ln_1p().min(0.5);
                if v >= v1 {
                    break;
                }
                pts.push(v);
            }
            pts.push(v1);
            let r = integrate_panels(
                &g,
                &pts,
                &QuadOptions {
                    rel_tol: 1e-13,
                    abs_tol: 0.0,
                    max_intervals: 20_000,
                },
            );
            head = r.value;
            head_err = r.abs_err;
        }
        let (asym, asym_err) = incomplete_asymptotic(s, self.f, y0, y1);
        let scale = (self.ln_mag + s * y0.ln()).exp() / m;
        Ok((
            self.phase * scale * (head + asym),
            scale * (head_err + asym_err),
        ))
    }
}

const ASYM_SWITCH: f64 = 32.0;

/// `y0^-s int_y^inf t^(s-1) e^(f t) dt` for `|f y|` large, by repeated integration by parts.
fn incomplete_asymptotic(s: f64, f: Complex64, y0: f64, y: f64) -> (Complex64, f64) {
    let w = -f * y;
    let lead = (f * y).exp() * (y / y0).powf(s) / w;
    let mut c = Complex64::new(1.0, 0.0);
    let mut sum = c;
    let mut last = 1.0f64;
    for j in 1..200 {
        let next = c * ((s - j as f64) / w);
        if next.norm() > last || next.norm() < 1e-18 * sum.norm() {
            last = next.norm();
            break;
        }
        c = next;
        sum += c;
        last = c.norm();
    }
    (lead * sum, lead.norm() * last)
}

/// Sum of terms plus a power-law bound `sum exp(l_i) x^(q_i)` on the remainder, valid
/// for `x` beyond the point the expansion was built for.
#[derive(Debug, Clone, Default)]
pub struct Expansion {
    pub terms: Vec<Term>,
    pub err: Vec<(f64, f64)>,
}

impl Expansion {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum::<Complex64>().re
    }

    /// Remainder bound at `x`.
    pub fn err_bound(&self, x: f64) -> f64 {
        self.err.iter().map(|&(l, q)| (l + q * x.ln()).exp()).sum()
    }

    /// Power-law bound on the magnitude of the represented sum (exponentials bounded by 1).
    fn magnitude(&self) -> Vec<(f64, f64)> {
        self.terms
            .iter()
            .filter(|t| !t.is_zero())
            .map(|t| (t.ln_mag, t.p))
            .collect()
    }

    pub fn scale(mut self, k: f64) -> Self {
        let lk = k.abs().ln();
        for t in &mut self.terms {
            t.ln_mag += lk;
            if k < 0.0 {
                t.phase = -t.phase;
            }
        }
        for e in &mut self.err {
            e.0 += lk;
        }
        self
    }

    pub fn shift_power(mut self, a: f64) -> Self {
        for t in &mut self.terms {
            t.p += a;
        }
        for e in &mut self.err {
            e.1 += a;
        }
        self
    }

    pub fn add(mut self, o: Expansion) -> Self {
        self.terms.extend(o.terms);
        self.err.extend(o.err);
        Expansion {
            terms: merge(self.terms),
            err: merge_powers(self.err),
        }
    }

    pub fn mul(&self, o: &Expansion) -> Expansion {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                terms.push(a.mul(b));
            }
        }
        let ma = self.magnitude();
        let mb = o.magnitude();
        let mut err = Vec::new();
        let cross = |x: &[(f64, f64)], y: &[(f64, f64)], out: &mut Vec<(f64, f64)>| {
            for &(c1, p1) in x {
                for &(c2, p2) in y {
                    out.push((c1 + c2, p1 + p2));
                }
            }
        };
        cross(&self.err, &mb, &mut err);
        cross(&ma, &o.err, &mut err);
        cross(&self.err, &o.err, &mut err);
        Expansion {
            terms: merge(terms),
            err: merge_powers(err),
        }
    }

    /// Tail integral from `x0` to infinity: `(value, numerical error, remainder bound)`.
    pub fn integrate_tail(&self, x0: f64) -> Result<(f64, f64, f64)> {
        let mut v = C0;
        let mut e = 0.0;
        let mut mag = 0.0;
        for t in &self.terms {
            let (ti, te) = t.tail_integral(x0)?;
            v += ti;
            e += te;
            mag += ti.norm();
        }
        let mut bound = 0.0;
        for &(l, q) in &self.err {
            if l == f64::NEG_INFINITY {
                continue;
            }
            if q >= -1.0 {
                return Err(Error::DivergentIntegral(format!(
                    "remainder bound x^{q} is not integrable"
                )));
            }
            bound += (l + (q + 1.0) * x0.ln()).exp() / (-q - 1.0);
        }
        Ok((v.re, e + 4.0 * f64::EPSILON * mag, bound))
    }
}

fn merge(mut terms: Vec<Term>) -> Vec<Term> {
    terms.retain(|t| !t.is_zero());
    for t in &mut terms {
        if t.is_algebraic() {
            t.m = 1.0;
        }
    }
    terms.sort_by(|a, b| {
        a.p.total_cmp(&b.p)
            .then(a.f.re.total_cmp(&b.f.re))
            .then(a.f.im.total_cmp(&b.f.im))
            .then(a.m.total_cmp(&b.m))
    });
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        if let Some(last) = out.last_mut() {
            if last.p == t.p && last.f == t.f && last.m == t.m {
                let l = last.ln_mag.max(t.ln_mag);
                let c = last.phase * (last.ln_mag - l).exp() + t.phase * (t.ln_mag - l).exp();
                let r = c.norm();
                last.ln_mag = l + r.ln();
                last.phase = if r > 0.0 { c / r } else { C0 };
                continue;
            }
        }
        out.push(t);
    }
    out.retain(|t| !t.is_zero());
    out
}

fn merge_powers(mut e: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    e.retain(|x| x.0 > f64::NEG_INFINITY);
    e.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (l, q) in e {
        match out.last_mut() {
            Some(last) if (last.1 - q).abs() < 1e-13 => {
                let hi = last.0.max(l);
                last.0 = hi + ((last.0 - hi).exp() + (l - hi).exp()).ln();
            }
            _ => out.push((l, q)),
        }
    }
    out
}

/// Asymptotic expansion of `E_{beta,b}(-c x^alpha)` in `x`, valid for `x >= x0`.
pub fn ml_expansion(ml: &MittagLeffler, c: f64, alpha: f64, x0: f64) -> Expansion {
    let beta = ml.a();
    let b = ml.b();
    let y0 = c * x0.powf(alpha);
    let n = ml.optimal_terms(y0);
    let lc = c.ln();
    let mut terms = Vec::with_capacity(n + 2);
    for k in 1..=n {
        let kf = k as f64;
        let r = reciprocal_gamma(b - beta * kf);
        if r == 0.0 {
            continue;
        }
        // -r (-1/c)^k
        let sign = if k % 2 == 1 { r.signum() } else { -r.signum() };
        terms.push(Term {
            ln_mag: r.abs().ln() - kf * lc,
            phase: Complex64::new(sign, 0.0),
            p: -alpha * kf,
            f: C0,
            m: 1.0,
        });
    }
    if beta == 1.0 {
        let cp = cos_pi(1.0 - b);
        terms.push(Term {
            ln_mag: (1.0 - b) * lc + cp.abs().ln(),
            phase: Complex64::new(cp.signum(), 0.0),
            p: alpha * (1.0 - b),
            f: Complex64::new(-c, 0.0),
            m: alpha,
        });
    } else if beta > 1.0 {
        let cb = c.powf(1.0 / beta);
        let f = if beta == 2.0 {
            Complex64::new(0.0, cb)
        } else {
            Complex64::from_polar(cb, PI / beta)
        };
        let ln_mag = (1.0 - b) * lc / beta - beta.ln();
        let phase = Complex64::from_polar(1.0, PI * (1.0 - b) / beta);
        let p = alpha * (1.0 - b) / beta;
        let m = alpha / beta;
        terms.push(Term {
            ln_mag,
            phase,
            p,
            f,
            m,
        });
        terms.push(Term {
            ln_mag,
            phase: phase.conj(),
            p,
            f: f.conj(),
            m,
        });
    }
    terms.retain(|t| !t.is_zero());
    let k = n + 1;
    let err = vec![(
        ml.envelope_coefficient(k).ln() - k as f64 * lc,
        -alpha * k as f64,
    )];
    Expansion { terms, err }
}
