//! Self-checks run by `fracspde verify`: identities and properties with known answers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{
    chaos_bound_white, chaos_norm_white, dirichlet_simplex_integral, exp_weighted_ml_integral,
    wave_cross_energy,
};
use crate::error::Error;
use crate::kernels::{
    c_constant, fourier_y, time_increment_energy, weighted_energy, ModelParams,
};
use crate::mlf::{ml_eval, ml_weighted_derivative, reciprocal_gamma_fn, MLQuery, MittagLeffler};
use crate::regimes::{holder_exponents, Exponents};
use crate::sim::{jackknife_mean, sample_noise_increment, simulate_paths, SimConfig};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Mlf,
    Kernels,
    Regimes,
    Chaos,
    Sim,
    All,
}

impl Suite {
    const EACH: [Suite; 5] = [Suite::Mlf, Suite::Kernels, Suite::Regimes, Suite::Chaos, Suite::Sim];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Mlf => "mlf",
            Suite::Kernels => "kernels",
            Suite::Regimes => "regimes",
            Suite::Chaos => "chaos",
            Suite::Sim => "sim",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<String, String>;
type Check = (Suite, &'static str, fn() -> Outcome);

fn lib<T>(r: crate::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("error: {e}"))
}

fn within(name: &str, err: f64, tol: f64) -> Outcome {
    if err <= tol {
        Ok(format!("{name} {err:.3e} <= {tol:.0e}"))
    } else {
        Err(format!("{name} {err:.3e} > {tol:.0e}"))
    }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed)
}

fn heat() -> ModelParams {
    ModelParams::builder().build().expect("defaults are valid")
}

fn grid_error(a: f64, b: f64, span: f64, arg: fn(f64) -> f64, want: fn(f64) -> f64) -> Outcome {
    let e = lib(MittagLeffler::new(a, b))?;
    let mut worst = 0.0f64;
    for i in 0..500 {
        let x = span * i as f64 / 499.0;
        worst = worst.max((lib(e.value(arg(x)))? - want(x)).abs());
    }
    within("max abs err", worst, 1e-9)
}

fn mlf_exp() -> Outcome {
    grid_error(1.0, 1.0, 50.0, |x| -x, |x| (-x).exp())
}

fn mlf_cos() -> Outcome {
    grid_error(2.0, 1.0, 20.0, |x| -x * x, f64::cos)
}

fn mlf_sinc() -> Outcome {
    grid_error(2.0, 2.0, 20.0, |x| -x * x, |x| if x == 0.0 { 1.0 } else { x.sin() / x })
}

fn mlf_origin() -> Outcome {
    let mut worst = 0.0f64;
    for (a, b) in [(0.3, 0.7), (0.8, 1.8), (1.5, 2.5), (2.0, 0.4)] {
        let v = lib(ml_eval(MLQuery::new(a, b, 0.0)))?.value;
        worst = worst.max((v - reciprocal_gamma_fn(b)).abs());
    }
    within("|E(0) - 1/Gamma(b)|", worst, 1e-15)
}

fn mlf_recurrence() -> Outcome {
    let mut r = rng();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (a, b, z) = (r.gen_range(0.2..2.0), r.gen_range(0.5..3.0), -r.gen_range(0.0..30.0));
        let lhs = lib(ml_eval(MLQuery::new(a, b, z)))?.value;
        let rhs = reciprocal_gamma_fn(b) + z * lib(ml_eval(MLQuery::new(a, a + b, z)))?.value;
        worst = worst.max((lhs - rhs).abs());
    }
    within("max abs err", worst, 1e-9)
}

fn mlf_overlap() -> Outcome {
    let tol = 1e-10;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let a = 0.1 + 1.9 * i as f64 / 9.0;
        for j in 0..5 {
            let b = 0.5 + 2.5 * j as f64 / 4.0;
            let e = lib(MittagLeffler::new(a, b))?;
            let zc = e.config().crossover;
            for k in 0..4 {
                let z = -(zc * (1.0 + 0.0625 * k as f64)).powf(a);
                let (s, asy, scale) = lib(e.overlap_pair(z, tol))?;
                worst = worst.max((s - asy).abs() / scale);
            }
        }
    }
    within("max scaled gap", worst, 10.0 * tol)
}

fn mlf_derivative() -> Outcome {
    let mut r = rng();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (r.gen_range(0.2..2.0), r.gen_range(0.6..3.0));
        let (lam, z) = (-r.gen_range(0.1..3.0), r.gen_range(0.2..2.0));
        let g = |z: f64| -> Result<f64, String> {
            Ok(z.powf(b - 1.0) * lib(ml_eval(MLQuery::new(a, b, lam * z.powf(a))))?.value)
        };
        let h = 1e-5 * z;
        let fd = (g(z + h)? - g(z - h)?) / (2.0 * h);
        let v = lib(ml_weighted_derivative(a, b, lam, z, 1))?;
        let scale = v.abs().max(1e-3 * g(z)?.abs() / z);
        worst = worst.max((fd - v).abs() / scale);
    }
    within("max rel err", worst, 1e-5)
}

fn kernels_heat() -> Outcome {
    let mut r = rng();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let nu = r.gen_range(0.1..4.0);
        let (t, xi) = (r.gen_range(0.01..5.0), r.gen_range(-20.0..20.0));
        let p = lib(ModelParams::builder().nu(nu).build())?;
        worst = worst.max((lib(fourier_y(&p, t, xi))? - (-0.5 * nu * t * xi * xi).exp()).abs());
    }
    within("max abs err", worst, 1e-10)
}

fn kernels_gaussian_energy() -> Outcome {
    let (t, a) = (0.7, 0.4);
    let e = lib(weighted_energy(&heat(), t, a))?;
    let want = gamma(0.5 * (a + 1.0)) * t.powf(-0.5 * (a + 1.0));
    within("rel err", (e.value - want).abs() / want, 1e-9)
}

fn admissible(r: &mut ChaCha8Rng) -> Result<(ModelParams, f64), String> {
    let wave = r.gen_bool(0.3);
    let alpha = r.gen_range(0.6..2.5);
    let beta = if wave { 2.0 } else { r.gen_range(0.3..2.0) };
    let gamma = r.gen_range(0.0..1.0);
    let upper = if wave {
        alpha * (1.0f64 + gamma).min(2.0) - 1.0
    } else {
        2.0 * alpha - 1.0
    };
    let a = -0.9 + r.gen_range(0.0..1.0) * (upper + 0.9 - 0.15).max(0.0);
    let p = ModelParams::builder()
        .alpha(alpha)
        .beta(beta)
        .gamma(gamma)
        .nu(r.gen_range(0.3..3.0))
        .build();
    Ok((lib(p)?, a))
}

fn kernels_scaling() -> Outcome {
    let mut r = rng();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (p, a) = admissible(&mut r)?;
        let t1 = r.gen_range(0.2..3.0);
        let t2 = t1 * r.gen_range(1.5..4.0);
        let (e1, e2) = (lib(weighted_energy(&p, t1, a))?, lib(weighted_energy(&p, t2, a))?);
        let slope = (e1.value / e2.value).ln() / (t1 / t2).ln();
        let want = 2.0 * p.b() - 2.0 - p.beta() * (a + 1.0) / p.alpha();
        worst = worst.max((slope - want).abs() / want.abs().max(1.0));
    }
    within("max rel err", worst, 1e-5)
}

fn kernels_constant() -> Outcome {
    let mut r = rng();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (p, a) = admissible(&mut r)?;
        let t = r.gen_range(0.2..3.0);
        let c = lib(c_constant(&p, a, p.b(), p.b()))?;
        let e = lib(weighted_energy(&p, t, a))?;
        let expo = 2.0 * p.b() - 2.0 - p.beta() * (a + 1.0) / p.alpha();
        worst = worst.max((c.value * t.powf(expo) - e.value).abs() / e.value);
    }
    within("max rel err", worst, 1e-8)
}

fn kernels_increment() -> Outcome {
    let p = lib(ModelParams::builder().beta(0.7).gamma(0.2).alpha(1.6).build())?;
    let a = lib(time_increment_energy(&p, 0.1, 0.5, 0.9, 0.2))?.value;
    let b = lib(time_increment_energy(&p, 0.1, 0.9, 0.5, 0.2))?.value;
    let z = lib(time_increment_energy(&p, 0.1, 0.5, 0.5, 0.2))?.value;
    if z != 0.0 || !(a > 0.0) {
        return Err(format!("zero lag gave {z}, positive lag gave {a}"));
    }
    within("asymmetry", (a - b).abs() / a, 1e-12)
}

fn count_disagreements(draw: impl Fn(&mut ChaCha8Rng) -> (Exponents, bool)) -> Outcome {
    let mut r = rng();
    let bad = (0..10_000)
        .filter(|_| {
            let (e, want) = draw(&mut r);
            (e.margin() > 0.0) != want
        })
        .count();
    if bad == 0 {
        Ok("0 of 10000 draws disagree".into())
    } else {
        Err(format!("{bad} of 10000 draws disagree"))
    }
}

fn exps(alpha: f64, beta: f64, gamma: f64, h0: f64, h: f64) -> Exponents {
    Exponents {
        alpha,
        beta,
        gamma,
        h0,
        h,
    }
}

fn regimes_heat() -> Outcome {
    count_disagreements(|r| {
        let (h0, h) = (r.gen_range(0.5..0.999), r.gen_range(0.001..0.499));
        (exps(2.0, 1.0, 0.0, h0, h), h0 + h > 0.75)
    })
}

fn regimes_wave() -> Outcome {
    count_disagreements(|r| {
        let (alpha, h) = (r.gen_range(0.1..4.0), r.gen_range(0.001..0.499));
        (exps(alpha, 2.0, 0.0, r.gen_range(0.5..0.999), h), alpha > 3.0 - 4.0 * h)
    })
}

fn regimes_white() -> Outcome {
    count_disagreements(|r| {
        let (alpha, gamma) = (r.gen_range(0.1..4.0), r.gen_range(0.0..2.0));
        (exps(alpha, 2.0, gamma, 0.5, 0.5), alpha * (1.0f64 + gamma).min(2.0) > 1.0)
    })
}

fn regimes_holder() -> Outcome {
    let mut worst = 0.0f64;
    for (h0, h) in [(0.5, 0.3), (0.7, 0.2), (0.9, 0.45)] {
        let p = lib(ModelParams::builder().h0(h0).h(h).build())?;
        let x = lib(holder_exponents(&p))?;
        worst = worst.max((x.rho - (h0 + h / 2.0 - 0.5)).abs());
        worst = worst.max((x.kappa - (2.0 * h0 + h - 1.0)).abs());
    }
    for (alpha, h) in [(2.0, 0.3), (2.8, 0.1)] {
        let p = lib(ModelParams::builder().alpha(alpha).beta(2.0).h(h).build())?;
        let x = lib(holder_exponents(&p))?;
        worst = worst.max((x.kappa - (alpha / 2.0 - 1.0 + h)).abs());
        if x.time_holder_valid {
            return Err("wave time exponent reported valid".into());
        }
    }
    within("max abs err", worst, 1e-14)
}

fn chaos_first() -> Outcome {
    let p = heat();
    let (h, t) = (p.h(), 0.5f64);
    let want = p.c_h() * gamma(1.0 - h) * t.powf(h) / h;
    let got = lib(chaos_norm_white(&p, 1, t))?.value;
    within("rel err", (got - want).abs() / want, 1e-4)
}

fn chaos_scaling() -> Outcome {
    let p = heat();
    let mut worst = 0.0f64;
    for n in 1..=2 {
        let (a, b) = (lib(chaos_norm_white(&p, n, 0.4))?, lib(chaos_norm_white(&p, n, 0.8))?);
        let want = 2f64.powf(n as f64 * p.h());
        worst = worst.max((b.value / a.value - want).abs() / want);
    }
    within("max rel err", worst, 1e-2)
}

fn chaos_dirichlet() -> Outcome {
    let t = 1.7;
    let one = lib(dirichlet_simplex_integral(t, &[0.4]))?;
    let two = lib(dirichlet_simplex_integral(t, &[0.0, 0.0]))?;
    let err = ((one - t.powf(1.4) / 1.4).abs() / one).max((two - t * t / 2.0).abs() / two);
    within("max rel err", err, 1e-13)
}

fn chaos_exp_weight() -> Outcome {
    let mut r = rng();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let p = lib(ModelParams::builder()
            .beta(r.gen_range(0.3..2.0))
            .gamma(r.gen_range(0.0..1.0))
            .nu(r.gen_range(0.3..3.0))
            .build())?;
        let eta = r.gen_range(0.05..0.95) * (2.0 / p.nu()).powf(1.0 / p.alpha());
        let v = lib(exp_weighted_ml_integral(&p, eta))?;
        let want = 1.0 / (1.0 + 0.5 * p.nu() * eta.powf(p.alpha()));
        worst = worst.max((v - want).abs() / want);
    }
    within("max rel err", worst, 1e-6)
}

fn chaos_wave() -> Outcome {
    let p = lib(ModelParams::builder().beta(2.0).alpha(1.8).h(0.4).build())?;
    let s = 0.8;
    let cross = lib(wave_cross_energy(&p, s, s))?;
    let direct = lib(weighted_energy(&p, s, p.spectral_exponent()))?.value;
    within("rel err at r = s", (cross - direct).abs() / direct, 1e-6)
}

fn chaos_bound() -> Outcome {
    let p = heat();
    for n in 1..=2 {
        let v = lib(chaos_norm_white(&p, n, 0.5))?.value;
        let b = lib(chaos_bound_white(&p, n, 0.5))?;
        if !(v <= b) {
            return Err(format!("n = {n}: norm {v} exceeds bound {b}"));
        }
    }
    Ok("norm <= bound for n = 1, 2".into())
}

fn small_sim(paths: usize) -> Result<SimConfig, String> {
    let mut c = SimConfig::new(lib(ModelParams::builder().build())?);
    c.half_width = 10.0;
    c.n_modes = 32;
    c.n_time = 50;
    c.n_paths = paths;
    Ok(c)
}

fn sim_noise() -> Outcome {
    let c = small_sim(1)?;
    let mut r = rng();
    let i = c.n_grid() / 2;
    let sq: Vec<f64> = (0..4000)
        .map(|_| sample_noise_increment(&c, &mut r).values[i].powi(2))
        .collect();
    let (m, se) = jackknife_mean(&sq);
    let p = &c.params;
    let d = c.d_xi();
    let want: f64 = (1..=c.n_modes)
        .map(|k| 2.0 * p.c_h() * (k as f64 * d).powf(p.spectral_exponent()) * d * c.dt())
        .sum();
    let z = (m - want).abs() / se;
    if z < 3.0 {
        Ok(format!("{z:.2} standard errors"))
    } else {
        Err(format!("{z:.2} standard errors"))
    }
}

fn sim_mean() -> Outcome {
    let est = lib(simulate_paths(&small_sim(200)?))?;
    let (m, se) = lib(crate::sim::estimate_moments(&est, &[2]))?.mean;
    let z = (m - 1.0).abs() / se;
    if z < 3.0 {
        Ok(format!("{z:.2} standard errors"))
    } else {
        Err(format!("{z:.2} standard errors"))
    }
}

fn sim_reproducible() -> Outcome {
    let c = small_sim(4)?;
    if lib(simulate_paths(&c))? == lib(simulate_paths(&c))? {
        Ok("identical ensembles".into())
    } else {
        Err("ensembles differ".into())
    }
}

fn sim_decoupled() -> Outcome {
    let mut c = small_sim(2)?;
    c.params = lib(c.params.to_builder().lambda(1e-200).build())?;
    let e = lib(simulate_paths(&c))?;
    if e.final_fields.iter().flatten().all(|&u| u == 1.0) {
        Ok("u = J0 on every path".into())
    } else {
        Err("fields move without coupling".into())
    }
}

const CHECKS: &[Check] = &[
    (Suite::Mlf, "E(1,1)(-x) = exp(-x)", mlf_exp),
    (Suite::Mlf, "E(2,1)(-x^2) = cos x", mlf_cos),
    (Suite::Mlf, "E(2,2)(-x^2) = sin x / x", mlf_sinc),
    (Suite::Mlf, "E(a,b)(0) = 1/Gamma(b)", mlf_origin),
    (Suite::Mlf, "E(a,b) = 1/Gamma(b) + z E(a,a+b)", mlf_recurrence),
    (Suite::Mlf, "series/asymptotic overlap", mlf_overlap),
    (Suite::Mlf, "derivative identity", mlf_derivative),
    (Suite::Kernels, "heat kernel closed form", kernels_heat),
    (Suite::Kernels, "Gaussian weighted energy", kernels_gaussian_energy),
    (Suite::Kernels, "energy scaling law", kernels_scaling),
    (Suite::Kernels, "energy = C t^e", kernels_constant),
    (Suite::Kernels, "increment energy symmetry", kernels_increment),
    (Suite::Regimes, "heat: H0 + H > 3/4", regimes_heat),
    (Suite::Regimes, "wave: alpha > 3 - 4H", regimes_wave),
    (Suite::Regimes, "space-time white noise", regimes_white),
    (Suite::Regimes, "Hölder closed forms", regimes_holder),
    (Suite::Chaos, "first chaos closed form", chaos_first),
    (Suite::Chaos, "time scaling n = 1, 2", chaos_scaling),
    (Suite::Chaos, "Dirichlet integral", chaos_dirichlet),
    (Suite::Chaos, "exponential weight identity", chaos_exp_weight),
    (Suite::Chaos, "wave cross energy at r = s", chaos_wave),
    (Suite::Chaos, "explicit bound dominates", chaos_bound),
    (Suite::Sim, "noise variance", sim_noise),
    (Suite::Sim, "mean equals J0", sim_mean),
    (Suite::Sim, "reproducible", sim_reproducible),
    (Suite::Sim, "decoupled paths stay at J0", sim_decoupled),
];

/// Runs the checks of `suite` in parallel; outcomes keep the declaration order.
pub fn run_suite(suite: Suite) -> Vec<CheckOutcome> {
    CHECKS
        .par_iter()
        .filter(|c| suite == Suite::All || c.0 == suite)
        .map(|&(s, name, f)| {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome {
                suite: s,
                name: name.into(),
                passed,
                detail,
            }
        })
        .collect()
}
