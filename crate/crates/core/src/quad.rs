//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// One 21-point Kronrod panel with the QUADPACK error heuristic.
pub fn gk21<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = T::zero();
    let mut resabs = fc.norm() * WGK[10];
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv1[j] = f1;
        fv2[j] = f2;
        resk = resk + (f1 + f2) * WGK[j];
        resabs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            resg = resg + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let result = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg) * h).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: f64,
    pub intervals: usize,
    pub converged: bool,
}

struct Seg<T> {
    a: f64,
    b: f64,
    val: T,
    err: f64,
}

impl<T> PartialEq for Seg<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err.total_cmp(&o.err) == Ordering::Equal
    }
}
impl<T> Eq for Seg<T> {}
impl<T> PartialOrd for Seg<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Seg<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive integration over consecutive panels `points[i]..points[i+1]`.
pub fn integrate_panels<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    points: &[f64],
    opts: &QuadOptions,
) -> QuadResult<T> {
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Seg<T>> = Vec::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (val, err) = gk21(f, w[0], w[1]);
            heap.push(Seg {
                a: w[0],
                b: w[1],
                val,
                err,
            });
        }
    }
    let total = |heap: &BinaryHeap<Seg<T>>, done: &[Seg<T>]| {
        let mut v = T::zero();
        let mut e = 0.0;
        for s in heap.iter().chain(done.iter()) {
            v = v + s.val;
            e += s.err;
        }
        (v, e)
    };
    let (mut value, mut err) = total(&heap, &done);
    let mut converged = err <= opts.abs_tol.max(opts.rel_tol * value.norm());
    let mut n = heap.len();
    let mut since_resum = 0;
    while !converged && n < opts.max_intervals {
        let Some(s) = heap.pop() else { break };
        let m = 0.5 * (s.a + s.b);
        if !(m > s.a && m < s.b) || (s.b - s.a) <= 1e-14 * s.a.abs().max(s.b.abs()) {
            done.push(s);
            continue;
        }
        let (v1, e1) = gk21(f, s.a, m);
        let (v2, e2) = gk21(f, m, s.b);
        value = value - s.val + v1 + v2;
        err += e1 + e2 - s.err;
        heap.push(Seg {
            a: s.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Seg {
            a: m,
            b: s.b,
            val: v2,
            err: e2,
        });
        n += 1;
        since_resum += 1;
        if since_resum >= 64 {
            let (v, e) = total(&heap, &done);
            value = v;
            err = e;
            since_resum = 0;
        }
        converged = err <= opts.abs_tol.max(opts.rel_tol * value.norm());
        if heap.is_empty() {
            break;
        }
    }
    // deterministic final reduction in interval order
    let mut all: Vec<Seg<T>> = heap.into_vec();
    all.extend(done);
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = T::zero();
    let mut err = 0.0;
    for s in &all {
        value = value + s.val;
        err += s.err;
    }
    let converged = err <= opts.abs_tol.max(opts.rel_tol * value.norm());
    QuadResult {
        value,
        abs_err: err,
        intervals: all.len(),
        converged,
    }
}

/// Adaptive integration that refines in rounds and evaluates each round's panels in parallel.
///
/// Suited to expensive integrands; each round bisects every panel whose error exceeds
/// its share of the tolerance.
pub fn integrate_panels_par<F: Fn(f64) -> f64 + Sync>(
    f: &F,
    points: &[f64],
    opts: &QuadOptions,
) -> QuadResult<f64> {
    let eval = |segs: Vec<(f64, f64)>| -> Vec<Seg<f64>> {
        segs.into_par_iter()
            .map(|(a, b)| {
                let (val, err) = gk21(f, a, b);
                Seg { a, b, val, err }
            })
            .collect()
    };
    let mut segs = eval(
        points
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
            .collect(),
    );
    loop {
        segs.sort_by(|x, y| x.a.total_cmp(&y.a));
        let value: f64 = segs.iter().map(|s| s.val).sum();
        let err: f64 = segs.iter().map(|s| s.err).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if err <= target || segs.len() >= opts.max_intervals {
            return QuadResult {
                value,
                abs_err: err,
                intervals: segs.len(),
                converged: err <= target,
            };
        }
        let share = target / segs.len() as f64;
        let (split, keep): (Vec<_>, Vec<_>) = segs.into_iter().partition(|s| {
            let m = 0.5 * (s.a + s.b);
            s.err > share && m > s.a && m < s.b
        });
        if split.is_empty() {
            segs = keep;
            let value: f64 = segs.iter().map(|s| s.val).sum();
            let err: f64 = segs.iter().map(|s| s.err).sum();
            return QuadResult {
                value,
                abs_err: err,
                intervals: segs.len(),
                converged: false,
            };
        }
        let halves = split.iter().flat_map(|s| {
            let m = 0.5 * (s.a + s.b);
            [(s.a, m), (m, s.b)]
        });
        segs = keep;
        segs.extend(eval(halves.collect()));
    }
}

pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> QuadResult<T> {
    integrate_panels(f, &[a, b], opts)
}

/// Breakpoints `lo, lo*r, lo*r^2, ..., hi` (geometric, `lo > 0`).
pub fn geometric_points(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut x = lo;
    while x * ratio < hi * (1.0 - 1e-12) {
        x *= ratio;
        pts.push(x);
    }
    pts.push(hi);
    pts
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
