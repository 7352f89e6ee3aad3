use fracspde::mlf::{
    ml_asymptotic, ml_eval, ml_series, ml_weighted_derivative, MLQuery, Method, MittagLeffler,
};
use fracspde::special::reciprocal_gamma;
use proptest::prelude::*;

/// (a, b, z, E_{a,b}(z)) from a 60+ digit series summation.
const REFERENCE: &[(f64, f64, f64, f64)] = &[
    (0.8, 1.8, -5.0, 0.18848092304756955115),
    (0.8, 1.8, -100.0, 0.0099779432113149088925),
    (0.5, 0.5, -30.0, 0.00031291770525374203432),
    (0.9, 1.3, -12.0, 0.0397848927222586606),
    (1.5, 1.2, -40.0, -0.008192859149981400475),
    (1.9, 2.5, -60.0, 0.031208797154521931499),
    (0.3, 0.9, -3.0, 0.18860949790930819128),
    (1.2, 0.7, -25.0, -0.011941057843291931814),
    (0.5, 1.0, -50.0, 0.0112815362653237725),
    (2.0, 1.482, -207.67595415978042, 0.12710781201955402043),
    (1.0, 2.441, -70.52839877610519, 0.015905984205964483742),
    (1.115, 1.799, -9.66271199894756, 0.081968817209048401737),
    (0.76, 0.776, -23.875766399539728, 0.0010783646279712076124),
    (1.099, 1.785, -0.4873738105493934, 0.84419737870490552031),
    (1.462, 0.742, -2.631044276760304, -0.3503532903516493319),
    (0.981, 1.825, -17.73692340567468, 0.050837783630644166308),
    (0.158, 2.938, -1.7240167100272017, 0.21183407596723517839),
    (2.0, 2.411, -4.136677399278924, 0.46114428129235796788),
    (1.0, 1.637, -84.26414920526612, 0.0084530680822471200575),
    (1.57, 0.95, -3.028820228342782, -0.25526034966638013594),
    (0.892, 1.167, -1.691375905456589, 0.29541999531415792341),
    (0.28, 2.391, -1.822016253727077, 0.32065331645523097261),
    (1.706, 2.247, -1325.2943552773509, 0.00045947419796589294739),
    (0.921, 1.32, -1.5999622512506546, 0.37694285695821482645),
    (0.694, 0.728, -18.578706799087364, 0.0026472095066198817872),
    (2.0, 2.129, -20.638602958494317, -0.16242153423644037931),
    (1.0, 1.429, -1.6748136083707308, 0.39991499447029050688),
    (1.57, 2.75, -1166.3593615536745, 0.00092835711430705876659),
    (0.386, 2.373, -1.504637975189876, 0.37612390053186316045),
    (0.782, 2.057, -18.27014506580622, 0.059003508580816493896),
    (0.257, 1.974, -2.9064020151637777, 0.27742183058211799184),
    (1.946, 0.429, -0.24103286632439008, 0.29326576622713693415),
    (1.169, 0.503, -0.8609614828986312, -0.047825896456275154625),
    (2.0, 1.677, -0.3624267216175524, 1.018212441028994281),
    (1.0, 2.644, -1.7420315412181326, 0.38332183610372260582),
    (1.078, 2.716, -67.6127359116122, 0.016324898481769338718),
    (1.308, 0.872, -0.239346140100863, 0.71263693716601012074),
    (
        1.801,
        1.67,
        -1960.3646472192272,
        -0.000061454079456657621139,
    ),
    (1.001, 0.925, -2.362097707438879, 0.053957024518247972853),
    (0.827, 1.37, -3.1242500397460984, 0.21430127561820599452),
    (1.025, 1.411, -10.136415267283104, 0.046004313149565775837),
    (2.0, 0.338, -29.003706084841845, 3.0291008242884868999),
    (1.0, 0.682, -7.78744277883395, -0.03859036844012175261),
    (0.986, 2.366, -0.3579840448664527, 0.7091785594019550385),
    (1.236, 0.409, -51.300832552076436, -0.002942358244334701881),
    (1.275, 2.247, -0.28152194246317447, 0.8057552842115198268),
    (1.521, 1.383, -0.21649709611376294, 1.0120368300281567442),
    (0.411, 1.33, -2.252317869134661, 0.32270808721501442146),
    (1.028, 0.928, -0.9802701435234624, 0.32036973155885073094),
    (2.0, 2.373, -5.910029158527624, 0.34870817752669471662),
    (1.0, 1.434, -8.762771628065163, 0.060538098269982988826),
    (0.825, 1.608, -23.269781844160534, 0.036363615594020233005),
    (1.93, 1.928, -30.23412937824763, -0.054075539639982962147),
    (1.122, 1.517, -0.29150651306344644, 0.94737155751438001136),
    (1.1, 2.036, -0.32218213513786975, 0.85487745039647556745),
    (1.58, 1.635, -2.2340534170293864, 0.44421354565530921159),
    (1.511, 2.455, -16.902646542816136, 0.054788322083664269251),
];

#[test]
fn reciprocal_gamma_examples() {
    assert_eq!(reciprocal_gamma(1.0), 1.0);
    assert_eq!(reciprocal_gamma(0.0), 0.0);
    assert!((reciprocal_gamma(0.5) - 0.5641895835).abs() < 1e-10);
}

#[test]
fn ml_eval_matches_extended_precision_reference() {
    for &(a, b, z, want) in REFERENCE {
        let r = ml_eval(MLQuery::new(a, b, z)).unwrap();
        let scale = want.abs().max(1e-3 * (1.0 + z.abs()).recip());
        assert!(
            (r.value - want).abs() <= 1e-11 * scale.max(want.abs()) + r.err_estimate,
            "E_{{{a},{b}}}({z}) = {} want {want} ({:?})",
            r.value,
            r.method
        );
        assert!(
            (r.value - want).abs() <= 1e-10 * want.abs().max(1e-6),
            "{a} {b} {z}"
        );
    }
}

#[test]
fn series_examples() {
    let r = ml_series(MLQuery::new(1.0, 1.0, -1.0)).unwrap();
    assert!((r.value - 0.3678794412).abs() < 1e-10);
    assert_eq!(r.method, Method::Series);
    let r = ml_series(MLQuery::new(2.0, 1.0, -4.0)).unwrap();
    assert!((r.value + 0.4161468365).abs() < 1e-10);
    let r = ml_series(MLQuery::new(0.8, 1.8, -5.0)).unwrap();
    assert!((r.value - 0.18848092304756955).abs() < 1e-15);
    assert!(r.err_estimate <= 1e-12 * r.value.abs());
}

#[test]
fn asymptotic_examples() {
    let r = ml_asymptotic(1.0, 1.0, -40.0, 5).unwrap();
    assert!(r.value.abs() < 1e-15);
    assert!(r.err_estimate < 1e-7);
    assert_eq!(r.method, Method::Asymptotic);

    let r = ml_asymptotic(0.5, 0.5, -30.0, 3).unwrap();
    let want = 0.00031291770525374203432;
    assert!(
        (r.value - want).abs() <= r.err_estimate,
        "{} vs {want} +- {}",
        r.value,
        r.err_estimate
    );

    let x = std::f64::consts::PI;
    let r = ml_asymptotic(2.0, 2.0, -x * x, 2).unwrap();
    assert!(r.value.abs() < 1e-15);
}

#[test]
fn eval_examples() {
    assert_eq!(ml_eval(MLQuery::new(1.0, 1.0, 0.0)).unwrap().value, 1.0);
    let r = ml_eval(MLQuery::new(2.0, 2.0, -1.0)).unwrap();
    assert!((r.value - 0.8414709848).abs() < 1e-10);
    let r = ml_eval(MLQuery::new(0.8, 1.8, -100.0)).unwrap();
    assert!((r.value - 0.0099779432113149088925).abs() < 1e-15);
    assert_eq!(r.method, Method::Asymptotic);
}

#[test]
fn weighted_derivative_examples() {
    let v = ml_weighted_derivative(1.0, 2.0, -1.0, 1.0, 1).unwrap();
    assert!((v - 0.3678794412).abs() < 1e-10);
    let pi = std::f64::consts::PI;
    let v = ml_weighted_derivative(2.0, 2.0, -1.0, pi, 1).unwrap();
    assert!((v + 1.0).abs() < 1e-12);
    let v = ml_weighted_derivative(0.7, 1.5, -2.0, 0.8, 1).unwrap();
    assert!((v + 0.0034840443415946791).abs() < 1e-15);
    let g = |z: f64| {
        z.powf(0.5)
            * ml_eval(MLQuery::new(0.7, 1.5, -2.0 * z.powf(0.7)))
                .unwrap()
                .value
    };
    let h = 1e-5;
    let fd = (g(0.8 + h) - g(0.8 - h)) / (2.0 * h);
    assert!((fd - v).abs() <= 1e-6 * v.abs());
}

#[test]
fn exponential_identity_on_grid() {
    let e = MittagLeffler::new(1.0, 1.0).unwrap();
    for i in 0..500 {
        let x = 50.0 * i as f64 / 499.0;
        let want = (-x).exp();
        let got = e.value(-x).unwrap();
        assert!(
            (got - want).abs() <= 1e-10 * want.max(1e-300),
            "x={x}: {got} vs {want}"
        );
    }
}

#[test]
fn trig_identities_on_grid() {
    let c = MittagLeffler::new(2.0, 1.0).unwrap();
    let s = MittagLeffler::new(2.0, 2.0).unwrap();
    for i in 0..500 {
        let x = 20.0 * i as f64 / 499.0;
        assert!((c.value(-x * x).unwrap() - x.cos()).abs() <= 1e-9);
        let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
        assert!((s.value(-x * x).unwrap() - sinc).abs() <= 1e-9);
    }
}

#[test]
fn complete_monotonicity_keeps_sign() {
    for &a in &[0.2, 0.5, 0.8, 1.0] {
        for &db in &[0.0, 0.3, 1.0, 2.0] {
            let e = MittagLeffler::new(a, a + db).unwrap();
            for i in 0..=200 {
                let x = 100.0 * i as f64 / 200.0;
                assert!(e.value(-x).unwrap() >= 0.0, "a={a} b={} x={x}", a + db);
            }
        }
    }
}

#[test]
fn overlap_band_agreement() {
    let tol = 1e-10;
    for i in 0..10 {
        let a = 0.1 + 1.9 * i as f64 / 9.0;
        for j in 0..5 {
            let b = 0.5 + 2.5 * j as f64 / 4.0;
            let e = MittagLeffler::new(a, b).unwrap();
            let zc = e.config().crossover;
            for k in 0..4 {
                let zeta = zc * (1.0 + 0.25 * k as f64 / 4.0);
                let z = -zeta.powf(a);
                let (s, asy, scale) = e.overlap_pair(z, tol).unwrap();
                assert!(
                    (s - asy).abs() <= 10.0 * tol * scale,
                    "a={a} b={b} z={z}: {s} vs {asy}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_identity(a in 0.2f64..2.0, b in 0.6f64..3.0, lam in -3.0f64..-0.1, z in 0.2f64..2.0) {
        let g = |z: f64| z.powf(b - 1.0) * ml_eval(MLQuery::new(a, b, lam * z.powf(a))).unwrap().value;
        let h = 1e-5 * z;
        let fd = (g(z + h) - g(z - h)) / (2.0 * h);
        let v = ml_weighted_derivative(a, b, lam, z, 1).unwrap();
        let scale = v.abs().max(1e-3 * (g(z).abs() / z));
        prop_assert!((fd - v).abs() <= 1e-5 * scale, "fd {} closed {}", fd, v);
    }

    #[test]
    fn series_error_estimate_within_tolerance(a in 0.1f64..2.0, b in 0.3f64..3.0, zeta in 0.0f64..29.0) {
        let z = -zeta.powf(a);
        let r = ml_series(MLQuery::new(a, b, z)).unwrap();
        prop_assert!(r.err_estimate <= 1e-12 * r.value.abs().max(1e-300) || r.value == 0.0);
    }

    #[test]
    fn dispatch_continuous_across_crossover(a in 0.1f64..2.0, b in 0.5f64..3.0) {
        let e = MittagLeffler::new(a, b).unwrap();
        let zc = e.config().crossover;
        let lo = e.eval(-(zc * 0.999).powf(a), 1e-12).unwrap();
        let hi = e.eval(-(zc * 1.3).powf(a), 1e-12).unwrap();
        prop_assert!(lo.value.is_finite() && hi.value.is_finite());
    }
}
