use fracspde::chaos::second_moment_truncated;
use fracspde::kernels::{fourier_y, j0, ModelParams};
use fracspde::quad::{integrate, QuadOptions};
use fracspde::sim::*;
use fracspde::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(p: ModelParams, modes: usize, steps: usize, paths: usize) -> SimConfig {
    let mut c = SimConfig::new(p);
    c.half_width = 10.0;
    c.n_modes = modes;
    c.n_time = steps;
    c.n_paths = paths;
    c.seed = 11;
    c
}

fn heat(h: f64) -> ModelParams {
    ModelParams::builder().h(h).build().unwrap()
}

/// Discrete spectral sum `sum_m 2 c_H xi_m^(1-2H) d_xi dt` and its cosine transform.
fn discrete_covariance(c: &SimConfig, x: f64) -> f64 {
    let p = &c.params;
    let d = std::f64::consts::PI / c.half_width;
    (1..=c.n_modes)
        .map(|m| {
            let xi = m as f64 * d;
            2.0 * p.c_h() * xi.powf(1.0 - 2.0 * p.h()) * d * c.dt() * (xi * x).cos()
        })
        .sum()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn noise_variance_and_covariance() {
    let c = config(heat(0.3), 32, 50, 1);
    let x = c.grid();
    let i0 = x.len() / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<NoiseIncrement> = (0..10_000).map(|_| sample_noise_increment(&c, &mut rng)).collect();
    for j in [i0, i0 + 3, i0 + 17, 5] {
        let prod: Vec<f64> = draws.iter().map(|d| d.values[i0] * d.values[j]).collect();
        let (m, se) = mean_and_se(&prod);
        let want = discrete_covariance(&c, x[j] - x[i0]);
        assert!((m - want).abs() < 3.0 * se, "lag {}: {m} vs {want} (se {se})", j as i64 - i0 as i64);
    }
    let var0 = discrete_covariance(&c, 0.0);
    for j in [0, 100, 127] {
        let sq: Vec<f64> = draws.iter().map(|d| d.values[j] * d.values[j]).collect();
        let (m, se) = mean_and_se(&sq);
        assert!((m - var0).abs() < 3.0 * se);
    }
}

#[test]
fn spectrum_flattens_as_h_approaches_half() {
    let ratio = |h: f64| {
        let mut c = config(heat(h), 4, 10, 1);
        c.half_width = std::f64::consts::PI;
        let s = mode_scales(&c);
        (s[0] / s[1]).powi(2)
    };
    assert!((ratio(0.3) - 2f64.powf(-0.4)).abs() < 1e-12);
    let gaps: Vec<f64> = [0.3, 0.4, 0.45, 0.49, 0.4999].iter().map(|&h| 1.0 - ratio(h)).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(gaps[4] < 1e-3);
}

#[test]
fn negligible_coupling_leaves_the_homogeneous_solution() {
    let p = heat(0.35).to_builder().lambda(1e-200).mu0(1.3).build().unwrap();
    let ens = simulate_paths(&config(p, 256, 256, 4)).unwrap();
    assert!(ens.final_fields.iter().flatten().all(|&u| u == 1.3));
    assert!(ens.probes.iter().flatten().flatten().all(|&u| u == 1.3));
    let est = estimate_moments(&ens, &[2, 4]).unwrap();
    assert_eq!(est.moments[&2], (1.3 * 1.3, 0.0));
    let (space, time) = estimate_holder(&ens).unwrap();
    assert!(space.degenerate() && time.degenerate());
    assert!(space.structure.iter().chain(&time.structure).all(|&s| s == 0.0));

    let wave = ModelParams::builder()
        .beta(1.5)
        .h(0.45)
        .mu0(0.5)
        .mu1(2.0)
        .lambda(1e-200)
        .build()
        .unwrap();
    let ens = simulate_paths(&config(wave, 16, 20, 2)).unwrap();
    for (s, &t) in ens.snapshot_times.iter().enumerate() {
        assert!(ens.probes.iter().all(|path| path[s].iter().all(|&u| u == j0(&wave, t))));
    }
    assert_eq!(ens.final_fields[0][0], 0.5 + 2.0 * 0.5);
}

#[test]
fn ensemble_mean_is_the_initial_value() {
    let ens = simulate_paths(&config(heat(0.3), 64, 100, 400)).unwrap();
    for x in [0.0, 3.0, -7.5] {
        let est = estimate_moments_at(&ens, &[2], x).unwrap();
        let (m, se) = est.mean;
        assert!(se > 0.0);
        assert!((m - 1.0).abs() < 3.0 * se, "x = {x}: {m} +- {se}");
    }
    for s in 0..ens.snapshot_steps.len() {
        let means: Vec<f64> = ens
            .probes
            .iter()
            .map(|path| path[s].iter().sum::<f64>() / path[s].len() as f64)
            .collect();
        let (m, se) = jackknife_mean(&means);
        assert!((m - 1.0).abs() < 3.0 * se, "t = {}: {m} +- {se}", ens.snapshot_times[s]);
    }
}

/// `sum_m 2 c_H xi_m^h d_xi int_0^t |F Y(s, xi_m)|^2 ds` by direct quadrature of the kernel.
fn discrete_first_chaos(c: &SimConfig) -> f64 {
    let p = &c.params;
    let d = std::f64::consts::PI / c.half_width;
    let t = c.t_max;
    let q = 1.0 / (2.0 * p.b() - 1.0);
    let opts = QuadOptions {
        rel_tol: 1e-9,
        ..Default::default()
    };
    (1..=c.n_modes)
        .map(|m| {
            let xi = m as f64 * d;
            // s = t v^q removes the s^(2b-2) singularity
            let f = |v: f64| {
                if v == 0.0 {
                    return 0.0;
                }
                let s = t * v.powf(q);
                let y = fourier_y(p, s, xi).unwrap();
                y * y * t * q * v.powf(q - 1.0)
            };
            let time = integrate(&f, 0.0, 1.0, &opts).value;
            2.0 * p.c_h() * xi.powf(1.0 - 2.0 * p.h()) * d * time
        })
        .sum()
}

#[test]
fn first_chaos_is_exact_in_law() {
    for beta in [1.0, 0.8] {
        let lam = 0.05;
        let p = ModelParams::builder().beta(beta).h(0.4).lambda(lam).build().unwrap();
        let c = config(p, 128, 100, 400);
        let ens = simulate_paths(&c).unwrap();
        let v: Vec<f64> = ens
            .final_fields
            .iter()
            .map(|f| f.iter().map(|u| (u - 1.0) * (u - 1.0)).sum::<f64>() / f.len() as f64)
            .collect();
        let (m, se) = jackknife_mean(&v);
        let want = lam * lam * discrete_first_chaos(&c);
        // the second chaos adds a relative O(lambda^2)
        assert!(
            (m - want).abs() < 3.0 * se + 5e-3 * want,
            "beta {beta}: {m} +- {se} vs {want}"
        );
    }
}

#[test]
fn reproducible_for_any_thread_count() {
    let c = config(heat(0.3), 32, 40, 6);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_paths(&c).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, simulate_paths(&c).unwrap());
    let other = SimConfig { seed: 12, ..c };
    assert_ne!(a.final_fields, simulate_paths(&other).unwrap().final_fields);
    // path k does not depend on how many paths run
    let fewer = SimConfig { n_paths: 2, ..c };
    assert_eq!(simulate_paths(&fewer).unwrap().final_fields[..], a.final_fields[..2]);
}

#[test]
fn moments_are_translation_invariant() {
    let c = config(heat(0.35), 128, 125, 400);
    let ens = simulate_paths(&c).unwrap();
    let a = estimate_moments_at(&ens, &[2, 4], 0.0).unwrap();
    let b = estimate_moments_at(&ens, &[2, 4], c.half_width / 2.0).unwrap();
    assert_eq!(b.x, 5.0);
    for p in [2, 4] {
        let ((m1, s1), (m2, s2)) = (a.moments[&p], b.moments[&p]);
        assert!((m1 - m2).abs() < 3.0 * (s1 * s1 + s2 * s2).sqrt(), "p = {p}");
    }
}

#[test]
fn grid_refinement_is_stable() {
    let coarse = config(heat(0.35), 128, 125, 300);
    let fine = SimConfig {
        n_modes: 256,
        n_time: 250,
        ..coarse
    };
    let est = |c: &SimConfig| estimate_moments(&simulate_paths(c).unwrap(), &[2]).unwrap();
    let (a, b) = (est(&coarse), est(&fine));
    let ((m1, s1), (m2, s2)) = (a.moments_averaged[&2], b.moments_averaged[&2]);
    assert!((m1 - m2).abs() < (s1 * s1 + s2 * s2).sqrt() + 0.05 * m2, "{m1} +- {s1} vs {m2} +- {s2}");
}

#[test]
fn second_moment_follows_the_chaos_series() {
    let mut c = config(heat(0.35), 256, 256, 300);
    c.n_chaos_ref = 3;
    let ens = simulate_paths(&c).unwrap();
    let est = estimate_moments(&ens, &[2]).unwrap();
    let (r, _) = est.reference_second_moment.unwrap();
    let (m, se) = est.moments_averaged[&2];
    assert!((m - r).abs() < (3.0 * se).max(0.1 * r), "{m} +- {se} vs {r}");
    let mut previous = 1.0;
    for &(t, m, se) in est.second_moment_path.iter().filter(|e| [0.125, 0.25].contains(&e.0)) {
        let r = second_moment_truncated(&c.params, t, 3).unwrap().value;
        assert!(r > previous);
        assert!((m - r).abs() < (3.0 * se).max(0.1 * r), "t = {t}: {m} +- {se} vs {r}");
        previous = r;
    }
}

#[test]
fn holder_exponents_of_the_heat_equation() {
    let mut c = config(heat(0.35), 512, 500, 200);
    c.half_width = 20.0;
    let ens = simulate_paths(&c).unwrap();
    let (space, time) = estimate_holder(&ens).unwrap();
    let (k, ks) = space.exponent.unwrap();
    let (r, rs) = time.exponent.unwrap();
    assert!((k - 0.35).abs() < 0.15 && ks > 0.0, "space {k}");
    assert!((r - 0.175).abs() < 0.1 && rs > 0.0, "time {r}");
    assert!(space.separations.len() >= 3 && time.separations.len() >= 3);
}

#[test]
fn holder_needs_resolution() {
    let ens = simulate_paths(&config(heat(0.35), 16, 300, 2)).unwrap();
    assert!(matches!(estimate_holder(&ens), Err(Error::InsufficientResolution(_))));
    let ens = simulate_paths(&config(heat(0.35), 256, 64, 2)).unwrap();
    assert!(matches!(estimate_holder(&ens), Err(Error::InsufficientResolution(_))));
    let est = estimate_moments(&ens, &[2]).unwrap();
    assert!(est.space_holder_slope.is_none() && est.time_holder_slope.is_none());
}

#[test]
fn config_validation() {
    let frac = ModelParams::builder().h0(0.7).build().unwrap();
    assert!(matches!(simulate_paths(&config(frac, 8, 8, 1)), Err(Error::Config(_))));
    let rough = heat(0.2);
    assert!(matches!(simulate_paths(&config(rough, 8, 8, 1)), Err(Error::Config(_))));
    let mut c = config(heat(0.3), 8, 8, 1);
    c.n_paths = 0;
    assert!(c.validate().is_err());
    c.n_paths = 1;
    c.n_chaos_ref = 5;
    assert!(c.validate().is_err());
    c.n_chaos_ref = 0;
    c.t_max = 0.0;
    assert!(c.validate().is_err());
    let coarse = config(heat(0.3), 4, 8, 1);
    assert_eq!(coarse.validate().unwrap().len(), 1);
    assert!(config(heat(0.3), 512, 8, 1).validate().unwrap().is_empty());
}

#[test]
fn csv_and_json_export() {
    let c = config(heat(0.3), 32, 40, 3);
    let ens = simulate_paths(&c).unwrap();
    let mut out = Vec::new();
    ens.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path,t,x,u"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3 * ens.snapshot_steps.len() * ens.probe_index.len());
    let last = rows.last().unwrap();
    assert_eq!(last[0], 2.0);
    assert_eq!(last[1], c.t_max);
    assert_eq!(last[3], ens.final_fields[2][*ens.probe_index.last().unwrap()]);

    let est = estimate_moments(&ens, &[2, 4]).unwrap();
    assert!(est.moments.values().all(|&(_, se)| se > 0.0));
    let back: SimEstimate = serde_json::from_str(&serde_json::to_string(&est).unwrap()).unwrap();
    assert_eq!(back, est);
}

proptest! {
    #[test]
    fn jackknife_error_of_the_mean(v in prop::collection::vec(-1e3f64..1e3, 2..40)) {
        let (m, se) = jackknife_mean(&v);
        let (m2, se2) = mean_and_se(&v);
        prop_assert!((m - m2).abs() <= 1e-9 * (1.0 + m2.abs()));
        prop_assert!((se - se2).abs() <= 1e-8 * (1.0 + se2));
    }
}
