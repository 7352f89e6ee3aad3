//! Command-line front end: argument parsing, flat config files, output formatting and manifests.
//!
//! Every subcommand prints one JSON object or CSV table to standard output, or writes it to
//! `--out PATH`. A run manifest goes next to the output (`PATH` with extension
//! `manifest.json`) or, without `--out`, to standard error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::second_moment_truncated;
use crate::error::Error;
use crate::kernels::{fourier_y, fourier_z, fourier_zstar, weighted_energy, ModelParams, ParamsBuilder};
use crate::mlf::{ml_eval, MLQuery};
use crate::regimes::{regime_report, RegimeReport};
use crate::sim::{estimate_moments, simulate_paths, SimConfig};
use crate::verify::{run_suite, Suite};

/// Exit status for a failed check.
pub const EXIT_CHECK: i32 = 1;
/// Exit status for usage, configuration and domain errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fracspde", version, about = "Stochastic fractional diffusion: kernels, regimes, chaos moments and simulation")]
pub struct Cli {
    /// Flat `key = value` file; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-parameter Mittag-Leffler function.
    Mlf {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, allow_negative_numbers = true)]
        z: f64,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Fourier kernel value, or its weighted energy with `--energy A`.
    Kernel {
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        xi: f64,
        /// y, z or zstar.
        #[arg(long, default_value = "y")]
        kind: String,
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<f64>,
    },
    /// Existence verdict and exponents.
    Regime {
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Regime report over a parameter grid, as CSV.
    Sweep {
        #[command(flatten)]
        params: ParamFlags,
        /// Comma-separated `KEY=start:stop:step` axes.
        #[arg(long)]
        grid: String,
        /// Two-tone existence plot of a two-axis grid.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Chaos norms `n = 0..=N` and the truncated second moment.
    Chaos {
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Monte Carlo ensemble; `--out PATH` writes the CSV there and the estimate next to it.
    Simulate {
        #[command(flatten)]
        params: ParamFlags,
        #[command(flatten)]
        sim: SimFlags,
        /// Moment orders.
        #[arg(long, value_delimiter = ',', default_value = "2,4")]
        p: Vec<u32>,
    },
    /// Built-in identity and property checks.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long = "H0", alias = "h0")]
    pub h0: Option<f64>,
    #[arg(long = "H", alias = "h")]
    pub h: Option<f64>,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub mu1: Option<f64>,
}

impl ParamFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        let f = |v: Option<f64>| v.map(format_f64);
        vec![
            ("alpha", f(self.alpha)),
            ("beta", f(self.beta)),
            ("gamma", f(self.gamma)),
            ("nu", f(self.nu)),
            ("lambda", f(self.lambda)),
            ("H0", f(self.h0)),
            ("H", f(self.h)),
            ("mu0", f(self.mu0)),
            ("mu1", f(self.mu1)),
        ]
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimFlags {
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    #[arg(long = "n-time")]
    pub n_time: Option<usize>,
    /// Half-width of the periodic domain.
    #[arg(long = "L", alias = "half-width")]
    pub half_width: Option<f64>,
    #[arg(long = "n-modes")]
    pub n_modes: Option<usize>,
    #[arg(long = "n-paths")]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "n-chaos-ref")]
    pub n_chaos_ref: Option<usize>,
}

impl SimFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        let s = |v: Option<usize>| v.map(|x| x.to_string());
        vec![
            ("t_max", self.t_max.map(format_f64)),
            ("n_time", s(self.n_time)),
            ("L", self.half_width.map(format_f64)),
            ("n_modes", s(self.n_modes)),
            ("n_paths", s(self.n_paths)),
            ("seed", self.seed.map(|x| x.to_string())),
            ("n_chaos_ref", s(self.n_chaos_ref)),
        ]
    }
}

const PARAM_KEYS: [&str; 9] = ["alpha", "beta", "gamma", "nu", "lambda", "H0", "H", "mu0", "mu1"];
const SIM_KEYS: [&str; 7] = ["t_max", "n_time", "L", "n_modes", "n_paths", "seed", "n_chaos_ref"];
const OTHER_KEYS: [&str; 2] = ["n", "t"];

/// Canonical spelling of a config key, or `None` if unknown.
pub fn canonical_key(key: &str) -> Option<&'static str> {
    let k = key.trim().replace('-', "_");
    let folded = match k.to_ascii_lowercase().as_str() {
        "h0" => "H0".to_string(),
        "h" => "H".to_string(),
        "l" | "half_width" => "L".to_string(),
        other => other.to_string(),
    };
    PARAM_KEYS
        .iter()
        .chain(&SIM_KEYS)
        .chain(&OTHER_KEYS)
        .find(|&&c| c == folded)
        .copied()
}

/// Parses flat `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = canonical_key(k)
            .ok_or_else(|| Error::Config(format!("line {}: unknown key {:?}", i + 1, k.trim())))?;
        let value = v.trim();
        if value.is_empty() {
            return Err(Error::Config(format!("line {}: empty value for {key}", i + 1)));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key}", i + 1)));
        }
    }
    Ok(out)
}

/// Config values overridden by every flag that is present.
pub fn resolve(
    config: &BTreeMap<String, String>,
    flags: &[(&str, Option<String>)],
) -> BTreeMap<String, String> {
    let mut out = config.clone();
    for (k, v) in flags {
        if let Some(v) = v {
            out.insert(k.to_string(), v.clone());
        }
    }
    out
}

fn number<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, Error> {
    map.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        })
        .transpose()
}

/// Builds model parameters from resolved keys, defaulting the rest.
pub fn params_from(map: &BTreeMap<String, String>) -> Result<ModelParams, Error> {
    let mut b = ParamsBuilder::default();
    let slots: [(&str, &mut f64); 9] = [
        ("alpha", &mut b.alpha),
        ("beta", &mut b.beta),
        ("gamma", &mut b.gamma),
        ("nu", &mut b.nu),
        ("lambda", &mut b.lambda),
        ("H0", &mut b.h0),
        ("H", &mut b.h),
        ("mu0", &mut b.mu0),
        ("mu1", &mut b.mu1),
    ];
    for (k, slot) in slots {
        if let Some(v) = number(map, k)? {
            *slot = v;
        }
    }
    b.build()
}

/// Builds a simulation config from resolved keys, defaulting the rest.
pub fn sim_config_from(map: &BTreeMap<String, String>) -> Result<SimConfig, Error> {
    let mut c = SimConfig::new(params_from(map)?);
    if let Some(v) = number(map, "t_max")? {
        c.t_max = v;
    }
    if let Some(v) = number(map, "n_time")? {
        c.n_time = v;
    }
    if let Some(v) = number(map, "L")? {
        c.half_width = v;
    }
    if let Some(v) = number(map, "n_modes")? {
        c.n_modes = v;
    }
    if let Some(v) = number(map, "n_paths")? {
        c.n_paths = v;
    }
    if let Some(v) = number(map, "seed")? {
        c.seed = v;
    }
    if let Some(v) = number(map, "n_chaos_ref")? {
        c.n_chaos_ref = v;
    }
    Ok(c)
}

fn param_map(p: &ModelParams) -> BTreeMap<String, String> {
    let b = p.to_builder();
    let vals = [b.alpha, b.beta, b.gamma, b.nu, b.lambda, b.h0, b.h, b.mu0, b.mu1];
    PARAM_KEYS
        .iter()
        .zip(vals)
        .map(|(k, v)| (k.to_string(), format_f64(v)))
        .collect()
}

/// `v` with 17 significant digits, trailing zeros dropped; plain notation for moderate exponents.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let neg = mant.starts_with('-');
    let mut digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }
    let mut s = String::new();
    if neg {
        s.push('-');
    }
    if (-5..17).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                s.push_str(&digits);
                s.push_str(&"0".repeat(int_len - digits.len()));
            } else {
                s.push_str(&digits[..int_len]);
                s.push('.');
                s.push_str(&digits[int_len..]);
            }
        } else {
            s.push_str("0.");
            s.push_str(&"0".repeat((-exp - 1) as usize));
            s.push_str(&digits);
        }
    } else {
        s.push_str(&digits[..1]);
        if digits.len() > 1 {
            s.push('.');
            s.push_str(&digits[1..]);
        }
        let _ = write!(s, "e{exp}");
    }
    s
}

struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }
}

/// Compact JSON with 17 significant digits per number and a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    v.serialize(&mut ser).expect("serializable");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8 JSON")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_time: f64,
    pub versions: String,
    pub seed: Option<u64>,
}

/// Result of one invocation: standard output, standard error and exit status.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Invocation {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

struct Outcome {
    /// Primary output.
    body: String,
    /// Extra files `(extension, contents)` written next to `--out`.
    extra: Vec<(&'static str, String)>,
    params: BTreeMap<String, String>,
    seed: Option<u64>,
    warnings: Vec<String>,
    failed: bool,
}

impl Outcome {
    fn new(body: String, params: BTreeMap<String, String>) -> Self {
        Self {
            body,
            extra: Vec::new(),
            params,
            seed: None,
            warnings: Vec::new(),
            failed: false,
        }
    }
}

/// Parses and runs one command line (including the program name).
pub fn run<I, T>(args: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Invocation {
                    stderr: text,
                    code,
                    ..Default::default()
                }
            } else {
                Invocation {
                    stdout: text,
                    code,
                    ..Default::default()
                }
            };
        }
    };
    let start = Instant::now();
    let name = command_name(&cli.command);
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            return Invocation {
                stderr: format!("error: {e}\n"),
                code: EXIT_USAGE,
                ..Default::default()
            }
        }
    };
    let mut inv = Invocation {
        code: if outcome.failed { EXIT_CHECK } else { 0 },
        stderr: outcome.warnings.iter().map(|w| format!("warning: {w}\n")).collect(),
        ..Default::default()
    };
    let mut outputs = Vec::new();
    if let Some(path) = &cli.out {
        let mut files = vec![(path.clone(), outcome.body.clone())];
        for (ext, text) in &outcome.extra {
            files.push((path.with_extension(ext), text.clone()));
        }
        for (p, text) in files {
            if let Err(e) = std::fs::write(&p, text) {
                inv.stderr.push_str(&format!("error: cannot write {}: {e}\n", p.display()));
                inv.code = EXIT_USAGE;
                return inv;
            }
            outputs.push(p.display().to_string());
        }
    } else {
        inv.stdout = outcome.body;
    }
    let manifest = RunManifest {
        command: name.into(),
        params: outcome.params,
        outputs,
        wall_time: start.elapsed().as_secs_f64(),
        versions: format!("fracspde {}", env!("CARGO_PKG_VERSION")),
        seed: outcome.seed,
    };
    let text = to_json(&manifest);
    match &cli.out {
        Some(path) => {
            let p = manifest_path(path);
            if let Err(e) = std::fs::write(&p, text) {
                inv.stderr.push_str(&format!("error: cannot write {}: {e}\n", p.display()));
                inv.code = EXIT_USAGE;
            }
        }
        None => inv.stderr.push_str(&text),
    }
    inv
}

/// Where the manifest of a run with `--out path` goes.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Mlf { .. } => "mlf",
        Command::Kernel { .. } => "kernel",
        Command::Regime { .. } => "regime",
        Command::Sweep { .. } => "sweep",
        Command::Chaos { .. } => "chaos",
        Command::Simulate { .. } => "simulate",
        Command::Verify { .. } => "verify",
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>, Error> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome, Error> {
    let config = load_config(&cli.config)?;
    match &cli.command {
        Command::Mlf { a, b, z, tol } => {
            let mut q = MLQuery::new(*a, *b, *z);
            if let Some(t) = tol {
                q = q.with_tol(*t);
            }
            let r = ml_eval(q)?;
            let params = [("a", *a), ("b", *b), ("z", *z)]
                .iter()
                .map(|(k, v)| (k.to_string(), format_f64(*v)))
                .collect();
            Ok(Outcome::new(to_json(&r), params))
        }
        Command::Kernel {
            params,
            t,
            xi,
            kind,
            energy,
        } => {
            let p = params_from(&resolve(&config, &params.pairs()))?;
            let body = match energy {
                Some(a) => to_json(&weighted_energy(&p, *t, *a)?),
                None => {
                    let value = match kind.as_str() {
                        "y" => fourier_y(&p, *t, *xi)?,
                        "z" => fourier_z(&p, *t, *xi)?,
                        "zstar" => fourier_zstar(&p, *t, *xi)?,
                        other => return Err(Error::Config(format!("unknown kernel {other:?}"))),
                    };
                    #[derive(Serialize)]
                    struct KernelValue<'a> {
                        kind: &'a str,
                        t: f64,
                        xi: f64,
                        value: f64,
                    }
                    to_json(&KernelValue {
                        kind,
                        t: *t,
                        xi: *xi,
                        value,
                    })
                }
            };
            Ok(Outcome::new(body, param_map(&p)))
        }
        Command::Regime { params } => {
            let p = params_from(&resolve(&config, &params.pairs()))?;
            Ok(Outcome::new(to_json(&regime_report(&p)), param_map(&p)))
        }
        Command::Sweep { params, grid, svg } => {
            let base = resolve(&config, &params.pairs());
            let axes = parse_grid(grid)?;
            let rows = sweep(&base, &axes)?;
            let mut params = param_map(&params_from(&base)?);
            params.insert("grid".into(), grid.clone());
            let out = Outcome::new(sweep_csv(&axes, &rows), params);
            if let Some(path) = svg {
                let text = sweep_svg(&axes, &rows)?;
                std::fs::write(path, text)
                    .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(out)
        }
        Command::Chaos { params, n, t } => {
            let map = resolve(
                &config,
                &[
                    params.pairs(),
                    vec![("n", n.map(|v| v.to_string())), ("t", t.map(format_f64))],
                ]
                .concat(),
            );
            let p = params_from(&map)?;
            let n: usize = number(&map, "n")?.ok_or_else(|| Error::Config("--n is required".into()))?;
            let t: f64 = number(&map, "t")?.ok_or_else(|| Error::Config("--t is required".into()))?;
            let m = second_moment_truncated(&p, t, n)?;
            let mut params = param_map(&p);
            params.insert("n".into(), n.to_string());
            params.insert("t".into(), format_f64(t));
            Ok(Outcome::new(to_json(&m), params))
        }
        Command::Simulate { params, sim, p } => {
            let map = resolve(&config, &[params.pairs(), sim.pairs()].concat());
            let cfg = sim_config_from(&map)?;
            let ens = simulate_paths(&cfg)?;
            let est = estimate_moments(&ens, p)?;
            let mut csv = Vec::new();
            ens.write_csv(&mut csv)
                .map_err(|e| Error::Config(format!("cannot format CSV: {e}")))?;
            let csv = String::from_utf8(csv).expect("ASCII CSV");
            let mut params = param_map(&cfg.params);
            for k in SIM_KEYS {
                if let Some(v) = map.get(k) {
                    params.insert(k.into(), v.clone());
                }
            }
            let mut out = if cli.out.is_some() {
                let mut o = Outcome::new(csv, params);
                o.extra.push(("json", to_json(&est)));
                o
            } else {
                Outcome::new(to_json(&est), params)
            };
            out.seed = Some(cfg.seed);
            out.warnings = ens.warnings.clone();
            Ok(out)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let results = run_suite(suite);
            let mut table = String::new();
            for r in &results {
                let _ = writeln!(
                    table,
                    "{:<8} {:<4} {} ({})",
                    r.suite.name(),
                    if r.passed { "pass" } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            let passed = results.iter().filter(|r| r.passed).count();
            let _ = writeln!(table, "{passed}/{} checks passed", results.len());
            let mut params = BTreeMap::new();
            params.insert("suite".into(), suite.name().into());
            let mut out = Outcome::new(table, params);
            out.failed = passed != results.len();
            Ok(out)
        }
    }
}

/// One sweep axis: a parameter key and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: &'static str,
    pub values: Vec<f64>,
}

/// Parses `KEY=start:stop:step[,KEY=...]`; `stop` is included when it lies on the lattice.
pub fn parse_grid(spec: &str) -> Result<Vec<Axis>, Error> {
    let bad = |m: String| Error::Config(format!("--grid: {m}"));
    let mut axes: Vec<Axis> = Vec::new();
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, range) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected KEY=start:stop:step, got {part:?}")))?;
        let key = canonical_key(k)
            .filter(|k| PARAM_KEYS.contains(k))
            .ok_or_else(|| bad(format!("unknown parameter {:?}", k.trim())))?;
        if axes.iter().any(|a| a.key == key) {
            return Err(bad(format!("{key} appears twice")));
        }
        let nums: Vec<f64> = range
            .split(':')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(format!("cannot parse range {range:?}")))?;
        let [start, stop, step] = nums[..] else {
            return Err(bad(format!("range {range:?} needs start:stop:step")));
        };
        if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
            return Err(bad(format!("invalid range {range:?}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(bad(format!("range {range:?} has {count} points")));
        }
        let values = (0..count).map(|i| start + i as f64 * step).collect();
        axes.push(Axis { key, values });
    }
    if axes.is_empty() {
        return Err(bad("no axes".into()));
    }
    Ok(axes)
}

/// Regime reports on the Cartesian grid; the first axis varies slowest.
pub fn sweep(
    base: &BTreeMap<String, String>,
    axes: &[Axis],
) -> Result<Vec<(Vec<f64>, RegimeReport)>, Error> {
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    (0..total)
        .into_par_iter()
        .map(|mut i| {
            let mut point = vec![0.0; axes.len()];
            for (d, a) in axes.iter().enumerate().rev() {
                point[d] = a.values[i % a.values.len()];
                i /= a.values.len();
            }
            let mut map = base.clone();
            for (a, v) in axes.iter().zip(&point) {
                map.insert(a.key.into(), format_f64(*v));
            }
            let p = params_from(&map)?;
            Ok((point, regime_report(&p)))
        })
        .collect()
}

fn sweep_csv(axes: &[Axis], rows: &[(Vec<f64>, RegimeReport)]) -> String {
    let mut s = String::new();
    for a in axes {
        s.push_str(a.key);
        s.push(',');
    }
    s.push_str("exists,margin,theta,lambda_exp,p_exp,t_exp,rho,kappa,rho_capped,kappa_capped,time_holder_valid\n");
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    for (point, r) in rows {
        for v in point {
            s.push_str(&format_f64(*v));
            s.push(',');
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.exists,
            format_f64(r.margin),
            format_f64(r.theta),
            opt(r.lambda_exp),
            opt(r.p_exp),
            opt(r.t_exp),
            opt(r.rho),
            opt(r.kappa),
            opt(r.rho_capped),
            opt(r.kappa_capped),
            r.time_holder_valid.map(|b| b.to_string()).unwrap_or_default()
        );
    }
    s
}

/// Existence region of a two-axis sweep: one cell per grid point, first axis horizontal.
pub fn sweep_svg(axes: &[Axis], rows: &[(Vec<f64>, RegimeReport)]) -> Result<String, Error> {
    if axes.len() != 2 {
        return Err(Error::Config(format!("--svg needs exactly two axes, got {}", axes.len())));
    }
    let (nx, ny) = (axes[0].values.len(), axes[1].values.len());
    let (w, h, m) = (480.0, 480.0, 48.0);
    let (cw, ch) = (w / nx as f64, h / ny as f64);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        w + 2.0 * m,
        h + 2.0 * m
    );
    for (k, (_, r)) in rows.iter().enumerate() {
        let (i, j) = (k / ny, k % ny);
        let fill = if r.exists { "#3b6ea5" } else { "#e6e6e6" };
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            m + i as f64 * cw,
            m + h - (j + 1) as f64 * ch,
            cw,
            ch
        );
    }
    let (x0, x1) = (axes[0].values[0], axes[0].values[nx - 1]);
    let (y0, y1) = (axes[1].values[0], axes[1].values[ny - 1]);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{} ({} to {})</text>"#,
        m + w / 2.0,
        h + 1.6 * m,
        axes[0].key,
        format_f64(x0),
        format_f64(x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{} ({} to {})</text>"#,
        m / 2.0,
        m + h / 2.0,
        m / 2.0,
        m + h / 2.0,
        axes[1].key,
        format_f64(y0),
        format_f64(y1)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Applies `FRACSPDE_THREADS`, then runs the command line and returns its exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if let Ok(v) = std::env::var("FRACSPDE_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: FRACSPDE_THREADS must be a positive integer, got {v:?}");
                return EXIT_USAGE;
            }
        }
    }
    let inv = run(args);
    print!("{}", inv.stdout);
    eprint!("{}", inv.stderr);
    inv.code
}
