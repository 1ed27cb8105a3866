//! `iet`: experiment drivers and inspection verbs over `iet-core`.
//!
//! Exit status is 0 when every check of the run passes, 1 when a check fails
//! and 2 on configuration or runtime errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use iet_core::experiments::{self, Experiment, RunConfig};
use iet_core::lyapunov::{top_exponent_twisted, top_exponents_zorich, EstimatorConfig, ExponentEstimate, FiberMode};
use iet_core::numeric::seeded_simplex;
use iet_core::renorm::orbit_dump;
use iet_core::suspension::{build_suspension, check_cell, fp_map, s_of_theta, sweep_lengths};
use iet_core::surface::square_profile;
use iet_core::{genus_and_singularities, rauzy_class, IetMap, Permutation, Precision};

#[derive(Parser)]
#[command(name = "iet", version, about = "Interval exchange renormalization experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Discrepancy of T^p over sampled lengths and a subinterval grid.
    Discrepancy(RunArgs),
    /// Spectral-dimension estimates over a frequency grid.
    SpectralDim(RunArgs),
    /// chi2/chi1 and the fiber-averaged twisted exponent.
    KzRatio(RunArgs),
    /// Twisted exponents over rational fiber points.
    Positivity(RunArgs),
    /// Top-k exponents of the Zorich cocycle.
    Lyapunov(LyapArgs),
    /// Top exponent of the twisted cocycle.
    TwistedLyapunov(LyapArgs),
    /// Build the (p, n) suspension and check it.
    Suspension(SuspArgs),
    /// Invariants of a permutation and its Rauzy class.
    ClassInfo(ClassArgs),
    /// First N Zorich steps from seeded random lengths, as JSON lines.
    OrbitDump(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with RunConfig keys; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    perm: Option<String>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    nvec: Option<Vec<i64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    precision_bits: Option<u32>,
    #[arg(long)]
    estimator_bits: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    n_schedule: Option<Vec<usize>>,
    /// Dyadic schedule 1, 2, 4, ... up to this value.
    #[arg(long, conflicts_with = "n_schedule")]
    n_max: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    orbit_length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    renorm_period: Option<usize>,
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    roof: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    observable: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Skip the genus-one control.
    #[arg(long)]
    no_control: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LyapArgs {
    #[arg(long, default_value = "1234/4321")]
    perm: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 64)]
    segments: usize,
    #[arg(long, default_value_t = 200)]
    orbit_length: usize,
    #[arg(long, default_value_t = 5)]
    renorm_period: usize,
    #[arg(long, default_value_t = 50)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1024)]
    precision_bits: u32,
    /// zero | lebesgue | h-fiber | rational
    #[arg(long, default_value = "zero")]
    fiber: String,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    nvec: Option<Vec<i64>>,
    /// Per-segment exponents as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuspArgs {
    #[arg(long, default_value = "1234/4321")]
    perm: String,
    #[arg(long, default_value_t = 3)]
    p: u64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    nvec: Vec<i64>,
    /// Lengths of the letters other than the last top one, left to right.
    #[arg(long, value_delimiter = ',')]
    lambda_hat: Option<Vec<f64>>,
    /// Leaf parameter in (0, 1).
    #[arg(long, conflicts_with = "theta")]
    s: Option<f64>,
    /// Direction in (0, pi/2), mapped to s.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 128)]
    precision_bits: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassArgs {
    #[arg(long)]
    perm: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, default_value = "1234/4321")]
    perm: String,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    precision_bits: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Discrepancy(a) => experiment(Experiment::Discrepancy, a),
        Cmd::SpectralDim(a) => experiment(Experiment::SpectralDim, a),
        Cmd::KzRatio(a) => experiment(Experiment::KzRatio, a),
        Cmd::Positivity(a) => experiment(Experiment::Positivity, a),
        Cmd::Lyapunov(a) => lyapunov(a, false),
        Cmd::TwistedLyapunov(a) => lyapunov(a, true),
        Cmd::Suspension(a) => suspension(a),
        Cmd::ClassInfo(a) => class_info(a),
        Cmd::OrbitDump(a) => dump(a),
    }
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn load_config(exp: Experiment, path: Option<&Path>) -> Result<RunConfig> {
    let preset = RunConfig::preset(exp);
    let Some(path) = path else { return Ok(preset) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(e) = file.get("experiment").and_then(|v| v.as_str()) {
        if e != exp.as_str() {
            bail!("config file is for experiment {e}, not {exp}");
        }
    }
    let mut base = toml::Table::try_from(&preset)?;
    merge(&mut base, file);
    Ok(base.try_into()?)
}

fn experiment(exp: Experiment, a: RunArgs) -> Result<bool> {
    let mut cfg = load_config(exp, a.config.as_deref())?;
    macro_rules! set {
        ($($src:ident => $($dst:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$src { cfg.$($dst).+ = v; })*
        };
    }
    set!(perm => perm, p => p, seed => seed, precision_bits => precision_bits, estimator_bits => estimator_bits, n_schedule => sizes.n_schedule,
        samples => sizes.samples, grid => sizes.grid, segments => sizes.segments, orbit_length => sizes.orbit_length,
        burn_in => sizes.burn_in, renorm_period => sizes.renorm_period, s_max => s_max, threshold => threshold);
    if let Some(n) = a.nvec {
        cfg.nvec = Some(n);
    }
    if let Some(h) = a.roof {
        cfg.roof = Some(h);
    }
    if let Some(f) = a.observable {
        cfg.observable = Some(f);
    }
    if let Some(n) = a.n_max {
        cfg.sizes.n_schedule = iet_core::lyapunov::dyadic_schedule(n);
    }
    if a.no_control {
        cfg.control = false;
    }
    if a.out.is_some() {
        cfg.output_path = a.out;
    }
    let rec = experiments::run(&cfg)?;
    let report = json!({
        "experiment": exp.as_str(),
        "summary": rec.summary,
        "checks": rec.checks,
        "passed": rec.passed(),
        "wall_time_s": rec.wall_time_s,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(rec.passed())
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn checks_json(checks: &[(&str, bool)]) -> Value {
    Value::Array(checks.iter().map(|(n, ok)| json!({"name": n, "passed": ok})).collect())
}

fn lyapunov(a: LyapArgs, twisted: bool) -> Result<bool> {
    let pi = Permutation::parse(&a.perm)?;
    let fiber_mode = FiberMode::parse(&a.fiber, a.p, a.nvec.clone())?;
    let cfg = EstimatorConfig {
        orbit_length: a.orbit_length,
        segments: a.segments,
        renorm_period: a.renorm_period,
        seed: a.seed,
        precision_bits: a.precision_bits,
        fiber_mode,
        burn_in: a.burn_in,
        ..Default::default()
    };
    let est: Vec<ExponentEstimate> =
        if twisted { vec![top_exponent_twisted(&pi, &cfg)?] } else { top_exponents_zorich(&pi, a.k, &cfg)? };
    let finite = est.iter().all(|e| e.value.is_finite() && e.stderr.is_finite());
    let mut checks = vec![("estimates finite", finite)];
    if !twisted {
        checks.push(("top exponent positive", est[0].value > 0.0));
    }
    let passed = checks.iter().all(|c| c.1);
    let verb = if twisted { "twisted-lyapunov" } else { "lyapunov" };
    let report = json!({
        "verb": verb,
        "perm": pi,
        "config": cfg,
        "estimates": est.iter().map(|e| json!({
            "value": e.value, "stderr": e.stderr, "samples": e.samples, "discarded": e.diagnostics.discarded,
        })).collect::<Vec<_>>(),
        "checks": checks_json(&checks),
        "passed": passed,
    });
    if let Some(path) = &a.csv {
        let mut text = String::from("segment");
        for i in 1..=est.len() {
            text.push_str(&format!(",chi{i}"));
        }
        text.push('\n');
        for s in 0..cfg.segments {
            text.push_str(&s.to_string());
            for e in &est {
                text.push_str(&format!(",{:.16e}", e.diagnostics.per_segment[s]));
            }
            text.push('\n');
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &a.out {
        write_json(dir, &format!("{verb}-s{}.json", a.seed), &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(passed)
}

fn suspension(a: SuspArgs) -> Result<bool> {
    let pi = Permutation::parse(&a.perm)?;
    let prec = Precision::with_bits(a.precision_bits);
    let lambda = match (&a.lambda_hat, a.s.or(a.theta.map(s_of_theta).transpose()?)) {
        (Some(hat), Some(s)) => {
            let hat: Vec<_> = hat.iter().map(|&x| prec.float(x)).collect();
            let fp = fp_map(&pi, &hat, &prec.float(s), a.p)?;
            if fp.degenerate {
                bail!("the leaf parameter gives a degenerate length vector");
            }
            fp.lambda
        }
        (None, None) => sweep_lengths(&pi, a.p, prec)?,
        _ => bail!("--lambda-hat needs --s or --theta, and the reverse"),
    };
    let nvec = if a.nvec.is_empty() { vec![1; pi.d()] } else { a.nvec.clone() };
    let t = IetMap::new(pi.clone(), lambda, prec)?;
    let s = build_suspension(&t, &nvec, a.p)?;
    let cell = check_cell(&s)?;
    let failures: Vec<&str> = cell.suspension_failures().into_iter().chain(cell.surface_failures()).collect();
    let passed = failures.is_empty();
    let table: Vec<Value> = s
        .intervals()
        .iter()
        .map(|iv| {
            json!({
                "name": iv.name,
                "start": iv.start.to_f64(),
                "end": iv.end.to_f64(),
                "image_start": iv.image_start.to_f64(),
                "stopping_time": iv.stopping_time,
                "residue": iv.stopping_time as u64 % a.p,
            })
        })
        .collect();
    let report = json!({
        "perm": pi,
        "p": a.p,
        "nvec": nvec,
        "base_lengths": t.lengths().iter().map(|x| x.to_f64()).collect::<Vec<_>>(),
        "intervals": table,
        "perm_s": s.perm_s(),
        "lengths_s": s.lengths_s().iter().map(|x| x.to_f64()).collect::<Vec<_>>(),
        "checks": cell,
        "failures": failures,
        "passed": passed,
    });
    if let Some(dir) = &a.out {
        let tag: Vec<String> = nvec.iter().map(|n| n.to_string()).collect();
        write_json(dir, &format!("suspension-p{}-n{}.json", a.p, tag.join("_")), &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(passed)
}

fn class_info(a: ClassArgs) -> Result<bool> {
    let pi = Permutation::parse(&a.perm)?;
    let sd = genus_and_singularities(&pi)?;
    let class = rauzy_class(&pi);
    let d = pi.d();
    let checks = [
        ("d = 2g + kappa - 1", d == 2 * sd.genus + sd.num_singularities - 1),
        ("omega antisymmetric", sd.omega.is_antisymmetric()),
        ("class strongly connected", class.is_strongly_connected()),
    ];
    let passed = checks.iter().all(|c| c.1);
    let profile = square_profile(&pi).ok();
    let report = json!({
        "perm": pi,
        "d": d,
        "genus": sd.genus,
        "singularities": sd.num_singularities,
        "kernel_dim": sd.kernel_dim,
        "omega": sd.omega,
        "class_size": class.len(),
        "square_profile": profile,
        "checks": checks_json(&checks),
        "passed": passed,
    });
    if let Some(dir) = &a.out {
        let stem = format!("class-{:08x}", experiments::perm_hash(&pi));
        write_json(dir, &format!("{stem}.json"), &report)?;
        write_json(dir, &format!("{stem}-diagram.json"), &class.to_json())?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(passed)
}

fn dump(a: DumpArgs) -> Result<bool> {
    let pi = Permutation::parse(&a.perm)?;
    let prec = Precision::with_bits(a.precision_bits);
    let lambda = seeded_simplex(a.seed, pi.d(), prec.bits);
    let lines = orbit_dump(&lambda, &pi, prec, a.steps)?;
    let mut text = lines.join("\n");
    text.push('\n');
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("orbit-{:08x}-s{}.jsonl", experiments::perm_hash(&pi), a.seed));
            fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(true)
}
