//! Run drivers shared by the CLI and the Python bindings: configuration,
//! the four experiments, and CSV/JSON artifacts.
//!
//! Every summary scalar of a [`ResultRecord`] is a deterministic function of
//! its series tables; the same [`RunConfig`] reproduces the tables byte for byte.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::combinatorics::{genus_and_singularities, rauzy_class, Permutation};
use crate::error::{Error, Result};
use crate::iet::{discrepancy_series, IetMap, LocallyConstantFunction, Subinterval, TwistParameter};
use crate::lyapunov::{
    fiber_point_exponents, growth_on_schedule, least_squares_slope, ratio, rational_fiber_points, top_exponent_twisted,
    top_exponents_zorich, upper_half_slope, EstimatorConfig, ExponentEstimate, FiberMode,
};
use crate::numeric::{is_prime, sample_simplex, Precision};

/// Threshold on the per-sample max slope in the discrepancy run.
pub const SLOPE_THRESHOLD: f64 = 0.05;
/// Bound on the genus-one control slope.
pub const CONTROL_BOUND: f64 = 0.02;
/// Band for the spectral-dimension histogram mass.
pub const DIM_BAND: (f64, f64) = (0.85, 2.0);
pub const DIM_BIN_WIDTH: f64 = 0.1;
/// Bin width of the fiber-exponent histogram.
pub const FIBER_BIN_WIDTH: f64 = 0.02;
const CONTROL_PERM: &str = "A B / B A";
const CONTROL_STREAM: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Discrepancy,
    SpectralDim,
    #[default]
    KzRatio,
    Positivity,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Discrepancy => "discrepancy",
            Experiment::SpectralDim => "spectral-dim",
            Experiment::KzRatio => "kz-ratio",
            Experiment::Positivity => "positivity",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrepancy" => Ok(Experiment::Discrepancy),
            "spectral-dim" => Ok(Experiment::SpectralDim),
            "kz-ratio" => Ok(Experiment::KzRatio),
            "positivity" => Ok(Experiment::Positivity),
            other => Err(Error::InvalidConfig(format!("unknown experiment {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    /// Orbit lengths `N` at which sums are recorded; strictly increasing.
    pub n_schedule: Vec<usize>,
    /// Sampled lengths `λ` (discrepancy, spectral-dim).
    pub samples: usize,
    /// Subinterval grid `k/grid` (discrepancy), frequency count (spectral-dim)
    /// or cap on fiber points (positivity).
    pub grid: usize,
    /// Estimator segments (kz-ratio, positivity, and `χ̂₁` for spectral-dim).
    pub segments: usize,
    pub orbit_length: usize,
    pub burn_in: usize,
    pub renorm_period: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            n_schedule: dyadic(1 << 14),
            samples: 11,
            grid: 4,
            segments: 64,
            orbit_length: 400,
            burn_in: 50,
            renorm_period: 5,
        }
    }
}

fn dyadic(n_max: usize) -> Vec<usize> {
    crate::lyapunov::dyadic_schedule(n_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub perm: String,
    pub p: u64,
    pub nvec: Option<Vec<i64>>,
    pub seed: u64,
    /// Working precision of lengths and breakpoints.
    pub precision_bits: u32,
    /// Working precision of the exponent estimators.
    pub estimator_bits: u32,
    pub sizes: Sizes,
    /// Frequencies `s` run over `(0, s_max]`.
    pub s_max: f64,
    /// Roof vector `h` for `ζ = s·h`; drawn from `[1/2, 3/2]^d` when absent.
    pub roof: Option<Vec<f64>>,
    /// Observable for the spectral run; a Gaussian vector made mean-zero when absent.
    pub observable: Option<Vec<f64>>,
    /// A fiber point counts as positive when `estimate - 3·stderr > threshold`.
    pub threshold: f64,
    /// Also run the genus-one control.
    pub control: bool,
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::KzRatio,
            perm: "1234/4321".into(),
            p: 5,
            nvec: None,
            seed: 1,
            precision_bits: 128,
            estimator_bits: 1024,
            sizes: Sizes::default(),
            s_max: 4.0,
            roof: None,
            observable: None,
            threshold: 0.0,
            control: true,
            output_path: None,
        }
    }
}

impl RunConfig {
    /// Desk-scale defaults per experiment.
    pub fn preset(experiment: Experiment) -> Self {
        let base = RunConfig { experiment, ..Default::default() };
        match experiment {
            Experiment::Discrepancy => base,
            Experiment::SpectralDim => RunConfig {
                sizes: Sizes { n_schedule: dyadic(1 << 16), samples: 16, grid: 12, ..Sizes::default() },
                ..base
            },
            Experiment::KzRatio => RunConfig {
                estimator_bits: 2048,
                sizes: Sizes { segments: 1000, orbit_length: 900, ..Sizes::default() },
                ..base
            },
            Experiment::Positivity => RunConfig {
                p: 3,
                estimator_bits: 4096,
                threshold: 0.02,
                sizes: Sizes { grid: 80, segments: 32, orbit_length: 800, ..Sizes::default() },
                ..base
            },
        }
    }

    pub fn permutation(&self) -> Result<Permutation> {
        Permutation::parse(&self.perm)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        let pi = self.permutation()?;
        let d = pi.d();
        let sd = genus_and_singularities(&pi)?;
        if sd.genus < 2 {
            return bad("the experiments need a class of genus at least 2");
        }
        if self.precision_bits < 64 || self.estimator_bits < 64 {
            return bad("precision_bits and estimator_bits must be at least 64");
        }
        let s = &self.sizes;
        if s.samples == 0 || s.grid == 0 || s.segments == 0 {
            return bad("samples, grid and segments must be positive");
        }
        if s.renorm_period == 0 || s.orbit_length < s.renorm_period {
            return bad("need orbit_length >= renorm_period >= 1");
        }
        let needs_schedule = matches!(self.experiment, Experiment::Discrepancy | Experiment::SpectralDim);
        if needs_schedule {
            if s.n_schedule.len() < 4 || s.n_schedule[0] == 0 {
                return bad("n_schedule needs at least four positive entries");
            }
            if s.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
                return bad("n_schedule must be strictly increasing");
            }
        }
        if matches!(self.experiment, Experiment::Discrepancy | Experiment::Positivity) && !is_prime(self.p) {
            return Err(Error::NotPrime(self.p));
        }
        if let Some(n) = &self.nvec {
            if n.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: n.len() });
            }
            if self.p > 0 && n.iter().all(|x| x.rem_euclid(self.p as i64) == 0) {
                return bad("nvec must be nonzero modulo p");
            }
        }
        if self.experiment == Experiment::SpectralDim {
            if !(self.s_max > 0.0 && self.s_max.is_finite()) {
                return bad("s_max must be positive");
            }
            if let Some(h) = &self.roof {
                if h.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: h.len() });
                }
                if h.iter().any(|x| !(*x > 0.0)) {
                    return bad("roof must be strictly positive");
                }
            }
            if let Some(f) = &self.observable {
                if f.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: f.len() });
                }
            }
        }
        Ok(())
    }

    fn estimator(&self, orbit_length: usize, fiber_mode: FiberMode) -> EstimatorConfig {
        EstimatorConfig {
            orbit_length,
            segments: self.sizes.segments,
            renorm_period: self.sizes.renorm_period,
            seed: self.seed,
            precision_bits: self.estimator_bits,
            fiber_mode,
            burn_in: self.sizes.burn_in,
            ..Default::default()
        }
    }

    /// `{experiment}-{class hash}-s{seed}`.
    pub fn stem(&self) -> Result<String> {
        let pi = self.permutation()?;
        Ok(format!("{}-{:08x}-s{}", self.experiment, perm_hash(&pi), self.seed))
    }
}

/// First 32 bits of the SHA-256 of the canonical word.
pub fn perm_hash(pi: &Permutation) -> u32 {
    let word: Vec<String> = pi.canonical_word().iter().map(|w| w.to_string()).collect();
    let digest = Sha256::digest(word.join(" ").as_bytes());
    u32::from_be_bytes([digest[0], digest[1], digest[2], digest[3]])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Cell::Int(i) => i as f64,
            Cell::Float(x) => x,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => write!(f, "{x:.16e}"),
        }
    }
}

fn int(x: usize) -> Cell {
    Cell::Int(x as i64)
}

fn flt(x: f64) -> Cell {
    Cell::Float(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl SeriesTable {
    fn new(name: &str, header: &[&str]) -> Self {
        SeriesTable { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: vec![] }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::to_string)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: RunConfig,
    pub series: Vec<SeriesTable>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&SeriesTable> {
        self.series.iter().find(|t| t.name == name)
    }

    /// Writes one CSV per table and a JSON summary into `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let stem = self.config.stem()?;
        let mut paths = vec![];
        for t in &self.series {
            let path = dir.join(format!("{stem}-{}.csv", t.name));
            fs::write(&path, t.to_csv())?;
            paths.push(path);
        }
        let summary = serde_json::json!({
            "config": self.config,
            "summary": self.summary,
            "checks": self.checks,
            "wall_time_s": self.wall_time_s,
            "series_files": paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
            "passed": self.passed(),
        });
        let path = dir.join(format!("{stem}.json"));
        fs::write(&path, serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?)?;
        paths.push(path);
        Ok(paths)
    }
}

fn check(checks: &mut Vec<Check>, name: &str, passed: bool, detail: String) {
    checks.push(Check { name: name.into(), passed, detail });
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Counts per bin `[lo + k·w, lo + (k+1)·w)`; the last bin is closed.
pub fn histogram(values: &[f64], lo: f64, hi: f64, width: f64) -> Vec<(f64, f64, usize)> {
    let bins = ((hi - lo) / width).round().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts.into_iter().enumerate().map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c)).collect()
}

/// Largest gap between the cumulative distributions of two histograms on the same bins.
pub fn binned_ks_distance(a: &[usize], b: &[usize]) -> f64 {
    let (na, nb) = (a.iter().sum::<usize>() as f64, b.iter().sum::<usize>() as f64);
    let (mut ca, mut cb, mut best) = (0.0, 0.0, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        ca += *x as f64 / na;
        cb += *y as f64 / nb;
        best = best.max((ca - cb).abs());
    }
    best
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    best
}

pub fn run(cfg: &RunConfig) -> Result<ResultRecord> {
    let rec = match cfg.experiment {
        Experiment::Discrepancy => run_discrepancy(cfg)?,
        Experiment::SpectralDim => run_spectral_dim(cfg)?,
        Experiment::KzRatio => run_kz_ratio(cfg)?,
        Experiment::Positivity => run_positivity_fibers(cfg)?,
    };
    if let Some(dir) = &cfg.output_path {
        rec.write(dir)?;
    }
    Ok(rec)
}

/// Subintervals `[i/g, j/g]` with `i < j`, the full interval included.
pub fn subinterval_grid(g: usize) -> Vec<(f64, f64)> {
    let mut out = vec![];
    for i in 0..g {
        for j in i + 1..=g {
            out.push((i as f64 / g as f64, j as f64 / g as f64));
        }
    }
    out
}

struct DiscrepancyCell {
    a: f64,
    b: f64,
    series: Vec<(usize, f64)>,
}

/// Discrepancy series of `T^p` for one sampled `λ` over the subinterval grid.
fn discrepancy_sample(pi: &Permutation, cfg: &RunConfig, stream: u64) -> Result<Vec<DiscrepancyCell>> {
    let prec = Precision::with_bits(cfg.precision_bits);
    let mut rng = sample_rng(cfg.seed, stream);
    let lam = sample_simplex(&mut rng, pi.d(), prec.bits);
    let t = IetMap::new(pi.clone(), lam, prec)?;
    let tp = t.to_piecewise().power(cfg.p as usize);
    subinterval_grid(cfg.sizes.grid)
        .into_iter()
        .map(|(a, b)| {
            let j = Subinterval::from_f64(a, b, prec);
            Ok(DiscrepancyCell { a, b, series: discrepancy_series(&tp, &j, &cfg.sizes.n_schedule)? })
        })
        .collect()
}

/// Per-cell slopes of one class; rows go to `series` and `slopes`.
fn discrepancy_class(
    pi: &Permutation,
    cfg: &RunConfig,
    class: usize,
    stream0: u64,
    series: &mut SeriesTable,
    slopes: &mut SeriesTable,
) -> (Vec<f64>, Vec<f64>, usize) {
    let results: Vec<Result<Vec<DiscrepancyCell>>> =
        (0..cfg.sizes.samples).into_par_iter().map(|i| discrepancy_sample(pi, cfg, stream0 + i as u64)).collect();
    let mut max_slopes = vec![];
    let mut all = vec![];
    let mut discarded = 0;
    for (i, r) in results.into_iter().enumerate() {
        let Ok(cells) = r else {
            discarded += 1;
            continue;
        };
        let mut best: Option<f64> = None;
        for c in cells {
            for &(n, v) in &c.series {
                series.rows.push(vec![int(class), int(i), flt(c.a), flt(c.b), int(n), flt(v)]);
            }
            let (slope, fit_from) = upper_half_slope(&c.series);
            let degenerate = c.series.iter().all(|(_, v)| *v == 0.0);
            if let (Some(s), false) = (slope, degenerate) {
                best = Some(best.map_or(s, |b: f64| b.max(s)));
                all.push(s);
            }
            slopes.rows.push(vec![
                int(class),
                int(i),
                flt(c.a),
                flt(c.b),
                flt(slope.unwrap_or(0.0)),
                int(degenerate as usize),
                int(fit_from),
            ]);
        }
        if let Some(b) = best {
            max_slopes.push(b);
        }
    }
    (max_slopes, all, discarded)
}

/// Discrepancy of `T^p` over sampled `λ` and the subinterval grid, with the
/// rotation control when `cfg.control` is set.
pub fn run_discrepancy(cfg: &RunConfig) -> Result<ResultRecord> {
    let clock = Instant::now();
    let cfg = RunConfig { experiment: Experiment::Discrepancy, ..cfg.clone() };
    cfg.validate()?;
    let pi = cfg.permutation()?;
    let mut series = SeriesTable::new("series", &["class", "sample", "a", "b", "n", "discrepancy"]);
    let mut slopes = SeriesTable::new("slopes", &["class", "sample", "a", "b", "slope", "degenerate", "fit_from"]);
    let (max_slopes, _, discarded) = discrepancy_class(&pi, &cfg, 0, 0, &mut series, &mut slopes);
    let mut summary = BTreeMap::new();
    let mut checks = vec![];
    let above = max_slopes.iter().filter(|&&s| s > SLOPE_THRESHOLD).count();
    let frac = if max_slopes.is_empty() { 0.0 } else { above as f64 / max_slopes.len() as f64 };
    summary.insert("samples_used".into(), max_slopes.len() as f64);
    summary.insert("discarded_samples".into(), discarded as f64);
    summary.insert("max_slope_median".into(), median(&max_slopes));
    summary.insert("positive_fraction".into(), frac);
    check(
        &mut checks,
        "majority of samples with max slope above threshold",
        frac > 0.5,
        format!("{above}/{} samples above {SLOPE_THRESHOLD}", max_slopes.len()),
    );
    if cfg.control {
        let rot = Permutation::parse(CONTROL_PERM)?;
        let (ctl_max, ctl_all, ctl_disc) = discrepancy_class(&rot, &cfg, 1, CONTROL_STREAM, &mut series, &mut slopes);
        let (m, se) = mean_and_stderr(&ctl_all);
        summary.insert("control_mean_slope".into(), m);
        summary.insert("control_slope_stderr".into(), se);
        summary.insert("control_max_slope_median".into(), median(&ctl_max));
        summary.insert("control_discarded_samples".into(), ctl_disc as f64);
        check(
            &mut checks,
            "genus-one control slope at most bound",
            m <= CONTROL_BOUND,
            format!("mean cell slope {m:.4} ± {se:.4} (bound {CONTROL_BOUND})"),
        );
    }
    Ok(ResultRecord { config: cfg, series: vec![series, slopes], summary, checks, wall_time_s: clock.elapsed().as_secs_f64() })
}

/// `d̂ = 2 - 2·clamp(slope, 0, 1)`, the slope being that of `ln sup|S_N|` against `ln N`.
pub fn dimension_from_slope(slope: f64) -> f64 {
    2.0 - 2.0 * slope.clamp(0.0, 1.0)
}

/// Mean of `f` against the normalized lengths.
fn lebesgue_mean(f: &[f64], t: &IetMap) -> f64 {
    let total = t.total().to_f64();
    f.iter().zip(t.lengths()).map(|(v, l)| v * l.to_f64()).sum::<f64>() / total
}

/// Row kinds of the spectral run.
const KIND_GRID: usize = 0;
const KIND_ZERO_FREQ: usize = 1;
const KIND_CONSTANT: usize = 2;

struct SpectralCell {
    kind: usize,
    s: f64,
    series: Vec<(usize, f64)>,
    slope: f64,
    dim: f64,
    flagged: bool,
}

fn spectral_sample(pi: &Permutation, cfg: &RunConfig, sample: usize) -> Result<Vec<SpectralCell>> {
    let d = pi.d();
    let prec = Precision::with_bits(cfg.precision_bits);
    let mut rng = sample_rng(cfg.seed, sample as u64);
    let lam = sample_simplex(&mut rng, d, prec.bits);
    let t = IetMap::new(pi.clone(), lam, prec)?;
    let h: Vec<f64> = match &cfg.roof {
        Some(h) => h.clone(),
        None => (0..d).map(|_| rng.random_range(0.5..1.5)).collect(),
    };
    let raw: Vec<f64> = match &cfg.observable {
        Some(f) => f.clone(),
        None => (0..d).map(|_| rng.sample(StandardNormal)).collect(),
    };
    let mu = lebesgue_mean(&raw, &t);
    let centered: Vec<f64> = raw.iter().map(|v| v - mu).collect();
    let f = LocallyConstantFunction::real(&centered);
    let ones = LocallyConstantFunction::constant(d, 1.0);
    let g = cfg.sizes.grid;
    let mut jobs: Vec<(usize, f64)> =
        (0..g).map(|i| (KIND_GRID, cfg.s_max * (i as f64 + 1.0) / g as f64)).collect();
    jobs.push((KIND_ZERO_FREQ, 0.0));
    jobs.push((KIND_CONSTANT, 0.0));
    jobs.into_iter()
        .map(|(kind, s)| {
            let zeta = if s == 0.0 {
                TwistParameter::zero(d)
            } else {
                TwistParameter::from_f64(&h.iter().map(|x| (s * x).rem_euclid(1.0)).collect::<Vec<_>>(), prec)
            };
            let obs = if kind == KIND_CONSTANT { &ones } else { &f };
            let rec = growth_on_schedule(&t, obs, &zeta, &cfg.sizes.n_schedule)?;
            // A nonzero mean at ζ = 0 gives Cesàro growth of order N.
            let flagged = kind == KIND_CONSTANT || rec.degenerate;
            let slope = rec.slope.unwrap_or(0.0);
            let dim = if flagged { 0.0 } else { dimension_from_slope(slope) };
            Ok(SpectralCell { kind, s, series: rec.series, slope, dim, flagged })
        })
        .collect()
}

/// Growth exponents of twisted sums over a frequency grid and the resulting
/// histogram of `d̂(s)`.
pub fn run_spectral_dim(cfg: &RunConfig) -> Result<ResultRecord> {
    let clock = Instant::now();
    let cfg = RunConfig { experiment: Experiment::SpectralDim, ..cfg.clone() };
    cfg.validate()?;
    let pi = cfg.permutation()?;
    let samples: Vec<Result<Vec<SpectralCell>>> =
        (0..cfg.sizes.samples).into_par_iter().map(|i| spectral_sample(&pi, &cfg, i)).collect();
    let mut series = SeriesTable::new("series", &["sample", "kind", "s", "n", "sup_abs_sum"]);
    let mut dims = SeriesTable::new("dimensions", &["sample", "kind", "s", "slope", "dimension", "flagged"]);
    let mut grid_dims = vec![];
    let mut zero_dims = vec![];
    let mut constant_flagged = true;
    let mut discarded = 0;
    for (i, r) in samples.into_iter().enumerate() {
        let Ok(cells) = r else {
            discarded += 1;
            continue;
        };
        for c in cells {
            for &(n, v) in &c.series {
                series.rows.push(vec![int(i), int(c.kind), flt(c.s), int(n), flt(v)]);
            }
            dims.rows.push(vec![int(i), int(c.kind), flt(c.s), flt(c.slope), flt(c.dim), int(c.flagged as usize)]);
            match c.kind {
                KIND_GRID if !c.flagged => grid_dims.push(c.dim),
                KIND_ZERO_FREQ => zero_dims.push(c.dim),
                KIND_CONSTANT => constant_flagged &= c.flagged && c.dim == 0.0,
                _ => {}
            }
        }
    }
    let mut hist = SeriesTable::new("histogram", &["lo", "hi", "count"]);
    for (lo, hi, c) in histogram(&grid_dims, 0.0, 2.0, DIM_BIN_WIDTH) {
        hist.rows.push(vec![flt(lo), flt(hi), int(c)]);
    }
    let in_band = grid_dims.iter().filter(|&&x| x >= DIM_BAND.0 && x <= DIM_BAND.1).count();
    let mass = if grid_dims.is_empty() { 0.0 } else { in_band as f64 / grid_dims.len() as f64 };
    let zero_dim = zero_dims.iter().sum::<f64>() / zero_dims.len().max(1) as f64;
    let chi = top_exponents_zorich(&pi, 1, &cfg.estimator(cfg.sizes.orbit_length, FiberMode::Zero))?.remove(0);

    let mut summary = BTreeMap::new();
    summary.insert("frequencies".into(), grid_dims.len() as f64);
    summary.insert("band_mass".into(), mass);
    summary.insert("dimension_median".into(), median(&grid_dims));
    summary.insert("zero_frequency_dimension".into(), zero_dim);
    summary.insert("constant_flagged".into(), constant_flagged as u8 as f64);
    summary.insert("discarded_samples".into(), discarded as f64);
    summary.insert("chi1".into(), chi.value);
    summary.insert("chi1_stderr".into(), chi.stderr);
    let mut checks = vec![];
    check(
        &mut checks,
        "histogram mass in band",
        mass >= 0.9,
        format!("{in_band}/{} in [{}, {}]", grid_dims.len(), DIM_BAND.0, DIM_BAND.1),
    );
    check(
        &mut checks,
        "zero-frequency dimension near 4/3",
        (zero_dim - 4.0 / 3.0).abs() <= 0.25,
        format!("mean d̂(0) = {zero_dim:.4}"),
    );
    check(&mut checks, "constant observable flagged", constant_flagged, String::new());
    Ok(ResultRecord {
        config: cfg,
        series: vec![series, dims, hist],
        summary,
        checks,
        wall_time_s: clock.elapsed().as_secs_f64(),
    })
}

fn in_reversal_class(pi: &Permutation, d: usize) -> bool {
    let Ok(r) = Permutation::reversal(d) else { return false };
    pi.d() == d && rauzy_class(&r).vertices.iter().any(|v| v.canonical_word() == pi.canonical_word())
}

/// `χ₁, χ₂` and the fiber-averaged twisted exponent, with their ratios.
pub fn run_kz_ratio(cfg: &RunConfig) -> Result<ResultRecord> {
    let clock = Instant::now();
    let cfg = RunConfig { experiment: Experiment::KzRatio, ..cfg.clone() };
    cfg.validate()?;
    let pi = cfg.permutation()?;
    let len = cfg.sizes.orbit_length;
    let kz = top_exponents_zorich(&pi, 2, &cfg.estimator(len, FiberMode::Zero))?;
    let full = top_exponent_twisted(&pi, &cfg.estimator(len, FiberMode::LebesgueFull))?;
    let hfib = top_exponent_twisted(&pi, &cfg.estimator(len, FiberMode::LebesgueHFiber))?;
    let (c1, c2) = (&kz[0], &kz[1]);
    let mut seg = SeriesTable::new("segments", &["segment", "chi1", "chi2", "twisted_full", "twisted_h_fiber"]);
    for i in 0..cfg.sizes.segments {
        let v = |e: &ExponentEstimate| flt(e.diagnostics.per_segment[i]);
        seg.rows.push(vec![int(i), v(c1), v(c2), v(&full), v(&hfib)]);
    }
    let r2 = ratio(c2, c1);
    let rf = ratio(&full, c1);
    let rh = ratio(&hfib, c1);
    let mut summary = BTreeMap::new();
    for (k, e) in [("chi1", c1), ("chi2", c2), ("twisted_full", &full), ("twisted_h_fiber", &hfib)] {
        summary.insert(k.to_string(), e.value);
        summary.insert(format!("{k}_stderr"), e.stderr);
        summary.insert(format!("{k}_discarded"), e.diagnostics.discarded as f64);
    }
    for (k, r) in [("ratio_chi2_chi1", r2), ("ratio_twisted_full_chi1", rf), ("ratio_twisted_h_fiber_chi1", rh)] {
        summary.insert(k.to_string(), r.value);
        summary.insert(format!("{k}_stderr"), r.stderr);
    }
    summary.insert("zorich_steps".into(), c1.samples as f64);
    let mut checks = vec![];
    if in_reversal_class(&pi, 4) {
        check(
            &mut checks,
            "chi2/chi1 in [0.28, 0.38]",
            (0.28..=0.38).contains(&r2.value),
            format!("{:.4} ± {:.4}", r2.value, r2.stderr),
        );
    }
    check(
        &mut checks,
        "twisted exponent positive at 5 stderr",
        full.value > 5.0 * full.stderr,
        format!("{:.5} ± {:.5}", full.value, full.stderr),
    );
    check(
        &mut checks,
        "twisted exponent at most chi1/2 + 3 stderr",
        rf.value <= 0.5 + 3.0 * rf.stderr,
        format!("ratio {:.4} ± {:.4}", rf.value, rf.stderr),
    );
    Ok(ResultRecord { config: cfg, series: vec![seg], summary, checks, wall_time_s: clock.elapsed().as_secs_f64() })
}

/// Up to `cap` points of `Q_p`, evenly strided through the lexicographic list.
pub fn fiber_subgrid(d: usize, p: u64, cap: usize) -> Vec<Vec<i64>> {
    let all = rational_fiber_points(d, p);
    let stride = all.len().div_ceil(cap.max(1));
    all.into_iter().step_by(stride.max(1)).collect()
}

fn is_positive(e: &ExponentEstimate, threshold: f64) -> bool {
    e.value - 3.0 * e.stderr > threshold
}

struct FiberRun {
    points: Vec<Vec<i64>>,
    base: Vec<ExponentEstimate>,
    doubled: Vec<ExponentEstimate>,
}

fn fiber_run(pi: &Permutation, cfg: &RunConfig) -> Result<FiberRun> {
    let points = match &cfg.nvec {
        Some(n) if n.len() == pi.d() => vec![n.clone()],
        _ => fiber_subgrid(pi.d(), cfg.p, cfg.sizes.grid),
    };
    let mode = FiberMode::Rational { p: cfg.p, nvec: None };
    let len = cfg.sizes.orbit_length;
    let base = fiber_point_exponents(pi, cfg.p, &points, &cfg.estimator(len, mode.clone()))?;
    let doubled = fiber_point_exponents(pi, cfg.p, &points, &cfg.estimator(2 * len, mode))?;
    Ok(FiberRun { points, base, doubled })
}

/// Per-point twisted exponents over a subgrid of `Q_p`, the positive fraction,
/// their histogram and a KS comparison against twice the orbit length.
pub fn run_positivity_fibers(cfg: &RunConfig) -> Result<ResultRecord> {
    let clock = Instant::now();
    let cfg = RunConfig { experiment: Experiment::Positivity, ..cfg.clone() };
    cfg.validate()?;
    let pi = cfg.permutation()?;
    let d = pi.d();
    let main = fiber_run(&pi, &cfg)?;
    let mut header: Vec<String> = vec!["class".into(), "point".into()];
    header.extend((1..=d).map(|i| format!("n{i}")));
    header.extend(["exponent", "stderr", "exponent_doubled", "stderr_doubled"].map(String::from));
    let mut fib = SeriesTable { name: "fibers".into(), header, rows: vec![] };
    let push_rows = |fib: &mut SeriesTable, class: usize, run: &FiberRun| {
        for (i, n) in run.points.iter().enumerate() {
            let mut row = vec![int(class), int(i)];
            row.extend((0..d).map(|k| Cell::Int(n.get(k).copied().unwrap_or(0))));
            row.extend([run.base[i].value, run.base[i].stderr, run.doubled[i].value, run.doubled[i].stderr].map(flt));
            fib.rows.push(row);
        }
    };
    push_rows(&mut fib, 0, &main);
    let values: Vec<f64> = main.base.iter().map(|e| e.value).collect();
    let doubled: Vec<f64> = main.doubled.iter().map(|e| e.value).collect();
    let positive = main.base.iter().filter(|e| is_positive(e, cfg.threshold)).count();
    let frac = positive as f64 / main.points.len() as f64;
    let ks = ks_distance(&values, &doubled);
    let lo = (values.iter().chain(&doubled).copied().fold(f64::INFINITY, f64::min) / FIBER_BIN_WIDTH).floor()
        * FIBER_BIN_WIDTH;
    let hi = (values.iter().chain(&doubled).copied().fold(f64::NEG_INFINITY, f64::max) / FIBER_BIN_WIDTH).floor()
        * FIBER_BIN_WIDTH
        + FIBER_BIN_WIDTH;
    let h1 = histogram(&values, lo, hi, FIBER_BIN_WIDTH);
    let h2 = histogram(&doubled, lo, hi, FIBER_BIN_WIDTH);
    let mut hist = SeriesTable::new("histogram", &["lo", "hi", "count", "count_doubled"]);
    for ((l, h, c), (_, _, c2)) in h1.iter().zip(&h2) {
        hist.rows.push(vec![flt(*l), flt(*h), int(*c), int(*c2)]);
    }
    let counts = |h: &[(f64, f64, usize)]| h.iter().map(|b| b.2).collect::<Vec<_>>();
    let hist_ks = binned_ks_distance(&counts(&h1), &counts(&h2));
    let mut summary = BTreeMap::new();
    summary.insert("points".into(), main.points.len() as f64);
    summary.insert("positive_fraction".into(), frac);
    summary.insert("mean_exponent".into(), values.iter().sum::<f64>() / values.len() as f64);
    summary.insert("ks_distance".into(), ks);
    summary.insert("histogram_ks_distance".into(), hist_ks);
    let mut checks = vec![];
    check(&mut checks, "positive fiber fraction above zero", frac > 0.0, format!("{positive}/{}", main.points.len()));
    check(
        &mut checks,
        "histogram stable under doubling",
        ks < 0.1,
        format!("per-point KS {ks:.4}, binned KS {hist_ks:.4}"),
    );
    if cfg.control {
        let rot = Permutation::parse(CONTROL_PERM)?;
        let ctl = fiber_run(&rot, &RunConfig { nvec: None, ..cfg.clone() })?;
        let ctl_pos = ctl.base.iter().filter(|e| is_positive(e, cfg.threshold)).count();
        let cvals: Vec<f64> = ctl.base.iter().map(|e| e.value).collect();
        summary.insert("control_positive_fraction".into(), ctl_pos as f64 / ctl.points.len() as f64);
        summary.insert("control_mean_exponent".into(), cvals.iter().sum::<f64>() / cvals.len() as f64);
        // Rows of the control carry zeros in the columns beyond its two letters.
        push_rows(&mut fib, 1, &ctl);
        check(
            &mut checks,
            "genus-one control has no positive fiber",
            ctl_pos == 0,
            format!("{ctl_pos}/{}", ctl.points.len()),
        );
    }
    Ok(ResultRecord { config: cfg, series: vec![fib, hist], summary, checks, wall_time_s: clock.elapsed().as_secs_f64() })
}

/// Slope of `ln y` against `ln n`, exposed for external recomputation.
pub fn log_log_slope(series: &[(usize, f64)]) -> f64 {
    let xs: Vec<f64> = series.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = series.iter().map(|(_, v)| v.ln()).collect();
    least_squares_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(experiment: Experiment) -> RunConfig {
        let mut c = RunConfig::preset(experiment);
        c.sizes.n_schedule = dyadic(1 << 9);
        c.sizes.samples = 2;
        c.sizes.grid = 3;
        c.sizes.segments = 8;
        c.sizes.orbit_length = 40;
        c.sizes.burn_in = 10;
        c.estimator_bits = 512;
        c
    }

    #[test]
    fn schedule_must_increase() {
        let mut c = tiny(Experiment::Discrepancy);
        c.sizes.n_schedule = vec![1, 4, 4, 8];
        assert!(c.validate().is_err());
        c.sizes.n_schedule = vec![1, 2, 4, 8];
        assert!(c.validate().is_ok());
    }

    #[test]
    fn genus_one_rejected() {
        let c = RunConfig { perm: "AB/BA".into(), ..tiny(Experiment::KzRatio) };
        assert!(c.validate().is_err());
    }

    #[test]
    fn discrepancy_full_interval_is_degenerate() {
        let rec = run_discrepancy(&tiny(Experiment::Discrepancy)).unwrap();
        let slopes = rec.table("slopes").unwrap();
        let (a, b, deg) = (slopes.column("a").unwrap(), slopes.column("b").unwrap(), slopes.column("degenerate").unwrap());
        for i in 0..a.len() {
            assert_eq!(deg[i] == 1.0, a[i] == 0.0 && b[i] == 1.0);
        }
    }

    #[test]
    fn same_config_same_bytes() {
        let c = tiny(Experiment::SpectralDim);
        let a = run_spectral_dim(&c).unwrap();
        let b = run_spectral_dim(&c).unwrap();
        for (x, y) in a.series.iter().zip(&b.series) {
            assert_eq!(x.to_csv(), y.to_csv());
        }
        assert_eq!(a.summary["constant_flagged"], 1.0);
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.1], &[1.0, 2.0]), 1.0);
        assert!((ks_distance(&[0.0, 1.0], &[0.5, 1.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn histogram_counts_everything_in_range() {
        let h = histogram(&[0.0, 0.05, 1.0, 2.0], 0.0, 2.0, 0.1);
        assert_eq!(h.len(), 20);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 4);
        assert_eq!(h[19].2, 1);
    }

    #[test]
    fn subgrid_excludes_origin() {
        let g = fiber_subgrid(4, 3, 10);
        assert!(g.len() <= 10 && !g.is_empty());
        assert!(g.iter().all(|n| n.iter().any(|&x| x != 0)));
    }

    #[test]
    fn csv_floats_round_trip() {
        let x = 0.1f64 + 0.2;
        let s = Cell::Float(x).to_string();
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
