//! Monte-Carlo Lyapunov exponents of the Zorich cocycle and its twisted
//! deformation.
//!
//! Every estimate is an average over independent *segments*. A segment draws
//! `λ` uniformly from the simplex, runs `burn_in` Zorich steps, then
//! accumulates log growth over `orbit_length` steps with a Gram-Schmidt
//! (or plain normalization) every `renorm_period` steps. Lengths are never
//! renormalized inside a segment; when they fall below the separation floor
//! the segment is discarded and redrawn from the same random stream, so the
//! result depends only on the seed and the segment index set.
//!
//! Exponents are reported in nats per Zorich step.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{genus_and_singularities, Permutation, SymplecticData};
use crate::error::{Error, Result};
use crate::iet::{twisted_sup_series, IetMap, LocallyConstantFunction, TwistParameter};
use crate::linalg::IntMatrix;
use crate::numeric::{frac, sample_simplex, uniform_float, Precision};
use crate::renorm::{col, ZorichOrbit};
use crate::twisted::{apply_coefficients, run_coefficients, PhaseTable};

/// Rescale frames before any coordinate exceeds this.
const GROWTH_GUARD: f64 = 1e100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FiberMode {
    Zero,
    LebesgueFull,
    LebesgueHFiber,
    /// `ζ = n⃗ / p`; a fixed `n⃗`, or a uniform draw from the nonzero residues per segment.
    Rational { p: u64, nvec: Option<Vec<i64>> },
}

impl FiberMode {
    /// `zero`, `lebesgue`, `h-fiber` or `rational`.
    pub fn parse(name: &str, p: Option<u64>, nvec: Option<Vec<i64>>) -> Result<Self> {
        match name {
            "zero" => Ok(FiberMode::Zero),
            "lebesgue" | "lebesgue_full" => Ok(FiberMode::LebesgueFull),
            "h-fiber" | "h_fiber" | "lebesgue_h_fiber" => Ok(FiberMode::LebesgueHFiber),
            "rational" => {
                let p = p.ok_or_else(|| Error::InvalidConfig("rational fiber needs p".into()))?;
                if !crate::numeric::is_prime(p) {
                    return Err(Error::NotPrime(p));
                }
                Ok(FiberMode::Rational { p, nvec })
            }
            other => Err(Error::InvalidConfig(format!("unknown fiber mode {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub orbit_length: usize,
    pub segments: usize,
    pub renorm_period: usize,
    pub seed: u64,
    pub precision_bits: u32,
    pub fiber_mode: FiberMode,
    pub burn_in: usize,
    /// Redraws allowed per segment after precision loss or a numerical tie.
    pub max_resamples: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            orbit_length: 200,
            segments: 64,
            renorm_period: 5,
            seed: 1,
            precision_bits: 1024,
            fiber_mode: FiberMode::Zero,
            burn_in: 50,
            max_resamples: 50,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.renorm_period < 1 || self.orbit_length < self.renorm_period {
            return Err(Error::InvalidConfig("need orbit_length >= renorm_period >= 1".into()));
        }
        if self.precision_bits < 64 {
            return Err(Error::InvalidConfig("precision_bits must be at least 64".into()));
        }
        if self.segments == 0 {
            return Err(Error::InvalidConfig("need at least one segment".into()));
        }
        if let FiberMode::Rational { p, nvec } = &self.fiber_mode {
            if !crate::numeric::is_prime(*p) {
                return Err(Error::NotPrime(*p));
            }
            if let Some(n) = nvec {
                if n.iter().all(|x| x.rem_euclid(*p as i64) == 0) {
                    return Err(Error::InvalidConfig("n⃗ must be nonzero modulo p".into()));
                }
            }
        }
        Ok(())
    }

    pub fn precision(&self) -> Precision {
        Precision::with_bits(self.precision_bits)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    /// Exponent of each segment, in segment-index order.
    pub per_segment: Vec<f64>,
    /// Segments redrawn after precision loss, ties or an exceeded step cap.
    pub discarded: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Zorich steps that contributed.
    pub samples: u64,
    pub diagnostics: Diagnostics,
}

impl ExponentEstimate {
    pub fn from_segments(per_segment: Vec<f64>, steps_per_segment: usize, discarded: usize) -> Self {
        let n = per_segment.len();
        let mean = per_segment.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = per_segment.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        ExponentEstimate {
            value: mean,
            stderr,
            samples: (n * steps_per_segment) as u64,
            diagnostics: Diagnostics { per_segment, discarded },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `num / den` with a delta-method standard error. Paired per-segment series
/// (same length) use their covariance; otherwise the two are treated as independent.
pub fn ratio(num: &ExponentEstimate, den: &ExponentEstimate) -> RatioEstimate {
    let (a, b) = (num.value, den.value);
    let r = a / b;
    let xs = &num.diagnostics.per_segment;
    let ys = &den.diagnostics.per_segment;
    let n = xs.len();
    let stderr = if n == ys.len() && n > 1 {
        let mut acc = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let z = (x - a) - r * (y - b);
            acc += z * z;
        }
        let var = acc / (n - 1) as f64;
        (var / n as f64).sqrt() / b.abs()
    } else {
        r.abs() * ((num.stderr / a).powi(2) + (den.stderr / b).powi(2)).sqrt()
    };
    RatioEstimate { value: r, stderr }
}

fn segment_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::PrecisionExhausted { .. } | Error::TieBreakUndefined | Error::StepCapExceeded { .. })
}

/// Run `body` once per segment index in parallel; results come back in index order.
fn run_segments<T, F>(cfg: &EstimatorConfig, body: F) -> Result<(Vec<T>, usize)>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let outs: Vec<Result<(T, usize)>> = (0..cfg.segments)
        .into_par_iter()
        .map(|i| {
            let mut rng = segment_rng(cfg.seed, i);
            let mut discarded = 0;
            loop {
                match body(&mut rng) {
                    Ok(t) => return Ok((t, discarded)),
                    Err(e) if recoverable(&e) && discarded < cfg.max_resamples => discarded += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect();
    let mut values = Vec::with_capacity(outs.len());
    let mut discarded = 0;
    for o in outs {
        let (t, dsc) = o?;
        values.push(t);
        discarded += dsc;
    }
    Ok((values, discarded))
}

/// Modified Gram-Schmidt in place; returns `ln` of the diagonal of R.
fn gram_schmidt(vs: &mut [Vec<f64>]) -> Vec<f64> {
    let mut logs = Vec::with_capacity(vs.len());
    for i in 0..vs.len() {
        let (done, rest) = vs.split_at_mut(i);
        let v = &mut rest[0];
        for u in done.iter() {
            let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= norm;
        }
        logs.push(norm.ln());
    }
    logs
}

fn normalize_complex(f: &mut [Complex64]) -> f64 {
    let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in f.iter_mut() {
        *z /= norm;
    }
    norm.ln()
}

/// Orthonormal real basis of the span of the `h_lattice` columns.
pub fn h_frame(sd: &SymplecticData) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..sd.h_lattice.cols())
        .map(|j| sd.h_lattice.column(j).iter().map(|x| x.to_f64()).collect())
        .collect();
    gram_schmidt(&mut cols);
    cols
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSeed {
    /// Random frame inside the real span of `H(π)`.
    InH,
    /// Random frame in all of `R^d`.
    Generic,
}

pub fn top_exponents_zorich(pi: &Permutation, k: usize, cfg: &EstimatorConfig) -> Result<Vec<ExponentEstimate>> {
    top_exponents_zorich_seeded(pi, k, cfg, FrameSeed::InH)
}

pub fn top_exponents_zorich_seeded(
    pi: &Permutation,
    k: usize,
    cfg: &EstimatorConfig,
    seed: FrameSeed,
) -> Result<Vec<ExponentEstimate>> {
    cfg.validate()?;
    let sd = genus_and_singularities(pi)?;
    if k == 0 || k > sd.genus {
        return Err(Error::InvalidConfig(format!("k must lie in 1..={}", sd.genus)));
    }
    let d = pi.d();
    let basis = h_frame(&sd);
    let prec = cfg.precision();
    let (per_segment, discarded) = run_segments(cfg, |rng| {
        let lam = sample_simplex(rng, d, prec.bits);
        let mut frame: Vec<Vec<f64>> = (0..k)
            .map(|_| match seed {
                FrameSeed::InH => {
                    let mut v = vec![0.0; d];
                    for b in &basis {
                        let c: f64 = rng.sample(StandardNormal);
                        for (x, y) in v.iter_mut().zip(b) {
                            *x += c * y;
                        }
                    }
                    v
                }
                FrameSeed::Generic => (0..d).map(|_| rng.sample(StandardNormal)).collect(),
            })
            .collect();
        gram_schmidt(&mut frame);
        let mut orbit = ZorichOrbit::new(pi.clone(), lam, prec);
        let mut sums = vec![0.0; k];
        let mut since = 0usize;
        for step in 0..cfg.burn_in + cfg.orbit_length {
            let run = orbit.step()?;
            for v in frame.iter_mut() {
                run.apply_column_f64(v);
            }
            since += 1;
            let at_burn_end = step + 1 == cfg.burn_in;
            let last = step + 1 == cfg.burn_in + cfg.orbit_length;
            let big = frame.iter().any(|v| v.iter().any(|x| x.abs() > GROWTH_GUARD));
            if at_burn_end || last || since == cfg.renorm_period || big {
                let logs = gram_schmidt(&mut frame);
                if step >= cfg.burn_in {
                    for (s, l) in sums.iter_mut().zip(logs) {
                        *s += l;
                    }
                }
                since = 0;
            }
        }
        Ok(sums.into_iter().map(|s| s / cfg.orbit_length as f64).collect::<Vec<f64>>())
    })?;
    Ok((0..k)
        .map(|i| {
            let vals = per_segment.iter().map(|v| v[i]).collect();
            ExponentEstimate::from_segments(vals, cfg.orbit_length, discarded)
        })
        .collect())
}

fn random_nonzero_residues<R: Rng>(rng: &mut R, d: usize, p: u64) -> Vec<i64> {
    loop {
        let n: Vec<i64> = (0..d).map(|_| rng.random_range(0..p) as i64).collect();
        if n.iter().any(|&x| x != 0) {
            return n;
        }
    }
}

/// Draw a fiber point according to `mode`.
pub fn sample_fiber<R: Rng>(
    rng: &mut R,
    mode: &FiberMode,
    sd: &SymplecticData,
    prec: Precision,
) -> TwistParameter {
    let d = sd.omega.rows();
    match mode {
        FiberMode::Zero => TwistParameter::zero(d),
        FiberMode::LebesgueFull => TwistParameter::Real((0..d).map(|_| uniform_float(rng, prec.bits)).collect()),
        FiberMode::LebesgueHFiber => {
            let c: Vec<Float> = (0..sd.h_lattice.cols()).map(|_| uniform_float(rng, prec.bits)).collect();
            let z = (0..d)
                .map(|i| {
                    let mut acc = prec.zero();
                    for (j, cj) in c.iter().enumerate() {
                        acc += Float::with_val(prec.bits, cj * &sd.h_lattice[(i, j)]);
                    }
                    frac(&acc)
                })
                .collect();
            TwistParameter::Real(z)
        }
        FiberMode::Rational { p, nvec } => {
            let n = nvec.clone().unwrap_or_else(|| random_nonzero_residues(rng, d, *p));
            TwistParameter::rational(&n, *p)
        }
    }
}

fn phase_table(mode: &FiberMode) -> Option<PhaseTable> {
    match mode {
        FiberMode::Zero => Some(PhaseTable::new(1)),
        FiberMode::Rational { p, .. } => Some(PhaseTable::new(*p)),
        _ => None,
    }
}

/// Top exponent of the twisted cocycle, averaged over segments and fiber draws.
pub fn top_exponent_twisted(pi: &Permutation, cfg: &EstimatorConfig) -> Result<ExponentEstimate> {
    cfg.validate()?;
    let sd = genus_and_singularities(pi)?;
    let d = pi.d();
    let prec = cfg.precision();
    let table = phase_table(&cfg.fiber_mode);
    let (per_segment, discarded) = run_segments(cfg, |rng| {
        let lam = sample_simplex(rng, d, prec.bits);
        let mut zeta = sample_fiber(rng, &cfg.fiber_mode, &sd, prec);
        let mut f: Vec<Complex64> =
            (0..d).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        normalize_complex(&mut f);
        let mut orbit = ZorichOrbit::new(pi.clone(), lam, prec);
        twisted_growth(&mut orbit, &mut zeta, &mut f, table.as_ref(), cfg)
    })?;
    Ok(ExponentEstimate::from_segments(per_segment, cfg.orbit_length, discarded))
}

/// Burn in, then return the mean log growth per step of `f` under the twisted cocycle.
fn twisted_growth(
    orbit: &mut ZorichOrbit,
    zeta: &mut TwistParameter,
    f: &mut [Complex64],
    table: Option<&PhaseTable>,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut since = 0usize;
    for step in 0..cfg.burn_in + cfg.orbit_length {
        let run = orbit.step()?;
        let coeffs = run_coefficients(&run, zeta, table);
        apply_coefficients(&coeffs, run.winner, f);
        run.apply_twist(zeta);
        since += 1;
        let at_burn_end = step + 1 == cfg.burn_in;
        let last = step + 1 == cfg.burn_in + cfg.orbit_length;
        let big = f.iter().any(|z| z.norm() > GROWTH_GUARD);
        if at_burn_end || last || since == cfg.renorm_period || big {
            let l = normalize_complex(f);
            if step >= cfg.burn_in {
                sum += l;
            }
            since = 0;
        }
    }
    Ok(sum / cfg.orbit_length as f64)
}

/// All of `(Z/p)^d` minus the origin, in lexicographic order.
pub fn rational_fiber_points(d: usize, p: u64) -> Vec<Vec<i64>> {
    let total = (p as usize).pow(d as u32);
    (1..total)
        .map(|mut k| {
            let mut n = vec![0i64; d];
            for x in n.iter_mut().rev() {
                *x = (k % p as usize) as i64;
                k /= p as usize;
            }
            n
        })
        .collect()
}

/// Per-point twisted exponents at `ζ = n⃗ / p`, every point following the same
/// base orbits (one per segment).
pub fn fiber_point_exponents(
    pi: &Permutation,
    p: u64,
    points: &[Vec<i64>],
    cfg: &EstimatorConfig,
) -> Result<Vec<ExponentEstimate>> {
    cfg.validate()?;
    if !crate::numeric::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let d = pi.d();
    let prec = cfg.precision();
    let table = PhaseTable::new(p);
    let (per_segment, discarded) = run_segments(cfg, |rng| {
        let lam = sample_simplex(rng, d, prec.bits);
        let mut zetas: Vec<TwistParameter> = points.iter().map(|n| TwistParameter::rational(n, p)).collect();
        let mut fs: Vec<Vec<Complex64>> = points
            .iter()
            .map(|_| {
                let mut f: Vec<Complex64> =
                    (0..d).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
                normalize_complex(&mut f);
                f
            })
            .collect();
        let mut orbit = ZorichOrbit::new(pi.clone(), lam, prec);
        let mut sums = vec![0.0; points.len()];
        let mut since = 0usize;
        for step in 0..cfg.burn_in + cfg.orbit_length {
            let run = orbit.step()?;
            for (z, f) in zetas.iter_mut().zip(fs.iter_mut()) {
                let coeffs = run_coefficients(&run, z, Some(&table));
                apply_coefficients(&coeffs, run.winner, f);
                run.apply_twist(z);
            }
            since += 1;
            let at_burn_end = step + 1 == cfg.burn_in;
            let last = step + 1 == cfg.burn_in + cfg.orbit_length;
            let big = fs.iter().any(|f| f.iter().any(|z| z.norm() > GROWTH_GUARD));
            if at_burn_end || last || since == cfg.renorm_period || big {
                for (s, f) in sums.iter_mut().zip(fs.iter_mut()) {
                    let l = normalize_complex(f);
                    if step >= cfg.burn_in {
                        *s += l;
                    }
                }
                since = 0;
            }
        }
        Ok(sums.into_iter().map(|s| s / cfg.orbit_length as f64).collect::<Vec<f64>>())
    })?;
    Ok((0..points.len())
        .map(|i| {
            let vals = per_segment.iter().map(|v| v[i]).collect();
            ExponentEstimate::from_segments(vals, cfg.orbit_length, discarded)
        })
        .collect())
}

/// Growth of the top vector along one orbit: `(χ̂₁ of B^Z, β̂ of the twisted cocycle on f)`.
pub fn exponents_along_orbit(
    lambda: &[Float],
    pi: &Permutation,
    zeta: &TwistParameter,
    f: &[Complex64],
    steps: usize,
    prec: Precision,
) -> Result<(f64, f64)> {
    let d = pi.d();
    let mut orbit = ZorichOrbit::new(pi.clone(), lambda.to_vec(), prec);
    let mut z = zeta.clone();
    let mut g = f.to_vec();
    let mut v = vec![1.0; d];
    let (mut lv, mut lg) = (0.0, 0.0);
    let norm_v = |v: &mut [f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        n.ln()
    };
    lv += norm_v(&mut v);
    lg += normalize_complex(&mut g);
    for _ in 0..steps {
        let run = orbit.step()?;
        run.apply_column_f64(&mut v);
        let coeffs = run_coefficients(&run, &z, None);
        apply_coefficients(&coeffs, run.winner, &mut g);
        run.apply_twist(&mut z);
        lv += norm_v(&mut v);
        lg += normalize_complex(&mut g);
    }
    Ok((lv / steps as f64, lg / steps as f64))
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRecord {
    /// `(N, sup_x |S_N(f, ζ, x)|)` along the schedule.
    pub series: Vec<(usize, f64)>,
    /// Slope of `ln sup` against `ln N` over the upper half of the dyadic range;
    /// `None` when every sum vanishes.
    pub slope: Option<f64>,
    pub degenerate: bool,
    /// First `N` used in the fit.
    pub fit_from: usize,
}

/// `1, 2, 4, ...` up to `n_max`.
pub fn dyadic_schedule(n_max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |n| n.checked_mul(2)).take_while(|&n| n <= n_max).collect()
}

/// Slope fitted on the upper half of an `(N, value)` series; zero values are skipped.
pub fn upper_half_slope(series: &[(usize, f64)]) -> (Option<f64>, usize) {
    let start = series.len() / 2;
    let tail: Vec<&(usize, f64)> = series[start..].iter().filter(|(_, v)| *v > 0.0).collect();
    let fit_from = series.get(start).map_or(0, |s| s.0);
    if tail.len() < 2 {
        return (None, fit_from);
    }
    let xs: Vec<f64> = tail.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, v)| v.ln()).collect();
    (Some(least_squares_slope(&xs, &ys)), fit_from)
}

pub fn twisted_sum_growth(
    t: &IetMap,
    f: &LocallyConstantFunction,
    zeta: &TwistParameter,
    n_max: usize,
) -> Result<GrowthRecord> {
    if n_max < 256 {
        return Err(Error::InvalidConfig("N_max must be at least 2^8".into()));
    }
    growth_on_schedule(t, f, zeta, &dyadic_schedule(n_max))
}

/// Same fit as [`twisted_sum_growth`] on an arbitrary increasing schedule.
pub fn growth_on_schedule(
    t: &IetMap,
    f: &LocallyConstantFunction,
    zeta: &TwistParameter,
    schedule: &[usize],
) -> Result<GrowthRecord> {
    let series = twisted_sup_series(t, f, zeta, schedule)?;
    let degenerate = series.iter().all(|(_, v)| *v == 0.0);
    let (slope, fit_from) = if degenerate { (None, 0) } else { upper_half_slope(&series) };
    Ok(GrowthRecord { series, slope, degenerate, fit_from })
}

#[derive(Clone, Debug, Serialize)]
pub struct BalancedReturns {
    /// Step indices (1-based) at which the trailing window product is positive.
    pub indices: Vec<usize>,
    /// `col` of the window product at each index.
    pub balance: Vec<f64>,
    /// Tower heights `B_n ⋯ B_1 (1, ..., 1)ᵗ` at each index.
    #[serde(serialize_with = "serialize_heights")]
    pub heights: Vec<Vec<Integer>>,
    /// `ln` of the largest entry of the product between consecutive returns.
    pub log_gap_norms: Vec<f64>,
}

fn serialize_heights<S: serde::Serializer>(h: &[Vec<Integer>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<String>> = h.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
    rows.serialize(s)
}

pub fn balanced_return_times(
    lambda: &[Float],
    pi: &Permutation,
    window: usize,
    steps: usize,
    prec: Precision,
) -> Result<BalancedReturns> {
    if window == 0 {
        return Err(Error::InvalidConfig("window must be positive".into()));
    }
    let d = pi.d();
    let mut orbit = ZorichOrbit::new(pi.clone(), lambda.to_vec(), prec);
    let mut recent: std::collections::VecDeque<IntMatrix> = std::collections::VecDeque::new();
    let mut heights = vec![Integer::from(1); d];
    let mut since_last = IntMatrix::identity(d);
    let mut out = BalancedReturns { indices: vec![], balance: vec![], heights: vec![], log_gap_norms: vec![] };
    for n in 1..=steps {
        let b = orbit.step()?.matrix(d);
        heights = b.mul_vec(&heights);
        since_last = b.mul(&since_last);
        recent.push_back(b);
        if recent.len() > window {
            recent.pop_front();
        }
        if recent.len() == window {
            let w = recent.iter().fold(IntMatrix::identity(d), |acc, m| m.mul(&acc));
            if w.all_positive() {
                out.indices.push(n);
                out.balance.push(col(&w)?);
                out.heights.push(heights.clone());
                out.log_gap_norms.push(since_last.max_abs_entry().to_f64().ln());
                since_last = IntMatrix::identity(d);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> EstimatorConfig {
        EstimatorConfig { orbit_length: 60, segments: 12, burn_in: 10, precision_bits: 512, ..Default::default() }
    }

    #[test]
    fn rotation_top_exponent_positive() {
        let pi = Permutation::parse("A B / B A").unwrap();
        let est = top_exponents_zorich(&pi, 1, &small_cfg()).unwrap();
        assert!(est[0].value > 5.0 * est[0].stderr);
    }

    #[test]
    fn deterministic_across_runs() {
        let pi = Permutation::reversal(4).unwrap();
        let a = top_exponents_zorich(&pi, 2, &small_cfg()).unwrap();
        let b = top_exponents_zorich(&pi, 2, &small_cfg()).unwrap();
        assert_eq!(a[0].diagnostics.per_segment, b[0].diagnostics.per_segment);
        assert_eq!(a[1].value.to_bits(), b[1].value.to_bits());
    }

    #[test]
    fn zero_fiber_matches_zorich() {
        let pi = Permutation::reversal(4).unwrap();
        let cfg = small_cfg();
        let z = top_exponents_zorich(&pi, 1, &cfg).unwrap().remove(0);
        let t = top_exponent_twisted(&pi, &cfg).unwrap();
        let s = (z.stderr.powi(2) + t.stderr.powi(2)).sqrt();
        assert!((z.value - t.value).abs() <= 3.0 * s + 1e-12, "{} vs {}", z.value, t.value);
    }

    #[test]
    fn k_out_of_range() {
        let pi = Permutation::reversal(4).unwrap();
        assert!(top_exponents_zorich(&pi, 3, &small_cfg()).is_err());
    }

    #[test]
    fn rational_points_enumeration() {
        let pts = rational_fiber_points(2, 3);
        assert_eq!(pts.len(), 8);
        assert!(!pts.contains(&vec![0, 0]));
    }

    #[test]
    fn zero_function_is_degenerate() {
        let pi = Permutation::reversal(4).unwrap();
        let t = IetMap::from_f64(&pi, &[0.1, 0.2, 0.3, 0.4], Precision::default()).unwrap();
        let g = twisted_sum_growth(&t, &LocallyConstantFunction::constant(4, 0.0), &TwistParameter::zero(4), 256)
            .unwrap();
        assert!(g.degenerate && g.slope.is_none());
    }

    #[test]
    fn balanced_heights() {
        let mut rng = segment_rng(3, 0);
        let pi = Permutation::reversal(4).unwrap();
        let lam = sample_simplex(&mut rng, 4, 512);
        let br = balanced_return_times(&lam, &pi, 6, 60, Precision::with_bits(512)).unwrap();
        assert!(!br.indices.is_empty());
        for (h, l) in br.heights.iter().zip(&br.balance) {
            assert!(*l >= 1.0);
            let max = h.iter().max().unwrap().to_f64();
            let min = h.iter().min().unwrap().to_f64();
            assert!(min >= max / l * (1.0 - 1e-12));
        }
    }
}
