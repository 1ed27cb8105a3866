//! The `(p, n⃗)` suspension of an IET whose last top letter `α_t` is the first
//! bottom letter, and the untwisting operators `𝒪_k` relating twisted sums of
//! the base map to ordinary sums of the suspension.

use num_complex::Complex64;
use rug::Float;
use serde::Serialize;

use crate::combinatorics::{validate_permutation, Permutation};
use crate::cyclotomic::{rank_over_cyclotomic, CycloInt};
use crate::error::{Error, Result};
use crate::iet::{twisted_birkhoff_sum, IetMap, LocallyConstantFunction, TwistParameter};
use crate::numeric::{is_prime, Precision};
use crate::surface::{genus_agrees_with_omega, genus_bound_holds, orders_lift, square_profile, SingularityProfile};

/// Name of the interval `Ĩ` in the suspension alphabet.
pub const TILDE: &str = "~";

fn check_shape(pi: &Permutation, p: u64) -> Result<()> {
    if !pi.last_top_is_first_bottom() {
        return Err(Error::BadPermutationShape);
    }
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    Ok(())
}

/// `λ_{α_t} > (p-1)/p` after normalizing by the total length.
pub fn in_delta_p(lambda: &[Float], pi: &Permutation, p: u64) -> Result<bool> {
    check_shape(pi, p)?;
    if lambda.len() != pi.d() {
        return Err(Error::DimensionMismatch { expected: pi.d(), got: lambda.len() });
    }
    let bits = lambda[0].prec();
    let total = Float::with_val(bits, Float::sum(lambda.iter()));
    let a = &lambda[pi.alpha_t()];
    // λ_t p > (p-1) total
    Ok(Float::with_val(bits, a * p) > Float::with_val(bits, &total * (p - 1)))
}

#[derive(Clone, Debug)]
pub struct FoliationPoint {
    /// Lengths by letter; `α_t` carries `(1-s) + s(p-1)/p`.
    pub lambda: Vec<Float>,
    /// Some coordinate vanishes (`s = 0` or a zero coordinate of `λ̂`).
    pub degenerate: bool,
}

/// `F_p(λ̂, s) = ((s/p) λ̂, (1-s) + s(p-1)/p)`. `λ̂` lists the letters other
/// than `α_t` in increasing letter order.
pub fn fp_map(pi: &Permutation, lambda_hat: &[Float], s: &Float, p: u64) -> Result<FoliationPoint> {
    check_shape(pi, p)?;
    let d = pi.d();
    if lambda_hat.len() + 1 != d {
        return Err(Error::DimensionMismatch { expected: d - 1, got: lambda_hat.len() });
    }
    let bits = s.prec();
    let at = pi.alpha_t();
    let scale = Float::with_val(bits, s / p);
    let mut lambda = Vec::with_capacity(d);
    let mut hat = lambda_hat.iter();
    for a in 0..d {
        if a == at {
            lambda.push(Float::with_val(bits, 1 - &scale));
        } else {
            lambda.push(Float::with_val(bits, hat.next().unwrap() * &scale));
        }
    }
    let degenerate = lambda.iter().any(|l| l.is_zero());
    Ok(FoliationPoint { lambda, degenerate })
}

/// `s(θ) = 1 / (1 + tan θ)` for `θ ∈ (0, π/2)`.
pub fn s_of_theta(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::OutOfDomain(theta));
    }
    Ok(1.0 / (1.0 + theta.tan()))
}

fn residue(n: i64, p: u64) -> u64 {
    n.rem_euclid(p as i64) as u64
}

/// Least `t ≥ 1` with `Σ_{j<t} n⃗(T^j x) ≡ 0 (mod p)`, together with the letters visited.
pub fn stopping_orbit(t: &IetMap, nvec: &[i64], p: u64, x: &Float) -> Result<(usize, Vec<usize>)> {
    let bound = 2 * p as usize - 1;
    let mut y = Float::with_val(t.precision().bits, x);
    let mut sum = 0u64;
    let mut letters = Vec::new();
    for step in 1..=bound {
        let a = t.apply_assign(&mut y);
        letters.push(a);
        sum = (sum + residue(nvec[a], p)) % p;
        if sum == 0 {
            return Ok((step, letters));
        }
    }
    Err(Error::BoundViolated { bound })
}

pub fn stopping_time(t: &IetMap, nvec: &[i64], p: u64, x: &Float) -> Result<usize> {
    stopping_orbit(t, nvec, p, x).map(|(s, _)| s)
}

#[derive(Clone, Debug, Serialize)]
pub struct SuspensionInterval {
    pub name: String,
    /// `α` for `T^{-j}(I_α)`; `None` for `Ĩ`.
    pub base_letter: Option<usize>,
    pub j: usize,
    #[serde(serialize_with = "ser_float")]
    pub start: Float,
    #[serde(serialize_with = "ser_float")]
    pub end: Float,
    #[serde(serialize_with = "ser_float")]
    pub image_start: Float,
    pub stopping_time: usize,
    /// Base letters visited by `x, Tx, ..., T^{t-1}x`.
    pub letters: Vec<usize>,
}

fn ser_float<S: serde::Serializer>(x: &Float, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(x.to_f64())
}

impl SuspensionInterval {
    pub fn length(&self) -> Float {
        Float::with_val(self.start.prec(), &self.end - &self.start)
    }
}

#[derive(Clone, Debug)]
pub struct SuspensionIet {
    base: IetMap,
    p: u64,
    nvec: Vec<i64>,
    /// Domain order.
    intervals: Vec<SuspensionInterval>,
    map: IetMap,
}

impl SuspensionIet {
    pub fn base(&self) -> &IetMap {
        &self.base
    }
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn nvec(&self) -> &[i64] {
        &self.nvec
    }
    pub fn intervals(&self) -> &[SuspensionInterval] {
        &self.intervals
    }
    /// `S` as an IET; letter `i` is the `i`-th domain interval.
    pub fn map(&self) -> &IetMap {
        &self.map
    }
    pub fn perm_s(&self) -> &Permutation {
        self.map.perm()
    }
    pub fn lengths_s(&self) -> &[Float] {
        self.map.lengths()
    }

    /// `ℓ_α = t mod p` on `J_α` when constant there, by base letter (`None` for `α_t`
    /// or when the residue varies).
    pub fn residues(&self) -> Vec<Option<u64>> {
        let d = self.base.d();
        let mut out: Vec<Option<Option<u64>>> = vec![None; d];
        for iv in &self.intervals {
            let Some(a) = iv.base_letter else { continue };
            let r = iv.stopping_time as u64 % self.p;
            out[a] = match out[a] {
                None => Some(Some(r)),
                Some(Some(q)) if q == r => Some(Some(r)),
                _ => Some(None),
            };
        }
        out.into_iter().map(|o| o.flatten()).collect()
    }

    pub fn residues_constant(&self) -> bool {
        let at = self.base.perm().alpha_t();
        self.residues().iter().enumerate().all(|(a, r)| a == at || r.is_some())
    }

    pub fn max_stopping_time(&self) -> usize {
        self.intervals.iter().map(|iv| iv.stopping_time).max().unwrap_or(0)
    }

    /// `|Σ domain lengths - Σ image lengths|` plus the largest gap or overlap between
    /// consecutive sorted image intervals.
    pub fn tiling_defect(&self) -> f64 {
        let bits = self.base.precision().bits;
        let mut imgs: Vec<(Float, Float)> =
            self.intervals.iter().map(|iv| (iv.image_start.clone(), iv.length())).collect();
        imgs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut edge = Float::with_val(bits, 0);
        let mut worst = Float::with_val(bits, 0);
        for (s, l) in &imgs {
            let gap = Float::with_val(bits, s - &edge).abs();
            if gap > worst {
                worst = gap;
            }
            edge = Float::with_val(bits, s + l);
        }
        let tail = Float::with_val(bits, &edge - self.base.total()).abs();
        if tail > worst {
            worst = tail;
        }
        worst.to_f64()
    }
}

/// Letter whose image interval contains `y`.
fn inverse_letter_at(t: &IetMap, y: &Float) -> usize {
    let bottom = t.perm().bottom();
    let i = bottom.partition_point(|&a| t.image_start(a) <= y);
    bottom[i.saturating_sub(1)]
}

pub fn build_suspension(t: &IetMap, nvec: &[i64], p: u64) -> Result<SuspensionIet> {
    let pi = t.perm();
    check_shape(pi, p)?;
    let d = pi.d();
    if nvec.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: nvec.len() });
    }
    let at = pi.alpha_t();
    if residue(nvec[at], p) == 0 {
        return Err(Error::InvalidConfig(format!("p = {p} divides n at the last top letter")));
    }
    if !in_delta_p(t.lengths(), pi, p)? {
        return Err(Error::InvalidConfig(format!("lengths are outside the slab for p = {p}")));
    }
    let prec = t.precision();
    let bits = prec.bits;
    let floor = Float::with_val(bits, t.total() * &prec.floor());
    let tol = Float::with_val(bits, t.total() * &prec.merge_tolerance());

    let mut raw: Vec<(Option<usize>, usize, Float, Float)> = Vec::with_capacity(p as usize * (d - 1) + 1);
    for &a in pi.top() {
        if a == at {
            continue;
        }
        let mut lo = t.start(a).clone();
        let mut hi = Float::with_val(bits, &lo + &t.lengths()[a]);
        for j in 0..p as usize {
            raw.push((Some(a), j, lo.clone(), hi.clone()));
            if j + 1 == p as usize {
                break;
            }
            let b = inverse_letter_at(t, &lo);
            let b_end = Float::with_val(bits, t.image_start(b) + &t.lengths()[b]);
            if hi > Float::with_val(bits, &b_end + &tol) {
                return Err(Error::DegenerateInterval { index: raw.len() });
            }
            lo -= &t.delta()[b];
            hi -= &t.delta()[b];
        }
    }
    raw.sort_by(|x, y| x.2.partial_cmp(&y.2).unwrap());
    // The complement of the J_α is the single interval Ĩ.
    let mut edge = Float::with_val(bits, 0);
    let mut gaps = Vec::new();
    for (i, r) in raw.iter().enumerate() {
        let gap = Float::with_val(bits, &r.2 - &edge);
        if gap < Float::with_val(bits, -&tol) {
            return Err(Error::NonMatchingBreakpoints(format!("suspension intervals overlap at {i}")));
        }
        if gap > tol {
            gaps.push((i, edge.clone(), r.2.clone()));
        }
        edge = r.3.clone();
    }
    if Float::with_val(bits, t.total() - &edge) > tol {
        gaps.push((raw.len(), edge.clone(), t.total().clone()));
    }
    if gaps.len() != 1 {
        return Err(Error::NonMatchingBreakpoints(format!("expected one residual interval, found {}", gaps.len())));
    }
    let (gi, g0, g1) = gaps.pop().unwrap();
    raw.insert(gi, (None, 0, g0, g1));

    let mut intervals = Vec::with_capacity(raw.len());
    for (index, (letter, j, lo, hi)) in raw.into_iter().enumerate() {
        let len = Float::with_val(bits, &hi - &lo);
        if len <= floor {
            return Err(Error::DegenerateInterval { index });
        }
        let mid = Float::with_val(bits, &lo + &hi) / 2u32;
        let (st, letters) = stopping_orbit(t, nvec, p, &mid)?;
        let mut image_start = lo.clone();
        for &b in &letters {
            image_start += &t.delta()[b];
        }
        let name = match letter {
            Some(a) => format!("{}{}", pi.name(a), j),
            None => TILDE.to_string(),
        };
        intervals.push(SuspensionInterval {
            name,
            base_letter: letter,
            j,
            start: lo,
            end: hi,
            image_start,
            stopping_time: st,
            letters,
        });
    }
    let top: Vec<&str> = intervals.iter().map(|iv| iv.name.as_str()).collect();
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order.sort_by(|&a, &b| intervals[a].image_start.partial_cmp(&intervals[b].image_start).unwrap());
    let bottom: Vec<&str> = order.iter().map(|&i| intervals[i].name.as_str()).collect();
    let perm_s = validate_permutation(&top, &bottom)?;
    let lengths: Vec<Float> = intervals.iter().map(|iv| iv.length()).collect();
    let map = IetMap::new(perm_s, lengths, prec)?;
    let s = SuspensionIet { base: t.clone(), p, nvec: nvec.to_vec(), intervals, map };
    if s.tiling_defect() > tol.to_f64() {
        return Err(Error::NonMatchingBreakpoints("image intervals do not tile".into()));
    }
    Ok(s)
}

/// `𝒪_k` as a `(p(d-1)+1) × d` matrix: row `i` is the suspension interval, column `α`
/// the base indicator `𝟙_α`.
#[derive(Clone, Debug, Serialize)]
pub struct UntwistOperator {
    pub k: u64,
    pub exact: Vec<Vec<CycloInt>>,
    pub matrix: Vec<Vec<Complex64>>,
}

pub fn untwist_operator(s: &SuspensionIet, k: u64) -> Result<UntwistOperator> {
    let p = s.p;
    if k >= p {
        return Err(Error::InvalidConfig(format!("k = {k} must be below p = {p}")));
    }
    let d = s.base.d();
    let mut exact = Vec::with_capacity(s.intervals.len());
    for iv in &s.intervals {
        let mut row = vec![CycloInt::zero(p)?; d];
        let mut phase = 0u64;
        for &a in &iv.letters {
            row[a].add_root(((k * phase) % p) as i64, 1);
            phase = (phase + residue(s.nvec[a], p)) % p;
        }
        exact.push(row);
    }
    let matrix = exact.iter().map(|r| r.iter().map(CycloInt::to_complex).collect()).collect();
    Ok(UntwistOperator { k, exact, matrix })
}

impl UntwistOperator {
    pub fn apply(&self, f: &LocallyConstantFunction) -> LocallyConstantFunction {
        let values =
            self.matrix.iter().map(|row| row.iter().zip(&f.values).map(|(m, v)| m * v).sum()).collect();
        LocallyConstantFunction::new(values)
    }

    pub fn kernel_dim_exact(&self) -> Result<usize> {
        Ok(self.exact[0].len() - rank_over_cyclotomic(&self.exact)?)
    }

    pub fn kernel_dim_numeric(&self, tol: f64) -> usize {
        self.matrix[0].len() - numeric_rank(&self.matrix, tol)
    }
}

/// Horizontal concatenation `[𝒪_0 | 𝒪_1 | ...]`, the matrix of `⊕_k 𝒪_k`.
fn stacked<T: Clone>(ops: &[UntwistOperator], pick: impl Fn(&UntwistOperator) -> &Vec<Vec<T>>) -> Vec<Vec<T>> {
    let rows = pick(&ops[0]).len();
    (0..rows).map(|i| ops.iter().flat_map(|o| pick(o)[i].iter().cloned()).collect()).collect()
}

pub fn stacked_rank_exact(ops: &[UntwistOperator]) -> Result<usize> {
    rank_over_cyclotomic(&stacked(ops, |o| &o.exact))
}

pub fn stacked_rank_numeric(ops: &[UntwistOperator], tol: f64) -> usize {
    numeric_rank(&stacked(ops, |o| &o.matrix), tol)
}

/// `Σ_k 𝒪_k(𝟙_{α_t}) = p 𝟙_{α_t}` in exact arithmetic; `ops` must hold every `k`.
pub fn alpha_t_sum_identity(s: &SuspensionIet, ops: &[UntwistOperator]) -> Result<bool> {
    let p = s.p;
    let at = s.base.perm().alpha_t();
    let mut ks: Vec<u64> = ops.iter().map(|o| o.k).collect();
    ks.sort_unstable();
    if ks != (0..p).collect::<Vec<_>>() {
        return Err(Error::InvalidConfig("need one operator per residue k".into()));
    }
    for (i, iv) in s.intervals.iter().enumerate() {
        let mut acc = CycloInt::zero(p)?;
        for o in ops {
            acc = acc.add(&o.exact[i][at]);
        }
        let want = if iv.letters[0] == at { p as i64 } else { 0 };
        if acc.as_integer() != Some(want) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rank by Gaussian elimination with complete pivoting; pivots below
/// `tol · max|entry|` count as zero.
pub fn numeric_rank(rows: &[Vec<Complex64>], tol: f64) -> usize {
    let mut a: Vec<Vec<Complex64>> = rows.to_vec();
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let scale = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    while rank < m.min(n) {
        let (mut bi, mut bj, mut best) = (rank, rank, 0.0);
        for (i, row) in a.iter().enumerate().skip(rank) {
            for (j, z) in row.iter().enumerate().skip(rank) {
                if z.norm() > best {
                    (bi, bj, best) = (i, j, z.norm());
                }
            }
        }
        if best <= tol * scale {
            break;
        }
        a.swap(rank, bi);
        for row in a.iter_mut() {
            row.swap(rank, bj);
        }
        let piv = a[rank][rank];
        let prow = a[rank].clone();
        for row in a.iter_mut().skip(rank + 1) {
            let f = row[rank] / piv;
            if f != Complex64::new(0.0, 0.0) {
                for (x, y) in row.iter_mut().zip(&prow).skip(rank) {
                    *x -= f * y;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyCheck {
    /// `S_{m_ℓ}(f, ζ_k, x)` under the base map.
    pub twisted: Complex64,
    /// `Σ_{r<ℓ} 𝒪_k(f)(S^r x)`.
    pub untwisted: Complex64,
    pub m: usize,
    pub ok: bool,
}

/// Compare twisted sums at the stopping instants with ordinary sums of `𝒪_k(f)`
/// under `S`. The tolerance is relative to `max(1, m · max|f|)`.
pub fn birkhoff_conjugacy_check(
    s: &SuspensionIet,
    f: &LocallyConstantFunction,
    k: u64,
    x: &Float,
    ell: usize,
    tol: f64,
) -> Result<ConjugacyCheck> {
    let t = &s.base;
    let p = s.p;
    let bits = t.precision().bits;
    // m_ℓ from stopping times along the base orbit.
    let mut y = Float::with_val(bits, x);
    let mut m = 0;
    for _ in 0..ell {
        let (st, letters) = stopping_orbit(t, &s.nvec, p, &y)?;
        for b in letters {
            y += &t.delta()[b];
        }
        m += st;
    }
    let num: Vec<i64> = s.nvec.iter().map(|&n| (k as i64) * n).collect();
    let zeta = TwistParameter::rational(&num, p);
    let twisted = twisted_birkhoff_sum(t, f, &zeta, x, m);

    let op = untwist_operator(s, k)?;
    let g = op.apply(f);
    let mut z = Float::with_val(bits, x);
    let mut untwisted = Complex64::new(0.0, 0.0);
    for _ in 0..ell {
        let i = s.map.apply_assign(&mut z);
        untwisted += g.values[i];
    }
    let scale = (m as f64 * f.max_abs()).max(1.0);
    let ok = (twisted - untwisted).norm() <= tol * scale;
    Ok(ConjugacyCheck { twisted, untwisted, m, ok })
}

/// Every `n⃗ ∈ {0..p-1}^d` with `n_{α_t} ≠ 0`, in lexicographic order.
pub fn residue_grid(d: usize, p: u64, alpha_t: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let total = (p as usize).pow(d as u32);
    for mut code in 0..total {
        let mut n = vec![0i64; d];
        for x in n.iter_mut().rev() {
            *x = (code % p as usize) as i64;
            code /= p as usize;
        }
        if n[alpha_t] != 0 {
            out.push(n);
        }
    }
    out
}

/// Fixed interior point of `Δ_p` used for grid sweeps: `F_p(λ̂, s)` with
/// `λ̂_i ∝ i + 1` (distinct, so no coincidences) and `s = (p+1)/(2p)`.
pub fn sweep_lengths(pi: &Permutation, p: u64, prec: Precision) -> Result<Vec<Float>> {
    let d = pi.d();
    let w: u32 = (1..d as u32).sum();
    let hat: Vec<Float> = (1..d as u32).map(|i| Float::with_val(prec.bits, i) / w).collect();
    let s = Float::with_val(prec.bits, p + 1) / (2 * p);
    Ok(fp_map(pi, &hat, &s, p)?.lambda)
}

/// Outcome of the structural checks on one suspension.
#[derive(Clone, Debug, Serialize)]
pub struct CellReport {
    pub p: u64,
    pub nvec: Vec<i64>,
    pub interval_count: usize,
    pub max_stopping_time: usize,
    pub residues: Vec<Option<u64>>,
    pub residues_constant: bool,
    pub tiling_defect: f64,
    /// Kernel dimensions of `𝒪_1, ..., 𝒪_{p-1}`.
    pub kernel_dims_numeric: Vec<usize>,
    pub kernel_dims_exact: Vec<usize>,
    pub stacked_rank_numeric: usize,
    pub stacked_rank_exact: usize,
    pub alpha_t_identity: bool,
    /// Square surface of the suspension.
    pub x: SingularityProfile,
    /// Square surface of the base permutation.
    pub y: SingularityProfile,
    pub orders_lift: bool,
    pub genus_bound: bool,
    pub x_genus_matches_omega: bool,
}

/// Tolerance for numeric ranks of `𝒪_k`.
pub const RANK_TOL: f64 = 1e-8;

pub fn check_cell(s: &SuspensionIet) -> Result<CellReport> {
    let p = s.p;
    let d = s.base.d();
    let ops: Vec<UntwistOperator> = (0..p).map(|k| untwist_operator(s, k)).collect::<Result<_>>()?;
    let x = square_profile(s.perm_s())?;
    let y = square_profile(s.base.perm())?;
    Ok(CellReport {
        p,
        nvec: s.nvec.clone(),
        interval_count: s.intervals.len(),
        max_stopping_time: s.max_stopping_time(),
        residues: s.residues(),
        residues_constant: s.residues_constant(),
        tiling_defect: s.tiling_defect(),
        kernel_dims_numeric: ops[1..].iter().map(|o| o.kernel_dim_numeric(RANK_TOL)).collect(),
        kernel_dims_exact: ops[1..].iter().map(|o| o.kernel_dim_exact()).collect::<Result<_>>()?,
        stacked_rank_numeric: stacked_rank_numeric(&ops, RANK_TOL),
        stacked_rank_exact: stacked_rank_exact(&ops)?,
        alpha_t_identity: alpha_t_sum_identity(s, &ops)?,
        orders_lift: orders_lift(&x, &y, p as usize),
        genus_bound: genus_bound_holds(x.genus, y.genus, p as usize, d),
        x_genus_matches_omega: genus_agrees_with_omega(s.perm_s())?,
        x,
        y,
    })
}

impl CellReport {
    /// Failed suspension and untwisting checks, by name.
    pub fn suspension_failures(&self) -> Vec<&'static str> {
        let p = self.p as usize;
        let d = self.nvec.len();
        let n = self.interval_count;
        let mut out = vec![];
        if self.max_stopping_time > 2 * p - 1 {
            out.push("stopping time bound");
        }
        if n != p * (d - 1) + 1 {
            out.push("interval count");
        }
        if !self.residues_constant {
            out.push("residue constancy");
        }
        if self.tiling_defect > 1e-20 {
            out.push("tiling");
        }
        if self.kernel_dims_numeric.iter().any(|&k| k != 1) {
            out.push("numeric kernel dimension");
        }
        if self.kernel_dims_exact.iter().any(|&k| k != 1) {
            out.push("exact kernel dimension");
        }
        if self.stacked_rank_numeric != n {
            out.push("numeric stacked surjectivity");
        }
        if self.stacked_rank_exact != n {
            out.push("exact stacked surjectivity");
        }
        if !self.alpha_t_identity {
            out.push("alpha_t sum identity");
        }
        out
    }

    /// Failed cover checks between the two square surfaces, by name.
    pub fn surface_failures(&self) -> Vec<&'static str> {
        let mut out = vec![];
        if !self.genus_bound {
            out.push("genus bound");
        }
        if !self.orders_lift {
            out.push("order lifting");
        }
        if !self.x.gauss_bonnet() || !self.y.gauss_bonnet() {
            out.push("gauss-bonnet");
        }
        if !self.x_genus_matches_omega {
            out.push("omega genus on perm_S");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_example() -> SuspensionIet {
        let pi = Permutation::parse("A B / B A").unwrap();
        let prec = Precision::default();
        let lam = vec![prec.float(1.0) / 12u32, prec.float(11.0) / 12u32];
        let t = IetMap::new(pi, lam, prec).unwrap();
        build_suspension(&t, &[2, 1], 3).unwrap()
    }

    #[test]
    fn theta_map() {
        assert!((s_of_theta(std::f64::consts::FRAC_PI_4).unwrap() - 0.5).abs() < 1e-15);
        assert!((s_of_theta(3f64.atan()).unwrap() - 0.25).abs() < 1e-15);
        assert!(s_of_theta(1e-9).unwrap() > 0.999_999);
        assert!(matches!(s_of_theta(0.0), Err(Error::OutOfDomain(_))));
        assert!(s_of_theta(2.0).is_err());
    }

    #[test]
    fn foliation_endpoints() {
        let pi = Permutation::reversal(4).unwrap();
        let prec = Precision::default();
        let hat = vec![prec.float(0.5), prec.float(0.5), prec.float(0.0)];
        let pt = fp_map(&pi, &hat, &prec.float(0.5), 3).unwrap();
        let want = [1.0 / 12.0, 1.0 / 12.0, 0.0, 5.0 / 6.0];
        for (l, w) in pt.lambda.iter().zip(want) {
            assert!((l.to_f64() - w).abs() < 1e-15);
        }
        assert!(pt.degenerate);
        let pt = fp_map(&pi, &[prec.float(0.2), prec.float(0.3), prec.float(0.5)], &prec.float(0.0), 3).unwrap();
        assert!(pt.degenerate);
        assert_eq!(pt.lambda[3].to_f64(), 1.0);
        let pt = fp_map(&pi, &[prec.float(0.2), prec.float(0.3), prec.float(0.5)], &prec.float(1.0), 3).unwrap();
        assert!(!in_delta_p(&pt.lambda, &pi, 3).unwrap());
        assert!(matches!(
            fp_map(&Permutation::parse("A B C / B C A").unwrap(), &hat[..2], &prec.float(0.5), 3),
            Err(Error::BadPermutationShape)
        ));
        assert!(matches!(fp_map(&pi, &hat, &prec.float(0.5), 4), Err(Error::NotPrime(4))));
    }

    #[test]
    fn rotation_stopping_times() {
        let s = rotation_example();
        let t = s.base();
        let prec = t.precision();
        // I_A = [0, 1/12), T^{-2}(I_A) = [2/12, 3/12), Ĩ = [3/12, 1).
        assert_eq!(stopping_time(t, &[2, 1], 3, &prec.float(0.04)).unwrap(), 2);
        assert_eq!(stopping_time(t, &[2, 1], 3, &prec.float(0.2)).unwrap(), 5);
        assert_eq!(stopping_time(t, &[2, 1], 3, &prec.float(0.5)).unwrap(), 3);
        assert_eq!(s.intervals().len(), 4);
        assert!(s.max_stopping_time() <= 5);
        assert!(s.residues_constant());
        assert!(s.tiling_defect() < 1e-30);
    }

    #[test]
    fn rotation_image_of_j() {
        let s = rotation_example();
        let mut imgs: Vec<(f64, f64)> = s
            .intervals()
            .iter()
            .filter(|iv| iv.base_letter.is_some())
            .map(|iv| (iv.image_start.to_f64(), iv.image_start.to_f64() + iv.length().to_f64()))
            .collect();
        imgs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let want = [(9.0 / 12.0, 10.0 / 12.0), (10.0 / 12.0, 11.0 / 12.0), (11.0 / 12.0, 1.0)];
        for (g, w) in imgs.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-15 && (g.1 - w.1).abs() < 1e-15);
        }
    }

    #[test]
    fn untwist_indicator_formula() {
        let s = rotation_example();
        let p = 3;
        for k in 0..p {
            let op = untwist_operator(&s, k).unwrap();
            for (i, iv) in s.intervals().iter().enumerate() {
                let want = match iv.base_letter {
                    Some(_) => crate::numeric::cis_turns(((iv.j as u64 * k) % p) as f64 / p as f64),
                    None => Complex64::new(0.0, 0.0),
                };
                assert!((op.matrix[i][0] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn untwist_ranks() {
        let s = rotation_example();
        let ops: Vec<_> = (0..3).map(|k| untwist_operator(&s, k).unwrap()).collect();
        for op in &ops[1..] {
            assert_eq!(op.kernel_dim_exact().unwrap(), 1);
            assert_eq!(op.kernel_dim_numeric(1e-8), 1);
        }
        assert_eq!(stacked_rank_exact(&ops).unwrap(), 4);
        assert_eq!(stacked_rank_numeric(&ops, 1e-8), 4);
        assert!(alpha_t_sum_identity(&s, &ops).unwrap());
    }

    #[test]
    fn conjugacy_small_cases() {
        let s = rotation_example();
        let prec = s.base().precision();
        let f = LocallyConstantFunction::real(&[0.7, -1.3]);
        let c = birkhoff_conjugacy_check(&s, &f, 2, &prec.float(0.3), 0, 2f64.powi(-40)).unwrap();
        assert!(c.ok && c.twisted.norm() == 0.0);
        let c = birkhoff_conjugacy_check(&s, &f, 0, &prec.float(0.3), 17, 2f64.powi(-40)).unwrap();
        assert!(c.ok, "{c:?}");
        let c = birkhoff_conjugacy_check(&s, &f, 1, &prec.float(0.123), 50, 2f64.powi(-40)).unwrap();
        assert!(c.ok, "{c:?}");
    }

    #[test]
    fn preconditions() {
        let pi = Permutation::parse("A B / B A").unwrap();
        let t = IetMap::from_f64(&pi, &[0.5, 0.5], Precision::default()).unwrap();
        assert!(build_suspension(&t, &[1, 1], 3).is_err());
        let t = IetMap::from_f64(&pi, &[0.1, 0.9], Precision::default()).unwrap();
        assert!(matches!(build_suspension(&t, &[1, 3], 3), Err(Error::InvalidConfig(_))));
        assert!(matches!(build_suspension(&t, &[1, 1], 9), Err(Error::NotPrime(9))));
    }

    #[test]
    fn grid_size() {
        assert_eq!(residue_grid(3, 3, 2).len(), 18);
    }
}
