//! Rauzy-Veech induction, its Zorich acceleration, cocycle matrices and the
//! toral dynamics `ζ ↦ B ζ mod Z^d`.
//!
//! Matrices act on row vectors of lengths (`λ' B = λ`) and on column vectors
//! of functions and twists (`B f`, `B ζ`).
//!
//! A Zorich step is computed in closed form: during a run of one type the
//! winner stays put and the block of letters after it in the other row cycles,
//! so the run is `q` whole cycles followed by fewer than one more cycle of
//! single steps. [`zorich_step_naive`] composes single Rauzy steps instead.

use rug::{Assign, Float, Integer};
use serde::Serialize;

use crate::combinatorics::{MoveKind, Permutation, RauzyDiagram, RauzyEdge};
use crate::error::{Error, Result};
use crate::iet::TwistParameter;
use crate::linalg::IntMatrix;
use crate::numeric::{sum_floats, Precision};

/// Default bound on the number of Rauzy steps inside one Zorich step.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

fn kind_of(lambda: &[Float], pi: &Permutation, tie: &Float) -> Result<MoveKind> {
    let (lt, lb) = (&lambda[pi.alpha_t()], &lambda[pi.alpha_b()]);
    let diff = Float::with_val(lt.prec(), lt - lb);
    if diff.clone().abs() <= *tie {
        return Err(Error::TieBreakUndefined);
    }
    Ok(if diff.is_sign_positive() { MoveKind::Top } else { MoveKind::Bottom })
}

fn tie_threshold(lambda: &[Float], prec: Precision) -> Float {
    sum_floats(prec.bits, lambda) * prec.floor()
}

#[derive(Clone, Debug)]
pub struct RauzyStep {
    pub kind: MoveKind,
    pub matrix: IntMatrix,
    pub next_lambda: Vec<Float>,
    pub next_perm: Permutation,
}

pub fn rauzy_step(lambda: &[Float], pi: &Permutation, prec: Precision) -> Result<RauzyStep> {
    let d = pi.d();
    if lambda.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: lambda.len() });
    }
    let kind = kind_of(lambda, pi, &tie_threshold(lambda, prec))?;
    let (winner, loser) = match kind {
        MoveKind::Top => (pi.alpha_t(), pi.alpha_b()),
        MoveKind::Bottom => (pi.alpha_b(), pi.alpha_t()),
    };
    let mut next_lambda: Vec<Float> = lambda.iter().map(|l| Float::with_val(prec.bits, l)).collect();
    let lo = next_lambda[loser].clone();
    next_lambda[winner] -= &lo;
    Ok(RauzyStep {
        kind,
        matrix: IntMatrix::elementary(d, loser, winner),
        next_lambda,
        next_perm: pi.rauzy_move(kind),
    })
}

/// A maximal run of Rauzy steps of one type. Its matrix is
/// `I + Σ count · E_{loser, winner}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ZorichRun {
    pub kind: MoveKind,
    pub winner: usize,
    /// `(letter, number of times it lost)`, in the order the letters first lost.
    pub losers: Vec<(usize, u64)>,
    pub rauzy_count: u64,
}

impl ZorichRun {
    pub fn matrix(&self, d: usize) -> IntMatrix {
        let mut m = IntMatrix::identity(d);
        for &(b, c) in &self.losers {
            m[(b, self.winner)] += c;
        }
        m
    }

    /// `v ← B v` for a column vector.
    pub fn apply_column_f64(&self, v: &mut [f64]) {
        let w = v[self.winner];
        for &(b, c) in &self.losers {
            v[b] += c as f64 * w;
        }
    }

    /// `ζ ← B ζ mod 1`.
    pub fn apply_twist(&self, zeta: &mut TwistParameter) {
        match zeta {
            TwistParameter::Real(z) => {
                let zw = z[self.winner].clone();
                for &(b, c) in &self.losers {
                    let mut t = Float::with_val(zw.prec(), &zw * c);
                    t = t.fract();
                    z[b] += &t;
                    if z[b] >= 1u32 {
                        z[b] -= 1u32;
                    }
                }
            }
            TwistParameter::Rational { num, den } => {
                let zw = num[self.winner].clone();
                for &(b, c) in &self.losers {
                    let t = Integer::from(&zw * c);
                    num[b] += t;
                    num[b] %= &*den;
                }
            }
        }
    }
}

/// Perform one Zorich step in place on unnormalized lengths.
/// Ties are decided against the absolute threshold `tie`.
pub fn zorich_run_in_place(
    lambda: &mut [Float],
    pi: &mut Permutation,
    tie: &Float,
    cap: u64,
) -> Result<ZorichRun> {
    let kind = kind_of(lambda, pi, tie)?;
    let winner = pi.winner(kind);
    let block: Vec<usize> = pi.run_block(kind).to_vec();
    let m = block.len();
    let bits = lambda[winner].prec();
    let block_len = Float::with_val(bits, Float::sum(block.iter().map(|&b| &lambda[b])));
    let ratio = Float::with_val(bits, &lambda[winner] / &block_len).floor();
    let q = ratio.to_integer().unwrap_or_default();
    let q = if q > 1 { q - 1u32 } else { Integer::new() };
    let full = q.to_u64().filter(|&q| q.saturating_mul(m as u64) <= cap).ok_or(Error::StepCapExceeded { cap: cap as usize })?;
    let mut counts = vec![full; m];
    if full > 0 {
        let sub = Float::with_val(bits, &block_len * full);
        lambda[winner] -= &sub;
    }
    let mut n = full * m as u64;
    let mut diff = Float::new(bits);
    // Letters lose in the order block[m-1], block[m-2], ..., block[0], cyclically.
    let mut i = m - 1;
    loop {
        let b = block[i];
        diff.assign(&lambda[winner] - &lambda[b]);
        if diff.clone().abs() <= *tie {
            return Err(Error::TieBreakUndefined);
        }
        if diff.is_sign_negative() {
            break;
        }
        lambda[winner].assign(&diff);
        counts[i] += 1;
        n += 1;
        if n > cap {
            return Err(Error::StepCapExceeded { cap: cap as usize });
        }
        i = if i == 0 { m - 1 } else { i - 1 };
    }
    let losers = (0..m).rev().filter(|&j| counts[j] > 0).map(|j| (block[j], counts[j])).collect();
    *pi = pi.apply_run(kind, n);
    Ok(ZorichRun { kind, winner, losers, rauzy_count: n })
}

#[derive(Clone, Debug)]
pub struct ZorichStep {
    pub kind: MoveKind,
    pub matrix: IntMatrix,
    pub rauzy_count: u64,
    /// Normalized to total length 1.
    pub next_lambda: Vec<Float>,
    pub next_perm: Permutation,
    pub run: ZorichRun,
}

pub fn zorich_step(lambda: &[Float], pi: &Permutation, prec: Precision) -> Result<ZorichStep> {
    zorich_step_with_cap(lambda, pi, prec, DEFAULT_STEP_CAP)
}

pub fn zorich_step_with_cap(lambda: &[Float], pi: &Permutation, prec: Precision, cap: u64) -> Result<ZorichStep> {
    let d = pi.d();
    if lambda.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: lambda.len() });
    }
    let tie = tie_threshold(lambda, prec);
    let mut lam: Vec<Float> = lambda.iter().map(|l| Float::with_val(prec.bits, l)).collect();
    let mut perm = pi.clone();
    let run = zorich_run_in_place(&mut lam, &mut perm, &tie, cap)?;
    normalize(&mut lam);
    Ok(ZorichStep {
        kind: run.kind,
        matrix: run.matrix(d),
        rauzy_count: run.rauzy_count,
        next_lambda: lam,
        next_perm: perm,
        run,
    })
}

/// Zorich step by composing single Rauzy steps; independent of the closed form.
pub fn zorich_step_naive(lambda: &[Float], pi: &Permutation, prec: Precision, cap: u64) -> Result<ZorichStep> {
    let d = pi.d();
    let tie = tie_threshold(lambda, prec);
    let first = kind_of(lambda, pi, &tie)?;
    let mut lam: Vec<Float> = lambda.iter().map(|l| Float::with_val(prec.bits, l)).collect();
    let mut perm = pi.clone();
    let mut matrix = IntMatrix::identity(d);
    let mut count = 0u64;
    let mut losers: Vec<(usize, u64)> = Vec::new();
    loop {
        if kind_of(&lam, &perm, &tie)? != first {
            break;
        }
        let (winner, loser) = match first {
            MoveKind::Top => (perm.alpha_t(), perm.alpha_b()),
            MoveKind::Bottom => (perm.alpha_b(), perm.alpha_t()),
        };
        let lo = lam[loser].clone();
        lam[winner] -= &lo;
        matrix = matrix.mul(&IntMatrix::elementary(d, loser, winner));
        match losers.iter_mut().find(|(b, _)| *b == loser) {
            Some(e) => e.1 += 1,
            None => losers.push((loser, 1)),
        }
        perm = perm.rauzy_move(first);
        count += 1;
        if count > cap {
            return Err(Error::StepCapExceeded { cap: cap as usize });
        }
    }
    normalize(&mut lam);
    let winner = pi.winner(first);
    Ok(ZorichStep {
        kind: first,
        matrix,
        rauzy_count: count,
        next_lambda: lam,
        next_perm: perm,
        run: ZorichRun { kind: first, winner, losers, rauzy_count: count },
    })
}

pub fn normalize(lambda: &mut [Float]) {
    let bits = lambda[0].prec();
    let total = sum_floats(bits, lambda);
    for l in lambda.iter_mut() {
        *l /= &total;
    }
}

/// `(λ, π, ζ) ↦ (λ', π', B ζ mod Z^d)`.
pub fn toral_zorich_step(
    lambda: &[Float],
    pi: &Permutation,
    zeta: &TwistParameter,
    prec: Precision,
) -> Result<(Vec<Float>, Permutation, TwistParameter)> {
    let step = zorich_step(lambda, pi, prec)?;
    let mut z = zeta.clone();
    step.run.apply_twist(&mut z);
    Ok((step.next_lambda, step.next_perm, z))
}

/// A Zorich orbit on unnormalized lengths, refusing to continue once the
/// smallest length drops below the separation floor (relative to the start).
#[derive(Clone, Debug)]
pub struct ZorichOrbit {
    pub perm: Permutation,
    pub lambda: Vec<Float>,
    pub prec: Precision,
    pub cap: u64,
    tie: Float,
    floor: Float,
    pub steps: u64,
}

impl ZorichOrbit {
    pub fn new(perm: Permutation, lambda: Vec<Float>, prec: Precision) -> Self {
        let scale = sum_floats(prec.bits, &lambda);
        let floor = Float::with_val(prec.bits, &scale * &prec.floor());
        ZorichOrbit { perm, lambda, prec, cap: DEFAULT_STEP_CAP, tie: floor.clone(), floor, steps: 0 }
    }

    pub fn step(&mut self) -> Result<ZorichRun> {
        let run = zorich_run_in_place(&mut self.lambda, &mut self.perm, &self.tie, self.cap)?;
        self.steps += 1;
        if self.lambda.iter().any(|l| *l < self.floor) {
            return Err(Error::PrecisionExhausted { floor_bits: self.prec.floor_bits });
        }
        Ok(run)
    }

    pub fn normalized_lambda(&self) -> Vec<Float> {
        let mut l = self.lambda.clone();
        normalize(&mut l);
        l
    }
}

#[derive(Clone, Debug)]
pub struct PathMatrix {
    pub path: Vec<RauzyEdge>,
    pub matrix: IntMatrix,
}

/// `B_γ = B_{γ_k} ⋯ B_{γ_1}` in the letters of the path's starting representative.
pub fn path_matrix(diagram: &RauzyDiagram, path: &[RauzyEdge]) -> Result<PathMatrix> {
    let Some(first) = path.first() else {
        let d = diagram.vertices.first().map_or(0, |p| p.d());
        return Ok(PathMatrix { path: Vec::new(), matrix: IntMatrix::identity(d) });
    };
    for (i, e) in path.iter().enumerate() {
        let known = e.source < diagram.len() && *diagram.edge(e.source, e.kind) == *e;
        let joins = i == 0 || path[i - 1].target == e.source;
        if !known || !joins {
            return Err(Error::NonComposablePath { index: i });
        }
    }
    let mut perm = diagram.vertices[first.source].clone();
    let d = perm.d();
    let mut matrix = IntMatrix::identity(d);
    for e in path {
        let (winner, loser) = match e.kind {
            MoveKind::Top => (perm.alpha_t(), perm.alpha_b()),
            MoveKind::Bottom => (perm.alpha_b(), perm.alpha_t()),
        };
        matrix = IntMatrix::elementary(d, loser, winner).mul(&matrix);
        perm = perm.rauzy_move(e.kind);
    }
    Ok(PathMatrix { path: path.to_vec(), matrix })
}

/// `max_{i,j,k} A_ij / A_kj` for a matrix with positive entries.
pub fn col(a: &IntMatrix) -> Result<f64> {
    let mut best = rug::Rational::from(1);
    for j in 0..a.cols() {
        let mut hi: Option<&Integer> = None;
        let mut lo: Option<&Integer> = None;
        for i in 0..a.rows() {
            let x = &a[(i, j)];
            if x.cmp0() != std::cmp::Ordering::Greater {
                return Err(Error::NonPositiveEntry { row: i, col: j });
            }
            if hi.is_none_or(|h| x > h) {
                hi = Some(x);
            }
            if lo.is_none_or(|l| x < l) {
                lo = Some(x);
            }
        }
        if let (Some(h), Some(l)) = (hi, lo) {
            let r = rug::Rational::from((h.clone(), l.clone()));
            if r > best {
                best = r;
            }
        }
    }
    Ok(best.to_f64())
}

/// One JSON-lines record of a Zorich orbit dump.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitRecord {
    pub step: u64,
    pub kind: MoveKind,
    pub rauzy_count: u64,
    pub matrix: IntMatrix,
    pub perm: Vec<usize>,
    pub lambda: Vec<f64>,
}

/// First `n` Zorich steps from `(λ, π)` as JSON lines.
pub fn orbit_dump(lambda: &[Float], pi: &Permutation, prec: Precision, n: usize) -> Result<Vec<String>> {
    let mut lam = lambda.to_vec();
    let mut perm = pi.clone();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let step = zorich_step(&lam, &perm, prec)?;
        let rec = OrbitRecord {
            step: i as u64 + 1,
            kind: step.kind,
            rauzy_count: step.rauzy_count,
            matrix: step.matrix,
            perm: step.next_perm.canonical_word(),
            lambda: step.next_lambda.iter().map(|x| x.to_f64()).collect(),
        };
        out.push(serde_json::to_string(&rec).expect("record serializes"));
        lam = step.next_lambda;
        perm = step.next_perm;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::rauzy_class;

    fn prec() -> Precision {
        Precision::default()
    }

    fn f(v: &[f64]) -> Vec<Float> {
        v.iter().map(|&x| prec().float(x)).collect()
    }

    fn rot() -> Permutation {
        Permutation::parse("A B / B A").unwrap()
    }

    fn close(a: &[Float], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x.to_f64() - y).abs() < 1e-14)
    }

    #[test]
    fn rauzy_step_examples() {
        let s = rauzy_step(&f(&[0.3, 0.7]), &rot(), prec()).unwrap();
        assert_eq!(s.kind, MoveKind::Top);
        assert!(close(&s.next_lambda, &[0.3, 0.4]));
        assert_eq!(s.matrix, IntMatrix::from_rows(&[vec![1, 1], vec![0, 1]]));
        let back = s.matrix.to_f64_rows();
        let row = [0.3 * back[0][0] + 0.4 * back[1][0], 0.3 * back[0][1] + 0.4 * back[1][1]];
        assert!((row[0] - 0.3).abs() < 1e-15 && (row[1] - 0.7).abs() < 1e-15);
        let s = rauzy_step(&f(&[0.7, 0.3]), &rot(), prec()).unwrap();
        assert_eq!(s.kind, MoveKind::Bottom);
        assert!(close(&s.next_lambda, &[0.4, 0.3]));
        assert_eq!(s.matrix.det(), 1);
    }

    #[test]
    fn tie_is_refused() {
        assert_eq!(rauzy_step(&f(&[0.5, 0.5]), &rot(), prec()).unwrap_err(), Error::TieBreakUndefined);
    }

    #[test]
    fn zorich_step_example() {
        let s = zorich_step(&f(&[0.3, 0.7]), &rot(), prec()).unwrap();
        assert_eq!(s.rauzy_count, 2);
        assert_eq!(s.matrix, IntMatrix::from_rows(&[vec![1, 2], vec![0, 1]]));
        assert!(close(&s.next_lambda, &[0.75, 0.25]));
    }

    #[test]
    fn closed_form_matches_naive() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p = Permutation::reversal(5).unwrap();
        let mut lam = crate::numeric::sample_simplex(&mut rng, 5, 128);
        let mut perm = p.clone();
        for _ in 0..40 {
            let a = zorich_step(&lam, &perm, prec()).unwrap();
            let b = zorich_step_naive(&lam, &perm, prec(), DEFAULT_STEP_CAP).unwrap();
            assert_eq!(a.matrix, b.matrix);
            assert_eq!(a.next_perm, b.next_perm);
            assert_eq!(a.rauzy_count, b.rauzy_count);
            for (x, y) in a.next_lambda.iter().zip(&b.next_lambda) {
                assert!(Float::with_val(128, x - y).abs() < Float::with_val(128, 1u32) >> 100u32);
            }
            lam = a.next_lambda;
            perm = a.next_perm;
        }
    }

    #[test]
    fn toral_example() {
        let z = TwistParameter::rational(&[3, 4], 12);
        let (_, _, z2) = toral_zorich_step(&f(&[0.3, 0.7]), &rot(), &z, prec()).unwrap();
        assert_eq!(z2, TwistParameter::rational(&[11, 4], 12));
        let (_, _, z0) = toral_zorich_step(&f(&[0.3, 0.7]), &rot(), &TwistParameter::zero(2), prec()).unwrap();
        assert!(z0.is_zero());
    }

    #[test]
    fn col_examples() {
        assert_eq!(col(&IntMatrix::from_rows(&[vec![1, 1], vec![1, 1]])).unwrap(), 1.0);
        assert_eq!(col(&IntMatrix::from_rows(&[vec![1, 2], vec![3, 4]])).unwrap(), 3.0);
        assert_eq!(
            col(&IntMatrix::from_rows(&[vec![1, 0], vec![3, 4]])).unwrap_err(),
            Error::NonPositiveEntry { row: 0, col: 1 }
        );
    }

    #[test]
    fn path_matrices() {
        let p = Permutation::reversal(4).unwrap();
        let dg = rauzy_class(&p);
        assert_eq!(path_matrix(&dg, &[]).unwrap().matrix, IntMatrix::identity(4));
        let e = dg.edge(0, MoveKind::Top).clone();
        assert_eq!(path_matrix(&dg, std::slice::from_ref(&e)).unwrap().matrix, IntMatrix::elementary(4, p.alpha_b(), p.alpha_t()));
        let bad = RauzyEdge { source: (e.target + 1) % dg.len(), kind: MoveKind::Top, target: 0 };
        assert!(matches!(path_matrix(&dg, &[e, bad]), Err(Error::NonComposablePath { .. })));
    }

    #[test]
    fn orbit_dump_lines_parse() {
        let lines = orbit_dump(&f(&[0.1, 0.2, 0.3, 0.4]), &Permutation::reversal(4).unwrap(), prec(), 3);
        // 0.1+0.3 = 0.4: a tie may occur further down the orbit, but not in three steps.
        let lines = lines.unwrap();
        assert_eq!(lines.len(), 3);
        let v: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
        assert_eq!(v["step"], 1);
    }
}
