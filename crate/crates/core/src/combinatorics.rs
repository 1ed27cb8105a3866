//! Permutations of a finite alphabet, Rauzy moves and classes, and the
//! intersection form with its genus/singularity data.
//!
//! Letters are indexed `0..d` internally; `names` keeps the user's labels.
//! Positions are 0-based (`pos_top[α] = π_t(α) - 1`).

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use rug::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::IntMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Top,
    Bottom,
}

impl MoveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MoveKind::Top => "top",
            MoveKind::Bottom => "bottom",
        }
    }

    pub fn other(&self) -> MoveKind {
        match self {
            MoveKind::Top => MoveKind::Bottom,
            MoveKind::Bottom => MoveKind::Top,
        }
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct Permutation {
    names: Arc<Vec<String>>,
    top: Vec<usize>,
    bottom: Vec<usize>,
    pos_top: Vec<usize>,
    pos_bot: Vec<usize>,
}

impl PartialEq for Permutation {
    fn eq(&self, other: &Self) -> bool {
        self.top == other.top && self.bottom == other.bottom && self.names == other.names
    }
}

impl Eq for Permutation {}

fn inverse(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (i, &a) in order.iter().enumerate() {
        pos[a] = i;
    }
    pos
}

/// Smallest `k < d` such that the first `k` letters of both rows coincide as sets.
fn reducible_prefix(top: &[usize], bottom: &[usize]) -> Option<usize> {
    let d = top.len();
    let pos_bot = inverse(bottom);
    let mut max_pos = 0usize;
    for (k, &a) in top.iter().enumerate().take(d - 1) {
        max_pos = max_pos.max(pos_bot[a]);
        if max_pos == k {
            return Some(k + 1);
        }
    }
    None
}

/// Build a permutation from two rows of letter names.
pub fn validate_permutation<S: AsRef<str>>(top_order: &[S], bottom_order: &[S]) -> Result<Permutation> {
    let d = top_order.len();
    if d < 2 {
        return Err(Error::NotABijection(format!("need at least two letters, got {d}")));
    }
    if bottom_order.len() != d {
        return Err(Error::NotABijection(format!(
            "rows have different lengths ({d} and {})",
            bottom_order.len()
        )));
    }
    let names: Vec<String> = top_order.iter().map(|s| s.as_ref().to_string()).collect();
    let mut index = HashMap::with_capacity(d);
    for (i, n) in names.iter().enumerate() {
        if index.insert(n.as_str(), i).is_some() {
            return Err(Error::NotABijection(format!("letter {n} repeated in the top row")));
        }
    }
    let mut seen = vec![false; d];
    let mut bottom = Vec::with_capacity(d);
    for s in bottom_order {
        let Some(&i) = index.get(s.as_ref()) else {
            return Err(Error::NotABijection(format!("letter {} missing from the top row", s.as_ref())));
        };
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::NotABijection(format!("letter {} repeated in the bottom row", s.as_ref())));
        }
        bottom.push(i);
    }
    let top: Vec<usize> = (0..d).collect();
    Permutation::from_parts(Arc::new(names), top, bottom)
}

impl Permutation {
    fn from_parts(names: Arc<Vec<String>>, top: Vec<usize>, bottom: Vec<usize>) -> Result<Self> {
        if let Some(k) = reducible_prefix(&top, &bottom) {
            return Err(Error::Reducible { k });
        }
        Ok(Self::from_parts_unchecked(names, top, bottom))
    }

    fn from_parts_unchecked(names: Arc<Vec<String>>, top: Vec<usize>, bottom: Vec<usize>) -> Self {
        let pos_top = inverse(&top);
        let pos_bot = inverse(&bottom);
        Permutation { names, top, bottom, pos_top, pos_bot }
    }

    /// Parse two rows separated by `/` or a newline, letters separated by whitespace.
    /// A row without whitespace is split into single characters.
    pub fn parse(s: &str) -> Result<Self> {
        let rows: Vec<&str> = if s.contains('/') { s.split('/').collect() } else { s.trim().lines().collect() };
        let rows: Vec<&str> = rows.into_iter().map(str::trim).filter(|r| !r.is_empty()).collect();
        if rows.len() != 2 {
            return Err(Error::Parse(format!("expected two rows, found {}", rows.len())));
        }
        let split = |r: &str| -> Vec<String> {
            if r.contains(char::is_whitespace) {
                r.split_whitespace().map(str::to_string).collect()
            } else {
                r.chars().map(|c| c.to_string()).collect()
            }
        };
        validate_permutation(&split(rows[0]), &split(rows[1]))
    }

    /// Permutation with top row `1..d` whose letter `i` sits at bottom position `word[i-1]`
    /// (1-based one-line notation of `π_b ∘ π_t⁻¹`).
    pub fn from_word(word: &[usize]) -> Result<Self> {
        let d = word.len();
        let mut bottom = vec![usize::MAX; d];
        for (i, &w) in word.iter().enumerate() {
            if w == 0 || w > d || bottom[w - 1] != usize::MAX {
                return Err(Error::NotABijection(format!("{word:?} is not a permutation of 1..{d}")));
            }
            bottom[w - 1] = i;
        }
        if d < 2 {
            return Err(Error::NotABijection("need at least two letters".into()));
        }
        let names: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
        Self::from_parts(Arc::new(names), (0..d).collect(), bottom)
    }

    /// `(1 2 ... d / d ... 2 1)`.
    pub fn reversal(d: usize) -> Result<Self> {
        let word: Vec<usize> = (1..=d).rev().collect();
        Self::from_word(&word)
    }

    pub fn d(&self) -> usize {
        self.top.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, letter: usize) -> &str {
        &self.names[letter]
    }

    pub fn letter(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Letters in top order.
    pub fn top(&self) -> &[usize] {
        &self.top
    }

    /// Letters in bottom order.
    pub fn bottom(&self) -> &[usize] {
        &self.bottom
    }

    pub fn pos_top(&self, letter: usize) -> usize {
        self.pos_top[letter]
    }

    pub fn pos_bottom(&self, letter: usize) -> usize {
        self.pos_bot[letter]
    }

    /// Last letter of the top row.
    pub fn alpha_t(&self) -> usize {
        self.top[self.d() - 1]
    }

    /// Last letter of the bottom row.
    pub fn alpha_b(&self) -> usize {
        self.bottom[self.d() - 1]
    }

    /// `π_b ∘ π_t⁻¹` in 1-based one-line notation; equal for relabelings of the same datum.
    pub fn canonical_word(&self) -> Vec<usize> {
        self.top.iter().map(|&a| self.pos_bot[a] + 1).collect()
    }

    /// Relabel so the top row reads `1..d`.
    pub fn canonical(&self) -> Permutation {
        Permutation::from_word(&self.canonical_word()).expect("irreducibility is relabeling invariant")
    }

    pub fn is_irreducible(&self) -> bool {
        reducible_prefix(&self.top, &self.bottom).is_none()
    }

    pub fn rauzy_move(&self, kind: MoveKind) -> Permutation {
        let d = self.d();
        let (at, ab) = (self.alpha_t(), self.alpha_b());
        let (mut top, mut bottom) = (self.top.clone(), self.bottom.clone());
        match kind {
            MoveKind::Top => {
                let p = self.pos_bot[at];
                bottom.pop();
                bottom.insert(p + 1, ab);
            }
            MoveKind::Bottom => {
                let p = self.pos_top[ab];
                top.pop();
                top.insert(p + 1, at);
            }
        }
        debug_assert_eq!(top.len(), d);
        Self::from_parts_unchecked(self.names.clone(), top, bottom)
    }

    /// Undo `rauzy_move(kind)`. Returns `None` when `self` is not the image of such a move.
    pub fn inverse_rauzy_move(&self, kind: MoveKind) -> Option<Permutation> {
        let d = self.d();
        let (mut top, mut bottom) = (self.top.clone(), self.bottom.clone());
        match kind {
            MoveKind::Top => {
                let p = self.pos_bot[self.alpha_t()];
                if p + 1 >= d {
                    return None;
                }
                let loser = bottom.remove(p + 1);
                bottom.push(loser);
            }
            MoveKind::Bottom => {
                let p = self.pos_top[self.alpha_b()];
                if p + 1 >= d {
                    return None;
                }
                let loser = top.remove(p + 1);
                top.push(loser);
            }
        }
        let prev = Self::from_parts_unchecked(self.names.clone(), top, bottom);
        prev.is_irreducible().then_some(prev)
    }

    /// Winner of a move of the given kind: `α_t` for top, `α_b` for bottom.
    pub fn winner(&self, kind: MoveKind) -> usize {
        match kind {
            MoveKind::Top => self.alpha_t(),
            MoveKind::Bottom => self.alpha_b(),
        }
    }

    /// Letters following the winner in the row that moves (bottom row for top
    /// moves). Repeated moves of one kind cycle this block, the last letter losing first.
    pub fn run_block(&self, kind: MoveKind) -> &[usize] {
        match kind {
            MoveKind::Top => &self.bottom[self.pos_bot[self.alpha_t()] + 1..],
            MoveKind::Bottom => &self.top[self.pos_top[self.alpha_b()] + 1..],
        }
    }

    /// `n` consecutive moves of one kind in closed form.
    pub fn apply_run(&self, kind: MoveKind, n: u64) -> Permutation {
        let (mut top, mut bottom) = (self.top.clone(), self.bottom.clone());
        let (row, start) = match kind {
            MoveKind::Top => (&mut bottom, self.pos_bot[self.alpha_t()] + 1),
            MoveKind::Bottom => (&mut top, self.pos_top[self.alpha_b()] + 1),
        };
        let m = row.len() - start;
        row[start..].rotate_right((n % m as u64) as usize);
        Self::from_parts_unchecked(self.names.clone(), top, bottom)
    }

    /// `π_b ∘ π_t⁻¹(d) = 1`: the last top letter comes first in the bottom row.
    pub fn last_top_is_first_bottom(&self) -> bool {
        self.pos_bot[self.alpha_t()] == 0
    }

    pub fn rows_string(&self) -> (String, String) {
        let row = |r: &[usize]| r.iter().map(|&a| self.names[a].as_str()).collect::<Vec<_>>().join(" ");
        (row(&self.top), row(&self.bottom))
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (t, b) = self.rows_string();
        write!(f, "{t}\n{b}")
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let (t, b) = self.rows_string();
        let mut st = serializer.serialize_struct("Permutation", 3)?;
        st.serialize_field("top", &t)?;
        st.serialize_field("bottom", &b)?;
        st.serialize_field("canonical", &self.canonical_word())?;
        st.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RauzyEdge {
    pub source: usize,
    pub kind: MoveKind,
    pub target: usize,
}

/// Reduced Rauzy class: vertices are canonical encodings, each with the
/// labeled representative through which it was first reached.
#[derive(Clone, Debug)]
pub struct RauzyDiagram {
    pub vertices: Vec<Permutation>,
    pub edges: Vec<RauzyEdge>,
    index: HashMap<Vec<usize>, usize>,
}

pub fn rauzy_class(pi: &Permutation) -> RauzyDiagram {
    let mut vertices = vec![pi.clone()];
    let mut index = HashMap::new();
    index.insert(pi.canonical_word(), 0usize);
    let mut queue = VecDeque::from([0usize]);
    let mut out: Vec<[usize; 2]> = vec![[usize::MAX; 2]];
    while let Some(v) = queue.pop_front() {
        for (slot, kind) in [MoveKind::Top, MoveKind::Bottom].into_iter().enumerate() {
            let next = vertices[v].rauzy_move(kind);
            let key = next.canonical_word();
            let target = match index.get(&key) {
                Some(&t) => t,
                None => {
                    let t = vertices.len();
                    index.insert(key, t);
                    vertices.push(next);
                    out.push([usize::MAX; 2]);
                    queue.push_back(t);
                    t
                }
            };
            out[v][slot] = target;
        }
    }
    let edges = out
        .iter()
        .enumerate()
        .flat_map(|(s, t)| {
            [
                RauzyEdge { source: s, kind: MoveKind::Top, target: t[0] },
                RauzyEdge { source: s, kind: MoveKind::Bottom, target: t[1] },
            ]
        })
        .collect();
    RauzyDiagram { vertices, edges, index }
}

/// Every reduced Rauzy class of irreducible permutations on `d` letters,
/// ordered by the smallest canonical word they contain.
pub fn irreducible_classes(d: usize) -> Vec<RauzyDiagram> {
    let mut words: Vec<Vec<usize>> = Vec::new();
    let mut word: Vec<usize> = (1..=d).collect();
    loop {
        words.push(word.clone());
        // next lexicographic permutation
        let Some(i) = (1..d).rev().find(|&i| word[i - 1] < word[i]) else { break };
        let j = (i..d).rev().find(|&j| word[j] > word[i - 1]).unwrap();
        word.swap(i - 1, j);
        word[i..].reverse();
    }
    let mut classes: Vec<RauzyDiagram> = Vec::new();
    for w in words {
        let Ok(pi) = Permutation::from_word(&w) else { continue };
        if classes.iter().any(|c| c.vertex_of(&pi).is_some()) {
            continue;
        }
        classes.push(rauzy_class(&pi));
    }
    classes
}

impl RauzyDiagram {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_of(&self, pi: &Permutation) -> Option<usize> {
        self.index.get(&pi.canonical_word()).copied()
    }

    /// Edge leaving `v` with the given label.
    pub fn edge(&self, v: usize, kind: MoveKind) -> &RauzyEdge {
        let slot = match kind {
            MoveKind::Top => 0,
            MoveKind::Bottom => 1,
        };
        &self.edges[2 * v + slot]
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            seen[0] = true;
            let mut stack = vec![0usize];
            while let Some(v) = stack.pop() {
                for e in &self.edges {
                    let (a, b) = if forward { (e.source, e.target) } else { (e.target, e.source) };
                    if a == v && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        n > 0 && reach(true) && reach(false)
    }

    /// One `source label target` line per edge.
    pub fn edge_list(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            s.push_str(&format!("{} {} {}\n", e.source, e.kind, e.target));
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let vertices: Vec<serde_json::Value> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (t, b) = p.rows_string();
                serde_json::json!({ "index": i, "canonical": p.canonical_word(), "top": t, "bottom": b })
            })
            .collect();
        serde_json::json!({ "vertices": vertices, "edges": self.edges })
    }
}

/// `Ω_{αβ}`: +1 if β precedes α at the bottom and follows it at the top, -1 in the mirrored case.
pub fn omega(pi: &Permutation) -> IntMatrix {
    let d = pi.d();
    let mut m = IntMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let below = pi.pos_bottom(b) < pi.pos_bottom(a);
            let above = pi.pos_top(b) > pi.pos_top(a);
            let v = match (below, above) {
                (true, true) => 1,
                (false, false) if a != b => -1,
                _ => 0,
            };
            m[(a, b)] = Integer::from(v);
        }
    }
    m
}

#[derive(Clone, Debug, Serialize)]
pub struct SymplecticData {
    pub omega: IntMatrix,
    pub kernel_dim: usize,
    pub genus: usize,
    pub num_singularities: usize,
    /// `d × 2g`, columns a Z-basis of the image of Ω intersected with `Z^d`.
    pub h_lattice: IntMatrix,
    /// `d × (κ-1)`, columns a Z-basis of the kernel of Ω.
    pub kernel_lattice: IntMatrix,
}

pub fn genus_and_singularities(pi: &Permutation) -> Result<SymplecticData> {
    let d = pi.d();
    let om = omega(pi);
    let kernel = om.integer_kernel();
    let kernel_dim = kernel.len();
    if !(d + 1 - (kernel_dim + 1)).is_multiple_of(2) {
        return Err(Error::InconsistentParity { d, kernel_dim });
    }
    let kappa = kernel_dim + 1;
    let genus = (d + 1 - kappa) / 2;
    let kernel_lattice = IntMatrix::from_columns(d, &kernel);
    // Ω is antisymmetric, so its rational image is the orthogonal complement of its kernel.
    let h_cols = if kernel_dim == 0 {
        (0..d)
            .map(|i| (0..d).map(|j| Integer::from((i == j) as i32)).collect())
            .collect()
    } else {
        kernel_lattice.transpose().integer_kernel()
    };
    let h_lattice = IntMatrix::from_columns(d, &h_cols);
    Ok(SymplecticData { omega: om, kernel_dim, genus, num_singularities: kappa, h_lattice, kernel_lattice })
}

/// Zipping-cone membership: every proper top-order prefix sum of τ is positive and
/// every proper bottom-order prefix sum is negative.
pub fn in_zipping_cone(pi: &Permutation, tau: &[f64]) -> bool {
    let d = pi.d();
    assert_eq!(tau.len(), d);
    let prefix_ok = |order: &[usize], sign: f64| {
        let mut s = 0.0;
        order[..d - 1].iter().all(|&a| {
            s += tau[a];
            s * sign > 0.0
        })
    };
    prefix_ok(pi.top(), 1.0) && prefix_ok(pi.bottom(), -1.0)
}

/// Heights `h = -Ω τ` of the zippered rectangles with suspension data τ.
pub fn zipping_heights(pi: &Permutation, tau: &[f64]) -> Vec<f64> {
    let om = omega(pi).to_f64_rows();
    om.iter().map(|row| -row.iter().zip(tau).map(|(o, t)| o * t).sum::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn class_enumeration_covers_all_irreducible() {
        // Irreducible permutations of 2..=5 letters: 1, 3, 13, 71.
        for (d, n) in [(2, 1), (3, 3), (4, 13), (5, 71)] {
            let total: usize = super::irreducible_classes(d).iter().map(|c| c.len()).sum();
            assert_eq!(total, n, "d={d}");
        }
    }

    use super::*;
    use crate::linalg::IntegerExt;

    fn perm(s: &str) -> Permutation {
        Permutation::parse(s).unwrap()
    }

    #[test]
    fn validation() {
        assert_eq!(perm("A B / B A").d(), 2);
        assert!(Permutation::parse("1 2 3 4 / 4 3 2 1").is_ok());
        assert_eq!(Permutation::parse("1 2 / 1 2").unwrap_err(), Error::Reducible { k: 1 });
        assert!(matches!(Permutation::parse("A B / A C"), Err(Error::NotABijection(_))));
        assert!(matches!(Permutation::parse("A B C / C A A"), Err(Error::NotABijection(_))));
        assert_eq!(Permutation::parse("1 2 3 / 2 1 3").unwrap_err(), Error::Reducible { k: 2 });
    }

    #[test]
    fn parse_compact_and_multiline() {
        let a = perm("ABCD/DCBA");
        let b = perm("A B C D\nD C B A");
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "A B C D\nD C B A");
    }

    #[test]
    fn top_move_on_rotation_is_trivial() {
        let p = perm("A B / B A");
        assert_eq!(p.rauzy_move(MoveKind::Top), p);
        assert_eq!(p.rauzy_move(MoveKind::Bottom), p);
    }

    #[test]
    fn bottom_move_on_reversal() {
        let p = perm("1 2 3 4 / 4 3 2 1");
        let q = p.rauzy_move(MoveKind::Bottom);
        assert_eq!(q.rows_string(), ("1 4 2 3".to_string(), "4 3 2 1".to_string()));
        assert_eq!(q.canonical_word(), vec![4, 1, 3, 2]);
    }

    /// Re-derive the move from the case formulas on positions rather than by list surgery.
    fn move_by_cases(p: &Permutation, kind: MoveKind) -> (Vec<usize>, Vec<usize>) {
        let d = p.d();
        let (at, ab) = (p.alpha_t(), p.alpha_b());
        let mut pt: Vec<usize> = (0..d).map(|a| p.pos_top(a)).collect();
        let mut pb: Vec<usize> = (0..d).map(|a| p.pos_bottom(a)).collect();
        match kind {
            MoveKind::Top => {
                let k = p.pos_bottom(at);
                for a in 0..d {
                    let x = p.pos_bottom(a);
                    pb[a] = if x <= k { x } else if a == ab { k + 1 } else { x + 1 };
                }
            }
            MoveKind::Bottom => {
                let k = p.pos_top(ab);
                for a in 0..d {
                    let x = p.pos_top(a);
                    pt[a] = if x <= k { x } else if a == at { k + 1 } else { x + 1 };
                }
            }
        }
        (pt, pb)
    }

    #[test]
    fn moves_agree_with_case_formulas() {
        for w in [vec![4, 3, 2, 1], vec![5, 4, 3, 2, 1], vec![3, 1, 4, 2], vec![4, 1, 3, 2]] {
            let p = Permutation::from_word(&w).unwrap();
            for kind in [MoveKind::Top, MoveKind::Bottom] {
                let q = p.rauzy_move(kind);
                let (pt, pb) = move_by_cases(&p, kind);
                for a in 0..p.d() {
                    assert_eq!(q.pos_top(a), pt[a]);
                    assert_eq!(q.pos_bottom(a), pb[a]);
                }
            }
        }
    }

    #[test]
    fn moves_are_invertible() {
        let p = Permutation::from_word(&[5, 3, 1, 4, 2]).unwrap();
        for kind in [MoveKind::Top, MoveKind::Bottom] {
            assert_eq!(p.rauzy_move(kind).inverse_rauzy_move(kind).unwrap(), p);
        }
    }

    #[test]
    fn run_matches_repeated_moves() {
        let p = Permutation::from_word(&[5, 3, 1, 4, 2]).unwrap();
        for kind in [MoveKind::Top, MoveKind::Bottom] {
            let mut q = p.clone();
            for n in 0..12u64 {
                assert_eq!(p.apply_run(kind, n), q);
                q = q.rauzy_move(kind);
            }
        }
    }

    #[test]
    fn class_sizes() {
        let c2 = rauzy_class(&perm("A B / B A"));
        assert_eq!(c2.len(), 1);
        assert_eq!(c2.edges.len(), 2);
        assert!(c2.edges.iter().all(|e| e.target == 0));
        let c4 = rauzy_class(&Permutation::reversal(4).unwrap());
        assert_eq!(c4.len(), 7);
        assert!(c4.is_strongly_connected());
        assert_eq!(rauzy_class(&Permutation::reversal(3).unwrap()).len(), 3);
        assert_eq!(rauzy_class(&Permutation::reversal(5).unwrap()).len(), 15);
    }

    #[test]
    fn omega_of_rotation() {
        let om = omega(&perm("A B / B A"));
        assert_eq!(om, IntMatrix::from_rows(&[vec![0, 1], vec![-1, 0]]));
        assert_eq!(omega(&Permutation::reversal(4).unwrap()).rank(), 4);
    }

    #[test]
    fn genus_examples() {
        let s = genus_and_singularities(&perm("A B / B A")).unwrap();
        assert_eq!((s.genus, s.num_singularities), (1, 1));
        let s = genus_and_singularities(&Permutation::reversal(4).unwrap()).unwrap();
        assert_eq!((s.genus, s.num_singularities), (2, 1));
        let s = genus_and_singularities(&Permutation::reversal(5).unwrap()).unwrap();
        assert_eq!((s.genus, s.num_singularities, s.kernel_dim), (2, 2, 1));
        assert_eq!(s.h_lattice.cols(), 4);
        // Columns lie in the image of Ω: orthogonal to the kernel.
        for j in 0..4 {
            let col = s.h_lattice.column(j);
            let dot = s.kernel_lattice.transpose().mul_vec(&col);
            assert!(dot.iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn zipping_cone_on_rotation() {
        let p = perm("A B / B A");
        assert!(in_zipping_cone(&p, &[1.0, -0.5]));
        assert!(!in_zipping_cone(&p, &[-1.0, -0.5]));
        let h = zipping_heights(&p, &[1.0, -0.5]);
        assert!(h.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn edge_list_format() {
        let c = rauzy_class(&perm("A B / B A"));
        assert_eq!(c.edge_list(), "0 top 0\n0 bottom 0\n");
        let j = c.to_json();
        assert_eq!(j["vertices"][0]["canonical"], serde_json::json!([2, 1]));
    }
}
