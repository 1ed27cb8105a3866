//! Square translation surfaces built from an IET whose last top letter `α_t`
//! is also the first bottom letter.
//!
//! The unit square carries the other `d - 1` intervals on its top side, their
//! images (shifted left by `λ_{α_t}`) on its bottom side, and its left and
//! right sides are glued by translation; `I_{α_t}` is the strip crossing the
//! vertical sides. Cone angles are read off from the vertex classes of this
//! `2d`-gon: `π` at a breakpoint inside a side, `π/2` at a corner.

use serde::Serialize;

use crate::combinatorics::{genus_and_singularities, Permutation};
use crate::error::{Error, Result};
use crate::iet::IetMap;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SingularityProfile {
    pub genus: usize,
    /// One order per vertex class, largest first; zeros are marked points.
    pub orders: Vec<usize>,
    pub true_orders: Vec<usize>,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let n = self.0[y];
            self.0[y] = r;
            y = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a] = b;
        }
    }
}

/// Profile of the square surface of `T`; only the permutation matters.
pub fn surface_profile(t: &IetMap) -> Result<SingularityProfile> {
    square_profile(t.perm())
}

pub fn square_profile(pi: &Permutation) -> Result<SingularityProfile> {
    if !pi.last_top_is_first_bottom() {
        return Err(Error::BadPermutationShape);
    }
    let d = pi.d();
    let at = pi.alpha_t();
    // Top vertices 0..d, bottom vertices d..2d, both left to right.
    let top = |i: usize| i;
    let bot = |i: usize| d + i;
    let mut dsu = Dsu((0..2 * d).collect());
    for a in 0..d {
        if a == at {
            continue;
        }
        let i = pi.pos_top(a);
        let k = pi.pos_bottom(a);
        if i + 1 >= d || k == 0 {
            return Err(Error::NonMatchingBreakpoints(format!("letter {} is misplaced", pi.name(a))));
        }
        dsu.union(top(i), bot(k - 1));
        dsu.union(top(i + 1), bot(k));
    }
    dsu.union(top(0), top(d - 1));
    dsu.union(bot(0), bot(d - 1));
    // Angles in units of π/2.
    let mut angle = vec![0usize; 2 * d];
    for v in 0..2 * d {
        let corner = v == top(0) || v == top(d - 1) || v == bot(0) || v == bot(d - 1);
        let r = dsu.find(v);
        angle[r] += if corner { 1 } else { 2 };
    }
    let mut orders = Vec::new();
    for v in 0..2 * d {
        if dsu.find(v) == v {
            if !angle[v].is_multiple_of(4) {
                return Err(Error::NonMatchingBreakpoints(format!("cone angle {}π/2 is not a multiple of 2π", angle[v])));
            }
            orders.push(angle[v] / 4 - 1);
        }
    }
    orders.sort_unstable_by(|a, b| b.cmp(a));
    let total: usize = orders.iter().sum();
    if !total.is_multiple_of(2) {
        return Err(Error::NonMatchingBreakpoints("odd total order".into()));
    }
    let true_orders = orders.iter().copied().filter(|&m| m > 0).collect();
    Ok(SingularityProfile { genus: total / 2 + 1, orders, true_orders })
}

impl SingularityProfile {
    pub fn gauss_bonnet(&self) -> bool {
        self.true_orders.iter().sum::<usize>() + 2 == 2 * self.genus
    }
}

/// Genus of the square surface agrees with `(d + 1 - κ)/2` from the kernel of `Ω_π`.
pub fn genus_agrees_with_omega(pi: &Permutation) -> Result<bool> {
    let prof = square_profile(pi)?;
    Ok(prof.genus == genus_and_singularities(pi)?.genus)
}

/// `p(g - 1) + 1 ≤ g(X) ≤ p d / 2`.
pub fn genus_bound_holds(genus_x: usize, genus_y: usize, p: usize, d: usize) -> bool {
    p * (genus_y - 1) < genus_x && 2 * genus_x <= p * d
}

/// Each true singularity of order `m` on `Y` lifts to one point of order
/// `p(m+1) - 1` or to `p` points of order `m`; regular points of `Y` lift to
/// one point of order `p - 1` or to regular points.
pub fn orders_lift(x: &SingularityProfile, y: &SingularityProfile, p: usize) -> bool {
    fn go(ys: &[usize], xs: &mut Vec<usize>, p: usize) -> bool {
        let Some((&m, rest)) = ys.split_first() else {
            return xs.iter().all(|&o| o == p - 1);
        };
        let big = p * (m + 1) - 1;
        if let Some(i) = xs.iter().position(|&o| o == big) {
            xs.remove(i);
            if go(rest, xs, p) {
                return true;
            }
            xs.push(big);
            xs.sort_unstable_by(|a, b| b.cmp(a));
        }
        let count = xs.iter().filter(|&&o| o == m).count();
        if count >= p {
            let mut taken = 0;
            xs.retain(|&o| {
                if o == m && taken < p {
                    taken += 1;
                    false
                } else {
                    true
                }
            });
            if go(rest, xs, p) {
                return true;
            }
            xs.extend(std::iter::repeat_n(m, p));
            xs.sort_unstable_by(|a, b| b.cmp(a));
        }
        false
    }
    let mut xs = x.true_orders.clone();
    go(&y.true_orders, &mut xs, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::rauzy_class;
    use crate::numeric::Precision;

    #[test]
    fn rotation_is_a_flat_torus() {
        let pi = Permutation::parse("A B / B A").unwrap();
        let t = IetMap::from_f64(&pi, &[0.3, 0.7], Precision::default()).unwrap();
        let prof = surface_profile(&t).unwrap();
        assert_eq!(prof.genus, 1);
        assert!(prof.true_orders.is_empty());
        assert!(prof.gauss_bonnet());
    }

    #[test]
    fn reversal_profiles() {
        let p4 = square_profile(&Permutation::reversal(4).unwrap()).unwrap();
        assert_eq!((p4.genus, p4.true_orders.clone()), (2, vec![2]));
        let p5 = square_profile(&Permutation::reversal(5).unwrap()).unwrap();
        assert_eq!((p5.genus, p5.true_orders.clone()), (2, vec![1, 1]));
        let p3 = square_profile(&Permutation::reversal(3).unwrap()).unwrap();
        assert_eq!((p3.genus, p3.orders.clone()), (1, vec![0, 0]));
    }

    #[test]
    fn genus_matches_omega_on_small_classes() {
        for d in 2..=6 {
            for v in rauzy_class(&Permutation::reversal(d).unwrap()).vertices {
                if v.last_top_is_first_bottom() {
                    assert!(genus_agrees_with_omega(&v).unwrap(), "{v}");
                    let prof = square_profile(&v).unwrap();
                    let sd = genus_and_singularities(&v).unwrap();
                    assert_eq!(prof.orders.len(), sd.num_singularities, "{v}");
                }
            }
        }
    }

    #[test]
    fn shape_required() {
        let pi = Permutation::parse("A B C / B C A").unwrap();
        assert!(matches!(square_profile(&pi), Err(Error::BadPermutationShape)));
    }

    #[test]
    fn lifting_rules() {
        let y = SingularityProfile { genus: 2, orders: vec![2], true_orders: vec![2] };
        let branched = SingularityProfile { genus: 5, orders: vec![8], true_orders: vec![8] };
        let split = SingularityProfile { genus: 4, orders: vec![2, 2, 2], true_orders: vec![2, 2, 2] };
        let bad = SingularityProfile { genus: 4, orders: vec![6], true_orders: vec![6] };
        assert!(orders_lift(&branched, &y, 3));
        assert!(orders_lift(&split, &y, 3));
        assert!(!orders_lift(&bad, &y, 3));
        let extra = SingularityProfile { genus: 5, orders: vec![2, 2, 2, 2], true_orders: vec![2, 2, 2, 2] };
        assert!(orders_lift(&extra, &y, 3));
    }

    #[test]
    fn genus_bounds() {
        assert!(genus_bound_holds(1, 1, 3, 2));
        assert!(genus_bound_holds(3, 1, 3, 2));
        assert!(!genus_bound_holds(4, 1, 3, 2));
        assert!(!genus_bound_holds(3, 2, 3, 4));
        assert!(!genus_bound_holds(7, 2, 3, 4));
    }
}
