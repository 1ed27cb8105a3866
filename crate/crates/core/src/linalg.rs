//! Dense matrices over arbitrary-precision integers.
//!
//! Rank and kernels are computed with unimodular column operations, so the
//! kernel basis returned by [`IntMatrix::integer_kernel`] spans a saturated
//! sublattice of `Z^n`.

use std::fmt;

use rug::{Assign, Integer};
use serde::ser::{Serialize, SerializeSeq, Serializer};

pub trait IntegerExt {
    fn is_zero(&self) -> bool;
}

impl IntegerExt for Integer {
    fn is_zero(&self) -> bool {
        self.cmp0() == std::cmp::Ordering::Equal
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Integer>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![Integer::new(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Integer::from(1);
        }
        m
    }

    /// `I + E_{ij}`.
    pub fn elementary(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::identity(n);
        m[(i, j)] += 1;
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = Integer::from(*v);
            }
        }
        m
    }

    pub fn from_columns(n: usize, cols: &[Vec<Integer>]) -> Self {
        let mut m = Self::zeros(n, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m[(i, j)].assign(v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Integer] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Integer> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)].assign(&self[(i, j)]);
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        let mut tmp = Integer::new();
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    tmp.assign(a * b);
                    out[(i, j)] += &tmp;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Integer]) -> Vec<Integer> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = Integer::new();
                for (a, x) in self.row(i).iter().zip(v) {
                    acc += a * x;
                }
                acc
            })
            .collect()
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &[Integer]) -> Vec<Integer> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![Integer::new(); self.cols];
        for (i, x) in v.iter().enumerate() {
            for (j, a) in self.row(i).iter().enumerate() {
                out[j] += x * a;
            }
        }
        out
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let s = Integer::from(&self[(i, j)] + &self[(j, i)]);
                    s.is_zero()
                })
            })
    }

    pub fn all_nonnegative(&self) -> bool {
        self.data.iter().all(|x| x.cmp0() != std::cmp::Ordering::Less)
    }

    pub fn all_positive(&self) -> bool {
        self.data.iter().all(|x| x.cmp0() == std::cmp::Ordering::Greater)
    }

    pub fn max_abs_entry(&self) -> Integer {
        self.data.iter().map(|x| x.clone().abs()).max().unwrap_or_default()
    }

    /// Sum of absolute values of all entries.
    pub fn norm_l1(&self) -> Integer {
        self.data.iter().fold(Integer::new(), |acc, x| acc + x.clone().abs())
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.to_f64()).collect()).collect()
    }

    /// Entries that fit in `i64`, row-major; `None` if any overflow.
    pub fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.to_i64()).collect()).collect()
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> Integer {
        assert!(self.is_square());
        let n = self.rows;
        if n == 0 {
            return Integer::from(1);
        }
        let mut a = self.clone();
        let mut sign = 1i32;
        let mut prev = Integer::from(1);
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                let Some(swap) = (k + 1..n).find(|&r| !a[(r, k)].is_zero()) else {
                    return Integer::new();
                };
                a.swap_rows(k, swap);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = Integer::from(&a[(i, j)] * &a[(k, k)]) - Integer::from(&a[(i, k)] * &a[(k, j)]);
                    a[(i, j)] = v.div_exact(&prev);
                }
            }
            prev.assign(&a[(k, k)]);
        }
        let d = a[(n - 1, n - 1)].clone();
        if sign < 0 {
            -d
        } else {
            d
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Column echelon reduction by unimodular column operations.
    /// Returns `(rank, U)` where the columns `rank..` of `U` span the integer kernel.
    fn column_reduce(&self) -> (usize, IntMatrix) {
        let mut a = self.clone();
        let n = self.cols;
        let mut u = IntMatrix::identity(n);
        let mut pivot = 0usize;
        for r in 0..self.rows {
            if pivot == n {
                break;
            }
            for j in pivot + 1..n {
                if a[(r, j)].is_zero() {
                    continue;
                }
                let ap = a[(r, pivot)].clone();
                let aj = a[(r, j)].clone();
                let (g, s, t) = ap.clone().gcd_cofactors(aj.clone(), Integer::new());
                let p_coef = -Integer::from(aj.div_exact_ref(&g));
                let j_coef = Integer::from(ap.div_exact_ref(&g));
                // [col_p, col_j] <- [col_p, col_j] * [[s, p_coef], [t, j_coef]]
                combine_columns(&mut a, pivot, j, &s, &t, &p_coef, &j_coef);
                combine_columns(&mut u, pivot, j, &s, &t, &p_coef, &j_coef);
            }
            if !a[(r, pivot)].is_zero() {
                pivot += 1;
            }
        }
        (pivot, u)
    }

    /// Rank by fraction-free (Bareiss) row elimination.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let (m, n) = (self.rows, self.cols);
        let mut prev = Integer::from(1);
        let mut r = 0usize;
        for c in 0..n {
            if r == m {
                break;
            }
            let Some(piv) = (r..m).find(|&i| !a[(i, c)].is_zero()) else { continue };
            a.swap_rows(r, piv);
            for i in r + 1..m {
                for j in c + 1..n {
                    let v = Integer::from(&a[(i, j)] * &a[(r, c)]) - Integer::from(&a[(i, c)] * &a[(r, j)]);
                    a[(i, j)] = v.div_exact(&prev);
                }
                a[(i, c)] = Integer::new();
            }
            prev.assign(&a[(r, c)]);
            r += 1;
        }
        r
    }

    /// Z-basis of `{x in Z^cols : self * x = 0}`.
    pub fn integer_kernel(&self) -> Vec<Vec<Integer>> {
        let (rank, u) = self.column_reduce();
        (rank..self.cols).map(|j| u.column(j)).collect()
    }
}

fn combine_columns(
    m: &mut IntMatrix,
    p: usize,
    j: usize,
    s: &Integer,
    t: &Integer,
    pc: &Integer,
    jc: &Integer,
) {
    for r in 0..m.rows {
        let xp = m[(r, p)].clone();
        let xj = m[(r, j)].clone();
        m[(r, p)] = Integer::from(&xp * s) + Integer::from(&xj * t);
        m[(r, j)] = Integer::from(&xp * pc) + Integer::from(&xj * jc);
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = Integer;
    fn index(&self, (i, j): (usize, usize)) -> &Integer {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Integer {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Row-major decimal strings, so entries of any size survive JSON.
impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}
