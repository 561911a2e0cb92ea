//! Exact linear algebra: fraction-free echelon forms, integer ranks, Smith normal form
//! and a rational solver for coordinates relative to an independent family.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::exact::make_primitive;

/// Row echelon basis of a subspace of `Q^n`, stored as primitive integer rows sorted by
/// pivot column. Each row is zero before its pivot.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntEchelon {
    n: usize,
    rows: Vec<(usize, Vec<BigInt>)>,
}

impl IntEchelon {
    pub fn new(n: usize) -> IntEchelon {
        IntEchelon { n, rows: Vec::new() }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = &Vec<BigInt>> {
        self.rows.iter().map(|(_, r)| r)
    }

    /// Remainder of `v` after elimination against the basis; zero iff `v` is in the span.
    pub fn reduce(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.n, "vector length does not match ambient dimension");
        let mut v = v.to_vec();
        for (p, row) in &self.rows {
            if v[*p].is_zero() {
                continue;
            }
            let a = &row[*p];
            let b = v[*p].clone();
            let g = a.gcd(&b);
            let fa = a / &g;
            let fb = &b / &g;
            for (x, r) in v.iter_mut().zip(row) {
                *x = &*x * &fa - r * &fb;
            }
            v = make_primitive(v);
        }
        v
    }

    pub fn contains(&self, v: &[BigInt]) -> bool {
        self.reduce(v).iter().all(Zero::is_zero)
    }

    /// Adds `v` to the span. Returns the new primitive row if `v` was independent.
    pub fn insert(&mut self, v: &[BigInt]) -> Option<Vec<BigInt>> {
        let r = self.reduce(v);
        let p = r.iter().position(|x| !x.is_zero())?;
        let at = self.rows.partition_point(|(q, _)| *q < p);
        self.rows.insert(at, (p, r.clone()));
        Some(r)
    }
}

/// Rank over `Q` of an integer matrix given by rows.
pub fn integer_rank(rows: &[Vec<BigInt>]) -> usize {
    let Some(n) = rows.first().map(Vec::len) else { return 0 };
    let mut e = IntEchelon::new(n);
    for r in rows {
        e.insert(r);
    }
    e.dim()
}

/// Invariant factors `d_1 | d_2 | ...` of an integer matrix (nonzero ones only).
pub fn smith_invariants(rows: &[Vec<BigInt>]) -> Vec<BigInt> {
    let m = rows.len();
    if m == 0 {
        return Vec::new();
    }
    let n = rows[0].len();
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let mut out = Vec::new();
    let mut t = 0;
    while t < m.min(n) {
        // Pick the smallest nonzero entry in the trailing block as pivot.
        let mut best: Option<(usize, usize)> = None;
        for i in t..m {
            for j in t..n {
                if !a[i][j].is_zero() && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut done = true;
            for i in t + 1..m {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = a[i][t].div_floor(&a[t][t]);
                for j in t..n {
                    let s = &q * &a[t][j];
                    a[i][j] -= s;
                }
                if !a[i][t].is_zero() {
                    done = false;
                    if a[i][t].abs() < a[t][t].abs() {
                        a.swap(t, i);
                    }
                }
            }
            for j in t + 1..n {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = a[t][j].div_floor(&a[t][t]);
                for row in a.iter_mut().skip(t) {
                    let s = &q * &row[t];
                    row[j] -= s;
                }
                if !a[t][j].is_zero() {
                    done = false;
                    if a[t][j].abs() < a[t][t].abs() {
                        for row in a.iter_mut() {
                            row.swap(t, j);
                        }
                    }
                }
            }
            if done {
                // Divisibility: fold any entry not divisible by the pivot into row t.
                let mut fix = None;
                'outer: for i in t + 1..m {
                    for j in t + 1..n {
                        if !(&a[i][j] % &a[t][t]).is_zero() {
                            fix = Some(i);
                            break 'outer;
                        }
                    }
                }
                match fix {
                    Some(i) => {
                        for j in t..n {
                            let s = a[i][j].clone();
                            a[t][j] += s;
                        }
                    }
                    None => break,
                }
            }
        }
        out.push(a[t][t].abs());
        t += 1;
    }
    out
}

/// Solves `target = Σ x_i basis_i` over `Q` for a fixed linearly independent family.
#[derive(Clone, Debug)]
pub struct RationalSolver {
    basis: Vec<Vec<BigRational>>,
    pivots: Vec<usize>,
    inverse: Vec<Vec<BigRational>>,
}

impl RationalSolver {
    /// Returns `None` if the family is dependent.
    pub fn new(basis: Vec<Vec<BigRational>>) -> Option<RationalSolver> {
        let r = basis.len();
        if r == 0 {
            return Some(RationalSolver { basis, pivots: Vec::new(), inverse: Vec::new() });
        }
        let n = basis[0].len();
        // Column echelon on the transpose to find r independent coordinates.
        let mut work: Vec<Vec<BigRational>> = basis.clone();
        let mut pivots = Vec::with_capacity(r);
        let mut row = 0;
        for col in 0..n {
            if row == r {
                break;
            }
            let Some(p) = (row..r).find(|&i| !work[i][col].is_zero()) else { continue };
            work.swap(row, p);
            let pv = work[row][col].clone();
            for i in 0..r {
                if i != row && !work[i][col].is_zero() {
                    let f = &work[i][col] / &pv;
                    for j in 0..n {
                        let s = &f * &work[row][j];
                        work[i][j] -= s;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        if pivots.len() < r {
            return None;
        }
        // B[i][k] = basis_i[pivot_k]; solve x B = t[pivots] via inverse of B.
        let b: Vec<Vec<BigRational>> = basis
            .iter()
            .map(|v| pivots.iter().map(|&p| v[p].clone()).collect())
            .collect();
        let inverse = invert_square(&b)?;
        Some(RationalSolver { basis, pivots, inverse })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Exact coefficients, or `None` if `target` is outside the span.
    pub fn solve(&self, target: &[BigRational]) -> Option<Vec<BigRational>> {
        let r = self.basis.len();
        let t: Vec<BigRational> = self.pivots.iter().map(|&p| target[p].clone()).collect();
        let mut x = vec![BigRational::zero(); r];
        for (i, xi) in x.iter_mut().enumerate() {
            for (k, tk) in t.iter().enumerate() {
                if !tk.is_zero() {
                    *xi += tk * &self.inverse[k][i];
                }
            }
        }
        for (j, tj) in target.iter().enumerate() {
            let mut s = BigRational::zero();
            for (i, xi) in x.iter().enumerate() {
                if !xi.is_zero() {
                    s += xi * &self.basis[i][j];
                }
            }
            if s != *tj {
                return None;
            }
        }
        Some(x)
    }
}

fn invert_square(m: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&i| !a[i][col].is_zero())?;
        a.swap(col, p);
        let pv = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &pv;
        }
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..2 * n {
                    let s = &f * &a[col][j];
                    a[i][j] -= s;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}
