//! Upper unitriangular integer matrices and their rational logarithms.

use std::ops::{AddAssign, Mul, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{invalid, Result};

#[inline]
pub fn packed_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

/// A strictly upper triangular `d × d` matrix, stored row-major over the entries `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StrictUpper<T> {
    d: usize,
    data: Vec<T>,
}

/// Element of the Lie algebra of strictly upper triangular rational matrices.
pub type LieElement = StrictUpper<BigRational>;

impl<T> StrictUpper<T>
where
    T: Clone + Zero + AddAssign + SubAssign,
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    pub fn zero(d: usize) -> Self {
        StrictUpper { d, data: vec![T::zero(); d * d.saturating_sub(1) / 2] }
    }

    pub fn from_packed(d: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), d * d.saturating_sub(1) / 2);
        StrictUpper { d, data }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn packed(&self) -> &[T] {
        &self.data
    }

    pub fn into_packed(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[packed_index(self.d, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = packed_index(self.d, i, j);
        self.data[k] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&o.data) {
            *x += y.clone();
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&o.data) {
            *x -= y.clone();
        }
        out
    }

    pub fn scale(&self, s: &T) -> Self {
        StrictUpper { d: self.d, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let d = self.d;
        let mut out = Self::zero(d);
        for i in 0..d {
            for k in i + 1..d {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in k + 1..d {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        out.data[packed_index(d, i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Matrix commutator `AB - BA`.
    pub fn lie_bracket(&self, o: &Self) -> Self {
        self.mul(o).sub(&o.mul(self))
    }

    /// `N^1, ..., N^{d-1}`; higher powers vanish.
    pub fn powers(&self) -> Vec<Self> {
        let mut out = Vec::with_capacity(self.d.saturating_sub(1));
        if self.d < 2 {
            return out;
        }
        out.push(self.clone());
        for _ in 2..self.d {
            let next = out.last().unwrap().mul(self);
            out.push(next);
        }
        out
    }
}

impl StrictUpper<BigInt> {
    pub fn to_rational(&self) -> StrictUpper<BigRational> {
        StrictUpper {
            d: self.d,
            data: self.data.iter().map(|x| BigRational::from_integer(x.clone())).collect(),
        }
    }
}

/// Generalized binomial coefficient `C(m, p)` for any integer `m`.
pub fn binomial(m: &BigInt, p: usize) -> BigInt {
    let mut b = BigInt::one();
    for i in 0..p {
        b = b * (m - BigInt::from(i)) / BigInt::from(i + 1);
    }
    b
}

/// `I + N` with `N` strictly upper triangular and integral.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UniMatrix {
    n: StrictUpper<BigInt>,
}

impl UniMatrix {
    pub fn identity(d: usize) -> UniMatrix {
        UniMatrix { n: StrictUpper::zero(d) }
    }

    pub fn from_nilpotent(n: StrictUpper<BigInt>) -> UniMatrix {
        UniMatrix { n }
    }

    /// `I + v E_{ij}` (0-based, `i < j`).
    pub fn elementary(d: usize, i: usize, j: usize, v: BigInt) -> UniMatrix {
        let mut n = StrictUpper::zero(d);
        n.set(i, j, v);
        UniMatrix { n }
    }

    pub fn from_rows(rows: &[Vec<BigInt>]) -> Result<UniMatrix> {
        let d = rows.len();
        if d == 0 {
            return invalid("empty matrix");
        }
        let mut n = StrictUpper::zero(d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return invalid(format!("matrix row {i} has length {}, expected {d}", row.len()));
            }
            for (j, x) in row.iter().enumerate() {
                if i == j && !x.is_one() {
                    return invalid(format!("diagonal entry ({i},{j}) must be 1"));
                }
                if i > j && !x.is_zero() {
                    return invalid(format!("entry ({i},{j}) below the diagonal must be 0"));
                }
                if i < j {
                    n.set(i, j, x.clone());
                }
            }
        }
        Ok(UniMatrix { n })
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        let d = self.d();
        (0..d)
            .map(|i| (0..d).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    pub fn d(&self) -> usize {
        self.n.d()
    }

    pub fn entry(&self, i: usize, j: usize) -> BigInt {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.n.get(i, j).clone(),
            std::cmp::Ordering::Equal => BigInt::one(),
            std::cmp::Ordering::Greater => BigInt::zero(),
        }
    }

    pub fn nilpotent(&self) -> &StrictUpper<BigInt> {
        &self.n
    }

    pub fn is_identity(&self) -> bool {
        self.n.is_zero()
    }

    pub fn mul(&self, o: &UniMatrix) -> UniMatrix {
        UniMatrix { n: self.n.add(&o.n).add(&self.n.mul(&o.n)) }
    }

    /// `(I + N)^m = Σ_p C(m, p) N^p`, valid for negative `m` too.
    pub fn pow(&self, m: &BigInt) -> UniMatrix {
        let mut acc = StrictUpper::zero(self.d());
        for (p, np) in self.n.powers().iter().enumerate() {
            let c = binomial(m, p + 1);
            if !c.is_zero() {
                acc = acc.add(&np.scale(&c));
            }
        }
        UniMatrix { n: acc }
    }

    pub fn inverse(&self) -> UniMatrix {
        self.pow(&BigInt::from(-1))
    }

    /// `a^{-1} b^{-1} a b`.
    pub fn bracket(&self, o: &UniMatrix) -> UniMatrix {
        self.inverse().mul(&o.inverse()).mul(self).mul(o)
    }

    /// `log(I + N) = Σ_{p>=1} (-1)^{p+1} N^p / p`, a finite sum.
    pub fn log(&self) -> LieElement {
        let mut acc = StrictUpper::<BigRational>::zero(self.d());
        for (i, np) in self.n.powers().iter().enumerate() {
            let p = i as i64 + 1;
            let c = BigRational::new(BigInt::from(if p % 2 == 1 { 1 } else { -1 }), BigInt::from(p));
            acc = acc.add(&np.to_rational().scale(&c));
        }
        acc
    }
}

/// Nilpotent part of `exp(L) = Σ L^p / p!`.
pub fn exp_lie(l: &LieElement) -> StrictUpper<BigRational> {
    let mut acc = StrictUpper::<BigRational>::zero(l.d());
    let mut fact = BigInt::one();
    for (i, lp) in l.powers().iter().enumerate() {
        fact *= BigInt::from(i + 1);
        acc = acc.add(&lp.scale(&BigRational::new(BigInt::one(), fact.clone())));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
        let d = a.len();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).map(|k| &a[i][k] * &b[k][j]).fold(BigInt::zero(), |s, x| s + x))
                    .collect()
            })
            .collect()
    }

    fn arb_uni(d: usize) -> impl Strategy<Value = UniMatrix> {
        proptest::collection::vec(-5i64..6, d * (d - 1) / 2).prop_map(move |v| {
            UniMatrix::from_nilpotent(StrictUpper::from_packed(d, v.into_iter().map(BigInt::from).collect()))
        })
    }

    #[test]
    fn heisenberg_commutator() {
        let x = UniMatrix::elementary(3, 0, 1, BigInt::one());
        let y = UniMatrix::elementary(3, 1, 2, BigInt::one());
        let z = UniMatrix::elementary(3, 0, 2, BigInt::one());
        assert_eq!(x.bracket(&y), z);
        assert_eq!(z.pow(&BigInt::from(7)).entry(0, 2), BigInt::from(7));
    }

    #[test]
    fn rows_validation() {
        let b = |v: i64| BigInt::from(v);
        assert!(UniMatrix::from_rows(&[vec![b(1), b(2)], vec![b(0), b(1)]]).is_ok());
        assert!(UniMatrix::from_rows(&[vec![b(2), b(0)], vec![b(0), b(1)]]).is_err());
        assert!(UniMatrix::from_rows(&[vec![b(1), b(0)], vec![b(3), b(1)]]).is_err());
        assert!(UniMatrix::from_rows(&[vec![b(1), b(0)]]).is_err());
    }

    #[test]
    fn binomial_negative() {
        assert_eq!(binomial(&BigInt::from(-1), 3), BigInt::from(-1));
        assert_eq!(binomial(&BigInt::from(5), 2), BigInt::from(10));
        assert_eq!(binomial(&BigInt::from(-3), 2), BigInt::from(6));
    }

    proptest! {
        #[test]
        fn product_matches_dense(a in arb_uni(4), b in arb_uni(4)) {
            prop_assert_eq!(a.mul(&b).to_rows(), dense_mul(&a.to_rows(), &b.to_rows()));
        }

        #[test]
        fn power_matches_repeated_product(a in arb_uni(4), m in -6i64..7) {
            let mut want = UniMatrix::identity(4);
            let step = if m >= 0 { a.clone() } else { a.inverse() };
            for _ in 0..m.unsigned_abs() {
                want = want.mul(&step);
            }
            prop_assert_eq!(a.pow(&BigInt::from(m)), want);
            prop_assert!(a.mul(&a.inverse()).is_identity());
        }

        #[test]
        fn exp_inverts_log(a in arb_uni(5)) {
            prop_assert_eq!(exp_lie(&a.log()), a.nilpotent().to_rational());
        }
    }
}
