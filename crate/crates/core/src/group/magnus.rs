//! Free nilpotent groups `N(k, ℓ)` through the Magnus embedding.
//!
//! `s_i ↦ 1 + x_i` embeds `N(k, ℓ)` faithfully into the units of the free associative
//! algebra on `x_1..x_k` truncated above degree `ℓ`. Elements are stored as Hall
//! coordinates; products go through the algebra and are read back by stripping one
//! degree at a time, since the degree-`m` component of an element of `γ_m` is linear in
//! its level-`m` Hall exponents.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{AddAssign, Mul, Range};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::unitriangular::{binomial, StrictUpper, UniMatrix};
use crate::commutator::FormalCommutator;
use crate::error::{invalid, Error, Result};
use crate::lattice::RationalSolver;

/// Free associative algebra on `k` letters modulo words longer than `depth`.
/// Coefficients are indexed by words ordered by length, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeAlgebra {
    k: usize,
    depth: usize,
    offsets: Vec<usize>,
    pows: Vec<usize>,
}

impl FreeAlgebra {
    pub fn new(k: usize, depth: usize) -> FreeAlgebra {
        let mut pows = vec![1usize];
        for _ in 0..depth {
            pows.push(pows.last().unwrap() * k);
        }
        let mut offsets = vec![0usize];
        for m in 0..=depth {
            offsets.push(offsets[m] + pows[m]);
        }
        FreeAlgebra { k, depth, offsets, pows }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.depth + 1]
    }

    pub fn degree_range(&self, m: usize) -> Range<usize> {
        self.offsets[m]..self.offsets[m + 1]
    }

    pub fn degree_of(&self, idx: usize) -> usize {
        self.offsets.partition_point(|&o| o <= idx) - 1
    }

    pub fn word_index(&self, word: &[usize]) -> usize {
        let code = word.iter().fold(0, |acc, &i| acc * self.k + i);
        self.offsets[word.len()] + code
    }

    pub fn one<T: Zero + One + Clone>(&self) -> Vec<T> {
        let mut v = vec![T::zero(); self.dim()];
        v[0] = T::one();
        v
    }

    /// `1 + x_i`.
    pub fn generator(&self, i: usize) -> Vec<BigInt> {
        let mut v = self.one::<BigInt>();
        if self.depth >= 1 {
            v[self.offsets[1] + i] = BigInt::one();
        }
        v
    }

    pub fn mul<T>(&self, a: &[T], b: &[T]) -> Vec<T>
    where
        T: Zero + Clone + AddAssign,
        for<'x> &'x T: Mul<&'x T, Output = T>,
    {
        let mut out = vec![T::zero(); self.dim()];
        for ma in 0..=self.depth {
            for iu in self.degree_range(ma) {
                let au = &a[iu];
                if au.is_zero() {
                    continue;
                }
                let code_u = iu - self.offsets[ma];
                for mb in 0..=self.depth - ma {
                    let base = self.offsets[ma + mb] + code_u * self.pows[mb];
                    let boff = self.offsets[mb];
                    for code_v in 0..self.pows[mb] {
                        let bv = &b[boff + code_v];
                        if !bv.is_zero() {
                            out[base + code_v] += au * bv;
                        }
                    }
                }
            }
        }
        out
    }

    /// `(1 + X)^m = Σ_p C(m, p) X^p` for a unit with constant term 1.
    pub fn unit_pow(&self, a: &[BigInt], m: &BigInt) -> Vec<BigInt> {
        debug_assert!(a[0].is_one());
        let mut out = self.one::<BigInt>();
        if m.is_zero() {
            return out;
        }
        let mut x = a.to_vec();
        x[0] = BigInt::zero();
        let mut xp = x.clone();
        for p in 1..=self.depth {
            let c = binomial(m, p);
            if !c.is_zero() {
                for (o, v) in out.iter_mut().zip(&xp) {
                    if !v.is_zero() {
                        *o += &c * v;
                    }
                }
            }
            if p < self.depth {
                xp = self.mul(&xp, &x);
            }
        }
        out
    }

    pub fn unit_inverse(&self, a: &[BigInt]) -> Vec<BigInt> {
        self.unit_pow(a, &BigInt::from(-1))
    }

    /// `log(1 + X) = Σ_{p>=1} (-1)^{p+1} X^p / p`.
    pub fn log(&self, a: &[BigInt]) -> Vec<BigRational> {
        debug_assert!(a[0].is_one());
        let mut x: Vec<BigRational> = a.iter().map(|v| BigRational::from_integer(v.clone())).collect();
        x[0] = BigRational::zero();
        let mut out = vec![BigRational::zero(); self.dim()];
        let mut xp = x.clone();
        for p in 1..=self.depth {
            let c = BigRational::new(BigInt::from(if p % 2 == 1 { 1 } else { -1 }), BigInt::from(p));
            for (o, v) in out.iter_mut().zip(&xp) {
                if !v.is_zero() {
                    *o += &c * v;
                }
            }
            if p < self.depth {
                xp = self.mul(&xp, &x);
            }
        }
        out
    }

    /// Matrix of left multiplication by `a`, with basis words ordered longest first so
    /// that units map to upper unitriangular matrices.
    pub fn left_mult_matrix(&self, a: &[BigInt]) -> UniMatrix {
        let n = self.dim();
        let pos = |idx: usize| n - 1 - idx;
        let mut m = StrictUpper::<BigInt>::zero(n);
        for w in 0..n {
            let mut e = vec![BigInt::zero(); n];
            e[w] = BigInt::one();
            let col = self.mul(a, &e);
            for (u, v) in col.into_iter().enumerate() {
                if u != w && !v.is_zero() {
                    m.set(pos(u), pos(w), v);
                }
            }
        }
        UniMatrix::from_nilpotent(m)
    }
}

/// `M_k(m) = (1/m) Σ_{d | m} μ(d) k^{m/d}`, the number of basic commutators of length `m`.
pub fn witt_number(k: u64, m: u64) -> u64 {
    fn mobius(mut n: u64) -> i64 {
        let mut result = 1;
        let mut p = 2;
        while p * p <= n {
            if n.is_multiple_of(p) {
                n /= p;
                if n.is_multiple_of(p) {
                    return 0;
                }
                result = -result;
            }
            p += 1;
        }
        if n > 1 {
            result = -result;
        }
        result
    }
    let mut s: i128 = 0;
    for d in 1..=m {
        if m.is_multiple_of(d) {
            s += mobius(d) as i128 * (k as i128).pow((m / d) as u32);
        }
    }
    (s / m as i128) as u64
}

/// Basic commutators of length `1..=class` on `k` letters, in increasing order.
///
/// Length one: `s_1 < ... < s_k`. A bracket `[a, b]` of basic commutators is basic when
/// `a > b` and, if `a = [a1, a2]`, also `b >= a2`.
pub fn hall_basis(k: usize, class: usize) -> Vec<FormalCommutator> {
    let mut by_len: Vec<Vec<FormalCommutator>> = vec![Vec::new(); class + 1];
    if class == 0 {
        return Vec::new();
    }
    by_len[1] = (0..k).map(FormalCommutator::generator).collect();
    for m in 2..=class {
        let mut level = Vec::new();
        for la in 1..m {
            for a in &by_len[la] {
                for b in &by_len[m - la] {
                    if a <= b {
                        continue;
                    }
                    if let Some((_, a2)) = a.children() {
                        if b < a2 {
                            continue;
                        }
                    }
                    level.push(FormalCommutator::bracket(a, b));
                }
            }
        }
        level.sort();
        by_len[m] = level;
    }
    by_len.into_iter().flatten().collect()
}

type TableKey = (usize, bool, usize, bool);
type SparseNf = Arc<Vec<(usize, BigInt)>>;

/// Read-only data for `N(k, ℓ)`: Hall basis, Magnus images and level solvers.
pub struct FreeNilpotent {
    k: usize,
    class: usize,
    basis: Vec<FormalCommutator>,
    index: HashMap<FormalCommutator, usize>,
    level_start: Vec<usize>,
    algebra: FreeAlgebra,
    images: Vec<Vec<BigInt>>,
    solvers: Vec<RationalSolver>,
    table: Mutex<HashMap<TableKey, SparseNf>>,
}

impl fmt::Debug for FreeNilpotent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N({}, {})", self.k, self.class)
    }
}

const MAX_ALGEBRA_DIM: usize = 4096;

impl FreeNilpotent {
    /// Shared instance for `N(k, class)`, built on first use.
    pub fn get(k: usize, class: usize) -> Result<Arc<FreeNilpotent>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<FreeNilpotent>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(g) = cache.lock().unwrap().get(&(k, class)) {
            return Ok(g.clone());
        }
        let g = Arc::new(FreeNilpotent::build(k, class)?);
        Ok(cache.lock().unwrap().entry((k, class)).or_insert(g).clone())
    }

    fn build(k: usize, class: usize) -> Result<FreeNilpotent> {
        if k == 0 || class == 0 {
            return invalid("free nilpotent groups need k >= 1 and class >= 1");
        }
        let algebra = FreeAlgebra::new(k, class);
        if algebra.dim() > MAX_ALGEBRA_DIM {
            return Err(Error::ResourceLimit(format!(
                "N({k}, {class}) needs a truncated algebra of dimension {}",
                algebra.dim()
            )));
        }
        let basis = hall_basis(k, class);
        let index = basis.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        let mut level_start = vec![0usize; class + 2];
        for m in 1..=class + 1 {
            level_start[m] = basis.iter().filter(|c| c.len() < m).count();
        }
        let mut images: Vec<Vec<BigInt>> = Vec::with_capacity(basis.len());
        let mut memo: HashMap<FormalCommutator, Vec<BigInt>> = HashMap::new();
        for c in &basis {
            images.push(magnus_image(&algebra, c, &mut memo));
        }
        let mut solvers = Vec::with_capacity(class);
        for m in 1..=class {
            let range = algebra.degree_range(m);
            let rows: Vec<Vec<BigRational>> = (level_start[m]..level_start[m + 1])
                .map(|i| images[i][range.clone()].iter().map(|x| BigRational::from_integer(x.clone())).collect())
                .collect();
            let s = RationalSolver::new(rows)
                .ok_or_else(|| Error::InvalidArgument(format!("basic commutators of length {m} are dependent")))?;
            solvers.push(s);
        }
        Ok(FreeNilpotent {
            k,
            class,
            basis,
            index,
            level_start,
            algebra,
            images,
            solvers,
            table: Mutex::new(HashMap::new()),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn basis(&self) -> &[FormalCommutator] {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, c: &FormalCommutator) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Basis indices of length `m`.
    pub fn level(&self, m: usize) -> Range<usize> {
        self.level_start[m]..self.level_start[m + 1]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        (1..=self.class).map(|m| self.level(m).len()).collect()
    }

    pub fn algebra(&self) -> &FreeAlgebra {
        &self.algebra
    }

    pub fn image_of_basis(&self, i: usize) -> &[BigInt] {
        &self.images[i]
    }

    /// Magnus image of `∏ c_i^{x_i}` in basis order.
    pub fn to_series(&self, exps: &[BigInt]) -> Vec<BigInt> {
        let mut acc = self.algebra.one::<BigInt>();
        for (i, x) in exps.iter().enumerate() {
            if !x.is_zero() {
                let f = self.algebra.unit_pow(&self.images[i], x);
                acc = self.algebra.mul(&acc, &f);
            }
        }
        acc
    }

    /// Hall coordinates of a unit known to lie in the image of `N(k, ℓ)`.
    pub fn strip(&self, series: &[BigInt]) -> Result<Vec<BigInt>> {
        let mut cur = series.to_vec();
        let mut x = vec![BigInt::zero(); self.basis.len()];
        for m in 1..=self.class {
            let range = self.algebra.degree_range(m);
            let target: Vec<BigRational> = cur[range].iter().map(|v| BigRational::from_integer(v.clone())).collect();
            if target.iter().all(Zero::is_zero) {
                continue;
            }
            let coeffs = self.solvers[m - 1]
                .solve(&target)
                .ok_or_else(|| Error::NotInSpan(format!("degree-{m} component is not a Lie element")))?;
            let mut factor = self.algebra.one::<BigInt>();
            for (off, q) in coeffs.into_iter().enumerate() {
                if !q.is_integer() {
                    return Err(Error::NotInSpan(format!("non-integral Hall coordinate {q}")));
                }
                let i = self.level_start[m] + off;
                let xi = q.to_integer();
                if !xi.is_zero() {
                    factor = self.algebra.mul(&factor, &self.algebra.unit_pow(&self.images[i], &xi));
                }
                x[i] = xi;
            }
            cur = self.algebra.mul(&self.algebra.unit_inverse(&factor), &cur);
        }
        if cur != self.algebra.one::<BigInt>() {
            return Err(Error::NotInSpan("series is not in the image of the group".into()));
        }
        Ok(x)
    }

    pub fn identity(self: &Arc<Self>) -> NormalForm {
        NormalForm { group: self.clone(), exponents: vec![BigInt::zero(); self.basis.len()] }
    }

    /// The normal form `c_i` (exponent one at basis index `i`).
    pub fn basis_element(self: &Arc<Self>, i: usize) -> NormalForm {
        let mut e = vec![BigInt::zero(); self.basis.len()];
        e[i] = BigInt::one();
        NormalForm { group: self.clone(), exponents: e }
    }

    pub fn normal_form(self: &Arc<Self>, exponents: Vec<BigInt>) -> Result<NormalForm> {
        if exponents.len() != self.basis.len() {
            return invalid(format!(
                "N({}, {}) has Hirsch length {}, got {} coordinates",
                self.k,
                self.class,
                self.basis.len(),
                exponents.len()
            ));
        }
        Ok(NormalForm { group: self.clone(), exponents })
    }

    /// Normal form of `[c_d^{ε}, c_c^{δ}]` as sparse `(index, exponent)` pairs, memoized.
    pub fn commutation_entry(self: &Arc<Self>, d: usize, d_neg: bool, c: usize, c_neg: bool) -> SparseNf {
        let key = (d, d_neg, c, c_neg);
        if let Some(v) = self.table.lock().unwrap().get(&key) {
            return v.clone();
        }
        let sign = |neg: bool| BigInt::from(if neg { -1 } else { 1 });
        let a = self.algebra.unit_pow(&self.images[d], &sign(d_neg));
        let b = self.algebra.unit_pow(&self.images[c], &sign(c_neg));
        let ai = self.algebra.unit_inverse(&a);
        let bi = self.algebra.unit_inverse(&b);
        let prod = self.algebra.mul(&self.algebra.mul(&ai, &bi), &self.algebra.mul(&a, &b));
        let x = self.strip(&prod).expect("commutator of group elements lies in the group");
        let sparse: Vec<(usize, BigInt)> = x.into_iter().enumerate().filter(|(_, v)| !v.is_zero()).collect();
        let v = Arc::new(sparse);
        self.table.lock().unwrap().insert(key, v.clone());
        v
    }

    /// Faithful unitriangular images of the canonical generators, of size `Σ_{m<=ℓ} k^m`.
    pub fn regular_representation(&self) -> Vec<UniMatrix> {
        (0..self.k)
            .map(|i| self.algebra.left_mult_matrix(&self.algebra.generator(i)))
            .collect()
    }
}

fn magnus_image(
    algebra: &FreeAlgebra,
    c: &FormalCommutator,
    memo: &mut HashMap<FormalCommutator, Vec<BigInt>>,
) -> Vec<BigInt> {
    if let Some(v) = memo.get(c) {
        return v.clone();
    }
    let v = match c.children() {
        None => {
            let l = c.as_leaf().unwrap();
            let g = algebra.generator(l.index);
            match l.sign {
                crate::commutator::Sign::Pos => g,
                crate::commutator::Sign::Neg => algebra.unit_inverse(&g),
            }
        }
        Some((a, b)) => {
            let fa = magnus_image(algebra, a, memo);
            let fb = magnus_image(algebra, b, memo);
            let l = algebra.mul(&algebra.unit_inverse(&fa), &algebra.unit_inverse(&fb));
            algebra.mul(&l, &algebra.mul(&fa, &fb))
        }
    };
    memo.insert(c.clone(), v.clone());
    v
}

/// An element of `N(k, ℓ)` in Hall coordinates: `∏ c_i^{x_i}` in basis order.
#[derive(Clone)]
pub struct NormalForm {
    group: Arc<FreeNilpotent>,
    pub exponents: Vec<BigInt>,
}

impl NormalForm {
    pub fn group(&self) -> &Arc<FreeNilpotent> {
        &self.group
    }

    pub fn same_group(&self, o: &NormalForm) -> bool {
        Arc::ptr_eq(&self.group, &o.group) || (self.group.k == o.group.k && self.group.class == o.group.class)
    }

    pub fn series(&self) -> Vec<BigInt> {
        self.group.to_series(&self.exponents)
    }

    pub fn is_identity(&self) -> bool {
        self.exponents.iter().all(Zero::is_zero)
    }

    fn from_series(&self, s: &[BigInt]) -> NormalForm {
        let exponents = self.group.strip(s).expect("products of group elements stay in the group");
        NormalForm { group: self.group.clone(), exponents }
    }

    /// Product through the Magnus embedding.
    pub fn multiply(&self, o: &NormalForm) -> Result<NormalForm> {
        if !self.same_group(o) {
            return Err(Error::BackendMismatch(format!("{:?} vs {:?}", self.group, o.group)));
        }
        let a = self.group.algebra();
        Ok(self.from_series(&a.mul(&self.series(), &o.series())))
    }

    pub fn inverse(&self) -> NormalForm {
        let a = self.group.algebra();
        self.from_series(&a.unit_inverse(&self.series()))
    }

    pub fn pow(&self, m: &BigInt) -> NormalForm {
        let a = self.group.algebra();
        self.from_series(&a.unit_pow(&self.series(), m))
    }
}

impl PartialEq for NormalForm {
    fn eq(&self, o: &Self) -> bool {
        self.same_group(o) && self.exponents == o.exponents
    }
}

impl Eq for NormalForm {}

impl Hash for NormalForm {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.group.k.hash(state);
        self.group.class.hash(state);
        self.exponents.hash(state);
    }
}

impl fmt::Debug for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}", self.group, self.exponents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witt_numbers() {
        assert_eq!((1..=3).map(|m| witt_number(2, m)).collect::<Vec<_>>(), vec![2, 1, 2]);
        assert_eq!((1..=5).map(|m| witt_number(2, m)).collect::<Vec<_>>(), vec![2, 1, 2, 3, 6]);
        assert_eq!((1..=4).map(|m| witt_number(3, m)).collect::<Vec<_>>(), vec![3, 3, 8, 18]);
    }

    #[test]
    fn hall_basis_counts_match_witt() {
        for (k, c) in [(2, 5), (3, 4), (4, 3)] {
            let b = hall_basis(k, c);
            for m in 1..=c {
                let n = b.iter().filter(|x| x.len() == m).count() as u64;
                assert_eq!(n, witt_number(k as u64, m as u64), "k={k} m={m}");
            }
            assert!(b.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn small_hall_bases() {
        let names = |k, c| hall_basis(k, c).iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(names(2, 2), ["s1", "s2", "[s2,s1]"]);
        assert_eq!(names(2, 3), ["s1", "s2", "[s2,s1]", "[[s2,s1],s1]", "[[s2,s1],s2]"]);
    }

    #[test]
    fn strip_recovers_exponents() {
        let g = FreeNilpotent::get(2, 3).unwrap();
        let x: Vec<BigInt> = [3, -2, 5, -7, 11].iter().map(|&v| BigInt::from(v)).collect();
        assert_eq!(g.strip(&g.to_series(&x)).unwrap(), x);
    }

    #[test]
    fn worked_product_in_class_two() {
        // s1^a s2^b s1^c has coordinates (a+c, b, bc).
        let g = FreeNilpotent::get(2, 2).unwrap();
        for (a, b, c) in [(1, 1, 1), (2, -3, 4), (-5, 7, -2), (0, 9, 3)] {
            let s1a = g.basis_element(0).pow(&BigInt::from(a));
            let s2b = g.basis_element(1).pow(&BigInt::from(b));
            let s1c = g.basis_element(0).pow(&BigInt::from(c));
            let p = s1a.multiply(&s2b).unwrap().multiply(&s1c).unwrap();
            let want: Vec<BigInt> = [a + c, b, b * c].iter().map(|&v| BigInt::from(v)).collect();
            assert_eq!(p.exponents, want);
        }
    }

    #[test]
    fn basic_bracket_is_its_own_normal_form() {
        let g = FreeNilpotent::get(2, 3).unwrap();
        // [s2, s1] is basic, so its normal form is the single basis element.
        let e = g.commutation_entry(1, false, 0, false);
        assert_eq!(*e, vec![(2, BigInt::one())]);
        let e = g.commutation_entry(2, false, 0, false);
        assert_eq!(*e, vec![(3, BigInt::one())]);
    }

    #[test]
    fn regular_representation_is_unitriangular_of_expected_size() {
        let g = FreeNilpotent::get(2, 2).unwrap();
        let r = g.regular_representation();
        assert_eq!(r[0].d(), 7);
        let g3 = FreeNilpotent::get(2, 3).unwrap();
        assert_eq!(g3.regular_representation()[1].d(), 15);
    }
}
