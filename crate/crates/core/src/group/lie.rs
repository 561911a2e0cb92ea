//! Rational Lie algebras used to measure subgroups through their logarithms.

use num_bigint::BigInt;
use num_traits::Zero;

use super::magnus::FreeAlgebra;
use super::unitriangular::StrictUpper;
use crate::lattice::IntEchelon;

/// Coordinates and bracket of the ambient Lie algebra of a backend.
#[derive(Clone, Debug)]
pub enum LieModel {
    /// `Q^d` with zero bracket.
    Abelian { dim: usize },
    /// Strictly upper triangular `d × d` matrices, packed.
    StrictUpper { d: usize },
    /// Truncated free associative algebra without its constant term.
    FreeAssoc { algebra: FreeAlgebra },
}

impl LieModel {
    pub fn dim(&self) -> usize {
        match self {
            LieModel::Abelian { dim } => *dim,
            LieModel::StrictUpper { d } => d * d.saturating_sub(1) / 2,
            LieModel::FreeAssoc { algebra } => algebra.dim() - 1,
        }
    }

    /// The bracket on integer coordinate vectors. Bilinear, so scaling is harmless.
    pub fn bracket(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        match self {
            LieModel::Abelian { dim } => vec![BigInt::zero(); *dim],
            LieModel::StrictUpper { d } => {
                let x = StrictUpper::from_packed(*d, a.to_vec());
                let y = StrictUpper::from_packed(*d, b.to_vec());
                x.lie_bracket(&y).into_packed()
            }
            LieModel::FreeAssoc { algebra } => {
                let lift = |v: &[BigInt]| {
                    let mut s = Vec::with_capacity(v.len() + 1);
                    s.push(BigInt::zero());
                    s.extend_from_slice(v);
                    s
                };
                let (x, y) = (lift(a), lift(b));
                let xy = algebra.mul(&x, &y);
                let yx = algebra.mul(&y, &x);
                xy.iter().zip(&yx).skip(1).map(|(p, q)| p - q).collect()
            }
        }
    }
}

/// Extends an already bracket-closed span by `new` vectors and closes it under the bracket.
pub fn extend_closure(model: &LieModel, span: &mut IntEchelon, new: impl IntoIterator<Item = Vec<BigInt>>) {
    let mut queue: Vec<Vec<BigInt>> = Vec::new();
    for v in new {
        if let Some(r) = span.insert(&v) {
            queue.push(r);
        }
    }
    if matches!(model, LieModel::Abelian { .. }) {
        return;
    }
    while let Some(u) = queue.pop() {
        let rows: Vec<Vec<BigInt>> = span.rows().cloned().collect();
        for v in rows {
            let b = model.bracket(&u, &v);
            if b.iter().all(Zero::is_zero) {
                continue;
            }
            if let Some(r) = span.insert(&b) {
                queue.push(r);
            }
        }
    }
}

/// Dimension of the Lie subalgebra generated by `vectors`.
pub fn closure_dim(model: &LieModel, vectors: impl IntoIterator<Item = Vec<BigInt>>) -> usize {
    let mut span = IntEchelon::new(model.dim());
    extend_closure(model, &mut span, vectors);
    span.dim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_upper_closure() {
        // E12 and E23 generate the Heisenberg algebra.
        let m = LieModel::StrictUpper { d: 3 };
        let e12 = vec![BigInt::from(1), BigInt::from(0), BigInt::from(0)];
        let e23 = vec![BigInt::from(0), BigInt::from(0), BigInt::from(1)];
        assert_eq!(closure_dim(&m, vec![e12.clone()]), 1);
        assert_eq!(closure_dim(&m, vec![e12, e23]), 3);
        let m4 = LieModel::StrictUpper { d: 4 };
        let gens: Vec<Vec<BigInt>> = (0..3)
            .map(|i| {
                let mut v = vec![BigInt::zero(); 6];
                v[super::super::unitriangular::packed_index(4, i, i + 1)] = BigInt::from(1);
                v
            })
            .collect();
        assert_eq!(closure_dim(&m4, gens), 6);
    }

    #[test]
    fn free_closure_dims_are_hirsch_lengths() {
        // x1, x2 generate the free Lie algebra; truncated at depth 3 it has 2 + 1 + 2 dims.
        let alg = FreeAlgebra::new(2, 3);
        let m = LieModel::FreeAssoc { algebra: alg.clone() };
        let gen = |i: usize| {
            let mut v = vec![BigInt::zero(); alg.dim() - 1];
            v[alg.word_index(&[i]) - 1] = BigInt::from(1);
            v
        };
        assert_eq!(closure_dim(&m, vec![gen(0), gen(1)]), 5);
    }
}
