//! Collection of words in free nilpotent groups into Hall normal form.
//!
//! The symbolic collector repeatedly takes the least basic commutator `c` still present and
//! moves each occurrence of `c^{±1}` to the left past the other letters, using
//! `d^ε c^δ = c^δ d^ε [d^ε, c^δ]`. The correction `[d^ε, c^δ]` is read from a memoized
//! commutation table; its letters all come after `c`, so each pass removes `c` for good.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::commutator::{FormalCommutator, Word};
use crate::error::{invalid, Error, Result};
use crate::group::{FreeNilpotent, GroupElement, GroupSpec, NormalForm};

/// Letters are basis indices with a sign; `true` means inverse.
type Unit = (usize, bool);

const MAX_LETTERS: usize = 20_000_000;

/// Collects a word of formal commutators in `N(k, ℓ)`.
///
/// Terms that are basic commutators (or `J`-images of them) enter as letters directly.
/// Any other commutator is first replaced by the letters of its own normal form.
pub fn collect(group: &Arc<FreeNilpotent>, word: &Word) -> Result<NormalForm> {
    let mut units: Vec<Unit> = Vec::new();
    for (c, e) in &word.terms {
        push_term(group, c, *e, &mut units)?;
    }
    collect_units(group, units)
}

/// Collects `∏ c_{i}^{e}` given as `(basis index, exponent)` pairs.
pub fn collect_indices(group: &Arc<FreeNilpotent>, letters: &[(usize, i64)]) -> Result<NormalForm> {
    let mut units = Vec::new();
    for &(i, e) in letters {
        if i >= group.rank() {
            return invalid(format!("basis index {i} out of range"));
        }
        push_units(&mut units, i, e)?;
    }
    collect_units(group, units)
}

fn push_units(units: &mut Vec<Unit>, i: usize, e: i64) -> Result<()> {
    if units.len() + e.unsigned_abs() as usize > MAX_LETTERS {
        return Err(Error::ResourceLimit("word too long for symbolic collection".into()));
    }
    units.extend(std::iter::repeat_n((i, e < 0), e.unsigned_abs() as usize));
    Ok(())
}

fn push_term(group: &Arc<FreeNilpotent>, c: &FormalCommutator, e: i64, units: &mut Vec<Unit>) -> Result<()> {
    if c.max_index() >= group.k() {
        return invalid(format!("{c} uses a letter outside N({}, {})", group.k(), group.class()));
    }
    if c.len() > group.class() {
        return Ok(());
    }
    if let Some((rep, sign)) = c.canonical() {
        if let Some(i) = group.index_of(&rep) {
            return push_units(units, i, e * sign.as_i64());
        }
    }
    // Not basic: substitute its normal form, repeated |e| times with the right orientation.
    let spec = GroupSpec::free_nilpotent(group.k(), group.class())?;
    let GroupElement::Hall(nf) = spec.eval_commutator(c)? else { unreachable!() };
    let nf = if e < 0 { nf.inverse() } else { nf };
    for _ in 0..e.unsigned_abs() {
        for (i, x) in nf.exponents.iter().enumerate() {
            let x = x.to_i64().ok_or_else(|| Error::ResourceLimit("exponent too large".into()))?;
            push_units(units, i, x)?;
        }
    }
    Ok(())
}

fn collect_units(group: &Arc<FreeNilpotent>, mut w: Vec<Unit>) -> Result<NormalForm> {
    let mut x = vec![0i64; group.rank()];
    while let Some(c) = w.iter().map(|u| u.0).min() {
        let mut rest: Vec<Unit> = Vec::with_capacity(w.len());
        for &(idx, neg) in &w {
            if idx != c {
                rest.push((idx, neg));
                continue;
            }
            x[c] += if neg { -1 } else { 1 };
            if rest.is_empty() {
                continue;
            }
            // Moving c^δ across r_1 ... r_q leaves r_1 u_1 r_2 u_2 ... r_q u_q with
            // u_i the normal form of [r_i, c^δ].
            let mut moved: Vec<Unit> = Vec::with_capacity(rest.len() * 2);
            for &(d, dneg) in &rest {
                moved.push((d, dneg));
                let u = group.commutation_entry(d, dneg, c, neg);
                for (i, e) in u.iter() {
                    let e = e.to_i64().expect("commutation table entries are small");
                    moved.extend(std::iter::repeat_n((*i, e < 0), e.unsigned_abs() as usize));
                }
            }
            if moved.len() > MAX_LETTERS {
                return Err(Error::ResourceLimit("symbolic collection exceeded its letter budget".into()));
            }
            rest = moved;
        }
        w = rest;
    }
    group.normal_form(x.into_iter().map(BigInt::from).collect())
}

/// Product of normal forms through the Magnus embedding.
pub fn nf_multiply(a: &NormalForm, b: &NormalForm) -> Result<NormalForm> {
    a.multiply(b)
}

/// The word `∏ c_i^{x_i}` of a normal form.
pub fn normal_form_word(nf: &NormalForm) -> Word {
    let mut w = Word::new();
    for (i, x) in nf.exponents.iter().enumerate() {
        if !x.is_zero() {
            let e = x.to_i64().expect("exponent fits in i64");
            w.push(nf.group().basis()[i].clone(), e);
        }
    }
    w
}

/// Image of a normal form under the homomorphism sending `s_i` to the `i`-th generator
/// of `target`. Fails if `target` is not of class at most `ℓ`.
pub fn project_hall_to_matrix(nf: &NormalForm, target: &GroupSpec) -> Result<GroupElement> {
    let g = nf.group();
    if target.num_generators() != g.k() {
        return invalid(format!("target has {} generators, expected {}", target.num_generators(), g.k()));
    }
    target.verify_class(g.class())?;
    let mut acc = target.identity();
    for (i, x) in nf.exponents.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        let c = target.eval_commutator(&g.basis()[i])?;
        acc = acc.mul(&c.pow(x))?;
    }
    Ok(acc)
}
