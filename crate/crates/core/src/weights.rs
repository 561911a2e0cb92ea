//! Weight systems, weight functions and the weights attached to a stable-like law.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Add;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::commutator::FormalCommutator;
use crate::error::{invalid, Error, Result};
use crate::exact::{format_rational, int, parse_rational, rat, to_f64, Rational};

/// A weight in `Q_{>0} × Q^{m-1}`, compared lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeightVec(Vec<Rational>);

impl WeightVec {
    pub fn new(coords: Vec<Rational>) -> Result<WeightVec> {
        match coords.first() {
            None => invalid("weight vectors need at least one coordinate"),
            Some(x) if !x.is_positive() => {
                invalid(format!("leading weight coordinate must be positive, got {}", format_rational(x)))
            }
            _ => Ok(WeightVec(coords)),
        }
    }

    pub fn scalar(v: Rational) -> Result<WeightVec> {
        WeightVec::new(vec![v])
    }

    pub fn coords(&self) -> &[Rational] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(format_rational).collect()
    }

    pub fn scale(&self, k: &Rational) -> WeightVec {
        WeightVec(self.0.iter().map(|x| x * k).collect())
    }
}

impl Ord for WeightVec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for WeightVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &WeightVec {
    type Output = WeightVec;

    fn add(self, rhs: &WeightVec) -> WeightVec {
        assert_eq!(self.dim(), rhs.dim(), "weight dimensions differ");
        WeightVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for WeightVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", format_rational(&self.0[0]))
        } else {
            write!(f, "({})", self.to_strings().join(","))
        }
    }
}

impl Serialize for WeightVec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_strings().serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        let coords = v
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        WeightVec::new(coords).map_err(serde::de::Error::custom)
    }
}

/// One weight per generator; the weight of a commutator is the sum over its letters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSystem {
    weights: Vec<WeightVec>,
}

impl WeightSystem {
    pub fn new(weights: Vec<WeightVec>) -> Result<WeightSystem> {
        let Some(first) = weights.first() else {
            return invalid("weight system is empty");
        };
        let m = first.dim();
        if weights.iter().any(|w| w.dim() != m) {
            return invalid("all weights must have the same dimension");
        }
        Ok(WeightSystem { weights })
    }

    /// Every generator gets the scalar weight `v`.
    pub fn uniform(k: usize, v: Rational) -> Result<WeightSystem> {
        WeightSystem::new(vec![WeightVec::scalar(v)?; k])
    }

    pub fn from_scalars(ws: &[Rational]) -> Result<WeightSystem> {
        WeightSystem::new(ws.iter().map(|w| WeightVec::scalar(w.clone())).collect::<Result<_>>()?)
    }

    pub fn weights(&self) -> &[WeightVec] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].dim()
    }

    pub fn weight_of(&self, c: &FormalCommutator) -> Result<WeightVec> {
        let word = c.build_word();
        if let Some(&i) = word.iter().find(|&&i| i >= self.weights.len()) {
            return invalid(format!("letter s{} outside a weight system of size {}", i + 1, self.len()));
        }
        let mut acc = self.weights[word[0]].clone();
        for &i in &word[1..] {
            acc = &acc + &self.weights[i];
        }
        Ok(acc)
    }

    /// All weights of formal commutators of length `1..=max_len`, i.e. all sums of
    /// multisets of generator weights of those sizes, increasing and without repeats.
    pub fn value_sequence(&self, max_len: usize) -> Vec<WeightVec> {
        let distinct: BTreeSet<WeightVec> = self.weights.iter().cloned().collect();
        let mut layer = distinct.clone();
        let mut all = distinct.clone();
        for _ in 2..=max_len {
            let mut next = BTreeSet::new();
            for s in &layer {
                for w in &distinct {
                    next.insert(s + w);
                }
            }
            all.extend(next.iter().cloned());
            layer = next;
        }
        all.into_iter().collect()
    }
}

/// `F(r) = r^{v1} · log(e + r)^{v2}`, nondecreasing on `[1, ∞)` when `v1 > 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeightFunction {
    pub v1: Rational,
    pub v2: Rational,
}

const INVERT_REL_TOL: f64 = 1.0 / (1u64 << 40) as f64;

impl WeightFunction {
    pub fn new(v1: Rational, v2: Rational) -> Result<WeightFunction> {
        if v1.is_negative() {
            return invalid("weight function exponent must be nonnegative");
        }
        if v1.is_zero() && !v2.is_positive() {
            return invalid("weight function must be increasing");
        }
        Ok(WeightFunction { v1, v2 })
    }

    pub fn power(v: Rational) -> Result<WeightFunction> {
        WeightFunction::new(v, Rational::zero())
    }

    /// The function `r^{w1} log(e+r)^{w2}` attached to a weight of dimension at most two.
    pub fn from_weight(w: &WeightVec) -> Result<WeightFunction> {
        match w.coords() {
            [a] => WeightFunction::new(a.clone(), Rational::zero()),
            [a, b] => WeightFunction::new(a.clone(), b.clone()),
            _ => Err(Error::Unsupported(format!(
                "weight functions are defined for dimension <= 2, got {}",
                w.dim()
            ))),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let a = to_f64(&self.v1);
        let b = to_f64(&self.v2);
        let mut y = if a == 0.0 { 1.0 } else { r.powf(a) };
        if b != 0.0 {
            y *= (std::f64::consts::E + r).ln().powf(b);
        }
        y
    }

    /// `ln F(r)`, usable where `F(r)` itself overflows.
    pub fn ln_eval(&self, r: f64) -> f64 {
        let mut y = to_f64(&self.v1) * r.ln();
        if !self.v2.is_zero() {
            y += to_f64(&self.v2) * (std::f64::consts::E + r).ln().ln();
        }
        y
    }

    /// Exact value when `F` is an integer power and `r` is rational.
    pub fn eval_exact(&self, r: &Rational) -> Option<Rational> {
        if !self.v2.is_zero() || !self.v1.is_integer() {
            return None;
        }
        let e: i32 = self.v1.to_integer().try_into().ok()?;
        Some(num_traits::pow(r.clone(), e as usize))
    }

    /// `inf { r >= 1 : F(r) >= y }`, with `F^{-1}(0) = 0` and `F^{-1}(y) = 1` for
    /// `0 < y <= F(1)`. Relative accuracy `2^-40`.
    pub fn invert(&self, y: f64) -> f64 {
        if y.is_nan() || y < 0.0 {
            return f64::NAN;
        }
        if y == 0.0 {
            return 0.0;
        }
        if y.is_infinite() {
            return f64::INFINITY;
        }
        if y <= self.eval(1.0) {
            return 1.0;
        }
        if self.v2.is_zero() {
            return y.powf(1.0 / to_f64(&self.v1)).max(1.0);
        }
        let mut lo = 1.0_f64;
        let mut hi = 2.0_f64;
        while self.eval(hi) < y {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        while hi - lo > INVERT_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// The product `F · G` corresponds to adding exponents.
    pub fn mul(&self, other: &WeightFunction) -> WeightFunction {
        WeightFunction {
            v1: &self.v1 + &other.v1,
            v2: &self.v2 + &other.v2,
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r^{}", format_rational(&self.v1))?;
        if !self.v2.is_zero() {
            write!(f, " log(e+r)^{}", format_rational(&self.v2))?;
        }
        Ok(())
    }
}

/// A weight system together with one weight function per generator, with the
/// function of a commutator being the product over its letters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatiblePair {
    pub weights: WeightSystem,
    pub functions: Vec<WeightFunction>,
}

impl CompatiblePair {
    pub fn from_weights(weights: WeightSystem) -> Result<CompatiblePair> {
        let functions = weights
            .weights()
            .iter()
            .map(WeightFunction::from_weight)
            .collect::<Result<Vec<_>>>()?;
        Ok(CompatiblePair { weights, functions })
    }

    pub fn function_of(&self, c: &FormalCommutator) -> Result<WeightFunction> {
        let word = c.build_word();
        if word.iter().any(|&i| i >= self.functions.len()) {
            return invalid("commutator uses a letter outside the weight system");
        }
        let mut f = self.functions[word[0]].clone();
        for &i in &word[1..] {
            f = f.mul(&self.functions[i]);
        }
        Ok(f)
    }
}

/// The tail index of a symmetric stable-like law on `Z`; `Infinite` means finite support.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Alpha {
    Finite(Rational),
    Infinite,
}

impl Alpha {
    pub fn finite(q: Rational) -> Result<Alpha> {
        if !q.is_positive() {
            return invalid(format!("alpha must be positive, got {}", format_rational(&q)));
        }
        Ok(Alpha::Finite(q))
    }

    /// Accepts `"p/q"`, decimals and `"inf"`.
    pub fn parse(s: &str) -> Result<Alpha> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "∞" | "+inf") {
            return Ok(Alpha::Infinite);
        }
        Alpha::finite(parse_rational(&t)?)
    }

    /// `min(alpha, 2)`.
    pub fn tilde(&self) -> Rational {
        match self {
            Alpha::Finite(q) if *q < int(2) => q.clone(),
            _ => int(2),
        }
    }

    pub fn is_two(&self) -> bool {
        matches!(self, Alpha::Finite(q) if *q == int(2))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Alpha::Finite(q) => to_f64(q),
            Alpha::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(q) => write!(f, "{}", format_rational(q)),
            Alpha::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) => Alpha::parse(&s).map_err(serde::de::Error::custom),
            Raw::Num(x) => {
                // JSON numbers go through their shortest decimal form, so 0.8 means 4/5.
                Alpha::parse(&format!("{x}")).map_err(serde::de::Error::custom)
            }
        }
    }
}

/// The two weight systems attached to a vector of tail indices.
#[derive(Clone, Debug)]
pub struct AlphaWeights {
    /// `w_i = 1/min(alpha_i, 2)`.
    pub power: WeightSystem,
    /// `w_i = (1/min(alpha_i, 2), 1/2 if alpha_i = 2 else 0)`, with its weight functions.
    pub log_corrected: CompatiblePair,
}

pub fn weights_from_alpha(alphas: &[Alpha]) -> Result<AlphaWeights> {
    if alphas.is_empty() {
        return invalid("need at least one alpha");
    }
    let mut power = Vec::with_capacity(alphas.len());
    let mut two = Vec::with_capacity(alphas.len());
    for a in alphas {
        let w1 = Rational::one() / a.tilde();
        let w2 = if a.is_two() { rat(1, 2) } else { Rational::zero() };
        power.push(WeightVec::scalar(w1.clone())?);
        two.push(WeightVec::new(vec![w1, w2])?);
    }
    Ok(AlphaWeights {
        power: WeightSystem::new(power)?,
        log_corrected: CompatiblePair::from_weights(WeightSystem::new(two)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(xs: &[(i64, i64)]) -> WeightVec {
        WeightVec::new(xs.iter().map(|&(n, d)| rat(n, d)).collect()).unwrap()
    }

    #[test]
    fn lexicographic_order() {
        assert!(w(&[(1, 1), (5, 1)]) < w(&[(3, 2), (0, 1)]));
        assert!(w(&[(1, 1), (0, 1)]) < w(&[(1, 1), (1, 2)]));
        assert!(WeightVec::new(vec![int(0)]).is_err());
        assert!(WeightVec::new(vec![]).is_err());
    }

    // Brute force: weights of all enumerated commutators.
    fn sequence_oracle(ws: &WeightSystem, max_len: usize) -> Vec<WeightVec> {
        let cs = crate::commutator::enumerate_commutators(ws.len(), max_len).unwrap();
        let set: BTreeSet<WeightVec> = cs.iter().map(|c| ws.weight_of(c).unwrap()).collect();
        set.into_iter().collect()
    }

    #[test]
    fn value_sequence_three_and_thirteen_halves() {
        let ws = WeightSystem::from_scalars(&[int(3), rat(13, 2)]).unwrap();
        let seq = ws.value_sequence(3);
        let got: Vec<String> = seq.iter().map(|x| x.to_string()).collect();
        assert_eq!(got, ["3", "6", "13/2", "9", "19/2", "25/2", "13", "16", "39/2"]);
        assert_eq!(seq, sequence_oracle(&ws, 3));
    }

    #[test]
    fn value_sequence_matches_enumeration_two_dim() {
        let ws = WeightSystem::new(vec![w(&[(3, 2), (0, 1)]), w(&[(2, 1), (1, 1)]), w(&[(7, 2), (0, 1)])]).unwrap();
        assert_eq!(ws.value_sequence(3), sequence_oracle(&ws, 3));
    }

    #[test]
    fn weight_of_bracket_adds() {
        let ws = WeightSystem::from_scalars(&[int(1), int(2)]).unwrap();
        let c: FormalCommutator = "[[s2,s1],s1^-1]".parse().unwrap();
        assert_eq!(ws.weight_of(&c).unwrap(), w(&[(4, 1)]));
        let bad: FormalCommutator = "s3".parse().unwrap();
        assert!(ws.weight_of(&bad).is_err());
    }

    #[test]
    fn alpha_weights() {
        let a: Vec<Alpha> = ["0.8", "1.2", "2", "3", "inf"].iter().map(|s| Alpha::parse(s).unwrap()).collect();
        let aw = weights_from_alpha(&a).unwrap();
        let p: Vec<String> = aw.power.weights().iter().map(|x| x.to_string()).collect();
        assert_eq!(p, ["5/4", "5/6", "1/2", "1/2", "1/2"]);
        let l: Vec<String> = aw.log_corrected.weights.weights().iter().map(|x| x.to_string()).collect();
        assert_eq!(l, ["(5/4,0)", "(5/6,0)", "(1/2,1/2)", "(1/2,0)", "(1/2,0)"]);
        assert!(Alpha::parse("0").is_err());
        assert!(Alpha::parse("-1").is_err());
    }

    #[test]
    fn alpha_json_forms() {
        let a: Vec<Alpha> = serde_json::from_str(r#"[0.8, "1/3", "inf", 2]"#).unwrap();
        assert_eq!(a[0], Alpha::Finite(rat(4, 5)));
        assert_eq!(a[1], Alpha::Finite(rat(1, 3)));
        assert_eq!(a[2], Alpha::Infinite);
        assert!(a[3].is_two());
    }

    #[test]
    fn invert_edge_cases() {
        let f = WeightFunction::new(rat(1, 2), int(1)).unwrap();
        assert_eq!(f.invert(0.0), 0.0);
        assert_eq!(f.invert(f.eval(1.0)), 1.0);
        assert_eq!(f.invert(0.5), 1.0);
        let g = WeightFunction::power(int(2)).unwrap();
        assert!((g.invert(49.0) - 7.0).abs() < 1e-12);
        assert_eq!(g.eval_exact(&rat(3, 2)), Some(rat(9, 4)));
        assert!(WeightFunction::new(int(0), int(0)).is_err());
    }

    proptest! {
        #[test]
        fn invert_is_right_inverse(
            v1n in 1i64..12, v1d in 1i64..5, v2n in 0i64..6, v2d in 1i64..4, r in 1.0f64..1e6
        ) {
            let f = WeightFunction::new(rat(v1n, v1d), rat(v2n, v2d)).unwrap();
            let y = f.eval(r);
            let x = f.invert(y);
            prop_assert!(f.eval(x) >= y * (1.0 - 1e-9));
            if f.eval(r * (1.0 - 1e-6)) < y {
                prop_assert!((x - r).abs() <= 1e-9 * r.max(1.0) + 1e-6 * r);
            }
        }

        #[test]
        fn value_sequence_agrees_with_enumeration(
            a in 1i64..8, b in 1i64..8, c in 1i64..4, len in 1usize..4
        ) {
            let ws = WeightSystem::from_scalars(&[rat(a, c), rat(b, 2)]).unwrap();
            prop_assert_eq!(ws.value_sequence(len), sequence_oracle(&ws, len));
        }

        #[test]
        fn weight_order_matches_growth(
            a1 in 1i64..6, a2 in -3i64..4, b1 in 1i64..6, b2 in -3i64..4
        ) {
            let wa = w(&[(a1, 2), (a2, 2)]);
            let wb = w(&[(b1, 2), (b2, 2)]);
            let fa = WeightFunction::from_weight(&wa).unwrap();
            let fb = WeightFunction::from_weight(&wb).unwrap();
            let r = 1e200_f64;
            match wa.cmp(&wb) {
                Ordering::Less => prop_assert!(fa.ln_eval(r) < fb.ln_eval(r)),
                Ordering::Greater => prop_assert!(fa.ln_eval(r) > fb.ln_eval(r)),
                Ordering::Equal => prop_assert_eq!(fa.ln_eval(r), fb.ln_eval(r)),
            }
        }
    }
}
