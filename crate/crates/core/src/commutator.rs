//! Formal commutators over a signed alphabet.
//!
//! A formal commutator is either a signed letter `s_i^{±1}` or a bracket `[a, b]` of two
//! formal commutators. The involution `J` swaps the sign of letters and the two sides of a
//! bracket; it realizes group inversion on the evaluated element. Canonical commutators are
//! one representative per `J`-orbit: positive letters, and brackets `[a, b]` with `a ≻ b`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }
}

/// A generator index (0-based) with a sign. Ordered by index, then `Pos < Neg`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub index: usize,
    pub sign: Sign,
}

impl Letter {
    pub fn new(index: usize, sign: Sign) -> Letter {
        Letter { index, sign }
    }

    pub fn pos(index: usize) -> Letter {
        Letter::new(index, Sign::Pos)
    }

    pub fn neg(index: usize) -> Letter {
        Letter::new(index, Sign::Neg)
    }

    pub fn inverse(self) -> Letter {
        Letter::new(self.index, self.sign.flip())
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Pos => write!(f, "s{}", self.index + 1),
            Sign::Neg => write!(f, "s{}^-1", self.index + 1),
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
enum Node {
    Leaf(Letter),
    Bracket {
        left: FormalCommutator,
        right: FormalCommutator,
        len: usize,
    },
}

/// An immutable, cheaply clonable formal commutator.
///
/// Ordering: shorter commutators come first; among equal lengths, letters compare as
/// [`Letter`] and brackets compare their left sides, then their right sides.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FormalCommutator(Arc<Node>);

impl FormalCommutator {
    pub fn leaf(letter: Letter) -> FormalCommutator {
        FormalCommutator(Arc::new(Node::Leaf(letter)))
    }

    /// The positive letter `s_{index+1}`.
    pub fn generator(index: usize) -> FormalCommutator {
        FormalCommutator::leaf(Letter::pos(index))
    }

    pub fn bracket(left: &FormalCommutator, right: &FormalCommutator) -> FormalCommutator {
        let len = left.len() + right.len();
        FormalCommutator(Arc::new(Node::Bracket {
            left: left.clone(),
            right: right.clone(),
            len,
        }))
    }

    /// Number of letters.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        match &*self.0 {
            Node::Leaf(_) => 1,
            Node::Bracket { len, .. } => *len,
        }
    }

    pub fn as_leaf(&self) -> Option<Letter> {
        match &*self.0 {
            Node::Leaf(l) => Some(*l),
            Node::Bracket { .. } => None,
        }
    }

    pub fn children(&self) -> Option<(&FormalCommutator, &FormalCommutator)> {
        match &*self.0 {
            Node::Leaf(_) => None,
            Node::Bracket { left, right, .. } => Some((left, right)),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.as_leaf().is_some()
    }

    /// Generator indices of the letters, left to right, ignoring signs.
    pub fn build_word(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        self.visit_letters(&mut |l| out.push(l.index));
        out
    }

    pub fn letters(&self) -> Vec<Letter> {
        let mut out = Vec::with_capacity(self.len());
        self.visit_letters(&mut |l| out.push(l));
        out
    }

    fn visit_letters(&self, f: &mut impl FnMut(Letter)) {
        match &*self.0 {
            Node::Leaf(l) => f(*l),
            Node::Bracket { left, right, .. } => {
                left.visit_letters(f);
                right.visit_letters(f);
            }
        }
    }

    /// Expansion into a group word using `[a, b] = a^{-1} b^{-1} a b`. Not freely reduced.
    pub fn group_word(&self) -> Vec<Letter> {
        match &*self.0 {
            Node::Leaf(l) => vec![*l],
            Node::Bracket { left, right, .. } => {
                let a = left.group_word();
                let b = right.group_word();
                let mut w = Vec::with_capacity(2 * (a.len() + b.len()));
                w.extend(invert_word(&a));
                w.extend(invert_word(&b));
                w.extend(a);
                w.extend(b);
                w
            }
        }
    }

    /// The involution `J`.
    pub fn involution(&self) -> FormalCommutator {
        match &*self.0 {
            Node::Leaf(l) => FormalCommutator::leaf(l.inverse()),
            Node::Bracket { left, right, .. } => FormalCommutator::bracket(right, left),
        }
    }

    pub fn is_canonical(&self) -> bool {
        match &*self.0 {
            Node::Leaf(l) => l.sign == Sign::Pos,
            Node::Bracket { left, right, .. } => left > right,
        }
    }

    /// The canonical representative of `{c, J(c)}` and the exponent relating them:
    /// `c = rep^sign`. Returns `None` for brackets `[a, a]`, which are fixed by `J`
    /// and evaluate to the identity.
    pub fn canonical(&self) -> Option<(FormalCommutator, Sign)> {
        match &*self.0 {
            Node::Leaf(l) => Some((FormalCommutator::generator(l.index), l.sign)),
            Node::Bracket { left, right, .. } => match left.cmp(right) {
                Ordering::Greater => Some((self.clone(), Sign::Pos)),
                Ordering::Less => Some((self.involution(), Sign::Neg)),
                Ordering::Equal => None,
            },
        }
    }

    pub fn max_index(&self) -> usize {
        self.build_word().into_iter().max().unwrap_or(0)
    }
}

impl Ord for FormalCommutator {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.len().cmp(&other.len()).then_with(|| match (&*self.0, &*other.0) {
            (Node::Leaf(a), Node::Leaf(b)) => a.cmp(b),
            (
                Node::Bracket { left: a1, right: b1, .. },
                Node::Bracket { left: a2, right: b2, .. },
            ) => a1.cmp(a2).then_with(|| b1.cmp(b2)),
            // Equal lengths force both to be leaves or both brackets.
            _ => unreachable!("length-1 commutators are exactly the leaves"),
        })
    }
}

impl PartialOrd for FormalCommutator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FormalCommutator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Leaf(l) => write!(f, "{l}"),
            Node::Bracket { left, right, .. } => write!(f, "[{left},{right}]"),
        }
    }
}

impl fmt::Debug for FormalCommutator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl serde::Serialize for FormalCommutator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for FormalCommutator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for FormalCommutator {
    type Err = Error;

    /// Parses the display syntax: `s1`, `s2^-1`, `[[s2,s1],s1]`. Whitespace is ignored.
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let c = parse_node(&chars, &mut pos)?;
        if pos != chars.len() {
            return invalid(format!("trailing input in commutator {s:?}"));
        }
        Ok(c)
    }
}

fn parse_node(chars: &[char], pos: &mut usize) -> Result<FormalCommutator> {
    match chars.get(*pos) {
        Some('[') => {
            *pos += 1;
            let a = parse_node(chars, pos)?;
            if chars.get(*pos) != Some(&',') {
                return invalid("expected ',' in bracket");
            }
            *pos += 1;
            let b = parse_node(chars, pos)?;
            if chars.get(*pos) != Some(&']') {
                return invalid("expected ']' closing bracket");
            }
            *pos += 1;
            Ok(FormalCommutator::bracket(&a, &b))
        }
        Some('s') => {
            *pos += 1;
            let start = *pos;
            while chars.get(*pos).is_some_and(|c| c.is_ascii_digit()) {
                *pos += 1;
            }
            let digits: String = chars[start..*pos].iter().collect();
            let n: usize = digits
                .parse()
                .map_err(|_| Error::InvalidArgument("expected generator number".into()))?;
            if n == 0 {
                return invalid("generators are numbered from 1");
            }
            let mut sign = Sign::Pos;
            if chars.get(*pos) == Some(&'^') {
                let rest: String = chars[*pos..].iter().take(3).collect();
                if rest != "^-1" {
                    return invalid("only ^-1 exponents are allowed on letters");
                }
                *pos += 3;
                sign = Sign::Neg;
            }
            Ok(FormalCommutator::leaf(Letter::new(n - 1, sign)))
        }
        _ => invalid("expected a letter or a bracket"),
    }
}

pub fn invert_word(w: &[Letter]) -> Vec<Letter> {
    w.iter().rev().map(|l| l.inverse()).collect()
}

/// Cancels adjacent `x x^{-1}` pairs.
pub fn free_reduce(w: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(w.len());
    for &l in w {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// All formal commutators (any signs) on `k` letters, grouped by length `1..=max_len`,
/// each group sorted.
pub fn all_formal_commutators(k: usize, max_len: usize) -> Vec<Vec<FormalCommutator>> {
    let mut by_len: Vec<Vec<FormalCommutator>> = vec![Vec::new(); max_len + 1];
    if max_len == 0 {
        return by_len;
    }
    for i in 0..k {
        by_len[1].push(FormalCommutator::leaf(Letter::pos(i)));
        by_len[1].push(FormalCommutator::leaf(Letter::neg(i)));
    }
    for m in 2..=max_len {
        let mut level = Vec::new();
        for la in 1..m {
            for a in &by_len[la] {
                for b in &by_len[m - la] {
                    level.push(FormalCommutator::bracket(a, b));
                }
            }
        }
        level.sort();
        by_len[m] = level;
    }
    by_len
}

/// Canonical commutators of length `1..=max_len` on `k` letters, in increasing order.
pub fn enumerate_commutators(k: usize, max_len: usize) -> Result<Vec<FormalCommutator>> {
    if k == 0 {
        return invalid("need at least one generator");
    }
    // The full set grows like (2k)^m Catalan(m); refuse sizes that cannot fit in memory.
    let mut estimate: f64 = 0.0;
    for m in 1..=max_len {
        estimate += (2.0 * k as f64).powi(m as i32) * catalan(m - 1);
    }
    if estimate > 5.0e6 {
        return Err(Error::ResourceLimit(format!(
            "enumerating commutators of length <= {max_len} on {k} letters needs ~{estimate:.0} entries"
        )));
    }
    let all = all_formal_commutators(k, max_len);
    Ok(all
        .into_iter()
        .flatten()
        .filter(|c| c.is_canonical())
        .collect())
}

fn catalan(n: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..n {
        c = c * 2.0 * (2 * i + 1) as f64 / (i + 2) as f64;
    }
    c
}

/// A word in formal commutators with integer exponents, e.g. `s1^3 [s2,s1]^-1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word {
    pub terms: Vec<(FormalCommutator, i64)>,
}

impl Word {
    pub fn new() -> Word {
        Word::default()
    }

    pub fn from_letters(letters: &[Letter]) -> Word {
        Word {
            terms: letters
                .iter()
                .map(|l| (FormalCommutator::generator(l.index), l.sign.as_i64()))
                .collect(),
        }
    }

    pub fn push(&mut self, c: FormalCommutator, exponent: i64) {
        self.terms.push((c, exponent));
    }

    /// Rewrites every term over its canonical representative, merges equal neighbours and
    /// drops zero exponents and `J`-fixed brackets.
    pub fn normalized(&self) -> Word {
        let mut out: Vec<(FormalCommutator, i64)> = Vec::with_capacity(self.terms.len());
        for (c, e) in &self.terms {
            let Some((rep, s)) = c.canonical() else { continue };
            let e = e * s.as_i64();
            if e == 0 {
                continue;
            }
            match out.last_mut() {
                Some((last, le)) if *last == rep => {
                    *le += e;
                    if *le == 0 {
                        out.pop();
                    }
                }
                _ => out.push((rep, e)),
            }
        }
        Word { terms: out }
    }

    /// Number of occurrences of `c^{±1}`, where `c^{-1}` is `J(c)`.
    pub fn deg(&self, c: &FormalCommutator) -> u64 {
        let j = c.involution();
        self.terms
            .iter()
            .filter(|(t, _)| t == c || *t == j)
            .map(|(_, e)| e.unsigned_abs())
            .sum()
    }

    /// Signed occurrence count: `c` counts `+e`, `J(c)` counts `-e`.
    pub fn signed_deg(&self, c: &FormalCommutator) -> i64 {
        let j = c.involution();
        let mut total = 0;
        for (t, e) in &self.terms {
            if t == c {
                total += e;
            } else if *t == j {
                total -= e;
            }
        }
        total
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "e");
        }
        for (i, (c, e)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if *e == 1 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}^{e}")?;
            }
        }
        Ok(())
    }
}
