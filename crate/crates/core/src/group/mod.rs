//! Finitely generated torsion-free nilpotent groups: `Z^d`, subgroups of upper
//! unitriangular integer matrices, and free nilpotent groups in Hall coordinates.

pub mod lie;
pub mod magnus;
pub mod unitriangular;

use std::collections::HashSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::commutator::{FormalCommutator, Letter, Sign};
use crate::error::{invalid, Error, Result};
use crate::exact::primitive_integer_vector;
use lie::LieModel;
pub use magnus::{FreeNilpotent, NormalForm};
pub use unitriangular::{LieElement, StrictUpper, UniMatrix};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroupElement {
    Zd(Vec<BigInt>),
    Unitriangular(UniMatrix),
    Hall(NormalForm),
}

impl GroupElement {
    pub fn backend_name(&self) -> &'static str {
        match self {
            GroupElement::Zd(_) => "zd",
            GroupElement::Unitriangular(_) => "unitriangular",
            GroupElement::Hall(_) => "free_nilpotent",
        }
    }

    pub fn mul(&self, o: &GroupElement) -> Result<GroupElement> {
        match (self, o) {
            (GroupElement::Zd(a), GroupElement::Zd(b)) if a.len() == b.len() => {
                Ok(GroupElement::Zd(a.iter().zip(b).map(|(x, y)| x + y).collect()))
            }
            (GroupElement::Unitriangular(a), GroupElement::Unitriangular(b)) if a.d() == b.d() => {
                Ok(GroupElement::Unitriangular(a.mul(b)))
            }
            (GroupElement::Hall(a), GroupElement::Hall(b)) => Ok(GroupElement::Hall(a.multiply(b)?)),
            _ => Err(mismatch(self, o)),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Zd(a) => GroupElement::Zd(a.iter().map(|x| -x).collect()),
            GroupElement::Unitriangular(a) => GroupElement::Unitriangular(a.inverse()),
            GroupElement::Hall(a) => GroupElement::Hall(a.inverse()),
        }
    }

    pub fn pow(&self, m: &BigInt) -> GroupElement {
        match self {
            GroupElement::Zd(a) => GroupElement::Zd(a.iter().map(|x| x * m).collect()),
            GroupElement::Unitriangular(a) => GroupElement::Unitriangular(a.pow(m)),
            GroupElement::Hall(a) => GroupElement::Hall(a.pow(m)),
        }
    }

    /// `a^{-1} b^{-1} a b`.
    pub fn bracket(&self, o: &GroupElement) -> Result<GroupElement> {
        if let (GroupElement::Zd(a), GroupElement::Zd(b)) = (self, o) {
            if a.len() != b.len() {
                return Err(mismatch(self, o));
            }
            return Ok(GroupElement::Zd(vec![BigInt::zero(); a.len()]));
        }
        self.inverse().mul(&o.inverse())?.mul(self)?.mul(o)
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Zd(a) => a.iter().all(Zero::is_zero),
            GroupElement::Unitriangular(a) => a.is_identity(),
            GroupElement::Hall(a) => a.is_identity(),
        }
    }

    pub fn identity_like(&self) -> GroupElement {
        match self {
            GroupElement::Zd(a) => GroupElement::Zd(vec![BigInt::zero(); a.len()]),
            GroupElement::Unitriangular(a) => GroupElement::Unitriangular(UniMatrix::identity(a.d())),
            GroupElement::Hall(a) => GroupElement::Hall(a.group().identity()),
        }
    }

    /// Flat integer coordinates: the vector, the packed upper entries, or Hall exponents.
    pub fn coordinates(&self) -> Vec<BigInt> {
        match self {
            GroupElement::Zd(a) => a.clone(),
            GroupElement::Unitriangular(a) => a.nilpotent().packed().to_vec(),
            GroupElement::Hall(a) => a.exponents.clone(),
        }
    }
}

fn mismatch(a: &GroupElement, b: &GroupElement) -> Error {
    Error::BackendMismatch(format!("cannot combine {} and {} elements of different shapes", a.backend_name(), b.backend_name()))
}

#[derive(Clone, Debug)]
pub enum Backend {
    Zd { d: usize },
    Unitriangular { d: usize },
    FreeNilpotent(Arc<FreeNilpotent>),
}

/// A group presented by a finite generating set inside one of the backends.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    backend: Backend,
    generators: Vec<GroupElement>,
    class: usize,
}

impl GroupSpec {
    pub fn zd(d: usize, generators: Vec<Vec<BigInt>>) -> Result<GroupSpec> {
        if d == 0 {
            return invalid("Z^d needs d >= 1");
        }
        if generators.is_empty() {
            return invalid("need at least one generator");
        }
        if let Some(g) = generators.iter().find(|g| g.len() != d) {
            return invalid(format!("generator of length {} in Z^{d}", g.len()));
        }
        Ok(GroupSpec {
            backend: Backend::Zd { d },
            generators: generators.into_iter().map(GroupElement::Zd).collect(),
            class: 1,
        })
    }

    pub fn zd_from_i64(generators: &[Vec<i64>]) -> Result<GroupSpec> {
        let d = generators.first().map_or(0, Vec::len);
        GroupSpec::zd(d, generators.iter().map(|g| g.iter().map(|&x| BigInt::from(x)).collect()).collect())
    }

    /// Standard basis of `Z^d`.
    pub fn zd_standard(d: usize) -> Result<GroupSpec> {
        let gens = (0..d)
            .map(|i| (0..d).map(|j| BigInt::from((i == j) as i64)).collect())
            .collect();
        GroupSpec::zd(d, gens)
    }

    /// Subgroup of `U(d, Z)` generated by `generators`. A declared `class` is checked:
    /// every left-normed commutator of that length plus one must vanish.
    pub fn unitriangular(d: usize, generators: Vec<UniMatrix>, class: Option<usize>) -> Result<GroupSpec> {
        if d < 2 {
            return invalid("unitriangular backend needs d >= 2");
        }
        if generators.is_empty() {
            return invalid("need at least one generator");
        }
        if let Some(g) = generators.iter().find(|g| g.d() != d) {
            return invalid(format!("generator of size {} in U({d})", g.d()));
        }
        let class = class.unwrap_or(d - 1);
        if class == 0 {
            return invalid("class must be at least 1");
        }
        let spec = GroupSpec {
            backend: Backend::Unitriangular { d },
            generators: generators.into_iter().map(GroupElement::Unitriangular).collect(),
            class: class.min(d - 1),
        };
        if class < d - 1 {
            spec.check_class(class, d - 1)?;
        }
        Ok(spec)
    }

    /// `U(d, Z)` with its standard generators `I + E_{i,i+1}`.
    pub fn upper_unitriangular(d: usize) -> Result<GroupSpec> {
        let gens = (0..d - 1).map(|i| UniMatrix::elementary(d, i, i + 1, BigInt::one())).collect();
        GroupSpec::unitriangular(d, gens, None)
    }

    /// `N(k, class)` with its canonical generators.
    pub fn free_nilpotent(k: usize, class: usize) -> Result<GroupSpec> {
        let g = FreeNilpotent::get(k, class)?;
        let generators = (0..k).map(|i| GroupElement::Hall(g.basis_element(i))).collect();
        Ok(GroupSpec { backend: Backend::FreeNilpotent(g), generators, class })
    }

    /// `N(k, class)` with generators given by Hall coordinates.
    pub fn free_nilpotent_with(k: usize, class: usize, generators: Vec<Vec<BigInt>>) -> Result<GroupSpec> {
        let g = FreeNilpotent::get(k, class)?;
        if generators.is_empty() {
            return invalid("need at least one generator");
        }
        let generators = generators
            .into_iter()
            .map(|e| g.normal_form(e).map(GroupElement::Hall))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupSpec { backend: Backend::FreeNilpotent(g), generators, class })
    }

    /// Fails unless every commutator of length `class + 1` in the generators is trivial.
    pub fn verify_class(&self, class: usize) -> Result<()> {
        if class >= self.class {
            return Ok(());
        }
        self.check_class(class, self.class)
    }

    fn check_class(&self, class: usize, up_to: usize) -> Result<()> {
        let letters: Vec<GroupElement> = self
            .generators
            .iter()
            .flat_map(|g| [g.clone(), g.inverse()])
            .collect();
        let mut layer: HashSet<GroupElement> = letters.iter().cloned().collect();
        for m in 2..=up_to {
            let mut next = HashSet::new();
            for y in &layer {
                for x in &letters {
                    let b = y.bracket(x)?;
                    if !b.is_identity() {
                        next.insert(b);
                    }
                }
            }
            if m > class && !next.is_empty() {
                return invalid(format!("declared class {class} but a commutator of length {m} is nontrivial"));
            }
            if next.is_empty() {
                break;
            }
            if next.len() > 200_000 {
                return Err(Error::ResourceLimit("class check produced too many commutators".into()));
            }
            layer = next;
        }
        Ok(())
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn backend_name(&self) -> &'static str {
        match self.backend {
            Backend::Zd { .. } => "zd",
            Backend::Unitriangular { .. } => "unitriangular",
            Backend::FreeNilpotent(_) => "free_nilpotent",
        }
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// Upper bound on the nilpotency class used to cut commutator enumeration.
    pub fn class_bound(&self) -> usize {
        self.class
    }

    pub fn identity(&self) -> GroupElement {
        match &self.backend {
            Backend::Zd { d } => GroupElement::Zd(vec![BigInt::zero(); *d]),
            Backend::Unitriangular { d } => GroupElement::Unitriangular(UniMatrix::identity(*d)),
            Backend::FreeNilpotent(g) => GroupElement::Hall(g.identity()),
        }
    }

    pub fn letter(&self, l: Letter) -> Result<GroupElement> {
        let g = self
            .generators
            .get(l.index)
            .ok_or_else(|| Error::InvalidArgument(format!("letter s{} but only {} generators", l.index + 1, self.generators.len())))?;
        Ok(match l.sign {
            Sign::Pos => g.clone(),
            Sign::Neg => g.inverse(),
        })
    }

    pub fn eval_word(&self, word: &[Letter]) -> Result<GroupElement> {
        let mut acc = self.identity();
        for &l in word {
            acc = acc.mul(&self.letter(l)?)?;
        }
        Ok(acc)
    }

    pub fn eval_commutator(&self, c: &FormalCommutator) -> Result<GroupElement> {
        match c.children() {
            None => self.letter(c.as_leaf().unwrap()),
            Some((a, b)) => self.eval_commutator(a)?.bracket(&self.eval_commutator(b)?),
        }
    }

    pub fn check_element(&self, g: &GroupElement) -> Result<()> {
        let ok = match (&self.backend, g) {
            (Backend::Zd { d }, GroupElement::Zd(v)) => v.len() == *d,
            (Backend::Unitriangular { d }, GroupElement::Unitriangular(m)) => m.d() == *d,
            (Backend::FreeNilpotent(a), GroupElement::Hall(n)) => a.k() == n.group().k() && a.class() == n.group().class(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BackendMismatch(format!("{} element for a {} group", g.backend_name(), self.backend_name())))
        }
    }

    pub fn lie_model(&self) -> LieModel {
        match &self.backend {
            Backend::Zd { d } => LieModel::Abelian { dim: *d },
            Backend::Unitriangular { d } => LieModel::StrictUpper { d: *d },
            Backend::FreeNilpotent(g) => LieModel::FreeAssoc { algebra: g.algebra().clone() },
        }
    }

    /// Logarithm in the coordinates of [`GroupSpec::lie_model`].
    pub fn log(&self, g: &GroupElement) -> Result<Vec<BigRational>> {
        self.check_element(g)?;
        Ok(match g {
            GroupElement::Zd(v) => v.iter().map(|x| BigRational::from_integer(x.clone())).collect(),
            GroupElement::Unitriangular(m) => m.log().into_packed(),
            GroupElement::Hall(n) => {
                let a = n.group().algebra();
                let mut l = a.log(&n.series());
                l.remove(0);
                l
            }
        })
    }

    /// Primitive integer multiple of the logarithm, zero for the identity.
    pub fn log_primitive(&self, g: &GroupElement) -> Result<Vec<BigInt>> {
        Ok(primitive_integer_vector(&self.log(g)?))
    }

    pub fn from_json(s: &str) -> Result<GroupSpec> {
        let raw: GroupSpecJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("group spec: {e}")))?;
        raw.build()
    }

    pub fn to_json(&self) -> GroupSpecJson {
        let lit = |v: &[BigInt]| v.iter().map(IntLit::from_bigint).collect::<Vec<_>>();
        match &self.backend {
            Backend::Zd { d } => GroupSpecJson::Zd {
                d: *d,
                generators: self.generators.iter().map(|g| lit(&g.coordinates())).collect(),
            },
            Backend::Unitriangular { d } => GroupSpecJson::Unitriangular {
                d: *d,
                class: Some(self.class),
                generators: self
                    .generators
                    .iter()
                    .map(|g| match g {
                        GroupElement::Unitriangular(m) => {
                            MatrixLit::Rows(m.to_rows().iter().map(|r| lit(r)).collect())
                        }
                        _ => unreachable!("generators match the backend"),
                    })
                    .collect(),
            },
            Backend::FreeNilpotent(g) => GroupSpecJson::FreeNilpotent {
                k: g.k(),
                class: g.class(),
                generators: Some(self.generators.iter().map(|x| lit(&x.coordinates())).collect()),
            },
        }
    }
}

/// An integer written as a JSON number or a decimal string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntLit {
    Num(i64),
    Str(String),
}

impl IntLit {
    pub fn to_bigint(&self) -> Result<BigInt> {
        match self {
            IntLit::Num(n) => Ok(BigInt::from(*n)),
            IntLit::Str(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("not an integer: {s:?}"))),
        }
    }

    pub fn from_bigint(x: &BigInt) -> IntLit {
        match x.to_i64() {
            Some(n) => IntLit::Num(n),
            None => IntLit::Str(x.to_string()),
        }
    }
}

/// A matrix as a flat row-major list or as nested rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixLit {
    Rows(Vec<Vec<IntLit>>),
    Flat(Vec<IntLit>),
}

impl MatrixLit {
    fn to_rows(&self, d: usize) -> Result<Vec<Vec<BigInt>>> {
        let conv = |v: &[IntLit]| v.iter().map(IntLit::to_bigint).collect::<Result<Vec<_>>>();
        match self {
            MatrixLit::Rows(rows) => rows.iter().map(|r| conv(r)).collect(),
            MatrixLit::Flat(flat) => {
                if flat.len() != d * d {
                    return invalid(format!("flat matrix has {} entries, expected {}", flat.len(), d * d));
                }
                let all = conv(flat)?;
                Ok(all.chunks(d).map(<[BigInt]>::to_vec).collect())
            }
        }
    }
}

/// Serialized form of a [`GroupSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpecJson {
    Zd {
        d: usize,
        generators: Vec<Vec<IntLit>>,
    },
    Unitriangular {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<usize>,
        generators: Vec<MatrixLit>,
    },
    FreeNilpotent {
        k: usize,
        class: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generators: Option<Vec<Vec<IntLit>>>,
    },
}

impl GroupSpecJson {
    pub fn build(&self) -> Result<GroupSpec> {
        let conv = |v: &[IntLit]| v.iter().map(IntLit::to_bigint).collect::<Result<Vec<_>>>();
        match self {
            GroupSpecJson::Zd { d, generators } => {
                GroupSpec::zd(*d, generators.iter().map(|g| conv(g)).collect::<Result<_>>()?)
            }
            GroupSpecJson::Unitriangular { d, class, generators } => {
                let mats = generators
                    .iter()
                    .map(|m| UniMatrix::from_rows(&m.to_rows(*d)?))
                    .collect::<Result<Vec<_>>>()?;
                GroupSpec::unitriangular(*d, mats, *class)
            }
            GroupSpecJson::FreeNilpotent { k, class, generators } => match generators {
                None => GroupSpec::free_nilpotent(*k, *class),
                Some(gs) => GroupSpec::free_nilpotent_with(*k, *class, gs.iter().map(|g| conv(g)).collect::<Result<_>>()?),
            },
        }
    }
}
