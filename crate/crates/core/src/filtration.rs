//! The weight filtration `G = G_1 ⊇ G_2 ⊇ ...` attached to a weight system, its ranks and
//! the exponents built from them.
//!
//! Level `j` is generated by the images of all commutators of weight at least the `j`-th
//! weight value. Ranks of the quotients are computed on the rational Mal'cev completion:
//! the torsion-free rank of `G_j / G_{j+1}` equals the drop in dimension of the Lie
//! algebras generated by the logarithms of the generators of each level.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Serialize, Serializer};

use crate::commutator::{enumerate_commutators, FormalCommutator};
use crate::error::{invalid, Error, Result};
use crate::exact::{format_rational, int, rat, Rational};
use crate::group::lie::{closure_dim, extend_closure, LieModel};
use crate::group::{Backend, GroupElement, GroupSpec};
use crate::lattice::IntEchelon;
use crate::weights::{weights_from_alpha, Alpha, WeightSystem, WeightVec};

/// Index `j` of the deepest filtration level containing an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Isolator {
    /// 1-based level index.
    Level(usize),
    /// The identity lies in every level.
    Trivial,
}

impl Serialize for Isolator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Isolator::Level(j) => s.serialize_u64(*j as u64),
            Isolator::Trivial => s.serialize_str("trivial"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FiltrationLevel {
    /// 1-based.
    pub index: usize,
    pub weight: WeightVec,
    /// Commutators of weight exactly this value whose image is nontrivial.
    pub generating_commutators: Vec<FormalCommutator>,
    pub lie_dim: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiltrationReport {
    pub weights: WeightSystem,
    pub max_len: usize,
    pub levels: Vec<FiltrationLevel>,
    /// Last level with a nontrivial group, 0 if the group is trivial.
    pub j_star: usize,
    #[serde(rename = "D", serialize_with = "ser_components")]
    pub d_components: Vec<Rational>,
    pub hirsch_length: usize,
    pub generator_levels: Vec<Isolator>,
    /// 0-based generator indices with `w(s_i)` equal to the weight of their level.
    pub core: Vec<usize>,
    #[serde(skip)]
    algebras: Vec<IntEchelon>,
    #[serde(skip)]
    model: Option<LieModel>,
}

fn ser_components<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.len() == 1 {
        s.serialize_str(&format_rational(&v[0]))
    } else {
        s.collect_seq(v.iter().map(format_rational))
    }
}

impl FiltrationReport {
    /// `Σ_j w̄_j R_j`, one entry per weight coordinate.
    pub fn d_exponent(&self) -> &[Rational] {
        &self.d_components
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.rank).collect()
    }

    pub fn level_weights(&self) -> Vec<WeightVec> {
        self.levels.iter().map(|l| l.weight.clone()).collect()
    }

    /// Levels with nonzero rank, as `(weight, rank)`.
    pub fn nonzero_ranks(&self) -> Vec<(WeightVec, usize)> {
        self.levels
            .iter()
            .filter(|l| l.rank > 0)
            .map(|l| (l.weight.clone(), l.rank))
            .collect()
    }

    /// Rational Lie algebra of level `j` (1-based).
    pub fn level_algebra(&self, j: usize) -> &IntEchelon {
        &self.algebras[j - 1]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Deepest level whose Lie algebra contains the vector.
    pub fn isolator_of_log(&self, v: &[BigInt]) -> Isolator {
        if v.iter().all(Zero::is_zero) {
            return Isolator::Trivial;
        }
        let mut best = 0;
        for (j, a) in self.algebras.iter().enumerate() {
            if a.contains(v) {
                best = j + 1;
            } else {
                break;
            }
        }
        Isolator::Level(best)
    }

    pub fn lie_model(&self) -> &LieModel {
        self.model.as_ref().expect("report built from a group")
    }
}

impl fmt::Display for FiltrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.levels {
            writeln!(f, "level {:>3}  weight {:<16} lie_dim {:>3}  rank {}", l.index, l.weight.to_string(), l.lie_dim, l.rank)?;
        }
        let d: Vec<String> = self.d_components.iter().map(format_rational).collect();
        write!(f, "D = ({})  j* = {}  core = {:?}", d.join(", "), self.j_star, self.core.iter().map(|i| i + 1).collect::<Vec<_>>())
    }
}

/// Dimension of the Lie algebra generated by the logs of `elements`.
pub fn lie_closure_dim(spec: &GroupSpec, elements: &[GroupElement]) -> Result<usize> {
    let model = spec.lie_model();
    let logs = elements
        .iter()
        .map(|g| spec.log_primitive(g))
        .collect::<Result<Vec<_>>>()?;
    Ok(closure_dim(&model, logs))
}

/// Hirsch length of the group generated by `spec`.
pub fn hirsch_length(spec: &GroupSpec) -> Result<usize> {
    lie_closure_dim(spec, spec.generators())
}

/// Filtration with the default length bound `class + 1`.
pub fn filtration(spec: &GroupSpec, weights: &WeightSystem) -> Result<FiltrationReport> {
    filtration_with_len(spec, weights, spec.class_bound() + 1)
}

pub fn filtration_with_len(spec: &GroupSpec, weights: &WeightSystem, max_len: usize) -> Result<FiltrationReport> {
    let k = spec.num_generators();
    if weights.len() != k {
        return invalid(format!("{} weights for {k} generators", weights.len()));
    }
    let class = spec.class_bound();
    let max_len = max_len.max(class);
    let values = weights.value_sequence(max_len);
    let model = spec.lie_model();

    // Bucket the logs of nontrivial commutator images by weight value.
    let mut buckets: BTreeMap<usize, Vec<(FormalCommutator, Vec<BigInt>)>> = BTreeMap::new();
    for c in enumerate_commutators(k, class)? {
        let img = spec.eval_commutator(&c)?;
        if img.is_identity() {
            continue;
        }
        let w = weights.weight_of(&c)?;
        let j = values.binary_search(&w).map_err(|_| {
            Error::InvalidArgument(format!("weight of {c} missing from the value sequence"))
        })?;
        buckets.entry(j).or_default().push((c, spec.log_primitive(&img)?));
    }

    let n = values.len();
    let mut algebras: Vec<IntEchelon> = vec![IntEchelon::new(model.dim()); n];
    let mut span = IntEchelon::new(model.dim());
    for j in (0..n).rev() {
        if let Some(b) = buckets.get(&j) {
            extend_closure(&model, &mut span, b.iter().map(|(_, v)| v.clone()));
        }
        algebras[j] = span.clone();
    }

    let mut levels = Vec::with_capacity(n);
    let dims = weights.dim();
    let mut d_components = vec![Rational::zero(); dims];
    for j in 0..n {
        let lie_dim = algebras[j].dim();
        let below = if j + 1 < n { algebras[j + 1].dim() } else { 0 };
        let rank = lie_dim - below;
        for (acc, x) in d_components.iter_mut().zip(values[j].coords()) {
            *acc += x * Rational::from_integer(BigInt::from(rank));
        }
        levels.push(FiltrationLevel {
            index: j + 1,
            weight: values[j].clone(),
            generating_commutators: buckets.get(&j).map(|b| b.iter().map(|(c, _)| c.clone()).collect()).unwrap_or_default(),
            lie_dim,
            rank,
        });
    }
    let j_star = levels.iter().rposition(|l| l.lie_dim > 0).map_or(0, |p| p + 1);
    let hirsch = levels.first().map_or(0, |l| l.lie_dim);

    let mut report = FiltrationReport {
        weights: weights.clone(),
        max_len,
        levels,
        j_star,
        d_components,
        hirsch_length: hirsch,
        generator_levels: Vec::new(),
        core: Vec::new(),
        algebras,
        model: Some(model),
    };
    for (i, g) in spec.generators().iter().enumerate() {
        let iso = report.isolator_of_log(&spec.log_primitive(g)?);
        report.generator_levels.push(iso);
        if let Isolator::Level(j) = iso {
            if weights.weights()[i] == values[j - 1] {
                report.core.push(i);
            }
        }
    }
    Ok(report)
}

/// `j_w(g)`: the deepest level containing `g`, or `Trivial` for the identity.
pub fn j_w(spec: &GroupSpec, report: &FiltrationReport, g: &GroupElement) -> Result<Isolator> {
    Ok(report.isolator_of_log(&spec.log_primitive(g)?))
}

/// `D(G) = Σ_j j · rank(γ_j / γ_{j+1})` for the lower central series.
pub fn lower_central_d(spec: &GroupSpec) -> Result<Rational> {
    let w = WeightSystem::uniform(spec.num_generators(), Rational::one())?;
    Ok(filtration(spec, &w)?.d_components[0].clone())
}

/// Result of the greedy extraction on `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GreedySigma {
    /// 0-based generator indices, in the order picked.
    pub chosen: Vec<usize>,
    #[serde(serialize_with = "crate::exact::serde_rational::serialize")]
    pub inv_beta: Rational,
    /// Number of chosen generators with `alpha = 2`.
    pub gamma: usize,
}

/// Scans generators by increasing `alpha` (ties by index) and keeps those that raise the
/// integer rank; `1/β = Σ 1/min(α, 2)` over the kept ones.
pub fn zd_greedy_sigma(spec: &GroupSpec, alphas: &[Alpha]) -> Result<GreedySigma> {
    let Backend::Zd { d } = spec.backend() else {
        return Err(Error::Unsupported("greedy extraction is defined for Z^d".into()));
    };
    if alphas.len() != spec.num_generators() {
        return invalid(format!("{} alphas for {} generators", alphas.len(), spec.num_generators()));
    }
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    let key = |a: &Alpha| match a {
        Alpha::Finite(q) => (0, q.clone()),
        Alpha::Infinite => (1, Rational::zero()),
    };
    order.sort_by(|&i, &j| key(&alphas[i]).cmp(&key(&alphas[j])).then(i.cmp(&j)));
    let mut span = IntEchelon::new(*d);
    let mut out = GreedySigma { chosen: Vec::new(), inv_beta: Rational::zero(), gamma: 0 };
    for i in order {
        if span.insert(&spec.generators()[i].coordinates()).is_some() {
            out.chosen.push(i);
            out.inv_beta += Rational::one() / alphas[i].tilde();
            if alphas[i].is_two() {
                out.gamma += 1;
            }
        }
    }
    if span.dim() < *d {
        return invalid(format!("generators span a sublattice of rank {} < {d}", span.dim()));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `n^{-D}` with the one-dimensional weights.
    #[serde(rename = "pure-power")]
    PurePower,
    /// `[n log n]^{-D(G)/2}`.
    #[serde(rename = "all-core-alpha-2")]
    AllCoreAlphaTwo,
    /// Every generator has finite variance: `n^{-D(G)/2}`.
    #[serde(rename = "finite-variance")]
    FiniteVariance,
    /// Only the upper bound `n^{-D1} (log n)^{-D2}` is established.
    #[serde(rename = "mixed-unproven")]
    MixedUnproven,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::PurePower => "pure-power",
            Regime::AllCoreAlphaTwo => "all-core-alpha-2",
            Regime::FiniteVariance => "finite-variance",
            Regime::MixedUnproven => "mixed-unproven",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    /// `μ^{(n)}(e) ≍ n^{-poly} (log n)^{-log}` (an upper bound only if flagged).
    #[serde(serialize_with = "crate::exact::serde_rational::serialize")]
    pub poly_exponent: Rational,
    #[serde(serialize_with = "crate::exact::serde_rational::serialize")]
    pub log_exponent: Rational,
    pub regime: Regime,
    pub upper_bound_only: bool,
    /// `D(S, w)` for `w_i = 1/min(α_i, 2)`.
    #[serde(rename = "D", serialize_with = "crate::exact::serde_rational::serialize")]
    pub d_power: Rational,
    #[serde(rename = "D1", serialize_with = "crate::exact::serde_rational::serialize")]
    pub d1: Rational,
    #[serde(rename = "D2", serialize_with = "crate::exact::serde_rational::serialize")]
    pub d2: Rational,
    #[serde(rename = "D_G", serialize_with = "crate::exact::serde_rational::serialize")]
    pub d_lower_central: Rational,
    pub core: Vec<usize>,
}

pub fn predicted_return_exponent(spec: &GroupSpec, alphas: &[Alpha]) -> Result<Prediction> {
    if alphas.len() != spec.num_generators() {
        return invalid(format!("{} alphas for {} generators", alphas.len(), spec.num_generators()));
    }
    let aw = weights_from_alpha(alphas)?;
    let power = filtration(spec, &aw.power)?;
    let two = filtration(spec, &aw.log_corrected.weights)?;
    let d_power = power.d_components[0].clone();
    let d1 = two.d_components[0].clone();
    let d2 = two.d_components[1].clone();
    let d_g = lower_central_d(spec)?;
    let core = power.core.clone();
    let two_q = int(2);
    let is_lt2 = |a: &Alpha| matches!(a, Alpha::Finite(q) if *q < two_q);
    let is_gt2 = |a: &Alpha| match a {
        Alpha::Finite(q) => *q > two_q,
        Alpha::Infinite => true,
    };

    let heavy: Vec<GroupElement> = spec
        .generators()
        .iter()
        .zip(alphas)
        .filter(|(_, a)| is_lt2(a))
        .map(|(g, _)| g.clone())
        .collect();
    let heavy_finite_index = lie_closure_dim(spec, &heavy)? == power.hirsch_length;
    let core_lt2 = core.iter().all(|&i| is_lt2(&alphas[i]));
    let core_eq2 = !core.is_empty() && core.iter().all(|&i| alphas[i].is_two());

    let half = rat(1, 2);
    let (regime, poly, log, upper_only) = if heavy_finite_index || core_lt2 {
        (Regime::PurePower, d_power.clone(), Rational::zero(), false)
    } else if core_eq2 {
        (Regime::AllCoreAlphaTwo, &d_g * &half, &d_g * &half, false)
    } else if alphas.iter().all(is_gt2) {
        (Regime::FiniteVariance, &d_g * &half, Rational::zero(), false)
    } else {
        (Regime::MixedUnproven, d1.clone(), d2.clone(), true)
    };
    Ok(Prediction {
        poly_exponent: poly,
        log_exponent: log,
        regime,
        upper_bound_only: upper_only,
        d_power,
        d1,
        d2,
        d_lower_central: d_g,
        core,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::UniMatrix;

    fn heisenberg_xyz() -> GroupSpec {
        let one = BigInt::one();
        GroupSpec::unitriangular(
            3,
            vec![
                UniMatrix::elementary(3, 0, 1, one.clone()),
                UniMatrix::elementary(3, 1, 2, one.clone()),
                UniMatrix::elementary(3, 0, 2, one),
            ],
            None,
        )
        .unwrap()
    }

    fn alphas(xs: &[&str]) -> Vec<Alpha> {
        xs.iter().map(|s| Alpha::parse(s).unwrap()).collect()
    }

    #[test]
    fn heisenberg_with_central_generator() {
        let spec = heisenberg_xyz();
        let w = WeightSystem::from_scalars(&[int(1), rat(3, 2), int(3)]).unwrap();
        let r = filtration(&spec, &w).unwrap();
        let got: Vec<(String, usize)> = r.nonzero_ranks().iter().map(|(w, k)| (w.to_string(), *k)).collect();
        assert_eq!(got, vec![("1".into(), 1), ("3/2".into(), 1), ("3".into(), 1)]);
        assert_eq!(r.d_components, vec![rat(11, 2)]);
        assert_eq!(r.core, vec![0, 1, 2]);
        assert_eq!(r.hirsch_length, 3);
    }

    #[test]
    fn heisenberg_core_drops_heavy_central_generator() {
        // w(s3) = 1 < w([s1,s2]) = 2: s3 lives deeper than its own weight.
        let spec = heisenberg_xyz();
        let w = WeightSystem::from_scalars(&[int(1), int(1), int(1)]).unwrap();
        let r = filtration(&spec, &w).unwrap();
        assert_eq!(r.core, vec![0, 1]);
        assert_eq!(r.d_components, vec![int(4)]);
        assert_eq!(r.generator_levels[2], Isolator::Level(2));
    }

    #[test]
    fn predictions_on_heisenberg() {
        let spec = heisenberg_xyz();
        let p = predicted_return_exponent(&spec, &alphas(&["1", "1", "1"])).unwrap();
        assert_eq!((p.poly_exponent.clone(), p.log_exponent.clone(), p.regime), (int(4), int(0), Regime::PurePower));
        let p = predicted_return_exponent(&spec, &alphas(&["2", "2", "2"])).unwrap();
        assert_eq!((p.poly_exponent.clone(), p.log_exponent.clone(), p.regime), (int(2), int(2), Regime::AllCoreAlphaTwo));
        let p = predicted_return_exponent(&spec, &alphas(&["inf", "inf", "inf"])).unwrap();
        assert_eq!((p.poly_exponent, p.regime), (int(2), Regime::FiniteVariance));
    }

    #[test]
    fn u4_two_dimensional_example() {
        let one = BigInt::one();
        let spec = GroupSpec::unitriangular(
            4,
            vec![
                UniMatrix::elementary(4, 0, 1, one.clone()),
                UniMatrix::elementary(4, 1, 2, one.clone()),
                UniMatrix::elementary(4, 2, 3, one.clone()),
                UniMatrix::elementary(4, 0, 3, one),
            ],
            None,
        )
        .unwrap();
        let p = predicted_return_exponent(&spec, &alphas(&["1", "2", "5", "1/3"])).unwrap();
        assert_eq!((p.d1.clone(), p.d2.clone()), (rat(15, 2), rat(3, 2)));
        assert_eq!(p.regime, Regime::MixedUnproven);
        assert!(p.upper_bound_only);
    }

    #[test]
    fn greedy_sigma_examples() {
        let spec = GroupSpec::zd_from_i64(&[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let g = zd_greedy_sigma(&spec, &alphas(&["1/2", "3/2", "9/10"])).unwrap();
        assert_eq!(g.chosen, vec![0, 2]);
        assert_eq!(g.inv_beta, rat(28, 9));
        let w = weights_from_alpha(&alphas(&["1/2", "3/2", "9/10"])).unwrap();
        assert_eq!(filtration(&spec, &w.power).unwrap().d_components[0], rat(28, 9));

        let z2 = GroupSpec::zd_standard(2).unwrap();
        let g = zd_greedy_sigma(&z2, &alphas(&["2", "2"])).unwrap();
        assert_eq!((g.inv_beta, g.gamma), (int(1), 2));
        let z1 = GroupSpec::zd_standard(1).unwrap();
        assert_eq!(zd_greedy_sigma(&z1, &alphas(&["0.7"])).unwrap().inv_beta, rat(10, 7));
        let thin = GroupSpec::zd_from_i64(&[vec![1, 1], vec![2, 2]]).unwrap();
        assert!(zd_greedy_sigma(&thin, &alphas(&["1", "1"])).is_err());
    }

    #[test]
    fn free_nilpotent_lower_central() {
        for (l, want) in [(2usize, 4i64), (3, 10)] {
            let spec = GroupSpec::free_nilpotent(2, l).unwrap();
            assert_eq!(lower_central_d(&spec).unwrap(), int(want));
        }
    }

    #[test]
    fn identity_is_trivial_isolator() {
        let spec = heisenberg_xyz();
        let w = WeightSystem::uniform(3, int(1)).unwrap();
        let r = filtration(&spec, &w).unwrap();
        assert_eq!(j_w(&spec, &r, &spec.identity()).unwrap(), Isolator::Trivial);
    }
}
