//! Coordinates along a commutator basis adapted to the weight filtration, the quasi-norm
//! they induce, and volume estimates for the associated boxes.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::commutator::{FormalCommutator, Letter};
use crate::error::{invalid, Error, Result};
use crate::filtration::{FiltrationReport, Isolator};
use crate::group::{GroupElement, GroupSpec};
use crate::lattice::{IntEchelon, RationalSolver};
use crate::weights::{WeightFunction, WeightVec};

#[derive(Clone, Debug, Serialize)]
pub struct BasisEntry {
    pub commutator: FormalCommutator,
    pub weight: WeightVec,
    /// 1-based filtration level.
    pub level: usize,
    #[serde(skip)]
    pub element: GroupElement,
    #[serde(skip)]
    pub function: WeightFunction,
}

#[derive(Clone, Debug)]
struct LevelBlock {
    start: usize,
    len: usize,
    solver: RationalSolver,
}

/// Commutators `c_1, ..., c_t` ordered by level, with `R_j` of them at level `j`, whose
/// logs span `L_j / L_{j+1}`.
#[derive(Clone, Debug, Serialize)]
pub struct CommutatorBasis {
    pub entries: Vec<BasisEntry>,
    #[serde(skip)]
    blocks: Vec<LevelBlock>,
}

impl CommutatorBasis {
    /// Picks, level by level, the first commutators of exactly that weight (in
    /// commutator order) that enlarge the span modulo the next level.
    pub fn greedy(spec: &GroupSpec, report: &FiltrationReport) -> Result<CommutatorBasis> {
        let mut picks: Vec<FormalCommutator> = Vec::new();
        for level in &report.levels {
            if level.rank == 0 {
                continue;
            }
            let j = level.index;
            let mut span = next_level_span(report, j);
            let mut got = 0;
            for c in &level.generating_commutators {
                let v = spec.log_primitive(&spec.eval_commutator(c)?)?;
                if span.insert(&v).is_some() {
                    picks.push(c.clone());
                    got += 1;
                    if got == level.rank {
                        break;
                    }
                }
            }
            if got < level.rank {
                return Err(Error::NotInSpan(format!("level {j}: only {got} of {} directions found", level.rank)));
            }
        }
        CommutatorBasis::from_commutators(spec, report, &picks)
    }

    /// Certifies a user-supplied list: each commutator must have exactly the weight of
    /// its level, and the logs at each level must be independent modulo the next level
    /// and fill the rank.
    pub fn from_commutators(spec: &GroupSpec, report: &FiltrationReport, list: &[FormalCommutator]) -> Result<CommutatorBasis> {
        let weights = &report.weights;
        let values = report.level_weights();
        let mut entries = Vec::with_capacity(list.len());
        for c in list {
            let w = weights.weight_of(c)?;
            let j = values
                .binary_search(&w)
                .map_err(|_| Error::InvalidArgument(format!("{c} has a weight outside the filtration")))?
                + 1;
            let element = spec.eval_commutator(c)?;
            entries.push(BasisEntry { commutator: c.clone(), function: WeightFunction::from_weight(&w)?, weight: w, level: j, element });
        }
        if entries.windows(2).any(|p| p[0].level > p[1].level) {
            return invalid("basis commutators must be listed by nondecreasing level");
        }
        let mut blocks = Vec::new();
        let mut start = 0;
        while start < entries.len() {
            let j = entries[start].level;
            let len = entries[start..].iter().take_while(|e| e.level == j).count();
            let rank = report.levels[j - 1].rank;
            if len != rank {
                return invalid(format!("level {j} needs {rank} basis commutators, got {len}"));
            }
            let mut rows: Vec<Vec<BigRational>> = entries[start..start + len]
                .iter()
                .map(|e| spec.log(&e.element))
                .collect::<Result<_>>()?;
            for r in next_level_span(report, j).rows() {
                rows.push(r.iter().map(|x| BigRational::from_integer(x.clone())).collect());
            }
            let solver = RationalSolver::new(rows)
                .ok_or_else(|| Error::InvalidArgument(format!("level {j} basis commutators are dependent modulo the next level")))?;
            blocks.push(LevelBlock { start, len, solver });
            start += len;
        }
        let covered: usize = blocks.iter().map(|b| b.len).sum();
        if covered != report.hirsch_length {
            return invalid(format!("basis has {covered} commutators but the Hirsch length is {}", report.hirsch_length));
        }
        Ok(CommutatorBasis { entries, blocks })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Integer `x` with `g = c_1^{x_1} ... c_t^{x_t}`.
    pub fn coordinates(&self, spec: &GroupSpec, g: &GroupElement) -> Result<Vec<BigInt>> {
        spec.check_element(g)?;
        let mut rest = g.clone();
        let mut x = vec![BigInt::zero(); self.entries.len()];
        for b in &self.blocks {
            let log = spec.log(&rest)?;
            let sol = b
                .solver
                .solve(&log)
                .ok_or_else(|| Error::NotInSpan(format!("remainder leaves level {}", self.entries[b.start].level)))?;
            let mut prefix = spec.identity();
            for (off, q) in sol.iter().take(b.len).enumerate() {
                if !q.is_integer() {
                    return Err(Error::NotInSpan(format!("non-integral coordinate {q} for {}", self.entries[b.start + off].commutator)));
                }
                let xi = q.to_integer();
                if !xi.is_zero() {
                    prefix = prefix.mul(&self.entries[b.start + off].element.pow(&xi))?;
                }
                x[b.start + off] = xi;
            }
            rest = prefix.inverse().mul(&rest)?;
        }
        if !rest.is_identity() {
            return Err(Error::NotInSpan("nontrivial remainder after the last level".into()));
        }
        Ok(x)
    }

    /// `∏ c_i^{x_i}`.
    pub fn evaluate(&self, spec: &GroupSpec, x: &[BigInt]) -> Result<GroupElement> {
        if x.len() != self.entries.len() {
            return invalid("coordinate vector has the wrong length");
        }
        let mut acc = spec.identity();
        for (e, xi) in self.entries.iter().zip(x) {
            if !xi.is_zero() {
                acc = acc.mul(&e.element.pow(xi))?;
            }
        }
        Ok(acc)
    }

    /// `max_i F_{c_i}^{-1}(|x_i|)`, zero at the identity.
    pub fn radius_of_coordinates(&self, x: &[BigInt]) -> f64 {
        self.entries
            .iter()
            .zip(x)
            .map(|(e, xi)| e.function.invert(xi.abs().to_f64().unwrap_or(f64::INFINITY)))
            .fold(0.0, f64::max)
    }

    pub fn radius(&self, spec: &GroupSpec, g: &GroupElement) -> Result<QuasiNormValue> {
        let coordinates = self.coordinates(spec, g)?;
        Ok(QuasiNormValue { r: self.radius_of_coordinates(&coordinates), coordinates })
    }

    /// Side lengths `floor(F_{c_i}(r))` of the box of radius `r`.
    pub fn box_sides(&self, r: f64) -> Vec<u64> {
        self.entries
            .iter()
            .map(|e| if r <= 0.0 { 0 } else { e.function.eval(r).floor() as u64 })
            .collect()
    }
}

fn next_level_span(report: &FiltrationReport, j: usize) -> IntEchelon {
    if j < report.num_levels() {
        report.level_algebra(j + 1).clone()
    } else {
        IntEchelon::new(report.level_algebra(j).ambient_dim())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiNormValue {
    pub r: f64,
    #[serde(serialize_with = "ser_bigints")]
    pub coordinates: Vec<BigInt>,
}

fn ser_bigints<S: serde::Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub n: u64,
    pub radius: f64,
    pub reference: f64,
    pub ratio: f64,
}

/// `r(g^n)` against `𝐅_{j_w(g)}^{-1}(n)`, where `𝐅_j` is the function of the level weight.
pub fn power_growth_check(
    spec: &GroupSpec,
    report: &FiltrationReport,
    basis: &CommutatorBasis,
    g: &GroupElement,
    ns: &[u64],
) -> Result<Vec<GrowthRow>> {
    let j = match crate::filtration::j_w(spec, report, g)? {
        Isolator::Level(j) => j,
        Isolator::Trivial => return invalid("the identity has no growth"),
    };
    let f = WeightFunction::from_weight(&report.levels[j - 1].weight)?;
    ns.iter()
        .map(|&n| {
            let radius = basis.radius(spec, &g.pow(&BigInt::from(n)))?.r;
            let reference = f.invert(n as f64);
            Ok(GrowthRow { n, radius, reference, ratio: radius / reference })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeProfile {
    pub r: f64,
    pub volume: f64,
    pub ln_volume: f64,
}

/// `∏_j 𝐅_j(r)^{R_j}`, the predicted size of the ball of radius `r`.
pub fn ball_volume(report: &FiltrationReport, r: f64) -> Result<VolumeProfile> {
    let mut ln = 0.0;
    for l in &report.levels {
        if l.rank > 0 {
            ln += l.rank as f64 * WeightFunction::from_weight(&l.weight)?.ln_eval(r);
        }
    }
    Ok(VolumeProfile { r, volume: ln.exp(), ln_volume: ln })
}

/// Number of distinct elements `∏ c_i^{x_i}` with `|x_i| <= F_{c_i}(r)`, counted by hashing
/// the products. Refuses boxes with more than `budget` tuples.
pub fn box_count_oracle(spec: &GroupSpec, basis: &CommutatorBasis, r: f64, budget: u64) -> Result<u64> {
    let sides = basis.box_sides(r);
    let total = sides
        .iter()
        .try_fold(1u64, |acc, &s| acc.checked_mul(2 * s + 1))
        .filter(|&t| t <= budget)
        .ok_or_else(|| Error::ResourceLimit(format!("box of radius {r} exceeds the budget of {budget} products")))?;
    let set = (0..total)
        .into_par_iter()
        .fold(HashSet::new, |mut set, mut idx| {
            let mut x = Vec::with_capacity(sides.len());
            for &s in &sides {
                let w = 2 * s + 1;
                x.push(BigInt::from(idx % w) - BigInt::from(s));
                idx /= w;
            }
            let g = basis.evaluate(spec, &x).expect("basis elements live in the group");
            set.insert(g.coordinates());
            set
        })
        .reduce(HashSet::new, |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            big.extend(small);
            big
        });
    Ok(set.len() as u64)
}

/// Breadth-first ball in the Cayley graph for `S^{±1}`; maps each element to its word length.
pub fn word_ball(spec: &GroupSpec, radius: u32, budget: usize) -> Result<HashMap<GroupElement, u32>> {
    let letters: Vec<GroupElement> = (0..spec.num_generators())
        .flat_map(|i| [Letter::pos(i), Letter::neg(i)])
        .map(|l| spec.letter(l))
        .collect::<Result<_>>()?;
    let mut dist = HashMap::new();
    let e = spec.identity();
    dist.insert(e.clone(), 0);
    let mut queue = VecDeque::from([e]);
    while let Some(g) = queue.pop_front() {
        let d = dist[&g];
        if d == radius {
            continue;
        }
        for s in &letters {
            let h = g.mul(s)?;
            if !dist.contains_key(&h) {
                dist.insert(h.clone(), d + 1);
                if dist.len() > budget {
                    return Err(Error::ResourceLimit(format!("word ball of radius {radius} exceeds {budget} elements")));
                }
                queue.push_back(h);
            }
        }
    }
    Ok(dist)
}
