//! Walk endpoints and the collision estimator of `μ^{(2n)}(e)`.
//!
//! Abelian and unitriangular walks run on checked `i128` state and fall back to exact
//! big-integer elements on overflow. Free nilpotent groups walk inside their faithful
//! regular representation, which gives the same collisions as the Hall coordinates.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::law::{Power, StableLawSpec};
use super::radial::{RadialSpec, RadialStep};
use super::rng::{stream, WalkRng};
use crate::collection::project_hall_to_matrix;
use crate::error::{invalid, Error, Result};
use crate::group::unitriangular::packed_index;
use crate::group::{Backend, GroupElement, GroupSpec, StrictUpper, UniMatrix};

#[derive(Clone, Debug)]
pub enum StepSource {
    Stable(StableLawSpec),
    Radial(RadialSpec),
}

#[derive(Clone, Debug)]
enum UniGen {
    /// `N = v E_{ij}`.
    Elementary { i: usize, j: usize, v: i128 },
    /// Packed `N, N^2, ...` up to the last nonzero power.
    General { powers: Vec<Vec<i128>> },
}

#[derive(Clone, Debug)]
enum Fast {
    Zd { gens: Vec<Vec<i128>> },
    Uni { d: usize, gens: Vec<UniGen> },
    None,
}

#[derive(Clone, Debug)]
enum State {
    Small(Vec<i128>),
    Big(GroupElement),
}

/// Exact endpoint, comparable and hashable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EndpointKey {
    Small(Box<[i128]>),
    Big(Box<[BigInt]>),
}

impl EndpointKey {
    fn from_bigints(v: Vec<BigInt>) -> EndpointKey {
        let small: Option<Vec<i128>> = v.iter().map(|x| x.to_i128()).collect();
        match small {
            Some(s) => EndpointKey::Small(s.into_boxed_slice()),
            None => EndpointKey::Big(v.into_boxed_slice()),
        }
    }

    pub fn to_bigints(&self) -> Vec<BigInt> {
        match self {
            EndpointKey::Small(v) => v.iter().map(|x| BigInt::from(*x)).collect(),
            EndpointKey::Big(v) => v.to_vec(),
        }
    }
}

/// A random walk `ξ_1 ⋯ ξ_n` on a presented group.
#[derive(Clone, Debug)]
pub struct Walk {
    group: GroupSpec,
    steps: StepSource,
    /// Generators in the representation the engine walks in.
    gens: Vec<GroupElement>,
    fast: Fast,
    width: usize,
}

impl Walk {
    pub fn new(group: GroupSpec, steps: StepSource) -> Result<Walk> {
        match &steps {
            StepSource::Stable(law) if law.k() != group.num_generators() => {
                return invalid(format!("{} alphas for {} generators", law.k(), group.num_generators()));
            }
            StepSource::Radial(r) => {
                RadialSpec::for_group(&group, r.gamma())?;
            }
            _ => {}
        }
        let gens: Vec<GroupElement> = match group.backend() {
            Backend::FreeNilpotent(fnil) => {
                let mats = fnil.regular_representation();
                let target = GroupSpec::unitriangular(mats[0].d(), mats, Some(fnil.class()))?;
                group
                    .generators()
                    .iter()
                    .map(|g| match g {
                        GroupElement::Hall(nf) => project_hall_to_matrix(nf, &target),
                        _ => unreachable!("free nilpotent generators are normal forms"),
                    })
                    .collect::<Result<_>>()?
            }
            _ => group.generators().to_vec(),
        };
        let fast = fast_path(&gens);
        let width = gens.first().map(|g| g.coordinates().len()).unwrap_or(0);
        Ok(Walk { group, steps, gens, fast, width })
    }

    pub fn stable(group: GroupSpec, law: StableLawSpec) -> Result<Walk> {
        Walk::new(group, StepSource::Stable(law))
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn steps(&self) -> &StepSource {
        &self.steps
    }

    /// Number of integer coordinates in an endpoint key.
    pub fn key_width(&self) -> usize {
        self.width
    }

    fn identity_state(&self) -> State {
        match &self.fast {
            Fast::None => State::Big(self.gens[0].identity_like()),
            _ => State::Small(vec![0; self.width]),
        }
    }

    fn to_big(&self, v: &[i128]) -> GroupElement {
        let b: Vec<BigInt> = v.iter().map(|x| BigInt::from(*x)).collect();
        match &self.fast {
            Fast::Zd { .. } => GroupElement::Zd(b),
            Fast::Uni { d, .. } => GroupElement::Unitriangular(UniMatrix::from_nilpotent(StrictUpper::from_packed(*d, b))),
            Fast::None => unreachable!(),
        }
    }

    fn apply_generator(&self, st: &mut State, scratch: &mut Vec<i128>, i: usize, m: &Power) {
        if let (State::Small(v), Power::Small(m)) = (&mut *st, m) {
            scratch.clear();
            scratch.extend_from_slice(v);
            if self.fast_apply(scratch, i, *m).is_some() {
                std::mem::swap(v, scratch);
                return;
            }
        }
        let g = match st {
            State::Small(v) => self.to_big(v),
            State::Big(g) => g.clone(),
        };
        let g = g.mul(&self.gens[i].pow(&m.to_bigint())).expect("generators share the backend");
        *st = State::Big(g);
    }

    fn apply_vector(&self, st: &mut State, x: &RadialStep) {
        if let (State::Small(v), RadialStep::Small(x)) = (&mut *st, x) {
            let next: Option<Vec<i128>> = v.iter().zip(x).map(|(a, b)| a.checked_add(*b)).collect();
            if let Some(next) = next {
                *v = next;
                return;
            }
        }
        let g = match st {
            State::Small(v) => self.to_big(v),
            State::Big(g) => g.clone(),
        };
        let g = g.mul(&GroupElement::Zd(x.to_bigints())).expect("radial steps live in Z^d");
        *st = State::Big(g);
    }

    fn fast_apply(&self, v: &mut [i128], gi: usize, m: i128) -> Option<()> {
        if m == 0 {
            return Some(());
        }
        match &self.fast {
            Fast::Zd { gens } => {
                for (x, g) in v.iter_mut().zip(&gens[gi]) {
                    *x = x.checked_add(g.checked_mul(m)?)?;
                }
            }
            Fast::Uni { d, gens } => {
                let d = *d;
                match &gens[gi] {
                    UniGen::Elementary { i, j, v: c } => {
                        // g (I + mc E_ij) = g + mc E_ij + mc g[:, i] e_j^T
                        let mc = m.checked_mul(*c)?;
                        let ij = packed_index(d, *i, *j);
                        v[ij] = v[ij].checked_add(mc)?;
                        for a in 0..*i {
                            let ai = v[packed_index(d, a, *i)];
                            if ai != 0 {
                                let aj = packed_index(d, a, *j);
                                v[aj] = v[aj].checked_add(ai.checked_mul(mc)?)?;
                            }
                        }
                    }
                    UniGen::General { powers } => {
                        // h = Σ_p C(m,p) N^p, then g (I + h) = g + h + g h.
                        let mut h = vec![0i128; v.len()];
                        let mut binom: i128 = 1;
                        for (p, np) in powers.iter().enumerate() {
                            let p = p as i128;
                            binom = binom.checked_mul(m.checked_sub(p)?)? / (p + 1);
                            for (t, x) in h.iter_mut().zip(np) {
                                *t = t.checked_add(binom.checked_mul(*x)?)?;
                            }
                        }
                        let mut out = v.to_vec();
                        for (t, x) in out.iter_mut().zip(&h) {
                            *t = t.checked_add(*x)?;
                        }
                        for a in 0..d {
                            for k in a + 1..d {
                                let gak = v[packed_index(d, a, k)];
                                if gak == 0 {
                                    continue;
                                }
                                for b in k + 1..d {
                                    let hkb = h[packed_index(d, k, b)];
                                    if hkb != 0 {
                                        let ab = packed_index(d, a, b);
                                        out[ab] = out[ab].checked_add(gak.checked_mul(hkb)?)?;
                                    }
                                }
                            }
                        }
                        v.copy_from_slice(&out);
                    }
                }
            }
            Fast::None => return None,
        }
        Some(())
    }

    fn step(&self, st: &mut State, scratch: &mut Vec<i128>, rng: &mut WalkRng) {
        match &self.steps {
            StepSource::Stable(law) => {
                let (i, m) = law.sample_step(rng);
                self.apply_generator(st, scratch, i, &m);
            }
            StepSource::Radial(r) => {
                let x = r.sample(rng);
                self.apply_vector(st, &x);
            }
        }
    }

    /// Endpoint after `n` steps drawn from `rng`.
    pub fn endpoint(&self, n: u64, rng: &mut WalkRng) -> EndpointKey {
        let mut st = self.identity_state();
        let mut scratch = Vec::with_capacity(self.width);
        for _ in 0..n {
            self.step(&mut st, &mut scratch, rng);
        }
        match st {
            State::Small(v) => EndpointKey::Small(v.into_boxed_slice()),
            State::Big(g) => EndpointKey::from_bigints(g.coordinates()),
        }
    }

    /// The walk position after `n` steps as an element of the original group, computed with
    /// plain group operations. Consumes `rng` exactly like [`Walk::endpoint`].
    pub fn sample_walk(&self, n: u64, rng: &mut WalkRng) -> Result<GroupElement> {
        let mut g = self.group.identity();
        for _ in 0..n {
            let s = match &self.steps {
                StepSource::Stable(law) => {
                    let (i, m) = law.sample_step(rng);
                    self.group.generators()[i].pow(&m.to_bigint())
                }
                StepSource::Radial(r) => GroupElement::Zd(r.sample(rng).to_bigints()),
            };
            g = g.mul(&s)?;
        }
        Ok(g)
    }

    /// Key of a group element in the engine's representation.
    pub fn key_of(&self, g: &GroupElement) -> Result<EndpointKey> {
        self.group.check_element(g)?;
        let rep = match (self.group.backend(), g) {
            (Backend::FreeNilpotent(fnil), GroupElement::Hall(nf)) => {
                let mats = fnil.regular_representation();
                let target = GroupSpec::unitriangular(mats[0].d(), mats, Some(fnil.class()))?;
                project_hall_to_matrix(nf, &target)?
            }
            _ => g.clone(),
        };
        Ok(EndpointKey::from_bigints(rep.coordinates()))
    }
}

fn fast_path(gens: &[GroupElement]) -> Fast {
    let small = |v: Vec<BigInt>| -> Option<Vec<i128>> { v.iter().map(|x| x.to_i128()).collect() };
    match gens.first() {
        Some(GroupElement::Zd(_)) => {
            let g: Option<Vec<Vec<i128>>> = gens.iter().map(|g| small(g.coordinates())).collect();
            g.map(|gens| Fast::Zd { gens }).unwrap_or(Fast::None)
        }
        Some(GroupElement::Unitriangular(m0)) => {
            let d = m0.d();
            let mut out = Vec::with_capacity(gens.len());
            for g in gens {
                let GroupElement::Unitriangular(m) = g else { return Fast::None };
                let nz: Vec<(usize, usize)> = (0..d)
                    .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
                    .filter(|&(i, j)| m.entry(i, j) != BigInt::from(0))
                    .collect();
                let powers = m.nilpotent().powers();
                let elementary = nz.len() == 1 && powers.get(1).is_none_or(|p| p.is_zero());
                if elementary {
                    let (i, j) = nz[0];
                    let Some(v) = m.entry(i, j).to_i128() else { return Fast::None };
                    out.push(UniGen::Elementary { i, j, v });
                } else {
                    let mut ps = Vec::new();
                    for p in powers.into_iter().take_while(|p| !p.is_zero()) {
                        let Some(v) = small(p.into_packed()) else { return Fast::None };
                        ps.push(v);
                    }
                    out.push(UniGen::General { powers: ps });
                }
            }
            Fast::Uni { d, gens: out }
        }
        _ => Fast::None,
    }
}

/// Options shared by the Monte Carlo routines.
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub seed: u64,
    pub workers: usize,
    pub memory_budget: usize,
    pub deadline: Option<Instant>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { seed: 0, workers: 1, memory_budget: 1 << 30, deadline: None }
    }
}

/// Pair-collision estimate of `Σ_x μ^{(n)}(x)^2 = μ^{(2n)}(e)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEstimate {
    pub n: u64,
    pub samples: u64,
    pub pairs: u64,
    pub triples: u64,
    pub estimate: f64,
    pub stderr: f64,
}

impl CollisionEstimate {
    /// Builds the estimate from sorted or grouped run lengths of equal endpoints.
    pub fn from_runs(n: u64, samples: u64, runs: impl IntoIterator<Item = u64>) -> CollisionEstimate {
        let (mut pairs, mut triples) = (0u128, 0u128);
        for r in runs {
            let r = r as u128;
            pairs += r * r.saturating_sub(1) / 2;
            triples += r * r.saturating_sub(1) * r.saturating_sub(2) / 6;
        }
        let nn = samples as f64;
        let c2 = nn * (nn - 1.0) / 2.0;
        let p = pairs as f64 / c2;
        let var = if samples >= 3 {
            let c3 = c2 * (nn - 2.0) / 3.0;
            let q = triples as f64 / c3;
            (2.0 * (nn - 2.0) * (q - p * p) + (p - p * p)) / c2
        } else {
            p * (1.0 - p)
        };
        CollisionEstimate {
            n,
            samples,
            pairs: pairs as u64,
            triples: triples as u64,
            estimate: p,
            stderr: var.max(0.0).sqrt(),
        }
    }
}

/// Draws `samples` endpoints at horizon `n` and counts equal pairs exactly.
///
/// Sample `s` always uses stream `(seed, n, s)`, so the result is identical for any worker count.
pub fn collision_estimate(walk: &Walk, n: u64, samples: usize, opts: &SimOptions) -> Result<CollisionEstimate> {
    if samples < 2 {
        return invalid("collision estimates need at least two samples");
    }
    let per_key = 48 + 16 * walk.key_width();
    if samples.saturating_mul(per_key) > opts.memory_budget {
        return Err(Error::ResourceLimit(format!(
            "{samples} endpoints of width {} exceed the memory budget of {} bytes",
            walk.key_width(),
            opts.memory_budget
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::ResourceLimit(format!("thread pool: {e}")))?;
    let expired = AtomicBool::new(false);
    let mut keys: Vec<EndpointKey> = pool.install(|| {
        (0..samples)
            .into_par_iter()
            .map(|s| {
                if let Some(t) = opts.deadline {
                    if expired.load(Ordering::Relaxed) || (s % 256 == 0 && Instant::now() > t) {
                        expired.store(true, Ordering::Relaxed);
                        return None;
                    }
                }
                Some(walk.endpoint(n, &mut stream(opts.seed, n, s as u64)))
            })
            .collect::<Option<Vec<_>>>()
    })
    .ok_or_else(|| Error::ResourceLimit(format!("time budget exhausted at horizon {n}")))?;
    pool.install(|| keys.par_sort_unstable());
    let runs = keys.chunk_by(|a, b| a == b).map(|c| c.len() as u64);
    Ok(CollisionEstimate::from_runs(n, samples as u64, runs))
}
