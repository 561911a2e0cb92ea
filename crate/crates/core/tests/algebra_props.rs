//! Property tests for commutators, weights, group backends, collection and filtrations.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nilwalk::collection::{collect, normal_form_word, project_hall_to_matrix};
use nilwalk::commutator::{all_formal_commutators, enumerate_commutators, free_reduce, invert_word, FormalCommutator, Letter, Word};
use nilwalk::exact::{int, rat, Rational};
use nilwalk::filtration::{filtration, lower_central_d, FiltrationReport};
use nilwalk::group::magnus::{hall_basis, witt_number};
use nilwalk::group::{FreeNilpotent, GroupElement, GroupSpec, StrictUpper, UniMatrix};
use nilwalk::weights::{weights_from_alpha, Alpha, WeightFunction, WeightSystem, WeightVec};

fn elementary(d: usize, i: usize, j: usize, v: i64) -> UniMatrix {
    UniMatrix::elementary(d, i, j, BigInt::from(v))
}

fn heisenberg_xyz(z_power: i64) -> GroupSpec {
    GroupSpec::unitriangular(3, vec![elementary(3, 0, 1, 1), elementary(3, 1, 2, 1), elementary(3, 0, 2, z_power)], None)
        .unwrap()
}

fn u4() -> GroupSpec {
    GroupSpec::unitriangular(
        4,
        vec![elementary(4, 0, 1, 1), elementary(4, 1, 2, 1), elementary(4, 2, 3, 1), elementary(4, 0, 3, 1)],
        None,
    )
    .unwrap()
}

/// Image of `N(2,3)` in `U(4)`: `x = I + E12 + E34`, `y = I + E23`.
fn filiform_image() -> GroupSpec {
    let mut x = StrictUpper::zero(4);
    x.set(0, 1, BigInt::from(1));
    x.set(2, 3, BigInt::from(1));
    GroupSpec::unitriangular(4, vec![UniMatrix::from_nilpotent(x), elementary(4, 1, 2, 1)], Some(3)).unwrap()
}

fn alphas(xs: &[&str]) -> Vec<Alpha> {
    xs.iter().map(|s| Alpha::parse(s).unwrap()).collect()
}

fn hash_of<T: Hash>(x: &T) -> u64 {
    let mut h = DefaultHasher::new();
    x.hash(&mut h);
    h.finish()
}

fn commutator_tree(k: usize) -> impl Strategy<Value = FormalCommutator> {
    let leaf = (0..k, any::<bool>()).prop_map(|(i, neg)| FormalCommutator::leaf(if neg { Letter::neg(i) } else { Letter::pos(i) }));
    leaf.prop_recursive(4, 16, 2, |inner| (inner.clone(), inner).prop_map(|(a, b)| FormalCommutator::bracket(&a, &b)))
}

fn weight_vec(dim: usize) -> impl Strategy<Value = WeightVec> {
    (1i64..=12, 1i64..=4, -3i64..=3).prop_map(move |(p, q, l)| {
        let mut c = vec![rat(p, q)];
        if dim == 2 {
            c.push(int(l));
        }
        WeightVec::new(c).unwrap()
    })
}

fn weight_system(k: usize, dim: usize) -> impl Strategy<Value = WeightSystem> {
    prop::collection::vec(weight_vec(dim), k).prop_map(|w| WeightSystem::new(w).unwrap())
}

// Commutators

#[test]
fn involution_pairs_every_formal_commutator() {
    for (k, len) in [(1, 4), (2, 4), (3, 3)] {
        for c in enumerate_commutators(k, len).unwrap() {
            let j = c.involution();
            assert_eq!(j.involution(), c);
            assert!(c.is_canonical() && !j.is_canonical(), "{c}");
        }
        // Outside the enumeration only the J-fixed brackets [a, a] lack a canonical partner.
        for c in all_formal_commutators(k, len).into_iter().flatten() {
            let j = c.involution();
            assert_eq!(j.involution(), c);
            if j == c {
                assert!(c.canonical().is_none() && !c.is_canonical(), "{c}");
            } else {
                assert!(c.is_canonical() ^ j.is_canonical(), "{c}");
            }
        }
    }
}

#[test]
fn enumeration_is_deterministic() {
    for (k, len) in [(2, 4), (3, 3)] {
        assert_eq!(enumerate_commutators(k, len).unwrap(), enumerate_commutators(k, len).unwrap());
    }
}

proptest! {
    #[test]
    fn bracket_word_is_the_reduced_commutator_word(a in commutator_tree(3), b in commutator_tree(3)) {
        let (wa, wb) = (a.group_word(), b.group_word());
        let mut expected = invert_word(&wa);
        expected.extend(invert_word(&wb));
        expected.extend(wa);
        expected.extend(wb);
        let c = FormalCommutator::bracket(&a, &b);
        prop_assert_eq!(free_reduce(&c.group_word()), free_reduce(&expected));
    }

    #[test]
    fn build_word_has_commutator_length(c in commutator_tree(3)) {
        prop_assert_eq!(c.build_word().len(), c.len());
    }
}

// Weights

proptest! {
    #[test]
    fn weights_add_and_grow(w in weight_system(3, 2), a in commutator_tree(3), b in commutator_tree(3)) {
        let (wa, wb) = (w.weight_of(&a).unwrap(), w.weight_of(&b).unwrap());
        let wc = w.weight_of(&FormalCommutator::bracket(&a, &b)).unwrap();
        prop_assert_eq!(&wc, &(&wa + &wb));
        prop_assert!(wc > wa && wc > wb);
    }

    #[test]
    fn value_sequence_matches_multiset_sums(k in 1usize..=3, max_len in 1usize..=5, dim in 1usize..=2, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ws: Vec<WeightVec> = (0..k)
            .map(|_| {
                let mut c = vec![rat(rng.gen_range(1..=9), rng.gen_range(1..=4))];
                if dim == 2 {
                    c.push(int(rng.gen_range(-2..=2)));
                }
                WeightVec::new(c).unwrap()
            })
            .collect();
        // Every multiset of size m >= 1 is the letter content of some length-m commutator.
        let mut sums: BTreeSet<WeightVec> = BTreeSet::new();
        let mut frontier: Vec<(usize, WeightVec)> = ws.iter().cloned().enumerate().collect();
        for _ in 1..=max_len {
            let mut next = Vec::new();
            for (last, s) in &frontier {
                sums.insert(s.clone());
                for (i, w) in ws.iter().enumerate().skip(*last) {
                    next.push((i, s + w));
                }
            }
            frontier = next;
        }
        let seq = WeightSystem::new(ws).unwrap().value_sequence(max_len);
        prop_assert!(seq.windows(2).all(|p| p[0] < p[1]));
        prop_assert_eq!(seq, sums.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn lexicographic_order_is_eventual_pointwise_order(a in weight_vec(2), b in weight_vec(2)) {
        let (fa, fb) = (WeightFunction::from_weight(&a).unwrap(), WeightFunction::from_weight(&b).unwrap());
        // At r = 1e200, ln r ≈ 460 dwarfs any log-power gap with |v2| <= 3.
        let gap = fa.ln_eval(1e200) - fb.ln_eval(1e200);
        match a.cmp(&b) {
            std::cmp::Ordering::Less => prop_assert!(gap < 0.0),
            std::cmp::Ordering::Greater => prop_assert!(gap > 0.0),
            std::cmp::Ordering::Equal => prop_assert!(gap.abs() < 1e-9),
        }
    }
}

// Group backends

fn zd_element() -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(-1000i64..1000, 3).prop_map(|v| GroupElement::Zd(v.into_iter().map(BigInt::from).collect()))
}

fn uni_element(d: usize) -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(-50i64..50, d * (d - 1) / 2).prop_map(move |v| {
        GroupElement::Unitriangular(UniMatrix::from_nilpotent(StrictUpper::from_packed(d, v.into_iter().map(BigInt::from).collect())))
    })
}

fn hall_element(k: usize, class: usize) -> impl Strategy<Value = GroupElement> {
    let g = FreeNilpotent::get(k, class).unwrap();
    prop::collection::vec(-20i64..20, g.rank())
        .prop_map(move |v| GroupElement::Hall(g.normal_form(v.into_iter().map(BigInt::from).collect()).unwrap()))
}

fn check_axioms(a: &GroupElement, b: &GroupElement, c: &GroupElement) -> Result<(), TestCaseError> {
    let left = a.mul(b).unwrap().mul(c).unwrap();
    let right = a.mul(&b.mul(c).unwrap()).unwrap();
    prop_assert_eq!(&left, &right);
    prop_assert_eq!(hash_of(&left), hash_of(&right));
    let e = a.identity_like();
    prop_assert_eq!(&a.mul(&e).unwrap(), a);
    prop_assert_eq!(&e.mul(a).unwrap(), a);
    prop_assert!(a.mul(&a.inverse()).unwrap().is_identity());
    prop_assert!(a.inverse().mul(a).unwrap().is_identity());
    prop_assert_eq!(a.pow(&BigInt::from(3)), a.mul(a).unwrap().mul(a).unwrap());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zd_axioms(a in zd_element(), b in zd_element(), c in zd_element()) {
        check_axioms(&a, &b, &c)?;
    }

    #[test]
    fn unitriangular_axioms(a in uni_element(4), b in uni_element(4), c in uni_element(4)) {
        check_axioms(&a, &b, &c)?;
    }

    #[test]
    fn hall_axioms(a in hall_element(2, 3), b in hall_element(2, 3), c in hall_element(2, 3)) {
        check_axioms(&a, &b, &c)?;
    }

    #[test]
    fn u3_brackets_of_length_three_vanish(a in uni_element(3), b in uni_element(3), c in uni_element(3)) {
        prop_assert!(a.bracket(&b).unwrap().bracket(&c).unwrap().is_identity());
        prop_assert!(c.bracket(&a.bracket(&b).unwrap()).unwrap().is_identity());
    }

    #[test]
    fn u4_brackets_of_length_four_vanish(a in uni_element(4), b in uni_element(4), c in uni_element(4), d in uni_element(4)) {
        let abc = a.bracket(&b).unwrap().bracket(&c).unwrap();
        prop_assert!(abc.bracket(&d).unwrap().is_identity());
        prop_assert!(d.bracket(&abc).unwrap().is_identity());
    }

    #[test]
    fn projection_is_a_homomorphism(a in hall_element(2, 3), b in hall_element(2, 3), c in hall_element(2, 2), d in hall_element(2, 2)) {
        let project = |g: &GroupElement, target: &GroupSpec| match g {
            GroupElement::Hall(nf) => project_hall_to_matrix(nf, target).unwrap(),
            _ => unreachable!(),
        };
        let fil = filiform_image();
        prop_assert_eq!(project(&a.mul(&b).unwrap(), &fil), project(&a, &fil).mul(&project(&b, &fil)).unwrap());
        let heis = GroupSpec::upper_unitriangular(3).unwrap();
        prop_assert_eq!(project(&c.mul(&d).unwrap(), &heis), project(&c, &heis).mul(&project(&d, &heis)).unwrap());
    }
}

// Collection

fn random_letters(rng: &mut ChaCha8Rng, k: usize, len: usize) -> Vec<Letter> {
    (0..len)
        .map(|_| {
            let i = rng.gen_range(0..k);
            if rng.gen_bool(0.5) {
                Letter::pos(i)
            } else {
                Letter::neg(i)
            }
        })
        .collect()
}

#[test]
fn collection_commutes_with_projection_into_quotients() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC011EC7);
    for (class, target) in [(2, GroupSpec::upper_unitriangular(3).unwrap()), (3, filiform_image())] {
        let g = FreeNilpotent::get(2, class).unwrap();
        for _ in 0..1000 {
            let len = rng.gen_range(0..=24);
            let letters = random_letters(&mut rng, 2, len);
            let nf = collect(&g, &Word::from_letters(&letters)).unwrap();
            assert_eq!(project_hall_to_matrix(&nf, &target).unwrap(), target.eval_word(&letters).unwrap(), "{letters:?}");
            assert_eq!(collect(&g, &normal_form_word(&nf)).unwrap(), nf);
        }
    }
}

fn mobius(n: u64) -> i64 {
    let (mut n, mut mu, mut p) = (n, 1, 2);
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        -mu
    } else {
        mu
    }
}

#[test]
fn hall_bases_have_witt_counts() {
    for k in 1..=3usize {
        for class in 1..=5usize {
            let basis = hall_basis(k, class);
            for m in 1..=class {
                let sum: i64 = (1..=m as u64).filter(|d| (m as u64).is_multiple_of(*d)).map(|d| mobius(d) * (k as i64).pow((m as u64 / d) as u32)).sum();
                let want = (sum / m as i64) as usize;
                assert_eq!(basis.iter().filter(|c| c.len() == m).count(), want, "k={k} m={m}");
                assert_eq!(witt_number(k as u64, m as u64) as usize, want);
            }
        }
    }
}

#[test]
fn collected_exponents_stay_within_the_degree_box() {
    // With unit weights F_c(r) = r^{|c|}; a word using each generator at most r times
    // collects to |x_i| <= (C r)^{|c_i|}.
    let g = FreeNilpotent::get(2, 3).unwrap();
    let lens: Vec<usize> = g.basis().iter().map(|c| c.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xDE6);
    let mut worst: Vec<f64> = Vec::new();
    for r in [2usize, 4, 8, 16, 32] {
        let mut ratio: f64 = 0.0;
        for _ in 0..20 {
            let mut letters = Vec::new();
            for i in 0..2 {
                for _ in 0..rng.gen_range(0..=r) {
                    letters.push(if rng.gen_bool(0.5) { Letter::pos(i) } else { Letter::neg(i) });
                }
            }
            for i in (1..letters.len()).rev() {
                letters.swap(i, rng.gen_range(0..=i));
            }
            let nf = collect(&g, &Word::from_letters(&letters)).unwrap();
            for (x, &l) in nf.exponents.iter().zip(&lens) {
                let x = x.abs().to_f64().unwrap();
                ratio = ratio.max(x.powf(1.0 / l as f64) / r as f64);
            }
        }
        worst.push(ratio);
    }
    assert!(worst.iter().all(|&c| c <= 2.0), "{worst:?}");
}

// Filtrations

fn cases() -> Vec<(&'static str, GroupSpec, WeightSystem)> {
    let u4_alpha = weights_from_alpha(&alphas(&["1", "2", "5", "1/3"])).unwrap();
    vec![
        ("heisenberg", heisenberg_xyz(5), WeightSystem::from_scalars(&[int(1), rat(3, 2), int(3)]).unwrap()),
        (
            "heisenberg-gamma",
            heisenberg_xyz(1),
            WeightSystem::new(vec![
                WeightVec::new(vec![rat(3, 2), int(0)]).unwrap(),
                WeightVec::new(vec![int(2), int(1)]).unwrap(),
                WeightVec::new(vec![int(3), int(0)]).unwrap(),
            ])
            .unwrap(),
        ),
        ("u4-power", u4(), u4_alpha.power),
        ("u4-log", u4(), u4_alpha.log_corrected.weights),
        ("n23", GroupSpec::free_nilpotent(2, 3).unwrap(), WeightSystem::from_scalars(&[int(1), rat(3, 2)]).unwrap()),
        (
            "zd",
            GroupSpec::zd_from_i64(&[vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0], vec![0, 0, 2]]).unwrap(),
            WeightSystem::from_scalars(&[int(1), rat(1, 2), int(2), rat(5, 3)]).unwrap(),
        ),
    ]
}

fn contains_all(big: &nilwalk::lattice::IntEchelon, small: &nilwalk::lattice::IntEchelon) -> bool {
    small.rows().all(|r| big.contains(r))
}

#[test]
fn levels_are_nested_and_ranks_are_dimension_drops() {
    for (name, spec, w) in cases() {
        let r = filtration(&spec, &w).unwrap();
        let n = r.num_levels();
        for j in 1..=n {
            let next = if j < n { r.levels[j].lie_dim } else { 0 };
            assert!(r.levels[j - 1].lie_dim >= next, "{name}");
            assert_eq!(r.levels[j - 1].rank, r.levels[j - 1].lie_dim - next, "{name} level {j}");
            if j < n {
                assert!(contains_all(r.level_algebra(j), r.level_algebra(j + 1)), "{name} level {j}");
            }
        }
        assert_eq!(r.ranks().iter().sum::<usize>(), r.hirsch_length, "{name}");
        assert!(r.d_components.iter().all(|d| *d >= Rational::zero()));
    }
}

#[test]
fn brackets_with_generators_drop_a_level() {
    for (name, spec, w) in cases() {
        let r = filtration(&spec, &w).unwrap();
        for (j, level) in r.levels.iter().enumerate() {
            for c in &level.generating_commutators {
                let h = spec.eval_commutator(c).unwrap();
                for g in spec.generators() {
                    let b = g.bracket(&h).unwrap();
                    if b.is_identity() {
                        continue;
                    }
                    let v = spec.log_primitive(&b).unwrap();
                    assert!(j + 1 < r.num_levels() && r.level_algebra(j + 2).contains(&v), "{name}: [{g:?}, {c}] escapes level {}", j + 2);
                }
            }
        }
    }
}

#[test]
fn equal_weights_give_the_lower_central_series() {
    let v = rat(3, 2);
    for spec in [heisenberg_xyz(1), u4(), GroupSpec::free_nilpotent(2, 3).unwrap(), GroupSpec::upper_unitriangular(4).unwrap()] {
        let w = WeightSystem::uniform(spec.num_generators(), v.clone()).unwrap();
        let r = filtration(&spec, &w).unwrap();
        for (j, l) in r.levels.iter().enumerate() {
            assert_eq!(l.weight, WeightVec::scalar(&v * int(j as i64 + 1)).unwrap());
        }
        assert_eq!(r.d_components, vec![&v * lower_central_d(&spec).unwrap()]);
    }
}

fn restrict(spec: &GroupSpec, keep: &[usize]) -> GroupSpec {
    let gens: Vec<&GroupElement> = keep.iter().map(|&i| &spec.generators()[i]).collect();
    match gens[0] {
        GroupElement::Zd(v) => GroupSpec::zd(
            v.len(),
            gens.iter().map(|g| if let GroupElement::Zd(v) = g { v.clone() } else { unreachable!() }).collect(),
        )
        .unwrap(),
        GroupElement::Unitriangular(m) => GroupSpec::unitriangular(
            m.d(),
            gens.iter().map(|g| if let GroupElement::Unitriangular(m) = g { m.clone() } else { unreachable!() }).collect(),
            None,
        )
        .unwrap(),
        GroupElement::Hall(_) => unreachable!("free nilpotent generators are all core"),
    }
}

fn nonzero(r: &FiltrationReport) -> Vec<(WeightVec, usize)> {
    r.nonzero_ranks()
}

#[test]
fn deleting_non_core_generators_changes_nothing() {
    let mut dropped = 0;
    for (name, spec, w) in cases() {
        let r = filtration(&spec, &w).unwrap();
        if r.core.len() == spec.num_generators() {
            continue;
        }
        let sub = restrict(&spec, &r.core);
        let sw = WeightSystem::new(r.core.iter().map(|&i| w.weights()[i].clone()).collect()).unwrap();
        let s = filtration(&sub, &sw).unwrap();
        assert_eq!(nonzero(&s), nonzero(&r), "{name}");
        assert_eq!(s.d_components, r.d_components, "{name}");
        dropped += spec.num_generators() - r.core.len();
    }
    assert!(dropped >= 2, "the cases should exercise non-core generators");
}
