//! Norm-radial laws `ν_γ(g) ∝ (1+‖g‖)^{-γ} / V(‖g‖)` on `Z^d` with the word norm of the
//! standard basis, which is the `ℓ¹` norm.
//!
//! The radius is drawn from the shell law `S(r) / ((1+r)^γ V(r))` with the same head/tail sampler
//! as the stable laws, then a uniform lattice point of that `ℓ¹` sphere is chosen.

use std::sync::Arc;

use num_bigint::{BigInt, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use super::law::{Magnitude, MagnitudeLaw, ShellMass, DEFAULT_CUTOFF};
use crate::error::{invalid, Error, Result};
use crate::group::{Backend, GroupElement, GroupSpec};

/// Shell masses for `ν_γ`; the envelope constant is `d` because `r S_d(r) <= d V_d(r)`.
#[derive(Clone, Debug)]
pub struct RadialMass {
    d: usize,
    gamma: f64,
}

fn ln_choose(x: f64, k: usize) -> f64 {
    (0..k).map(|i| (x - i as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln` of the number of points of `Z^d` at `ℓ¹` distance exactly `r`.
pub fn ln_sphere_size(d: usize, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let kmax = if r < d as f64 { r as usize } else { d };
    let terms: Vec<f64> = (1..=kmax)
        .map(|k| k as f64 * std::f64::consts::LN_2 + ln_choose(d as f64, k) + ln_choose(r - 1.0, k - 1))
        .collect();
    log_sum_exp(&terms)
}

/// `ln` of the number of points of `Z^d` with `ℓ¹` norm at most `r`.
pub fn ln_ball_size(d: usize, r: f64) -> f64 {
    let kmax = if r < d as f64 { r as usize } else { d };
    let terms: Vec<f64> = (0..=kmax)
        .map(|k| k as f64 * std::f64::consts::LN_2 + ln_choose(d as f64, k) + ln_choose(r, k))
        .collect();
    log_sum_exp(&terms)
}

impl ShellMass for RadialMass {
    fn ln_mass(&self, r: f64) -> f64 {
        ln_sphere_size(self.d, r) - self.gamma * r.ln_1p() - ln_ball_size(self.d, r)
    }

    fn beta(&self) -> f64 {
        self.gamma
    }

    fn ln_bound(&self) -> f64 {
        (self.d as f64).ln()
    }
}

/// A radial step: a vector of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RadialStep {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

#[derive(Clone, Debug)]
pub struct RadialSpec {
    d: usize,
    gamma: f64,
    shells: Arc<MagnitudeLaw>,
}

impl RadialSpec {
    pub fn new(d: usize, gamma: f64) -> Result<RadialSpec> {
        Self::with_cutoff(d, gamma, DEFAULT_CUTOFF)
    }

    pub fn with_cutoff(d: usize, gamma: f64, cutoff: u64) -> Result<RadialSpec> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return invalid(format!("gamma must lie strictly between 0 and 2, got {gamma}"));
        }
        if gamma < super::law::MIN_ALPHA {
            return invalid(format!("gamma {gamma} is too small to sample"));
        }
        if d == 0 || d > 16 {
            return invalid(format!("radial laws need 1 <= d <= 16, got {d}"));
        }
        let shells = Arc::new(MagnitudeLaw::new(Arc::new(RadialMass { d, gamma }), cutoff)?);
        Ok(RadialSpec { d, gamma, shells })
    }

    /// Radial law on a `Z^d` group generated by its standard basis.
    pub fn for_group(group: &GroupSpec, gamma: f64) -> Result<RadialSpec> {
        let Backend::Zd { d } = group.backend() else {
            return Err(Error::Unsupported(format!(
                "radial laws are implemented for Z^d only, not the {} backend",
                group.backend_name()
            )));
        };
        let standard = group.num_generators() == *d
            && group.generators().iter().enumerate().all(|(i, g)| match g {
                GroupElement::Zd(v) => v.iter().enumerate().all(|(j, x)| *x == BigInt::from((i == j) as i32)),
                _ => false,
            });
        if !standard {
            return Err(Error::Unsupported("radial laws need the standard basis of Z^d as generators".into()));
        }
        RadialSpec::new(*d, gamma)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn shell_law(&self) -> &MagnitudeLaw {
        &self.shells
    }

    /// `ν_γ(x)`.
    pub fn pmf(&self, x: &[i64]) -> f64 {
        let r: u64 = x.iter().map(|v| v.unsigned_abs()).sum();
        self.shells.pmf(r) / ln_sphere_size(self.d, r as f64).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RadialStep {
        let r = self.shells.sample(rng);
        sphere_point(self.d, &r, rng)
    }
}

/// A uniform point of `{x ∈ Z^d : |x|_1 = r}`.
fn sphere_point<R: Rng + ?Sized>(d: usize, r: &Magnitude, rng: &mut R) -> RadialStep {
    if r.is_zero() {
        return RadialStep::Small(vec![0; d]);
    }
    let rf = r.to_f64();
    // Number of nonzero coordinates: weight 2^k C(d,k) C(r-1,k-1).
    let kmax = if rf < d as f64 { rf as usize } else { d };
    let lw: Vec<f64> = (1..=kmax)
        .map(|k| k as f64 * std::f64::consts::LN_2 + ln_choose(d as f64, k) + ln_choose(rf - 1.0, k - 1))
        .collect();
    let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|x| (x - top).exp()).collect();
    let mut u = rng.gen::<f64>() * w.iter().sum::<f64>();
    let mut k = kmax;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            k = i + 1;
            break;
        }
        u -= wi;
    }
    let mut coords: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.gen_range(i..d);
        coords.swap(i, j);
    }
    match r {
        Magnitude::Small(rv) if *rv <= i128::MAX as u128 => {
            let rv = *rv;
            let mut cuts: Vec<u128> = Vec::with_capacity(k + 1);
            while cuts.len() < k - 1 {
                let c = rng.gen_range(1..rv);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.push(0);
            cuts.push(rv);
            cuts.sort_unstable();
            let mut out = vec![0i128; d];
            for i in 0..k {
                let part = (cuts[i + 1] - cuts[i]) as i128;
                out[coords[i]] = if rng.gen::<bool>() { -part } else { part };
            }
            RadialStep::Small(out)
        }
        _ => {
            let rv = r.to_bigint();
            let mut cuts: Vec<BigInt> = Vec::with_capacity(k + 1);
            while cuts.len() < k - 1 {
                let c = rng.gen_bigint_range(&BigInt::one(), &rv);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.push(BigInt::zero());
            cuts.push(rv);
            cuts.sort();
            let mut out = vec![BigInt::zero(); d];
            for i in 0..k {
                let part = &cuts[i + 1] - &cuts[i];
                out[coords[i]] = if rng.gen::<bool>() { -part } else { part };
            }
            RadialStep::Big(out)
        }
    }
}

impl RadialStep {
    pub fn to_bigints(&self) -> Vec<BigInt> {
        match self {
            RadialStep::Small(v) => v.iter().map(|x| BigInt::from(*x)).collect(),
            RadialStep::Big(v) => v.clone(),
        }
    }

    pub fn l1(&self) -> f64 {
        match self {
            RadialStep::Small(v) => v.iter().map(|x| x.unsigned_abs() as f64).sum(),
            RadialStep::Big(v) => v.iter().map(|x| x.magnitude().to_f64().unwrap_or(f64::INFINITY)).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walker::rng::stream;
    use std::collections::HashMap;

    fn brute_sphere(d: usize, r: i64) -> usize {
        let mut count = 0;
        let side = (2 * r + 1) as usize;
        for idx in 0..side.pow(d as u32) {
            let mut t = idx;
            let mut s = 0;
            for _ in 0..d {
                s += ((t % side) as i64 - r).abs();
                t /= side;
            }
            count += (s == r) as usize;
        }
        count
    }

    #[test]
    fn sphere_sizes_match_enumeration() {
        for d in 1..=3 {
            for r in 0..6 {
                let got = ln_sphere_size(d, r as f64).exp();
                assert!((got - brute_sphere(d, r) as f64).abs() < 1e-9, "d={d} r={r}");
                let ball: usize = (0..=r).map(|s| brute_sphere(d, s)).sum();
                assert!((ln_ball_size(d, r as f64).exp() - ball as f64).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn envelope_constant_holds() {
        for d in 1..=6 {
            let m = RadialMass { d, gamma: 1.0 };
            for r in (1..200).chain([1_000, 100_000, 10_000_000]) {
                let r = r as f64;
                assert!(m.ln_mass(r) <= m.ln_bound() - 2.0 * r.ln() + 1e-12, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn gamma_domain_is_open() {
        assert!(RadialSpec::new(2, 2.0).is_err());
        assert!(RadialSpec::new(2, 0.0).is_err());
        assert!(RadialSpec::new(2, 1.999).is_ok());
    }

    #[test]
    fn pmf_sums_to_one_and_sampler_agrees() {
        let spec = RadialSpec::new(2, 1.0).unwrap();
        let shells = spec.shell_law();
        let head: f64 = (0..=3000u64).map(|r| shells.pmf(r)).sum();
        assert!((head + shells.survival(3000) - 1.0).abs() < 1e-9);
        let on_two: f64 = (-2i64..=2).flat_map(|x| {
            let rest = 2 - x.abs();
            if rest == 0 { vec![[x, 0]] } else { vec![[x, rest], [x, -rest]] }
        }).map(|p| spec.pmf(&p)).sum();
        assert!((on_two - shells.pmf(2)).abs() < 1e-15);

        let mut rng = stream(11, 0, 0);
        let mut counts: HashMap<(i128, i128), usize> = HashMap::new();
        let n = 200_000;
        for _ in 0..n {
            if let RadialStep::Small(v) = spec.sample(&mut rng) {
                if v[0].abs() + v[1].abs() <= 2 {
                    *counts.entry((v[0], v[1])).or_default() += 1;
                }
            }
        }
        for x in -2i64..=2 {
            for y in -2i64..=2 {
                if x.abs() + y.abs() > 2 {
                    continue;
                }
                let p = spec.pmf(&[x, y]);
                let c = *counts.get(&(x as i128, y as i128)).unwrap_or(&0) as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((c / n as f64 - p).abs() < 5.0 * se, "({x},{y}) {} vs {p}", c / n as f64);
            }
        }
    }

    #[test]
    fn sphere_points_have_the_right_norm() {
        let mut rng = stream(2, 0, 0);
        for r in [1u128, 2, 7, 1 << 70] {
            for _ in 0..50 {
                let p = sphere_point(3, &Magnitude::Small(r), &mut rng);
                assert_eq!(p.to_bigints().iter().map(|x| x.magnitude().clone()).sum::<num_bigint::BigUint>(), r.into());
            }
        }
        let big: BigInt = BigInt::from(5u8) << 200usize;
        let p = sphere_point(2, &Magnitude::Big(big.clone()), &mut rng);
        let norm: BigInt = p.to_bigints().iter().map(|x| BigInt::from(x.magnitude().clone())).sum();
        assert_eq!(norm, big);
    }

    #[test]
    fn non_standard_groups_are_rejected() {
        let g = GroupSpec::zd_from_i64(&[vec![2, 0], vec![0, 1]]).unwrap();
        assert!(RadialSpec::for_group(&g, 1.0).is_err());
        assert!(RadialSpec::for_group(&GroupSpec::zd_standard(2).unwrap(), 1.0).is_ok());
    }
}
