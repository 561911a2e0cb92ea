//! Exact `n`-step distributions on `Z^d` by convolution of the truncated step law.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::law::StableLawSpec;
use crate::error::{invalid, Error, Result};

/// Distribution of the walk on the box `[-R, R]^d`, row-major with the first coordinate slowest.
#[derive(Clone, Debug)]
pub struct ConvolutionTable {
    d: usize,
    radius: i64,
    probs: Vec<f64>,
    tail_mass: f64,
}

impl ConvolutionTable {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn entries(&self) -> usize {
        self.probs.len()
    }

    /// Mass lost by truncating each step at `|m| <= T`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    fn index(&self, x: &[i64]) -> Option<usize> {
        let side = 2 * self.radius + 1;
        let mut idx = 0i64;
        for &c in x {
            if c.abs() > self.radius {
                return None;
            }
            idx = idx * side + c + self.radius;
        }
        Some(idx as usize)
    }

    pub fn prob(&self, x: &[i64]) -> f64 {
        assert_eq!(x.len(), self.d);
        self.index(x).map_or(0.0, |i| self.probs[i])
    }

    pub fn return_probability(&self) -> f64 {
        self.prob(&vec![0; self.d])
    }

    /// `Σ_x p(x)^2`, the collision probability of two independent copies.
    pub fn collision_sum(&self) -> f64 {
        self.probs.iter().map(|p| p * p).sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// The `n`-fold convolution of `μ_{S,a}` on `Z^d`, with each exponent truncated to `|m| <= truncation`.
///
/// `d = 1` uses an FFT; higher dimensions convolve directly on a dense box.
pub fn exact_convolution(
    generators: &[Vec<i64>],
    law: &StableLawSpec,
    n: usize,
    truncation: u64,
    max_entries: usize,
) -> Result<ConvolutionTable> {
    let k = generators.len();
    if k == 0 || k != law.k() {
        return invalid(format!("{} generators for {} alphas", k, law.k()));
    }
    let d = generators[0].len();
    if d == 0 || generators.iter().any(|g| g.len() != d) {
        return invalid("generators must be nonempty vectors of one dimension");
    }
    let t = truncation as i64;
    let mut steps: std::collections::BTreeMap<Vec<i64>, f64> = Default::default();
    let mut per_step_tail = 0.0;
    for (i, g) in generators.iter().enumerate() {
        per_step_tail += law.law(i).survival(truncation) / k as f64;
        for m in -t..=t {
            let p = law.pmf(i, m);
            if p > 0.0 {
                *steps.entry(g.iter().map(|x| x * m).collect()).or_default() += p / k as f64;
            }
        }
    }
    let reach = steps.keys().flat_map(|v| v.iter().map(|x| x.abs())).max().unwrap_or(0);
    let radius = reach
        .checked_mul(n as i64)
        .ok_or_else(|| Error::ResourceLimit("convolution box too large".into()))?;
    let side = (2 * radius + 1) as usize;
    let entries = (0..d).try_fold(1usize, |acc, _| acc.checked_mul(side));
    let entries = match entries {
        Some(e) if e <= max_entries => e,
        _ => {
            return Err(Error::ResourceLimit(format!(
                "convolution table of side {side} in dimension {d} exceeds {max_entries} entries"
            )))
        }
    };
    let tail_mass = -(n as f64 * (-per_step_tail).ln_1p()).exp_m1();
    let mut table = ConvolutionTable { d, radius, probs: vec![0.0; entries], tail_mass };
    if n == 0 {
        let o = table.index(&vec![0; d]).unwrap();
        table.probs[o] = 1.0;
        return Ok(table);
    }
    if d == 1 {
        let len = side.next_power_of_two();
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (v, p) in &steps {
            buf[v[0].rem_euclid(len as i64) as usize].re += p;
        }
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(len).process(&mut buf);
        for z in buf.iter_mut() {
            *z = z.powu(n as u32);
        }
        planner.plan_fft_inverse(len).process(&mut buf);
        for x in -radius..=radius {
            let z = buf[x.rem_euclid(len as i64) as usize];
            table.probs[(x + radius) as usize] = z.re / len as f64;
        }
        return Ok(table);
    }
    let strides: Vec<i64> = (0..d).map(|i| (side as i64).pow((d - 1 - i) as u32)).collect();
    let offsets: Vec<(i64, f64)> = steps
        .iter()
        .map(|(v, p)| (v.iter().zip(&strides).map(|(x, s)| x * s).sum(), *p))
        .collect();
    let origin = table.index(&vec![0; d]).unwrap();
    let mut cur = vec![0.0; entries];
    cur[origin] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; entries];
        for (i, &p) in cur.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(off, w) in &offsets {
                // The box has room for every partial sum, so indices never wrap.
                next[(i as i64 + off) as usize] += p * w;
            }
        }
        cur = next;
    }
    table.probs = cur;
    Ok(table)
}
