//! Random walks driven by `μ_{S,a}` or radial laws, and Monte Carlo estimates of `μ^{(2n)}(e)`.

pub mod convolution;
pub mod engine;
pub mod law;
pub mod radial;
pub mod regression;
pub mod rng;

pub use convolution::{exact_convolution, ConvolutionTable};
pub use engine::{collision_estimate, CollisionEstimate, EndpointKey, SimOptions, StepSource, Walk};
pub use law::{MagnitudeLaw, Power, StableLawSpec, DEFAULT_CUTOFF};
pub use radial::RadialSpec;
pub use regression::{fit_exponent, FitModel, FitPoint, RegressionResult};

use crate::error::{Error, Result};

/// Estimates over a horizon grid. Stops early when the deadline in `opts` passes and reports
/// whether the series was cut short.
pub fn collision_series(
    walk: &Walk,
    horizons: &[u64],
    samples: usize,
    opts: &SimOptions,
) -> Result<(Vec<CollisionEstimate>, bool)> {
    let mut out = Vec::with_capacity(horizons.len());
    for &n in horizons {
        match collision_estimate(walk, n, samples, opts) {
            Ok(e) => out.push(e),
            Err(Error::ResourceLimit(_)) if opts.deadline.is_some_and(|t| std::time::Instant::now() >= t) => {
                return Ok((out, true));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, false))
}

/// Regression points on the step axis `2n`, the number of steps in `μ^{(2n)}(e)`.
pub fn fit_points(estimates: &[CollisionEstimate]) -> Vec<FitPoint> {
    estimates
        .iter()
        .map(|e| FitPoint { n: 2.0 * e.n as f64, estimate: e.estimate, stderr: e.stderr })
        .collect()
}
