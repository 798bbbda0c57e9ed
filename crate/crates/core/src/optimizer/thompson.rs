use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::{cholesky_with_jitter, Matrix};
use super::{GpState, OptimizerError, SearchSpace};
use crate::Real;

/// Diagonal jitter added before factoring a posterior covariance.
pub const SAMPLE_JITTER: f64 = 1e-9;
/// Largest jitter tried when the covariance is numerically indefinite.
pub const MAX_SAMPLE_JITTER: f64 = 1e-4;

/// Draws one joint sample `mean + L xi` and returns the position of its maximum; ties go
/// to the lowest position.
pub fn sample_argmax<T: Real>(mean: &[T], cov: &Matrix<T>, rng: &mut impl Rng) -> Result<usize, OptimizerError>
where
    StandardNormal: Distribution<T>,
{
    if mean.is_empty() {
        return Err(OptimizerError::SpaceExhausted);
    }
    let (chol, _) = cholesky_with_jitter(cov, T::lit(SAMPLE_JITTER), T::lit(MAX_SAMPLE_JITTER))
        .ok_or(OptimizerError::SingularCovariance)?;
    let xi: Vec<T> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
    let draw = chol.mul_lower(&xi);
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (i, (&m, &d)) in mean.iter().zip(&draw).enumerate() {
        let v = m + d;
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    Ok(best)
}

/// Thompson sampling over the unmeasured candidates of `space`: one joint posterior draw,
/// then its argmax. Returns a candidate index.
pub fn thompson_recommend<T: Real>(
    gp: &GpState<T>,
    space: &SearchSpace,
    rng: &mut impl Rng,
) -> Result<usize, OptimizerError>
where
    StandardNormal: Distribution<T>,
{
    let pool = space.unmeasured();
    if pool.is_empty() {
        return Err(OptimizerError::SpaceExhausted);
    }
    let qs: Vec<Vec<T>> = pool.iter().map(|&i| space.unit_point(i).into_iter().map(T::lit).collect()).collect();
    // Standardized units: the argmax is invariant to the positive affine rescaling.
    let (mean, cov) = gp.posterior_standardized(&qs);
    Ok(pool[sample_argmax(&mean, &cov, rng)?])
}
