use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::OrchestratorError;

/// Arithmetic mean and sample SD (n - 1 denominator; 0 for a single value).
pub fn aggregate_replicates(angles: &[f64]) -> Result<(f64, f64), OrchestratorError> {
    if angles.is_empty() {
        return Err(OrchestratorError::EmptyInput);
    }
    let n = angles.len() as f64;
    let mean = angles.iter().sum::<f64>() / n;
    if angles.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = angles.iter().map(|a| (a - mean) * (a - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTest {
    /// Larger variance over smaller, always >= 1.
    pub f: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p_two_sided: f64,
}

/// Two-sided F-test for equal variances from two sample SDs.
pub fn f_test_variances(sd1: f64, n1: usize, sd2: f64, n2: usize) -> Result<FTest, OrchestratorError> {
    if n1 < 2 || n2 < 2 || !(sd1 > 0.0 && sd1.is_finite()) || !(sd2 > 0.0 && sd2.is_finite()) {
        return Err(OrchestratorError::InvalidSampleSize);
    }
    let (v1, v2) = (sd1 * sd1, sd2 * sd2);
    let ((big, n_big), (small, n_small)) = if v1 >= v2 { ((v1, n1), (v2, n2)) } else { ((v2, n2), (v1, n1)) };
    let (df_num, df_den) = ((n_big - 1) as f64, (n_small - 1) as f64);
    let f = big / small;
    let dist = FisherSnedecor::new(df_num, df_den).map_err(|_| OrchestratorError::InvalidSampleSize)?;
    let p_two_sided = (2.0 * dist.sf(f)).min(1.0);
    Ok(FTest { f, df_num, df_den, p_two_sided })
}
