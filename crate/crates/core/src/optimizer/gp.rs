use serde::{Deserialize, Serialize};

use super::linalg::{Cholesky, Matrix};
use super::OptimizerError;
use crate::Real;

/// Matern 5/2 kernel hyperparameters, in units of the normalized targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper<T> {
    /// One length scale per input dimension.
    pub lengthscales: Vec<T>,
    pub signal_var: T,
    pub noise_var: T,
}

impl<T: Real> GpHyper<T> {
    pub fn isotropic(dim: usize, lengthscale: T, signal_var: T, noise_var: T) -> Self {
        Self { lengthscales: vec![lengthscale; dim], signal_var, noise_var }
    }

    /// Matern 5/2 covariance between two inputs.
    pub fn kernel(&self, a: &[T], b: &[T]) -> T {
        let r2 = a.iter().zip(b).zip(&self.lengthscales).fold(T::zero(), |s, ((&p, &q), &l)| {
            let d = (p - q) / l;
            s + d * d
        });
        let r = (T::lit(5.0) * r2).sqrt();
        self.signal_var * (T::one() + r + r * r / T::lit(3.0)) * (-r).exp()
    }
}

/// Candidate values for the marginal-likelihood grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid<T> {
    pub lengthscales: Vec<T>,
    pub signal_vars: Vec<T>,
    pub noise_vars: Vec<T>,
    /// After the isotropic search, sweep each dimension's length scale once.
    pub per_dimension: bool,
}

impl<T: Real> Default for HyperGrid<T> {
    fn default() -> Self {
        let v = |xs: &[f64]| xs.iter().map(|&x| T::lit(x)).collect();
        Self {
            lengthscales: v(&[0.05, 0.1, 0.2, 0.4, 0.7, 1.0, 2.0]),
            signal_vars: v(&[0.1, 0.3, 1.0, 2.0, 4.0]),
            noise_vars: v(&[1e-4, 1e-3, 1e-2, 0.05, 0.25]),
            per_dimension: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HyperPolicy<T> {
    Fixed(GpHyper<T>),
    Grid(HyperGrid<T>),
}

impl<T: Real> Default for HyperPolicy<T> {
    fn default() -> Self {
        Self::Grid(HyperGrid::default())
    }
}

/// Fitted Gaussian process. Targets are standardized internally; predictions are in the
/// original units.
#[derive(Debug, Clone)]
pub struct GpState<T> {
    pub hyper: GpHyper<T>,
    pub x: Vec<Vec<T>>,
    pub y: Vec<T>,
    /// Constant prior mean: the sample mean of `y`.
    pub y_mean: T,
    /// Standardization scale: sample SD of `y`, or 1 with fewer than two distinct values.
    pub y_scale: T,
    pub log_marginal_likelihood: T,
    chol: Cholesky<T>,
    alpha: Vec<T>,
}

struct Factored<T> {
    chol: Cholesky<T>,
    alpha: Vec<T>,
    lml: T,
}

fn factor<T: Real>(x: &[Vec<T>], z: &[T], h: &GpHyper<T>) -> Option<Factored<T>> {
    let n = x.len();
    let mut k = Matrix::from_fn(n, n, |i, j| h.kernel(&x[i], &x[j]));
    k.add_diagonal(h.noise_var);
    let chol = Cholesky::new(&k)?;
    let alpha = chol.solve(z);
    let fit = z.iter().zip(&alpha).fold(T::zero(), |s, (&a, &b)| s + a * b);
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let lml = -(fit + chol.log_det() + T::from_usize_lossy(n) * two_pi.ln()) / T::lit(2.0);
    lml.is_finite().then_some(Factored { chol, alpha, lml })
}

/// Fits a GP to `(x, y)` with inputs in the unit cube. Zero observations give the prior.
pub fn gp_fit<T: Real>(
    x: &[Vec<T>],
    y: &[T],
    dim: usize,
    policy: &HyperPolicy<T>,
) -> Result<GpState<T>, OptimizerError> {
    if x.len() != y.len() {
        return Err(OptimizerError::LengthMismatch { targets: y.len(), weights: x.len() });
    }
    if x.iter().any(|p| p.len() != dim) {
        return Err(OptimizerError::InvalidParameter(format!("training inputs must have {dim} coordinates")));
    }
    let n = y.len();
    let y_mean = if n == 0 { T::zero() } else { y.iter().fold(T::zero(), |s, &v| s + v) / T::from_usize_lossy(n) };
    let y_scale = if n >= 2 {
        let ss = y.iter().fold(T::zero(), |s, &v| s + (v - y_mean) * (v - y_mean));
        let sd = (ss / T::from_usize_lossy(n - 1)).sqrt();
        if sd > T::epsilon() * (T::one() + y_mean.abs()) * T::lit(16.0) {
            sd
        } else {
            T::one()
        }
    } else {
        T::one()
    };
    let z: Vec<T> = y.iter().map(|&v| (v - y_mean) / y_scale).collect();

    let (hyper, f) = match policy {
        HyperPolicy::Fixed(h) => {
            if h.lengthscales.len() != dim {
                return Err(OptimizerError::InvalidParameter("one length scale per dimension required".into()));
            }
            (h.clone(), factor(x, &z, h).ok_or(OptimizerError::SingularCovariance)?)
        }
        HyperPolicy::Grid(g) => grid_search(x, &z, dim, g)?,
    };
    Ok(GpState {
        hyper,
        x: x.to_vec(),
        y: y.to_vec(),
        y_mean,
        y_scale,
        log_marginal_likelihood: f.lml,
        chol: f.chol,
        alpha: f.alpha,
    })
}

fn grid_search<T: Real>(
    x: &[Vec<T>],
    z: &[T],
    dim: usize,
    g: &HyperGrid<T>,
) -> Result<(GpHyper<T>, Factored<T>), OptimizerError> {
    let mut best: Option<(GpHyper<T>, Factored<T>)> = None;
    let consider = |h: GpHyper<T>, best: &mut Option<(GpHyper<T>, Factored<T>)>| {
        if let Some(f) = factor(x, z, &h) {
            if best.as_ref().is_none_or(|(_, b)| f.lml > b.lml) {
                *best = Some((h, f));
            }
        }
    };
    for &l in &g.lengthscales {
        for &s in &g.signal_vars {
            for &nv in &g.noise_vars {
                consider(GpHyper::isotropic(dim, l, s, nv), &mut best);
            }
        }
    }
    if g.per_dimension && dim > 1 {
        for d in 0..dim {
            let Some((base, _)) = best.as_ref() else { break };
            let base = base.clone();
            for &l in &g.lengthscales {
                if l == base.lengthscales[d] {
                    continue;
                }
                let mut h = base.clone();
                h.lengthscales[d] = l;
                consider(h, &mut best);
            }
        }
    }
    best.ok_or(OptimizerError::SingularCovariance)
}

impl<T: Real> GpState<T> {
    pub fn dim(&self) -> usize {
        self.hyper.lengthscales.len()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Posterior mean and latent variance at one input.
    pub fn predict(&self, q: &[T]) -> (T, T) {
        let (m, c) = self.posterior_standardized(std::slice::from_ref(&q.to_vec()));
        (self.y_mean + self.y_scale * m[0], c.get(0, 0) * self.y_scale * self.y_scale)
    }

    /// Joint posterior mean and latent covariance at `qs`, in original units.
    pub fn predict_joint(&self, qs: &[Vec<T>]) -> (Vec<T>, Matrix<T>) {
        let (m, mut c) = self.posterior_standardized(qs);
        let s2 = self.y_scale * self.y_scale;
        c.data.iter_mut().for_each(|v| *v = *v * s2);
        (m.into_iter().map(|v| self.y_mean + self.y_scale * v).collect(), c)
    }

    /// Joint posterior of the standardized latent function.
    pub fn posterior_standardized(&self, qs: &[Vec<T>]) -> (Vec<T>, Matrix<T>) {
        let m = qs.len();
        let n = self.len();
        // Columns of V = L^-1 K(X, q).
        let v: Vec<Vec<T>> = qs
            .iter()
            .map(|q| {
                let k: Vec<T> = self.x.iter().map(|xi| self.hyper.kernel(xi, q)).collect();
                if n == 0 {
                    k
                } else {
                    self.chol.solve_lower(&k)
                }
            })
            .collect();
        let mean: Vec<T> = qs
            .iter()
            .map(|q| self.x.iter().zip(&self.alpha).fold(T::zero(), |s, (xi, &a)| s + self.hyper.kernel(xi, q) * a))
            .collect();
        let mut cov = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let kij = self.hyper.kernel(&qs[i], &qs[j]);
                let vv = v[i].iter().zip(&v[j]).fold(T::zero(), |s, (&a, &b)| s + a * b);
                let c = kij - vv;
                cov.set(i, j, c);
                cov.set(j, i, c);
            }
        }
        (mean, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_shape() {
        let h = GpHyper::isotropic(1, 0.5f64, 2.0, 0.0);
        assert_eq!(h.kernel(&[0.3], &[0.3]), 2.0);
        let r = 5f64.sqrt() * 0.2 / 0.5;
        let want = 2.0 * (1.0 + r + r * r / 3.0) * (-r).exp();
        assert!((h.kernel(&[0.1], &[0.3]) - want).abs() < 1e-15);
    }

    #[test]
    fn prior_without_data() {
        let h = GpHyper::isotropic(2, 0.3f64, 1.5, 0.0);
        let gp = gp_fit(&[], &[], 2, &HyperPolicy::Fixed(h)).unwrap();
        let (m, v) = gp.predict(&[0.2, 0.9]);
        assert_eq!(m, 0.0);
        assert!((v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_inputs_without_noise_are_singular() {
        let h = GpHyper::isotropic(1, 0.3f64, 1.0, 0.0);
        let x = vec![vec![0.5], vec![0.5]];
        assert!(matches!(gp_fit(&x, &[1.0, 2.0], 1, &HyperPolicy::Fixed(h)), Err(OptimizerError::SingularCovariance)));
    }

    #[test]
    fn grid_search_prefers_smooth_fit_for_smooth_data() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin()).collect();
        let gp = gp_fit(&x, &y, 1, &HyperPolicy::default()).unwrap();
        assert!(gp.hyper.lengthscales[0] >= 0.2, "{:?}", gp.hyper);
        let (m, _) = gp.predict(&[0.5]);
        assert!((m - 1.5f64.sin()).abs() < 0.05);
    }
}
