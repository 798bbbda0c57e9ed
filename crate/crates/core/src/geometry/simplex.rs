use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions<T> {
    /// Convergence threshold on the simplex diameter.
    pub tol: T,
    pub max_evals: usize,
}

impl<T: Real> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-6), max_evals: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead minimization with standard coefficients (1, 2, 0.5, 0.5). The initial
/// simplex is `x0` plus `steps[i]` along each axis. Non-finite objective values are
/// treated as +inf.
pub fn nelder_mead<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    x0: &[T],
    steps: &[T],
    opts: SimplexOptions<T>,
) -> SimplexResult<T> {
    let n = x0.len();
    assert_eq!(n, steps.len(), "one initial step per coordinate");
    let mut evals = 0usize;
    let mut eval = |x: &[T], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = x[i] + steps[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c = *c + xi;
            }
        }
        let nn = T::from_usize_lossy(n);
        centroid.iter_mut().for_each(|c| *c = *c / nn);
        let worst = simplex[n].clone();
        let along = |t: T| -> Vec<T> { centroid.iter().zip(&worst.0).map(|(&c, &w)| c + t * (c - w)).collect() };

        let xr = along(T::one());
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(two);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(half);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-half);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<T> = best.iter().zip(&vertex.0).map(|(&b, &v)| b + half * (v - b)).collect();
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    SimplexResult { x, value, evals, iterations, converged }
}

fn diameter<T: Real>(simplex: &[(Vec<T>, T)]) -> T {
    let mut d = T::zero();
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let s = a.0.iter().zip(&b.0).fold(T::zero(), |s, (&p, &q)| s + (p - q) * (p - q));
            d = d.max(s.sqrt());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let r = nelder_mead(
            |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.1, 0.1],
            SimplexOptions { tol: 1e-9, max_evals: 5000 },
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn budget_is_respected() {
        let r = nelder_mead(
            |x: &[f64]| x.iter().map(|v| v * v).sum(),
            &[3.0, -2.0, 1.0, 5.0],
            &[0.5; 4],
            SimplexOptions { tol: 0.0, max_evals: 100 },
        );
        assert!(!r.converged);
        assert!(r.evals <= 100 + 4 + 1);
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let r = nelder_mead(
            |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) },
            &[0.1],
            &[0.2],
            SimplexOptions::default(),
        );
        assert!((r.x[0] - 0.5).abs() < 1e-5);
    }
}
