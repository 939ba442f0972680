//! Perron root of non-negative integer matrices given as weighted edge lists.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("power iteration did not converge after {iterations} iterations (bracket [{lower}, {upper}])")]
pub struct NonConvergence {
    pub iterations: usize,
    pub lower: f64,
    pub upper: f64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Spectral radius of an irreducible non-negative matrix on `n` vertices.
///
/// Iterates on `A + I`, which is primitive whenever `A` is irreducible, so the
/// iteration converges even for periodic components. Convergence is judged by
/// the Collatz–Wielandt bracket `min (Bx)_i/x_i ≤ ρ(B) ≤ max (Bx)_i/x_i`.
/// `edges` holds `(from, to, multiplicity)`. The start vector is all ones.
pub fn perron_root(
    n: usize,
    edges: &[(usize, usize, u32)],
    tolerance: f64,
    max_iterations: usize,
) -> Result<f64, NonConvergence> {
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0f64; n];
    let mut y = vec![0.0f64; n];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    for _ in 0..max_iterations {
        y.copy_from_slice(&x);
        for &(from, to, mult) in edges {
            y[from] += mult as f64 * x[to];
        }
        lower = f64::INFINITY;
        upper = 0.0f64;
        for (yi, xi) in y.iter().zip(&x) {
            let q = yi / xi;
            lower = lower.min(q);
            upper = upper.max(q);
        }
        if upper - lower <= tolerance * upper {
            return Ok(0.5 * (lower + upper) - 1.0);
        }
        let scale = y.iter().cloned().fold(0.0, f64::max);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / scale;
        }
    }
    Err(NonConvergence {
        iterations: max_iterations,
        lower: lower - 1.0,
        upper: upper - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_self_loop_is_exactly_one() {
        let r = perron_root(1, &[(0, 0, 1)], DEFAULT_TOLERANCE, 10).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn periodic_cycle() {
        // 3-cycle: eigenvalues are cube roots of unity, radius 1
        let e = [(0, 1, 1), (1, 2, 1), (2, 0, 1)];
        let r = perron_root(3, &e, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_ratio() {
        // [[1,1],[1,0]]
        let e = [(0, 0, 1), (0, 1, 1), (1, 0, 1)];
        let r = perron_root(2, &e, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS).unwrap();
        assert!((r - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn multiplicities_count() {
        let r = perron_root(1, &[(0, 0, 3)], DEFAULT_TOLERANCE, 10).unwrap();
        assert_eq!(r, 3.0);
    }

    #[test]
    fn reports_non_convergence() {
        let e = [(0, 0, 1), (0, 1, 1), (1, 0, 1)];
        let err = perron_root(2, &e, 1e-15, 1).unwrap_err();
        assert_eq!(err.iterations, 1);
        assert!(err.lower <= err.upper);
    }
}
