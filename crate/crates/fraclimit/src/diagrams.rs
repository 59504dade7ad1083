//! Moments of products of Hermite polynomials of jointly Gaussian variables.
//!
//! E[ prod_{l=1}^{p} H_q(X_l) ] equals a sum over "diagrams": perfect
//! matchings of a p x q vertex array in which no edge joins two vertices of
//! the same row, each edge contributing the correlation of the two rows it
//! connects. This module enumerates the diagrams, evaluates the moment
//! exactly, and provides an independent Monte Carlo estimate of the same
//! moment for cross-checking.

use crate::hermite::hermite_eval;
use crate::seeds;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Hard cap on p*q: matchings grow factorially and 16 vertices is already
/// two million candidates in the worst admissible shape.
pub const MAX_VERTICES: usize = 16;

/// Default eigenvalue slack when validating positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("p*q = {vertices} vertices exceeds the enumeration limit {MAX_VERTICES}")]
    TooLarge { vertices: usize },
    #[error("correlation matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("correlation matrix is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("correlation matrix diagonal entry {i} is {value}, expected 1")]
    BadDiagonal { i: usize, value: f64 },
    #[error("correlation matrix is not positive semidefinite: min eigenvalue {min_eig:e}")]
    NotPsd { min_eig: f64 },
    #[error("correlation matrix has order {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample count must be positive")]
    NoSamples,
}

/// A validated correlation matrix: symmetric, unit diagonal, eigenvalues
/// bounded below by -PSD_TOL.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    mat: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, DiagramError> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(DiagramError::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        let mat = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        for i in 0..n {
            if (mat[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(DiagramError::BadDiagonal {
                    i,
                    value: mat[(i, i)],
                });
            }
            for j in (i + 1)..n {
                if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 {
                    return Err(DiagramError::NotSymmetric { i, j });
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(mat.clone());
        let min_eig = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(DiagramError::NotPsd { min_eig });
        }
        Ok(CorrelationMatrix { mat })
    }

    /// Equicorrelated matrix with off-diagonal rho.
    pub fn equicorrelated(n: usize, rho: f64) -> Result<Self, DiagramError> {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        Self::new(&rows)
    }

    pub fn order(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    /// Symmetric square root, with eigenvalues inside the PSD slack clipped
    /// to zero so near-singular matrices remain usable for sampling.
    fn symmetric_sqrt(&self) -> DMatrix<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.mat.clone());
        let n = self.order();
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                eig.eigenvalues[i].max(0.0).sqrt()
            } else {
                0.0
            }
        });
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    }
}

/// A level-respecting perfect matching of the p x q vertex array. Vertex
/// l*q + j is the j-th slot of row l; every edge joins two distinct rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    pub p: usize,
    pub q: usize,
    /// Edges as (low, high) vertex ids, ordered by their low end.
    pub edges: Vec<(usize, usize)>,
}

impl Diagram {
    /// Product over edges of the correlation between the rows they join.
    pub fn weight(&self, corr: &CorrelationMatrix) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b)| corr.get(a / self.q, b / self.q))
            .product()
    }
}

/// All diagrams for shape (p, q), i.e. all perfect matchings of p*q vertices
/// in which no edge stays inside a row. Empty when p*q is odd or when no
/// admissible matching exists (for example p = 1).
pub fn enumerate_diagrams(p: usize, q: usize) -> Result<Vec<Diagram>, DiagramError> {
    let n = p * q;
    if n > MAX_VERTICES {
        return Err(DiagramError::TooLarge { vertices: n });
    }
    if n == 0 {
        return Ok(vec![Diagram {
            p,
            q,
            edges: Vec::new(),
        }]);
    }
    if n % 2 == 1 {
        return Ok(Vec::new());
    }

    // Depth-first over matchings: always pair the lowest unmatched vertex,
    // which visits each matching exactly once.
    fn recurse(
        n: usize,
        q: usize,
        matched: u32,
        edges: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let v = match (0..n).find(|v| matched & (1 << v) == 0) {
            Some(v) => v,
            None => {
                out.push(edges.clone());
                return;
            }
        };
        for u in (v + 1)..n {
            if matched & (1 << u) == 0 && u / q != v / q {
                edges.push((v, u));
                recurse(n, q, matched | (1 << v) | (1 << u), edges, out);
                edges.pop();
            }
        }
    }

    let mut out = Vec::new();
    recurse(n, q, 0, &mut Vec::new(), &mut out);
    Ok(out
        .into_iter()
        .map(|edges| Diagram { p, q, edges })
        .collect())
}

/// E[ prod_{l<p} H_q(X_l) ] for (X_l) centered Gaussian with the given
/// correlation matrix, evaluated exactly by the diagram sum.
pub fn diagram_moment(p: usize, q: usize, corr: &CorrelationMatrix) -> Result<f64, DiagramError> {
    if corr.order() != p {
        return Err(DiagramError::DimensionMismatch {
            expected: p,
            got: corr.order(),
        });
    }
    let diagrams = enumerate_diagrams(p, q)?;
    Ok(crate::stats::csum(
        &diagrams.iter().map(|d| d.weight(corr)).collect::<Vec<_>>(),
    ))
}

/// Monte Carlo estimate of the same moment with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McMoment {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Independent check of `diagram_moment`: draw X = S g with S the symmetric
/// square root of the correlation matrix and g standard normal, average the
/// Hermite product. Shares no code path with the diagram sum.
pub fn mc_moment_oracle(
    p: usize,
    q: usize,
    corr: &CorrelationMatrix,
    samples: u64,
    seed: u64,
) -> Result<McMoment, DiagramError> {
    if corr.order() != p {
        return Err(DiagramError::DimensionMismatch {
            expected: p,
            got: corr.order(),
        });
    }
    if samples == 0 {
        return Err(DiagramError::NoSamples);
    }
    let sqrt = corr.symmetric_sqrt();
    let mut rng = seeds::rng_for(seed, 0);
    let mut g = vec![0.0f64; p];
    let mut x = vec![0.0f64; p];

    // Welford accumulation of mean and squared deviation.
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for i in 0..samples {
        for gj in g.iter_mut() {
            *gj = rng.sample(StandardNormal);
        }
        for l in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += sqrt[(l, j)] * g[j];
            }
            x[l] = acc;
        }
        let prod: f64 = x.iter().map(|&v| hermite_eval(q, v)).product();
        let delta = prod - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (prod - mean);
    }
    let nf = samples as f64;
    let std_error = if samples > 1 {
        (m2 / (nf * (nf - 1.0))).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McMoment {
        value: mean,
        std_error,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn count(p: usize, q: usize) -> usize {
        enumerate_diagrams(p, q).unwrap().len()
    }

    #[test]
    fn pair_counts_are_factorial() {
        // Two rows: a diagram is a bijection between the rows' slots.
        assert_eq!(count(2, 1), 1);
        assert_eq!(count(2, 2), 2);
        assert_eq!(count(2, 3), 6);
        assert_eq!(count(2, 4), 24);
        assert_eq!(count(2, 8), 40320);
    }

    #[test]
    fn known_small_counts() {
        assert_eq!(count(4, 1), 3);
        assert_eq!(count(3, 2), 8);
    }

    #[test]
    fn odd_or_isolated_shapes_have_no_diagrams() {
        assert_eq!(count(3, 1), 0);
        assert_eq!(count(1, 2), 0);
        assert_eq!(count(5, 3), 0);
    }

    #[test]
    fn enumeration_limit() {
        assert!(matches!(
            enumerate_diagrams(3, 6),
            Err(DiagramError::TooLarge { vertices: 18 })
        ));
    }

    #[test]
    fn edges_never_stay_in_a_row() {
        for d in enumerate_diagrams(4, 2).unwrap() {
            assert_eq!(d.edges.len(), 4);
            for (a, b) in &d.edges {
                assert_ne!(a / d.q, b / d.q);
            }
        }
    }

    #[test]
    fn pair_moment_is_factorial_times_power() {
        // E[H_q(X) H_q(Y)] = q! rho^q.
        for q in 1..=5usize {
            for rho in [-0.8, -0.3, 0.0, 0.45, 1.0] {
                let corr = CorrelationMatrix::equicorrelated(2, rho).unwrap();
                let fact: f64 = (1..=q).map(|k| k as f64).product();
                assert_relative_eq!(
                    diagram_moment(2, q, &corr).unwrap(),
                    fact * rho.powi(q as i32),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn third_moment_of_squares() {
        // E[(X^2-1)(Y^2-1)(Z^2-1)] = 8 rho_xy rho_yz rho_zx; at rho = 1 all
        // eight diagrams contribute 1.
        let corr = CorrelationMatrix::equicorrelated(3, 1.0).unwrap();
        assert_relative_eq!(diagram_moment(3, 2, &corr).unwrap(), 8.0, epsilon = 1e-12);
        let corr = CorrelationMatrix::equicorrelated(3, 0.5).unwrap();
        assert_relative_eq!(diagram_moment(3, 2, &corr).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_flip_symmetry() {
        // Negating one coordinate multiplies the moment by (-1)^q.
        let base = CorrelationMatrix::new(&[
            vec![1.0, 0.4, 0.2],
            vec![0.4, 1.0, -0.3],
            vec![0.2, -0.3, 1.0],
        ])
        .unwrap();
        let flipped = CorrelationMatrix::new(&[
            vec![1.0, -0.4, -0.2],
            vec![-0.4, 1.0, -0.3],
            vec![-0.2, -0.3, 1.0],
        ])
        .unwrap();
        for q in 1..=4usize {
            let a = diagram_moment(3, q, &base).unwrap();
            let b = diagram_moment(3, q, &flipped).unwrap();
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(b, sign * a, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(matches!(
            CorrelationMatrix::new(&[vec![1.0, 0.5]]),
            Err(DiagramError::NotSquare { .. })
        ));
        assert!(matches!(
            CorrelationMatrix::new(&[vec![1.0, 0.5], vec![0.4, 1.0]]),
            Err(DiagramError::NotSymmetric { .. })
        ));
        assert!(matches!(
            CorrelationMatrix::new(&[vec![2.0, 0.0], vec![0.0, 1.0]]),
            Err(DiagramError::BadDiagonal { .. })
        ));
        // X = Y, X = -Z, Y = Z is contradictory, so this cannot be a
        // correlation matrix.
        assert!(matches!(
            CorrelationMatrix::new(&[
                vec![1.0, 1.0, -1.0],
                vec![1.0, 1.0, 1.0],
                vec![-1.0, 1.0, 1.0],
            ]),
            Err(DiagramError::NotPsd { .. })
        ));
    }

    #[test]
    fn mc_oracle_agrees_with_diagram_sum() {
        let corr = CorrelationMatrix::new(&[
            vec![1.0, 0.5, 0.25],
            vec![0.5, 1.0, 0.5],
            vec![0.25, 0.5, 1.0],
        ])
        .unwrap();
        let exact = diagram_moment(3, 2, &corr).unwrap();
        let mc = mc_moment_oracle(3, 2, &corr, 200_000, 42).unwrap();
        assert!(mc.std_error < 0.05);
        assert!(
            (mc.value - exact).abs() < 5.0 * mc.std_error,
            "mc {} vs exact {} (se {})",
            mc.value,
            exact,
            mc.std_error
        );
    }

    #[test]
    fn mc_oracle_dimension_checks() {
        let corr = CorrelationMatrix::equicorrelated(2, 0.3).unwrap();
        assert!(matches!(
            diagram_moment(3, 2, &corr),
            Err(DiagramError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
        assert!(matches!(
            mc_moment_oracle(2, 2, &corr, 0, 1),
            Err(DiagramError::NoSamples)
        ));
    }
}
