//! Hermite polynomials (probabilists' normalization), Gauss-Hermite
//! quadrature for expectations under the standard normal law, expansion of
//! square-integrable functionals, and the series for the long-run variance of
//! integrated functionals in the short-memory regime.

use crate::quad::{self, QuadConfig, QuadError};
use nalgebra::DMatrix;
use thiserror::Error;

/// Default number of terms retained in an expansion.
pub const DEFAULT_K_MAX: usize = 12;
/// Default Gauss-Hermite order for coefficient quadrature.
pub const DEFAULT_QUAD_ORDER: usize = 128;
/// Rank detection threshold, relative to the natural scale sqrt(k! E f^2).
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HermiteError {
    #[error("functional must be centered: E f(N) = {mean:e} exceeds tolerance")]
    MeanNotZero { mean: f64 },
    #[error("no coefficient above the rank threshold up to k_max = {k_max}")]
    RankUndetected { k_max: usize },
    #[error("rank-{rank} term is not integrable: correlation decays like u^-{decay:.4}")]
    DivergentIntegral { rank: usize, decay: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// H_k(x) with H_0 = 1, H_1 = x, H_{k+1} = x H_k - k H_{k-1}.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let mut hm = 1.0;
            let mut h = x;
            for j in 1..k {
                let next = x * h - j as f64 * hm;
                hm = h;
                h = next;
            }
            h
        }
    }
}

/// Orthonormal Hermite values (e_n(x), e_{n-1}(x)) where e_k = H_k / sqrt(k!).
/// The normalized recurrence keeps magnitudes representable far out in the
/// tail where H_k itself would overflow.
fn orthonormal_hermite_pair(n: usize, x: f64) -> (f64, f64) {
    debug_assert!(n >= 1);
    let mut prev = 1.0f64; // e_0
    let mut cur = x; // e_1
    for k in 1..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Nodes and weights for n-point Gauss-Hermite quadrature against the
/// standard normal density: E g(N) ~ sum_i w_i g(x_i), sum_i w_i = 1.
///
/// Golub-Welsch seeds the nodes: the Jacobi matrix of the probabilists'
/// Hermite recurrence is symmetric tridiagonal with zero diagonal and
/// off-diagonal sqrt(k), and its eigenvalues are the nodes. Each node is then
/// polished by Newton iteration on the orthonormal polynomial (the raw eigen
/// solve is only good to ~1e-8 relative, which high-order coefficients would
/// inherit), and weights come from the Gauss formula w_i = 1/(n e_{n-1}(x_i)^2).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two quadrature nodes");
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    let nf = n as f64;
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let (en, enm1) = orthonormal_hermite_pair(n, *x);
            // e_n'(x) = sqrt(n) e_{n-1}(x)
            let step = en / (nf.sqrt() * enm1);
            *x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, enm1) = orthonormal_hermite_pair(n, *x);
        weights.push(1.0 / (nf * enm1 * enm1));
    }
    // Guard against drift in the closed-form weights; the exact sum is one.
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    (nodes, weights)
}

/// A functional of a standard normal variable together with its first two
/// moments, which are computed once at construction.
pub struct Functional {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    mean: f64,
    second_moment: f64,
}

impl Functional {
    pub fn new<F>(f: F, quad_order: usize) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (nodes, weights) = gauss_hermite(quad_order);
        let mut mean = 0.0;
        let mut second = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let v = f(*x);
            mean += w * v;
            second += w * v * v;
        }
        Functional {
            f: Box::new(f),
            mean,
            second_moment: second,
        }
    }

    /// The pure Hermite polynomial H_k, the canonical rank-k functional.
    pub fn hermite(k: usize) -> Self {
        assert!(k >= 1, "H_0 is constant and has no rank");
        Self::new(move |x| hermite_eval(k, x), DEFAULT_QUAD_ORDER)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }
}

/// Truncated Hermite expansion f = sum_k (c_k / k!) H_k with
/// c_k = E[f(N) H_k(N)].
#[derive(Debug, Clone)]
pub struct HermiteExpansion {
    /// coeffs[k-1] = c_k for k = 1..=k_max.
    pub coeffs: Vec<f64>,
    pub k_max: usize,
    /// Hermite rank: smallest k with c_k distinguishable from zero.
    pub rank: usize,
    /// E f(N)^2, for scale and for the truncation diagnostic.
    pub second_moment: f64,
}

impl HermiteExpansion {
    pub fn coeff(&self, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.k_max);
        self.coeffs[k - 1]
    }

    /// Reconstruction sum_{k=1}^{k_max} (c_k / k!) H_k(x).
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut fact = 1.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = i + 1;
            fact *= k as f64;
            acc += c / fact * hermite_eval(k, x);
        }
        acc
    }

    /// L2 mass beyond the truncation: E f^2 - sum_{k<=K} c_k^2 / k!.
    /// Zero (up to rounding) when f is a polynomial of degree <= K.
    pub fn truncation_loss(&self) -> f64 {
        let mut fact = 1.0;
        let mut captured = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            fact *= (i + 1) as f64;
            captured += c * c / fact;
        }
        self.second_moment - captured
    }
}

/// Expand a centered functional in Hermite polynomials and detect its rank.
///
/// The mean must vanish: |E f| <= RANK_TOL * sqrt(E f^2) + 1e-12. Coefficients
/// are computed with Gauss-Hermite quadrature of the order recorded in `f`'s
/// construction; the rank is the first k whose coefficient exceeds
/// RANK_TOL * sqrt(k! E f^2).
pub fn expand(
    f: &Functional,
    k_max: usize,
    quad_order: usize,
) -> Result<HermiteExpansion, HermiteError> {
    assert!(k_max >= 1);
    let scale = f.second_moment.sqrt();
    if f.mean.abs() > RANK_TOL * scale + 1e-12 {
        return Err(HermiteError::MeanNotZero { mean: f.mean });
    }
    let (nodes, weights) = gauss_hermite(quad_order);
    let vals: Vec<f64> = nodes.iter().map(|x| f.eval(*x)).collect();

    let mut coeffs = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut c = 0.0;
        for i in 0..nodes.len() {
            c += weights[i] * vals[i] * hermite_eval(k, nodes[i]);
        }
        coeffs.push(c);
    }

    let mut rank = None;
    let mut fact = 1.0;
    for (i, c) in coeffs.iter().enumerate() {
        let k = i + 1;
        fact *= k as f64;
        if c.abs() > RANK_TOL * fact.sqrt() * scale {
            rank = Some(k);
            break;
        }
    }
    let rank = rank.ok_or(HermiteError::RankUndetected { k_max })?;

    Ok(HermiteExpansion {
        coeffs,
        k_max,
        rank,
        second_moment: f.second_moment,
    })
}

/// Rank of an expansion under a caller-supplied absolute tolerance: the
/// smallest k with |c_k| > tol.
pub fn hermite_rank(e: &HermiteExpansion, tol: f64) -> Result<usize, HermiteError> {
    for (i, c) in e.coeffs.iter().enumerate() {
        if c.abs() > tol {
            return Ok(i + 1);
        }
    }
    Err(HermiteError::RankUndetected { k_max: e.k_max })
}

/// Long-run variance series with an explicit tail diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct WeakVariance {
    /// sum_{k=rank}^{k_max} (c_k^2 / k!) * int_{-cutoff}^{cutoff} r(u)^k du.
    pub value: f64,
    /// Estimated mass beyond the cutoff, extrapolated from the observed
    /// decay exponent. Not added to `value`.
    pub tail_estimate: f64,
}

/// Series for the long-run variance of (1/sqrt(t)) int_0^t f(X_s) ds when X
/// is stationary with correlation r and f has the given expansion:
/// sigma^2 = sum_{k >= rank} (c_k^2 / k!) int_R r(u)^k du.
///
/// Integrals are truncated at the (symmetric) cutoff. Before summing, the
/// decay of r is probed at cutoff/2 and cutoff; if the rank term decays no
/// faster than 1/u the series member is infinite and the computation aborts
/// with `DivergentIntegral`. The probe assumes the cutoff sits in r's
/// asymptotic regime.
pub fn sigma_weak_sq<R>(
    expansion: &HermiteExpansion,
    r: R,
    cutoff: f64,
    cfg: &QuadConfig,
) -> Result<WeakVariance, HermiteError>
where
    R: Fn(f64) -> f64,
{
    assert!(cutoff > 0.0);
    let q = expansion.rank;

    let r_half = r(0.5 * cutoff).abs();
    let r_full = r(cutoff).abs();
    // Decay exponent p with r ~ u^-p; divergence iff q * p <= 1.
    let decay = if r_full < 1e-300 {
        f64::INFINITY
    } else if r_full >= r_half {
        0.0
    } else {
        (r_half / r_full).ln() / std::f64::consts::LN_2
    };
    if q as f64 * decay <= 1.0 + 1e-9 {
        return Err(HermiteError::DivergentIntegral { rank: q, decay });
    }

    let mut value = 0.0;
    let mut tail = 0.0;
    let mut fact = 1.0;
    for k in 1..=expansion.k_max {
        fact *= k as f64;
        if k < q {
            continue;
        }
        let c = expansion.coeff(k);
        if c == 0.0 {
            continue;
        }
        let integral = quad::adaptive(&|u: f64| r(u).powi(k as i32), 0.0, cutoff, cfg)?;
        value += c * c / fact * 2.0 * integral.value;
        if decay.is_finite() {
            let kp = k as f64 * decay;
            tail += c * c / fact * 2.0 * r_full.powi(k as i32) * cutoff / (kp - 1.0);
        }
    }
    Ok(WeakVariance {
        value,
        tail_estimate: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_order_closed_forms() {
        for &x in &[-3.0, -1.2, 0.0, 0.7, 2.5] {
            assert_relative_eq!(
                hermite_eval(4, x),
                x.powi(4) - 6.0 * x * x + 3.0,
                max_relative = 1e-13
            );
            assert_relative_eq!(
                hermite_eval(5, x),
                x.powi(5) - 10.0 * x.powi(3) + 15.0 * x,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn h6_reference_values() {
        let cases = [
            (-3.0, -96.0),
            (0.0, -15.0),
            (1.0, 16.0),
            (2.5, -4835.0 / 64.0),
        ];
        for (x, want) in cases {
            assert_eq!(hermite_eval(6, x), want);
        }
    }

    #[test]
    fn quadrature_orthogonality() {
        // E[H_j H_k] = delta_jk k! for all j,k <= 12 under 128-node GH.
        let (nodes, weights) = gauss_hermite(DEFAULT_QUAD_ORDER);
        let mut fact = 1.0;
        for k in 1..=12usize {
            fact *= k as f64;
            for j in 1..=k {
                let mut acc = 0.0;
                for (x, w) in nodes.iter().zip(&weights) {
                    acc += w * hermite_eval(j, *x) * hermite_eval(k, *x);
                }
                let want = if j == k { fact } else { 0.0 };
                assert!(
                    (acc - want).abs() <= 1e-9 * fact.max(1.0),
                    "j={j} k={k}: got {acc}, want {want}"
                );
            }
        }
    }

    #[test]
    fn weights_are_a_probability_measure() {
        let (nodes, weights) = gauss_hermite(64);
        assert_relative_eq!(weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // Second and fourth moments of N(0,1).
        let m2: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        let m4: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.powi(4)).sum();
        assert_relative_eq!(m2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m4, 3.0, epsilon = 1e-11);
    }

    #[test]
    fn expand_detects_rank_of_square() {
        let f = Functional::new(|x| x * x - 1.0, DEFAULT_QUAD_ORDER);
        let e = expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER).unwrap();
        assert_eq!(e.rank, 2);
        assert_relative_eq!(e.coeff(2), 2.0, epsilon = 1e-10);
        assert!(e.coeff(1).abs() < 1e-10);
        assert!(e.truncation_loss().abs() < 1e-9);
    }

    #[test]
    fn expand_detects_rank_one_mixture() {
        let f = Functional::new(|x| hermite_eval(3, x) + x, DEFAULT_QUAD_ORDER);
        let e = expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER).unwrap();
        assert_eq!(e.rank, 1);
        assert_relative_eq!(e.coeff(1), 1.0, epsilon = 1e-9);
        assert_relative_eq!(e.coeff(3), 6.0, epsilon = 1e-9);
    }

    #[test]
    fn expand_of_abs_value() {
        // |x| - E|N| is even and centered, so the rank is 2. The kink at zero
        // limits Gauss-Hermite accuracy to a few 1e-3 here, which is why the
        // shift is taken from the same quadrature rather than sqrt(2/pi).
        let raw = Functional::new(|x: f64| x.abs(), DEFAULT_QUAD_ORDER);
        let shift = raw.mean();
        let f = Functional::new(move |x: f64| x.abs() - shift, DEFAULT_QUAD_ORDER);
        let e = expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER).unwrap();
        assert_eq!(e.rank, 2);
        assert!(e.coeff(1).abs() < 1e-10);
        assert!(e.coeff(3).abs() < 1e-10);
        // c_2 = E[|N| H_2(N)] = sqrt(2/pi), up to the kink-limited error.
        assert_relative_eq!(
            e.coeff(2),
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 5e-3
        );
    }

    #[test]
    fn expand_rejects_uncentered() {
        let f = Functional::new(|x| x * x, DEFAULT_QUAD_ORDER);
        assert!(matches!(
            expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER),
            Err(HermiteError::MeanNotZero { .. })
        ));
    }

    #[test]
    fn explicit_rank_query() {
        let e3 = expand(&Functional::hermite(3), 8, 96).unwrap();
        assert_eq!(hermite_rank(&e3, 1e-6).unwrap(), 3);
        let e2 = expand(&Functional::new(|x| x * x - 1.0, 96), 8, 96).unwrap();
        assert_eq!(hermite_rank(&e2, 1e-6).unwrap(), 2);
        let zero = HermiteExpansion {
            coeffs: vec![0.0; 5],
            k_max: 5,
            rank: 1,
            second_moment: 0.0,
        };
        assert!(matches!(
            hermite_rank(&zero, 1e-6),
            Err(HermiteError::RankUndetected { k_max: 5 })
        ));
    }

    #[test]
    fn rank_undetected_for_numerically_zero_functional() {
        let f = Functional::new(|_| 0.0, DEFAULT_QUAD_ORDER);
        assert!(matches!(
            expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER),
            Err(HermiteError::RankUndetected { k_max: 12 })
        ));
    }

    #[test]
    fn reconstruction_matches_polynomial() {
        let f = Functional::new(|x| 0.5 * hermite_eval(2, x) - 1.75 * x, 96);
        let e = expand(&f, 8, 96).unwrap();
        for &x in &[-2.0, -0.3, 0.0, 1.1, 2.9] {
            assert_relative_eq!(e.eval(x), f.eval(x), epsilon = 1e-8);
        }
    }

    #[test]
    fn sigma_weak_exponential_correlation() {
        // r(u) = exp(-|u|): int_R r^k = 2/k, so
        // sigma^2 for f = H_2 is (4/2!) * (2/2) = 2... c_2 = 2, c_2^2/2! = 2,
        // times int_R r^2 = 1 gives 2.
        let f = Functional::hermite(2);
        let e = expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER).unwrap();
        let w = sigma_weak_sq(&e, |u: f64| (-u.abs()).exp(), 80.0, &QuadConfig::default()).unwrap();
        assert_relative_eq!(w.value, 2.0, epsilon = 1e-9);
        assert!(w.tail_estimate.abs() < 1e-12);
    }

    #[test]
    fn sigma_weak_flags_slow_decay() {
        // r(u) ~ u^{-0.4} at large u: with rank 2 the squared term decays
        // like u^{-0.8}, which is not integrable.
        let f = Functional::hermite(2);
        let e = expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER).unwrap();
        let r = |u: f64| (1.0 + u * u).powf(-0.2);
        match sigma_weak_sq(&e, r, 200.0, &QuadConfig::default()) {
            Err(HermiteError::DivergentIntegral { rank: 2, decay }) => {
                assert!((decay - 0.4).abs() < 0.05);
            }
            other => panic!("expected divergence, got {:?}", other.map(|w| w.value)),
        }
    }

    #[test]
    fn sigma_weak_power_decay_value() {
        // r(u) = (1+u^2)^{-1}: rank 1, int_R r = pi.
        let f = Functional::hermite(1);
        let e = expand(&f, DEFAULT_K_MAX, DEFAULT_QUAD_ORDER).unwrap();
        let w = sigma_weak_sq(
            &e,
            |u: f64| 1.0 / (1.0 + u * u),
            4000.0,
            &QuadConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(
            w.value + w.tail_estimate,
            std::f64::consts::PI,
            max_relative = 1e-6
        );
    }
}
