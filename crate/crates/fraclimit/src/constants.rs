//! Norming constants, scaling matrices and regime classification for the
//! limit theorems: everything here is a closed form or a deterministic
//! quadrature, no randomness.

use crate::fracproc::{self, HurstIndex};
use crate::quad::{self, QuadConfig, QuadError};
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstError {
    #[error("{param} = {value} violates {requirement}")]
    DomainError {
        param: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("integral diverges for H = {h}")]
    DivergentIntegral { h: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

fn check_h(h: f64) -> Result<(), ConstError> {
    if h.is_finite() && h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(ConstError::DomainError {
            param: "H",
            value: h,
            requirement: "0 < H < 1",
        })
    }
}

/// mu_H = 2 / Gamma(2H + 1); the variance normalizer of the stationary
/// process (its variance is gamma^{-2H} / mu_H).
pub fn mu(h: f64) -> f64 {
    debug_assert!(h > 0.0 && h < 1.0);
    2.0 / gamma(2.0 * h + 1.0)
}

/// Time norming g_H(t) of the integrated-functional statistic:
/// t^{-1/2} below H = 3/4, (t log t)^{-1/2} at the boundary, t^{1-2H} above.
pub fn g(h: f64, t: f64) -> Result<f64, ConstError> {
    check_h(h)?;
    if !(t > 1.0) {
        return Err(ConstError::DomainError {
            param: "t",
            value: t,
            requirement: "t > 1",
        });
    }
    Ok(if h < 0.75 {
        t.powf(-0.5)
    } else if h == 0.75 {
        (t * t.ln()).powf(-0.5)
    } else {
        t.powf(1.0 - 2.0 * h)
    })
}

/// Rate norming h_H(gamma): gamma^{-1/2-2H} below H = 3/4, gamma^{-2} from
/// the boundary up.
pub fn h(hurst: f64, gamma_rate: f64) -> f64 {
    debug_assert!(hurst > 0.0 && hurst < 1.0);
    assert!(gamma_rate > 0.0, "rate must be positive");
    if hurst < 0.75 {
        gamma_rate.powf(-0.5 - 2.0 * hurst)
    } else {
        gamma_rate.powi(-2)
    }
}

/// J(H) = integral_0^inf xi^{2-4H} / (1+xi^2)^2 dxi, by adaptive quadrature
/// after removing the origin singularity. Finite only for H < 3/4 (the
/// integrand behaves like xi^{2-4H} at the origin).
pub fn xi_integral(h: f64) -> Result<f64, ConstError> {
    check_h(h)?;
    if h >= 0.75 {
        return Err(ConstError::DivergentIntegral { h });
    }
    let cfg = QuadConfig {
        tol_abs: 1e-14,
        tol_rel: 1e-11,
        max_segments: 4000,
    };
    // Head [0,1] under xi = u^p with p = 1/(3-4H): the integrand becomes
    // p / (1 + u^{2p})^2, regular on [0,1].
    let p = 1.0 / (3.0 - 4.0 * h);
    let head = quad::adaptive(
        &|u: f64| {
            let d = 1.0 + u.powf(2.0 * p);
            p / (d * d)
        },
        0.0,
        1.0,
        &cfg,
    )?;
    // Tail [1,inf) under xi = 1/v: integrand v^{4H} / (1+v^2)^2 on [0,1].
    let tail = quad::adaptive(
        &|v: f64| {
            let d = 1.0 + v * v;
            v.powf(4.0 * h) / (d * d)
        },
        0.0,
        1.0,
        &cfg,
    )?;
    Ok(head.value + tail.value)
}

/// sigma_H, the weak/boundary/strong limit standard deviation for the
/// canonical q = 2 functional.
pub fn sigma(h: f64) -> Result<f64, ConstError> {
    check_h(h)?;
    Ok(if h < 0.75 {
        let j = xi_integral(h)?;
        (2.0 / PI).sqrt() * gamma(2.0 * h + 1.0) * (PI * h).sin() * j.sqrt()
    } else if h == 0.75 {
        0.75
    } else {
        h * ((4.0 * h - 2.0) / (4.0 * h - 3.0)).sqrt()
    })
}

/// kappa_H, the least-squares-estimator limit scale. Satisfies
/// sigma_H = 2 kappa_H mu_H^{-1/2} in every branch.
pub fn kappa(h: f64) -> Result<f64, ConstError> {
    check_h(h)?;
    Ok(if h < 0.75 {
        let j = xi_integral(h)?;
        (PI * h).sin() / PI.sqrt() * gamma(2.0 * h + 1.0).sqrt() * j.sqrt()
    } else if h == 0.75 {
        (3.0f64 / 8.0).sqrt() * PI.powf(-0.25)
    } else {
        (h / (4.0 * h - 3.0)).sqrt() / 2.0f64.sqrt() / gamma(2.0 * h - 1.0).sqrt()
    })
}

/// Diagonal of the 4x4 norming matrix D_H(gamma) for the moderate-rate
/// regime; requires gamma > 1 (the boundary branch carries (log gamma)^{-1/2}).
pub fn tau_norming_diag(h: f64, gamma_rate: f64) -> Result<[f64; 4], ConstError> {
    check_h(h)?;
    if !(gamma_rate > 1.0) {
        return Err(ConstError::DomainError {
            param: "gamma",
            value: gamma_rate,
            requirement: "gamma > 1",
        });
    }
    let gl = gamma_rate.ln();
    Ok(if h < 0.75 {
        [
            gamma_rate.powf(0.5 - h),
            gamma_rate.powf(0.5 - 2.0 * h),
            gamma_rate.powf(h - 0.5),
            1.0,
        ]
    } else if h == 0.75 {
        let l = gl.powf(-0.5);
        [
            gamma_rate.powf(-0.25) * l,
            gamma_rate.powi(-1) * l,
            gamma_rate.powf(0.25) * l,
            1.0,
        ]
    } else {
        [
            gamma_rate.powf(2.0 - 3.0 * h),
            gamma_rate.powf(2.0 - 4.0 * h),
            gamma_rate.powf(1.0 - h),
            1.0,
        ]
    })
}

/// The 4x2 limit covariance structure matrix for the moderate-rate regime:
/// rows (-kappa mu, 0), (-2 kappa mu^{3/2}, 0), (kappa, 0), (0, 1/2).
pub fn tau_limit_matrix(h: f64) -> Result<[[f64; 2]; 4], ConstError> {
    let k = kappa(h)?;
    let m = mu(h);
    Ok([
        [-k * m, 0.0],
        [-2.0 * k * m.powf(1.5), 0.0],
        [k, 0.0],
        [0.0, 0.5],
    ])
}

/// Centering vector b_H(gamma) = (mu^{1/2} gamma^H, mu gamma^{2H},
/// mu^{-1/2} gamma^{1-H}, gamma)'.
pub fn tau_centering(h: f64, gamma_rate: f64) -> Result<[f64; 4], ConstError> {
    check_h(h)?;
    if !(gamma_rate > 0.0) {
        return Err(ConstError::DomainError {
            param: "gamma",
            value: gamma_rate,
            requirement: "gamma > 0",
        });
    }
    let m = mu(h);
    Ok([
        m.sqrt() * gamma_rate.powf(h),
        m * gamma_rate.powf(2.0 * h),
        gamma_rate.powf(1.0 - h) / m.sqrt(),
        gamma_rate,
    ])
}

/// Validity region of I_{q,H}: the integral converges absolutely for
/// q = 1 with H <= 1/2, and for q >= 2 with H < 1 - 1/(2q).
pub fn i_qh_defined(q: usize, h: f64) -> bool {
    if q == 1 {
        h > 0.0 && h <= 0.5
    } else {
        q >= 2 && h > 0.0 && h < 1.0 - 1.0 / (2.0 * q as f64)
    }
}

/// I_{q,H} = integral_0^inf bracket(t)^q dt, where bracket is the
/// cancellation-safe stationary-covariance kernel (2 Gamma(2H+1) times the
/// lag correlation in units of 1/gamma). Head and middle by adaptive
/// panels, far tail closed analytically from the t^{2H-2} asymptote.
pub fn i_qh(q: usize, h: f64) -> Result<f64, ConstError> {
    check_h(h)?;
    if q == 0 || !i_qh_defined(q, h) {
        return Err(ConstError::DomainError {
            param: "(q, H)",
            value: h,
            requirement: "q = 1 with H <= 1/2, or q >= 2 with H < 1 - 1/(2q)",
        });
    }
    let hurst = HurstIndex::new(h).expect("validated above");
    let f = |t: f64| -> f64 {
        fracproc::stationary_cov_bracket(hurst, t)
            .expect("bracket quadrature converges on its domain")
            .powi(q as i32)
    };
    let cfg = QuadConfig {
        tol_abs: 1e-13,
        tol_rel: 1e-11,
        max_segments: 4000,
    };
    let mut total = quad::adaptive(&f, 0.0, 40.0, &cfg)?.value;
    let mut lo = 40.0f64;
    while lo < 10_000.0 {
        total += quad::adaptive(&f, lo, 2.0 * lo, &cfg)?.value;
        lo *= 2.0;
    }
    // bracket(t) = A t^{2H-2} (1 + O(t^{-2})) with A = 4H(2H-1), so the
    // remainder integrates to -A^q lo^{pq+1} / (pq+1) with p = 2H-2; the
    // neglected relative correction is O(lo^{-2}).
    let a = 4.0 * h * (2.0 * h - 1.0);
    let pq1 = (2.0 * h - 2.0) * q as f64 + 1.0;
    if a != 0.0 {
        debug_assert!(pq1 < 0.0);
        total -= a.powi(q as i32) * lo.powf(pq1) / pq1;
    }
    Ok(total)
}

/// Limit regime of the integrated rank-q functional at Hurst index H.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Weak,
    Boundary,
    Strong,
}

pub fn regime(q: usize, h: f64) -> Regime {
    assert!(q >= 1, "rank must be at least 1");
    debug_assert!(h > 0.0 && h < 1.0);
    if q == 1 {
        if h <= 0.5 {
            Regime::Weak
        } else {
            Regime::Strong
        }
    } else {
        let b = 1.0 - 1.0 / (2.0 * q as f64);
        if h < b {
            Regime::Weak
        } else if h == b {
            Regime::Boundary
        } else {
            Regime::Strong
        }
    }
}

fn factorial(q: usize) -> f64 {
    (1..=q).map(|k| k as f64).product()
}

/// Scale of the strong-regime (noncentral) limit:
/// (2 q!)^{1/2} {[(2H-2)q+1][(2H-2)q+2]}^{-1/2} [(2H-1)/Gamma(2H)]^{q/2}
/// gamma^{q(H-1)}. Both bracketed factors are positive precisely in the
/// strong regime.
pub fn nclt_coeff(q: usize, h: f64, gamma_rate: f64) -> Result<f64, ConstError> {
    check_h(h)?;
    if q < 1 || regime(q, h) != Regime::Strong {
        return Err(ConstError::DomainError {
            param: "H",
            value: h,
            requirement: "H > 1 - 1/(2q) (strong regime)",
        });
    }
    if !(gamma_rate > 0.0) {
        return Err(ConstError::DomainError {
            param: "gamma",
            value: gamma_rate,
            requirement: "gamma > 0",
        });
    }
    let qf = q as f64;
    let b1 = (2.0 * h - 2.0) * qf + 1.0;
    let b2 = (2.0 * h - 2.0) * qf + 2.0;
    Ok((2.0 * factorial(q)).sqrt() / (b1 * b2).sqrt()
        * ((2.0 * h - 1.0) / gamma(2.0 * h)).powf(qf / 2.0)
        * gamma_rate.powf(qf * (h - 1.0)))
}

/// Scale of the boundary-regime limit:
/// (2 q!)^{1/2} [(2H-1)/Gamma(2H)]^{q/2} gamma^{q(H-1)} at H = 1 - 1/(2q).
pub fn boundary_coeff(q: usize, h: f64, gamma_rate: f64) -> Result<f64, ConstError> {
    check_h(h)?;
    if regime(q, h) != Regime::Boundary {
        return Err(ConstError::DomainError {
            param: "H",
            value: h,
            requirement: "H = 1 - 1/(2q) with q >= 2 (boundary regime)",
        });
    }
    if !(gamma_rate > 0.0) {
        return Err(ConstError::DomainError {
            param: "gamma",
            value: gamma_rate,
            requirement: "gamma > 0",
        });
    }
    let qf = q as f64;
    Ok((2.0 * factorial(q)).sqrt()
        * ((2.0 * h - 1.0) / gamma(2.0 * h)).powf(qf / 2.0)
        * gamma_rate.powf(qf * (h - 1.0)))
}

/// Every norming object relevant at (q, H), with the rate-dependent entries
/// included when a rate is supplied.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizationBundle {
    pub q: usize,
    pub h: f64,
    pub gamma: Option<f64>,
    pub regime: Regime,
    pub mu: f64,
    pub sigma: f64,
    pub kappa: f64,
    /// Human-readable form of the time norming g_H.
    pub g_form: String,
    /// h_H(gamma), when a rate is supplied.
    pub h_gamma: Option<f64>,
    /// Diagonal of D_H(gamma), when gamma > 1.
    pub d_diag: Option<[f64; 4]>,
    pub sigma_mat: [[f64; 2]; 4],
    pub b_vec: Option<[f64; 4]>,
    /// I_{q,H}, when (q, H) lies in its convergence region.
    pub i_qh: Option<f64>,
    /// Strong- or boundary-regime coefficient, when applicable.
    pub regime_coeff: Option<f64>,
}

impl NormalizationBundle {
    pub fn new(q: usize, h: f64, gamma_rate: Option<f64>) -> Result<Self, ConstError> {
        check_h(h)?;
        if q < 1 {
            return Err(ConstError::DomainError {
                param: "q",
                value: q as f64,
                requirement: "q >= 1",
            });
        }
        if let Some(g) = gamma_rate {
            if !(g.is_finite() && g > 0.0) {
                return Err(ConstError::DomainError {
                    param: "gamma",
                    value: g,
                    requirement: "gamma > 0",
                });
            }
        }
        let reg = regime(q, h);
        let g_form = if h < 0.75 {
            "t^{-1/2}".to_string()
        } else if h == 0.75 {
            "(t log t)^{-1/2}".to_string()
        } else {
            format!("t^{{{}}}", 1.0 - 2.0 * h)
        };
        let regime_coeff = match (reg, gamma_rate) {
            (Regime::Strong, Some(g)) => Some(nclt_coeff(q, h, g)?),
            (Regime::Boundary, Some(g)) => Some(boundary_coeff(q, h, g)?),
            _ => None,
        };
        Ok(NormalizationBundle {
            q,
            h,
            gamma: gamma_rate,
            regime: reg,
            mu: mu(h),
            sigma: sigma(h)?,
            kappa: kappa(h)?,
            g_form,
            h_gamma: gamma_rate.map(|g| crate::constants::h(h, g)),
            d_diag: match gamma_rate {
                Some(g) if g > 1.0 => Some(tau_norming_diag(h, g)?),
                _ => None,
            },
            sigma_mat: tau_limit_matrix(h)?,
            b_vec: gamma_rate.map(|g| tau_centering(h, g)).transpose()?,
            i_qh: if i_qh_defined(q, h) {
                Some(i_qh(q, h)?)
            } else {
                None
            },
            regime_coeff,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent closed form for J(H) via the Beta identity,
    /// J(H) = Gamma((3-4H)/2) Gamma((1+4H)/2) / 2. Implemented first and
    /// used as the oracle for the quadrature route.
    fn xi_integral_beta(h: f64) -> f64 {
        0.5 * gamma((3.0 - 4.0 * h) / 2.0) * gamma((1.0 + 4.0 * h) / 2.0)
    }

    #[test]
    fn mu_reference_values() {
        assert_relative_eq!(mu(0.5), 2.0, epsilon = 1e-14);
        assert_relative_eq!(mu(0.75), 8.0 / (3.0 * PI.sqrt()), epsilon = 1e-13);
        for hv in [0.1, 0.3, 0.5, 0.75, 0.9] {
            assert_relative_eq!(mu(hv) * gamma(2.0 * hv + 1.0), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn g_branches() {
        assert_relative_eq!(g(0.5, 100.0).unwrap(), 0.1, epsilon = 1e-14);
        assert_relative_eq!(
            g(0.75, std::f64::consts::E).unwrap(),
            (-0.5f64).exp(),
            epsilon = 1e-12
        );
        assert_relative_eq!(g(0.9, 10.0).unwrap(), 10.0f64.powf(-0.8), epsilon = 1e-13);
        assert!(g(0.5, 1.0).is_err());
        assert!(g(0.5, 0.2).is_err());
    }

    #[test]
    fn h_branches() {
        assert_relative_eq!(h(0.5, 4.0), 0.125, epsilon = 1e-14);
        assert_relative_eq!(h(0.8, 2.0), 0.25, epsilon = 1e-14);
        assert_relative_eq!(h(0.75, 2.0), 0.25, epsilon = 1e-14);
        for hv in [0.2, 0.5, 0.75, 0.9] {
            assert_relative_eq!(h(hv, 1.0), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn xi_matches_beta_oracle() {
        // The oracle came first; the quadrature must reproduce it.
        let mut hv = 0.05;
        while hv < 0.71 {
            assert_relative_eq!(
                xi_integral(hv).unwrap(),
                xi_integral_beta(hv),
                max_relative = 1e-9
            );
            hv += 0.05;
        }
        assert_relative_eq!(
            xi_integral(0.74).unwrap(),
            xi_integral_beta(0.74),
            max_relative = 1e-9
        );
    }

    #[test]
    fn xi_special_values() {
        assert_relative_eq!(xi_integral(0.5).unwrap(), PI / 4.0, epsilon = 1e-10);
        assert_relative_eq!(xi_integral(0.25).unwrap(), 0.5, epsilon = 1e-10);
        assert!(matches!(
            xi_integral(0.75),
            Err(ConstError::DivergentIntegral { .. })
        ));
        assert!(matches!(
            xi_integral(0.8),
            Err(ConstError::DivergentIntegral { .. })
        ));
    }

    #[test]
    fn sigma_reference_values() {
        assert_relative_eq!(sigma(0.75).unwrap(), 0.75, epsilon = 1e-14);
        assert_relative_eq!(sigma(0.5).unwrap(), 0.5f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(
            sigma(0.9).unwrap(),
            0.9 * (1.6f64 / 0.6).sqrt(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn kappa_reference_values() {
        assert_relative_eq!(kappa(0.5).unwrap(), 0.5, epsilon = 1e-10);
        assert_relative_eq!(
            kappa(0.75).unwrap(),
            (3.0f64 / 8.0).sqrt() * PI.powf(-0.25),
            epsilon = 1e-14
        );
        // Third branch at H = 0.9, evaluated with full Gamma precision.
        assert_relative_eq!(kappa(0.9).unwrap(), 0.802622430, epsilon = 1e-9);
        assert_relative_eq!(kappa(0.75).unwrap(), 0.459968579, epsilon = 1e-9);
    }

    #[test]
    fn sigma_kappa_identity() {
        // sigma = 2 kappa mu^{-1/2} holds in all three branches.
        for hv in [0.2, 0.4, 0.6, 0.74, 0.75, 0.8, 0.9, 0.95] {
            let lhs = sigma(hv).unwrap();
            let rhs = 2.0 * kappa(hv).unwrap() / mu(hv).sqrt();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
        }
    }

    #[test]
    fn scaling_matrix_branches() {
        let d = tau_norming_diag(0.5, 4.0).unwrap();
        assert_relative_eq!(d[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(d[1], 0.5, epsilon = 1e-14);
        assert_relative_eq!(d[2], 1.0, epsilon = 1e-14);
        assert_relative_eq!(d[3], 1.0, epsilon = 1e-14);

        let e = std::f64::consts::E;
        let d = tau_norming_diag(0.75, e).unwrap();
        assert_relative_eq!(d[0], (-0.25f64).exp(), epsilon = 1e-13);
        assert_relative_eq!(d[1], (-1.0f64).exp(), epsilon = 1e-13);
        assert_relative_eq!(d[2], (0.25f64).exp(), epsilon = 1e-13);

        let d = tau_norming_diag(0.8, 10.0).unwrap();
        assert_relative_eq!(d[0], 10.0f64.powf(-0.4), epsilon = 1e-13);
        assert_relative_eq!(d[1], 10.0f64.powf(-1.2), epsilon = 1e-13);
        assert_relative_eq!(d[2], 10.0f64.powf(0.2), epsilon = 1e-13);

        assert!(tau_norming_diag(0.5, 1.0).is_err());
        assert!(tau_norming_diag(0.5, 0.5).is_err());
    }

    #[test]
    fn sigma_matrix_and_b_vec() {
        let s = tau_limit_matrix(0.5).unwrap();
        assert_relative_eq!(s[0][0], -1.0, epsilon = 1e-10);
        assert_relative_eq!(s[1][0], -2.0f64.powf(1.5), epsilon = 1e-10);
        assert_relative_eq!(s[2][0], 0.5, epsilon = 1e-10);
        assert_eq!(s[3][0], 0.0);
        for row in &s[..3] {
            assert_eq!(row[1], 0.0);
        }
        assert_eq!(s[3][1], 0.5);

        let b = tau_centering(0.5, 1.0).unwrap();
        assert_relative_eq!(b[0], 2.0f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(b[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(b[2], 2.0f64.powf(-0.5), epsilon = 1e-14);
        assert_relative_eq!(b[3], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn i_qh_exponential_identity() {
        // At H = 1/2 the kernel is 2 e^{-t}, so the integral is 2^q / q.
        for q in 1..=4usize {
            assert_relative_eq!(
                i_qh(q, 0.5).unwrap(),
                2.0f64.powi(q as i32) / q as f64,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn i_qh_rank_one_vanishes() {
        // Remarkable cancellation: the kernel integrates to zero for H < 1/2.
        assert!(i_qh(1, 0.3).unwrap().abs() < 1e-6);
        assert!(i_qh(1, 0.45).unwrap().abs() < 1e-6);
    }

    #[test]
    fn i_qh_frozen_references() {
        // Locked in from a high-precision prototype of the same integral
        // evaluated with an independent quadrature stack. That prototype
        // truncated its far tail near t = 500, which limits the agreement
        // one can ask for to a few parts in 1e7 for the slow-decay cases.
        let cases = [
            (2, 0.6, 3.8003232160346),
            (2, 0.7, 11.765137126606),
            (3, 0.6, 5.3806750765125),
            (2, 0.25, 0.4999999999925),
            (4, 0.3, 0.85379339661789),
        ];
        for (q, hv, want) in cases {
            assert_relative_eq!(i_qh(q, hv).unwrap(), want, max_relative = 5e-7);
        }
    }

    #[test]
    fn i_qh_domain_checks() {
        assert!(i_qh(1, 0.6).is_err());
        assert!(i_qh(2, 0.75).is_err());
        assert!(i_qh(2, 0.8).is_err());
        assert!(i_qh(3, 0.6).is_ok());
        assert!(i_qh(0, 0.5).is_err());
    }

    #[test]
    fn i_qh_positivity_observation() {
        // Observed numerically; not a proved theorem, so only spot-checked.
        for (q, hs) in [
            (2usize, vec![0.1, 0.3, 0.5, 0.6, 0.7]),
            (3, vec![0.1, 0.4, 0.6, 0.8 - 1.0 / 6.0]),
            (4, vec![0.2, 0.5, 0.6]),
        ] {
            for hv in hs {
                assert!(i_qh(q, hv).unwrap() > 0.0, "q={q}, H={hv}");
            }
        }
    }

    #[test]
    fn regime_classification() {
        assert_eq!(regime(2, 0.5), Regime::Weak);
        assert_eq!(regime(2, 0.75), Regime::Boundary);
        assert_eq!(regime(2, 0.9), Regime::Strong);
        assert_eq!(regime(1, 0.5), Regime::Weak);
        assert_eq!(regime(1, 0.6), Regime::Strong);
        assert_eq!(regime(3, 1.0 - 1.0 / 6.0), Regime::Boundary);
    }

    #[test]
    fn nclt_coeff_values() {
        // q = 1 reduces to mu^{1/2} gamma^{H-1}, a direct variance
        // computation; the frozen number below is mu(0.75)^{1/2}.
        assert_relative_eq!(
            nclt_coeff(1, 0.75, 1.0).unwrap(),
            1.22658287781,
            epsilon = 1e-9
        );
        for hv in [0.6, 0.75, 0.9] {
            for ga in [0.5, 1.0, 3.0] {
                assert_relative_eq!(
                    nclt_coeff(1, hv, ga).unwrap(),
                    mu(hv).sqrt() * ga.powf(hv - 1.0),
                    max_relative = 1e-12
                );
            }
        }
        // gamma-dependence is exactly gamma^{q(H-1)}.
        let r = nclt_coeff(2, 0.85, 2.0).unwrap() / nclt_coeff(2, 0.85, 1.0).unwrap();
        assert_relative_eq!(r, 2.0f64.powf(2.0 * (0.85 - 1.0)), epsilon = 1e-13);
        assert!(nclt_coeff(2, 0.7, 1.0).is_err());
        assert!(nclt_coeff(2, 0.75, 1.0).is_err());
    }

    #[test]
    fn boundary_coeff_values() {
        assert_relative_eq!(
            boundary_coeff(2, 0.75, 1.0).unwrap(),
            2.0 * (0.5 / gamma(1.5)),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            boundary_coeff(2, 0.75, 1.0).unwrap(),
            1.128379,
            epsilon = 1e-6
        );
        assert!(boundary_coeff(2, 0.8, 1.0).is_err());
        assert!(boundary_coeff(1, 0.5, 1.0).is_err());
    }

    #[test]
    fn bundle_population() {
        let b = NormalizationBundle::new(2, 0.6, Some(2.0)).unwrap();
        assert_eq!(b.regime, Regime::Weak);
        assert!(b.i_qh.is_some());
        assert!(b.d_diag.is_some());
        assert!(b.b_vec.is_some());
        assert!(b.regime_coeff.is_none());
        assert_relative_eq!(b.mu * gamma(2.0 * 0.6 + 1.0), 2.0, epsilon = 1e-12);

        let b = NormalizationBundle::new(2, 0.9, Some(0.5)).unwrap();
        assert_eq!(b.regime, Regime::Strong);
        assert!(b.i_qh.is_none());
        assert!(b.d_diag.is_none(), "D requires gamma > 1");
        assert!(b.regime_coeff.is_some());

        let b = NormalizationBundle::new(2, 0.75, None).unwrap();
        assert_eq!(b.regime, Regime::Boundary);
        assert!(b.h_gamma.is_none());
        assert!(b.b_vec.is_none());
        assert!(b.regime_coeff.is_none());
    }

    #[test]
    fn sigma_weak_series_matches_closed_coefficient() {
        // At H = 1/2 the long-run variance series for f = H_q against
        // r(u) = e^{-gamma |u|} must equal 2 q! [2 Gamma(2)]^{-q}
        // I_{q,1/2} / gamma.
        use crate::hermite;
        for q in 1..=3usize {
            for ga in [1.0, 2.5] {
                let f = hermite::Functional::hermite(q);
                let e = hermite::expand(&f, 8, 128).unwrap();
                let w = hermite::sigma_weak_sq(
                    &e,
                    |u: f64| (-ga * u.abs()).exp(),
                    80.0 / ga,
                    &QuadConfig::default(),
                )
                .unwrap();
                let i = i_qh(q, 0.5).unwrap();
                let closed = 2.0 * factorial(q) * 2.0f64.powi(-(q as i32)) * i / ga;
                assert_relative_eq!(w.value, closed, max_relative = 1e-6);
            }
        }
    }
}
