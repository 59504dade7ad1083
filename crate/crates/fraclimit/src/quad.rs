//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 15-point Kronrod rule with embedded 7-point Gauss rule drives a
//! worst-segment-first refinement loop. This is deliberately small: the
//! integrands in this crate are smooth away from endpoints, and endpoint
//! singularities are removed by substitution before the quadrature sees them.

use thiserror::Error;

/// Kronrod nodes on [-1, 1]. Odd entries are the embedded Gauss-7 nodes.
const XGK: [f64; 15] = [
    -0.991455371120813,
    -0.949107912342759,
    -0.864864423359769,
    -0.741531185599394,
    -0.586087235467691,
    -0.405845151377397,
    -0.207784955007898,
    0.0,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];

const WGK: [f64; 15] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];

const WG: [f64; 7] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("integrand returned a non-finite value near x = {x}")]
    NonFinite { x: f64 },
    #[error("quadrature did not converge: value {value}, error estimate {error} after {segments} segments")]
    NotConverged {
        value: f64,
        error: f64,
        segments: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Conservative absolute error estimate.
    pub abs_error: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_segments: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            tol_abs: 1e-12,
            tol_rel: 1e-11,
            max_segments: 4000,
        }
    }
}

/// One Gauss-Kronrod 15(7) panel on [lo, hi].
///
/// Returns the Kronrod value and a QUADPACK-style error estimate: the raw
/// Gauss/Kronrod discrepancy is rescaled by the integrand's deviation mass so
/// that smooth panels are not flagged just because the integral is large.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut fv = [0.0f64; 15];
    for (i, x) in XGK.iter().enumerate() {
        fv[i] = f(c + h * x);
    }
    let mut k = 0.0;
    let mut resabs = 0.0;
    for i in 0..15 {
        k += WGK[i] * fv[i];
        resabs += WGK[i] * fv[i].abs();
    }
    let mut g = 0.0;
    for i in 0..7 {
        g += WG[i] * fv[2 * i + 1];
    }
    let mean = 0.5 * k;
    let mut resasc = 0.0;
    for i in 0..15 {
        resasc += WGK[i] * (fv[i] - mean).abs();
    }
    let k = h * k;
    let g = h * g;
    let resabs = h.abs() * resabs;
    let resasc = h.abs() * resasc;
    let raw = (k - g).abs();
    let mut err = raw;
    if resasc != 0.0 && raw != 0.0 {
        err = resasc * (200.0 * raw / resasc).powf(1.5).min(1.0);
    }
    // Never report below the round-off floor of the panel itself.
    let floor = 50.0 * f64::EPSILON * resabs;
    if floor > err {
        err = floor;
    }
    (k, err)
}

/// Adaptive integration of `f` over the finite interval [lo, hi].
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    use std::collections::BinaryHeap;

    // Heap ordered by error estimate; f64 is not Ord so wrap in a key.
    #[derive(PartialEq)]
    struct Seg {
        err: f64,
        lo: f64,
        hi: f64,
        val: f64,
    }
    impl Eq for Seg {}
    impl Ord for Seg {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.err
                .partial_cmp(&other.err)
                .unwrap_or(std::cmp::Ordering::Equal)
        }
    }
    impl PartialOrd for Seg {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    if lo == hi {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            segments: 0,
        });
    }

    let (v, e) = gk15(f, lo, hi);
    if !v.is_finite() {
        return Err(QuadError::NonFinite { x: 0.5 * (lo + hi) });
    }
    let mut heap = BinaryHeap::new();
    heap.push(Seg {
        err: e,
        lo,
        hi,
        val: v,
    });
    let mut total = v;
    let mut err_total = e;
    let mut n = 1usize;

    loop {
        let tol = cfg.tol_abs.max(cfg.tol_rel * total.abs());
        if err_total <= tol {
            return Ok(QuadResult {
                value: total,
                abs_error: err_total,
                segments: n,
            });
        }
        if n >= cfg.max_segments {
            return Err(QuadError::NotConverged {
                value: total,
                error: err_total,
                segments: n,
            });
        }
        let worst = heap.pop().expect("heap drained before convergence");
        let m = 0.5 * (worst.lo + worst.hi);
        if m <= worst.lo || m >= worst.hi {
            // Interval at floating point resolution: accept its estimate.
            err_total -= worst.err;
            continue;
        }
        let (v1, e1) = gk15(f, worst.lo, m);
        let (v2, e2) = gk15(f, m, worst.hi);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(QuadError::NonFinite { x: m });
        }
        total += v1 + v2 - worst.val;
        err_total += e1 + e2 - worst.err;
        heap.push(Seg {
            err: e1,
            lo: worst.lo,
            hi: m,
            val: v1,
        });
        heap.push(Seg {
            err: e2,
            lo: m,
            hi: worst.hi,
            val: v2,
        });
        n += 1;
    }
}

/// Integral of `f` over [a, infinity) for integrands that eventually decay
/// monotonically. Consecutive blocks of doubling length are integrated until
/// they fall below tolerance; the remainder is closed with a geometric
/// extrapolation from the observed decay ratio.
pub fn improper_tail<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    first_len: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError> {
    assert!(first_len > 0.0, "first_len must be positive");
    let mut lo = a;
    let mut len = first_len;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut segments = 0usize;
    let mut prev_block: Option<f64> = None;

    for _ in 0..64 {
        let r = adaptive(f, lo, lo + len, cfg)?;
        total += r.value;
        err += r.abs_error;
        segments += r.segments;
        let tol = cfg.tol_abs.max(cfg.tol_rel * total.abs());
        if let Some(prev) = prev_block {
            let cur = r.value.abs();
            if cur <= tol && cur < prev.abs() {
                // Blocks double in length, so the per-block ratio already
                // accounts for growth; close with a geometric remainder.
                let ratio = if prev != 0.0 {
                    (r.value / prev).abs()
                } else {
                    0.0
                };
                let rem = if ratio > 0.0 && ratio < 0.95 {
                    cur * ratio / (1.0 - ratio)
                } else {
                    cur
                };
                return Ok(QuadResult {
                    value: total,
                    abs_error: err + rem,
                    segments,
                });
            }
        }
        prev_block = Some(r.value);
        lo += len;
        len *= 2.0;
    }
    Err(QuadError::NotConverged {
        value: total,
        error: err,
        segments,
    })
}
