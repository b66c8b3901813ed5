//! Gaussian tails, the accordant-advantage mixture model and the
//! sample-size / threshold design of the key test.
//!
//! Residuals of unmodified pixels are modelled as `N(0, σ²)` and those of
//! modified pixels as `N(1, σ²)`. A correct key samples the two halves
//! equally; a wrong key samples the image-wide mixture with weight `r/2`
//! on the shifted component. Counting residuals above a threshold `A`
//! turns each key into a binomial count whose success probability is `p0`
//! for the correct key and `p1` otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold that maximises `α1 - α0` for a unit mean shift.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Upper tail of the standard normal, `P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
    } else {
        // 1 - (small tail) rounds once, which keeps inverse_q accurate
        // in the lower half.
        1.0 - 0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// `x` such that `q_function(x) = p`, found by bisection.
pub fn inverse_q(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("p", p, "0 < p < 1"));
    }
    if p > 0.5 {
        // 1 - p is exact here.
        return Ok(-upper_tail_quantile(1.0 - p));
    }
    Ok(upper_tail_quantile(p))
}

fn upper_tail_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while q_function(hi) > p {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever bracket end lands closer in probability
    if (q_function(lo) - p).abs() <= (q_function(hi) - p).abs() {
        lo
    } else {
        hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub rate: f64,
    pub sigma: f64,
    pub threshold: f64,
    /// `P(X0 > A)` for unmodified residuals.
    pub alpha0: f64,
    /// `P(X1 > A)` for modified residuals.
    pub alpha1: f64,
    /// Exceedance probability along the correct key's path.
    pub p0: f64,
    /// Exceedance probability along a wrong key's path.
    pub p1: f64,
    /// The accordant advantage `p0 - p1`.
    pub delta_p: f64,
}

impl MixtureModel {
    pub fn delta_alpha(&self) -> f64 {
        self.alpha1 - self.alpha0
    }
}

pub fn build_mixture(rate: f64, sigma: f64, threshold: f64) -> Result<MixtureModel> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain("sigma", sigma, "sigma > 0"));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::domain("r", rate, "0 <= r <= 1"));
    }
    if !threshold.is_finite() {
        return Err(Error::domain("A", threshold, "finite threshold"));
    }
    let alpha0 = q_function(threshold / sigma);
    let alpha1 = q_function((threshold - 1.0) / sigma);
    let half = rate / 2.0;
    Ok(MixtureModel {
        rate,
        sigma,
        threshold,
        alpha0,
        alpha1,
        p0: 0.5 * (alpha0 + alpha1),
        p1: (1.0 - half) * alpha0 + half * alpha1,
        delta_p: 0.5 * (1.0 - rate) * (alpha1 - alpha0),
    })
}

/// `1 - 2 Q(1 / 2σ)`, the tail gap at `A = 1/2`.
pub fn delta_alpha_at_midpoint(sigma: f64) -> f64 {
    1.0 - 2.0 * q_function(0.5 / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    pub keyspace_size: u64,
    pub p_f: f64,
    pub p_m: f64,
    pub w_f: f64,
    pub w_m: f64,
    /// Samples (path bits) per key.
    pub n: u64,
    /// Accept a key when its count reaches this value.
    pub threshold: f64,
    /// Pixels needed on average to collect `n` path samples.
    pub n_star: f64,
}

impl AttackPlan {
    pub fn accepts(&self, count: u64) -> bool {
        count as f64 >= self.threshold
    }
}

/// Unrounded sample size for the given quantiles and exceedance rates.
pub fn sample_size(w_f: f64, w_m: f64, p0: f64, p1: f64, delta_p: f64) -> f64 {
    let spread = w_m * (p0 * (1.0 - p0)).sqrt() + w_f * (p1 * (1.0 - p1)).sqrt();
    (spread / delta_p).powi(2)
}

/// Test design with one expected false alarm over the whole keyspace
/// (`p_f = 1 / keyspace_size`).
pub fn plan_attack(model: &MixtureModel, keyspace_size: u64, p_m: f64) -> Result<AttackPlan> {
    plan_attack_with_budget(model, keyspace_size, p_m, 1.0)
}

/// Test design with `p_f = expected_false_alarms / keyspace_size`.
pub fn plan_attack_with_budget(
    model: &MixtureModel,
    keyspace_size: u64,
    p_m: f64,
    expected_false_alarms: f64,
) -> Result<AttackPlan> {
    if !(model.delta_p > 0.0) {
        return Err(Error::Infeasible(format!(
            "no accordant advantage at r = {} (delta_p = {})",
            model.rate, model.delta_p
        )));
    }
    if keyspace_size < 2 {
        return Err(Error::domain(
            "keyspace_size",
            keyspace_size as f64,
            "at least 2 keys",
        ));
    }
    if !(p_m > 0.0 && p_m < 0.5) {
        return Err(Error::domain("p_m", p_m, "0 < p_m < 0.5"));
    }
    let p_f = expected_false_alarms / keyspace_size as f64;
    if !(p_f > 0.0 && p_f <= 0.5) {
        return Err(Error::domain("p_f", p_f, "0 < p_f <= 0.5"));
    }
    let w_f = inverse_q(p_f)?;
    let w_m = inverse_q(p_m)?;
    let exact = sample_size(w_f, w_m, model.p0, model.p1, model.delta_p);
    let n = if exact >= u64::MAX as f64 {
        u64::MAX
    } else {
        (exact.ceil() as u64).max(1)
    };
    let nf = n as f64;
    let threshold = w_f * (nf * model.p1 * (1.0 - model.p1)).sqrt() + nf * model.p1;
    let n_star = if model.rate > 0.0 {
        exact / model.rate
    } else {
        f64::INFINITY
    };
    Ok(AttackPlan {
        keyspace_size,
        p_f,
        p_m,
        w_f,
        w_m,
        n,
        threshold,
        n_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from the quadrature oracle in tests/common/oracle.rs.
    const Q_AT_ONE: f64 = 0.158_655_253_931_457_02;
    const Q_AT_HALF: f64 = 0.308_537_538_725_986_94;
    const INV_Q_AT_001: f64 = 2.326_347_874_040_840_76;

    #[test]
    fn q_reference_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.0) - Q_AT_ONE).abs() < 1e-15);
        assert!((q_function(0.5) - Q_AT_HALF).abs() < 1e-15);
        for i in 0..200 {
            let x = i as f64 * 0.04;
            assert!((q_function(-x) - (1.0 - q_function(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_q_values() {
        assert_eq!(inverse_q(0.5).unwrap(), 0.0);
        assert!((inverse_q(0.01).unwrap() - INV_Q_AT_001).abs() < 1e-12);
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(inverse_q(bad).is_err());
        }
        for i in 0..=1200 {
            let x = -6.0 + i as f64 * 0.01;
            let back = inverse_q(q_function(x)).unwrap();
            assert!((back - x).abs() <= 1e-8, "x = {x}, got {back}");
        }
    }

    #[test]
    fn inverse_q_hits_tiny_tails() {
        let p = 1.0 / (65536.0 * 760.0);
        let x = inverse_q(p).unwrap();
        assert!(((q_function(x) - p) / p).abs() < 1e-10);
    }

    #[test]
    fn midpoint_delta_alpha() {
        let m = build_mixture(0.3, 1.0, 0.5).unwrap();
        assert!((m.delta_alpha() - (1.0 - 2.0 * Q_AT_HALF)).abs() < 1e-15);
        assert!((delta_alpha_at_midpoint(1.0) - 0.382_925).abs() < 1e-6);
    }

    #[test]
    fn mixture_edge_rates() {
        let full = build_mixture(1.0, 1.3, 0.5).unwrap();
        assert_eq!(full.delta_p, 0.0);
        assert!((full.p0 - full.p1).abs() < 1e-15);
        let empty = build_mixture(0.0, 1.3, 0.5).unwrap();
        assert_eq!(empty.p1, empty.alpha0);
        assert!((empty.delta_p - empty.delta_alpha() / 2.0).abs() < 1e-15);
        assert!(build_mixture(0.5, 0.0, 0.5).is_err());
        assert!(build_mixture(0.5, -1.0, 0.5).is_err());
        assert!(build_mixture(1.2, 1.0, 0.5).is_err());
    }

    #[test]
    fn golden_plan() {
        // sigma = 1, r = 0.3, |K| = 2^16, p_m = 0.01, A = 1/2
        let m = build_mixture(0.3, 1.0, 0.5).unwrap();
        let plan = plan_attack(&m, 1 << 16, 0.01).unwrap();
        assert_eq!(plan.n, 561);
        assert!((plan.threshold - 252.884_739_730_017_83).abs() < 1e-8);
        assert!((plan.p_f - 1.0 / 65536.0).abs() < 1e-20);
        assert!(plan.n as f64 * m.p1 < plan.threshold);
        assert!(plan.threshold < plan.n as f64 * m.p0);
    }

    #[test]
    fn halving_advantage_quadruples_n() {
        let m = build_mixture(0.3, 1.5, 0.5).unwrap();
        let w_f = inverse_q(1.0 / 4096.0).unwrap();
        let w_m = inverse_q(0.01).unwrap();
        let n1 = sample_size(w_f, w_m, m.p0, m.p1, m.delta_p);
        let n2 = sample_size(w_f, w_m, m.p0, m.p1, m.delta_p / 2.0);
        assert!((n2 / n1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_bad_inputs() {
        let full = build_mixture(1.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            plan_attack(&full, 1 << 16, 0.01),
            Err(Error::Infeasible(_))
        ));
        let m = build_mixture(0.3, 1.0, 0.5).unwrap();
        assert!(plan_attack(&m, 1, 0.01).is_err());
        assert!(plan_attack(&m, 100, 0.5).is_err());
        assert!(plan_attack(&m, 100, 0.0).is_err());
    }

    #[test]
    fn n_star_diverges_at_both_ends() {
        let plan = |r: f64| {
            let m = build_mixture(r, 1.5, 0.5).unwrap();
            plan_attack(&m, 1 << 16, 0.01).unwrap().n_star
        };
        assert!(plan(0.001) > 50.0 * plan(0.3));
        assert!(plan(0.999) > 50.0 * plan(0.5));
        let m0 = build_mixture(0.0, 1.5, 0.5).unwrap();
        assert!(plan_attack(&m0, 1 << 16, 0.01).unwrap().n_star.is_infinite());
    }

    #[test]
    fn n_star_matches_closed_form() {
        let m = build_mixture(0.4, 2.0, 0.5).unwrap();
        let plan = plan_attack(&m, 1 << 12, 0.01).unwrap();
        let spread = plan.w_m * (m.p0 * (1.0 - m.p0)).sqrt() + plan.w_f * (m.p1 * (1.0 - m.p1)).sqrt();
        let closed = 4.0 * spread * spread / (0.4 * ((1.0 - 0.4) * m.delta_alpha()).powi(2));
        assert!((plan.n_star - closed).abs() < 1e-9 * closed);
    }

    #[test]
    fn two_key_space_puts_threshold_on_wrong_key_mean() {
        // p_f = 1/2 makes w_f vanish, so the upper separation inequality
        // degenerates to equality.
        let m = build_mixture(0.3, 1.0, 0.5).unwrap();
        let plan = plan_attack(&m, 2, 0.01).unwrap();
        assert!(plan.w_f.abs() < 1e-12);
        let n = plan.n as f64;
        assert!((plan.threshold - n * m.p1).abs() < 1e-9);
        assert!(plan.threshold < n * m.p0);
    }
}
