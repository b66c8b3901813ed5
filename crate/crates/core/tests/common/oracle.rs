//! Independent numerical references used to check the library.
//!
//! Nothing in here calls into `stegokey`; the Gaussian tail comes from
//! direct quadrature of the density instead of an erfc routine.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn density(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `∫_a^b φ(t) dt` by composite 20-point Gauss-Legendre on panels of 1/8.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    thread_local! {
        static RULE: Vec<(f64, f64)> = gauss_legendre(20);
    }
    RULE.with(|rule| {
        let panels = (((b - a) * 8.0).ceil() as usize).max(1);
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let panel: f64 = rule
                .iter()
                .map(|&(x, w)| w * density(mid + 0.5 * h * x))
                .sum();
            total += 0.5 * h * panel;
        }
        total
    })
}

/// Upper tail of the standard normal, by quadrature.
pub fn q_oracle(x: f64) -> f64 {
    if x >= 0.0 {
        normal_mass(x, x + 40.0)
    } else {
        1.0 - normal_mass(-x, -x + 40.0)
    }
}

/// Solves `q_oracle(x) = p` by bisection.
pub fn inverse_q_oracle(p: f64) -> f64 {
    let (mut lo, mut hi) = (-12.0, 12.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_oracle(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The test-design quantities, evaluated from the oracle tail only.
#[derive(Debug, Clone, Copy)]
pub struct PlanOracle {
    pub alpha0: f64,
    pub alpha1: f64,
    pub p0: f64,
    pub p1: f64,
    pub n: f64,
    pub n_ceil: f64,
    pub threshold: f64,
}

pub fn plan_oracle(r: f64, sigma: f64, a: f64, p_f: f64, p_m: f64) -> PlanOracle {
    let alpha0 = q_oracle(a / sigma);
    let alpha1 = q_oracle((a - 1.0) / sigma);
    let p0 = 0.5 * (alpha0 + alpha1);
    let p1 = (1.0 - r / 2.0) * alpha0 + r / 2.0 * alpha1;
    let w_f = inverse_q_oracle(p_f);
    let w_m = inverse_q_oracle(p_m);
    let spread = w_m * (p0 * (1.0 - p0)).sqrt() + w_f * (p1 * (1.0 - p1)).sqrt();
    let n = (spread / (p0 - p1)).powi(2);
    let n_ceil = n.ceil();
    let threshold = w_f * (n_ceil * p1 * (1.0 - p1)).sqrt() + n_ceil * p1;
    PlanOracle {
        alpha0,
        alpha1,
        p0,
        p1,
        n,
        n_ceil,
        threshold,
    }
}
