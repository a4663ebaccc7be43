//! Shared test oracles, deliberately independent of the library's own
//! evaluation paths: moments come from raw-density quadrature, eigenvalues
//! from Jacobi rotations, and distribution checks from Kolmogorov-Smirnov
//! statistics against quadrature CDFs.
//!
//! Each test binary uses a subset of these helpers.
#![allow(dead_code)]

use pbn_core::ActivationKind;

/// Composite Simpson integration on [a, b] with n subintervals (n even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n.is_multiple_of(2) { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        s += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Integration window covering all but ~1e-30 of the law's mass.
pub fn law_window(kind: ActivationKind, theta: f64) -> (f64, f64) {
    match kind {
        ActivationKind::Ted => (0.0, 1.0),
        ActivationKind::Tg => (0.0, theta.max(0.0) + 15.0),
        ActivationKind::Exp => (0.0, 80.0 / (-theta)),
        ActivationKind::Linear => (theta - 12.0, theta + 12.0),
    }
}

/// Mean and variance of the density proportional to exp(theta x + b x^2)
/// on the kind's support, straight from quadrature of the raw density.
pub fn quadrature_moments(kind: ActivationKind, theta: f64) -> (f64, f64) {
    let b = kind.quad_coeff();
    let (lo, hi) = law_window(kind, theta);
    // factor out the density peak to keep the integrand scaled
    let n = 200_000;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        peak = peak.max(theta * x + b * x * x);
    }
    let dens = |x: f64| (theta * x + b * x * x - peak).exp();
    let z = simpson(dens, lo, hi, n);
    let m1 = simpson(|x| x * dens(x), lo, hi, n) / z;
    let m2 = simpson(|x| (x - m1) * (x - m1) * dens(x), lo, hi, n) / z;
    (m1, m2)
}

/// Kolmogorov-Smirnov statistic of samples against a CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n);
        d = d.max((i + 1) as f64 / n - f);
    }
    d
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// descending order.
pub fn jacobi_eigenvalues(a: &ndarray::Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[[q, q]] - m[[p, p]]) / m[[p, q]];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}
