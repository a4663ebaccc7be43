//! The catalog of MaxEnt prior/activation pairs.
//!
//! Every law is written in one natural-parameter convention,
//!
//! ```text
//! log p(x; theta) = theta * x + b * x^2 - log Z(theta)
//! ```
//!
//! on the kind's support, so parameters compose additively. The four kinds:
//!
//! | kind   | support  | b    | theta domain | mean lambda(theta)          |
//! |--------|----------|------|--------------|-----------------------------|
//! | TED    | [0, 1]   | 0    | all reals    | e^t/(e^t - 1) - 1/t         |
//! | TG     | [0, inf) | -1/2 | all reals    | t + N(t)/Phi(t)             |
//! | EXP    | [0, inf) | 0    | t < 0        | -1/t                        |
//! | LINEAR | reals    | -1/2 | all reals    | t                           |
//!
//! The TED mean resembles a sigmoid, the TG mean resembles softplus (and
//! tends to ReLU as the prior variance shrinks, see [`relu_limit_mean`]).
//! The exponential row is often written with rate a and mean 1/a; under the
//! natural parameterization that is theta = -a, lambda = -1/theta.

use crate::error::{Error, Result};
use crate::numerics::rng::RngStream;
use crate::numerics::special::{scaled_erfc, std_normal_cdf, std_normal_pdf};

const LN_SQRT_2PI: f64 = 0.9189385332046727417803297364056176398;
const SQRT_2_OVER_PI: f64 = 0.7978845608028653558798921198687637369;

/// Support of a univariate law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// The closed unit interval [0, 1].
    UnitInterval,
    /// The half line [0, inf).
    PositiveHalfLine,
    /// All of R.
    RealLine,
}

impl Support {
    /// Whether `x` lies strictly inside the support.
    pub fn contains_interior(self, x: f64) -> bool {
        match self {
            Support::UnitInterval => x > 0.0 && x < 1.0,
            Support::PositiveHalfLine => x > 0.0,
            Support::RealLine => x.is_finite(),
        }
    }

    /// Whether `x` lies in the closed support.
    pub fn contains(self, x: f64) -> bool {
        match self {
            Support::UnitInterval => (0.0..=1.0).contains(&x),
            Support::PositiveHalfLine => x >= 0.0,
            Support::RealLine => x.is_finite(),
        }
    }
}

/// Which MaxEnt prior/activation pair governs a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    /// Truncated exponential on [0, 1]; uniform prior, sigmoid-like mean.
    Ted,
    /// Positive-truncated Gaussian; softplus-like mean.
    Tg,
    /// Exponential on [0, inf); requires theta < 0.
    Exp,
    /// Gaussian on R; identity mean.
    Linear,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Ted,
        ActivationKind::Tg,
        ActivationKind::Exp,
        ActivationKind::Linear,
    ];

    /// Coefficient of x^2 in the log density.
    pub fn quad_coeff(self) -> f64 {
        match self {
            ActivationKind::Ted | ActivationKind::Exp => 0.0,
            ActivationKind::Tg | ActivationKind::Linear => -0.5,
        }
    }

    /// Natural parameter of the prior.
    pub fn theta0(self) -> f64 {
        match self {
            ActivationKind::Exp => -1.0,
            _ => 0.0,
        }
    }

    pub fn support(self) -> Support {
        match self {
            ActivationKind::Ted => Support::UnitInterval,
            ActivationKind::Tg | ActivationKind::Exp => Support::PositiveHalfLine,
            ActivationKind::Linear => Support::RealLine,
        }
    }

    /// Whether `theta` lies in the admissible natural-parameter domain.
    pub fn contains_theta(self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self {
            ActivationKind::Exp => theta < 0.0,
            _ => true,
        }
    }

    /// Whether `m` lies in the open mean range of the kind.
    pub fn contains_mean(self, m: f64) -> bool {
        match self {
            ActivationKind::Ted => m > 0.0 && m < 1.0,
            ActivationKind::Tg | ActivationKind::Exp => m > 0.0 && m.is_finite(),
            ActivationKind::Linear => m.is_finite(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Ted => "ted",
            ActivationKind::Tg => "tg",
            ActivationKind::Exp => "exp",
            ActivationKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ted" => Ok(ActivationKind::Ted),
            "tg" => Ok(ActivationKind::Tg),
            "exp" => Ok(ActivationKind::Exp),
            "linear" => Ok(ActivationKind::Linear),
            other => Err(Error::InvalidInput(format!(
                "unknown activation kind '{other}' (expected ted|tg|exp|linear)"
            ))),
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_theta(kind: ActivationKind, theta: f64) -> Result<()> {
    if kind.contains_theta(theta) {
        Ok(())
    } else {
        Err(Error::DomainViolation {
            kind,
            theta,
            coord: None,
        })
    }
}

// --- TED internals ------------------------------------------------------

/// Taylor window around the removable singularity at theta = 0.
const TED_SERIES_CUTOFF: f64 = 1e-3;

pub(crate) fn ted_mean(t: f64) -> f64 {
    if t.abs() < TED_SERIES_CUTOFF {
        // lambda = 1/2 + t/12 - t^3/720 + O(t^5)
        0.5 + t / 12.0 - t * t * t / 720.0
    } else {
        // e^t/(e^t - 1) = 1 + 1/expm1(t), stable for both signs
        1.0 + 1.0 / t.exp_m1() - 1.0 / t
    }
}

pub(crate) fn ted_variance(t: f64) -> f64 {
    if t.abs() < TED_SERIES_CUTOFF {
        // var = 1/12 - t^2/240 + O(t^4)
        1.0 / 12.0 - t * t / 240.0
    } else {
        // e^t/(e^t-1)^2 = 1/(2 sinh(t/2))^2, free of overflow for |t| <= 1400
        let s = 2.0 * (0.5 * t).sinh();
        1.0 / (t * t) - 1.0 / (s * s)
    }
}

fn ted_log_partition(t: f64) -> f64 {
    if t.abs() < TED_SERIES_CUTOFF {
        // log((e^t - 1)/t) = t/2 + t^2/24 - t^4/2880 + O(t^6)
        let t2 = t * t;
        0.5 * t + t2 / 24.0 - t2 * t2 / 2880.0
    } else if t > 700.0 {
        t - t.ln() + (-(-t).exp()).ln_1p()
    } else if t > 0.0 {
        t.exp_m1().ln() - t.ln()
    } else {
        (-t.exp_m1()).ln() - (-t).ln()
    }
}

// --- TG internals -------------------------------------------------------

/// Hazard ratio r(t) = N(t)/Phi(t), evaluated through the scaled erfc for
/// deep negative arguments where Phi underflows.
pub(crate) fn tg_hazard(t: f64) -> f64 {
    if t > -4.0 {
        std_normal_pdf(t) / std_normal_cdf(t)
    } else {
        SQRT_2_OVER_PI / scaled_erfc(-t / std::f64::consts::SQRT_2)
    }
}

pub(crate) fn tg_mean(t: f64) -> f64 {
    t + tg_hazard(t)
}

pub(crate) fn tg_variance(t: f64) -> f64 {
    let r = tg_hazard(t);
    1.0 - r * (t + r)
}

fn tg_log_partition(t: f64) -> f64 {
    // Z = integral_0^inf exp(t x - x^2/2) dx = sqrt(2 pi) exp(t^2/2) Phi(t)
    if t > -4.0 {
        0.5 * t * t + LN_SQRT_2PI + std_normal_cdf(t).ln()
    } else {
        // exp(t^2/2) Phi(t) = scaled_erfc(-t/sqrt(2)) / 2 exactly
        LN_SQRT_2PI + (0.5 * scaled_erfc(-t / std::f64::consts::SQRT_2)).ln()
    }
}

// --- unchecked scalar kernels (callers guarantee the theta domain) -------

pub(crate) fn mean_scalar(kind: ActivationKind, theta: f64) -> f64 {
    debug_assert!(kind.contains_theta(theta));
    match kind {
        ActivationKind::Ted => ted_mean(theta),
        ActivationKind::Tg => tg_mean(theta),
        ActivationKind::Exp => -1.0 / theta,
        ActivationKind::Linear => theta,
    }
}

pub(crate) fn variance_scalar(kind: ActivationKind, theta: f64) -> f64 {
    debug_assert!(kind.contains_theta(theta));
    match kind {
        ActivationKind::Ted => ted_variance(theta),
        ActivationKind::Tg => tg_variance(theta),
        ActivationKind::Exp => 1.0 / (theta * theta),
        ActivationKind::Linear => 1.0,
    }
}

fn log_partition_scalar(kind: ActivationKind, theta: f64) -> f64 {
    match kind {
        ActivationKind::Ted => ted_log_partition(theta),
        ActivationKind::Tg => tg_log_partition(theta),
        ActivationKind::Exp => -(-theta).ln(),
        ActivationKind::Linear => 0.5 * theta * theta + LN_SQRT_2PI,
    }
}

// --- public scalar operations ---------------------------------------------

/// Mean function lambda(theta): the layer activation.
pub fn mean_lambda(kind: ActivationKind, theta: f64) -> Result<f64> {
    check_theta(kind, theta)?;
    Ok(mean_scalar(kind, theta))
}

/// Derivative of the mean function; equals the variance of the law, hence
/// strictly positive on the domain.
pub fn lambda_prime(kind: ActivationKind, theta: f64) -> Result<f64> {
    check_theta(kind, theta)?;
    Ok(variance_scalar(kind, theta))
}

/// log Z(theta) such that exp(theta x + b x^2 - log Z) integrates to one
/// over the support. Conventions: the quadratic term of TG and LINEAR is
/// part of the density (b = -1/2), so their log Z absorbs sqrt(2 pi) and,
/// in the Gaussian case, theta^2/2.
pub fn log_partition(kind: ActivationKind, theta: f64) -> Result<f64> {
    check_theta(kind, theta)?;
    Ok(log_partition_scalar(kind, theta))
}

/// Inverse of the mean function: the theta with mean_lambda(theta) = m.
///
/// Bracketing bisection polished by Newton steps; lambda is strictly
/// increasing so the root is unique. `m` must lie in the open mean range.
pub fn lambda_inverse(kind: ActivationKind, m: f64) -> Result<f64> {
    if !kind.contains_mean(m) {
        return Err(Error::InvalidInput(format!(
            "mean {m} outside the range of {kind}"
        )));
    }
    match kind {
        ActivationKind::Linear => return Ok(m),
        ActivationKind::Exp => return Ok(-1.0 / m),
        _ => {}
    }
    // expand a bracket around zero
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut grow = 1.0;
    while mean_scalar(kind, lo) >= m {
        grow *= 2.0;
        lo -= grow;
        if lo < -1e12 {
            break;
        }
    }
    grow = 1.0;
    while mean_scalar(kind, hi) <= m {
        grow *= 2.0;
        hi += grow;
        if hi > 1e12 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_scalar(kind, mid) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..3 {
        let f = mean_scalar(kind, t) - m;
        let d = variance_scalar(kind, t);
        if d > 0.0 {
            let step = f / d;
            let t_new = t - step;
            if t_new.is_finite() && t_new > lo - 1.0 && t_new < hi + 1.0 {
                t = t_new;
            }
        }
    }
    Ok(t)
}

/// Mean of the positive-truncated Gaussian under a prior of standard
/// deviation `sigma`: sigma * lambda_tg(a / sigma). As sigma shrinks this
/// tends to max(a, 0), the rectified linear unit.
pub fn relu_limit_mean(a: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "sigma must be positive");
    sigma * tg_mean(a / sigma)
}

// --- univariate law --------------------------------------------------------

/// One per-coordinate factor of a surrogate density: a kind plus the total
/// natural parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateLaw {
    pub kind: ActivationKind,
    pub theta: f64,
}

impl UnivariateLaw {
    pub fn new(kind: ActivationKind, theta: f64) -> Result<Self> {
        check_theta(kind, theta)?;
        Ok(UnivariateLaw { kind, theta })
    }

    pub fn mean(&self) -> f64 {
        mean_scalar(self.kind, self.theta)
    }

    pub fn variance(&self) -> f64 {
        variance_scalar(self.kind, self.theta)
    }

    /// Log density at `x`; -inf outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if !self.kind.support().contains(x) {
            return f64::NEG_INFINITY;
        }
        self.theta * x + self.kind.quad_coeff() * x * x
            - log_partition_scalar(self.kind, self.theta)
    }
}

/// Draw a single variate from the law.
pub fn sample_univariate(law: &UnivariateLaw, rng: &mut RngStream) -> f64 {
    let t = law.theta;
    match law.kind {
        ActivationKind::Ted => {
            let u = rng.uniform();
            if t.abs() < 1e-10 {
                u
            } else if t > 0.0 {
                // F^{-1}(u) = 1 + ln(u + (1-u) e^{-t}) / t, exact and stable
                1.0 + (u + (1.0 - u) * (-t).exp()).ln() / t
            } else {
                (u * t.exp_m1()).ln_1p() / t
            }
        }
        ActivationKind::Tg => {
            // X ~ N(t, 1) conditioned on X > 0
            t + trunc_std_normal(-t, f64::INFINITY, rng)
        }
        ActivationKind::Exp => {
            let u = rng.uniform();
            -(-u).ln_1p() / (-t)
        }
        ActivationKind::Linear => t + rng.standard_normal(),
    }
}

/// Standard normal draw conditioned on [lo, hi]. Valid for far one-sided
/// tails (e.g. lo > 6) and infinite endpoints.
pub fn truncated_interval_gaussian(lo: f64, hi: f64, rng: &mut RngStream) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidInput(format!(
            "truncation bounds must not be NaN: [{lo}, {hi}]"
        )));
    }
    if lo >= hi {
        return Err(Error::EmptyInterval { lo, hi });
    }
    Ok(trunc_std_normal(lo, hi, rng))
}

/// Rejection sampler for the truncated standard normal.
///
/// Three regimes: plain normal rejection when the interval straddles zero
/// and is wide, uniform proposals with a Gaussian accept ratio on narrow
/// intervals, and a shifted-exponential proposal (Robert 1995) for tail
/// intervals. Acceptance probability is bounded away from zero in every
/// regime.
pub(crate) fn trunc_std_normal(lo: f64, hi: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(lo < hi);
    if hi <= 0.0 {
        return -trunc_std_normal(-hi, -lo, rng);
    }
    if lo <= 0.0 {
        if hi - lo >= 1.0 {
            loop {
                let z = rng.standard_normal();
                if z >= lo && z <= hi {
                    return z;
                }
            }
        }
        // narrow interval through zero: density maximum is 1 at x = 0
        loop {
            let x = rng.uniform_in(lo, hi);
            if rng.uniform() <= (-0.5 * x * x).exp() {
                return x;
            }
        }
    }
    // 0 < lo < hi
    let alpha = 0.5 * (lo + (lo * lo + 4.0).sqrt());
    if hi.is_finite() && hi - lo <= 1.0 / alpha {
        // short tail interval: uniform proposal, accept by density ratio to x = lo
        loop {
            let x = rng.uniform_in(lo, hi);
            if rng.uniform() <= (0.5 * (lo * lo - x * x)).exp() {
                return x;
            }
        }
    }
    // shifted exponential proposal with the optimal rate
    loop {
        let x = lo - rng.uniform().ln() / alpha;
        if x > hi {
            continue;
        }
        let d = x - alpha;
        if rng.uniform() <= (-0.5 * d * d).exp() {
            return x;
        }
    }
}
