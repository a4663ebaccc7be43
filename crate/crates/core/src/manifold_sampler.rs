//! Exact sampling of the posterior on the manifold {x : W'x = z}.
//!
//! Conditioned on a feature z, the input can only lie on the affine slice
//! M(z) = {x : W'x = z} intersected with the prior's support, and the
//! posterior density there is proportional to the prior. Moving along any
//! direction b orthogonal to the columns of W stays on M(z), so a
//! hit-and-run chain that cycles the columns of an orthonormal null-space
//! basis and redraws the line coordinate from the prior restricted to the
//! feasible segment has the posterior as its stationary law. The line laws
//! are closed-form for every kind:
//!
//! - uniform-on-hypercube prior: uniform on the segment,
//! - truncated Gaussian prior: a unit-variance Gaussian in the line
//!   coordinate, truncated to the segment,
//! - exponential prior: a truncated exponential whose rate is the
//!   direction's alignment with the prior parameter,
//! - Gaussian prior: no truncation at all, which collapses to the closed
//!   form x = xhat + B u with u standard normal.
//!
//! For instances with at most two free directions a brute-force quadrature
//! oracle evaluates the true conditional mean, which is what the MCMC and
//! surrogate means are tested against.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::exponential_family::{trunc_std_normal, ActivationKind, Support};
use crate::gamma_inverse::{gamma_inverse, LayerMap, SolverConfig};
use crate::numerics::linalg::{inf_norm, is_finite_vec, CholeskyFactor};
use crate::numerics::rng::RngStream;

/// Sweeps between drift re-projections onto the manifold.
const REPROJECT_EVERY: u64 = 1000;
/// Tolerance on ||W'x - z||_inf for accepting a start point.
const MANIFOLD_TOL: f64 = 1e-9;

/// Largest open interval (t_lo, t_hi) containing 0 such that
/// x + t * direction stays strictly inside the support.
///
/// For the positive quadrant the bounds are max over rising coordinates of
/// -x_i/d_i and min over falling ones; the hypercube additionally
/// intersects the upper-bound constraints. Sides with no active constraint
/// are unbounded.
pub fn feasible_segment(
    x: &ArrayView1<f64>,
    direction: &ArrayView1<f64>,
    support: Support,
) -> Result<(f64, f64)> {
    if direction.iter().all(|&d| d == 0.0) {
        return Err(Error::InvalidInput("zero direction".into()));
    }
    if let Some((i, &v)) = x
        .iter()
        .enumerate()
        .find(|(_, &v)| !support.contains_interior(v))
    {
        return Err(Error::BoundaryState { coord: i, value: v });
    }
    match interval_along(x, direction, support) {
        Some(seg) => Ok(seg),
        None => Err(Error::InvalidInput(
            "no feasible segment through the given point".into(),
        )),
    }
}

/// Interval intersection version of [`feasible_segment`] that tolerates an
/// arbitrary base point; `None` when the slice misses the support.
fn interval_along(
    x: &ArrayView1<f64>,
    d: &ArrayView1<f64>,
    support: Support,
) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let hypercube = matches!(support, Support::UnitInterval);
    if matches!(support, Support::RealLine) {
        return Some((lo, hi));
    }
    for (&xi, &di) in x.iter().zip(d.iter()) {
        if di > 0.0 {
            lo = lo.max(-xi / di);
            if hypercube {
                hi = hi.min((1.0 - xi) / di);
            }
        } else if di < 0.0 {
            hi = hi.min(-xi / di);
            if hypercube {
                lo = lo.max((1.0 - xi) / di);
            }
        } else {
            let inside = if hypercube {
                xi > 0.0 && xi < 1.0
            } else {
                xi > 0.0
            };
            if !inside {
                return None;
            }
        }
    }
    if lo < hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Draw from a density proportional to exp(-rate * t) on (lo, hi).
///
/// Handles both signs of the rate and degrades to the uniform draw when the
/// exponent variation over the interval is negligible. An infinite side is
/// only permitted when the density decays toward it.
fn trunc_exp_sample(rate: f64, lo: f64, hi: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(lo < hi);
    if lo.is_infinite() || hi.is_infinite() {
        debug_assert!(
            (hi.is_infinite() && rate > 0.0) || (lo.is_infinite() && rate < 0.0),
            "non-integrable exponential slice"
        );
        if hi.is_infinite() {
            return lo - rng.uniform().ln() / rate;
        }
        return hi - rng.uniform().ln() / rate;
    }
    let width = hi - lo;
    if (rate * width).abs() < 1e-12 {
        return rng.uniform_in(lo, hi);
    }
    if rate > 0.0 {
        let u = rng.uniform();
        lo - (u * (-rate * width).exp_m1()).ln_1p() / rate
    } else {
        let u = rng.uniform();
        hi - (u * (rate * width).exp_m1()).ln_1p() / (-rate)
    }
}

/// A point on the manifold plus everything one hit-and-run sweep needs.
#[derive(Debug, Clone)]
pub struct ChainState {
    x: Array1<f64>,
    basis: Array2<f64>,
    z: Array1<f64>,
    kind: ActivationKind,
    theta0: Array1<f64>,
    w: Array2<f64>,
    gram: CholeskyFactor,
    rng: RngStream,
    steps_taken: u64,
}

impl ChainState {
    /// Start a chain at `x0`, which must satisfy W'x0 = z to 1e-9 and lie
    /// strictly inside the support; anything else is rejected rather than
    /// repaired.
    pub fn new(
        map: &LayerMap,
        z: &ArrayView1<f64>,
        x0: &ArrayView1<f64>,
        rng: RngStream,
    ) -> Result<Self> {
        if x0.len() != map.input_dim() || z.len() != map.feature_dim() {
            return Err(Error::InvalidInput(format!(
                "chain dimensions: x0 has {} entries, z has {}, layer is {} x {}",
                x0.len(),
                z.len(),
                map.input_dim(),
                map.feature_dim()
            )));
        }
        if !is_finite_vec(x0) || !is_finite_vec(z) {
            return Err(Error::InvalidInput("non-finite chain inputs".into()));
        }
        let w = map.weights().clone();
        let drift = inf_norm(&(&w.t().dot(x0) - z).view());
        if drift > MANIFOLD_TOL {
            return Err(Error::InfeasibleStart(format!(
                "||W'x0 - z||_inf = {drift:e} exceeds {MANIFOLD_TOL:e}"
            )));
        }
        let support = map.kind().support();
        if let Some((i, &v)) = x0
            .iter()
            .enumerate()
            .find(|(_, &v)| !support.contains_interior(v))
        {
            return Err(Error::InfeasibleStart(format!(
                "x0[{i}] = {v} not strictly inside the support"
            )));
        }
        let basis = map.null_basis().clone();
        let gram = map.gram_factor().clone();
        Ok(ChainState {
            x: x0.to_owned(),
            basis,
            z: z.to_owned(),
            kind: map.kind(),
            theta0: map.theta0().clone(),
            w,
            gram,
            rng,
            steps_taken: 0,
        })
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn reproject(&mut self) {
        let drift = self.w.t().dot(&self.x) - &self.z;
        let corr = self.gram.solve(&drift.view());
        self.x -= &self.w.dot(&corr);
    }
}

/// One full sweep: cycle every null-space column in order, redrawing the
/// line coordinate from the prior restricted to the feasible segment.
/// W'x is invariant; the support stays strictly satisfied.
pub fn hit_and_run_step(state: &mut ChainState) -> Result<()> {
    let support = state.kind.support();
    let n_dirs = state.basis.ncols();
    for j in 0..n_dirs {
        let b = state.basis.column(j).to_owned();
        let bn = b.dot(&b).sqrt();
        if bn == 0.0 {
            continue;
        }
        let (t_lo, t_hi) = match support {
            Support::RealLine => (f64::NEG_INFINITY, f64::INFINITY),
            _ => feasible_segment(&state.x.view(), &b.view(), support)?,
        };
        let x_new = match state.kind {
            ActivationKind::Ted | ActivationKind::Exp => {
                // prior restricted to the line is exp(theta0'b * t)
                let rate = -state.theta0.dot(&b);
                let t = trunc_exp_sample(rate, t_lo, t_hi, &mut state.rng);
                &state.x + &(&b * t)
            }
            ActivationKind::Tg | ActivationKind::Linear => {
                // unit-variance Gaussian in the normalized line coordinate
                let bhat = &b / bn;
                let c = bhat.dot(&state.x);
                let mu = bhat.dot(&state.theta0);
                let lo = c + bn * t_lo;
                let hi = c + bn * t_hi;
                let xi = mu + trunc_std_normal(lo - mu, hi - mu, &mut state.rng);
                &state.x + &(&bhat * (xi - c))
            }
        };
        // roundoff can park a coordinate on the boundary; skip such moves
        if x_new.iter().all(|&v| support.contains_interior(v)) {
            state.x = x_new;
        }
    }
    state.steps_taken += 1;
    if state.steps_taken.is_multiple_of(REPROJECT_EVERY) {
        state.reproject();
    }
    Ok(())
}

/// Run a chain and collect `n_samples` states after `burn_in` sweeps,
/// keeping every `thin`-th sweep. The LINEAR kind needs no chain at all and
/// delegates to [`gaussian_manifold_sample`].
pub fn run_chain(
    map: &LayerMap,
    z: &ArrayView1<f64>,
    x0: &ArrayView1<f64>,
    burn_in: usize,
    n_samples: usize,
    thin: usize,
    rng: RngStream,
) -> Result<Array2<f64>> {
    if map.kind() == ActivationKind::Linear {
        let drift = inf_norm(&(&map.weights().t().dot(x0) - z).view());
        if drift > MANIFOLD_TOL {
            return Err(Error::InfeasibleStart(format!(
                "||W'x0 - z||_inf = {drift:e} exceeds {MANIFOLD_TOL:e}"
            )));
        }
        let mut rng = rng;
        return gaussian_manifold_sample(map, z, &mut rng, n_samples);
    }
    let mut state = ChainState::new(map, z, x0, rng)?;
    for _ in 0..burn_in {
        hit_and_run_step(&mut state)?;
    }
    let thin = thin.max(1);
    let mut samples = Array2::<f64>::zeros((n_samples, map.input_dim()));
    for mut row in samples.rows_mut() {
        for _ in 0..thin {
            hit_and_run_step(&mut state)?;
        }
        row.assign(&state.x);
    }
    Ok(samples)
}

/// Closed-form posterior sampling for the Gaussian prior:
/// x = xhat + B u with u independent standard normals.
pub fn gaussian_manifold_sample(
    map: &LayerMap,
    z: &ArrayView1<f64>,
    rng: &mut RngStream,
    n: usize,
) -> Result<Array2<f64>> {
    if map.kind() != ActivationKind::Linear {
        return Err(Error::InvalidInput(format!(
            "gaussian_manifold_sample requires the linear kind, got {}",
            map.kind()
        )));
    }
    let sol = gamma_inverse(map, z, &SolverConfig::default())?;
    if !sol.converged {
        return Err(Error::InvalidInput(
            "least-squares solve failed to converge".into(),
        ));
    }
    let basis = map.null_basis();
    let free = basis.ncols();
    let mut samples = Array2::<f64>::zeros((n, map.input_dim()));
    for mut row in samples.rows_mut() {
        let u = Array1::from_shape_fn(free, |_| rng.standard_normal());
        row.assign(&(&sol.x_hat + &basis.dot(&u)));
    }
    Ok(samples)
}

/// Number of grid points per quadrature axis.
const ORACLE_GRID: usize = 2001;
/// Half-width, in prior standard deviations, of the quadrature window for
/// Gaussian-tailed line densities.
const GAUSS_WINDOW: f64 = 12.0;
/// Log-density drop, in nats, at which an exponential tail is cut off.
const EXP_WINDOW_NATS: f64 = 80.0;

/// Clip an infinite integration side using the decay of the line density.
fn clip_interval(
    kind: ActivationKind,
    mu: f64,
    slope: f64,
    lo: f64,
    hi: f64,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (lo, hi);
    match kind {
        ActivationKind::Tg | ActivationKind::Linear => {
            lo = lo.max(mu - GAUSS_WINDOW);
            hi = hi.min(mu + GAUSS_WINDOW);
        }
        ActivationKind::Ted => {} // hypercube slices are bounded
        ActivationKind::Exp => {
            // density exp(slope * t): a side may be infinite only when the
            // density decays toward it
            if hi.is_infinite() {
                if slope >= -1e-12 {
                    return Err(Error::OracleUnavailable(
                        "non-integrable exponential slice".into(),
                    ));
                }
                hi = lo + EXP_WINDOW_NATS / (-slope);
            }
            if lo.is_infinite() {
                if slope <= 1e-12 {
                    return Err(Error::OracleUnavailable(
                        "non-integrable exponential slice".into(),
                    ));
                }
                lo = hi - EXP_WINDOW_NATS / slope;
            }
        }
    }
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(Error::OracleUnavailable("empty integration window".into()))
    }
}

/// Brute-force conditional mean on the manifold for instances with at most
/// two free directions: parameterize x = x_p + B u, integrate x times the
/// prior over the feasible u-region on a dense grid, and normalize.
pub fn conditional_mean_oracle(map: &LayerMap, z: &ArrayView1<f64>) -> Result<Array1<f64>> {
    conditional_mean_oracle_with_grid(map, z, ORACLE_GRID)
}

/// [`conditional_mean_oracle`] with an explicit per-axis grid resolution;
/// anything below the default is clamped up.
pub fn conditional_mean_oracle_with_grid(
    map: &LayerMap,
    z: &ArrayView1<f64>,
    grid_points: usize,
) -> Result<Array1<f64>> {
    let grid_points = grid_points.max(ORACLE_GRID);
    let n = map.input_dim();
    let m = map.feature_dim();
    if z.len() != m {
        return Err(Error::InvalidInput(format!(
            "z length {} does not match feature dimension {}",
            z.len(),
            m
        )));
    }
    let free = n - m;
    if free > 2 {
        return Err(Error::OracleUnavailable(format!(
            "quadrature oracle restricted to N - M <= 2, got {free}"
        )));
    }
    let w = map.weights();
    let x_p = w.dot(&map.gram_factor().solve(z));
    if free == 0 {
        return Ok(x_p);
    }
    let kind = map.kind();
    let support = kind.support();
    let theta0 = map.theta0();
    let bcoef = kind.quad_coeff();
    let basis = map.null_basis();
    let log_prior = |x: &Array1<f64>| -> f64 {
        let mut s = 0.0;
        for (&t0, &xi) in theta0.iter().zip(x.iter()) {
            s += t0 * xi + bcoef * xi * xi;
        }
        s
    };

    let b1 = basis.column(0).to_owned();
    if free == 1 {
        let seg = interval_along(&x_p.view(), &b1.view(), support)
            .ok_or_else(|| Error::OracleUnavailable("manifold misses the support".into()))?;
        let mu = b1.dot(&(theta0 - &x_p));
        let slope = theta0.dot(&b1);
        let (lo, hi) = clip_interval(kind, mu, slope, seg.0, seg.1)?;
        let grid = 10 * grid_points + 1;
        let hstep = (hi - lo) / (grid - 1) as f64;
        let mut lp_max = f64::NEG_INFINITY;
        for i in 0..grid {
            let t = lo + hstep * i as f64;
            let x = &x_p + &(&b1 * t);
            lp_max = lp_max.max(log_prior(&x));
        }
        let (mut w0, mut w1) = (0.0, 0.0);
        for i in 0..grid {
            let t = lo + hstep * i as f64;
            let x = &x_p + &(&b1 * t);
            let mut wgt = (log_prior(&x) - lp_max).exp();
            if i == 0 || i == grid - 1 {
                wgt *= 0.5;
            }
            w0 += wgt;
            w1 += wgt * t;
        }
        return Ok(&x_p + &(&b1 * (w1 / w0)));
    }

    // free == 2: outer axis bounds from polytope vertices plus decay windows
    let b2 = basis.column(1).to_owned();
    let (outer_lo, outer_hi) = outer_bounds(&x_p, &b1, &b2, kind, theta0, support)?;
    let outer_step = (outer_hi - outer_lo) / (grid_points - 1) as f64;

    let inner_window = |x_line: &Array1<f64>| -> Option<(f64, f64)> {
        let seg = interval_along(&x_line.view(), &b2.view(), support)?;
        let mu = b2.dot(&(theta0 - x_line));
        let slope = theta0.dot(&b2);
        clip_interval(kind, mu, slope, seg.0, seg.1).ok()
    };
    let inner_points = grid_points;

    let mut lp_max = f64::NEG_INFINITY;
    for i in 0..grid_points {
        let u1 = outer_lo + outer_step * i as f64;
        let x_line = &x_p + &(&b1 * u1);
        if let Some((lo2, hi2)) = inner_window(&x_line) {
            let istep = (hi2 - lo2) / (inner_points - 1) as f64;
            for jj in 0..inner_points {
                let x = &x_line + &(&b2 * (lo2 + istep * jj as f64));
                lp_max = lp_max.max(log_prior(&x));
            }
        }
    }
    if lp_max.is_infinite() {
        return Err(Error::OracleUnavailable(
            "manifold misses the support".into(),
        ));
    }
    let (mut w0, mut w1, mut w2) = (0.0, 0.0, 0.0);
    for i in 0..grid_points {
        let u1 = outer_lo + outer_step * i as f64;
        let x_line = &x_p + &(&b1 * u1);
        let Some((lo2, hi2)) = inner_window(&x_line) else {
            continue;
        };
        let istep = (hi2 - lo2) / (inner_points - 1) as f64;
        let outer_wgt = if i == 0 || i == grid_points - 1 {
            0.5
        } else {
            1.0
        };
        for jj in 0..inner_points {
            let u2 = lo2 + istep * jj as f64;
            let x = &x_line + &(&b2 * u2);
            let mut wgt = outer_wgt * istep * (log_prior(&x) - lp_max).exp();
            if jj == 0 || jj == inner_points - 1 {
                wgt *= 0.5;
            }
            w0 += wgt;
            w1 += wgt * u1;
            w2 += wgt * u2;
        }
    }
    Ok(&x_p + &(&b1 * (w1 / w0)) + &(&b2 * (w2 / w0)))
}

/// Bounds of the first quadrature axis: polytope vertex extent where the
/// feasible region is bounded, otherwise the prior decay window.
fn outer_bounds(
    x_p: &Array1<f64>,
    b1: &Array1<f64>,
    b2: &Array1<f64>,
    kind: ActivationKind,
    theta0: &Array1<f64>,
    support: Support,
) -> Result<(f64, f64)> {
    // constraint rows a.u >= c over u = (u1, u2)
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    match support {
        Support::RealLine => {}
        Support::PositiveHalfLine => {
            for i in 0..x_p.len() {
                rows.push((b1[i], b2[i], -x_p[i]));
            }
        }
        Support::UnitInterval => {
            for i in 0..x_p.len() {
                rows.push((b1[i], b2[i], -x_p[i]));
                rows.push((-b1[i], -b2[i], x_p[i] - 1.0));
            }
        }
    }
    let mut v_lo = f64::INFINITY;
    let mut v_hi = f64::NEG_INFINITY;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let (a1, a2, c1) = rows[i];
            let (d1, d2, c2) = rows[j];
            let det = a1 * d2 - a2 * d1;
            if det.abs() < 1e-14 {
                continue;
            }
            let u1 = (c1 * d2 - a2 * c2) / det;
            let u2 = (a1 * c2 - c1 * d1) / det;
            let feasible = rows
                .iter()
                .all(|&(p, q, c)| p * u1 + q * u2 >= c - 1e-9 * (1.0 + c.abs()));
            if feasible {
                v_lo = v_lo.min(u1);
                v_hi = v_hi.max(u1);
            }
        }
    }
    let mu1 = b1.dot(&(theta0 - x_p));
    let slope1 = theta0.dot(b1);
    match kind {
        ActivationKind::Ted => {
            if v_lo.is_finite() && v_hi.is_finite() && v_lo < v_hi {
                Ok((v_lo, v_hi))
            } else {
                Err(Error::OracleUnavailable(
                    "manifold misses the support".into(),
                ))
            }
        }
        ActivationKind::Tg | ActivationKind::Linear => {
            let lo = (mu1 - GAUSS_WINDOW).max(if v_lo.is_finite() {
                v_lo
            } else {
                f64::NEG_INFINITY
            });
            let hi = (mu1 + GAUSS_WINDOW).min(if v_hi.is_finite() {
                v_hi
            } else {
                f64::INFINITY
            });
            if lo < hi {
                Ok((lo, hi))
            } else {
                Err(Error::OracleUnavailable("empty integration window".into()))
            }
        }
        ActivationKind::Exp => {
            // extend unbounded sides by the decay length of the prior
            let mut lo = v_lo;
            let mut hi = v_hi;
            if !lo.is_finite() || !hi.is_finite() {
                if slope1.abs() < 1e-12 {
                    return Err(Error::OracleUnavailable(
                        "unbounded exponential slice without decay".into(),
                    ));
                }
                let reach = EXP_WINDOW_NATS / slope1.abs();
                if !hi.is_finite() {
                    hi = lo.max(0.0) + reach;
                }
                if !lo.is_finite() {
                    lo = hi.min(0.0) - reach;
                }
            }
            if lo < hi {
                Ok((lo, hi))
            } else {
                Err(Error::OracleUnavailable("empty integration window".into()))
            }
        }
    }
}

/// Interior start point for chains: the surrogate mean, which lies on the
/// manifold and strictly inside the support whenever the solve converges.
pub fn default_start(map: &LayerMap, z: &ArrayView1<f64>) -> Result<Array1<f64>> {
    let sol = gamma_inverse(map, z, &SolverConfig::default())?;
    if !sol.converged {
        return Err(Error::InfeasibleStart(format!(
            "surrogate solve did not converge (residual {:e})",
            sol.residual_inf
        )));
    }
    Ok(sol.x_hat)
}
