//! The layer map gamma and its iterative inverse.
//!
//! A layer is z = gamma(h) = W' lambda(theta0 + W h). Inverting it means
//! solving the saddle-point equation
//!
//! ```text
//! W' lambda(theta0 + W h) = z
//! ```
//!
//! for h. F(h) = gamma(h) - z is the gradient of the strictly convex
//! function sum_i logZ(theta0_i + (Wh)_i) - z'h, so damped Newton with a
//! residual-decreasing line search converges globally on the open domain;
//! bounded-image kinds can still place z outside the attainable set, in
//! which case the iteration diverges and the solution is reported with
//! `converged = false`.
//!
//! The Newton matrix W' D W (D = diag lambda') is also the Jacobian needed
//! for differentiating through the solve: dh/dz = (W'DW)^{-1} and
//! dxhat/dz = D W (W'DW)^{-1}, so converged solutions are cheap to
//! back-propagate through.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::exponential_family::{mean_scalar, variance_scalar, ActivationKind};
use crate::numerics::linalg::{
    cholesky, ensure_full_column_rank, inf_norm, is_finite_mat, is_finite_vec, CholeskyFactor,
};

/// A weight matrix with its activation kind and per-coordinate prior
/// parameter. The Gram factor and null-space basis are computed on first
/// use and cached; full column rank is validated at construction, so both
/// are guaranteed to exist.
#[derive(Debug, Clone)]
pub struct LayerMap {
    w: Array2<f64>,
    kind: ActivationKind,
    theta0: Array1<f64>,
    gram: std::sync::OnceLock<CholeskyFactor>,
    basis: std::sync::OnceLock<Array2<f64>>,
}

impl LayerMap {
    /// Layer with the kind's default prior parameter replicated across
    /// coordinates.
    pub fn new(w: Array2<f64>, kind: ActivationKind) -> Result<Self> {
        let theta0 = Array1::from_elem(w.nrows(), kind.theta0());
        Self::with_theta0(w, kind, theta0)
    }

    pub fn with_theta0(w: Array2<f64>, kind: ActivationKind, theta0: Array1<f64>) -> Result<Self> {
        if !is_finite_mat(&w) {
            return Err(Error::InvalidInput("non-finite entry in W".into()));
        }
        if theta0.len() != w.nrows() {
            return Err(Error::InvalidInput(format!(
                "theta0 length {} does not match {} rows of W",
                theta0.len(),
                w.nrows()
            )));
        }
        if let Some((i, &t)) = theta0
            .iter()
            .enumerate()
            .find(|(_, &t)| !kind.contains_theta(t))
        {
            return Err(Error::DomainViolation {
                kind,
                theta: t,
                coord: Some(i),
            });
        }
        ensure_full_column_rank(&w)?;
        Ok(LayerMap {
            w,
            kind,
            theta0,
            gram: std::sync::OnceLock::new(),
            basis: std::sync::OnceLock::new(),
        })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    /// Cholesky factor of W'W, computed once.
    pub fn gram_factor(&self) -> &CholeskyFactor {
        self.gram.get_or_init(|| {
            cholesky(&self.w.t().dot(&self.w)).expect("W'W of a full-rank W is SPD")
        })
    }

    /// Orthonormal basis of the null space of W', computed once.
    pub fn null_basis(&self) -> &Array2<f64> {
        self.basis.get_or_init(|| {
            crate::numerics::linalg::null_space_basis(&self.w)
                .expect("full column rank validated at construction")
        })
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn theta0(&self) -> &Array1<f64> {
        &self.theta0
    }

    /// Input dimension N.
    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Feature dimension M.
    pub fn feature_dim(&self) -> usize {
        self.w.ncols()
    }

    /// theta0 + W h.
    pub fn theta_at(&self, h: &ArrayView1<f64>) -> Array1<f64> {
        &self.theta0 + &self.w.dot(h)
    }

    fn check_theta_vec(&self, theta: &Array1<f64>) -> Result<()> {
        if let Some((i, &t)) = theta
            .iter()
            .enumerate()
            .find(|(_, &t)| !self.kind.contains_theta(t))
        {
            return Err(Error::DomainViolation {
                kind: self.kind,
                theta: t,
                coord: Some(i),
            });
        }
        Ok(())
    }
}

/// Tolerances of the damped Newton iteration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Convergence threshold on the sup-norm of W'lambda - z.
    pub tol: f64,
    /// Iteration cap; hitting it reports `converged = false`.
    pub max_iter: usize,
    /// Step scale at the start of each line search.
    pub initial_damping: f64,
    /// Margin factor keeping theta strictly inside an open parameter domain.
    pub domain_backtrack_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 200,
            initial_damping: 1.0,
            domain_backtrack_fraction: 0.9,
        }
    }
}

/// Result of a saddle-point solve.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    /// Solution of the saddle-point equation (best iterate when not converged).
    pub h: Array1<f64>,
    /// Surrogate conditional mean lambda(theta0 + W h).
    pub x_hat: Array1<f64>,
    /// Final sup-norm residual of W' x_hat - z.
    pub residual_inf: f64,
    /// Accepted Newton steps.
    pub iterations: usize,
    /// Whether residual_inf <= tol.
    pub converged: bool,
    /// Residual 2-norm at the start and after each accepted step; the line
    /// search only accepts strictly decreasing entries.
    pub residual_history: Vec<f64>,
}

fn lambda_vec(kind: ActivationKind, theta: &Array1<f64>) -> Array1<f64> {
    theta.mapv(|t| mean_scalar(kind, t))
}

fn lambda_prime_vec(kind: ActivationKind, theta: &Array1<f64>) -> Array1<f64> {
    theta.mapv(|t| variance_scalar(kind, t))
}

/// Largest step scale keeping theta + t * dtheta inside the open domain,
/// with a relative safety margin. Only the EXP kind has a constrained
/// domain, so everything else returns 1.
fn max_domain_step(
    kind: ActivationKind,
    theta: &Array1<f64>,
    dtheta: &Array1<f64>,
    margin: f64,
) -> f64 {
    if kind != ActivationKind::Exp {
        return 1.0;
    }
    let mut t = 1.0f64;
    for (&th, &dt) in theta.iter().zip(dtheta.iter()) {
        if dt > 0.0 {
            t = t.min(margin * (-th) / dt);
        }
    }
    t
}

/// The layer map z = W' lambda(theta0 + W h).
pub fn gamma(map: &LayerMap, h: &ArrayView1<f64>) -> Result<Array1<f64>> {
    if h.len() != map.feature_dim() {
        return Err(Error::InvalidInput(format!(
            "h length {} does not match feature dimension {}",
            h.len(),
            map.feature_dim()
        )));
    }
    if !is_finite_vec(h) {
        return Err(Error::InvalidInput("non-finite entry in h".into()));
    }
    let theta = map.theta_at(h);
    map.check_theta_vec(&theta)?;
    Ok(map.w.t().dot(&lambda_vec(map.kind, &theta)))
}

/// Solve W' lambda(theta0 + W h) = z for h.
///
/// Returns `Ok` with `converged = false` when the iteration stalls or
/// diverges (z on or outside the closure of the image of gamma); hard
/// errors are reserved for malformed inputs.
pub fn gamma_inverse(
    map: &LayerMap,
    z: &ArrayView1<f64>,
    cfg: &SolverConfig,
) -> Result<SaddleSolution> {
    let m = map.feature_dim();
    if z.len() != m {
        return Err(Error::InvalidInput(format!(
            "z length {} does not match feature dimension {}",
            z.len(),
            m
        )));
    }
    if !is_finite_vec(z) {
        return Err(Error::InvalidInput("non-finite entry in z".into()));
    }
    let kind = map.kind;
    let w = &map.w;
    let margin = cfg.domain_backtrack_fraction;

    // First-order initialization: exact for the LINEAR kind.
    let lam0 = lambda_vec(kind, &map.theta0);
    let rhs = z.to_owned() - w.t().dot(&lam0);
    let mut h = map.gram_factor().solve(&rhs.view());
    let mean_da = lambda_prime_vec(kind, &map.theta0).mean().unwrap_or(1.0);
    if mean_da > 0.0 {
        h /= mean_da;
    }
    let dtheta = w.dot(&h);
    let scale = max_domain_step(kind, &map.theta0, &dtheta, margin);
    if scale < 1.0 {
        h *= scale;
    }

    let mut theta = map.theta_at(&h.view());
    let mut lam = lambda_vec(kind, &theta);
    let mut residual = w.t().dot(&lam) - z;
    let mut iterations = 0usize;
    let mut converged = inf_norm(&residual.view()) <= cfg.tol;
    let mut history = vec![residual.dot(&residual).sqrt()];

    while !converged && iterations < cfg.max_iter {
        if inf_norm(&h.view()) > 1e8 {
            break;
        }
        let d = lambda_prime_vec(kind, &theta);
        // J = W' diag(d) W
        let wd = w * &d.view().insert_axis(ndarray::Axis(1));
        let j = w.t().dot(&wd);
        let factor = match cholesky(&j) {
            Ok(f) => f,
            // numerically singular Newton matrix: report the iterate as-is
            Err(Error::NotPositiveDefinite { .. }) => break,
            Err(e) => return Err(e),
        };
        let delta = -factor.solve(&residual.view());

        let r2 = residual.dot(&residual);
        let dtheta = w.dot(&delta);
        let mut t = cfg.initial_damping.min(1.0);
        t = t.min(max_domain_step(kind, &theta, &dtheta, margin));

        let mut accepted = false;
        for _ in 0..60 {
            let h_try = &h + &(&delta * t);
            let theta_try = map.theta_at(&h_try.view());
            if map.check_theta_vec(&theta_try).is_ok() {
                let lam_try = lambda_vec(kind, &theta_try);
                let res_try = w.t().dot(&lam_try) - z;
                if res_try.dot(&res_try) < r2 {
                    h = h_try;
                    theta = theta_try;
                    lam = lam_try;
                    residual = res_try;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        history.push(residual.dot(&residual).sqrt());
        iterations += 1;
        converged = inf_norm(&residual.view()) <= cfg.tol;
    }

    let residual_inf = inf_norm(&residual.view());
    Ok(SaddleSolution {
        h,
        x_hat: lam,
        residual_inf,
        iterations,
        converged: residual_inf <= cfg.tol,
        residual_history: history,
    })
}

/// Newton matrix pieces at a solution: D = lambda'(theta0 + Wh) and the
/// Cholesky factor of W' D W.
pub(crate) fn newton_system(
    map: &LayerMap,
    h: &ArrayView1<f64>,
) -> Result<(Array1<f64>, CholeskyFactor)> {
    let theta = map.theta_at(h);
    let d = lambda_prime_vec(map.kind, &theta);
    let wd = &map.w * &d.view().insert_axis(ndarray::Axis(1));
    let j = map.w.t().dot(&wd);
    let factor = cholesky(&j)?;
    Ok((d, factor))
}

/// Exact derivatives of the solve: dh/dz = (W'DW)^{-1} and
/// dxhat/dz = D W (W'DW)^{-1}.
pub fn solution_jacobians(
    map: &LayerMap,
    sol: &SaddleSolution,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if !sol.converged {
        return Err(Error::InvalidInput(
            "solution_jacobians requires a converged solution".into(),
        ));
    }
    let (d, factor) = newton_system(map, &sol.h.view())?;
    let dh_dz = factor.inverse();
    let dw = &map.w * &d.view().insert_axis(ndarray::Axis(1));
    let dxhat_dz = dw.dot(&dh_dz);
    Ok((dh_dz, dxhat_dz))
}

/// Adjoint of z -> xhat(z) applied to a cotangent: (dxhat/dz)' v computed
/// with a single SPD solve instead of a dense Jacobian.
pub fn vjp_through_inverse(
    map: &LayerMap,
    sol: &SaddleSolution,
    cotangent_on_xhat: &ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if !sol.converged {
        return Err(Error::InvalidInput(
            "vjp_through_inverse requires a converged solution".into(),
        ));
    }
    if cotangent_on_xhat.len() != map.input_dim() {
        return Err(Error::InvalidInput(format!(
            "cotangent length {} does not match input dimension {}",
            cotangent_on_xhat.len(),
            map.input_dim()
        )));
    }
    let (d, factor) = newton_system(map, &sol.h.view())?;
    let dv = &d * cotangent_on_xhat;
    let rhs = map.w.t().dot(&dv);
    Ok(factor.solve(&rhs.view()))
}
