//! Projected belief network autoencoders.
//!
//! A network is an ordered stack of [`LayerMap`]s with strictly decreasing
//! widths. The forward (analysis) path applies each layer's linear
//! transform; between layers the feature passes through a bias and the
//! *next* layer's mean function, so every layer sees inputs inside its
//! prior's support by construction:
//!
//! ```text
//! a_0 = x;   z_k = W_k' a_k;   a_{k+1} = lambda_{k+1}(z_k + bias_k)
//! ```
//!
//! The backward (reconstruction) path reuses the same weights: each layer
//! inverts its feature through the saddle-point solve, and the resulting
//! natural parameter u_k = theta0_k + W_k h_k is handed directly to the
//! layer below after bias removal. Applying lambda_k and immediately
//! inverting it would be the identity, so the deterministic path never
//! materializes the activation; that cancellation is structural. In
//! stochastic mode the layer instead draws its input estimate from the
//! per-coordinate surrogate laws, and the draw must be pulled back through
//! the scalar inverse of the mean function before descending.
//!
//! Reconstruction failures are meaningful: a feature produced anywhere but
//! the layer's own forward path has no existence guarantee for the solve,
//! and the fraction of backward passes that complete all layers is the
//! network's sampling efficiency.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::exponential_family::{
    lambda_inverse, mean_scalar, sample_univariate, variance_scalar, ActivationKind, UnivariateLaw,
};
use crate::gamma_inverse::{gamma_inverse, newton_system, LayerMap, SolverConfig};
use crate::numerics::linalg::is_finite_vec;
use crate::numerics::rng::RngStream;

/// How the backward path turns natural parameters into input estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructMode {
    /// Conditional means: the activation output is lambda(u).
    Deterministic,
    /// Per-coordinate draws from the surrogate laws p(x; u).
    Stochastic,
}

/// One network layer: a layer map plus the bias applied to its feature
/// before the next layer's activation. The bias of the deepest layer is
/// carried for format uniformity but never used.
#[derive(Debug, Clone)]
pub struct PbnLayer {
    map: LayerMap,
    bias: Array1<f64>,
}

impl PbnLayer {
    pub fn new(map: LayerMap, bias: Array1<f64>) -> Result<Self> {
        if bias.len() != map.feature_dim() {
            return Err(Error::InvalidInput(format!(
                "bias length {} does not match feature dimension {}",
                bias.len(),
                map.feature_dim()
            )));
        }
        if !is_finite_vec(&bias.view()) {
            return Err(Error::InvalidInput("non-finite bias entry".into()));
        }
        Ok(PbnLayer { map, bias })
    }

    pub fn map(&self) -> &LayerMap {
        &self.map
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }
}

/// Intermediate features of one forward pass; `features[k]` is z_k.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub features: Vec<Array1<f64>>,
}

impl ForwardPass {
    pub fn final_feature(&self) -> &Array1<f64> {
        self.features
            .last()
            .expect("network has at least one layer")
    }
}

/// One backward pass: the reconstructed input, plus per-layer features fed
/// to each saddle solve and the recovered h vectors.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub x_hat: Array1<f64>,
    /// features[k] is the feature inverted by layer k.
    pub features: Vec<Array1<f64>>,
    pub h: Vec<Array1<f64>>,
}

/// Outcome of a batch of backward-path attempts.
#[derive(Debug, Clone, Copy)]
pub struct SamplingEfficiencyReport {
    pub attempts: usize,
    pub successes: usize,
    pub efficiency: f64,
}

/// Ordered stack of layers with strictly decreasing widths.
#[derive(Debug, Clone)]
pub struct PbnNetwork {
    layers: Vec<PbnLayer>,
}

impl PbnNetwork {
    pub fn new(layers: Vec<PbnLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput(
                "network needs at least one layer".into(),
            ));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.map.input_dim() <= layer.map.feature_dim() {
                return Err(Error::InvalidInput(format!(
                    "layer {k} must reduce dimension, got {} -> {}",
                    layer.map.input_dim(),
                    layer.map.feature_dim()
                )));
            }
            if k + 1 < layers.len() && layer.map.feature_dim() != layers[k + 1].map.input_dim() {
                return Err(Error::InvalidInput(format!(
                    "layer {k} outputs {} features but layer {} expects {} inputs",
                    layer.map.feature_dim(),
                    k + 1,
                    layers[k + 1].map.input_dim()
                )));
            }
        }
        Ok(PbnNetwork { layers })
    }

    /// Seeded network with Gaussian weights scaled by 1/sqrt(fan-in) and
    /// centering biases; `dims` lists widths from input to deepest feature.
    ///
    /// The bias of layer k is chosen so that an input at the layer's prior
    /// mean produces a pre-activation equal to the next layer's prior
    /// parameter. That keeps forward pre-activations inside the next kind's
    /// domain (the EXP kind needs them negative) and keeps backward-path
    /// features near the center of each layer's attainable set, where the
    /// saddle solves are well conditioned.
    pub fn random(dims: &[usize], kind: ActivationKind, rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidInput(
                "architecture needs at least input and feature widths".into(),
            ));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for k in 0..dims.len() - 1 {
            let (n, m) = (dims[k], dims[k + 1]);
            let scale = 1.0 / (n as f64).sqrt();
            let w = Array2::from_shape_fn((n, m), |_| scale * rng.standard_normal());
            let map = LayerMap::new(w, kind)?;
            let bias = if k + 1 < dims.len() - 1 {
                centering_bias(&map) + kind.theta0()
            } else {
                Array1::zeros(m)
            };
            layers.push(PbnLayer::new(map, bias)?);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[PbnLayer] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].map.input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers.last().unwrap().map.feature_dim()
    }

    /// Feed-forward analysis; returns every intermediate feature.
    pub fn forward(&self, x: &ArrayView1<f64>) -> Result<ForwardPass> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "input length {} does not match network input dimension {}",
                x.len(),
                self.input_dim()
            )));
        }
        let support = self.layers[0].map.kind().support();
        if let Some((i, &v)) = x.iter().enumerate().find(|(_, &v)| !support.contains(v)) {
            return Err(Error::SupportViolation {
                layer: 0,
                coord: i,
                value: v,
            });
        }
        let mut features = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for k in 0..self.layers.len() {
            let z = self.layers[k].map.weights().t().dot(&a);
            if k + 1 < self.layers.len() {
                let next_kind = self.layers[k + 1].map.kind();
                let pre = &z + &self.layers[k].bias;
                if let Some((i, &t)) = pre
                    .iter()
                    .enumerate()
                    .find(|(_, &t)| !next_kind.contains_theta(t))
                {
                    return Err(Error::SupportViolation {
                        layer: k + 1,
                        coord: i,
                        value: t,
                    });
                }
                a = pre.mapv(|t| mean_scalar(next_kind, t));
            }
            features.push(z);
        }
        Ok(ForwardPass { features })
    }

    /// Backward reconstruction from the deepest feature.
    ///
    /// `rng` is required in stochastic mode only. A non-convergent solve at
    /// any layer aborts with [`Error::ReconstructionInfeasible`].
    pub fn backward_reconstruct(
        &self,
        z_final: &ArrayView1<f64>,
        mode: ReconstructMode,
        mut rng: Option<&mut RngStream>,
        cfg: &SolverConfig,
    ) -> Result<Reconstruction> {
        if z_final.len() != self.feature_dim() {
            return Err(Error::InvalidInput(format!(
                "feature length {} does not match network feature dimension {}",
                z_final.len(),
                self.feature_dim()
            )));
        }
        if mode == ReconstructMode::Stochastic && rng.is_none() {
            return Err(Error::InvalidInput(
                "stochastic reconstruction needs an RngStream".into(),
            ));
        }
        let count = self.layers.len();
        let mut features_rev = Vec::with_capacity(count);
        let mut h_rev = Vec::with_capacity(count);
        let mut z = z_final.to_owned();
        let mut x_hat = Array1::zeros(self.input_dim());
        for k in (0..count).rev() {
            let layer = &self.layers[k];
            let kind = layer.map.kind();
            let sol = gamma_inverse(&layer.map, &z.view(), cfg)?;
            if !sol.converged {
                return Err(Error::ReconstructionInfeasible {
                    layer: k,
                    residual: sol.residual_inf,
                });
            }
            let u = layer.map.theta_at(&sol.h.view());
            features_rev.push(z.clone());
            h_rev.push(sol.h.clone());
            match mode {
                ReconstructMode::Deterministic => {
                    if k > 0 {
                        // lambda_k cancels its inverse: hand u down directly
                        z = &u - &self.layers[k - 1].bias;
                    } else {
                        x_hat = sol.x_hat;
                    }
                }
                ReconstructMode::Stochastic => {
                    let rng = rng.as_deref_mut().expect("checked above");
                    let draw =
                        u.mapv(|t| sample_univariate(&UnivariateLaw { kind, theta: t }, rng));
                    if k > 0 {
                        // a sampled point must be pulled back through the
                        // scalar mean inverse before the bias is removed
                        let mut pre = Array1::zeros(draw.len());
                        for (i, &a) in draw.iter().enumerate() {
                            let guarded = guard_mean(kind, a);
                            pre[i] = lambda_inverse(kind, guarded)?;
                        }
                        z = &pre - &self.layers[k - 1].bias;
                    } else {
                        x_hat = draw;
                    }
                }
            }
        }
        features_rev.reverse();
        h_rev.reverse();
        Ok(Reconstruction {
            x_hat,
            features: features_rev,
            h: h_rev,
        })
    }

    /// Fraction of backward passes that complete every layer.
    pub fn sampling_efficiency(
        &self,
        z_samples: &Array2<f64>,
        mode: ReconstructMode,
        rng: &mut RngStream,
        cfg: &SolverConfig,
    ) -> Result<SamplingEfficiencyReport> {
        if z_samples.ncols() != self.feature_dim() {
            return Err(Error::InvalidInput(format!(
                "feature rows have {} columns, network feature dimension is {}",
                z_samples.ncols(),
                self.feature_dim()
            )));
        }
        let attempts = z_samples.nrows();
        let mut successes = 0usize;
        for row in z_samples.rows() {
            match self.backward_reconstruct(&row, mode, Some(rng), cfg) {
                Ok(_) => successes += 1,
                Err(Error::ReconstructionInfeasible { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(SamplingEfficiencyReport {
            attempts,
            successes,
            efficiency: if attempts == 0 {
                1.0
            } else {
                successes as f64 / attempts as f64
            },
        })
    }

    /// Full-batch gradient descent on the mean squared reconstruction error
    /// (deterministic backward path, gradients exact through the solves).
    ///
    /// Returns the loss trace: entry 0 is the initial loss, entry e the loss
    /// after e updates, `epochs + 1` entries in total.
    pub fn train_autoencoder(
        &mut self,
        data: &Array2<f64>,
        epochs: usize,
        step_size: f64,
        cfg: &SolverConfig,
    ) -> Result<Vec<f64>> {
        if data.ncols() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "data rows have {} columns, network input dimension is {}",
                data.ncols(),
                self.input_dim()
            )));
        }
        if data.nrows() == 0 {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        let mut trace = Vec::with_capacity(epochs + 1);
        for epoch in 0..epochs {
            let (loss, grads) = self
                .batch_loss_and_gradient(data, cfg)
                .map_err(|e| train_error(e, epoch))?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            trace.push(loss);
            self.apply_update(&grads, step_size, epoch)?;
        }
        let (final_loss, _) = self
            .batch_loss_and_gradient(data, cfg)
            .map_err(|e| train_error(e, epochs))?;
        if !final_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch: epochs });
        }
        trace.push(final_loss);
        Ok(trace)
    }

    fn apply_update(&mut self, grads: &Gradients, step: f64, epoch: usize) -> Result<()> {
        for (k, layer) in self.layers.iter_mut().enumerate() {
            let w_new = layer.map.weights() - &(&grads.w[k] * step);
            let map_new =
                LayerMap::with_theta0(w_new, layer.map.kind(), layer.map.theta0().clone())
                    .map_err(|_| Error::TrainingDiverged { epoch })?;
            let bias_new = &layer.bias - &(&grads.b[k] * step);
            *layer =
                PbnLayer::new(map_new, bias_new).map_err(|_| Error::TrainingDiverged { epoch })?;
        }
        Ok(())
    }

    /// Mean loss over the batch and the parameter gradients.
    pub fn batch_loss_and_gradient(
        &self,
        data: &Array2<f64>,
        cfg: &SolverConfig,
    ) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros(self);
        let mut loss = 0.0;
        for row in data.rows() {
            loss += self.sample_loss_and_gradient(&row, &mut grads, cfg)?;
        }
        let scale = 1.0 / data.nrows() as f64;
        loss *= scale;
        for g in &mut grads.w {
            *g *= scale;
        }
        for g in &mut grads.b {
            *g *= scale;
        }
        Ok((loss, grads))
    }

    /// Accumulate one sample's squared reconstruction error and its exact
    /// gradient. Reverse-mode through both paths; the solve adjoints come
    /// from the implicit function theorem on W'lambda(theta0 + Wh) = s:
    ///
    /// ```text
    /// s_bar = (W'DW)^{-1} h_bar
    /// W_bar -= lambda(u) s_bar' + (D W s_bar) h'
    /// ```
    fn sample_loss_and_gradient(
        &self,
        x: &ArrayView1<f64>,
        grads: &mut Gradients,
        cfg: &SolverConfig,
    ) -> Result<f64> {
        let count = self.layers.len();

        // forward pass, keeping activations and features
        let mut acts: Vec<Array1<f64>> = Vec::with_capacity(count);
        let mut zs: Vec<Array1<f64>> = Vec::with_capacity(count);
        acts.push(x.to_owned());
        for k in 0..count {
            let z = self.layers[k].map.weights().t().dot(&acts[k]);
            if k + 1 < count {
                let next_kind = self.layers[k + 1].map.kind();
                let pre = &z + &self.layers[k].bias;
                if let Some((i, &t)) = pre
                    .iter()
                    .enumerate()
                    .find(|(_, &t)| !next_kind.contains_theta(t))
                {
                    return Err(Error::SupportViolation {
                        layer: k + 1,
                        coord: i,
                        value: t,
                    });
                }
                acts.push(pre.mapv(|t| mean_scalar(next_kind, t)));
            }
            zs.push(z);
        }

        // deterministic backward pass
        let mut hs: Vec<Array1<f64>> = vec![Array1::zeros(0); count];
        let mut us: Vec<Array1<f64>> = vec![Array1::zeros(0); count];
        let mut xh: Vec<Array1<f64>> = vec![Array1::zeros(0); count];
        let mut s = zs[count - 1].clone();
        for k in (0..count).rev() {
            let layer = &self.layers[k];
            let sol = gamma_inverse(&layer.map, &s.view(), cfg)?;
            if !sol.converged {
                return Err(Error::ReconstructionInfeasible {
                    layer: k,
                    residual: sol.residual_inf,
                });
            }
            us[k] = layer.map.theta_at(&sol.h.view());
            xh[k] = sol.x_hat.clone();
            hs[k] = sol.h;
            if k > 0 {
                s = &us[k] - &self.layers[k - 1].bias;
            }
        }
        let x_hat = &xh[0];
        let diff = x_hat - x;
        let loss = diff.dot(&diff);

        // adjoint through the backward path, ascending layers
        let d0 = us[0].mapv(|t| variance_scalar(self.layers[0].map.kind(), t));
        let mut u_bar = &d0 * &(&diff * 2.0);
        let mut z_bar_last = Array1::zeros(self.feature_dim());
        for k in 0..count {
            let layer = &self.layers[k];
            let w = layer.map.weights();
            let h_bar = w.t().dot(&u_bar);
            outer_add(&mut grads.w[k], &u_bar, &hs[k], 1.0);
            let (d, factor) = newton_system(&layer.map, &hs[k].view())?;
            let g = factor.solve(&h_bar.view());
            outer_add(&mut grads.w[k], &xh[k], &g, -1.0);
            let dwg = &d * &w.dot(&g);
            outer_add(&mut grads.w[k], &dwg, &hs[k], -1.0);
            if k + 1 < count {
                grads.b[k] -= &g;
                u_bar = g;
            } else {
                z_bar_last = g;
            }
        }

        // adjoint through the forward path, descending layers
        let mut z_bar = z_bar_last;
        for k in (0..count).rev() {
            let layer = &self.layers[k];
            outer_add(&mut grads.w[k], &acts[k], &z_bar, 1.0);
            if k == 0 {
                break;
            }
            let a_bar = layer.map.weights().dot(&z_bar);
            let kind = layer.map.kind();
            let pre = &zs[k - 1] + &self.layers[k - 1].bias;
            let dv = pre.mapv(|t| variance_scalar(kind, t));
            let pre_bar = &dv * &a_bar;
            grads.b[k - 1] += &pre_bar;
            z_bar = pre_bar;
        }
        Ok(loss)
    }

    // --- serialization: "PBN1" flat binary -------------------------------

    /// Serialize to the PBN1 flat format: magic, layer count, per-layer
    /// headers (rows, cols, kind tag), then per layer the little-endian
    /// f64 blocks W (row-major), theta0, bias.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"PBN1");
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.map.input_dim() as u32).to_le_bytes());
            out.extend_from_slice(&(layer.map.feature_dim() as u32).to_le_bytes());
            out.push(kind_tag(layer.map.kind()));
        }
        for layer in &self.layers {
            for &v in layer.map.weights().iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for &v in layer.map.theta0().iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for &v in layer.bias.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data);
        let magic = r.take(4)?;
        if magic != b"PBN1" {
            return Err(Error::MalformedModel(format!(
                "bad magic {:?}, expected \"PBN1\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let count = r.u32()? as usize;
        if count == 0 || count > 1024 {
            return Err(Error::MalformedModel(format!(
                "implausible layer count {count}"
            )));
        }
        let mut headers = Vec::with_capacity(count);
        for _ in 0..count {
            let n = r.u32()? as usize;
            let m = r.u32()? as usize;
            let kind = kind_from_tag(r.byte()?)?;
            headers.push((n, m, kind));
        }
        let mut layers = Vec::with_capacity(count);
        for &(n, m, kind) in &headers {
            let w = Array2::from_shape_vec((n, m), r.f64s(n * m)?)
                .map_err(|e| Error::MalformedModel(e.to_string()))?;
            let theta0 = Array1::from_vec(r.f64s(n)?);
            let bias = Array1::from_vec(r.f64s(m)?);
            let map = LayerMap::with_theta0(w, kind, theta0)
                .map_err(|e| Error::MalformedModel(e.to_string()))?;
            layers
                .push(PbnLayer::new(map, bias).map_err(|e| Error::MalformedModel(e.to_string()))?);
        }
        if !r.at_end() {
            return Err(Error::MalformedModel("trailing bytes after model".into()));
        }
        Self::new(layers)
    }
}

/// Minus the feature of the layer's prior mean input: a bias of
/// `centering_bias(map) + theta0_next` zeroes the expected pre-activation
/// around the next layer's prior parameter.
pub fn centering_bias(map: &LayerMap) -> Array1<f64> {
    let kind = map.kind();
    let lam0 = map.theta0().mapv(|t| mean_scalar(kind, t));
    -map.weights().t().dot(&lam0)
}

/// Per-layer parameter gradients.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros(net: &PbnNetwork) -> Self {
        Gradients {
            w: net
                .layers
                .iter()
                .map(|l| Array2::zeros((l.map.input_dim(), l.map.feature_dim())))
                .collect(),
            b: net
                .layers
                .iter()
                .map(|l| Array1::zeros(l.map.feature_dim()))
                .collect(),
        }
    }
}

fn train_error(e: Error, epoch: usize) -> Error {
    match e {
        Error::ReconstructionInfeasible { .. } | Error::NotPositiveDefinite { .. } => {
            Error::TrainingDiverged { epoch }
        }
        other => other,
    }
}

/// target += sign * outer(u, v)
fn outer_add(target: &mut Array2<f64>, u: &Array1<f64>, v: &Array1<f64>, sign: f64) {
    for (i, &ui) in u.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            target[[i, j]] += sign * ui * vj;
        }
    }
}

/// Nudge a sampled activation into the open mean range so the scalar
/// inverse stays finite when a draw underflows onto the boundary.
fn guard_mean(kind: ActivationKind, a: f64) -> f64 {
    match kind {
        ActivationKind::Ted => a.clamp(1e-300, 1.0 - 1e-16),
        ActivationKind::Tg | ActivationKind::Exp => a.max(1e-300),
        ActivationKind::Linear => a,
    }
}

fn kind_tag(kind: ActivationKind) -> u8 {
    match kind {
        ActivationKind::Ted => 0,
        ActivationKind::Tg => 1,
        ActivationKind::Exp => 2,
        ActivationKind::Linear => 3,
    }
}

fn kind_from_tag(tag: u8) -> Result<ActivationKind> {
    match tag {
        0 => Ok(ActivationKind::Ted),
        1 => Ok(ActivationKind::Tg),
        2 => Ok(ActivationKind::Exp),
        3 => Ok(ActivationKind::Linear),
        other => Err(Error::MalformedModel(format!("unknown kind tag {other}"))),
    }
}

struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(data: &'a [u8]) -> Self {
        ByteReader { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::MalformedModel("truncated model data".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(8 * n)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }

    fn at_end(&self) -> bool {
        self.pos == self.data.len()
    }
}
