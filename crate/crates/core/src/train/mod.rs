//! Discriminative models trained on probabilistic labels.

mod fusion;
mod model;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub use fusion::{
    devise_from_existing, fit_projection, train_devise, train_early_fusion, train_intermediate_fusion, DeviseConfig,
    FusionModel, IntermediateConfig, Member, Projection, SavedModel,
};
pub use model::{servable_features_for, train_model, LabeledSet, Model};

const Q_EPS: f64 = 1e-7;
/// Examples per gradient chunk; chunk sums are reduced in order, so results
/// do not depend on the thread count.
const GRAD_CHUNK: usize = 64;

/// Cross-entropy against a probabilistic label, `q` clamped away from 0 and 1.
pub fn noise_aware_loss(p: f64, q: f64) -> f64 {
    let q = q.clamp(Q_EPS, 1.0 - Q_EPS);
    -(p * q.ln() + (1.0 - p) * (1.0 - q).ln())
}

/// The same loss from the logit, `softplus(z) - p z`, exact without clamping.
fn logit_loss(p: f64, z: f64) -> f64 {
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - p * z
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logreg,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative given the pre-activation and the activation.
    fn grad(self, pre: f64, act: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - act * act,
            Activation::Relu => (pre > 0.0) as u8 as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_width: usize,
    pub activation: Activation,
    /// Stop after this many epochs without dev-loss improvement and restore
    /// the best parameters. Needs a dev set.
    pub patience: Option<usize>,
    /// MLP only: start from W1 = I (needs hidden_width == input width).
    pub identity_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.2,
            l2_penalty: 1e-5,
            epochs: 20,
            batch_size: 64,
            seed: 0,
            hidden_width: 16,
            activation: Activation::Tanh,
            patience: None,
            identity_init: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(self.l2_penalty >= 0.0) {
            return Err(Error::Config("l2_penalty must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be >= 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be >= 1 when set".into()));
        }
        Ok(())
    }
}

/// Compressed sparse rows of encoded examples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    pub width: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn new(width: usize) -> Self {
        SparseRows {
            width,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense<R: AsRef<[f64]>>(width: usize, rows: &[R]) -> Result<Self> {
        let mut out = SparseRows::new(width);
        for r in rows {
            out.push_dense(r.as_ref())?;
        }
        Ok(out)
    }

    pub fn push_dense(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                got: row.len(),
            });
        }
        for (i, &v) in row.iter().enumerate() {
            if v != 0.0 {
                self.indices.push(i as u32);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        let (idx, val) = self.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            out[j as usize] = v;
        }
        out
    }
}

/// Logistic regression or a one-hidden-layer MLP, parameters in one flat
/// vector. MLP layout: W1 stored input-major (`W1[i * h + k]`), then b1,
/// then w2, then b2. Logreg layout: w then b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: ModelKind,
    pub input_width: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
}

struct Forward {
    pre: Vec<f64>,
    act: Vec<f64>,
    z: f64,
}

impl Network {
    pub fn zeros(kind: ModelKind, input_width: usize, hidden_width: usize, activation: Activation) -> Self {
        let n = match kind {
            ModelKind::Logreg => input_width + 1,
            ModelKind::Mlp => input_width * hidden_width + 2 * hidden_width + 1,
        };
        Network {
            kind,
            input_width,
            hidden_width,
            activation,
            params: vec![0.0; n],
        }
    }

    pub fn init(kind: ModelKind, input_width: usize, config: &TrainConfig) -> Result<Self> {
        let h = config.hidden_width;
        let mut net = Network::zeros(kind, input_width, h, config.activation);
        if kind == ModelKind::Logreg {
            return Ok(net);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(u64::from_le_bytes(*b"mlp-init"));
        let d = input_width;
        if config.identity_init {
            if h != d {
                return Err(Error::Config(format!("identity_init needs hidden_width == input width ({d}), got {h}")));
            }
            for i in 0..d {
                net.params[i * h + i] = 1.0;
            }
        } else {
            let s1 = (1.0 / d.max(1) as f64).sqrt();
            for w in &mut net.params[..d * h] {
                *w = rng.random_range(-s1..s1);
            }
        }
        let s2 = (1.0 / h as f64).sqrt();
        let off = d * h + h;
        for w in &mut net.params[off..off + h] {
            *w = rng.random_range(-s2..s2);
        }
        Ok(net)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Width of the penultimate representation: the input for logreg, the
    /// hidden layer for MLP.
    pub fn penultimate_width(&self) -> usize {
        match self.kind {
            ModelKind::Logreg => self.input_width,
            ModelKind::Mlp => self.hidden_width,
        }
    }

    /// Whether parameter `i` is a weight (penalized) rather than a bias.
    fn is_weight(&self, i: usize) -> bool {
        let (d, h) = (self.input_width, self.hidden_width);
        match self.kind {
            ModelKind::Logreg => i < d,
            ModelKind::Mlp => i < d * h || (d * h + h..d * h + 2 * h).contains(&i),
        }
    }

    fn out_layer(&self) -> (&[f64], f64) {
        let n = self.params.len();
        let w = match self.kind {
            ModelKind::Logreg => &self.params[..self.input_width],
            ModelKind::Mlp => &self.params[n - 1 - self.hidden_width..n - 1],
        };
        (w, self.params[n - 1])
    }

    fn forward(&self, idx: &[u32], val: &[f64]) -> Forward {
        match self.kind {
            ModelKind::Logreg => {
                let (w, b) = self.out_layer();
                let z = b + idx.iter().zip(val).map(|(&i, &v)| w[i as usize] * v).sum::<f64>();
                Forward {
                    pre: Vec::new(),
                    act: Vec::new(),
                    z,
                }
            }
            ModelKind::Mlp => {
                let (d, h) = (self.input_width, self.hidden_width);
                let mut pre = self.params[d * h..d * h + h].to_vec();
                for (&i, &v) in idx.iter().zip(val) {
                    let col = &self.params[i as usize * h..(i as usize + 1) * h];
                    for (p, w) in pre.iter_mut().zip(col) {
                        *p += w * v;
                    }
                }
                let act: Vec<f64> = pre.iter().map(|&x| self.activation.apply(x)).collect();
                let (w2, b2) = self.out_layer();
                let z = b2 + act.iter().zip(w2).map(|(a, w)| a * w).sum::<f64>();
                Forward { pre, act, z }
            }
        }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.input_width {
            return Err(Error::WidthMismatch {
                expected: self.input_width,
                got: width,
            });
        }
        Ok(())
    }

    /// Logit for a sparse row.
    pub fn logit_sparse(&self, idx: &[u32], val: &[f64]) -> f64 {
        self.forward(idx, val).z
    }

    pub fn score_dense(&self, x: &[f64]) -> Result<f64> {
        self.check_width(x.len())?;
        let (idx, val): (Vec<u32>, Vec<f64>) = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .unzip();
        Ok(sigmoid(self.logit_sparse(&idx, &val)))
    }

    pub fn penultimate_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x.len())?;
        Ok(match self.kind {
            ModelKind::Logreg => x.to_vec(),
            ModelKind::Mlp => {
                let (idx, val): (Vec<u32>, Vec<f64>) = x
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i as u32, v))
                    .unzip();
                self.forward(&idx, &val).act
            }
        })
    }

    /// Final logistic layer applied to a penultimate representation.
    pub fn head_score(&self, penultimate: &[f64]) -> Result<f64> {
        if penultimate.len() != self.penultimate_width() {
            return Err(Error::WidthMismatch {
                expected: self.penultimate_width(),
                got: penultimate.len(),
            });
        }
        let (w, b) = self.out_layer();
        Ok(sigmoid(b + penultimate.iter().zip(w).map(|(a, w)| a * w).sum::<f64>()))
    }

    pub fn scores(&self, x: &SparseRows) -> Result<Vec<f64>> {
        self.check_width(x.width)?;
        Ok(par::map_range(x.len(), |i| {
            let (idx, val) = x.row(i);
            sigmoid(self.logit_sparse(idx, val))
        }))
    }

    fn accumulate_grad(&self, idx: &[u32], val: &[f64], p: f64, grad: &mut [f64]) -> f64 {
        let f = self.forward(idx, val);
        let dz = sigmoid(f.z) - p;
        let n = self.params.len();
        match self.kind {
            ModelKind::Logreg => {
                for (&i, &v) in idx.iter().zip(val) {
                    grad[i as usize] += dz * v;
                }
            }
            ModelKind::Mlp => {
                let (d, h) = (self.input_width, self.hidden_width);
                let w2_off = d * h + h;
                let mut dpre = vec![0.0; h];
                for k in 0..h {
                    grad[w2_off + k] += dz * f.act[k];
                    dpre[k] = dz * self.params[w2_off + k] * self.activation.grad(f.pre[k], f.act[k]);
                    grad[d * h + k] += dpre[k];
                }
                for (&i, &v) in idx.iter().zip(val) {
                    let col = &mut grad[i as usize * h..(i as usize + 1) * h];
                    for (g, dp) in col.iter_mut().zip(&dpre) {
                        *g += dp * v;
                    }
                }
            }
        }
        grad[n - 1] += dz;
        logit_loss(p, f.z)
    }

    /// Mean noise-aware loss plus `l2 * ||weights||^2` over `rows`, and its
    /// gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: &SparseRows, rows: &[usize], targets: &[f64], l2: f64) -> Result<(f64, Vec<f64>)> {
        self.check_width(x.width)?;
        let n = self.params.len();
        let chunks: Vec<&[usize]> = rows.chunks(GRAD_CHUNK).collect();
        let partial = par::map(&chunks, |chunk| {
            let mut g = vec![0.0; n];
            let mut loss = 0.0;
            for &r in *chunk {
                let (idx, val) = x.row(r);
                loss += self.accumulate_grad(idx, val, targets[r], &mut g);
            }
            (loss, g)
        });
        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        for (l, g) in partial {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let m = rows.len().max(1) as f64;
        loss /= m;
        for (i, g) in grad.iter_mut().enumerate() {
            *g /= m;
            if self.is_weight(i) {
                *g += 2.0 * l2 * self.params[i];
                loss += l2 * self.params[i] * self.params[i];
            }
        }
        Ok((loss, grad))
    }

    /// Mean noise-aware loss without the penalty.
    pub fn mean_loss(&self, x: &SparseRows, targets: &[f64]) -> Result<f64> {
        self.check_width(x.width)?;
        if x.is_empty() {
            return Ok(0.0);
        }
        let losses = par::map_range(x.len(), |i| {
            let (idx, val) = x.row(i);
            logit_loss(targets[i], self.logit_sparse(idx, val))
        });
        Ok(losses.iter().sum::<f64>() / x.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss at initialization and after every epoch.
    pub train_loss: Vec<f64>,
    pub dev_loss: Vec<f64>,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
}

fn check_targets(x: &SparseRows, targets: &[f64]) -> Result<()> {
    if targets.len() != x.len() {
        return Err(Error::InvalidData(format!("{} targets for {} examples", targets.len(), x.len())));
    }
    if let Some(bad) = targets.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidData(format!("target {bad} outside [0,1]")));
    }
    Ok(())
}

/// Mini-batch gradient descent on the noise-aware loss, starting from `net`.
pub fn train_network(
    mut net: Network,
    x: &SparseRows,
    targets: &[f64],
    dev: Option<(&SparseRows, &[f64])>,
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    net.check_width(x.width)?;
    check_targets(x, targets)?;
    if x.is_empty() {
        return Err(Error::InvalidData("no training examples".into()));
    }
    if let Some((dx, dt)) = dev {
        net.check_width(dx.width)?;
        check_targets(dx, dt)?;
    }
    if config.patience.is_some() && dev.is_none() {
        return Err(Error::Config("early stopping needs a dev set".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut report = TrainReport {
        train_loss: vec![net.mean_loss(x, targets)?],
        dev_loss: Vec::new(),
        epochs_run: 0,
        best_epoch: 0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    if let Some((dx, dt)) = dev {
        let l = net.mean_loss(dx, dt)?;
        report.dev_loss.push(l);
        best = Some((l, net.params.clone()));
    }
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (_, grad) = net.loss_and_grad(x, batch, targets, config.l2_penalty)?;
            for (p, g) in net.params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
            if net.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch, what: "parameter" });
            }
        }
        let l = net.mean_loss(x, targets)?;
        if !l.is_finite() {
            return Err(Error::Diverged { epoch, what: "loss" });
        }
        report.train_loss.push(l);
        report.epochs_run = epoch;
        if let Some((dx, dt)) = dev {
            let dl = net.mean_loss(dx, dt)?;
            report.dev_loss.push(dl);
            let (best_loss, _) = best.as_ref().expect("set when dev is present");
            if dl < *best_loss {
                best = Some((dl, net.params.clone()));
                report.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if config.patience.is_some_and(|p| since_best >= p) {
                    break;
                }
            }
        }
    }
    match (config.patience, best) {
        (Some(_), Some((_, params))) => net.params = params,
        _ => report.best_epoch = report.epochs_run,
    }
    Ok((net, report))
}

/// Initializes a fresh network of `kind` and trains it.
pub fn train(
    x: &SparseRows,
    targets: &[f64],
    kind: ModelKind,
    dev: Option<(&SparseRows, &[f64])>,
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    let net = Network::init(kind, x.width, config)?;
    train_network(net, x, targets, dev, config)
}
