use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::{matmul_nt, DenseTensor};
use crate::error::{Error, Result};

/// How a layer's weight is parameterized during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Plain,
    SignIn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `1/(2n) Σ ‖out − y‖²`
    Mse,
    /// Softmax cross-entropy, mean over the batch.
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Values(DenseTensor),
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(t) => t.rows(),
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`, row-major.
    pub weight: DenseTensor,
    pub bias: Option<Vec<f64>>,
    pub kind: ParamKind,
}

impl Layer {
    pub fn new(weight: DenseTensor, bias: Option<Vec<f64>>, kind: ParamKind) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::Shape("layer weight must be a matrix".into()));
        }
        if let Some(b) = &bias {
            if b.len() != weight.rows() {
                return Err(Error::Shape(format!(
                    "bias length {} does not match {} outputs",
                    b.len(),
                    weight.rows()
                )));
            }
        }
        Ok(Self { weight, bias, kind })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

/// Feedforward ReLU network: affine layers with ReLU between them, none after the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallNet {
    layers: Vec<Layer>,
    loss: Loss,
}

impl SmallNet {
    pub fn new(layers: Vec<Layer>, loss: Loss) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, loss })
    }

    /// He-normal weights `N(0, 2/fan_in)`, no biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], loss: Loss, kind: ParamKind, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::invalid("sizes", "need input and output sizes"));
        }
        let layers = sizes
            .windows(2)
            .map(|io| {
                let std = (2.0 / io[0] as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let w: Vec<f64> = (0..io[0] * io[1]).map(|_| normal.sample(rng)).collect();
                Layer::new(DenseTensor::from_parts(vec![io[1], io[0]], w), None, kind)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, loss)
    }

    /// Adds a zero bias to every layer that has none.
    pub fn with_zero_biases(mut self) -> Self {
        for l in &mut self.layers {
            if l.bias.is_none() {
                l.bias = Some(vec![0.0; l.out_dim()]);
            }
        }
        self
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn set_kind(&mut self, kind: ParamKind) {
        for l in &mut self.layers {
            l.kind = kind;
        }
    }

    /// Parameters flattened layer by layer: weight then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.values());
            if let Some(b) = &l.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weight.len();
            l.weight.values_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
            if let Some(b) = &mut l.bias {
                let n = b.len();
                b.copy_from_slice(&flat[at..at + n]);
                at += n;
            }
        }
        Ok(())
    }
}

/// Activations kept from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    batch: usize,
    /// Input to each layer (post-ReLU of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
    dims: Vec<(usize, usize)>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.batch
    }
}

pub fn mlp_forward(net: &SmallNet, batch: &DenseTensor) -> Result<(DenseTensor, ForwardCache)> {
    if batch.shape().len() != 2 || batch.cols() != net.input_dim() {
        return Err(Error::Shape(format!(
            "batch shape {:?} does not match input dimension {}",
            batch.shape(),
            net.input_dim()
        )));
    }
    let n = batch.rows();
    let last = net.layers.len() - 1;
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre = Vec::with_capacity(net.layers.len());
    let mut h = batch.values().to_vec();
    for (li, layer) in net.layers.iter().enumerate() {
        let (o, i) = (layer.out_dim(), layer.in_dim());
        let mut z = matmul_nt(&h, n, i, layer.weight.values(), o);
        if let Some(b) = &layer.bias {
            for row in z.chunks_mut(o) {
                for (v, bb) in row.iter_mut().zip(b) {
                    *v += bb;
                }
            }
        }
        let next = if li < last {
            z.iter().map(|&v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        inputs.push(std::mem::replace(&mut h, next));
        pre.push(z);
    }
    let dims = net.layers.iter().map(|l| (l.out_dim(), l.in_dim())).collect();
    let out = DenseTensor::from_parts(vec![n, net.output_dim()], h);
    Ok((
        out,
        ForwardCache {
            batch: n,
            inputs,
            pre,
            dims,
        },
    ))
}

/// Per-parameter gradients, shaped like the owning network.
#[derive(Clone, Debug, PartialEq)]
pub struct GradStore {
    pub weights: Vec<DenseTensor>,
    pub biases: Vec<Option<Vec<f64>>>,
}

impl GradStore {
    pub fn zeros_like(net: &SmallNet) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| DenseTensor::zeros(l.weight.shape().to_vec()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| l.bias.as_ref().map(|b| vec![0.0; b.len()]))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.values());
            if let Some(b) = b {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(DenseTensor::is_finite)
            && self.biases.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Loss value and its gradient with respect to the network output.
pub fn loss_and_grad(loss: Loss, output: &DenseTensor, targets: &Targets) -> Result<(f64, DenseTensor)> {
    let n = output.rows();
    let k = output.cols();
    if targets.len() != n {
        return Err(Error::Shape(format!("{} targets for {} outputs", targets.len(), n)));
    }
    let nf = n as f64;
    match (loss, targets) {
        (Loss::Mse, Targets::Values(y)) => {
            if y.cols() != k {
                return Err(Error::Shape("target width differs from output width".into()));
            }
            let mut g = Vec::with_capacity(n * k);
            let mut total = 0.0;
            for (o, t) in output.values().iter().zip(y.values()) {
                let r = o - t;
                total += r * r;
                g.push(r / nf);
            }
            Ok((total / (2.0 * nf), DenseTensor::from_parts(vec![n, k], g)))
        }
        (Loss::CrossEntropy, Targets::Classes(labels)) => {
            let mut g = vec![0.0; n * k];
            let mut total = 0.0;
            for (r, &label) in labels.iter().enumerate() {
                if label >= k {
                    return Err(Error::Shape(format!("label {label} out of range for {k} classes")));
                }
                let row = output.row(r);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                total += z.ln() + max - row[label];
                for (c, e) in exps.iter().enumerate() {
                    let p = e / z;
                    g[r * k + c] = (p - if c == label { 1.0 } else { 0.0 }) / nf;
                }
            }
            Ok((total / nf, DenseTensor::from_parts(vec![n, k], g)))
        }
        _ => Err(Error::invalid("targets", "target kind does not match the loss")),
    }
}

pub fn mlp_backward(net: &SmallNet, cache: &ForwardCache, loss_grad: &DenseTensor) -> Result<GradStore> {
    let dims: Vec<(usize, usize)> = net.layers.iter().map(|l| (l.out_dim(), l.in_dim())).collect();
    if dims != cache.dims {
        return Err(Error::Shape("forward cache was produced by a different network".into()));
    }
    let n = cache.batch;
    if loss_grad.shape() != [n, net.output_dim()] {
        return Err(Error::Shape(format!(
            "loss gradient shape {:?} does not match output [{n}, {}]",
            loss_grad.shape(),
            net.output_dim()
        )));
    }
    let mut grads = GradStore::zeros_like(net);
    let mut delta = loss_grad.values().to_vec();
    for li in (0..net.layers.len()).rev() {
        let layer = &net.layers[li];
        let (o, i) = (layer.out_dim(), layer.in_dim());
        let h = &cache.inputs[li];
        let gw = grads.weights[li].values_mut();
        for r in 0..n {
            let d = &delta[r * o..(r + 1) * o];
            let x = &h[r * i..(r + 1) * i];
            for (oo, &dv) in d.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                let row = &mut gw[oo * i..(oo + 1) * i];
                for (g, &xv) in row.iter_mut().zip(x) {
                    *g += dv * xv;
                }
            }
        }
        if let Some(gb) = &mut grads.biases[li] {
            for r in 0..n {
                for (g, dv) in gb.iter_mut().zip(&delta[r * o..(r + 1) * o]) {
                    *g += dv;
                }
            }
        }
        if li > 0 {
            let w = layer.weight.values();
            let prev_pre = &cache.pre[li - 1];
            let mut next = vec![0.0; n * i];
            for r in 0..n {
                let d = &delta[r * o..(r + 1) * o];
                let out_row = &mut next[r * i..(r + 1) * i];
                for (oo, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    for (slot, &wv) in out_row.iter_mut().zip(&w[oo * i..(oo + 1) * i]) {
                        *slot += dv * wv;
                    }
                }
                // ReLU'(0) is taken as 0.
                for (slot, &z) in out_row.iter_mut().zip(&prev_pre[r * i..(r + 1) * i]) {
                    if z <= 0.0 {
                        *slot = 0.0;
                    }
                }
            }
            delta = next;
        }
    }
    Ok(grads)
}

/// Forward, loss and backward in one call.
pub fn loss_and_grads(net: &SmallNet, batch: &DenseTensor, targets: &Targets) -> Result<(f64, GradStore)> {
    let (out, cache) = mlp_forward(net, batch)?;
    let (loss, g) = loss_and_grad(net.loss(), &out, targets)?;
    Ok((loss, mlp_backward(net, &cache, &g)?))
}

pub fn loss_value(net: &SmallNet, batch: &DenseTensor, targets: &Targets) -> Result<f64> {
    let (out, _) = mlp_forward(net, batch)?;
    Ok(loss_and_grad(net.loss(), &out, targets)?.0)
}

/// Fraction of rows whose arg-max output equals the class label.
pub fn accuracy(net: &SmallNet, batch: &DenseTensor, labels: &[usize]) -> Result<f64> {
    let (out, _) = mlp_forward(net, batch)?;
    if labels.len() != out.rows() {
        return Err(Error::Shape("label count differs from batch size".into()));
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(r, &l)| {
            let row = out.row(*r);
            let best = row
                .iter()
                .enumerate()
                .fold(0, |b, (c, v)| if *v > row[b] { c } else { b });
            best == l
        })
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neuron(a: f64, w: f64) -> SmallNet {
        let l1 = Layer::new(DenseTensor::matrix(1, 1, vec![w]).unwrap(), None, ParamKind::Plain).unwrap();
        let l2 = Layer::new(DenseTensor::matrix(1, 1, vec![a]).unwrap(), None, ParamKind::Plain).unwrap();
        SmallNet::new(vec![l1, l2], Loss::Mse).unwrap()
    }

    fn col(v: &[f64]) -> DenseTensor {
        DenseTensor::matrix(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn single_neuron_forward() {
        let (out, _) = mlp_forward(&neuron(1.0, 1.0), &col(&[2.0, -1.0])).unwrap();
        assert_eq!(out.values(), &[2.0, 0.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let z = |o, i| Layer::new(DenseTensor::zeros(vec![o, i]), None, ParamKind::Plain).unwrap();
        let net = SmallNet::new(vec![z(2, 2), z(1, 2)], Loss::Mse).unwrap();
        let batch = DenseTensor::from_rows(&[vec![3.0, -7.0], vec![0.5, 1.5]]).unwrap();
        let (out, _) = mlp_forward(&net, &batch).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_rejects_width_mismatch() {
        let batch = DenseTensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(mlp_forward(&neuron(1.0, 1.0), &batch), Err(Error::Shape(_))));
    }

    #[test]
    fn gradients_vanish_at_optimum() {
        let net = neuron(1.0, 1.0);
        let (l, g) = loss_and_grads(&net, &col(&[1.0]), &Targets::Values(col(&[1.0]))).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_chain_rule_single_neuron() {
        // r = 0.5 - 1 = -0.5; dL/da = r·σ(wz) = -0.5; dL/dw = r·a·z = -0.25
        let net = neuron(0.5, 1.0);
        let (_, g) = loss_and_grads(&net, &col(&[1.0]), &Targets::Values(col(&[1.0]))).unwrap();
        let flat = g.flatten();
        assert!((flat[0] + 0.25).abs() < 1e-15, "dw = {}", flat[0]);
        assert!((flat[1] + 0.5).abs() < 1e-15, "da = {}", flat[1]);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let net = neuron(1.0, 1.0);
        let (_, cache) = mlp_forward(&net, &col(&[1.0])).unwrap();
        let l1 = Layer::new(DenseTensor::zeros(vec![2, 1]), None, ParamKind::Plain).unwrap();
        let l2 = Layer::new(DenseTensor::zeros(vec![1, 2]), None, ParamKind::Plain).unwrap();
        let other = SmallNet::new(vec![l1, l2], Loss::Mse).unwrap();
        let g = DenseTensor::zeros(vec![1, 1]);
        assert!(mlp_backward(&other, &cache, &g).is_err());
    }

    #[test]
    fn incompatible_layers_rejected() {
        let l1 = Layer::new(DenseTensor::zeros(vec![3, 2]), None, ParamKind::Plain).unwrap();
        let l2 = Layer::new(DenseTensor::zeros(vec![1, 2]), None, ParamKind::Plain).unwrap();
        assert!(SmallNet::new(vec![l1, l2], Loss::Mse).is_err());
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let out = DenseTensor::zeros(vec![2, 4]);
        let (l, g) = loss_and_grad(Loss::CrossEntropy, &out, &Targets::Classes(vec![0, 3])).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((g.at(0, 0) - (0.25 - 1.0) / 2.0).abs() < 1e-15);
        assert!((g.at(0, 1) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn flat_params_roundtrip() {
        let mut net = neuron(0.3, -0.7);
        let p = net.params_flat();
        assert_eq!(p, vec![-0.7, 0.3]);
        net.set_params_flat(&[1.0, 2.0]).unwrap();
        assert_eq!(net.layers()[1].weight.values(), &[2.0]);
        assert!(net.set_params_flat(&[1.0]).is_err());
    }
}
