//! Multi-layer perceptron trained by full-batch gradient descent.
//!
//! The learner is a 16 → hidden (logistic) → output network: one linear
//! output with squared error for regression, four softmax outputs with
//! cross-entropy for classification. [`Network`] itself is a general stack
//! of dense layers so the backpropagation code can be checked on arbitrary
//! small shapes.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{constant_label, constant_value, one_hot, AlgorithmSpec, ConstantModel, LearnError, Target, TrainingSet};
use crate::rng::rng_from_seed;

/// Largest absolute gradient entry accepted as converged after training.
pub const GRADIENT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Initial weights are uniform in [−init_range, init_range].
    pub init_range: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: 10, learning_rate: 0.1, epochs: 1000, init_range: 0.5 }
    }
}

impl MlpParams {
    pub const NAMES: &'static [&'static str] = &["hidden", "learning_rate", "epochs", "init_range"];

    pub fn from_spec(spec: &AlgorithmSpec) -> Result<Self, LearnError> {
        let d = MlpParams::default();
        Ok(MlpParams {
            hidden: spec.count("hidden", d.hidden, 1)?,
            learning_rate: spec.real("learning_rate", d.learning_rate, |v| v > 0.0)?,
            epochs: spec.count("epochs", d.epochs, 0)?,
            init_range: spec.real("init_range", d.init_range, |v| v >= 0.0)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Output head and its loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean over the batch of Σ (output − target)².
    SquaredError,
    /// Softmax outputs; mean over the batch of −Σ target·ln(output).
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major n_out × n_in.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize, activation: Activation) -> Self {
        Layer { n_in, n_out, weights: vec![0.0; n_in * n_out], bias: vec![0.0; n_out], activation }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let w = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let z = self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            out.push(self.activation.apply(z));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub loss: Loss,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl Network {
    /// Layers sized by `sizes` (input first), sigmoid between layers and an
    /// identity last layer. Weights uniform in [−range, range].
    pub fn random(sizes: &[usize], loss: Loss, range: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Identity } else { Activation::Sigmoid };
                let mut l = Layer::zeros(w[0], w[1], act);
                for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                    *v = if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 };
                }
                l
            })
            .collect();
        Network { layers, loss }
    }

    /// Activations of every layer, input included; the head is applied to
    /// the last entry.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let mut out = Vec::with_capacity(l.n_out);
            l.forward(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        if self.loss == Loss::SoftmaxCrossEntropy {
            softmax_in_place(acts.last_mut().unwrap());
        }
        acts
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward_all(x).pop().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
    }

    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> f64 {
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let y = self.predict(x);
                match self.loss {
                    Loss::SquaredError => y.iter().zip(*t).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
                    Loss::SoftmaxCrossEntropy => {
                        -t.iter().zip(&y).filter(|(ti, _)| **ti != 0.0).map(|(ti, yi)| ti * yi.ln()).sum::<f64>()
                    }
                }
            })
            .sum();
        total / inputs.len() as f64
    }
}

/// Loss and its gradient over the batch, laid out like [`Network::params`].
pub fn mlp_gradient(net: &Network, inputs: &[&[f64]], targets: &[&[f64]]) -> (f64, Vec<f64>) {
    let batch = inputs.len() as f64;
    let mut grad = vec![0.0; net.n_params()];
    let offsets: Vec<usize> = net
        .layers
        .iter()
        .scan(0, |acc, l| {
            let start = *acc;
            *acc += l.weights.len() + l.bias.len();
            Some(start)
        })
        .collect();
    let mut loss = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let acts = net.forward_all(x);
        let y = acts.last().unwrap();
        // delta = ∂loss/∂(pre-activation) of the current layer
        let mut delta: Vec<f64> = match net.loss {
            Loss::SquaredError => {
                loss += y.iter().zip(*t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let last = net.layers.last().unwrap().activation;
                y.iter().zip(*t).map(|(a, b)| 2.0 * (a - b) * last.derivative(*a)).collect()
            }
            Loss::SoftmaxCrossEntropy => {
                loss -= t.iter().zip(y).filter(|(ti, _)| **ti != 0.0).map(|(ti, yi)| ti * yi.ln()).sum::<f64>();
                // the last layer is the identity feeding the softmax
                let t_sum: f64 = t.iter().sum();
                y.iter().zip(*t).map(|(a, b)| a * t_sum - b).collect()
            }
        };
        for (li, layer) in net.layers.iter().enumerate().rev() {
            let input = &acts[li];
            let base = offsets[li];
            for o in 0..layer.n_out {
                let row = &mut grad[base + o * layer.n_in..base + (o + 1) * layer.n_in];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += delta[o] * xi;
                }
                grad[base + layer.weights.len() + o] += delta[o];
            }
            if li > 0 {
                let below = net.layers[li - 1].activation;
                delta = (0..layer.n_in)
                    .map(|i| {
                        let back: f64 = (0..layer.n_out).map(|o| layer.weights[o * layer.n_in + i] * delta[o]).sum();
                        back * below.derivative(input[i])
                    })
                    .collect();
            }
        }
    }
    for g in &mut grad {
        *g /= batch;
    }
    (loss / batch, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Network,
}

impl MlpModel {
    /// Trains for a fixed number of epochs. Constant targets return a
    /// constant model instead. The flag is false when the final gradient is
    /// still above [`GRADIENT_TOLERANCE`].
    pub fn fit(spec: &AlgorithmSpec, data: &TrainingSet) -> Result<(Result<MlpModel, ConstantModel>, bool), LearnError> {
        let p = MlpParams::from_spec(spec)?;
        let (loss, targets): (Loss, Vec<Vec<f64>>) = match &data.target {
            Target::Regression(t) => {
                if let Some(v) = constant_value(t) {
                    return Ok((Err(ConstantModel::Value(v)), true));
                }
                (Loss::SquaredError, t.iter().map(|&v| vec![v]).collect())
            }
            Target::Classification(l) => {
                if let Some(s) = constant_label(l) {
                    return Ok((Err(ConstantModel::Label(s)), true));
                }
                (Loss::SoftmaxCrossEntropy, l.iter().map(|&s| one_hot(s).to_vec()).collect())
            }
        };
        let n_out = targets[0].len();
        let mut net = Network::random(&[data.features.n_cols(), p.hidden, n_out], loss, p.init_range, spec.seed);
        let inputs: Vec<&[f64]> = data.features.rows().collect();
        let target_refs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
        let mut params = net.params();
        let mut last_grad = vec![0.0; params.len()];
        for epoch in 0..=p.epochs {
            let (value, grad) = mlp_gradient(&net, &inputs, &target_refs);
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(LearnError::NumericalFailure(format!("MLP loss is not finite at epoch {epoch}")));
            }
            last_grad = grad;
            if epoch == p.epochs {
                break;
            }
            for (w, g) in params.iter_mut().zip(&last_grad) {
                *w -= p.learning_rate * g;
            }
            net.set_params(&params);
        }
        let converged = last_grad.iter().all(|g| g.abs() <= GRADIENT_TOLERANCE);
        Ok((Ok(MlpModel { network: net }), converged))
    }

    pub fn predict_value(&self, row: &[f64]) -> f64 {
        self.network.predict(row)[0]
    }

    /// Softmax outputs.
    pub fn predict_scores(&self, row: &[f64]) -> [f64; 4] {
        let y = self.network.predict(row);
        [y[0], y[1], y[2], y[3]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Style;
    use crate::learners::{fit, AlgorithmKind, Mode};
    use crate::rng::rng_from_seed;

    fn max_relative_error(net: &Network, inputs: &[&[f64]], targets: &[&[f64]]) -> f64 {
        let (_, analytic) = mlp_gradient(net, inputs, targets);
        let h = 1e-5;
        let base = net.params();
        let mut worst: f64 = 0.0;
        for k in 0..base.len() {
            let mut probe = net.clone();
            let mut p = base.clone();
            p[k] = base[k] + h;
            probe.set_params(&p);
            let up = probe.loss(inputs, targets);
            p[k] = base[k] - h;
            probe.set_params(&p);
            let down = probe.loss(inputs, targets);
            let numeric = (up - down) / (2.0 * h);
            let denom = (analytic[k].abs() + numeric.abs()).max(1e-6);
            worst = worst.max((analytic[k] - numeric).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng_from_seed(100);
        for case in 0..20u64 {
            for loss in [Loss::SquaredError, Loss::SoftmaxCrossEntropy] {
                let n_in = r.random_range(2..6);
                let hidden = r.random_range(2..6);
                let n_out = if loss == Loss::SquaredError { r.random_range(1..3) } else { r.random_range(2..5) };
                let net = Network::random(&[n_in, hidden, n_out], loss, 1.0, case);
                let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..n_in).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
                let ts: Vec<Vec<f64>> = (0..5)
                    .map(|_| match loss {
                        Loss::SquaredError => (0..n_out).map(|_| r.random::<f64>()).collect(),
                        Loss::SoftmaxCrossEntropy => {
                            let mut t = vec![0.0; n_out];
                            t[r.random_range(0..n_out)] = 1.0;
                            t
                        }
                    })
                    .collect();
                let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
                let tr: Vec<&[f64]> = ts.iter().map(Vec::as_slice).collect();
                let err = max_relative_error(&net, &xr, &tr);
                assert!(err < 1e-4, "case {case} {loss:?}: {err}");
            }
        }
    }

    #[test]
    fn zero_network_has_zero_output_gradient() {
        let net = Network::random(&[3, 4, 1], Loss::SquaredError, 0.0, 0);
        let x = [0.0; 3];
        let (_, g) = mlp_gradient(&net, &[&x], &[&[0.0]]);
        let hidden_out = &g[net.layers[0].weights.len() + net.layers[0].bias.len()..];
        assert!(hidden_out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_unit_closed_form() {
        let mut net = Network { layers: vec![Layer::zeros(3, 1, Activation::Identity)], loss: Loss::SquaredError };
        net.set_params(&[0.2, -0.4, 0.7, 0.1]);
        let xs = [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let ts = [[0.3], [0.9]];
        let xr: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let tr: Vec<&[f64]> = ts.iter().map(|t| t.as_slice()).collect();
        let (_, g) = mlp_gradient(&net, &xr, &tr);
        let mut expected = [0.0; 4];
        for (x, t) in xs.iter().zip(&ts) {
            let pred = 0.1 + 0.2 * x[0] - 0.4 * x[1] + 0.7 * x[2];
            for j in 0..3 {
                expected[j] += 2.0 * (pred - t[0]) * x[j] / 2.0;
            }
            expected[3] += 2.0 * (pred - t[0]) / 2.0;
        }
        for (a, b) in g.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_clusters_are_learned() {
        // class c sets features 4c..4c+4, plus one random bit
        let mut r = rng_from_seed(7);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..4 {
            for _ in 0..10 {
                let mut x = vec![0.0; 16];
                for j in 0..4 {
                    x[4 * c + j] = 1.0;
                }
                x[r.random_range(0..16)] = 1.0;
                rows.push(x);
                labels.push(Style::ALL[c]);
            }
        }
        let data = TrainingSet::classification(&rows, labels.clone()).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmKind::Mlp).with("epochs", 500.0).with_seed(1);
        let m = fit(&spec, &data, Mode::Classification).unwrap();
        let correct = rows.iter().zip(&labels).filter(|(x, l)| m.predict_classification(x).unwrap().0 == **l).count();
        assert_eq!(correct, rows.len());
    }

    #[test]
    fn training_reduces_loss() {
        let rows = crate::learners::tests::random_rows(12, 30, 16);
        let t: Vec<f64> = rows.iter().map(|x| 0.2 + 0.5 * x[0]).collect();
        let data = TrainingSet::regression(&rows, t.clone()).unwrap();
        let spec = AlgorithmSpec::new(AlgorithmKind::Mlp).with("epochs", 300.0);
        let (m, _) = MlpModel::fit(&spec, &data).unwrap();
        let m = m.unwrap();
        let mse: f64 = rows.iter().zip(&t).map(|(x, y)| (m.predict_value(x) - y).powi(2)).sum::<f64>() / 30.0;
        assert!(mse < 0.01, "{mse}");
    }
}
