//! Fully connected networks over a flat parameter vector, with an explicit
//! activation tape for reverse-mode differentiation.

use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => super::sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

/// Architecture of a multilayer perceptron.
///
/// `activations` holds one entry per layer (hidden layers then the output
/// layer). Dropout, when `dropout_rate > 0`, is applied to the output of the
/// last hidden layer only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activations: Vec<Activation>,
    #[serde(default)]
    pub dropout_rate: f64,
}

impl MlpSpec {
    /// Network with a shared hidden activation and a separate output activation.
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        hidden: Activation,
        output: Activation,
    ) -> Self {
        let mut activations = vec![hidden; hidden_dims.len()];
        activations.push(output);
        Self {
            input_dim,
            hidden_dims,
            output_dim,
            activations,
            dropout_rate: 0.0,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "mlp dimensions must be positive: {} -> {:?} -> {}",
                self.input_dim, self.hidden_dims, self.output_dim
            )));
        }
        if self.activations.len() != self.hidden_dims.len() + 1 {
            return Err(Error::dims(
                "mlp activations",
                self.hidden_dims.len() + 1,
                self.activations.len(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    /// `(fan_in, fan_out)` for every layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.num_layers());
        let mut fan_in = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| o * i + o).sum()
    }

    /// Weights (row-major `[out, in]`) followed by biases, layer by layer.
    pub fn layout(&self) -> Vec<LayoutEntry> {
        let mut entries = Vec::with_capacity(2 * self.num_layers());
        let mut offset = 0;
        for (l, (fan_in, fan_out)) in self.layer_dims().into_iter().enumerate() {
            entries.push(LayoutEntry {
                name: format!("layer{l}.weight"),
                shape: vec![fan_out, fan_in],
                offset,
            });
            offset += fan_in * fan_out;
            entries.push(LayoutEntry {
                name: format!("layer{l}.bias"),
                shape: vec![fan_out],
                offset,
            });
            offset += fan_out;
        }
        entries
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parameter vector with its layout table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    pub values: Vec<f64>,
    pub layout: Vec<LayoutEntry>,
}

impl FlatParams {
    /// Checks that the layout is contiguous, non-overlapping and covers `values`.
    pub fn new(values: Vec<f64>, layout: Vec<LayoutEntry>) -> Result<Self> {
        let mut expected_offset = 0;
        for entry in &layout {
            if entry.offset != expected_offset {
                return Err(Error::InvalidArgument(format!(
                    "layout entry `{}` at offset {} but expected {}",
                    entry.name, entry.offset, expected_offset
                )));
            }
            expected_offset += entry.len();
        }
        if expected_offset != values.len() {
            return Err(Error::dims("flat params", expected_offset, values.len()));
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .iter()
            .find(|e| e.name == name)
            .map(|e| &self.values[e.offset..e.offset + e.len()])
    }
}

/// Kaiming-uniform initialization with `a = sqrt(5)`: weights and biases are
/// drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_params(spec: &MlpSpec, rng: &mut Rng) -> Result<FlatParams> {
    spec.validate()?;
    let mut values = Vec::with_capacity(spec.param_count());
    for (fan_in, fan_out) in spec.layer_dims() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out + fan_out {
            values.push(rng.uniform_range(-bound, bound));
        }
    }
    FlatParams::new(values, spec.layout())
}

/// Activations recorded by a forward pass.
///
/// The tape borrows the parameters it was recorded with, so they cannot be
/// updated while a backward pass is still pending.
#[derive(Debug)]
pub struct Tape<'a> {
    spec: &'a MlpSpec,
    params: &'a [f64],
    /// Input to each layer (after dropout of the previous layer).
    inputs: Vec<Vec<f64>>,
    /// Activation output of each layer, before dropout.
    outputs: Vec<Vec<f64>>,
    /// Inverted-dropout scale per unit of the last hidden layer.
    dropout_mask: Option<Vec<f64>>,
}

impl<'a> Tape<'a> {
    pub fn spec(&self) -> &MlpSpec {
        self.spec
    }

    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("tape has at least one layer")
    }
}

fn check_params(spec: &MlpSpec, params: &[f64]) -> Result<()> {
    let expected = spec.param_count();
    if params.len() != expected {
        return Err(Error::dims("mlp parameters", expected, params.len()));
    }
    Ok(())
}

/// Runs the network on one input vector.
///
/// With `train_mode` off, dropout is the identity and `rng` is not touched.
pub fn mlp_forward<'a>(
    spec: &'a MlpSpec,
    params: &'a [f64],
    input: &[f64],
    rng: &mut Rng,
    train_mode: bool,
) -> Result<(Vec<f64>, Tape<'a>)> {
    check_params(spec, params)?;
    if input.len() != spec.input_dim {
        return Err(Error::dims("mlp layer 0 input", spec.input_dim, input.len()));
    }
    let layers = spec.layer_dims();
    let last_hidden = spec.hidden_dims.len().checked_sub(1);
    let mut inputs = Vec::with_capacity(layers.len());
    let mut outputs = Vec::with_capacity(layers.len());
    let mut dropout_mask = None;
    let mut x = input.to_vec();
    let mut offset = 0;
    for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
        let w = &params[offset..offset + fan_in * fan_out];
        let b = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let act = spec.activations[l];
        let y: Vec<f64> = (0..fan_out)
            .map(|o| {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                act.apply(super::dot(row, &x) + b[o])
            })
            .collect();
        let mut next = y.clone();
        if Some(l) == last_hidden && train_mode && spec.dropout_rate > 0.0 {
            let keep = 1.0 - spec.dropout_rate;
            let mask: Vec<f64> = (0..fan_out)
                .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            for (v, m) in next.iter_mut().zip(&mask) {
                *v *= m;
            }
            dropout_mask = Some(mask);
        }
        inputs.push(x);
        outputs.push(y);
        x = next;
    }
    Ok((
        x,
        Tape {
            spec,
            params,
            inputs,
            outputs,
            dropout_mask,
        },
    ))
}

/// Gradients of `output_grad . output` with respect to parameters and input.
pub fn mlp_backward(tape: &Tape<'_>, output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut param_grads = vec![0.0; tape.params.len()];
    let input_grad = mlp_backward_accumulate(tape, output_grad, &mut param_grads)?;
    Ok((param_grads, input_grad))
}

/// Like [`mlp_backward`] but adds the parameter gradient into `param_grads`.
/// Returns the input gradient.
pub fn mlp_backward_accumulate(
    tape: &Tape<'_>,
    output_grad: &[f64],
    param_grads: &mut [f64],
) -> Result<Vec<f64>> {
    let spec = tape.spec;
    if output_grad.len() != spec.output_dim {
        return Err(Error::dims("mlp output gradient", spec.output_dim, output_grad.len()));
    }
    if param_grads.len() != tape.params.len() {
        return Err(Error::TapeMismatch(format!(
            "gradient buffer has {} entries, tape parameters have {}",
            param_grads.len(),
            tape.params.len()
        )));
    }
    let layers = spec.layer_dims();
    if tape.outputs.len() != layers.len() {
        return Err(Error::TapeMismatch(format!(
            "tape has {} layers, spec has {}",
            tape.outputs.len(),
            layers.len()
        )));
    }
    let mut offsets = Vec::with_capacity(layers.len());
    let mut offset = 0;
    for &(fan_in, fan_out) in &layers {
        offsets.push(offset);
        offset += fan_in * fan_out + fan_out;
    }
    let last_hidden = spec.hidden_dims.len().checked_sub(1);

    // gradient with respect to the (post-dropout) output of the current layer
    let mut grad = output_grad.to_vec();
    for l in (0..layers.len()).rev() {
        let (fan_in, fan_out) = layers[l];
        if Some(l) == last_hidden {
            if let Some(mask) = &tape.dropout_mask {
                for (g, m) in grad.iter_mut().zip(mask) {
                    *g *= m;
                }
            }
        }
        let act = spec.activations[l];
        let y = &tape.outputs[l];
        let delta: Vec<f64> = grad
            .iter()
            .zip(y)
            .map(|(g, &yo)| g * act.derivative_from_output(yo))
            .collect();
        let x = &tape.inputs[l];
        let base = offsets[l];
        let w = &tape.params[base..base + fan_in * fan_out];
        {
            let (gw, gb) = param_grads[base..base + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for o in 0..fan_out {
                let d = delta[o];
                if d != 0.0 {
                    super::axpy(d, x, &mut gw[o * fan_in..(o + 1) * fan_in]);
                }
                gb[o] += d;
            }
        }
        let mut prev = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            if d != 0.0 {
                super::axpy(d, &w[o * fan_in..(o + 1) * fan_in], &mut prev);
            }
        }
        grad = prev;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(input: usize, output: usize) -> MlpSpec {
        MlpSpec::new(input, vec![], output, Activation::Linear, Activation::Linear)
    }

    #[test]
    fn identity_layer() {
        let spec = linear(2, 2);
        let params = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let mut rng = Rng::new(0);
        let (y, _) = mlp_forward(&spec, &params, &[1.0, 2.0], &mut rng, false).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn affine_by_hand() {
        let spec = linear(1, 1);
        let params = vec![2.0, 1.0];
        let mut rng = Rng::new(0);
        let (y, _) = mlp_forward(&spec, &params, &[3.0], &mut rng, false).unwrap();
        assert_eq!(y, vec![7.0]);
    }

    #[test]
    fn linear_backward_closed_form() {
        let spec = linear(3, 2);
        let params = vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, -0.8];
        let x = [1.0, 2.0, -1.5];
        let g = [0.25, -2.0];
        let mut rng = Rng::new(0);
        let (_, tape) = mlp_forward(&spec, &params, &x, &mut rng, false).unwrap();
        let (pg, ig) = mlp_backward(&tape, &g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(pg[o * 3 + i], g[o] * x[i]);
            }
            assert_eq!(pg[6 + o], g[o]);
        }
        for i in 0..3 {
            let expect = g[0] * params[i] + g[1] * params[3 + i];
            assert!((ig[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let spec = MlpSpec::new(2, vec![100, 100], 3, Activation::Tanh, Activation::Linear);
        let mut rng = Rng::new(42);
        let params = init_params(&spec, &mut rng).unwrap();
        let mut r1 = Rng::new(1);
        let mut r2 = Rng::new(2);
        let (a, _) = mlp_forward(&spec, &params.values, &[0.3, 0.7], &mut r1, false).unwrap();
        let (b, _) = mlp_forward(&spec, &params.values, &[0.3, 0.7], &mut r2, false).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let spec = MlpSpec::new(3, vec![5], 2, Activation::Sigmoid, Activation::Tanh);
        let mut rng = Rng::new(4);
        let params = init_params(&spec, &mut rng).unwrap();
        let (_, tape) = mlp_forward(&spec, &params.values, &[0.1, 0.2, 0.3], &mut rng, false).unwrap();
        let (pg, ig) = mlp_backward(&tape, &[0.0, 0.0]).unwrap();
        assert!(pg.iter().all(|&v| v == 0.0));
        assert!(ig.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let spec = linear(2, 1);
        let mut rng = Rng::new(0);
        let params = vec![1.0, 1.0, 0.0];
        let err = mlp_forward(&spec, &params, &[1.0], &mut rng, false).unwrap_err();
        assert!(err.to_string().contains("layer 0"), "{err}");
        assert!(mlp_forward(&spec, &params[..2], &[1.0, 2.0], &mut rng, false).is_err());
        let (_, tape) = mlp_forward(&spec, &params, &[1.0, 2.0], &mut rng, false).unwrap();
        assert!(mlp_backward(&tape, &[1.0, 2.0]).is_err());
        let mut short = vec![0.0; 2];
        assert!(matches!(
            mlp_backward_accumulate(&tape, &[1.0], &mut short),
            Err(Error::TapeMismatch(_))
        ));
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let spec =
            MlpSpec::new(2, vec![50], 1, Activation::Relu, Activation::Linear).with_dropout(0.5);
        let mut rng = Rng::new(8);
        let params = init_params(&spec, &mut rng).unwrap();
        let (_, eval_tape) = mlp_forward(&spec, &params.values, &[1.0, 1.0], &mut rng, false).unwrap();
        assert!(eval_tape.dropout_mask.is_none());
        let (_, train_tape) = mlp_forward(&spec, &params.values, &[1.0, 1.0], &mut rng, true).unwrap();
        let mask = train_tape.dropout_mask.as_ref().unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
        assert!(mask.contains(&0.0));
    }

    #[test]
    fn layout_is_contiguous() {
        let spec = MlpSpec::new(21, vec![256, 256, 256, 256], 7, Activation::Relu, Activation::Linear);
        let layout = spec.layout();
        let params = FlatParams::new(vec![0.0; spec.param_count()], layout).unwrap();
        assert_eq!(params.len(), 21 * 256 + 256 + 3 * (256 * 256 + 256) + 256 * 7 + 7);
        assert_eq!(params.slice("layer4.bias").unwrap().len(), 7);
        let mut bad = spec.layout();
        bad[1].offset += 1;
        assert!(FlatParams::new(vec![0.0; spec.param_count()], bad).is_err());
    }
}
