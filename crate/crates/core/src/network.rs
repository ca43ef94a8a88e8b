//! The hypernetwork `h(r, phi)`: maps a preference vector to the parameters
//! of a target model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    init_params, mlp_backward_accumulate, mlp_forward, sigmoid, Activation, FlatParams,
    LayoutEntry, MlpSpec, Rng, Tape,
};
use crate::preference::PreferenceVector;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squash {
    None,
    /// Componentwise logistic map into `(0, 1)`, for box-constrained problems.
    Sigmoid,
}

/// What the hypernetwork emits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    /// The decision vector itself.
    RawVector { dim: usize, squash: Squash },
    /// Weights of a target MLP, in its flat layout.
    Mlp { spec: MlpSpec },
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSpec::RawVector { dim: 0, .. } => Err(Error::InvalidArgument(
                "raw target vector needs dim >= 1".into(),
            )),
            TargetSpec::RawVector { .. } => Ok(()),
            TargetSpec::Mlp { spec } => spec.validate(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            TargetSpec::RawVector { dim, .. } => *dim,
            TargetSpec::Mlp { spec } => spec.param_count(),
        }
    }

    pub fn layout(&self) -> Vec<LayoutEntry> {
        match self {
            TargetSpec::RawVector { dim, .. } => vec![LayoutEntry {
                name: "theta".into(),
                shape: vec![*dim],
                offset: 0,
            }],
            TargetSpec::Mlp { spec } => spec.layout(),
        }
    }

    fn squash(&self) -> Squash {
        match self {
            TargetSpec::RawVector { squash, .. } => *squash,
            TargetSpec::Mlp { .. } => Squash::None,
        }
    }
}

/// Realized target parameters `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetWeights {
    pub values: Vec<f64>,
}

impl TargetWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Attaches the target layout.
    pub fn to_flat_params(&self, target: &TargetSpec) -> Result<FlatParams> {
        FlatParams::new(self.values.clone(), target.layout())
    }

    pub fn from_flat_params(params: FlatParams) -> Self {
        Self {
            values: params.values,
        }
    }
}

/// Trunk width and dropout of the hypernetwork.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypernetShape {
    pub hidden_dims: Vec<usize>,
    pub dropout_rate: f64,
}

impl Default for HypernetShape {
    fn default() -> Self {
        Self {
            hidden_dims: vec![100, 100],
            dropout_rate: 0.0,
        }
    }
}

/// Hypernetwork parameters `phi` together with the architecture they belong to.
///
/// The trunk is a ReLU MLP; its single linear head emits every target tensor,
/// sliced by the target layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypernetwork {
    pub spec: MlpSpec,
    pub target: TargetSpec,
    pub params: FlatParams,
}

/// Kaiming-uniform initialized hypernetwork for `objectives` inputs.
pub fn init_hypernet(
    target: TargetSpec,
    objectives: usize,
    shape: &HypernetShape,
    rng: &mut Rng,
) -> Result<Hypernetwork> {
    target.validate()?;
    if objectives < 1 {
        return Err(Error::InvalidArgument("hypernetwork needs J >= 1 inputs".into()));
    }
    let spec = MlpSpec::new(
        objectives,
        shape.hidden_dims.clone(),
        target.param_count(),
        Activation::Relu,
        Activation::Linear,
    )
    .with_dropout(shape.dropout_rate);
    let params = init_params(&spec, rng)?;
    Ok(Hypernetwork {
        spec,
        target,
        params,
    })
}

/// Forward record of one `generate_target` call.
#[derive(Debug)]
pub struct TargetTape<'a> {
    mlp: Tape<'a>,
    /// Squashed outputs, kept for the chain rule through the sigmoid.
    squashed: Option<Vec<f64>>,
}

impl Hypernetwork {
    pub fn objectives(&self) -> usize {
        self.spec.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `theta = h(r, phi)`, reshaped and squashed per the target spec.
    pub fn generate_target<'a>(
        &'a self,
        r: &PreferenceVector,
        rng: &mut Rng,
        train_mode: bool,
    ) -> Result<(TargetWeights, TargetTape<'a>)> {
        if r.dim() != self.objectives() {
            return Err(Error::dims("preference vector", self.objectives(), r.dim()));
        }
        let (raw, tape) = mlp_forward(&self.spec, &self.params.values, r.weights(), rng, train_mode)?;
        let (values, squashed) = match self.target.squash() {
            Squash::None => (raw, None),
            Squash::Sigmoid => {
                let s: Vec<f64> = raw.iter().map(|&v| sigmoid(v)).collect();
                (s.clone(), Some(s))
            }
        };
        Ok((TargetWeights { values }, TargetTape { mlp: tape, squashed }))
    }

    /// Adds the gradient of `dloss_dtheta . theta` with respect to `phi` into
    /// `grad_phi`.
    pub fn backprop_to_phi(
        &self,
        tape: &TargetTape<'_>,
        dloss_dtheta: &[f64],
        grad_phi: &mut [f64],
    ) -> Result<()> {
        if !std::ptr::eq(tape.mlp.spec(), &self.spec) {
            return Err(Error::TapeMismatch(
                "tape was recorded by a different hypernetwork".into(),
            ));
        }
        if dloss_dtheta.len() != self.spec.output_dim {
            return Err(Error::dims("target gradient", self.spec.output_dim, dloss_dtheta.len()));
        }
        match &tape.squashed {
            None => {
                mlp_backward_accumulate(&tape.mlp, dloss_dtheta, grad_phi)?;
            }
            Some(s) => {
                let chained: Vec<f64> = dloss_dtheta
                    .iter()
                    .zip(s)
                    .map(|(g, y)| g * y * (1.0 - y))
                    .collect();
                mlp_backward_accumulate(&tape.mlp, &chained, grad_phi)?;
            }
        }
        Ok(())
    }
}

/// Serialized hypernetwork.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub hypernet: MlpSpec,
    pub target: TargetSpec,
    pub layout: Vec<LayoutEntry>,
    pub params: Vec<f64>,
    pub seed: u64,
    pub iteration: u64,
}

impl Checkpoint {
    pub fn new(hn: &Hypernetwork, seed: u64, iteration: u64) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            hypernet: hn.spec.clone(),
            target: hn.target.clone(),
            layout: hn.params.layout.clone(),
            params: hn.params.values.clone(),
            seed,
            iteration,
        }
    }

    /// Rebuilds the hypernetwork, checking the layout against the spec.
    pub fn to_hypernet(&self) -> Result<Hypernetwork> {
        self.hypernet.validate()?;
        self.target.validate()?;
        if self.hypernet.output_dim != self.target.param_count() {
            return Err(Error::dims(
                "checkpoint head width",
                self.target.param_count(),
                self.hypernet.output_dim,
            ));
        }
        if self.layout != self.hypernet.layout() {
            return Err(Error::Data("checkpoint layout does not match its spec".into()));
        }
        crate::error::ensure_finite("checkpoint parameters", &self.params)?;
        Ok(Hypernetwork {
            spec: self.hypernet.clone(),
            target: self.target.clone(),
            params: FlatParams::new(self.params.clone(), self.layout.clone())?,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(s)?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint schema_version {}",
                ckpt.schema_version
            )));
        }
        Ok(ckpt)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}
