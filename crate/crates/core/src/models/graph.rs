use std::collections::BTreeMap;

use super::{ModelError, ModelSpec};
use crate::real::Real;
use crate::tensor::{
    activation_backward, activation_forward, batch_norm, batch_norm_backward, conv2d,
    conv2d_backward_with, depth_to_space, space_to_depth, weight_norm_backward,
    weight_norm_materialize, ActivationKind, ActivationSpec, BatchNormCache, BatchNormMode,
    BatchNormState, Padding, Parameter, Tensor,
};

pub type NodeId = usize;
pub type ParamId = usize;

/// Forward mode; only batch normalization behaves differently.
pub type Mode = BatchNormMode;

/// Where a convolution's filters come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightRef {
    Plain(ParamId),
    /// Weight-normalized: filters are `g * v / |v|`.
    Normalized {
        g: ParamId,
        v: ParamId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Input,
    Conv {
        input: NodeId,
        weight: WeightRef,
        bias: ParamId,
        kernel: usize,
        padding: Padding,
    },
    Activation {
        input: NodeId,
        kind: ActivationKind,
        alpha: Option<ParamId>,
    },
    BatchNorm {
        input: NodeId,
        gamma: ParamId,
        beta: ParamId,
        state: usize,
    },
    DepthToSpace {
        input: NodeId,
        factor: usize,
    },
    Add {
        lhs: NodeId,
        rhs: NodeId,
    },
}

impl Op {
    pub fn inputs(&self) -> Vec<NodeId> {
        match *self {
            Op::Input => vec![],
            Op::Conv { input, .. }
            | Op::Activation { input, .. }
            | Op::BatchNorm { input, .. }
            | Op::DepthToSpace { input, .. } => vec![input],
            Op::Add { lhs, rhs } => vec![lhs, rhs],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: Op,
    /// Output channel count.
    pub channels: usize,
}

impl Node {
    /// Coarse structural label, e.g. `conv3/64`, `act`, `bn`, `d2s2`, `add`.
    pub fn signature(&self) -> String {
        match &self.op {
            Op::Input => "input".into(),
            Op::Conv { kernel, .. } => format!("conv{kernel}/{}", self.channels),
            Op::Activation { .. } => "act".into(),
            Op::BatchNorm { .. } => "bn".into(),
            Op::DepthToSpace { factor, .. } => format!("d2s{factor}"),
            Op::Add { .. } => "add".into(),
        }
    }

    pub fn is_weight_normalized(&self) -> bool {
        matches!(
            self.op,
            Op::Conv {
                weight: WeightRef::Normalized { .. },
                ..
            }
        )
    }
}

/// Intermediate values of a training-mode forward pass.
pub struct Tape<T> {
    outputs: Vec<Tensor<T>>,
    bn_caches: Vec<Option<BatchNormCache<T>>>,
    weights: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.outputs.last().expect("graph has at least one node")
    }

    pub fn node_output(&self, id: NodeId) -> &Tensor<T> {
        &self.outputs[id]
    }
}

/// A layer graph with its parameters and batch-norm running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph<T> {
    spec: ModelSpec,
    nodes: Vec<Node>,
    params: Vec<Parameter<T>>,
    norms: Vec<BatchNormState<T>>,
    /// Free-form provenance (training configuration, epoch, ...).
    pub metadata: BTreeMap<String, String>,
}

impl<T: Real> ModelGraph<T> {
    pub(crate) fn empty(spec: ModelSpec) -> Self {
        ModelGraph {
            spec,
            nodes: Vec::new(),
            params: Vec::new(),
            norms: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub(crate) fn push_node(&mut self, name: String, op: Op, channels: usize) -> NodeId {
        self.nodes.push(Node { name, op, channels });
        self.nodes.len() - 1
    }

    pub(crate) fn push_param(&mut self, name: String, value: Tensor<T>) -> ParamId {
        self.params.push(Parameter::new(name, value));
        self.params.len() - 1
    }

    pub(crate) fn push_norm(&mut self) -> usize {
        self.norms.push(BatchNormState::default());
        self.norms.len() - 1
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn params(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter<T>] {
        &mut self.params
    }

    pub fn norms(&self) -> &[BatchNormState<T>] {
        &self.norms
    }

    pub fn norms_mut(&mut self) -> &mut [BatchNormState<T>] {
        &mut self.norms
    }

    /// Number of learnable scalars, including biases, batch-norm scale and
    /// shift, PReLU slopes and both weight-norm factors.
    pub fn count_parameters(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.value.zero_grad());
    }

    /// Node signatures in execution order.
    pub fn signatures(&self) -> Vec<String> {
        self.nodes.iter().map(Node::signature).collect()
    }

    /// Converts parameters and statistics to another scalar type.
    pub fn cast<U: Real>(&self) -> ModelGraph<U> {
        ModelGraph {
            spec: self.spec.clone(),
            nodes: self.nodes.clone(),
            params: self
                .params
                .iter()
                .map(|p| Parameter::new(p.name.clone(), p.value.cast()))
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| BatchNormState {
                    momentum: n.momentum,
                    eps: n.eps,
                    running: n.running.as_ref().map(|r| crate::tensor::RunningStats {
                        mean: r.mean.iter().map(|v| U::lit(v.f64())).collect(),
                        var: r.var.iter().map(|v| U::lit(v.f64())).collect(),
                    }),
                })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), ModelError> {
        if x.shape().channels != self.spec.in_channels {
            return Err(ModelError::ChannelMismatch {
                expected: self.spec.in_channels,
                actual: x.shape().channels,
            });
        }
        Ok(())
    }

    fn conv_weight(&self, weight: WeightRef) -> Result<Option<Tensor<T>>, ModelError> {
        Ok(match weight {
            WeightRef::Plain(_) => None,
            WeightRef::Normalized { g, v } => Some(weight_norm_materialize(
                self.params[g].value.data(),
                &self.params[v].value,
            )?),
        })
    }

    fn activation_spec(&self, kind: ActivationKind, alpha: Option<ParamId>) -> ActivationSpec<T> {
        ActivationSpec {
            kind,
            alpha: alpha
                .map(|a| self.params[a].value.data().to_vec())
                .unwrap_or_default(),
        }
    }

    /// Evaluates one node. `norm` is the batch-norm state to use (training
    /// mode updates it).
    fn eval_node<'o>(
        &self,
        id: NodeId,
        input: &Tensor<T>,
        get: impl Fn(NodeId) -> &'o Tensor<T>,
        norm_state: Option<&mut BatchNormState<T>>,
        mode: Mode,
    ) -> Result<(Tensor<T>, Option<BatchNormCache<T>>, Option<Tensor<T>>), ModelError>
    where
        T: 'o,
    {
        let node = &self.nodes[id];
        Ok(match node.op {
            Op::Input => (input.clone(), None, None),
            Op::Conv {
                input: src,
                weight,
                bias,
                padding,
                ..
            } => {
                let materialized = self.conv_weight(weight)?;
                let w = match (&materialized, weight) {
                    (Some(w), _) => w,
                    (None, WeightRef::Plain(p)) => &self.params[p].value,
                    (None, WeightRef::Normalized { .. }) => unreachable!(),
                };
                let out = conv2d(get(src), w, self.params[bias].value.data(), padding)?;
                (out, None, materialized)
            }
            Op::Activation {
                input: src,
                kind,
                alpha,
            } => (
                activation_forward(get(src), &self.activation_spec(kind, alpha))?,
                None,
                None,
            ),
            Op::BatchNorm {
                input: src,
                gamma,
                beta,
                ..
            } => {
                let state = norm_state.expect("batch-norm state supplied");
                let (out, cache) = batch_norm(
                    get(src),
                    self.params[gamma].value.data(),
                    self.params[beta].value.data(),
                    state,
                    mode,
                )?;
                (out, cache, None)
            }
            Op::DepthToSpace { input: src, factor } => {
                (depth_to_space(get(src), factor)?, None, None)
            }
            Op::Add { lhs, rhs } => (get(lhs).add(get(rhs))?, None, None),
        })
    }

    /// Inference-mode forward pass (batch norm uses running statistics).
    /// Intermediate activations are released as soon as they are consumed.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        self.check_input(x)?;
        let n = self.nodes.len();
        let mut last_use = vec![0usize; n];
        for (i, node) in self.nodes.iter().enumerate() {
            for j in node.op.inputs() {
                last_use[j] = i;
            }
        }
        let mut outputs: Vec<Option<Tensor<T>>> = vec![None; n];
        for i in 0..n {
            let mut state = match self.nodes[i].op {
                Op::BatchNorm { state, .. } => Some(self.norms[state].clone()),
                _ => None,
            };
            let (out, _, _) = self.eval_node(
                i,
                x,
                |j| outputs[j].as_ref().expect("node input evaluated"),
                state.as_mut(),
                Mode::Inference,
            )?;
            outputs[i] = Some(out);
            for j in self.nodes[i].op.inputs() {
                if last_use[j] == i {
                    outputs[j] = None;
                }
            }
        }
        Ok(outputs.pop().flatten().expect("graph output"))
    }

    /// Training-mode forward pass; updates batch-norm running statistics and
    /// records everything [`ModelGraph::backward`] needs.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tape<T>, ModelError> {
        self.check_input(x)?;
        let n = self.nodes.len();
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(n);
        let mut bn_caches = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut norms = std::mem::take(&mut self.norms);
        let result = (|| {
            for i in 0..n {
                let state = match self.nodes[i].op {
                    Op::BatchNorm { state, .. } => Some(&mut norms[state]),
                    _ => None,
                };
                let (out, cache, w) = self.eval_node(i, x, |j| &outputs[j], state, Mode::Train)?;
                outputs.push(out);
                bn_caches.push(cache);
                weights.push(w);
            }
            Ok(())
        })();
        self.norms = norms;
        result.map(|()| Tape {
            outputs,
            bn_caches,
            weights,
        })
    }

    /// Back-propagates `output_grad` through the tape, adding parameter
    /// gradients into the parameter store. Returns the input gradient.
    pub fn backward(
        &mut self,
        tape: &Tape<T>,
        output_grad: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        let n = self.nodes.len();
        tape.output()
            .shape()
            .expect("model backward", &output_grad.shape())?;
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; n];
        grads[n - 1] = Some(output_grad.clone());
        let mut input_grad = None;

        fn push<T: Real>(
            grads: &mut [Option<Tensor<T>>],
            id: NodeId,
            g: Tensor<T>,
        ) -> Result<(), ModelError> {
            match grads[id].as_mut() {
                Some(acc) => acc.add_assign(&g)?,
                None => grads[id] = Some(g),
            }
            Ok(())
        }

        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            match self.nodes[i].op.clone() {
                Op::Input => input_grad = Some(g),
                Op::Conv {
                    input,
                    weight,
                    bias,
                    padding,
                    ..
                } => {
                    let w = match weight {
                        WeightRef::Plain(p) => &self.params[p].value,
                        WeightRef::Normalized { .. } => {
                            tape.weights[i].as_ref().expect("materialized weight")
                        }
                    };
                    let cg = conv2d_backward_with(&g, &tape.outputs[input], w, padding)?;
                    self.params[bias].value.accumulate_grad(&cg.bias)?;
                    match weight {
                        WeightRef::Plain(p) => {
                            self.params[p].value.accumulate_grad(cg.weight.data())?
                        }
                        WeightRef::Normalized { g: gp, v } => {
                            let (dg, dv) = weight_norm_backward(
                                self.params[gp].value.data(),
                                &self.params[v].value,
                                &cg.weight,
                            )?;
                            self.params[gp].value.accumulate_grad(&dg)?;
                            self.params[v].value.accumulate_grad(dv.data())?;
                        }
                    }
                    push(&mut grads, input, cg.input)?;
                }
                Op::Activation { input, kind, alpha } => {
                    let spec = self.activation_spec(kind, alpha);
                    let (dx, da) = activation_backward(&g, &tape.outputs[input], &spec)?;
                    if let (Some(a), Some(da)) = (alpha, da) {
                        self.params[a].value.accumulate_grad(&da)?;
                    }
                    push(&mut grads, input, dx)?;
                }
                Op::BatchNorm {
                    input, gamma, beta, ..
                } => {
                    let cache = tape.bn_caches[i].as_ref().expect("batch-norm cache");
                    let (dx, dgamma, dbeta) =
                        batch_norm_backward(&g, cache, self.params[gamma].value.data())?;
                    self.params[gamma].value.accumulate_grad(&dgamma)?;
                    self.params[beta].value.accumulate_grad(&dbeta)?;
                    push(&mut grads, input, dx)?;
                }
                Op::DepthToSpace { input, factor } => {
                    push(&mut grads, input, space_to_depth(&g, factor)?)?
                }
                Op::Add { lhs, rhs } => {
                    push(&mut grads, lhs, g.clone())?;
                    push(&mut grads, rhs, g)?;
                }
            }
        }
        Ok(input_grad.unwrap_or_else(|| Tensor::zeros(tape.outputs[0].shape())))
    }
}
