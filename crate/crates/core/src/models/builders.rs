//! Graph builders for the four architectures.

use rand::Rng as _;

use super::graph::{ModelGraph, NodeId, Op, WeightRef};
use super::{Family, ModelError, ModelSpec};
use crate::real::Real;
use crate::rng::{self, Rng};
use crate::tensor::{ActivationKind, Padding, Shape, Tensor};

/// Width of the WDSR-B linear bottleneck relative to the expanded width.
pub const WDSR_B_LINEAR_RATIO: f64 = 0.8;

const PRELU_INIT: f64 = 0.25;

struct Builder<'r, T> {
    graph: ModelGraph<T>,
    rng: &'r mut Rng,
}

impl<T: Real> Builder<'_, T> {
    fn channels(&self, id: NodeId) -> usize {
        self.graph.nodes()[id].channels
    }

    fn input(&mut self) -> NodeId {
        let c = self.graph.spec().in_channels;
        self.graph.push_node("input".into(), Op::Input, c)
    }

    /// Uniform filters in `±1/sqrt(fan_in)`, zero bias. Weight-normalized
    /// convs start with `g = |v|`.
    fn conv(
        &mut self,
        name: &str,
        input: NodeId,
        kernel: usize,
        filters: usize,
        normalized: bool,
    ) -> NodeId {
        let cin = self.channels(input);
        let shape = Shape::new(filters, cin, kernel, kernel);
        let bound = 1.0 / ((cin * kernel * kernel) as f64).sqrt();
        let w = Tensor::from_fn(shape, |_, _, _, _| {
            T::lit(self.rng.gen_range(-bound..bound))
        });
        let weight = if normalized {
            let gains: Vec<T> = w
                .data()
                .chunks(shape.image_len())
                .map(|f| f.iter().map(|&x| x * x).sum::<T>().sqrt())
                .collect();
            let g = self.graph.push_param(
                format!("{name}.g"),
                Tensor::from_vec(Shape::new(1, filters, 1, 1), gains).expect("gain shape"),
            );
            let v = self.graph.push_param(format!("{name}.v"), w);
            WeightRef::Normalized { g, v }
        } else {
            WeightRef::Plain(self.graph.push_param(format!("{name}.weight"), w))
        };
        let bias = self.graph.push_param(
            format!("{name}.bias"),
            Tensor::zeros(Shape::new(1, filters, 1, 1)),
        );
        let op = Op::Conv {
            input,
            weight,
            bias,
            kernel,
            padding: Padding::same(kernel, kernel),
        };
        self.graph.push_node(name.into(), op, filters)
    }

    fn act(&mut self, name: &str, input: NodeId, kind: ActivationKind) -> NodeId {
        let c = self.channels(input);
        let alpha = (kind == ActivationKind::Prelu).then(|| {
            self.graph.push_param(
                format!("{name}.alpha"),
                Tensor::full(Shape::new(1, c, 1, 1), T::lit(PRELU_INIT)),
            )
        });
        self.graph
            .push_node(name.into(), Op::Activation { input, kind, alpha }, c)
    }

    fn bn(&mut self, name: &str, input: NodeId) -> NodeId {
        let c = self.channels(input);
        let gamma = self.graph.push_param(
            format!("{name}.gamma"),
            Tensor::full(Shape::new(1, c, 1, 1), T::one()),
        );
        let beta = self.graph.push_param(
            format!("{name}.beta"),
            Tensor::zeros(Shape::new(1, c, 1, 1)),
        );
        let state = self.graph.push_norm();
        self.graph.push_node(
            name.into(),
            Op::BatchNorm {
                input,
                gamma,
                beta,
                state,
            },
            c,
        )
    }

    fn d2s(&mut self, name: &str, input: NodeId, factor: usize) -> NodeId {
        let c = self.channels(input) / (factor * factor);
        self.graph
            .push_node(name.into(), Op::DepthToSpace { input, factor }, c)
    }

    fn add(&mut self, name: &str, lhs: NodeId, rhs: NodeId) -> NodeId {
        let c = self.channels(lhs);
        debug_assert_eq!(c, self.channels(rhs));
        self.graph.push_node(name.into(), Op::Add { lhs, rhs }, c)
    }
}

fn start<'r, T: Real>(
    spec: &ModelSpec,
    family: Family,
    rng: &'r mut Rng,
) -> Result<Builder<'r, T>, ModelError> {
    if spec.family != family {
        return Err(ModelError::InvalidSpec(format!(
            "expected a {family} spec, got {}",
            spec.family
        )));
    }
    spec.validate()?;
    Ok(Builder {
        graph: ModelGraph::empty(spec.clone()),
        rng,
    })
}

fn shuffle_stages(scale: usize) -> usize {
    scale.trailing_zeros() as usize
}

/// Wide 9x9 head with PReLU, residual blocks with batch norm, and a chain
/// of x2 conv/shuffle/PReLU upsampling stages.
pub fn build_sr_resnet<T: Real>(
    spec: &ModelSpec,
    rng: &mut Rng,
) -> Result<ModelGraph<T>, ModelError> {
    let mut b = start::<T>(spec, Family::SrResnet, rng)?;
    let f = spec.base_filters;
    let x = b.input();
    let head = b.conv("head.conv", x, 9, f, false);
    let head = b.act("head.act", head, ActivationKind::Prelu);
    let mut cur = head;
    for i in 0..spec.blocks {
        let p = format!("body.{i}");
        let c1 = b.conv(&format!("{p}.conv1"), cur, 3, f, false);
        let n1 = b.bn(&format!("{p}.bn1"), c1);
        let a = b.act(&format!("{p}.act"), n1, ActivationKind::Prelu);
        let c2 = b.conv(&format!("{p}.conv2"), a, 3, f, false);
        let n2 = b.bn(&format!("{p}.bn2"), c2);
        cur = b.add(&format!("{p}.add"), n2, cur);
    }
    let post = b.conv("body.post.conv", cur, 3, f, false);
    let post = b.bn("body.post.bn", post);
    cur = b.add("skip", post, head);
    for s in 0..shuffle_stages(spec.scale) {
        let c = b.conv(&format!("up.{s}.conv"), cur, 3, 4 * f, false);
        let d = b.d2s(&format!("up.{s}.shuffle"), c, 2);
        cur = b.act(&format!("up.{s}.act"), d, ActivationKind::Prelu);
    }
    b.conv(
        "tail.conv",
        cur,
        spec.final_kernel,
        spec.out_channels,
        false,
    );
    Ok(b.graph)
}

/// SR-ResNet without batch norm; ReLU only inside the residual blocks.
pub fn build_edsr<T: Real>(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelGraph<T>, ModelError> {
    let mut b = start::<T>(spec, Family::Edsr, rng)?;
    let f = spec.base_filters;
    let x = b.input();
    let head = b.conv("head.conv", x, 3, f, false);
    let mut cur = head;
    for i in 0..spec.blocks {
        let p = format!("body.{i}");
        let c1 = b.conv(&format!("{p}.conv1"), cur, 3, f, false);
        let a = b.act(&format!("{p}.act"), c1, ActivationKind::Relu);
        let c2 = b.conv(&format!("{p}.conv2"), a, 3, f, false);
        cur = b.add(&format!("{p}.add"), c2, cur);
    }
    let post = b.conv("body.post.conv", cur, 3, f, false);
    cur = b.add("skip", post, head);
    for s in 0..shuffle_stages(spec.scale) {
        let c = b.conv(&format!("up.{s}.conv"), cur, 3, 4 * f, false);
        cur = b.d2s(&format!("up.{s}.shuffle"), c, 2);
    }
    b.conv("tail.conv", cur, 3, spec.out_channels, false);
    Ok(b.graph)
}

/// Shared WDSR skeleton: the residual branch and a 5x5 branch on the raw
/// input are each shuffled by the full scale, then summed.
fn build_wdsr<T: Real>(
    spec: &ModelSpec,
    family: Family,
    rng: &mut Rng,
    block: impl Fn(&mut Builder<'_, T>, &str, NodeId) -> NodeId,
) -> Result<ModelGraph<T>, ModelError> {
    let mut b = start::<T>(spec, family, rng)?;
    let n = spec.scale;
    let shuffled = spec.out_channels * n * n;
    let x = b.input();
    let mut cur = b.conv("head.conv", x, 3, spec.base_filters, true);
    for i in 0..spec.blocks {
        let p = format!("body.{i}");
        let out = block(&mut b, &p, cur);
        cur = b.add(&format!("{p}.add"), out, cur);
    }
    let tail = b.conv("tail.conv", cur, 3, shuffled, true);
    let tail = b.d2s("tail.shuffle", tail, n);
    let skip = b.conv("skip.conv", x, 5, shuffled, true);
    let skip = b.d2s("skip.shuffle", skip, n);
    b.add("output", tail, skip);
    Ok(b.graph)
}

/// WDSR-A: 3x3 blocks with a 4x wide activation.
pub fn build_wdsr_a<T: Real>(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelGraph<T>, ModelError> {
    let f = spec.base_filters;
    build_wdsr(spec, Family::WdsrA, rng, |b, p, cur| {
        let c1 = b.conv(&format!("{p}.conv1"), cur, 3, 4 * f, true);
        let a = b.act(&format!("{p}.act"), c1, ActivationKind::Relu);
        b.conv(&format!("{p}.conv2"), a, 3, f, true)
    })
}

/// WDSR-B: 1x1 expansion to 6x width, 1x1 linear bottleneck at 80% of that,
/// then a 3x3 conv back to the base width.
pub fn build_wdsr_b<T: Real>(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelGraph<T>, ModelError> {
    let f = spec.base_filters;
    let wide = 6 * f;
    let linear = (wide as f64 * WDSR_B_LINEAR_RATIO).round() as usize;
    build_wdsr(spec, Family::WdsrB, rng, |b, p, cur| {
        let c1 = b.conv(&format!("{p}.conv1"), cur, 1, wide, true);
        let a = b.act(&format!("{p}.act"), c1, ActivationKind::Relu);
        let c2 = b.conv(&format!("{p}.conv2"), a, 1, linear, true);
        b.conv(&format!("{p}.conv3"), c2, 3, f, true)
    })
}

/// Builds any family, drawing initial weights from the `init` substream of `seed`.
pub fn build<T: Real>(spec: &ModelSpec, seed: u64) -> Result<ModelGraph<T>, ModelError> {
    let mut rng = rng::substream(seed, rng::stream::INIT);
    match spec.family {
        Family::SrResnet => build_sr_resnet(spec, &mut rng),
        Family::Edsr => build_edsr(spec, &mut rng),
        Family::WdsrA => build_wdsr_a(spec, &mut rng),
        Family::WdsrB => build_wdsr_b(spec, &mut rng),
    }
}
