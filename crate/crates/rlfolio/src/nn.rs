//! A small fully-connected network with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector so optimizers and checkpoints never
//! care about layer structure. `forward` records the activations needed by
//! `backward`, which propagates an output-side gradient back to every
//! parameter analytically. `grad_check` compares that analytic gradient
//! against central finite differences and is the correctness anchor for all
//! training code in this crate.
//!
//! Hidden layers use ReLU. The output head is chosen per use: `Softmax`
//! yields portfolio weights on the simplex, `Softplus` yields the strictly
//! positive values behind Dirichlet concentrations, and `Identity` is used
//! by scalar value heads.

use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("tape does not match the layer spec it is replayed against")]
    TapeMismatch,
    #[error("output gradient has {got} entries but the network emits {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Output transform applied after the last affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    /// Probability simplex; used for direct weight outputs.
    Softmax,
    /// Strictly positive outputs; used for Dirichlet concentrations.
    Softplus,
    /// Raw affine outputs; used for value heads.
    Identity,
}

/// Network shape: layer widths from input to output, plus the output head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    /// Widths `[input, hidden..., output]`; at least two entries.
    pub sizes: Vec<usize>,
    pub head: OutputHead,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>, head: OutputHead) -> Self {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|s| *s > 0),
            "a layer spec needs at least input and output widths, all positive"
        );
        LayerSpec { sizes, head }
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Total parameter count: per layer, `in * out` weights plus `out` biases.
    pub fn param_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }
}

/// Flat parameter storage in a fixed layout: for each layer, the weight
/// matrix row-major (`out` rows of `in` entries), then the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        ParamVector { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Gradient with the same layout as [`ParamVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n: usize) -> Self {
        Gradient { values: vec![0.0; n] }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Accumulates `scale * other` into this gradient.
    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }
}

/// Activation record from one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    input: Vec<f64>,
    /// Pre-activation `z` per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation output per layer (ReLU for hidden, head for last).
    post: Vec<Vec<f64>>,
}

impl Tape {
    /// The network output recorded on this tape.
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("tape always has at least one layer")
    }

    /// Pre-activation values of every hidden layer, in layer order; the
    /// output layer is excluded. The objective is only piecewise-smooth in
    /// the parameters — each hidden unit contributes a ReLU kink where its
    /// pre-activation crosses zero — so gradient checks use these to keep
    /// finite-difference stencils on one side of every kink.
    pub fn hidden_preactivations(&self) -> &[Vec<f64>] {
        &self.pre[..self.pre.len() - 1]
    }
}

/// Draws initial parameters: weights uniform in `±1/sqrt(fan_in)` per layer,
/// biases zero.
pub fn init_params<R: Rng>(spec: &LayerSpec, rng: &mut R) -> ParamVector {
    let mut values = Vec::with_capacity(spec.param_count());
    for w in spec.sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.gen_range(-bound..bound));
        }
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    ParamVector { values }
}

/// Runs the network and records the activation tape.
pub fn forward(
    spec: &LayerSpec,
    params: &ParamVector,
    input: &[f64],
) -> Result<(Vec<f64>, Tape), NnError> {
    if input.len() != spec.input_size() {
        return Err(NnError::DimensionMismatch {
            what: "input",
            expected: spec.input_size(),
            got: input.len(),
        });
    }
    if params.len() != spec.param_count() {
        return Err(NnError::DimensionMismatch {
            what: "params",
            expected: spec.param_count(),
            got: params.len(),
        });
    }

    let n_layers = spec.sizes.len() - 1;
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(n_layers);
    let mut x = input.to_vec();
    let mut offset = 0;
    for (l, w) in spec.sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &params.values[offset..offset + fan_in * fan_out];
        let biases = &params.values[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        offset += (fan_in + 1) * fan_out;

        let mut z = vec![0.0; fan_out];
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            *zo = biases[o] + row.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>();
        }
        let a = if l == n_layers - 1 {
            apply_head(spec.head, &z)
        } else {
            z.iter().map(|v| v.max(0.0)).collect()
        };
        pre.push(z);
        x = a.clone();
        post.push(a);
    }
    let out = post.last().unwrap().clone();
    Ok((
        out,
        Tape {
            input: input.to_vec(),
            pre,
            post,
        },
    ))
}

fn apply_head(head: OutputHead, z: &[f64]) -> Vec<f64> {
    match head {
        OutputHead::Softmax => {
            // Shift by the max so exponentials never overflow.
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.iter().map(|e| e / sum).collect()
        }
        OutputHead::Softplus => z.iter().map(|v| softplus(*v)).collect(),
        OutputHead::Identity => z.to_vec(),
    }
}

/// `ln(1 + e^x)` without overflow for large `|x|`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Propagates `output_grad` (the gradient of some scalar with respect to the
/// network output) back through the tape, returning the exact gradient with
/// respect to every parameter.
pub fn backward(
    spec: &LayerSpec,
    params: &ParamVector,
    tape: &Tape,
    output_grad: &[f64],
) -> Result<Gradient, NnError> {
    let n_layers = spec.sizes.len() - 1;
    if tape.pre.len() != n_layers
        || tape.post.len() != n_layers
        || tape.input.len() != spec.input_size()
        || tape
            .pre
            .iter()
            .zip(spec.sizes.iter().skip(1))
            .any(|(z, s)| z.len() != *s)
    {
        return Err(NnError::TapeMismatch);
    }
    if output_grad.len() != spec.output_size() {
        return Err(NnError::ShapeMismatch {
            expected: spec.output_size(),
            got: output_grad.len(),
        });
    }
    if params.len() != spec.param_count() {
        return Err(NnError::DimensionMismatch {
            what: "params",
            expected: spec.param_count(),
            got: params.len(),
        });
    }

    let mut grad = vec![0.0; params.len()];
    // Gradient with respect to the last layer's pre-activation.
    let mut dz = head_backward(spec.head, &tape.pre[n_layers - 1], tape.output(), output_grad);

    // Layer parameter offsets, computed once so we can walk backwards.
    let mut offsets = Vec::with_capacity(n_layers);
    let mut acc = 0;
    for w in spec.sizes.windows(2) {
        offsets.push(acc);
        acc += (w[0] + 1) * w[1];
    }

    for l in (0..n_layers).rev() {
        let (fan_in, fan_out) = (spec.sizes[l], spec.sizes[l + 1]);
        let offset = offsets[l];
        let layer_in: &[f64] = if l == 0 { &tape.input } else { &tape.post[l - 1] };
        let weights = &params.values[offset..offset + fan_in * fan_out];

        for o in 0..fan_out {
            let g = dz[o];
            let wrow = offset + o * fan_in;
            for i in 0..fan_in {
                grad[wrow + i] += g * layer_in[i];
            }
            grad[offset + fan_in * fan_out + o] += g;
        }
        if l > 0 {
            let mut dx = vec![0.0; fan_in];
            for o in 0..fan_out {
                let g = dz[o];
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                for (dxi, w) in dx.iter_mut().zip(row) {
                    *dxi += g * w;
                }
            }
            // Through the previous layer's ReLU.
            dz = dx
                .iter()
                .zip(&tape.pre[l - 1])
                .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                .collect();
        }
    }
    Ok(Gradient { values: grad })
}

fn head_backward(head: OutputHead, z: &[f64], out: &[f64], g: &[f64]) -> Vec<f64> {
    match head {
        OutputHead::Softmax => {
            // dz_i = s_i * (g_i - <g, s>)
            let dot: f64 = g.iter().zip(out).map(|(g, s)| g * s).sum();
            out.iter().zip(g).map(|(s, g)| s * (g - dot)).collect()
        }
        OutputHead::Softplus => z.iter().zip(g).map(|(z, g)| g * sigmoid(*z)).collect(),
        OutputHead::Identity => g.to_vec(),
    }
}

/// Verifies `backward` against central finite differences.
///
/// `scalar_fn` maps the network output to a scalar and the scalar's gradient
/// with respect to that output. Returns the worst relative error
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)` over all
/// parameters, with differences taken at `step`.
pub fn grad_check<F>(
    spec: &LayerSpec,
    params: &ParamVector,
    input: &[f64],
    scalar_fn: F,
    step: f64,
) -> Result<f64, NnError>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (out, tape) = forward(spec, params, input)?;
    let (_, dout) = scalar_fn(&out);
    let analytic = backward(spec, params, &tape, &dout)?;

    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for i in 0..params.len() {
        let orig = probe.values[i];
        probe.values[i] = orig + step;
        let (out_hi, _) = forward(spec, &probe, input)?;
        probe.values[i] = orig - step;
        let (out_lo, _) = forward(spec, &probe, input)?;
        probe.values[i] = orig;
        let numeric = (scalar_fn(&out_hi).0 - scalar_fn(&out_lo).0) / (2.0 * step);
        let a = analytic.values[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// Standard defaults apart from the learning rate.
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }
}

/// One Adam update with bias correction. With `maximize` the step ascends
/// the gradient instead of descending it.
pub fn adam_step(
    params: &mut ParamVector,
    grad: &Gradient,
    state: &mut AdamState,
    maximize: bool,
) -> Result<(), NnError> {
    if grad.values.len() != params.len() || state.m.len() != params.len() {
        return Err(NnError::DimensionMismatch {
            what: "gradient",
            expected: params.len(),
            got: grad.values.len(),
        });
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let sign = if maximize { 1.0 } else { -1.0 };
    for i in 0..params.len() {
        let g = grad.values[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params.values[i] += sign * state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Writes `sizes ...` followed by one parameter per line, in layout order,
/// using the shortest decimal text that round-trips each value exactly.
pub fn save_checkpoint(path: &Path, spec: &LayerSpec, params: &ParamVector) -> Result<(), NnError> {
    if params.len() != spec.param_count() {
        return Err(NnError::DimensionMismatch {
            what: "params",
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    let mut out = String::from("sizes");
    for s in &spec.sizes {
        out.push_str(&format!(" {s}"));
    }
    out.push('\n');
    for v in &params.values {
        out.push_str(&format!("{v}\n"));
    }
    std::fs::write(path, out)
        .map_err(|e| NnError::Checkpoint(format!("cannot write {}: {e}", path.display())))
}

/// Reads a checkpoint back as `(layer sizes, parameters)`.
pub fn load_checkpoint(path: &Path) -> Result<(Vec<usize>, ParamVector), NnError> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| NnError::Checkpoint(format!("missing checkpoint {}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| NnError::Checkpoint("empty checkpoint".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("sizes") {
        return Err(NnError::Checkpoint("first line must be 'sizes ...'".into()));
    }
    let sizes: Vec<usize> = parts
        .map(|p| {
            p.parse()
                .map_err(|_| NnError::Checkpoint(format!("bad layer size '{p}'")))
        })
        .collect::<Result<_, _>>()?;
    if sizes.len() < 2 {
        return Err(NnError::Checkpoint("need at least two layer sizes".into()));
    }
    let values: Vec<f64> = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|_| NnError::Checkpoint(format!("bad parameter '{l}'")))
        })
        .collect::<Result<_, _>>()?;
    let expected: usize = sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum();
    if values.len() != expected {
        return Err(NnError::Checkpoint(format!(
            "expected {expected} parameters for sizes {sizes:?}, found {}",
            values.len()
        )));
    }
    Ok((sizes, ParamVector { values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(
        rng: &mut ChaCha8Rng,
        sizes: Vec<usize>,
        head: OutputHead,
    ) -> (LayerSpec, ParamVector) {
        let spec = LayerSpec::new(sizes, head);
        let params = init_params(&spec, rng);
        (spec, params)
    }

    #[test]
    fn softmax_matches_closed_form() {
        // Pre-activations [ln 2, 0] must map to [2/3, 1/3].
        let spec = LayerSpec::new(vec![2, 2], OutputHead::Softmax);
        // Identity weights, zero bias: out pre-activation = input.
        let params = ParamVector {
            values: vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        };
        let (out, _) = forward(&spec, &params, &[2.0f64.ln(), 0.0]).unwrap();
        assert!((out[0] - 2.0 / 3.0).abs() < 1e-12, "got {}", out[0]);
        assert!((out[1] - 1.0 / 3.0).abs() < 1e-12, "got {}", out[1]);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let spec = LayerSpec::new(vec![2, 2], OutputHead::Softmax);
        let params = ParamVector {
            values: vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        };
        let (out, _) = forward(&spec, &params, &[1000.0, -1000.0]).unwrap();
        assert!(out.iter().all(|p| p.is_finite()));
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softplus_head_is_strictly_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (spec, params) = random_net(&mut rng, vec![3, 8, 4], OutputHead::Softplus);
        for _ in 0..50 {
            let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (out, _) = forward(&spec, &params, &input).unwrap();
            assert!(out.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn init_respects_fan_in_bound_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = LayerSpec::new(vec![16, 4], OutputHead::Identity);
        let p = init_params(&spec, &mut rng);
        let bound = 1.0 / 4.0;
        assert!(p.values[..64].iter().all(|w| w.abs() < bound));
        assert!(p.values[64..].iter().all(|b| *b == 0.0));
        assert_eq!(p.len(), spec.param_count());
    }

    #[test]
    fn three_parameter_net_quadratic_gradient() {
        // sizes [2, 1]: two weights and one bias.
        let spec = LayerSpec::new(vec![2, 1], OutputHead::Identity);
        let params = ParamVector {
            values: vec![0.3, -0.7, 0.25],
        };
        let err = grad_check(
            &spec,
            &params,
            &[0.8, -1.2],
            |out| (out[0] * out[0], vec![2.0 * out[0]]),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn softmax_cross_entropy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (spec, params) = random_net(&mut rng, vec![5, 12, 7, 3], OutputHead::Softmax);
        let input: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Cross-entropy against class 1.
        let err = grad_check(
            &spec,
            &params,
            &input,
            |out| {
                let mut g = vec![0.0; out.len()];
                g[1] = -1.0 / out[1];
                (-out[1].ln(), g)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn gradient_matches_differences_across_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for head in [OutputHead::Softmax, OutputHead::Softplus, OutputHead::Identity] {
            for _ in 0..10 {
                let sizes = vec![4, rng.gen_range(2..7), 3];
                let (spec, params) = random_net(&mut rng, sizes, head);
                let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let coef: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let c = coef.clone();
                let err = grad_check(
                    &spec,
                    &params,
                    &input,
                    move |out| {
                        let v: f64 = out.iter().zip(&c).map(|(o, c)| c * o * o).sum();
                        let g = out.iter().zip(&c).map(|(o, c)| 2.0 * c * o).collect();
                        (v, g)
                    },
                    1e-5,
                )
                .unwrap();
                assert!(err < 1e-4, "head {head:?}: relative error {err}");
            }
        }
    }

    #[test]
    fn adam_first_step_is_a_signed_learning_rate() {
        let mut params = ParamVector {
            values: vec![1.0, -2.0, 0.5],
        };
        let grad = Gradient {
            values: vec![0.3, -0.1, 2.0],
        };
        let mut state = AdamState::new(3, 1e-3);
        adam_step(&mut params, &grad, &mut state, false).unwrap();
        // First bias-corrected step is lr * g / (|g| + eps) ~ lr * sign(g).
        assert!((params.values[0] - (1.0 - 1e-3)).abs() < 1e-6);
        assert!((params.values[1] - (-2.0 + 1e-3)).abs() < 1e-6);

        let mut up = ParamVector { values: vec![0.0] };
        let mut st = AdamState::new(1, 0.01);
        adam_step(&mut up, &Gradient { values: vec![5.0] }, &mut st, true).unwrap();
        assert!(up.values[0] > 0.009, "maximize must ascend: {}", up.values[0]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let spec = LayerSpec::new(vec![3, 2], OutputHead::Identity);
        let params = ParamVector::zeros(spec.param_count());
        assert!(matches!(
            forward(&spec, &params, &[1.0, 2.0]),
            Err(NnError::DimensionMismatch { .. })
        ));
        let (_, tape) = forward(&spec, &params, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            backward(&spec, &params, &tape, &[1.0]),
            Err(NnError::ShapeMismatch { .. })
        ));
        let other = LayerSpec::new(vec![3, 4], OutputHead::Identity);
        let other_params = ParamVector::zeros(other.param_count());
        assert!(matches!(
            backward(&other, &other_params, &tape, &[1.0; 4]),
            Err(NnError::TapeMismatch)
        ));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (spec, params) = random_net(&mut rng, vec![6, 5, 2], OutputHead::Softmax);
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &spec, &params).unwrap();
        let (sizes, back) = load_checkpoint(&path).unwrap();
        assert_eq!(sizes, spec.sizes);
        assert_eq!(back.values.len(), params.values.len());
        for (a, b) in back.values.iter().zip(&params.values) {
            assert_eq!(a.to_bits(), b.to_bits(), "round trip must be exact");
        }
    }

    #[test]
    fn checkpoint_rejects_wrong_param_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truncated.ckpt");
        std::fs::write(&path, "sizes 2 2\n0.5\n0.25\n").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(NnError::Checkpoint(_))));
        assert!(matches!(
            load_checkpoint(&dir.path().join("absent.ckpt")),
            Err(NnError::Checkpoint(_))
        ));
    }
}
