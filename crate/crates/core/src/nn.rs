//! Dense multilayer perceptrons over flat parameter arrays.
//!
//! Rows are samples. Each layer stores its weight as an `inputs x outputs`
//! row-major block followed by the bias, so the whole network is one flat
//! slice with named sub-ranges. A layer flagged as a skip layer also receives
//! the network input: its weight block holds the rows for the previous
//! activation first and the rows for the network input after them.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::real::{gemm, Layout, Real};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub outputs: usize,
    pub activation: Activation,
    /// Concatenate the network input to this layer's input.
    pub skip: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct LayerShape {
    prev: usize,
    extra: usize,
    outputs: usize,
    activation: Activation,
    weight: usize,
    bias: usize,
}

impl LayerShape {
    fn inputs(&self) -> usize {
        self.prev + self.extra
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mlp {
    input_dim: usize,
    layers: Vec<LayerShape>,
    param_count: usize,
}

/// Activations recorded by a forward pass, needed for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTape<T> {
    rows: usize,
    input: Vec<T>,
    outputs: Vec<Vec<T>>,
}

impl<T: Real> MlpTape<T> {
    pub fn output(&self) -> &[T] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&self.input)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn input(&self) -> &[T] {
        &self.input
    }
}

impl Mlp {
    pub fn new(input_dim: usize, specs: &[LayerSpec]) -> Self {
        let mut layers = Vec::with_capacity(specs.len());
        let mut prev = input_dim;
        let mut offset = 0;
        for (i, s) in specs.iter().enumerate() {
            let extra = if s.skip && i > 0 { input_dim } else { 0 };
            let weight = offset;
            let bias = weight + (prev + extra) * s.outputs;
            offset = bias + s.outputs;
            layers.push(LayerShape {
                prev,
                extra,
                outputs: s.outputs,
                activation: s.activation,
                weight,
                bias,
            });
            prev = s.outputs;
        }
        Mlp {
            input_dim,
            layers,
            param_count: offset,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `(name, range)` for every weight and bias block, in storage order.
    pub fn named_slices(&self) -> Vec<(String, Range<usize>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("layer{i}.weight"), l.weight..l.bias),
                    (format!("layer{i}.bias"), l.bias..l.bias + l.outputs),
                ]
            })
            .collect()
    }

    pub fn weight_range(&self, layer: usize) -> Range<usize> {
        let l = &self.layers[layer];
        l.weight..l.bias
    }

    pub fn bias_range(&self, layer: usize) -> Range<usize> {
        let l = &self.layers[layer];
        l.bias..l.bias + l.outputs
    }

    /// Fan-in scaled uniform weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn init<T: Real, R: Rng>(&self, rng: &mut R, params: &mut [T]) {
        assert_eq!(params.len(), self.param_count);
        for l in &self.layers {
            let bound = 1.0 / (l.inputs() as f64).sqrt();
            for w in &mut params[l.weight..l.bias] {
                *w = T::of(rng.random_range(-bound..bound));
            }
            for b in &mut params[l.bias..l.bias + l.outputs] {
                *b = T::zero();
            }
        }
    }

    fn check<T>(&self, params: &[T], input_len: usize, rows: usize) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::Shape {
                name: "mlp parameters".into(),
                expected: self.param_count,
                actual: params.len(),
            });
        }
        if input_len != rows * self.input_dim {
            return Err(Error::Config(format!(
                "network input width mismatch: expected {} values per row, got {} values for {} rows",
                self.input_dim, input_len, rows
            )));
        }
        Ok(())
    }

    /// Forward pass over `rows` samples, recording activations.
    pub fn forward<T: Real>(&self, params: &[T], input: Vec<T>, rows: usize) -> Result<MlpTape<T>> {
        self.check::<T>(params, input.len(), rows)?;
        let mut outputs: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let prev: &[T] = outputs.last().map(Vec::as_slice).unwrap_or(&input);
            let mut y = vec![T::zero(); rows * l.outputs];
            let bias = &params[l.bias..l.bias + l.outputs];
            for row in y.chunks_exact_mut(l.outputs) {
                row.copy_from_slice(bias);
            }
            let w_prev = &params[l.weight..l.weight + l.prev * l.outputs];
            gemm(rows, l.prev, l.outputs, T::one(), prev, Layout::Normal, w_prev, Layout::Normal, T::one(), &mut y);
            if l.extra > 0 {
                let w_skip = &params[l.weight + l.prev * l.outputs..l.bias];
                gemm(rows, l.extra, l.outputs, T::one(), &input, Layout::Normal, w_skip, Layout::Normal, T::one(), &mut y);
            }
            if l.activation == Activation::Relu {
                for v in &mut y {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
            outputs.push(y);
        }
        Ok(MlpTape {
            rows,
            input,
            outputs,
        })
    }

    /// Backward pass: accumulates parameter gradients into `grad` and, when
    /// requested, returns the gradient with respect to the input rows.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        tape: &MlpTape<T>,
        d_output: Vec<T>,
        grad: &mut [T],
        want_input_grad: bool,
    ) -> Option<Vec<T>> {
        assert_eq!(grad.len(), self.param_count);
        let rows = tape.rows;
        let mut d_input = want_input_grad.then(|| vec![T::zero(); rows * self.input_dim]);
        let mut dy = d_output;
        for (i, l) in self.layers.iter().enumerate().rev() {
            assert_eq!(dy.len(), rows * l.outputs);
            if l.activation == Activation::Relu {
                for (d, y) in dy.iter_mut().zip(&tape.outputs[i]) {
                    if *y <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            let prev: &[T] = if i == 0 { &tape.input } else { &tape.outputs[i - 1] };
            // Bias gradient: column sums in row order.
            {
                let gb = &mut grad[l.bias..l.bias + l.outputs];
                for row in dy.chunks_exact(l.outputs) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += *d;
                    }
                }
            }
            let split = l.weight + l.prev * l.outputs;
            gemm(l.prev, rows, l.outputs, T::one(), prev, Layout::Transposed, &dy, Layout::Normal, T::one(), &mut grad[l.weight..split]);
            if l.extra > 0 {
                gemm(l.extra, rows, l.outputs, T::one(), &tape.input, Layout::Transposed, &dy, Layout::Normal, T::one(), &mut grad[split..l.bias]);
                if let Some(dx) = d_input.as_mut() {
                    gemm(rows, l.outputs, l.extra, T::one(), &dy, Layout::Normal, &params[split..l.bias], Layout::Transposed, T::one(), dx);
                }
            }
            if i == 0 && d_input.is_none() {
                break;
            }
            let mut dprev = vec![T::zero(); rows * l.prev];
            gemm(rows, l.outputs, l.prev, T::one(), &dy, Layout::Normal, &params[l.weight..split], Layout::Transposed, T::zero(), &mut dprev);
            if i == 0 {
                if let Some(dx) = d_input.as_mut() {
                    for (a, b) in dx.iter_mut().zip(&dprev) {
                        *a += *b;
                    }
                }
            } else {
                dy = dprev;
            }
        }
        d_input
    }
}
