//! The radiance field: an 8x256 ReLU network with one skip connection,
//! mapping a query embedding to density and color.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{psi_network, EmbeddingConfig};
use crate::nn::{Activation, LayerSpec, Mlp, MlpTape};
use crate::real::Real;
use crate::{Error, Result};

/// Initial density everywhere, before training.
pub const INITIAL_DENSITY: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub depth: usize,
    pub width: usize,
    /// Index of the hidden layer that also receives the input embedding.
    pub skip_layer: Option<usize>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            depth: 8,
            width: 256,
            skip_layer: Some(5),
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 {
            return Err(Error::Config("field depth and width must be positive".into()));
        }
        if let Some(s) = self.skip_layer {
            if s == 0 || s >= self.depth {
                return Err(Error::Config(format!(
                    "skip_layer {s} must name a hidden layer in 1..{}",
                    self.depth
                )));
            }
        }
        Ok(())
    }
}

/// Network layout for an input embedding of width `input_dim`.
///
/// The last layer is the linear head with one density and three color outputs.
pub fn field_network(config: &FieldConfig, input_dim: usize) -> Mlp {
    let mut specs: Vec<LayerSpec> = (0..config.depth)
        .map(|i| LayerSpec {
            outputs: config.width,
            activation: Activation::Relu,
            skip: config.skip_layer == Some(i),
        })
        .collect();
    specs.push(LayerSpec {
        outputs: 4,
        activation: Activation::Identity,
        skip: false,
    });
    Mlp::new(input_dim, &specs)
}

/// Closed-form parameter count of [`field_network`].
pub fn field_parameter_count(config: &FieldConfig, input_dim: usize) -> usize {
    let w = config.width;
    let mut n = input_dim * w + w;
    for i in 1..config.depth {
        let extra = if config.skip_layer == Some(i) { input_dim } else { 0 };
        n += (w + extra) * w + w;
    }
    n + w * 4 + 4
}

/// Field weights as a flat array, with the layout that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldParams {
    pub config: FieldConfig,
    pub input_dim: usize,
    pub values: Vec<f64>,
}

impl FieldParams {
    pub fn network(&self) -> Mlp {
        field_network(&self.config, self.input_dim)
    }

    pub fn named_slices(&self) -> Vec<(String, std::ops::Range<usize>)> {
        self.network().named_slices()
    }
}

/// Softplus inverse, used to place the initial density.
fn softplus_inverse(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

/// Deterministic initialization: fan-in uniform weights, then a small
/// density head whose bias puts every initial density near
/// [`INITIAL_DENSITY`].
pub fn init_field(seed: u64, config: &FieldConfig, input_dim: usize) -> FieldParams {
    let net = field_network(config, input_dim);
    let mut values = vec![0.0; net.param_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.init(&mut rng, &mut values);
    let head = net.depth() - 1;
    let w = net.weight_range(head);
    for row in values[w].chunks_exact_mut(4) {
        row[0] *= 0.01;
    }
    values[net.bias_range(head).start] = softplus_inverse(INITIAL_DENSITY);
    FieldParams {
        config: config.clone(),
        input_dim,
        values,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub color: [f64; 3],
    pub sigma: f64,
}

#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    let zero = T::zero();
    x.max(zero) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Evaluates the field at one embedding, in double precision.
pub fn query_field(params: &FieldParams, q: &[f64]) -> Result<FieldSample> {
    if q.len() != params.input_dim {
        return Err(Error::Config(format!(
            "field input width mismatch: expected {}, got {}",
            params.input_dim,
            q.len()
        )));
    }
    let tape = params.network().forward(&params.values, q.to_vec(), 1)?;
    let o = tape.output();
    Ok(FieldSample {
        sigma: softplus(o[0]),
        color: [sigmoid(o[1]), sigmoid(o[2]), sigmoid(o[3])],
    })
}

/// Embedding network followed by the field, evaluated on batches of rows.
#[derive(Clone, Debug)]
pub struct RadianceField {
    pub embedding: EmbeddingConfig,
    pub field: FieldConfig,
    psi: Mlp,
    phi: Mlp,
}

/// Forward state of one batch.
#[derive(Clone, Debug)]
pub struct FieldBatch<T> {
    psi: MlpTape<T>,
    phi: MlpTape<T>,
    pub sigma: Vec<T>,
    pub color: Vec<[T; 3]>,
}

impl<T: Real> FieldBatch<T> {
    /// The embedding rows the batch was evaluated on.
    pub fn input(&self) -> &[T] {
        self.psi.input()
    }
}

impl RadianceField {
    pub fn new(embedding: EmbeddingConfig, field: FieldConfig) -> Result<Self> {
        embedding.validate()?;
        field.validate()?;
        let psi = psi_network(&embedding);
        let phi = field_network(&field, embedding.psi_width);
        Ok(RadianceField {
            embedding,
            field,
            psi,
            phi,
        })
    }

    pub fn psi(&self) -> &Mlp {
        &self.psi
    }

    pub fn phi(&self) -> &Mlp {
        &self.phi
    }

    pub fn input_width(&self) -> usize {
        self.psi.input_dim()
    }

    /// Runs `rows` embedding rows through both networks.
    pub fn forward<T: Real>(&self, psi: &[T], phi: &[T], input: Vec<T>, rows: usize) -> Result<FieldBatch<T>> {
        let psi_tape = self.psi.forward(psi, input, rows)?;
        let phi_tape = self.phi.forward(phi, psi_tape.output().to_vec(), rows)?;
        let out = phi_tape.output();
        let mut sigma = Vec::with_capacity(rows);
        let mut color = Vec::with_capacity(rows);
        for o in out.chunks_exact(4) {
            sigma.push(softplus(o[0]));
            color.push([sigmoid(o[1]), sigmoid(o[2]), sigmoid(o[3])]);
        }
        Ok(FieldBatch {
            psi: psi_tape,
            phi: phi_tape,
            sigma,
            color,
        })
    }

    /// Back-propagates density and color gradients. Parameter gradients are
    /// added into `g_psi` and `g_phi`; the input-row gradient is returned.
    pub fn backward<T: Real>(
        &self,
        psi: &[T],
        phi: &[T],
        batch: &FieldBatch<T>,
        d_sigma: &[T],
        d_color: &[[T; 3]],
        g_psi: &mut [T],
        g_phi: &mut [T],
    ) -> Vec<T> {
        let out = batch.phi.output();
        let mut d_out = vec![T::zero(); out.len()];
        for (i, (o, d)) in out.chunks_exact(4).zip(d_out.chunks_exact_mut(4)).enumerate() {
            d[0] = d_sigma[i] * sigmoid(o[0]);
            for c in 0..3 {
                let s = batch.color[i][c];
                d[c + 1] = d_color[i][c] * s * (T::one() - s);
            }
        }
        let d_embed = self.phi.backward(phi, &batch.phi, d_out, g_phi, true).expect("input gradient requested");
        self.psi.backward(psi, &batch.psi, d_embed, g_psi, true).expect("input gradient requested")
    }
}
