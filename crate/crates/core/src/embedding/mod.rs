//! Query embedding: where a point sits relative to the posed mesh, expressed
//! in quantities that do not change under a global rigid motion.
//!
//! A query `x` is projected onto the surface and described by
//!
//! * the direction from `x` to the projected vertex, rotated back into the
//!   canonical frame of that vertex,
//! * the canonical positions of the selected neighbor vertices,
//! * the distances from `x` to those neighbors,
//! * the learnable latent codes attached to the neighbors.
//!
//! The first three groups are positionally encoded; latents are appended
//! as-is. The small network [`psi_network`] turns the row into the feature
//! the radiance field consumes.

mod encode;
mod raw;

use serde::{Deserialize, Serialize};

use crate::nn::{Activation, LayerSpec, Mlp};
use crate::real::Real;
use crate::spatial::NeighborRule;
use crate::{Error, Result};

pub use encode::{encode_backward, encode_into, positional_encode};
pub use raw::{
    distance_embedding, guidance_embedding, raw_backward, raw_embedding, raw_embedding_from, RawEmbedding,
    RawGradient, VertexAdjoint, DIRECTION_EPS,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    Off,
    /// Distances between the inverse-skinned query and canonical neighbors.
    Canonical,
    /// Distances measured in the posed (observation) space.
    #[default]
    Observation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    Off,
    /// Direction left in observation space.
    Observation,
    /// Direction rotated by the inverse blended rotation.
    #[default]
    Inverse,
}

impl DistanceMode {
    pub const ALL: [DistanceMode; 3] = [DistanceMode::Off, DistanceMode::Canonical, DistanceMode::Observation];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMode::Off => "off",
            DistanceMode::Canonical => "canonical",
            DistanceMode::Observation => "observation",
        }
    }
}

impl DirectionMode {
    pub const ALL: [DirectionMode; 3] = [DirectionMode::Off, DirectionMode::Observation, DirectionMode::Inverse];

    pub fn name(self) -> &'static str {
        match self {
            DirectionMode::Off => "off",
            DirectionMode::Observation => "observation",
            DirectionMode::Inverse => "inverse",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub k_neighbors: usize,
    pub pe_frequencies: usize,
    pub latent_dim: usize,
    pub distance_mode: DistanceMode,
    pub direction_mode: DirectionMode,
    pub neighbor_rule: NeighborRule,
    /// Width of every layer of the embedding network.
    pub psi_width: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            k_neighbors: 7,
            pe_frequencies: 10,
            latent_dim: 16,
            distance_mode: DistanceMode::Observation,
            direction_mode: DirectionMode::Inverse,
            neighbor_rule: NeighborRule::Geodesic1Hop,
            psi_width: 128,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be at least 1".into()));
        }
        if self.pe_frequencies > 30 {
            return Err(Error::Config("pe_frequencies above 30 exceeds float resolution".into()));
        }
        if self.psi_width == 0 {
            return Err(Error::Config("psi_width must be positive".into()));
        }
        Ok(())
    }

    /// Neighbor entries per query under the active rule.
    pub fn neighbor_count(&self) -> usize {
        self.neighbor_rule.count(self.k_neighbors)
    }

    pub fn layout(&self) -> EmbeddingLayout {
        let neighbors = self.neighbor_count();
        let direction = if self.direction_mode == DirectionMode::Off { 0 } else { 3 };
        let guidance = direction + 3 * neighbors;
        let prior = if self.distance_mode == DistanceMode::Off { 0 } else { neighbors };
        let per = 1 + 2 * self.pe_frequencies;
        EmbeddingLayout {
            neighbors,
            direction,
            guidance,
            prior,
            encoded: (guidance + prior) * per,
            latents: neighbors * self.latent_dim,
            frequencies: self.pe_frequencies,
            latent_dim: self.latent_dim,
        }
    }

    /// Width of the row fed to the embedding network.
    pub fn input_width(&self) -> usize {
        self.layout().width()
    }
}

/// Offsets of each group inside an input row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingLayout {
    pub neighbors: usize,
    /// 3 when a direction is present, else 0.
    pub direction: usize,
    /// Raw scalars of the guidance group (direction and canonical neighbors).
    pub guidance: usize,
    /// Raw scalars of the distance group.
    pub prior: usize,
    /// Encoded width of both groups.
    pub encoded: usize,
    pub latents: usize,
    pub frequencies: usize,
    pub latent_dim: usize,
}

impl EmbeddingLayout {
    pub fn width(&self) -> usize {
        self.encoded + self.latents
    }

    /// Raw scalars that pass through the positional encoding.
    pub fn raw_scalars(&self) -> usize {
        self.guidance + self.prior
    }
}

/// The three-layer embedding network: two ReLU layers then a linear one.
pub fn psi_network(config: &EmbeddingConfig) -> Mlp {
    let w = config.psi_width;
    Mlp::new(
        config.input_width(),
        &[
            LayerSpec { outputs: w, activation: Activation::Relu, skip: false },
            LayerSpec { outputs: w, activation: Activation::Relu, skip: false },
            LayerSpec { outputs: w, activation: Activation::Identity, skip: false },
        ],
    )
}

/// Writes the network input row for `raw` into `out`.
pub fn encode_row<T: Real>(raw: &RawEmbedding, config: &EmbeddingConfig, out: &mut [T]) -> Result<()> {
    let layout = config.layout();
    if out.len() != layout.width() {
        return Err(Error::Shape {
            name: "embedding row".into(),
            expected: layout.width(),
            actual: out.len(),
        });
    }
    let scalars = raw.encoded_scalars();
    if scalars.len() != layout.raw_scalars() || raw.latents.len() != layout.latents {
        return Err(Error::Config(format!(
            "raw embedding does not match the configuration: {} encoded scalars and {} latents, expected {} and {}",
            scalars.len(),
            raw.latents.len(),
            layout.raw_scalars(),
            layout.latents
        )));
    }
    encode_into(&scalars, layout.frequencies, &mut out[..layout.encoded]);
    for (o, l) in out[layout.encoded..].iter_mut().zip(&raw.latents) {
        *o = T::of(*l);
    }
    Ok(())
}

/// `psi(gamma(q_g), gamma(q_p), q_a)` for a single query, in double precision.
pub fn assemble_embedding(raw: &RawEmbedding, config: &EmbeddingConfig, psi_params: &[f64]) -> Result<Vec<f64>> {
    let net = psi_network(config);
    let mut row = vec![0.0; config.input_width()];
    encode_row(raw, config, &mut row)?;
    let tape = net.forward(psi_params, row, 1)?;
    Ok(tape.output().to_vec())
}

#[cfg(test)]
mod tests;
