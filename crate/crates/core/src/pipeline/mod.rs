//! The two-phase rendering pipeline shared by inference and training.
//!
//! Phase one decides where to sample: ray bounds from the posed mesh,
//! stratified coarse depths, a forward pass of the field at those depths, and
//! importance-sampled fine depths. Every sample is stored with the neighbor
//! vertices it was embedded against. Phase two evaluates the field on that
//! frozen plan and composites; for training it also back-propagates to the
//! network weights, the latent codes and, through the skinned vertices, to
//! the pose. Sample depths and neighbor choices are treated as constants,
//! exactly as a finite-difference check on the same plan sees them.

pub mod audit;

use std::ops::Range;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Scalar, Tape, Var};
use crate::embedding::{encode_backward, encode_row, raw_backward, raw_embedding_from, VertexAdjoint};
use crate::field::RadianceField;
use crate::par::{self, Parallelism};
use crate::real::Real;
use crate::render::{composite_backward, composite_ray, importance_depths, sample_stratified, RaySamples};
use crate::rig::linalg::{self, Affine};
use crate::rig::{forward_kinematics_with, Pose, Skeleton};
use crate::spatial::{select_neighbors_with, PosedMesh, DEFAULT_BOUNDS_PADDING};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// Depth padding around the mesh hit interval.
    pub padding: f64,
    /// Jitter coarse depths inside their strata.
    pub jitter: bool,
    /// Samples per network batch.
    pub chunk_rows: usize,
    pub parallelism: Parallelism,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            n_coarse: 64,
            n_fine: 64,
            padding: DEFAULT_BOUNDS_PADDING,
            jitter: true,
            chunk_rows: 4096,
            parallelism: Parallelism::Parallel,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_coarse < 2 {
            return Err(Error::Config("n_coarse must be at least 2".into()));
        }
        if self.chunk_rows == 0 {
            return Err(Error::Config("chunk_rows must be positive".into()));
        }
        if !(self.padding >= 0.0) {
            return Err(Error::Config("padding must be non-negative".into()));
        }
        Ok(())
    }
}

/// Folds integers into one well-mixed seed (splitmix64 finalizer per step).
pub fn stream_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Network weights in the working precision plus the latent table.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub field: RadianceField,
    pub psi: Vec<T>,
    pub phi: Vec<T>,
    /// `vertex_count x latent_dim`, row-major.
    pub latents: Vec<f64>,
}

impl<T: Real> Model<T> {
    pub fn new(field: RadianceField, psi: &[f64], phi: &[f64], latents: Vec<f64>) -> Result<Self> {
        for (name, got, want) in [
            ("psi", psi.len(), field.psi().param_count()),
            ("field", phi.len(), field.phi().param_count()),
        ] {
            if got != want {
                return Err(Error::Shape { name: name.into(), expected: want, actual: got });
            }
        }
        Ok(Model {
            psi: psi.iter().map(|&v| T::of(v)).collect(),
            phi: phi.iter().map(|&v| T::of(v)).collect(),
            field,
            latents,
        })
    }

    /// Reads the `psi`, `field` and `latents` arrays of a store.
    pub fn from_store(field: &RadianceField, store: &ParamStore) -> Result<Self> {
        Self::new(
            field.clone(),
            store.require("psi")?,
            store.require("field")?,
            store.require("latents")?.to_vec(),
        )
    }

    fn check_latents(&self, posed: &PosedMesh) -> Result<()> {
        let want = posed.positions().len() * self.field.embedding.latent_dim;
        if self.latents.len() != want {
            return Err(Error::Shape { name: "latents".into(), expected: want, actual: self.latents.len() });
        }
        Ok(())
    }
}

/// Standard deviation of the initial latent codes.
pub const LATENT_INIT_STD: f64 = 0.01;

/// Fresh `psi`, `field` and `latents` arrays for `vertex_count` vertices.
pub fn init_model_store(seed: u64, field: &RadianceField, vertex_count: usize) -> Result<ParamStore> {
    use rand_distr::{Distribution, Normal};
    let mut store = ParamStore::new();
    let phi = crate::field::init_field(stream_seed(&[seed, 1]), &field.field, field.embedding.psi_width);
    let mut psi = vec![0.0; field.psi().param_count()];
    field.psi().init(&mut ChaCha8Rng::seed_from_u64(stream_seed(&[seed, 2])), &mut psi);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(&[seed, 3]));
    let normal = Normal::new(0.0, LATENT_INIT_STD).expect("valid normal");
    let latents = (0..vertex_count * field.embedding.latent_dim).map(|_| normal.sample(&mut rng)).collect();
    store.insert("field", phi.values)?;
    store.insert("psi", psi)?;
    store.insert("latents", latents)?;
    Ok(store)
}

/// A sample point with its neighbor vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub x: Vector3<f64>,
    pub neighbors: Vec<u32>,
}

/// Projects `x` and selects its neighbors under the configured rule.
pub fn query_at(posed: &PosedMesh, x: Vector3<f64>, cfg: &crate::embedding::EmbeddingConfig) -> Result<Query> {
    let proj = posed.project(&x)?;
    let nb = select_neighbors_with(cfg.neighbor_rule, posed, &proj, &x, cfg.k_neighbors);
    Ok(Query { x, neighbors: nb.iter().map(|n| n.0 as u32).collect() })
}

fn as_usize(n: &[u32]) -> Vec<usize> {
    n.iter().map(|&v| v as usize).collect()
}

/// Density and color at every query, forward only.
pub fn evaluate_queries<T: Real>(
    model: &Model<T>,
    posed: &PosedMesh,
    queries: &[Query],
    settings: &RenderSettings,
) -> Result<Vec<(f64, [f64; 3])>> {
    model.check_latents(posed)?;
    let cfg = &model.field.embedding;
    let width = model.field.input_width();
    let chunks = par::map_chunks(queries, settings.chunk_rows, settings.parallelism, |_, chunk| {
        let mut rows = vec![T::zero(); chunk.len() * width];
        for (q, row) in chunk.iter().zip(rows.chunks_exact_mut(width)) {
            let raw = raw_embedding_from(posed, &q.x, &as_usize(&q.neighbors), cfg, &model.latents);
            encode_row(&raw, cfg, row)?;
        }
        let b = model.field.forward(&model.psi, &model.phi, rows, chunk.len())?;
        Ok::<_, Error>(
            b.sigma
                .iter()
                .zip(&b.color)
                .map(|(s, c)| (s.f64(), c.map(|v| v.f64())))
                .collect::<Vec<_>>(),
        )
    });
    let mut out = Vec::with_capacity(queries.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Sample plan for one ray that hits the mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct RayPlan {
    pub origin: Vector3<f64>,
    pub dir: Vector3<f64>,
    pub samples: RaySamples,
    /// Neighbor lists of all samples, concatenated.
    pub neighbors: Vec<u32>,
}

impl RayPlan {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn point(&self, i: usize) -> Vector3<f64> {
        self.origin + self.dir * self.samples.t[i]
    }

    pub fn neighbors_of(&self, i: usize) -> &[u32] {
        let k = self.neighbors.len() / self.samples.len();
        &self.neighbors[i * k..(i + 1) * k]
    }
}

/// A camera ray with the seed of its private random stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub dir: Vector3<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayOutput {
    pub color: [f64; 3],
    pub alpha: f64,
    pub coarse_color: [f64; 3],
    pub coarse_alpha: f64,
    /// `None` when the ray misses the mesh.
    pub plan: Option<RayPlan>,
}

impl RayOutput {
    fn miss() -> Self {
        RayOutput { color: [0.0; 3], alpha: 0.0, coarse_color: [0.0; 3], coarse_alpha: 0.0, plan: None }
    }
}

struct Stage {
    origin: Vector3<f64>,
    dir: Vector3<f64>,
    coarse: RaySamples,
    coarse_q: Vec<Query>,
    coarse_vals: Vec<(f64, [f64; 3])>,
    coarse_color: [f64; 3],
    coarse_alpha: f64,
    fine_t: Vec<f64>,
    fine_q: Vec<Query>,
}

fn composite_values(vals: &[(f64, [f64; 3])], delta: &[f64]) -> crate::render::Composite<f64> {
    let sigma: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let color: Vec<[f64; 3]> = vals.iter().map(|v| v.1).collect();
    composite_ray(&sigma, &color, delta)
}

/// Coarse pass and fine-depth selection for every ray.
fn plan_stage<T: Real>(
    model: &Model<T>,
    posed: &PosedMesh,
    rays: &[Ray],
    settings: &RenderSettings,
) -> Result<Vec<Option<Stage>>> {
    settings.validate()?;
    let cfg = &model.field.embedding;
    let starts = par::map(rays, settings.parallelism, |_, ray| -> Result<Option<(Stage, ChaCha8Rng)>> {
        let Some(bounds) = posed.ray_bounds_padded(&ray.origin, &ray.dir, settings.padding) else {
            return Ok(None);
        };
        if !(bounds.0 < bounds.1) {
            return Ok(None);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(ray.seed);
        let coarse = sample_stratified(bounds, settings.n_coarse, settings.jitter, &mut rng)?;
        let coarse_q = coarse
            .positions(&ray.origin, &ray.dir)
            .into_iter()
            .map(|x| query_at(posed, x, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some((
            Stage {
                origin: ray.origin,
                dir: ray.dir,
                coarse,
                coarse_q,
                coarse_vals: Vec::new(),
                coarse_color: [0.0; 3],
                coarse_alpha: 0.0,
                fine_t: Vec::new(),
                fine_q: Vec::new(),
            },
            rng,
        )))
    });
    let mut stages = Vec::with_capacity(rays.len());
    for s in starts {
        stages.push(s?);
    }
    let all: Vec<Query> = stages.iter().flatten().flat_map(|(s, _)| s.coarse_q.iter().cloned()).collect();
    let vals = evaluate_queries(model, posed, &all, settings)?;
    let mut offset = 0;
    for (s, _) in stages.iter_mut().flatten() {
        let n = s.coarse_q.len();
        s.coarse_vals = vals[offset..offset + n].to_vec();
        offset += n;
    }
    let finished = par::map(&stages, settings.parallelism, |_, st| -> Result<Option<Stage>> {
        let Some((s, rng)) = st else { return Ok(None) };
        let mut rng = rng.clone();
        let comp = composite_values(&s.coarse_vals, &s.coarse.delta);
        let fine_t = importance_depths(&s.coarse, &comp.weights, settings.n_fine, &mut rng);
        let fine_q = fine_t
            .iter()
            .map(|&t| query_at(posed, s.origin + s.dir * t, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(Stage {
            origin: s.origin,
            dir: s.dir,
            coarse: s.coarse.clone(),
            coarse_q: s.coarse_q.clone(),
            coarse_vals: s.coarse_vals.clone(),
            coarse_color: comp.color,
            coarse_alpha: comp.alpha,
            fine_t,
            fine_q,
        }))
    });
    finished.into_iter().collect()
}

/// Merges coarse and fine samples in depth order, dropping exact repeats.
fn merge_stage(s: &Stage, fine_vals: Option<&[(f64, [f64; 3])]>) -> (RayPlan, Vec<(f64, [f64; 3])>) {
    let mut entries: Vec<(f64, &Query, Option<(f64, [f64; 3])>)> = s
        .coarse
        .t
        .iter()
        .zip(&s.coarse_q)
        .zip(&s.coarse_vals)
        .map(|((&t, q), v)| (t, q, Some(*v)))
        .collect();
    for (i, (&t, q)) in s.fine_t.iter().zip(&s.fine_q).enumerate() {
        entries.push((t, q, fine_vals.map(|f| f[i])));
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    entries.dedup_by(|a, b| a.0 == b.0);
    let t: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let neighbors: Vec<u32> = entries.iter().flat_map(|e| e.1.neighbors.iter().copied()).collect();
    let vals = entries.iter().filter_map(|e| e.2).collect();
    let samples = RaySamples::from_depths(t, s.coarse.near, s.coarse.far, s.coarse.last_delta);
    (RayPlan { origin: s.origin, dir: s.dir, samples, neighbors }, vals)
}

/// Chooses the samples of every ray without evaluating the fine depths.
pub fn plan_rays<T: Real>(
    model: &Model<T>,
    posed: &PosedMesh,
    rays: &[Ray],
    settings: &RenderSettings,
) -> Result<Vec<Option<RayPlan>>> {
    Ok(plan_stage(model, posed, rays, settings)?
        .into_iter()
        .map(|s| s.map(|s| merge_stage(&s, None).0))
        .collect())
}

/// Full coarse-to-fine rendering of every ray.
pub fn render_rays<T: Real>(
    model: &Model<T>,
    posed: &PosedMesh,
    rays: &[Ray],
    settings: &RenderSettings,
) -> Result<Vec<RayOutput>> {
    let stages = plan_stage(model, posed, rays, settings)?;
    let fine: Vec<Query> = stages.iter().flatten().flat_map(|s| s.fine_q.iter().cloned()).collect();
    let vals = evaluate_queries(model, posed, &fine, settings)?;
    let mut offset = 0;
    let mut out = Vec::with_capacity(rays.len());
    for s in stages {
        let Some(s) = s else {
            out.push(RayOutput::miss());
            continue;
        };
        let n = s.fine_t.len();
        let (plan, merged) = merge_stage(&s, Some(&vals[offset..offset + n]));
        offset += n;
        let comp = composite_values(&merged, &plan.samples.delta);
        out.push(RayOutput {
            color: comp.color,
            alpha: comp.alpha,
            coarse_color: s.coarse_color,
            coarse_alpha: s.coarse_alpha,
            plan: Some(plan),
        });
    }
    Ok(out)
}

/// A planned ray with its ground-truth color.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRay {
    pub plan: RayPlan,
    pub target: [f64; 3],
}

/// Loss and gradients of one batch on a frozen plan.
#[derive(Clone, Debug)]
pub struct BatchOutput {
    /// Sum of squared color errors.
    pub loss: f64,
    pub colors: Vec<[f64; 3]>,
    pub grad_psi: Vec<f64>,
    pub grad_phi: Vec<f64>,
    pub grad_latents: Vec<f64>,
    /// Gradient with respect to per-vertex posed quantities.
    pub adjoints: Vec<VertexAdjoint>,
    /// Rays whose color or loss came out non-finite.
    pub nonfinite_rays: Vec<usize>,
}

fn chunk_rays(rays: &[TrainRay], rows: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut count = 0;
    for (i, r) in rays.iter().enumerate() {
        if count > 0 && count + r.plan.len() > rows {
            out.push(start..i);
            start = i;
            count = 0;
        }
        count += r.plan.len();
    }
    if start < rays.len() {
        out.push(start..rays.len());
    }
    out
}

/// Photometric loss `sum ||C - I||^2` over the batch with gradients for
/// every trainable quantity except the pose (see [`pose_gradient`]).
pub fn photometric_batch<T: Real>(
    model: &Model<T>,
    posed: &PosedMesh,
    rays: &[TrainRay],
    settings: &RenderSettings,
) -> Result<BatchOutput> {
    model.check_latents(posed)?;
    let cfg = &model.field.embedding;
    let layout = cfg.layout();
    let width = layout.width();
    let dl = cfg.latent_dim;
    let n_vertices = posed.positions().len();
    let groups = chunk_rays(rays, settings.chunk_rows);
    let parts = par::map(&groups, settings.parallelism, |_, range| -> Result<BatchOutput> {
        let chunk = &rays[range.clone()];
        let total: usize = chunk.iter().map(|r| r.plan.len()).sum();
        let mut rows = vec![T::zero(); total * width];
        let mut nbr_cache: Vec<Vec<usize>> = Vec::with_capacity(total);
        let mut xs = Vec::with_capacity(total);
        let mut r = 0;
        for ray in chunk {
            for i in 0..ray.plan.len() {
                let x = ray.plan.point(i);
                let nb = as_usize(ray.plan.neighbors_of(i));
                let raw = raw_embedding_from(posed, &x, &nb, cfg, &model.latents);
                encode_row(&raw, cfg, &mut rows[r * width..(r + 1) * width])?;
                nbr_cache.push(nb);
                xs.push(x);
                r += 1;
            }
        }
        let batch = model.field.forward(&model.psi, &model.phi, rows, total)?;
        let mut d_sigma = Vec::with_capacity(total);
        let mut d_color = Vec::with_capacity(total);
        let mut loss = 0.0;
        let mut colors = Vec::with_capacity(chunk.len());
        let mut nonfinite = Vec::new();
        let mut off = 0;
        for (j, ray) in chunk.iter().enumerate() {
            let n = ray.plan.len();
            let delta: Vec<T> = ray.plan.samples.delta.iter().map(|&d| T::of(d)).collect();
            let sig = &batch.sigma[off..off + n];
            let col = &batch.color[off..off + n];
            let comp = composite_ray(sig, col, &delta);
            let c = comp.color.map(|v| v.f64());
            let diff = [0, 1, 2].map(|k| c[k] - ray.target[k]);
            let l = diff.iter().map(|d| d * d).sum::<f64>();
            if !l.is_finite() {
                nonfinite.push(range.start + j);
            }
            loss += l;
            colors.push(c);
            let (ds, dc) = composite_backward(&comp, col, &delta, diff.map(|d| T::of(2.0 * d)), T::zero());
            d_sigma.extend(ds);
            d_color.extend(dc);
            off += n;
        }
        let mut g_psi = vec![T::zero(); model.psi.len()];
        let mut g_phi = vec![T::zero(); model.phi.len()];
        let d_rows = model.field.backward(&model.psi, &model.phi, &batch, &d_sigma, &d_color, &mut g_psi, &mut g_phi);
        let mut adjoints = vec![VertexAdjoint::default(); n_vertices];
        let mut g_lat = vec![0.0; n_vertices * dl];
        let mut g_raw = vec![0.0; layout.raw_scalars()];
        let input = batch.input();
        for s in 0..total {
            let row = &input[s * width..(s + 1) * width];
            let drow = &d_rows[s * width..(s + 1) * width];
            encode_backward(&row[..layout.encoded], &drow[..layout.encoded], layout.frequencies, &mut g_raw);
            raw_backward(posed, &xs[s], &nbr_cache[s], cfg, &g_raw, &mut adjoints);
            for (k, &v) in nbr_cache[s].iter().enumerate() {
                let src = &drow[layout.encoded + k * dl..layout.encoded + (k + 1) * dl];
                for (g, d) in g_lat[v * dl..(v + 1) * dl].iter_mut().zip(src) {
                    *g += d.f64();
                }
            }
        }
        Ok(BatchOutput {
            loss,
            colors,
            grad_psi: g_psi.iter().map(|v| v.f64()).collect(),
            grad_phi: g_phi.iter().map(|v| v.f64()).collect(),
            grad_latents: g_lat,
            adjoints,
            nonfinite_rays: nonfinite,
        })
    });
    let mut total = BatchOutput {
        loss: 0.0,
        colors: Vec::with_capacity(rays.len()),
        grad_psi: vec![0.0; model.psi.len()],
        grad_phi: vec![0.0; model.phi.len()],
        grad_latents: vec![0.0; n_vertices * dl],
        adjoints: vec![VertexAdjoint::default(); n_vertices],
        nonfinite_rays: Vec::new(),
    };
    for p in parts {
        let p = p?;
        total.loss += p.loss;
        total.colors.extend(p.colors);
        total.nonfinite_rays.extend(p.nonfinite_rays);
        for (a, b) in [(&mut total.grad_psi, &p.grad_psi), (&mut total.grad_phi, &p.grad_phi), (&mut total.grad_latents, &p.grad_latents)] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (a, b) in total.adjoints.iter_mut().zip(&p.adjoints) {
            add_adjoint(a, b);
        }
    }
    Ok(total)
}

fn add_adjoint(a: &mut VertexAdjoint, b: &VertexAdjoint) {
    for i in 0..3 {
        a.position[i] += b.position[i];
        a.canonical[i] += b.canonical[i];
        a.inverse_t[i] += b.inverse_t[i];
        for j in 0..3 {
            a.rotation[i][j] += b.rotation[i][j];
            a.inverse_r[i][j] += b.inverse_r[i][j];
        }
    }
}

/// Chains per-vertex adjoints back to the flat pose vector (rotations then
/// root translation) by replaying skinning on the tape.
///
/// Only vertices with a non-zero adjoint are replayed. A vertex whose blend
/// fell back to a single part in `posed` uses that part here as well.
pub fn pose_gradient(skeleton: &Skeleton, posed: &PosedMesh, pose: &Pose, adjoints: &[VertexAdjoint]) -> Vec<f64> {
    let flat = pose.to_flat();
    let j = skeleton.len();
    let tape = Tape::with_capacity(4096);
    let leaves: Vec<Var> = flat.iter().map(|&v| tape.var(v)).collect();
    let rotations: Vec<[Var; 3]> = leaves[..3 * j].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let translation = [leaves[3 * j], leaves[3 * j + 1], leaves[3 * j + 2]];
    let parts: Vec<Affine<Var>> = forward_kinematics_with(skeleton, &rotations, &translation);
    let mesh = posed.mesh();
    let zero = leaves[0].constant(0.0);
    let mut total = zero;
    for (v, adj) in adjoints.iter().enumerate() {
        if adj.is_zero() {
            continue;
        }
        let infl = mesh.influences(v);
        let blended = linalg::blend(infl, &parts);
        let rest = mesh.vertices()[v];
        let p = blended.apply(&[0, 1, 2].map(|i| zero.lift(rest[i])));
        total = total + dot(&p, &adj.position);
        let needs_inverse = adj.canonical.iter().chain(&adj.inverse_t).any(|x| *x != 0.0)
            || adj.rotation.iter().chain(&adj.inverse_r).flatten().any(|x| *x != 0.0);
        if !needs_inverse {
            continue;
        }
        let inv = match posed.inverse(v).fallback {
            Some(k) => parts[k].inverse(),
            None => blended.inverse(),
        };
        let c = inv.apply(&p);
        total = total + dot(&c, &adj.canonical) + frob(&inv.r, &adj.inverse_r) + dot(&inv.t, &adj.inverse_t);
        if adj.rotation.iter().flatten().any(|x| *x != 0.0) {
            let r = linalg::orthonormalize_rows(&inv.r);
            total = total + frob(&r, &adj.rotation);
        }
    }
    let grad = total.grad();
    leaves.iter().map(|&l| grad.wrt(l)).collect()
}

fn dot<'t>(a: &[Var<'t>; 3], b: &[f64; 3]) -> Var<'t> {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn frob<'t>(a: &[[Var<'t>; 3]; 3], b: &[[f64; 3]; 3]) -> Var<'t> {
    dot(&a[0], &b[0]) + dot(&a[1], &b[1]) + dot(&a[2], &b[2])
}

#[cfg(test)]
mod tests;
