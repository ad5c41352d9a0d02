use super::audit::{audit_fd_config, gradient_audit, AuditScene};
use super::*;
use crate::embedding::{DirectionMode, DistanceMode, EmbeddingConfig};

fn audit(emb: EmbeddingConfig) {
    let reports = gradient_audit(emb.clone(), &audit_fd_config()).unwrap();
    for r in &reports {
        assert!(r.report.passed, "{emb:?} {}: {:?}", r.group, r.report);
        let min_active = if r.group == "pose" { 1 } else { 10 };
        assert!(r.active >= min_active, "{} gradient vanished", r.group);
    }
}

fn toy(emb: EmbeddingConfig) -> AuditScene {
    AuditScene::new(emb).unwrap()
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    audit(EmbeddingConfig { k_neighbors: 4, pe_frequencies: 3, latent_dim: 2, psi_width: 8, ..Default::default() });
}

#[test]
fn gradients_match_in_canonical_distance_mode() {
    audit(EmbeddingConfig {
        k_neighbors: 3,
        pe_frequencies: 2,
        latent_dim: 1,
        psi_width: 8,
        distance_mode: DistanceMode::Canonical,
        direction_mode: DirectionMode::Observation,
        ..Default::default()
    });
}

#[test]
fn per_ray_gradients_sum_to_the_batch_gradient() {
    let t = toy(EmbeddingConfig { k_neighbors: 3, pe_frequencies: 2, latent_dim: 2, psi_width: 8, ..Default::default() });
    let posed = PosedMesh::from_pose(t.mesh.clone(), &t.skeleton, &t.pose).unwrap();
    let model = Model::<f64>::from_store(&t.field, &t.store).unwrap();
    let all = photometric_batch(&model, &posed, &t.rays, &t.settings).unwrap();
    let mut sum_phi = vec![0.0; all.grad_phi.len()];
    let mut loss = 0.0;
    for r in &t.rays {
        let one = photometric_batch(&model, &posed, std::slice::from_ref(r), &t.settings).unwrap();
        loss += one.loss;
        for (a, b) in sum_phi.iter_mut().zip(&one.grad_phi) {
            *a += b;
        }
    }
    assert!((loss - all.loss).abs() < 1e-12);
    for (a, b) in sum_phi.iter().zip(&all.grad_phi) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn batch_results_do_not_depend_on_chunking_or_scheduling() {
    let t = toy(EmbeddingConfig { k_neighbors: 3, pe_frequencies: 2, latent_dim: 2, psi_width: 8, ..Default::default() });
    let posed = PosedMesh::from_pose(t.mesh.clone(), &t.skeleton, &t.pose).unwrap();
    let model = Model::<f32>::from_store(&t.field, &t.store).unwrap();
    let a = photometric_batch(&model, &posed, &t.rays, &RenderSettings { chunk_rows: 10, parallelism: Parallelism::Parallel, ..t.settings.clone() }).unwrap();
    let b = photometric_batch(&model, &posed, &t.rays, &RenderSettings { chunk_rows: 10, parallelism: Parallelism::Sequential, ..t.settings.clone() }).unwrap();
    assert_eq!(a.loss.to_bits(), b.loss.to_bits());
    assert_eq!(a.grad_phi, b.grad_phi);
    assert_eq!(a.grad_latents, b.grad_latents);
}

#[test]
fn stream_seeds_differ_per_component() {
    let a = stream_seed(&[1, 2]);
    assert_ne!(a, stream_seed(&[2, 1]));
    assert_ne!(a, stream_seed(&[1, 2, 0]));
    assert_eq!(a, stream_seed(&[1, 2]));
}

#[test]
fn single_precision_gradients_track_double_precision() {
    let t = toy(EmbeddingConfig::default());
    let posed = PosedMesh::from_pose(t.mesh.clone(), &t.skeleton, &t.pose).unwrap();
    let m64 = Model::<f64>::from_store(&t.field, &t.store).unwrap();
    let m32 = Model::<f32>::from_store(&t.field, &t.store).unwrap();
    let a = photometric_batch(&m64, &posed, &t.rays, &t.settings).unwrap();
    let b = photometric_batch(&m32, &posed, &t.rays, &t.settings).unwrap();
    let ga = pose_gradient(&t.skeleton, &posed, &t.pose, &a.adjoints);
    let gb = pose_gradient(&t.skeleton, &posed, &t.pose, &b.adjoints);
    let scale = ga.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let err = ga.iter().zip(&gb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(scale > 0.0);
    assert!(err <= 1e-3 * scale, "pose gradient gap {err} against scale {scale}");
}
