//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! `cargo test -p meshfield --test acceptance` runs the fast criteria. The
//! training surrogates are long and run only with `-- --heavy`; numeric
//! arguments pick criteria, e.g. `-- --heavy 7 10`.
//!
//! Environment overrides for the heavy runs: `ACCEPT_ITERATIONS`,
//! `ACCEPT_RAYS`, `ACCEPT_SAMPLES` (coarse and fine each).

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use meshfield::embedding::{raw_embedding, raw_embedding_from, DistanceMode, EmbeddingConfig};
use meshfield::fixtures::HingeSeparation;
use meshfield::metrics::Split;
use meshfield::pipeline::audit::{audit_fd_config, gradient_audit};
use meshfield::render::{composite_ray, sample_stratified};
use meshfield::rig::{forward_kinematics, lbs_forward, lbs_inverse, make_procedural_body, BodyConfig, Pose};
use meshfield::spatial::{select_neighbors, PosedMesh, DEFAULT_BOUNDS_PADDING};
use meshfield::synth::{generate_novel_pose_sequence, generate_sequence, mean_joint_angle_error, Sequence, SequenceSpec};
use meshfield::trainer::{encode_checkpoint, evaluate_frames, train, TrainConfig, TrainState};
use meshfield::Error;
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracles;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Check = fn() -> Outcome;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    heavy: bool,
    run: Check,
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "oracle equivalence", budget: secs(60), heavy: false, run: oracle_equivalence },
    Criterion { id: 2, name: "skinning round trip", budget: secs(5), heavy: false, run: skinning_round_trip },
    Criterion { id: 3, name: "transmittance", budget: secs(5), heavy: false, run: transmittance },
    Criterion { id: 4, name: "gradient audit", budget: secs(120), heavy: false, run: gradient_audit_check },
    Criterion { id: 5, name: "rigid invariance", budget: secs(30), heavy: false, run: rigid_invariance },
    Criterion { id: 6, name: "hinge separation", budget: secs(5), heavy: false, run: hinge_separation },
    Criterion { id: 7, name: "overfit surrogate", budget: secs(2 * 3600), heavy: true, run: overfit_surrogate },
    Criterion { id: 8, name: "distance ablation ordering", budget: secs(6 * 3600), heavy: true, run: ablation_ordering },
    Criterion { id: 9, name: "pose refinement", budget: secs(4 * 3600), heavy: true, run: pose_refinement },
    Criterion { id: 10, name: "determinism", budget: secs(600), heavy: false, run: determinism },
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let heavy = args.iter().any(|a| a == "--heavy" || a == "--include-ignored" || a == "--ignored");
    let picked: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| picked.is_empty() || picked.contains(&c.id)) {
        if c.heavy && !heavy {
            println!("criterion {:>2} {:<28} SKIP  long training run; pass --heavy to include it", c.id, c.name);
            continue;
        }
        let start = Instant::now();
        let o = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let passed = o.passed && in_time;
        failed += usize::from(!passed);
        println!(
            "criterion {:>2} {:<28} {}  {} [{:.1}s of {}s{}]",
            c.id,
            c.name,
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn random_pose(rng: &mut ChaCha8Rng, joints: usize, scale: f64) -> Pose {
    let mut p = Pose::rest(joints);
    for r in p.rotations.iter_mut() {
        *r = [0; 3].map(|_| rng.random_range(-scale..scale));
    }
    p.translation = [0; 3].map(|_| rng.random_range(-0.3..0.3));
    p
}

fn jitter(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::from([0; 3].map(|_| rng.random_range(-s..s)))
}

fn oracle_equivalence() -> Outcome {
    const QUERIES: usize = 1000;
    let (mesh, skel) = make_procedural_body(0, &BodyConfig::default()).unwrap();
    let mesh = Arc::new(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut hits = 0;
    for q in 0..QUERIES {
        let pose = random_pose(&mut rng, skel.len(), 0.6);
        let posed = PosedMesh::from_pose(mesh.clone(), &skel, &pose).unwrap();
        let v = rng.random_range(0..mesh.vertex_count());
        let x = posed.positions()[v] + jitter(&mut rng, 0.3);
        let p = posed.project(&x).unwrap();
        let (d, tri, v0) = oracles::brute_closest(&posed, &x);
        worst = worst.max((p.distance - d).abs());
        mismatches += usize::from(p.triangle != tri || p.nearest_vertex != v0);

        let k = 1 + q % 12;
        let got = select_neighbors(&posed, &p, &x, k);
        let want = oracles::brute_neighbors(&posed, p.nearest_vertex, &x, k);
        mismatches += usize::from(got.len() != want.len() || got.iter().zip(&want).any(|(a, b)| a.0 != b.0));
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a.1 - b.1).abs());
        }

        let origin = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-0.5..2.5), rng.random_range(2.0..4.0));
        let target = posed.positions()[rng.random_range(0..mesh.vertex_count())] + jitter(&mut rng, 0.3);
        let dir = (target - origin).normalize();
        match (posed.ray_bounds(&origin, &dir), oracles::brute_ray_bounds(&posed, &origin, &dir, DEFAULT_BOUNDS_PADDING)) {
            (Some(a), Some(b)) => {
                hits += 1;
                worst = worst.max((a.0 - b.0).abs()).max((a.1 - b.1).abs());
            }
            (None, None) => {}
            _ => mismatches += 1,
        }
    }
    outcome(
        worst <= 1e-9 && mismatches == 0,
        format!("{QUERIES} queries per oracle ({hits} ray hits), max abs error {worst:.1e}, {mismatches} index mismatches"),
    )
}

fn skinning_round_trip() -> Outcome {
    const SAMPLES: usize = 1000;
    let (mesh, skel) = make_procedural_body(1, &BodyConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    let mut degenerate = 0;
    while accepted < SAMPLES {
        let g = forward_kinematics(&skel, &random_pose(&mut rng, skel.len(), 1.2)).unwrap();
        let v = rng.random_range(0..mesh.vertex_count());
        let x = mesh.vertices()[v] + jitter(&mut rng, 0.05);
        let w = mesh.weights(v);
        match lbs_inverse(&lbs_forward(&x, w, &g), w, &g) {
            Ok(back) => {
                worst = worst.max((back - x).norm());
                accepted += 1;
            }
            Err(Error::DegenerateBlend { .. }) => degenerate += 1,
            Err(e) => return outcome(false, format!("unexpected error {e}")),
        }
    }
    outcome(worst <= 1e-9, format!("{SAMPLES} samples ({degenerate} degenerate skipped), max error {worst:.1e}"))
}

fn transmittance() -> Outcome {
    let mut worst_medium: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for sigma in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        for n in [2, 7, 32, 64, 128] {
            let s = sample_stratified((0.0, 1.0), n, false, &mut rng).unwrap();
            let out = composite_ray(&vec![sigma; n], &vec![[1.0; 3]; n], &s.delta);
            worst_medium = worst_medium.max((out.alpha - (1.0 - (-sigma).exp())).abs());
        }
    }
    let mut worst_split: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..16);
        let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..8.0)).collect();
        let color: Vec<[f64; 3]> = (0..n).map(|_| [0; 3].map(|_| rng.random::<f64>())).collect();
        let delta: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.5)).collect();
        let whole = composite_ray(&sigma, &color, &delta);
        let k = rng.random_range(0..n);
        let f = rng.random_range(0.05..0.95);
        let (mut s2, mut c2, mut d2) = (sigma.clone(), color.clone(), delta.clone());
        s2.insert(k, sigma[k]);
        c2.insert(k, color[k]);
        d2[k] = delta[k] * f;
        d2.insert(k + 1, delta[k] * (1.0 - f));
        let split = composite_ray(&s2, &c2, &d2);
        worst_split = worst_split.max((whole.alpha - split.alpha).abs());
        for c in 0..3 {
            worst_split = worst_split.max((whole.color[c] - split.color[c]).abs());
        }
    }
    outcome(
        worst_medium <= 1e-3 && worst_split <= 1e-6,
        format!("homogeneous medium error {worst_medium:.1e}, segment split error {worst_split:.1e}"),
    )
}

fn gradient_audit_check() -> Outcome {
    let small = EmbeddingConfig { k_neighbors: 4, pe_frequencies: 3, latent_dim: 2, psi_width: 8, ..Default::default() };
    let variants = [
        small.clone(),
        EmbeddingConfig { distance_mode: DistanceMode::Canonical, ..small.clone() },
        EmbeddingConfig { psi_width: 32, pe_frequencies: 6, latent_dim: 8, k_neighbors: 7, ..small },
    ];
    let mut worst: f64 = 0.0;
    let mut all = true;
    let mut groups = Vec::new();
    for emb in variants {
        match gradient_audit(emb, &audit_fd_config()) {
            Ok(reports) => {
                for r in reports {
                    worst = worst.max(r.report.max_relative_error);
                    all &= r.report.passed && r.active > 0;
                    groups.push(format!("{}:{:.0e}", r.group, r.report.max_relative_error));
                }
            }
            Err(e) => return outcome(false, format!("audit failed: {e}")),
        }
    }
    outcome(all && worst < 1e-3, format!("3 embeddings, max relative error {worst:.1e} ({})", groups.join(" ")))
}

fn rigid_invariance() -> Outcome {
    const TRIALS: usize = 500;
    let (mesh, skel) = make_procedural_body(2, &BodyConfig::default()).unwrap();
    let mesh = Arc::new(mesh);
    let cfg = EmbeddingConfig::default();
    let latents: Vec<f64> = (0..mesh.vertex_count() * cfg.latent_dim).map(|i| (i as f64 * 0.013).sin()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    let mut ties = 0;
    for _ in 0..TRIALS {
        let pose = random_pose(&mut rng, skel.len(), 0.5);
        let axis = jitter(&mut rng, 1.0).normalize();
        let r = *Rotation3::new(axis * rng.random_range(-3.1..3.1)).matrix();
        let t = jitter(&mut rng, 2.0);
        let a = PosedMesh::from_pose(mesh.clone(), &skel, &pose).unwrap();
        let b = PosedMesh::from_pose(mesh.clone(), &skel, &pose.with_global_rigid(&skel, &r, &t)).unwrap();
        let x = a.positions()[rng.random_range(0..mesh.vertex_count())] + jitter(&mut rng, 0.08);
        let y = r * x + t;
        let ea = raw_embedding(&a, &x, &cfg, &latents).unwrap();
        let mut eb = raw_embedding(&b, &y, &cfg, &latents).unwrap();
        if ea.neighbors != eb.neighbors {
            // Equidistant candidates ordered differently by round-off.
            ties += 1;
            eb = raw_embedding_from(&b, &y, &ea.neighbors, &cfg, &latents);
        }
        worst = worst.max(ea.max_difference(&eb));
    }
    outcome(worst <= 1e-6, format!("{TRIALS} trials, max difference {worst:.1e}, {ties} round-off ties"))
}

fn hinge_separation() -> Outcome {
    let h = HingeSeparation::new().unwrap();
    let [a, b] = h.embeddings(&HingeSeparation::nearest_only_config()).unwrap();
    let collide = a.max_difference(&b);
    let [c, d] = h.embeddings(&HingeSeparation::observation_config()).unwrap();
    let same_head = c.neighbors[0] == d.neighbors[0];
    let gap = c.distances.iter().zip(&d.distances).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    outcome(
        collide == 0.0 && same_head && gap >= 1e-3,
        format!("nearest-only difference {collide:.1e}, largest ring distance change {gap:.3e}"),
    )
}

fn env_or<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

/// Default training config at the reduced ray and sample counts used for
/// the long surrogate runs.
fn surrogate_config() -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.rays_per_batch = env_or("ACCEPT_RAYS", 256);
    let samples = env_or("ACCEPT_SAMPLES", 32);
    cfg.render.n_coarse = samples;
    cfg.render.n_fine = samples;
    cfg.iterations = env_or("ACCEPT_ITERATIONS", 20_000);
    cfg
}

fn turning_spec(pose_noise: f64) -> SequenceSpec {
    SequenceSpec { frames: 8, image_size: 64, pose_noise, ..SequenceSpec::default() }
}

struct RunResult {
    train_psnr: f64,
    novel_psnr: f64,
    angle_before: f64,
    angle_after: f64,
    mask_iou: f64,
}

fn train_and_score(cfg: TrainConfig, seq: &Sequence, novel: &Sequence, label: &str) -> RunResult {
    let scene = seq.scene();
    let mut state = TrainState::new(cfg, &scene).unwrap();
    let until = state.config.iterations;
    let start = Instant::now();
    train(&mut state, &scene, until, |_, step| {
        if step.iteration % 1000 == 0 {
            eprintln!("  [{label}] iteration {} loss {:.4e} ({:.0}s)", step.iteration, step.loss, start.elapsed().as_secs_f64());
        }
        Ok(())
    })
    .unwrap();
    let poses = state.poses().unwrap();
    let tr = evaluate_frames(&state, &scene.frames, &poses, Split::Train, false).unwrap();
    let nv = evaluate_frames(&state, &novel.frames, &novel.ground_truth, Split::NovelPose, false).unwrap();
    let mut inter = 0usize;
    let mut union = 0usize;
    for (f, p) in scene.frames.iter().zip(&poses) {
        let alpha = state.render_view(&f.camera, p).unwrap().alpha;
        let mask = f.mask.as_ref().unwrap();
        for (a, &m) in alpha.iter().zip(&mask.data) {
            let r = *a >= 0.5;
            inter += usize::from(r && m);
            union += usize::from(r || m);
        }
    }
    let initial: Vec<Pose> = scene.frames.iter().map(|f| f.initial_pose.clone()).collect();
    RunResult {
        train_psnr: tr.mean_psnr,
        novel_psnr: nv.mean_psnr,
        angle_before: mean_joint_angle_error(&initial, &seq.ground_truth),
        angle_after: mean_joint_angle_error(&poses, &seq.ground_truth),
        mask_iou: inter as f64 / union.max(1) as f64,
    }
}

fn overfit_surrogate() -> Outcome {
    let spec = turning_spec(0.0);
    let seq = generate_sequence(&spec).unwrap();
    let novel = generate_novel_pose_sequence(&spec).unwrap();
    let cfg = surrogate_config();
    let (iters, rays, samples) = (cfg.iterations, cfg.rays_per_batch, cfg.render.n_coarse);
    let r = train_and_score(cfg, &seq, &novel, "overfit");
    outcome(
        r.train_psnr >= 28.0 && r.novel_psnr >= 24.0,
        format!(
            "train PSNR {:.2} dB (>= 28), novel-pose PSNR {:.2} dB (>= 24), mask IoU {:.3}; {iters} iterations, {rays} rays, {samples}+{samples} samples",
            r.train_psnr, r.novel_psnr, r.mask_iou
        ),
    )
}

fn ablation_ordering() -> Outcome {
    let spec = turning_spec(0.05);
    let seq = generate_sequence(&spec).unwrap();
    let novel = generate_novel_pose_sequence(&spec).unwrap();
    let mut psnr = Vec::new();
    for mode in [DistanceMode::Off, DistanceMode::Canonical, DistanceMode::Observation] {
        let mut cfg = surrogate_config();
        cfg.embedding.distance_mode = mode;
        psnr.push(train_and_score(cfg, &seq, &novel, mode.name()).novel_psnr);
    }
    let (off, canonical, observation) = (psnr[0], psnr[1], psnr[2]);
    outcome(
        observation - canonical >= 0.5 && canonical - off >= 0.5,
        format!("novel-pose PSNR observation {observation:.2} / canonical {canonical:.2} / off {off:.2} dB (gaps >= 0.5)"),
    )
}

fn pose_refinement() -> Outcome {
    let spec = turning_spec(0.08);
    let seq = generate_sequence(&spec).unwrap();
    let novel = generate_novel_pose_sequence(&spec).unwrap();
    let refined = train_and_score(surrogate_config(), &seq, &novel, "refine");
    let mut frozen_cfg = surrogate_config();
    frozen_cfg.freeze_poses = true;
    let frozen = train_and_score(frozen_cfg, &seq, &novel, "frozen");
    let reduction = 1.0 - refined.angle_after / refined.angle_before;
    let gain = refined.novel_psnr - frozen.novel_psnr;
    outcome(
        reduction >= 0.5 && gain >= 0.5,
        format!(
            "joint angle error {:.4} -> {:.4} rad ({:.0}% reduction, >= 50%), novel-pose PSNR {:.2} vs {:.2} dB frozen (gain {gain:.2}, >= 0.5)",
            refined.angle_before,
            refined.angle_after,
            100.0 * reduction,
            refined.novel_psnr,
            frozen.novel_psnr
        ),
    )
}

fn determinism() -> Outcome {
    const ITERATIONS: u64 = 500;
    let spec = SequenceSpec { pose_noise: 0.05, ..turning_spec(0.0) };
    let seq = generate_sequence(&spec).unwrap();
    let scene = seq.scene();
    let mut cfg = TrainConfig::default();
    cfg.rays_per_batch = 128;
    cfg.render.n_coarse = 16;
    cfg.render.n_fine = 16;
    cfg.field.depth = 4;
    cfg.field.width = 64;
    cfg.field.skip_layer = Some(2);
    cfg.embedding.psi_width = 32;
    cfg.iterations = ITERATIONS;
    let run = || {
        let mut state = TrainState::new(cfg.clone(), &scene).unwrap();
        train(&mut state, &scene, ITERATIONS, |_, _| Ok(())).unwrap();
        encode_checkpoint(&state).unwrap()
    };
    let (a, b) = (run(), run());
    outcome(
        a == b,
        format!("two {ITERATIONS}-iteration runs, checkpoints of {} bytes {}", a.len(), if a == b { "identical" } else { "differ" }),
    )
}
