//! The `synth`, `train`, `render`, `eval` and `gradcheck` commands.

use std::path::{Path, PathBuf};

use meshfield::autodiff::FdConfig;
use meshfield::dataset::{
    frame_path, load_poses, load_sequence, mask_path, read_json, save_sequence, write_atomic, write_dir_atomic,
};
use meshfield::embedding::{DirectionMode, DistanceMode, EmbeddingConfig};
use meshfield::image::{load_mask, load_rgb, save_rgb};
use meshfield::metrics::{MetricReport, Split};
use meshfield::pipeline::audit::{gradient_audit, GroupReport};
use meshfield::render::Camera;
use meshfield::rig::Pose;
use meshfield::spatial::NeighborRule;
use meshfield::synth::{generate_novel_pose_sequence, generate_sequence, SequenceSpec};
use meshfield::trainer::{
    load_checkpoint, render_frame, save_checkpoint, train as run_training, TrainConfig, TrainLog, TrainState,
    LOG_HEADER,
};
use serde::{Deserialize, Serialize};

use crate::config::{self, to_pretty};
use crate::{EvalArgs, Failure, GradcheckArgs, RenderArgs, SplitArg, SynthArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.json";

pub fn synth(args: SynthArgs) -> Result<(), Failure> {
    let spec: SequenceSpec = config::load(args.config.as_deref(), &args.overrides)?;
    spec.validate()?;
    let train = generate_sequence(&spec)?;
    let novel = generate_novel_pose_sequence(&spec)?;
    write_dir_atomic(&args.out, |tmp| {
        save_sequence(&tmp.join("train"), &train)?;
        save_sequence(&tmp.join("novel_pose"), &novel)?;
        write_atomic(&tmp.join("synth.json"), &to_pretty(&spec))
    })?;
    eprintln!("wrote {} training and {} novel-pose frames to {}", spec.frames, spec.frames, args.out.display());
    Ok(())
}

/// A sequence directory itself, or the `train/` split of a `synth` output.
pub fn sequence_dir(data: &Path, split: &str) -> PathBuf {
    let nested = data.join(split);
    if nested.join("poses.json").exists() {
        nested
    } else {
        data.to_path_buf()
    }
}

pub fn resolve_train_config(
    path: Option<&Path>,
    overrides: &[String],
    iterations: Option<u64>,
    seed: Option<u64>,
) -> Result<TrainConfig, Failure> {
    let mut cfg: TrainConfig = config::load(path, overrides)?;
    if let Some(n) = iterations {
        cfg.iterations = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Drops log rows past `iteration`, which a run interrupted between
/// checkpoints leaves behind.
fn trim_log(path: &Path, iteration: u64) -> Result<(), Failure> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(());
    };
    let mut kept = String::new();
    for line in text.lines() {
        let keep = line == LOG_HEADER
            || line.split(',').next().and_then(|s| s.parse::<u64>().ok()).is_some_and(|it| it <= iteration);
        if keep {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    Ok(write_atomic(path, kept.as_bytes())?)
}

pub fn train(args: TrainArgs) -> Result<(), Failure> {
    let seq = load_sequence(&sequence_dir(&args.data, "train"))?;
    let scene = seq.scene();
    let checkpoint = args.out.join(CHECKPOINT_FILE);
    let log_path = args.out.join(LOG_FILE);
    let mut state = if args.resume {
        let mut state = load_checkpoint(&checkpoint)?;
        if state.frame_count() != scene.frames.len() {
            return Err(Failure::Usage(format!(
                "checkpoint has {} frames but {} holds {}",
                state.frame_count(),
                args.data.display(),
                scene.frames.len()
            )));
        }
        if let Some(n) = args.iterations {
            state.config.iterations = n;
        }
        trim_log(&log_path, state.iteration)?;
        state
    } else {
        let cfg = resolve_train_config(args.config.as_deref(), &args.overrides, args.iterations, args.seed)?;
        std::fs::create_dir_all(&args.out).map_err(|e| Failure::Usage(format!("{}: {e}", args.out.display())))?;
        if log_path.exists() {
            std::fs::remove_file(&log_path).map_err(|e| Failure::Usage(format!("{}: {e}", log_path.display())))?;
        }
        TrainState::new(cfg, &scene)?
    };
    write_atomic(&args.out.join(CONFIG_FILE), &to_pretty(&state.config))?;
    let mut log = TrainLog::open(&log_path)?;
    let until = state.config.iterations;
    let every = args.checkpoint_every;
    run_training(&mut state, &scene, until, |st, step| {
        log.append(step)?;
        if every > 0 && st.iteration % every == 0 {
            log.flush()?;
            save_checkpoint(&checkpoint, st)?;
            eprintln!("iteration {} loss {:.6e} drift {:.4e}", step.iteration, step.loss, step.mean_drift());
        }
        Ok(())
    })?;
    log.flush()?;
    save_checkpoint(&checkpoint, &state)?;
    eprintln!("finished at iteration {}; checkpoint {}", state.iteration, checkpoint.display());
    Ok(())
}

/// Reads either a `poses.json` document (its ground-truth poses) or a plain
/// JSON list of poses.
pub fn read_pose_file(path: &Path) -> Result<Vec<Pose>, Failure> {
    let value: serde_json::Value = read_json(path)?;
    if value.is_object() {
        Ok(load_poses(path)?.ground_truth)
    } else {
        Ok(read_json(path)?)
    }
}

pub fn render(args: RenderArgs) -> Result<(), Failure> {
    let state = load_checkpoint(&args.checkpoint)?;
    let views: Vec<(Camera, Pose)> = match &args.poses {
        Some(p) => {
            let camera = match &args.camera {
                Some(c) => {
                    let camera: Camera = read_json(c)?;
                    camera.validate()?;
                    camera
                }
                None => state.cameras[0].clone(),
            };
            read_pose_file(p)?.into_iter().map(|pose| (camera.clone(), pose)).collect()
        }
        None => state.cameras.iter().cloned().zip(state.poses()?).collect(),
    };
    let images = views.iter().map(|(c, p)| render_frame(&state, c, p)).collect::<meshfield::Result<Vec<_>>>()?;
    write_dir_atomic(&args.out, |tmp| {
        for (i, img) in images.iter().enumerate() {
            save_rgb(&frame_path(tmp, i), img)?;
        }
        Ok(())
    })?;
    eprintln!("wrote {} frames to {}", images.len(), args.out.display());
    Ok(())
}

/// Number of consecutive `frame_%04d.png` files starting at zero.
pub fn count_frames(dir: &Path) -> usize {
    (0..).take_while(|&i| frame_path(dir, i).exists()).count()
}

pub fn eval(args: EvalArgs) -> Result<(), Failure> {
    let n = count_frames(&args.truth);
    if n == 0 {
        return Err(meshfield::Error::Corrupt(format!("{} holds no frames", args.truth.display())).into());
    }
    let load = |dir: &Path| (0..n).map(|i| load_rgb(&frame_path(dir, i))).collect::<meshfield::Result<Vec<_>>>();
    let truth = load(&args.truth)?;
    let rendered = load(&args.rendered)?;
    let masks = if args.masked {
        Some((0..n).map(|i| load_mask(&mask_path(&args.truth, i))).collect::<meshfield::Result<Vec<_>>>()?)
    } else {
        None
    };
    let split = match args.split {
        SplitArg::Train => Split::Train,
        SplitArg::NovelPose => Split::NovelPose,
    };
    let report = MetricReport::compute(split, &rendered, &truth, masks.as_deref())?;
    write_atomic(&args.out, &to_pretty(&report))?;
    println!("frames {n}  PSNR {:.3} dB  SSIM {:.4}", report.mean_psnr, report.mean_ssim);
    Ok(())
}

/// Settings of the `gradcheck` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub fd: FdConfig,
    /// Base embedding; sizes are kept small so every variant runs quickly.
    pub embedding: EmbeddingConfig,
    /// Check every distance, direction and neighbor combination instead of
    /// the base embedding alone.
    pub full_grid: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            fd: meshfield::pipeline::audit::audit_fd_config(),
            embedding: EmbeddingConfig {
                k_neighbors: 4,
                pe_frequencies: 3,
                latent_dim: 2,
                psi_width: 8,
                ..EmbeddingConfig::default()
            },
            full_grid: true,
        }
    }
}

#[derive(Serialize)]
struct GradcheckRow {
    distance: DistanceMode,
    direction: DirectionMode,
    neighbors: NeighborRule,
    group: &'static str,
    checked: usize,
    max_relative_error: f64,
    passed: bool,
}

pub fn gradcheck(args: GradcheckArgs) -> Result<(), Failure> {
    let cfg: GradcheckConfig = config::load(args.config.as_deref(), &args.overrides)?;
    cfg.embedding.validate()?;
    let variants: Vec<EmbeddingConfig> = if cfg.full_grid {
        crate::ablate::grid()
            .into_iter()
            .map(|(d, r, n)| EmbeddingConfig {
                distance_mode: d,
                direction_mode: r,
                neighbor_rule: n,
                ..cfg.embedding.clone()
            })
            .collect()
    } else {
        vec![cfg.embedding.clone()]
    };
    let mut rows = Vec::new();
    for emb in &variants {
        let reports: Vec<GroupReport> = gradient_audit(emb.clone(), &cfg.fd)?;
        for r in reports {
            println!(
                "{:<12} {:<12} {:<14} {:<8} checked {:>4}  max rel err {:.3e}  {}",
                emb.distance_mode.name(),
                emb.direction_mode.name(),
                emb.neighbor_rule.name(),
                r.group,
                r.report.checked,
                r.report.max_relative_error,
                if r.report.passed { "ok" } else { "FAIL" }
            );
            rows.push(GradcheckRow {
                distance: emb.distance_mode,
                direction: emb.direction_mode,
                neighbors: emb.neighbor_rule,
                group: r.group,
                checked: r.report.checked,
                max_relative_error: r.report.max_relative_error,
                passed: r.report.passed,
            });
        }
    }
    if let Some(out) = &args.out {
        write_atomic(out, &to_pretty(&rows))?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(meshfield::Error::Numerical(format!("{failed} of {} gradient checks failed", rows.len())).into());
    }
    Ok(())
}
