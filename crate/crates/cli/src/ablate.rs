//! The embedding ablation grid: every distance mode, direction mode and
//! neighbor rule trained on the same scene and scored on both splits.

use std::fmt::Write as _;

use meshfield::dataset::{load_sequence, write_atomic, write_dir_atomic};
use meshfield::embedding::{DirectionMode, DistanceMode};
use meshfield::metrics::Split;
use meshfield::spatial::NeighborRule;
use meshfield::trainer::{evaluate_frames, train, TrainConfig, TrainState};
use serde::Serialize;

use crate::commands::{resolve_train_config, sequence_dir};
use crate::config::to_pretty;
use crate::{AblateArgs, Failure};

pub type Variant = (DistanceMode, DirectionMode, NeighborRule);

/// All 36 combinations, distance mode outermost.
pub fn grid() -> Vec<Variant> {
    let mut out = Vec::new();
    for d in DistanceMode::ALL {
        for r in DirectionMode::ALL {
            for n in NeighborRule::ALL {
                out.push((d, r, n));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub distance: DistanceMode,
    pub direction: DirectionMode,
    pub neighbors: NeighborRule,
    pub final_loss: f64,
    pub train_psnr: f64,
    pub train_ssim: f64,
    pub novel_psnr: f64,
    pub novel_ssim: f64,
}

fn keep<T: Copy>(filter: &[String], value: T, name: fn(T) -> &'static str) -> bool {
    filter.is_empty() || filter.iter().any(|f| f == name(value))
}

fn check_filter(filter: &[String], names: &[&str], what: &str) -> Result<(), Failure> {
    match filter.iter().find(|f| !names.contains(&f.as_str())) {
        Some(bad) => Err(Failure::Usage(format!("unknown {what} `{bad}`; expected one of {}", names.join(", ")))),
        None => Ok(()),
    }
}

pub fn markdown(rows: &[AblationRow]) -> String {
    let mut s = String::from(
        "| distance | direction | neighbors | final loss | train PSNR | train SSIM | novel PSNR | novel SSIM |\n\
         |---|---|---|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.4e} | {:.2} | {:.4} | {:.2} | {:.4} |",
            r.distance.name(),
            r.direction.name(),
            r.neighbors.name(),
            r.final_loss,
            r.train_psnr,
            r.train_ssim,
            r.novel_psnr,
            r.novel_ssim
        );
    }
    s
}

pub fn run(args: AblateArgs) -> Result<(), Failure> {
    check_filter(&args.distance, &DistanceMode::ALL.map(DistanceMode::name), "distance mode")?;
    check_filter(&args.direction, &DirectionMode::ALL.map(DirectionMode::name), "direction mode")?;
    check_filter(&args.neighbors, &NeighborRule::ALL.map(NeighborRule::name), "neighbor rule")?;
    let base = resolve_train_config(args.config.as_deref(), &args.overrides, args.iterations, None)?;
    let train_seq = load_sequence(&sequence_dir(&args.data, "train"))?;
    let novel_seq = load_sequence(&args.data.join("novel_pose"))?;
    let scene = train_seq.scene();
    let variants: Vec<Variant> = grid()
        .into_iter()
        .filter(|&(d, r, n)| {
            keep(&args.distance, d, DistanceMode::name)
                && keep(&args.direction, r, DirectionMode::name)
                && keep(&args.neighbors, n, NeighborRule::name)
        })
        .collect();
    let mut rows = Vec::with_capacity(variants.len());
    for (i, &(d, r, n)) in variants.iter().enumerate() {
        let mut cfg: TrainConfig = base.clone();
        cfg.embedding.distance_mode = d;
        cfg.embedding.direction_mode = r;
        cfg.embedding.neighbor_rule = n;
        let mut state = TrainState::new(cfg, &scene)?;
        let mut final_loss = f64::NAN;
        let until = state.config.iterations;
        train(&mut state, &scene, until, |_, step| {
            final_loss = step.loss;
            Ok(())
        })?;
        let tr = evaluate_frames(&state, &scene.frames, &state.poses()?, Split::Train, false)?;
        let nv = evaluate_frames(&state, &novel_seq.frames, &novel_seq.ground_truth, Split::NovelPose, false)?;
        let row = AblationRow {
            distance: d,
            direction: r,
            neighbors: n,
            final_loss,
            train_psnr: tr.mean_psnr,
            train_ssim: tr.mean_ssim,
            novel_psnr: nv.mean_psnr,
            novel_ssim: nv.mean_ssim,
        };
        eprintln!(
            "[{}/{}] {} {} {}: novel PSNR {:.2}",
            i + 1,
            variants.len(),
            d.name(),
            r.name(),
            n.name(),
            row.novel_psnr
        );
        rows.push(row);
    }
    let table = markdown(&rows);
    write_dir_atomic(&args.out, |tmp| {
        write_atomic(&tmp.join("ablation.json"), &to_pretty(&rows))?;
        write_atomic(&tmp.join("ablation.md"), table.as_bytes())
    })?;
    print!("{table}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_enumerates_every_combination_once() {
        let g = grid();
        assert_eq!(g.len(), 36);
        let unique: std::collections::HashSet<_> = g.iter().collect();
        assert_eq!(unique.len(), 36);
    }
}
