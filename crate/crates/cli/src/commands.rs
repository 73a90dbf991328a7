use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context as _, Result};
use dramakit::dsp::{binaural_mae, read_mono, AnalysisConfig, BinauralSignal};
use dramakit::geom::{doppler_factor, geo_pose_feature, Trajectory, Vec3};
use dramakit::kernels::{demo_pose_alignment, demo_toy_flow, FlowDemoConfig, PoseDemoConfig};
use dramakit::numerics::Rng;
use dramakit::render::{render_binaural, render_stats, RenderConfig};
use dramakit::segment::{read_script, segment_script};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;

pub struct Context {
    pub cfg: Config,
    pub seed: u64,
    pub lax: bool,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_trajectory(path: &Path, lax: bool) -> Result<Trajectory> {
    Trajectory::from_json_file(path, lax).with_context(|| format!("trajectory {}", path.display()))
}

pub fn render(
    ctx: &Context,
    rc: &RenderConfig,
    mono: &Path,
    traj: &Path,
    out: &Path,
    stats: &Path,
) -> Result<()> {
    let (sr, samples) = read_mono(mono).with_context(|| format!("mono input {}", mono.display()))?;
    let traj = load_trajectory(traj, ctx.lax)?;
    let rendered = render_binaural(&samples, sr, &traj, rc)?;
    rendered
        .signal
        .write(out)
        .with_context(|| format!("writing {}", out.display()))?;
    write_json(
        stats,
        &json!({
            "seed": ctx.seed,
            "sample_rate": sr,
            "samples": samples.len(),
            "config": rc,
            "stats": render_stats(&rendered),
        }),
    )
}

/// Head-frame source offset from the head centre.
fn head_offset(traj: &Trajectory, t: f64) -> Result<Vec3> {
    let p = traj.position_at(t)?;
    Ok(traj.listener.to_head(p - traj.listener.head_position))
}

/// Geometric stand-ins for learned angle/distance embeddings: per 1 s
/// window over the common time span, the cosine between the two source
/// directions (averaged), and the cosine similarity of the two distance
/// sequences.
pub fn angle_distance_scores(gt: &Trajectory, pred: &Trajectory) -> Result<(f64, f64)> {
    let t0 = gt.start_time().max(pred.start_time());
    let t1 = gt.end_time().min(pred.end_time());
    if t1 < t0 {
        anyhow::bail!("trajectories do not overlap in time");
    }
    let windows = ((t1 - t0).floor() as usize).max(1);
    let width = (t1 - t0) / windows as f64;
    let (mut angle, mut dot, mut ng, mut np) = (0.0, 0.0, 0.0, 0.0);
    for w in 0..windows {
        let t = t0 + (w as f64 + 0.5) * width;
        let (a, b) = (head_offset(gt, t)?, head_offset(pred, t)?);
        let (da, db) = (a.norm(), b.norm());
        if da == 0.0 || db == 0.0 {
            anyhow::bail!("source coincides with the head centre at t = {t}");
        }
        angle += a.dot(b) / (da * db);
        dot += da * db;
        ng += da * da;
        np += db * db;
    }
    Ok((angle / windows as f64, dot / (ng.sqrt() * np.sqrt())))
}

pub fn metrics(
    ctx: &Context,
    dc: &AnalysisConfig,
    gt: &Path,
    pred: &Path,
    trajectories: Option<(std::path::PathBuf, std::path::PathBuf)>,
    out: &Path,
) -> Result<()> {
    let gt_sig = BinauralSignal::read(gt).with_context(|| format!("ground truth {}", gt.display()))?;
    let pred_sig = BinauralSignal::read(pred).with_context(|| format!("prediction {}", pred.display()))?;
    let mae = binaural_mae(&gt_sig, &pred_sig, dc)?;
    let mut report = json!({
        "seed": ctx.seed,
        "ipd_mae": mae.ipd_mae,
        "ild_mae": mae.ild_mae,
    });
    if let Some((g, p)) = trajectories {
        let (angle_cos, dis_cos) =
            angle_distance_scores(&load_trajectory(&g, ctx.lax)?, &load_trajectory(&p, ctx.lax)?)?;
        if let Value::Object(m) = &mut report {
            m.insert("angle_cos".into(), json!(angle_cos));
            m.insert("dis_cos".into(), json!(dis_cos));
        }
    }
    write_json(out, &report)
}

pub fn doppler(ctx: &Context, traj: &Path, out: &Path) -> Result<()> {
    let traj = load_trajectory(traj, ctx.lax)?;
    let c = ctx.cfg.render.speed_of_sound;
    let mut csv = String::from("t,v_rad_l,v_rad_r,factor_l,factor_r\n");
    for s in traj.samples() {
        let f = geo_pose_feature(&traj, s.t)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            s.t,
            f.v_rad_l,
            f.v_rad_r,
            doppler_factor(f.v_rad_l, c)?,
            doppler_factor(f.v_rad_r, c)?
        ));
    }
    let mut file = fs::File::create(out).with_context(|| format!("writing {}", out.display()))?;
    file.write_all(csv.as_bytes())?;
    Ok(())
}

pub fn segment(ctx: &Context, script: &Path, out: &Path, max_duration: f64) -> Result<()> {
    let lines = read_script(script, ctx.lax).with_context(|| format!("script {}", script.display()))?;
    let segments = segment_script(&lines, max_duration)?;
    write_json(
        out,
        &json!({
            "seed": ctx.seed,
            "max_duration": max_duration,
            "segments": segments,
        }),
    )
}

pub fn demo_flow(ctx: &Context, cfg: &FlowDemoConfig, out: &Path) -> Result<()> {
    let report = demo_toy_flow(&Rng::seeded(ctx.seed), cfg)?;
    write_json(out, &report)
}

pub fn demo_pose(ctx: &Context, cfg: &PoseDemoConfig, out: &Path) -> Result<()> {
    let report = demo_pose_alignment(&Rng::seeded(ctx.seed), cfg)?;
    write_json(out, &report)
}
