//! Seeded end-to-end training demos at toy scale.
//!
//! The pose demo aligns a geometric encoder with two surrogate encoders that
//! see noisy linear mixings of the same pose feature. The flow demo fits a
//! velocity network to a 2-D target with the rectified-flow loss and samples
//! it with Euler steps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{geo_pose_feature, ListenerFrame, PoseSample, Quat, Trajectory, Vec3};
use crate::numerics::{Adam, Bound, Init, Linear, ParamStore, Rng, Tape, Tensor, Var};

use super::contrastive::total_contrastive;
use super::flow::{euler_solve, rfm_loss, GaussianTransport, DEFAULT_EULER_STEPS};

pub const POSE_FEATURE_DIM: usize = 12;

/// Two-layer perceptron `Linear → GELU → Linear`.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub layers: [Linear; 2],
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, dims: [usize; 3]) -> Self {
        Self {
            layers: [
                Linear::new(
                    store,
                    &format!("{name}.0"),
                    rng,
                    dims[0],
                    dims[1],
                    Init::Scaled(1.0),
                    true,
                ),
                Linear::new(
                    store,
                    &format!("{name}.1"),
                    rng,
                    dims[1],
                    dims[2],
                    Init::Scaled(1.0),
                    true,
                ),
            ],
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        self.layers[1].forward(p, self.layers[0].forward(p, x)?.gelu())
    }
}

fn check_loss(step: usize, loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Training { step, loss })
    }
}

fn rows_of(t: &Tensor, idx: &[usize]) -> Tensor {
    let d = t.last_dim();
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::new(&[idx.len(), d], data).expect("row gather keeps shape consistent")
}

// ---------------------------------------------------------------- pose demo

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseFamily {
    /// Moving sources; speed dominates.
    Dynamic,
    /// Varied head/mouth orientation.
    Postural,
    /// Varied placement around the listener.
    Positional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseDemoConfig {
    pub train_items: usize,
    pub held_out_items: usize,
    pub view_dim: usize,
    pub noise: f64,
    pub steps: usize,
    pub batch: usize,
    pub hidden: usize,
    pub embed: usize,
    pub lr: f64,
    pub tau: f64,
    pub log_every: usize,
    /// Surrogate views equal the standardized pose feature, without noise.
    pub identity_views: bool,
    /// All three modalities share one encoder.
    pub shared_encoder: bool,
}

impl Default for PoseDemoConfig {
    fn default() -> Self {
        Self {
            train_items: 1536,
            held_out_items: 256,
            view_dim: 32,
            noise: 0.1,
            steps: 2000,
            batch: 64,
            hidden: 64,
            embed: 32,
            lr: 3e-3,
            tau: 0.1,
            log_every: 50,
            identity_views: false,
            shared_encoder: false,
        }
    }
}

impl PoseDemoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.train_items + self.held_out_items < 256 {
            return bad(format!(
                "need at least 256 pose items, got {}",
                self.train_items + self.held_out_items
            ));
        }
        if self.held_out_items < 2 || self.batch < 2 || self.batch > self.train_items {
            return bad("batch must be in [2, train_items] and held_out_items >= 2".into());
        }
        if self.hidden == 0 || self.embed == 0 || self.view_dim == 0 || self.log_every == 0 {
            return bad("dimensions and log_every must be positive".into());
        }
        if !(self.noise >= 0.0 && self.lr > 0.0 && self.tau > 0.0) {
            return bad("noise must be >= 0, lr and tau > 0".into());
        }
        Ok(())
    }

    fn view_width(&self) -> usize {
        if self.identity_views {
            POSE_FEATURE_DIM
        } else {
            self.view_dim
        }
    }
}

/// One synthetic source pose with its family label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseItem {
    pub family: PoseFamily,
    pub feature: Vec<f64>,
}

fn random_unit(rng: &mut Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.normal(), rng.normal(), rng.normal());
        let n = v.norm();
        if n > 1e-6 {
            return v * (1.0 / n);
        }
    }
}

/// Draws a source pose of the given family and returns its 12-value feature.
pub fn synth_pose(family: PoseFamily, rng: &mut Rng) -> Result<PoseItem> {
    let (dist_lo, dist_hi) = match family {
        PoseFamily::Positional => (0.5, 10.0),
        _ => (1.5, 4.0),
    };
    let az = rng.uniform_range(0.0, 2.0 * PI);
    let el = rng.uniform_range(-0.3, 0.6);
    let dist = rng.uniform_range(dist_lo, dist_hi);
    let pos = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * dist;
    let speed = match family {
        PoseFamily::Dynamic => rng.uniform_range(2.0, 15.0),
        _ => rng.uniform_range(0.0, 1.0),
    };
    let vel = random_unit(rng) * speed;
    let ori = match family {
        PoseFamily::Postural => Quat::from_axis_angle(random_unit(rng), rng.uniform_range(0.0, PI)),
        _ => Quat::from_axis_angle(Vec3::UP, rng.uniform_range(-0.3, 0.3)),
    };
    let traj = Trajectory::new(
        vec![
            PoseSample::new(0.0, pos, ori)?,
            PoseSample::new(1.0, pos + vel, ori)?,
        ],
        ListenerFrame::default(),
    )?;
    Ok(PoseItem {
        family,
        feature: geo_pose_feature(&traj, 0.5)?.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseReport {
    pub seed: u64,
    pub rng: String,
    pub steps: usize,
    /// Mean pairwise contrastive loss (total over the three pairs / 3),
    /// at step 0 and every `log_every` steps, ending with the final step.
    pub loss_curve: Vec<f64>,
    pub final_loss: f64,
    /// Mean top-1 retrieval accuracy over the six directed modality pairs
    /// on the held-out set, as a fraction.
    pub retrieval_at_1: f64,
    pub retrieval: Vec<DirectedRetrieval>,
    pub family_counts: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedRetrieval {
    pub query: String,
    pub target: String,
    pub accuracy: f64,
}

struct PoseData {
    geo: Tensor,
    vid: Tensor,
    txt: Tensor,
}

fn standardize(train: &mut Tensor, held: &mut Tensor) {
    let d = train.last_dim();
    let n = train.rows() as f64;
    for j in 0..d {
        let mean = (0..train.rows()).map(|i| train.at(i, j)).sum::<f64>() / n;
        let var = (0..train.rows())
            .map(|i| (train.at(i, j) - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt().max(1e-9);
        for t in [&mut *train, &mut *held] {
            for i in 0..t.rows() {
                t.data_mut()[i * d + j] = (t.data()[i * d + j] - mean) / std;
            }
        }
    }
}

fn make_view(x: &Tensor, mix: Option<&Tensor>, noise: f64, rng: &mut Rng) -> Result<Tensor> {
    let mut v = match mix {
        Some(m) => x.matmul(m)?,
        None => x.clone(),
    };
    if noise > 0.0 {
        for e in v.data_mut() {
            *e += noise * rng.normal();
        }
    }
    Ok(v)
}

fn cosine_retrieval(q: &Tensor, k: &Tensor) -> f64 {
    let unit = |t: &Tensor| -> Vec<Vec<f64>> {
        (0..t.rows())
            .map(|i| {
                let r = t.row(i);
                let n = r.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                r.iter().map(|v| v / n).collect()
            })
            .collect()
    };
    let (qu, ku) = (unit(q), unit(k));
    let hits = qu
        .iter()
        .enumerate()
        .filter(|(i, a)| {
            let sims: Vec<f64> = ku
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect();
            super::router::argmax(&sims) == *i
        })
        .count();
    hits as f64 / q.rows() as f64
}

/// Trains the three encoders with the summed pairwise contrastive loss and
/// reports the held-out cross-modal retrieval accuracy.
pub fn demo_pose_alignment(rng: &Rng, cfg: &PoseDemoConfig) -> Result<PoseReport> {
    cfg.validate()?;
    let mut data_rng = rng.fork(1);
    let families = [PoseFamily::Dynamic, PoseFamily::Postural, PoseFamily::Positional];
    let total = cfg.train_items + cfg.held_out_items;
    let mut family_counts = [0usize; 3];
    let mut feats = Vec::with_capacity(total * POSE_FEATURE_DIM);
    for i in 0..total {
        let f = i % 3;
        family_counts[f] += 1;
        feats.extend(synth_pose(families[f], &mut data_rng)?.feature);
    }
    let all = Tensor::new(&[total, POSE_FEATURE_DIM], feats)?;
    let order = data_rng.permutation(total);
    let mut train = rows_of(&all, &order[..cfg.train_items]);
    let mut held = rows_of(&all, &order[cfg.train_items..]);
    standardize(&mut train, &mut held);

    let width = cfg.view_width();
    let (mix_v, mix_t, noise) = if cfg.identity_views {
        (None, None, 0.0)
    } else {
        let s = 1.0 / (POSE_FEATURE_DIM as f64).sqrt();
        (
            Some(data_rng.normal_tensor(&[POSE_FEATURE_DIM, width], s)),
            Some(data_rng.normal_tensor(&[POSE_FEATURE_DIM, width], s)),
            cfg.noise,
        )
    };
    let build = |x: &Tensor, r: &mut Rng| -> Result<PoseData> {
        Ok(PoseData {
            geo: x.clone(),
            vid: make_view(x, mix_v.as_ref(), noise, r)?,
            txt: make_view(x, mix_t.as_ref(), noise, r)?,
        })
    };
    let train = build(&train, &mut data_rng)?;
    let held = build(&held, &mut data_rng)?;

    let mut init_rng = rng.fork(2);
    let mut store = ParamStore::new();
    let geo_enc = Mlp::new(
        &mut store,
        "geo",
        &mut init_rng,
        [POSE_FEATURE_DIM, cfg.hidden, cfg.embed],
    );
    let (vid_enc, txt_enc) = if cfg.shared_encoder {
        if width != POSE_FEATURE_DIM {
            return Err(Error::Config("a shared encoder needs identity views".into()));
        }
        (geo_enc, geo_enc)
    } else {
        (
            Mlp::new(&mut store, "vid", &mut init_rng, [width, cfg.hidden, cfg.embed]),
            Mlp::new(&mut store, "txt", &mut init_rng, [width, cfg.hidden, cfg.embed]),
        )
    };

    let mut opt = Adam::new(&store, cfg.lr);
    let mut batch_rng = rng.fork(3);
    let mut loss_curve = Vec::new();
    let mut final_loss = f64::NAN;
    for step in 0..=cfg.steps {
        let idx: Vec<usize> = batch_rng.permutation(cfg.train_items)[..cfg.batch].to_vec();
        let tape = Tape::new();
        let p = store.bind(&tape);
        let g = geo_enc.forward(&p, tape.leaf(rows_of(&train.geo, &idx)))?;
        let v = vid_enc.forward(&p, tape.leaf(rows_of(&train.vid, &idx)))?;
        let t = txt_enc.forward(&p, tape.leaf(rows_of(&train.txt, &idx)))?;
        let loss = total_contrastive(g, v, t, cfg.tau)?;
        let value = check_loss(step, loss.item())? / 3.0;
        final_loss = value;
        if step % cfg.log_every == 0 || step == cfg.steps {
            loss_curve.push(value);
        }
        if step == cfg.steps {
            break;
        }
        tape.backward(loss)?;
        let grads = store.grads(&p);
        opt.step(&mut store, &grads);
    }

    let tape = Tape::new();
    let p = store.bind(&tape);
    let emb = [
        ("geo", geo_enc.forward(&p, tape.leaf(held.geo.clone()))?.value()),
        ("vid", vid_enc.forward(&p, tape.leaf(held.vid.clone()))?.value()),
        ("txt", txt_enc.forward(&p, tape.leaf(held.txt.clone()))?.value()),
    ];
    let mut retrieval = Vec::new();
    for (qi, (qn, q)) in emb.iter().enumerate() {
        for (ki, (kn, k)) in emb.iter().enumerate() {
            if qi != ki {
                retrieval.push(DirectedRetrieval {
                    query: qn.to_string(),
                    target: kn.to_string(),
                    accuracy: cosine_retrieval(q, k),
                });
            }
        }
    }
    let retrieval_at_1 = retrieval.iter().map(|r| r.accuracy).sum::<f64>() / retrieval.len() as f64;
    Ok(PoseReport {
        seed: rng.seed(),
        rng: Rng::ALGORITHM.into(),
        steps: cfg.steps,
        loss_curve,
        final_loss,
        retrieval_at_1,
        retrieval,
        family_counts,
    })
}

// ---------------------------------------------------------------- flow demo

/// 2-D target distribution of the flow demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FlowTarget {
    /// Equal-weight isotropic Gaussian mixture.
    Mixture {
        means: Vec<[f64; 2]>,
        std: f64,
    },
    Gaussian {
        mean: [f64; 2],
        std: f64,
    },
}

impl Default for FlowTarget {
    fn default() -> Self {
        FlowTarget::Mixture {
            means: vec![[-2.0, 0.0], [2.0, 0.0]],
            std: 0.5,
        }
    }
}

impl FlowTarget {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            FlowTarget::Mixture { means, std } => {
                !means.is_empty() && *std > 0.0 && means.iter().flatten().all(|v| v.is_finite())
            }
            FlowTarget::Gaussian { mean, std } => *std > 0.0 && mean.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid flow target {self:?}")))
        }
    }

    /// `[n, 2]` samples.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Tensor {
        let mut data = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let (m, s) = match self {
                FlowTarget::Mixture { means, std } => (means[rng.below(means.len())], *std),
                FlowTarget::Gaussian { mean, std } => (*mean, *std),
            };
            data.push(m[0] + s * rng.normal());
            data.push(m[1] + s * rng.normal());
        }
        Tensor::new(&[n, 2], data).expect("sample buffer matches shape")
    }

    pub fn mean(&self) -> [f64; 2] {
        match self {
            FlowTarget::Mixture { means, .. } => {
                let k = means.len() as f64;
                [
                    means.iter().map(|m| m[0]).sum::<f64>() / k,
                    means.iter().map(|m| m[1]).sum::<f64>() / k,
                ]
            }
            FlowTarget::Gaussian { mean, .. } => *mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowDemoConfig {
    pub target: FlowTarget,
    pub hidden: usize,
    pub batch: usize,
    pub steps: usize,
    pub lr: f64,
    pub euler_steps: usize,
    pub samples: usize,
    pub log_every: usize,
}

impl Default for FlowDemoConfig {
    fn default() -> Self {
        Self {
            target: FlowTarget::default(),
            hidden: 64,
            batch: 64,
            steps: 4000,
            lr: 2e-3,
            euler_steps: DEFAULT_EULER_STEPS,
            samples: 10_000,
            log_every: 100,
        }
    }
}

impl FlowDemoConfig {
    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        if self.hidden == 0
            || self.batch == 0
            || self.euler_steps == 0
            || self.samples < 2
            || self.log_every == 0
        {
            return Err(Error::Config(
                "hidden, batch, euler_steps, log_every must be positive and samples >= 2".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub seed: u64,
    pub rng: String,
    pub steps: usize,
    pub euler_steps: usize,
    /// Training loss at step 0 and every `log_every` steps.
    pub loss_curve: Vec<f64>,
    /// Mean rfm loss over the last 100 training steps.
    pub final_loss: f64,
    pub energy_distance: f64,
    pub generated_mean: [f64; 2],
    /// Row-major 2×2 sample covariance of the generated points.
    pub generated_cov: [f64; 4],
    pub target_mean: [f64; 2],
    /// RMS gap between the trained and the closed-form marginal field over
    /// interpolated points (Gaussian targets only).
    pub analytic_field_rmse: Option<f64>,
}

/// Velocity network over `[x, t]`.
#[derive(Debug, Clone, Copy)]
pub struct FieldNet {
    layers: [Linear; 3],
}

impl FieldNet {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, hidden: usize) -> Self {
        Self {
            layers: [
                Linear::new(store, "field.0", rng, 3, hidden, Init::Scaled(1.0), true),
                Linear::new(store, "field.1", rng, hidden, hidden, Init::Scaled(1.0), true),
                Linear::new(store, "field.2", rng, hidden, 2, Init::Scaled(1.0), true),
            ],
        }
    }

    /// `x: [n, 2]`, one time per row.
    pub fn forward<'t>(&self, p: &Bound<'t>, x: &Tensor, t: &[f64]) -> Result<Var<'t>> {
        let n = x.rows();
        let mut input = Vec::with_capacity(3 * n);
        for (i, ti) in t.iter().enumerate().take(n) {
            input.extend_from_slice(x.row(i));
            input.push(*ti);
        }
        let h = p.vars()[0].tape().leaf(Tensor::new(&[n, 3], input)?);
        let h = self.layers[0].forward(p, h)?.gelu();
        let h = self.layers[1].forward(p, h)?.gelu();
        self.layers[2].forward(p, h)
    }

    pub fn velocity(&self, store: &ParamStore, x: &Tensor, t: f64) -> Result<Tensor> {
        let tape = Tape::new();
        let p = store.bind(&tape);
        Ok(self.forward(&p, x, &vec![t; x.rows()])?.value())
    }
}

/// Energy distance `2E|X−Y| − E|X−X'| − E|Y−Y'|` between two row-sample sets
/// (within-set terms exclude the diagonal).
pub fn energy_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.last_dim() != b.last_dim() || a.rows() < 2 || b.rows() < 2 {
        return Err(Error::input(
            "energy distance needs two sample sets of equal width, 2+ rows each",
        ));
    }
    let mean_dist = |x: &Tensor, y: &Tensor, skip_diag: bool| -> f64 {
        let mut sum = 0.0;
        for i in 0..x.rows() {
            let xi = x.row(i);
            let mut row = 0.0;
            for j in 0..y.rows() {
                row += xi
                    .iter()
                    .zip(y.row(j))
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
            }
            sum += row;
        }
        let pairs = if skip_diag {
            x.rows() * (x.rows() - 1)
        } else {
            x.rows() * y.rows()
        };
        sum / pairs as f64
    };
    Ok(2.0 * mean_dist(a, b, false) - mean_dist(a, a, true) - mean_dist(b, b, true))
}

fn mean_cov(x: &Tensor) -> ([f64; 2], [f64; 4]) {
    let n = x.rows() as f64;
    let mut m = [0.0; 2];
    for i in 0..x.rows() {
        m[0] += x.at(i, 0) / n;
        m[1] += x.at(i, 1) / n;
    }
    let mut c = [0.0; 4];
    for i in 0..x.rows() {
        let d = [x.at(i, 0) - m[0], x.at(i, 1) - m[1]];
        for a in 0..2 {
            for b in 0..2 {
                c[a * 2 + b] += d[a] * d[b] / (n - 1.0);
            }
        }
    }
    (m, c)
}

/// Trains a velocity network with the rectified-flow loss on independent
/// (noise, target) pairs, then integrates it from fresh noise.
pub fn demo_toy_flow(rng: &Rng, cfg: &FlowDemoConfig) -> Result<FlowReport> {
    cfg.validate()?;
    let mut init_rng = rng.fork(2);
    let mut store = ParamStore::new();
    let net = FieldNet::new(&mut store, &mut init_rng, cfg.hidden);
    let mut opt = Adam::new(&store, cfg.lr);
    let mut train_rng = rng.fork(3);
    let mut loss_curve = Vec::new();
    let mut tail = Vec::new();
    for step in 0..cfg.steps {
        let x0 = train_rng.normal_tensor(&[cfg.batch, 2], 1.0);
        let x1 = cfg.target.sample(cfg.batch, &mut train_rng);
        let t: Vec<f64> = (0..cfg.batch).map(|_| train_rng.uniform()).collect();
        let mut xt = x0.clone();
        for i in 0..cfg.batch {
            for j in 0..2 {
                xt.data_mut()[i * 2 + j] = (1.0 - t[i]) * x0.at(i, j) + t[i] * x1.at(i, j);
            }
        }
        let tape = Tape::new();
        let p = store.bind(&tape);
        let v = net.forward(&p, &xt, &t)?;
        let loss = rfm_loss(v, tape.leaf(x0), tape.leaf(x1))?;
        let value = check_loss(step, loss.item())?;
        if step % cfg.log_every == 0 {
            loss_curve.push(value);
        }
        tail.push(value);
        if tail.len() > 100 {
            tail.remove(0);
        }
        tape.backward(loss)?;
        let grads = store.grads(&p);
        opt.step(&mut store, &grads);
    }
    let final_loss = if tail.is_empty() {
        f64::NAN
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };

    let mut sample_rng = rng.fork(4);
    let noise = sample_rng.normal_tensor(&[cfg.samples, 2], 1.0);
    let generated = euler_solve(|x, t| net.velocity(&store, x, t), &noise, cfg.euler_steps)?;
    let reference = cfg.target.sample(cfg.samples, &mut sample_rng);
    let energy = energy_distance(&generated, &reference)?;
    let (generated_mean, generated_cov) = mean_cov(&generated);

    let analytic_field_rmse = match &cfg.target {
        FlowTarget::Gaussian { mean, std } => {
            let exact = GaussianTransport::new(mean.to_vec(), *std)?;
            let n = 2000;
            let x0 = sample_rng.normal_tensor(&[n, 2], 1.0);
            let x1 = cfg.target.sample(n, &mut sample_rng);
            let mut sq = 0.0;
            for i in 0..n {
                let t = 0.05 + 0.9 * sample_rng.uniform();
                let xt = Tensor::new(
                    &[1, 2],
                    (0..2)
                        .map(|j| (1.0 - t) * x0.at(i, j) + t * x1.at(i, j))
                        .collect(),
                )?;
                let a = net.velocity(&store, &xt, t)?;
                let b = exact.velocity(&xt, t)?;
                sq += a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(p, q)| (p - q).powi(2))
                    .sum::<f64>();
            }
            Some((sq / (2 * n) as f64).sqrt())
        }
        FlowTarget::Mixture { .. } => None,
    };

    Ok(FlowReport {
        seed: rng.seed(),
        rng: Rng::ALGORITHM.into(),
        steps: cfg.steps,
        euler_steps: cfg.euler_steps,
        loss_curve,
        final_loss,
        energy_distance: energy,
        generated_mean,
        generated_cov,
        target_mean: cfg.target.mean(),
        analytic_field_rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_differ() {
        let mut rng = Rng::seeded(1);
        let speed = |fam| {
            let mut r = rng.fork(fam as u64);
            (0..50)
                .map(|_| {
                    let f = synth_pose(fam, &mut r).unwrap().feature;
                    f[10].abs().max(f[11].abs())
                })
                .sum::<f64>()
                / 50.0
        };
        assert!(speed(PoseFamily::Dynamic) > 3.0 * speed(PoseFamily::Positional));
        let f = synth_pose(PoseFamily::Postural, &mut rng).unwrap().feature;
        assert_eq!(f.len(), POSE_FEATURE_DIM);
    }

    #[test]
    fn identical_views_retrieve_perfectly() {
        let cfg = PoseDemoConfig {
            identity_views: true,
            shared_encoder: true,
            steps: 0,
            ..Default::default()
        };
        let r = demo_pose_alignment(&Rng::seeded(3), &cfg).unwrap();
        assert_eq!(r.retrieval_at_1, 1.0);
        assert_eq!(r.loss_curve.len(), 1);
    }

    #[test]
    fn flat_temperature_initial_loss() {
        let cfg = PoseDemoConfig {
            tau: 100.0,
            steps: 0,
            ..Default::default()
        };
        let r = demo_pose_alignment(&Rng::seeded(4), &cfg).unwrap();
        assert!(
            (r.loss_curve[0] - (cfg.batch as f64).ln()).abs() < 1e-3,
            "{}",
            r.loss_curve[0]
        );
    }

    #[test]
    fn config_rejections() {
        let small = PoseDemoConfig {
            train_items: 100,
            held_out_items: 100,
            ..Default::default()
        };
        assert!(matches!(
            demo_pose_alignment(&Rng::seeded(0), &small),
            Err(Error::Config(_))
        ));
        let bad = FlowDemoConfig {
            euler_steps: 0,
            ..Default::default()
        };
        assert!(demo_toy_flow(&Rng::seeded(0), &bad).is_err());
    }

    #[test]
    fn energy_distance_basics() {
        let mut rng = Rng::seeded(8);
        let a = rng.normal_tensor(&[400, 2], 1.0);
        let b = rng.normal_tensor(&[400, 2], 1.0);
        let mut shifted = b.clone();
        for v in shifted.data_mut().iter_mut().step_by(2) {
            *v += 3.0;
        }
        assert!(energy_distance(&a, &b).unwrap().abs() < 0.05);
        assert!(energy_distance(&a, &shifted).unwrap() > 1.0);
    }
}
