//! Invariant suites runnable from the command line.

use std::f64::consts::PI;

use clap::ValueEnum;
use dramakit::dsp::{interaural_maps, rms, stft, wrap_phase, BinauralSignal, WindowFn};
use dramakit::geom::{doppler_shift, geo_pose_feature, ListenerFrame, Trajectory, Vec3, SPEED_OF_SOUND};
use dramakit::kernels::{
    cfg_field, contrastive_pair_loss, conv_apply, fan_layer, rfm_loss, ssm_kernel, ssm_scan, zoh_discretize,
    Activation, CfgWeights, Mat, SsmParams,
};
use dramakit::numerics::{grad_check_many, Rng, Tensor, DEFAULT_STEP};
use dramakit::render::{render_binaural, RenderConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Geom,
    Dsp,
    Render,
    Kernels,
    All,
}

type Check = (&'static str, fn(&mut Rng) -> anyhow::Result<(bool, String)>);

const GEOM: &[Check] = &[
    ("doppler identity", doppler_identity),
    ("median-plane symmetry", median_symmetry),
];
const DSP: &[Check] = &[
    ("ILD gain identity", ild_gain),
    ("IPD of a delayed tone", ipd_delay),
];
const RENDER: &[Check] = &[("frontal source balance", frontal_balance)];
const KERNELS: &[Check] = &[
    ("scan equals convolution", scan_conv),
    ("ZOH spot values", zoh_spot),
    ("CFG identities", cfg_identities),
    ("contrastive analytics", contrastive_values),
    ("kernel gradients", kernel_gradients),
];

/// Runs the suite, printing one line per check; true if all pass.
pub fn run(suite: Suite, seed: u64) -> bool {
    let groups: Vec<&[Check]> = match suite {
        Suite::Geom => vec![GEOM],
        Suite::Dsp => vec![DSP],
        Suite::Render => vec![RENDER],
        Suite::Kernels => vec![KERNELS],
        Suite::All => vec![GEOM, DSP, RENDER, KERNELS],
    };
    let mut rng = Rng::seeded(seed);
    let mut ok = true;
    for (name, check) in groups.into_iter().flatten() {
        let (pass, detail) = check(&mut rng).unwrap_or_else(|e| (false, format!("error: {e:#}")));
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    ok
}

fn doppler_identity(rng: &mut Rng) -> anyhow::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let f = rng.uniform_range(20.0, 20_000.0);
        let v = rng.uniform_range(-300.0, 300.0);
        let fo = doppler_shift(f, v, SPEED_OF_SOUND)?;
        worst = worst.max((fo * (SPEED_OF_SOUND + v) - f * SPEED_OF_SOUND).abs() / (f * SPEED_OF_SOUND));
    }
    Ok((worst < 1e-12, format!("max rel error {worst:.2e}")))
}

fn median_symmetry(rng: &mut Rng) -> anyhow::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let start = Vec3::new(rng.uniform_range(1.0, 5.0), 0.0, rng.uniform_range(-1.0, 1.0));
        let vel = Vec3::new(rng.uniform_range(-5.0, 5.0), 0.0, rng.uniform_range(-1.0, 1.0));
        let traj = Trajectory::linear(start, vel, 0.1, 0.05, ListenerFrame::default())?;
        let f = geo_pose_feature(&traj, 0.05)?;
        worst = worst.max((f.v_rad_l - f.v_rad_r).abs());
    }
    Ok((worst < 1e-12, format!("max |v_rad_l - v_rad_r| {worst:.2e}")))
}

fn ild_gain(rng: &mut Rng) -> anyhow::Result<(bool, String)> {
    let left: Vec<f64> = (0..4096).map(|_| rng.normal()).collect();
    let right: Vec<f64> = left.iter().map(|v| 10.0 * v).collect();
    let l = stft(&left, 1024, 256, WindowFn::Hann, 48_000.0)?;
    let r = stft(&right, 1024, 256, WindowFn::Hann, 48_000.0)?;
    let maps = interaural_maps(&l, &r)?;
    let ild = maps.ild.iter().map(|v| (v - 20.0).abs()).fold(0.0, f64::max);
    let ipd = maps.ipd.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok((
        ild < 1e-6 && ipd < 1e-9,
        format!("max |ILD-20| {ild:.2e}, max |IPD| {ipd:.2e}"),
    ))
}

fn ipd_delay(_: &mut Rng) -> anyhow::Result<(bool, String)> {
    let (n, k, d) = (1024usize, 37usize, 5usize);
    let tone = |shift: usize| -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * k as f64 * (i as f64 - shift as f64) / n as f64).cos())
            .collect()
    };
    let l = stft(&tone(0), n, n, WindowFn::Rectangular, 48_000.0)?;
    let r = stft(&tone(d), n, n, WindowFn::Rectangular, 48_000.0)?;
    let maps = interaural_maps(&l, &r)?;
    let expected = wrap_phase(-2.0 * PI * (k * d) as f64 / n as f64);
    let err = wrap_phase(maps.ipd_at(0, k) - expected).abs();
    Ok((err < 1e-6, format!("IPD error {err:.2e} rad")))
}

fn frontal_balance(_: &mut Rng) -> anyhow::Result<(bool, String)> {
    let sr = 48_000u32;
    let mono: Vec<f64> = (0..sr as usize / 2)
        .map(|i| (2.0 * PI * 440.0 * i as f64 / sr as f64).sin())
        .collect();
    let traj = Trajectory::stationary(Vec3::new(2.0, 0.0, 0.0), 1.0, ListenerFrame::default())?;
    let out = render_binaural(&mono, sr, &traj, &RenderConfig::default())?;
    let sig: &BinauralSignal = &out.signal;
    let (l, r) = (rms(sig.left()), rms(sig.right()));
    let rel = (l - r).abs() / l.max(r);
    Ok((rel < 1e-12, format!("left/right RMS mismatch {rel:.2e}")))
}

fn random_ssm(rng: &mut Rng) -> anyhow::Result<SsmParams> {
    let n = 1 + rng.below(8);
    let mut a = rng.normal_tensor(&[n, n], 0.3 / (n as f64).sqrt()).into_data();
    for i in 0..n {
        a[i * n + i] -= 0.5;
    }
    Ok(SsmParams::new(
        Mat::new(n, a)?,
        rng.normal_tensor(&[n], 1.0).into_data(),
        rng.normal_tensor(&[n], 1.0).into_data(),
        rng.uniform_range(0.01, 1.0),
    )?)
}

fn scan_conv(rng: &mut Rng) -> anyhow::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = zoh_discretize(&random_ssm(rng)?)?;
        let m = 1 + rng.below(64);
        let x: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let y1 = ssm_scan(&d, &x);
        let y2 = conv_apply(&ssm_kernel(&d, m), &x);
        worst = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b).abs())
            .fold(worst, f64::max);
    }
    Ok((worst < 1e-10, format!("max abs diff {worst:.2e}")))
}

fn zoh_spot(_: &mut Rng) -> anyhow::Result<(bool, String)> {
    let d = zoh_discretize(&SsmParams::new(
        Mat::new(1, vec![-1.0])?,
        vec![1.0],
        vec![1.0],
        2f64.ln(),
    )?)?;
    let e1 = (d.a_bar.get(0, 0) - 0.5).abs().max((d.b_bar[0] - 0.5).abs());
    let z = zoh_discretize(&SsmParams::new(
        Mat::new(1, vec![0.0])?,
        vec![2.0],
        vec![1.0],
        0.3,
    )?)?;
    let e2 = (z.b_bar[0] - 0.6).abs();
    Ok((e1 < 1e-12 && e2 < 1e-12, format!("errors {e1:.2e}, {e2:.2e}")))
}

fn cfg_identities(rng: &mut Rng) -> anyhow::Result<(bool, String)> {
    let v_a = rng.normal_tensor(&[8], 1.0);
    let v_l = rng.normal_tensor(&[8], 1.0);
    let v_n = rng.normal_tensor(&[8], 1.0);
    let same = cfg_field(&v_a, &v_l, &v_n, CfgWeights::new(1.0, 1.0)?)? == v_a;
    let mut fixed = true;
    for _ in 0..100 {
        let w = CfgWeights::new(rng.uniform_range(-2.0, 8.0), rng.uniform_range(-1.0, 2.0))?;
        fixed &= cfg_field(&v_a, &v_a, &v_a, w)? == v_a;
    }
    Ok((same && fixed, format!("identity {same}, fixed point {fixed}")))
}

fn contrastive_values(_: &mut Rng) -> anyhow::Result<(bool, String)> {
    let tape = dramakit::numerics::Tape::new();
    let one = tape.leaf(Tensor::from_rows(&[vec![1.0, 2.0]])?);
    let l1 = contrastive_pair_loss(one, one, 1.0)?.item();
    let eye = tape.leaf(Tensor::eye(2));
    let l2 = contrastive_pair_loss(eye, eye, 1.0)?.item();
    Ok((
        l1 == 0.0 && (l2 - 0.3133).abs() < 1e-4,
        format!("N=1 {l1}, N=2 {l2:.6}"),
    ))
}

fn kernel_gradients(rng: &mut Rng) -> anyhow::Result<(bool, String)> {
    let fan = grad_check_many(
        |_, v| {
            Ok(fan_layer(v[0], v[1], v[2], v[3], Activation::Gelu)?
                .square()
                .mean())
        },
        &[
            rng.normal_tensor(&[3, 4], 1.0),
            rng.normal_tensor(&[4, 3], 0.5),
            rng.normal_tensor(&[4, 2], 0.5),
            rng.normal_tensor(&[2], 0.5),
        ],
        DEFAULT_STEP,
    )?;
    let rfm = grad_check_many(
        |_, v| rfm_loss(v[0], v[1], v[2]),
        &[
            rng.normal_tensor(&[4, 2], 1.0),
            rng.normal_tensor(&[4, 2], 1.0),
            rng.normal_tensor(&[4, 2], 1.0),
        ],
        DEFAULT_STEP,
    )?;
    let nce = grad_check_many(
        |_, v| contrastive_pair_loss(v[0], v[1], 0.5),
        &[rng.normal_tensor(&[4, 3], 1.0), rng.normal_tensor(&[4, 3], 1.0)],
        DEFAULT_STEP,
    )?;
    let worst = fan.max_rel_error.max(rfm.max_rel_error).max(nce.max_rel_error);
    Ok((worst < 1e-6, format!("max rel error {worst:.2e}")))
}
