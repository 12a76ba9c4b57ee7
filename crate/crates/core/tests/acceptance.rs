//! Acceptance criteria 1–10. Runs as a plain binary so each criterion prints
//! exactly one PASS/FAIL line; the process fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use dct_snn::config::{RunConfig, Settings};
use dct_snn::data::{load_dataset, parse_cifar, Dataset, DatasetFormat, Image, Split};
use dct_snn::encoder::{
    normalized_planes, spike_generate, zigzag_order, EncodedStream, FrequencySchedule,
    InputEncoder, Normalization, SpikeGeneratorState,
};
use dct_snn::energy::{ann_ops, LayerOps, OpsReport};
use dct_snn::rng::substream;
use dct_snn::snn::kernels::{conv_forward, linear_forward};
use dct_snn::snn::{
    lif_step, Architecture, ConvSpec, ForwardOptions, LayerSpec, Network, Record, SnnModel,
};
use dct_snn::train::{
    balance_thresholds, evaluate_ann, evaluate_snn, snn_backward, train_ann, train_snn,
    SpikeSource, SurrogateParams, TrainConfig,
};
use dct_snn::transforms::{
    build_transform, dct_matrix_1d, dct_matrix_2d, forward_block_transform, orthonormality_error,
    random_orthonormal_matrix, BlockBasis, BlockSpec, TransformKind, TransformMatrix,
};

// Tolerances and budgets, as stated by the criteria.
const RECON_TOL: f64 = 1e-9;
const ORTHO_TOL: f64 = 1e-10;
const CONSERVATION_REL_TOL: f64 = 1e-9;
const TRACE_TOL: f64 = 1e-12;
const GRAD_REL_TOL: f64 = 1e-5;
const ANN_MIN_ACC: f64 = 0.97;
const CONVERSION_MAX_DROP: f64 = 0.05;
const POISSON_MARGIN: f64 = 0.01;
const SWEEP_ALLOWANCE: f64 = 0.005;
const ORDERING_ALLOWANCE: f64 = 0.01;
const FINE_TUNE_EPOCHS: usize = 2;

const DIGITS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/digits");
const NATURAL: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/data/natural/test_batch.bin"
);

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(
        elapsed < limit,
        format!(
            "{detail}; {:.2} s of {:.0} s budget",
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        ),
    )
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

/// Single-block channel for the block transform helpers.
fn block_channel(vals: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(4, 4, vals)
}

fn random_block(rng: &mut impl Rng) -> Vec<f64> {
    (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn orthonormal_kinds(seed: u64) -> Vec<TransformMatrix> {
    let mut rng = substream(seed, "acceptance-pca", 0);
    let samples: Vec<Vec<f64>> = (0..500).map(|_| random_block(&mut rng)).collect();
    vec![
        dct_matrix_1d(4).unwrap(),
        build_transform(TransformKind::Pca, 4, seed, Some(&samples)).unwrap(),
        random_orthonormal_matrix(16, seed).unwrap(),
    ]
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let spec = BlockSpec::tiled(4).unwrap();
    let schedule = FrequencySchedule::full_cycles(4, 1).unwrap();
    let mut rng = substream(1, "acceptance-blocks", 0);
    let mut worst = 0.0f64;
    for t in orthonormal_kinds(1) {
        let basis = BlockBasis::new(&t, 4).unwrap();
        for _ in 0..200 {
            let vals = random_block(&mut rng);
            let grid = forward_block_transform(&block_channel(&vals), &spec, &t).unwrap();
            let stream = EncodedStream::new(&[grid], &basis, &schedule).unwrap();
            let mut sum = [0.0f64; 16];
            for step in 0..stream.timesteps() {
                for (s, c) in sum.iter_mut().zip(stream.contribution(step).unwrap()) {
                    *s += c;
                }
            }
            for (s, v) in sum.iter().zip(&vals) {
                worst = worst.max((s - v).abs());
            }
        }
    }
    let ok = worst <= RECON_TOL;
    within(
        t0.elapsed(),
        secs(1),
        format!("max |X^(16) - X| = {worst:.2e} (tol {RECON_TOL:.0e}) over 3 kinds x 200 blocks"),
    )
    .and_then(|d| check(ok, d))
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for n in [2, 4, 8] {
        let e1 = orthonormality_error(dct_matrix_1d(n).unwrap().entries());
        let e2 = orthonormality_error(dct_matrix_2d(n).unwrap().entries());
        worst = worst.max(e1).max(e2);
        parts.push(format!("dct{n} {:.1e}", e1.max(e2)));
    }
    for t in orthonormal_kinds(2).into_iter().skip(1) {
        let e = orthonormality_error(t.entries());
        worst = worst.max(e);
        parts.push(format!("{} {e:.1e}", t.kind().name()));
    }
    let ok = worst <= ORTHO_TOL;
    within(
        t0.elapsed(),
        secs(1),
        format!(
            "max |T'T - I| = {worst:.2e} (tol {ORTHO_TOL:.0e}): {}",
            parts.join(", ")
        ),
    )
    .and_then(|d| check(ok, d))
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut rng = substream(3, "acceptance-conservation", 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let steps = rng.random_range(1..64);
        let positions = rng.random_range(1..32);
        let scale: f64 = rng.random_range(0.01..10.0);
        let maps: Vec<Vec<f64>> = (0..steps)
            .map(|_| {
                (0..positions)
                    .map(|_| scale * rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let theta_pos: f64 = rng.random_range(0.01..3.0);
        let theta_neg: f64 = -rng.random_range(0.01..3.0);
        let stream = EncodedStream::from_maps((1, 1, positions), maps.clone()).unwrap();
        let mut state = SpikeGeneratorState::new(positions, theta_neg, theta_pos).unwrap();
        let (train, residual) = spike_generate(&stream, &mut state).unwrap();
        for p in 0..positions {
            let (mut np, mut nn) = (0.0, 0.0);
            for t in 0..steps {
                match train.step(t)[p] {
                    1 => np += 1.0,
                    -1 => nn += 1.0,
                    _ => {}
                }
            }
            let total: f64 = maps.iter().map(|m| m[p]).sum();
            let scale: f64 = maps.iter().map(|m| m[p].abs()).sum::<f64>().max(1e-300);
            let lhs = theta_pos * np + theta_neg * nn + residual[p];
            worst = worst.max((lhs - total).abs() / scale);
        }
    }
    let ok = worst <= CONSERVATION_REL_TOL;
    within(
        t0.elapsed(),
        secs(5),
        format!(
            "max relative imbalance {worst:.2e} (tol {CONSERVATION_REL_TOL:.0e}) over 1000 streams"
        ),
    )
    .and_then(|d| check(ok, d))
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();

    // Generator: constant 0.4 per step, θ⁺ = 1.
    let mut g = SpikeGeneratorState::new(1, -1.0, 1.0).unwrap();
    let expect = [(0.4, 0), (0.8, 0), (0.2, 1), (0.6, 0), (0.0, 1)];
    for (t, &(m, s)) in expect.iter().enumerate() {
        let mut out = [0i8];
        g.step(&[0.4], &mut out);
        worst = worst.max((g.membrane[0] - m).abs());
        if out[0] != s {
            failures.push(format!("generator +0.4 step {}", t + 1));
        }
    }
    // Generator: constant −0.5 per step, θ⁻ = −0.6.
    let mut g = SpikeGeneratorState::new(1, -0.6, 1.0).unwrap();
    let expect = [(-0.5, 0), (-0.4, -1), (-0.3, -1)];
    for (t, &(m, s)) in expect.iter().enumerate() {
        let mut out = [0i8];
        g.step(&[-0.5], &mut out);
        worst = worst.max((g.membrane[0] - m).abs());
        if out[0] != s {
            failures.push(format!("generator -0.5 step {}", t + 1));
        }
    }
    // LIF: pure decay from 1.0.
    let (mut u, mut o) = ([1.0f64], [0.0f64]);
    lif_step(&mut u, &mut o, &[0.0], 1.0, 0.9901).unwrap();
    worst = worst.max((u[0] - 0.9901).abs());
    if o[0] != 0.0 {
        failures.push("lif decay spiked".into());
    }
    // LIF: 2.3 input spikes, then the delayed soft reset.
    let (mut u, mut o) = ([0.0f64], [0.0f64]);
    lif_step(&mut u, &mut o, &[2.3], 1.0, 0.9901).unwrap();
    worst = worst.max((u[0] - 2.3).abs());
    if o[0] != 1.0 {
        failures.push("lif 2.3 did not spike".into());
    }
    let next = 0.7;
    lif_step(&mut u, &mut o, &[next], 1.0, 0.9901).unwrap();
    worst = worst.max((u[0] - (0.9901 * 2.3 - 1.0 + next)).abs());

    let ok = failures.is_empty() && worst <= TRACE_TOL;
    check(
        ok,
        format!(
            "max membrane deviation {worst:.2e} (tol {TRACE_TOL:.0e}) over 4 hand traces{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; spike mismatches: {}", failures.join(", "))
            }
        ),
    )
}

fn cross_entropy(z: &[f64], label: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[label]
}

fn softmax_grad(z: &[f64], label: usize) -> Vec<f32> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter()
        .enumerate()
        .map(|(i, v)| (v / s - f64::from(u8::from(i == label))) as f32)
        .collect()
}

/// `max |g − fd| / max |fd|` over all entries.
fn rel_error(g: &[f32], fd: &[f64]) -> f64 {
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    g.iter()
        .zip(fd)
        .fold(0.0f64, |m, (a, b)| m.max((f64::from(*a) - b).abs()))
        / scale
}

/// Output-layer gradient of a spiking network: the recorded hidden spikes
/// do not depend on the output weights, so the loss is smooth in them.
fn output_layer_instance(seed: u64) -> f64 {
    let mut rng = substream(seed, "acceptance-eq7", 0);
    let (n_in, n_h, classes, steps) = (6, 5, 4, 8);
    let arch = Architecture::parse(
        [n_in, 1, 1],
        &format!("linear:{n_in}:{n_h},linear:{n_h}:{classes}"),
    )
    .unwrap();
    let mut net = Network::zeros(arch);
    for w in net.weights.iter_mut() {
        w.iter_mut()
            .for_each(|v| *v = rng.random_range(-1.0f32..1.0));
    }
    let model = SnnModel::new(net, vec![0.5], 0.9901).unwrap();
    let data: Vec<i8> = (0..steps * n_in)
        .map(|_| rng.random_range(-1i8..=1))
        .collect();
    let input = dct_snn::encoder::SpikeTrain::from_data(steps, (n_in, 1, 1), data).unwrap();
    let label = rng.random_range(0..classes);
    let r = model
        .forward(
            &input,
            &ForwardOptions {
                dropout_masks: None,
                record: true,
            },
        )
        .unwrap();
    let rec = r.record.as_ref().unwrap();
    let a: Vec<f64> = rec.inputs[1].iter().map(|&v| f64::from(v)).collect();
    let w2: Vec<f64> = model.network.weights[1]
        .iter()
        .map(|&v| f64::from(v))
        .collect();
    let loss = |w: &[f64]| {
        let z: Vec<f64> = (0..classes)
            .map(|c| {
                (0..steps)
                    .map(|t| {
                        (0..n_h)
                            .map(|j| w[c * n_h + j] * a[t * n_h + j])
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        (cross_entropy(&z, label), z)
    };
    let (_, z) = loss(&w2);
    let mut grads = vec![
        vec![0.0f32; model.network.weights[0].len()],
        vec![0.0f32; w2.len()],
    ];
    snn_backward(
        &model,
        Some(rec),
        None,
        &softmax_grad(&z, label),
        &SurrogateParams::default(),
        &mut grads,
    )
    .unwrap();
    let eps = 1e-6;
    let fd: Vec<f64> = (0..w2.len())
        .map(|i| {
            let mut p = w2.clone();
            p[i] += eps;
            let mut m = w2.clone();
            m[i] -= eps;
            (loss(&p).0 - loss(&m).0) / (2.0 * eps)
        })
        .collect();
    rel_error(&grads[1], &fd)
}

/// Antiderivative of the surrogate: a spike function whose exact derivative
/// is what the backward pass uses.
fn soft_spike(u: f64, v: f64, gamma: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u <= v {
        gamma * u * u / (2.0 * v)
    } else if u < 2.0 * v {
        let d = u - v;
        gamma * (v / 2.0 + d - d * d / (2.0 * v))
    } else {
        gamma * v
    }
}

/// One LIF layer unrolled through time with the smooth spike function; the
/// library's reverse pass is fed this trajectory and compared to central
/// differences of the f64 loss.
fn hidden_layer_instance(seed: u64) -> f64 {
    let mut rng = substream(seed, "acceptance-bptt", 0);
    let (n_in, n_h, classes, steps) = (5, 4, 3, 10);
    let (v, leak, gamma) = (0.6f64, 0.9901f64, 0.3f64);
    let w1: Vec<f64> = (0..n_h * n_in)
        .map(|_| f64::from(rng.random_range(-1.0f32..1.0)))
        .collect();
    let w2: Vec<f64> = (0..classes * n_h)
        .map(|_| f64::from(rng.random_range(-1.0f32..1.0)))
        .collect();
    let x: Vec<f64> = (0..steps * n_in)
        .map(|_| f64::from(rng.random_range(-1i8..=1)))
        .collect();
    let label = rng.random_range(0..classes);
    let run = |w1: &[f64]| {
        let mut u = vec![0.0; n_h];
        let mut o = vec![0.0; n_h];
        let mut us = Vec::new();
        let mut os = Vec::new();
        let mut z = vec![0.0; classes];
        for t in 0..steps {
            for j in 0..n_h {
                let i: f64 = (0..n_in).map(|k| w1[j * n_in + k] * x[t * n_in + k]).sum();
                u[j] = leak * u[j] + i - v * o[j];
            }
            for j in 0..n_h {
                o[j] = soft_spike(u[j], v, gamma);
            }
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += (0..n_h).map(|j| w2[c * n_h + j] * o[j]).sum::<f64>();
            }
            us.extend_from_slice(&u);
            os.extend_from_slice(&o);
        }
        (cross_entropy(&z, label), z, us, os)
    };
    let (_, z, us, os) = run(&w1);
    let arch = Architecture::parse(
        [n_in, 1, 1],
        &format!("linear:{n_in}:{n_h},linear:{n_h}:{classes}"),
    )
    .unwrap();
    let mut net = Network::zeros(arch);
    net.weights[0] = w1.iter().map(|&w| w as f32).collect();
    net.weights[1] = w2.iter().map(|&w| w as f32).collect();
    let model = SnnModel::new(net, vec![v as f32], leak as f32).unwrap();
    let record = Record {
        timesteps: steps,
        inputs: vec![
            x.iter().map(|&a| a as f32).collect(),
            os.iter().map(|&a| a as f32).collect(),
        ],
        membranes: vec![us.iter().map(|&a| a as f32).collect()],
    };
    let mut grads = vec![vec![0.0f32; w1.len()], vec![0.0f32; w2.len()]];
    snn_backward(
        &model,
        Some(&record),
        None,
        &softmax_grad(&z, label),
        &SurrogateParams::new(gamma).unwrap(),
        &mut grads,
    )
    .unwrap();
    let eps = 1e-6;
    let fd: Vec<f64> = (0..w1.len())
        .map(|i| {
            let mut p = w1.clone();
            p[i] += eps;
            let mut m = w1.clone();
            m[i] -= eps;
            (run(&p).0 - run(&m).0) / (2.0 * eps)
        })
        .collect();
    rel_error(&grads[0], &fd)
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let out_worst = (0..100).map(output_layer_instance).fold(0.0, f64::max);
    let hid_worst = (0..100).map(hidden_layer_instance).fold(0.0, f64::max);
    let ok = out_worst <= GRAD_REL_TOL && hid_worst <= GRAD_REL_TOL;
    within(
        t0.elapsed(),
        secs(30),
        format!(
            "worst relative error: output layer {out_worst:.2e}, hidden LIF layer {hid_worst:.2e} (tol {GRAD_REL_TOL:.0e}, 100 instances each)"
        ),
    )
    .and_then(|d| check(ok, d))
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let bytes = std::fs::read(NATURAL).map_err(|e| format!("natural image fixture: {e}"))?;
    let data = parse_cifar(&bytes).map_err(|e| e.to_string())?;
    let t = dct_matrix_1d(4).unwrap();
    let spec = BlockSpec::tiled(4).unwrap();
    let zz = zigzag_order(4);
    let mut energy = [0.0f64; 16];
    let mut blocks = 0usize;
    for img in &data.images {
        let y = &normalized_planes(img, Normalization::Unit).unwrap()[0];
        let grid = forward_block_transform(y, &spec, &t).unwrap();
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let b = grid.block(r, c);
                for (k, &(v, u)) in zz.iter().enumerate() {
                    energy[k] += b[v * 4 + u] * b[v * 4 + u];
                }
                blocks += 1;
            }
        }
    }
    energy.iter_mut().for_each(|e| *e /= blocks as f64);
    let dc_largest = energy[1..].iter().all(|&e| e < energy[0]);
    let first4 = energy[..4].iter().sum::<f64>() / 4.0;
    let last12 = energy[4..].iter().sum::<f64>() / 12.0;
    let ok = blocks >= 1000 && dc_largest && first4 > last12;
    within(
        t0.elapsed(),
        secs(10),
        format!(
            "{blocks} blocks from {} images: DC {:.4e}, next largest {:.4e}, mean first 4 {first4:.4e} vs last 12 {last12:.4e}",
            data.len(),
            energy[0],
            energy[1..].iter().cloned().fold(0.0, f64::max)
        ),
    )
    .and_then(|d| check(ok, d))
}

/// Results of the desk-scale hybrid pipeline, shared by criteria 7, 8, 10.
struct Desk {
    ann_acc: f64,
    snn48_acc: f64,
    dct32_acc: f64,
    poisson32_acc: f64,
    sweep: Vec<(usize, f64)>,
    two_cycle_acc: f64,
    kinds: Vec<(TransformKind, f64)>,
    elapsed: Duration,
}

fn desk_config() -> RunConfig {
    let mut flags = Settings::new();
    flags.insert("general.profile".into(), "desk".into());
    RunConfig::resolve(None, &flags).unwrap()
}

fn load_digits() -> (Dataset, Dataset) {
    let dir = Path::new(DIGITS);
    (
        load_dataset(dir, DatasetFormat::Idx, Split::Train).unwrap(),
        load_dataset(dir, DatasetFormat::Idx, Split::Test).unwrap(),
    )
}

fn analog(enc: &InputEncoder, d: &Dataset) -> Vec<Vec<f32>> {
    d.images
        .iter()
        .map(|i| enc.analog_input(i).unwrap())
        .collect()
}

fn pretrain(
    enc: &InputEncoder,
    train: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
) -> (Network, f64) {
    let (c, h, w) = enc.input_shape();
    let arch = Architecture::preset(&cfg.arch, [c, h, w], 10, 1).unwrap();
    let mut net = Network::xavier(arch, cfg.seed);
    let mut opt = cfg.ann.optimizer();
    let (xs, xt) = (analog(enc, train), analog(enc, test));
    train_ann(
        &mut net,
        &mut opt,
        (&xs, &train.labels),
        (&xt, &test.labels),
        &cfg.ann,
        0,
        false,
        &mut |_, _, _| Ok(()),
    )
    .unwrap();
    let acc = evaluate_ann(&net, &xt, &test.labels).unwrap();
    (net, acc)
}

fn convert(net: &Network, enc: &mut InputEncoder, calib: &[&Image], cfg: &RunConfig) -> SnnModel {
    if enc.kind() != dct_snn::encoder::EncoderKind::Poisson {
        let one_cycle = FrequencySchedule::full_cycles(4, cfg.calib_cycles).unwrap();
        enc.calibrate(calib, &one_cycle, cfg.generator_percentiles)
            .unwrap();
    }
    let s48 = FrequencySchedule::cyclic(4, 16, 48).unwrap();
    let trains: Vec<_> = calib
        .iter()
        .enumerate()
        .map(|(i, img)| enc.encode(img, &s48, i as u64).unwrap())
        .collect();
    let th = balance_thresholds(net, &trains, cfg.threshold_percentile, cfg.leak as f32).unwrap();
    SnnModel::new(net.clone(), th, cfg.leak as f32).unwrap()
}

fn accuracy(
    model: &SnnModel,
    enc: &InputEncoder,
    schedule: FrequencySchedule,
    test: &Dataset,
) -> f64 {
    evaluate_snn(
        model,
        &SpikeSource::new(enc, schedule, &test.images),
        &test.labels,
    )
    .unwrap()
    .accuracy
}

fn fine_tune(
    model: &mut SnnModel,
    enc: &InputEncoder,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    surrogate: &SurrogateParams,
) {
    let s32 = FrequencySchedule::cyclic(4, 16, 32).unwrap();
    let src = SpikeSource::new(enc, s32.clone(), &train.images);
    let tsrc = SpikeSource::new(enc, s32, &test.images);
    let mut opt = cfg.optimizer();
    train_snn(
        model,
        &mut opt,
        (&src, &train.labels),
        (&tsrc, &test.labels),
        cfg,
        surrogate,
        0,
        false,
        &mut |row, _, _| {
            println!(
                "    fine-tune epoch {}: test acc {:.4}",
                row.epoch, row.test_acc
            );
            Ok(())
        },
    )
    .unwrap();
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let t0 = Instant::now();
        let cfg = desk_config();
        let mut snn_cfg = cfg.snn.clone();
        snn_cfg.epochs = FINE_TUNE_EPOCHS;
        let (train, test) = load_digits();
        let calib: Vec<&Image> = train.images.iter().take(cfg.calib_size).collect();
        let spec = cfg.block_spec().unwrap();

        let dct = build_transform(TransformKind::Dct, 4, cfg.seed, None).unwrap();
        let mut enc = InputEncoder::with_transform(dct, spec, (1, 28, 28))
            .unwrap()
            .with_normalization(cfg.normalization);
        let (ann, ann_acc) = pretrain(&enc, &train, &test, &cfg);
        println!("    ANN on block-tiled input: {ann_acc:.4}");
        let mut model = convert(&ann, &mut enc, &calib, &cfg);
        let snn48_acc = accuracy(
            &model,
            &enc,
            FrequencySchedule::cyclic(4, 16, 48).unwrap(),
            &test,
        );
        println!("    converted DCT-SNN, T = 48: {snn48_acc:.4}");
        fine_tune(&mut model, &enc, &train, &test, &snn_cfg, &cfg.surrogate);
        let dct32_acc = accuracy(
            &model,
            &enc,
            FrequencySchedule::cyclic(4, 16, 32).unwrap(),
            &test,
        );

        let sweep = [4, 8, 12, 16]
            .iter()
            .map(|&k| {
                let s = FrequencySchedule::truncated_second_cycle(4, k).unwrap();
                (k, accuracy(&model, &enc, s, &test))
            })
            .collect();
        let two_cycle_acc = accuracy(
            &model,
            &enc,
            FrequencySchedule::full_cycles(4, 2).unwrap(),
            &test,
        );

        let mut kinds = Vec::new();
        for kind in [
            TransformKind::Dct,
            TransformKind::Pca,
            TransformKind::RandomOrthonormal,
            TransformKind::Random,
        ] {
            let samples =
                dct_snn::encoder::block_samples(&calib, &spec, cfg.normalization).unwrap();
            let t = build_transform(kind, 4, cfg.seed, Some(&samples)).unwrap();
            let mut e = InputEncoder::with_transform(t, spec, (1, 28, 28))
                .unwrap()
                .with_normalization(cfg.normalization);
            let m = convert(&ann, &mut e, &calib, &cfg);
            let acc = accuracy(&m, &e, FrequencySchedule::cyclic(4, 16, 48).unwrap(), &test);
            println!("    {} conversion, T = 48: {acc:.4}", kind.name());
            kinds.push((kind, acc));
        }

        let mut penc = InputEncoder::poisson((1, 28, 28), 4, cfg.seed).unwrap();
        let (pann, pann_acc) = pretrain(&penc, &train, &test, &cfg);
        println!("    ANN on intensities: {pann_acc:.4}");
        let mut pmodel = convert(&pann, &mut penc, &calib, &cfg);
        fine_tune(&mut pmodel, &penc, &train, &test, &snn_cfg, &cfg.surrogate);
        let poisson32_acc = accuracy(
            &pmodel,
            &penc,
            FrequencySchedule::cyclic(4, 16, 32).unwrap(),
            &test,
        );

        Desk {
            ann_acc,
            snn48_acc,
            dct32_acc,
            poisson32_acc,
            sweep,
            two_cycle_acc,
            kinds,
            elapsed: t0.elapsed(),
        }
    })
}

fn criterion_7() -> Outcome {
    let d = desk();
    let ok = d.ann_acc >= ANN_MIN_ACC
        && d.ann_acc - d.snn48_acc <= CONVERSION_MAX_DROP
        && d.dct32_acc >= d.poisson32_acc - POISSON_MARGIN;
    within(
        d.elapsed,
        secs(30 * 60),
        format!(
            "ANN {:.4} (>= {ANN_MIN_ACC}); SNN T=48 {:.4} (drop {:.4} <= {CONVERSION_MAX_DROP}); after {FINE_TUNE_EPOCHS} fine-tune epochs at T=32: DCT {:.4} vs Poisson {:.4} (margin {POISSON_MARGIN})",
            d.ann_acc,
            d.snn48_acc,
            d.ann_acc - d.snn48_acc,
            d.dct32_acc,
            d.poisson32_acc
        ),
    )
    .and_then(|s| check(ok, s))
}

fn criterion_8() -> Outcome {
    let d = desk();
    let monotone = d
        .sweep
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - SWEEP_ALLOWANCE);
    let last = d.sweep.last().unwrap().1;
    let ok = monotone && last == d.two_cycle_acc;
    let rows: Vec<String> = d
        .sweep
        .iter()
        .map(|(k, a)| format!("k={k} {a:.4}"))
        .collect();
    check(
        ok,
        format!(
            "{} (allowance {SWEEP_ALLOWANCE}); full two cycles {:.4}",
            rows.join(", "),
            d.two_cycle_acc
        ),
    )
}

fn criterion_9() -> Outcome {
    // Two-layer report with hand-computed energies.
    let r = OpsReport::new(
        vec![
            LayerOps::new("a", 1000, 1.0).unwrap(),
            LayerOps::new("b", 500, 2.0).unwrap(),
        ],
        100,
    );
    let hand = (1500.0 * 4.6) / (100.0 * 4.6 + (1000.0 + 1000.0) * 0.9);
    let unit = OpsReport::new(
        vec![
            LayerOps::new("a", 1000, 1.0).unwrap(),
            LayerOps::new("b", 0, 3.0).unwrap(),
        ],
        0,
    );
    let alpha_ok = r.alpha().unwrap() == hand && unit.alpha().unwrap() == 4600.0 / 900.0;

    // Brute-force multiply counts of the forward kernels.
    let shapes: [(LayerSpec, [usize; 3]); 5] = [
        (
            LayerSpec::Conv {
                c_in: 1,
                c_out: 2,
                kernel: 3,
                stride: 1,
                pad: 1,
            },
            [1, 5, 5],
        ),
        (
            LayerSpec::Conv {
                c_in: 3,
                c_out: 4,
                kernel: 3,
                stride: 2,
                pad: 0,
            },
            [3, 7, 6],
        ),
        (
            LayerSpec::Conv {
                c_in: 2,
                c_out: 3,
                kernel: 1,
                stride: 1,
                pad: 0,
            },
            [2, 4, 4],
        ),
        (LayerSpec::Linear { n_in: 17, n_out: 5 }, [17, 1, 1]),
        (LayerSpec::Linear { n_in: 3, n_out: 11 }, [3, 1, 1]),
    ];
    let mut mismatches = Vec::new();
    for (layer, input) in &shapes {
        let formula = ann_ops(layer, *input).unwrap();
        let (brute, kernel) = count_multiplies(layer, *input);
        if formula != brute || formula != kernel {
            mismatches.push(format!(
                "{layer}: formula {formula}, loop {brute}, kernel {kernel}"
            ));
        }
    }
    check(
        alpha_ok && mismatches.is_empty(),
        format!(
            "alpha {:.6} vs hand {hand:.6}, unit-rate alpha {:.6}; ann_ops agrees with loop counters on {} of 5 shapes{}",
            r.alpha().unwrap(),
            unit.alpha().unwrap(),
            5 - mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(": {}", mismatches.join("; ")) }
        ),
    )
}

/// Multiplies executed by a direct loop nest, and by the library kernel's
/// instrumented counter.
fn count_multiplies(layer: &LayerSpec, input: [usize; 3]) -> (u64, u64) {
    let [c, h, w] = input;
    match *layer {
        LayerSpec::Conv {
            c_in,
            c_out,
            kernel,
            stride,
            pad,
        } => {
            let spec = ConvSpec {
                c_in,
                c_out,
                kernel,
                stride,
                pad,
                in_h: h,
                in_w: w,
            };
            let (oh, ow) = spec.out_hw();
            let mut n = 0u64;
            let mut acc = 0.0f32;
            for _co in 0..c_out {
                for y in 0..oh {
                    for x in 0..ow {
                        for _ci in 0..c_in {
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    let _ = (y * stride + ky, x * stride + kx);
                                    acc += 1.0 * 1.0;
                                    n += 1;
                                }
                            }
                        }
                    }
                }
            }
            assert!(acc > 0.0);
            let x = vec![1.0f32; c * h * w];
            let wts = vec![1.0f32; c_out * c_in * kernel * kernel];
            let mut out = vec![0.0f32; c_out * oh * ow];
            let mut sink = 0u64;
            conv_forward(&x, &spec, &wts, &mut out, &mut sink);
            (n, sink)
        }
        LayerSpec::Linear { n_in, n_out } => {
            let mut n = 0u64;
            for _o in 0..n_out {
                for _i in 0..n_in {
                    n += 1;
                }
            }
            let x = vec![1.0f32; n_in];
            let wts = vec![1.0f32; n_in * n_out];
            let mut out = vec![0.0f32; n_out];
            let mut sink = 0u64;
            linear_forward(&x, n_out, &wts, &mut out, &mut sink);
            (n, sink)
        }
        _ => (0, 0),
    }
}

fn criterion_10() -> Outcome {
    let d = desk();
    let acc = |k: TransformKind| d.kinds.iter().find(|(x, _)| *x == k).unwrap().1;
    let (dct, pca) = (acc(TransformKind::Dct), acc(TransformKind::Pca));
    let (ro, rand) = (
        acc(TransformKind::RandomOrthonormal),
        acc(TransformKind::Random),
    );
    let ok = dct >= ro - ORDERING_ALLOWANCE
        && pca >= ro - ORDERING_ALLOWANCE
        && ro >= rand - ORDERING_ALLOWANCE;
    check(
        ok,
        format!(
            "shared ANN, conversion at T=48: dct {dct:.4}, pca {pca:.4}, rand-ortho {ro:.4}, rand {rand:.4} (inversion allowance {ORDERING_ALLOWANCE})"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("reconstruction exactness", criterion_1),
        ("orthonormality", criterion_2),
        ("spike conservation", criterion_3),
        ("LIF trace fidelity", criterion_4),
        ("gradient oracle", criterion_5),
        ("energy compaction", criterion_6),
        ("desk-scale hybrid pipeline", criterion_7),
        ("latency sweep trend", criterion_8),
        ("energy model equivalence", criterion_9),
        ("transform-quality ordering", criterion_10),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| *p == (i + 1).to_string()) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(d) => println!("{id} ({name}): PASS: {d}"),
            Err(d) => {
                failed += 1;
                println!("{id} ({name}): FAIL: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
