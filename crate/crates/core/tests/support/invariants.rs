//! Property checks shared by the `invariants` and `acceptance` targets.
//! Each check runs `CASES` random cases and reports the first failure.

use std::fmt::Debug;
use std::f64::consts::TAU;

use dejam_core::denoiser::{
    adam_step, batchnorm_forward, build_input_tensor, load_model, network_forward, save_model,
    AdamConfig, AdamState, BatchNormParams, BnMode, Gradients, NetworkConfig, NetworkWeights,
    Tensor3, TrainedModel,
};
use dejam_core::detector::{mfb, rdd_detect, run_error, DetectionStatistics};
use dejam_core::harness::{evaluate, sweep, write_sweep_csv, SweepSpec, SweepVariable};
use dejam_core::rng::{derive_rng, Purpose};
use dejam_core::sigmodel::{
    clean_mixture, draw_active_set, draw_channel, draw_jammer, generate_dataset,
    generate_scenario, hadamard_codes, precode_symbol, read_dataset, write_dataset,
    ChannelRealization, JammerConfig, ScenarioConfig, SymbolAlphabet,
};
use dejam_core::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseResult, TestRunner};
use rand::Rng;
use rand_distr::StandardNormal;

pub const CASES: u32 = 128;

pub type Check = fn() -> Result<(), String>;

/// The invariants named by the acceptance criteria, in report order.
pub const CRITERION_SUITES: &[(&str, Check)] = &[
    ("precoding equivalence", precoding_equivalence),
    ("jammer constant modulus", jammer_constant_modulus),
    ("code orthonormality", code_orthonormality),
    ("BN normalization", bn_training_normalizes),
    ("ADAM zero-grad no-op", adam_zero_gradient_is_noop),
    ("RDD positive-scale invariance", rdd_positive_scale_invariance),
    ("QPSK quadrant equivalence", qpsk_quadrant_equivalence),
    ("model serialization round-trip", model_round_trip),
    ("dataset serialization round-trip", dataset_round_trip),
];

fn run<S>(strategy: S, test: impl Fn(S::Value) -> TestCaseResult) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn scenario(log_s: u32, k: usize) -> ScenarioConfig {
    let s = 1usize << log_s;
    ScenarioConfig {
        spreading_factor: s,
        num_users: s,
        num_active: k.min(s),
        num_segments: (s * 3 / 4).max(1),
        ..Default::default()
    }
}

fn complex(bound: f64) -> impl Strategy<Value = Complex64> {
    (-bound..bound, -bound..bound).prop_map(|(re, im)| Complex64::new(re, im))
}

fn net(depth: usize, filters: usize) -> NetworkConfig {
    NetworkConfig {
        depth,
        hidden_filters: filters,
        ..Default::default()
    }
}

/// Freshly initialized weights with randomized BN parameters and statistics.
fn weights(cfg: &NetworkConfig, seed: u64) -> NetworkWeights<f32> {
    let mut rng = derive_rng(seed, Purpose::Init, 0);
    let mut w = NetworkWeights::init(cfg, &mut rng);
    for bn in &mut w.bn {
        for v in bn.gamma.iter_mut().chain(bn.beta.iter_mut()).chain(bn.running_mean.iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in bn.running_var.iter_mut() {
            *v = rng.random_range(0.1..3.0);
        }
    }
    w
}

// signal model

pub fn precoding_equivalence() -> Result<(), String> {
    run((1u32..8, 0usize..6, any::<u64>()), |(log_s, k, seed)| {
        let cfg = scenario(log_s, k);
        let codes = hadamard_codes(cfg.spreading_factor).unwrap();
        let mut rng = derive_rng(seed, Purpose::Dataset, 0);
        let sc = generate_scenario(&cfg, &codes, &SymbolAlphabet::qpsk(), &mut rng).unwrap();
        let mut via_precoding = vec![Complex64::new(0.0, 0.0); cfg.spreading_factor];
        for (user, b) in sc.active.iter() {
            let h = sc.channel.coefficient(user);
            let x = precode_symbol(b, h).unwrap();
            for (acc, c) in via_precoding.iter_mut().zip(codes.column(user)) {
                *acc += c * h * x;
            }
        }
        for (a, b) in via_precoding.iter().zip(&sc.clean) {
            prop_assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
        Ok(())
    })
}

pub fn jammer_constant_modulus() -> Result<(), String> {
    run(
        (0u32..9, 0.0f64..1.0, 1e-3f64..1e3, any::<u64>()),
        |(log_s, seg_frac, amplitude, seed)| {
            let s = 1usize << log_s;
            let segments = 1 + ((s - 1) as f64 * seg_frac) as usize;
            let cfg = JammerConfig {
                amplitude,
                num_segments: segments,
                enabled: true,
            };
            let z = draw_jammer(&cfg, s, &mut derive_rng(seed, Purpose::Dataset, 1)).unwrap();
            prop_assert_eq!(z.num_segments(), segments);
            for c in &z.chips {
                prop_assert!((c.norm() - amplitude).abs() <= 1e-12 * amplitude);
            }
            Ok(())
        },
    )
}

pub fn code_orthonormality() -> Result<(), String> {
    run(0u32..9, |log_s| {
        let s = 1usize << log_s;
        let codes = hadamard_codes(s).unwrap();
        for i in 0..s {
            for j in 0..s {
                let dot: Complex64 = codes
                    .column(i)
                    .iter()
                    .zip(codes.column(j))
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expect).norm() < 1e-10);
            }
        }
        Ok(())
    })
}

pub fn scenario_determinism() -> Result<(), String> {
    run((1u32..8, 0usize..5, any::<u64>(), any::<u64>()), |(log_s, k, seed, idx)| {
        let cfg = scenario(log_s, k);
        let codes = hadamard_codes(cfg.spreading_factor).unwrap();
        let q = SymbolAlphabet::qpsk();
        let a = generate_scenario(&cfg, &codes, &q, &mut derive_rng(seed, Purpose::Dataset, idx)).unwrap();
        let b = generate_scenario(&cfg, &codes, &q, &mut derive_rng(seed, Purpose::Dataset, idx)).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn received_is_sum_of_parts() -> Result<(), String> {
    run((1u32..8, 0usize..5, any::<u64>()), |(log_s, k, seed)| {
        let cfg = scenario(log_s, k);
        let codes = hadamard_codes(cfg.spreading_factor).unwrap();
        let mut rng = derive_rng(seed, Purpose::Evaluation, 3);
        let sc = generate_scenario(&cfg, &codes, &SymbolAlphabet::qpsk(), &mut rng).unwrap();
        for i in 0..cfg.spreading_factor {
            let sum = sc.clean[i] + sc.jammer.chips[i] + sc.noise[i];
            prop_assert!((sum - sc.received[i]).norm() < 1e-12);
        }
        prop_assert_eq!(sc.active.len(), cfg.num_active);
        prop_assert!(sc.active.indices.windows(2).all(|w| w[0] < w[1]));
        Ok(())
    })
}

pub fn clean_mixture_ignores_channel_phase() -> Result<(), String> {
    run((1u32..7, any::<u64>(), 0.0f64..TAU), |(log_s, seed, shift)| {
        let cfg = scenario(log_s, 3);
        let codes = hadamard_codes(cfg.spreading_factor).unwrap();
        let mut rng = derive_rng(seed, Purpose::Dataset, 7);
        let sc = generate_scenario(&cfg, &codes, &SymbolAlphabet::qpsk(), &mut rng).unwrap();
        let rotated = ChannelRealization {
            magnitudes: sc.channel.magnitudes.clone(),
            phases: sc.channel.phases.iter().map(|p| p + shift).collect(),
        };
        prop_assert_eq!(clean_mixture(&codes, &rotated, &sc.active), sc.clean);
        Ok(())
    })
}

// detector

pub fn rdd_positive_scale_invariance() -> Result<(), String> {
    run(
        (prop::collection::vec(complex(10.0), 1..64), 0.0f64..1.0, 1e-3f64..1e3),
        |(t, k_frac, c)| {
            let q = SymbolAlphabet::qpsk();
            let k = ((t.len() as f64) * k_frac) as usize;
            let scaled: Vec<Complex64> = t.iter().map(|x| x * c).collect();
            let a = rdd_detect(&DetectionStatistics { values: t }, k, &q).unwrap();
            let b = rdd_detect(&DetectionStatistics { values: scaled }, k, &q).unwrap();
            prop_assert_eq!(a.indices, b.indices);
            prop_assert_eq!(a.symbols, b.symbols);
            Ok(())
        },
    )
}

pub fn qpsk_quadrant_equivalence() -> Result<(), String> {
    run((-1e3f64..1e3, -1e3f64..1e3), |(re, im)| {
        prop_assume!(re != 0.0 && im != 0.0);
        let q = SymbolAlphabet::qpsk();
        let p = q.points()[q.nearest(Complex64::new(re, im))];
        prop_assert_eq!(p.re.signum(), re.signum());
        prop_assert_eq!(p.im.signum(), im.signum());
        Ok(())
    })
}

pub fn mfb_linearity() -> Result<(), String> {
    run((0u32..8, complex(10.0), any::<u64>()), |(log_s, a, seed)| {
        let s = 1usize << log_s;
        let codes = hadamard_codes(s).unwrap();
        let mut rng = derive_rng(seed, Purpose::GradCheck, 0);
        let mut draw = || -> Vec<Complex64> {
            (0..s)
                .map(|_| Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
                .collect()
        };
        let (u, v) = (draw(), draw());
        let combo: Vec<Complex64> = u.iter().zip(&v).map(|(x, y)| a * x + y).collect();
        let lhs = mfb(&codes, &combo).unwrap().values;
        let mu = mfb(&codes, &u).unwrap().values;
        let mv = mfb(&codes, &v).unwrap().values;
        for i in 0..s {
            prop_assert!((lhs[i] - (a * mu[i] + mv[i])).norm() < 1e-12);
        }
        Ok(())
    })
}

pub fn orthonormal_clean_exactness() -> Result<(), String> {
    run((0u32..8, 0.0f64..1.0, any::<u64>()), |(log_s, k_frac, seed)| {
        let s = 1usize << log_s;
        let cfg = ScenarioConfig {
            num_active: ((s as f64) * k_frac) as usize,
            num_segments: 1,
            ..scenario(log_s, 0)
        };
        let codes = hadamard_codes(s).unwrap();
        let q = SymbolAlphabet::qpsk();
        let mut rng = derive_rng(seed, Purpose::Evaluation, 0);
        let channel = draw_channel(&cfg, &mut rng);
        let active = draw_active_set(&cfg, &q, &mut rng).unwrap();
        let y = clean_mixture(&codes, &channel, &active);
        let det = rdd_detect(&mfb(&codes, &y).unwrap(), active.len(), &q).unwrap();
        prop_assert!(!run_error(&det, &active));
        Ok(())
    })
}

// denoiser

pub fn bn_training_normalizes() -> Result<(), String> {
    run(
        (2usize..6, 1usize..12, 1usize..5, 0.05f64..50.0, -100.0f64..100.0, any::<u64>()),
        |(batch, rows, ch, scale, offset, seed)| {
            let mut rng = derive_rng(seed, Purpose::GradCheck, 0);
            let x: Vec<Tensor3<f64>> = (0..batch)
                .map(|_| {
                    let data = (0..rows * 2 * ch)
                        .map(|_| offset + scale * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    Tensor3::from_vec(rows, 2, ch, data).unwrap()
                })
                .collect();
            let p = BatchNormParams::identity(ch, 0.9, 1e-5);
            let (_, cache) = batchnorm_forward(&x, &p, BnMode::Training).unwrap();
            for c in 0..ch {
                let vals: Vec<f64> = cache
                    .normalized
                    .iter()
                    .flat_map(|t| t.data().chunks(ch).map(|px| px[c]).collect::<Vec<_>>())
                    .collect();
                let n = vals.len() as f64;
                let m = vals.iter().sum::<f64>() / n;
                let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
                prop_assert!(m.abs() < 1e-6, "mean {m}");
                // Below one only by the epsilon term.
                let sample_var = cache.batch_var[c];
                prop_assert!((v - sample_var / (sample_var + 1e-5)).abs() < 1e-9);
                if sample_var > 1e-2 {
                    prop_assert!((v - 1.0).abs() < 1e-3, "variance {v}");
                }
            }
            Ok(())
        },
    )
}

pub fn adam_zero_gradient_is_noop() -> Result<(), String> {
    run((2usize..5, 1usize..6, any::<u64>(), 1usize..4), |(depth, filters, seed, steps)| {
        let cfg = net(depth, filters);
        let w0 = weights(&cfg, seed);
        let mut w = w0.clone();
        let mut state = AdamState::new(&w, AdamConfig::default());
        let g = Gradients::zeros_like(&w);
        for _ in 0..steps {
            adam_step(&mut w, &g, &mut state).unwrap();
        }
        prop_assert_eq!(w, w0);
        Ok(())
    })
}

pub fn model_round_trip() -> Result<(), String> {
    run((2usize..5, 1usize..6, any::<u64>()), |(depth, filters, seed)| {
        let cfg = net(depth, filters);
        let model = TrainedModel::new(cfg, weights(&cfg, seed)).unwrap();
        let mut bytes = Vec::new();
        save_model(&model, &mut bytes).unwrap();
        let back = load_model(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &model);
        let mut again = Vec::new();
        save_model(&back, &mut again).unwrap();
        prop_assert_eq!(again, bytes);
        Ok(())
    })
}

pub fn dataset_round_trip() -> Result<(), String> {
    run((1u32..6, 0usize..3, 1usize..5, any::<u64>()), |(log_s, k, count, seed)| {
        let cfg = scenario(log_s, k);
        let codes = hadamard_codes(cfg.spreading_factor).unwrap();
        let data = generate_dataset(&cfg, &codes, &SymbolAlphabet::qpsk(), count, seed).unwrap();
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &data).unwrap();
        let back = read_dataset(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(back.len(), count);
        for (a, b) in back.iter().zip(&data) {
            prop_assert_eq!(&a.active.indices, &b.active.indices);
            for (x, y) in a.received.iter().zip(&b.received) {
                prop_assert_eq!(x.re, y.re as f32 as f64);
                prop_assert_eq!(x.im, y.im as f32 as f64);
            }
        }
        let mut again = Vec::new();
        write_dataset(&mut again, &back).unwrap();
        prop_assert_eq!(again, bytes);
        Ok(())
    })
}

pub fn shape_preservation() -> Result<(), String> {
    run(
        (2usize..5, 1usize..6, 0u32..6, 2usize..4, any::<u64>()),
        |(depth, filters, log_s, batch, seed)| {
            let cfg = net(depth, filters);
            let w = weights(&cfg, seed);
            let s = 1usize << log_s;
            let mut rng = derive_rng(seed, Purpose::GradCheck, 1);
            let x: Vec<Tensor3<f32>> = (0..batch)
                .map(|_| {
                    let data = (0..s * 4).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
                    Tensor3::from_vec(s, 2, 2, data).unwrap()
                })
                .collect();
            for mode in [BnMode::Training, BnMode::Inference] {
                let (y, cache) = network_forward(&x, &w, &cfg, mode).unwrap();
                prop_assert_eq!(y.len(), batch);
                for t in &y {
                    prop_assert_eq!(t.dims(), (s, 2, 1));
                }
                for (l, layer) in cache.layers.iter().enumerate() {
                    let (cin, _) = cfg.layer_channels(l);
                    for t in &layer.input {
                        prop_assert_eq!(t.dims(), (s, 2, cin));
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn input_tensor_is_peak_normalized() -> Result<(), String> {
    run((0u32..7, any::<u64>(), 1e-3f64..1e3), |(log_s, seed, gain)| {
        let s = 1usize << log_s;
        let codes = hadamard_codes(s).unwrap();
        let mut rng = derive_rng(seed, Purpose::GradCheck, 2);
        let r: Vec<Complex64> = (0..s)
            .map(|_| Complex64::new(gain * rng.random_range(-1.0..1.0), gain * rng.random_range(-1.0..1.0)))
            .collect();
        let inp = build_input_tensor::<f64>(&r, &codes).unwrap();
        prop_assert_eq!(inp.tensor.dims(), (s, 2, 2));
        for ch in 0..2 {
            let peak = (0..s)
                .map(|k| inp.tensor.get(k, 0, ch).hypot(inp.tensor.get(k, 1, ch)))
                .fold(0.0f64, f64::max);
            prop_assert!((peak - 1.0).abs() < 1e-12);
        }
        Ok(())
    })
}

// harness

fn tiny_model(seed: u64) -> TrainedModel {
    let cfg = net(2, 2);
    TrainedModel::new(cfg, NetworkWeights::init(&cfg, &mut derive_rng(seed, Purpose::Init, 0))).unwrap()
}

pub fn rates_bounded_and_exact() -> Result<(), String> {
    run(
        (1u32..5, 0usize..4, -10.0f64..30.0, 1usize..40, any::<u64>()),
        |(log_s, k, jam, runs, seed)| {
            let cfg = ScenarioConfig {
                jammer_power_db: jam,
                ..scenario(log_s, k)
            };
            let e = evaluate(Some(&tiny_model(seed)), &cfg, runs, seed).unwrap();
            let p = e.proposed_rate().unwrap();
            let b = e.baseline_rate();
            prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&b));
            prop_assert_eq!(p, e.errors_proposed.unwrap() as f64 / runs as f64);
            prop_assert_eq!(b, e.errors_baseline as f64 / runs as f64);
            Ok(())
        },
    )
}

pub fn sweep_csv_reproducible() -> Result<(), String> {
    run(
        (1u32..4, prop::collection::vec(-10.0f64..30.0, 1..4), 1usize..10, any::<u64>()),
        |(log_s, values, runs, seed)| {
            let spec = SweepSpec {
                variable: SweepVariable::JammerPowerDb,
                values,
                base: scenario(log_s, 1),
                num_runs: runs,
                seed,
                model_path: None,
            };
            let m = tiny_model(seed);
            let render = || {
                let mut buf = Vec::new();
                write_sweep_csv(&sweep(&spec, Some(&m)).unwrap(), &mut buf).unwrap();
                buf
            };
            let a = render();
            prop_assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), spec.values.len() + 1);
            prop_assert_eq!(a, render());
            Ok(())
        },
    )
}
