//! Acceptance gate. Run with `--nocapture` to see one PASS/FAIL line per
//! criterion; the test fails if any criterion fails.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{fisheye, tree_hash};
use fisheye_core::geometry::{CameraModel, Point2, RadialParams, DEFAULT_TOL};
use fisheye_core::io::{read_image, read_map_file, write_map, DatasetManifest, SampleKind};
use fisheye_core::labels::{compute_backward_flow, compute_dvm, transform_dvm, FlowMap};
use fisheye_core::metrics::{psnr, ssim, MetricConfig};
use fisheye_core::rectify::{bilinear_sample, valid_mask_through};
use fisheye_core::synthesis::{
    procedural_source, render_valid_mask, resize_square, sample_params, sample_rng, sample_seed, sample_transform,
    DatasetConfig, ParamRanges, MONOTONE_RADIUS,
};
use fisheye_core::{Image, Mask};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn unit_float(seed: u64) -> f64 {
    (seed >> 11) as f64 / (1u64 << 53) as f64
}

fn radial_oracle(p: &RadialParams, r: f64) -> f64 {
    p.k1 * r + p.k2 * r.powi(3) + p.k3 * r.powi(5) + p.k4 * r.powi(7)
}

fn random_camera(seed: u64, side: usize) -> CameraModel {
    let p = sample_params(&mut sample_rng(seed), &ParamRanges::default()).unwrap();
    CameraModel::central(p, side, side)
}

fn inversion() -> Outcome {
    let ranges = ParamRanges::default();
    let mut worst = 0.0f64;
    for draw in 0..1000u64 {
        let p = sample_params(&mut sample_rng(sample_seed(0xA11, draw)), &ranges).map_err(|e| e.to_string())?;
        for i in 0..=64u64 {
            let r = match i {
                0 => 0.0,
                64 => MONOTONE_RADIUS,
                _ => MONOTONE_RADIUS * unit_float(sample_seed(draw, i)),
            };
            let back = p.invert(radial_oracle(&p, r), DEFAULT_TOL).map_err(|e| format!("draw {draw}: {e}"))?;
            worst = worst.max((back - r).abs());
        }
    }
    if worst <= 1e-8 {
        Ok(format!("max error {worst:.2e}"))
    } else {
        Err(format!("max error {worst:.2e} > 1e-8"))
    }
}

fn dvm_flow_consistency() -> Outcome {
    let side = 256;
    let (mut worst_dvm, mut worst_flow) = (0.0f64, 0.0f64);
    for seed in 0..20u64 {
        let cam = random_camera(sample_seed(0xD7, seed), side);
        let dvm = compute_dvm(&cam, side, side).map_err(|e| e.to_string())?;
        let flow = compute_backward_flow(&cam, side, side).map_err(|e| e.to_string())?;
        for v in 0..side {
            for u in 0..side {
                let p = Point2::new(u as f64, v as f64);
                let dist = (p - cam.center_d).norm();
                let d = dvm.get(u, v);
                let magnitude = d[0].hypot(d[1]);
                let expected = if dist == 0.0 {
                    0.0
                } else {
                    let r_d = dist / cam.r_norm;
                    r_d / radial_oracle(&cam.params, r_d)
                };
                worst_dvm = worst_dvm.max((magnitude - expected).abs());

                let f = flow.get(u, v);
                let r_src = (Point2::new(f[0], f[1]) - cam.center_d).norm() / cam.r_norm;
                let r_target = (p - cam.center_c).norm() / cam.r_norm;
                worst_flow = worst_flow.max((radial_oracle(&cam.params, r_src) - r_target).abs());
            }
        }
    }
    let detail = format!("|V| error {worst_dvm:.2e}, flow error {worst_flow:.2e}");
    if worst_dvm <= 1e-9 && worst_flow <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn deviation_invariance() -> Outcome {
    let side = 256;
    let cfg = DatasetConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let cam = random_camera(sample_seed(0x1A, seed), side);
        let t = sample_transform(&mut sample_rng(sample_seed(0x1B, seed)), side as u32, cfg.crop_ratio);
        let moved = transform_dvm(&compute_dvm(&cam, side, side).map_err(|e| e.to_string())?, &t)
            .map_err(|e| e.to_string())?;
        let cam_t = t.apply_to_camera(&cam);
        let direct = compute_dvm(&cam_t, side, side).map_err(|e| e.to_string())?;
        // Three source pixels, expressed in the resized frame.
        let exclusion = 3.0 * t.scale();
        for v in 0..side {
            for u in 0..side {
                if (Point2::new(u as f64, v as f64) - cam_t.center_d).norm() <= exclusion {
                    continue;
                }
                let (a, b) = (moved.get(u, v), direct.get(u, v));
                worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            }
        }
    }
    if worst <= 2e-2 {
        Ok(format!("max error {worst:.4}"))
    } else {
        Err(format!("max error {worst:.4} > 2e-2"))
    }
}

fn round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path();
    let run = fisheye(&[
        "synthesize", "--count", "50", "--seed", "2718", "--resolution", "256", "--deviation-prob", "0",
        "--free-frac", "0", "--out", out.to_str().unwrap(),
    ]);
    if !run.status.success() {
        return Err(String::from_utf8_lossy(&run.stderr).into_owned());
    }
    let manifest = DatasetManifest::read(out.join("manifest.jsonl")).map_err(|e| e.to_string())?;
    let cfg = MetricConfig::default();
    let mut scores = Vec::new();
    for r in &manifest.records {
        if r.kind != SampleKind::Central {
            return Err(format!("sample {} is {:?}", r.id, r.kind));
        }
        let source = resize_square(&read_image(out.join(&r.source)).map_err(|e| e.to_string())?, 256);
        let image = read_image(out.join(&r.image)).map_err(|e| e.to_string())?;
        let flow: FlowMap = read_map_file(out.join(&r.flow)).map_err(|e| e.to_string())?;
        let cam = CameraModel::central(r.params.ok_or("central sample without params")?, 256, 256);
        let mask = valid_mask_through(&flow, &render_valid_mask(&cam, 256, 256).map_err(|e| e.to_string())?);
        let rectified = bilinear_sample(&image, &flow).map_err(|e| e.to_string())?;
        scores.push(psnr(&source, &rectified, &cfg, Some(&mask)).map_err(|e| e.to_string())?);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let detail = format!("{} samples, mean {mean:.2} dB, min {min:.2} dB", scores.len());
    if scores.len() == 50 && mean >= 28.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sampling_rule() -> Outcome {
    let n = 16usize;
    let last = (n - 1) as f64;
    let src = Image::from_fn(n, n, |x, y| [(x * 16) as u8 + 1, (y * 16) as u8 + 1, 200]);
    let outside = [
        [-1e-9, 0.0],
        [last + 1e-9, 0.0],
        [0.0, -1e-9],
        [0.0, last + 1e-9],
        [-0.5, 7.0],
        [last + 0.5, 7.0],
        [7.0, -0.5],
        [7.0, last + 0.5],
        [-1.0, -1.0],
        [n as f64, n as f64],
        [-1e6, 3.0],
        [3.0, 1e6],
    ];
    let mut checked = 0usize;
    for target in outside {
        for parity in 0..2 {
            let flow = FlowMap::from_fn(n, n, |u, v| {
                if (u + v) % 2 == parity {
                    target
                } else {
                    [u as f64, v as f64]
                }
            });
            let out = bilinear_sample(&src, &flow).map_err(|e| e.to_string())?;
            for v in 0..n {
                for u in 0..n {
                    let expected = if (u + v) % 2 == parity { [0, 0, 0] } else { src.pixel(u, v) };
                    if out.pixel(u, v) != expected {
                        return Err(format!("flow {target:?} at ({u},{v}) gave {:?}", out.pixel(u, v)));
                    }
                    checked += 1;
                }
            }
        }
    }
    let identity = FlowMap::from_fn(n, n, |u, v| [u as f64, v as f64]);
    let photo = procedural_source(99, n);
    if bilinear_sample(&photo, &identity).map_err(|e| e.to_string())? != photo {
        return Err("identity flow changed the image".into());
    }
    Ok(format!("{checked} pixels checked, identity byte-exact"))
}

fn metrics_closed_forms() -> Outcome {
    let cfg = MetricConfig::default();
    let a = Image::from_fn(32, 32, |_, _| [100, 100, 100]);
    let b = Image::from_fn(32, 32, |_, _| [101, 101, 101]);
    let p = psnr(&a, &b, &cfg, None).map_err(|e| e.to_string())?;
    if (p - 48.1308).abs() > 1e-3 {
        return Err(format!("uniform diff-1 psnr {p}"));
    }
    let x = procedural_source(5, 48);
    let y = procedural_source(6, 48);
    let s = ssim(&x, &x, &cfg, None).map_err(|e| e.to_string())?;
    if s != 1.0 {
        return Err(format!("ssim(a,a) = {s}"));
    }
    let full = Mask::full(48, 48);
    let pairs = [
        (psnr(&x, &y, &cfg, None), psnr(&x, &y, &cfg, Some(&full))),
        (ssim(&x, &y, &cfg, None), ssim(&x, &y, &cfg, Some(&full))),
    ];
    for (plain, masked) in pairs {
        let (plain, masked) = (plain.map_err(|e| e.to_string())?, masked.map_err(|e| e.to_string())?);
        if plain.to_bits() != masked.to_bits() {
            return Err(format!("masked-full {masked} != unmasked {plain}"));
        }
    }
    Ok(format!("psnr {p:.4} dB, ssim(a,a) = 1, full mask exact"))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut hashes = Vec::new();
    for (name, workers) in [("w1", "1"), ("w4", "4"), ("w4b", "4")] {
        let out = tmp.path().join(name);
        let run = fisheye(&[
            "synthesize", "--count", "16", "--seed", "31415", "--resolution", "96", "--workers", workers, "--out",
            out.to_str().unwrap(),
        ]);
        if !run.status.success() {
            return Err(String::from_utf8_lossy(&run.stderr).into_owned());
        }
        hashes.push(tree_hash(&out));
    }
    if hashes.iter().all(|h| *h == hashes[0]) {
        Ok(format!("tree hash {} at 1 and 4 workers", &hashes[0][..16]))
    } else {
        Err(format!("tree hashes differ: {hashes:?}"))
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn golden_files() -> Outcome {
    let dvm = compute_dvm(
        &CameraModel {
            params: RadialParams::new(0.9, 0.1, 0.05, 0.01),
            center_d: Point2::new(1.5, 1.5),
            center_c: Point2::new(1.5, 1.5),
            r_norm: 2.0,
        },
        4,
        4,
    )
    .map_err(|e| e.to_string())?;
    let flow_1 = FlowMap::filled(1, 1, [3.5, -2.0]);
    let flow_4 = FlowMap::from_fn(4, 4, |u, v| [u as f64 * 1.25 - 0.5, v as f64 * -0.75 + 100.0]);
    let mut encoded = Vec::new();
    for (name, bytes) in [
        ("flow_1x1.rfir", encode(&flow_1)),
        ("dvm_4x4.rfir", encode(&dvm)),
        ("flow_4x4.rfir", encode(&flow_4)),
    ] {
        let golden = std::fs::read(fixture(name)).map_err(|e| format!("{name}: {e}"))?;
        if bytes != golden {
            return Err(format!("{name} differs from the checked-in bytes"));
        }
        encoded.push(name);
    }
    Ok(encoded.join(", "))
}

fn encode<K: fisheye_core::labels::MapKind>(map: &fisheye_core::labels::VectorMap<K>) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_map(map, &mut bytes).unwrap();
    bytes
}

const CRITERIA: [Criterion; 8] = [
    Criterion {
        name: "inversion",
        limit: Some(Duration::from_secs(5)),
        run: inversion,
    },
    Criterion {
        name: "dvm-flow consistency",
        limit: Some(Duration::from_secs(60)),
        run: dvm_flow_consistency,
    },
    Criterion {
        name: "deviation invariance",
        limit: Some(Duration::from_secs(120)),
        run: deviation_invariance,
    },
    Criterion {
        name: "round-trip rectification",
        limit: Some(Duration::from_secs(120)),
        run: round_trip,
    },
    Criterion {
        name: "sampling rule",
        limit: None,
        run: sampling_rule,
    },
    Criterion {
        name: "metrics closed forms",
        limit: None,
        run: metrics_closed_forms,
    },
    Criterion {
        name: "determinism",
        limit: None,
        run: determinism,
    },
    Criterion {
        name: "format golden files",
        limit: None,
        run: golden_files,
    },
];

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for c in &CRITERIA {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(detail), Some(limit)) if elapsed > limit => Err(format!("{detail}; took {elapsed:.2?} > {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:<26} {detail} [{elapsed:.2?}]", c.name),
            Err(why) => {
                println!("FAIL  {:<26} {why} [{elapsed:.2?}]", c.name);
                failed.push(c.name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
