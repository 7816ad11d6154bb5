use std::fs;
use std::path::{Path, PathBuf};

use fisheye_core::geometry::{default_r_norm, CameraModel, Point2, RadialParams};
use fisheye_core::io::{read_image, read_map_file, write_image, write_map_file, SampleKind};
use fisheye_core::labels::{compute_backward_flow, compute_dvm, FlowMap};
use fisheye_core::metrics::{psnr, ssim, MetricConfig};
use fisheye_core::rectify::{bilinear_sample, valid_mask, valid_mask_through};
use fisheye_core::synthesis::{
    build_dataset, plan_manifest, procedural_source, render_fisheye, render_valid_mask, resize_square,
    sample_params, sample_rng, sample_seed, DatasetConfig, ParamRanges, MANIFEST_FILE,
};
use serde_json::json;

use crate::config::{load_ranges, SynthesizeFile};
use crate::{EvaluateArgs, Failure, LabelsArgs, RectifyArgs, RoundtripArgs, SynthesizeArgs};

/// Salt separating procedural source seeds from sample seeds.
const SOURCE_SALT: u64 = 0x50_55_52_43_45_53;
/// Upper bound on procedural sources written for one dataset.
const MAX_PROCEDURAL_SOURCES: usize = 256;
const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "bmp", "tif", "tiff"];

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match workers {
        Some(0) => Err(Failure::config("--workers must be at least 1")),
        #[cfg(feature = "rayon")]
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
        })
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Failure::data(format!("no source images in {}", dir.display())));
    }
    Ok(out)
}

fn procedural_seed(master: u64, index: usize) -> u64 {
    sample_seed(master ^ SOURCE_SALT, index as u64)
}

pub fn synthesize(args: SynthesizeArgs) -> Result<(), Failure> {
    let file = match &args.config {
        Some(path) => SynthesizeFile::load(path)?,
        None => SynthesizeFile::default(),
    };
    let seed = args
        .seed
        .or(file.seed)
        .ok_or_else(|| Failure::config("--seed is required (no wall-clock default)"))?;
    let count = args
        .count
        .or(file.count)
        .ok_or_else(|| Failure::config("--count is required"))?;
    let out = args
        .out
        .or(file.out)
        .ok_or_else(|| Failure::config("--out is required"))?;
    let ranges = match args.ranges.or(file.ranges) {
        Some(path) => load_ranges(&path)?,
        None => ParamRanges::default(),
    };
    let defaults = DatasetConfig::default();
    let cfg = DatasetConfig {
        resolution: args.resolution.or(file.resolution).unwrap_or(defaults.resolution),
        count,
        deviation_probability: args
            .deviation_prob
            .or(file.deviation_prob)
            .unwrap_or(defaults.deviation_probability),
        free_fraction: args.free_frac.or(file.free_frac).unwrap_or(defaults.free_fraction),
        crop_ratio: file.crop_ratio.unwrap_or(defaults.crop_ratio),
        ranges,
        seed,
    };
    cfg.validate()?;
    let workers = args.workers.or(file.workers);

    fs::create_dir_all(&out).map_err(|e| Failure::data(format!("{}: {e}", out.display())))?;
    let sources = match args.sources.or(file.sources) {
        Some(dir) => list_images(&dir)?,
        None => {
            let dir = out.join("sources");
            let n = count.clamp(1, MAX_PROCEDURAL_SOURCES);
            let paths: Vec<PathBuf> = (0..n).map(|i| dir.join(format!("src_{i:04}.png"))).collect();
            if !args.dry_run {
                fs::create_dir_all(&dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
                let side = cfg.resolution as usize;
                with_workers(workers, || {
                    fisheye_core_par_write(&paths, |i, path| {
                        write_image(path, &procedural_source(procedural_seed(seed, i), side))
                    })
                })??;
            }
            paths
        }
    };

    let manifest = if args.dry_run {
        let manifest = plan_manifest(&cfg, &sources, &out)?;
        manifest.write(out.join(MANIFEST_FILE))?;
        manifest
    } else {
        with_workers(workers, || build_dataset(&cfg, &sources, &out))??
    };
    println!(
        "central={} deviated={} free={}",
        manifest.count(SampleKind::Central),
        manifest.count(SampleKind::Deviated),
        manifest.count(SampleKind::DistortionFree)
    );
    Ok(())
}

/// Write files concurrently, reporting the first failure in index order.
fn fisheye_core_par_write(
    paths: &[PathBuf],
    write: impl Fn(usize, &Path) -> fisheye_core::Result<()> + Send + Sync,
) -> Result<(), Failure> {
    #[cfg(feature = "rayon")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        paths.par_iter().enumerate().map(|(i, p)| write(i, p)).collect()
    };
    #[cfg(not(feature = "rayon"))]
    let results: Vec<_> = paths.iter().enumerate().map(|(i, p)| write(i, p)).collect();
    results.into_iter().collect::<fisheye_core::Result<()>>()?;
    Ok(())
}

pub fn labels(args: LabelsArgs) -> Result<(), Failure> {
    let [k1, k2, k3, k4] = <[f64; 4]>::try_from(args.params.as_slice())
        .map_err(|_| Failure::config("--params needs exactly four values"))?;
    let (height, width) = match (&args.image, args.resolution, args.height, args.width) {
        (Some(path), ..) => read_image(path)?.dims(),
        (None, Some(side), ..) => (side, side),
        (None, None, Some(h), Some(w)) => (h, w),
        _ => return Err(Failure::config("give --image, --resolution or --height/--width")),
    };
    if args.dvm.is_none() && args.flow.is_none() {
        return Err(Failure::config("nothing to write: pass --dvm and/or --flow"));
    }
    let mut cam = CameraModel::central(RadialParams::new(k1, k2, k3, k4), height, width);
    if let (Some(x), Some(y)) = (args.center_x, args.center_y) {
        cam.center_d = Point2::new(x, y);
        cam.center_c = cam.center_d;
    }
    debug_assert_eq!(cam.r_norm, default_r_norm(height, width));
    with_workers(args.workers, || -> Result<(), Failure> {
        if let Some(path) = &args.dvm {
            write_map_file(path, &compute_dvm(&cam, height, width)?)?;
        }
        if let Some(path) = &args.flow {
            write_map_file(path, &compute_backward_flow(&cam, height, width)?)?;
        }
        Ok(())
    })??;
    println!("labels {height}x{width} params={k1},{k2},{k3},{k4}");
    Ok(())
}

pub fn rectify(args: RectifyArgs) -> Result<(), Failure> {
    let image = read_image(&args.image)?;
    let flow: FlowMap = read_map_file(&args.flow)?;
    let out = with_workers(args.workers, || bilinear_sample(&image, &flow))??;
    write_image(&args.out, &out)?;
    Ok(())
}

struct Pair {
    reference: PathBuf,
    test: PathBuf,
    flow: Option<PathBuf>,
}

fn parse_pair(spec: &str) -> Result<Pair, Failure> {
    let parts: Vec<&str> = spec.split(',').collect();
    match parts.as_slice() {
        [r, t] => Ok(Pair {
            reference: r.into(),
            test: t.into(),
            flow: None,
        }),
        [r, t, f] => Ok(Pair {
            reference: r.into(),
            test: t.into(),
            flow: Some(f.into()),
        }),
        _ => Err(Failure::config(format!("bad --pair {spec:?}: expected REFERENCE,TEST[,FLOW]"))),
    }
}

fn score_pair(pair: &Pair, masked: bool, cfg: &MetricConfig) -> Result<serde_json::Value, Failure> {
    let reference = read_image(&pair.reference)?;
    let test = read_image(&pair.test)?;
    let mask = if masked {
        let path = pair
            .flow
            .as_ref()
            .ok_or_else(|| Failure::data("--masked needs a FLOW entry for every pair"))?;
        let flow: FlowMap = read_map_file(path)?;
        Some(valid_mask(&flow, test.dims()))
    } else {
        None
    };
    let p = psnr(&reference, &test, cfg, mask.as_ref())?;
    let s = ssim(&reference, &test, cfg, mask.as_ref())?;
    Ok(json!({
        "reference": pair.reference.to_string_lossy(),
        "test": pair.test.to_string_lossy(),
        "psnr": decibels(p),
        "ssim": s,
        "masked": masked,
    }))
}

fn decibels(v: f64) -> serde_json::Value {
    if v.is_infinite() {
        json!("inf")
    } else {
        json!(v)
    }
}

/// Exit status of a batch given its failure count.
fn batch_status(failed: usize, total: usize, what: &str) -> Result<(), Failure> {
    match failed {
        0 => Ok(()),
        n if n == total => Err(Failure::data(format!("all {total} {what} failed"))),
        n => Err(Failure {
            code: Failure::PARTIAL,
            message: format!("{n} of {total} {what} failed"),
        }),
    }
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let pairs = args.pairs.iter().map(|s| parse_pair(s)).collect::<Result<Vec<_>, _>>()?;
    let cfg = MetricConfig::default();
    let results = with_workers(args.workers, || {
        pairs.iter().map(|p| score_pair(p, args.masked, &cfg)).collect::<Vec<_>>()
    })?;
    let mut failed = 0;
    for (i, (pair, result)) in pairs.iter().zip(results).enumerate() {
        match result {
            Ok(line) => println!("{line}"),
            Err(e) => {
                failed += 1;
                eprintln!(
                    "error: pair {i} ({}, {}): {e}",
                    pair.reference.display(),
                    pair.test.display()
                );
            }
        }
    }
    batch_status(failed, pairs.len(), "pairs")
}

fn roundtrip_one(
    index: usize,
    args: &RoundtripArgs,
    ranges: &ParamRanges,
    sources: Option<&[PathBuf]>,
) -> Result<(String, f64), Failure> {
    let side = args.resolution as usize;
    let (name, source) = match sources {
        Some(list) => {
            let path = &list[index % list.len()];
            (path.to_string_lossy().into_owned(), resize_square(&read_image(path)?, side))
        }
        None => {
            let seed = procedural_seed(args.seed, index);
            (format!("procedural:{seed}"), procedural_source(seed, side))
        }
    };
    let params = sample_params(&mut sample_rng(sample_seed(args.seed, index as u64)), ranges)?;
    let cam = CameraModel::central(params, side, side);
    let distorted = render_fisheye(&source, &cam)?;
    let flow = compute_backward_flow(&cam, side, side)?;
    let rectified = bilinear_sample(&distorted, &flow)?;
    let mask = valid_mask_through(&flow, &render_valid_mask(&cam, side, side)?);
    let score = psnr(&source, &rectified, &MetricConfig::default(), Some(&mask))?;
    Ok((name, score))
}

pub fn roundtrip(args: RoundtripArgs) -> Result<(), Failure> {
    if args.count == 0 {
        return Err(Failure::config("--count must be positive"));
    }
    if args.resolution < 32 {
        return Err(Failure::config("--resolution must be at least 32"));
    }
    let ranges = match &args.ranges {
        Some(path) => load_ranges(path)?,
        None => ParamRanges::default(),
    };
    let sources = args.sources.as_deref().map(list_images).transpose()?;
    let results = with_workers(args.workers, || {
        (0..args.count)
            .map(|i| roundtrip_one(i, &args, &ranges, sources.as_deref()))
            .collect::<Vec<_>>()
    })?;
    let mut scores = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok((source, score)) => {
                println!("{}", json!({"sample": i, "source": source, "psnr": decibels(score)}));
                scores.push(score);
            }
            Err(e) => eprintln!("error: sample {i}: {e}"),
        }
    }
    if !scores.is_empty() {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "{}",
            json!({"summary": true, "count": scores.len(), "mean_psnr": decibels(mean), "min_psnr": decibels(min)})
        );
    }
    batch_status(args.count - scores.len(), args.count, "samples")
}
