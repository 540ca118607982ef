use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use vessaff::affinity::{compute_affinity, NeighborhoodSpec};
use vessaff::io::{
    aggregate, list_images, pair_by_stem, read_affinity, read_features, read_image, read_image_channels, read_weights,
    render_report, write_aff, write_image, write_image_channels, write_mask, AffPayload, AggregateMode, ColorMode,
    EvalRecord, ReportFormat,
};
use vessaff::losses::{total_loss, LossConfig};
use vessaff::metrics::{evaluate, EvalConfig, StratifyConfig, StratumRanges};
use vessaff::perturb::{adjust_contrast_channels, ContrastSweep};
use vessaff::rng::derive_seed;
use vessaff::strengthening::{smafs, uafs};
use vessaff::synthgen::{degrade, generate_tree, render_intensity, DegradeParams, TreeParams};
use vessaff::{Grayscale, Grid, Mask, ProbMap, RealMap};

use crate::args::*;
use crate::error::{CliError, CliResult, Context};

fn check_fraction(flag: &str, t: f64) -> CliResult<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: must lie in (0, 1], got {t}")))
    }
}

/// Reads an image and keeps pixels at or above `threshold * 255`.
fn read_binary(flag: &str, path: &Path, threshold: f64) -> CliResult<Mask> {
    let img = read_image(path).path(flag, path)?;
    let cut = threshold * 255.0;
    Ok(Mask::from_fn(img.width(), img.height(), |r, c| img.get(r, c) >= cut))
}

fn ensure_dir(flag: &str, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| vessaff::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
        .flag(flag)
}

fn pool(jobs: &JobsArg) -> CliResult<rayon::ThreadPool> {
    let n = match jobs.jobs {
        Some(0) => return Err(CliError::Usage("--jobs: must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Failed(format!("--jobs: cannot start {n} workers: {e}")))
}

pub fn affinity(a: &AffinityArgs) -> CliResult<()> {
    check_fraction("--binarize-threshold", a.binarize_threshold)?;
    let spec = NeighborhoodSpec::new(a.scales.clone()).flag("--scales")?;
    let mask = read_binary("--mask", &a.mask, a.binarize_threshold)?;
    let field = compute_affinity(&mask, &spec);
    write_aff(&a.out, &AffPayload::Affinity(field)).flag("--out")?;
    println!(
        "{}: {} slots, {}x{}",
        a.out.display(),
        spec.slot_count(),
        mask.width(),
        mask.height()
    );
    Ok(())
}

pub fn loss(a: &LossArgs) -> CliResult<()> {
    check_fraction("--binarize-threshold", a.binarize_threshold)?;
    let cfg = LossConfig::new(a.lambda_b, a.epsilon).flag("--lambda-b/--epsilon")?;
    let img = read_image(&a.pred_seg).path("--pred-seg", &a.pred_seg)?;
    let probs = img.data().iter().map(|&v| (v / 255.0).clamp(0.0, 1.0)).collect();
    let pred_seg = ProbMap::new(img.width(), img.height(), probs).flag("--pred-seg")?;
    let gt_seg = read_binary("--gt-seg", &a.gt_seg, a.binarize_threshold)?;
    let pred_aff = read_affinity(&a.pred_aff).path("--pred-aff", &a.pred_aff)?;
    let gt_aff = match &a.gt_aff {
        Some(p) => read_affinity(p).path("--gt-aff", p)?,
        None => compute_affinity(&gt_seg, pred_aff.spec()),
    };
    let out = total_loss(&pred_seg, &gt_seg, &pred_aff, &gt_aff, &cfg).flag("loss inputs")?;
    let text = serde_json::to_string_pretty(&out).expect("breakdown serializes") + "\n";
    if let Some(path) = &a.out {
        fs::write(path, &text)
            .map_err(|e| vessaff::Error::Io {
                path: path.clone(),
                source: e,
            })
            .flag("--out")?;
    }
    print!("{text}");
    Ok(())
}

pub fn strengthen(a: &StrengthenArgs) -> CliResult<()> {
    let features = read_features(&a.features).path("--features", &a.features)?;
    let pred = read_affinity(&a.pred_aff).path("--pred-aff", &a.pred_aff)?;
    let out = match &a.weights {
        Some(p) => {
            let weights = read_weights(p).path("--weights", p)?;
            smafs(&features, &pred, &weights).flag("--weights")?
        }
        None => uafs(&features, &pred).flag("--pred-aff")?,
    };
    write_aff(&a.out, &AffPayload::Feature(out)).flag("--out")?;
    println!("{}: {} channels", a.out.display(), features.channels());
    Ok(())
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    check_fraction("--binarize-threshold", a.binarize_threshold)?;
    for (flag, v) in [
        ("--threshold", a.threshold),
        ("--thickness-threshold", a.thickness_threshold),
        ("--thin-range", a.thin_range),
        ("--thick-range", a.thick_range),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Usage(format!("{flag}: must be finite and >= 0, got {v}")));
        }
    }
    let cfg = EvalConfig {
        threshold: a.threshold,
        stratify: a.stratify.then_some(StratifyConfig {
            thickness_threshold: a.thickness_threshold,
            ranges: StratumRanges {
                thin: a.thin_range,
                thick: a.thick_range,
            },
        }),
    };
    let pairs = pair_by_stem(&a.pred, &a.gt).flag("--pred/--gt")?;
    let pool = pool(&a.jobs)?;
    // Results come back in pair order (sorted by id) whatever the schedule.
    let results: Vec<CliResult<EvalRecord>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|pair| {
                let pred = read_binary("--pred", &pair.pred, a.binarize_threshold)?;
                let gt = read_binary("--gt", &pair.gt, a.binarize_threshold)?;
                let e = evaluate(&pred, &gt, &cfg).flag(&format!("image '{}'", pair.id))?;
                Ok(EvalRecord::from_eval(&pair.id, &e))
            })
            .collect()
    });
    let records = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let mode = match a.aggregate {
        AggregateArg::Mean => AggregateMode::Mean,
        AggregateArg::Pooled => AggregateMode::Pooled,
    };
    let format = match a.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let agg = aggregate(&records, mode).flag("--aggregate")?;
    let text = render_report(&records, &agg, format).flag("--format")?;
    match &a.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| vessaff::Error::Io {
                path: path.clone(),
                source: e,
            })
            .flag("--out")?,
        None => print!("{text}"),
    }
    Ok(())
}

/// `{stem}_x{ratio}` with the shortest decimal that round-trips.
pub fn perturbed_name(stem: &str, ratio: f64, ext: &str) -> String {
    format!("{stem}_x{ratio}.{ext}")
}

pub fn perturb(a: &PerturbArgs) -> CliResult<()> {
    let clamp = !a.no_clamp;
    let sweep = match a.preset {
        Some(PresetArg::Xcad) => ContrastSweep::xcad(clamp),
        Some(PresetArg::Drive) => ContrastSweep::drive(clamp),
        None => ContrastSweep::new(a.ratios.clone(), clamp).flag("--ratios")?,
    };
    let mode = match a.color {
        ColorArg::Luminance => ColorMode::Luminance,
        ColorArg::PerChannel => ColorMode::PerChannel,
    };
    let inputs: Vec<(String, PathBuf)> = if a.input.is_dir() {
        list_images(&a.input).flag("--input")?.into_iter().collect()
    } else {
        let stem = a
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Usage(format!("--input {}: no file name", a.input.display())))?;
        vec![(stem.to_string(), a.input.clone())]
    };
    if inputs.is_empty() {
        return Err(CliError::Lib {
            context: "--input".into(),
            source: vessaff::Error::UnpairedFiles(format!("{}: no images found", a.input.display())),
        });
    }
    ensure_dir("--out", &a.out)?;
    let pool = pool(&a.jobs)?;
    let results: Vec<CliResult<Vec<PathBuf>>> = pool.install(|| {
        inputs
            .par_iter()
            .map(|(stem, path)| perturb_one(stem, path, &sweep, mode, &a.out))
            .collect()
    });
    for written in results {
        for p in written? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn perturb_one(stem: &str, path: &Path, sweep: &ContrastSweep, mode: ColorMode, out: &Path) -> CliResult<Vec<PathBuf>> {
    let planes = read_image_channels(path, mode).path("--input", path)?;
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let ext = if !sweep.clamp() {
        "aff"
    } else if is_png || planes.len() > 1 {
        "png"
    } else {
        "pgm"
    };
    let mut written = Vec::with_capacity(sweep.ratios().len());
    for &ratio in sweep.ratios() {
        let edited = adjust_contrast_channels(&planes, ratio, sweep.clamp()).flag("--ratios")?;
        let dest = out.join(perturbed_name(stem, ratio, ext));
        if sweep.clamp() {
            write_image_channels(&dest, &edited).flag("--out")?;
        } else {
            write_aff(&dest, &unclamped_payload(&edited)?).flag("--out")?;
        }
        written.push(dest);
    }
    Ok(written)
}

fn unclamped_payload(planes: &[Grayscale]) -> CliResult<AffPayload> {
    let (w, h) = (planes[0].width(), planes[0].height());
    if let [one] = planes {
        return Ok(AffPayload::Real(
            RealMap::new(w, h, one.data().to_vec()).flag("--no-clamp")?,
        ));
    }
    let data = planes.iter().flat_map(|p| p.data().iter().copied()).collect();
    Ok(AffPayload::Feature(
        vessaff::FeatureMap::new(planes.len(), w, h, data).flag("--no-clamp")?,
    ))
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let params = TreeParams {
        seed: a.seed,
        width: a.width,
        height: a.height,
        branch_count: a.branches,
        width_range: (a.min_width, a.max_width),
        branch_angle_jitter: a.angle_jitter,
        segment_length_range: (a.min_length, a.max_length),
    };
    let tree = generate_tree(&params).flag("tree parameters")?;
    let degrade_params = DegradeParams {
        break_count: a.breaks,
        dilation: a.dilation,
        noise_rate: a.noise_rate,
    };
    let pred = degrade(&tree.mask, derive_seed(a.seed, 1), &degrade_params).flag("--breaks/--dilation/--noise-rate")?;
    let image = render_intensity(&tree.mask, derive_seed(a.seed, 2), a.contrast, a.noise_sigma)
        .flag("--contrast/--noise-sigma")?;
    ensure_dir("--out", &a.out)?;
    let ext = match a.format {
        ImageFormatArg::Pgm => "pgm",
        ImageFormatArg::Png => "png",
    };
    let files = [
        format!("mask.{ext}"),
        format!("skeleton.{ext}"),
        "thickness.aff".to_string(),
        format!("image.{ext}"),
        format!("pred.{ext}"),
    ];
    let paths: Vec<PathBuf> = files.iter().map(|f| a.out.join(f)).collect();
    write_mask(&paths[0], &tree.mask).flag("--out")?;
    write_mask(&paths[1], &tree.skeleton).flag("--out")?;
    write_aff(&paths[2], &AffPayload::Real(tree.thickness.clone())).flag("--out")?;
    write_image(&paths[3], &image).flag("--out")?;
    write_mask(&paths[4], &pred).flag("--out")?;
    for p in &paths {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn selfcheck(a: &SelfcheckArgs) -> CliResult<()> {
    let checks = vessaff::selfcheck::run_all(a.seed);
    for c in &checks {
        println!("{c}");
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", checks.len());
    if passed == checks.len() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "selfcheck: {} check(s) failed",
            checks.len() - passed
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_names_are_verbatim() {
        let names: Vec<String> = vessaff::perturb::XCAD_RATIOS
            .iter()
            .map(|&r| perturbed_name("a", r, "pgm"))
            .collect();
        assert_eq!(names[0], "a_x1.7.pgm");
        assert_eq!(names[4], "a_x0.85.pgm");
        assert_eq!(perturbed_name("a", 1.0, "png"), "a_x1.png");
    }
}
