//! Subcommand implementations. Each returns an [`Outcome`] whose JSON is
//! also written to the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use shadowfreq_core::chromaticity::{physics_chromaticity, ChromaticityMap, Compensation};
use shadowfreq_core::losses::{
    self, loss_align, loss_brightness_ch, loss_frequency, loss_recon, overall_loss, LossReport,
};
use shadowfreq_core::mask::DEFAULT_CUT;
use shadowfreq_core::metrics::{mask_from_threshold, DatasetReport, ManifestEntry};
use shadowfreq_core::spectrum::{dft2_plane, spectral_weight};
use shadowfreq_core::synthetic::{planckian_scene, smooth_shadow_pair};
use shadowfreq_core::wadm::{conv2d, deformable_conv, wadm_forward_traced};
use shadowfreq_core::{
    compute_soft_mask, evaluate_dataset, haar_dwt2, illumination_compensate, load_image, region_stats,
    save_image, shadowfree_chromaticity, ColorSpace, Error as CoreError, FeatureMap, Image, Manifest,
    OffsetField, PyramidGradientExtractor, SoftMask, WadmParams,
};

use crate::config::Config;
use crate::error::{CliError, EXIT_INTERNAL, EXIT_IO, EXIT_OK, EXIT_VALIDATION};
use crate::report::{ensure_dir, round_sig, to_canonical_json, write_text};
use crate::{Command, Outcome};

pub fn dispatch(cmd: &Command, cfg: &Config, out: &Path) -> Result<Outcome, CliError> {
    match cmd {
        Command::Decompose { input, crop } => decompose(input, *crop || cfg.wavelet.crop, out),
        Command::Spectrum { input, reference } => spectrum(input, reference.as_deref(), cfg, out),
        Command::Chroma { input, free } => chroma(input, free.as_deref(), out),
        Command::Mask { shadow, free } => mask(shadow, free, cfg, out),
        Command::Loss { shadow, free, result } => loss(shadow, free, result.as_deref(), cfg, out),
        Command::Eval { dataset, csv } => eval(dataset, csv.as_deref(), cfg, out),
        Command::WadmDemo {
            input,
            synthetic: _,
            params,
            seed,
            c_out,
            size,
            channels,
        } => wadm_demo(
            input.as_deref(),
            params.as_deref(),
            seed.unwrap_or(cfg.output.seed),
            *c_out,
            *size,
            *channels,
            out,
        ),
        Command::Synth { seed, count, size } => synth(seed.unwrap_or(cfg.output.seed), *count, *size, out),
    }
}

fn finish<T: Serialize>(
    name: &str,
    report: &T,
    summary: String,
    code: i32,
    out: &Path,
) -> Result<Outcome, CliError> {
    let json = to_canonical_json(report)?;
    ensure_dir(out)?;
    write_text(&out.join(format!("{name}.json")), &json)?;
    Ok(Outcome { json, summary, code })
}

fn save(img: &Image, out: &Path, file: &str) -> Result<String, CliError> {
    save_image(img, out.join(file))?;
    Ok(file.to_string())
}

fn shown(p: &Path) -> String {
    p.display().to_string()
}

fn shape_of(img: &Image) -> [usize; 2] {
    [img.height(), img.width()]
}

fn odd_dimension_error(img: &Image) -> CliError {
    CliError::validation(format!(
        "image is {}x{}: the Haar transform needs even height and width \
         (pass --crop or set wavelet.crop = true to center-crop)",
        img.height(),
        img.width()
    ))
}

/// Applies the crop policy, returning the processed image and the
/// `(top, left)` offset of the crop window when one was taken.
fn even_or_crop(img: Image, crop: bool) -> Result<(Image, Option<[usize; 2]>), CliError> {
    if img.height() % 2 == 0 && img.width() % 2 == 0 {
        return Ok((img, None));
    }
    if !crop {
        return Err(odd_dimension_error(&img));
    }
    let cropped = img.crop_to_even()?;
    let offset = [
        (img.height() - cropped.height()) / 2,
        (img.width() - cropped.width()) / 2,
    ];
    Ok((cropped, Some(offset)))
}

#[derive(Serialize)]
struct CropRecord {
    applied: bool,
    original: [usize; 2],
    processed: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<[usize; 2]>,
}

fn decompose(input: &Path, crop: bool, out: &Path) -> Result<Outcome, CliError> {
    let img = load_image(input)?;
    let original = shape_of(&img);
    let (img, offset) = even_or_crop(img, crop)?;
    let sb = haar_dwt2(&img)?;
    ensure_dir(out)?;
    let mut files = Vec::new();
    let mut energies = BTreeMap::new();
    for ((name, band), energy) in ["A", "H", "V", "D"]
        .iter()
        .zip(sb.components())
        .zip(sb.energies())
    {
        files.push(save(&band.normalized_for_display(), out, &format!("{name}.png"))?);
        energies.insert(name.to_string(), energy);
    }
    let report = json!({
        "input": shown(input),
        "crop": CropRecord {
            applied: offset.is_some(),
            original,
            processed: shape_of(&img),
            offset,
        },
        "subband_shape": [sb.height(), sb.width(), sb.channels()],
        "energies": energies,
        "files": files,
    });
    let mut summary = format!("subbands {}x{}", sb.height(), sb.width());
    if offset.is_some() {
        let _ = write!(summary, " (cropped from {}x{})", original[0], original[1]);
    }
    summary.push('\n');
    for (name, e) in &energies {
        let _ = writeln!(summary, "  {name}: energy {:.6e}", e);
    }
    finish("decompose", &report, summary, EXIT_OK, out)
}

fn spectrum(input: &Path, reference: Option<&Path>, cfg: &Config, out: &Path) -> Result<Outcome, CliError> {
    let img = load_image(input)?;
    let reference = reference.map(load_image).transpose()?;
    if let Some(r) = &reference {
        if !r.same_shape(&img) {
            return Err(CliError::validation(format!(
                "reference is {}x{}x{}, input is {}x{}x{}",
                r.height(),
                r.width(),
                r.channels(),
                img.height(),
                img.width(),
                img.channels()
            )));
        }
    }
    ensure_dir(out)?;
    let (h, w) = (img.height(), img.width());
    let mut channels = Vec::new();
    let mut summary = String::new();
    for k in 0..img.channels() {
        let spec = dft2_plane(img.plane(k), h, w);
        let energy = spec.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / (h * w) as f64;
        let file = save(&spec.log_magnitude_image(), out, &format!("spectrum_{k}.png"))?;
        let mut entry = json!({
            "channel": k,
            "dc": spec.get(0, 0).re,
            "energy": energy,
            "file": file,
        });
        let _ = write!(
            summary,
            "channel {k}: dc {:.6} energy {:.6e}",
            spec.get(0, 0).re,
            energy
        );
        if let Some(r) = &reference {
            let sr = dft2_plane(r.plane(k), h, w);
            let weights = spectral_weight(&sr, &spec, cfg.loss.alpha)?;
            let (lo, hi, sum) = weights
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY, 0.0), |(lo, hi, s), &v| {
                    (lo.min(v), hi.max(v), s + v)
                });
            entry["focal_weight"] = json!({
                "alpha": cfg.loss.alpha,
                "min": lo,
                "max": hi,
                "mean": sum / weights.values.len() as f64,
            });
            let _ = write!(
                summary,
                " focal weight mean {:.6e}",
                sum / weights.values.len() as f64
            );
        }
        summary.push('\n');
        channels.push(entry);
    }
    let report = json!({
        "input": shown(input),
        "shape": [h, w],
        "channels": channels,
    });
    finish("spectrum", &report, summary, EXIT_OK, out)
}

fn degrees(rad: f64) -> f64 {
    rad.to_degrees()
}

#[derive(Serialize)]
struct MapRecord {
    theta_star_degrees: f64,
    invariant_axis_degrees: f64,
    entropy_curve: Vec<f64>,
    excluded_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    compensation: Option<Compensation>,
}

impl MapRecord {
    fn of(map: &ChromaticityMap) -> Self {
        MapRecord {
            theta_star_degrees: degrees(map.theta_star),
            invariant_axis_degrees: degrees(map.projection.plane_angle()),
            entropy_curve: map.entropy_curve.clone(),
            excluded_pixels: map.excluded_pixels,
            compensation: map.compensation,
        }
    }
}

fn gray_hint(e: CoreError) -> CliError {
    match e {
        CoreError::Degenerate(msg) => CliError::validation(format!(
            "no chromaticity structure to analyze ({msg}); gray or single-color inputs have no invariant direction"
        )),
        other => other.into(),
    }
}

fn display_map(img: &Image) -> Image {
    img.clone().with_colorspace(ColorSpace::Srgb)
}

fn chroma(input: &Path, free: Option<&Path>, out: &Path) -> Result<Outcome, CliError> {
    let img = load_image(input)?;
    if img.channels() != 3 {
        return Err(CliError::validation(format!(
            "chromaticity needs a 3-channel image, got {} channel(s)",
            img.channels()
        )));
    }
    let soft = match free {
        Some(p) => {
            let f = load_image(p)?;
            Some(compute_soft_mask(&img, &f)?)
        }
        None => None,
    };
    let em = shadowfree_chromaticity(&img).map_err(gray_hint)?;
    let ic = illumination_compensate(&em, &img, soft.as_ref()).map_err(gray_hint)?;
    let phy = physics_chromaticity(&img).map_err(gray_hint)?;
    ensure_dir(out)?;
    let files = vec![
        save(&display_map(&em.image), out, "sigma_em.png")?,
        save(&display_map(&ic.image), out, "sigma_ic.png")?,
        save(&display_map(&phy.image), out, "sigma_phy.png")?,
    ];
    let record = MapRecord::of(&ic);
    let summary = format!(
        "theta* {:.1} deg (invariant axis {:.1} deg), {} pixels excluded\nbaseline without brightness normalization: invariant axis {:.1} deg\n",
        record.theta_star_degrees,
        record.invariant_axis_degrees,
        record.excluded_pixels,
        degrees(phy.projection.plane_angle()),
    );
    let report = json!({
        "input": shown(input),
        "non_shadow_region": if soft.is_some() { "soft_mask" } else { "brightest_half" },
        "theta_star_degrees": record.theta_star_degrees,
        "invariant_axis_degrees": record.invariant_axis_degrees,
        "entropy_curve": record.entropy_curve,
        "excluded_pixels": record.excluded_pixels,
        "compensation": record.compensation,
        "baseline": MapRecord::of(&phy),
        "files": files,
    });
    finish("chroma", &report, summary, EXIT_OK, out)
}

fn load_pair(shadow: &Path, free: &Path) -> Result<(Image, Image), CliError> {
    let s = load_image(shadow)?;
    let f = load_image(free)?;
    if !s.same_shape(&f) {
        return Err(CliError::validation(format!(
            "pair shapes differ: {}x{}x{} vs {}x{}x{}",
            s.height(),
            s.width(),
            s.channels(),
            f.height(),
            f.width(),
            f.channels()
        )));
    }
    Ok((s, f))
}

fn mask(shadow: &Path, free: &Path, cfg: &Config, out: &Path) -> Result<Outcome, CliError> {
    let (s, f) = load_pair(shadow, free)?;
    let soft = compute_soft_mask(&s, &f)?;
    let stats = region_stats(&s, &soft, DEFAULT_CUT)?;
    let binary = mask_from_threshold(&s, &f, cfg.metrics.threshold)?;
    ensure_dir(out)?;
    let binary_img = Image::new(
        binary.height(),
        binary.width(),
        1,
        ColorSpace::Srgb,
        binary
            .values()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
    )?;
    let files = vec![
        save(&soft.to_display(), out, "soft_mask.png")?,
        save(&binary_img, out, "threshold_mask.png")?,
    ];
    let summary = format!(
        "soft mask: {} masked / {} unmasked pixels; threshold({}) mask: {} pixels\n",
        stats.count_masked(),
        stats.count_unmasked(),
        cfg.metrics.threshold,
        binary.count()
    );
    let report = json!({
        "shadow": shown(shadow),
        "free": shown(free),
        "percentile_cut": soft.threshold_value(),
        "region_stats": stats,
        "threshold": cfg.metrics.threshold,
        "threshold_mask_pixels": binary.count(),
        "files": files,
    });
    finish("mask", &report, summary, EXIT_OK, out)
}

#[derive(Serialize)]
struct LossInputs {
    shadow: String,
    free: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cropped_to: Option<[usize; 2]>,
}

#[derive(Serialize)]
struct LossOutput {
    inputs: LossInputs,
    frequency: LossReport,
    brightness_ch: Option<LossReport>,
    align: LossReport,
    recon: LossReport,
    overall: LossReport,
    warnings: Vec<String>,
}

fn loss(
    shadow: &Path,
    free: &Path,
    result: Option<&Path>,
    cfg: &Config,
    out: &Path,
) -> Result<Outcome, CliError> {
    let (s, f) = load_pair(shadow, free)?;
    let candidate = match result {
        Some(p) => {
            let r = load_image(p)?;
            if !r.same_shape(&f) {
                return Err(CliError::validation("result and shadow-free shapes differ"));
            }
            r
        }
        None => s.clone(),
    };
    let crop = cfg.wavelet.crop;
    let (s, cropped) = even_or_crop(s, crop)?;
    let (f, _) = even_or_crop(f, crop)?;
    let (candidate, _) = even_or_crop(candidate, crop)?;
    let l = &cfg.loss;

    let frequency = loss_frequency(&candidate, &f, l.lambda1, l.lambda2, l.c, l.alpha)?;
    let true_mask = compute_soft_mask(&s, &f)?;
    let mut warnings = Vec::new();
    let brightness_ch =
        match shadowfree_chromaticity(&f).and_then(|m| illumination_compensate(&m, &f, Some(&true_mask))) {
            Ok(map) => Some(loss_brightness_ch(&candidate, &map)?),
            Err(CoreError::Degenerate(msg)) => {
                warnings.push(format!("brightness_ch skipped: degenerate chromaticity ({msg})"));
                None
            }
            Err(e) => return Err(e.into()),
        };
    let align = loss_align(
        &region_stats(&candidate, &true_mask, DEFAULT_CUT)?,
        &region_stats(&f, &true_mask, DEFAULT_CUT)?,
    )?;
    let pred_mask: SoftMask = compute_soft_mask(&candidate, &f)?;
    let recon = loss_recon(&pred_mask, &true_mask, &f, &PyramidGradientExtractor)?;

    let weights = l.weights();
    let mut parts = vec![frequency.clone(), align.clone()];
    parts.extend(brightness_ch.clone());
    if weights.0.contains_key(losses::RECON) {
        parts.push(recon.clone());
    }
    let overall = overall_loss(&parts, &weights)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "frequency      {:.9}", frequency.value);
    match &brightness_ch {
        Some(b) => {
            let _ = writeln!(summary, "brightness_ch  {:.9}", b.value);
        }
        None => summary.push_str("brightness_ch  absent\n"),
    }
    let _ = writeln!(summary, "align          {:.9}", align.value);
    let _ = writeln!(summary, "recon          {:.9}", recon.value);
    let _ = writeln!(summary, "overall        {:.9}", overall.value);
    for w in &warnings {
        let _ = writeln!(summary, "warning: {w}");
    }
    let report = LossOutput {
        inputs: LossInputs {
            shadow: shown(shadow),
            free: shown(free),
            result: result.map(shown),
            cropped_to: cropped.map(|_| shape_of(&f)),
        },
        frequency,
        brightness_ch,
        align,
        recon,
        overall,
        warnings,
    };
    finish("loss", &report, summary, EXIT_OK, out)
}

const CSV_COLUMNS: [&str; 12] = [
    "name",
    "mask_source",
    "psnr_s",
    "psnr_ns",
    "psnr_all",
    "rmse_s",
    "rmse_ns",
    "rmse_all",
    "ssim_all",
    "count_s",
    "count_ns",
    "count_all",
];

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| round_sig(x).to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, report: &DatasetReport) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in &report.per_image {
        let m = &r.metrics;
        w.write_record([
            r.name.clone(),
            r.mask_source.clone(),
            opt_cell(m.psnr_s),
            opt_cell(m.psnr_ns),
            opt_cell(Some(m.psnr_all)),
            opt_cell(m.rmse_s),
            opt_cell(m.rmse_ns),
            opt_cell(Some(m.rmse_all)),
            opt_cell(Some(m.ssim_all)),
            m.count_s.to_string(),
            m.count_ns.to_string(),
            m.count_all.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn eval(dataset: &Path, csv_path: Option<&Path>, cfg: &Config, out: &Path) -> Result<Outcome, CliError> {
    let manifest = if dataset.is_dir() {
        Manifest::from_directory(dataset)?
    } else {
        Manifest::from_json_file(dataset)?
    };
    let report = evaluate_dataset(&manifest, &cfg.eval_options());
    let code = if report.per_image.is_empty() {
        if report.errors.iter().all(|e| e.io) {
            EXIT_IO
        } else {
            EXIT_VALIDATION
        }
    } else {
        EXIT_OK
    };
    if let Some(p) = csv_path {
        write_csv(p, &report)?;
    }
    let mut summary = format!(
        "{}: {} evaluated, {} failed (rmse space {})\n",
        report.dataset,
        report.per_image.len(),
        report.errors.len(),
        cfg.metrics.rmse_space
    );
    if let Some(a) = &report.aggregate {
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(
            summary,
            "  PSNR S {} NS {} ALL {:.4}\n  RMSE S {} NS {} ALL {:.4}\n  SSIM {:.4}",
            cell(a.psnr_s),
            cell(a.psnr_ns),
            a.psnr_all,
            cell(a.rmse_s),
            cell(a.rmse_ns),
            a.rmse_all,
            a.ssim_all
        );
    }
    for e in &report.errors {
        let _ = writeln!(summary, "  error {}: {}", e.name, e.message);
    }
    let value = json!({
        "rmse_space": cfg.metrics.rmse_space.to_string(),
        "threshold": cfg.metrics.threshold,
        "report": report,
    });
    finish("eval", &value, summary, code, out)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn wadm_demo(
    input: Option<&Path>,
    params: Option<&Path>,
    seed: u64,
    c_out: usize,
    size: usize,
    channels: usize,
    out: &Path,
) -> Result<Outcome, CliError> {
    if c_out == 0 {
        return Err(CliError::validation("--c-out must be positive"));
    }
    let (x, source) = match input {
        Some(p) => (FeatureMap::from_image(&load_image(p)?), shown(p)),
        None => {
            if size == 0 || channels == 0 {
                return Err(CliError::validation("--size and --channels must be positive"));
            }
            let img = shadowfreq_core::synthetic::random_image(seed, size, size, channels, -1.0, 1.0);
            (FeatureMap::from_image(&img), format!("synthetic(seed={seed})"))
        }
    };
    let [b, c, h, w] = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(CliError::validation(format!(
            "input is {h}x{w}: the module needs even height and width"
        )));
    }
    let (p, param_source) = match params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            (WadmParams::from_json(&text, c, c_out)?, shown(path))
        }
        None => (WadmParams::seeded(seed, c, c_out)?, format!("seeded({seed})")),
    };
    let trace = wadm_forward_traced(&x, &p)?;
    let expected = [b, c_out, h / 2, w / 2];
    let shape_ok = trace.output.shape() == expected;
    let finite = trace.output.data().iter().all(|v| v.is_finite());
    let contraction = trace
        .gated
        .data()
        .iter()
        .zip(trace.features.data())
        .all(|(g, f)| g.abs() <= f.abs());
    let zero = OffsetField::zeros(b, p.deform.taps(), trace.pooled.height(), trace.pooled.width());
    let zero_diff = max_abs_diff(
        deformable_conv(&trace.pooled, &zero, &p.deform)?.data(),
        conv2d(&trace.pooled, &p.deform)?.data(),
    );
    let zero_ok = zero_diff < 1e-12;
    let n = trace.output.data().len() as f64;
    let mean = trace.output.data().iter().sum::<f64>() / n;
    let std = (trace
        .output
        .data()
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let all_ok = shape_ok && finite && contraction && zero_ok;
    let report = json!({
        "input": source,
        "parameters": param_source,
        "input_shape": [b, c, h, w],
        "expected_output_shape": expected,
        "output_shape": trace.output.shape(),
        "checks": {
            "shape_contract": shape_ok,
            "finite": finite,
            "gating_contraction": contraction,
            "zero_offset_equivalence": zero_ok,
            "zero_offset_max_abs_diff": zero_diff,
        },
        "output_mean": mean,
        "output_std": std,
    });
    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    let summary = format!(
        "{:?} -> {:?}\n  shape contract      {}\n  finite              {}\n  gating contraction  {}\n  zero-offset conv    {} (max diff {:.3e})\n",
        [b, c, h, w],
        trace.output.shape(),
        mark(shape_ok),
        mark(finite),
        mark(contraction),
        mark(zero_ok),
        zero_diff
    );
    let code = if all_ok { EXIT_OK } else { EXIT_INTERNAL };
    finish("wadm_demo", &report, summary, code, out)
}

fn binary_image(h: usize, w: usize, mask: &[bool]) -> Result<Image, CliError> {
    Ok(Image::new(
        h,
        w,
        1,
        ColorSpace::Srgb,
        mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )?)
}

fn synth(seed: u64, count: usize, size: usize, out: &Path) -> Result<Outcome, CliError> {
    if count == 0 || size < 4 || size % 2 != 0 {
        return Err(CliError::validation(
            "--count must be positive and --size even and at least 4",
        ));
    }
    let aistd = out.join("aistd");
    let srd = out.join("srd");
    for dir in [
        aistd.join("shadow"),
        aistd.join("mask"),
        aistd.join("shadow_free"),
        srd.join("shadow"),
        srd.join("shadow_free"),
    ] {
        ensure_dir(&dir)?;
    }
    let mut entries = Vec::new();
    for i in 0..count {
        let pair_seed = seed.wrapping_mul(1000).wrapping_add(i as u64);
        // Alternate smooth textured pairs with flat Planckian scenes.
        let (shadow, free, mask) = if i % 2 == 0 {
            let p = smooth_shadow_pair(pair_seed, size, size);
            (p.shadow, p.free, p.mask)
        } else {
            let s = planckian_scene(pair_seed, size, size);
            (s.shadow, s.free, s.mask)
        };
        let name = format!("pair_{i:03}.png");
        for root in [&aistd, &srd] {
            save_image(&shadow, root.join("shadow").join(&name))?;
            save_image(&free, root.join("shadow_free").join(&name))?;
        }
        save_image(&binary_image(size, size, &mask)?, aistd.join("mask").join(&name))?;
        entries.push(ManifestEntry {
            name: name.clone(),
            shadow: PathBuf::from("shadow").join(&name),
            free: PathBuf::from("shadow_free").join(&name),
            mask: Some(PathBuf::from("mask").join(&name)),
            result: None,
        });
    }
    let manifest = Manifest {
        root: PathBuf::from("aistd"),
        dataset: "synthetic".into(),
        entries,
    };
    let manifest_text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::internal(format!("serialize manifest: {e}")))?;
    write_text(&out.join("manifest.json"), &(manifest_text + "\n"))?;
    let report: Value = json!({
        "seed": seed,
        "count": count,
        "size": size,
        "layouts": ["aistd", "srd"],
        "manifest": "manifest.json",
    });
    let summary = format!("wrote {count} pairs of {size}x{size} under {}\n", out.display());
    finish("synth", &report, summary, EXIT_OK, out)
}
