//! Per-region image quality: RMSE and PSNR over shadow, non-shadow and
//! whole-image pixels, luminance SSIM, threshold mask extraction and
//! dataset evaluation over AISTD- and SRD-style layouts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{load_image, rgb_to_lab, ColorSpace, Image};

pub const DEFAULT_THRESHOLD: f64 = 30.0;
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<bool>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Shape(format!(
                "mask {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(BinaryMask {
            height,
            width,
            values,
        })
    }

    /// Shadow where the channel mean exceeds one half.
    pub fn from_image(img: &Image) -> Self {
        let ch = img.channels() as f64;
        let values = (0..img.height() * img.width())
            .map(|p| img.planes().map(|pl| pl[p]).sum::<f64>() / ch > 0.5)
            .collect();
        BinaryMask {
            height: img.height(),
            width: img.width(),
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }
}

/// Shadow iff the channel-mean `|free - shadow| * 255` exceeds `t`.
pub fn mask_from_threshold(shadow: &Image, free: &Image, t: f64) -> Result<BinaryMask> {
    if !(0.0..=255.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0, 255], got {t}"
        )));
    }
    shadow.require_same_shape(free, "threshold mask")?;
    let ch = shadow.channels() as f64;
    let values = (0..shadow.height() * shadow.width())
        .map(|p| {
            let d: f64 = shadow
                .planes()
                .zip(free.planes())
                .map(|(s, f)| (f[p] * PEAK - s[p] * PEAK).abs())
                .sum();
            d / ch > t
        })
        .collect();
    BinaryMask::new(shadow.height(), shadow.width(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RmseSpace {
    #[default]
    Rgb,
    Lab,
}

impl FromStr for RmseSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(RmseSpace::Rgb),
            "lab" => Ok(RmseSpace::Lab),
            other => Err(Error::InvalidParameter(format!(
                "rmse space must be rgb or lab, got {other}"
            ))),
        }
    }
}

impl fmt::Display for RmseSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RmseSpace::Rgb => "rgb",
            RmseSpace::Lab => "lab",
        })
    }
}

/// Metrics for one result/truth pair. Region metrics are `None` (and named
/// in `absent`) when the region has no pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub psnr_s: Option<f64>,
    pub psnr_ns: Option<f64>,
    pub psnr_all: f64,
    pub rmse_s: Option<f64>,
    pub rmse_ns: Option<f64>,
    pub rmse_all: f64,
    pub ssim_all: f64,
    pub count_s: usize,
    pub count_ns: usize,
    pub count_all: usize,
    pub rmse_space: RmseSpace,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absent: Vec<String>,
}

/// `10 log10(255^2 / mse)`, capped.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP)
}

/// Per-pixel sum over channels of squared error on the 0-255 scale.
fn squared_errors(result: &Image, truth: &Image) -> Vec<f64> {
    let mut err = vec![0.0; result.height() * result.width()];
    for (a, b) in result.planes().zip(truth.planes()) {
        for (e, (x, y)) in err.iter_mut().zip(a.iter().zip(b)) {
            let d = x * PEAK - y * PEAK;
            *e += d * d;
        }
    }
    err
}

fn lab_squared_errors(result: &Image, truth: &Image) -> Result<Vec<f64>> {
    let (a, b) = (rgb_to_lab(result)?, rgb_to_lab(truth)?);
    let mut err = vec![0.0; a.height() * a.width()];
    for (pa, pb) in a.planes().zip(b.planes()) {
        for (e, (x, y)) in err.iter_mut().zip(pa.iter().zip(pb)) {
            *e += (x - y) * (x - y);
        }
    }
    Ok(err)
}

fn region_mse(err: &[f64], mask: &[bool], want: Option<bool>, channels: usize) -> (Option<f64>, usize) {
    let (sum, n) = err
        .iter()
        .zip(mask)
        .filter(|(_, &m)| want.is_none_or(|w| w == m))
        .fold((0.0, 0usize), |(s, n), (e, _)| (s + e, n + 1));
    if n == 0 {
        (None, 0)
    } else {
        (Some(sum / (n * channels) as f64), n)
    }
}

/// RMSE/PSNR per region and whole-image luminance SSIM. PSNR is always
/// computed in RGB; `space` selects the RMSE color space.
pub fn evaluate_pair(
    result: &Image,
    truth: &Image,
    mask: &BinaryMask,
    space: RmseSpace,
) -> Result<RegionMetrics> {
    result.require_same_shape(truth, "evaluation pair")?;
    if mask.height != result.height() || mask.width != result.width() {
        return Err(Error::Shape(format!(
            "mask {}x{} does not match image {}x{}",
            mask.height,
            mask.width,
            result.height(),
            result.width()
        )));
    }
    if result.colorspace() != ColorSpace::Srgb || truth.colorspace() != ColorSpace::Srgb {
        return Err(Error::ColorSpace("evaluation expects SRGB images".into()));
    }
    let ch = result.channels();
    let rgb = squared_errors(result, truth);
    let rmse_err = match space {
        RmseSpace::Rgb => rgb.clone(),
        RmseSpace::Lab => lab_squared_errors(result, truth)?,
    };
    let m = &mask.values;
    let (mse_s, count_s) = region_mse(&rgb, m, Some(true), ch);
    let (mse_ns, count_ns) = region_mse(&rgb, m, Some(false), ch);
    let (mse_all, count_all) = region_mse(&rgb, m, None, ch);
    let rm = |want| region_mse(&rmse_err, m, want, ch).0.map(f64::sqrt);
    let mut absent = Vec::new();
    if count_s == 0 {
        absent.extend(["psnr_s".to_string(), "rmse_s".to_string()]);
    }
    if count_ns == 0 {
        absent.extend(["psnr_ns".to_string(), "rmse_ns".to_string()]);
    }
    Ok(RegionMetrics {
        psnr_s: mse_s.map(psnr_from_mse),
        psnr_ns: mse_ns.map(psnr_from_mse),
        psnr_all: psnr_from_mse(mse_all.expect("non-empty image")),
        rmse_s: rm(Some(true)),
        rmse_ns: rm(Some(false)),
        rmse_all: rm(None).expect("non-empty image"),
        ssim_all: ssim(result, truth)?,
        count_s,
        count_ns,
        count_all,
        rmse_space: space,
        absent,
    })
}

/// BT.601 luma on the 0-255 scale; single-channel images pass through.
pub fn luminance(img: &Image) -> Vec<f64> {
    if img.channels() == 1 {
        return img.plane(0).iter().map(|v| v * PEAK).collect();
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    (0..r.len())
        .map(|p| (0.299 * r[p] + 0.587 * g[p] + 0.114 * b[p]) * PEAK)
        .collect()
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM over valid window positions. Images smaller than the window
/// use the largest odd window that fits.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.require_same_shape(b, "SSIM")?;
    let (h, w) = (a.height(), a.width());
    let mut size = SSIM_WINDOW.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    let g = gaussian_window(size, SSIM_SIGMA);
    let (x, y) = (luminance(a), luminance(b));
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let (oh, ow) = (h - size + 1, w - size + 1);
    let mut total = 0.0;
    for i in 0..oh {
        for j in 0..ow {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for m in 0..size {
                for n in 0..size {
                    let wt = g[m] * g[n];
                    let p = (i + m) * w + j + n;
                    mx += wt * x[p];
                    my += wt * y[p];
                    xx += wt * x[p] * x[p];
                    yy += wt * y[p] * y[p];
                    xy += wt * x[p] * y[p];
                }
            }
            let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (oh * ow) as f64)
}

/// Where a pair's shadow mask comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaskSource {
    Provided(PathBuf),
    Threshold(f64),
}

impl MaskSource {
    pub fn label(&self) -> String {
        match self {
            MaskSource::Provided(_) => "provided".into(),
            MaskSource::Threshold(t) => format!("threshold({t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shadow: PathBuf,
    pub free: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    /// Image to score against `free`; the shadow input when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<PathBuf>,
}

/// Dataset entries with paths relative to `root`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub root: PathBuf,
    pub dataset: String,
    pub entries: Vec<ManifestEntry>,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pgm"];

fn list_images(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

fn find_subdir(root: &Path, candidates: &[&str], suffix: Option<&str>) -> Option<PathBuf> {
    let direct = candidates.iter().map(|c| root.join(c)).find(|p| p.is_dir());
    direct.or_else(|| {
        let suffix = suffix?;
        let mut hits: Vec<PathBuf> = std::fs::read_dir(root)
            .ok()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_dir()
                    && p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.ends_with(suffix))
            })
            .collect();
        hits.sort();
        hits.into_iter().next()
    })
}

impl Manifest {
    /// Reads a JSON manifest; an empty `root` means the manifest's directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.root = if m.root.as_os_str().is_empty() {
            base.to_path_buf()
        } else {
            base.join(&m.root)
        };
        m.validate()?;
        Ok(m)
    }

    /// Detects an AISTD-style (`shadow`/`mask`/`shadow_free` or
    /// `*_A`/`*_B`/`*_C`) or SRD-style (`shadow`/`shadow_free`) layout.
    pub fn from_directory(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            ));
        }
        let shadow = find_subdir(root, &["shadow", "shadows"], Some("_A"));
        let mask = find_subdir(root, &["mask", "masks"], Some("_B"));
        let free = find_subdir(root, &["shadow_free", "shadowfree", "free", "gt"], Some("_C"));
        let (shadow, free) = match (shadow, free) {
            (Some(s), Some(f)) => (s, f),
            _ => {
                return Err(Error::Format(format!(
                    "{}: expected shadow and shadow_free subdirectories",
                    root.display()
                )))
            }
        };
        let dataset = if mask.is_some() { "aistd" } else { "srd" };
        let rel = |dir: &Path, name: &str| dir.strip_prefix(root).unwrap_or(dir).join(name);
        let entries = list_images(&shadow)?
            .into_iter()
            .map(|name| ManifestEntry {
                shadow: rel(&shadow, &name),
                free: rel(&free, &name),
                mask: mask.as_ref().map(|m| rel(m, &name)),
                result: None,
                name,
            })
            .collect();
        let m = Manifest {
            root: root.to_path_buf(),
            dataset: dataset.into(),
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Format("manifest has no entries".into()));
        }
        if let Some(e) = self
            .entries
            .iter()
            .flat_map(|e| [Some(&e.shadow), Some(&e.free), e.mask.as_ref(), e.result.as_ref()])
            .flatten()
            .find(|p| p.is_absolute())
        {
            return Err(Error::Format(format!(
                "manifest paths must be relative to the root: {}",
                e.display()
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub threshold: f64,
    pub space: RmseSpace,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            threshold: DEFAULT_THRESHOLD,
            space: RmseSpace::Rgb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub name: String,
    pub mask_source: String,
    pub metrics: RegionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryError {
    pub name: String,
    pub message: String,
    /// Whether the failure was at the file boundary.
    pub io: bool,
}

/// Per-image means; a region metric averages only the images where it is
/// present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub images: usize,
    pub psnr_s: Option<f64>,
    pub psnr_ns: Option<f64>,
    pub psnr_all: f64,
    pub rmse_s: Option<f64>,
    pub rmse_ns: Option<f64>,
    pub rmse_all: f64,
    pub ssim_all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset: String,
    pub per_image: Vec<ImageReport>,
    pub aggregate: Option<AggregateMetrics>,
    pub errors: Vec<EntryError>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (s, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn aggregate(per_image: &[RegionMetrics]) -> Option<AggregateMetrics> {
    if per_image.is_empty() {
        return None;
    }
    let all =
        |f: fn(&RegionMetrics) -> f64| mean_of(per_image.iter().map(|m| Some(f(m)))).expect("non-empty");
    Some(AggregateMetrics {
        images: per_image.len(),
        psnr_s: mean_of(per_image.iter().map(|m| m.psnr_s)),
        psnr_ns: mean_of(per_image.iter().map(|m| m.psnr_ns)),
        psnr_all: all(|m| m.psnr_all),
        rmse_s: mean_of(per_image.iter().map(|m| m.rmse_s)),
        rmse_ns: mean_of(per_image.iter().map(|m| m.rmse_ns)),
        rmse_all: all(|m| m.rmse_all),
        ssim_all: all(|m| m.ssim_all),
    })
}

fn evaluate_entry(manifest: &Manifest, entry: &ManifestEntry, opts: &EvalOptions) -> Result<ImageReport> {
    let shadow = load_image(manifest.resolve(&entry.shadow))?;
    let free = load_image(manifest.resolve(&entry.free))?;
    let result = match &entry.result {
        Some(p) => load_image(manifest.resolve(p))?,
        None => shadow.clone(),
    };
    let (mask, source) = match &entry.mask {
        Some(p) => {
            let m = load_image(manifest.resolve(p))?;
            (BinaryMask::from_image(&m), MaskSource::Provided(p.clone()))
        }
        None => (
            mask_from_threshold(&shadow, &free, opts.threshold)?,
            MaskSource::Threshold(opts.threshold),
        ),
    };
    let metrics = evaluate_pair(&result, &free, &mask, opts.space)?;
    Ok(ImageReport {
        name: entry.name.clone(),
        mask_source: source.label(),
        metrics,
    })
}

/// Scores every entry, sorted by name. Failing entries are recorded in
/// `errors` and excluded from the aggregate.
pub fn evaluate_dataset(manifest: &Manifest, opts: &EvalOptions) -> DatasetReport {
    let mut entries: Vec<&ManifestEntry> = manifest.entries.iter().collect();
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let results: Vec<(String, Result<ImageReport>)> = std::thread::scope(|s| {
        let handles: Vec<_> = entries
            .iter()
            .map(|e| (e.name.clone(), s.spawn(|| evaluate_entry(manifest, e, opts))))
            .collect();
        handles
            .into_iter()
            .map(|(name, h)| {
                let r = h
                    .join()
                    .unwrap_or_else(|_| Err(Error::Degenerate("evaluation panicked".into())));
                (name, r)
            })
            .collect()
    });
    let mut per_image = Vec::new();
    let mut errors = Vec::new();
    for (name, r) in results {
        match r {
            Ok(rep) => per_image.push(rep),
            Err(e) => errors.push(EntryError {
                name,
                message: e.to_string(),
                io: e.is_io(),
            }),
        }
    }
    let metrics: Vec<RegionMetrics> = per_image.iter().map(|r| r.metrics.clone()).collect();
    DatasetReport {
        dataset: manifest.dataset.clone(),
        aggregate: aggregate(&metrics),
        per_image,
        errors,
    }
}
