//! Shadow-free chromaticity maps.
//!
//! The pipeline flattens brightness on the L and b* channels, maps pixels to
//! geometric-mean log-chromaticity, reduces them to 2D with PCA and picks
//! the projection angle whose 1D histogram has minimum entropy. Projecting
//! every pixel onto that axis removes the illumination direction; the
//! result is re-rendered as an L1-normalized chromaticity image.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imagecore::{lab_to_rgb, mean_filter_normalize, rgb_to_lab, ChannelSet, ColorSpace, Image};
use crate::mask::SoftMask;
use crate::stats::{mean_std, percentile_sorted};

/// Pixels with any channel at or below this value are left out of the
/// log-chromaticity embedding (half an 8-bit quantization step).
pub const CHROMA_FLOOR: f64 = 1.0 / 510.0;

/// Number of candidate angles in the entropy sweep (1 degree apart over `[0, 180)`).
pub const ANGLE_STEPS: usize = 180;

const INV_SQRT_6: f64 = 0.408_248_290_463_863;

/// Orthonormal basis of the plane orthogonal to `(1, 1, 1)`.
const PLANE_BASIS: [[f64; 3]; 2] = [
    [FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0],
    [INV_SQRT_6, INV_SQRT_6, -2.0 * INV_SQRT_6],
];

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Coordinates of a zero-sum log-chromaticity vector in the fixed plane basis.
pub fn plane_coords(chi: &[f64; 3]) -> [f64; 2] {
    [dot3(chi, &PLANE_BASIS[0]), dot3(chi, &PLANE_BASIS[1])]
}

/// Inverse of [`plane_coords`].
pub fn plane_vector(coords: &[f64; 2]) -> [f64; 3] {
    let [u, v] = PLANE_BASIS;
    [
        coords[0] * u[0] + coords[1] * v[0],
        coords[0] * u[1] + coords[1] * v[1],
        coords[0] * u[2] + coords[1] * v[2],
    ]
}

/// Geometric-mean log-chromaticity `log(c / (r g b)^(1/3))`.
pub fn log_chroma_vector(rgb: [f64; 3]) -> [f64; 3] {
    let logs = rgb.map(f64::ln);
    let mean = (logs[0] + logs[1] + logs[2]) / 3.0;
    logs.map(|l| l - mean)
}

/// Per-pixel 2D log-chromaticity coordinates in the fixed plane basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LogChromaPoints {
    pub coords: Vec<[f64; 2]>,
    /// `(row, col)` of each point.
    pub pixel_index: Vec<(usize, usize)>,
    /// Pixels dropped because a channel was at or below [`CHROMA_FLOOR`].
    pub excluded: usize,
}

impl LogChromaPoints {
    /// Wraps bare coordinates (no source image).
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Self {
        let pixel_index = (0..coords.len()).map(|i| (i, 0)).collect();
        LogChromaPoints {
            coords,
            pixel_index,
            excluded: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// The zero-sum 3-vectors the coordinates describe.
    pub fn vectors(&self) -> Vec<[f64; 3]> {
        self.coords.iter().map(plane_vector).collect()
    }
}

pub fn log_chromaticity(img: &Image) -> Result<LogChromaPoints> {
    if img.channels() != 3 {
        return Err(Error::Shape(format!(
            "log-chromaticity needs 3 channels, got {}",
            img.channels()
        )));
    }
    let mut points = LogChromaPoints {
        coords: Vec::new(),
        pixel_index: Vec::new(),
        excluded: 0,
    };
    for r in 0..img.height() {
        for c in 0..img.width() {
            let rgb = [img.get(r, c, 0), img.get(r, c, 1), img.get(r, c, 2)];
            if rgb.iter().any(|&v| v <= CHROMA_FLOOR) {
                points.excluded += 1;
                continue;
            }
            points.coords.push(plane_coords(&log_chroma_vector(rgb)));
            points.pixel_index.push((r, c));
        }
    }
    Ok(points)
}

/// Top-two principal axes of a 3D sample cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaBasis {
    pub mean: [f64; 3],
    /// Orthonormal, in descending eigenvalue order.
    pub axes: [[f64; 3]; 2],
    pub eigenvalues: [f64; 2],
}

impl PcaBasis {
    pub fn project(&self, p: &[f64; 3]) -> [f64; 2] {
        let d = [p[0] - self.mean[0], p[1] - self.mean[1], p[2] - self.mean[2]];
        [dot3(&d, &self.axes[0]), dot3(&d, &self.axes[1])]
    }

    pub fn reconstruct(&self, q: &[f64; 2]) -> [f64; 3] {
        let [a, b] = self.axes;
        [0, 1, 2].map(|i| self.mean[i] + q[0] * a[i] + q[1] * b[i])
    }
}

pub fn pca_project(points: &[[f64; 3]]) -> Result<PcaBasis> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "PCA needs at least 3 samples, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for i in 0..3 {
            mean[i] += p[i];
        }
    }
    mean = mean.map(|m| m / n);
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    cov /= n - 1.0;
    let scale = 1.0 + dot3(&mean, &mean);
    if cov.trace() <= 1e-24 * scale {
        return Err(Error::Degenerate("all PCA samples are identical".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axis = |k: usize| {
        let col = eig.eigenvectors.column(order[k]);
        let mut v = [col[0], col[1], col[2]];
        let norm = dot3(&v, &v).sqrt();
        v = v.map(|x| x / norm);
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = v.map(|x| -x);
            }
        }
        v
    };
    Ok(PcaBasis {
        mean,
        axes: [axis(0), axis(1)],
        eigenvalues: [
            eig.eigenvalues[order[0]].max(0.0),
            eig.eigenvalues[order[1]].max(0.0),
        ],
    })
}

/// Candidate angle for sweep index `k`.
pub fn sweep_angle(k: usize) -> f64 {
    k as f64 * PI / ANGLE_STEPS as f64
}

fn entropy_of_projection(coords: &[[f64; 2]], theta: f64) -> Result<f64> {
    let (s, c) = theta.sin_cos();
    let mut proj: Vec<f64> = coords.iter().map(|p| p[0] * c + p[1] * s).collect();
    proj.sort_by(f64::total_cmp);
    if proj.len() < 2 {
        return Err(Error::Degenerate(format!(
            "entropy needs at least 2 points, got {}",
            proj.len()
        )));
    }
    let lo = percentile_sorted(&proj, 5.0);
    let hi = percentile_sorted(&proj, 95.0);
    let start = proj.partition_point(|&v| v < lo);
    let end = proj.partition_point(|&v| v <= hi);
    let kept = &proj[start..end];
    if kept.len() < 2 {
        return Err(Error::Degenerate(format!(
            "only {} points survive outlier rejection",
            kept.len()
        )));
    }
    let (_, std) = mean_std(kept.iter().copied());
    let (min, max) = (kept[0], kept[kept.len() - 1]);
    let range = max - min;
    if range <= 0.0 || std <= 0.0 {
        return Ok(0.0);
    }
    let n = kept.len() as f64;
    let width = 3.5 * std * n.powf(-1.0 / 3.0);
    let bins = ((range / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &v in kept {
        let idx = (((v - min) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// Shannon entropy (nats) of the points projected onto `(cos theta, sin theta)`,
/// after keeping the middle 90% and binning at the Scott-rule width.
pub fn projection_entropy(points: &LogChromaPoints, theta: f64) -> Result<f64> {
    entropy_of_projection(&points.coords, theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropySweep {
    /// Angle of the minimum-entropy projection axis, in `[0, pi)`.
    pub theta_star: f64,
    /// Entropy at `sweep_angle(k)` for every `k`.
    pub entropy_curve: Vec<f64>,
}

impl EntropySweep {
    pub fn argmin(&self) -> usize {
        argmin_first(&self.entropy_curve)
    }
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    best
}

fn sweep(coords: &[[f64; 2]]) -> Result<EntropySweep> {
    let entropy_curve = (0..ANGLE_STEPS)
        .map(|k| entropy_of_projection(coords, sweep_angle(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropySweep {
        theta_star: sweep_angle(argmin_first(&entropy_curve)),
        entropy_curve,
    })
}

/// Evaluates the projection entropy at every whole degree in `[0, 180)` and
/// returns the first minimizing angle.
pub fn minimize_entropy(points: &LogChromaPoints) -> Result<EntropySweep> {
    sweep(&points.coords)
}

/// Affine per-channel correction `gain * x + bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Compensation {
    pub gain: [f64; 3],
    pub bias: [f64; 3],
}

impl Compensation {
    pub fn identity() -> Self {
        Compensation {
            gain: [1.0; 3],
            bias: [0.0; 3],
        }
    }

    /// `self` applied after `inner`.
    fn compose(&self, inner: &Compensation) -> Compensation {
        Compensation {
            gain: [0, 1, 2].map(|k| self.gain[k] * inner.gain[k]),
            bias: [0, 1, 2].map(|k| self.gain[k] * inner.bias[k] + self.bias[k]),
        }
    }

    fn apply(&self, img: &Image) -> Image {
        let n = img.pixel_count();
        let data = img
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let k = i / n;
                self.gain[k] * v + self.bias[k]
            })
            .collect();
        Image::new(img.height(), img.width(), 3, img.colorspace(), data).expect("shape already validated")
    }
}

/// The projection that removes illumination: every log-chromaticity vector
/// `chi` is replaced by `origin + ((chi - origin) . axis) axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantProjection {
    pub origin: [f64; 3],
    pub axis: [f64; 3],
}

impl InvariantProjection {
    fn project(&self, chi: &[f64; 3]) -> [f64; 3] {
        let d = [
            chi[0] - self.origin[0],
            chi[1] - self.origin[1],
            chi[2] - self.origin[2],
        ];
        let t = dot3(&d, &self.axis);
        [0, 1, 2].map(|i| self.origin[i] + t * self.axis[i])
    }

    /// Angle of the axis in the fixed plane basis, in `[0, pi)`.
    pub fn plane_angle(&self) -> f64 {
        let [x, y] = plane_coords(&self.axis);
        y.atan2(x).rem_euclid(PI)
    }
}

/// A rendered invariant chromaticity image and how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaticityMap {
    /// 3-channel chromaticity, tagged [`ColorSpace::Linear`].
    pub image: Image,
    /// Minimum-entropy angle in the PCA frame, in `[0, pi)`.
    pub theta_star: f64,
    pub entropy_curve: Vec<f64>,
    pub excluded_pixels: usize,
    pub pca: PcaBasis,
    pub projection: InvariantProjection,
    /// Set once [`illumination_compensate`] has run.
    pub compensation: Option<Compensation>,
    /// Whether inputs pass through [`perception_image`] before projection.
    pub brightness_normalized: bool,
}

impl ChromaticityMap {
    /// Renders another image through this map's projection and
    /// compensation, so identical inputs reproduce `self.image` exactly.
    pub fn render_with(&self, img: &Image) -> Result<Image> {
        let perception = self.prepare(img)?;
        let (raw, _) = render_invariant(&perception, &self.projection)?;
        Ok(match &self.compensation {
            Some(comp) => comp.apply(&raw),
            None => raw,
        })
    }
}

impl ChromaticityMap {
    fn prepare(&self, img: &Image) -> Result<Image> {
        if self.brightness_normalized {
            perception_image(img)
        } else {
            require_rgb(img)?;
            Ok(img.clone())
        }
    }
}

fn require_rgb(img: &Image) -> Result<()> {
    if img.colorspace() != ColorSpace::Srgb || img.channels() != 3 {
        return Err(Error::ColorSpace(format!(
            "chromaticity pipeline needs a 3-channel SRGB image, got {}-channel {:?}",
            img.channels(),
            img.colorspace()
        )));
    }
    Ok(())
}

/// Brightness-normalized perception image: L and b* are mean-filter
/// normalized in LAB, then converted back to sRGB.
pub fn perception_image(img: &Image) -> Result<Image> {
    require_rgb(img)?;
    let lab = rgb_to_lab(img)?;
    let flat = mean_filter_normalize(&lab, &ChannelSet::lab_lightness_and_b())?;
    lab_to_rgb(&flat)
}

/// Renders the invariant chromaticity image. Pixels below the chroma floor
/// take the projection origin. Returns the image and the excluded count.
fn render_invariant(perception: &Image, proj: &InvariantProjection) -> Result<(Image, usize)> {
    let (h, w) = (perception.height(), perception.width());
    let n = h * w;
    let mut data = vec![0.0; 3 * n];
    let mut excluded = 0;
    for r in 0..h {
        for c in 0..w {
            let rgb = [0, 1, 2].map(|k| perception.get(r, c, k));
            let chi = if rgb.iter().any(|&v| v <= CHROMA_FLOOR) {
                excluded += 1;
                proj.origin
            } else {
                proj.project(&log_chroma_vector(rgb))
            };
            let e = chi.map(f64::exp);
            let total = e[0] + e[1] + e[2];
            for k in 0..3 {
                data[k * n + r * w + c] = e[k] / total;
            }
        }
    }
    Ok((Image::new(h, w, 3, ColorSpace::Linear, data)?, excluded))
}

/// Full pipeline producing the entropy-minimized invariant map.
pub fn shadowfree_chromaticity(img: &Image) -> Result<ChromaticityMap> {
    chromaticity_map(&perception_image(img)?, true)
}

/// The same projection pipeline applied to the raw image, without
/// brightness normalization; the baseline map for comparisons.
pub fn physics_chromaticity(img: &Image) -> Result<ChromaticityMap> {
    require_rgb(img)?;
    chromaticity_map(img, false)
}

fn chromaticity_map(perception: &Image, brightness_normalized: bool) -> Result<ChromaticityMap> {
    let points = log_chromaticity(perception)?;
    if points
        .coords
        .iter()
        .all(|p| p[0].abs() < 1e-9 && p[1].abs() < 1e-9)
    {
        return Err(Error::Degenerate(
            "image content is gray; chromaticity is undefined".into(),
        ));
    }
    let vectors = points.vectors();
    let pca = pca_project(&vectors)?;
    let reduced: Vec<[f64; 2]> = vectors.iter().map(|v| pca.project(v)).collect();
    let sweep = sweep(&reduced)?;
    let (s, c) = sweep.theta_star.sin_cos();
    let [a0, a1] = pca.axes;
    let axis = [0, 1, 2].map(|i| c * a0[i] + s * a1[i]);
    let projection = InvariantProjection {
        origin: pca.mean,
        axis,
    };
    let (image, excluded_pixels) = render_invariant(perception, &projection)?;
    Ok(ChromaticityMap {
        image,
        theta_star: sweep.theta_star,
        entropy_curve: sweep.entropy_curve,
        excluded_pixels,
        pca,
        projection,
        compensation: None,
        brightness_normalized,
    })
}

/// Pixels treated as shadow-free: the mask's unmasked region when a mask is
/// given, otherwise the brightest half of the image by L*.
fn non_shadow_region(img: &Image, mask: Option<&SoftMask>) -> Result<Vec<usize>> {
    let n = img.pixel_count();
    let region: Vec<usize> = match mask {
        Some(m) => {
            if m.height() != img.height() || m.width() != img.width() {
                return Err(Error::Shape("mask and image sizes differ".into()));
            }
            (0..n).filter(|&i| m.m1()[i] <= 0.0).collect()
        }
        None => {
            let lab = rgb_to_lab(img)?;
            let l = lab.plane(0);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| l[b].total_cmp(&l[a]).then(a.cmp(&b)));
            order.truncate(n.div_ceil(2));
            order.sort_unstable();
            order
        }
    };
    if region.is_empty() {
        return Err(Error::Degenerate("non-shadow region is empty".into()));
    }
    Ok(region)
}

/// Moment-matches each channel of the map to `img` over the non-shadow
/// region, returning the compensated map.
pub fn illumination_compensate(
    map: &ChromaticityMap,
    img: &Image,
    mask: Option<&SoftMask>,
) -> Result<ChromaticityMap> {
    if img.height() != map.image.height() || img.width() != map.image.width() || img.channels() != 3 {
        return Err(Error::Shape(format!(
            "map is {}x{}, image is {}x{}x{}",
            map.image.height(),
            map.image.width(),
            img.height(),
            img.width(),
            img.channels()
        )));
    }
    let region = non_shadow_region(img, mask)?;
    let mut step = Compensation::identity();
    for k in 0..3 {
        let (m_map, s_map) = mean_std(region.iter().map(|&i| map.image.plane(k)[i]));
        let (m_ref, s_ref) = mean_std(region.iter().map(|&i| img.plane(k)[i]));
        let gain = if s_map > 0.0 { s_ref / s_map } else { 1.0 };
        step.gain[k] = gain;
        step.bias[k] = m_ref - gain * m_map;
    }
    let total = match &map.compensation {
        Some(inner) => step.compose(inner),
        None => step,
    };
    Ok(ChromaticityMap {
        image: step.apply(&map.image),
        compensation: Some(total),
        ..map.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn angle_gap(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn gray_pixel_maps_to_origin() {
        let img = Image::new(1, 1, 3, ColorSpace::Srgb, vec![0.4, 0.4, 0.4]).unwrap();
        let pts = log_chromaticity(&img).unwrap();
        assert!(pts.coords[0].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn log_chroma_sums_to_zero_and_ignores_intensity() {
        let chi = log_chroma_vector([0.4, 0.2, 0.1]);
        assert!((chi[0] + chi[1] + chi[2]).abs() < 1e-12);
        let scaled = log_chroma_vector([0.4 * 0.3, 0.2 * 0.3, 0.1 * 0.3]);
        for (a, b) in plane_coords(&chi).iter().zip(plane_coords(&scaled)) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = plane_vector(&plane_coords(&chi));
        for (a, b) in chi.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dark_pixels_are_excluded() {
        let img = Image::new(1, 2, 3, ColorSpace::Srgb, vec![0.5, 0.0, 0.5, 0.5, 0.5, 0.5]).unwrap();
        let pts = log_chromaticity(&img).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts.excluded, 1);
        assert_eq!(pts.pixel_index, vec![(0, 0)]);
        assert!(log_chromaticity(&Image::zeros(2, 2, 1, ColorSpace::Srgb).unwrap()).is_err());
    }

    #[test]
    fn pca_planar_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..200)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), 0.0])
            .collect();
        let basis = pca_project(&pts).unwrap();
        for axis in basis.axes {
            assert!(axis[2].abs() < 1e-9);
        }
        for p in &pts {
            let back = basis.reconstruct(&basis.project(p));
            for i in 0..3 {
                assert!((back[i] - p[i]).abs() < 1e-9);
            }
        }
        assert!(basis.eigenvalues[0] >= basis.eigenvalues[1]);
        let [a, b] = basis.axes;
        assert!(dot3(&a, &b).abs() < 1e-9);
        assert!((dot3(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_rank_one() {
        let p = [1.0, 2.0, 3.0];
        let q = [2.0, 0.0, 5.0];
        let basis = pca_project(&[p, q, p, q, p]).unwrap();
        let diff = [1.0, -2.0, 2.0];
        let cos = dot3(&basis.axes[0], &diff).abs() / 3.0;
        assert!((cos - 1.0).abs() < 1e-9);
        assert!(basis.axes[0][0] > 0.0, "sign convention");
        assert!(basis.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn pca_isotropic_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<[f64; 3]> = (0..10_000)
            .map(|_| [0, 1, 2].map(|_| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let basis = pca_project(&pts).unwrap();
        let [e0, e1] = basis.eigenvalues;
        assert!((e0 - e1) / e0 < 0.1, "{e0} {e1}");
    }

    #[test]
    fn pca_degenerate() {
        assert!(pca_project(&[[1.0, 2.0, 3.0]; 5]).is_err());
        assert!(pca_project(&[[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn single_value_projection_has_zero_entropy() {
        let pts = LogChromaPoints::from_coords(vec![[0.3, -0.2]; 50]);
        assert_eq!(projection_entropy(&pts, 0.7).unwrap(), 0.0);
        let one = LogChromaPoints::from_coords(vec![[0.0, 0.0]]);
        assert!(projection_entropy(&one, 0.0).is_err());
    }

    #[test]
    fn uniform_segment_entropy_is_maximal_when_aligned() {
        let n = 4000;
        let dir = 40f64.to_radians();
        let pts = LogChromaPoints::from_coords(
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    [t * dir.cos(), t * dir.sin()]
                })
                .collect(),
        );
        let aligned = projection_entropy(&pts, dir).unwrap();
        // Scott-rule bins on a uniform: width 3.5 sigma n^-1/3, sigma = range / sqrt(12).
        let kept = 3601.0f64;
        let bins = (12f64.sqrt() / 3.5 * kept.cbrt()).ceil();
        assert!((aligned - bins.ln()).abs() < 0.05, "{aligned} vs ln {bins}");
        let curve = minimize_entropy(&pts).unwrap().entropy_curve;
        let max = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(aligned >= max - 1e-9);
    }

    #[test]
    fn planted_direction_recovered() {
        let theta = 30f64.to_radians();
        let pts = synthetic::planted_chroma_points(5, 10_000, theta);
        let across = projection_entropy(&pts, theta + PI / 2.0).unwrap();
        let along = projection_entropy(&pts, theta).unwrap();
        assert!(across < along);
        let sweep = minimize_entropy(&pts).unwrap();
        assert!(angle_gap(sweep.theta_star, theta + PI / 2.0) <= 2f64.to_radians());
        assert_eq!(sweep.entropy_curve.len(), ANGLE_STEPS);
        assert_eq!(sweep_angle(sweep.argmin()), sweep.theta_star);
    }

    #[test]
    fn rotation_equivariance() {
        let pts = synthetic::planted_chroma_points(9, 5000, 70f64.to_radians());
        let base = minimize_entropy(&pts).unwrap().theta_star;
        for deg in [13.0f64, 95.0] {
            let phi = deg.to_radians();
            let (s, c) = phi.sin_cos();
            let rotated = LogChromaPoints::from_coords(
                pts.coords
                    .iter()
                    .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
                    .collect(),
            );
            let got = minimize_entropy(&rotated).unwrap().theta_star;
            assert!(angle_gap(got, base + phi) <= 1.0001f64.to_radians(), "phi {deg}");
        }
    }

    #[test]
    fn isotropic_noise_still_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = LogChromaPoints::from_coords(
            (0..20_000)
                .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
                .collect(),
        );
        let sweep = minimize_entropy(&pts).unwrap();
        let lo = sweep.entropy_curve.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sweep
            .entropy_curve
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 0.05, "curve spread {}", hi - lo);
    }

    #[test]
    fn gray_image_is_degenerate() {
        let img = Image::from_fn(8, 8, 3, ColorSpace::Srgb, |r, c, _| {
            0.2 + 0.05 * ((r + c) % 4) as f64
        })
        .unwrap();
        let err = shadowfree_chromaticity(&img).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn flat_texture_map_is_smoother_than_input() {
        let scene = synthetic::planckian_scene(21, 48, 48);
        let map = shadowfree_chromaticity(&scene.free).unwrap();
        for k in 0..3 {
            let (_, s_map) = mean_std(map.image.plane(k).iter().copied());
            let (_, s_in) = mean_std(scene.free.plane(k).iter().copied());
            assert!(s_map <= s_in, "channel {k}: {s_map} > {s_in}");
        }
        assert_eq!(map.entropy_curve.len(), ANGLE_STEPS);
        assert_eq!(sweep_angle(argmin_first(&map.entropy_curve)), map.theta_star);
    }

    #[test]
    fn shading_band_is_suppressed() {
        for seed in [22, 23, 24] {
            let scene = synthetic::planckian_scene(seed, 64, 64);
            let across = |img: &Image| {
                (0..3)
                    .map(|k| scene.across_boundary_std(img.plane(k)))
                    .sum::<f64>()
            };
            let s_in = across(&scene.shadow);
            let em = across(&shadowfree_chromaticity(&scene.shadow).unwrap().image);
            let phy = across(&physics_chromaticity(&scene.shadow).unwrap().image);
            assert!(em < 0.5 * s_in && phy < 0.5 * s_in);
        }
    }

    #[test]
    fn compensation_fixed_point_and_gain() {
        let scene = synthetic::planckian_scene(23, 32, 32);
        let map = shadowfree_chromaticity(&scene.shadow).unwrap();
        let reference = map.image.clone().with_colorspace(ColorSpace::Srgb);
        let once = illumination_compensate(&map, &reference, None).unwrap();
        let comp = once.compensation.unwrap();
        for k in 0..3 {
            assert!((comp.gain[k] - 1.0).abs() < 1e-9);
            assert!(comp.bias[k].abs() < 1e-9);
        }
        let halved = ChromaticityMap {
            image: map.image.map(|v| 0.5 * v),
            ..map.clone()
        };
        let fixed = illumination_compensate(&halved, &reference, None).unwrap();
        for g in fixed.compensation.unwrap().gain {
            assert!((g - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compensation_moves_map_toward_input() {
        let scene = synthetic::planckian_scene(24, 64, 64);
        let em = shadowfree_chromaticity(&scene.shadow).unwrap();
        let ic = illumination_compensate(&em, &scene.shadow, None).unwrap();
        let region = non_shadow_region(&scene.shadow, None).unwrap();
        for k in 0..3 {
            let (target, _) = mean_std(region.iter().map(|&i| scene.shadow.plane(k)[i]));
            let (m_ic, _) = mean_std(region.iter().map(|&i| ic.image.plane(k)[i]));
            let (m_em, _) = mean_std(region.iter().map(|&i| em.image.plane(k)[i]));
            assert!((m_ic - target).abs() <= 0.02);
            assert!((m_ic - target).abs() < (m_em - target).abs());
        }
        assert_eq!(ic.render_with(&scene.shadow).unwrap(), ic.image);
    }

    #[test]
    fn compensation_with_empty_region_fails() {
        let scene = synthetic::planckian_scene(25, 16, 16);
        let map = shadowfree_chromaticity(&scene.shadow).unwrap();
        let all_shadow = SoftMask::from_m1(16, 16, vec![1.0; 256]).unwrap();
        assert!(illumination_compensate(&map, &scene.shadow, Some(&all_shadow)).is_err());
    }
}
