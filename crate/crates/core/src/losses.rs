//! Loss functionals: wavelet detail loss, focal frequency loss, their
//! combination, brightness-chromaticity guidance, mask reconstruction terms,
//! log-cosh statistics alignment and the weighted total.
//!
//! Every loss here is a mean over its elements, so values do not scale with
//! resolution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chromaticity::ChromaticityMap;
use crate::error::{Error, Result};
use crate::imagecore::Image;
use crate::mask::{RegionStats, SoftMask};
use crate::spectrum::{dft2_plane, frequency_distance, spectral_weight};
use crate::wavelet::{haar_dwt2, Subbands};

pub const VD: &str = "vd";
pub const FF: &str = "ff";
pub const FREQUENCY: &str = "frequency";
pub const BRIGHTNESS_CH: &str = "brightness_ch";
pub const PERCEPTUAL: &str = "perceptual";
pub const MSE_W: &str = "mse_w";
pub const SMOOTH: &str = "smooth";
pub const REGULARIZER: &str = "regularizer";
pub const RECON: &str = "recon";
pub const ALIGN: &str = "align";
pub const OVERALL: &str = "overall";

/// Losses that may carry a weight in [`overall_loss`].
pub const WEIGHTABLE: [&str; 8] = [
    FREQUENCY,
    BRIGHTNESS_CH,
    ALIGN,
    RECON,
    PERCEPTUAL,
    MSE_W,
    SMOOTH,
    VD,
];

/// Coefficient on `||M||_2^2` inside the reconstruction loss.
pub const MASK_REGULARIZER_WEIGHT: f64 = 0.01;

/// Masks above this value count double in the weighted MSE.
pub const MSE_EMPHASIS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub name: String,
    pub value: f64,
    pub components: BTreeMap<String, f64>,
    pub parameters: BTreeMap<String, f64>,
    /// Weighted components that were not supplied (overall loss only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absent: Vec<String>,
}

impl LossReport {
    fn new(name: &str, value: f64) -> Self {
        LossReport {
            name: name.to_string(),
            value,
            components: BTreeMap::new(),
            parameters: BTreeMap::new(),
            absent: Vec::new(),
        }
    }

    fn component(mut self, key: &str, value: f64) -> Self {
        self.components.insert(key.to_string(), value);
        self
    }

    fn parameter(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

/// Maps an image to a fixed-length feature vector.
pub trait FeatureExtractor {
    fn id(&self) -> &str;
    fn extract(&self, img: &Image) -> Result<Vec<f64>>;
}

/// Weight-free perceptual features: a three-level 2x2-average pyramid of
/// every channel followed by horizontal and vertical forward differences of
/// the full-resolution image.
#[derive(Debug, Clone, Copy, Default)]
pub struct PyramidGradientExtractor;

impl PyramidGradientExtractor {
    pub const LEVELS: usize = 3;

    /// `(pyramid, gradient)` feature counts for an image shape.
    pub fn layout(height: usize, width: usize, channels: usize) -> (usize, usize) {
        let mut pyramid = 0;
        let (mut h, mut w) = (height, width);
        for level in 0..Self::LEVELS {
            if level > 0 {
                if h < 2 || w < 2 {
                    break;
                }
                h /= 2;
                w /= 2;
            }
            pyramid += h * w * channels;
        }
        let gradient = channels * (height * (width - 1) + (height - 1) * width);
        (pyramid, gradient)
    }
}

fn halve(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (hh, hw) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(hh * hw);
    for r in 0..hh {
        for c in 0..hw {
            let i = 2 * r * w + 2 * c;
            out.push((plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1]) * 0.25);
        }
    }
    out
}

impl FeatureExtractor for PyramidGradientExtractor {
    fn id(&self) -> &str {
        "pyramid3+gradients"
    }

    fn extract(&self, img: &Image) -> Result<Vec<f64>> {
        let (height, width) = (img.height(), img.width());
        let mut features = Vec::new();
        for plane in img.planes() {
            let mut level = plane.to_vec();
            let (mut h, mut w) = (height, width);
            features.extend_from_slice(&level);
            for _ in 1..Self::LEVELS {
                if h < 2 || w < 2 {
                    break;
                }
                level = halve(&level, h, w);
                h /= 2;
                w /= 2;
                features.extend_from_slice(&level);
            }
        }
        for plane in img.planes() {
            for r in 0..height {
                for c in 0..width - 1 {
                    features.push(plane[r * width + c + 1] - plane[r * width + c]);
                }
            }
            for r in 0..height - 1 {
                for c in 0..width {
                    features.push(plane[(r + 1) * width + c] - plane[r * width + c]);
                }
            }
        }
        Ok(features)
    }
}

fn mean_sq_diff(a: &[f64], b: &[f64], scale: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = scale * x - scale * y;
            d * d
        })
        .sum::<f64>()
        / a.len() as f64
}

/// `(1/n) sum (c V_f - c V_r)^2 + (1/n) sum (c D_f - c D_r)^2`, `n` the
/// coefficient count of one subband.
pub fn loss_vd(fake: &Subbands, real: &Subbands, c: f64) -> Result<LossReport> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scaling constant must be > 0, got {c}"
        )));
    }
    fake.v.require_same_shape(&real.v, "wavelet detail loss")?;
    fake.d.require_same_shape(&real.d, "wavelet detail loss")?;
    let v = mean_sq_diff(fake.v.data(), real.v.data(), c);
    let d = mean_sq_diff(fake.d.data(), real.d.data(), c);
    Ok(LossReport::new(VD, v + d)
        .component("v", v)
        .component("d", d)
        .parameter("c", c))
}

/// Focal frequency loss, averaged over channels:
/// `(1/MN) sum w(u,v) |F_r - F_f|^2` with `w = |F_r - F_f|^alpha`.
pub fn loss_ff(real: &Image, fake: &Image, alpha: f64) -> Result<LossReport> {
    real.require_same_shape(fake, "focal frequency loss")?;
    let (m, n) = (real.height(), real.width());
    let mut report = LossReport::new(FF, 0.0).parameter("alpha", alpha);
    let mut total = 0.0;
    for k in 0..real.channels() {
        let sr = dft2_plane(real.plane(k), m, n);
        let sf = dft2_plane(fake.plane(k), m, n);
        let weights = spectral_weight(&sr, &sf, alpha)?;
        let dist = frequency_distance(&sr, &sf)?;
        let channel = weights.values.iter().zip(&dist).map(|(w, d)| w * d).sum::<f64>() / (m * n) as f64;
        report.components.insert(format!("channel_{k}"), channel);
        total += channel;
    }
    report.value = total / real.channels() as f64;
    Ok(report)
}

/// `lambda1 * L_vd(haar(fake), haar(real)) + lambda2 * L_ff(real, fake)`.
pub fn loss_frequency(
    fake: &Image,
    real: &Image,
    lambda1: f64,
    lambda2: f64,
    c: f64,
    alpha: f64,
) -> Result<LossReport> {
    fake.require_same_shape(real, "frequency loss")?;
    let vd = loss_vd(&haar_dwt2(fake)?, &haar_dwt2(real)?, c)?;
    let ff = loss_ff(real, fake, alpha)?;
    Ok(
        LossReport::new(FREQUENCY, lambda1 * vd.value + lambda2 * ff.value)
            .component(VD, vd.value)
            .component(FF, ff.value)
            .parameter("lambda1", lambda1)
            .parameter("lambda2", lambda2)
            .parameter("c", c)
            .parameter("alpha", alpha),
    )
}

/// Mean absolute difference between two chromaticity images.
pub fn chroma_map_distance(a: &Image, b: &Image) -> Result<f64> {
    a.require_same_shape(b, "chromaticity maps")?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.data().len() as f64)
}

/// L1 distance between the output's chromaticity (rendered through the
/// reference map's projection and compensation) and the reference map.
pub fn loss_brightness_ch(output: &Image, reference_map: &ChromaticityMap) -> Result<LossReport> {
    let rendered = reference_map.render_with(output)?;
    let value = chroma_map_distance(&rendered, &reference_map.image)?;
    Ok(LossReport::new(BRIGHTNESS_CH, value).parameter("theta_star", reference_map.theta_star))
}

/// Mean squared difference of extracted features.
pub fn loss_perceptual(pred: &Image, target: &Image, fx: &dyn FeatureExtractor) -> Result<LossReport> {
    let fp = fx.extract(pred)?;
    let ft = fx.extract(target)?;
    if fp.len() != ft.len() || fp.is_empty() {
        return Err(Error::Shape(format!(
            "extractor {} produced {} and {} features",
            fx.id(),
            fp.len(),
            ft.len()
        )));
    }
    Ok(LossReport::new(PERCEPTUAL, mean_sq_diff(&fp, &ft, 1.0)))
}

/// `(1/N) sum W (M_p - M_t)^2` on `m1`, with `W = 2` where `M_p > 0.5`.
pub fn loss_mse_weighted(pred_mask: &SoftMask, true_mask: &SoftMask) -> Result<LossReport> {
    pred_mask.require_same_shape(true_mask)?;
    let sum: f64 = pred_mask
        .m1()
        .iter()
        .zip(true_mask.m1())
        .map(|(&p, &t)| {
            let w = if p > MSE_EMPHASIS_THRESHOLD { 2.0 } else { 1.0 };
            w * (p - t) * (p - t)
        })
        .sum();
    Ok(LossReport::new(MSE_W, sum / pred_mask.m1().len() as f64)
        .parameter("threshold", MSE_EMPHASIS_THRESHOLD))
}

/// Mean L1 forward-difference gradient of `M * S_f`; the trailing row and
/// column differences are zero.
pub fn loss_smooth(mask: &SoftMask, sf: &Image) -> Result<LossReport> {
    let m = mask.m();
    m.require_same_shape(sf, "smoothness loss")?;
    let (h, w) = (sf.height(), sf.width());
    let mut sum = 0.0;
    for (mp, sp) in m.planes().zip(sf.planes()) {
        let prod: Vec<f64> = mp.iter().zip(sp).map(|(a, b)| a * b).collect();
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if c + 1 < w {
                    sum += (prod[i + 1] - prod[i]).abs();
                }
                if r + 1 < h {
                    sum += (prod[i + w] - prod[i]).abs();
                }
            }
        }
    }
    Ok(LossReport::new(SMOOTH, sum / (h * w * 3) as f64))
}

/// `L_smooth + L_perceptual + L_mse_w + 0.01 * mean(M^2)`.
pub fn loss_recon(
    pred_mask: &SoftMask,
    true_mask: &SoftMask,
    sf: &Image,
    fx: &dyn FeatureExtractor,
) -> Result<LossReport> {
    pred_mask.require_same_shape(true_mask)?;
    let smooth = loss_smooth(pred_mask, sf)?.value;
    let perceptual = loss_perceptual(&pred_mask.m(), &true_mask.m(), fx)?.value;
    let mse_w = loss_mse_weighted(pred_mask, true_mask)?.value;
    let m1 = pred_mask.m1();
    let regularizer = MASK_REGULARIZER_WEIGHT * m1.iter().map(|v| v * v).sum::<f64>() / m1.len() as f64;
    Ok(LossReport::new(RECON, smooth + perceptual + mse_w + regularizer)
        .component(SMOOTH, smooth)
        .component(PERCEPTUAL, perceptual)
        .component(MSE_W, mse_w)
        .component(REGULARIZER, regularizer)
        .parameter("regularizer_weight", MASK_REGULARIZER_WEIGHT))
}

/// Numerically stable `ln(cosh(x))`.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `(1/k) sum_l ln cosh(mu_os,l - mu_ws,l)` over the masked-region means.
/// Zero when neither side has a masked region.
pub fn loss_align(adjusted: &RegionStats, reference: &RegionStats) -> Result<LossReport> {
    let (os, ws) = match (&adjusted.masked, &reference.masked) {
        (Some(a), Some(r)) => (a, r),
        (None, None) => return Ok(LossReport::new(ALIGN, 0.0)),
        _ => {
            return Err(Error::Degenerate(
                "alignment needs masked-region statistics on both sides".into(),
            ))
        }
    };
    if os.mean.len() != ws.mean.len() {
        return Err(Error::Shape(format!(
            "{} vs {} channels",
            os.mean.len(),
            ws.mean.len()
        )));
    }
    let k = os.mean.len() as f64;
    let value = os
        .mean
        .iter()
        .zip(&ws.mean)
        .map(|(a, b)| log_cosh(a - b))
        .sum::<f64>()
        / k;
    Ok(LossReport::new(ALIGN, value))
}

/// Weights for the total loss, keyed by loss name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights(pub BTreeMap<String, f64>);

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights(BTreeMap::from([
            (BRIGHTNESS_CH.to_string(), 1.1),
            (FREQUENCY.to_string(), 0.3),
            (ALIGN.to_string(), 0.01),
        ]))
    }
}

/// `sum lambda_i L_i`. Weighted losses missing from `components` count as
/// zero and are listed in `absent`.
pub fn overall_loss(components: &[LossReport], weights: &LossWeights) -> Result<LossReport> {
    if let Some(unknown) = weights.0.keys().find(|k| !WEIGHTABLE.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!(
            "weight for unknown component {unknown}"
        )));
    }
    let mut report = LossReport::new(OVERALL, 0.0);
    for c in components {
        let w = *weights
            .0
            .get(&c.name)
            .ok_or_else(|| Error::InvalidParameter(format!("no weight supplied for component {}", c.name)))?;
        report.value += w * c.value;
        report.components.insert(c.name.clone(), c.value);
        report.parameters.insert(c.name.clone(), w);
    }
    for (name, &w) in &weights.0 {
        if !components.iter().any(|c| &c.name == name) {
            report.absent.push(name.clone());
            report.parameters.insert(name.clone(), w);
        }
    }
    Ok(report)
}
