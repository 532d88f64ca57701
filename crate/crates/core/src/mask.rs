//! Soft shadow masks and masked/unmasked region statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::imagecore::{ColorSpace, Image};
use crate::stats::{mean_std, percentile_sorted};

/// Percentile below which difference values are zeroed.
pub const SOFT_MASK_PERCENTILE: f64 = 5.0;

/// Default `m1` cut separating masked (shadow) from unmasked pixels.
pub const DEFAULT_CUT: f64 = 0.0;

/// Single-channel mask in `[-1, 1]`; the 3-channel form replicates it.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    height: usize,
    width: usize,
    m1: Vec<f64>,
    threshold_value: f64,
}

impl SoftMask {
    pub fn from_m1(height: usize, width: usize, m1: Vec<f64>) -> Result<Self> {
        if m1.len() != height * width {
            return Err(Error::Shape(format!(
                "mask has {} values for {height}x{width}",
                m1.len()
            )));
        }
        if let Some(v) = m1.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("mask value {v} outside [-1, 1]")));
        }
        Ok(SoftMask {
            height,
            width,
            m1,
            threshold_value: f64::NAN,
        })
    }

    /// Maps a binary shadow mask to `+1` (shadow) / `-1` (lit).
    pub fn from_binary(height: usize, width: usize, shadow: &[bool]) -> Result<Self> {
        Self::from_m1(
            height,
            width,
            shadow.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn m1(&self) -> &[f64] {
        &self.m1
    }

    /// The 5th-percentile cut applied during construction (NaN for masks
    /// built directly from values).
    pub fn threshold_value(&self) -> f64 {
        self.threshold_value
    }

    /// `M = [M1, M1, M1]`.
    pub fn m(&self) -> Image {
        let mut data = Vec::with_capacity(3 * self.m1.len());
        for _ in 0..3 {
            data.extend_from_slice(&self.m1);
        }
        Image::new(self.height, self.width, 3, ColorSpace::Linear, data)
            .expect("mask shape already validated")
    }

    /// `(m1 + 1) / 2` as a displayable single-channel image.
    pub fn to_display(&self) -> Image {
        Image::new(
            self.height,
            self.width,
            1,
            ColorSpace::Srgb,
            self.m1.iter().map(|v| (v + 1.0) / 2.0).collect(),
        )
        .expect("mask shape already validated")
    }

    fn require_fits(&self, img: &Image) -> Result<()> {
        if img.height() != self.height || img.width() != self.width {
            return Err(Error::Shape(format!(
                "mask {}x{} vs image {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }

    pub fn require_same_shape(&self, other: &SoftMask) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::Shape(format!(
                "masks {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Builds the soft mask from a shadow / shadow-free pair.
///
/// `d` is the channel-mean of `free - shadow`; values under its 5th
/// percentile are set to zero and the result is mapped affinely onto
/// `[-1, 1]`. A constant map becomes `-1` everywhere.
pub fn compute_soft_mask(shadow: &Image, free: &Image) -> Result<SoftMask> {
    shadow.require_same_shape(free, "soft mask")?;
    if shadow.channels() != 3
        || shadow.colorspace() != ColorSpace::Srgb
        || free.colorspace() != ColorSpace::Srgb
    {
        return Err(Error::ColorSpace(
            "soft mask needs two 3-channel SRGB images".into(),
        ));
    }
    let n = shadow.pixel_count();
    let mut d = vec![0.0; n];
    for k in 0..3 {
        for (acc, (f, s)) in d.iter_mut().zip(free.plane(k).iter().zip(shadow.plane(k))) {
            *acc += f - s;
        }
    }
    d.iter_mut().for_each(|v| *v /= 3.0);

    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let cut = percentile_sorted(&sorted, SOFT_MASK_PERCENTILE);
    for v in &mut d {
        if *v < cut {
            *v = 0.0;
        }
    }
    let (lo, hi) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let m1 = if hi > lo {
        d.iter()
            .map(|&v| ((v - lo) / (hi - lo) * 2.0 - 1.0).clamp(-1.0, 1.0))
            .collect()
    } else {
        vec![-1.0; n]
    };
    Ok(SoftMask {
        height: shadow.height(),
        width: shadow.width(),
        m1,
        threshold_value: cut,
    })
}

/// Per-channel statistics of one region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub count: usize,
}

/// Statistics of the masked (`m1 > cut`) and unmasked regions. An empty
/// region is `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionStats {
    pub cut: f64,
    pub masked: Option<ChannelStats>,
    pub unmasked: Option<ChannelStats>,
}

impl RegionStats {
    pub fn count_masked(&self) -> usize {
        self.masked.as_ref().map_or(0, |s| s.count)
    }

    pub fn count_unmasked(&self) -> usize {
        self.unmasked.as_ref().map_or(0, |s| s.count)
    }
}

fn stats_over(img: &Image, pixels: &[usize]) -> Option<ChannelStats> {
    if pixels.is_empty() {
        return None;
    }
    let (mean, std) = (0..img.channels())
        .map(|k| {
            let plane = img.plane(k);
            mean_std(pixels.iter().map(|&i| plane[i]))
        })
        .unzip();
    Some(ChannelStats {
        mean,
        std,
        count: pixels.len(),
    })
}

fn partition(mask: &SoftMask, cut: f64) -> (Vec<usize>, Vec<usize>) {
    (0..mask.m1.len()).partition(|&i| mask.m1[i] > cut)
}

pub fn region_stats(img: &Image, mask: &SoftMask, cut: f64) -> Result<RegionStats> {
    mask.require_fits(img)?;
    let (masked, unmasked) = partition(mask, cut);
    Ok(RegionStats {
        cut,
        masked: stats_over(img, &masked),
        unmasked: stats_over(img, &unmasked),
    })
}

/// Moves the masked pixels of `img` so that, per channel, their mean and
/// standard deviation equal the target's unmasked statistics. Channels with
/// zero masked spread get a bias-only shift. The result is untagged
/// ([`ColorSpace::Linear`]) so adjusted values are not clamped.
pub fn adjust_region(
    img: &Image,
    mask: &SoftMask,
    target: &RegionStats,
    cut: f64,
) -> Result<(Image, RegionStats)> {
    mask.require_fits(img)?;
    let goal = target
        .unmasked
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("target statistics have an empty unmasked region".into()))?;
    if goal.mean.len() != img.channels() {
        return Err(Error::Shape(format!(
            "target has {} channels, image has {}",
            goal.mean.len(),
            img.channels()
        )));
    }
    let (masked, _) = partition(mask, cut);
    let mut data = img.data().to_vec();
    if let Some(current) = stats_over(img, &masked) {
        let n = img.pixel_count();
        for k in 0..img.channels() {
            let (mu, sigma) = (current.mean[k], current.std[k]);
            let gain = if sigma > 0.0 { goal.std[k] / sigma } else { 1.0 };
            for &i in &masked {
                let v = &mut data[k * n + i];
                *v = (*v - mu) * gain + goal.mean[k];
            }
        }
    }
    let adjusted = Image::new(
        img.height(),
        img.width(),
        img.channels(),
        ColorSpace::Linear,
        data,
    )?;
    let stats = region_stats(&adjusted, mask, cut)?;
    Ok((adjusted, stats))
}
