//! Planar floating-point rasters, file I/O, color conversion and the
//! brightness-normalizing mean filter.

mod color;
mod filter;
mod io;

pub use color::{lab_to_rgb, rgb_to_lab};
pub use filter::mean_filter_normalize;
pub use io::{load_image, save_image};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    /// Gamma-encoded sRGB, normalized to `[0, 1]`.
    Srgb,
    /// CIE L*a*b* (D65) in native ranges.
    Lab,
    /// Unconstrained real values: subbands, chromaticity maps, adjusted images.
    Linear,
}

/// A planar raster. Channel `k` occupies `data[k * h * w..(k + 1) * h * w]`
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    colorspace: ColorSpace,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from planar data. sRGB values are clamped to `[0, 1]`.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        colorspace: ColorSpace,
        mut data: Vec<f64>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!(
                "images carry 1 or 3 channels, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        if colorspace == ColorSpace::Srgb {
            for v in &mut data {
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(Image {
            height,
            width,
            channels,
            colorspace,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize, colorspace: ColorSpace) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            colorspace,
            vec![0.0; height * width * channels],
        )
    }

    /// Builds an image from a closure over `(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        colorspace: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for k in 0..channels {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(r, c, k));
                }
            }
        }
        Self::new(height, width, channels, colorspace, data)
    }

    /// Stacks single-plane buffers into one image.
    pub fn from_planes(
        height: usize,
        width: usize,
        colorspace: ColorSpace,
        planes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let channels = planes.len();
        let mut data = Vec::with_capacity(height * width * channels);
        for plane in planes {
            if plane.len() != height * width {
                return Err(Error::Shape(format!(
                    "plane length {} != {height}x{width}",
                    plane.len()
                )));
            }
            data.extend(plane);
        }
        Self::new(height, width, channels, colorspace, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, k: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.pixel_count())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, k: usize) -> f64 {
        self.data[(k * self.height + row) * self.width + col]
    }

    /// Per-pixel channel vector.
    pub fn pixel(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.channels).map(|k| self.get(row, col, k)).collect()
    }

    /// Same raster under a different tag, re-applying the sRGB clamp when needed.
    pub fn with_colorspace(self, colorspace: ColorSpace) -> Self {
        let Image {
            height,
            width,
            channels,
            data,
            ..
        } = self;
        Image::new(height, width, channels, colorspace, data).expect("shape already validated")
    }

    /// Applies `f` to every sample, keeping shape and tag.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Image::new(self.height, self.width, self.channels, self.colorspace, data)
            .expect("shape already validated")
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub(crate) fn require_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    /// Crops to the centered window of the given size.
    pub fn center_crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "cannot crop {}x{} to {height}x{width}",
                self.height, self.width
            )));
        }
        let r0 = (self.height - height) / 2;
        let c0 = (self.width - width) / 2;
        Image::from_fn(height, width, self.channels, self.colorspace, |r, c, k| {
            self.get(r + r0, c + c0, k)
        })
    }

    /// Largest centered crop with even height and width.
    pub fn crop_to_even(&self) -> Result<Self> {
        self.center_crop(self.height & !1, self.width & !1)
    }

    /// Affinely maps all samples onto `[0, 1]` for inspection. Constant
    /// images map to 0.5.
    pub fn normalized_for_display(&self) -> Self {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        let data = self
            .data
            .iter()
            .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.5 })
            .collect();
        Image::new(self.height, self.width, self.channels, ColorSpace::Srgb, data)
            .expect("shape already validated")
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// A non-empty subset of channel indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSet(Vec<usize>);

impl ChannelSet {
    pub fn new(selected: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut selected: Vec<usize> = selected.into_iter().collect();
        selected.sort_unstable();
        selected.dedup();
        if selected.is_empty() {
            return Err(Error::InvalidParameter("empty channel set".into()));
        }
        Ok(ChannelSet(selected))
    }

    /// L and b* of a LAB image.
    pub fn lab_lightness_and_b() -> Self {
        ChannelSet(vec![0, 2])
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub(crate) fn validate_for(&self, img: &Image) -> Result<()> {
        match self.0.last() {
            Some(&k) if k >= img.channels() => Err(Error::InvalidParameter(format!(
                "channel {k} out of range for {}-channel image",
                img.channels()
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_channel_counts() {
        assert!(Image::new(2, 2, 3, ColorSpace::Srgb, vec![0.0; 11]).is_err());
        assert!(Image::new(2, 2, 2, ColorSpace::Linear, vec![0.0; 8]).is_err());
        assert!(Image::new(0, 2, 1, ColorSpace::Linear, vec![]).is_err());
    }

    #[test]
    fn srgb_values_are_clamped() {
        let img = Image::new(1, 2, 1, ColorSpace::Srgb, vec![-0.5, 1.5]).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
        let lin = Image::new(1, 2, 1, ColorSpace::Linear, vec![-0.5, 1.5]).unwrap();
        assert_eq!(lin.data(), &[-0.5, 1.5]);
    }

    #[test]
    fn planar_indexing() {
        let img = Image::from_fn(2, 3, 3, ColorSpace::Linear, |r, c, k| {
            (100 * k + 10 * r + c) as f64
        })
        .unwrap();
        assert_eq!(img.get(1, 2, 2), 212.0);
        assert_eq!(img.plane(1)[4], 111.0);
        assert_eq!(img.pixel(0, 1), vec![1.0, 101.0, 201.0]);
    }

    #[test]
    fn crop_to_even_is_centered() {
        let img = Image::from_fn(5, 5, 1, ColorSpace::Linear, |r, c, _| (r * 5 + c) as f64).unwrap();
        let even = img.crop_to_even().unwrap();
        assert_eq!((even.height(), even.width()), (4, 4));
        assert_eq!(even.get(0, 0, 0), 0.0);
    }

    #[test]
    fn channel_set_validation() {
        assert!(ChannelSet::new([]).is_err());
        let img = Image::zeros(3, 3, 1, ColorSpace::Linear).unwrap();
        assert!(ChannelSet::new([1]).unwrap().validate_for(&img).is_err());
        assert!(ChannelSet::new([0, 0]).unwrap().validate_for(&img).is_ok());
    }
}
