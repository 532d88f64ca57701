use super::{ChannelSet, Image};
use crate::error::{Error, Result};

/// Brightness normalization: on every selected channel, each pixel loses
/// the mean of its 3x3 neighborhood (replicate-padded) and gains the global
/// channel mean. Other channels pass through unchanged.
pub fn mean_filter_normalize(img: &Image, chans: &ChannelSet) -> Result<Image> {
    chans.validate_for(img)?;
    let (h, w) = (img.height(), img.width());
    if h < 3 || w < 3 {
        return Err(Error::Shape(format!(
            "mean filter needs at least 3x3 pixels, got {h}x{w}"
        )));
    }
    let mut data = img.data().to_vec();
    let n = h * w;
    for &k in chans.indices() {
        let plane = img.plane(k);
        let global = plane.iter().sum::<f64>() / n as f64;
        let local = box3_replicate(plane, h, w);
        for (out, (&v, &m)) in data[k * n..(k + 1) * n].iter_mut().zip(plane.iter().zip(&local)) {
            *out = v - m + global;
        }
    }
    Image::new(h, w, img.channels(), img.colorspace(), data)
}

/// 3x3 box mean with replicate padding.
pub(crate) fn box3_replicate(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut sum = 0.0;
            for dr in -1..=1isize {
                let rr = clamp(r as isize + dr, h);
                for dc in -1..=1isize {
                    sum += plane[rr * w + clamp(c as isize + dc, w)];
                }
            }
            out[r * w + c] = sum / 9.0;
        }
    }
    out
}
