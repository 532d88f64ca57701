//! Single-level orthonormal 2D Haar analysis and synthesis.
//!
//! For every 2x2 block `[[p00, p01], [p10, p11]]` of each channel:
//!
//! ```text
//! A = (p00 + p01 + p10 + p11) / 2
//! H = (p00 + p01 - p10 - p11) / 2   top minus bottom
//! V = (p00 - p01 + p10 - p11) / 2   left minus right
//! D = (p00 - p01 - p10 + p11) / 2
//! ```
//!
//! The filter bank is orthonormal, so subband energies sum to the image energy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::imagecore::{ColorSpace, Image};

/// The four half-resolution Haar components of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub a: Image,
    pub h: Image,
    pub v: Image,
    pub d: Image,
    /// Color-space tag restored by [`haar_idwt2`].
    pub source: ColorSpace,
}

impl Subbands {
    pub fn height(&self) -> usize {
        self.a.height()
    }

    pub fn width(&self) -> usize {
        self.a.width()
    }

    pub fn channels(&self) -> usize {
        self.a.channels()
    }

    /// Components in `A, H, V, D` order.
    pub fn components(&self) -> [&Image; 4] {
        [&self.a, &self.h, &self.v, &self.d]
    }

    /// Sum of squared coefficients per component, `A, H, V, D`.
    pub fn energies(&self) -> [f64; 4] {
        self.components().map(|c| c.data().iter().map(|v| v * v).sum())
    }

    fn check_consistent(&self) -> Result<()> {
        let [a, h, v, d] = self.components();
        if !(a.same_shape(h) && a.same_shape(v) && a.same_shape(d)) {
            return Err(Error::Shape(format!(
                "subband shapes differ: A {}x{}x{}, H {}x{}x{}, V {}x{}x{}, D {}x{}x{}",
                a.height(),
                a.width(),
                a.channels(),
                h.height(),
                h.width(),
                h.channels(),
                v.height(),
                v.width(),
                v.channels(),
                d.height(),
                d.width(),
                d.channels()
            )));
        }
        Ok(())
    }
}

pub fn require_even(img: &Image) -> Result<()> {
    let (h, w) = (img.height(), img.width());
    if h < 2 || w < 2 || h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!(
            "Haar decomposition needs even height and width >= 2, got {h}x{w}"
        )));
    }
    Ok(())
}

pub fn haar_dwt2(img: &Image) -> Result<Subbands> {
    require_even(img)?;
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let (hh, hw) = (h / 2, w / 2);
    let n = hh * hw;
    let mut bands = [
        vec![0.0; n * ch],
        vec![0.0; n * ch],
        vec![0.0; n * ch],
        vec![0.0; n * ch],
    ];
    for k in 0..ch {
        let plane = img.plane(k);
        for r in 0..hh {
            let top = &plane[2 * r * w..(2 * r + 1) * w];
            let bottom = &plane[(2 * r + 1) * w..(2 * r + 2) * w];
            for c in 0..hw {
                let (p00, p01) = (top[2 * c], top[2 * c + 1]);
                let (p10, p11) = (bottom[2 * c], bottom[2 * c + 1]);
                let i = k * n + r * hw + c;
                bands[0][i] = (p00 + p01 + p10 + p11) * 0.5;
                bands[1][i] = (p00 + p01 - p10 - p11) * 0.5;
                bands[2][i] = (p00 - p01 + p10 - p11) * 0.5;
                bands[3][i] = (p00 - p01 - p10 + p11) * 0.5;
            }
        }
    }
    let [a, hd, v, d] = bands
        .map(|data| Image::new(hh, hw, ch, ColorSpace::Linear, data).expect("subband shape is consistent"));
    Ok(Subbands {
        a,
        h: hd,
        v,
        d,
        source: img.colorspace(),
    })
}

pub fn haar_idwt2(sb: &Subbands) -> Result<Image> {
    sb.check_consistent()?;
    let (hh, hw, ch) = (sb.height(), sb.width(), sb.channels());
    let (h, w) = (2 * hh, 2 * hw);
    let n = hh * hw;
    let mut data = vec![0.0; h * w * ch];
    let (a, hd, v, d) = (sb.a.data(), sb.h.data(), sb.v.data(), sb.d.data());
    for k in 0..ch {
        let plane = &mut data[k * h * w..(k + 1) * h * w];
        for r in 0..hh {
            for c in 0..hw {
                let i = k * n + r * hw + c;
                let (a, hd, v, d) = (a[i], hd[i], v[i], d[i]);
                plane[2 * r * w + 2 * c] = (a + hd + v + d) * 0.5;
                plane[2 * r * w + 2 * c + 1] = (a + hd - v - d) * 0.5;
                plane[(2 * r + 1) * w + 2 * c] = (a - hd + v - d) * 0.5;
                plane[(2 * r + 1) * w + 2 * c + 1] = (a - hd - v + d) * 0.5;
            }
        }
    }
    Image::new(h, w, ch, sb.source, data)
}

/// Per-subband PSNR between two images. `None` marks identical subbands
/// (infinite PSNR).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubbandSimilarity {
    pub psnr_a: Option<f64>,
    pub psnr_h: Option<f64>,
    pub psnr_v: Option<f64>,
    pub psnr_d: Option<f64>,
}

impl SubbandSimilarity {
    /// PSNRs in `A, H, V, D` order with identical subbands mapped to infinity.
    pub fn as_array(&self) -> [f64; 4] {
        [self.psnr_a, self.psnr_h, self.psnr_v, self.psnr_d].map(|p| p.unwrap_or(f64::INFINITY))
    }
}

/// PSNR of `y` against reference `x`, with the peak taken as the dynamic
/// range of the reference subband.
fn range_psnr(x: &Image, y: &Image) -> Option<f64> {
    let mse = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.data().len() as f64;
    if mse == 0.0 {
        return None;
    }
    let (lo, hi) = x
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let peak = hi - lo;
    Some(10.0 * (peak * peak / mse).log10())
}

pub fn subband_similarity(x: &Image, y: &Image) -> Result<SubbandSimilarity> {
    x.require_same_shape(y, "subband similarity")?;
    let sx = haar_dwt2(x)?;
    let sy = haar_dwt2(y)?;
    Ok(SubbandSimilarity {
        psnr_a: range_psnr(&sx.a, &sy.a),
        psnr_h: range_psnr(&sx.h, &sy.h),
        psnr_v: range_psnr(&sx.v, &sy.v),
        psnr_d: range_psnr(&sx.d, &sy.d),
    })
}
