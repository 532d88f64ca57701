//! sRGB <-> CIE L*a*b* (D65) through linear RGB and XYZ.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};

use super::{ColorSpace, Image};
use crate::error::{Error, Result};

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const DELTA: f64 = 6.0 / 29.0;

// Encoded-domain breakpoint of the sRGB transfer curve. The linear-domain
// breakpoint is derived from it so both directions switch branches at the
// same point.
const ENCODED_KNEE: f64 = 0.04045;
const LINEAR_KNEE: f64 = ENCODED_KNEE / 12.92;

struct Tables {
    to_xyz: Matrix3<f64>,
    to_rgb: Matrix3<f64>,
    white: Vector3<f64>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let to_xyz = Matrix3::from_fn(|r, c| SRGB_TO_XYZ[r][c]);
        let to_rgb = to_xyz.try_inverse().expect("sRGB matrix is invertible");
        // Reference white is the image of RGB (1,1,1) so white maps to a* = b* = 0.
        let white = to_xyz * Vector3::repeat(1.0);
        Tables {
            to_xyz,
            to_rgb,
            white,
        }
    })
}

#[inline]
fn decode_gamma(v: f64) -> f64 {
    if v <= ENCODED_KNEE {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn encode_gamma(v: f64) -> f64 {
    if v <= LINEAR_KNEE {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA.powi(3) {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t.powi(3)
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

pub(crate) fn srgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let t = tables();
    let lin = Vector3::new(decode_gamma(rgb[0]), decode_gamma(rgb[1]), decode_gamma(rgb[2]));
    let xyz = t.to_xyz * lin;
    let fx = lab_f(xyz.x / t.white.x);
    let fy = lab_f(xyz.y / t.white.y);
    let fz = lab_f(xyz.z / t.white.z);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Unclamped inverse; out-of-gamut colors may leave `[0, 1]`.
pub(crate) fn lab_pixel_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let t = tables();
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = Vector3::new(
        t.white.x * lab_f_inv(fx),
        t.white.y * lab_f_inv(fy),
        t.white.z * lab_f_inv(fz),
    );
    let lin = t.to_rgb * xyz;
    [
        encode_gamma(lin.x.max(0.0)),
        encode_gamma(lin.y.max(0.0)),
        encode_gamma(lin.z.max(0.0)),
    ]
}

fn map_pixels(img: &Image, to: ColorSpace, f: impl Fn([f64; 3]) -> [f64; 3]) -> Image {
    let n = img.pixel_count();
    let src = img.data();
    let mut data = vec![0.0; 3 * n];
    for i in 0..n {
        let out = f([src[i], src[n + i], src[2 * n + i]]);
        data[i] = out[0];
        data[n + i] = out[1];
        data[2 * n + i] = out[2];
    }
    Image::new(img.height(), img.width(), 3, to, data).expect("shape already validated")
}

pub fn rgb_to_lab(img: &Image) -> Result<Image> {
    if img.colorspace() != ColorSpace::Srgb || img.channels() != 3 {
        return Err(Error::ColorSpace(format!(
            "rgb_to_lab needs a 3-channel SRGB image, got {}-channel {:?}",
            img.channels(),
            img.colorspace()
        )));
    }
    Ok(map_pixels(img, ColorSpace::Lab, srgb_pixel_to_lab))
}

/// Inverse of [`rgb_to_lab`]; out-of-gamut colors are clamped to `[0, 1]`.
pub fn lab_to_rgb(img: &Image) -> Result<Image> {
    if img.colorspace() != ColorSpace::Lab || img.channels() != 3 {
        return Err(Error::ColorSpace(format!(
            "lab_to_rgb needs a 3-channel LAB image, got {}-channel {:?}",
            img.channels(),
            img.colorspace()
        )));
    }
    Ok(map_pixels(img, ColorSpace::Srgb, lab_pixel_to_srgb))
}
