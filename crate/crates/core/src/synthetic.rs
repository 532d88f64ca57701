//! Seeded synthetic scenes: textured images with smooth multiplicative
//! shadows, flat-texture scenes with a tinted shadow band, and planted
//! log-chromaticity point clouds. Every generator is a pure function of
//! its seed.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::chromaticity::{plane_coords, LogChromaPoints};
use crate::imagecore::{ColorSpace, Image};
use crate::stats::mean_std;

/// A shadowed image, its shadow-free counterpart and the binary shadow region.
#[derive(Debug, Clone)]
pub struct ShadowPair {
    pub shadow: Image,
    pub free: Image,
    /// Row-major, `true` inside the shadow.
    pub mask: Vec<bool>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sinusoidal texture with a soft elliptical multiplicative shadow.
pub fn smooth_shadow_pair(seed: u64, height: usize, width: usize) -> ShadowPair {
    let mut rng = rng_for(seed, 1);
    let size = height.min(width) as f64;
    let base: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(0.35..0.65));
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.03..0.08),
                rng.random_range(2.0..16.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                rng.random_range(2.0..16.0),
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    let noise: Vec<f64> = (0..height * width * 3)
        .map(|_| rng.random_range(-0.04..0.04))
        .collect();
    let free = Image::from_fn(height, width, 3, ColorSpace::Srgb, |r, c, k| {
        let (y, x) = (r as f64 / size, c as f64 / size);
        let texture: f64 = waves
            .iter()
            .map(|(amp, fx, fy, phase)| amp * (TAU * (fx * x + fy * y) + phase + k as f64).sin())
            .sum();
        (base[k] + texture + noise[(k * height + r) * width + c]).clamp(0.02, 0.98)
    })
    .expect("valid synthetic shape");

    let depth = rng.random_range(0.35..0.6);
    let center = (
        rng.random_range(0.3..0.7) * height as f64,
        rng.random_range(0.3..0.7) * width as f64,
    );
    let radii = (
        rng.random_range(0.2..0.35) * size,
        rng.random_range(0.2..0.35) * size,
    );
    let softness = 0.06 * size;
    let tint = [1.15, 1.0, 0.8];
    let coverage = |r: usize, c: usize| {
        let dy = (r as f64 + 0.5 - center.0) / radii.0;
        let dx = (c as f64 + 0.5 - center.1) / radii.1;
        let dist = ((dx * dx + dy * dy).sqrt() - 1.0) * radii.0.min(radii.1);
        1.0 / (1.0 + (dist / softness).exp())
    };
    let shadow = Image::from_fn(height, width, 3, ColorSpace::Srgb, |r, c, k| {
        let s: f64 = 1.0 - depth * coverage(r, c);
        free.get(r, c, k) * s.powf(tint[k])
    })
    .expect("valid synthetic shape");
    let mask = (0..height * width)
        .map(|i| coverage(i / width, i % width) > 0.5)
        .collect();
    ShadowPair { shadow, free, mask }
}

/// Points made of a few base chromaticities, each smeared along the
/// illumination direction `theta`, plus small isotropic noise. The
/// minimum-entropy projection axis is `theta + pi / 2`.
pub fn planted_chroma_points(seed: u64, count: usize, theta: f64) -> LogChromaPoints {
    let mut rng = rng_for(seed, 2);
    let bases: Vec<[f64; 2]> = (0..5)
        .map(|_| {
            let r = 0.25 * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..TAU);
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let (s, c) = theta.sin_cos();
    let coords = (0..count)
        .map(|i| {
            let base = bases[i % bases.len()];
            let t = rng.random_range(-1.0..1.0);
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            [base[0] + t * c + 0.004 * nx, base[1] + t * s + 0.004 * ny]
        })
        .collect();
    LogChromaPoints::from_coords(coords)
}

/// Peak sensitivities of the red, green and blue sensors, in nm.
pub const SENSOR_WAVELENGTHS: [f64; 3] = [610.0, 540.0, 450.0];

/// Second radiation constant `hc/k`, in nm K.
pub const SECOND_RADIATION_CONSTANT: f64 = 1.4388e7;

/// Direct sunlight color temperature, in K.
pub const SUN_TEMPERATURE: f64 = 5500.0;

/// Zero-mean log-sensor response to moving from a blackbody at `from` kelvin
/// to one at `to` kelvin (Wien approximation).
pub fn planckian_log_shift(from: f64, to: f64) -> [f64; 3] {
    let d = SECOND_RADIATION_CONSTANT * (1.0 / from - 1.0 / to);
    let raw = SENSOR_WAVELENGTHS.map(|l| d / l);
    let mean = raw.iter().sum::<f64>() / 3.0;
    raw.map(|v| v - mean)
}

/// Plane angle of the illuminant shift, in `[0, pi)`.
pub fn planckian_illuminant_angle() -> f64 {
    let [x, y] = plane_coords(&planckian_log_shift(SUN_TEMPERATURE, 2.0 * SUN_TEMPERATURE));
    y.atan2(x).rem_euclid(PI)
}

/// Plane angle of the illumination-invariant axis, in `[0, pi)`.
pub fn planckian_invariant_angle() -> f64 {
    (planckian_illuminant_angle() + FRAC_PI_2).rem_euclid(PI)
}

/// A flat-texture scene with a vertical shadow band that both dims and
/// cools the light, as when direct sun gives way to skylight.
#[derive(Debug, Clone)]
pub struct PlanckianScene {
    pub shadow: Image,
    pub free: Image,
    pub mask: Vec<bool>,
    /// Columns `[band.0, band.1)` are in shadow.
    pub band: (usize, usize),
}

impl PlanckianScene {
    /// Columns of a strip straddling the band's hard left edge.
    pub fn boundary_columns(&self) -> std::ops::Range<usize> {
        let w = self.shadow.width();
        let half = (w / 16).max(2);
        self.band.0.saturating_sub(half)..(self.band.0 + half).min(w)
    }

    /// Standard deviation of `plane` along each row of the boundary strip,
    /// averaged over rows: the variation seen when crossing the edge.
    pub fn across_boundary_std(&self, plane: &[f64]) -> f64 {
        let (h, w) = (self.shadow.height(), self.shadow.width());
        let cols = self.boundary_columns();
        (0..h)
            .map(|r| mean_std(cols.clone().map(|c| plane[r * w + c])).1)
            .sum::<f64>()
            / h as f64
    }
}

/// Horizontal stripes of distinct flat surface colors with mild per-pixel
/// texture, crossed by a vertical shadow band with a hard left edge and a
/// linear penumbra, so every surface traces a segment along the illuminant
/// direction.
pub fn planckian_scene(seed: u64, height: usize, width: usize) -> PlanckianScene {
    let mut rng = rng_for(seed, 3);
    let stripe = (height / 16).max(1);
    let surfaces: Vec<[f64; 3]> = (0..height.div_ceil(stripe))
        .map(|_| [0, 1, 2].map(|_| rng.random_range(0.35..0.75)))
        .collect();
    let grain: Vec<f64> = (0..height * width * 3)
        .map(|_| 1.0 + 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let free = Image::from_fn(height, width, 3, ColorSpace::Srgb, |r, c, k| {
        surfaces[r / stripe][k] * grain[(k * height + r) * width + c]
    })
    .expect("valid synthetic shape");

    let band = (width / 4, width);
    let depth = rng.random_range(0.45..0.6f64).ln();
    let sky = rng.random_range(12000.0..20000.0);
    let log_cast = planckian_log_shift(SUN_TEMPERATURE, sky);
    // Full shadow at the band's left edge, fading linearly to none at its right edge.
    let strength = |c: usize| {
        if (band.0..band.1).contains(&c) {
            1.0 - (c - band.0) as f64 / (band.1 - band.0) as f64
        } else {
            0.0
        }
    };
    let shadow = Image::from_fn(height, width, 3, ColorSpace::Srgb, |r, c, k| {
        free.get(r, c, k) * (strength(c) * (depth + log_cast[k])).exp()
    })
    .expect("valid synthetic shape");
    let mask = (0..height * width)
        .map(|i| (band.0..band.1).contains(&(i % width)))
        .collect();
    PlanckianScene {
        shadow,
        free,
        mask,
        band,
    }
}

/// Uniform random image in `[lo, hi)`.
pub fn random_image(seed: u64, height: usize, width: usize, channels: usize, lo: f64, hi: f64) -> Image {
    let mut rng = rng_for(seed, 4);
    let space = if lo >= 0.0 && hi <= 1.0 {
        ColorSpace::Srgb
    } else {
        ColorSpace::Linear
    };
    Image::from_fn(height, width, channels, space, |_, _, _| rng.random_range(lo..hi))
        .expect("valid synthetic shape")
}

/// Angle distance modulo pi.
pub fn axial_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}
