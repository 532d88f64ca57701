//! 2D discrete Fourier analysis and the focal spectral weight matrix.
//!
//! The forward transform is unnormalized,
//! `F(u,v) = sum_x sum_y f(x,y) exp(-2 pi i (u x / M + v y / N))`, and the
//! inverse carries the full `1 / (M N)` factor. Bin `(0, 0)` is DC; no
//! spectrum is ever shifted.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::imagecore::{ColorSpace, Image};

/// Complex `rows x cols` frequency grid in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    rows: usize,
    cols: usize,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(rows: usize, cols: usize, values: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "spectrum {rows}x{cols} with {} values",
                values.len()
            )));
        }
        Ok(Spectrum { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.values[u * self.cols + v]
    }

    fn require_same_shape(&self, other: &Spectrum) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "spectra {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// `log(1 + |F|)` affinely mapped to `[0, 1]`, as a single-channel image.
    pub fn log_magnitude_image(&self) -> Image {
        let mags = self.values.iter().map(|z| z.norm().ln_1p()).collect();
        Image::new(self.rows, self.cols, 1, ColorSpace::Linear, mags)
            .expect("spectrum shape is valid")
            .normalized_for_display()
    }
}

/// Non-negative real weights over the frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

fn transform_in_place(data: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(cols, direction);
    for row in data.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(rows, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for (r, slot) in column.iter_mut().enumerate() {
            *slot = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for (r, z) in column.iter().enumerate() {
            data[r * cols + c] = *z;
        }
    }
}

/// Forward DFT of a raw row-major plane.
pub fn dft2_plane(plane: &[f64], rows: usize, cols: usize) -> Spectrum {
    assert_eq!(plane.len(), rows * cols, "plane length must equal rows * cols");
    let mut values: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(&mut values, rows, cols, FftDirection::Forward);
    Spectrum { rows, cols, values }
}

pub fn dft2(channel: &Image) -> Result<Spectrum> {
    if channel.channels() != 1 {
        return Err(Error::Shape(format!(
            "dft2 takes a single channel, got {}",
            channel.channels()
        )));
    }
    Ok(dft2_plane(channel.data(), channel.height(), channel.width()))
}

/// Inverse DFT with `1 / (M N)` normalization; keeps the real part.
pub fn idft2(spec: &Spectrum) -> Result<Image> {
    let mut values = spec.values.clone();
    transform_in_place(&mut values, spec.rows, spec.cols, FftDirection::Inverse);
    let scale = 1.0 / (spec.rows * spec.cols) as f64;
    let data = values.iter().map(|z| z.re * scale).collect();
    Image::new(spec.rows, spec.cols, 1, ColorSpace::Linear, data)
}

/// `w(u,v) = |F_r(u,v) - F_f(u,v)|^alpha`, with `0^0 = 1`.
pub fn spectral_weight(sr: &Spectrum, sf: &Spectrum, alpha: f64) -> Result<WeightMatrix> {
    sr.require_same_shape(sf)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "spectral weight exponent must be finite and >= 0, got {alpha}"
        )));
    }
    let values = sr
        .values
        .iter()
        .zip(&sf.values)
        .map(|(a, b)| (a - b).norm().powf(alpha))
        .collect();
    Ok(WeightMatrix {
        rows: sr.rows,
        cols: sr.cols,
        values,
    })
}

/// Squared complex distance `|F_r - F_f|^2` per bin.
pub fn frequency_distance(sr: &Spectrum, sf: &Spectrum) -> Result<Vec<f64>> {
    sr.require_same_shape(sf)?;
    Ok(sr
        .values
        .iter()
        .zip(&sf.values)
        .map(|(a, b)| (a - b).norm_sqr())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(rows: usize, cols: usize, data: Vec<f64>) -> Image {
        Image::new(rows, cols, 1, ColorSpace::Linear, data).unwrap()
    }

    #[test]
    fn constant_is_dc_only() {
        let img = plane(3, 5, vec![0.25; 15]);
        let s = dft2(&img).unwrap();
        assert!((s.get(0, 0).re - 15.0 * 0.25).abs() < 1e-9);
        for (i, z) in s.values().iter().enumerate().skip(1) {
            assert!(z.norm() < 1e-9, "bin {i}: {z}");
        }
        let back = idft2(&s).unwrap();
        assert!(back.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn two_point_by_hand() {
        let s = dft2(&plane(1, 2, vec![1.0, 1.0])).unwrap();
        assert!((s.get(0, 0) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(s.get(0, 1).norm() < 1e-15);
        let s = dft2(&plane(1, 2, vec![1.0, 0.0])).unwrap();
        assert!((s.get(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((s.get(0, 1) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn multichannel_rejected() {
        let img = Image::zeros(2, 2, 3, ColorSpace::Linear).unwrap();
        assert!(dft2(&img).is_err());
    }

    #[test]
    fn weights() {
        let a = Spectrum::new(1, 2, vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let b = Spectrum::new(1, 2, vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(spectral_weight(&a, &b, 1.0).unwrap().values, vec![1.0, 1.0]);
        assert_eq!(spectral_weight(&a, &a, 1.0).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(spectral_weight(&a, &a, 0.0).unwrap().values, vec![1.0, 1.0]);
        let c = Spectrum::new(2, 1, vec![Complex64::new(0.0, 0.0); 2]).unwrap();
        assert!(spectral_weight(&a, &c, 1.0).is_err());
        assert!(spectral_weight(&a, &b, -1.0).is_err());
    }

    #[test]
    fn conjugate_symmetry_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (m, n) in [(6, 10), (8, 8), (7, 3)] {
            let data: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let energy: f64 = data.iter().map(|v| v * v).sum();
            let s = dft2(&plane(m, n, data)).unwrap();
            for u in 0..m {
                for v in 0..n {
                    let mirror = s.get((m - u) % m, (n - v) % n).conj();
                    assert!((s.get(u, v) - mirror).norm() < 1e-9);
                }
            }
            let spectral: f64 = s.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / (m * n) as f64;
            assert!((energy - spectral).abs() < 1e-9);
        }
    }
}
