use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use super::{ColorSpace, Image};
use crate::error::{Error, Result};

/// Reads an 8-bit PNG or a binary PGM (P5) / PPM (P6) file into an sRGB
/// image scaled to `[0, 1]`. PNG alpha channels are discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes).map_err(|msg| Error::decode(path, msg))
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes).map_err(|msg| Error::decode(path, msg))
    } else {
        Err(Error::decode(
            path,
            "unsupported format (expected PNG, binary PGM or binary PPM)",
        ))
    }
}

/// Writes an sRGB image as an 8-bit PNG, encoding `v` as `round(clamp(v, 0, 1) * 255)`.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if img.colorspace() != ColorSpace::Srgb {
        return Err(Error::ColorSpace(format!(
            "{:?} image: convert to SRGB before saving",
            img.colorspace()
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    encoder.set_color(if img.channels() == 3 {
        png::ColorType::Rgb
    } else {
        png::ColorType::Grayscale
    });
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| match e {
        png::EncodingError::IoError(err) => Error::io(path, err),
        other => Error::decode(path, other.to_string()),
    };
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(&interleave_bytes(img)).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn interleave_bytes(img: &Image) -> Vec<u8> {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut out = Vec::with_capacity(h * w * ch);
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                out.push(quantize(img.get(r, c, k)));
            }
        }
    }
    out
}

fn from_interleaved(
    height: usize,
    width: usize,
    src_channels: usize,
    keep: usize,
    bytes: &[u8],
    maxval: f64,
) -> std::result::Result<Image, String> {
    let n = height * width;
    let mut data = vec![0.0; n * keep];
    for (i, px) in bytes.chunks_exact(src_channels).take(n).enumerate() {
        for k in 0..keep {
            data[k * n + i] = f64::from(px[k]) / maxval;
        }
    }
    Image::new(height, width, keep, ColorSpace::Srgb, data).map_err(|e| e.to_string())
}

fn decode_png(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_message)?;
    let depth = reader.info().bit_depth;
    if depth == png::BitDepth::Sixteen {
        return Err("unsupported bit depth 16 (8-bit PNG required)".into());
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| "image too large".to_string())?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_message)?;
    let (src, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => return Err(format!("unsupported color type {other:?}")),
    };
    from_interleaved(
        info.height as usize,
        info.width as usize,
        src,
        keep,
        &buf[..info.buffer_size()],
        255.0,
    )
}

fn png_message(e: png::DecodingError) -> String {
    match e {
        png::DecodingError::IoError(err) if err.kind() == std::io::ErrorKind::UnexpectedEof => {
            "unexpected end of file".into()
        }
        other => {
            let msg = other.to_string();
            if msg.to_lowercase().contains("eof") || msg.contains("end of") {
                format!("unexpected end of file ({msg})")
            } else {
                msg
            }
        }
    }
}

fn decode_pnm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut cursor = PnmHeader { bytes, pos: 2 };
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    let width = cursor.next_number()?;
    let height = cursor.next_number()?;
    let maxval = cursor.next_number()?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval} (8-bit samples required)"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cursor.pos >= bytes.len() {
        return Err("unexpected end of file".into());
    }
    let raster = &bytes[cursor.pos + 1..];
    let needed = width * height * channels;
    if raster.len() < needed {
        return Err(format!(
            "unexpected end of file (raster has {} of {needed} bytes)",
            raster.len()
        ));
    }
    from_interleaved(
        height,
        width,
        channels,
        channels,
        &raster[..needed],
        maxval as f64,
    )
}

struct PnmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmHeader<'_> {
    fn next_number(&mut self) -> std::result::Result<usize, String> {
        loop {
            match self.bytes.get(self.pos) {
                None => return Err("unexpected end of file".into()),
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), None | Some(b'\n')) {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err("malformed PNM header".into());
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "malformed PNM header".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn ppm_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([255, 0, 0, 0, 255, 0, 0, 0, 255, 51, 102, 204]);
        let img = load_image(write(&dir, "a.ppm", &bytes)).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.pixel(0, 0), vec![1.0, 0.0, 0.0]);
        assert_eq!(img.pixel(1, 1), vec![0.2, 0.4, 0.8]);
    }

    #[test]
    fn pgm_zeros_with_comment() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend([0u8; 6]);
        let img = load_image(write(&dir, "z.pgm", &bytes)).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (2, 3, 1));
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncated_files_fail_with_eof() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend([1, 2, 3]);
        let err = load_image(write(&dir, "t.ppm", &bytes)).unwrap_err();
        assert!(err.to_string().contains("unexpected end of file"), "{err}");
        assert!(err.to_string().contains("t.ppm"));

        let img = Image::from_fn(8, 8, 3, ColorSpace::Srgb, |r, c, k| {
            ((r + c + k) % 5) as f64 / 4.0
        })
        .unwrap();
        let p = dir.path().join("full.png");
        save_image(&img, &p).unwrap();
        let png = fs::read(&p).unwrap();
        let err = load_image(write(&dir, "t.png", &png[..png.len() / 2])).unwrap_err();
        assert!(err.to_string().contains("unexpected end of file"), "{err}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_image("/nonexistent/dir/x.png").unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/dir/x.png"));
    }

    #[test]
    fn sixteen_bit_pnm_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend([0, 0]);
        let err = load_image(write(&dir, "d.pgm", &bytes)).unwrap_err();
        assert!(err.to_string().contains("maxval"));
    }

    #[test]
    fn half_encodes_to_128() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(-0.1), 0);
    }

    #[test]
    fn save_rejects_lab() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::zeros(2, 2, 3, ColorSpace::Lab).unwrap();
        let err = save_image(&img, dir.path().join("x.png")).unwrap_err();
        assert!(err.to_string().contains("convert to SRGB before saving"));
    }

    #[test]
    fn png_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(7, 5, 3, ColorSpace::Srgb, |r, c, k| {
            ((r * 31 + c * 17 + k * 7) % 97) as f64 / 96.0
        })
        .unwrap();
        let p = dir.path().join("rt.png");
        save_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert!(img.same_shape(&back));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
