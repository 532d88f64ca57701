//! Wavelet attention downsampling: Haar subbands, Z-pool, offset and
//! deformable convolution, and sigmoid gating, forward pass only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{ColorSpace, Image};
use crate::wavelet::haar_dwt2;

/// Dense `B x C x H x W` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(batch: usize, channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if batch * channels * height * width == 0 {
            return Err(Error::Shape("feature map dimensions must be non-zero".into()));
        }
        if data.len() != batch * channels * height * width {
            return Err(Error::Shape(format!(
                "feature map {batch}x{channels}x{height}x{width} needs {} values, got {}",
                batch * channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "feature map contains non-finite values".into(),
            ));
        }
        Ok(FeatureMap {
            batch,
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            batch,
            channels,
            height,
            width,
            data: vec![0.0; batch * channels * height * width],
        }
    }

    pub fn from_fn(
        batch: usize,
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(batch * channels * height * width);
        for b in 0..batch {
            for c in 0..channels {
                for i in 0..height {
                    for j in 0..width {
                        data.push(f(b, c, i, j));
                    }
                }
            }
        }
        Self::new(batch, channels, height, width, data)
    }

    /// Batch of one, channels taken from the image planes.
    pub fn from_image(img: &Image) -> Self {
        FeatureMap {
            batch: 1,
            channels: img.channels(),
            height: img.height(),
            width: img.width(),
            data: img.data().to_vec(),
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn index(&self, b: usize, c: usize, i: usize, j: usize) -> usize {
        ((b * self.channels + c) * self.height + i) * self.width + j
    }

    pub fn get(&self, b: usize, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(b, c, i, j)]
    }

    /// One `H x W` plane.
    pub fn plane(&self, b: usize, c: usize) -> &[f64] {
        let start = self.index(b, c, 0, 0);
        &self.data[start..start + self.height * self.width]
    }

    fn plane_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let start = self.index(b, c, 0, 0);
        let len = self.height * self.width;
        &mut self.data[start..start + len]
    }

    /// Value with zero outside the spatial extent.
    #[inline]
    fn at_or_zero(&self, b: usize, c: usize, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i >= self.height as isize || j >= self.width as isize {
            0.0
        } else {
            self.data[self.index(b, c, i as usize, j as usize)]
        }
    }

    /// Bilinear sample with zero outside the spatial extent.
    fn bilinear(&self, b: usize, c: usize, y: f64, x: f64) -> f64 {
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (y0, x0) = (y0 as isize, x0 as isize);
        let mut v = (1.0 - fy) * (1.0 - fx) * self.at_or_zero(b, c, y0, x0);
        if fx != 0.0 {
            v += (1.0 - fy) * fx * self.at_or_zero(b, c, y0, x0 + 1);
        }
        if fy != 0.0 {
            v += fy * (1.0 - fx) * self.at_or_zero(b, c, y0 + 1, x0);
            if fx != 0.0 {
                v += fy * fx * self.at_or_zero(b, c, y0 + 1, x0 + 1);
            }
        }
        v
    }
}

/// Convolution weights `[out][in][m][n]` plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::Shape("kernel channel counts must be non-zero".into()));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Shape(format!("kernel size {kh}x{kw} must be odd")));
        }
        if weights.len() != out_channels * in_channels * kh * kw {
            return Err(Error::Shape(format!(
                "kernel {out_channels}x{in_channels}x{kh}x{kw} needs {} weights, got {}",
                out_channels * in_channels * kh * kw,
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::Shape(format!(
                "kernel needs {out_channels} biases, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "kernel contains non-finite values".into(),
            ));
        }
        Ok(ConvKernel {
            out_channels,
            in_channels,
            kh,
            kw,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(
            out_channels,
            in_channels,
            kh,
            kw,
            vec![0.0; out_channels * in_channels * kh * kw],
            vec![0.0; out_channels],
        )
    }

    /// Uniform values in `[-scale, scale]`.
    pub fn random(
        rng: &mut impl Rng,
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        scale: f64,
    ) -> Result<Self> {
        let weights = (0..out_channels * in_channels * kh * kw)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        let bias = (0..out_channels)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self::new(out_channels, in_channels, kh, kw, weights, bias)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn size(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    pub fn taps(&self) -> usize {
        self.kh * self.kw
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, m: usize, n: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * self.kh + m) * self.kw + n]
    }

    /// Same kernel with all biases zeroed.
    pub fn without_bias(&self) -> Self {
        ConvKernel {
            bias: vec![0.0; self.out_channels],
            ..self.clone()
        }
    }

    fn require_input(&self, x: &FeatureMap) -> Result<()> {
        if self.in_channels != x.channels {
            return Err(Error::Shape(format!(
                "kernel expects {} input channels, feature map has {}",
                self.in_channels, x.channels
            )));
        }
        Ok(())
    }
}

/// Per-location tap displacements. Channel `2t` holds `dy` and `2t + 1`
/// holds `dx` for kernel tap `t = m * kw + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    taps: usize,
    field: FeatureMap,
}

impl OffsetField {
    pub fn from_feature_map(field: FeatureMap) -> Result<Self> {
        if field.channels % 2 != 0 {
            return Err(Error::Shape(format!(
                "offset field needs an even channel count, got {}",
                field.channels
            )));
        }
        Ok(OffsetField {
            taps: field.channels / 2,
            field,
        })
    }

    pub fn zeros(batch: usize, taps: usize, height: usize, width: usize) -> Self {
        OffsetField {
            taps,
            field: FeatureMap::zeros(batch, 2 * taps, height, width),
        }
    }

    /// Same `(dy, dx)` at every location and tap.
    pub fn uniform(batch: usize, taps: usize, height: usize, width: usize, dy: f64, dx: f64) -> Result<Self> {
        let field = FeatureMap::from_fn(
            batch,
            2 * taps,
            height,
            width,
            |_, c, _, _| {
                if c % 2 == 0 {
                    dy
                } else {
                    dx
                }
            },
        )?;
        Self::from_feature_map(field)
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn dy(&self, b: usize, tap: usize, i: usize, j: usize) -> f64 {
        self.field.get(b, 2 * tap, i, j)
    }

    pub fn dx(&self, b: usize, tap: usize, i: usize, j: usize) -> f64 {
        self.field.get(b, 2 * tap + 1, i, j)
    }

    pub fn as_feature_map(&self) -> &FeatureMap {
        &self.field
    }

    pub fn into_feature_map(self) -> FeatureMap {
        self.field
    }
}

/// Per-pixel channel max (channel 0) and mean (channel 1).
pub fn z_pool(x: &FeatureMap) -> FeatureMap {
    let mut out = FeatureMap::zeros(x.batch, 2, x.height, x.width);
    let hw = x.height * x.width;
    for b in 0..x.batch {
        let mut max = vec![f64::NEG_INFINITY; hw];
        let mut sum = vec![0.0; hw];
        for c in 0..x.channels {
            for (p, &v) in x.plane(b, c).iter().enumerate() {
                max[p] = max[p].max(v);
                sum[p] += v;
            }
        }
        out.plane_mut(b, 0).copy_from_slice(&max);
        for (o, s) in out.plane_mut(b, 1).iter_mut().zip(sum) {
            *o = s / x.channels as f64;
        }
    }
    out
}

/// Centered, zero-padded, stride-1 cross-correlation.
pub fn conv2d(x: &FeatureMap, k: &ConvKernel) -> Result<FeatureMap> {
    k.require_input(x)?;
    let (ch, cw) = ((k.kh / 2) as isize, (k.kw / 2) as isize);
    let mut out = FeatureMap::zeros(x.batch, k.out_channels, x.height, x.width);
    for b in 0..x.batch {
        for o in 0..k.out_channels {
            let mut plane = vec![k.bias[o]; x.height * x.width];
            for i in 0..x.height {
                for j in 0..x.width {
                    let mut acc = 0.0;
                    for c in 0..k.in_channels {
                        for m in 0..k.kh {
                            for n in 0..k.kw {
                                let yi = i as isize + m as isize - ch;
                                let xj = j as isize + n as isize - cw;
                                acc += k.weight(o, c, m, n) * x.at_or_zero(b, c, yi, xj);
                            }
                        }
                    }
                    plane[i * x.width + j] += acc;
                }
            }
            out.plane_mut(b, o).copy_from_slice(&plane);
        }
    }
    Ok(out)
}

/// Convolution whose output channels are read as an [`OffsetField`].
pub fn offset_conv(z: &FeatureMap, k: &ConvKernel) -> Result<OffsetField> {
    if k.out_channels % 2 != 0 {
        return Err(Error::Shape(format!(
            "offset kernel needs an even number of output channels, got {}",
            k.out_channels
        )));
    }
    OffsetField::from_feature_map(conv2d(z, k)?)
}

/// Convolution whose taps sample bilinearly at displaced positions.
pub fn deformable_conv(x: &FeatureMap, offsets: &OffsetField, k: &ConvKernel) -> Result<FeatureMap> {
    k.require_input(x)?;
    let f = &offsets.field;
    if offsets.taps != k.taps() || f.batch != x.batch || f.height != x.height || f.width != x.width {
        return Err(Error::Shape(format!(
            "offset field {:?} does not match {} taps over input {:?}",
            f.shape(),
            k.taps(),
            x.shape()
        )));
    }
    let (ch, cw) = ((k.kh / 2) as f64, (k.kw / 2) as f64);
    let mut out = FeatureMap::zeros(x.batch, k.out_channels, x.height, x.width);
    for b in 0..x.batch {
        for o in 0..k.out_channels {
            let mut plane = vec![k.bias[o]; x.height * x.width];
            for i in 0..x.height {
                for j in 0..x.width {
                    let mut acc = 0.0;
                    for c in 0..k.in_channels {
                        for m in 0..k.kh {
                            for n in 0..k.kw {
                                let t = m * k.kw + n;
                                let y = i as f64 + m as f64 - ch + offsets.dy(b, t, i, j);
                                let xx = j as f64 + n as f64 - cw + offsets.dx(b, t, i, j);
                                acc += k.weight(o, c, m, n) * x.bilinear(b, c, y, xx);
                            }
                        }
                    }
                    plane[i * x.width + j] += acc;
                }
            }
            out.plane_mut(b, o).copy_from_slice(&plane);
        }
    }
    Ok(out)
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `z * sigmoid(d)`, broadcasting a single-channel `d` over `z`'s channels.
pub fn attention_gate(z: &FeatureMap, d: &FeatureMap) -> Result<FeatureMap> {
    if d.batch != z.batch
        || d.height != z.height
        || d.width != z.width
        || (d.channels != 1 && d.channels != z.channels)
    {
        return Err(Error::Shape(format!(
            "gate {:?} cannot broadcast over {:?}",
            d.shape(),
            z.shape()
        )));
    }
    let mut out = z.clone();
    for b in 0..z.batch {
        for c in 0..z.channels {
            let dc = if d.channels == 1 { 0 } else { c };
            let scale: Vec<f64> = d.plane(b, dc).iter().map(|&v| sigmoid(v)).collect();
            for (v, s) in out.plane_mut(b, c).iter_mut().zip(scale) {
                *v *= s;
            }
        }
    }
    Ok(out)
}

/// Per-channel Haar subbands stacked as channels `4c + {A, H, V, D}`.
pub fn wavelet_features(x: &FeatureMap) -> Result<FeatureMap> {
    if x.height % 2 != 0 || x.width % 2 != 0 {
        return Err(Error::Shape(format!(
            "spatial dimensions must be even, got {}x{}",
            x.height, x.width
        )));
    }
    let (h2, w2) = (x.height / 2, x.width / 2);
    let mut out = FeatureMap::zeros(x.batch, 4 * x.channels, h2, w2);
    for b in 0..x.batch {
        for c in 0..x.channels {
            let plane = Image::new(x.height, x.width, 1, ColorSpace::Linear, x.plane(b, c).to_vec())?;
            let sb = haar_dwt2(&plane)?;
            for (s, band) in sb.components().into_iter().enumerate() {
                out.plane_mut(b, 4 * c + s).copy_from_slice(band.data());
            }
        }
    }
    Ok(out)
}

/// Learned parameters of one module instance.
#[derive(Debug, Clone, PartialEq)]
pub struct WadmParams {
    pub offset: ConvKernel,
    pub deform: ConvKernel,
    pub projection: ConvKernel,
}

pub const DEFORM_KERNEL: usize = 3;
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorFile {
    tensors: Vec<TensorRecord>,
}

impl WadmParams {
    /// Expected `(name, shape)` of every tensor.
    pub fn tensor_shapes(in_channels: usize, out_channels: usize) -> Vec<(&'static str, Vec<usize>)> {
        let k = DEFORM_KERNEL;
        let taps = k * k;
        vec![
            ("offset.weight", vec![2 * taps, 2, k, k]),
            ("offset.bias", vec![2 * taps]),
            ("deform.weight", vec![2, 2, k, k]),
            ("deform.bias", vec![2]),
            ("projection.weight", vec![out_channels, 4 * in_channels, 1, 1]),
            ("projection.bias", vec![out_channels]),
        ]
    }

    pub fn zeros(in_channels: usize, out_channels: usize) -> Result<Self> {
        let k = DEFORM_KERNEL;
        Ok(WadmParams {
            offset: ConvKernel::zeros(2 * k * k, 2, k, k)?,
            deform: ConvKernel::zeros(2, 2, k, k)?,
            projection: ConvKernel::zeros(out_channels, 4 * in_channels, 1, 1)?,
        })
    }

    /// Deterministic uniform initialization in `[-0.1, 0.1]`.
    pub fn seeded(seed: u64, in_channels: usize, out_channels: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = DEFORM_KERNEL;
        Ok(WadmParams {
            offset: ConvKernel::random(&mut rng, 2 * k * k, 2, k, k, INIT_SCALE)?,
            deform: ConvKernel::random(&mut rng, 2, 2, k, k, INIT_SCALE)?,
            projection: ConvKernel::random(&mut rng, out_channels, 4 * in_channels, 1, 1, INIT_SCALE)?,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.projection.in_channels / 4
    }

    pub fn out_channels(&self) -> usize {
        self.projection.out_channels
    }

    /// Parses `{"tensors": [{"name", "shape", "data"}, ...]}`.
    pub fn from_json(text: &str, in_channels: usize, out_channels: usize) -> Result<Self> {
        let file: TensorFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("parameter file: {e}")))?;
        let expected = Self::tensor_shapes(in_channels, out_channels);
        let mut found: Vec<Vec<f64>> = Vec::with_capacity(expected.len());
        for (name, shape) in &expected {
            let record = file
                .tensors
                .iter()
                .find(|t| t.name == *name)
                .ok_or_else(|| Error::Format(format!("tensor {name}: missing")))?;
            if &record.shape != shape {
                return Err(Error::Format(format!(
                    "tensor {name}: shape {:?}, expected {:?}",
                    record.shape, shape
                )));
            }
            let len: usize = shape.iter().product();
            if record.data.len() != len {
                return Err(Error::Format(format!(
                    "tensor {name}: {} values, shape {:?} needs {len}",
                    record.data.len(),
                    shape
                )));
            }
            if record.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("tensor {name}: non-finite value")));
            }
            found.push(record.data.clone());
        }
        if let Some(extra) = file
            .tensors
            .iter()
            .find(|t| !expected.iter().any(|(n, _)| *n == t.name))
        {
            return Err(Error::Format(format!("tensor {}: unexpected", extra.name)));
        }
        let mut it = found.into_iter();
        let mut next = || it.next().expect("one entry per expected tensor");
        let k = DEFORM_KERNEL;
        Ok(WadmParams {
            offset: ConvKernel::new(2 * k * k, 2, k, k, next(), next())?,
            deform: ConvKernel::new(2, 2, k, k, next(), next())?,
            projection: ConvKernel::new(out_channels, 4 * in_channels, 1, 1, next(), next())?,
        })
    }

    pub fn to_json(&self) -> String {
        let shapes = Self::tensor_shapes(self.in_channels(), self.out_channels());
        let data = [
            self.offset.weights(),
            self.offset.bias(),
            self.deform.weights(),
            self.deform.bias(),
            self.projection.weights(),
            self.projection.bias(),
        ];
        let tensors = shapes
            .into_iter()
            .zip(data)
            .map(|((name, shape), d)| TensorRecord {
                name: name.to_string(),
                shape,
                data: d.to_vec(),
            })
            .collect();
        serde_json::to_string_pretty(&TensorFile { tensors }).expect("tensors serialize")
    }
}

/// Intermediate tensors of one forward pass.
#[derive(Debug, Clone)]
pub struct WadmTrace {
    /// `B x 4C x H/2 x W/2` stacked subbands.
    pub features: FeatureMap,
    pub pooled: FeatureMap,
    pub offsets: OffsetField,
    pub deformed: FeatureMap,
    /// Single-channel mean of `deformed`, the gate input.
    pub attention: FeatureMap,
    pub gated: FeatureMap,
    pub output: FeatureMap,
}

pub fn wadm_forward_traced(x: &FeatureMap, params: &WadmParams) -> Result<WadmTrace> {
    if params.in_channels() != x.channels {
        return Err(Error::Shape(format!(
            "parameters expect {} input channels, got {}",
            params.in_channels(),
            x.channels
        )));
    }
    let features = wavelet_features(x)?;
    let pooled = z_pool(&features);
    let offsets = offset_conv(&pooled, &params.offset)?;
    let deformed = deformable_conv(&pooled, &offsets, &params.deform)?;
    let (h, w) = (deformed.height, deformed.width);
    let mut attention = FeatureMap::zeros(deformed.batch, 1, h, w);
    for b in 0..deformed.batch {
        let (d0, d1) = (deformed.plane(b, 0).to_vec(), deformed.plane(b, 1).to_vec());
        for ((a, u), v) in attention.plane_mut(b, 0).iter_mut().zip(d0).zip(d1) {
            *a = 0.5 * (u + v);
        }
    }
    let gated = attention_gate(&features, &attention)?;
    let output = conv2d(&gated, &params.projection)?;
    Ok(WadmTrace {
        features,
        pooled,
        offsets,
        deformed,
        attention,
        gated,
        output,
    })
}

/// `B x C x H x W -> B x C_out x H/2 x W/2`.
pub fn wadm_forward(x: &FeatureMap, params: &WadmParams) -> Result<FeatureMap> {
    Ok(wadm_forward_traced(x, params)?.output)
}
