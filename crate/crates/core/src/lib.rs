//! Frequency-aware shadow removal primitives.
//!
//! The crate covers the deterministic math of a wavelet/frequency shadow
//! removal pipeline: Haar subbands, 2D DFT and focal frequency weighting,
//! log-chromaticity entropy minimization, soft shadow masks, the loss
//! functionals, a wavelet attention downsampling forward pass, and
//! per-region evaluation metrics.

pub mod chromaticity;
pub mod error;
pub mod imagecore;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod spectrum;
pub mod stats;
pub mod synthetic;
pub mod wadm;
pub mod wavelet;

pub use chromaticity::{
    illumination_compensate, minimize_entropy, shadowfree_chromaticity, ChromaticityMap, EntropySweep,
};
pub use error::{Error, Result};
pub use imagecore::{load_image, save_image, ChannelSet, ColorSpace, Image};
pub use losses::{FeatureExtractor, LossReport, LossWeights, PyramidGradientExtractor};
pub use mask::{compute_soft_mask, region_stats, RegionStats, SoftMask};
pub use metrics::{evaluate_dataset, evaluate_pair, BinaryMask, Manifest, RegionMetrics, RmseSpace};
pub use spectrum::{dft2, idft2, Spectrum, WeightMatrix};
pub use wadm::{wadm_forward, ConvKernel, FeatureMap, OffsetField, WadmParams};
pub use wavelet::{haar_dwt2, haar_idwt2, SubbandSimilarity, Subbands};
