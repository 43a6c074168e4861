//! Unsupervised segmentation of two-phase texture domains in grayscale
//! micrographs.
//!
//! The pipeline tiles an image around every interior pixel, transforms each
//! tile (2D DFT, cosine transform, multilevel wavelet or Radon projection),
//! reduces the transform to moment statistics, clusters the resulting feature
//! cube with k-means, and labels the two clusters as light and dark domains.
//! Domain sizes are then measured with a local-thickness transform and
//! reported in nanometres.
//!
//! ```no_run
//! use afmseg::{imgio, pipeline::{segment_image, PipelineConfig}};
//! # fn main() -> afmseg::Result<()> {
//! let image = imgio::load_image("scan.png".as_ref(), "scan.json".as_ref())?;
//! let seg = segment_image(&image, &PipelineConfig::default())?;
//! println!("light mean size: {:?} nm", seg.distributions[1].mean_nm());
//! # Ok(())
//! # }
//! ```

pub mod cluster;
pub mod domsize;
pub mod error;
pub mod features;
pub mod grid;
pub mod imgio;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tiling;
pub mod transforms;

pub use cluster::{Domain, IndexMap, KMeansParams, KMeansResult};
pub use domsize::{DomainSizeDistribution, DomainSizeSummary, ThicknessMap};
pub use error::{Error, Result};
pub use features::{FeatureCube, FeatureMask, FeatureOptions, Method, Statistic};
pub use grid::Grid;
pub use imgio::{GrayImage, RawPhaseMatrix};
pub use metrics::SegmentationScore;
pub use tiling::{TileGrid, TileSpec};
pub use transforms::{Sinogram, Wavelet, WaveletPyramid};
