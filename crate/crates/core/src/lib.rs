//! Desk-scale histopathology prognosis pipeline.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`autodiff`]: minimal reverse-mode AD over dense `f64` tensors, SGD with
//!   momentum, EMA weight averaging, and the checkpoint container.
//! - [`raster`]: in-memory raster images and PNG I/O.
//! - [`stain`]: Reinhard and Macenko stain normalization, SSIM/PCC metrics,
//!   and the trainable style-transfer normalizer.
//! - [`meanteacher`]: patch extraction and semi-supervised tissue
//!   classification with a student/teacher pair.
//! - [`prognosis`]: survival losses, risk scoring, aggregation and attention
//!   pooling, concordance/Kaplan-Meier/log-rank evaluation.
//! - [`distill`]: a tiny vision transformer student trained with GAN-style
//!   and contrastive distillation objectives.
//! - [`synth`]: seeded generators for two-style synthetic slides and patient
//!   cohorts with known hazards, used as ground truth by the test suites.
//! - [`config`]: flat key=value run configuration shared with the CLI.

pub mod autodiff;
pub mod config;
pub mod distill;
pub mod error;
pub mod meanteacher;
pub mod prognosis;
pub mod raster;
pub mod stain;
pub mod synth;

pub use autodiff::{Checkpoint, EmaState, Graph, Mlp, NodeId, Params, SgdMomentum, Tensor};
pub use error::{Error, Result};
pub use raster::{GrayImage, RasterImage};
