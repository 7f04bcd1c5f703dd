//! From-scratch optic disc/cup segmentation and glaucoma screening toolkit.
//!
//! The crate bundles everything the screening pipeline needs:
//!
//! - [`imaging`] — image/mask decoding, CLAHE enhancement, label-map merging
//!   and deterministic data augmentation
//! - [`segnet`] — a dense rank-4 tensor engine and a multi-class U-Net with
//!   hand-written backpropagation, trained with Adam
//! - [`geometry`] — connected components, moment statistics, the 360°
//!   rim-thickness profile and the eight-element feature vector
//! - [`classifier`] — an RBF-kernel soft-margin SVM trained with sequential
//!   minimal optimization, plus cross-validated grid search
//! - [`metrics`] — pixel-level segmentation scores and case-level diagnostic
//!   scores
//! - [`phantom`] — synthetic disc/cup raster phantoms used by the test suites
//!   and the demo dataset generator
//!
//! Every operation is deterministic: given the same inputs and seed, outputs
//! are bit-identical across runs.

pub mod classifier;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod segnet;
