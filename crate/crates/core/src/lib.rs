//! Streaming out-of-distribution detection with adaptive negative proxies.
//!
//! Test embeddings are scored against fixed text proxies (ID labels plus mined
//! negative labels). While the stream is processed, confidently detected
//! samples are cached into a category-split memory bank, and the cached image
//! features are turned into task-adaptive and sample-adaptive proxies that
//! track the actual OOD distribution of the deployment.
//!
//! Module map:
//!
//! - [`embeddings`]: EMB1 binary format, normalization, proxy matrices, manifests.
//! - [`scoring`]: posteriors, NegLabel score, pseudo-labels, proxy scores, fusion, entropy.
//! - [`memory`]: the task-aware memory bank and adaptive proxy generation.
//! - [`adagap`]: online ID:OOD mix-ratio estimation and the adaptive caching gap.
//! - [`metrics`]: AUROC, FPR95, ID accuracy and the ISOR alignment diagnostic.
//! - [`pipeline`]: stream orchestration, synthetic data, sweeps and experiments.
//!
//! ```
//! use adaneg::embeddings::ProxyMatrix;
//! use adaneg::pipeline::{Detector, RunConfig};
//!
//! let proxies = ProxyMatrix::from_raw(
//!     &[vec![1.0, 0.0, 0.0]],
//!     &[vec![0.0, 1.0, 0.0]],
//! ).unwrap();
//! let mut detector = Detector::new(RunConfig::default(), proxies).unwrap();
//! let record = detector.process_raw(&[0.9, 0.1, 0.0]).unwrap();
//! assert!(record.s_nl > 0.99);
//! ```

pub mod adagap;
pub mod embeddings;
pub mod error;
pub mod memory;
pub mod metrics;
pub mod pipeline;
pub mod scoring;

pub use error::{Error, Result};
