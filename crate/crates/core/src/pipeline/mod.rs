//! Stream orchestration and experiment harness.

mod config;
mod detector;
mod experiments;
mod records;
mod synth;

pub use config::{AdaGapConfig, CacheOrder, FuseWith, Mode, RunConfig};
pub use detector::{evaluate_records, run_dataset, run_stream, Detector, RunOutput, SampleRecord};
pub use experiments::{
    isor_experiment, mixture_experiment, ordering_experiment, IsorReport, subsample_to_ratio, sweep, CellSummary,
    MixtureCell, OrderingReport, OrderingRun, SweepCell, SweepGrid,
};
pub use records::{read_records, write_records, RECORD_COLUMNS};
pub use synth::{synthesize_dataset, synthesize_with_ood_centers, SyntheticSpec, VonMisesFisher, ALIGNED_TAG, MISALIGNED_TAG};
