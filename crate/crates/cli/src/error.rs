use std::fmt;

use seal_core::graph::DatasetError;
use seal_core::mi::MiError;
use seal_core::plot::PlotError;
use seal_core::synthgen::SynthError;
use seal_core::trainer::{CheckpointError, TrainError};

/// A problem with the user's input rather than with the program.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Exit code for a failed command: 2 for bad input, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        e.is::<UsageError>()
            || e.is::<DatasetError>()
            || e.is::<CheckpointError>()
            || e.is::<PlotError>()
            || matches!(e.downcast_ref::<MiError>(), Some(MiError::Sizes(_)))
            || matches!(
                e.downcast_ref::<SynthError>(),
                Some(SynthError::Config(_) | SynthError::EdgeList { .. } | SynthError::Io { .. })
            )
            || matches!(
                e.downcast_ref::<TrainError>(),
                Some(
                    TrainError::Config(_)
                        | TrainError::NoLabels
                        | TrainError::TooFewInstances(_)
                        | TrainError::EmptySplit
                        | TrainError::MissingLabel(_)
                        | TrainError::ClassMismatch { .. }
                        | TrainError::FeatureMismatch { .. }
                        | TrainError::NeedsInstanceClassifier(_)
                )
            )
    });
    if usage {
        EXIT_USAGE
    } else {
        EXIT_INTERNAL
    }
}
