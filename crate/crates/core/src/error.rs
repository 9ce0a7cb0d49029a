use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analytic model, the simulator and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("order size must be at least 1")]
    ZeroOrderSize,
    #[error("batch size must be at least 1")]
    ZeroBatchSize,
    #[error("total quantity must be at least 1")]
    ZeroQuantity,
    #[error("crisis probability {0} is outside [0, 1]")]
    CrisisProbOutOfRange(f64),
    #[error("order size {order_size} exceeds total quantity {total_quantity}")]
    OrderExceedsQuantity {
        order_size: u64,
        total_quantity: u64,
    },
    #[error("initial consumption {initial} must be below batch size {batch_size}")]
    InitialConsumptionTooLarge { initial: u64, batch_size: u64 },
    #[error("insufficient inventory: {available} units available for {ordered} ordered")]
    InsufficientInventory { available: u64, ordered: u64 },
    #[error("number of trials must be at least 1")]
    ZeroTrials,
    #[error("{0} axis is empty")]
    EmptyAxis(&'static str),
    #[error("{0} axis must be strictly ascending")]
    UnsortedAxis(&'static str),
}

/// Errors raised while writing reports.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("precision {0} is outside [1, 15]")]
    Precision(usize),
    #[error("format {0} cannot be used for this report")]
    UnsupportedFormat(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}
