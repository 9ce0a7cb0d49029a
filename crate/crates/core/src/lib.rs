//! Expected batch fragmentation and product recall sizes under FIFO
//! assignment, with a seeded Monte Carlo simulator to validate the model.
//!
//! * [`model`]: closed-form fragment statistics, recall probability and
//!   expected recall size.
//! * [`sim`]: FIFO fulfillment of orders from crisis-flagged batches.
//! * [`harness`]: Monte Carlo estimates and analytic-vs-simulated sweeps.
//! * [`report`]: CSV and text serialization.
//! * [`cli`]: the `fragrecall` command line.

pub mod cli;
pub mod error;
pub mod harness;
pub mod model;
pub mod report;
pub mod rng;
pub mod sim;

pub use error::{ModelError, ReportError};
pub use harness::{
    crisis_prob_family, estimate_recall, sweep, EstimateConfig, SweepCell, SweepConfig, SweepGrid,
    TrialEstimate,
};
pub use model::{
    expected_fragments, expected_recall_size, fragment_stats, recall_limit_batch_inf,
    recall_limit_order_inf, recall_probability, recall_probability_exact, FragmentationStats,
    ModelParams,
};
pub use sim::{run_trial, simulate_trial, Batch, Fragment, FulfillmentOutcome, Order, TrialConfig};
