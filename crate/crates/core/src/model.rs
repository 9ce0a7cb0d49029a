//! Closed-form fragmentation and recall-size model.
//!
//! Under FIFO assignment a customer order of `O` units drawn from batches of
//! `B` units starts at a uniformly distributed offset inside the current
//! batch. The number of distinct batches it touches then takes one of two
//! adjacent values, and its expectation has the closed form `(O + B - 1) / B`.
//! Recall figures follow from the probability that at least one of those
//! batches is in crisis.

use num_rational::Ratio;

use crate::error::ModelError;

/// The four scalars driving every analytic formula.
///
/// Construct with [`ModelParams::new`], which enforces all invariants
/// including `order_size <= total_quantity`. [`ModelParams::unbounded`]
/// drops that last check so limits can be evaluated at order sizes far
/// beyond any realistic horizon; the simulator refuses such parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    order_size: u64,
    batch_size: u64,
    total_quantity: u64,
    crisis_prob: f64,
}

impl ModelParams {
    pub fn new(
        order_size: u64,
        batch_size: u64,
        total_quantity: u64,
        crisis_prob: f64,
    ) -> Result<Self, ModelError> {
        let params = Self::unbounded(order_size, batch_size, total_quantity, crisis_prob)?;
        params.ensure_bounded()?;
        Ok(params)
    }

    /// Like [`ModelParams::new`] but allows `order_size > total_quantity`.
    pub fn unbounded(
        order_size: u64,
        batch_size: u64,
        total_quantity: u64,
        crisis_prob: f64,
    ) -> Result<Self, ModelError> {
        if order_size == 0 {
            return Err(ModelError::ZeroOrderSize);
        }
        if batch_size == 0 {
            return Err(ModelError::ZeroBatchSize);
        }
        validate_quantity_prob(total_quantity, crisis_prob)?;
        Ok(Self {
            order_size,
            batch_size,
            total_quantity,
            crisis_prob,
        })
    }

    pub fn order_size(&self) -> u64 {
        self.order_size
    }

    pub fn batch_size(&self) -> u64 {
        self.batch_size
    }

    pub fn total_quantity(&self) -> u64 {
        self.total_quantity
    }

    pub fn crisis_prob(&self) -> f64 {
        self.crisis_prob
    }

    /// Fails when the order size exceeds the total quantity.
    pub fn ensure_bounded(&self) -> Result<(), ModelError> {
        if self.order_size > self.total_quantity {
            return Err(ModelError::OrderExceedsQuantity {
                order_size: self.order_size,
                total_quantity: self.total_quantity,
            });
        }
        Ok(())
    }
}

fn validate_quantity_prob(total_quantity: u64, crisis_prob: f64) -> Result<(), ModelError> {
    if total_quantity == 0 {
        return Err(ModelError::ZeroQuantity);
    }
    if !(0.0..=1.0).contains(&crisis_prob) {
        return Err(ModelError::CrisisProbOutOfRange(crisis_prob));
    }
    Ok(())
}

/// Distribution of the number of batch fragments in one order.
///
/// The count is `fr_min` with probability `p_fr_min` and `fr_max` with
/// probability `p_fr_max`. All probabilities are exact rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragmentationStats {
    pub fr_min: u64,
    pub fr_max: u64,
    pub p_fr_min: Ratio<u64>,
    pub p_fr_max: Ratio<u64>,
    pub expected_fragments: Ratio<u64>,
}

impl FragmentationStats {
    pub fn expected_fragments_f64(&self) -> f64 {
        ratio_to_f64(self.expected_fragments)
    }

    pub fn p_fr_max_f64(&self) -> f64 {
        ratio_to_f64(self.p_fr_max)
    }

    pub fn p_fr_min_f64(&self) -> f64 {
        ratio_to_f64(self.p_fr_min)
    }
}

pub(crate) fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Two-point distribution of the fragment count, from the order/batch
/// multiplicity.
pub fn fragment_stats(params: &ModelParams) -> FragmentationStats {
    let (o, b) = (params.order_size, params.batch_size);
    let rem = o % b;
    let p_fr_max = if rem == 0 {
        Ratio::new(b - 1, b)
    } else {
        Ratio::new(rem - 1, b)
    };
    let p_fr_min = Ratio::from_integer(1) - p_fr_max;
    let fr_min = o.div_ceil(b);
    // A zero-probability upper count is never reported.
    let fr_max = if *p_fr_max.numer() > 0 {
        fr_min + 1
    } else {
        fr_min
    };
    let expected_fragments = p_fr_min * fr_min + p_fr_max * fr_max;
    FragmentationStats {
        fr_min,
        fr_max,
        p_fr_min,
        p_fr_max,
        expected_fragments,
    }
}

/// Expected number of fragments, `(O + B - 1) / B`.
pub fn expected_fragments(params: &ModelParams) -> Ratio<u64> {
    Ratio::new(params.order_size + params.batch_size - 1, params.batch_size)
}

/// Probability that at least one of `fragments` independent batches is in
/// crisis, `1 - (1 - p)^fragments`, for a possibly fractional count.
pub fn at_least_one_in_crisis(crisis_prob: f64, fragments: f64) -> f64 {
    if crisis_prob == 0.0 {
        0.0
    } else if crisis_prob == 1.0 {
        // fragments >= 1 here, so (1 - 1)^fragments = 0 with no 0^x ambiguity
        1.0
    } else if fragments == 1.0 {
        crisis_prob
    } else {
        -(fragments * (-crisis_prob).ln_1p()).exp_m1()
    }
}

/// Order recall probability with the expected fragment count as exponent.
pub fn recall_probability(params: &ModelParams) -> f64 {
    at_least_one_in_crisis(params.crisis_prob, ratio_to_f64(expected_fragments(params)))
}

/// Order recall probability averaged over the two possible fragment counts.
///
/// Never exceeds [`recall_probability`], since `x -> 1 - (1 - p)^x` is concave.
pub fn recall_probability_exact(params: &ModelParams) -> f64 {
    let stats = fragment_stats(params);
    let low =
        stats.p_fr_min_f64() * at_least_one_in_crisis(params.crisis_prob, stats.fr_min as f64);
    if *stats.p_fr_max.numer() == 0 {
        return low;
    }
    low + stats.p_fr_max_f64() * at_least_one_in_crisis(params.crisis_prob, stats.fr_max as f64)
}

/// Expected recalled quantity, `Q * (1 - (1 - p)^((O + B - 1) / B))`.
pub fn expected_recall_size(params: &ModelParams) -> f64 {
    params.total_quantity as f64 * recall_probability(params)
}

/// Limit of the expected recall size as the batch size grows without bound:
/// every order holds a single fragment, leaving `Q * p`.
pub fn recall_limit_batch_inf(total_quantity: u64, crisis_prob: f64) -> Result<f64, ModelError> {
    validate_quantity_prob(total_quantity, crisis_prob)?;
    Ok(total_quantity as f64 * crisis_prob)
}

/// Limit of the expected recall size as the order size grows without bound.
///
/// Holds for any positive crisis probability; with `p = 0` nothing is ever
/// recalled.
pub fn recall_limit_order_inf(total_quantity: u64) -> Result<f64, ModelError> {
    if total_quantity == 0 {
        return Err(ModelError::ZeroQuantity);
    }
    Ok(total_quantity as f64)
}
