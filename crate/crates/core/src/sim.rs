//! Order fulfillment under FIFO assignment.
//!
//! A trial generates the orders that make up the total quantity, lays out
//! just enough batches to cover them (the first one possibly already partly
//! consumed), fills every order from the oldest batch with stock left and
//! finally withdraws every order holding a fragment of a crisis batch.
//!
//! Random stream layout per trial: the first draw is the initial consumption
//! of batch 0 (uniform on `0..batch_size`), followed by one Bernoulli draw per
//! batch in batch-id order.

use std::collections::BTreeSet;

use crate::error::ModelError;
use crate::model::ModelParams;
use crate::rng::{BernoulliThreshold, TrialRng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// FIFO position, 0-based.
    pub id: usize,
    pub size: u64,
    pub in_crisis: bool,
    pub consumed: u64,
}

impl Batch {
    pub fn remaining(&self) -> u64 {
        self.size - self.consumed
    }
}

/// The part of one batch allocated to one order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fragment {
    pub batch_id: usize,
    pub quantity: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    pub id: usize,
    pub size: u64,
    pub fragments: Vec<Fragment>,
}

impl Order {
    pub fn new(id: usize, size: u64) -> Self {
        Self {
            id,
            size,
            fragments: Vec::new(),
        }
    }
}

/// Orders, batches and the fragment mapping between them after one trial.
///
/// The recall fields stay empty until [`measure_recall`] runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FulfillmentOutcome {
    pub orders: Vec<Order>,
    pub batches: Vec<Batch>,
    pub initial_consumption: u64,
    pub recalled_order_ids: BTreeSet<usize>,
    pub recalled_quantity: u64,
}

/// Full input of a single trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    params: ModelParams,
    initial_consumption: u64,
    rng_seed: u64,
}

impl TrialConfig {
    pub fn new(
        params: ModelParams,
        initial_consumption: u64,
        rng_seed: u64,
    ) -> Result<Self, ModelError> {
        params.ensure_bounded()?;
        if initial_consumption >= params.batch_size() {
            return Err(ModelError::InitialConsumptionTooLarge {
                initial: initial_consumption,
                batch_size: params.batch_size(),
            });
        }
        Ok(Self {
            params,
            initial_consumption,
            rng_seed,
        })
    }

    /// Draws the initial consumption from the first slot of the seed's stream.
    pub fn sampled(params: ModelParams, rng_seed: u64) -> Result<Self, ModelError> {
        let initial = TrialRng::from_seed(rng_seed).below(params.batch_size());
        Self::new(params, initial, rng_seed)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn initial_consumption(&self) -> u64 {
        self.initial_consumption
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Stream positioned after the initial-consumption slot.
    fn crisis_stream(&self) -> TrialRng {
        let mut rng = TrialRng::from_seed(self.rng_seed);
        rng.below(self.params.batch_size());
        rng
    }
}

/// Sizes of the orders making up the total quantity: `Q / O` full orders and
/// one smaller remainder order when `O` does not divide `Q`.
fn order_sizes(params: &ModelParams) -> impl Iterator<Item = u64> {
    let (q, o) = (params.total_quantity(), params.order_size());
    let full = std::iter::repeat_n(o, (q / o) as usize);
    full.chain((q % o != 0).then_some(q % o))
}

pub fn generate_orders(params: &ModelParams) -> Result<Vec<Order>, ModelError> {
    params.ensure_bounded()?;
    Ok(order_sizes(params)
        .enumerate()
        .map(|(id, size)| Order::new(id, size))
        .collect())
}

/// Just enough batches to cover the total quantity on top of the initial
/// consumption, each with an independent crisis flag.
pub fn generate_batches(
    params: &ModelParams,
    initial_consumption: u64,
    rng: &mut TrialRng,
) -> Result<Vec<Batch>, ModelError> {
    params.ensure_bounded()?;
    let b = params.batch_size();
    if initial_consumption >= b {
        return Err(ModelError::InitialConsumptionTooLarge {
            initial: initial_consumption,
            batch_size: b,
        });
    }
    let count = (params.total_quantity() + initial_consumption).div_ceil(b) as usize;
    let threshold = BernoulliThreshold::new(params.crisis_prob());
    Ok((0..count)
        .map(|id| Batch {
            id,
            size: b,
            in_crisis: rng.bernoulli(threshold),
            consumed: if id == 0 { initial_consumption } else { 0 },
        })
        .collect())
}

/// Fills the orders in id order, each from the lowest-id batch that still
/// has stock.
pub fn fifo_assign(
    mut orders: Vec<Order>,
    mut batches: Vec<Batch>,
) -> Result<FulfillmentOutcome, ModelError> {
    let available: u64 = batches.iter().map(Batch::remaining).sum();
    let ordered: u64 = orders.iter().map(|o| o.size).sum();
    if available < ordered {
        return Err(ModelError::InsufficientInventory { available, ordered });
    }
    let initial_consumption = batches.first().map_or(0, |b| b.consumed);

    let mut cursor = 0;
    for order in &mut orders {
        order.fragments.clear();
        let mut need = order.size;
        while need > 0 {
            let batch = &mut batches[cursor];
            let take = need.min(batch.remaining());
            if take == 0 {
                cursor += 1;
                continue;
            }
            batch.consumed += take;
            need -= take;
            order.fragments.push(Fragment {
                batch_id: batch.id,
                quantity: take,
            });
        }
    }

    Ok(FulfillmentOutcome {
        orders,
        batches,
        initial_consumption,
        recalled_order_ids: BTreeSet::new(),
        recalled_quantity: 0,
    })
}

/// Withdraws, in full, every order holding a fragment of a crisis batch.
pub fn measure_recall(mut outcome: FulfillmentOutcome) -> FulfillmentOutcome {
    let in_crisis = |id: usize| outcome.batches.get(id).is_some_and(|b| b.in_crisis);
    let recalled: BTreeSet<usize> = outcome
        .orders
        .iter()
        .filter(|o| o.fragments.iter().any(|f| in_crisis(f.batch_id)))
        .map(|o| o.id)
        .collect();
    outcome.recalled_quantity = outcome
        .orders
        .iter()
        .filter(|o| recalled.contains(&o.id))
        .map(|o| o.size)
        .sum();
    outcome.recalled_order_ids = recalled;
    outcome
}

/// Runs one trial through every stage and keeps the full outcome.
pub fn simulate_trial(config: &TrialConfig) -> Result<FulfillmentOutcome, ModelError> {
    let orders = generate_orders(&config.params)?;
    let mut rng = config.crisis_stream();
    let batches = generate_batches(&config.params, config.initial_consumption, &mut rng)?;
    Ok(measure_recall(fifo_assign(orders, batches)?))
}

/// Recalled quantity of one trial.
///
/// Same result and same random stream as [`simulate_trial`], but batches are
/// opened and flagged only as the FIFO walk reaches them, so nothing is
/// allocated. This is the Monte Carlo hot path.
pub fn run_trial(config: &TrialConfig) -> u64 {
    let params = &config.params;
    let b = params.batch_size();
    let threshold = BernoulliThreshold::new(params.crisis_prob());
    let mut rng = config.crisis_stream();

    let mut left_in_batch = b - config.initial_consumption;
    let mut batch_in_crisis = rng.bernoulli(threshold);
    let mut recalled = 0;
    for size in order_sizes(params) {
        let mut need = size;
        let mut hit = false;
        // An exhausted batch is only replaced once an order needs more stock.
        if left_in_batch == 0 {
            batch_in_crisis = rng.bernoulli(threshold);
            left_in_batch = b;
        }
        hit |= batch_in_crisis;
        while need > left_in_batch {
            need -= left_in_batch;
            batch_in_crisis = rng.bernoulli(threshold);
            left_in_batch = b;
            hit |= batch_in_crisis;
        }
        left_in_batch -= need;
        if hit {
            recalled += size;
        }
    }
    recalled
}
