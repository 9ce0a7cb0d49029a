#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use fragrecall::FulfillmentOutcome;
use num_rational::Ratio;

/// Ground truth for the fragment statistics: an order of `o` units starting
/// `u` units into a batch of `b` spans ceil((o + u) / b) batches, with `u`
/// uniform on 0..b. Returns (mean count, share of offsets above the minimum
/// count, min count, max count).
pub fn enumerate_fragments(o: u64, b: u64) -> (Ratio<u64>, Ratio<u64>, u64, u64) {
    let counts: Vec<u64> = (0..b).map(|u| (o + u).div_ceil(b)).collect();
    let min = *counts.iter().min().unwrap();
    let max = *counts.iter().max().unwrap();
    let total: u64 = counts.iter().sum();
    let above = counts.iter().filter(|&&c| c > min).count() as u64;
    (Ratio::new(total, b), Ratio::new(above, b), min, max)
}

/// Checks conservation, FIFO order, fragment contiguity and recall
/// consistency of one outcome. Returns a description of the first violation.
pub fn check_outcome(out: &FulfillmentOutcome, total_quantity: u64) -> Result<(), String> {
    let mut ordered = 0;
    for order in &out.orders {
        let sum: u64 = order.fragments.iter().map(|f| f.quantity).sum();
        if sum != order.size {
            return Err(format!(
                "order {} fragments sum to {sum}, size {}",
                order.id, order.size
            ));
        }
        if order.fragments.iter().any(|f| f.quantity == 0) {
            return Err(format!("order {} has an empty fragment", order.id));
        }
        for w in order.fragments.windows(2) {
            if w[1].batch_id != w[0].batch_id + 1 {
                return Err(format!("order {} fragments are not consecutive", order.id));
            }
        }
        ordered += sum;
    }
    if ordered != total_quantity {
        return Err(format!("orders hold {ordered}, expected {total_quantity}"));
    }
    for w in out.orders.windows(2) {
        let prev_last = w[0].fragments.last().unwrap().batch_id;
        let next_first = w[1].fragments.first().unwrap().batch_id;
        if next_first != prev_last && next_first != prev_last + 1 {
            return Err(format!(
                "orders {} and {} are not adjacent",
                w[0].id, w[1].id
            ));
        }
    }

    let consumed: u64 = out.batches.iter().map(|b| b.consumed).sum();
    if consumed - out.initial_consumption != total_quantity {
        return Err(format!(
            "batches consumed {consumed} with initial {}",
            out.initial_consumption
        ));
    }
    // FIFO: full, full, ..., partial, empty, ...
    let mut seen_partial = false;
    for b in &out.batches {
        if b.consumed > b.size {
            return Err(format!("batch {} overdrawn", b.id));
        }
        if seen_partial && b.consumed > 0 {
            return Err(format!(
                "batch {} used before an earlier batch was exhausted",
                b.id
            ));
        }
        if b.consumed < b.size {
            seen_partial = true;
        }
    }

    let mut expected_ids = std::collections::BTreeSet::new();
    let mut expected_qty = 0;
    for order in &out.orders {
        if order
            .fragments
            .iter()
            .any(|f| out.batches[f.batch_id].in_crisis)
        {
            expected_ids.insert(order.id);
            expected_qty += order.size;
        }
    }
    if expected_ids != out.recalled_order_ids || expected_qty != out.recalled_quantity {
        return Err("recall fields disagree with crisis batches".into());
    }
    Ok(())
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fragrecall")
}

pub fn run_bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn fragrecall")
}
