//! Second stage: the switching index from the first stage's tables.
//!
//! For every step `k` of the first stage, the switching candidate of a state
//! `j` already in the active set is `ν^(k)_j − (1−β)c_j / w^(k)_j`. Candidates
//! are released in decreasing order as long as they beat the next
//! continuation index; after the last step every remaining candidate is
//! released. The work is `n^2 + O(n)` arithmetic operations.

use crate::error::{Error, Result};
use crate::model::{AugmentedState, ProjectSpec};
use crate::stage1::{run_stage1, Stage1Mode, Stage1Output};

/// Which continuation index a candidate is compared against at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdAlignment {
    /// The index of the state selected at step `k + 1`. Matches the
    /// subset-enumeration definition of the switching index.
    #[default]
    NextContinuation,
    /// The index of the state selected at step `k` itself. Kept for
    /// comparison; it releases candidates too late and underestimates the
    /// switching index on many instances.
    CurrentContinuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwitchingOptions {
    /// A candidate is released when it exceeds the threshold by more than
    /// this. Zero gives the exact strict comparison.
    pub tolerance: f64,
    pub alignment: ThresholdAlignment,
}

/// Continuation and switching index of every state.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    /// `ν*_(1,i)` by state id.
    pub nu_cont: Vec<f64>,
    /// `ν*_(0,i)` by state id.
    pub nu_switch: Vec<f64>,
    pub order_cont: Vec<usize>,
    pub order_switch: Vec<usize>,
    /// Both index streams interleaved in the order they were produced.
    pub merged: Vec<(AugmentedState, f64)>,
    pub op_count_stage1: u64,
    pub op_count_stage2: u64,
}

impl IndexTable {
    pub fn n(&self) -> usize {
        self.nu_cont.len()
    }

    pub fn index(&self, state: AugmentedState) -> f64 {
        if state.prev_active {
            self.nu_cont[state.state]
        } else {
            self.nu_switch[state.state]
        }
    }

    /// Largest componentwise difference to another table over both indices.
    pub fn max_abs_diff(&self, other: &IndexTable) -> f64 {
        self.nu_cont
            .iter()
            .zip(&other.nu_cont)
            .chain(self.nu_switch.iter().zip(&other.nu_switch))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub fn compute_switching_index(s1: &Stage1Output, startup_cost: &[f64], beta: f64) -> Result<IndexTable> {
    compute_switching_index_with(s1, startup_cost, beta, SwitchingOptions::default())
}

pub fn compute_switching_index_with(
    s1: &Stage1Output,
    startup_cost: &[f64],
    beta: f64,
    opts: SwitchingOptions,
) -> Result<IndexTable> {
    let n = s1.n();
    if startup_cost.len() != n || s1.nu_cont.len() != n || s1.tables.n() != n {
        return Err(Error::Dimension(format!(
            "{} startup costs for a {n}-state first stage",
            startup_cost.len()
        )));
    }
    if let Some((state, &value)) = startup_cost.iter().enumerate().find(|(_, c)| !(**c >= 0.0)) {
        return Err(Error::NegativeStartupCost { state, value });
    }

    let mut ops: u64 = 1;
    let one_minus_beta = 1.0 - beta;
    let scaled: Vec<f64> = startup_cost.iter().map(|c| one_minus_beta * c).collect();
    ops += n as u64;

    let order = &s1.order;
    let mut nu_switch = vec![0.0; n];
    let mut order_switch = Vec::with_capacity(n);
    let mut merged = Vec::with_capacity(2 * n);
    // Positions (into `order`) of states in S1 \ S0, and their candidates.
    let mut pending: Vec<usize> = Vec::with_capacity(n);
    let mut candidate = vec![0.0; n];

    for k in 1..=n {
        let added = order[k - 1];
        merged.push((AugmentedState::new(true, added), s1.nu_cont[k - 1]));
        pending.push(k - 1);
        let (work, nu) = s1.tables.step(k);
        for &pos in &pending {
            candidate[pos] = nu[pos] - scaled[order[pos]] / work[pos];
        }
        ops += 2 * pending.len() as u64;

        let threshold = match opts.alignment {
            ThresholdAlignment::NextContinuation => s1.nu_cont.get(k).copied(),
            ThresholdAlignment::CurrentContinuation => Some(s1.nu_cont[k - 1]),
        };
        while !pending.is_empty() {
            let slot = argmax_pending(&pending, &candidate, order);
            let pos = pending[slot];
            let value = candidate[pos];
            let release = k == n
                || match threshold {
                    None => true,
                    Some(t) => t + opts.tolerance < value,
                };
            if !release {
                break;
            }
            pending.swap_remove(slot);
            let j = order[pos];
            nu_switch[j] = value;
            order_switch.push(j);
            merged.push((AugmentedState::new(false, j), value));
        }
    }

    Ok(IndexTable {
        nu_cont: s1.index_by_state(),
        nu_switch,
        order_cont: order.clone(),
        order_switch,
        merged,
        op_count_stage1: s1.op_count,
        op_count_stage2: ops,
    })
}

/// Slot in `pending` of the largest candidate; ties go to the smallest state id.
fn argmax_pending(pending: &[usize], candidate: &[f64], order: &[usize]) -> usize {
    let mut best = 0;
    for slot in 1..pending.len() {
        let (a, b) = (candidate[pending[slot]], candidate[pending[best]]);
        if a > b || (a == b && order[pending[slot]] < order[pending[best]]) {
            best = slot;
        }
    }
    best
}

/// Both indices of a project: normalize, run the fast first stage, then the
/// switching stage. The indices of the normalized project are the indices of
/// the original one.
pub fn compute_index_table(spec: &ProjectSpec) -> Result<IndexTable> {
    let norm = spec.normalize()?;
    let s1 = run_stage1(norm.as_reward_project(), Stage1Mode::Fast)?;
    compute_switching_index(&s1, norm.startup_cost(), norm.beta())
}

/// Upper bound on the switching-stage operation count.
pub fn stage2_op_bound(n: usize) -> u64 {
    let n = n as u64;
    n * n + 4 * n + 8
}
