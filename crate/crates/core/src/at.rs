//! Joint scheme: both indices as the Gittins index of a `2n`-state project.
//!
//! Augmented state `(a, i)` earns `R_i − (1−a)c_i` when engaged and moves to
//! `(1, j)` with probability `p_ij`. Passive dynamics never enter a Gittins
//! computation and are not built.

use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::{AugmentedState, NormalizedProjectSpec, ProjectSpec, RewardProject};
use crate::stage1::{run_stage1, Stage1Mode};
use crate::stage2::IndexTable;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedProjectSpec {
    n: usize,
    transition: Matrix,
    reward: Vec<f64>,
    beta: f64,
}

impl AugmentedProjectSpec {
    /// States of the underlying project.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn as_reward_project(&self) -> RewardProject<'_> {
        RewardProject {
            transition: &self.transition,
            reward: &self.reward,
            beta: self.beta,
        }
    }
}

pub fn build_augmented(spec: &NormalizedProjectSpec) -> AugmentedProjectSpec {
    let n = spec.n();
    let p = spec.transition();
    let mut transition = Matrix::zeros(2 * n, 2 * n);
    let mut reward = vec![0.0; 2 * n];
    for prev_active in [false, true] {
        for i in 0..n {
            let a = AugmentedState::new(prev_active, i).flat_id(n);
            let cost = if prev_active { 0.0 } else { spec.startup_cost()[i] };
            reward[a] = spec.reward()[i] - cost;
            let row = transition.row_mut(a);
            row[n..].copy_from_slice(p.row(i));
        }
    }
    AugmentedProjectSpec {
        n,
        transition,
        reward,
        beta: spec.beta(),
    }
}

/// Both indices through the `2n`-state project.
pub fn at_index_table(spec: &ProjectSpec) -> Result<IndexTable> {
    let norm = spec.normalize()?;
    let aug = build_augmented(&norm);
    let n = aug.n;
    let s1 = run_stage1(aug.as_reward_project(), Stage1Mode::Fast)?;
    let mut nu_cont = vec![0.0; n];
    let mut nu_switch = vec![0.0; n];
    let mut order_cont = Vec::with_capacity(n);
    let mut order_switch = Vec::with_capacity(n);
    let mut merged = Vec::with_capacity(2 * n);
    for (&id, &v) in s1.order.iter().zip(&s1.nu_cont) {
        let a = AugmentedState::from_flat_id(id, n);
        if a.prev_active {
            nu_cont[a.state] = v;
            order_cont.push(a.state);
        } else {
            nu_switch[a.state] = v;
            order_switch.push(a.state);
        }
        merged.push((a, v));
    }
    Ok(IndexTable {
        nu_cont,
        nu_switch,
        order_cont,
        order_switch,
        merged,
        op_count_stage1: s1.op_count,
        op_count_stage2: 0,
    })
}
