//! First stage: the continuation (Gittins) index by adaptive greedy selection.
//!
//! Starting from the empty active set, each step adds the outside state with
//! the largest marginal productivity `ν^S_i` and records it as that state's
//! index. Besides the indices the stage keeps, for every step `k`, the
//! marginal work and productivity of the states already in the active set;
//! these tables are all the switching stage needs.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::BorderedLu;
use crate::measures::{marginal_measures, work_reward_on_set, RESIDUAL_TOLERANCE};
use crate::model::{ProjectSpec, RewardProject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stage1Mode {
    /// Fresh dense solve at every step, `O(n^4)` overall.
    Reference,
    /// Bordered factorization grown by one row and column per step, `O(n^3)`.
    #[default]
    Fast,
}

/// Packed triangular table of `(w^(k)_j, ν^(k)_j)` for `j` in the first `k`
/// selected states, `k = 1..=n`. Entry `pos` of step `k` belongs to
/// `order[pos]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTables {
    n: usize,
    work: Vec<f64>,
    index: Vec<f64>,
}

impl MarginalTables {
    fn with_capacity(n: usize) -> Self {
        Self {
            n,
            work: Vec::with_capacity(n * (n + 1) / 2),
            index: Vec::with_capacity(n * (n + 1) / 2),
        }
    }

    fn push(&mut self, work: f64, index: f64) {
        self.work.push(work);
        self.index.push(index);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored pairs; `n(n+1)/2` once complete.
    pub fn len(&self) -> usize {
        self.work.len()
    }

    pub fn is_empty(&self) -> bool {
        self.work.is_empty()
    }

    /// Marginal work and productivity after step `k` (1-based), aligned with
    /// the first `k` entries of the selection order.
    pub fn step(&self, k: usize) -> (&[f64], &[f64]) {
        assert!((1..=self.n).contains(&k), "step {k} outside 1..={}", self.n);
        let start = k * (k - 1) / 2;
        (&self.work[start..start + k], &self.index[start..start + k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    /// States in selection order (nonincreasing index).
    pub order: Vec<usize>,
    /// Continuation index of `order[k]`.
    pub nu_cont: Vec<f64>,
    pub tables: MarginalTables,
    /// Arithmetic operations of the fast path; zero in reference mode.
    pub op_count: u64,
}

impl Stage1Output {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Index values by state id.
    pub fn index_by_state(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (&i, &v) in self.order.iter().zip(&self.nu_cont) {
            out[i] = v;
        }
        out
    }

    /// Debug JSON with 1-based states. Tables are omitted unless requested.
    pub fn to_json(&self, include_tables: bool) -> Value {
        let mut v = json!({
            "order": self.order.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "nu_cont": self.nu_cont,
            "op_count": self.op_count,
        });
        if include_tables {
            let steps: Vec<Value> = (1..=self.n())
                .map(|k| {
                    let (w, nu) = self.tables.step(k);
                    json!({ "w": w, "nu": nu })
                })
                .collect();
            v["tables"] = Value::Array(steps);
        }
        v
    }
}

/// Continuation index of a project with switching costs. Shutdown costs shift
/// the rewards, so the spec is normalized first.
pub fn compute_stage1(spec: &ProjectSpec, mode: Stage1Mode) -> Result<Stage1Output> {
    let norm = spec.normalize()?;
    run_stage1(norm.as_reward_project(), mode)
}

/// Gittins index of every state (continuation index), by state id.
pub fn gittins_index(spec: &ProjectSpec) -> Result<Vec<f64>> {
    Ok(compute_stage1(spec, Stage1Mode::Fast)?.index_by_state())
}

/// Adaptive greedy run on raw active dynamics. The caller guarantees a
/// row-stochastic transition matrix and `0 < β < 1`.
pub fn run_stage1(project: RewardProject<'_>, mode: Stage1Mode) -> Result<Stage1Output> {
    let n = project.n();
    if n == 0 || project.transition.rows() != n || project.transition.cols() != n {
        return Err(Error::Dimension(format!(
            "{}x{} transition matrix for {n} rewards",
            project.transition.rows(),
            project.transition.cols()
        )));
    }
    match mode {
        Stage1Mode::Reference => reference(project),
        Stage1Mode::Fast => fast(project),
    }
}

/// Position of the largest value among states not yet selected; ties go to
/// the smallest state id.
fn pick(values: &[f64], selected: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_val = f64::NEG_INFINITY;
    for (i, (&v, &s)) in values.iter().zip(selected).enumerate() {
        if !s && (best == usize::MAX || v > best_val) {
            best = i;
            best_val = v;
        }
    }
    best
}

fn reference(project: RewardProject<'_>) -> Result<Stage1Output> {
    let n = project.n();
    let beta = project.beta;
    let mut order = Vec::with_capacity(n);
    let mut nu_cont = Vec::with_capacity(n);
    let mut selected = vec![false; n];
    let mut tables = MarginalTables::with_capacity(n);
    let mut current = project.reward.to_vec();
    for _ in 0..n {
        let i = pick(&current, &selected);
        order.push(i);
        nu_cont.push(current[i]);
        selected[i] = true;
        let m = work_reward_on_set(project, &order)?;
        let mm = marginal_measures(project, &order, &m)?;
        for &j in &order {
            tables.push(mm.work[j], mm.index[j]);
        }
        debug_assert!(order.iter().all(|&j| (mm.work[j] - (1.0 - beta) * m.work[j]).abs() < 1e-12));
        current = mm.index;
    }
    Ok(Stage1Output {
        order,
        nu_cont,
        tables,
        op_count: 0,
    })
}

fn fast(project: RewardProject<'_>) -> Result<Stage1Output> {
    let n = project.n();
    let beta = project.beta;
    let one_minus_beta = 1.0 - beta;
    let p = project.transition;
    let reward = project.reward;

    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut nu_cont = Vec::with_capacity(n);
    let mut selected = vec![false; n];
    let mut tables = MarginalTables::with_capacity(n);
    let mut lu = BorderedLu::with_capacity(n);
    // Marginal productivity of states outside the active set; S = ∅ gives R.
    let mut outside = reward.to_vec();
    let mut rhs_reward: Vec<f64> = Vec::with_capacity(n);
    let mut col = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n);
    let mut ops: u64 = 1;

    for k in 1..=n {
        let i = pick(&outside, &selected);
        nu_cont.push(outside[i]);
        selected[i] = true;

        col.clear();
        row.clear();
        let prow = p.row(i);
        for &s in &order {
            col.push(-beta * p[(s, i)]);
            row.push(-beta * prow[s]);
        }
        lu.push(&col, &row, 1.0 - beta * prow[i])?;
        ops += 2 * (k as u64 - 1) + 2;
        order.push(i);
        rhs_reward.push(reward[i]);

        let ones = vec![1.0; k];
        let g = lu.solve(&ones);
        let f = lu.solve(&rhs_reward);
        check_bordered_residual(p, beta, &order, &g, &f, &rhs_reward)?;

        for (&gj, &fj) in g.iter().zip(&f) {
            let w = one_minus_beta * gj;
            tables.push(w, (one_minus_beta * fj) / w);
        }
        ops += 3 * k as u64;

        for (j, out) in outside.iter_mut().enumerate() {
            if selected[j] {
                continue;
            }
            let prow = p.row(j);
            let mut sg = 0.0;
            let mut sf = 0.0;
            for ((&s, &gs), &fs) in order.iter().zip(&g).zip(&f) {
                let pjs = prow[s];
                sg += pjs * gs;
                sf += pjs * fs;
            }
            let w = 1.0 + beta * sg;
            if !(w > 0.0) {
                return Err(Error::NumericalQuality {
                    context: "marginal work",
                    residual: w,
                    bound: 0.0,
                });
            }
            *out = (reward[j] + beta * sf) / w;
        }
        ops += (n - k) as u64 * (4 * k as u64 + 5);
    }
    ops += lu.op_count();
    Ok(Stage1Output {
        order,
        nu_cont,
        tables,
        op_count: ops,
    })
}

/// `‖(I − βP_SS) x − rhs‖∞` for both solves against the original matrix.
fn check_bordered_residual(
    p: &crate::linalg::Matrix,
    beta: f64,
    set: &[usize],
    g: &[f64],
    f: &[f64],
    rhs_reward: &[f64],
) -> Result<()> {
    let mut res_g = 0.0_f64;
    let mut res_f = 0.0_f64;
    for (r, &i) in set.iter().enumerate() {
        let prow = p.row(i);
        let mut sg = 0.0;
        let mut sf = 0.0;
        for ((&s, &gs), &fs) in set.iter().zip(g).zip(f) {
            sg += prow[s] * gs;
            sf += prow[s] * fs;
        }
        res_g = res_g.max((g[r] - beta * sg - 1.0).abs());
        res_f = res_f.max((f[r] - beta * sf - rhs_reward[r]).abs());
    }
    let bound_f = RESIDUAL_TOLERANCE * crate::linalg::norm_inf(rhs_reward).max(1.0);
    if !(res_g <= RESIDUAL_TOLERANCE) {
        return Err(Error::NumericalQuality {
            context: "bordered work solve",
            residual: res_g,
            bound: RESIDUAL_TOLERANCE,
        });
    }
    if !(res_f <= bound_f) {
        return Err(Error::NumericalQuality {
            context: "bordered reward solve",
            residual: res_f,
            bound: bound_f,
        });
    }
    Ok(())
}
