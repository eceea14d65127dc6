//! Exact model of `M` projects with switching costs, for small instances.
//!
//! A joint state is the incumbent (the project engaged in the previous
//! period, or none before the first decision) plus the state of every
//! project. Engaging project `m` earns `R_m(i_m)`, pays `c_m(i_m)` unless `m`
//! is the incumbent, pays the incumbent's shutdown cost `d(i)` if a different
//! project was engaged, and moves only project `m`.

use crate::error::{Error, Result};
use crate::linalg::{check_residual, Lu, Matrix};
use crate::model::{ensure_valid, AugmentedState, ProjectSpec};

/// Cap on `(M + 1) · Π n_m`.
pub const MAX_JOINT_STATES: usize = 1_000_000;
/// Largest state space evaluated by dense LU; bigger ones use certified
/// Gauss–Seidel sweeps.
pub const DENSE_EVALUATION_LIMIT: usize = 1024;
pub const MAX_SWEEPS: usize = 1_000_000;
/// Accepted relative residual of a policy evaluation.
pub const EVALUATION_RESIDUAL: f64 = 1e-10;
/// Residual target of the iterative evaluation path, relative to `max(1, ‖r‖∞)`.
const ITERATIVE_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointState {
    /// 0 when no project has been engaged yet, otherwise `m + 1`.
    pub incumbent: usize,
    pub states: Vec<usize>,
}

/// Values of a stationary policy over every joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub values: Vec<f64>,
    /// Mean value over the joint states with no incumbent.
    pub scalar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub value: PolicyValue,
    /// Project engaged in each joint state.
    pub policy: Vec<usize>,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Prefer the incumbent, then the lowest project number.
    #[default]
    IncumbentFirst,
    LowestProject,
}

#[derive(Debug, Clone)]
pub struct JointMdp<'a> {
    projects: &'a [ProjectSpec],
    beta: f64,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    block: usize,
}

impl<'a> JointMdp<'a> {
    pub fn new(projects: &'a [ProjectSpec]) -> Result<Self> {
        let first = projects
            .first()
            .ok_or_else(|| Error::InvalidArgument("at least one project is required".into()))?;
        let beta = first.beta;
        for p in projects {
            ensure_valid(p)?;
            if p.beta != beta {
                return Err(Error::InvalidArgument(format!(
                    "projects disagree on the discount factor: {} vs {beta}",
                    p.beta
                )));
            }
        }
        let sizes: Vec<usize> = projects.iter().map(ProjectSpec::n).collect();
        let mut strides = Vec::with_capacity(sizes.len());
        let mut block: usize = 1;
        for &n in &sizes {
            strides.push(block);
            block = block.saturating_mul(n);
        }
        let total = block.saturating_mul(projects.len() + 1);
        if total > MAX_JOINT_STATES {
            return Err(Error::SizeGuard {
                what: "joint state count",
                limit: MAX_JOINT_STATES,
                actual: total,
            });
        }
        Ok(Self {
            projects,
            beta,
            sizes,
            strides,
            block,
        })
    }

    pub fn projects(&self) -> usize {
        self.projects.len()
    }

    pub fn num_states(&self) -> usize {
        self.block * (self.projects.len() + 1)
    }

    /// Number of joint states sharing one incumbent value.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn encode(&self, s: &JointState) -> usize {
        s.incumbent * self.block
            + s.states
                .iter()
                .zip(&self.strides)
                .map(|(x, st)| x * st)
                .sum::<usize>()
    }

    pub fn decode(&self, idx: usize) -> JointState {
        let incumbent = idx / self.block;
        let code = idx % self.block;
        let states = self
            .sizes
            .iter()
            .zip(&self.strides)
            .map(|(n, st)| (code / st) % n)
            .collect();
        JointState { incumbent, states }
    }

    fn coord(&self, code: usize, m: usize) -> usize {
        (code / self.strides[m]) % self.sizes[m]
    }

    /// One-period net reward of engaging project `m` in joint state `idx`.
    pub fn reward(&self, idx: usize, m: usize) -> f64 {
        let inc = idx / self.block;
        let code = idx % self.block;
        let p = &self.projects[m];
        let x = self.coord(code, m);
        let mut r = p.reward[x];
        if inc != m + 1 {
            r -= p.startup_cost[x];
            if inc != 0 {
                let q = inc - 1;
                r -= self.projects[q].shutdown_cost[self.coord(code, q)];
            }
        }
        r
    }

    /// `E[v(next)]` after engaging `m` in joint state `idx`.
    fn expected_next(&self, idx: usize, m: usize, v: &[f64]) -> f64 {
        let code = idx % self.block;
        let x = self.coord(code, m);
        let stride = self.strides[m];
        let base = (m + 1) * self.block + code - x * stride;
        self.projects[m]
            .transition
            .row(x)
            .iter()
            .enumerate()
            .map(|(j, p)| p * v[base + j * stride])
            .sum()
    }

    fn q_value(&self, idx: usize, m: usize, v: &[f64]) -> f64 {
        self.reward(idx, m) + self.beta * self.expected_next(idx, m, v)
    }

    /// Action order in which a tie keeps the earlier candidate.
    fn candidates(&self, idx: usize, tie: TieRule) -> impl Iterator<Item = usize> {
        let inc = idx / self.block;
        let first = match tie {
            TieRule::IncumbentFirst if inc > 0 => Some(inc - 1),
            _ => None,
        };
        first
            .into_iter()
            .chain((0..self.projects.len()).filter(move |&m| Some(m) != first))
    }

    fn scalar(&self, values: &[f64]) -> f64 {
        values[..self.block].iter().sum::<f64>() / self.block as f64
    }

    /// Value iteration to a sup-norm change of `1e-12·(1−β)`, greedy policy
    /// extraction, then exact evaluation of that policy.
    pub fn solve_optimal(&self) -> Result<OptimalSolution> {
        let ns = self.num_states();
        let tol = 1e-12 * (1.0 - self.beta);
        let mut v = vec![0.0; ns];
        let mut next = vec![0.0; ns];
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut change = 0.0_f64;
            for (idx, out) in next.iter_mut().enumerate() {
                let best = (0..self.projects.len())
                    .map(|m| self.q_value(idx, m, &v))
                    .fold(f64::NEG_INFINITY, f64::max);
                change = change.max((best - v[idx]).abs());
                *out = best;
            }
            std::mem::swap(&mut v, &mut next);
            if change <= tol {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::NonConvergence {
                    context: "value iteration",
                    sweeps,
                });
            }
        }
        let policy = self.greedy(&v, TieRule::IncumbentFirst);
        let value = self.evaluate(&policy)?;
        Ok(OptimalSolution {
            value,
            policy,
            sweeps,
        })
    }

    pub fn greedy(&self, v: &[f64], tie: TieRule) -> Vec<usize> {
        (0..self.num_states())
            .map(|idx| {
                let mut best = usize::MAX;
                let mut best_q = f64::NEG_INFINITY;
                for m in self.candidates(idx, tie) {
                    let q = self.q_value(idx, m, v);
                    if best == usize::MAX || q > best_q {
                        best = m;
                        best_q = q;
                    }
                }
                best
            })
            .collect()
    }

    /// Stationary index policy: engage the project with the largest index of
    /// its augmented state.
    pub fn priority_policy<F>(&self, index: F, tie: TieRule) -> Vec<usize>
    where
        F: Fn(usize, AugmentedState) -> f64,
    {
        (0..self.num_states())
            .map(|idx| {
                let inc = idx / self.block;
                let code = idx % self.block;
                let mut best = usize::MAX;
                let mut best_v = f64::NEG_INFINITY;
                for m in self.candidates(idx, tie) {
                    let a = AugmentedState::new(inc == m + 1, self.coord(code, m));
                    let val = index(m, a);
                    if best == usize::MAX || val > best_v {
                        best = m;
                        best_v = val;
                    }
                }
                best
            })
            .collect()
    }

    /// Value of a stationary policy from its evaluation equations.
    pub fn evaluate(&self, policy: &[usize]) -> Result<PolicyValue> {
        let ns = self.num_states();
        if policy.len() != ns || policy.iter().any(|&m| m >= self.projects.len()) {
            return Err(Error::Dimension(format!(
                "policy of length {} for {ns} joint states",
                policy.len()
            )));
        }
        let rewards: Vec<f64> = (0..ns).map(|idx| self.reward(idx, policy[idx])).collect();
        let values = if ns <= DENSE_EVALUATION_LIMIT {
            self.evaluate_dense(policy, &rewards)?
        } else {
            self.evaluate_iterative(policy, &rewards)?
        };
        let scalar = self.scalar(&values);
        Ok(PolicyValue { values, scalar })
    }

    fn evaluate_dense(&self, policy: &[usize], rewards: &[f64]) -> Result<Vec<f64>> {
        let ns = self.num_states();
        let mut a = Matrix::identity(ns);
        for idx in 0..ns {
            let m = policy[idx];
            let code = idx % self.block;
            let x = self.coord(code, m);
            let stride = self.strides[m];
            let base = (m + 1) * self.block + code - x * stride;
            for (j, p) in self.projects[m].transition.row(x).iter().enumerate() {
                a[(idx, base + j * stride)] -= self.beta * p;
            }
        }
        let lu = Lu::factor(&a)?;
        let v = lu.solve(rewards);
        check_residual(&a, &v, rewards, EVALUATION_RESIDUAL, "policy evaluation")?;
        Ok(v)
    }

    fn evaluate_iterative(&self, policy: &[usize], rewards: &[f64]) -> Result<Vec<f64>> {
        let ns = self.num_states();
        let scale = crate::linalg::norm_inf(rewards).max(1.0);
        let target = ITERATIVE_RESIDUAL * scale;
        let mut v = vec![0.0; ns];
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut change = 0.0_f64;
            for idx in 0..ns {
                let new = rewards[idx] + self.beta * self.expected_next(idx, policy[idx], &v);
                change = change.max((new - v[idx]).abs());
                v[idx] = new;
            }
            if change <= target * (1.0 - self.beta) {
                let residual = (0..ns)
                    .map(|idx| {
                        (rewards[idx] + self.beta * self.expected_next(idx, policy[idx], &v) - v[idx]).abs()
                    })
                    .fold(0.0_f64, f64::max);
                if residual <= target {
                    return Ok(v);
                }
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::NonConvergence {
                    context: "policy evaluation",
                    sweeps,
                });
            }
        }
    }

    /// Evaluate the index policy given by `index(project, augmented state)`.
    pub fn evaluate_priority_policy<F>(&self, index: F, tie: TieRule) -> Result<PolicyValue>
    where
        F: Fn(usize, AugmentedState) -> f64,
    {
        let policy = self.priority_policy(index, tie);
        self.evaluate(&policy)
    }
}

/// Optimal value of the joint problem; `beta` must match every project.
pub fn solve_optimal(specs: &[ProjectSpec], beta: f64) -> Result<OptimalSolution> {
    check_beta(specs, beta)?;
    JointMdp::new(specs)?.solve_optimal()
}

pub fn evaluate_priority_policy<F>(specs: &[ProjectSpec], beta: f64, index: F, tie: TieRule) -> Result<PolicyValue>
where
    F: Fn(usize, AugmentedState) -> f64,
{
    check_beta(specs, beta)?;
    JointMdp::new(specs)?.evaluate_priority_policy(index, tie)
}

fn check_beta(specs: &[ProjectSpec], beta: f64) -> Result<()> {
    match specs.iter().find(|s| s.beta != beta) {
        Some(s) => Err(Error::InvalidArgument(format!(
            "project discount {} differs from {beta}",
            s.beta
        ))),
        None => Ok(()),
    }
}

/// Absolute value below which two policy values count as equal.
pub const GAP_EPSILON: f64 = 1e-12;
/// Slack allowed when a policy appears to beat the optimum.
pub const DOMINANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMetrics {
    /// `100 (v_opt − v_mpi) / |v_opt|`.
    pub delta: f64,
    /// `100 (v_opt − v_mpi) / (v_opt − v_bench)`; `None` when only the
    /// benchmark gap vanishes.
    pub rho: Option<f64>,
    /// Both gaps vanish; `rho` is then reported as 0.
    pub equivalent: bool,
}

pub fn gap_metrics(v_opt: f64, v_mpi: f64, v_bench: f64) -> Result<GapMetrics> {
    for v in [v_mpi, v_bench] {
        if v > v_opt + DOMINANCE_SLACK {
            return Err(Error::NumericalQuality {
                context: "optimal value below a policy value",
                residual: v - v_opt,
                bound: DOMINANCE_SLACK,
            });
        }
    }
    // Gaps below zero are rounding noise.
    let gap_mpi = (v_opt - v_mpi).max(0.0);
    let gap_bench = (v_opt - v_bench).max(0.0);
    let delta = if gap_mpi == 0.0 { 0.0 } else { 100.0 * gap_mpi / v_opt.abs() };
    let (rho, equivalent) = if gap_mpi < GAP_EPSILON && gap_bench < GAP_EPSILON {
        (Some(0.0), true)
    } else if gap_bench < GAP_EPSILON {
        (None, false)
    } else {
        (Some(100.0 * gap_mpi / gap_bench), false)
    };
    Ok(GapMetrics { delta, rho, equivalent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_instance, CostModel, InstanceEnsembleConfig};
    use crate::stage1::gittins_index;
    use crate::stage2::compute_index_table;

    fn single(r: f64, c: f64) -> ProjectSpec {
        ProjectSpec::new(Matrix::identity(1), vec![r], vec![c], vec![0.0], 0.5)
    }

    #[test]
    fn two_single_state_projects() {
        let specs = vec![single(0.9, 0.2), single(0.4, 0.1)];
        let opt = solve_optimal(&specs, 0.5).unwrap();
        assert!((opt.value.scalar - 1.6).abs() < 1e-12);

        let tables: Vec<_> = specs.iter().map(|s| compute_index_table(s).unwrap()).collect();
        let mpi = evaluate_priority_policy(&specs, 0.5, |m, a| tables[m].index(a), TieRule::IncumbentFirst).unwrap();
        assert!((mpi.scalar - 1.6).abs() < 1e-12);
    }

    #[test]
    fn encode_decode_roundtrip() {
        let cfg = InstanceEnsembleConfig::new(3, 3, 1, 1, 0.9);
        let specs = generate_instance(&cfg, 0).unwrap();
        let mdp = JointMdp::new(&specs).unwrap();
        assert_eq!(mdp.num_states(), 4 * 27);
        for idx in 0..mdp.num_states() {
            assert_eq!(mdp.encode(&mdp.decode(idx)), idx);
        }
    }

    #[test]
    fn shutdown_cost_charged_on_switch_only() {
        let mut a = single(1.0, 0.3);
        a.shutdown_cost = vec![0.25];
        let b = single(0.5, 0.1);
        let specs = vec![a, b];
        let mdp = JointMdp::new(&specs).unwrap();
        let idx = |inc| mdp.encode(&JointState { incumbent: inc, states: vec![0, 0] });
        assert_eq!(mdp.reward(idx(0), 0), 0.7);
        assert_eq!(mdp.reward(idx(1), 0), 1.0);
        assert_eq!(mdp.reward(idx(1), 1), 0.5 - 0.1 - 0.25);
        assert_eq!(mdp.reward(idx(2), 0), 1.0 - 0.3);
    }

    #[test]
    fn no_switching_costs_gittins_is_optimal() {
        let cfg = InstanceEnsembleConfig::new(2, 5, 9, 3, 0.8);
        for k in 0..3 {
            let specs = generate_instance(&cfg, k).unwrap();
            let opt = solve_optimal(&specs, 0.8).unwrap();
            let g: Vec<_> = specs.iter().map(|s| gittins_index(s).unwrap()).collect();
            let v = evaluate_priority_policy(&specs, 0.8, |m, a| g[m][a.state], TieRule::IncumbentFirst).unwrap();
            assert!((opt.value.scalar - v.scalar).abs() < 1e-9);
        }
    }

    #[test]
    fn iterative_and_dense_evaluation_agree() {
        let mut cfg = InstanceEnsembleConfig::new(2, 6, 4, 1, 0.9);
        cfg.startup = CostModel::Constant(0.3);
        let specs = generate_instance(&cfg, 0).unwrap();
        let mdp = JointMdp::new(&specs).unwrap();
        let policy: Vec<usize> = (0..mdp.num_states()).map(|i| i % 2).collect();
        let rewards: Vec<f64> = (0..mdp.num_states()).map(|i| mdp.reward(i, policy[i])).collect();
        let dense = mdp.evaluate_dense(&policy, &rewards).unwrap();
        let iter = mdp.evaluate_iterative(&policy, &rewards).unwrap();
        for (a, b) in dense.iter().zip(&iter) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn size_guard() {
        let cfg = InstanceEnsembleConfig::new(4, 32, 1, 1, 0.9);
        let specs = generate_instance(&cfg, 0).unwrap();
        assert!(matches!(JointMdp::new(&specs), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn mismatched_beta_rejected() {
        let specs = vec![single(0.9, 0.2), single(0.4, 0.1).with_beta(0.6)];
        assert!(JointMdp::new(&specs).is_err());
        assert!(solve_optimal(&specs[..1], 0.7).is_err());
    }

    #[test]
    fn gap_conventions() {
        let g = gap_metrics(2.0, 2.0, 1.5).unwrap();
        assert_eq!(g.delta, 0.0);
        assert_eq!(g.rho, Some(0.0));
        assert!(!g.equivalent);

        let g = gap_metrics(2.0, 2.0, 2.0).unwrap();
        assert_eq!(g.rho, Some(0.0));
        assert!(g.equivalent);

        let g = gap_metrics(2.0, 1.9, 2.0).unwrap();
        assert_eq!(g.rho, None);
        assert!((g.delta - 5.0).abs() < 1e-12);

        let g = gap_metrics(2.0, 1.9, 1.8).unwrap();
        assert!((g.rho.unwrap() - 50.0).abs() < 1e-9);

        assert!(gap_metrics(2.0, 2.1, 1.0).is_err());
    }
}
