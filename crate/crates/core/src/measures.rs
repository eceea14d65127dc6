//! Work, reward and marginal measures of the project without switching costs
//! under the policy that is active exactly on a set `S`.

use crate::error::{Error, Result};
use crate::linalg::{solve_checked, Matrix};
use crate::model::RewardProject;

/// Relative residual accepted for the evaluation solves.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// `g^S` (expected discounted active time) and `f^S` (expected discounted
/// reward), zero outside `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMeasures {
    pub work: Vec<f64>,
    pub reward: Vec<f64>,
}

/// Marginal work `w^S`, marginal reward `r^S` and their ratio `ν^S`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMeasures {
    pub work: Vec<f64>,
    pub reward: Vec<f64>,
    pub index: Vec<f64>,
}

fn check_set(n: usize, set: &[usize]) -> Result<Vec<bool>> {
    let mut member = vec![false; n];
    for &i in set {
        if i >= n {
            return Err(Error::InvalidArgument(format!("state {i} outside 0..{n}")));
        }
        if member[i] {
            return Err(Error::InvalidArgument(format!("state {i} repeated in active set")));
        }
        member[i] = true;
    }
    Ok(member)
}

/// Solve `(I_S − βP_SS) g = 1` and `(I_S − βP_SS) f = R_S`.
pub fn work_reward_on_set(project: RewardProject<'_>, set: &[usize]) -> Result<SetMeasures> {
    let n = project.n();
    check_set(n, set)?;
    let mut work = vec![0.0; n];
    let mut reward = vec![0.0; n];
    if set.is_empty() {
        return Ok(SetMeasures { work, reward });
    }
    let k = set.len();
    let p = project.transition;
    let mut a = Matrix::zeros(k, k);
    for (r, &i) in set.iter().enumerate() {
        for (s, &j) in set.iter().enumerate() {
            a[(r, s)] = -project.beta * p[(i, j)];
        }
        a[(r, r)] += 1.0;
    }
    let ones = vec![1.0; k];
    let rhs: Vec<f64> = set.iter().map(|&i| project.reward[i]).collect();
    let g = solve_checked(&a, &ones, RESIDUAL_TOLERANCE, "work measure")?;
    let f = solve_checked(&a, &rhs, RESIDUAL_TOLERANCE, "reward measure")?;
    for (r, &i) in set.iter().enumerate() {
        work[i] = g[r];
        reward[i] = f[r];
    }
    Ok(SetMeasures { work, reward })
}

/// Marginal measures from the set measures of `set`.
///
/// Inside the set `w = (1−β)g`, `r = (1−β)f`; outside it
/// `w_i = 1 + β Σ_{j∈S} p_ij g_j` and `r_i = R_i + β Σ_{j∈S} p_ij f_j`.
pub fn marginal_measures(
    project: RewardProject<'_>,
    set: &[usize],
    measures: &SetMeasures,
) -> Result<MarginalMeasures> {
    let n = project.n();
    let member = check_set(n, set)?;
    let beta = project.beta;
    let p = project.transition;
    let mut work = vec![0.0; n];
    let mut reward = vec![0.0; n];
    let mut index = vec![0.0; n];
    for i in 0..n {
        let (w, r) = if member[i] {
            ((1.0 - beta) * measures.work[i], (1.0 - beta) * measures.reward[i])
        } else {
            let row = p.row(i);
            let (sg, sf) = set.iter().fold((0.0, 0.0), |(sg, sf), &j| {
                (sg + row[j] * measures.work[j], sf + row[j] * measures.reward[j])
            });
            (1.0 + beta * sg, project.reward[i] + beta * sf)
        };
        assert!(w > 0.0, "marginal work must be positive, got {w} at state {i}");
        work[i] = w;
        reward[i] = r;
        index[i] = r / w;
    }
    Ok(MarginalMeasures {
        work,
        reward,
        index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::three_state_example;

    #[test]
    fn single_absorbing_state() {
        let p = Matrix::identity(1);
        let r = [1.0];
        let proj = RewardProject {
            transition: &p,
            reward: &r,
            beta: 0.5,
        };
        let m = work_reward_on_set(proj, &[0]).unwrap();
        assert!((m.work[0] - 2.0).abs() < 1e-15);
        assert!((m.reward[0] - 2.0).abs() < 1e-15);
        let mm = marginal_measures(proj, &[0], &m).unwrap();
        assert!((mm.work[0] - 1.0).abs() < 1e-15);
        assert!((mm.reward[0] - 1.0).abs() < 1e-15);
        assert!((mm.index[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_outside_set() {
        let s = three_state_example();
        let proj = RewardProject {
            transition: &s.transition,
            reward: &s.reward,
            beta: s.beta,
        };
        let m = work_reward_on_set(proj, &[0, 2]).unwrap();
        assert_eq!(m.work[1], 0.0);
        assert_eq!(m.reward[1], 0.0);
    }

    #[test]
    fn full_set_work_is_geometric() {
        let s = three_state_example();
        let proj = RewardProject {
            transition: &s.transition,
            reward: &s.reward,
            beta: s.beta,
        };
        let m = work_reward_on_set(proj, &[0, 1, 2]).unwrap();
        for g in m.work {
            assert!((g - 20.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_set_marginals() {
        let s = three_state_example();
        let proj = RewardProject {
            transition: &s.transition,
            reward: &s.reward,
            beta: s.beta,
        };
        let m = work_reward_on_set(proj, &[]).unwrap();
        let mm = marginal_measures(proj, &[], &m).unwrap();
        assert_eq!(mm.work, vec![1.0; 3]);
        assert_eq!(mm.reward, s.reward);
        assert_eq!(mm.index, s.reward);
    }

    #[test]
    fn bad_sets_rejected() {
        let s = three_state_example();
        let proj = RewardProject {
            transition: &s.transition,
            reward: &s.reward,
            beta: s.beta,
        };
        assert!(work_reward_on_set(proj, &[3]).is_err());
        assert!(work_reward_on_set(proj, &[1, 1]).is_err());
    }
}
