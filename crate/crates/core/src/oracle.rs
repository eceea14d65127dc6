//! Brute-force ground truth for small projects.
//!
//! The index oracle enumerates every active set containing the state. The
//! measure-lemma check evaluates the augmented `2n`-state measures by plain
//! fixed-point iteration, independent of any linear solver, and compares them
//! with the set measures of the underlying project.

use crate::error::{Error, Result};
use crate::measures::{marginal_measures, work_reward_on_set, MarginalMeasures, SetMeasures};
use crate::model::NormalizedProjectSpec;

pub const MAX_ORACLE_STATES: usize = 20;
pub const MAX_LEMMA_STATES: usize = 8;
/// Stop the fixed-point sweeps once the sup-norm change falls below this.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-13;
pub const LEMMA_TOLERANCE: f64 = 1e-9;

/// `max over S ∋ i of (f_i^S − (1−a)c_i) / g_i^S`.
pub fn brute_force_index(spec: &NormalizedProjectSpec, prev_active: bool, i: usize) -> Result<f64> {
    let n = spec.n();
    guard(n, MAX_ORACLE_STATES)?;
    if i >= n {
        return Err(Error::InvalidArgument(format!("state {i} outside 0..{n}")));
    }
    let cost = if prev_active { 0.0 } else { spec.startup_cost()[i] };
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u64..(1u64 << others.len()) {
        let mut set = vec![i];
        set.extend(
            others
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &j)| j),
        );
        let m = work_reward_on_set(spec.as_reward_project(), &set)?;
        best = best.max((m.reward[i] - cost) / m.work[i]);
    }
    Ok(best)
}

/// Both indices of every state, solving each nonempty subset once.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceTable {
    pub nu_cont: Vec<f64>,
    pub nu_switch: Vec<f64>,
}

pub fn brute_force_table(spec: &NormalizedProjectSpec) -> Result<BruteForceTable> {
    let n = spec.n();
    guard(n, MAX_ORACLE_STATES)?;
    let c = spec.startup_cost();
    let mut nu_cont = vec![f64::NEG_INFINITY; n];
    let mut nu_switch = vec![f64::NEG_INFINITY; n];
    for mask in 1u64..(1u64 << n) {
        let set: Vec<usize> = (0..n).filter(|&j| mask >> j & 1 == 1).collect();
        let m = work_reward_on_set(spec.as_reward_project(), &set)?;
        for &i in &set {
            nu_cont[i] = nu_cont[i].max(m.reward[i] / m.work[i]);
            nu_switch[i] = nu_switch[i].max((m.reward[i] - c[i]) / m.work[i]);
        }
    }
    Ok(BruteForceTable { nu_cont, nu_switch })
}

fn guard(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::SizeGuard {
            what: "oracle state count",
            limit,
            actual: n,
        })
    } else {
        Ok(())
    }
}

/// Measures of the restless reformulation under the policy active at
/// `(0, i)` for `i ∈ S0` and at `(1, i)` for `i ∈ S1`. Vectors are indexed
/// `[a][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMeasures {
    pub work: [Vec<f64>; 2],
    pub reward: [Vec<f64>; 2],
    pub marginal_work: [Vec<f64>; 2],
    pub marginal_reward: [Vec<f64>; 2],
    pub marginal_index: [Vec<f64>; 2],
    pub sweeps: usize,
}

/// Fixed-point evaluation with synchronous sweeps.
pub fn augmented_measures(spec: &NormalizedProjectSpec, s0: &[bool], s1: &[bool]) -> Result<AugmentedMeasures> {
    let n = spec.n();
    let beta = spec.beta();
    let p = spec.transition();
    let r = spec.reward();
    let c = spec.startup_cost();
    let active = |a: usize, i: usize| if a == 0 { s0[i] } else { s1[i] };
    let net = |a: usize, i: usize| if a == 0 { r[i] - c[i] } else { r[i] };

    let mut g = [vec![0.0; n], vec![0.0; n]];
    let mut f = [vec![0.0; n], vec![0.0; n]];
    let max_sweeps = 1_000_000;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut ng = [vec![0.0; n], vec![0.0; n]];
        let mut nf = [vec![0.0; n], vec![0.0; n]];
        for a in 0..2 {
            for i in 0..n {
                if active(a, i) {
                    let row = p.row(i);
                    let eg: f64 = row.iter().zip(&g[1]).map(|(x, y)| x * y).sum();
                    let ef: f64 = row.iter().zip(&f[1]).map(|(x, y)| x * y).sum();
                    ng[a][i] = 1.0 + beta * eg;
                    nf[a][i] = net(a, i) + beta * ef;
                } else {
                    ng[a][i] = beta * g[0][i];
                    nf[a][i] = beta * f[0][i];
                }
            }
        }
        let change = (0..2)
            .flat_map(|a| (0..n).map(move |i| (a, i)))
            .fold(0.0_f64, |m, (a, i)| {
                m.max((ng[a][i] - g[a][i]).abs()).max((nf[a][i] - f[a][i]).abs())
            });
        g = ng;
        f = nf;
        if change <= FIXED_POINT_TOLERANCE {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NonConvergence {
                context: "augmented fixed point",
                sweeps,
            });
        }
    }

    // Marginal measures: act now then follow the policy, minus rest now.
    let mut mw = [vec![0.0; n], vec![0.0; n]];
    let mut mr = [vec![0.0; n], vec![0.0; n]];
    let mut mi = [vec![0.0; n], vec![0.0; n]];
    for a in 0..2 {
        for i in 0..n {
            let row = p.row(i);
            let eg: f64 = row.iter().zip(&g[1]).map(|(x, y)| x * y).sum();
            let ef: f64 = row.iter().zip(&f[1]).map(|(x, y)| x * y).sum();
            mw[a][i] = (1.0 + beta * eg) - beta * g[0][i];
            mr[a][i] = (net(a, i) + beta * ef) - beta * f[0][i];
            mi[a][i] = mr[a][i] / mw[a][i];
        }
    }
    Ok(AugmentedMeasures {
        work: g,
        reward: f,
        marginal_work: mw,
        marginal_reward: mr,
        marginal_index: mi,
        sweeps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseResult {
    /// Lemma name and clause letter, e.g. `"hatwis(b)"`.
    pub clause: &'static str,
    /// Number of individual identities checked.
    pub checked: usize,
    pub max_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub clauses: Vec<ClauseResult>,
    pub sweeps: usize,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClauseResult> {
        self.clauses.iter().filter(|c| !c.passed)
    }
}

struct Checker {
    clauses: Vec<ClauseResult>,
}

impl Checker {
    fn check(&mut self, clause: &'static str, pairs: impl IntoIterator<Item = (f64, f64)>) {
        let mut checked = 0;
        let mut max_error = 0.0_f64;
        for (lhs, rhs) in pairs {
            checked += 1;
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            let err = (lhs - rhs).abs() / scale;
            max_error = if err.is_nan() { f64::INFINITY } else { max_error.max(err) };
        }
        self.clauses.push(ClauseResult {
            clause,
            checked,
            max_error,
            passed: max_error <= LEMMA_TOLERANCE,
        });
    }
}

/// Check the identities linking the restless measures under `S0 ⊕ S1` with
/// the set measures of the underlying project. Errors are relative to
/// `max(1, |lhs|, |rhs|)`.
pub fn verify_measure_lemmas(spec: &NormalizedProjectSpec, s0: &[usize], s1: &[usize]) -> Result<LemmaReport> {
    let n = spec.n();
    guard(n, MAX_LEMMA_STATES)?;
    let mut in0 = vec![false; n];
    let mut in1 = vec![false; n];
    for (set, mark) in [(s0, &mut in0), (s1, &mut in1)] {
        for &i in set {
            if i >= n {
                return Err(Error::InvalidArgument(format!("state {i} outside 0..{n}")));
            }
            mark[i] = true;
        }
    }
    if (0..n).any(|i| in0[i] && !in1[i]) {
        return Err(Error::InvalidArgument("S0 must be a subset of S1".into()));
    }
    let beta = spec.beta();
    let c = spec.startup_cost();

    let aug = augmented_measures(spec, &in0, &in1)?;
    let aug_empty = augmented_measures(spec, &vec![false; n], &in1)?;
    let set1: Vec<usize> = (0..n).filter(|&i| in1[i]).collect();
    let set0: Vec<usize> = (0..n).filter(|&i| in0[i]).collect();
    let proj = spec.as_reward_project();
    let m1: SetMeasures = work_reward_on_set(proj, &set1)?;
    let mm1: MarginalMeasures = marginal_measures(proj, &set1, &m1)?;
    let m0: SetMeasures = work_reward_on_set(proj, &set0)?;

    let all: Vec<usize> = (0..n).collect();
    let outside1: Vec<usize> = (0..n).filter(|&i| !in1[i]).collect();
    let only1: Vec<usize> = (0..n).filter(|&i| in1[i] && !in0[i]).collect();
    let not0: Vec<usize> = (0..n).filter(|&i| !in0[i]).collect();
    let s0_or_out: Vec<usize> = (0..n).filter(|&i| in0[i] || !in1[i]).collect();

    let g = &aug.work;
    let f = &aug.reward;
    let w = &aug.marginal_work;
    let r = &aug.marginal_reward;
    let nu = &aug.marginal_index;
    let both = |v: &[usize]| -> Vec<(usize, usize)> { v.iter().flat_map(|&i| [(0, i), (1, i)]).collect() };

    let mut ck = Checker { clauses: Vec::new() };
    ck.check(
        "pwm(a)",
        both(&outside1)
            .into_iter()
            .flat_map(|(a, i)| [(g[a][i], m1.work[i]), (m1.work[i], 0.0)]),
    );
    ck.check("pwm(b)", set1.iter().map(|&i| (g[1][i], m1.work[i])));
    ck.check("pwm(c)", set0.iter().map(|&i| (g[0][i], m1.work[i])));
    ck.check("pwm(d)", only1.iter().map(|&i| (g[0][i], 0.0)));

    ck.check(
        "hatwis(a)",
        both(&s0_or_out).into_iter().map(|(a, i)| (w[a][i], mm1.work[i])),
    );
    ck.check(
        "hatwis(b)",
        both(&only1)
            .into_iter()
            .map(|(a, i)| (w[a][i], mm1.work[i] / (1.0 - beta))),
    );

    ck.check(
        "hatrmp(a)",
        both(&outside1)
            .into_iter()
            .flat_map(|(a, i)| [(f[a][i], 0.0), (m1.reward[i], 0.0)]),
    );
    ck.check("hatrmp(b)", set1.iter().map(|&i| (f[1][i], m1.reward[i])));
    ck.check("hatrmp(c)", set0.iter().map(|&i| (f[0][i], m1.reward[i] - c[i])));
    ck.check(
        "hatrmp(d)",
        only1.iter().flat_map(|&i| [(f[0][i], 0.0), (m0.reward[i], 0.0)]),
    );

    ck.check("pmrm(a)", all.iter().map(|&i| (r[0][i], r[1][i] - c[i])));
    ck.check("pmrm(b)", outside1.iter().map(|&i| (r[1][i], mm1.reward[i])));
    ck.check("pmrm(c)", set0.iter().map(|&i| (r[1][i], mm1.reward[i] + beta * c[i])));
    ck.check(
        "pmrm(d)",
        only1.iter().map(|&i| (r[1][i], mm1.reward[i] / (1.0 - beta))),
    );

    ck.check("pmpr(a)", all.iter().map(|&i| (nu[0][i], nu[1][i] - c[i] / w[1][i])));
    ck.check(
        "pmpr(b)",
        not0.iter()
            .flat_map(|&i| [(nu[1][i], mm1.index[i]), (mm1.index[i], aug_empty.marginal_index[1][i])]),
    );
    ck.check(
        "pmpr(c)",
        set0.iter()
            .map(|&i| (nu[1][i], mm1.index[i] + beta * c[i] / mm1.work[i])),
    );
    ck.check(
        "pmpr(d)",
        only1.iter().flat_map(|&i| {
            let rhs = mm1.index[i] - (1.0 - beta) * c[i] / mm1.work[i];
            [(nu[0][i], rhs), (rhs, aug_empty.marginal_index[0][i])]
        }),
    );
    ck.check(
        "positive marginal work",
        both(&all).into_iter().map(|(a, i)| (f64::from(u8::from(w[a][i] > 0.0)), 1.0)),
    );

    Ok(LemmaReport {
        clauses: ck.clauses,
        sweeps: aug.sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::three_state_example;

    fn normalized(c: Vec<f64>) -> NormalizedProjectSpec {
        let mut s = three_state_example();
        s.startup_cost = c;
        s.normalize().unwrap()
    }

    #[test]
    fn single_state_values() {
        let s = NormalizedProjectSpec::new(Matrix::identity(1), vec![1.0], vec![0.2], 0.5).unwrap();
        assert!((brute_force_index(&s, true, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((brute_force_index(&s, false, 0).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn table_agrees_with_pointwise() {
        let s = normalized(vec![0.3, 0.1, 0.6]);
        let t = brute_force_table(&s).unwrap();
        for i in 0..3 {
            assert!((t.nu_cont[i] - brute_force_index(&s, true, i).unwrap()).abs() < 1e-14);
            assert!((t.nu_switch[i] - brute_force_index(&s, false, i).unwrap()).abs() < 1e-14);
            assert!(t.nu_cont[i] >= t.nu_switch[i]);
        }
    }

    #[test]
    fn size_guard() {
        let n = 21;
        let s = NormalizedProjectSpec::new(Matrix::identity(n), vec![0.0; n], vec![0.0; n], 0.5).unwrap();
        assert!(matches!(brute_force_index(&s, true, 0), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn empty_sets_give_zero_measures() {
        let s = normalized(vec![0.3, 0.1, 0.6]);
        let aug = augmented_measures(&s, &[false; 3], &[false; 3]).unwrap();
        assert!(aug.work.iter().flatten().all(|&x| x == 0.0));
        assert!(aug.reward.iter().flatten().all(|&x| x == 0.0));
        assert!(verify_measure_lemmas(&s, &[], &[]).unwrap().all_passed());
    }

    #[test]
    fn full_s1_scales_marginal_work() {
        let s = normalized(vec![0.3, 0.1, 0.6]);
        let aug = augmented_measures(&s, &[false; 3], &[true; 3]).unwrap();
        let m = work_reward_on_set(s.as_reward_project(), &[0, 1, 2]).unwrap();
        let mm = marginal_measures(s.as_reward_project(), &[0, 1, 2], &m).unwrap();
        for a in 0..2 {
            for i in 0..3 {
                let expect = mm.work[i] / (1.0 - s.beta());
                assert!((aug.marginal_work[a][i] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lemmas_hold_on_example() {
        let s = normalized(vec![0.3, 0.1, 0.6]);
        let r = verify_measure_lemmas(&s, &[1], &[0, 1]).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.clauses.len(), 19);
    }

    #[test]
    fn non_nested_sets_rejected() {
        let s = normalized(vec![0.3, 0.1, 0.6]);
        assert!(verify_measure_lemmas(&s, &[2], &[0, 1]).is_err());
    }
}
