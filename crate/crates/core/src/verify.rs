//! Self-check suites: the index pipelines against each other and against the
//! enumeration oracle, the measure identities, the work bound and the
//! closed-form cost dependence.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::at::at_index_table;
use crate::error::Result;
use crate::generate::{instance_rng, random_stochastic_matrix};
use crate::linalg::{Lu, Matrix};
use crate::model::ProjectSpec;
use crate::oracle::{brute_force_table, verify_measure_lemmas};
use crate::stage1::{compute_stage1, gittins_index, Stage1Mode};
use crate::stage2::{compute_index_table, stage2_op_bound};

/// Agreement required between pipelines, oracle and closed forms.
pub const VERIFY_TOLERANCE: f64 = 1e-9;
/// Largest project checked against subset enumeration.
pub const ORACLE_MAX_STATES: usize = 10;
const MAX_REPORTED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerifyLevel {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub equivalence: usize,
    pub lemma_triples: usize,
    pub op_bound_max_n: usize,
    pub closed_form: usize,
}

impl VerifyLevel {
    pub fn sizes(self) -> SuiteSizes {
        match self {
            Self::Fast => SuiteSizes {
                equivalence: 60,
                lemma_triples: 20,
                op_bound_max_n: 60,
                closed_form: 10,
            },
            Self::Full => SuiteSizes {
                equivalence: 500,
                lemma_triples: 100,
                op_bound_max_n: 200,
                closed_form: 50,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checked: usize,
    pub max_error: f64,
    pub failure_count: usize,
    /// First few failures, for the log.
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            max_error: 0.0,
            failure_count: 0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failure_count == 0 && self.checked > 0
    }

    fn fail(&mut self, msg: String) {
        self.failure_count += 1;
        if self.failures.len() < MAX_REPORTED {
            self.failures.push(msg);
        }
    }

    /// Record `|a − b|`; a failure when above `tol`.
    fn compare(&mut self, a: f64, b: f64, tol: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        let err = (a - b).abs();
        if err.is_nan() || err > tol {
            self.fail(format!("{}: {a} vs {b}", what()));
        }
        if !err.is_nan() {
            self.max_error = self.max_error.max(err);
        }
    }

    /// Record `a ≤ b` up to `tol`.
    fn at_most(&mut self, a: f64, b: f64, tol: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        let excess = a - b;
        if !(excess <= tol) {
            self.fail(format!("{}: {a} > {b}", what()));
        }
        if excess > 0.0 {
            self.max_error = self.max_error.max(excess);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

pub const SUITE_AT: &str = "two-stage vs augmented";
pub const SUITE_ORACLE: &str = "two-stage vs enumeration";
pub const SUITE_MODES: &str = "reference vs fast first stage";
pub const SUITE_MONOTONE: &str = "monotone order and hysteresis";
pub const SUITE_LEMMAS: &str = "measure identities";
pub const SUITE_OPS: &str = "switching-stage work bound";
pub const SUITE_SHUTDOWN: &str = "shutdown shift";
pub const SUITE_LARGE_COST: &str = "large startup cost";
pub const SUITE_CONVEX: &str = "convex nonincreasing in startup cost";

pub fn run_verify(level: VerifyLevel, seed: u64) -> Result<VerifyReport> {
    let sizes = level.sizes();
    let mut suites = equivalence_suites(sizes.equivalence, 25, seed)?;
    suites.push(lemma_suite(sizes.lemma_triples, seed)?);
    suites.push(op_bound_suite(sizes.op_bound_max_n, seed)?);
    suites.extend(closed_form_suites(sizes.closed_form, seed)?);
    Ok(VerifyReport { level, suites })
}

/// Random project of `n` states with one of several switching-cost shapes,
/// chosen by `k`. Every shape keeps `c + d ≥ 0`; some have negative `d`.
pub fn mixed_instance<R: Rng>(rng: &mut R, n: usize, k: usize) -> ProjectSpec {
    let beta = rng.random_range(0.2..0.95);
    let p = random_stochastic_matrix(rng, n);
    let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut uniform = |scale: f64| -> Vec<f64> { (0..n).map(|_| scale * rng.random::<f64>()).collect() };
    let (c, d) = match k % 6 {
        0 => (vec![0.0; n], vec![0.0; n]),
        1 => {
            let c = uniform(1.0)[0];
            (vec![c; n], vec![0.0; n])
        }
        2 => (uniform(1.0), vec![0.0; n]),
        3 => {
            let d = uniform(1.0)[0];
            (vec![0.0; n], vec![d; n])
        }
        4 => (uniform(3.0), uniform(1.0)),
        _ => {
            let c = uniform(1.0);
            let d = c.iter().zip(uniform(1.0)).map(|(c, u)| -u * c).collect();
            (c, d)
        }
    };
    ProjectSpec::new(p, r, c, d, beta)
}

/// Two-stage against the augmented scheme, the enumeration oracle for small
/// `n`, the reference first stage, and the ordering properties.
pub fn equivalence_suites(count: usize, max_n: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut at = SuiteResult::new(SUITE_AT);
    let mut oracle = SuiteResult::new(SUITE_ORACLE);
    let mut modes = SuiteResult::new(SUITE_MODES);
    let mut mono = SuiteResult::new(SUITE_MONOTONE);
    for k in 0..count {
        let mut rng = instance_rng(seed, k as u64);
        let n = rng.random_range(2..=max_n);
        let spec = mixed_instance(&mut rng, n, k);
        let two = compute_index_table(&spec)?;
        let aug = at_index_table(&spec)?;
        for i in 0..n {
            at.compare(two.nu_cont[i], aug.nu_cont[i], VERIFY_TOLERANCE, || format!("instance {k} cont {i}"));
            at.compare(two.nu_switch[i], aug.nu_switch[i], VERIFY_TOLERANCE, || format!("instance {k} switch {i}"));
            mono.at_most(two.nu_switch[i], two.nu_cont[i], VERIFY_TOLERANCE, || format!("instance {k} state {i}"));
        }
        for w in two.merged.windows(2) {
            mono.at_most(w[1].1, w[0].1, VERIFY_TOLERANCE, || format!("instance {k} at {}", w[1].0));
        }

        let reference = compute_stage1(&spec, Stage1Mode::Reference)?;
        let fast = compute_stage1(&spec, Stage1Mode::Fast)?;
        for (a, b) in reference.index_by_state().iter().zip(fast.index_by_state()) {
            modes.compare(*a, b, VERIFY_TOLERANCE, || format!("instance {k}"));
        }

        if n <= ORACLE_MAX_STATES {
            let brute = brute_force_table(&spec.normalize()?)?;
            for i in 0..n {
                oracle.compare(two.nu_cont[i], brute.nu_cont[i], VERIFY_TOLERANCE, || format!("instance {k} cont {i}"));
                oracle.compare(two.nu_switch[i], brute.nu_switch[i], VERIFY_TOLERANCE, || {
                    format!("instance {k} switch {i}")
                });
            }
        }
    }
    Ok(vec![at, oracle, modes, mono])
}

/// All measure identities on random nested pairs `S0 ⊆ S1`, `n ≤ 6`.
pub fn lemma_suite(count: usize, seed: u64) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new(SUITE_LEMMAS);
    for k in 0..count {
        let mut rng = instance_rng(seed ^ 0x4c45_4d4d, k as u64);
        let n = rng.random_range(1..=6);
        let spec = mixed_instance(&mut rng, n, k).normalize()?;
        let mut states: Vec<usize> = (0..n).collect();
        states.shuffle(&mut rng);
        let s1_len = rng.random_range(0..=n);
        let s0_len = rng.random_range(0..=s1_len);
        let mut s1 = states[..s1_len].to_vec();
        let mut s0 = states[..s0_len].to_vec();
        s1.sort_unstable();
        s0.sort_unstable();
        let report = verify_measure_lemmas(&spec, &s0, &s1)?;
        for clause in &report.clauses {
            suite.checked += clause.checked;
            suite.max_error = suite.max_error.max(clause.max_error);
            if !clause.passed {
                suite.fail(format!(
                    "triple {k} (S0 {s0:?}, S1 {s1:?}) clause {}: error {}",
                    clause.clause, clause.max_error
                ));
            }
        }
    }
    Ok(suite)
}

/// Switching-stage operation count against `n² + 4n + 8` for `n = 1..=max_n`.
pub fn op_bound_suite(max_n: usize, seed: u64) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new(SUITE_OPS);
    for n in 1..=max_n {
        let mut rng = instance_rng(seed ^ 0x4f50_5321, n as u64);
        let spec = mixed_instance(&mut rng, n, n);
        let t = compute_index_table(&spec)?;
        let bound = stage2_op_bound(n);
        suite.checked += 1;
        if t.op_count_stage2 > bound {
            suite.fail(format!("n = {n}: {} operations, bound {bound}", t.op_count_stage2));
        }
    }
    Ok(suite)
}

/// Random project without switching costs.
fn plain_instance(seed: u64, k: usize) -> ProjectSpec {
    let mut rng = instance_rng(seed ^ 0x434c_4f53, k as u64);
    let n = rng.random_range(2..=15);
    let beta = rng.random_range(0.2..0.95);
    let p = random_stochastic_matrix(&mut rng, n);
    let r = (0..n).map(|_| rng.random::<f64>()).collect();
    ProjectSpec::without_costs(p, r, beta)
}

/// Cost dependence in closed form: a constant shutdown cost shifts the
/// continuation index by `(1−β)d`; a prohibitive startup cost makes the
/// switching index `(1−β)f^N_i − (1−β)c`; the switching index is convex and
/// nonincreasing in a constant `c`.
pub fn closed_form_suites(count: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut shift = SuiteResult::new(SUITE_SHUTDOWN);
    let mut large = SuiteResult::new(SUITE_LARGE_COST);
    let mut convex = SuiteResult::new(SUITE_CONVEX);
    for k in 0..count {
        let base = plain_instance(seed, k);
        let n = base.n();
        let beta = base.beta;
        let gittins = gittins_index(&base)?;

        for d in [0.0, 0.5, 1.0] {
            let t = compute_index_table(&base.with_costs(vec![0.0; n], vec![d; n]))?;
            for (i, g) in gittins.iter().enumerate() {
                shift.compare(t.nu_cont[i], g + (1.0 - beta) * d, VERIFY_TOLERANCE, || {
                    format!("instance {k} d = {d} state {i}")
                });
            }
        }

        // f^N solves (I − βP) f = R; g^N ≡ 1/(1−β).
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= beta * base.transition[(i, j)];
            }
        }
        let f = Lu::factor(&a)?.solve(&base.reward);
        let r_max = base.reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        for factor in [2.0, 3.0] {
            let c = factor * r_max / (1.0 - beta);
            let t = compute_index_table(&base.with_costs(vec![c; n], vec![0.0; n]))?;
            for (i, fi) in f.iter().enumerate() {
                let expect = (1.0 - beta) * fi - (1.0 - beta) * c;
                large.compare(t.nu_switch[i], expect, VERIFY_TOLERANCE, || format!("instance {k} c = {c} state {i}"));
            }
        }

        let costs: Vec<f64> = (0..=40).map(|j| j as f64 * 0.05).collect();
        let curves: Vec<Vec<f64>> = costs
            .iter()
            .map(|&c| compute_index_table(&base.with_costs(vec![c; n], vec![0.0; n])).map(|t| t.nu_switch))
            .collect::<Result<_>>()?;
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            for j in 1..costs.len() {
                convex.at_most(curves[j][i], curves[j - 1][i], VERIFY_TOLERANCE, || {
                    format!("instance {k} state {i} increases at c = {}", costs[j])
                });
            }
            for j in 1..costs.len() - 1 {
                let chord = 0.5 * (curves[j - 1][i] + curves[j + 1][i]);
                convex.at_most(curves[j][i], chord, VERIFY_TOLERANCE, || {
                    format!("instance {k} state {i} not convex at c = {}", costs[j])
                });
            }
        }
    }
    Ok(vec![shift, large, convex])
}
