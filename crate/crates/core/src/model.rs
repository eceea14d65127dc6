//! Project data, validation and the shutdown-cost normalization.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Row sums of the transition matrix must be within this of one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A single finite-state bandit project with switching costs.
///
/// Passive rewards are zero and the state is frozen while the project rests.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectSpec {
    pub transition: Matrix,
    pub reward: Vec<f64>,
    pub startup_cost: Vec<f64>,
    pub shutdown_cost: Vec<f64>,
    pub beta: f64,
}

/// A project whose shutdown costs have been folded into the startup costs and
/// active rewards. Startup costs are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProjectSpec {
    transition: Matrix,
    reward: Vec<f64>,
    startup_cost: Vec<f64>,
    beta: f64,
}

/// Borrowed view of the data the index algorithms need: active dynamics,
/// active rewards and the discount factor.
#[derive(Debug, Clone, Copy)]
pub struct RewardProject<'a> {
    pub transition: &'a Matrix,
    pub reward: &'a [f64],
    pub beta: f64,
}

impl RewardProject<'_> {
    pub fn n(&self) -> usize {
        self.reward.len()
    }
}

/// Project state together with the action taken in the previous period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AugmentedState {
    pub prev_active: bool,
    pub state: usize,
}

impl AugmentedState {
    pub fn new(prev_active: bool, state: usize) -> Self {
        Self { prev_active, state }
    }

    /// Flat position in `{0,1} x N`: passive states first.
    pub fn flat_id(&self, n: usize) -> usize {
        usize::from(self.prev_active) * n + self.state
    }

    pub fn from_flat_id(id: usize, n: usize) -> Self {
        Self {
            prev_active: id >= n,
            state: id % n,
        }
    }
}

impl fmt::Display for AugmentedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", u8::from(self.prev_active), self.state + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    States,
    Transition,
    Reward,
    StartupCost,
    ShutdownCost,
    SwitchingCostSum,
    Beta,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::States => "n",
            Field::Transition => "P",
            Field::Reward => "R",
            Field::StartupCost => "c",
            Field::ShutdownCost => "d",
            Field::SwitchingCostSum => "c+d",
            Field::Beta => "beta",
        })
    }
}

/// One failed invariant of a [`ProjectSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: Field,
    /// Row or entry position (0-based) when the invariant is per-element.
    pub index: Option<usize>,
    pub value: f64,
    pub message: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}] = {}: {}", self.field, i + 1, self.value, self.message),
            None => write!(f, "{} = {}: {}", self.field, self.value, self.message),
        }
    }
}

impl ProjectSpec {
    pub fn new(
        transition: Matrix,
        reward: Vec<f64>,
        startup_cost: Vec<f64>,
        shutdown_cost: Vec<f64>,
        beta: f64,
    ) -> Self {
        Self {
            transition,
            reward,
            startup_cost,
            shutdown_cost,
            beta,
        }
    }

    /// Project without switching costs.
    pub fn without_costs(transition: Matrix, reward: Vec<f64>, beta: f64) -> Self {
        let n = reward.len();
        Self::new(transition, reward, vec![0.0; n], vec![0.0; n], beta)
    }

    pub fn n(&self) -> usize {
        self.reward.len()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    pub fn normalize(&self) -> Result<NormalizedProjectSpec> {
        normalize(self)
    }

    /// Same dynamics and rewards with every switching cost removed.
    pub fn underlying(&self) -> ProjectSpec {
        Self::without_costs(self.transition.clone(), self.reward.clone(), self.beta)
    }

    pub fn with_costs(&self, startup_cost: Vec<f64>, shutdown_cost: Vec<f64>) -> ProjectSpec {
        Self::new(
            self.transition.clone(),
            self.reward.clone(),
            startup_cost,
            shutdown_cost,
            self.beta,
        )
    }

    pub fn with_beta(&self, beta: f64) -> ProjectSpec {
        let mut s = self.clone();
        s.beta = beta;
        s
    }
}

impl NormalizedProjectSpec {
    pub fn n(&self) -> usize {
        self.reward.len()
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn startup_cost(&self) -> &[f64] {
        &self.startup_cost
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn as_reward_project(&self) -> RewardProject<'_> {
        RewardProject {
            transition: &self.transition,
            reward: &self.reward,
            beta: self.beta,
        }
    }

    /// Build directly from normalized data, checking the invariants.
    pub fn new(transition: Matrix, reward: Vec<f64>, startup_cost: Vec<f64>, beta: f64) -> Result<Self> {
        let n = reward.len();
        let spec = ProjectSpec::new(transition, reward, startup_cost, vec![0.0; n], beta);
        let mut violations = validate(&spec);
        for (i, &c) in spec.startup_cost.iter().enumerate() {
            if c < 0.0 {
                violations.push(Violation {
                    field: Field::StartupCost,
                    index: Some(i),
                    value: c,
                    message: "normalized startup costs must be nonnegative",
                });
            }
        }
        if !violations.is_empty() {
            return Err(Error::InvalidSpec(violations));
        }
        Ok(Self {
            transition: spec.transition,
            reward: spec.reward,
            startup_cost: spec.startup_cost,
            beta: spec.beta,
        })
    }
}

impl From<NormalizedProjectSpec> for ProjectSpec {
    fn from(s: NormalizedProjectSpec) -> Self {
        let n = s.n();
        ProjectSpec::new(s.transition, s.reward, s.startup_cost, vec![0.0; n], s.beta)
    }
}

/// Check every [`ProjectSpec`] invariant. An empty list means the spec is valid.
pub fn validate(spec: &ProjectSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = spec.n();
    if n == 0 {
        out.push(Violation {
            field: Field::States,
            index: None,
            value: 0.0,
            message: "at least one state is required",
        });
    }
    if !(spec.beta > 0.0 && spec.beta < 1.0) {
        out.push(Violation {
            field: Field::Beta,
            index: None,
            value: spec.beta,
            message: "discount factor must lie in (0, 1)",
        });
    }
    let p = &spec.transition;
    if p.rows() != n || p.cols() != n {
        out.push(Violation {
            field: Field::Transition,
            index: None,
            value: p.rows() as f64,
            message: "transition matrix must be n x n",
        });
    } else {
        for i in 0..n {
            let row = p.row(i);
            if let Some(&bad) = row.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                out.push(Violation {
                    field: Field::Transition,
                    index: Some(i),
                    value: bad,
                    message: "transition probabilities must be finite and nonnegative",
                });
            }
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
                out.push(Violation {
                    field: Field::Transition,
                    index: Some(i),
                    value: sum,
                    message: "row must sum to 1",
                });
            }
        }
    }
    for (field, v) in [
        (Field::Reward, &spec.reward),
        (Field::StartupCost, &spec.startup_cost),
        (Field::ShutdownCost, &spec.shutdown_cost),
    ] {
        if v.len() != n {
            out.push(Violation {
                field,
                index: None,
                value: v.len() as f64,
                message: "vector length must equal n",
            });
            continue;
        }
        for (i, &x) in v.iter().enumerate() {
            if !x.is_finite() {
                out.push(Violation {
                    field,
                    index: Some(i),
                    value: x,
                    message: "value must be finite",
                });
            }
        }
    }
    if spec.startup_cost.len() == n && spec.shutdown_cost.len() == n {
        for i in 0..n {
            let s = spec.startup_cost[i] + spec.shutdown_cost[i];
            if s < 0.0 {
                out.push(Violation {
                    field: Field::SwitchingCostSum,
                    index: Some(i),
                    value: s,
                    message: "startup plus shutdown cost must be nonnegative",
                });
            }
        }
    }
    out
}

pub fn ensure_valid(spec: &ProjectSpec) -> Result<()> {
    let v = validate(spec);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(v))
    }
}

/// Fold shutdown costs into startup costs and rewards:
/// `c' = c + d`, `R' = R + (I − βP) d`, `d' = 0`.
pub fn normalize(spec: &ProjectSpec) -> Result<NormalizedProjectSpec> {
    ensure_valid(spec)?;
    let n = spec.n();
    let beta = spec.beta;
    let d = &spec.shutdown_cost;
    let (reward, startup_cost) = if d.iter().all(|&x| x == 0.0) {
        (spec.reward.clone(), spec.startup_cost.clone())
    } else {
        let pd = spec.transition.mul_vec(d);
        let reward = (0..n)
            .map(|i| spec.reward[i] + (d[i] - beta * pd[i]))
            .collect();
        let startup = (0..n).map(|i| spec.startup_cost[i] + d[i]).collect();
        (reward, startup)
    };
    Ok(NormalizedProjectSpec {
        transition: spec.transition.clone(),
        reward,
        startup_cost,
        beta,
    })
}

/// The three-state project used as a running example: `β = 0.95`, no
/// switching costs.
pub fn three_state_example() -> ProjectSpec {
    let p = Matrix::from_rows(&[
        vec![0.8061, 0.1574, 0.0365],
        vec![0.1957, 0.0067, 0.7976],
        vec![0.1378, 0.5959, 0.2663],
    ])
    .expect("square");
    ProjectSpec::without_costs(p, vec![0.7221, 0.9685, 0.1557], 0.95)
}
