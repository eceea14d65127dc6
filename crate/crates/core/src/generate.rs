//! Seeded random project instances.
//!
//! Every instance draws from its own ChaCha stream selected by the instance
//! number, so instance `k` is the same no matter which other instances are
//! generated or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{ensure_valid, ProjectSpec};

/// How a switching-cost vector is drawn for each project.
#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    /// Same value in every state of every project.
    Constant(f64),
    /// Independent Uniform[0, 1) per state.
    Uniform01,
    /// One constant per project.
    PerProjectConstant(Vec<f64>),
}

impl CostModel {
    pub const ZERO: CostModel = CostModel::Constant(0.0);
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEnsembleConfig {
    pub projects: usize,
    pub states: usize,
    pub seed: u64,
    pub startup: CostModel,
    pub shutdown: CostModel,
    pub count: usize,
    pub beta: f64,
}

impl InstanceEnsembleConfig {
    pub fn new(projects: usize, states: usize, seed: u64, count: usize, beta: f64) -> Self {
        Self {
            projects,
            states,
            seed,
            startup: CostModel::ZERO,
            shutdown: CostModel::ZERO,
            count,
            beta,
        }
    }

    fn check(&self) -> Result<()> {
        if self.count == 0 || self.projects == 0 || self.states == 0 {
            return Err(Error::InvalidArgument(
                "projects, states and count must all be at least 1".into(),
            ));
        }
        for model in [&self.startup, &self.shutdown] {
            if let CostModel::PerProjectConstant(v) = model {
                if v.len() != self.projects {
                    return Err(Error::InvalidArgument(format!(
                        "{} per-project costs for {} projects",
                        v.len(),
                        self.projects
                    )));
                }
            }
        }
        Ok(())
    }
}

/// RNG for instance `k` of the ensemble seeded with `seed`.
pub fn instance_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Row-normalized Uniform[0, 1) matrix.
pub fn random_stochastic_matrix<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let row = m.row_mut(i);
        for x in row.iter_mut() {
            *x = rng.random::<f64>();
        }
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|x| *x /= sum);
        } else {
            row.iter_mut().for_each(|x| *x = 1.0 / n as f64);
        }
    }
    m
}

fn draw_costs<R: Rng>(rng: &mut R, model: &CostModel, projects: usize, n: usize) -> Vec<Vec<f64>> {
    (0..projects)
        .map(|m| match model {
            CostModel::Constant(c) => vec![*c; n],
            CostModel::PerProjectConstant(v) => vec![v[m]; n],
            CostModel::Uniform01 => (0..n).map(|_| rng.random::<f64>()).collect(),
        })
        .collect()
}

/// Generate instance `k` of the ensemble.
///
/// Draw order is fixed: all transition matrices and rewards first, then
/// startup costs, then shutdown costs. The dynamics of an instance therefore
/// do not depend on the cost models.
pub fn generate_instance(cfg: &InstanceEnsembleConfig, k: usize) -> Result<Vec<ProjectSpec>> {
    cfg.check()?;
    if k >= cfg.count {
        return Err(Error::InvalidArgument(format!(
            "instance {k} out of range for an ensemble of {}",
            cfg.count
        )));
    }
    let n = cfg.states;
    let mut rng = instance_rng(cfg.seed, k as u64);
    let base: Vec<(Matrix, Vec<f64>)> = (0..cfg.projects)
        .map(|_| {
            let p = random_stochastic_matrix(&mut rng, n);
            let r = (0..n).map(|_| rng.random::<f64>()).collect();
            (p, r)
        })
        .collect();
    let startup = draw_costs(&mut rng, &cfg.startup, cfg.projects, n);
    let shutdown = draw_costs(&mut rng, &cfg.shutdown, cfg.projects, n);
    let specs: Vec<ProjectSpec> = base
        .into_iter()
        .zip(startup.into_iter().zip(shutdown))
        .map(|((p, r), (c, d))| ProjectSpec::new(p, r, c, d, cfg.beta))
        .collect();
    for s in &specs {
        ensure_valid(s)?;
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> InstanceEnsembleConfig {
        InstanceEnsembleConfig::new(2, 6, 42, 5, 0.9)
    }

    #[test]
    fn deterministic_per_instance() {
        let c = cfg();
        assert_eq!(generate_instance(&c, 3).unwrap(), generate_instance(&c, 3).unwrap());
        assert_ne!(generate_instance(&c, 3).unwrap(), generate_instance(&c, 2).unwrap());
    }

    #[test]
    fn dynamics_do_not_depend_on_cost_model() {
        let a = cfg();
        let mut b = cfg();
        b.startup = CostModel::Uniform01;
        b.shutdown = CostModel::Constant(0.2);
        let ia = generate_instance(&a, 1).unwrap();
        let ib = generate_instance(&b, 1).unwrap();
        for (x, y) in ia.iter().zip(&ib) {
            assert_eq!(x.transition, y.transition);
            assert_eq!(x.reward, y.reward);
        }
    }

    #[test]
    fn constant_startup_cost() {
        let mut c = cfg();
        c.startup = CostModel::Constant(0.3);
        for s in generate_instance(&c, 0).unwrap() {
            assert!(s.startup_cost.iter().all(|&x| x == 0.3));
        }
    }

    #[test]
    fn uniform_startup_cost_in_unit_interval() {
        let mut c = cfg();
        c.startup = CostModel::Uniform01;
        for s in generate_instance(&c, 4).unwrap() {
            assert!(s.startup_cost.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn per_project_constants() {
        let mut c = cfg();
        c.startup = CostModel::PerProjectConstant(vec![0.1, 0.7]);
        let specs = generate_instance(&c, 0).unwrap();
        assert!(specs[0].startup_cost.iter().all(|&x| x == 0.1));
        assert!(specs[1].startup_cost.iter().all(|&x| x == 0.7));
        c.startup = CostModel::PerProjectConstant(vec![0.1]);
        assert!(generate_instance(&c, 0).is_err());
    }

    #[test]
    fn rows_sum_to_one() {
        let mut c = cfg();
        c.states = 40;
        for s in generate_instance(&c, 2).unwrap() {
            for i in 0..40 {
                let sum: f64 = s.transition.row(i).iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn out_of_range_instance() {
        assert!(generate_instance(&cfg(), 5).is_err());
    }
}
