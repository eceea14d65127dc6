use switchdex::joint::{JointMdp, TieRule};
use switchdex::{compute_index_table, gap_metrics, generate_instance, gittins_index, CostModel, InstanceEnsembleConfig};

fn instance(projects: usize, n: usize, c: f64, beta: f64, k: usize) -> Vec<switchdex::ProjectSpec> {
    let mut cfg = InstanceEnsembleConfig::new(projects, n, 13, 10, beta);
    cfg.startup = CostModel::Constant(c);
    generate_instance(&cfg, k).unwrap()
}

#[test]
fn optimum_dominates_both_index_policies() {
    for k in 0..3 {
        let specs = instance(2, 10, 0.3, 0.9, k);
        let mdp = JointMdp::new(&specs).unwrap();
        let opt = mdp.solve_optimal().unwrap();
        let tables: Vec<_> = specs.iter().map(|s| compute_index_table(s).unwrap()).collect();
        let gittins: Vec<_> = specs.iter().map(|s| gittins_index(&s.underlying()).unwrap()).collect();
        let mpi = mdp.evaluate_priority_policy(|m, a| tables[m].index(a), TieRule::IncumbentFirst).unwrap();
        let bench = mdp
            .evaluate_priority_policy(|m, a| gittins[m][a.state], TieRule::IncumbentFirst)
            .unwrap();
        assert!(opt.value.scalar >= mpi.scalar - 1e-9);
        assert!(opt.value.scalar >= bench.scalar - 1e-9);
        for (o, v) in opt.value.values.iter().zip(&mpi.values) {
            assert!(*o >= v - 1e-9);
        }
        let gap = gap_metrics(opt.value.scalar, mpi.scalar, bench.scalar).unwrap();
        assert!(gap.delta.is_finite() && gap.delta >= 0.0);
    }
}

#[test]
fn no_switching_costs_means_no_gap() {
    for k in 0..3 {
        let specs = instance(2, 10, 0.0, 0.9, k);
        let mdp = JointMdp::new(&specs).unwrap();
        let opt = mdp.solve_optimal().unwrap();
        let tables: Vec<_> = specs.iter().map(|s| compute_index_table(s).unwrap()).collect();
        let mpi = mdp.evaluate_priority_policy(|m, a| tables[m].index(a), TieRule::IncumbentFirst).unwrap();
        let gap = gap_metrics(opt.value.scalar, mpi.scalar, mpi.scalar).unwrap();
        assert!(gap.delta <= 1e-7, "{}", gap.delta);
    }
}

#[test]
fn optimal_value_nonincreasing_in_startup_cost() {
    for k in 0..3 {
        let mut last = f64::INFINITY;
        for j in 0..=10 {
            let specs = instance(2, 6, j as f64 * 0.1, 0.8, k);
            let v = JointMdp::new(&specs).unwrap().solve_optimal().unwrap().value.scalar;
            assert!(v <= last + 1e-9, "instance {k} c = {}", j as f64 * 0.1);
            last = v;
        }
    }
}

/// The index policy keeps the incumbent exactly when its continuation index
/// is at least every rival's switching index.
#[test]
fn index_policy_follows_index_table() {
    for k in 0..3 {
        let specs = instance(3, 4, 0.4, 0.85, k);
        let mdp = JointMdp::new(&specs).unwrap();
        let tables: Vec<_> = specs.iter().map(|s| compute_index_table(s).unwrap()).collect();
        let policy = mdp.priority_policy(|m, a| tables[m].index(a), TieRule::IncumbentFirst);
        for (idx, &chosen) in policy.iter().enumerate() {
            let s = mdp.decode(idx);
            if s.incumbent == 0 {
                continue;
            }
            let inc = s.incumbent - 1;
            let keep = tables[inc].nu_cont[s.states[inc]];
            let rival = (0..specs.len())
                .filter(|&m| m != inc)
                .map(|m| tables[m].nu_switch[s.states[m]])
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(chosen == inc, keep >= rival, "joint state {s:?}");
        }
    }
}

#[test]
fn three_projects_use_iterative_evaluation() {
    let specs = instance(3, 8, 0.5, 0.9, 0);
    let mdp = JointMdp::new(&specs).unwrap();
    assert!(mdp.num_states() > switchdex::joint::DENSE_EVALUATION_LIMIT);
    let opt = mdp.solve_optimal().unwrap();
    let tables: Vec<_> = specs.iter().map(|s| compute_index_table(s).unwrap()).collect();
    let mpi = mdp.evaluate_priority_policy(|m, a| tables[m].index(a), TieRule::IncumbentFirst).unwrap();
    assert!(opt.value.scalar >= mpi.scalar - 1e-9);
    let bound = specs.iter().flat_map(|s| s.reward.iter()).fold(0.0_f64, |m, r| m.max(r.abs() + 0.5)) / 0.1;
    assert!(opt.value.values.iter().all(|v| v.abs() <= bound));
}
