use bures_core::ansatz::AnsatzConfig;
use bures_core::objective::PurificationObjective;
use bures_core::oracle::{fidelity_exact, werner_bures_reference};
use bures_core::purify::{Family, PurificationPlan, ResourceSpec};
use bures_core::random::{random_angles, random_density_matrix};
use bures_core::reconstruct::reconstruct_free_state;
use bures_core::states::werner;
use bures_core::train::{train_resource, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn werner_spec() -> (ResourceSpec, AnsatzConfig) {
    (
        ResourceSpec { family: Family::Separable, partition: vec![1, 1], control_qubits: 2 },
        AnsatzConfig { l1: 1, l2: 16, use_arbitrary_u: false },
    )
}

fn cfg(epochs: usize, restarts: usize, seed: u64) -> TrainConfig {
    TrainConfig { epochs, restarts, seed, ..TrainConfig::default() }
}

#[test]
fn separable_werner_reaches_zero() {
    let (spec, ansatz) = werner_spec();
    let report = train_resource(&werner(0.2).unwrap(), &spec, &ansatz, &cfg(1000, 10, 1)).unwrap();
    assert!(report.best_cost <= 0.01, "{}", report.best_cost);
    let s = report.restart_stats;
    assert!(s.min <= s.mean && s.mean <= s.max);
    assert_eq!(s.min, report.best_cost);
    assert_eq!(report.n_failed, 0);
}

#[test]
fn bell_state_matches_reference() {
    let (spec, ansatz) = werner_spec();
    let report = train_resource(&werner(1.0).unwrap(), &spec, &ansatz, &cfg(1000, 4, 2)).unwrap();
    assert!((report.best_cost - werner_bures_reference(1.0).unwrap()).abs() < 0.02);
}

#[test]
fn traces_stay_above_the_true_value() {
    let (spec, ansatz) = werner_spec();
    for p in [0.5, 0.8, 1.0] {
        let truth = werner_bures_reference(p).unwrap();
        let report = train_resource(&werner(p).unwrap(), &spec, &ansatz, &cfg(400, 3, 3)).unwrap();
        for r in &report.restarts {
            assert_eq!(r.cost_trace.len(), 400);
            assert!(r.cost_trace.iter().all(|&c| c >= truth - 1e-6), "p = {p}");
        }
    }
}

#[test]
fn moving_average_descends_on_werner() {
    let (spec, ansatz) = werner_spec();
    for p in [0.0, 0.6, 1.0] {
        let report = train_resource(&werner(p).unwrap(), &spec, &ansatz, &cfg(1000, 3, 4)).unwrap();
        for r in &report.restarts {
            let avg: Vec<f64> = r.cost_trace.windows(100).map(|w| w.iter().sum::<f64>() / 100.0).collect();
            for pair in avg.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "p = {p}, restart {}", r.restart);
            }
        }
    }
}

#[test]
fn reconstructed_werner_state_is_close() {
    let (spec, ansatz) = werner_spec();
    let rho = werner(0.2).unwrap();
    let report = train_resource(&rho, &spec, &ansatz, &cfg(1000, 4, 5)).unwrap();
    let plan = PurificationPlan::build(&spec, &ansatz).unwrap();
    let (ensemble, sigma) = reconstruct_free_state(&plan, &report.best_params).unwrap();
    assert!(fidelity_exact(&rho, &sigma).unwrap() >= 0.99);
    assert!(ensemble.len() <= 4);
}

#[test]
fn reconstruction_respects_the_uhlmann_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (partition, nc) in [(vec![1, 1], 2), (vec![1, 1, 1], 3)] {
        let spec = ResourceSpec { family: Family::Separable, partition, control_qubits: nc };
        for arbitrary in [false, true] {
            let plan = PurificationPlan::build(&spec, &AnsatzConfig { l1: 1, l2: 2, use_arbitrary_u: arbitrary }).unwrap();
            let dim = 1 << plan.system_qubits();
            for _ in 0..20 {
                let rho = random_density_matrix(dim, dim, &mut rng);
                let theta = random_angles(plan.num_params(), &mut rng);
                let overlap = PurificationObjective::new(plan.clone(), &rho).unwrap().fidelity(&theta).unwrap();
                let (_, sigma) = reconstruct_free_state(&plan, &theta).unwrap();
                assert!(overlap <= fidelity_exact(&rho, &sigma).unwrap() + 1e-9);
            }
        }
    }
}
