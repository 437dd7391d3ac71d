//! Quantum-jump and master-equation propagation against analytic solutions.

use proptest::prelude::*;
use thzstreak::dynamics::{
    ensemble_density_matrix, lindblad_propagate, propagate_mcwf, propagate_schrodinger, TrajectoryEnsemble,
};
use thzstreak::grid::TimeGrid;
use thzstreak::system::{CouplingTerm, DecayChannel, Level, LevelSystem};
use thzstreak::C64;

fn four_level(decay: bool) -> LevelSystem {
    let levels = vec![
        Level::with_population("g", -0.5, 1.0, 0.0),
        Level::with_population("e1", -0.29, 0.0, 0.0),
        Level::with_population("e2", -0.18, 0.0, 0.0),
        Level::with_population("e3", -0.06, 0.0, 0.0),
    ];
    let coupling = vec![
        CouplingTerm { amplitude: 0.02, center: 4100.0, width: Some(60.0), frequency: 0.324, phase: 0.0 },
        CouplingTerm { amplitude: 0.04, center: 4200.0, width: Some(60.0), frequency: 0.112, phase: 0.0 },
    ];
    let decays = if decay { vec![DecayChannel::new(2, 1, 0.007), DecayChannel::new(3, 1, 0.007)] } else { vec![] };
    LevelSystem::new(levels, coupling, decays, 4000.0).unwrap()
}

#[test]
fn two_pulses_excite_the_manifold() {
    let grid = TimeGrid::new(3800.0, 0.1, 6001).unwrap();
    let traj = propagate_schrodinger(&four_level(false), &grid).unwrap();
    let before = traj.at(grid.index_of(4000.0).unwrap());
    assert!((before[0].norm_sqr() - 1.0).abs() < 1e-12);
    let after_first = traj.at(grid.index_of(4170.0).unwrap());
    assert!(after_first[0].norm_sqr() < 0.99, "ground population {}", after_first[0].norm_sqr());
    let end = traj.at(grid.count - 1);
    let excited: f64 = end[1..].iter().map(|a| a.norm_sqr()).sum();
    assert!(excited > 0.01);
    for k in 0..grid.count {
        assert!((traj.norm_sqr(k) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn jump_free_limit_is_bit_identical() {
    let grid = TimeGrid::new(3800.0, 0.1, 4001).unwrap();
    let sys = four_level(false);
    assert_eq!(propagate_mcwf(&sys, &grid, 123).unwrap(), propagate_schrodinger(&sys, &grid).unwrap());
    let zero_rate = LevelSystem::new(
        sys.levels().to_vec(),
        sys.coupling_terms().to_vec(),
        vec![DecayChannel::new(2, 1, 0.0)],
        4000.0,
    )
    .unwrap();
    assert_eq!(propagate_mcwf(&zero_rate, &grid, 5).unwrap().amplitudes, propagate_schrodinger(&sys, &grid).unwrap().amplitudes);
}

#[test]
fn exponential_decay_of_the_upper_level() {
    let gamma = 0.007;
    let sys = LevelSystem::new(
        vec![Level::with_population("e1", -0.29, 0.0, 0.0), Level::with_population("e2", -0.18, 1.0, 0.0)],
        vec![],
        vec![DecayChannel::new(1, 0, gamma)],
        0.0,
    )
    .unwrap();
    let grid = TimeGrid::new(0.0, 0.1, 4001).unwrap();
    let ens = TrajectoryEnsemble::generate(&sys, &grid, 1000, 2024, 100).unwrap();
    let rho = ensemble_density_matrix(&ens).unwrap();
    let bound = 3.0 / 1000f64.sqrt();
    for (t, m) in rho.times.iter().zip(&rho.matrices) {
        let oracle = (-gamma * t).exp();
        assert!((m[(1, 1)].re - oracle).abs() < bound, "t={t}: {} vs {oracle}", m[(1, 1)].re);
    }
    assert!(rho.max_trace_error() < 1e-8);
    assert!(rho.max_hermiticity_error() < 1e-10);
}

#[test]
fn per_step_jump_probability() {
    // Γ|c|²dt with the quoted numbers.
    let p: f64 = 0.007 * 0.5 * 0.1;
    assert!((p - 3.5e-4).abs() < 1e-15);
}

#[test]
fn equal_superposition_is_stationary() {
    let sys = LevelSystem::new(
        vec![Level::with_population("g", -0.5, 0.5, 0.0), Level::with_population("e", -0.125, 0.5, 0.0)],
        vec![],
        vec![],
        0.0,
    )
    .unwrap();
    let grid = TimeGrid::new(-50.0, 0.1, 2001).unwrap();
    let ens = TrajectoryEnsemble::generate(&sys, &grid, 3, 1, 10).unwrap();
    let rho = ensemble_density_matrix(&ens).unwrap();
    for m in &rho.matrices {
        assert!((m[(0, 0)].re - 0.5).abs() < 1e-10 && (m[(1, 1)].re - 0.5).abs() < 1e-10);
    }
}

#[test]
fn lindblad_preserves_physicality_on_four_level_scenario() {
    let grid = TimeGrid::new(3800.0, 0.1, 12001).unwrap();
    let rho = lindblad_propagate(&four_level(true), &grid, 50).unwrap();
    assert!(rho.max_trace_error() < 1e-8);
    assert!(rho.max_hermiticity_error() < 1e-10);
    for m in &rho.matrices {
        // Real embedding [[Re, −Im], [Im, Re]] shares the eigenvalues of the Hermitian ρ.
        let h = nalgebra::DMatrix::from_fn(8, 8, |r, c| {
            let (i, j) = (r % 4, c % 4);
            let z = m[(i, j)];
            match (r < 4, c < 4) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let min = nalgebra::SymmetricEigen::new(h).eigenvalues.min();
        assert!(min > -1e-8, "eigenvalue {min}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_evolution_phase(e in -0.9f64..-0.01, t in 0.0f64..300.0, phi in -3.0f64..3.0) {
        let sys = LevelSystem::new(vec![Level::with_population("a", e, 1.0, phi)], vec![], vec![], 0.0).unwrap();
        let steps = (t / 0.1).floor() as usize;
        let grid = TimeGrid::new(0.0, 0.1, steps + 1).unwrap();
        let traj = propagate_schrodinger(&sys, &grid).unwrap();
        let tk = grid.last();
        let expected = C64::from_polar(1.0, phi - e * tk);
        prop_assert!((traj.amplitude(steps, 0) - expected).norm() < 1e-8);
    }

    #[test]
    fn closed_system_is_unitary(a in 0.001f64..0.05, w in 0.05f64..0.5, seed in 0u64..1000) {
        let sys = LevelSystem::new(
            vec![
                Level::with_population("a", -0.5, 0.5, 0.0),
                Level::with_population("b", -0.3, 0.3, 1.0),
                Level::with_population("c", -0.1, 0.2, 2.0),
            ],
            vec![CouplingTerm { amplitude: a, center: 100.0, width: Some(40.0), frequency: w, phase: 0.0 }],
            vec![],
            0.0,
        ).unwrap();
        let grid = TimeGrid::new(0.0, 0.1, 3001).unwrap();
        let traj = propagate_mcwf(&sys, &grid, seed).unwrap();
        for k in 0..grid.count {
            prop_assert!((traj.norm_sqr(k) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn mcwf_keeps_unit_norm(seed in 0u64..10_000) {
        let grid = TimeGrid::new(3800.0, 0.1, 8001).unwrap();
        let traj = propagate_mcwf(&four_level(true), &grid, seed).unwrap();
        for k in 0..grid.count {
            prop_assert!((traj.norm_sqr(k) - 1.0).abs() < 1e-8);
        }
    }
}
