use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use entrosc_core::dynamics::{evolve, evolve_difference, evolve_linear, random_initial_state, ModelParams};
use entrosc_core::field::{DiffScheme, FieldPair, Grid};
use entrosc_core::functionals::{gamma_decay, j_parts, sobolev_norm, NormKind};
use entrosc_core::spectral::random_band_field;

#[test]
fn difference_system_tracks_the_gap_between_two_flows() {
    let grid = Grid::new(-20.0, 20.0, 256).unwrap();
    let p = ModelParams::for_grid(0.1, &grid).unwrap();
    let a = random_initial_state(&grid, 3, 0);
    let b = random_initial_state(&grid, 3, 1);
    let ta = evolve(&a, &p, 1.0, 0.25).unwrap();
    let tb = evolve(&b, &p, 1.0, 0.25).unwrap();
    let td = evolve_difference(&a, &b, &p, 1.0, 0.25).unwrap();
    assert_eq!(ta.times, td.times);
    for ((sa, sb), sd) in ta.states.iter().zip(&tb.states).zip(&td.states) {
        let gap = sa.difference(sb).unwrap();
        let err = gap.u.zip_map(&sd.u, |x, y| x - y).unwrap().max_abs();
        assert!(err < 1e-9 * (1.0 + gap.u.max_abs()), "difference drifted by {err}");
    }
}

#[test]
fn high_band_functional_decays_under_the_linear_flow() {
    let grid = Grid::new(-40.0, 40.0, 512).unwrap();
    let eta = 0.1;
    let k_star = 10.0;
    let delta = 1.0 / 80.0;
    let p = ModelParams::for_grid(eta, &grid).unwrap().with_scheme(DiffScheme::Spectral);
    let gamma = gamma_decay(eta, k_star, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_band_field(&grid, k_star, 1.5 * k_star, &mut rng);
    let v = random_band_field(&grid, k_star, 1.5 * k_star, &mut rng);
    let traj = evolve_linear(&FieldPair::new(u, v).unwrap(), &p, 2.0, 0.1).unwrap();
    let j = |s: &FieldPair| {
        let (norm_sq, cross) = j_parts(s, delta, eta).unwrap();
        norm_sq + eta * eta * gamma * cross
    };
    let j0 = j(&traj.states[0]);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        assert!(j(s) <= 1.05 * (-gamma * t / 80.0).exp() * j0);
    }
    assert!(j(traj.last()) < 1e-6 * j0);
}

#[test]
fn local_norms_stay_bounded_along_the_nonlinear_flow() {
    let grid = Grid::new(-40.0, 40.0, 512).unwrap();
    let p = ModelParams::for_grid(0.1, &grid).unwrap();
    let traj = evolve(&random_initial_state(&grid, 1, 0), &p, 10.0, 1.0).unwrap();
    let norms: Vec<f64> = traj
        .states
        .iter()
        .map(|s| sobolev_norm(NormKind::Loc2, s, 1.0 / 80.0, p.eta).unwrap())
        .collect();
    let start = norms[0];
    assert!(norms.iter().all(|n| n.is_finite() && *n <= 2.0 * start));
}
