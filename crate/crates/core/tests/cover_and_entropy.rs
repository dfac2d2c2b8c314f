use entrosc_core::covering::{
    build_pl_cover, march, w1inf_distance, CoverAtomSet, FieldJet, FunctionClassBounds, MemberJets,
};
use entrosc_core::dynamics::{generate_ensemble, Ensemble, ModelParams};
use entrosc_core::entropy::{entropy_scan, separated_count, topological_entropy_estimate};
use entrosc_core::field::{Field, FieldPair, Grid, Interval};

#[test]
fn sampled_field_is_marched_into_the_cover() {
    let grid = Grid::new(-48.0, 48.0, 8192).unwrap();
    let bounds = FunctionClassBounds::new(0.1, 0.2, 0.2, 1.0).unwrap();
    let window = bounds.window();
    let r = window.hi;
    let f = Field::from_fn(grid, |x| {
        if x.abs() >= r {
            0.0
        } else {
            0.15 * (std::f64::consts::PI * x / r).sin() * (1.0 - (x / r).powi(2))
        }
    })
    .unwrap();
    let jet = FieldJet::new(&f).unwrap();
    let report = march(|x| jet.eval(x), &bounds).unwrap();
    assert!(report.atom.endpoint_zero());
    assert!(build_pl_cover(&bounds).unwrap().contains(&report.atom));
    let atom = report.atom.to_field(&grid).unwrap();
    assert!(w1inf_distance(&f, &atom, window).unwrap() <= bounds.eps);
}

fn small_ensemble() -> Ensemble {
    let grid = Grid::new(-40.0, 40.0, 512).unwrap();
    let p = ModelParams::for_grid(0.1, &grid).unwrap();
    generate_ensemble(6, &grid, &p, 5.0, 2).unwrap()
}

#[test]
fn counts_agree_between_scan_and_member_jets() {
    let ens = small_ensemble();
    let lengths = [5.0, 10.0, 20.0];
    let scan = entropy_scan(&ens, &[0.2, 0.1], &lengths).unwrap();
    let us: Vec<Field> = ens.members.iter().map(|m| m.u.clone()).collect();
    let jets = MemberJets::new(&us).unwrap();
    for est in &scan {
        for (l, count) in lengths.iter().zip(&est.counts) {
            assert!(*count >= 1 && *count <= ens.members.len());
            let greedy = jets.greedy_cover(Interval::centered(*l), est.eps).count();
            assert!(*count <= greedy);
        }
        assert!(est.counts.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn members_as_atoms_separate_every_distinct_trajectory() {
    let ens = small_ensemble();
    let window = Interval::centered(10.0);
    let atoms: Vec<Field> = ens.members.iter().map(|m| m.u.clone()).collect();
    let cover = CoverAtomSet::explicit(atoms.clone(), 0.1, window);
    let bundle: Vec<Vec<Field>> = atoms.iter().map(|a| vec![a.clone(), a.clone()]).collect();
    let report = separated_count(&bundle, &cover, 1.0, window).unwrap();
    let jets = MemberJets::new(&atoms).unwrap();
    let distinct = jets.greedy_cover(window, 1e-12).count();
    assert_eq!(report.n_separated, distinct);
    assert_eq!(report.horizon, 1.0);
}

#[test]
fn constant_states_have_zero_topological_entropy() {
    let grid = Grid::new(-40.0, 40.0, 256).unwrap();
    let p = ModelParams::for_grid(0.1, &grid).unwrap();
    let constant = |c: f64| FieldPair::new(Field::from_fn(grid, |_| c).unwrap(), Field::zeros(grid)).unwrap();
    let ens = Ensemble {
        members: vec![constant(1.0), constant(-1.0), constant(1.0), constant(0.0)],
        burn_in_time: 0.0,
        seed: 0,
        params: p,
    };
    let report = topological_entropy_estimate(&ens, &p, &[0.2, 0.1], 2.0, 1.0, &[5.0, 10.0]).unwrap();
    for e in &report.per_eps {
        assert_eq!(e.h_est, 0.0);
        assert!(e.windows.iter().all(|w| w.count == 3));
    }
    assert!(report.time_submultiplicative());
}
