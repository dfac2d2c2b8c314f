//! The experiment pipelines behind each subcommand.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use entrosc_core::covering::{
    build_pl_cover, march, merge_covers, w1inf_distance_to_atom, CoverAtomSet, FunctionClassBounds, MemberJets,
    TrigSum,
};
use entrosc_core::dynamics::{generate_ensemble, Ensemble};
use entrosc_core::entropy::{ball_growth_check, entropy_scan, topological_entropy_estimate};
use entrosc_core::field::{differentiate, DiffScheme, Interval};
use entrosc_core::functionals::{coercive_f0, functional_j, gamma_decay, sobolev_norm, NormKind};
use entrosc_core::sampling::{cartwright_eval, remainder_profile, SampleSet};
use entrosc_core::spectral::{high_momentum_ratio, random_band_field, weighted_operator_norm, SpectralOperator};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{emit_to_dir, Cell, Report};
use crate::snapshot::{load_snapshot, save_snapshot};

/// File name of the ensemble snapshot written by [`Pipeline::Simulate`].
pub const SNAPSHOT_NAME: &str = "ensemble.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Simulate,
    Functionals,
    SpectralChecks,
    SamplingChecks,
    Cover,
    Entropy,
    TopoEntropy,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Simulate => "simulate",
            Pipeline::Functionals => "functionals",
            Pipeline::SpectralChecks => "spectral-checks",
            Pipeline::SamplingChecks => "sampling-checks",
            Pipeline::Cover => "cover",
            Pipeline::Entropy => "entropy",
            Pipeline::TopoEntropy => "topo-entropy",
        }
    }
}

/// The configured snapshot when one is set, otherwise a freshly generated ensemble.
pub fn obtain_ensemble(cfg: &ExperimentConfig) -> Result<Ensemble, CliError> {
    match &cfg.io.snapshot {
        Some(path) => Ok(load_snapshot(path)?),
        None => generate(cfg),
    }
}

fn generate(cfg: &ExperimentConfig) -> Result<Ensemble, CliError> {
    let a = &cfg.analysis;
    Ok(generate_ensemble(
        a.ensemble_size,
        &cfg.grid()?,
        &cfg.model_params()?,
        a.burn_in,
        a.seed,
    )?)
}

/// Runs `pipeline` and returns the files it wrote.
pub fn run_pipeline(pipeline: Pipeline, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let format = cfg.io.format;
    let mut written = Vec::new();
    let reports = match pipeline {
        Pipeline::Simulate => {
            let ens = generate(cfg)?;
            let path = out_dir.join(SNAPSHOT_NAME);
            save_snapshot(&ens, &path)?;
            written.push(path);
            vec![simulate_report(&ens, cfg)?]
        }
        Pipeline::Functionals => vec![functionals_report(&obtain_ensemble(cfg)?, cfg)?],
        Pipeline::SpectralChecks => vec![spectral_report(cfg)?],
        Pipeline::SamplingChecks => vec![sampling_report(cfg)?],
        Pipeline::Cover => cover_reports(&obtain_ensemble(cfg)?, cfg)?,
        Pipeline::Entropy => entropy_reports(&obtain_ensemble(cfg)?, cfg)?,
        Pipeline::TopoEntropy => vec![topo_report(&obtain_ensemble(cfg)?, cfg)?],
    };
    for r in &reports {
        written.push(emit_to_dir(r, format, out_dir)?);
    }
    Ok(written)
}

fn simulate_report(ens: &Ensemble, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut r = Report::new("simulate", &["member", "max_abs_u", "max_abs_v", "f0", "loc2_norm"]);
    for (i, m) in ens.members.iter().enumerate() {
        r.push(vec![
            i.into(),
            m.u.max_abs().into(),
            m.v.max_abs().into(),
            coercive_f0(m, &ens.params)?.into(),
            sobolev_norm(NormKind::Loc2, m, cfg.analysis.delta, ens.params.eta)?.into(),
        ]);
    }
    Ok(r)
}

fn functionals_report(ens: &Ensemble, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let a = &cfg.analysis;
    let eta = ens.params.eta;
    let gamma = gamma_decay(eta, a.k_star, a.c_nu);
    let mut r = Report::new(
        "functionals",
        &["member", "f0", "loc1_norm", "loc2_norm", "j", "gamma"],
    );
    let rows: Vec<Vec<Cell>> = ens
        .members
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(vec![
                i.into(),
                coercive_f0(m, &ens.params)?.into(),
                sobolev_norm(NormKind::Loc1, m, a.delta, eta)?.into(),
                sobolev_norm(NormKind::Loc2, m, a.delta, eta)?.into(),
                functional_j(m, a.delta, gamma, eta)?.into(),
                gamma.into(),
            ])
        })
        .collect::<Result<_, entrosc_core::Error>>()?;
    rows.into_iter().for_each(|row| r.push(row));
    Ok(r)
}

fn spectral_report(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let seed = cfg.analysis.seed;
    let mut r = Report::new("spectral_checks", &["check", "a", "delta", "value", "stable"]);
    for a in [4.0, 8.0, 16.0] {
        for delta in [cfg.analysis.delta, cfg.analysis.delta / 2.0] {
            for (name, op) in [
                ("lowpass_norm", SpectralOperator::lowpass(a)?),
                ("highpass_norm", SpectralOperator::highpass(a)?),
            ] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let est = weighted_operator_norm(&op, &grid, delta, 30, &mut rng)?;
                r.push(vec![name.into(), a.into(), delta.into(), est.value.into(), est.stable.into()]);
            }
        }
        let nyquist = grid.nyquist();
        if 4.0 * a < nyquist {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            for _ in 0..10 {
                let f = random_band_field(&grid, 2.0 * a, 4.0 * a, &mut rng);
                total += high_momentum_ratio(&f, a, cfg.analysis.delta)?;
            }
            let mean = total / 10.0;
            r.push(vec![
                "poincare_ratio_times_a2".into(),
                a.into(),
                cfg.analysis.delta.into(),
                (mean * a * a).into(),
                true.into(),
            ]);
        }
    }
    Ok(r)
}

fn sampling_report(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let mut r = Report::new("sampling_checks", &["check", "parameter", "value"]);
    let sigma = 8.0;
    for j in [100usize, 200, 400, 800] {
        let s = SampleSet::from_fn(sigma, j, |x| (sigma * x / 2.0).sin())?;
        let err = (0..=200)
            .map(|i| -1.0 + i as f64 * 0.01)
            .map(|x| (cartwright_eval(&s, x)[0] - (sigma * x / 2.0).sin()).abs())
            .fold(0.0, f64::max);
        r.push(vec!["cartwright_sup_error".into(), j.into(), err.into()]);
    }
    let k_star = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed);
    let f = random_band_field(&grid, 0.0, k_star, &mut rng);
    let f = &f * (1.0 / f.max_abs());
    for &l in &cfg.analysis.lengths {
        // nodes reach ±πL/2, so longer windows do not fit on the grid
        if PI * l / 2.0 >= grid.x_max().min(-grid.x_min()) {
            continue;
        }
        let p = remainder_profile(&f, k_star, l, &[0.0, 0.9 * l], 0.5)?;
        r.push(vec!["remainder_centre".into(), l.into(), p[0].into()]);
        r.push(vec!["remainder_edge".into(), l.into(), p[1].into()]);
    }
    Ok(r)
}

fn cover_reports(ens: &Ensemble, cfg: &ExperimentConfig) -> Result<Vec<Report>, CliError> {
    let a = &cfg.analysis;
    let mut march_report = Report::new(
        "cover_march",
        &["eps", "sample", "w1inf_distance", "steps_ok", "closure_ok", "in_family", "log_cardinality"],
    );
    for &eps in &a.eps_list {
        let bounds = FunctionClassBounds::new(eps, 2.0 * eps, 2.0 * eps, 1.0)?;
        let scales = bounds.scales();
        let cover = build_pl_cover(&bounds)?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        for sample in 0..10usize {
            let f = TrigSum::random_in_class(&bounds, &mut rng);
            let m = march(|x| f.eval(x), &bounds)?;
            march_report.push(vec![
                eps.into(),
                sample.into(),
                w1inf_distance_to_atom(|x| f.eval(x), &m.atom).into(),
                m.steps_within_bounds(&scales).into(),
                m.closure_within_bounds(eps).into(),
                cover.contains(&m.atom).into(),
                cover.log_cardinality.into(),
            ]);
        }
    }

    let us: Vec<_> = ens.members.iter().map(|m| m.u.clone()).collect();
    let jets = MemberJets::new(&us)?;
    let curvature = us
        .iter()
        .map(|u| Ok(differentiate(u, 2, DiffScheme::Spectral)?.max_abs()))
        .collect::<Result<Vec<f64>, entrosc_core::Error>>()?
        .into_iter()
        .fold(1.0, f64::max);
    let mut counts = Report::new(
        "cover_counts",
        &["eps", "L", "count_left", "count_right", "count_union", "log_bound", "submultiplicative"],
    );
    for &eps in &a.eps_list {
        for &l in &a.lengths {
            let left = Interval::new(-l, 0.0)?;
            let right = Interval::new(0.0, l)?;
            let whole = Interval::centered(l);
            let set = |window: Interval| {
                let n = jets.greedy_cover(window, eps).count();
                let mut s = CoverAtomSet::explicit(Vec::new(), eps, window);
                s.log_cardinality = (n as f64).ln();
                (n, s)
            };
            let ((nl, sl), (nr, sr)) = (set(left), set(right));
            let nu = jets.greedy_cover(whole, eps).count();
            let cert = merge_covers(&sl, &sr, eps, curvature)?;
            counts.push(vec![
                eps.into(),
                l.into(),
                nl.into(),
                nr.into(),
                nu.into(),
                cert.log_bound().into(),
                cert.admits(nu).into(),
            ]);
        }
    }
    Ok(vec![march_report, counts])
}

fn entropy_reports(ens: &Ensemble, cfg: &ExperimentConfig) -> Result<Vec<Report>, CliError> {
    let a = &cfg.analysis;
    let mut r = Report::new(
        "entropy",
        &["eps", "L", "count", "slope", "bound_const", "degenerate"],
    );
    for est in entropy_scan(ens, &a.eps_list, &a.lengths)? {
        for (l, c) in est.lengths.iter().zip(&est.counts) {
            r.push(vec![
                est.eps.into(),
                (*l).into(),
                (*c).into(),
                est.slope.into(),
                est.bound_const.into(),
                est.degenerate.into(),
            ]);
        }
    }
    let mut growth = Report::new(
        "ball_growth",
        &["eps", "L", "inner_L", "inner_count", "outer_count", "c_fit"],
    );
    let half_width = a
        .lengths
        .iter()
        .copied()
        .rev()
        .find(|l| {
            let margin = entrosc_core::functionals::WINDOW_MARGIN_WIDTHS / a.window_delta;
            l + margin <= cfg.grid.x_max && -l - margin >= cfg.grid.x_min
        });
    if let Some(l) = half_width {
        for &eps in &a.eps_list {
            if l - a.shrink_const / eps <= 0.0 {
                continue;
            }
            let g = ball_growth_check(ens, eps, l, a.shrink_const, a.window_delta)?;
            growth.push(vec![
                eps.into(),
                l.into(),
                g.inner_half_width.into(),
                g.inner_count.into(),
                g.outer_count.into(),
                g.c_fit.into(),
            ]);
        }
    }
    Ok(vec![r, growth])
}

fn topo_report(ens: &Ensemble, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let a = &cfg.analysis;
    let est = topological_entropy_estimate(ens, &ens.params, &a.eps_list, a.horizon, a.tau_step, &a.lengths)?;
    let mut r = Report::new(
        "topo_entropy",
        &[
            "eps",
            "L",
            "count",
            "initial_count",
            "rate",
            "h_est",
            "time_split_excess",
            "window_split_excess",
            "window_split_allowance",
        ],
    );
    for e in &est.per_eps {
        for w in &e.windows {
            r.push(vec![
                e.eps.into(),
                w.half_width.into(),
                w.count.into(),
                w.initial_count.into(),
                w.rate.into(),
                e.h_est.into(),
                w.time_split.excess().into(),
                w.window_split.excess().into(),
                w.window_split.log_allowance.into(),
            ]);
        }
    }
    Ok(r)
}
