//! Entropy per unit length: greedy `W^{1,∞}` cover counts on growing windows,
//! the ball-growth relation between windowed `H²` covers at two radii, and
//! topological entropy from separated trajectory families.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::covering::{greedy_cover_by, log_connect_constant, AtomFamily, CoverAtomSet, MemberJets};
use crate::dynamics::{evolve, Ensemble, ModelParams};
use crate::error::{Error, Result};
use crate::field::{differentiate, DiffScheme, Field, Interval};
use crate::functionals::{check_window, least_squares, sobolev_norm_from_density, NormDensity, NormKind};

/// Cover counts of an ensemble on windows `[-L, L]` at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    pub eps: f64,
    pub lengths: Vec<f64>,
    pub counts: Vec<usize>,
    /// Least-squares slope of `ln count` against `L`.
    pub slope: f64,
    /// `slope / ln(1/eps)`.
    pub bound_const: f64,
    /// Set when `eps` is at least the ensemble diameter on the largest window.
    pub degenerate: bool,
}

impl EntropyEstimate {
    /// Slope of `ln count` over the lengths in `[lo, hi]`.
    pub fn slope_between(&self, lo: f64, hi: f64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .lengths
            .iter()
            .zip(&self.counts)
            .filter(|(l, _)| **l >= lo && **l <= hi)
            .map(|(l, c)| (*l, (*c as f64).ln()))
            .unzip();
        least_squares(&x, &y).map(|(s, _)| s)
    }
}

fn log_slope(lengths: &[f64], counts: &[usize]) -> f64 {
    let logs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    match least_squares(lengths, &logs) {
        Some((slope, _)) => slope,
        None => logs[0] / lengths[0],
    }
}

fn check_lengths(lengths: &[f64], ens_grid: &crate::field::Grid) -> Result<()> {
    if lengths.is_empty() || lengths.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidParameter("window lengths must be positive and non-empty".into()));
    }
    if lengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("window lengths must be strictly increasing".into()));
    }
    let largest = *lengths.last().expect("checked non-empty");
    if !ens_grid.contains_interval(Interval::centered(largest)) {
        return Err(Error::WindowOutOfDomain {
            half_width: largest,
            margin: 0.0,
        });
    }
    Ok(())
}

fn member_jets(ens: &Ensemble) -> Result<MemberJets> {
    let us: Vec<Field> = ens.members.iter().map(|m| m.u.clone()).collect();
    MemberJets::new(&us)
}

/// Largest pairwise distance between members on `window`.
fn diameter(jets: &MemberJets, window: Interval) -> f64 {
    let n = jets.len();
    (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| jets.distance(i, j, window)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Greedy counts on nested windows. A cover of a larger window also covers a
/// smaller one, so each count is capped by the counts of larger windows.
fn window_counts(jets: &MemberJets, eps: f64, lengths: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = lengths
        .par_iter()
        .map(|&l| jets.greedy_cover(Interval::centered(l), eps).count())
        .collect();
    for k in (0..counts.len().saturating_sub(1)).rev() {
        counts[k] = counts[k].min(counts[k + 1]);
    }
    counts
}

fn estimate_from_counts(eps: f64, lengths: &[f64], counts: Vec<usize>, diam: f64) -> EntropyEstimate {
    let slope = log_slope(lengths, &counts);
    EntropyEstimate {
        eps,
        lengths: lengths.to_vec(),
        slope,
        bound_const: slope / (1.0 / eps).ln(),
        degenerate: eps >= diam,
        counts,
    }
}

/// Greedy `W^{1,∞}` cover counts of the ensemble's `u` components on
/// `[-L, L]` for each `L`, with the slope of `ln count` against `L`.
pub fn epsilon_entropy_per_length(ens: &Ensemble, eps: f64, lengths: &[f64]) -> Result<EntropyEstimate> {
    Ok(entropy_scan(ens, &[eps], lengths)?.remove(0))
}

/// [`epsilon_entropy_per_length`] for several radii. A cover at a smaller
/// radius also covers at a larger one, so counts are capped accordingly.
pub fn entropy_scan(ens: &Ensemble, eps_list: &[f64], lengths: &[f64]) -> Result<Vec<EntropyEstimate>> {
    if eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::InvalidParameter("cover radii must lie in (0, 1)".into()));
    }
    let jets = member_jets(ens)?;
    check_lengths(lengths, jets.grid())?;
    let diam = diameter(&jets, Interval::centered(*lengths.last().expect("checked")));
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[a].total_cmp(&eps_list[b]));
    let mut counts: Vec<Vec<usize>> = vec![Vec::new(); eps_list.len()];
    let mut finer: Option<Vec<usize>> = None;
    for &k in &order {
        let mut c = window_counts(&jets, eps_list[k], lengths);
        if let Some(f) = &finer {
            for (a, b) in c.iter_mut().zip(f) {
                *a = (*a).min(*b);
            }
        }
        finer = Some(c.clone());
        counts[k] = c;
    }
    Ok(eps_list
        .iter()
        .zip(counts)
        .map(|(&eps, c)| estimate_from_counts(eps, lengths, c, diam))
        .collect())
}

/// Cover counts at radius `eps` on the shrunken window and at `2 eps` on the
/// full window, in the windowed `H²` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallGrowthReport {
    pub eps: f64,
    pub half_width: f64,
    pub inner_half_width: f64,
    pub inner_count: usize,
    pub outer_count: usize,
    /// Smallest `C >= 1` with `inner_count <= C^L outer_count`.
    pub c_fit: f64,
}

/// Compares `N_{L - A/eps}(eps)` with `N_L(2 eps)` for greedy covers in the
/// windowed `H²` norm with weight parameter `delta`.
pub fn ball_growth_check(ens: &Ensemble, eps: f64, half_width: f64, shrink_const: f64, delta: f64) -> Result<BallGrowthReport> {
    let inner = half_width - shrink_const / eps;
    if !(inner > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shrunken window L - A/eps = {inner} must be positive"
        )));
    }
    let grid = *ens
        .grid()
        .ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
    check_window(&grid, half_width, delta)?;
    let eta = ens.params.eta;
    let n = ens.members.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let distances: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = ens.members[i].difference(&ens.members[j])?;
            let density = NormDensity::new(&d, eta)?;
            let a = sobolev_norm_from_density(NormKind::Windowed { half_width: inner }, &density, delta)?;
            let b = sobolev_norm_from_density(NormKind::Windowed { half_width }, &density, delta)?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let lookup = |i: usize, j: usize, outer: bool| {
        if i == j {
            return 0.0;
        }
        let (a, b) = (i.min(j), i.max(j));
        // position of (a, b) in the upper-triangular pair list
        let k = a * n - a * (a + 1) / 2 + (b - a - 1);
        if outer {
            distances[k].1
        } else {
            distances[k].0
        }
    };
    let inner_count = greedy_cover_by(0..n, eps, |i, j| lookup(i, j, false)).count();
    let outer_count = greedy_cover_by(0..n, 2.0 * eps, |i, j| lookup(i, j, true)).count();
    let c_fit = (inner_count as f64 / outer_count as f64).powf(1.0 / half_width).max(1.0);
    Ok(BallGrowthReport {
        eps,
        half_width,
        inner_half_width: inner,
        inner_count,
        outer_count,
        c_fit,
    })
}

/// Separated-set count of a trajectory bundle against a partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    pub eps: f64,
    pub tau_step: f64,
    pub horizon: f64,
    pub n_separated: usize,
    pub trajectory_count: usize,
    pub atom_count: usize,
}

/// Nearest-atom labels of every sampled state, one sequence per trajectory.
pub fn itineraries(bundle: &[Vec<Field>], atoms: &[Field], window: Interval) -> Result<Vec<Vec<usize>>> {
    if atoms.is_empty() {
        return Err(Error::InvalidParameter("cover has no atoms".into()));
    }
    let grid = *atoms[0].grid();
    let range = grid.indices_in(window);
    let jet = |f: &Field| -> Result<(Vec<f64>, Vec<f64>)> {
        f.check_same_grid(&atoms[0])?;
        let df = differentiate(f, 1, DiffScheme::Spectral)?;
        Ok((f.values()[range.clone()].to_vec(), df.values()[range.clone()].to_vec()))
    };
    let atom_jets: Vec<_> = atoms.iter().map(jet).collect::<Result<_>>()?;
    bundle
        .par_iter()
        .map(|trajectory| {
            trajectory
                .iter()
                .map(|state| {
                    let (v, d) = jet(state)?;
                    let dist = |(av, ad): &(Vec<f64>, Vec<f64>)| {
                        (0..v.len()).fold(0.0, |m: f64, k| m.max((v[k] - av[k]).abs()).max((d[k] - ad[k]).abs()))
                    };
                    let mut best = (f64::INFINITY, 0);
                    for (a, aj) in atom_jets.iter().enumerate() {
                        let d = dist(aj);
                        if d < best.0 {
                            best = (d, a);
                        }
                    }
                    Ok(best.1)
                })
                .collect()
        })
        .collect()
}

fn separated(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).any(|(x, y)| x != y)
}

/// Greedy maximal separated family: trajectories are scanned in order and
/// kept when separated from every trajectory kept so far.
pub fn greedy_separated(itins: &[Vec<usize>]) -> usize {
    let mut kept: Vec<&[usize]> = Vec::new();
    for it in itins {
        if kept.iter().all(|k| separated(k, it)) {
            kept.push(it);
        }
    }
    kept.len()
}

/// Largest pairwise-separated subfamily, by enumerating all subsets.
pub fn max_separated_exhaustive(itins: &[Vec<usize>]) -> Result<usize> {
    let n = itins.len();
    if n > 20 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search is limited to 20 trajectories, got {n}"
        )));
    }
    let mut best = 0;
    for subset in 0u32..(1u32 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| subset & (1 << i) != 0).collect();
        let ok = members
            .iter()
            .enumerate()
            .all(|(p, &i)| members[p + 1..].iter().all(|&j| separated(&itins[i], &itins[j])));
        if ok {
            best = best.max(members.len());
        }
    }
    Ok(best)
}

/// Counts a separated family of the bundle, each state labelled by its
/// nearest atom of an explicit cover on `window`.
pub fn separated_count(bundle: &[Vec<Field>], cover: &CoverAtomSet, tau_step: f64, window: Interval) -> Result<SeparationReport> {
    let atoms = match &cover.family {
        AtomFamily::Explicit(atoms) => atoms,
        _ => {
            return Err(Error::InvalidParameter(
                "separated counts need an explicit list of atoms".into(),
            ))
        }
    };
    let samples = bundle.first().map(Vec::len).unwrap_or(0);
    if bundle.iter().any(|t| t.len() != samples) {
        return Err(Error::InvalidParameter("trajectories must share sampling times".into()));
    }
    let itins = itineraries(bundle, atoms, window)?;
    Ok(SeparationReport {
        eps: cover.eps,
        tau_step,
        horizon: samples.saturating_sub(1) as f64 * tau_step,
        n_separated: greedy_separated(&itins),
        trajectory_count: bundle.len(),
        atom_count: atoms.len(),
    })
}

/// Splits of the count used to check submultiplicativity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCheck {
    pub log_whole: f64,
    pub log_first: f64,
    pub log_second: f64,
    /// Upper allowance for `log_whole - log_first - log_second`.
    pub log_allowance: f64,
}

impl SplitCheck {
    pub fn excess(&self) -> f64 {
        self.log_whole - self.log_first - self.log_second
    }

    pub fn holds(&self) -> bool {
        self.excess() <= self.log_allowance + 1e-9
    }
}

/// Topological-entropy data at one radius and one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEntropy {
    pub half_width: f64,
    /// Distinct itineraries over `[0, T]`.
    pub count: usize,
    /// Distinct labels at time 0.
    pub initial_count: usize,
    /// `(ln count - ln initial_count) / (T L)`.
    pub rate: f64,
    /// `[0, T1]` against `[T1, T]` with `T1` the middle sample.
    pub time_split: SplitCheck,
    /// `[-L, 0]` against `[0, L]`, allowance `ln K_eps`.
    pub window_split: SplitCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsEntropy {
    pub eps: f64,
    pub windows: Vec<WindowEntropy>,
    /// Rate at the largest window.
    pub h_est: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologicalEntropyReport {
    pub horizon: f64,
    pub tau_step: f64,
    pub trajectory_count: usize,
    /// Sorted by increasing radius.
    pub per_eps: Vec<EpsEntropy>,
    /// Counts never increase with the radius, window by window.
    pub monotone_in_eps: bool,
}

impl TopologicalEntropyReport {
    pub fn time_submultiplicative(&self) -> bool {
        self.per_eps.iter().flat_map(|e| &e.windows).all(|w| w.time_split.holds())
    }

    pub fn window_submultiplicative(&self) -> bool {
        self.per_eps.iter().flat_map(|e| &e.windows).all(|w| w.window_split.holds())
    }
}

/// Labels for every state under a chain of nested partitions, one per radius
/// in increasing order. The finest level is a greedy cover with radius
/// `eps_0 / 2`; each coarser level clusters the previous centres with radius
/// `(eps_k - eps_{k-1}) / 2`, so every atom has diameter at most `eps_k` and
/// coarser partitions merge finer atoms.
pub fn nested_labels(jets: &MemberJets, window: Interval, sorted_eps: &[f64]) -> Vec<Vec<usize>> {
    let n = jets.len();
    let dist = |i: usize, j: usize| jets.distance(i, j, window);
    let mut levels = Vec::with_capacity(sorted_eps.len());
    let first = greedy_cover_by(0..n, sorted_eps[0] / 2.0, dist);
    let mut labels = vec![0; n];
    for &(i, k) in &first.assignment {
        labels[i] = k;
    }
    let mut centres = first.centres;
    levels.push(labels.clone());
    for w in sorted_eps.windows(2) {
        let cover = greedy_cover_by(centres.iter().copied(), (w[1] - w[0]) / 2.0, dist);
        let mut merge = vec![0; centres.len()];
        for (pos, &(_, k)) in cover.assignment.iter().enumerate() {
            merge[pos] = k;
        }
        for l in labels.iter_mut() {
            *l = merge[*l];
        }
        centres = cover.centres;
        levels.push(labels.clone());
    }
    levels
}

fn distinct(itins: &[Vec<usize>], range: std::ops::RangeInclusive<usize>) -> usize {
    itins
        .iter()
        .map(|it| it[range.clone()].to_vec())
        .collect::<HashSet<_>>()
        .len()
}

/// Maximum `|u''|` over all states on `window`.
fn curvature_sup(states: &[Field], window: Interval) -> Result<f64> {
    states
        .par_iter()
        .map(|s| Ok(differentiate(s, 2, DiffScheme::Spectral)?.max_abs_in(window)))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Evolves every member over `[0, T]`, samples every `tau_step`, labels the
/// states with nested explicit covers on each window `[-L, L]`, and counts
/// distinct itineraries.
pub fn topological_entropy_estimate(
    ens: &Ensemble,
    p: &ModelParams,
    eps_list: &[f64],
    horizon: f64,
    tau_step: f64,
    lengths: &[f64],
) -> Result<TopologicalEntropyReport> {
    if ens.members.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "topological entropy needs at least 4 trajectories, got {}",
            ens.members.len()
        )));
    }
    let ratio = horizon / tau_step;
    if !(tau_step > 0.0) || ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must be a positive integer multiple of the time step {tau_step}"
        )));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::InvalidParameter("cover radii must lie in (0, 1)".into()));
    }
    let steps = ratio.round() as usize;
    let grid = *ens.grid().expect("non-empty ensemble");
    check_lengths(lengths, &grid)?;

    let trajectories: Vec<Vec<Field>> = ens
        .members
        .par_iter()
        .map(|m| Ok(evolve(m, p, horizon, tau_step)?.states.into_iter().map(|s| s.u).collect()))
        .collect::<Result<_>>()?;
    let samples = steps + 1;
    let states: Vec<Field> = trajectories.iter().flatten().cloned().collect();
    let jets = MemberJets::new(&states)?;

    let mut sorted: Vec<f64> = eps_list.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = steps / 2;

    let per_window: Vec<Vec<(usize, usize, SplitCheck, SplitCheck)>> = lengths
        .par_iter()
        .map(|&l| {
            let whole = Interval::centered(l);
            let curvature = curvature_sup(&states, whole)?.max(1.0);
            let label_sets = [
                nested_labels(&jets, whole, &sorted),
                nested_labels(&jets, Interval::new(-l, 0.0)?, &sorted),
                nested_labels(&jets, Interval::new(0.0, l)?, &sorted),
            ];
            sorted
                .iter()
                .enumerate()
                .map(|(k, &eps)| {
                    let itins: Vec<Vec<Vec<usize>>> = label_sets
                        .iter()
                        .map(|ls| ls[k].chunks(samples).map(<[usize]>::to_vec).collect())
                        .collect();
                    let count = distinct(&itins[0], 0..=steps);
                    let initial = distinct(&itins[0], 0..=0);
                    let time_split = SplitCheck {
                        log_whole: (count as f64).ln(),
                        log_first: (distinct(&itins[0], 0..=mid) as f64).ln(),
                        log_second: (distinct(&itins[0], mid..=steps) as f64).ln(),
                        log_allowance: 0.0,
                    };
                    let window_split = SplitCheck {
                        log_whole: (count as f64).ln(),
                        log_first: (distinct(&itins[1], 0..=steps) as f64).ln(),
                        log_second: (distinct(&itins[2], 0..=steps) as f64).ln(),
                        log_allowance: log_connect_constant(eps, curvature)?,
                    };
                    Ok((count, initial, time_split, window_split))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let per_eps: Vec<EpsEntropy> = sorted
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let windows: Vec<WindowEntropy> = lengths
                .iter()
                .zip(&per_window)
                .map(|(&l, cells)| {
                    let (count, initial, time_split, window_split) = cells[k];
                    WindowEntropy {
                        half_width: l,
                        count,
                        initial_count: initial,
                        rate: ((count as f64).ln() - (initial as f64).ln()) / (horizon * l),
                        time_split,
                        window_split,
                    }
                })
                .collect();
            let h_est = windows.last().map(|w| w.rate).unwrap_or(0.0);
            EpsEntropy { eps, windows, h_est }
        })
        .collect();
    let monotone_in_eps = per_eps.windows(2).all(|pair| {
        pair[0]
            .windows
            .iter()
            .zip(&pair[1].windows)
            .all(|(fine, coarse)| coarse.count <= fine.count)
    });
    Ok(TopologicalEntropyReport {
        horizon,
        tau_step,
        trajectory_count: ens.members.len(),
        per_eps,
        monotone_in_eps,
    })
}

/// The time unit minimizing `decay_amp e^{-γτ/80} + growth_amp e^{growth_rate τ} / γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeUnit {
    pub tau: f64,
    /// Minimal value of the bound.
    pub value: f64,
    /// `-ln value / ln γ`, the exponent with `value = γ^{-κ}`.
    pub kappa: f64,
}

/// Minimizes the decay-plus-growth bound over `τ >= 0` in closed form.
pub fn tau_star(gamma: f64, decay_amp: f64, growth_amp: f64, growth_rate: f64) -> Result<TimeUnit> {
    if !(gamma > 1.0 && decay_amp > 0.0 && growth_amp > 0.0 && growth_rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time unit needs γ > 1 and positive amplitudes and rate, got γ = {gamma}, {decay_amp}, {growth_amp}, {growth_rate}"
        )));
    }
    let decay = gamma / 80.0;
    let bound = |t: f64| decay_amp * (-decay * t).exp() + growth_amp * (growth_rate * t).exp() / gamma;
    // stationary point of the sum of a decaying and a growing exponential
    let tau = ((decay_amp * decay * gamma) / (growth_amp * growth_rate)).ln() / (decay + growth_rate);
    let tau = tau.max(0.0);
    let value = bound(tau);
    Ok(TimeUnit {
        tau,
        value,
        kappa: -value.ln() / gamma.ln(),
    })
}
