//! Time stepping for the damped wave equation `η² u_tt + u_t = u_xx + u - u³`,
//! its linear part, and the difference system between two solutions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::SpectralWorkspace;
use crate::field::{laplacian_fd4, DiffScheme, Field, FieldPair, Grid};

/// Largest admissible damping scale, `1/√40`.
pub const ETA_MAX: f64 = 0.158_113_883_008_418_97;

/// Any `|u|` above this is treated as integrator failure.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

pub const DEFAULT_CFL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub eta: f64,
    pub eta0: f64,
    /// Width parameter of the coercive weight.
    pub alpha: f64,
    /// Cross-term constant in the derivative functional.
    pub mu_f1: f64,
    pub dt: f64,
    pub scheme: DiffScheme,
}

impl ModelParams {
    /// Parameters with the largest stable time step for `grid`.
    pub fn for_grid(eta: f64, grid: &Grid) -> Result<Self> {
        let p = Self {
            eta,
            eta0: ETA_MAX,
            alpha: 0.25,
            mu_f1: 0.05,
            dt: max_stable_dt(eta, grid.dx(), DEFAULT_CFL),
            scheme: DiffScheme::FiniteDifference4,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scheme(mut self, scheme: DiffScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0 <= ETA_MAX) {
            return Err(Error::InvalidParameter(format!(
                "eta0 = {} must satisfy 0 < eta0 <= 1/sqrt(40)",
                self.eta0
            )));
        }
        if !(self.eta > 0.0 && self.eta < self.eta0) {
            return Err(Error::InvalidParameter(format!(
                "eta = {} must satisfy 0 < eta < eta0 = {}",
                self.eta, self.eta0
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must lie in (0, 1/2]",
                self.alpha
            )));
        }
        if !(self.mu_f1 > 0.0 && self.mu_f1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu_f1 = {} must be positive",
                self.mu_f1
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        Ok(())
    }

    fn check_step(&self, grid: &Grid) -> Result<()> {
        self.validate()?;
        let limit = max_stable_dt(self.eta, grid.dx(), DEFAULT_CFL);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds min(0.5 eta dx, 0.5 eta^2) = {limit}",
                self.dt
            )));
        }
        Ok(())
    }
}

pub fn max_stable_dt(eta: f64, dx: f64, cfl: f64) -> f64 {
    (cfl * eta * dx).min(0.5 * eta * eta)
}

/// `U'(s) = s - s³`.
#[inline]
pub fn potential_slope(s: f64) -> f64 {
    s - s * s * s
}

/// Divided difference `(U'(a) - U'(b)) / (a - b) = 1 - (a² + ab + b²)`.
#[inline]
pub fn divided_slope(a: f64, b: f64) -> f64 {
    1.0 - (a * a + a * b + b * b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FieldPair>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &FieldPair {
        self.states.last().expect("trajectories hold at least the initial state")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<FieldPair>,
    pub burn_in_time: f64,
    pub seed: u64,
    pub params: ModelParams,
}

impl Ensemble {
    pub fn grid(&self) -> Option<&Grid> {
        self.members.first().map(|m| m.grid())
    }
}

/// Second-derivative operator with reusable buffers.
enum Laplacian {
    Fd4 { dx: f64 },
    Spectral { ws: SpectralWorkspace, symbol: Vec<f64> },
}

impl Laplacian {
    fn new(grid: &Grid, scheme: DiffScheme) -> Self {
        match scheme {
            DiffScheme::FiniteDifference4 => Laplacian::Fd4 { dx: grid.dx() },
            DiffScheme::Spectral => {
                let ws = SpectralWorkspace::new(grid.len(), grid.dx());
                let symbol = ws.wavenumbers.iter().map(|k| -k * k).collect();
                Laplacian::Spectral { ws, symbol }
            }
        }
    }

    fn apply(&mut self, u: &[f64], out: &mut [f64]) {
        match self {
            Laplacian::Fd4 { dx } => laplacian_fd4(u, *dx, out),
            Laplacian::Spectral { ws, symbol } => ws.filter_real(u, out, symbol),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum System {
    Nonlinear,
    Linear,
    /// Channels `[u2, v2, w, z]`: a base solution and the difference `u1 - u2`.
    Difference,
}

impl System {
    fn channels(self) -> usize {
        match self {
            System::Difference => 4,
            _ => 2,
        }
    }
}

struct Integrator {
    n: usize,
    inv_eta2: f64,
    system: System,
    lap: Laplacian,
    lap_buf: Vec<f64>,
    k: Vec<f64>,
    acc: Vec<f64>,
    stage: Vec<f64>,
}

impl Integrator {
    fn new(grid: &Grid, p: &ModelParams, system: System) -> Self {
        let len = grid.len() * system.channels();
        Self {
            n: grid.len(),
            inv_eta2: 1.0 / (p.eta * p.eta),
            system,
            lap: Laplacian::new(grid, p.scheme),
            lap_buf: vec![0.0; grid.len()],
            k: vec![0.0; len],
            acc: vec![0.0; len],
            stage: vec![0.0; len],
        }
    }

    fn rhs(&mut self, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let c = self.inv_eta2;
        let (u, rest) = y.split_at(n);
        let v = &rest[..n];
        let (du, drest) = dy.split_at_mut(n);
        du.copy_from_slice(v);
        self.lap.apply(u, &mut self.lap_buf);
        let dv = &mut drest[..n];
        let source = |ui: f64| match self.system {
            System::Linear => 0.0,
            _ => potential_slope(ui),
        };
        for i in 0..n {
            dv[i] = c * (-v[i] + self.lap_buf[i] + source(u[i]));
        }
        if self.system == System::Difference {
            let w = &y[2 * n..3 * n];
            let z = &y[3 * n..];
            let (dw, dz) = dy[2 * n..].split_at_mut(n);
            dw.copy_from_slice(z);
            self.lap.apply(w, &mut self.lap_buf);
            for i in 0..n {
                let m = divided_slope(u[i] + w[i], u[i]);
                dz[i] = c * (-z[i] + self.lap_buf[i] + m * w[i]);
            }
        }
    }

    fn step(&mut self, y: &mut [f64], dt: f64) {
        let mut k = std::mem::take(&mut self.k);
        let mut acc = std::mem::take(&mut self.acc);
        let mut stage = std::mem::take(&mut self.stage);

        self.rhs(y, &mut k);
        for i in 0..y.len() {
            acc[i] = k[i];
            stage[i] = y[i] + 0.5 * dt * k[i];
        }
        self.rhs(&stage, &mut k);
        for i in 0..y.len() {
            acc[i] += 2.0 * k[i];
            stage[i] = y[i] + 0.5 * dt * k[i];
        }
        self.rhs(&stage, &mut k);
        for i in 0..y.len() {
            acc[i] += 2.0 * k[i];
            stage[i] = y[i] + dt * k[i];
        }
        self.rhs(&stage, &mut k);
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (acc[i] + k[i]);
        }

        self.k = k;
        self.acc = acc;
        self.stage = stage;
    }
}

fn check_bounded(y: &[f64], n: usize, time: f64) -> Result<()> {
    let mut max_abs = 0.0f64;
    for &x in &y[..n] {
        if !x.is_finite() {
            return Err(Error::Divergence { time, max_abs: f64::INFINITY });
        }
        max_abs = max_abs.max(x.abs());
    }
    if max_abs > BLOW_UP_THRESHOLD {
        return Err(Error::Divergence { time, max_abs });
    }
    Ok(())
}

/// Step schedule: `steps` steps of size `dt`, reporting every `stride` steps.
fn schedule(t_final: f64, max_dt: f64, sample_every: f64) -> Result<(usize, f64, usize)> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_final = {t_final} must be >= 0")));
    }
    if !(sample_every > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample interval = {sample_every} must be positive"
        )));
    }
    if t_final == 0.0 {
        return Ok((0, max_dt, 1));
    }
    let blocks = if sample_every >= t_final {
        1
    } else {
        (t_final / sample_every - 1e-9).ceil() as usize
    };
    let stride = ((t_final / blocks as f64) / max_dt - 1e-9).ceil().max(1.0) as usize;
    let steps = blocks * stride;
    Ok((steps, t_final / steps as f64, stride))
}

fn run<F>(
    y: &mut [f64],
    grid: &Grid,
    p: &ModelParams,
    system: System,
    t_final: f64,
    sample_every: f64,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(f64, &[f64]) -> Result<()>,
{
    p.check_step(grid)?;
    let n = grid.len();
    let (steps, dt, stride) = schedule(t_final, p.dt, sample_every)?;
    let mut integrator = Integrator::new(grid, p, system);
    check_bounded(y, n, 0.0)?;
    observe(0.0, y)?;
    for s in 1..=steps {
        integrator.step(y, dt);
        let t = s as f64 * dt;
        if s % stride == 0 || s == steps {
            check_bounded(y, n, t)?;
            observe(t, y)?;
        } else if s % 64 == 0 {
            check_bounded(y, n, t)?;
        }
    }
    Ok(())
}

fn pack(state: &FieldPair) -> Vec<f64> {
    let mut y = state.u.values().to_vec();
    y.extend_from_slice(state.v.values());
    y
}

fn unpack(grid: &Grid, y: &[f64]) -> FieldPair {
    let n = grid.len();
    FieldPair {
        u: Field::from_raw(*grid, y[..n].to_vec()),
        v: Field::from_raw(*grid, y[n..2 * n].to_vec()),
    }
}

fn collect(
    state: &FieldPair,
    p: &ModelParams,
    system: System,
    t_final: f64,
    sample_every: f64,
) -> Result<Trajectory> {
    let grid = *state.grid();
    let mut traj = Trajectory { times: vec![], states: vec![] };
    let mut y = pack(state);
    run(&mut y, &grid, p, system, t_final, sample_every, |t, y| {
        traj.times.push(t);
        traj.states.push(unpack(&grid, y));
        Ok(())
    })?;
    Ok(traj)
}

/// Right-hand side `(v, (-v + u'' + U'(u)) / η²)`.
pub fn rhs(state: &FieldPair, p: &ModelParams) -> FieldPair {
    let grid = *state.grid();
    let mut integrator = Integrator::new(&grid, p, System::Nonlinear);
    let y = pack(state);
    let mut dy = vec![0.0; y.len()];
    integrator.rhs(&y, &mut dy);
    unpack(&grid, &dy)
}

/// Nonlinear evolution sampled every `sample_every` (plus both endpoints).
pub fn evolve(state: &FieldPair, p: &ModelParams, t_final: f64, sample_every: f64) -> Result<Trajectory> {
    collect(state, p, System::Nonlinear, t_final, sample_every)
}

/// Nonlinear evolution that hands each sample to `observe` instead of storing it.
/// Returns the final state.
pub fn evolve_observed<F>(
    state: &FieldPair,
    p: &ModelParams,
    t_final: f64,
    sample_every: f64,
    mut observe: F,
) -> Result<FieldPair>
where
    F: FnMut(f64, &FieldPair),
{
    let grid = *state.grid();
    let mut y = pack(state);
    run(&mut y, &grid, p, System::Nonlinear, t_final, sample_every, |t, y| {
        observe(t, &unpack(&grid, y));
        Ok(())
    })?;
    Ok(unpack(&grid, &y))
}

/// Final state of the nonlinear flow, without intermediate samples.
pub fn advance(state: &FieldPair, p: &ModelParams, t_final: f64) -> Result<FieldPair> {
    let grid = *state.grid();
    let mut y = pack(state);
    run(&mut y, &grid, p, System::Nonlinear, t_final, f64::INFINITY, |_, _| Ok(()))?;
    Ok(unpack(&grid, &y))
}

/// Evolution of `u_t = v, η² v_t = -v + u''`.
pub fn evolve_linear(state: &FieldPair, p: &ModelParams, t_final: f64, sample_every: f64) -> Result<Trajectory> {
    collect(state, p, System::Linear, t_final, sample_every)
}

/// Evolution of the difference `a(t) - b(t)` through the system driven by
/// the divided slope of `U'` along the solution started at `b`.
pub fn evolve_difference(
    a: &FieldPair,
    b: &FieldPair,
    p: &ModelParams,
    t_final: f64,
    sample_every: f64,
) -> Result<Trajectory> {
    let grid = *a.grid();
    let diff = a.difference(b)?;
    let mut y = pack(b);
    y.extend(pack(&diff));
    let n = grid.len();
    let mut traj = Trajectory { times: vec![], states: vec![] };
    run(&mut y, &grid, p, System::Difference, t_final, sample_every, |t, y| {
        check_bounded(&y[2 * n..], n, t)?;
        traj.times.push(t);
        traj.states.push(unpack(&grid, &y[2 * n..]));
        Ok(())
    })?;
    Ok(traj)
}

/// Highest Fourier index used for random initial data.
pub const INITIAL_MODES: usize = 4;

/// Random smooth initial data for member `index`, reproducible from `(seed, index)`.
pub fn random_initial_state(grid: &Grid, seed: u64, index: u64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut series = |clip: f64| {
        let coeffs: Vec<(f64, f64)> = (0..=INITIAL_MODES)
            .map(|_| (rng.gen_range(-0.5..=0.5), rng.gen_range(-0.5..=0.5)))
            .collect();
        let base = 2.0 * PI / grid.period();
        let values = grid
            .points()
            .into_iter()
            .map(|x| {
                let t = x - grid.x_min();
                let s: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, (a, b))| {
                        let k = base * m as f64;
                        a * (k * t).cos() + if m == 0 { 0.0 } else { b * (k * t).sin() }
                    })
                    .sum();
                s.clamp(-clip, clip)
            })
            .collect();
        Field::from_raw(*grid, values)
    };
    let u = series(2.0);
    let v = series(1.0);
    FieldPair { u, v }
}

/// Members are `Φ^{burn_in}` of seeded random initial data, evolved in parallel.
pub fn generate_ensemble(
    count: usize,
    grid: &Grid,
    p: &ModelParams,
    burn_in: f64,
    seed: u64,
) -> Result<Ensemble> {
    if count == 0 {
        return Err(Error::InvalidParameter("ensemble needs at least one member".into()));
    }
    if !(burn_in >= 0.0) {
        return Err(Error::InvalidParameter(format!("burn_in = {burn_in} must be >= 0")));
    }
    p.check_step(grid)?;
    let members = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let init = random_initial_state(grid, seed, i);
            advance(&init, p, burn_in).map_err(|e| match e {
                Error::Divergence { time, max_abs } => Error::MemberDiverged {
                    member: i as usize,
                    time,
                    max_abs,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        members,
        burn_in_time: burn_in,
        seed,
        params: *p,
    })
}

/// Closed-form evolution of a single mode `cos`/`sin(kx)` amplitude under the
/// linear system with initial amplitude `(a0, b0)` for `(u, v)`.
pub fn linear_mode_amplitude(k: f64, eta: f64, a0: f64, b0: f64, t: f64) -> (f64, f64) {
    use realfft::num_complex::Complex64;
    let e2 = eta * eta;
    let disc = Complex64::new(1.0 - 4.0 * k * k * e2, 0.0).sqrt();
    let lp = (-1.0 + disc) / (2.0 * e2);
    let lm = (-1.0 - disc) / (2.0 * e2);
    // u = A e^{lp t} + B e^{lm t}, v = lp A e^{lp t} + lm B e^{lm t}
    let big_a = (b0 - lm * a0) / (lp - lm);
    let big_b = a0 - big_a;
    let ep = (lp * t).exp();
    let em = (lm * t).exp();
    let u = big_a * ep + big_b * em;
    let v = lp * big_a * ep + lm * big_b * em;
    (u.re, v.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(-8.0 * PI, 8.0 * PI, 256).unwrap()
    }

    fn constant_state(g: Grid, u: f64, v: f64) -> FieldPair {
        FieldPair {
            u: Field::from_fn(g, |_| u).unwrap(),
            v: Field::from_fn(g, |_| v).unwrap(),
        }
    }

    #[test]
    fn rhs_of_constant_states() {
        let g = grid();
        let p = ModelParams::for_grid(0.1, &g).unwrap();
        let r = rhs(&constant_state(g, 0.5, 0.0), &p);
        assert!(r.v.values().iter().all(|&x| (x - 37.5).abs() < 1e-9));
        assert!(r.u.max_abs() == 0.0);
        let r = rhs(&constant_state(g, 1.0, 0.0), &p);
        assert!(r.u.max_abs() == 0.0 && r.v.max_abs() < 1e-12);
    }

    #[test]
    fn equilibria_are_fixed() {
        let g = grid();
        let p = ModelParams::for_grid(0.1, &g).unwrap();
        for level in [-1.0, 0.0, 1.0] {
            let s = constant_state(g, level, 0.0);
            let end = advance(&s, &p, 5.0).unwrap();
            assert!(end.u.values().iter().all(|&x| (x - level).abs() < 1e-14));
            assert!(end.v.max_abs() < 1e-14);
        }
    }

    #[test]
    fn sampling_schedule_hits_the_final_time() {
        let g = grid();
        let p = ModelParams::for_grid(0.1, &g).unwrap();
        let s = constant_state(g, 1.0, 0.0);
        let tr = evolve(&s, &p, 1.03, 0.25).unwrap();
        assert_eq!(tr.times[0], 0.0);
        assert!((tr.times.last().unwrap() - 1.03).abs() < 1e-12);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.times.windows(2).all(|w| w[1] - w[0] <= 0.25 + 1e-12));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = grid();
        let p = ModelParams::for_grid(0.1, &g).unwrap().with_dt(1.0);
        let s = constant_state(g, 0.0, 0.0);
        assert!(matches!(advance(&s, &p, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn blow_up_is_reported_with_its_time() {
        let g = grid();
        let p = ModelParams::for_grid(0.1, &g).unwrap();
        let s = constant_state(g, 0.0, 1e9);
        match advance(&s, &p, 10.0) {
            Err(Error::Divergence { time, .. }) => assert!(time > 0.0 && time <= 10.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn linear_mode_matches_closed_form() {
        let g = Grid::new(-PI, PI, 64).unwrap();
        let eta = 0.1;
        let p = ModelParams::for_grid(eta, &g)
            .unwrap()
            .with_scheme(DiffScheme::Spectral)
            .with_dt(2.5e-4);
        for k in [1.0, 3.0, 7.0] {
            let s = FieldPair {
                u: Field::from_fn(g, |x| (k * x).sin()).unwrap(),
                v: Field::zeros(g),
            };
            let tr = evolve_linear(&s, &p, 0.5, 0.1).unwrap();
            for (t, st) in tr.times.iter().zip(&tr.states) {
                let (a, b) = linear_mode_amplitude(k, eta, 1.0, 0.0, *t);
                for (i, x) in g.points().into_iter().enumerate() {
                    assert!((st.u.values()[i] - a * (k * x).sin()).abs() < 1e-6);
                    assert!((st.v.values()[i] - b * (k * x).sin()).abs() < 1e-6 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn difference_of_equilibria_is_constant() {
        let g = grid();
        let p = ModelParams::for_grid(0.1, &g).unwrap();
        let a = constant_state(g, 1.0, 0.0);
        let b = constant_state(g, -1.0, 0.0);
        let tr = evolve_difference(&a, &b, &p, 2.0, 1.0).unwrap();
        for s in &tr.states {
            assert!(s.u.values().iter().all(|&x| (x - 2.0).abs() < 1e-13));
            assert!(s.v.max_abs() < 1e-13);
        }
        let same = evolve_difference(&a, &a, &p, 2.0, 1.0).unwrap();
        assert!(same.states.iter().all(|s| s.u.max_abs() == 0.0 && s.v.max_abs() == 0.0));
    }

    #[test]
    fn single_member_without_burn_in_is_the_initial_state() {
        let g = grid();
        let p = ModelParams::for_grid(0.1, &g).unwrap();
        let e = generate_ensemble(1, &g, &p, 0.0, 42).unwrap();
        assert_eq!(e.members[0], random_initial_state(&g, 42, 0));
        assert!(e.members[0].u.max_abs() <= 2.0);
        assert!(e.members[0].v.max_abs() <= 1.0);
    }

    #[test]
    fn divided_slope_matches_the_quotient() {
        for &(a, b) in &[(0.3, -1.2), (1.7, 0.4), (-0.9, -0.2)] {
            let q = (potential_slope(a) - potential_slope(b)) / (a - b);
            assert!((divided_slope(a, b) - q).abs() < 1e-12);
        }
        assert_eq!(divided_slope(0.5, 0.5), 1.0 - 3.0 * 0.25);
    }
}
