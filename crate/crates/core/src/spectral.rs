//! Smooth frequency cutoffs, the Fourier multipliers built from them, power
//! iteration for operator norms on weighted `L²`, and the high-momentum
//! Poincaré ratio.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use realfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{differentiate, DiffScheme, Field, Grid, Weight};

fn sigma(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// `s(t) = σ(1-t) / (σ(1-t) + σ(t))` with `σ(t) = e^{-1/t}`: equal to 1 for
/// `t <= 0`, 0 for `t >= 1`, smooth in between and `s(1/2) = 1/2`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = sigma(1.0 - t);
        a / (a + sigma(t))
    }
}

/// Radial cutoff: 1 on `|k| <= inner`, 0 on `|k| >= outer`, smooth step between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub inner: f64,
    pub outer: f64,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self { inner: 1.0, outer: 2.0 }
    }
}

impl CutoffProfile {
    pub fn eval(&self, k: f64) -> f64 {
        smooth_step((k.abs() - self.inner) / (self.outer - self.inner))
    }
}

/// The standard cutoff `θ(k)`.
pub fn smooth_cutoff(k: f64) -> f64 {
    CutoffProfile::default().eval(k)
}

pub type Multiplier = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum OperatorKind {
    /// Multiplier `θ(k/a)`.
    Lowpass,
    /// Multiplier `1 - θ(k/a)`.
    Highpass,
    /// Arbitrary real even multiplier `m(k)`.
    General(Multiplier),
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::Lowpass => write!(f, "Lowpass"),
            OperatorKind::Highpass => write!(f, "Highpass"),
            OperatorKind::General(_) => write!(f, "General(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralOperator {
    pub kind: OperatorKind,
    pub a: f64,
    pub profile: CutoffProfile,
}

impl SpectralOperator {
    pub fn lowpass(a: f64) -> Result<Self> {
        Self::with_kind(OperatorKind::Lowpass, a)
    }

    pub fn highpass(a: f64) -> Result<Self> {
        Self::with_kind(OperatorKind::Highpass, a)
    }

    pub fn general(multiplier: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: OperatorKind::General(Arc::new(multiplier)),
            a: 1.0,
            profile: CutoffProfile::default(),
        }
    }

    pub fn identity() -> Self {
        Self::general(|_| 1.0)
    }

    pub fn zero() -> Self {
        Self::general(|_| 0.0)
    }

    fn with_kind(kind: OperatorKind, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("frequency scale a = {a} must be positive")));
        }
        Ok(Self { kind, a, profile: CutoffProfile::default() })
    }

    pub fn multiplier(&self, k: f64) -> f64 {
        match &self.kind {
            OperatorKind::Lowpass => self.profile.eval(k / self.a),
            OperatorKind::Highpass => 1.0 - self.profile.eval(k / self.a),
            OperatorKind::General(m) => m(k),
        }
    }
}

pub fn apply(op: &SpectralOperator, f: &Field) -> Field {
    let values = fft::apply_multiplier(f.values(), f.grid().dx(), |k| Complex64::new(op.multiplier(k), 0.0));
    Field::from_raw(*f.grid(), values)
}

/// Default high-frequency threshold: `min(1/η, Nyquist/4)`.
pub fn default_k_star(eta: f64, grid: &Grid) -> f64 {
    (1.0 / eta).min(grid.nyquist() / 4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorNormEstimate {
    pub value: f64,
    /// Whether the last three estimates agree within [`NORM_STABILITY_TOL`].
    pub stable: bool,
    pub history: Vec<f64>,
}

pub const NORM_STABILITY_TOL: f64 = 1e-2;

fn weighted_norm(values: &[f64], weight: &[f64]) -> f64 {
    values.iter().zip(weight).map(|(f, h)| h * f * f).sum::<f64>().sqrt()
}

/// Power iteration on `T*T` in `L²(h_δ dx)`, where the weighted adjoint of a
/// real even multiplier is `T* g = h⁻¹ T(h g)`. Each recorded estimate is the
/// Rayleigh-type lower bound `‖T f‖_h / ‖f‖_h`.
pub fn weighted_operator_norm(
    op: &SpectralOperator,
    grid: &Grid,
    delta: f64,
    iterations: usize,
    rng: &mut impl Rng,
) -> Result<OperatorNormEstimate> {
    if iterations < 10 {
        return Err(Error::InvalidParameter(format!(
            "power iteration needs at least 10 iterations, got {iterations}"
        )));
    }
    let weight = Weight::new(delta, 0.0)?.profile(grid);
    let dx = grid.dx();
    let symbol = |k: f64| Complex64::new(op.multiplier(k), 0.0);
    let mut f: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n0 = weighted_norm(&f, &weight);
    f.iter_mut().for_each(|x| *x /= n0);
    let mut history = Vec::with_capacity(iterations);
    let mut stable = false;
    for _ in 0..iterations {
        let tf = fft::apply_multiplier(&f, dx, symbol);
        let norm_tf = weighted_norm(&tf, &weight);
        history.push(norm_tf);
        if norm_tf == 0.0 {
            stable = true;
            break;
        }
        let htf: Vec<f64> = tf.iter().zip(&weight).map(|(t, h)| t * h).collect();
        let mut next = fft::apply_multiplier(&htf, dx, symbol);
        next.iter_mut().zip(&weight).for_each(|(x, h)| *x /= h);
        let n = weighted_norm(&next, &weight);
        if n == 0.0 {
            stable = true;
            break;
        }
        next.iter_mut().for_each(|x| *x /= n);
        f = next;
        let m = history.len();
        if m >= 3 {
            let last = &history[m - 3..];
            let hi = last.iter().cloned().fold(f64::MIN, f64::max);
            let lo = last.iter().cloned().fold(f64::MAX, f64::min);
            if hi - lo <= NORM_STABILITY_TOL * hi {
                stable = true;
            }
        }
    }
    let value = history.iter().cloned().fold(0.0, f64::max);
    Ok(OperatorNormEstimate { value, stable, history })
}

/// Share of spectral energy at `|k| < a`.
pub fn low_band_fraction(f: &Field, a: f64) -> f64 {
    let spec = fft::forward(f.values());
    let n = f.grid().len();
    let dx = f.grid().dx();
    let (mut low, mut total) = (0.0, 0.0);
    for (j, c) in spec.iter().enumerate() {
        let e = c.norm_sqr() * if j == 0 || j == n / 2 { 1.0 } else { 2.0 };
        total += e;
        if fft::wavenumber(j, n, dx) < a * (1.0 - 1e-9) {
            low += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        low / total
    }
}

pub const LOW_BAND_TOLERANCE: f64 = 1e-8;

/// Empirical Poincaré ratio `∫h_δ f² / ∫h_δ f'²` for `f` supported at `|k| >= a`.
pub fn high_momentum_ratio(f: &Field, a: f64, delta: f64) -> Result<f64> {
    let w = Weight::new(delta, 0.0)?;
    let frac = low_band_fraction(f, a);
    if frac > LOW_BAND_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "field carries {frac:.3e} of its energy below a = {a}; filter it first"
        )));
    }
    let df = differentiate(f, 1, DiffScheme::Spectral)?;
    let num = crate::field::weighted_integral(&f.map(|x| x * x), &w);
    let den = crate::field::weighted_integral(&df.map(|x| x * x), &w);
    if !(den > 0.0) {
        return Err(Error::UndefinedRatio("derivative energy vanishes".into()));
    }
    Ok(num / den)
}

/// Random real field whose Fourier modes lie in `lo <= |k| <= hi`, with
/// uniform random coefficients in `[-1, 1]`.
pub fn random_band_field(grid: &Grid, lo: f64, hi: f64, rng: &mut impl Rng) -> Field {
    let n = grid.len();
    let dx = grid.dx();
    let spec: Vec<Complex64> = (0..=n / 2)
        .map(|j| {
            let k = fft::wavenumber(j, n, dx);
            if k >= lo && k <= hi && j != n / 2 {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Field::from_raw(*grid, fft::inverse(spec, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn cutoff_reference_values() {
        assert_eq!(smooth_cutoff(0.5), 1.0);
        assert_eq!(smooth_cutoff(-1.0), 1.0);
        assert_eq!(smooth_cutoff(3.0), 0.0);
        assert_eq!(smooth_cutoff(2.0), 0.0);
        assert!((smooth_cutoff(1.5) - 0.5).abs() < 1e-15);
        assert!((smooth_cutoff(1.2) + smooth_cutoff(1.8) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lowpass_passes_low_modes_and_highpass_kills_constants() {
        let g = Grid::new(-PI, PI, 64).unwrap();
        let f = Field::from_fn(g, |x| (3.0 * x).sin()).unwrap();
        let lp = apply(&SpectralOperator::lowpass(3.0).unwrap(), &f);
        assert!((&lp - &f).max_abs() < 1e-13);
        let one = Field::from_fn(g, |_| 1.0).unwrap();
        assert!(apply(&SpectralOperator::highpass(3.0).unwrap(), &one).max_abs() < 1e-14);
    }

    #[test]
    fn lowpass_halves_a_mode_on_the_midpoint_against_a_direct_dft() {
        // direct O(n²) DFT oracle on a tiny grid
        let g = Grid::new(-PI, PI, 32).unwrap();
        let f = Field::from_fn(g, |x| (12.0 * x).sin()).unwrap();
        let got = apply(&SpectralOperator::lowpass(8.0).unwrap(), &f);
        let n = g.len();
        let xs = g.points();
        let mut oracle = vec![0.0; n];
        for m in 0..n {
            let km = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let (mut re, mut im) = (0.0, 0.0);
            for (j, x) in xs.iter().enumerate() {
                re += f.values()[j] * (km * x).cos();
                im -= f.values()[j] * (km * x).sin();
            }
            let mult = smooth_cutoff(km.abs() / 8.0);
            for (i, x) in xs.iter().enumerate() {
                oracle[i] += mult * (re * (km * x).cos() - im * (km * x).sin()) / n as f64;
            }
        }
        for i in 0..n {
            assert!((got.values()[i] - oracle[i]).abs() < 1e-12);
            assert!((got.values()[i] - 0.5 * (12.0 * xs[i]).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn operators_commute_with_differentiation() {
        let g = Grid::new(-20.0, 20.0, 512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = random_band_field(&g, 0.0, 12.0, &mut rng);
            let op = SpectralOperator::lowpass(rng.gen_range(1.0..6.0)).unwrap();
            let a = differentiate(&apply(&op, &f), 1, DiffScheme::Spectral).unwrap();
            let b = apply(&op, &differentiate(&f, 1, DiffScheme::Spectral).unwrap());
            assert!((&a - &b).max_abs() <= 1e-8 * a.max_abs().max(1.0));
        }
    }

    #[test]
    fn lowpass_plus_highpass_is_identity() {
        let g = Grid::new(-20.0, 20.0, 512).unwrap();
        let f = random_band_field(&g, 0.0, 40.0, &mut ChaCha8Rng::seed_from_u64(1));
        let lo = apply(&SpectralOperator::lowpass(4.0).unwrap(), &f);
        let hi = apply(&SpectralOperator::highpass(4.0).unwrap(), &f);
        assert!((&(&lo + &hi) - &f).max_abs() < 1e-12);
    }

    #[test]
    fn smooth_cutoff_is_not_idempotent_and_differs_only_on_the_transition_band() {
        let q = SpectralOperator::lowpass(2.0).unwrap();
        for k in [0.0, 1.0, 1.9, 4.0, 4.5, 9.0] {
            let m = q.multiplier(k);
            assert_eq!(m * m - m, 0.0, "k = {k}");
        }
        assert!((q.multiplier(3.0).powi(2) - q.multiplier(3.0)).abs() > 0.1);
    }

    #[test]
    fn identity_and_zero_norms() {
        let g = Grid::new(-100.0, 100.0, 1024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let id = weighted_operator_norm(&SpectralOperator::identity(), &g, 1.0 / 80.0, 10, &mut rng).unwrap();
        assert!((id.value - 1.0).abs() < 1e-6 && id.stable);
        let zero = weighted_operator_norm(&SpectralOperator::zero(), &g, 1.0 / 80.0, 10, &mut rng).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(weighted_operator_norm(&SpectralOperator::zero(), &g, 0.1, 5, &mut rng).is_err());
    }

    #[test]
    fn poincare_ratio_of_pure_modes() {
        // weight correction is O(δ²/a²); the oracle is the unweighted ratio
        let g = Grid::new(-64.0 * PI, 64.0 * PI, 8192).unwrap();
        for a in [4.0, 8.0] {
            for (mult, expect) in [(1.0, 1.0 / (a * a)), (2.0, 1.0 / (4.0 * a * a))] {
                let f = Field::from_fn(g, |x| (mult * a * x).sin()).unwrap();
                let r = high_momentum_ratio(&f, a, 1.0 / 80.0).unwrap();
                assert!((r - expect).abs() < 1e-3 * expect, "a = {a}: {r} vs {expect}");
            }
        }
    }

    #[test]
    fn poincare_ratio_rejects_low_content_and_flat_fields() {
        let g = Grid::new(-PI, PI, 64).unwrap();
        let f = Field::from_fn(g, |x| x.sin()).unwrap();
        assert!(matches!(high_momentum_ratio(&f, 4.0, 0.1), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            high_momentum_ratio(&Field::zeros(g), 4.0, 0.1),
            Err(Error::UndefinedRatio(_))
        ));
    }

    #[test]
    fn default_threshold_respects_resolution() {
        let g = Grid::new(-40.0, 40.0, 4096).unwrap();
        assert_eq!(default_k_star(0.1, &g), 10.0);
        let coarse = Grid::new(-40.0, 40.0, 128).unwrap();
        assert!((default_k_star(0.1, &coarse) - coarse.nyquist() / 4.0).abs() < 1e-12);
    }
}
