//! Weighted Sobolev-type norms, the coercive functionals used for absorption
//! and regularity estimates, the high-frequency Lyapunov functional, and
//! empirical decay-rate fits.

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::field::{differentiate, weight_at_offset, DiffScheme, Field, FieldPair, Grid, Interval, Weight};

/// Centres of the weight closer than this many multiples of `1/delta` to the
/// domain edge are not allowed in windowed norms.
pub const WINDOW_MARGIN_WIDTHS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `(∫ h (η² v² + u² + u'²))^{1/2}` with the weight centred at the origin.
    H1,
    /// `H1(u, v)² + H1(u', v')²`, square-rooted.
    H2,
    /// Supremum of [`NormKind::H1`] over all weight centres.
    Loc1,
    /// Supremum of [`NormKind::H2`] over all weight centres.
    Loc2,
    /// Supremum of [`NormKind::H2`] over centres in `[-half_width, half_width]`.
    Windowed { half_width: f64 },
}

/// Pointwise integrands of the first- and second-order weighted norms.
#[derive(Debug, Clone)]
pub struct NormDensity {
    grid: Grid,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl NormDensity {
    pub fn new(s: &FieldPair, eta: f64) -> Result<Self> {
        let e2 = eta * eta;
        let du = differentiate(&s.u, 1, DiffScheme::Spectral)?;
        let ddu = differentiate(&s.u, 2, DiffScheme::Spectral)?;
        let dv = differentiate(&s.v, 1, DiffScheme::Spectral)?;
        let (u, v) = (s.u.values(), s.v.values());
        let (du, ddu, dv) = (du.values(), ddu.values(), dv.values());
        let first: Vec<f64> = (0..u.len())
            .map(|i| e2 * v[i] * v[i] + u[i] * u[i] + du[i] * du[i])
            .collect();
        let second = (0..u.len())
            .map(|i| first[i] + e2 * dv[i] * dv[i] + du[i] * du[i] + ddu[i] * ddu[i])
            .collect();
        Ok(Self { grid: *s.grid(), first, second })
    }

    fn integrate(&self, values: &[f64], delta: f64, xi: f64) -> f64 {
        let g = &self.grid;
        values
            .iter()
            .enumerate()
            .map(|(i, d)| d * weight_at_offset(delta, g.periodic_offset(g.x(i), xi)))
            .sum::<f64>()
            * g.dx()
    }

    pub fn h1_squared(&self, delta: f64, xi: f64) -> f64 {
        self.integrate(&self.first, delta, xi)
    }

    pub fn h2_squared(&self, delta: f64, xi: f64) -> f64 {
        self.integrate(&self.second, delta, xi)
    }
}

/// Spacing of weight centres, in units of `1/delta`, used for suprema over
/// centres; resolves the supremum to about half a percent.
pub const CENTRE_SPACING: f64 = 0.125;

/// Weight centres `lo, lo + step, ..., hi` with `step <= CENTRE_SPACING / delta`.
pub fn centre_grid(lo: f64, hi: f64, delta: f64) -> Vec<f64> {
    let max_step = CENTRE_SPACING / delta;
    let count = ((hi - lo) / max_step).ceil().max(0.0) as usize;
    if count == 0 {
        return vec![lo];
    }
    let step = (hi - lo) / count as f64;
    (0..=count).map(|j| lo + j as f64 * step).collect()
}

pub fn check_window(grid: &Grid, half_width: f64, delta: f64) -> Result<()> {
    let margin = WINDOW_MARGIN_WIDTHS / delta;
    if !(half_width >= 0.0) || -half_width - margin < grid.x_min() || half_width + margin > grid.x_max() {
        return Err(Error::WindowOutOfDomain { half_width, margin });
    }
    Ok(())
}

pub fn sobolev_norm(kind: NormKind, s: &FieldPair, delta: f64, eta: f64) -> Result<f64> {
    Weight::new(delta, 0.0)?;
    let density = NormDensity::new(s, eta)?;
    sobolev_norm_from_density(kind, &density, delta)
}

pub fn sobolev_norm_from_density(kind: NormKind, density: &NormDensity, delta: f64) -> Result<f64> {
    let grid = density.grid;
    let sup = |centres: Vec<f64>, second: bool| {
        centres
            .into_iter()
            .map(|xi| {
                if second {
                    density.h2_squared(delta, xi)
                } else {
                    density.h1_squared(delta, xi)
                }
            })
            .fold(0.0, f64::max)
    };
    let squared = match kind {
        NormKind::H1 => density.h1_squared(delta, 0.0),
        NormKind::H2 => density.h2_squared(delta, 0.0),
        NormKind::Loc1 => sup(centre_grid(grid.x_min(), grid.x_max(), delta), false),
        NormKind::Loc2 => sup(centre_grid(grid.x_min(), grid.x_max(), delta), true),
        NormKind::Windowed { half_width } => {
            check_window(&grid, half_width, delta)?;
            sup(centre_grid(-half_width, half_width, delta), true)
        }
    };
    Ok(squared.max(0.0).sqrt())
}

/// `max(sup |f|, sup |f'|)`, restricted to `window` when given.
pub fn w1inf_norm(f: &Field, window: Option<Interval>, scheme: DiffScheme) -> Result<f64> {
    let df = differentiate(f, 1, scheme)?;
    Ok(match window {
        Some(w) => f.max_abs_in(w).max(df.max_abs_in(w)),
        None => f.max_abs().max(df.max_abs()),
    })
}

/// `V(x) = η² x²/4 - x²/4 + x⁴/8`, the potential in the coercive functional.
pub fn coercive_potential(x: f64, eta: f64) -> f64 {
    let x2 = x * x;
    eta * eta * x2 / 4.0 - x2 / 4.0 + x2 * x2 / 8.0
}

/// `min_x V(x)`, attained at `x² = 1 - η²`.
pub fn coercive_potential_min(eta: f64) -> f64 {
    let x2 = 1.0 - eta * eta;
    coercive_potential(x2.sqrt(), eta)
}

/// `α ∫ h_α (η² v² + u'² + V(u) + η² u v)`.
pub fn coercive_f0(s: &FieldPair, p: &ModelParams) -> Result<f64> {
    let e2 = p.eta * p.eta;
    let du = differentiate(&s.u, 1, DiffScheme::Spectral)?;
    let (u, v, du) = (s.u.values(), s.v.values(), du.values());
    let integrand = (0..u.len())
        .map(|i| e2 * v[i] * v[i] + du[i] * du[i] + coercive_potential(u[i], p.eta) + e2 * u[i] * v[i])
        .collect();
    Ok(p.alpha * weighted_at_origin(s.grid(), integrand, p.alpha))
}

/// `α ∫ h_α (η² z² + w'² + η² μ w z)` for the derivative pair `(w, z) = (u', v')`.
pub fn coercive_f1(derivative_pair: &FieldPair, p: &ModelParams) -> Result<f64> {
    let e2 = p.eta * p.eta;
    let dw = differentiate(&derivative_pair.u, 1, DiffScheme::Spectral)?;
    let (w, z, dw) = (derivative_pair.u.values(), derivative_pair.v.values(), dw.values());
    let integrand = (0..w.len())
        .map(|i| e2 * z[i] * z[i] + dw[i] * dw[i] + e2 * p.mu_f1 * w[i] * z[i])
        .collect();
    Ok(p.alpha * weighted_at_origin(derivative_pair.grid(), integrand, p.alpha))
}

/// Coefficients of `∫h z²` and `∫h w'²` in the derivative-functional decay
/// estimate; both must be positive for that estimate to close.
pub fn f1_sign_coefficients(p: &ModelParams, potential_curvature_bound: f64) -> (f64, f64) {
    let (a, m, e2) = (p.alpha, p.mu_f1, p.eta * p.eta);
    let z = 1.0 - e2 * m / 2.0 - a - m / 2.0 - a * potential_curvature_bound;
    let w = m / 2.0 - a * m / 2.0 - a;
    (z, w)
}

fn weighted_at_origin(grid: &Grid, integrand: Vec<f64>, delta: f64) -> f64 {
    let f = Field::from_raw(*grid, integrand);
    crate::field::weighted_integral(&f, &Weight { delta, xi: 0.0 })
}

/// `‖s‖²_{h_δ,2} + η² γ ∫ h_δ (u v + u' v')`.
pub fn functional_j(s: &FieldPair, delta: f64, gamma: f64, eta: f64) -> Result<f64> {
    let (norm_sq, cross) = j_parts(s, delta, eta)?;
    Ok(norm_sq + eta * eta * gamma * cross)
}

/// `(‖s‖²_{h_δ,2}, ∫ h_δ (u v + u' v'))`.
pub fn j_parts(s: &FieldPair, delta: f64, eta: f64) -> Result<(f64, f64)> {
    Weight::new(delta, 0.0)?;
    let density = NormDensity::new(s, eta)?;
    let du = differentiate(&s.u, 1, DiffScheme::Spectral)?;
    let dv = differentiate(&s.v, 1, DiffScheme::Spectral)?;
    let (u, v, du, dv) = (s.u.values(), s.v.values(), du.values(), dv.values());
    let cross = (0..u.len()).map(|i| u[i] * v[i] + du[i] * dv[i]).collect();
    Ok((
        density.h2_squared(delta, 0.0),
        weighted_at_origin(s.grid(), cross, delta),
    ))
}

/// Budget bounding the mixed term of the decay functional:
/// `∫ h_δ (½(u'² + u''²) + ⅛(v² + v'²))`.
pub fn mixed_term_budget(s: &FieldPair, delta: f64) -> Result<f64> {
    let du = differentiate(&s.u, 1, DiffScheme::Spectral)?;
    let ddu = differentiate(&s.u, 2, DiffScheme::Spectral)?;
    let dv = differentiate(&s.v, 1, DiffScheme::Spectral)?;
    let (v, du, ddu, dv) = (s.v.values(), du.values(), ddu.values(), dv.values());
    let integrand = (0..v.len())
        .map(|i| 0.5 * (du[i] * du[i] + ddu[i] * ddu[i]) + 0.125 * (v[i] * v[i] + dv[i] * dv[i]))
        .collect();
    Ok(weighted_at_origin(s.grid(), integrand, delta))
}

/// Decay rate guaranteed for the high-frequency functional:
/// `min(η⁻², k*² / c_nu) / 320`.
pub fn gamma_decay(eta: f64, k_star: f64, c_nu: f64) -> f64 {
    (1.0 / (eta * eta)).min(k_star * k_star / c_nu) / 320.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `dF/dt <= -a F + b`, fitted on difference quotients.
    AffineOde,
    /// `F(t) ≈ F(0) e^{-a t}`, fitted on `log F`.
    PureExponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    pub rate: f64,
    /// `b` for the affine model, `log F(0)` for the exponential one.
    pub offset: f64,
    /// Affine model: fraction of steps violating `dF/dt <= -a F + b`.
    /// Exponential model: RMS residual of `log F`.
    pub residual: f64,
    pub window: (f64, f64),
}

/// Slack added to the least-squares offset, in residual standard deviations.
pub const AFFINE_SLACK_SIGMAS: f64 = 3.0;

pub fn fit_decay_rate(times: &[f64], values: &[f64], model: DecayModel) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "need at least 8 paired samples, got {} times and {} values",
            times.len(),
            values.len()
        )));
    }
    if values.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series contains non-finite entries".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must be strictly increasing".into()));
    }
    let window = (times[0], *times.last().unwrap());
    let zero = DecayFit { model, rate: 0.0, offset: 0.0, residual: 0.0, window };
    match model {
        DecayModel::AffineOde => {
            let mut mids = Vec::with_capacity(times.len() - 1);
            let mut slopes = Vec::with_capacity(times.len() - 1);
            for i in 0..times.len() - 1 {
                let dt = times[i + 1] - times[i];
                mids.push(0.5 * (values[i] + values[i + 1]));
                slopes.push((values[i + 1] - values[i]) / dt);
            }
            let Some((slope, intercept)) = least_squares(&mids, &slopes) else {
                // a constant series: dF/dt = 0 = -a F + a F for any a; report a = 0
                return Ok(zero);
            };
            let rate = -slope;
            let residuals: Vec<f64> = mids
                .iter()
                .zip(&slopes)
                .map(|(m, d)| d - (slope * m + intercept))
                .collect();
            let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
            let offset = intercept + AFFINE_SLACK_SIGMAS * rms;
            let tol = 1e-12 * (1.0 + offset.abs());
            let violations = mids
                .iter()
                .zip(&slopes)
                .filter(|(m, d)| **d > -rate * **m + offset + tol)
                .count();
            Ok(DecayFit {
                model,
                rate,
                offset,
                residual: violations as f64 / mids.len() as f64,
                window,
            })
        }
        DecayModel::PureExponential => {
            let (ts, logs): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(values)
                .filter(|(_, v)| **v > 0.0)
                .map(|(t, v)| (*t, v.ln()))
                .unzip();
            if ts.len() < 2 {
                return Ok(zero);
            }
            let Some((slope, intercept)) = least_squares(&ts, &logs) else {
                return Ok(zero);
            };
            let rms = (ts
                .iter()
                .zip(&logs)
                .map(|(t, l)| (l - slope * t - intercept).powi(2))
                .sum::<f64>()
                / ts.len() as f64)
                .sqrt();
            Ok(DecayFit { model, rate: -slope, offset: intercept, residual: rms, window })
        }
    }
}

/// Ordinary least squares `y ≈ slope x + intercept`; `None` when `x` is constant.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let scale = x.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1e-300);
    if sxx <= 1e-24 * scale * scale * n {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
