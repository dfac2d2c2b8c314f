//! Band-limited functions: Bernstein-class certificates, the Cartwright
//! interpolation formula, truncated sampling and its remainder, and covers
//! built by quantizing sample values.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{differentiate, weight_at_offset, DiffScheme, Field, Grid, SpectralInterpolant};
use crate::functionals::centre_grid;

/// Below this `|t|` the kernel and its derivatives come from their Taylor series.
const SERIES_THRESHOLD: f64 = 1e-2;

/// Taylor coefficients of `K(t) = sin(4t) sin(t) / (4t²) = Σ c_m t^{2m}`.
fn kernel_series() -> [f64; 7] {
    // sin(4t) sin(t) = (cos 3t - cos 5t) / 2
    let mut c = [0.0; 7];
    let mut fact = 1.0;
    for m in 1..=7usize {
        fact *= ((2 * m - 1) * (2 * m)) as f64;
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        let num = 25f64.powi(m as i32) - 9f64.powi(m as i32);
        c[m - 1] = sign * num / (8.0 * fact);
    }
    c
}

/// `K(t) = sin(4t) sin(t) / (4t²)` with `K'` and `K''`.
pub fn cartwright_kernel(t: f64) -> [f64; 3] {
    if t.abs() < SERIES_THRESHOLD {
        let c = kernel_series();
        let t2 = t * t;
        let (mut k, mut dk, mut ddk) = (c[0], 0.0, 0.0);
        // running powers t^{2m}, t^{2m-1}, t^{2m-2}
        let (mut even, mut odd, mut lower) = (t2, t, 1.0);
        for (m, cm) in c.iter().enumerate().skip(1) {
            let m2 = 2.0 * m as f64;
            k += cm * even;
            dk += m2 * cm * odd;
            ddk += m2 * (m2 - 1.0) * cm * lower;
            even *= t2;
            odd *= t2;
            lower *= t2;
        }
        return [k, dk, ddk];
    }
    let (s4, c4) = (4.0 * t).sin_cos();
    let (s1, c1) = t.sin_cos();
    let a = s4 * s1;
    let da = 4.0 * c4 * s1 + s4 * c1;
    let dda = -17.0 * s4 * s1 + 8.0 * c4 * c1;
    let t2 = t * t;
    [
        a / (4.0 * t2),
        da / (4.0 * t2) - a / (2.0 * t2 * t),
        dda / (4.0 * t2) - da / (t2 * t) + 1.5 * a / (t2 * t2),
    ]
}

/// Samples `f(x_j)` at `x_j = jπ/(2σ)`, `|j| <= J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub sigma: f64,
    pub j_max: usize,
    /// `values[J + j] = f(x_j)`.
    pub values: Vec<f64>,
}

pub const RELIABLE_ZONE_SAFETY: f64 = 0.5;

impl SampleSet {
    pub fn from_fn(sigma: f64, j_max: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")));
        }
        let mut s = Self { sigma, j_max, values: vec![] };
        s.values = (0..s.len()).map(|i| f(s.point_at(i))).collect();
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample value".into()));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        2 * self.j_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn k_star(&self) -> f64 {
        self.sigma / 2.0
    }

    pub fn spacing(&self) -> f64 {
        PI / (2.0 * self.sigma)
    }

    pub fn point(&self, j: i64) -> f64 {
        j as f64 * self.spacing()
    }

    fn point_at(&self, i: usize) -> f64 {
        self.point(i as i64 - self.j_max as i64)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point_at(i)).collect()
    }

    /// Half-width of the zone where reconstruction is trusted.
    pub fn reliable_half_width(&self) -> f64 {
        RELIABLE_ZONE_SAFETY * self.j_max as f64 * self.spacing()
    }

    /// Copy with different sample values on the same nodes.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.len());
        Self { sigma: self.sigma, j_max: self.j_max, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub value: f64,
    /// False when `x` lies outside the reliable zone.
    pub reliable: bool,
}

/// Value and first two derivatives of `Σ_j K(σx/2 - πj/4) f(x_j)`.
pub fn cartwright_eval(s: &SampleSet, x: f64) -> [f64; 3] {
    let half_sigma = s.sigma / 2.0;
    let mut out = [0.0; 3];
    for (i, &v) in s.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let j = i as f64 - s.j_max as f64;
        let k = cartwright_kernel(half_sigma * x - PI * j / 4.0);
        out[0] += k[0] * v;
        out[1] += k[1] * half_sigma * v;
        out[2] += k[2] * half_sigma * half_sigma * v;
    }
    out
}

pub fn cartwright_reconstruct(s: &SampleSet, x: f64) -> Reconstruction {
    Reconstruction {
        value: cartwright_eval(s, x)[0],
        reliable: x.abs() <= s.reliable_half_width(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinCert {
    pub sigma: f64,
    /// Bound on `sup |f|` over the line; for a function of exponential type
    /// σ bounded on the real axis this is the class constant.
    pub k_bound: f64,
    /// Spectral energy fraction at `|k| > sigma`.
    pub residual_mass: f64,
}

pub fn bernstein_check(f: &Field, sigma: f64) -> BernsteinCert {
    let n = f.grid().len();
    let dx = f.grid().dx();
    let spec = fft::forward(f.values());
    let (mut outside, mut total) = (0.0, 0.0);
    for (j, c) in spec.iter().enumerate() {
        let e = c.norm_sqr() * if j == 0 || j == n / 2 { 1.0 } else { 2.0 };
        total += e;
        if fft::wavenumber(j, n, dx) > sigma * (1.0 + 1e-12) {
            outside += e;
        }
    }
    BernsteinCert {
        sigma,
        k_bound: f.max_abs(),
        residual_mass: if total == 0.0 { 0.0 } else { outside / total },
    }
}

/// Maximum spectral mass beyond `2k*` accepted by [`truncated_sampler`].
pub const BAND_LIMIT_TOLERANCE: f64 = 1e-6;

/// `S_L f`: samples at `x_j = jπ/(4k*)` for `|j| <= 2Lk*`.
pub fn truncated_sampler(f: &Field, k_star: f64, half_width: f64) -> Result<SampleSet> {
    if !(k_star > 0.0 && half_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need k_star > 0 and L > 0, got {k_star}, {half_width}"
        )));
    }
    let sigma = 2.0 * k_star;
    let cert = bernstein_check(f, sigma);
    if cert.residual_mass > BAND_LIMIT_TOLERANCE {
        return Err(Error::OutsideClass(format!(
            "{:.3e} of the spectral energy lies beyond 2k* = {sigma}",
            cert.residual_mass
        )));
    }
    let j_max = (2.0 * half_width * k_star + 1e-9).floor() as usize;
    let reach = j_max as f64 * PI / sigma / 2.0;
    let g = f.grid();
    if -reach < g.x_min() || reach >= g.x_max() {
        return Err(Error::InvalidParameter(format!(
            "sampling points reach ±{reach}, outside the grid [{}, {})",
            g.x_min(),
            g.x_max()
        )));
    }
    let interp = SpectralInterpolant::new(f);
    SampleSet::from_fn(sigma, j_max, |x| interp.value(x))
}

/// Value and derivatives of the reconstruction on every grid point.
pub fn reconstruct_on_grid(s: &SampleSet, grid: &Grid) -> [Vec<f64>; 3] {
    let mut out = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
    for i in 0..grid.len() {
        let r = cartwright_eval(s, grid.x(i));
        for d in 0..3 {
            out[d][i] = r[d];
        }
    }
    out
}

/// `(∫ h_{δ,ξ} (r² + 2r'² + r''²))^{1/2}` for each centre.
fn h2_profile(grid: &Grid, r: &[Vec<f64>; 3], delta: f64, xis: &[f64]) -> Vec<f64> {
    let density: Vec<f64> = (0..grid.len())
        .map(|i| r[0][i] * r[0][i] + 2.0 * r[1][i] * r[1][i] + r[2][i] * r[2][i])
        .collect();
    xis.iter()
        .map(|&xi| {
            (density
                .iter()
                .enumerate()
                .map(|(i, d)| d * weight_at_offset(delta, grid.periodic_offset(grid.x(i), xi)))
                .sum::<f64>()
                * grid.dx())
            .sqrt()
        })
        .collect()
}

/// Weighted second-order norm of `f - S_L f` against `h_{δ,ξ}` for each `ξ`.
pub fn remainder_profile(f: &Field, k_star: f64, half_width: f64, xis: &[f64], delta: f64) -> Result<Vec<f64>> {
    let s = truncated_sampler(f, k_star, half_width)?;
    reconstruction_error_profile(f, &s, xis, delta)
}

/// Weighted second-order norm of `f` minus the reconstruction from `s`.
pub fn reconstruction_error_profile(f: &Field, s: &SampleSet, xis: &[f64], delta: f64) -> Result<Vec<f64>> {
    let grid = *f.grid();
    let rec = reconstruct_on_grid(s, &grid);
    let d1 = differentiate(f, 1, DiffScheme::Spectral)?;
    let d2 = differentiate(f, 2, DiffScheme::Spectral)?;
    let exact = [f.values(), d1.values(), d2.values()];
    let r: [Vec<f64>; 3] = std::array::from_fn(|d| (0..grid.len()).map(|i| exact[d][i] - rec[d][i]).collect());
    Ok(h2_profile(&grid, &r, delta, xis))
}

/// Upper bound `C` with `sup_ξ ‖S q‖_{h_{δ,ξ},2} <= C max_j |q_j|` over centres
/// `|ξ| <= half_width`, from the triangle inequality on the kernel translates.
pub fn sampling_norm_constant(template: &SampleSet, grid: &Grid, delta: f64, half_width: f64) -> Vec<f64> {
    let xis = centre_grid(-half_width, half_width, delta);
    let mut totals = vec![0.0; xis.len()];
    for i in 0..template.len() {
        let mut unit = vec![0.0; template.len()];
        unit[i] = 1.0;
        let r = reconstruct_on_grid(&template.with_values(unit), grid);
        for (t, v) in totals.iter_mut().zip(h2_profile(grid, &r, delta, &xis)) {
            *t += v;
        }
    }
    totals
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCover {
    pub step: f64,
    /// Distinct quantization cells, as integer multiples of `step`.
    pub cells: Vec<Vec<i64>>,
    /// Cell index of each input sample set.
    pub assignment: Vec<usize>,
}

impl QuantizedCover {
    pub fn count(&self) -> usize {
        self.cells.len()
    }

    /// Cell centre as a sample set on the template's nodes.
    pub fn representative(&self, template: &SampleSet, cell: usize) -> SampleSet {
        template.with_values(self.cells[cell].iter().map(|&q| q as f64 * self.step).collect())
    }

    /// `ln` of the proof's cardinality bound `(8 n_quant c)^{#points}`.
    pub fn log_count_bound(points: usize, n_quant: usize, c: f64) -> f64 {
        points as f64 * (8.0 * n_quant as f64 * c).ln()
    }
}

/// Rounds every sample value to the grid `eps/(4 n_quant) Z`; sets in the
/// same cell share a representative.
pub fn quantized_sample_cover(samples: &[SampleSet], eps: f64, n_quant: usize) -> Result<QuantizedCover> {
    if !(eps > 0.0) || n_quant == 0 {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0 and n_quant >= 1, got {eps}, {n_quant}"
        )));
    }
    if let Some(first) = samples.first() {
        if samples.iter().any(|s| s.j_max != first.j_max || s.sigma != first.sigma) {
            return Err(Error::InvalidParameter("sample sets must share their nodes".into()));
        }
    }
    let step = eps / (4.0 * n_quant as f64);
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut cells = Vec::new();
    let mut assignment = Vec::with_capacity(samples.len());
    for s in samples {
        let key: Vec<i64> = s.values.iter().map(|v| (v / step).round() as i64).collect();
        let id = *index.entry(key.clone()).or_insert_with(|| {
            cells.push(key);
            cells.len() - 1
        });
        assignment.push(id);
    }
    Ok(QuantizedCover { step, cells, assignment })
}
