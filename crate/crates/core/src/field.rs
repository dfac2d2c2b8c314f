//! Periodic uniform grids, sampled fields and the polynomial weight family.

use std::ops::{Add, Mul, Sub};

use realfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

/// Uniform periodic grid on `[x_min, x_max)` with `n` points; `x_max` is
/// identified with `x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "point count must be even and at least 8, got {n}"
            )));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Symmetric grid on `[-half_width, half_width)`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn period(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.period() / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Largest resolved angular wavenumber.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    /// Displacement `x - xi` reduced to the nearest periodic image.
    pub fn periodic_offset(&self, x: f64, xi: f64) -> f64 {
        let p = self.period();
        let d = x - xi;
        d - p * (d / p).round()
    }

    /// Indices of grid points lying in the closed interval.
    pub fn indices_in(&self, window: Interval) -> std::ops::Range<usize> {
        let dx = self.dx();
        let tol = 1e-9 * dx;
        let lo = ((window.lo - self.x_min - tol) / dx).ceil().max(0.0) as usize;
        let hi = ((window.hi - self.x_min + tol) / dx).floor() as i64 + 1;
        let hi = hi.clamp(0, self.n as i64) as usize;
        lo.min(hi)..hi
    }

    pub fn contains_interval(&self, window: Interval) -> bool {
        window.lo >= self.x_min && window.hi <= self.x_max
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::InvalidParameter(format!(
                "interval needs lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn centered(half_width: f64) -> Self {
        Self {
            lo: -half_width,
            hi: half_width,
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Real samples of a periodic function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    /// Skips the finiteness scan; callers guarantee finite samples.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_in(&self, window: Interval) -> f64 {
        self.values[self.grid.indices_in(window)]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Field, f: F) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Plain trapezoid integral over one period.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn interpolate(&self, x: f64) -> f64 {
        SpectralInterpolant::new(self).value(x)
    }
}

/// Trigonometric interpolant of a [`Field`], evaluable with derivatives at
/// arbitrary points.
#[derive(Debug, Clone)]
pub struct SpectralInterpolant {
    x_min: f64,
    n: usize,
    /// `(k, c_k)` for the non-negative bins, already scaled by `1/n` and
    /// doubled where the conjugate bin is implied.
    modes: Vec<(f64, Complex64)>,
}

impl SpectralInterpolant {
    pub fn new(f: &Field) -> Self {
        let n = f.grid.len();
        let dx = f.grid.dx();
        let modes = fft::forward(&f.values)
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                let weight = if j == 0 || j == n / 2 { 1.0 } else { 2.0 };
                (fft::wavenumber(j, n, dx), c * (weight / n as f64))
            })
            .collect();
        Self { x_min: f.grid.x_min(), n, modes }
    }

    /// Value and first two derivatives at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let t = x - self.x_min;
        let mut out = [0.0; 3];
        for (j, (k, c)) in self.modes.iter().enumerate() {
            let e = c * Complex64::from_polar(1.0, k * t);
            out[0] += e.re;
            // the Nyquist cosine has no resolved odd derivative
            if j != self.n / 2 {
                out[1] -= k * e.im;
            }
            out[2] -= k * k * e.re;
        }
        out
    }

    pub fn value(&self, x: f64) -> f64 {
        let t = x - self.x_min;
        self.modes
            .iter()
            .map(|(k, c)| (c * Complex64::from_polar(1.0, k * t)).re)
            .sum()
    }
}

impl Add<&Field> for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b).expect("fields share a grid")
    }
}

impl Sub<&Field> for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b).expect("fields share a grid")
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|v| v * rhs)
    }
}

/// Phase-space state: displacement `u` and velocity `v` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u: Field,
    pub v: Field,
}

impl FieldPair {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        u.check_same_grid(&v)?;
        Ok(Self { u, v })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            u: Field::zeros(grid),
            v: Field::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn difference(&self, other: &FieldPair) -> Result<FieldPair> {
        Ok(FieldPair {
            u: self.u.zip_map(&other.u, |a, b| a - b)?,
            v: self.v.zip_map(&other.v, |a, b| a - b)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    #[default]
    Spectral,
    /// Fourth-order central differences with periodic wrap.
    FiniteDifference4,
}

/// Derivative of order 1 or 2.
pub fn differentiate(f: &Field, order: u32, scheme: DiffScheme) -> Result<Field> {
    let dx = f.grid().dx();
    let n = f.grid().len();
    let values = match (scheme, order) {
        (DiffScheme::Spectral, 1) => fft::apply_multiplier(f.values(), dx, |k| {
            // the Nyquist bin of an odd derivative is dropped
            if (k - f.grid().nyquist()).abs() < 1e-9 * k {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            }
        }),
        (DiffScheme::Spectral, 2) => {
            fft::apply_multiplier(f.values(), dx, |k| Complex64::new(-k * k, 0.0))
        }
        (DiffScheme::FiniteDifference4, 1) => {
            let v = f.values();
            let c = 1.0 / (12.0 * dx);
            (0..n)
                .map(|i| {
                    let at = |o: isize| v[(i as isize + o).rem_euclid(n as isize) as usize];
                    c * (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2))
                })
                .collect()
        }
        (DiffScheme::FiniteDifference4, 2) => {
            let mut out = vec![0.0; n];
            laplacian_fd4(f.values(), dx, &mut out);
            out
        }
        (_, order) => {
            return Err(Error::InvalidParameter(format!(
                "derivative order must be 1 or 2, got {order}"
            )))
        }
    };
    Ok(Field::from_raw(*f.grid(), values))
}

/// Fourth-order periodic second difference written into `out`.
pub(crate) fn laplacian_fd4(v: &[f64], dx: f64, out: &mut [f64]) {
    let n = v.len();
    let c = 1.0 / (12.0 * dx * dx);
    let stencil = |a: f64, b: f64, m: f64, d: f64, e: f64| c * (-a + 16.0 * b - 30.0 * m + 16.0 * d - e);
    for i in 2..n - 2 {
        out[i] = stencil(v[i - 2], v[i - 1], v[i], v[i + 1], v[i + 2]);
    }
    for i in [0, 1, n - 2, n - 1] {
        let at = |o: isize| v[(i as isize + o).rem_euclid(n as isize) as usize];
        out[i] = stencil(at(-2), at(-1), at(0), at(1), at(2));
    }
}

/// `h(x) = 1 / (1 + delta^2 (x - xi)^2)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub delta: f64,
    pub xi: f64,
}

impl Weight {
    pub fn new(delta: f64, xi: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) || !xi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight needs 0 < delta <= 1/2 and finite centre, got delta = {delta}, xi = {xi}"
            )));
        }
        Ok(Self { delta, xi })
    }

    pub fn eval(&self, x: f64) -> f64 {
        weight_at_offset(self.delta, x - self.xi)
    }

    /// `h'/h` at `x`; bounded by `2 delta` in absolute value.
    pub fn log_derivative(&self, x: f64) -> f64 {
        let d = x - self.xi;
        let s = self.delta * self.delta;
        -4.0 * s * d / (1.0 + s * d * d)
    }

    /// Weight sampled on a periodic grid at the nearest image of the centre.
    pub fn profile(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| weight_at_offset(self.delta, grid.periodic_offset(grid.x(i), self.xi)))
            .collect()
    }
}

#[inline]
pub(crate) fn weight_at_offset(delta: f64, d: f64) -> f64 {
    let q = 1.0 + delta * delta * d * d;
    1.0 / (q * q)
}

/// `∫ h f dx` by the trapezoid rule over one period.
pub fn weighted_integral(f: &Field, w: &Weight) -> f64 {
    let grid = f.grid();
    let dx = grid.dx();
    f.values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * weight_at_offset(w.delta, grid.periodic_offset(grid.x(i), w.xi)))
        .sum::<f64>()
        * dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_odd_or_tiny_counts() {
        assert!(Grid::new(-1.0, 1.0, 7).is_err());
        assert!(Grid::new(-1.0, 1.0, 6).is_err());
        assert!(Grid::new(1.0, -1.0, 16).is_err());
        let g = Grid::new(-40.0, 40.0, 4096).unwrap();
        assert_eq!(g.dx(), 80.0 / 4096.0);
    }

    #[test]
    fn fd4_second_derivative_is_exact_for_quadratics_in_the_interior() {
        let g = Grid::new(-1.0, 1.0, 64).unwrap();
        let f = Field::from_fn(g, |x| x * x).unwrap();
        let d2 = differentiate(&f, 2, DiffScheme::FiniteDifference4).unwrap();
        for i in 3..61 {
            assert!((d2.values()[i] - 2.0).abs() < 1e-6, "i = {i}");
        }
    }

    #[test]
    fn spectral_derivatives_of_a_mode() {
        let g = Grid::new(0.0, 2.0 * PI, 64).unwrap();
        let f = Field::from_fn(g, |x| (3.0 * x).sin()).unwrap();
        let d1 = differentiate(&f, 1, DiffScheme::Spectral).unwrap();
        let d2 = differentiate(&f, 2, DiffScheme::Spectral).unwrap();
        for (i, x) in g.points().into_iter().enumerate() {
            assert!((d1.values()[i] - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
            assert!((d2.values()[i] + 9.0 * (3.0 * x).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn weight_integral_approaches_closed_form() {
        // ∫_R h = π / (2 delta); the periodic tail is O((delta X)^-3)
        let g = Grid::new(-40.0, 40.0, 4096).unwrap();
        let one = Field::from_fn(g, |_| 1.0).unwrap();
        let w = Weight::new(0.25, 0.0).unwrap();
        let exact = PI / (2.0 * 0.25);
        let got = weighted_integral(&one, &w);
        let tail = 2.0 / (3.0 * 0.25f64.powi(4) * 40.0f64.powi(3));
        assert!((got - exact).abs() <= 1.2 * tail, "{got} vs {exact}");
    }

    #[test]
    fn weight_log_derivative_bounded_by_two_delta() {
        let w = Weight::new(0.3, 1.5).unwrap();
        let peak = (-50..=50)
            .map(|i| w.log_derivative(1.5 + i as f64 * 0.1).abs())
            .fold(0.0, f64::max);
        assert!(peak <= 2.0 * 0.3 + 1e-12);
        // attained at |x - xi| = 1/delta
        assert!((w.log_derivative(1.5 + 1.0 / 0.3).abs() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_band_limited_fields() {
        let g = Grid::new(-PI, PI, 32).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * x).cos() + 0.5 * x.sin()).unwrap();
        let x = 0.3217;
        assert!((f.interpolate(x) - ((2.0 * x).cos() + 0.5 * x.sin())).abs() < 1e-12);
    }

    #[test]
    fn window_indices_are_inclusive() {
        let g = Grid::new(-4.0, 4.0, 16).unwrap();
        let r = g.indices_in(Interval::new(-1.0, 1.0).unwrap());
        let xs: Vec<f64> = r.map(|i| g.x(i)).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
