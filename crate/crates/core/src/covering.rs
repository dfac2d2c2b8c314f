//! Explicit `W^{1,∞}` covers: slope-quantized local lines, the two-sided
//! piecewise-linear march, bridge gluing between boundary data, merge
//! certificates for adjacent windows, and greedy empirical cover counts.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{differentiate, DiffScheme, Field, Grid, Interval, SpectralInterpolant};
use crate::spectral::smooth_step;

/// Lower end of the admissible half-window range; the upper end is one step more.
pub const MIN_HALF_WINDOW: f64 = 40.0;

/// Width of the ramp used by [`bridge_glue`].
pub const RAMP_WIDTH: f64 = 3.0;

/// Probe points per march step when measuring the achieved errors.
const STEP_PROBES: usize = 8;

/// Slack for floating-point rounding in the certified inequalities.
const CERT_TOL: f64 = 1e-12;

/// Bounds describing the class of `C²` functions on `[-R, R]` with
/// `|f(±R)| <= endpoint_bound`, `|f| <= value_bound`, `|f'| <= slope_bound`
/// and `|f''| <= curvature_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionClassBounds {
    pub eps: f64,
    pub value_bound: f64,
    pub slope_bound: f64,
    pub curvature_bound: f64,
    pub half_window: f64,
    pub endpoint_bound: f64,
}

impl FunctionClassBounds {
    /// Picks the half-window as the smallest multiple of the step that is at
    /// least [`MIN_HALF_WINDOW`]. The endpoint bound defaults to `eps`.
    pub fn new(eps: f64, value_bound: f64, slope_bound: f64, curvature_bound: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("cover radius must lie in (0, 1], got {eps}")));
        }
        if !(eps <= value_bound) {
            return Err(Error::InvalidParameter(format!(
                "cover radius {eps} exceeds the value bound {value_bound}"
            )));
        }
        if !(slope_bound >= 0.0 && slope_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("slope bound must be finite and >= 0, got {slope_bound}")));
        }
        if !(curvature_bound >= 1.0 && curvature_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("curvature bound must be >= 1, got {curvature_bound}")));
        }
        let step = eps / (10.0 * curvature_bound);
        let steps = (MIN_HALF_WINDOW / step - 1e-9).ceil();
        Ok(Self {
            eps,
            value_bound,
            slope_bound,
            curvature_bound,
            half_window: steps * step,
            endpoint_bound: eps,
        })
    }

    pub fn with_endpoint_bound(mut self, endpoint_bound: f64) -> Result<Self> {
        if !(0.0..=self.eps).contains(&endpoint_bound) {
            return Err(Error::InvalidParameter(format!(
                "endpoint bound must lie in [0, eps], got {endpoint_bound}"
            )));
        }
        self.endpoint_bound = endpoint_bound;
        Ok(self)
    }

    pub fn scales(&self) -> CoverScales {
        CoverScales::new(self.eps, self.value_bound, self.slope_bound, self.curvature_bound)
    }

    /// Number of steps from `-R` to `0`.
    pub fn steps_per_side(&self) -> usize {
        (self.half_window / self.scales().step).round() as usize
    }

    pub fn window(&self) -> Interval {
        Interval::centered(self.half_window)
    }

    /// `ln (2 n* + 1)^(2 m* - 1)`, the log size of the piecewise-linear grid family.
    pub fn log_grid_family_size(&self) -> f64 {
        let levels = self.scales().value_levels as f64;
        (2.0 * self.steps_per_side() as f64 - 1.0) * (2.0 * levels + 1.0).ln()
    }
}

/// The discretization scales of the piecewise-linear cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverScales {
    pub eps: f64,
    /// Breakpoint spacing `eps / (10 C)`.
    pub step: f64,
    /// Slope quantum `eps / 10`.
    pub slope_quantum: f64,
    /// Value quantum `step · slope_quantum`.
    pub value_quantum: f64,
    /// Residual floor coefficient `1 / (40 C)`.
    pub residual_floor: f64,
    /// Per-step gain coefficient `1 / (200 C)`.
    pub gain: f64,
    /// `⌈A / value_quantum⌉ + 1`.
    pub value_levels: i64,
    pub slope_bound: f64,
}

impl CoverScales {
    pub fn new(eps: f64, value_bound: f64, slope_bound: f64, curvature_bound: f64) -> Self {
        let step = eps / (10.0 * curvature_bound);
        let slope_quantum = eps / 10.0;
        let value_quantum = step * slope_quantum;
        Self {
            eps,
            step,
            slope_quantum,
            value_quantum,
            residual_floor: 1.0 / (40.0 * curvature_bound),
            gain: 1.0 / (200.0 * curvature_bound),
            value_levels: (value_bound / value_quantum - 1e-9).ceil() as i64 + 1,
            slope_bound,
        }
    }

    /// `eps² · residual_floor`, the smallest residual the march guarantees.
    pub fn floor(&self) -> f64 {
        self.eps * self.eps * self.residual_floor
    }

    /// Largest slope index a class member can select.
    pub fn max_slope_index(&self) -> f64 {
        self.slope_bound / self.slope_quantum + 2.0
    }
}

/// The line chosen for one step together with its certified endpoint residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLine {
    /// Slope in units of the slope quantum.
    pub index: i64,
    pub slope: f64,
    /// Certified bound on `|f(step) - line(step)|`.
    pub endpoint_bound: f64,
}

/// Chooses the quantized line `x ↦ j τ x` approximating a function that starts
/// at `f0` with slope `f_slope`, given `|f0| <= delta_in`. For `f0 >= 0`,
/// `j = ⌊f_slope/τ + 2⌋ = f_slope/τ + 1 + ρ` with `ρ ∈ (0, 1]`; negative
/// starts are mirrored.
pub fn one_step_line(f0: f64, f_slope: f64, delta_in: f64, scales: &CoverScales) -> Result<StepLine> {
    let (sign, slope) = if f0 >= 0.0 { (1, f_slope) } else { (-1, -f_slope) };
    let index = sign * (slope / scales.slope_quantum + 2.0).floor() as i64;
    if index.abs() as f64 > scales.max_slope_index() + 1e-9 {
        return Err(Error::InvariantViolated(format!(
            "slope index {index} exceeds the admissible range ±{:.3}",
            scales.max_slope_index()
        )));
    }
    let eps2 = scales.eps * scales.eps;
    Ok(StepLine {
        index,
        slope: index as f64 * scales.slope_quantum,
        endpoint_bound: (delta_in - scales.gain * eps2).max(scales.floor()),
    })
}

/// Continuous piecewise-linear function with breakpoints `origin + m·step`
/// and node values that are integer multiples of `value_quantum`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLFunction {
    pub origin: f64,
    pub step: f64,
    pub value_quantum: f64,
    pub levels: Vec<i64>,
}

impl PLFunction {
    pub fn breakpoints(&self) -> Vec<f64> {
        (0..self.levels.len()).map(|m| self.origin + m as f64 * self.step).collect()
    }

    pub fn node_values(&self) -> Vec<f64> {
        self.levels.iter().map(|&l| l as f64 * self.value_quantum).collect()
    }

    pub fn end(&self) -> f64 {
        self.origin + (self.levels.len() - 1) as f64 * self.step
    }

    pub fn endpoint_zero(&self) -> bool {
        self.levels.first() == Some(&0) && self.levels.last() == Some(&0)
    }

    pub fn max_level(&self) -> i64 {
        self.levels.iter().map(|l| l.abs()).max().unwrap_or(0)
    }

    /// Value and slope at `x`; the right-hand segment is used at breakpoints.
    /// Outside the breakpoint range the function is extended by its end values
    /// with zero slope.
    pub fn eval(&self, x: f64) -> [f64; 2] {
        let last = self.levels.len() - 1;
        let t = (x - self.origin) / self.step;
        if t < 0.0 {
            return [self.levels[0] as f64 * self.value_quantum, 0.0];
        }
        if t > last as f64 {
            return [self.levels[last] as f64 * self.value_quantum, 0.0];
        }
        let m = (t.floor() as usize).min(last - 1);
        let (a, b) = (self.levels[m], self.levels[m + 1]);
        let slope = (b - a) as f64 * self.value_quantum / self.step;
        let value = a as f64 * self.value_quantum + slope * (x - self.origin - m as f64 * self.step);
        [value, slope]
    }

    pub fn to_field(&self, grid: &Grid) -> Result<Field> {
        Field::from_fn(*grid, |x| self.eval(x)[0])
    }
}

/// What one march step chose and what it achieved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub start: f64,
    pub line: StepLine,
    /// The bound on `|f - h|` assumed at the start of the step.
    pub delta_in: f64,
    pub value_error: f64,
    pub slope_error: f64,
    pub endpoint_error: f64,
}

impl StepRecord {
    /// Whether the step meets the local-line guarantees.
    pub fn within_bounds(&self, scales: &CoverScales) -> bool {
        self.value_error <= self.delta_in.max(scales.floor()) + CERT_TOL
            && self.slope_error <= 0.3 * scales.eps + CERT_TOL
            && self.endpoint_error <= self.line.endpoint_bound + CERT_TOL
    }
}

/// Errors on the closing segment `[0, step]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureRecord {
    pub value_error: f64,
    pub slope_error: f64,
}

/// The atom selected for one function and the full step history.
#[derive(Debug, Clone, PartialEq)]
pub struct MarchReport {
    pub atom: PLFunction,
    /// Steps from `-R` towards `0`, in order.
    pub left_steps: Vec<StepRecord>,
    /// Steps from `R` towards `step`, in the marching order, with positions
    /// and slopes expressed in the reflected coordinate.
    pub right_steps: Vec<StepRecord>,
    pub closure: ClosureRecord,
    /// `|f(0) - h(0)|`.
    pub left_residual: f64,
    /// `|f(step) - h(step)|`.
    pub right_residual: f64,
}

impl MarchReport {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.left_steps.iter().chain(&self.right_steps)
    }

    /// Every step within its guarantees.
    pub fn steps_within_bounds(&self, scales: &CoverScales) -> bool {
        self.steps().all(|s| s.within_bounds(scales))
    }

    /// The closing segment keeps `|f - h| <= eps` and `|f' - h'| <= 11 eps / 20`.
    pub fn closure_within_bounds(&self, eps: f64) -> bool {
        self.closure.value_error <= eps + CERT_TOL && self.closure.slope_error <= 0.55 * eps + CERT_TOL
    }
}

/// Runs the local-line construction from the left end of a shifted window
/// over `steps` steps, returning the node levels (starting with 0) and records.
fn march_side<F>(jet: &F, start: f64, steps: usize, delta0: f64, scales: &CoverScales) -> Result<(Vec<i64>, Vec<StepRecord>)>
where
    F: Fn(f64) -> [f64; 2],
{
    let mut levels = Vec::with_capacity(steps + 1);
    let mut records = Vec::with_capacity(steps);
    let mut level = 0i64;
    let mut delta = delta0;
    levels.push(level);
    for m in 0..steps {
        let x0 = start + m as f64 * scales.step;
        let base = level as f64 * scales.value_quantum;
        let [f0, df0] = jet(x0);
        let line = one_step_line(f0 - base, df0, delta, scales)?;
        let mut value_error: f64 = 0.0;
        let mut slope_error: f64 = 0.0;
        for p in 0..=STEP_PROBES {
            let s = scales.step * p as f64 / STEP_PROBES as f64;
            let [f, df] = jet(x0 + s);
            value_error = value_error.max((f - base - line.slope * s).abs());
            slope_error = slope_error.max((df - line.slope).abs());
        }
        level += line.index;
        let [f1, _] = jet(x0 + scales.step);
        let endpoint_error = (f1 - level as f64 * scales.value_quantum).abs();
        records.push(StepRecord {
            start: x0,
            line,
            delta_in: delta,
            value_error,
            slope_error,
            endpoint_error,
        });
        delta = line.endpoint_bound;
        levels.push(level);
    }
    Ok((levels, records))
}

/// Builds the piecewise-linear atom for `f`, given as a value-and-slope jet on
/// `[-R, R]`: a left march from `-R` to `0`, a right march from `R` down to
/// `step` on the reflected function, and a straight segment closing the gap.
pub fn march<F>(jet: F, bounds: &FunctionClassBounds) -> Result<MarchReport>
where
    F: Fn(f64) -> [f64; 2],
{
    let scales = bounds.scales();
    let m_side = bounds.steps_per_side();
    let r = m_side as f64 * scales.step;
    let (left_levels, left_steps) = march_side(&jet, -r, m_side, bounds.endpoint_bound, &scales)?;
    let reflected = |x: f64| {
        let [f, df] = jet(-x);
        [f, -df]
    };
    let (right_levels, right_steps) = march_side(&reflected, -r, m_side - 1, bounds.endpoint_bound, &scales)?;

    let mut levels = left_levels;
    levels.extend(right_levels.iter().rev());
    let atom = PLFunction {
        origin: -r,
        step: scales.step,
        value_quantum: scales.value_quantum,
        levels,
    };

    let mut closure = ClosureRecord {
        value_error: 0.0,
        slope_error: 0.0,
    };
    for p in 0..=STEP_PROBES {
        let x = scales.step * p as f64 / STEP_PROBES as f64;
        let [f, df] = jet(x);
        let [h, dh] = atom.eval(x.min(scales.step * (1.0 - 1e-12)));
        closure.value_error = closure.value_error.max((f - h).abs());
        closure.slope_error = closure.slope_error.max((df - dh).abs());
    }
    let left_residual = (jet(0.0)[0] - atom.eval(0.0)[0]).abs();
    let right_residual = (jet(scales.step)[0] - atom.eval(scales.step)[0]).abs();
    Ok(MarchReport {
        atom,
        left_steps,
        right_steps,
        closure,
        left_residual,
        right_residual,
    })
}

/// `max(sup |f - h|, sup |f' - h'|)` over `[-R, R]`, probed on a uniform
/// subdivision of every segment of `h`.
pub fn w1inf_distance_to_atom<F>(jet: F, atom: &PLFunction) -> f64
where
    F: Fn(f64) -> [f64; 2],
{
    let mut worst: f64 = 0.0;
    for m in 0..atom.levels.len() - 1 {
        let x0 = atom.origin + m as f64 * atom.step;
        for p in 0..STEP_PROBES {
            let x = x0 + atom.step * (p as f64 + 0.5) / STEP_PROBES as f64;
            let [f, df] = jet(x);
            let [h, dh] = atom.eval(x);
            worst = worst.max((f - h).abs()).max((df - dh).abs());
        }
        let [f, _] = jet(x0);
        worst = worst.max((f - atom.eval(x0)[0]).abs());
    }
    worst
}

/// Value-and-slope evaluation of a sampled field by cubic Hermite
/// interpolation of its samples and spectral derivative.
#[derive(Debug, Clone)]
pub struct FieldJet {
    x_min: f64,
    dx: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl FieldJet {
    pub fn new(f: &Field) -> Result<Self> {
        let df = differentiate(f, 1, DiffScheme::Spectral)?;
        Ok(Self {
            x_min: f.grid().x_min(),
            dx: f.grid().dx(),
            values: f.values().to_vec(),
            slopes: df.into_values(),
        })
    }

    pub fn eval(&self, x: f64) -> [f64; 2] {
        let n = self.values.len();
        let t = (x - self.x_min) / self.dx;
        let cell = t.floor();
        let s = t - cell;
        let i = (cell as i64).rem_euclid(n as i64) as usize;
        let j = (i + 1) % n;
        let (p0, p1) = (self.values[i], self.values[j]);
        let (m0, m1) = (self.slopes[i] * self.dx, self.slopes[j] * self.dx);
        let (s2, s3) = (s * s, s * s * s);
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * p1
            + (s3 - s2) * m1;
        let d = (6.0 * s2 - 6.0 * s) * p0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * p1 + (3.0 * s2 - 2.0 * s) * m1;
        [value, d / self.dx]
    }
}

/// How the atoms of a cover are represented.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomFamily {
    /// Listed atoms, e.g. greedy centres.
    Explicit(Vec<Field>),
    /// Every continuous piecewise-linear function on the breakpoint grid of
    /// `bounds` with node levels in `[-n*, n*]` and zero at `±R`.
    PiecewiseLinear(FunctionClassBounds),
    /// The piecewise-linear family shifted by a bridge function.
    Bridged {
        bounds: FunctionClassBounds,
        bridge: Field,
    },
}

/// A family of functions that `eps`-covers a class on `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverAtomSet {
    pub eps: f64,
    pub window: Interval,
    pub family: AtomFamily,
    /// Natural log of the number of atoms.
    pub log_cardinality: f64,
}

impl CoverAtomSet {
    pub fn explicit(atoms: Vec<Field>, eps: f64, window: Interval) -> Self {
        let log_cardinality = (atoms.len() as f64).ln();
        Self {
            eps,
            window,
            family: AtomFamily::Explicit(atoms),
            log_cardinality,
        }
    }

    /// Whether `atom` is one of the piecewise-linear atoms of this family.
    pub fn contains(&self, atom: &PLFunction) -> bool {
        let bounds = match &self.family {
            AtomFamily::PiecewiseLinear(b) | AtomFamily::Bridged { bounds: b, .. } => b,
            AtomFamily::Explicit(_) => return false,
        };
        let scales = bounds.scales();
        atom.endpoint_zero()
            && atom.levels.len() == 2 * bounds.steps_per_side() + 1
            && (atom.origin + bounds.half_window).abs() <= 1e-9 * bounds.half_window
            && (atom.step - scales.step).abs() <= 1e-15
            && atom.max_level() <= scales.value_levels
    }
}

/// The grid family of piecewise-linear atoms vanishing at `±R`. Every member
/// of the class is matched by [`march`], which lands within `eps` in value
/// and slope.
pub fn build_pl_cover(bounds: &FunctionClassBounds) -> Result<CoverAtomSet> {
    if bounds.eps > bounds.value_bound {
        return Err(Error::InvalidParameter(format!(
            "cover radius {} exceeds the value bound {}",
            bounds.eps, bounds.value_bound
        )));
    }
    Ok(CoverAtomSet {
        eps: bounds.eps,
        window: bounds.window(),
        family: AtomFamily::PiecewiseLinear(*bounds),
        log_cardinality: bounds.log_grid_family_size(),
    })
}

/// `ψ(x)`: 0 for `x <= R - 3`, 1 for `x >= R`, smooth in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeRamp {
    pub half_window: f64,
}

impl BridgeRamp {
    pub fn eval(&self, x: f64) -> f64 {
        1.0 - smooth_step((x - (self.half_window - RAMP_WIDTH)) / RAMP_WIDTH)
    }

    /// `(sup |ψ'|, sup |ψ''|)`, by central differences on a fine grid.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let n = 6000;
        let h = RAMP_WIDTH / n as f64;
        let lo = self.half_window - RAMP_WIDTH;
        let (mut d1, mut d2): (f64, f64) = (0.0, 0.0);
        for i in 1..n {
            let x = lo + i as f64 * h;
            let (a, b, c) = (self.eval(x - h), self.eval(x), self.eval(x + h));
            d1 = d1.max(((c - a) / (2.0 * h)).abs());
            d2 = d2.max(((c - 2.0 * b + a) / (h * h)).abs());
        }
        (d1, d2)
    }
}

/// The glued function and the constants certifying it.
#[derive(Debug, Clone, PartialEq)]
pub struct Bridge {
    pub field: Field,
    pub half_window: f64,
    /// `u0(-R) - gL(-R)`.
    pub left_mismatch: f64,
    /// `u0(R) - gR(R)`.
    pub right_mismatch: f64,
    /// Target boundary values `gL(-R)` and `gR(R)`.
    pub boundary: (f64, f64),
    u0_left: f64,
    u0_right: f64,
    ramp: BridgeRamp,
}

impl Bridge {
    /// Pointwise value from the stored boundary data, exact at `±R`.
    pub fn value_at_boundary(&self, right: bool) -> f64 {
        let r = self.half_window;
        if right {
            self.u0_right - self.ramp.eval(r) * self.right_mismatch - self.ramp.eval(-r) * self.left_mismatch
        } else {
            self.u0_left - self.ramp.eval(-r) * self.right_mismatch - self.ramp.eval(r) * self.left_mismatch
        }
    }
}

/// `g = u0 - ψ(x)(u0(R) - gR(R)) - ψ(-x)(u0(-R) - gL(-R))`, which agrees with
/// `gL` at `-R` and with `gR` at `R`. Off-grid boundary values come from the
/// trigonometric interpolants.
pub fn bridge_glue(u0: &Field, g_left: &Field, g_right: &Field, half_window: f64) -> Result<Bridge> {
    u0.check_same_grid(g_left)?;
    u0.check_same_grid(g_right)?;
    let grid = *u0.grid();
    if !grid.contains_interval(Interval::centered(half_window)) || half_window <= RAMP_WIDTH {
        return Err(Error::WindowOutOfDomain {
            half_width: half_window,
            margin: 0.0,
        });
    }
    let ramp = BridgeRamp { half_window };
    let u0i = SpectralInterpolant::new(u0);
    let (u0_left, u0_right) = (u0i.value(-half_window), u0i.value(half_window));
    let gl = SpectralInterpolant::new(g_left).value(-half_window);
    let gr = SpectralInterpolant::new(g_right).value(half_window);
    let (left_mismatch, right_mismatch) = (u0_left - gl, u0_right - gr);
    let values = grid
        .points()
        .iter()
        .zip(u0.values())
        .map(|(&x, &u)| u - ramp.eval(x) * right_mismatch - ramp.eval(-x) * left_mismatch)
        .collect();
    Ok(Bridge {
        field: Field::new(grid, values)?,
        half_window,
        left_mismatch,
        right_mismatch,
        boundary: (gl, gr),
        u0_left,
        u0_right,
        ramp,
    })
}

/// `max(sup |f - g|, sup |f' - g'|)` over the grid points of `window`.
pub fn w1inf_distance(f: &Field, g: &Field, window: Interval) -> Result<f64> {
    let d = f - g;
    crate::functionals::w1inf_norm(&d, Some(window), DiffScheme::Spectral)
}

/// Constants of the bridged class: the deterioration factor `a` (equal on
/// both sides) and the curvature bound of `u - g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeConstants {
    pub deterioration: f64,
    pub curvature: f64,
}

/// `a = max(2, 1 + sup|ψ'|)` and curvature `max(1, 2G + 2 eps sup|ψ''|)` for
/// members with `|u''| <= G`.
pub fn bridge_constants(half_window: f64, curvature: f64, eps: f64) -> BridgeConstants {
    let (d1, d2) = BridgeRamp { half_window }.derivative_bounds();
    BridgeConstants {
        deterioration: 2f64.max(1.0 + d1),
        curvature: 1f64.max(2.0 * curvature + 2.0 * eps * d2),
    }
}

/// Bounds of the class containing `u - g` for `u` in the connecting class.
pub fn connect_class_bounds(eps: f64, curvature: f64) -> Result<FunctionClassBounds> {
    let first = FunctionClassBounds::new(eps, 1.0, 1.0, 1.0)?;
    let k = bridge_constants(first.half_window, curvature, eps);
    let spread = 2.0 * k.deterioration * eps;
    let bounds = FunctionClassBounds::new(eps, spread, spread, k.curvature)?;
    // the half-window depends on the curvature; recompute the ramp on it
    let k = bridge_constants(bounds.half_window, curvature, eps);
    let spread = 2.0 * k.deterioration * eps;
    FunctionClassBounds::new(eps, spread, spread, k.curvature)
}

/// Cover of all `u` that are `eps`-close in `W^{1,∞}` to `gL` on `[-R, 0]` and
/// to `gR` on `[0, R]` with `|u''| <= curvature`, by atoms `h_i + g` that
/// match `gL(-R)` and `gR(R)` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectCover {
    pub bridge: Bridge,
    pub atoms: CoverAtomSet,
    pub bounds: FunctionClassBounds,
}

impl ConnectCover {
    /// The atom matched to `u` by marching `u - g`, as a field, with the march.
    pub fn atom_for(&self, u: &Field) -> Result<(Field, MarchReport)> {
        let residual = u - &self.bridge.field;
        let jet = FieldJet::new(&residual)?;
        let report = march(|x| jet.eval(x), &self.bounds)?;
        let atom = &report.atom.to_field(u.grid())? + &self.bridge.field;
        Ok((atom, report))
    }
}

/// Builds the connecting cover, using `witness` as the bridge. The witness
/// must itself lie in the connecting class.
pub fn connect_cover(witness: &Field, g_left: &Field, g_right: &Field, curvature: f64, eps: f64) -> Result<ConnectCover> {
    let bounds = connect_class_bounds(eps, curvature)?;
    let r = bounds.half_window;
    let left = w1inf_distance(witness, g_left, Interval::new(-r, 0.0)?)?;
    let right = w1inf_distance(witness, g_right, Interval::new(0.0, r)?)?;
    if left > eps || right > eps {
        return Err(Error::OutsideClass(format!(
            "bridge witness is {left:.3e} from the left data and {right:.3e} from the right data, radius {eps}"
        )));
    }
    let bridge = bridge_glue(witness, g_left, g_right, r)?;
    let atoms = CoverAtomSet {
        eps,
        window: bounds.window(),
        family: AtomFamily::Bridged {
            bounds,
            bridge: bridge.field.clone(),
        },
        log_cardinality: bounds.log_grid_family_size(),
    };
    Ok(ConnectCover { bridge, atoms, bounds })
}

/// `ln K_eps`: the log size of a connecting cover for radius `eps` and curvature bound.
pub fn log_connect_constant(eps: f64, curvature: f64) -> Result<f64> {
    Ok(connect_class_bounds(eps, curvature)?.log_grid_family_size())
}

/// Certificate that the union of two adjacent windows is covered by at most
/// `S · S' · K_eps` atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeCertificate {
    pub window: Interval,
    pub log_left: f64,
    pub log_right: f64,
    pub log_connect: f64,
}

impl MergeCertificate {
    pub fn log_bound(&self) -> f64 {
        self.log_left + self.log_right + self.log_connect
    }

    /// Whether a measured count on the merged window respects the bound.
    pub fn admits(&self, merged_count: usize) -> bool {
        (merged_count as f64).ln() <= self.log_bound() + 1e-12
    }
}

pub fn merge_covers(left: &CoverAtomSet, right: &CoverAtomSet, eps: f64, curvature: f64) -> Result<MergeCertificate> {
    let gap = (left.window.hi - right.window.lo).abs();
    if gap > 1e-9 * (1.0 + left.window.hi.abs()) {
        return Err(Error::Interface(format!(
            "windows [{}, {}] and [{}, {}] are not adjacent",
            left.window.lo, left.window.hi, right.window.lo, right.window.hi
        )));
    }
    Ok(MergeCertificate {
        window: Interval::new(left.window.lo, right.window.hi)?,
        log_left: left.log_cardinality,
        log_right: right.log_cardinality,
        log_connect: log_connect_constant(eps, curvature)?,
    })
}

/// Values and spectral derivatives of a list of fields on a common grid,
/// for repeated `W^{1,∞}` distance queries.
#[derive(Debug, Clone)]
pub struct MemberJets {
    grid: Grid,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl MemberJets {
    pub fn new(members: &[Field]) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InsufficientData("no members to cover".into()))?;
        let mut values = Vec::with_capacity(members.len());
        let mut slopes = Vec::with_capacity(members.len());
        for m in members {
            first.check_same_grid(m)?;
            values.push(m.values().to_vec());
            slopes.push(differentiate(m, 1, DiffScheme::Spectral)?.into_values());
        }
        Ok(Self {
            grid: *first.grid(),
            values,
            slopes,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn distance_on(&self, i: usize, j: usize, range: std::ops::Range<usize>) -> f64 {
        let (a, b) = (&self.values[i], &self.values[j]);
        let (da, db) = (&self.slopes[i], &self.slopes[j]);
        range.fold(0.0, |acc: f64, k| acc.max((a[k] - b[k]).abs()).max((da[k] - db[k]).abs()))
    }

    /// `W^{1,∞}` distance between members `i` and `j` on `window`.
    pub fn distance(&self, i: usize, j: usize, window: Interval) -> f64 {
        self.distance_on(i, j, self.grid.indices_in(window))
    }

    /// First-come greedy cover: members are scanned in index order and a new
    /// centre is opened when no existing centre is within `eps`.
    pub fn greedy_cover(&self, window: Interval, eps: f64) -> GreedyCover {
        self.greedy_cover_of(0..self.len(), window, eps)
    }

    /// Greedy cover of a subset of members, scanned in the given order.
    pub fn greedy_cover_of(&self, members: impl IntoIterator<Item = usize>, window: Interval, eps: f64) -> GreedyCover {
        let range = self.grid.indices_in(window);
        greedy_cover_by(members, eps, |i, c| self.distance_on(i, c, range.clone()))
    }

    /// Minimal number of member-centred closed `eps`-balls covering all
    /// members on `window`, by exhaustive search. Exponential in the member count.
    pub fn minimal_cover_count(&self, window: Interval, eps: f64) -> Result<usize> {
        let n = self.len();
        if n > 20 {
            return Err(Error::InvalidParameter(format!(
                "exhaustive cover search is limited to 20 members, got {n}"
            )));
        }
        let range = self.grid.indices_in(window);
        let reach: Vec<u32> = (0..n)
            .map(|c| {
                (0..n)
                    .filter(|&i| self.distance_on(i, c, range.clone()) <= eps)
                    .fold(0u32, |m, i| m | (1 << i))
            })
            .collect();
        let full = (1u32 << n) - 1;
        let best = (1u32..=full)
            .filter(|&subset| {
                (0..n)
                    .filter(|&c| subset & (1 << c) != 0)
                    .fold(0u32, |m, c| m | reach[c])
                    == full
            })
            .map(|subset| subset.count_ones() as usize)
            .min()
            .unwrap_or(0);
        Ok(best)
    }
}

/// Result of a greedy cover: centre indices and, per scanned member, the
/// position of its centre in `centres`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyCover {
    pub centres: Vec<usize>,
    pub assignment: Vec<(usize, usize)>,
}

impl GreedyCover {
    pub fn count(&self) -> usize {
        self.centres.len()
    }
}

/// First-come greedy cover of the points in `order` under an arbitrary
/// distance: a point joins the first centre within `eps`, otherwise it
/// becomes a centre.
pub fn greedy_cover_by<F>(order: impl IntoIterator<Item = usize>, eps: f64, distance: F) -> GreedyCover
where
    F: Fn(usize, usize) -> f64,
{
    let mut centres: Vec<usize> = Vec::new();
    let mut assignment = Vec::new();
    for i in order {
        match centres.iter().position(|&c| distance(i, c) <= eps) {
            Some(k) => assignment.push((i, k)),
            None => {
                assignment.push((i, centres.len()));
                centres.push(i);
            }
        }
    }
    GreedyCover { centres, assignment }
}

/// Greedy `W^{1,∞}` cover count of `members` restricted to `window`.
pub fn empirical_cover_count(members: &[Field], window: Interval, eps: f64) -> Result<usize> {
    Ok(MemberJets::new(members)?.greedy_cover(window, eps).count())
}

/// A random trigonometric sum `Σ a_i sin(k_i x + φ_i)` scaled into a class:
/// value, slope and curvature bounds hold by the triangle inequality, and the
/// endpoint bound is enforced by rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSum {
    pub terms: Vec<(f64, f64, f64)>,
}

impl TrigSum {
    pub fn eval(&self, x: f64) -> [f64; 2] {
        self.terms.iter().fold([0.0, 0.0], |[f, df], &(a, k, phi)| {
            let (s, c) = (k * x + phi).sin_cos();
            [f + a * s, df + a * k * c]
        })
    }

    pub fn curvature_sup(&self) -> f64 {
        self.terms.iter().map(|(a, k, _)| (a * k * k).abs()).sum()
    }

    pub fn random_in_class(bounds: &FunctionClassBounds, rng: &mut impl Rng) -> Self {
        let r = bounds.half_window;
        loop {
            let count = rng.gen_range(2..=6);
            let mut terms: Vec<(f64, f64, f64)> = (0..count)
                .map(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.05..2.0),
                        rng.gen_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for (amp, k, _) in &terms {
                a += amp.abs();
                b += (amp * k).abs();
                c += (amp * k * k).abs();
            }
            let scale = (bounds.value_bound / a)
                .min(bounds.slope_bound / b)
                .min(bounds.curvature_bound / c)
                * rng.gen_range(0.5..1.0);
            for t in &mut terms {
                t.0 *= scale;
            }
            let f = Self { terms };
            if f.eval(-r)[0].abs() <= bounds.endpoint_bound && f.eval(r)[0].abs() <= bounds.endpoint_bound {
                return f;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_scales() -> CoverScales {
        CoverScales::new(0.1, 0.2, 0.2, 1.0)
    }

    #[test]
    fn step_line_from_rest() {
        let line = one_step_line(0.0, 0.0, 0.1, &unit_scales()).unwrap();
        assert_eq!(line.index, 2);
        assert!((line.slope - 0.02).abs() < 1e-15);
    }

    #[test]
    fn step_line_takes_integer_part() {
        let line = one_step_line(0.0, 0.033, 0.1, &unit_scales()).unwrap();
        assert_eq!(line.index, 5);
        assert!((line.slope - 0.05).abs() < 1e-15);
    }

    #[test]
    fn certified_endpoint_value() {
        let line = one_step_line(0.05, 0.0, 0.1, &unit_scales()).unwrap();
        assert!((line.endpoint_bound - 0.09995).abs() < 1e-15);
        // near the floor the bound stops shrinking
        let line = one_step_line(0.0, 0.0, 1e-5, &unit_scales()).unwrap();
        assert!((line.endpoint_bound - 0.01 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn negative_start_is_mirrored() {
        let s = unit_scales();
        let up = one_step_line(0.01, 0.033, 0.1, &s).unwrap();
        let down = one_step_line(-0.01, -0.033, 0.1, &s).unwrap();
        assert_eq!(down.index, -up.index);
    }

    #[test]
    fn oversized_slope_is_rejected() {
        assert!(matches!(
            one_step_line(0.0, 0.5, 0.1, &unit_scales()),
            Err(Error::InvariantViolated(_))
        ));
    }

    #[test]
    fn scales_and_half_window() {
        let b = FunctionClassBounds::new(0.1, 0.2, 0.2, 1.0).unwrap();
        let s = b.scales();
        assert!((s.step - 0.01).abs() < 1e-15);
        assert_eq!(s.value_quantum, s.step * s.slope_quantum);
        assert_eq!(s.value_levels, 2001);
        assert_eq!(b.steps_per_side(), 4000);
        assert!(b.half_window >= 40.0 && b.half_window <= 41.0);
        assert!(FunctionClassBounds::new(0.3, 0.2, 0.2, 1.0).is_err());
        assert!(FunctionClassBounds::new(0.1, 0.2, 0.2, 0.5).is_err());
    }

    #[test]
    fn zero_function_march_stays_near_zero() {
        let b = FunctionClassBounds::new(0.1, 0.2, 0.2, 1.0).unwrap();
        let report = march(|_| [0.0, 0.0], &b).unwrap();
        let floor = b.scales().floor();
        assert!(report.atom.endpoint_zero());
        assert!(report.atom.node_values().iter().all(|v| v.abs() <= floor + 1e-15));
        assert!(w1inf_distance_to_atom(|_| [0.0, 0.0], &report.atom) <= b.eps);
    }

    #[test]
    fn random_members_are_matched() {
        let b = FunctionClassBounds::new(0.1, 0.2, 0.2, 1.0).unwrap();
        let scales = b.scales();
        let cover = build_pl_cover(&b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = TrigSum::random_in_class(&b, &mut rng);
            let report = march(|x| f.eval(x), &b).unwrap();
            assert!(report.steps_within_bounds(&scales));
            assert!(report.closure_within_bounds(b.eps));
            assert!(report.left_residual <= scales.floor() + 1e-12);
            assert!(report.right_residual <= scales.floor() + 1e-12);
            assert!(w1inf_distance_to_atom(|x| f.eval(x), &report.atom) <= b.eps);
            assert!(cover.contains(&report.atom));
        }
    }

    #[test]
    fn pl_eval_slopes_are_quantized() {
        let s = unit_scales();
        let h = PLFunction {
            origin: -0.02,
            step: s.step,
            value_quantum: s.value_quantum,
            levels: vec![0, 3, -2, 0],
        };
        let [v, d] = h.eval(-0.015);
        assert!((v - 1.5 * s.value_quantum).abs() < 1e-15);
        assert!((d / s.slope_quantum - 3.0).abs() < 1e-9);
        assert!((h.eval(-0.005)[1] / s.slope_quantum + 5.0).abs() < 1e-9);
        assert!((h.eval(0.0)[1] / s.slope_quantum - 2.0).abs() < 1e-9);
        assert!(h.endpoint_zero());
    }

    #[test]
    fn bridge_corrections() {
        let grid = Grid::new(-48.0, 48.0, 1536).unwrap();
        let u0 = Field::from_fn(grid, |x| 0.1 * (0.2 * x).sin()).unwrap();
        let unchanged = bridge_glue(&u0, &u0, &u0, 40.0).unwrap();
        assert_eq!(unchanged.field, u0);

        let d = 0.03;
        let shifted = u0.map(|v| v - d);
        let g = bridge_glue(&u0, &u0, &shifted, 40.0).unwrap();
        let ramp = BridgeRamp { half_window: 40.0 };
        for (i, &x) in grid.points().iter().enumerate() {
            let expected = u0.values()[i] - ramp.eval(x) * d;
            assert!((g.field.values()[i] - expected).abs() < 1e-12);
        }
        assert!((g.value_at_boundary(true) - g.boundary.1).abs() < 1e-14);
        assert!((g.value_at_boundary(false) - g.boundary.0).abs() < 1e-14);
        let sup = w1inf_distance(&g.field, &shifted, Interval::new(0.0, 40.0).unwrap()).unwrap();
        assert!(sup <= 2.0 * d);
    }

    #[test]
    fn ramp_constants() {
        let ramp = BridgeRamp { half_window: 40.0 };
        assert_eq!(ramp.eval(36.9), 0.0);
        assert_eq!(ramp.eval(40.0), 1.0);
        assert!((ramp.eval(38.5) - 0.5).abs() < 1e-12);
        let (d1, _) = ramp.derivative_bounds();
        assert!((d1 - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn connect_constant_ignores_window_lengths() {
        let left = CoverAtomSet::explicit(vec![], 0.1, Interval::new(-10.0, 0.0).unwrap());
        let k: Vec<f64> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&len| {
                let l = CoverAtomSet { log_cardinality: 0.0, ..left.clone() };
                let l = CoverAtomSet { window: Interval::new(-len, 0.0).unwrap(), ..l };
                let r = CoverAtomSet { window: Interval::new(0.0, len).unwrap(), ..l.clone() };
                merge_covers(&l, &r, 0.1, 1.0).unwrap().log_connect
            })
            .collect();
        assert!(k.windows(2).all(|w| w[0] == w[1]));
        let r = CoverAtomSet { window: Interval::new(1.0, 2.0).unwrap(), ..left.clone() };
        assert!(matches!(merge_covers(&left, &r, 0.1, 1.0), Err(Error::Interface(_))));
    }

    #[test]
    fn connect_cover_matches_global_function() {
        let grid = Grid::new(-48.0, 48.0, 2048).unwrap();
        let g0 = Field::from_fn(grid, |x| 0.3 * (0.3 * x).sin() + 0.1 * (0.7 * x + 1.0).cos()).unwrap();
        let cover = connect_cover(&g0, &g0, &g0, 1.0, 0.1).unwrap();
        let r = cover.bounds.half_window;
        let (atom, report) = cover.atom_for(&g0).unwrap();
        assert!(cover.atoms.contains(&report.atom));
        assert!(w1inf_distance(&atom, &g0, Interval::centered(r)).unwrap() <= 0.1);
        // atom(±R) = h(±R) + g(±R) with h vanishing there
        assert!(report.atom.endpoint_zero());
        assert!(report.atom.eval(r)[0].abs() < 1e-15);
        assert!(report.atom.eval(-r)[0].abs() < 1e-15);
        let at = |x: f64| SpectralInterpolant::new(&g0).value(x);
        assert!((cover.bridge.value_at_boundary(true) - at(r)).abs() < 1e-12);
        assert!((cover.bridge.value_at_boundary(false) - at(-r)).abs() < 1e-12);

        // the count depends only on the radius and curvature bound
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let (a, k) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.1..0.8));
            let g = Field::from_fn(grid, |x| a * (k * x).cos()).unwrap();
            let other = connect_cover(&g, &g, &g, 1.0, 0.1).unwrap();
            assert_eq!(other.atoms.log_cardinality, cover.atoms.log_cardinality);
        }
        let far = g0.map(|v| v + 0.5);
        assert!(matches!(connect_cover(&g0, &far, &g0, 1.0, 0.1), Err(Error::OutsideClass(_))));
    }

    fn line_fields(offsets: &[f64]) -> Vec<Field> {
        let grid = Grid::new(-8.0, 8.0, 64).unwrap();
        offsets
            .iter()
            .map(|&c| Field::from_fn(grid, |_| c).unwrap())
            .collect()
    }

    #[test]
    fn greedy_counts() {
        let w = Interval::centered(4.0);
        let same = line_fields(&[0.3; 5]);
        assert_eq!(empirical_cover_count(&same, w, 0.01).unwrap(), 1);
        let two = line_fields(&[0.0, 0.3]);
        assert_eq!(empirical_cover_count(&two, w, 0.1).unwrap(), 2);

        let grid = Grid::new(-8.0, 8.0, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let many: Vec<Field> = (0..50)
            .map(|_| {
                let (a, k) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0));
                Field::from_fn(grid, |x| a * (k * x).cos()).unwrap()
            })
            .collect();
        let jets = MemberJets::new(&many).unwrap();
        let diameter = (0..50)
            .flat_map(|i| (0..50).map(move |j| (i, j)))
            .map(|(i, j)| jets.distance(i, j, w))
            .fold(0.0, f64::max);
        assert_eq!(jets.greedy_cover(w, diameter).count(), 1);
    }

    #[test]
    fn greedy_is_monotone_and_near_optimal() {
        let grid = Grid::new(-8.0, 8.0, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = Interval::centered(5.0);
        for _ in 0..20 {
            let members: Vec<Field> = (0..8)
                .map(|_| {
                    let (a, k) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..1.0));
                    Field::from_fn(grid, |x| a * (k * x).sin()).unwrap()
                })
                .collect();
            let jets = MemberJets::new(&members).unwrap();
            let mut last = usize::MAX;
            for eps in [0.05, 0.1, 0.2, 0.4, 0.8] {
                let greedy = jets.greedy_cover(w, eps).count();
                assert!(greedy <= last);
                last = greedy;
                let best = jets.minimal_cover_count(w, eps).unwrap();
                assert!(best <= greedy && greedy <= 2 * best);
                let subset = jets.greedy_cover_of(0..5, w, eps).count();
                assert!(subset <= greedy);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn one_step_triple_bound(
            f0_frac in -1.0f64..1.0,
            delta_frac in 0.0f64..1.0,
            slope in -0.2f64..0.2,
            quad in -0.5f64..0.5,
        ) {
            let s = unit_scales();
            let delta = s.eps * delta_frac;
            let f0 = delta * f0_frac;
            let line = one_step_line(f0, slope, delta, &s).unwrap();
            let f = |x: f64| f0 + slope * x + quad * x * x;
            let df = |x: f64| slope + 2.0 * quad * x;
            let mut value: f64 = 0.0;
            let mut deriv: f64 = 0.0;
            for p in 0..=64 {
                let x = s.step * p as f64 / 64.0;
                value = value.max((f(x) - line.slope * x).abs());
                deriv = deriv.max((df(x) - line.slope).abs());
            }
            prop_assert!(value <= delta.max(s.floor()) + 1e-15);
            prop_assert!(deriv <= 0.3 * s.eps + 1e-15);
            prop_assert!((f(s.step) - line.slope * s.step).abs() <= line.endpoint_bound + 1e-15);
        }
    }
}
