//! Thin wrapper around `realfft` with a per-thread planner cache.

use std::cell::RefCell;
use std::f64::consts::PI;

use realfft::num_complex::Complex64;
use realfft::RealFftPlanner;

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

/// Half spectrum (`n/2 + 1` bins) of a real periodic signal, unnormalised.
pub fn forward(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    let mut input = samples.to_vec();
    let mut output = plan.make_output_vec();
    plan.process(&mut input, &mut output)
        .expect("buffer sizes come from the plan");
    output
}

/// Inverse of [`forward`], including the `1/n` normalisation.
pub fn inverse(mut spectrum: Vec<Complex64>, n: usize) -> Vec<f64> {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    spectrum[0].im = 0.0;
    if n % 2 == 0 {
        spectrum[n / 2].im = 0.0;
    }
    let mut output = plan.make_output_vec();
    plan.process(&mut spectrum, &mut output)
        .expect("buffer sizes come from the plan");
    let scale = 1.0 / n as f64;
    output.iter_mut().for_each(|x| *x *= scale);
    output
}

/// Angular wavenumber of half-spectrum bin `j` for `n` samples spaced `dx`.
pub fn wavenumber(j: usize, n: usize, dx: f64) -> f64 {
    2.0 * PI * j as f64 / (n as f64 * dx)
}

/// Multiply the spectrum of `samples` bin-by-bin by `multiplier(k)`.
pub fn apply_multiplier<F>(samples: &[f64], dx: f64, multiplier: F) -> Vec<f64>
where
    F: Fn(f64) -> Complex64,
{
    let n = samples.len();
    let mut spec = forward(samples);
    for (j, c) in spec.iter_mut().enumerate() {
        *c *= multiplier(wavenumber(j, n, dx));
    }
    inverse(spec, n)
}

/// Reusable forward/inverse pair with owned scratch, for hot loops.
pub struct SpectralWorkspace {
    n: usize,
    forward: std::sync::Arc<dyn realfft::RealToComplex<f64>>,
    inverse: std::sync::Arc<dyn realfft::ComplexToReal<f64>>,
    real: Vec<f64>,
    spec: Vec<Complex64>,
    pub wavenumbers: Vec<f64>,
}

impl SpectralWorkspace {
    pub fn new(n: usize, dx: f64) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        let spec = forward.make_output_vec();
        let wavenumbers = (0..spec.len()).map(|j| wavenumber(j, n, dx)).collect();
        Self {
            n,
            forward,
            inverse,
            real: vec![0.0; n],
            spec,
            wavenumbers,
        }
    }

    /// `out = F^{-1}[ m(k) F[input] ]` with a real multiplier.
    pub fn filter_real(&mut self, input: &[f64], out: &mut [f64], multiplier: &[f64]) {
        self.real.copy_from_slice(input);
        self.forward
            .process(&mut self.real, &mut self.spec)
            .expect("buffer sizes come from the plan");
        let scale = 1.0 / self.n as f64;
        for (c, m) in self.spec.iter_mut().zip(multiplier) {
            *c *= m * scale;
        }
        self.spec[0].im = 0.0;
        let last = self.spec.len() - 1;
        self.spec[last].im = 0.0;
        self.inverse
            .process(&mut self.spec, out)
            .expect("buffer sizes come from the plan");
    }
}
