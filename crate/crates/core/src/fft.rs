//! Two-dimensional real FFT on a `ny x nx` row-major grid.
//!
//! The half spectrum is stored transposed: entry `(k, l)` for x-frequency
//! index `k in 0..nx/2+1` and y-frequency index `l in 0..ny` lives at
//! `k * ny + l`. Transforms are unnormalized.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    nx: usize,
    ny: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    row_real: Vec<f64>,
    rows: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 2 && ny >= 1 && nx % 2 == 0, "nx must be even");
        let mut rp = RealFftPlanner::<f64>::new();
        let r2c = rp.plan_fft_forward(nx);
        let c2r = rp.plan_fft_inverse(nx);
        let mut cp = FftPlanner::<f64>::new();
        let fwd = cp.plan_fft_forward(ny);
        let inv = cp.plan_fft_inverse(ny);
        let scratch_len = r2c
            .get_scratch_len()
            .max(c2r.get_scratch_len())
            .max(fwd.get_inplace_scratch_len())
            .max(inv.get_inplace_scratch_len());
        let nh = nx / 2 + 1;
        Fft2 {
            nx,
            ny,
            r2c,
            c2r,
            fwd,
            inv,
            row_real: vec![0.0; nx],
            rows: vec![Complex64::new(0.0, 0.0); nh * ny],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn half_len(&self) -> usize {
        (self.nx / 2 + 1) * self.ny
    }

    /// Forward transform of `input` (length `nx*ny`) into `spec` (length `half_len`).
    pub fn forward(&mut self, input: &[f64], spec: &mut [Complex64]) {
        let (nx, ny, nh) = (self.nx, self.ny, self.nx / 2 + 1);
        assert_eq!(input.len(), nx * ny);
        assert_eq!(spec.len(), nh * ny);
        for j in 0..ny {
            self.row_real.copy_from_slice(&input[j * nx..(j + 1) * nx]);
            let out = &mut self.rows[j * nh..(j + 1) * nh];
            self.r2c
                .process_with_scratch(&mut self.row_real, out, &mut self.scratch)
                .expect("buffer sizes are fixed at construction");
        }
        for j in 0..ny {
            for k in 0..nh {
                spec[k * ny + j] = self.rows[j * nh + k];
            }
        }
        self.fwd.process_with_scratch(spec, &mut self.scratch);
    }

    /// Inverse transform; `spec` is used as workspace and clobbered.
    pub fn inverse(&mut self, spec: &mut [Complex64], output: &mut [f64]) {
        let (nx, ny, nh) = (self.nx, self.ny, self.nx / 2 + 1);
        assert_eq!(output.len(), nx * ny);
        assert_eq!(spec.len(), nh * ny);
        self.inv.process_with_scratch(spec, &mut self.scratch);
        for j in 0..ny {
            for k in 0..nh {
                self.rows[j * nh + k] = spec[k * ny + j];
            }
        }
        for j in 0..ny {
            let row = &mut self.rows[j * nh..(j + 1) * nh];
            // A real field has purely real DC and Nyquist terms; drop rounding noise.
            row[0].im = 0.0;
            row[nh - 1].im = 0.0;
            self.c2r
                .process_with_scratch(row, &mut output[j * nx..(j + 1) * nx], &mut self.scratch)
                .expect("buffer sizes are fixed at construction");
        }
    }
}

/// Signed integer frequency for index `i` of a length-`n` DFT.
#[inline]
pub fn signed_freq(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Smallest even integer `>= n` whose prime factors are all in {2, 3, 5, 7}.
pub fn next_smooth_even(n: usize) -> usize {
    let mut m = n.max(2);
    if m % 2 == 1 {
        m += 1;
    }
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 2;
    }
}
