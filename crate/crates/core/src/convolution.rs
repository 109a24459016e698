//! FFT application of the dense discrete integral operator.
//!
//! Each Toeplitz block is embedded in a circulant of size `(2n)^d`, so
//! `v_i = Σ_j T(i - j) u_j` becomes a pointwise product of spectra.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::greens::{ConvTable, KernelId};
use crate::grid::Grid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Multidimensional FFT on the padded `(2n)^d` lattice.
#[derive(Clone)]
pub struct PaddedFft {
    dim: usize,
    n: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl PaddedFft {
    pub fn new(grid: &Grid) -> Self {
        let len = 2 * grid.n();
        let mut planner = FftPlanner::new();
        Self {
            dim: grid.dim(),
            n: grid.n(),
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Total number of padded entries.
    pub fn size(&self) -> usize {
        self.len.pow(self.dim as u32)
    }

    fn transform(&self, fft: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let len = self.len;
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        // last axis is contiguous
        for line in buf.chunks_exact_mut(len) {
            fft.process_with_scratch(line, &mut scratch);
        }
        let mut line = vec![ZERO; len];
        for axis in 0..self.dim - 1 {
            let stride = len.pow((self.dim - 1 - axis) as u32);
            let block = stride * len;
            for base in (0..buf.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = buf[start + t * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (t, v) in line.iter().enumerate() {
                        buf[start + t * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(self.forward.as_ref(), buf);
    }

    /// Inverse transform including the `1/(2n)^d` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(self.inverse.as_ref(), buf);
        let scale = 1.0 / self.size() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn padded_index(&self, p: usize) -> usize {
        // p is a lexicographic grid point index in 0..n^d
        let mut rem = p;
        let mut idx = 0;
        let mut mult = 1;
        for _ in 0..self.dim {
            idx += (rem % self.n) * mult;
            rem /= self.n;
            mult *= self.len;
        }
        idx
    }

    /// Zero-padded copy of grid values.
    pub fn pad(&self, values: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        for (p, v) in values.iter().enumerate() {
            out[self.padded_index(p)] = *v;
        }
    }

    /// Read grid values back out of a padded buffer.
    pub fn extract(&self, buf: &[Complex64], out: &mut [Complex64]) {
        for (p, v) in out.iter_mut().enumerate() {
            *v = buf[self.padded_index(p)];
        }
    }

    /// Spectrum of the circulant embedding of a Toeplitz symbol.
    pub fn symbol_spectrum(&self, table: &ConvTable, kernel: KernelId) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.size()];
        let n = self.n as isize;
        let len = self.len as isize;
        let extent = table.extent();
        let raw = table.raw(kernel);
        for (t, v) in raw.iter().enumerate() {
            let mut rem = t;
            let mut idx = 0usize;
            let mut mult = 1usize;
            for _ in 0..self.dim {
                let delta = (rem % extent) as isize - (n - 1);
                rem /= extent;
                idx += (delta.rem_euclid(len) as usize) * mult;
                mult *= self.len;
            }
            buf[idx] = *v;
        }
        self.forward(&mut buf);
        buf
    }
}

/// `v_i = Σ_j T_kernel(i - j) u_j` for all grid points.
pub fn convolve(table: &ConvTable, kernel: KernelId, u: &ScalarField) -> Result<ScalarField> {
    if u.grid() != table.grid() {
        return Err(Error::DimensionMismatch("field and table live on different grids".into()));
    }
    let fft = PaddedFft::new(table.grid());
    let spectrum = fft.symbol_spectrum(table, kernel);
    let mut buf = vec![ZERO; fft.size()];
    fft.pad(u.values(), &mut buf);
    fft.forward(&mut buf);
    for (b, s) in buf.iter_mut().zip(&spectrum) {
        *b *= s;
    }
    fft.inverse(&mut buf);
    let mut out = ScalarField::zeros(*u.grid());
    fft.extract(&buf, out.values_mut());
    Ok(out)
}

/// The dense operator
/// `E^a + k² G*(m E^a) + G^a*(Σ_c p^c E^c)`, `a = 1..d`.
pub struct SystemOperator {
    grid: Grid,
    m: Vec<Complex64>,
    p: Vec<Vec<Complex64>>,
    fft: PaddedFft,
    spectra: Vec<Vec<Complex64>>,
    forward_count: AtomicUsize,
}

impl SystemOperator {
    pub fn new(table: &ConvTable, m: &ScalarField, p: &[ScalarField]) -> Result<Self> {
        let grid = *table.grid();
        if m.grid() != &grid || p.len() != grid.dim() || p.iter().any(|f| f.grid() != &grid) {
            return Err(Error::DimensionMismatch(
                "medium fields do not match the table grid".into(),
            ));
        }
        let fft = PaddedFft::new(&grid);
        let mut spectra = vec![fft.symbol_spectrum(table, KernelId::Scalar)];
        for a in 0..grid.dim() {
            spectra.push(fft.symbol_spectrum(table, KernelId::Gradient(a)));
        }
        Ok(Self {
            grid,
            m: m.values().to_vec(),
            p: p.iter().map(|f| f.values().to_vec()).collect(),
            fft,
            spectra,
            forward_count: AtomicUsize::new(0),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> &[Complex64] {
        &self.m
    }

    pub fn p(&self, axis: usize) -> &[Complex64] {
        &self.p[axis]
    }

    /// Forward FFTs performed so far by [`SystemOperator::apply_into`].
    pub fn forward_transforms(&self) -> usize {
        self.forward_count.load(Ordering::Relaxed)
    }

    /// Apply to a flat vector of length `d n^d`.
    pub fn apply_into(&self, e: &[Complex64], out: &mut [Complex64]) {
        let dim = self.grid.dim();
        let np = self.grid.points();
        let k2 = self.grid.k() * self.grid.k();
        let size = self.fft.size();
        let mut tmp = vec![ZERO; np];

        // spectra of m E^a and of w = Σ p^a E^a
        let mut hats: Vec<Vec<Complex64>> = Vec::with_capacity(dim + 1);
        for a in 0..dim {
            let ea = &e[a * np..(a + 1) * np];
            for ((t, m), v) in tmp.iter_mut().zip(&self.m).zip(ea) {
                *t = m * v;
            }
            let mut buf = vec![ZERO; size];
            self.fft.pad(&tmp, &mut buf);
            self.fft.forward(&mut buf);
            hats.push(buf);
        }
        tmp.fill(ZERO);
        for a in 0..dim {
            let ea = &e[a * np..(a + 1) * np];
            for ((t, p), v) in tmp.iter_mut().zip(&self.p[a]).zip(ea) {
                *t += p * v;
            }
        }
        let mut w_hat = vec![ZERO; size];
        self.fft.pad(&tmp, &mut w_hat);
        self.fft.forward(&mut w_hat);
        self.forward_count.fetch_add(dim + 1, Ordering::Relaxed);

        let g_hat = &self.spectra[0];
        for a in 0..dim {
            let buf = &mut hats[a];
            let ga_hat = &self.spectra[1 + a];
            for (((b, g), ga), w) in buf.iter_mut().zip(g_hat).zip(ga_hat).zip(&w_hat) {
                *b = *b * g * k2 + ga * w;
            }
            self.fft.inverse(buf);
            self.fft.extract(buf, &mut tmp);
            let ea = &e[a * np..(a + 1) * np];
            for ((o, v), t) in out[a * np..(a + 1) * np].iter_mut().zip(ea).zip(&tmp) {
                *o = v + t;
            }
        }
    }

    pub fn apply(&self, e: &VectorField) -> Result<VectorField> {
        if e.grid() != &self.grid {
            return Err(Error::DimensionMismatch("field lives on a different grid".into()));
        }
        let mut out = VectorField::zeros(self.grid);
        self.apply_into(e.values(), out.values_mut());
        Ok(out)
    }

    /// Right-hand side `g = E^i - A E^i` of the scattered-field equation.
    pub fn compute_rhs(&self, incident: &VectorField) -> Result<VectorField> {
        let ae = self.apply(incident)?;
        let vals = incident
            .values()
            .iter()
            .zip(ae.values())
            .map(|(a, b)| a - b)
            .collect();
        VectorField::from_values(self.grid, vals)
    }
}
