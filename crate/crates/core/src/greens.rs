//! Helmholtz kernel, its gradient, and the Toeplitz tables of the discrete
//! convolution operators on the difference lattice.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bessel::hankel1_01;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::{box_integral, graded_unit_rule, radial_cube_integral};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn radius(dim: usize, x: &[f64; 3]) -> f64 {
    x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Kernel value and gradient at `x != 0` (not checked).
fn kernel_and_gradient(dim: usize, k: f64, x: &[f64; 3]) -> (Complex64, [Complex64; 3]) {
    let r = radius(dim, x);
    let mut grad = [Complex64::new(0.0, 0.0); 3];
    if dim == 3 {
        let e = Complex64::from_polar(1.0, k * r);
        let g = e / (4.0 * PI * r);
        let radial = (I * (k * r) - 1.0) * e / (4.0 * PI * r * r * r);
        for a in 0..3 {
            grad[a] = radial * x[a];
        }
        (g, grad)
    } else {
        let (h0, h1) = hankel1_01(k * r);
        let g = I * 0.25 * h0;
        let radial = -I * (0.25 * k) * h1 / r;
        for a in 0..2 {
            grad[a] = radial * x[a];
        }
        (g, grad)
    }
}

fn check_point(dim: usize, k: f64, x: &[f64; 3]) -> Result<()> {
    if radius(dim, x) == 0.0 {
        return Err(Error::SingularPoint);
    }
    if dim == 2 && k <= 0.0 {
        return Err(Error::InvalidGrid("the 2D kernel needs k > 0".into()));
    }
    Ok(())
}

/// Outgoing Helmholtz kernel: `e^{ik|x|}/(4π|x|)` in 3D and
/// `(i/4) H0^(1)(k|x|)` in 2D.
pub fn helmholtz_kernel(dim: usize, k: f64, x: &[f64; 3]) -> Result<Complex64> {
    check_point(dim, k, x)?;
    Ok(kernel_and_gradient(dim, k, x).0)
}

/// Gradient of [`helmholtz_kernel`]; entries beyond `dim` are zero.
pub fn kernel_gradient(dim: usize, k: f64, x: &[f64; 3]) -> Result<[Complex64; 3]> {
    check_point(dim, k, x)?;
    Ok(kernel_and_gradient(dim, k, x).1)
}

/// Which convolution table to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelId {
    /// `G`
    Scalar,
    /// `∂G/∂x_a`
    Gradient(usize),
}

impl KernelId {
    fn slot(self) -> usize {
        match self {
            KernelId::Scalar => 0,
            KernelId::Gradient(a) => 1 + a,
        }
    }
}

/// How near-diagonal table entries are computed.
///
/// Entries with `|δ|_inf <= radius` hold the exact cell integral
/// `∫_{cell(δ)} kernel(y) dy` instead of the point rule `h^d kernel(δh)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionSpec {
    pub radius: usize,
    /// Relative agreement required between two quadrature refinements.
    pub tolerance: f64,
}

impl Default for CorrectionSpec {
    fn default() -> Self {
        Self {
            radius: 1,
            tolerance: 1e-10,
        }
    }
}

/// Toeplitz symbols of `G` and `∂G/∂x_a` on `{-(n-1)..(n-1)}^d`.
#[derive(Debug, Clone)]
pub struct ConvTable {
    grid: Grid,
    radius: usize,
    extent: usize,
    data: Vec<Vec<Complex64>>,
}

impl ConvTable {
    pub fn build(grid: &Grid, correction: &CorrectionSpec) -> Result<Self> {
        if correction.radius > 1 {
            return Err(Error::InvalidGrid(format!(
                "correction radius {} not in {{0, 1}}",
                correction.radius
            )));
        }
        let dim = grid.dim();
        let n = grid.n();
        let k = grid.k();
        if dim == 2 && k <= 0.0 {
            return Err(Error::InvalidGrid("the 2D kernel needs k > 0".into()));
        }
        let h = grid.h();
        let hd = h.powi(dim as i32);
        let extent = 2 * n - 1;

        // Compute the non-negative orthant and reflect.
        let orthant: Vec<[isize; 3]> = {
            let mut v = Vec::with_capacity(n.pow(dim as u32));
            let ni = n as isize;
            for a in 0..ni {
                for b in 0..ni {
                    if dim == 2 {
                        v.push([a, b, 0]);
                    } else {
                        for c in 0..ni {
                            v.push([a, b, c]);
                        }
                    }
                }
            }
            v
        };
        let values: Vec<Result<[Complex64; 4]>> = orthant
            .par_iter()
            .map(|off| {
                let inf = off[..dim].iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
                let mut out = [Complex64::new(0.0, 0.0); 4];
                if inf <= correction.radius {
                    let vals = cell_integrals(dim, k, h, off, correction.tolerance)?;
                    out[..=dim].copy_from_slice(&vals[..=dim]);
                    for a in 0..dim {
                        if off[a] == 0 {
                            out[1 + a] = Complex64::new(0.0, 0.0);
                        }
                    }
                } else {
                    let x = [off[0] as f64 * h, off[1] as f64 * h, off[2] as f64 * h];
                    let (g, grad) = kernel_and_gradient(dim, k, &x);
                    out[0] = g * hd;
                    for a in 0..dim {
                        out[1 + a] = grad[a] * hd;
                    }
                }
                Ok(out)
            })
            .collect();

        let total = extent.pow(dim as u32);
        let mut data = vec![vec![Complex64::new(0.0, 0.0); total]; dim + 1];
        let mut table = Self {
            grid: *grid,
            radius: correction.radius,
            extent,
            data: Vec::new(),
        };
        for (off, vals) in orthant.iter().zip(values) {
            let vals = vals?;
            // all sign patterns of the non-zero coordinates
            for mask in 0..(1usize << dim) {
                if (0..dim).any(|a| mask >> a & 1 == 1 && off[a] == 0) {
                    continue;
                }
                let mut o = *off;
                for a in 0..dim {
                    if mask >> a & 1 == 1 {
                        o[a] = -o[a];
                    }
                }
                let idx = table.index(&o);
                data[0][idx] = vals[0];
                for a in 0..dim {
                    let sign = if mask >> a & 1 == 1 { -1.0 } else { 1.0 };
                    data[1 + a][idx] = vals[1 + a] * sign;
                }
            }
        }
        table.data = data;
        Ok(table)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn correction_radius(&self) -> usize {
        self.radius
    }

    /// Number of entries per axis, `2n - 1`.
    pub fn extent(&self) -> usize {
        self.extent
    }

    fn index(&self, offset: &[isize; 3]) -> usize {
        let shift = self.grid.n() as isize - 1;
        (0..self.grid.dim()).fold(0, |acc, a| {
            acc * self.extent + (offset[a] + shift) as usize
        })
    }

    /// Table entry at lattice offset `δ` (each `|δ_a| <= n-1`).
    pub fn entry(&self, kernel: KernelId, offset: &[isize; 3]) -> Complex64 {
        self.data[kernel.slot()][self.index(offset)]
    }

    /// Raw symbol array of one kernel, lexicographic over the offsets with
    /// `-(n-1)` first.
    pub fn raw(&self, kernel: KernelId) -> &[Complex64] {
        &self.data[kernel.slot()]
    }
}

/// Cell integrals of `(G, ∂_1G, .., ∂_dG)` over `δh + [-h/2, h/2]^d`.
fn cell_integrals(dim: usize, k: f64, h: f64, off: &[isize; 3], tol: f64) -> Result<[Complex64; 4]> {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    let is_self = off[..dim].iter().all(|&v| v == 0);
    if is_self {
        // gradient entries vanish by oddness of the integrand
        let eval = |levels: usize, order: usize, transverse: usize| {
            let rule = graded_unit_rule(levels, order);
            radial_cube_integral(dim, 0.5 * h, &rule, transverse, &mut |r| {
                kernel_and_gradient(dim, k, &[r, 0.0, 0.0]).0
            })
        };
        let coarse = eval(30, 8, 12);
        let fine = eval(48, 12, 20);
        let est = (fine - coarse).norm();
        if est > tol * fine.norm() {
            return Err(Error::QuadratureNotConverged {
                offset: *off,
                estimate: est / fine.norm(),
            });
        }
        out[0] = fine;
        return Ok(out);
    }
    let center = [off[0] as f64 * h, off[1] as f64 * h, off[2] as f64 * h];
    let eval = |order: usize| -> [Complex64; 4] {
        let mut acc = [Complex64::new(0.0, 0.0); 4];
        for slot in 0..=dim {
            acc[slot] = box_integral(dim, &center, 0.5 * h, order, &mut |y| {
                let (g, grad) = kernel_and_gradient(dim, k, y);
                if slot == 0 {
                    g
                } else {
                    grad[slot - 1]
                }
            });
        }
        acc
    };
    let coarse = eval(14);
    let fine = eval(20);
    for slot in 0..=dim {
        let est = (fine[slot] - coarse[slot]).norm();
        let scale = fine[0].norm().max(fine[slot].norm());
        if est > tol * scale {
            return Err(Error::QuadratureNotConverged {
                offset: *off,
                estimate: est / scale,
            });
        }
    }
    out[..=dim].copy_from_slice(&fine[..=dim]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_3d_unit_radius() {
        let v = helmholtz_kernel(3, 2.0 * PI, &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - Complex64::new(1.0 / (4.0 * PI), 0.0)).norm() < 1e-15);
        let v = helmholtz_kernel(3, 0.0, &[0.0, 2.0, 0.0]).unwrap();
        assert!((v.re - 1.0 / (8.0 * PI)).abs() < 1e-16 && v.im == 0.0);
    }

    #[test]
    fn gradient_3d_unit_radius() {
        let g = kernel_gradient(3, 2.0 * PI, &[1.0, 0.0, 0.0]).unwrap();
        let want = (Complex64::new(-1.0, 2.0 * PI)) / (4.0 * PI);
        assert!((g[0] - want).norm() < 1e-15);
        assert_eq!(g[1], Complex64::new(0.0, 0.0));
        assert_eq!(g[2], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn kernel_2d_unit_argument() {
        // (i/4)(J0(1) + i Y0(1))
        let v = helmholtz_kernel(2, 1.0, &[0.6, 0.8, 0.0]).unwrap();
        let want = I * 0.25 * Complex64::new(0.7651976865579666, 0.08825696421567696);
        assert!((v - want).norm() < 1e-15);
    }

    #[test]
    fn origin_is_rejected() {
        assert!(matches!(
            helmholtz_kernel(3, 1.0, &[0.0; 3]),
            Err(Error::SingularPoint)
        ));
        assert!(kernel_gradient(2, 1.0, &[0.0; 3]).is_err());
    }

    #[test]
    fn gradient_is_odd() {
        for dim in [2, 3] {
            let x = [0.3, -0.2, 0.45];
            let mx = [-0.3, 0.2, -0.45];
            let g = kernel_gradient(dim, 7.0, &x).unwrap();
            let gm = kernel_gradient(dim, 7.0, &mx).unwrap();
            for a in 0..dim {
                assert!((g[a] + gm[a]).norm() < 1e-15 * g[a].norm().max(1.0));
            }
        }
    }

    #[test]
    fn table_radius_must_be_small() {
        let g = Grid::new(2, 5, 3.0).unwrap();
        let spec = CorrectionSpec {
            radius: 2,
            ..Default::default()
        };
        assert!(ConvTable::build(&g, &spec).is_err());
    }

    #[test]
    fn far_entries_are_point_samples() {
        let g = Grid::new(3, 6, 9.0).unwrap();
        let t = ConvTable::build(&g, &CorrectionSpec::default()).unwrap();
        let h = g.h();
        let want = helmholtz_kernel(3, 9.0, &[2.0 * h, 0.0, 0.0]).unwrap() * h.powi(3);
        assert_eq!(t.entry(KernelId::Scalar, &[2, 0, 0]), want);
        let grad = kernel_gradient(3, 9.0, &[2.0 * h, -h, 3.0 * h]).unwrap();
        for a in 0..3 {
            assert_eq!(t.entry(KernelId::Gradient(a), &[2, -1, 3]), grad[a] * h.powi(3));
        }
    }

    #[test]
    fn self_entry_gradients_vanish() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 5, 6.0).unwrap();
            let t = ConvTable::build(&g, &CorrectionSpec::default()).unwrap();
            for a in 0..dim {
                assert_eq!(t.entry(KernelId::Gradient(a), &[0, 0, 0]), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let step = 1e-5;
        for dim in [2, 3] {
            for x in [[0.3, -0.2, 0.45], [0.05, 0.01, -0.02], [1.3, 0.7, 0.2]] {
                let grad = kernel_gradient(dim, 9.0, &x).unwrap();
                for a in 0..dim {
                    let (mut xp, mut xm) = (x, x);
                    xp[a] += step;
                    xm[a] -= step;
                    let fd = (helmholtz_kernel(dim, 9.0, &xp).unwrap()
                        - helmholtz_kernel(dim, 9.0, &xm).unwrap())
                        / (2.0 * step);
                    let err = (fd - grad[a]).norm() / grad[a].norm();
                    assert!(err < 1e-6, "dim {dim} x {x:?} axis {a}: {err}");
                }
            }
        }
    }

    #[test]
    fn self_cell_small_kh_limit() {
        // ∫ over the unit cube of 1/(4π|y|), from an independent 40-digit quadrature
        const CUBE_SELF: f64 = 0.189_400_538_709_237_04;
        // ∫ over the unit cube of |y|
        const CUBE_R: f64 = 0.480_295_978_227_526_5;
        let (k, h) = (1.0, 0.01);
        let v = cell_integrals(3, k, h, &[0, 0, 0], 1e-10).unwrap()[0];
        // e^{ikr} = 1 + ikr - k²r²/2 - ik³r³/6 + O(k⁴r⁴), ∫ |y|² = 1/4
        let re = CUBE_SELF * h * h - k * k * CUBE_R * h.powi(4) / (8.0 * PI);
        let im = k * h.powi(3) / (4.0 * PI) - k.powi(3) * h.powi(5) / (96.0 * PI);
        let want = Complex64::new(re, im);
        assert!((v - want).norm() < 1e-9 * want.norm(), "{v} vs {want}");
    }

    #[test]
    fn table_parity_exhaustive() {
        for (dim, n) in [(2, 3), (2, 6), (3, 4), (3, 6)] {
            let g = Grid::new(dim, n, 8.0).unwrap();
            let t = ConvTable::build(&g, &CorrectionSpec::default()).unwrap();
            let r = n as isize - 1;
            let range = |a: usize| if a < dim { -r..=r } else { 0..=0 };
            for x in range(0) {
                for y in range(1) {
                    for z in range(2) {
                        let off = [x, y, z];
                        let neg = [-x, -y, -z];
                        assert_eq!(t.entry(KernelId::Scalar, &off), t.entry(KernelId::Scalar, &neg));
                        for a in 0..dim {
                            let mut flip = off;
                            flip[a] = -flip[a];
                            let e = t.entry(KernelId::Gradient(a), &off);
                            assert_eq!(e, -t.entry(KernelId::Gradient(a), &flip));
                            for b in (0..dim).filter(|&b| b != a) {
                                let mut fb = off;
                                fb[b] = -fb[b];
                                assert_eq!(e, t.entry(KernelId::Gradient(a), &fb));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn far_samples_satisfy_helmholtz() {
        // 4th-order Laplacian of far table samples at the physical point (0.3, 0.2)
        let k = 10.0;
        let residual = |n: usize, kernel: KernelId| {
            let g = Grid::new(2, n, k).unwrap();
            let t = ConvTable::build(&g, &CorrectionSpec::default()).unwrap();
            let s = (n + 1) / 20;
            let c = [6 * s as isize, 4 * s as isize, 0];
            let h2 = g.h() * g.h();
            let at = |dx: isize, dy: isize| t.entry(kernel, &[c[0] + dx, c[1] + dy, 0]);
            let mut lap = at(0, 0) * (-5.0);
            for (d, w) in [(1isize, 4.0 / 3.0), (2, -1.0 / 12.0)] {
                lap += (at(d, 0) + at(-d, 0) + at(0, d) + at(0, -d)) * w;
            }
            let center = at(0, 0);
            (lap / h2 + center * k * k).norm() / (center.norm() * k * k)
        };
        for kernel in [KernelId::Scalar, KernelId::Gradient(0), KernelId::Gradient(1)] {
            let coarse = residual(39, kernel);
            let fine = residual(79, kernel);
            assert!(fine < 1e-3, "{kernel:?}: {fine}");
            assert!(fine < coarse / 4.0, "{kernel:?}: {coarse} -> {fine}");
        }
    }
}
