//! Brute-force dense assembly and LU solution of the discrete system, for
//! tiny grids. Used as ground truth by the tests and by `solve --oracle`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::greens::{ConvTable, KernelId};
use crate::grid::Grid;

/// Default cap on the number of unknowns.
pub const DEFAULT_SIZE_GUARD: usize = 20_000;

/// Condition estimates above this are reported as singular.
const SINGULAR_CONDITION: f64 = 1e14;

/// Explicit matrix of the discrete operator, in the grid's flatten order.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    grid: Grid,
    matrix: Mat<Complex64>,
}

impl DenseSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    /// Matrix-vector product.
    pub fn multiply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.matrix.nrows();
        assert_eq!(x.len(), n);
        let xm = Mat::from_fn(n, 1, |i, _| x[i]);
        let y = &self.matrix * &xm;
        (0..n).map(|i| y[(i, 0)]).collect()
    }
}

/// Assemble `I + [k²G ⊗ diag(m) blocks] + [G^a ⊗ diag(p^c) blocks]`.
pub fn dense_assemble(
    table: &ConvTable,
    m: &ScalarField,
    p: &[ScalarField],
    guard: usize,
) -> Result<DenseSystem> {
    let grid = *table.grid();
    let size = grid.unknowns();
    if size > guard {
        return Err(Error::SizeGuard { size, limit: guard });
    }
    let dim = grid.dim();
    if m.grid() != &grid || p.len() != dim || p.iter().any(|f| f.grid() != &grid) {
        return Err(Error::DimensionMismatch("medium fields do not match the table grid".into()));
    }
    let np = grid.points();
    let k2 = grid.k() * grid.k();
    let points: Vec<_> = grid.iter_points().collect();
    let mut matrix = Mat::<Complex64>::zeros(size, size);
    for (pi, i) in points.iter().enumerate() {
        for (pj, j) in points.iter().enumerate() {
            let mut off = [0isize; 3];
            for a in 0..dim {
                off[a] = i.0[a] as isize - j.0[a] as isize;
            }
            let g = table.entry(KernelId::Scalar, &off) * k2 * m.values()[pj];
            for a in 0..dim {
                let row = a * np + pi;
                matrix[(row, a * np + pj)] += g;
                let ga = table.entry(KernelId::Gradient(a), &off);
                for c in 0..dim {
                    matrix[(row, c * np + pj)] += ga * p[c].values()[pj];
                }
            }
        }
    }
    for r in 0..size {
        matrix[(r, r)] += Complex64::new(1.0, 0.0);
    }
    Ok(DenseSystem { grid, matrix })
}

fn column(x: &[Complex64]) -> Mat<Complex64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

/// Hager's estimate of `‖A⁻¹‖₁` from a few solves with `A` and `A^*`.
fn inverse_norm1_estimate(lu: &PartialPivLu<Complex64>, n: usize) -> f64 {
    let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu.solve(column(&x));
        est = (0..n).map(|i| y[(i, 0)].norm()).sum::<f64>();
        let xi: Vec<Complex64> = (0..n)
            .map(|i| {
                let v = y[(i, 0)];
                if v.norm() > 0.0 {
                    v / v.norm()
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .collect();
        let z = lu.solve_adjoint(column(&xi));
        let (jmax, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].norm()))
            .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        let ztx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[i]).re).sum();
        if zmax <= ztx {
            break;
        }
        x.fill(Complex64::new(0.0, 0.0));
        x[jmax] = Complex64::new(1.0, 0.0);
    }
    est
}

/// Direct LU solution of `s x = b`.
pub fn dense_solve(s: &DenseSystem, b: &VectorField) -> Result<VectorField> {
    if b.grid() != &s.grid {
        return Err(Error::DimensionMismatch("right-hand side lives on a different grid".into()));
    }
    let n = s.matrix.nrows();
    let lu = s.matrix.partial_piv_lu();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| s.matrix[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let u = lu.U();
    let degenerate = (0..n).any(|i| {
        let v = u[(i, i)];
        v.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite()
    });
    if degenerate {
        return Err(Error::SingularDense { condition: f64::INFINITY });
    }
    let condition = norm1 * inverse_norm1_estimate(&lu, n);
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::SingularDense { condition });
    }
    let x = lu.solve(column(b.values()));
    VectorField::from_values(s.grid, (0..n).map(|i| x[(i, 0)]).collect())
}
