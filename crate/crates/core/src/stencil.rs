//! Per-category local stencils.
//!
//! For a point `i` with neighbourhood `τ` and (enlarged) complement `τ^c`
//! the dense equations restricted to the rows in `τ` split into a local block
//! `A_loc` acting on `τ` and a nonlocal block `M` acting on `τ^c`. The stencil
//! `α` spans the `d` smallest left singular vectors of `M` (conjugated), so
//! that `αᵀM` is as small as possible, and `β = A_locᵀα`.
//!
//! By translation invariance of the kernel tables the matrices depend only on
//! the point category, so `3^d` templates cover the whole grid.

use std::io::Write;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{ConvTable, KernelId};
use crate::grid::{AxisTag, Grid, MultiIndex, PointCategory};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Column counts up to this use a direct thin SVD of `M`.
const DIRECT_SVD_COLUMNS: usize = 4096;

/// Columns of `M` folded into the running QR at a time.
const QR_CHUNK: usize = 1024;

/// Offsets of a template.
///
/// Along interior axes coordinates are relative to the point; along boundary
/// axes they are absolute grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    category: PointCategory,
    tau: Vec<[isize; 3]>,
    tau_c: Vec<[isize; 3]>,
}

impl Template {
    pub fn category(&self) -> &PointCategory {
        &self.category
    }

    pub fn tau(&self) -> &[[isize; 3]] {
        &self.tau
    }

    pub fn tau_c(&self) -> &[[isize; 3]] {
        &self.tau_c
    }

    /// Grid point addressed by template coordinate `t` for anchor point `i`.
    pub fn locate(&self, i: &MultiIndex, t: &[isize; 3]) -> MultiIndex {
        let mut c = [1usize; 3];
        for a in 0..self.category.dim() {
            c[a] = match self.category.tag(a) {
                AxisTag::Interior => (i.0[a] as isize + t[a]) as usize,
                _ => t[a] as usize,
            };
        }
        MultiIndex(c)
    }
}

fn product(ranges: &[(isize, isize)]) -> Vec<[isize; 3]> {
    let mut out = vec![[0isize; 3]];
    for (a, &(lo, hi)) in ranges.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |v| {
                    let mut q = p;
                    q[a] = v;
                    q
                })
            })
            .collect();
    }
    out
}

/// Template of a point category.
pub fn build_template(grid: &Grid, category: &PointCategory) -> Result<Template> {
    let n = grid.n() as isize;
    if n < 5 {
        return Err(Error::InvalidGrid(format!("stencil templates need n >= 5, got {n}")));
    }
    if category.dim() != grid.dim() {
        return Err(Error::DimensionMismatch("category and grid dimension differ".into()));
    }
    let mut tau_r = Vec::new();
    let mut outer_r = Vec::new();
    for a in 0..grid.dim() {
        let (t, o) = match category.tag(a) {
            AxisTag::Interior => ((-1, 1), (2 - n, n - 2)),
            AxisTag::Low => ((1, 2), (1, n)),
            AxisTag::High => ((n - 1, n), (1, n)),
        };
        tau_r.push(t);
        outer_r.push(o);
    }
    let tau = product(&tau_r);
    let tau_c = product(&outer_r)
        .into_iter()
        .filter(|p| {
            !(0..grid.dim()).all(|a| tau_r[a].0 <= p[a] && p[a] <= tau_r[a].1)
        })
        .collect();
    Ok(Template {
        category: *category,
        tau,
        tau_c,
    })
}

fn diff(x: &[isize; 3], y: &[isize; 3]) -> [isize; 3] {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2]]
}

/// Column `(c, s)` of the block `[k²G ⊕ .. ⊕ k²G | G^1; ..; G^d]` with rows
/// over `rows` and the column point `col`.
fn block_column(
    table: &ConvTable,
    rows: &[[isize; 3]],
    col: &[isize; 3],
    c: usize,
    out: &mut [Complex64],
) {
    let dim = table.grid().dim();
    let k2 = table.grid().k() * table.grid().k();
    let nt = rows.len();
    out.fill(ZERO);
    if c < dim {
        for (t, r) in rows.iter().enumerate() {
            out[c * nt + t] = table.entry(KernelId::Scalar, &diff(r, col)) * k2;
        }
    } else {
        for a in 0..dim {
            for (t, r) in rows.iter().enumerate() {
                out[a * nt + t] = table.entry(KernelId::Gradient(a), &diff(r, col));
            }
        }
    }
}

fn check_table(template: &Template, table: &ConvTable) -> Result<()> {
    let g = table.grid();
    if g.dim() != template.category.dim() {
        return Err(Error::DimensionMismatch("template and table dimension differ".into()));
    }
    let reach = g.n() as isize - 1;
    let ok = template.tau.iter().all(|t| {
        template
            .tau_c
            .iter()
            .all(|s| diff(t, s)[..g.dim()].iter().all(|v| v.abs() <= reach))
    });
    if !ok {
        return Err(Error::DimensionMismatch("template offsets exceed the table".into()));
    }
    Ok(())
}

/// Explicit `A_loc` (`d|τ| × (d+1)|τ|`) and `M` (`d|τ| × (d+1)|τ^c|`).
///
/// `M` has `O(n^d)` columns; prefer [`build_stencil`] for large grids.
pub fn assemble_blocks(
    template: &Template,
    table: &ConvTable,
) -> Result<(Mat<Complex64>, Mat<Complex64>)> {
    check_table(template, table)?;
    let a_loc = assemble_set(template, table, &template.tau);
    let m = assemble_set(template, table, &template.tau_c);
    Ok((a_loc, m))
}

fn assemble_set(template: &Template, table: &ConvTable, cols: &[[isize; 3]]) -> Mat<Complex64> {
    let dim = table.grid().dim();
    let rows = dim * template.tau.len();
    let mut mat = Mat::zeros(rows, (dim + 1) * cols.len());
    let mut buf = vec![ZERO; rows];
    for c in 0..=dim {
        for (s, col) in cols.iter().enumerate() {
            block_column(table, &template.tau, col, c, &mut buf);
            for (r, v) in buf.iter().enumerate() {
                mat[(r, c * cols.len() + s)] = *v;
            }
        }
    }
    mat
}

/// `α`, `β` and the residual singular values of one category.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilPair {
    /// `d|τ| × d`, conjugate-orthonormal columns.
    pub alpha: Mat<Complex64>,
    /// `(d+1)|τ| × d`.
    pub beta: Mat<Complex64>,
    /// The `d` smallest singular values of `M`, ascending.
    pub sigma: Vec<f64>,
    /// Largest singular value of `M`.
    pub sigma_max: f64,
}

/// Left singular vectors and descending singular values from a thin SVD.
fn svd_left(m: MatRef<'_, Complex64>) -> Result<(Mat<Complex64>, Vec<f64>)> {
    let svd = m.thin_svd().map_err(|e| Error::Svd(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let sigma = (0..s.nrows()).map(|i| s[i].re).collect();
    Ok((svd.U().to_owned(), sigma))
}

/// Left singular data of an `nrows × ncols` matrix supplied column by column,
/// through a running QR factorization of its adjoint: with `M^* = QR` the
/// left singular vectors of `M` are those of `R^*`.
fn streamed_left(
    nrows: usize,
    ncols: usize,
    fill: &mut dyn FnMut(usize, &mut [Complex64]),
) -> Result<(Mat<Complex64>, Vec<f64>)> {
    let chunk = QR_CHUNK.max(nrows);
    let mut r = Mat::<Complex64>::zeros(nrows, nrows);
    let mut stack = Mat::<Complex64>::zeros(nrows + chunk, nrows);
    let mut col = vec![ZERO; nrows];
    let mut start = 0;
    while start < ncols {
        let end = (start + chunk).min(ncols);
        stack.fill(ZERO);
        for i in 0..nrows {
            for j in i..nrows {
                stack[(i, j)] = r[(i, j)];
            }
        }
        for (row, j) in (start..end).enumerate() {
            fill(j, &mut col);
            for (i, v) in col.iter().enumerate() {
                stack[(nrows + row, i)] = v.conj();
            }
        }
        let qr = stack.qr();
        r.copy_from(qr.thin_R());
        start = end;
    }
    let rh = r.adjoint().to_owned();
    svd_left(rh.as_ref())
}

fn pair_from_left(
    u: Mat<Complex64>,
    sigma_desc: Vec<f64>,
    a_loc: &Mat<Complex64>,
    dim: usize,
) -> StencilPair {
    let rows = u.nrows();
    let last = sigma_desc.len();
    let alpha = Mat::from_fn(rows, dim, |i, c| u[(i, last - 1 - c)].conj());
    let sigma = (0..dim).map(|c| sigma_desc[last - 1 - c]).collect();
    let beta = compute_beta(a_loc, &alpha);
    StencilPair {
        alpha,
        beta,
        sigma,
        sigma_max: sigma_desc[0],
    }
}

/// `α = conj(U_small)` and the `d` smallest singular values (ascending) of an
/// explicit `M`.
pub fn compute_alpha(m: &Mat<Complex64>, dim: usize) -> Result<(Mat<Complex64>, Vec<f64>)> {
    if m.nrows() < dim || m.nrows() > m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "M is {}×{}; need d <= rows <= cols",
            m.nrows(),
            m.ncols()
        )));
    }
    let (u, s) = if m.ncols() <= DIRECT_SVD_COLUMNS {
        svd_left(m.as_ref())?
    } else {
        streamed_left(m.nrows(), m.ncols(), &mut |j, out| {
            for (i, v) in out.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        })?
    };
    let last = s.len();
    let alpha = Mat::from_fn(m.nrows(), dim, |i, c| u[(i, last - 1 - c)].conj());
    Ok((alpha, (0..dim).map(|c| s[last - 1 - c]).collect()))
}

/// `β = A_locᵀ α` (plain transpose).
pub fn compute_beta(a_loc: &Mat<Complex64>, alpha: &Mat<Complex64>) -> Mat<Complex64> {
    a_loc.transpose() * alpha
}

/// Which nonlocal block the stencils are fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StencilMode {
    /// The full block `[k²G ⊕ .. ⊕ k²G | G^1; ..; G^d]`.
    #[default]
    Full,
    /// Only `k²G ⊕ .. ⊕ k²G`, valid when every `p^a` vanishes. The stencil is
    /// block-diagonal, one scalar stencil per component, so the components
    /// stay decoupled.
    Decoupled,
}

/// Template and stencil pair for one category without materializing `M`.
pub fn build_stencil(table: &ConvTable, category: &PointCategory) -> Result<(Template, StencilPair)> {
    build_stencil_with(table, category, StencilMode::Full)
}

pub fn build_stencil_with(
    table: &ConvTable,
    category: &PointCategory,
    mode: StencilMode,
) -> Result<(Template, StencilPair)> {
    let grid = table.grid();
    let dim = grid.dim();
    let template = build_template(grid, category)?;
    check_table(&template, table)?;
    let a_loc = assemble_set(&template, table, &template.tau);
    let nt = template.tau.len();
    let nc = template.tau_c.len();
    let pair = match mode {
        StencilMode::Full => {
            let rows = dim * nt;
            let ncols = (dim + 1) * nc;
            let (u, s) = if ncols <= DIRECT_SVD_COLUMNS {
                let m = assemble_set(&template, table, &template.tau_c);
                svd_left(m.as_ref())?
            } else {
                streamed_left(rows, ncols, &mut |j, out| {
                    block_column(table, &template.tau, &template.tau_c[j % nc], j / nc, out)
                })?
            };
            pair_from_left(u, s, &a_loc, dim)
        }
        StencilMode::Decoupled => {
            let k2 = grid.k() * grid.k();
            let mut fill = |j: usize, out: &mut [Complex64]| {
                for (t, r) in template.tau.iter().enumerate() {
                    out[t] = table.entry(KernelId::Scalar, &diff(r, &template.tau_c[j])) * k2;
                }
            };
            let (u, s) = if nc <= DIRECT_SVD_COLUMNS {
                let mut m = Mat::<Complex64>::zeros(nt, nc);
                let mut col = vec![ZERO; nt];
                for j in 0..nc {
                    fill(j, &mut col);
                    for (t, v) in col.iter().enumerate() {
                        m[(t, j)] = *v;
                    }
                }
                svd_left(m.as_ref())?
            } else {
                streamed_left(nt, nc, &mut fill)?
            };
            let last = s.len() - 1;
            let alpha = Mat::from_fn(dim * nt, dim, |i, c| {
                if i / nt == c {
                    u[(i % nt, last)].conj()
                } else {
                    ZERO
                }
            });
            let beta = compute_beta(&a_loc, &alpha);
            StencilPair {
                alpha,
                beta,
                sigma: vec![s[last]; dim],
                sigma_max: s[0],
            }
        }
    };
    Ok((template, pair))
}

/// Stencils for all `3^d` categories of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilLibrary {
    grid: Grid,
    entries: Vec<(Template, StencilPair)>,
}

impl StencilLibrary {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, category: &PointCategory) -> (&Template, &StencilPair) {
        let (t, p) = &self.entries[category.index()];
        (t, p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Template, &StencilPair)> {
        self.entries.iter().map(|(t, p)| (t, p))
    }

    /// One line per category: label, the `d` smallest singular values and the
    /// largest.
    pub fn write_singular_values(&self, out: &mut dyn Write) -> Result<()> {
        for (t, p) in &self.entries {
            write!(out, "{}", t.category())?;
            for s in &p.sigma {
                write!(out, " {s:.6e}")?;
            }
            writeln!(out, " {:.6e}", p.sigma_max)?;
        }
        Ok(())
    }
}

pub fn build_library(table: &ConvTable) -> Result<StencilLibrary> {
    build_library_with(table, StencilMode::Full)
}

pub fn build_library_with(table: &ConvTable, mode: StencilMode) -> Result<StencilLibrary> {
    let grid = *table.grid();
    let entries = PointCategory::all(grid.dim())
        .par_iter()
        .map(|c| build_stencil_with(table, c, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(StencilLibrary { grid, entries })
}
