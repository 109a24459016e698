//! Global sparse system assembled from the stencil library.
//!
//! Row `(c, i)` is column `c` of `α_iᵀ E_τ + β_iᵀ P_i E_τ`, where `P_i` maps the
//! local field to `[m E^1; ..; m E^d; Σ_a p^a E^a]` on `τ_i`. Rows and columns
//! both use the grid's flatten order.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::stencil::StencilLibrary;

/// Square sparse matrix in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    grid: Grid,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseSystem {
    /// Build from per-row entry lists; columns within a row must be unique.
    pub fn from_rows(grid: Grid, rows: Vec<Vec<(usize, Complex64)>>) -> Result<Self> {
        let n = grid.unknowns();
        if rows.len() != n {
            return Err(Error::DimensionMismatch(format!("{} rows for {n} unknowns", rows.len())));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) || row.last().is_some_and(|e| e.0 >= n) {
                return Err(Error::DimensionMismatch("duplicate or out-of-range column".into()));
            }
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            grid,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of rows (= columns).
    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn multiply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.size())
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum()
            })
            .collect()
    }

    /// Column-compressed copy: `(col_ptr, rows, vals)`.
    pub fn transpose_parts(&self) -> (Vec<usize>, Vec<usize>, Vec<Complex64>) {
        let n = self.size();
        let mut count = vec![0usize; n + 1];
        for &c in &self.cols {
            count[c + 1] += 1;
        }
        for c in 0..n {
            count[c + 1] += count[c];
        }
        let mut next = count.clone();
        let mut rows = vec![0; self.nnz()];
        let mut vals = vec![Complex64::new(0.0, 0.0); self.nnz()];
        for r in 0..n {
            let (cs, vs) = self.row(r);
            for (&c, v) in cs.iter().zip(vs) {
                rows[next[c]] = r;
                vals[next[c]] = *v;
                next[c] += 1;
            }
        }
        (count, rows, vals)
    }

    /// Coordinate text export: `row col re im` per line, 0-based.
    pub fn write_coo(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "% {} {} {}", self.size(), self.size(), self.nnz())?;
        for r in 0..self.size() {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(out, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

fn check_inputs(lib: &StencilLibrary, m: &ScalarField, p: &[ScalarField]) -> Result<()> {
    let g = lib.grid();
    if m.grid() != g || p.len() != g.dim() || p.iter().any(|f| f.grid() != g) {
        return Err(Error::DimensionMismatch(
            "medium fields and stencil library are on different grids".into(),
        ));
    }
    Ok(())
}

/// Sparse approximation of the dense system.
pub fn assemble(lib: &StencilLibrary, m: &ScalarField, p: &[ScalarField]) -> Result<SparseSystem> {
    check_inputs(lib, m, p)?;
    let g = *lib.grid();
    let dim = g.dim();
    let np = g.points();
    let blocks: Vec<Vec<Vec<(usize, Complex64)>>> = (0..np)
        .into_par_iter()
        .map(|pi| {
            let i = g.point_from_index(pi);
            let (t, pair) = lib.get(&g.classify(&i));
            let nt = t.tau().len();
            let js: Vec<usize> = t.tau().iter().map(|o| g.point_index(&t.locate(&i, o))).collect();
            (0..dim)
                .map(|c| {
                    let mut row = Vec::with_capacity(dim * nt);
                    for a in 0..dim {
                        for (s, &j) in js.iter().enumerate() {
                            let v = pair.alpha[(a * nt + s, c)]
                                + pair.beta[(a * nt + s, c)] * m.values()[j]
                                + pair.beta[(dim * nt + s, c)] * p[a].values()[j];
                            if v != Complex64::new(0.0, 0.0) {
                                row.push((a * np + j, v));
                            }
                        }
                    }
                    row
                })
                .collect()
        })
        .collect();
    let mut rows = vec![Vec::new(); g.unknowns()];
    for (pi, block) in blocks.into_iter().enumerate() {
        for (c, row) in block.into_iter().enumerate() {
            rows[c * np + pi] = row;
        }
    }
    SparseSystem::from_rows(g, rows)
}

/// Right-hand side of the sparse system: `α_iᵀ r_τ` at every point.
pub fn sparsify(lib: &StencilLibrary, r: &[Complex64]) -> Result<Vec<Complex64>> {
    let g = *lib.grid();
    if r.len() != g.unknowns() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} on a grid with {} unknowns",
            r.len(),
            g.unknowns()
        )));
    }
    let dim = g.dim();
    let np = g.points();
    let per_point: Vec<[Complex64; 3]> = (0..np)
        .into_par_iter()
        .map(|pi| {
            let i = g.point_from_index(pi);
            let (t, pair) = lib.get(&g.classify(&i));
            let nt = t.tau().len();
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for (s, o) in t.tau().iter().enumerate() {
                let j = g.point_index(&t.locate(&i, o));
                for a in 0..dim {
                    let v = r[a * np + j];
                    for (c, z) in out.iter_mut().enumerate().take(dim) {
                        *z += pair.alpha[(a * nt + s, c)] * v;
                    }
                }
            }
            out
        })
        .collect();
    let mut z = vec![Complex64::new(0.0, 0.0); g.unknowns()];
    for (pi, v) in per_point.iter().enumerate() {
        for c in 0..dim {
            z[c * np + pi] = v[c];
        }
    }
    Ok(z)
}
