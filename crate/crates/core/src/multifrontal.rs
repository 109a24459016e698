//! Multifrontal sparse LU with a geometric nested-dissection ordering.
//!
//! The grid is split recursively by one-point-thick separator planes along the
//! longest box axis. Every box becomes a front holding its separator (or, at
//! the leaves, all of its points) plus the halo of the box, which consists of
//! points of ancestor separators only. Fronts are factored in postorder with
//! partial pivoting inside the pivot block; their Schur complements are
//! extend-added into the parent.
//!
//! This works for any matrix whose couplings stay within the 3^d
//! neighbourhood of a point, with the `d` unknowns of a point kept together.

use faer::linalg::lu::partial_pivoting::factor::{lu_in_place, lu_in_place_scratch};
use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_unit_lower_triangular_in_place,
    solve_upper_triangular_in_place,
};
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::{Accum, Mat, Par};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sparse::SparseSystem;

/// Boxes whose longest side is at most this are not split further.
const LEAF_SIDE: usize = 3;

#[derive(Debug, Clone, Copy)]
struct GridBox {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl GridBox {
    fn points(&self, grid: &Grid) -> Vec<usize> {
        let mut out = Vec::new();
        let d = grid.dim();
        let mut c = self.lo;
        loop {
            out.push((0..d).fold(0, |acc, a| acc * grid.n() + c[a] - 1));
            let mut a = d;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                if c[a] < self.hi[a] {
                    c[a] += 1;
                    break;
                }
                c[a] = self.lo[a];
            }
        }
    }

    fn halo(&self, grid: &Grid) -> Vec<usize> {
        let d = grid.dim();
        let mut outer = *self;
        for a in 0..d {
            outer.lo[a] = self.lo[a].saturating_sub(1).max(1);
            outer.hi[a] = (self.hi[a] + 1).min(grid.n());
        }
        outer
            .points(grid)
            .into_iter()
            .filter(|&p| {
                let i = grid.point_from_index(p);
                !(0..d).all(|a| self.lo[a] <= i.0[a] && i.0[a] <= self.hi[a])
            })
            .collect()
    }
}

#[derive(Debug)]
struct Node {
    /// Pivot unknowns, in front order.
    pivots: Vec<usize>,
    /// Remaining front unknowns, in front order.
    boundary: Vec<usize>,
    children: Vec<usize>,
    /// Packed unit-lower `L11` and upper `U11`.
    lu: Mat<Complex64>,
    /// Row `i` of `P F11` is row `perm[i]` of `F11`.
    perm: Vec<usize>,
    l21: Mat<Complex64>,
    u12: Mat<Complex64>,
}

/// Summary of a factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorStats {
    pub fronts: usize,
    pub max_front: usize,
    /// Stored entries of `L` and `U`.
    pub factor_entries: usize,
}

/// LU factors of a [`SparseSystem`].
#[derive(Debug)]
pub struct SparseFactorization {
    grid: Grid,
    size: usize,
    nodes: Vec<Node>,
    stats: FactorStats,
}

fn dissect(grid: &Grid, b: GridBox, nodes: &mut Vec<(Vec<usize>, Vec<usize>, GridBox)>) -> usize {
    let d = grid.dim();
    let (axis, side) = (0..d)
        .map(|a| (a, b.hi[a] + 1 - b.lo[a]))
        .max_by_key(|&(a, s)| (s, usize::MAX - a))
        .unwrap();
    if side <= LEAF_SIDE {
        nodes.push((b.points(grid), Vec::new(), b));
        return nodes.len() - 1;
    }
    let mid = (b.lo[axis] + b.hi[axis]) / 2;
    let mut left = b;
    left.hi[axis] = mid - 1;
    let mut right = b;
    right.lo[axis] = mid + 1;
    let mut sep = b;
    sep.lo[axis] = mid;
    sep.hi[axis] = mid;
    let mut children = Vec::new();
    for part in [left, right] {
        if part.lo[axis] <= part.hi[axis] {
            children.push(dissect(grid, part, nodes));
        }
    }
    nodes.push((sep.points(grid), children, b));
    nodes.len() - 1
}

fn expand(points: &[usize], dim: usize, np: usize) -> Vec<usize> {
    points
        .iter()
        .flat_map(|&p| (0..dim).map(move |c| c * np + p))
        .collect()
}

/// Factor `s` with nested dissection.
pub fn factorize(s: &SparseSystem) -> Result<SparseFactorization> {
    let grid = *s.grid();
    let dim = grid.dim();
    let np = grid.points();
    let n = s.size();
    let par = faer::get_global_parallelism();

    let mut layout = Vec::new();
    let whole = GridBox {
        lo: [1; 3],
        hi: [grid.n(), if dim > 1 { grid.n() } else { 1 }, if dim > 2 { grid.n() } else { 1 }],
    };
    dissect(&grid, whole, &mut layout);

    let mut node_of = vec![usize::MAX; np];
    for (id, (pts, _, _)) in layout.iter().enumerate() {
        for &p in pts {
            node_of[p] = id;
        }
    }
    debug_assert!(node_of.iter().all(|&v| v != usize::MAX));

    let (col_ptr, col_rows, col_vals) = s.transpose_parts();
    let tiny = f64::EPSILON * s.max_abs();
    let mut position = vec![usize::MAX; n];
    let mut nodes: Vec<Node> = Vec::with_capacity(layout.len());
    let mut pending: Vec<(usize, Mat<Complex64>)> = Vec::new();
    let mut stats = FactorStats {
        fronts: layout.len(),
        max_front: 0,
        factor_entries: 0,
    };

    for (id, (pts, children, b)) in layout.into_iter().enumerate() {
        let pivots = expand(&pts, dim, np);
        let boundary = expand(&b.halo(&grid), dim, np);
        let npiv = pivots.len();
        let nf = npiv + boundary.len();
        stats.max_front = stats.max_front.max(nf);
        for (k, &u) in pivots.iter().chain(&boundary).enumerate() {
            position[u] = k;
        }
        let mut front = Mat::<Complex64>::zeros(nf, nf);

        // original entries not yet eliminated
        for (k, &u) in pivots.iter().enumerate() {
            let (cols, vals) = s.row(u);
            for (&c, v) in cols.iter().zip(vals) {
                if node_of[c % np] >= id {
                    front[(k, position[c])] += *v;
                }
            }
            for e in col_ptr[u]..col_ptr[u + 1] {
                let r = col_rows[e];
                if node_of[r % np] > id {
                    front[(position[r], k)] += col_vals[e];
                }
            }
        }

        // extend-add of the children
        for &child in &children {
            let at = pending.iter().position(|(c, _)| *c == child).expect("child update");
            let (_, update) = pending.swap_remove(at);
            let idx: Vec<usize> = nodes[child].boundary.iter().map(|&u| position[u]).collect();
            for (j, &fj) in idx.iter().enumerate() {
                for (i, &fi) in idx.iter().enumerate() {
                    front[(fi, fj)] += update[(i, j)];
                }
            }
        }

        // dense partial factorization
        let mut perm = vec![0usize; npiv];
        let mut perm_inv = vec![0usize; npiv];
        {
            let f11 = front.as_mut().submatrix_mut(0, 0, npiv, npiv);
            let mut buf = MemBuffer::new(lu_in_place_scratch::<usize, Complex64>(
                npiv,
                npiv,
                par,
                Default::default(),
            ));
            lu_in_place(f11, &mut perm, &mut perm_inv, par, MemStack::new(&mut buf), Default::default());
        }
        for k in 0..npiv {
            let v = front[(k, k)];
            if !(v.norm() > tiny) || !v.re.is_finite() || !v.im.is_finite() {
                let u = pivots[k];
                let pt = grid.point_from_index(u % np);
                for &w in pivots.iter().chain(&boundary) {
                    position[w] = usize::MAX;
                }
                return Err(Error::SingularPivot {
                    point: pt.0,
                    component: u / np,
                });
            }
        }
        let nb = boundary.len();
        let lu = front.as_ref().submatrix(0, 0, npiv, npiv).to_owned();
        let mut u12 = Mat::from_fn(npiv, nb, |i, j| front[(perm[i], npiv + j)]);
        let mut l21 = front.as_ref().submatrix(npiv, 0, nb, npiv).to_owned();
        solve_unit_lower_triangular_in_place(lu.as_ref(), u12.as_mut(), par);
        solve_lower_triangular_in_place(lu.as_ref().transpose(), l21.as_mut().transpose_mut(), par);
        if nb > 0 {
            let mut schur = front.as_ref().submatrix(npiv, npiv, nb, nb).to_owned();
            matmul(
                schur.as_mut(),
                Accum::Add,
                l21.as_ref(),
                u12.as_ref(),
                Complex64::new(-1.0, 0.0),
                par,
            );
            pending.push((id, schur));
        }
        for &w in pivots.iter().chain(&boundary) {
            position[w] = usize::MAX;
        }
        stats.factor_entries += npiv * npiv + 2 * npiv * nb;
        nodes.push(Node {
            pivots,
            boundary,
            children,
            lu,
            perm,
            l21,
            u12,
        });
    }
    debug_assert!(pending.is_empty());
    Ok(SparseFactorization {
        grid,
        size: n,
        nodes,
        stats,
    })
}

impl SparseFactorization {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stats(&self) -> FactorStats {
        self.stats
    }

    /// Number of fronts whose pivots include unknowns of a child front.
    pub fn tree_depth(&self) -> usize {
        let mut depth = vec![1usize; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                depth[id] = depth[id].max(depth[c] + 1);
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [Complex64]) -> Result<()> {
        if x.len() != self.size {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a system of size {}",
                x.len(),
                self.size
            )));
        }
        let par = Par::Seq;
        for node in &self.nodes {
            let np = node.pivots.len();
            let mut y = Mat::from_fn(np, 1, |i, _| x[node.pivots[node.perm[i]]]);
            solve_unit_lower_triangular_in_place(node.lu.as_ref(), y.as_mut(), par);
            if !node.boundary.is_empty() {
                let mut t = Mat::<Complex64>::zeros(node.boundary.len(), 1);
                matmul(t.as_mut(), Accum::Replace, node.l21.as_ref(), y.as_ref(), Complex64::new(1.0, 0.0), par);
                for (k, &u) in node.boundary.iter().enumerate() {
                    x[u] -= t[(k, 0)];
                }
            }
            for (k, &u) in node.pivots.iter().enumerate() {
                x[u] = y[(k, 0)];
            }
        }
        for node in self.nodes.iter().rev() {
            let mut z = Mat::from_fn(node.pivots.len(), 1, |i, _| x[node.pivots[i]]);
            if !node.boundary.is_empty() {
                let xb = Mat::from_fn(node.boundary.len(), 1, |i, _| x[node.boundary[i]]);
                matmul(z.as_mut(), Accum::Add, node.u12.as_ref(), xb.as_ref(), Complex64::new(-1.0, 0.0), par);
            }
            solve_upper_triangular_in_place(node.lu.as_ref(), z.as_mut(), par);
            for (k, &u) in node.pivots.iter().enumerate() {
                x[u] = z[(k, 0)];
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff;
    use rand::{Rng, SeedableRng};

    /// Random matrix with the sparsity of the grid neighbourhoods.
    fn random_local(grid: Grid, diag: f64, seed: u64) -> SparseSystem {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let np = grid.points();
        let dim = grid.dim();
        let mut rows = vec![Vec::new(); grid.unknowns()];
        for i in grid.iter_points() {
            let pi = grid.point_index(&i);
            let nb: Vec<usize> = grid.neighborhood(&i).iter().map(|j| grid.point_index(j)).collect();
            for c in 0..dim {
                for a in 0..dim {
                    for &j in &nb {
                        let mut v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                        if j == pi && a == c {
                            v += diag;
                        }
                        rows[c * np + pi].push((a * np + j, v));
                    }
                }
            }
        }
        SparseSystem::from_rows(grid, rows).unwrap()
    }

    fn random_vec(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn identity_system() {
        let g = Grid::new(2, 7, 1.0).unwrap();
        let rows = (0..g.unknowns()).map(|r| vec![(r, Complex64::new(1.0, 0.0))]).collect();
        let s = SparseSystem::from_rows(g, rows).unwrap();
        let f = factorize(&s).unwrap();
        let b = random_vec(g.unknowns(), 1);
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn solves_random_local_systems() {
        for (dim, n, diag) in [(2, 5, 30.0), (2, 16, 30.0), (3, 6, 60.0), (3, 9, 80.0), (2, 12, 0.0)] {
            let g = Grid::new(dim, n, 1.0).unwrap();
            let s = random_local(g, diag, 3 + n as u64);
            let f = factorize(&s).unwrap();
            let x = random_vec(g.unknowns(), 4);
            let b = s.multiply(&x);
            let got = f.solve(&b).unwrap();
            let res = rel_diff(&s.multiply(&got), &b);
            assert!(res < 1e-10, "dim {dim} n {n}: residual {res}");
            if diag > 0.0 {
                assert!(rel_diff(&got, &x) < 1e-10);
            }
        }
    }

    #[test]
    fn dissection_builds_a_tree() {
        let g = Grid::new(2, 31, 1.0).unwrap();
        let s = random_local(g, 30.0, 9);
        let f = factorize(&s).unwrap();
        let st = f.stats();
        assert!(st.fronts > 30);
        assert!(f.tree_depth() >= 5);
        // top separator plus a thin halo, far below the full system
        assert!(st.max_front < 4 * 2 * 31);
    }

    #[test]
    fn singular_pivot_is_reported() {
        let g = Grid::new(2, 5, 1.0).unwrap();
        let np = g.points();
        let target = g.point_index(&crate::grid::MultiIndex::new(&[3, 2]));
        let rows = (0..g.unknowns())
            .map(|r| {
                let v = if r == np + target { 0.0 } else { 1.0 };
                vec![(r, Complex64::new(v, 0.0))]
            })
            .collect();
        let s = SparseSystem::from_rows(g, rows).unwrap();
        match factorize(&s) {
            Err(Error::SingularPivot { point, component }) => {
                assert_eq!(point, [3, 2, 1]);
                assert_eq!(component, 1);
            }
            other => panic!("expected a singular pivot, got {other:?}"),
        }
    }

    #[test]
    fn factorization_is_deterministic() {
        let g = Grid::new(2, 10, 1.0).unwrap();
        let s = random_local(g, 30.0, 21);
        let b = random_vec(g.unknowns(), 22);
        let x1 = factorize(&s).unwrap().solve(&b).unwrap();
        let x2 = factorize(&s).unwrap().solve(&b).unwrap();
        assert_eq!(x1, x2);
    }
}
