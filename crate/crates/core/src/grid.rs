//! Uniform Cartesian grid over the unit cube, multi-index arithmetic and the
//! canonical ordering of unknowns.
//!
//! Grid points carry 1-based multi-indices `i = (i_1, .., i_d)` with
//! `1 <= i_a <= n`, located at `x = i h` with `h = 1/(n+1)`. Field components
//! are 0-based. Unknowns are flattened component-major, then lexicographically
//! in the multi-index with the first axis most significant.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Position of a coordinate relative to the grid boundary along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AxisTag {
    Low,
    Interior,
    High,
}

impl AxisTag {
    fn code(self) -> usize {
        match self {
            AxisTag::Low => 0,
            AxisTag::Interior => 1,
            AxisTag::High => 2,
        }
    }

    fn from_code(code: usize) -> Self {
        match code {
            0 => AxisTag::Low,
            1 => AxisTag::Interior,
            _ => AxisTag::High,
        }
    }
}

/// Per-axis boundary classification of a grid point. There are exactly
/// `3^d` categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointCategory {
    dim: usize,
    tags: [AxisTag; 3],
}

impl PointCategory {
    pub fn new(tags: &[AxisTag]) -> Self {
        assert!(tags.len() == 2 || tags.len() == 3, "dimension must be 2 or 3");
        let mut all = [AxisTag::Interior; 3];
        all[..tags.len()].copy_from_slice(tags);
        Self {
            dim: tags.len(),
            tags: all,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tags(&self) -> &[AxisTag] {
        &self.tags[..self.dim]
    }

    pub fn tag(&self, axis: usize) -> AxisTag {
        self.tags[axis]
    }

    /// Dense index in `0..3^d`, first axis most significant.
    pub fn index(&self) -> usize {
        self.tags().iter().fold(0, |acc, t| acc * 3 + t.code())
    }

    pub fn from_index(dim: usize, mut index: usize) -> Self {
        let mut tags = [AxisTag::Interior; 3];
        for axis in (0..dim).rev() {
            tags[axis] = AxisTag::from_code(index % 3);
            index /= 3;
        }
        Self::new(&tags[..dim])
    }

    /// All `3^d` categories in index order.
    pub fn all(dim: usize) -> Vec<Self> {
        (0..3usize.pow(dim as u32))
            .map(|i| Self::from_index(dim, i))
            .collect()
    }

    pub fn is_interior(&self) -> bool {
        self.tags().iter().all(|&t| t == AxisTag::Interior)
    }
}

impl std::fmt::Display for PointCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: String = self
            .tags()
            .iter()
            .map(|t| match t {
                AxisTag::Low => 'L',
                AxisTag::Interior => 'I',
                AxisTag::High => 'H',
            })
            .collect();
        f.write_str(&s)
    }
}

/// A 1-based grid multi-index. Unused trailing coordinates (in 2D) are 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub [usize; 3]);

impl MultiIndex {
    pub fn new(coords: &[usize]) -> Self {
        let mut c = [1; 3];
        c[..coords.len()].copy_from_slice(coords);
        MultiIndex(c)
    }
}

/// Uniform grid on `(0,1)^d` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    k: f64,
}

impl Grid {
    /// Grid with `n` interior points per axis and background wave number `k`.
    pub fn new(dim: usize, n: usize, k: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2,3}}")));
        }
        if n == 0 {
            return Err(Error::InvalidGrid("n must be positive".into()));
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidGrid(format!("wave number {k} must be finite and >= 0")));
        }
        Ok(Self {
            dim,
            n,
            h: 1.0 / (n as f64 + 1.0),
            k,
        })
    }

    /// Grid resolving the background wavelength with `ppw` points:
    /// `n + 1 = round(ppw k / 2π)`.
    pub fn from_wavelength(dim: usize, k: f64, ppw: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidGrid(format!("wave number {k} must be positive")));
        }
        if !(ppw >= 2.0) {
            return Err(Error::InvalidGrid(format!("points per wavelength {ppw} < 2")));
        }
        let cells = (ppw * k / (2.0 * PI)).round() as usize;
        if cells < 4 {
            return Err(Error::InvalidGrid(format!(
                "n = {} is too coarse for a 3-point stencil (need n >= 3)",
                cells.saturating_sub(1)
            )));
        }
        Self::new(dim, cells - 1, k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Number of grid points, `n^d`.
    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Number of scalar unknowns, `d n^d`.
    pub fn unknowns(&self) -> usize {
        self.dim * self.points()
    }

    pub fn contains(&self, i: &MultiIndex) -> bool {
        (0..3).all(|a| {
            if a < self.dim {
                (1..=self.n).contains(&i.0[a])
            } else {
                i.0[a] == 1
            }
        })
    }

    /// Physical coordinates `i h` of a grid point.
    pub fn position(&self, i: &MultiIndex) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = i.0[a] as f64 * self.h;
        }
        x
    }

    pub fn classify(&self, i: &MultiIndex) -> PointCategory {
        let mut tags = [AxisTag::Interior; 3];
        for a in 0..self.dim {
            tags[a] = if i.0[a] == 1 {
                AxisTag::Low
            } else if i.0[a] == self.n {
                AxisTag::High
            } else {
                AxisTag::Interior
            };
        }
        PointCategory::new(&tags[..self.dim])
    }

    /// In-bounds points `j` with `|j - i|_inf <= 1`, lexicographic order.
    pub fn neighborhood(&self, i: &MultiIndex) -> Vec<MultiIndex> {
        let ranges: Vec<(usize, usize)> = (0..self.dim)
            .map(|a| (i.0[a].max(2) - 1, (i.0[a] + 1).min(self.n)))
            .collect();
        let mut out = Vec::with_capacity(3usize.pow(self.dim as u32));
        let mut cur = MultiIndex([1; 3]);
        self.product_into(&ranges, 0, &mut cur, &mut out);
        out
    }

    fn product_into(
        &self,
        ranges: &[(usize, usize)],
        axis: usize,
        cur: &mut MultiIndex,
        out: &mut Vec<MultiIndex>,
    ) {
        if axis == ranges.len() {
            out.push(*cur);
            return;
        }
        for v in ranges[axis].0..=ranges[axis].1 {
            cur.0[axis] = v;
            self.product_into(ranges, axis + 1, cur, out);
        }
    }

    /// Lexicographic position of a point in `0..n^d`.
    pub fn point_index(&self, i: &MultiIndex) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.n + (i.0[a] - 1))
    }

    pub fn point_from_index(&self, mut p: usize) -> MultiIndex {
        let mut c = [1; 3];
        for a in (0..self.dim).rev() {
            c[a] = p % self.n + 1;
            p /= self.n;
        }
        MultiIndex(c)
    }

    /// Linear unknown index of `(component, i)`; component is 0-based.
    pub fn flatten(&self, component: usize, i: &MultiIndex) -> usize {
        debug_assert!(component < self.dim);
        component * self.points() + self.point_index(i)
    }

    pub fn unflatten(&self, index: usize) -> (usize, MultiIndex) {
        let np = self.points();
        (index / np, self.point_from_index(index % np))
    }

    /// Iterate all grid points in lexicographic order.
    pub fn iter_points(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.points()).map(move |p| self.point_from_index(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_from_wavelength_matches_table_sizes() {
        let g = Grid::from_wavelength(2, 2.0 * PI * 20.0, 6.0).unwrap();
        assert_eq!(g.n(), 119);
        assert!((g.h() - 1.0 / 120.0).abs() < 1e-15);
        assert_eq!(g.unknowns(), 2 * 119 * 119);

        let g = Grid::from_wavelength(3, 2.0 * PI * 5.0, 6.0).unwrap();
        assert_eq!(g.n(), 29);

        let g = Grid::from_wavelength(2, 2.0 * PI, 6.0).unwrap();
        assert_eq!(g.n(), 5);
        assert!((g.h() * 6.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(Grid::from_wavelength(2, 2.0 * PI * 0.5, 6.0).is_err());
        assert!(Grid::from_wavelength(2, 1.0, 1.5).is_err());
        assert!(Grid::from_wavelength(4, 10.0, 6.0).is_err());
    }

    #[test]
    fn classify_examples() {
        let g = Grid::new(2, 5, 1.0).unwrap();
        let c = g.classify(&MultiIndex::new(&[3, 3]));
        assert_eq!(c.tags(), &[AxisTag::Interior, AxisTag::Interior]);
        let c = g.classify(&MultiIndex::new(&[1, 3]));
        assert_eq!(c.tags(), &[AxisTag::Low, AxisTag::Interior]);

        let g = Grid::new(3, 5, 1.0).unwrap();
        let c = g.classify(&MultiIndex::new(&[1, 5, 5]));
        assert_eq!(c.tags(), &[AxisTag::Low, AxisTag::High, AxisTag::High]);
    }

    #[test]
    fn category_index_round_trip() {
        for dim in [2, 3] {
            let all = PointCategory::all(dim);
            assert_eq!(all.len(), 3usize.pow(dim as u32));
            for (i, c) in all.iter().enumerate() {
                assert_eq!(c.index(), i);
            }
        }
    }

    #[test]
    fn neighborhood_sizes() {
        let g = Grid::new(2, 5, 1.0).unwrap();
        assert_eq!(g.neighborhood(&MultiIndex::new(&[3, 3])).len(), 9);

        let g = Grid::new(3, 7, 1.0).unwrap();
        let v = g.neighborhood(&MultiIndex::new(&[1, 1, 1]));
        assert_eq!(v.len(), 8);
        assert!(v.iter().all(|j| j.0.iter().all(|&c| c <= 2)));
        assert_eq!(g.neighborhood(&MultiIndex::new(&[1, 5, 5])).len(), 18);
    }

    #[test]
    fn neighborhood_contains_self_and_is_sorted() {
        let g = Grid::new(3, 4, 1.0).unwrap();
        for i in g.iter_points() {
            let nb = g.neighborhood(&i);
            assert!(nb.contains(&i));
            assert!(nb.windows(2).all(|w| w[0] < w[1]));
            assert!((8..=27).contains(&nb.len()));
        }
    }

    #[test]
    fn flatten_examples() {
        let g = Grid::new(2, 2, 1.0).unwrap();
        assert_eq!(g.flatten(0, &MultiIndex::new(&[1, 1])), 0);
        assert_eq!(g.flatten(1, &MultiIndex::new(&[1, 1])), 4);
    }

    #[test]
    fn flatten_is_bijective_on_small_grids() {
        for dim in [2, 3] {
            for n in 1..=4 {
                let g = Grid::new(dim, n, 1.0).unwrap();
                for idx in 0..g.unknowns() {
                    let (c, i) = g.unflatten(idx);
                    assert!(g.contains(&i));
                    assert_eq!(g.flatten(c, &i), idx);
                }
            }
        }
    }

    #[test]
    fn flatten_round_trip_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = Grid::new(3, 11, 1.0).unwrap();
        for _ in 0..100 {
            let idx = rng.random_range(0..g.unknowns());
            let (c, i) = g.unflatten(idx);
            assert_eq!(g.flatten(c, &i), idx);
        }
    }
}
