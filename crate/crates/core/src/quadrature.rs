//! Gauss–Legendre rules and integration of the Helmholtz kernels over grid
//! cells, including the weakly singular self cell.

use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let nf = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                if order == 1 {
                    p1 = x;
                    p0 = 1.0;
                } else {
                    for k in 2..=order {
                        let kf = k as f64;
                        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                        p0 = p1;
                        p1 = p2;
                    }
                }
                // p1 = P_n(x), p0 = P_{n-1}(x)
                dp = nf * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + r * x, r * w))
    }
}

/// Composite rule on `[0, 1]` with subintervals refined geometrically toward
/// 0: `[0, 2^-L], [2^-L, 2^-L+1], .., [1/2, 1]`. Integrates integrands with
/// `s log s` or `s^a` behaviour at the origin to near machine precision.
pub fn graded_unit_rule(levels: usize, order: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(order);
    let mut out = Vec::with_capacity((levels + 1) * order);
    let mut hi = 1.0;
    for _ in 0..levels {
        let lo = hi * 0.5;
        out.extend(gl.mapped(lo, hi));
        hi = lo;
    }
    out.extend(gl.mapped(0.0, hi));
    out
}

/// Tensor-product Gauss rule over the axis-aligned box `center ± half`.
pub fn box_integral(
    dim: usize,
    center: &[f64; 3],
    half: f64,
    order: usize,
    f: &mut dyn FnMut(&[f64; 3]) -> Complex64,
) -> Complex64 {
    let gl = GaussLegendre::new(order);
    let pts: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|a| gl.mapped(center[a] - half, center[a] + half).collect())
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut y = [0.0; 3];
    if dim == 2 {
        for &(x0, w0) in &pts[0] {
            y[0] = x0;
            for &(x1, w1) in &pts[1] {
                y[1] = x1;
                acc += f(&y) * (w0 * w1);
            }
        }
    } else {
        for &(x0, w0) in &pts[0] {
            y[0] = x0;
            for &(x1, w1) in &pts[1] {
                y[1] = x1;
                for &(x2, w2) in &pts[2] {
                    y[2] = x2;
                    acc += f(&y) * (w0 * w1 * w2);
                }
            }
        }
    }
    acc
}

/// Integral of a radial function `f(r)` over the cube `[-a, a]^d` centred at
/// the origin, where `f` may be singular at `r = 0` but `r^{d-1} f(r)` is
/// integrable.
///
/// The cube is split into `2d` pyramids with apex at the origin; the Duffy
/// map `y = s (a, u)` turns each into `[0,1] × [-a,a]^{d-1}` with Jacobian
/// `a s^{d-1}`, which removes the point singularity. The radial variable uses
/// the graded rule, the transverse ones a plain Gauss rule over the quarter
/// (or half) face by symmetry.
pub fn radial_cube_integral(
    dim: usize,
    a: f64,
    radial: &[(f64, f64)],
    transverse_order: usize,
    f: &mut dyn FnMut(f64) -> Complex64,
) -> Complex64 {
    let gl = GaussLegendre::new(transverse_order);
    let face: Vec<(f64, f64)> = gl.mapped(0.0, a).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    match dim {
        2 => {
            // 4 triangles, each symmetric in u -> 8 half-triangles.
            for &(u, wu) in &face {
                let rho = (a * a + u * u).sqrt();
                for &(s, ws) in radial {
                    acc += f(s * rho) * (ws * wu * a * s);
                }
            }
            acc * 8.0
        }
        _ => {
            // 6 pyramids, each with 4-fold symmetry of its square face.
            for &(u, wu) in &face {
                for &(v, wv) in &face {
                    let rho = (a * a + u * u + v * v).sqrt();
                    for &(s, ws) in radial {
                        acc += f(s * rho) * (ws * wu * wv * a * s * s);
                    }
                }
            }
            acc * 24.0
        }
    }
}
