//! Inhomogeneity profiles `m(x)`, the derived fields
//! `p^a = (∂m/∂x_a) / (1 - m)`, and the incident plane wave.
//!
//! Built-in profiles are compactly supported inside the box window
//! `[0.2, 0.8]^d`: the window rises over `[0.2, 0.3]` and falls over
//! `[0.7, 0.8]` along every axis with a C² quintic smoothstep. Their gradients
//! are analytic. Custom profiles take a user function and differentiate it
//! numerically.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

/// Magnitude below which `m` counts as zero near the boundary.
pub const SUPPORT_TOLERANCE: f64 = 1e-8;
/// Lower bound on `|1 - m|`.
pub const MIN_ONE_MINUS_M: f64 = 0.1;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Separable C² plateau window: zero outside `[lo, hi]`, one on
/// `[lo + ramp, hi - ramp]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxWindow {
    pub lo: f64,
    pub hi: f64,
    pub ramp: f64,
}

impl Default for BoxWindow {
    fn default() -> Self {
        Self {
            lo: 0.2,
            hi: 0.8,
            ramp: 0.1,
        }
    }
}

fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let t2 = t * t;
        (
            t2 * t * (10.0 + t * (-15.0 + 6.0 * t)),
            30.0 * t2 * (t - 1.0) * (t - 1.0),
        )
    }
}

impl BoxWindow {
    /// Value and derivative of the one-dimensional ramp at `x`.
    pub fn ramp_1d(&self, x: f64) -> (f64, f64) {
        let mid = 0.5 * (self.lo + self.hi);
        if x <= mid {
            let (v, dv) = smoothstep((x - self.lo) / self.ramp);
            (v, dv / self.ramp)
        } else {
            let (v, dv) = smoothstep((self.hi - x) / self.ramp);
            (v, -dv / self.ramp)
        }
    }

    /// Product window value and gradient.
    pub fn eval(&self, dim: usize, x: &[f64; 3]) -> (f64, [f64; 3]) {
        let mut vals = [1.0; 3];
        let mut ders = [0.0; 3];
        for a in 0..dim {
            let (v, dv) = self.ramp_1d(x[a]);
            vals[a] = v;
            ders[a] = dv;
        }
        let value: f64 = vals[..dim].iter().product();
        let mut grad = [0.0; 3];
        for a in 0..dim {
            grad[a] = ders[a] * (0..dim).filter(|&b| b != a).map(|b| vals[b]).product::<f64>();
        }
        (value, grad)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lo && self.lo + 2.0 * self.ramp <= self.hi && self.hi <= 1.0 && self.ramp > 0.0)
        {
            return Err(Error::InvalidProfile(format!("bad box window {self:?}")));
        }
        Ok(())
    }
}

/// Band-limited real perturbation `r(x) = Σ c_q cos(2π f_q·x + φ_q)` with
/// `Σ |c_q| = 1`, so `|r| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    modes: Vec<([f64; 3], f64, f64)>,
}

impl Perturbation {
    /// Draw `count` (at most 8) modes with integer frequencies in `[-2, 2]^d`.
    pub fn seeded(dim: usize, count: usize, seed: u64) -> Self {
        let count = count.clamp(1, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::with_capacity(count);
        while modes.len() < count {
            let mut f = [0.0; 3];
            for fa in f.iter_mut().take(dim) {
                *fa = rng.random_range(-2i32..=2) as f64;
            }
            if f.iter().all(|&v| v == 0.0) {
                continue;
            }
            let c: f64 = rng.random_range(0.2..1.0);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            modes.push((f, c, phase));
        }
        let total: f64 = modes.iter().map(|m| m.1).sum();
        for m in &mut modes {
            m.1 /= total;
        }
        Self { modes }
    }

    pub fn eval(&self, dim: usize, x: &[f64; 3]) -> (f64, [f64; 3]) {
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for (f, c, phase) in &self.modes {
            let arg = 2.0 * PI * (0..dim).map(|a| f[a] * x[a]).sum::<f64>() + phase;
            v += c * arg.cos();
            for a in 0..dim {
                g[a] -= c * arg.sin() * 2.0 * PI * f[a];
            }
        }
        (v, g)
    }
}

/// A user-supplied inhomogeneity; its gradient is taken numerically.
#[derive(Clone)]
pub struct CustomProfile {
    label: String,
    func: Arc<dyn Fn(&[f64; 3]) -> Complex64 + Send + Sync>,
}

impl CustomProfile {
    pub fn from_fn(
        label: impl Into<String>,
        f: impl Fn(&[f64; 3]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            func: Arc::new(f),
        }
    }

    /// Sum of isotropic Gaussian bumps multiplied by a box window.
    pub fn bumps(dim: usize, bumps: Vec<Bump>, window: BoxWindow) -> Self {
        let label = format!("{} gaussian bumps", bumps.len());
        Self::from_fn(label, move |x| {
            let (w, _) = window.eval(dim, x);
            if w == 0.0 {
                return ZERO;
            }
            let s: Complex64 = bumps
                .iter()
                .map(|b| {
                    let r2: f64 = (0..dim).map(|a| (x[a] - b.center[a]).powi(2)).sum();
                    b.amplitude * (-r2 / (b.width * b.width)).exp()
                })
                .sum();
            s * w
        })
    }

    pub fn eval(&self, x: &[f64; 3]) -> Complex64 {
        (self.func)(x)
    }
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile").field("label", &self.label).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: [f64; 3],
    pub width: f64,
    pub amplitude: Complex64,
}

/// Inhomogeneity `m(x)`.
#[derive(Debug, Clone)]
pub enum MediumProfile {
    /// `a exp(-|x - c|² / w²)` times the box window.
    GaussianLens {
        amplitude: Complex64,
        center: [f64; 3],
        width: f64,
        window: BoxWindow,
    },
    /// `a` times the box window.
    SmoothedBox { amplitude: Complex64, window: BoxWindow },
    /// Smoothed box times `1 + δ r(x)`.
    PerturbedBox {
        amplitude: Complex64,
        window: BoxWindow,
        delta: f64,
        perturbation: Perturbation,
    },
    Custom(CustomProfile),
}

/// Default contrast: refractive index up to `sqrt(1.7)`.
pub const DEFAULT_AMPLITUDE: Complex64 = Complex64::new(-0.7, 0.0);

impl MediumProfile {
    pub fn gaussian_lens(amplitude: Complex64) -> Self {
        MediumProfile::GaussianLens {
            amplitude,
            center: [0.5; 3],
            width: 0.15,
            window: BoxWindow::default(),
        }
    }

    pub fn smoothed_box(amplitude: Complex64) -> Self {
        MediumProfile::SmoothedBox {
            amplitude,
            window: BoxWindow::default(),
        }
    }

    pub fn perturbed_box(dim: usize, amplitude: Complex64, delta: f64, seed: u64) -> Self {
        MediumProfile::PerturbedBox {
            amplitude,
            window: BoxWindow::default(),
            delta,
            perturbation: Perturbation::seeded(dim, 8, seed),
        }
    }

    pub fn zero() -> Self {
        Self::gaussian_lens(ZERO)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MediumProfile::GaussianLens { .. } => "gaussian_lens",
            MediumProfile::SmoothedBox { .. } => "smoothed_box",
            MediumProfile::PerturbedBox { .. } => "perturbed_box",
            MediumProfile::Custom(_) => "custom",
        }
    }

    /// Value of `m` at a point.
    pub fn value(&self, dim: usize, x: &[f64; 3]) -> Complex64 {
        match self {
            MediumProfile::Custom(c) => c.eval(x),
            _ => self.analytic(dim, x).0,
        }
    }

    /// Value and gradient of `m` for the built-in profiles.
    fn analytic(&self, dim: usize, x: &[f64; 3]) -> (Complex64, [Complex64; 3]) {
        match self {
            MediumProfile::GaussianLens {
                amplitude,
                center,
                width,
                window,
            } => {
                let (w, dw) = window.eval(dim, x);
                let r2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                let gauss = (-r2 / (width * width)).exp();
                let mut grad = [ZERO; 3];
                for a in 0..dim {
                    let dg = -2.0 * (x[a] - center[a]) / (width * width) * gauss;
                    grad[a] = amplitude * (dg * w + gauss * dw[a]);
                }
                (amplitude * (gauss * w), grad)
            }
            MediumProfile::SmoothedBox { amplitude, window } => {
                let (w, dw) = window.eval(dim, x);
                let mut grad = [ZERO; 3];
                for a in 0..dim {
                    grad[a] = amplitude * dw[a];
                }
                (amplitude * w, grad)
            }
            MediumProfile::PerturbedBox {
                amplitude,
                window,
                delta,
                perturbation,
            } => {
                let (w, dw) = window.eval(dim, x);
                let (r, dr) = perturbation.eval(dim, x);
                let f = 1.0 + delta * r;
                let mut grad = [ZERO; 3];
                for a in 0..dim {
                    grad[a] = amplitude * (dw[a] * f + w * delta * dr[a]);
                }
                (amplitude * (w * f), grad)
            }
            MediumProfile::Custom(c) => (c.eval(x), fd_gradient(c, dim, x)),
        }
    }

    /// Value and gradient; analytic for built-in profiles, finite differences
    /// for custom ones.
    pub fn value_and_gradient(&self, dim: usize, x: &[f64; 3]) -> (Complex64, [Complex64; 3]) {
        self.analytic(dim, x)
    }

    fn validate_params(&self) -> Result<()> {
        match self {
            MediumProfile::GaussianLens { width, window, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidProfile(format!("lens width {width} must be positive")));
                }
                window.validate()
            }
            MediumProfile::SmoothedBox { window, .. } => window.validate(),
            MediumProfile::PerturbedBox { window, delta, .. } => {
                if !(delta.is_finite() && *delta >= 0.0) {
                    return Err(Error::InvalidProfile(format!("perturbation {delta} must be >= 0")));
                }
                window.validate()
            }
            MediumProfile::Custom(_) => Ok(()),
        }
    }
}

/// Step for the numerical gradient of custom profiles.
const FD_STEP: f64 = 1e-3;

fn fd_gradient(c: &CustomProfile, dim: usize, x: &[f64; 3]) -> [Complex64; 3] {
    let mut grad = [ZERO; 3];
    for a in 0..dim {
        let at = |s: f64| {
            let mut y = *x;
            y[a] += s;
            c.eval(&y)
        };
        let s = FD_STEP;
        grad[a] = (at(-2.0 * s) - at(2.0 * s) + 8.0 * (at(s) - at(-s))) / (12.0 * s);
    }
    grad
}

fn check_samples(grid: &Grid, m: &ScalarField) -> Result<()> {
    let margin = 2.0 * grid.h() * (1.0 + 1e-12);
    for i in grid.iter_points() {
        let x = grid.position(&i);
        let v = m.at(&i);
        let near = (0..grid.dim()).any(|a| x[a] <= margin || x[a] >= 1.0 - margin);
        if near && v.norm() > SUPPORT_TOLERANCE {
            return Err(Error::InvalidProfile(format!(
                "|m| = {:.3e} at {:?} violates the compact-support margin of 2h",
                v.norm(),
                &i.0[..grid.dim()]
            )));
        }
        if (Complex64::new(1.0, 0.0) - v).norm() < MIN_ONE_MINUS_M {
            return Err(Error::InvalidProfile(format!(
                "|1 - m| < {MIN_ONE_MINUS_M} at {:?}",
                &i.0[..grid.dim()]
            )));
        }
    }
    Ok(())
}

/// Sample `m` on the grid, rejecting profiles that are not supported away
/// from the boundary or that bring `1 - m` too close to zero.
pub fn sample_m(profile: &MediumProfile, grid: &Grid) -> Result<ScalarField> {
    profile.validate_params()?;
    let dim = grid.dim();
    let m = ScalarField::from_fn(*grid, |i| profile.value(dim, &grid.position(i)));
    check_samples(grid, &m)?;
    Ok(m)
}

/// Sample `p^a = (∂m/∂x_a) / (1 - m)` for every axis.
pub fn sample_p(profile: &MediumProfile, grid: &Grid) -> Result<Vec<ScalarField>> {
    let m = sample_m(profile, grid)?;
    let dim = grid.dim();
    let mut out: Vec<ScalarField> = (0..dim).map(|_| ScalarField::zeros(*grid)).collect();
    for (idx, i) in grid.iter_points().enumerate() {
        let (_, grad) = profile.value_and_gradient(dim, &grid.position(&i));
        let denom = Complex64::new(1.0, 0.0) - m.values()[idx];
        for a in 0..dim {
            out[a].values_mut()[idx] = grad[a] / denom;
        }
    }
    Ok(out)
}

/// Both sampled fields at once.
pub fn sample_medium(profile: &MediumProfile, grid: &Grid) -> Result<(ScalarField, Vec<ScalarField>)> {
    let m = sample_m(profile, grid)?;
    let p = sample_p(profile, grid)?;
    Ok((m, p))
}

/// Plane wave travelling along the first axis, polarized along the last
/// axis: `E^i = (0, .., 0, e^{i k x_1})`.
pub fn incident_plane_wave(grid: &Grid) -> VectorField {
    let mut e = VectorField::zeros(*grid);
    let k = grid.k();
    let last = grid.dim() - 1;
    let comp = e.component_mut(last);
    for (idx, v) in comp.iter_mut().enumerate() {
        let i = grid.point_from_index(idx);
        *v = Complex64::from_polar(1.0, k * grid.position(&i)[0]);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MultiIndex;

    fn grid2(n: usize) -> Grid {
        Grid::new(2, n, 2.0 * PI * 3.0).unwrap()
    }

    #[test]
    fn zero_amplitude_lens_is_zero() {
        let g = grid2(15);
        let m = sample_m(&MediumProfile::zero(), &g).unwrap();
        assert_eq!(m.max_abs(), 0.0);
        let p = sample_p(&MediumProfile::zero(), &g).unwrap();
        assert!(p.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn lens_is_reflection_symmetric() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 13, 10.0).unwrap();
            let prof = MediumProfile::gaussian_lens(DEFAULT_AMPLITUDE);
            let m = sample_m(&prof, &g).unwrap();
            let p = sample_p(&prof, &g).unwrap();
            let n = g.n();
            for i in g.iter_points() {
                for a in 0..dim {
                    let mut j = i;
                    j.0[a] = n + 1 - i.0[a];
                    assert!((m.at(&i) - m.at(&j)).norm() < 1e-15);
                    // p^a odd across the plane x_a = 0.5
                    assert!((p[a].at(&i) + p[a].at(&j)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn box_plateau_value_and_flat_gradient() {
        let a = Complex64::new(-0.7, 0.1);
        let g = Grid::new(2, 39, 10.0).unwrap();
        let prof = MediumProfile::smoothed_box(a);
        let m = sample_m(&prof, &g).unwrap();
        let center = MultiIndex::new(&[20, 20]);
        assert!((m.at(&center) - a).norm() < 1e-6);
        let p = sample_p(&prof, &g).unwrap();
        for i in g.iter_points() {
            let x = g.position(&i);
            let plateau = (0..2).all(|d| (0.3..=0.7).contains(&x[d]));
            if plateau {
                for pa in &p {
                    assert!(pa.at(&i).norm() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn support_margin_holds_for_builtin_profiles() {
        for prof in [
            MediumProfile::gaussian_lens(DEFAULT_AMPLITUDE),
            MediumProfile::smoothed_box(DEFAULT_AMPLITUDE),
            MediumProfile::perturbed_box(2, DEFAULT_AMPLITUDE, 0.2, 3),
        ] {
            let g = Grid::new(2, 59, 10.0).unwrap();
            let m = sample_m(&prof, &g).unwrap();
            for i in g.iter_points() {
                if i.0[..2].iter().any(|&c| c <= 2 || c >= g.n() - 1) {
                    assert!(m.at(&i).norm() <= SUPPORT_TOLERANCE);
                }
            }
        }
    }

    #[test]
    fn rejects_support_violation() {
        let prof = MediumProfile::Custom(CustomProfile::from_fn("const", |_| Complex64::new(0.3, 0.0)));
        assert!(matches!(sample_m(&prof, &grid2(9)), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn rejects_small_one_minus_m() {
        let prof = MediumProfile::smoothed_box(Complex64::new(0.95, 0.0));
        assert!(matches!(sample_m(&prof, &grid2(19)), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn perturbed_box_with_zero_delta_is_the_box() {
        let g = Grid::new(3, 11, 10.0).unwrap();
        let a = DEFAULT_AMPLITUDE;
        let (m0, p0) = sample_medium(&MediumProfile::smoothed_box(a), &g).unwrap();
        let (m1, p1) = sample_medium(&MediumProfile::perturbed_box(3, a, 0.0, 42), &g).unwrap();
        assert_eq!(m0, m1);
        assert_eq!(p0, p1);
    }

    #[test]
    fn perturbed_box_is_deterministic_per_seed() {
        let g = grid2(31);
        let s1 = sample_m(&MediumProfile::perturbed_box(2, DEFAULT_AMPLITUDE, 0.2, 9), &g).unwrap();
        let s2 = sample_m(&MediumProfile::perturbed_box(2, DEFAULT_AMPLITUDE, 0.2, 9), &g).unwrap();
        let s3 = sample_m(&MediumProfile::perturbed_box(2, DEFAULT_AMPLITUDE, 0.2, 10), &g).unwrap();
        let bits = |f: &ScalarField| -> Vec<(u64, u64)> {
            f.values().iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect()
        };
        assert_eq!(bits(&s1), bits(&s2));
        assert_ne!(bits(&s1), bits(&s3));
    }

    /// p^a = -∂_a log(1 - m); compare the analytic p against 4th-order central
    /// differences of log(1 - m) with step h. The discrepancy must shrink like
    /// h^4: halving h reduces it by roughly 16.
    #[test]
    fn analytic_p_matches_fourth_order_differences() {
        let profiles = [
            MediumProfile::gaussian_lens(DEFAULT_AMPLITUDE),
            MediumProfile::smoothed_box(Complex64::new(-0.5, 0.2)),
            MediumProfile::perturbed_box(2, DEFAULT_AMPLITUDE, 0.2, 5),
        ];
        for prof in &profiles {
            let err_at = |h: f64| {
                let mut worst: f64 = 0.0;
                let x0 = [0.27, 0.41, 0.0];
                let (m0, grad) = prof.value_and_gradient(2, &x0);
                for a in 0..2 {
                    let p = grad[a] / (1.0 - m0);
                    let lg = |s: f64| {
                        let mut y = x0;
                        y[a] += s;
                        (Complex64::new(1.0, 0.0) - prof.value(2, &y)).ln()
                    };
                    let fd = -(lg(-2.0 * h) - lg(2.0 * h) + 8.0 * (lg(h) - lg(-h))) / (12.0 * h);
                    worst = worst.max((p - fd).norm());
                }
                worst
            };
            let e1 = err_at(0.004);
            let e2 = err_at(0.002);
            assert!(e1 < 1e-3, "{} fd error {e1}", prof.kind_name());
            assert!(e2 < e1 / 8.0 || e2 < 1e-10, "{}: {e1} -> {e2}", prof.kind_name());
        }
    }

    #[test]
    fn custom_gradient_matches_analytic_lens() {
        let lens = MediumProfile::gaussian_lens(DEFAULT_AMPLITUDE);
        let lens2 = lens.clone();
        let custom = MediumProfile::Custom(CustomProfile::from_fn("lens", move |x| lens2.value(2, x)));
        let g = grid2(23);
        let pa = sample_p(&lens, &g).unwrap();
        let pc = sample_p(&custom, &g).unwrap();
        for a in 0..2 {
            let d: f64 = pa[a]
                .values()
                .iter()
                .zip(pc[a].values())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(d < 1e-6 * pa[a].max_abs(), "axis {a}: {d}");
        }
    }

    #[test]
    fn plane_wave_values() {
        let g = Grid::new(2, 9, 2.0 * PI).unwrap();
        let e = incident_plane_wave(&g);
        assert!(e.component(0).iter().all(|v| v.norm() == 0.0));
        assert!(e.component(1).iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
        // i_1 h = 0.5 at i_1 = 5
        let v = e.component(1)[g.point_index(&MultiIndex::new(&[5, 2]))];
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-14);

        let g = Grid::new(3, 2, 3.0).unwrap();
        let e = incident_plane_wave(&g);
        let h = g.h();
        for i in g.iter_points() {
            let want = Complex64::from_polar(1.0, 3.0 * i.0[0] as f64 * h);
            assert!((e.component(2)[g.point_index(&i)] - want).norm() < 1e-15);
            assert_eq!(e.component(0)[g.point_index(&i)], ZERO);
        }
    }
}
