//! Restarted GMRES with left preconditioning.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dotc, norm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Loss of orthogonality that triggers a second Gram-Schmidt pass.
const REORTH_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub restart: usize,
    pub rtol: f64,
    pub maxiter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 20,
            rtol: 1e-6,
            maxiter: 1000,
        }
    }
}

/// Outcome of a GMRES run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Total inner iterations over all cycles.
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Preconditioned relative residual after every inner iteration.
    pub residual_history: Vec<f64>,
    /// Cycle boundaries in `residual_history`.
    pub cycle_starts: Vec<usize>,
    /// `‖P(b - Ax)‖ / ‖Pb‖` recomputed from the returned iterate.
    pub preconditioned_rel_res: f64,
    /// `‖b - Ax‖ / ‖b‖` recomputed from the returned iterate.
    pub true_rel_res: f64,
    /// Seconds spent before the solve (filled in by the caller).
    pub t_setup: f64,
    /// Mean seconds per preconditioner application.
    pub t_apply: f64,
    /// Seconds for the whole solve.
    pub t_solve: f64,
}

/// `y = A x` or `y = P x`.
pub type ApplyFn<'a> = dyn FnMut(&[Complex64], &mut [Complex64]) -> Result<()> + 'a;

struct Timed<'a, 'b> {
    f: &'a mut ApplyFn<'b>,
    calls: usize,
    seconds: f64,
}

impl Timed<'_, '_> {
    fn call(&mut self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        let t0 = Instant::now();
        (self.f)(x, y)?;
        self.seconds += t0.elapsed().as_secs_f64();
        self.calls += 1;
        Ok(())
    }
}

fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    // returns (c, s) with [c s; -conj(s) c] [a; b] = [r; 0]
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj());
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

fn apply_givens(c: f64, s: Complex64, x: &mut Complex64, y: &mut Complex64) {
    let t = *x * c + s * *y;
    *y = -s.conj() * *x + *y * c;
    *x = t;
}

/// Solve `A x = b` with GMRES on `P A x = P b`, from a zero initial guess.
///
/// Stops when the preconditioned residual drops below `rtol ‖Pb‖`. When
/// `maxiter` inner iterations pass first, the best iterate is returned with
/// `converged = false`.
pub fn gmres(
    op: &mut ApplyFn<'_>,
    prec: &mut ApplyFn<'_>,
    b: &[Complex64],
    opts: &GmresOptions,
) -> Result<(Vec<Complex64>, SolveStats)> {
    if opts.restart == 0 || !(opts.rtol > 0.0) {
        return Err(Error::Config("GMRES needs restart >= 1 and rtol > 0".into()));
    }
    let start = Instant::now();
    let n = b.len();
    let mut prec = Timed {
        f: prec,
        calls: 0,
        seconds: 0.0,
    };
    let mut stats = SolveStats::default();
    let mut x = vec![ZERO; n];
    let mut r = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    prec.call(b, &mut r)?;
    let pb_norm = norm(&r);
    let b_norm = norm(b);
    if pb_norm == 0.0 {
        stats.converged = true;
        stats.t_solve = start.elapsed().as_secs_f64();
        stats.t_apply = prec.seconds / prec.calls as f64;
        return Ok((x, stats));
    }
    let target = opts.rtol * pb_norm;
    let m = opts.restart;
    let mut beta = pb_norm;

    'outer: loop {
        stats.cycle_starts.push(stats.residual_history.len());
        let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|z| z / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k = 0;
        let mut done = false;
        let mut breakdown = false;
        while k < m {
            op(&v[k], &mut tmp)?;
            let mut w = vec![ZERO; n];
            prec.call(&tmp, &mut w)?;
            stats.iterations += 1;
            for (i, vi) in v.iter().enumerate() {
                let hij = dotc(vi, &w);
                h[i][k] = hij;
                axpy(-hij, vi, &mut w);
            }
            let mut wn = norm(&w);
            // second pass if orthogonality was lost
            let loss = v
                .iter()
                .map(|vi| dotc(vi, &w).norm())
                .fold(0.0, f64::max);
            if wn > 0.0 && loss > REORTH_THRESHOLD * wn {
                for (i, vi) in v.iter().enumerate() {
                    let c = dotc(vi, &w);
                    h[i][k] += c;
                    axpy(-c, vi, &mut w);
                }
                wn = norm(&w);
            }
            h[k + 1][k] = Complex64::new(wn, 0.0);
            for i in 0..k {
                let (a, bb) = (h[i][k], h[i + 1][k]);
                let (mut a, mut bb) = (a, bb);
                apply_givens(cs[i], sn[i], &mut a, &mut bb);
                h[i][k] = a;
                h[i + 1][k] = bb;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            let (mut a, mut bb) = (h[k][k], h[k + 1][k]);
            apply_givens(c, s, &mut a, &mut bb);
            h[k][k] = a;
            h[k + 1][k] = ZERO;
            let (mut g0, mut g1) = (g[k], g[k + 1]);
            apply_givens(c, s, &mut g0, &mut g1);
            g[k] = g0;
            g[k + 1] = g1;
            let res = g[k + 1].norm();
            stats.residual_history.push(res / pb_norm);
            k += 1;
            if res <= target {
                done = true;
                break;
            }
            if wn <= f64::EPSILON * beta {
                breakdown = true;
                break;
            }
            if stats.iterations >= opts.maxiter {
                break;
            }
            v.push(w.iter().map(|z| z / wn).collect());
        }

        // x += V y with H y = g
        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[i][j] * y[j];
            }
            if h[i][i].norm() == 0.0 {
                return Err(Error::Breakdown {
                    iteration: stats.iterations,
                });
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &v[j], &mut x);
        }

        if done {
            stats.converged = true;
            break 'outer;
        }
        if breakdown {
            return Err(Error::Breakdown {
                iteration: stats.iterations,
            });
        }
        if stats.iterations >= opts.maxiter {
            break 'outer;
        }
        // fresh residual for the next cycle
        stats.restarts += 1;
        op(&x, &mut tmp)?;
        for (t, bi) in tmp.iter_mut().zip(b) {
            *t = bi - *t;
        }
        prec.call(&tmp, &mut r)?;
        beta = norm(&r);
        if beta <= target {
            stats.converged = true;
            break 'outer;
        }
    }

    op(&x, &mut tmp)?;
    for (t, bi) in tmp.iter_mut().zip(b) {
        *t = bi - *t;
    }
    stats.true_rel_res = if b_norm > 0.0 { norm(&tmp) / b_norm } else { 0.0 };
    prec.call(&tmp, &mut r)?;
    stats.preconditioned_rel_res = norm(&r) / pb_norm;
    stats.t_apply = prec.seconds / prec.calls as f64;
    stats.t_solve = start.elapsed().as_secs_f64();
    Ok((x, stats))
}
