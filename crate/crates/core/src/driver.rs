//! Experiment runner: flat `key = value` configs, the full solve pipeline,
//! CSV stats tables and binary field dumps.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::convolution::SystemOperator;
use crate::dense::{dense_assemble, dense_solve, DEFAULT_SIZE_GUARD};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::greens::{ConvTable, CorrectionSpec};
use crate::grid::Grid;
use crate::krylov::{gmres, GmresOptions, SolveStats};
use crate::linalg::rel_diff;
use crate::medium::{
    incident_plane_wave, sample_medium, BoxWindow, Bump, CustomProfile, MediumProfile, Perturbation,
    DEFAULT_AMPLITUDE,
};
use crate::preconditioner::SparsifyingPreconditioner;
use crate::stencil::build_library;

/// Frozen CSV header; failed rows add a trailing `error` column.
pub const CSV_HEADER: &str = "k_over_2pi,n,N,t_setup_s,t_apply_s,n_iter,t_solve_s,true_rel_res";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    GaussianLens,
    SmoothedBox,
    PerturbedBox,
    Custom,
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_lens" => Ok(Self::GaussianLens),
            "smoothed_box" => Ok(Self::SmoothedBox),
            "perturbed_box" => Ok(Self::PerturbedBox),
            "custom" => Ok(Self::Custom),
            _ => Err(Error::Config(format!("unknown profile kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub amplitude: Complex64,
    pub center: [f64; 3],
    pub width: f64,
    pub window: BoxWindow,
    pub delta: f64,
    pub seed: u64,
    pub modes: usize,
    /// Custom profiles: `(center, width, amplitude)` per bump.
    pub bumps: Vec<([f64; 3], f64, Complex64)>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            kind: ProfileKind::GaussianLens,
            amplitude: DEFAULT_AMPLITUDE,
            center: [0.5; 3],
            width: 0.15,
            window: BoxWindow::default(),
            delta: 0.2,
            seed: 0,
            modes: 8,
            bumps: Vec::new(),
        }
    }
}

impl ProfileSpec {
    pub fn build(&self, dim: usize) -> MediumProfile {
        match self.kind {
            ProfileKind::GaussianLens => MediumProfile::GaussianLens {
                amplitude: self.amplitude,
                center: self.center,
                width: self.width,
                window: self.window,
            },
            ProfileKind::SmoothedBox => MediumProfile::SmoothedBox {
                amplitude: self.amplitude,
                window: self.window,
            },
            ProfileKind::PerturbedBox => MediumProfile::PerturbedBox {
                amplitude: self.amplitude,
                window: self.window,
                delta: self.delta,
                perturbation: Perturbation::seeded(dim, self.modes, self.seed),
            },
            ProfileKind::Custom => {
                let bumps = self
                    .bumps
                    .iter()
                    .map(|&(center, width, amplitude)| Bump {
                        center,
                        width,
                        amplitude,
                    })
                    .collect();
                MediumProfile::Custom(CustomProfile::bumps(dim, bumps, self.window))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub k_over_2pi: f64,
    pub ppw: f64,
    pub profile: ProfileSpec,
    pub rtol: f64,
    pub restart: usize,
    pub maxiter: usize,
    pub correction_radius: usize,
    pub oracle: bool,
    pub oracle_guard: usize,
    pub dump_fields: Option<PathBuf>,
    pub dump_singular_values: Option<PathBuf>,
    pub dump_sparse: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            k_over_2pi: 2.0,
            ppw: 6.0,
            profile: ProfileSpec::default(),
            rtol: 1e-6,
            restart: 20,
            maxiter: 1000,
            correction_radius: 1,
            oracle: false,
            oracle_guard: DEFAULT_SIZE_GUARD,
            dump_fields: None,
            dump_singular_values: None,
            dump_sparse: None,
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{v}` for `{key}`"))),
    }
}

fn to_point(key: &str, xs: &[f64]) -> Result<[f64; 3]> {
    if xs.is_empty() || xs.len() > 3 {
        return Err(Error::Config(format!("`{key}` needs 1 to 3 coordinates")));
    }
    let mut c = [0.5; 3];
    c[..xs.len()].copy_from_slice(xs);
    if xs.len() == 1 {
        c = [xs[0]; 3];
    }
    Ok(c)
}

impl ExperimentConfig {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut have_k = false;
        let mut bumps_text = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", ln + 1)))?;
            let (key, val) = (key.trim(), val.trim());
            let p = &mut cfg.profile;
            match key {
                "dim" => cfg.dim = parse_num(key, val)?,
                "k_over_2pi" => {
                    cfg.k_over_2pi = parse_num(key, val)?;
                    have_k = true;
                }
                "ppw" => cfg.ppw = parse_num(key, val)?,
                "profile.kind" => p.kind = val.parse()?,
                "profile.amplitude_re" => p.amplitude.re = parse_num(key, val)?,
                "profile.amplitude_im" => p.amplitude.im = parse_num(key, val)?,
                "profile.center" => p.center = to_point(key, &parse_list(key, val)?)?,
                "profile.width" => p.width = parse_num(key, val)?,
                "profile.window" => {
                    let w = parse_list(key, val)?;
                    if w.len() != 3 {
                        return Err(Error::Config("`profile.window` is `lo, hi, ramp`".into()));
                    }
                    p.window = BoxWindow {
                        lo: w[0],
                        hi: w[1],
                        ramp: w[2],
                    };
                }
                "profile.delta" => p.delta = parse_num(key, val)?,
                "profile.seed" => p.seed = parse_num(key, val)?,
                "profile.modes" => p.modes = parse_num(key, val)?,
                "profile.bumps" => bumps_text = Some(val.to_string()),
                "rtol" => cfg.rtol = parse_num(key, val)?,
                "restart" => cfg.restart = parse_num(key, val)?,
                "maxiter" => cfg.maxiter = parse_num(key, val)?,
                "correction_radius" => cfg.correction_radius = parse_num(key, val)?,
                "oracle" => cfg.oracle = parse_bool(key, val)?,
                "oracle_guard" => cfg.oracle_guard = parse_num(key, val)?,
                "dump_fields" => cfg.dump_fields = Some(val.into()),
                "dump_singular_values" => cfg.dump_singular_values = Some(val.into()),
                "dump_sparse" => cfg.dump_sparse = Some(val.into()),
                "out" => cfg.out = Some(val.into()),
                _ => return Err(Error::Config(format!("unknown key `{key}`"))),
            }
        }
        if !have_k {
            return Err(Error::Config("missing `k_over_2pi`".into()));
        }
        if let Some(b) = bumps_text {
            cfg.profile.bumps = parse_bumps(cfg.dim, &b)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(self.k_over_2pi > 0.0) || !(self.ppw > 0.0) {
            return Err(Error::Config("k_over_2pi and ppw must be positive".into()));
        }
        if !(self.rtol > 0.0) || self.restart == 0 || self.maxiter == 0 {
            return Err(Error::Config("need rtol > 0, restart >= 1, maxiter >= 1".into()));
        }
        if self.profile.kind == ProfileKind::Custom && self.profile.bumps.is_empty() {
            return Err(Error::Config("custom profile needs `profile.bumps`".into()));
        }
        Ok(())
    }

    pub fn gmres_options(&self) -> GmresOptions {
        GmresOptions {
            restart: self.restart,
            rtol: self.rtol,
            maxiter: self.maxiter,
        }
    }
}

/// `x, y[, z], width, amp_re, amp_im` per bump, bumps separated by `;`.
fn parse_bumps(dim: usize, text: &str) -> Result<Vec<([f64; 3], f64, Complex64)>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let v = parse_list("profile.bumps", s)?;
            if v.len() != dim + 3 {
                return Err(Error::Config(format!(
                    "bump `{}` needs {} numbers",
                    s.trim(),
                    dim + 3
                )));
            }
            let mut c = [0.5; 3];
            c[..dim].copy_from_slice(&v[..dim]);
            Ok((c, v[dim], Complex64::new(v[dim + 1], v[dim + 2])))
        })
        .collect()
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub k_over_2pi: f64,
    pub grid: Grid,
    pub stats: SolveStats,
    /// Relative deviation from the dense solution, when requested.
    pub oracle_deviation: Option<f64>,
    pub scattered: VectorField,
    pub total: VectorField,
}

impl RunOutput {
    /// Why the run does not count as a success, if it does not.
    pub fn failure(&self) -> Option<String> {
        (!self.stats.converged).then(|| {
            format!(
                "gmres: no convergence after {} iterations (preconditioned residual {:.3e})",
                self.stats.iterations, self.stats.preconditioned_rel_res
            )
        })
    }

    pub fn csv_row(&self) -> Vec<String> {
        let s = &self.stats;
        vec![
            self.k_over_2pi.to_string(),
            self.grid.n().to_string(),
            self.grid.unknowns().to_string(),
            format!("{:.6e}", s.t_setup),
            format!("{:.6e}", s.t_apply),
            s.iterations.to_string(),
            format!("{:.6e}", s.t_solve),
            format!("{:.6e}", s.true_rel_res),
        ]
    }
}

fn write_text(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Run the whole pipeline for one config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate().map_err(|e| e.at("config"))?;
    let k = 2.0 * std::f64::consts::PI * cfg.k_over_2pi;
    let grid = Grid::from_wavelength(cfg.dim, k, cfg.ppw).map_err(|e| e.at("grid"))?;
    if cfg.oracle && grid.unknowns() > cfg.oracle_guard {
        return Err(Error::SizeGuard {
            size: grid.unknowns(),
            limit: cfg.oracle_guard,
        }
        .at("oracle"));
    }
    let profile = cfg.profile.build(cfg.dim);
    let (m, p) = sample_medium(&profile, &grid).map_err(|e| e.at("medium"))?;
    let correction = CorrectionSpec {
        radius: cfg.correction_radius,
        ..Default::default()
    };
    let table = ConvTable::build(&grid, &correction).map_err(|e| e.at("tables"))?;

    let t0 = Instant::now();
    let library = build_library(&table).map_err(|e| e.at("library"))?;
    if let Some(path) = &cfg.dump_singular_values {
        write_text(path, |w| library.write_singular_values(w)).map_err(|e| e.at("dump"))?;
    }
    let pre = SparsifyingPreconditioner::new(library, &m, &p)?;
    let t_setup = t0.elapsed().as_secs_f64();
    if let Some(path) = &cfg.dump_sparse {
        write_text(path, |w| pre.system().write_coo(w)).map_err(|e| e.at("dump"))?;
    }

    let op = SystemOperator::new(&table, &m, &p).map_err(|e| e.at("operator"))?;
    let incident = incident_plane_wave(&grid);
    let rhs = op.compute_rhs(&incident).map_err(|e| e.at("rhs"))?;
    let mut apply_op = |x: &[Complex64], y: &mut [Complex64]| {
        op.apply_into(x, y);
        Ok(())
    };
    let mut apply_pre = |x: &[Complex64], y: &mut [Complex64]| pre.apply_into(x, y);
    let (x, mut stats) = gmres(&mut apply_op, &mut apply_pre, rhs.values(), &cfg.gmres_options())
        .map_err(|e| e.at("gmres"))?;
    stats.t_setup = t_setup;
    let scattered = VectorField::from_values(grid, x)?;

    let oracle_deviation = if cfg.oracle {
        let dense = dense_assemble(&table, &m, &p, cfg.oracle_guard).map_err(|e| e.at("oracle"))?;
        let exact = dense_solve(&dense, &rhs).map_err(|e| e.at("oracle"))?;
        Some(rel_diff(scattered.values(), exact.values()))
    } else {
        None
    };

    let total_values: Vec<Complex64> = scattered
        .values()
        .iter()
        .zip(incident.values())
        .map(|(s, i)| s + i)
        .collect();
    let total = VectorField::from_values(grid, total_values)?;
    if let Some(path) = &cfg.dump_fields {
        write_field_dump(path, &total).map_err(|e| e.at("dump"))?;
    }
    Ok(RunOutput {
        k_over_2pi: cfg.k_over_2pi,
        grid,
        stats,
        oracle_deviation,
        scattered,
        total,
    })
}

/// One sweep row: the output when the pipeline finished, and an error when
/// it failed or did not converge.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub output: Option<RunOutput>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub failures: usize,
}

impl SweepReport {
    /// Rows in input order. The `error` column appears only when a row failed.
    pub fn write_csv(&self, cfgs: &[ExperimentConfig], out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let mut header: Vec<&str> = CSV_HEADER.split(',').collect();
        if self.failures > 0 {
            header.push("error");
        }
        w.write_record(&header).map_err(csv_err)?;
        for (row, cfg) in self.rows.iter().zip(cfgs) {
            let mut rec = match &row.output {
                Some(r) => r.csv_row(),
                None => {
                    let mut v = vec![cfg.k_over_2pi.to_string()];
                    v.extend(std::iter::repeat_n(String::new(), 7));
                    v
                }
            };
            if self.failures > 0 {
                rec.push(row.error.clone().unwrap_or_default());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Run every config; failures are recorded and the sweep continues.
pub fn sweep(cfgs: &[ExperimentConfig], parallel: bool) -> SweepReport {
    let one = |c: &ExperimentConfig| match run(c) {
        Ok(r) => SweepRow {
            error: r.failure(),
            output: Some(r),
        },
        Err(e) => SweepRow {
            output: None,
            error: Some(e.to_string()),
        },
    };
    let rows: Vec<_> = if parallel {
        cfgs.par_iter().map(one).collect()
    } else {
        cfgs.iter().map(one).collect()
    };
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    SweepReport { rows, failures }
}

/// Write `VIEFIELD <dim> <n> <k> <ncomp>` and the raw little-endian pairs.
pub fn write_field_dump(path: &Path, field: &VectorField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn write_field(w: &mut impl Write, field: &VectorField) -> Result<()> {
    let g = field.grid();
    writeln!(w, "VIEFIELD {} {} {:?} {}", g.dim(), g.n(), g.k(), g.dim())?;
    for v in field.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_dump(path: &Path) -> Result<VectorField> {
    read_field(&mut BufReader::new(File::open(path)?))
}

pub fn read_field(r: &mut impl BufRead) -> Result<VectorField> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "VIEFIELD" {
        return Err(Error::Config(format!("bad field dump header `{}`", header.trim())));
    }
    let dim: usize = parse_num("dim", parts[1])?;
    let n: usize = parse_num("n", parts[2])?;
    let k: f64 = parse_num("k", parts[3])?;
    let ncomp: usize = parse_num("ncomp", parts[4])?;
    let grid = Grid::new(dim, n, k)?;
    if ncomp != dim {
        return Err(Error::Config(format!("{ncomp} components on a {dim}D grid")));
    }
    let mut bytes = vec![0u8; grid.unknowns() * 16];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    VectorField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::parse("k_over_2pi = 10").unwrap();
        assert_eq!(c.ppw, 6.0);
        assert_eq!(c.rtol, 1e-6);
        assert_eq!(c.restart, 20);
        assert_eq!(c.profile.kind, ProfileKind::GaussianLens);
    }

    #[test]
    fn parse_all_keys() {
        let text = "\
# comment
dim = 3
k_over_2pi = 5   # trailing
ppw = 8
profile.kind = custom
profile.amplitude_re = -0.5
profile.amplitude_im = 0.1
profile.bumps = 0.4,0.5,0.5,0.1,-0.3,0; 0.6,0.5,0.5,0.1,-0.2,0.05
rtol = 1e-8
restart = 30
maxiter = 99
oracle = true
dump_fields = f.bin
out = o.csv
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.dim, 3);
        assert_eq!(c.profile.bumps.len(), 2);
        assert_eq!(c.profile.bumps[1].2, Complex64::new(-0.2, 0.05));
        assert_eq!(c.maxiter, 99);
        assert!(c.oracle);
        assert_eq!(c.out.as_deref(), Some(Path::new("o.csv")));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "dim = 2",
            "k_over_2pi = 1\nfoo = 1",
            "k_over_2pi = x",
            "k_over_2pi = 1\ndim = 4",
            "k_over_2pi = 1\nprofile.kind = sphere",
            "k_over_2pi = 1\nprofile.kind = custom",
            "k_over_2pi = 1\nrestart = 0",
            "just words",
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn header_is_frozen() {
        assert_eq!(
            CSV_HEADER,
            "k_over_2pi,n,N,t_setup_s,t_apply_s,n_iter,t_solve_s,true_rel_res"
        );
    }

    #[test]
    fn field_round_trip_in_memory() {
        let g = Grid::new(2, 5, 1.2345678901234567).unwrap();
        let vals = (0..g.unknowns())
            .map(|i| Complex64::new(i as f64 / 3.0, -(i as f64).sqrt()))
            .collect();
        let f = VectorField::from_values(g, vals).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back = read_field(&mut &buf[..]).unwrap();
        assert_eq!(back, f);
        assert!(buf.starts_with(b"VIEFIELD 2 5 1.2345678901234567 2\n"));
    }
}
