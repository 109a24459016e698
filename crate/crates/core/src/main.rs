use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxwell_vie::driver::{run, sweep, ExperimentConfig, SweepReport, SweepRow, CSV_HEADER};

#[derive(Parser)]
#[command(version, about = "Preconditioned volume integral solver for Maxwell scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Compare against a dense direct solve.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        dump_fields: Option<PathBuf>,
        /// Append the stats row to this CSV (header written if new).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve several configurations into one CSV.
    Sweep {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Run rows concurrently.
        #[arg(long)]
        parallel: bool,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("VIE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn append_row(path: &Path, cfg: &ExperimentConfig, row: SweepRow) -> std::io::Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let failures = usize::from(row.error.is_some());
    let report = SweepReport {
        rows: vec![row],
        failures,
    };
    let mut buf = Vec::new();
    report
        .write_csv(std::slice::from_ref(cfg), &mut buf)
        .map_err(std::io::Error::other)?;
    let text = String::from_utf8_lossy(&buf);
    let body = text.split_once('\n').map_or("", |(_, b)| b);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{CSV_HEADER}")?;
    }
    f.write_all(body.as_bytes())
}

fn solve(config: &Path, oracle: bool, dump: Option<PathBuf>, out: Option<PathBuf>) -> bool {
    let mut cfg = match ExperimentConfig::from_file(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return false;
        }
    };
    cfg.oracle |= oracle;
    if dump.is_some() {
        cfg.dump_fields = dump;
    }
    if out.is_some() {
        cfg.out = out;
    }
    let row = match run(&cfg) {
        Ok(r) => {
            let s = &r.stats;
            println!(
                "k/2pi={} n={} N={} n_iter={} restarts={} t_setup={:.3e}s t_apply={:.3e}s t_solve={:.3e}s prec_rel_res={:.3e} true_rel_res={:.3e}",
                r.k_over_2pi,
                r.grid.n(),
                r.grid.unknowns(),
                s.iterations,
                s.restarts,
                s.t_setup,
                s.t_apply,
                s.t_solve,
                s.preconditioned_rel_res,
                s.true_rel_res
            );
            if let Some(d) = r.oracle_deviation {
                println!("oracle relative deviation: {d:.3e}");
            }
            SweepRow {
                error: r.failure(),
                output: Some(r),
            }
        }
        Err(e) => SweepRow {
            output: None,
            error: Some(e.to_string()),
        },
    };
    if let Some(e) = &row.error {
        eprintln!("error: {e}");
    }
    let ok = row.error.is_none();
    if let Some(path) = &cfg.out {
        if let Err(e) = append_row(path, &cfg, row) {
            eprintln!("error: writing {}: {e}", path.display());
            return false;
        }
    }
    ok
}

fn run_sweep(paths: &[PathBuf], out: &Path, parallel: bool) -> bool {
    let mut cfgs = Vec::new();
    let mut ok = true;
    for p in paths {
        match ExperimentConfig::from_file(p) {
            Ok(c) => cfgs.push(c),
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                ok = false;
            }
        }
    }
    let report = sweep(&cfgs, parallel);
    for r in report.rows.iter().filter_map(|r| r.error.as_ref()) {
        eprintln!("error: {r}");
    }
    let written = File::create(out)
        .map_err(maxwell_vie::Error::from)
        .and_then(|f| report.write_csv(&cfgs, f));
    if let Err(e) = written {
        eprintln!("error: writing {}: {e}", out.display());
        return false;
    }
    ok && report.failures == 0
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let ok = match cli.command {
        Command::Solve {
            config,
            oracle,
            dump_fields,
            out,
        } => solve(&config, oracle, dump_fields, out),
        Command::Sweep {
            configs,
            out,
            parallel,
        } => run_sweep(&configs, &out, parallel),
    };
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
