use clap::{Parser, Subcommand};
use micromacro::chandrasekhar::write_kernel_csv;
use micromacro::runner::{
    compare, epsilon_sweep, kernel_tables, run, ExperimentConfig, NormKind, RunReport,
};
use micromacro::Result;
use std::path::PathBuf;

/// Micro-macro solver for 1D kinetic transport with diffusion-limit
/// boundary matching.
#[derive(Parser)]
#[command(name = "micromacro", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a JSON config
    Run {
        config: PathBuf,
        /// output directory for CSV profiles and report.json
        #[arg(long)]
        out: Option<PathBuf>,
        /// override the number of velocity nodes (M_velocity)
        #[arg(long)]
        nodes: Option<usize>,
        /// override the number of interior spatial nodes (N_space)
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Sweep the scheme across decreasing epsilons at fixed grids
    Sweep {
        config: PathBuf,
        /// comma-separated decreasing epsilon list
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Tabulate the boundary kernels for the configured cross section
    Kernels {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Norm of the profile difference between two report.json files
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// sup or l2
        #[arg(long, default_value = "sup")]
        norm: String,
    },
}

fn apply_overrides(
    config: &mut ExperimentConfig,
    out: Option<PathBuf>,
    nodes: Option<usize>,
    cells: Option<usize>,
) {
    if let Some(dir) = out {
        config.output_path = Some(dir);
    }
    if let Some(m) = nodes {
        config.m_velocity = m;
    }
    if let Some(n) = cells {
        config.n_space = n;
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            nodes,
            cells,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            apply_overrides(&mut cfg, out, nodes, cells);
            let report = run(&cfg)?;
            println!(
                "scheme={} eps={} kappa={:.12}",
                report.scheme, report.epsilon, report.kappa
            );
            for bv in &report.boundary_values {
                println!(
                    "t={} left={} right={}",
                    bv.time,
                    fmt_opt(bv.left),
                    fmt_opt(bv.right)
                );
            }
            if let Some(dir) = &cfg.output_path {
                println!("wrote {}", dir.display());
            }
        }
        Cmd::Sweep {
            config,
            eps,
            out,
            nodes,
            cells,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            apply_overrides(&mut cfg, out, nodes, cells);
            let rows = epsilon_sweep(&cfg, &eps)?;
            println!("epsilon,boundary_value,sup_distance");
            for r in &rows {
                println!("{},{},{}", r.epsilon, r.boundary_value, r.sup_distance);
            }
            if let Some(dir) = &cfg.output_path {
                std::fs::create_dir_all(dir)?;
                let mut s = String::from("epsilon,boundary_value,sup_distance\n");
                for r in &rows {
                    s.push_str(&format!(
                        "{},{},{}\n",
                        r.epsilon, r.boundary_value, r.sup_distance
                    ));
                }
                std::fs::write(dir.join("sweep.csv"), s)?;
                println!("wrote {}", dir.display());
            }
        }
        Cmd::Kernels { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let tables = kernel_tables(&cfg.sigma)?;
            for t in &tables {
                println!(
                    "{}: normalization={:.12} moment={:.12}",
                    t.kind.column_name(),
                    t.normalization(),
                    t.boundary_value(|v| v)
                );
            }
            let dir = out.or(cfg.output_path).unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let refs: Vec<&_> = tables.iter().collect();
            let path = dir.join("kernels.csv");
            write_kernel_csv(&path, &refs)?;
            println!("wrote {}", path.display());
        }
        Cmd::Compare { a, b, norm } => {
            let ra = RunReport::from_path(&a)?;
            let rb = RunReport::from_path(&b)?;
            let kind: NormKind = norm.parse()?;
            for e in compare(&ra, &rb, kind)? {
                println!("t={} {}={}", e.time, e.norm, e.value);
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
