use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparse_beam::admm::{admm_solve, RhoChoice, Variant};
use sparse_beam::beamformer::{beampattern, output_sinr, write_beampattern_csv, BeamformerWeight};
use sparse_beam::config::ScenarioFile;
use sparse_beam::experiments::{
    compare_methods, evaluate_methods, parse_grid, run_experiment, CovarianceSource, ExperimentSpec, Method,
    MethodContext,
};
use sparse_beam::numerics::HermitianMatrix;
use sparse_beam::selection::{count_active, enumerate_all, save_selection_csv, tune_lambda, SelectionReport};
use sparse_beam::signal_model::{data_covariance_true, generate_snapshots, sample_covariance, Scenario};
use sparse_beam::{Error, Result};

/// Sparse-array MVDR beamformer design by ADMM sensor selection.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Worker threads for parallel work (default: one per logical core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one ADMM solve and report convergence diagnostics.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the per-iteration trace (k, lagrangian, primal_residual, feasibility_gap).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Pick L sensors by tuning lambda until the solver keeps exactly L.
    Select {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the selection as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every L-subset and report the best and worst.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Subarray size L (overrides `select` in the scenario file).
        #[arg(long = "select", short = 'l')]
        l: Option<usize>,
        /// Refuse when C(M, L) exceeds this.
        #[arg(long, default_value_t = 1_000_000)]
        cap: u128,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment file and write its CSV and manifest.
    Sweep {
        /// Experiment key-value file (or a manifest from an earlier run).
        experiment: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the number of Monte Carlo trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Compare selection methods on one scenario, best first.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        /// Comma-separated methods (default: all).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Random subsets averaged for the `random` method.
        #[arg(long, default_value_t = 100)]
        random_draws: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Beampattern of one method's subarray weight.
    Pattern {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value = "admm")]
        method: Method,
        /// Angles in degrees: list and/or `a:step:b` ranges.
        #[arg(long, default_value = "-90:0.5:90", allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Scenario file plus solver overrides.
#[derive(Args, Debug)]
struct Common {
    /// Scenario key-value file.
    #[arg(long, short = 's')]
    scenario: PathBuf,
    /// Design covariance: `true` model or `sample` from snapshots.
    #[arg(long, default_value = "sample")]
    covariance: CovarianceSource,
    /// Sparsity weight lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// `auto`, a number, or `atleast:<number>`.
    #[arg(long)]
    rho: Option<RhoChoice>,
    /// Reweighting stabilizer.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Stop when the primal residual falls to this.
    #[arg(long)]
    eta: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    k_max: Option<usize>,
    /// `plain_l1` or `reweighted`.
    #[arg(long)]
    variant: Option<Variant>,
    /// Seed of the random v initialization.
    #[arg(long)]
    init_seed: Option<u64>,
    /// Snapshot count for the sample covariance.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Snapshot seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Lambda search overrides.
#[derive(Args, Debug)]
struct SearchArgs {
    /// Subarray size L (overrides `select` in the scenario file).
    #[arg(long = "select", short = 'l')]
    l: Option<usize>,
    #[arg(long)]
    lambda_lo: Option<f64>,
    #[arg(long)]
    lambda_hi: Option<f64>,
    /// Relative magnitude below which a weight counts as zero.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_search_iters: Option<usize>,
}

struct Loaded {
    file: ScenarioFile,
    scenario: Scenario,
    rx: HermitianMatrix,
}

impl Common {
    fn load(&self, search: Option<&SearchArgs>) -> Result<Loaded> {
        let mut f = ScenarioFile::load(&self.scenario)?;
        let a = &mut f.admm;
        set(&mut a.lambda, self.lambda);
        set(&mut a.rho, self.rho);
        set(&mut a.epsilon, self.epsilon);
        set(&mut a.eta, self.eta);
        set(&mut a.k_max, self.k_max);
        set(&mut a.variant, self.variant);
        set(&mut a.init_seed, self.init_seed);
        set(&mut f.snapshots, self.snapshots);
        set(&mut f.seed, self.seed);
        if let Some(s) = search {
            if s.l.is_some() {
                f.select = s.l;
            }
            set(&mut f.alpha, s.alpha);
            set(&mut f.max_search_iters, s.max_search_iters);
            match (s.lambda_lo, s.lambda_hi, f.lambda_bounds) {
                (Some(lo), Some(hi), _) => f.lambda_bounds = Some((lo, hi)),
                (Some(lo), None, Some((_, hi))) | (None, Some(hi), Some((lo, _))) => f.lambda_bounds = Some((lo, hi)),
                (None, None, _) => {}
                _ => {
                    return Err(Error::Validation(
                        "--lambda-lo and --lambda-hi must be given together".into(),
                    ))
                }
            }
        }
        f.validate()?;
        let scenario = f.scenario()?;
        let rx = match self.covariance {
            CovarianceSource::True => data_covariance_true(&scenario),
            CovarianceSource::Sample => sample_covariance(&generate_snapshots(&scenario, f.snapshots, f.seed)?),
        };
        Ok(Loaded { file: f, scenario, rx })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn require_l(file: &ScenarioFile) -> Result<usize> {
    file.select
        .ok_or_else(|| Error::Validation("subarray size needed: pass --select or set 'select'".into()))
}

fn print_report(label: &str, r: &SelectionReport) {
    let lambda = r.lambda_used.map(|l| format!("{l:e}")).unwrap_or_else(|| "-".into());
    println!(
        "{label:<12} support={:?} sinr_db={:.4} lambda={lambda} solves={}{}",
        r.support,
        r.sinr_db,
        r.search_iters,
        if r.fallback { " (closest sparsity)" } else { "" }
    );
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Solve { common, trace } => {
            let d = common.load(None)?;
            let res = admm_solve(&d.file.admm, &d.rx, &d.scenario.soi_steering())?;
            let w = res.weight();
            let active = count_active(w, d.file.alpha)?;
            println!("rho              {:e}", res.rho);
            if let Some(b) = res.rho_bound {
                println!("rho_bound        {b:e}");
            }
            println!("iterations       {} ({:?})", res.iterations(), res.termination);
            println!("primal_residual  {:e}", res.kkt.primal_residual);
            println!("stationarity     {:e}", res.kkt.stationarity_residual);
            println!("feasibility_gap  {:e}", res.kkt.feasibility_gap);
            println!("active_sensors   {}", active.count);
            println!(
                "sinr_db          {:.4}",
                output_sinr(&BeamformerWeight::full(w.clone()), &d.scenario)?
            );
            if let Some(path) = trace {
                res.save_trace_csv(&path)?;
            }
        }
        Command::Select { common, search, out } => {
            let d = common.load(Some(&search))?;
            let l = require_l(&d.file)?;
            let r = tune_lambda(
                l,
                Some(d.file.lambda_search_on(&d.rx)?),
                &d.file.admm,
                &d.scenario,
                &d.rx,
            )?;
            print_report("admm", &r);
            if let Some(path) = out {
                save_selection_csv(&path, &[("admm", &r)])?;
            }
        }
        Command::Enumerate { common, l, cap, out } => {
            let mut d = common.load(None)?;
            if l.is_some() {
                d.file.select = l;
            }
            let l = require_l(&d.file)?;
            let e = enumerate_all(&d.scenario, &d.rx, l, cap)?;
            println!("evaluated    {}", e.evaluated);
            print_report("best_enum", &e.best);
            print_report("worst_enum", &e.worst);
            if let Some(path) = out {
                save_selection_csv(&path, &[("best_enum", &e.best), ("worst_enum", &e.worst)])?;
            }
        }
        Command::Sweep {
            experiment,
            output_dir,
            trials,
            master_seed,
        } => {
            let mut spec = ExperimentSpec::load(&experiment)?;
            set(&mut spec.output_dir, output_dir);
            set(&mut spec.trials, trials);
            set(&mut spec.master_seed, master_seed);
            let summary = run_experiment(&spec, cli.threads)?;
            println!("{} jobs", summary.jobs);
            println!("{}", summary.csv.display());
            println!("{}", summary.manifest.display());
        }
        Command::Compare {
            common,
            search,
            methods,
            random_draws,
            out,
        } => {
            let d = common.load(Some(&search))?;
            let l = require_l(&d.file)?;
            let methods = methods.unwrap_or_else(|| Method::ALL.to_vec());
            let table = compare_methods(&d.file, l, &methods, common.covariance, random_draws)?;
            println!("{:<12} {:.4}", "optimal", table.optimal_db);
            for r in &table.rows {
                match r.sinr_db {
                    Some(v) => println!("{:<12} {v:.4}", r.method.to_string()),
                    None => println!("{:<12} n/a", r.method.to_string()),
                }
            }
            if let Some(path) = out {
                write_compare_csv(&path, table.optimal_db, &table.rows)?;
            }
        }
        Command::Pattern {
            common,
            search,
            method,
            grid,
            out,
        } => {
            let d = common.load(Some(&search))?;
            let l = require_l(&d.file)?;
            let grid = parse_grid(&grid)?;
            let seeds = [d.file.seed];
            let ctx = MethodContext {
                file: &d.file,
                init_seed: d.file.admm.init_seed,
                random_seeds: &seeds,
            };
            let rows = evaluate_methods(&d.scenario, &d.rx, l, &[method], &ctx)?;
            let w = rows[0].weight.as_ref().ok_or_else(|| {
                Error::Validation(format!("{method} does not apply to M = {}, L = {l}", d.scenario.m()))
            })?;
            let gains = beampattern(w, &grid, d.scenario.m())?;
            write_beampattern_csv(&out, &grid, &gains)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn write_compare_csv(path: &Path, optimal: f64, rows: &[sparse_beam::experiments::MethodRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "sinr_db"])?;
    w.write_record(["optimal".to_string(), optimal.to_string()])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.sinr_db.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
