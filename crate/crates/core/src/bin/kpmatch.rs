//! Command-line front end: generators, degree and closeness queries,
//! obstruction detection, exact solving, the staged template matcher, the
//! absorbing matcher, theorem checks, and CSV experiment sweeps.
//!
//! Exit codes: 0 success, 1 solver failure or timeout, 2 invalid input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use kpmatch::absorbing::{perfect_matching_via_absorption, AbsorbConfig, LogBase};
use kpmatch::extremal::{closeness, ClosenessConfig, SearchMode};
use kpmatch::generate::{generate, GenKind, GenSpec};
use kpmatch::harness::{check_theorem, sweep, write_rows, SweepOptions};
use kpmatch::hypergraph::PartiteHypergraph;
use kpmatch::io::{read_instance, render_instance, write_instance};
use kpmatch::matcher::{find_perfect_matching, max_matching, SearchStatus, SolverConfig};
use kpmatch::parity::{check_theorem_case, find_parity_certificate, DEFAULT_NULLSPACE_CAP};
use kpmatch::pipeline::{run_pipeline, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(
    name = "kpmatch",
    version,
    about = "k-partite hypergraph matching toolkit"
)]
struct Cli {
    /// Seed for randomized stages.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver timeout in seconds.
    #[arg(long, global = true, default_value_t = 60)]
    timeout: u64,
    /// Force JSON output for scalar results.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Complete,
    Empty,
    H0,
    H0Subgraph,
    RandomP,
    H0Perturbed,
}

impl From<KindArg> for GenKind {
    fn from(k: KindArg) -> GenKind {
        match k {
            KindArg::Complete => GenKind::Complete,
            KindArg::Empty => GenKind::Empty,
            KindArg::H0 => GenKind::H0,
            KindArg::H0Subgraph => GenKind::H0Subgraph,
            KindArg::RandomP => GenKind::RandomP,
            KindArg::H0Perturbed => GenKind::H0Perturbed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    E,
    #[value(name = "2")]
    Two,
}

#[derive(Args)]
struct GenArgs {
    /// Instance family.
    kind: KindArg,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    /// Comma-separated marked set sizes, e.g. --d 2,2,1.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Keep probability for h0-subgraph / random-p.
    #[arg(long)]
    p: Option<f64>,
    /// Toggle count for h0-perturbed.
    #[arg(long)]
    flips: Option<usize>,
    /// Output path (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and print or write it.
    Gen(GenArgs),
    /// Minimum co-degree of an instance.
    Codegree { instance: PathBuf },
    /// Closeness to the half-split template.
    Closeness {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        /// Local-search restarts.
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
    /// Detect a parity obstruction and classify the theorem case.
    Obstruct { instance: PathBuf },
    /// Exact perfect or maximum matching.
    Solve {
        instance: PathBuf,
        /// Search a perfect matching (default).
        #[arg(long, conflicts_with = "max")]
        perfect: bool,
        /// Search a maximum matching instead.
        #[arg(long)]
        max: bool,
        /// Cache infeasible states (more memory, much faster on extremal
        /// instances).
        #[arg(long)]
        memo: bool,
    },
    /// Run the staged template matcher and print its report.
    Pipeline {
        instance: PathBuf,
        #[arg(long, default_value_t = 0.125)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Reject class sizes below 100 k^2 instead of warning.
        #[arg(long)]
        strict: bool,
    },
    /// Run the absorbing-family matcher and print its report.
    Absorb {
        instance: PathBuf,
        #[arg(long)]
        p_override: Option<f64>,
        #[arg(long, value_enum, default_value_t = BaseArg::E)]
        log_base: BaseArg,
        #[arg(long, default_value_t = 20_000)]
        max_samples: usize,
    },
    /// Compare the obstruction classifier against the exact matcher.
    CheckTheorem { instance: PathBuf },
    /// Run a seeded grid of instances into a CSV.
    Sweep {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        k: usize,
        /// Comma-separated class sizes, e.g. --n 2,3,4.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<usize>>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        flips: Option<usize>,
        /// Seeds 0..count per grid point.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also run the staged template matcher per row.
        #[arg(long)]
        run_pipeline: bool,
        /// Also run the absorbing matcher per row.
        #[arg(long)]
        run_absorb: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<PartiteHypergraph, String> {
    read_instance(path).map_err(|e| e.to_string())
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    let solver = SolverConfig {
        timeout: Duration::from_secs(cli.timeout),
        use_memo: false,
    };
    match cli.command {
        Command::Gen(args) => {
            let spec = GenSpec {
                kind: args.kind.into(),
                k: args.k,
                n: args.n,
                d: args.d,
                p: args.p,
                flips: args.flips,
                seed: cli.seed,
            };
            let h = generate(&spec).map_err(|e| e.to_string())?;
            match args.out {
                Some(path) => write_instance(&path, &h).map_err(|e| e.to_string())?,
                None => print!("{}", render_instance(&h)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Codegree { instance } => {
            let h = load(&instance)?;
            let value = h.min_codegree();
            if cli.json {
                println!("{}", json!({ "min_codegree": value }));
            } else {
                println!("{value}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Closeness {
            instance,
            eps,
            mode,
            restarts,
        } => {
            let h = load(&instance)?;
            let cfg = ClosenessConfig {
                epsilon: eps,
                search_mode: match mode {
                    ModeArg::Exact => SearchMode::Exact,
                    ModeArg::Local => SearchMode::LocalSearch,
                },
                max_iters: restarts,
                seed: cli.seed,
            };
            let r = closeness(&h, &cfg);
            let m = h.equal_class_sizes().unwrap_or(0);
            println!(
                "{}",
                json!({
                    "cost": r.cost,
                    "exact": r.exact,
                    "eps_close": (r.cost as f64) < eps * (m as f64).powi(h.k() as i32),
                    "witness_sets": r.witness.marked_sets(),
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Obstruct { instance } => {
            let h = load(&instance)?;
            let cert = find_parity_certificate(&h);
            let case = check_theorem_case(&h, DEFAULT_NULLSPACE_CAP);
            let case_json = match &case {
                Ok(r) => json!({ "case": r.case, "nullspace_dim": r.nullspace_dim }),
                Err(e) => json!({ "error": e.to_string() }),
            };
            println!(
                "{}",
                json!({
                    "found": cert.is_some(),
                    "d": cert.as_ref().map(|c| c.sizes.clone()),
                    "D": cert.as_ref().map(|c| c.sets.clone()),
                    "theorem_case": case_json,
                })
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            instance,
            perfect: _,
            max,
            memo,
        } => {
            let h = load(&instance)?;
            let solver = SolverConfig {
                use_memo: memo,
                ..solver
            };
            if max {
                let r = max_matching(&h, &solver);
                match r.status {
                    SearchStatus::Complete((size, m)) => {
                        println!(
                            "{}",
                            json!({ "status": "complete", "size": size, "matching": m.edges(), "stats": r.stats })
                        );
                        Ok(ExitCode::SUCCESS)
                    }
                    SearchStatus::Timeout => {
                        println!("{}", json!({ "status": "timeout", "stats": r.stats }));
                        Ok(ExitCode::from(1))
                    }
                }
            } else {
                let r = find_perfect_matching(&h, &solver);
                match r.status {
                    SearchStatus::Complete(found) => {
                        println!(
                            "{}",
                            json!({
                                "status": "complete",
                                "size": found.as_ref().map(|m| m.len()),
                                "matching": found.as_ref().map(|m| m.edges()),
                                "stats": r.stats,
                            })
                        );
                        Ok(ExitCode::SUCCESS)
                    }
                    SearchStatus::Timeout => {
                        println!("{}", json!({ "status": "timeout", "stats": r.stats }));
                        Ok(ExitCode::from(1))
                    }
                }
            }
        }
        Command::Pipeline {
            instance,
            alpha,
            eps,
            strict,
        } => {
            let h = load(&instance)?;
            let cfg = PipelineConfig {
                alpha,
                epsilon: eps,
                strict_constants: strict,
                seed: cli.seed,
                ..Default::default()
            };
            match run_pipeline(&h, &cfg) {
                Ok(report) => {
                    let ok = report.succeeded();
                    println!("{}", serde_json::to_string(&report).unwrap());
                    Ok(if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    })
                }
                Err(PipelineError::Obstruction(cert)) => {
                    println!(
                        "{}",
                        json!({ "obstruction": { "d": cert.sizes, "D": cert.sets } })
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Absorb {
            instance,
            p_override,
            log_base,
            max_samples,
        } => {
            let h = load(&instance)?;
            let cfg = AbsorbConfig {
                log_base: match log_base {
                    BaseArg::E => LogBase::E,
                    BaseArg::Two => LogBase::Two,
                },
                sample_probability_override: p_override,
                family_target_per_set: None,
                max_samples,
                seed: cli.seed,
            };
            let report = perfect_matching_via_absorption(&h, &cfg);
            let ok = report.succeeded();
            println!("{}", serde_json::to_string(&report).unwrap());
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::CheckTheorem { instance } => {
            let h = load(&instance)?;
            let v = check_theorem(&h, &solver);
            println!("{}", serde_json::to_string(&v).unwrap());
            let undecided = v.pm_exists.is_none();
            Ok(if undecided {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sweep {
            kind,
            k,
            n,
            d,
            p,
            flips,
            seeds,
            out,
            run_pipeline,
            run_absorb,
        } => {
            let mut grid = Vec::new();
            for &ni in &n {
                for seed in 0..seeds {
                    grid.push(GenSpec {
                        kind: kind.into(),
                        k,
                        n: ni,
                        d: d.clone(),
                        p,
                        flips,
                        seed: cli.seed.wrapping_add(seed),
                    });
                }
            }
            for spec in &grid {
                generate(spec).map_err(|e| e.to_string())?;
            }
            let rows = sweep(
                &grid,
                &SweepOptions {
                    solver,
                    run_pipeline,
                    run_absorption: run_absorb,
                },
            );
            write_rows(&out, &rows).map_err(|e| e.to_string())?;
            println!(
                "{}",
                json!({ "rows": rows.len(), "out": out.display().to_string() })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
