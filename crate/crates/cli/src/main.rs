use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ra_ddp::audit::{
    fixpoint_implication_audit, invariant_set_audit, monotonicity_audit, vector_field_certificate,
};
use ra_ddp::export::{read_values_csv, write_region_pgms, write_trace_csv, write_values_csv};
use ra_ddp::oracle::brute_force_value;
use ra_ddp::player::{hybrid_play, play_correct, AdversaryModel, Configuration, Termination};
use ra_ddp::scope::hyper_policy_synthesize;
use ra_ddp::solver::{hji_residual, winning_region};
use ra_ddp::taskfile::TaskFile;
use ra_ddp::wellformed::well_formed;
use ra_ddp::{Error, Solution};

const EXIT_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_UNSOLVABLE: u8 = 3;

const ORACLE_BUDGET: u64 = 5_000_000;

#[derive(Parser)]
#[command(
    name = "ra-ddp",
    version,
    about = "Reach-avoid dynamic programming on integer lattices"
)]
struct Cli {
    /// Worker threads for the solver (RA_DDP_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the side-conditions of a task file.
    Check { taskfile: PathBuf },
    /// Synthesise the controller of one route segment.
    Solve {
        taskfile: PathBuf,
        #[arg(long, default_value_t = 0)]
        segment: usize,
        /// Write the value and argmin table as CSV.
        #[arg(long, value_name = "FILE")]
        dump_values: Option<PathBuf>,
        /// Write one PGM slice of the winning region per stage.
        #[arg(long, value_name = "DIR")]
        dump_region: Option<PathBuf>,
        /// Cross-check every computed value against brute-force search.
        #[arg(long)]
        oracle: bool,
    },
    /// Play the whole route against an adversary.
    Play {
        taskfile: PathBuf,
        #[arg(long, value_enum)]
        adversary: Option<AdversaryArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        trace_out: Option<PathBuf>,
    },
    /// Audit a dumped value table.
    Audit {
        taskfile: PathBuf,
        #[arg(long, value_name = "FILE")]
        values: PathBuf,
        #[arg(long, default_value_t = 0)]
        segment: usize,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum AdversaryArg {
    Zero,
    Random,
    Worst,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("RA_DDP_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .or(cli.threads);
    if let Some(n) = threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let code = match cli.command {
        Command::Check { taskfile } => check(&taskfile),
        Command::Solve {
            taskfile,
            segment,
            dump_values,
            dump_region,
            oracle,
        } => solve(
            &taskfile,
            segment,
            dump_values.as_deref(),
            dump_region.as_deref(),
            oracle,
        ),
        Command::Play {
            taskfile,
            adversary,
            seed,
            trace_out,
        } => play(&taskfile, adversary, seed, trace_out.as_deref()),
        Command::Audit {
            taskfile,
            values,
            segment,
        } => audit(&taskfile, &values, segment),
    };
    match code {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EXIT_INPUT, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(EXIT_INPUT, e.to_string())
    }
}

fn load(path: &Path) -> Result<(TaskFile, Configuration), Failure> {
    let tf = TaskFile::load(path)?;
    let cfg = tf.to_configuration()?;
    Ok((tf, cfg))
}

fn check(path: &Path) -> Result<(), Failure> {
    let (_, cfg) = load(path)?;
    let report = well_formed(&cfg);
    print!("{report}");
    if report.overall {
        Ok(())
    } else {
        Err(Failure(EXIT_FAILED, "configuration is not well-formed".into()))
    }
}

fn synthesize(cfg: &Configuration, segment: usize) -> Result<(Solution, usize), Failure> {
    if segment >= cfg.segment_count() {
        return Err(Failure(
            EXIT_INPUT,
            format!("segment {segment} out of range 0..{}", cfg.segment_count()),
        ));
    }
    let x0 = cfg.segment_start(segment);
    let (game, hyper) = cfg
        .segment_setup(segment, &x0)
        .map_err(|e| Failure(EXIT_UNSOLVABLE, e.to_string()))?;
    match hyper_policy_synthesize(&hyper, &game, &x0, cfg.task.arena()) {
        Ok(s) => Ok((s.solution, s.extensions)),
        Err(u) => {
            println!("solvable=false");
            println!("scope_lo={}", u.scope.lo());
            println!("scope_hi={}", u.scope.hi());
            println!("horizon={}", u.horizon);
            println!("winning_cells_stage1={}", u.region_size);
            println!("solves={}", u.solves);
            Err(Failure(EXIT_UNSOLVABLE, u.to_string()))
        }
    }
}

fn solve(
    path: &Path,
    segment: usize,
    dump_values: Option<&Path>,
    dump_region: Option<&Path>,
    oracle: bool,
) -> Result<(), Failure> {
    let (_, cfg) = load(path)?;
    let (sol, extensions) = synthesize(&cfg, segment)?;
    let x0 = cfg.segment_start(segment);
    let g = sol.game();
    println!("solvable=true");
    println!("segment={segment}");
    println!("scope_lo={}", g.scope().lo());
    println!("scope_hi={}", g.scope().hi());
    println!("horizon={}", sol.horizon());
    println!("extensions={extensions}");
    println!(
        "fixpoint_stage={}",
        sol.fixpoint_stage().map_or("none".into(), |k| k.to_string())
    );
    println!("value_x0={}", sol.value(&x0, 1)?);
    println!("winning_cells_stage1={}", winning_region(&sol, 1)?.len());

    if let Some(file) = dump_values {
        let mut w = BufWriter::new(File::create(file)?);
        write_values_csv(&sol, &mut w)?;
        w.flush()?;
    }
    if let Some(dir) = dump_region {
        write_region_pgms(&sol, dir)?;
    }
    if oracle {
        let mut mismatches = 0usize;
        for k in sol.stages_computed() {
            for x in g.scope().iter() {
                let expected = brute_force_value(g, &x, k, ORACLE_BUDGET)
                    .map_err(|e| Failure(EXIT_FAILED, format!("oracle refused: {e}")))?;
                let got = sol.value(&x, k)?;
                if got != expected {
                    mismatches += 1;
                    eprintln!("mismatch at {x}, stage {k}: table {got}, oracle {expected}");
                }
            }
        }
        println!("oracle_mismatches={mismatches}");
        if mismatches > 0 {
            return Err(Failure(
                EXIT_FAILED,
                "value table disagrees with the oracle".into(),
            ));
        }
    }
    Ok(())
}

fn play(
    path: &Path,
    adversary: Option<AdversaryArg>,
    seed: Option<u64>,
    trace_out: Option<&Path>,
) -> Result<(), Failure> {
    let (tf, cfg) = load(path)?;
    let seed = seed.unwrap_or(tf.run.seed);
    let model = match adversary {
        None => match tf.run.adversary_model() {
            AdversaryModel::Random(_) => AdversaryModel::Random(seed),
            m => m,
        },
        Some(AdversaryArg::Zero) => AdversaryModel::Zero,
        Some(AdversaryArg::Random) => AdversaryModel::Random(seed),
        Some(AdversaryArg::Worst) => AdversaryModel::Worst,
    };
    let trace = hybrid_play(&cfg, model);
    if let Some(file) = trace_out {
        let mut w = BufWriter::new(File::create(file)?);
        write_trace_csv(&trace, cfg.template.controls.dim(), &mut w)?;
        w.flush()?;
    }
    let correct = play_correct(&trace, &cfg.task);
    println!("termination={}", trace.termination.name());
    println!("steps={}", trace.steps.len());
    println!("final_state={}", trace.final_state);
    println!("correct={correct}");
    for d in &trace.diagnostics {
        println!("diagnostic={d}");
    }
    match (correct, &trace.termination) {
        (true, _) => Ok(()),
        (false, Termination::UnsolvableSegment) => {
            Err(Failure(EXIT_UNSOLVABLE, "a route segment is unsolvable".into()))
        }
        (false, t) => Err(Failure(EXIT_FAILED, format!("incorrect play ({})", t.name()))),
    }
}

fn audit(path: &Path, values: &Path, segment: usize) -> Result<(), Failure> {
    let (_, cfg) = load(path)?;
    if segment >= cfg.segment_count() {
        return Err(Failure(EXIT_INPUT, format!("segment {segment} out of range")));
    }
    let x0 = cfg.segment_start(segment);
    let (game, _) = cfg.segment_setup(segment, &x0)?;
    let sol = read_values_csv(&game, File::open(values)?)?;
    let g = sol.game();

    let mono = monotonicity_audit(&sol);
    let mut hji_failures = 0usize;
    for k in (*sol.stages_computed().start() + 1)..=sol.horizon() {
        for x in g.scope().iter() {
            if !hji_residual(&sol, &x, k)?.is_zero() {
                hji_failures += 1;
            }
        }
    }
    let field = vector_field_certificate(&sol, g);
    let fixpoint = fixpoint_implication_audit(&sol, &x0);
    let inv = invariant_set_audit(&sol, g, cfg.delta());

    println!(
        "monotonicity={} violations={}",
        mono.passed(),
        mono.violations.len()
    );
    println!("hji_identity={} violations={hji_failures}", hji_failures == 0);
    println!(
        "vector_field={} violations={}",
        field.passed(),
        field.violations.len()
    );
    println!(
        "fixpoint_implication={} violations={}",
        fixpoint.passed(),
        fixpoint.violations.len()
    );
    println!(
        "invariant_inclusion={} violations={}",
        inv.inclusion.passed(),
        inv.inclusion.violations.len()
    );
    println!(
        "invariant_closure={} violations={}",
        inv.closure.passed(),
        inv.closure.violations.len()
    );
    for v in mono.violations.iter().take(10) {
        println!(
            "monotonicity_violation={} k={} {} > {}",
            v.x, v.k, v.earlier, v.later
        );
    }

    let mandatory =
        mono.passed() && hji_failures == 0 && field.passed() && fixpoint.passed() && inv.closure.passed();
    if mandatory {
        Ok(())
    } else {
        Err(Failure(EXIT_FAILED, "audit failed".into()))
    }
}
