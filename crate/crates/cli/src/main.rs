use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use switchdex::io::{
    read_instance_json, timestamp_line, write_bench_csv, write_index_csv, write_instance_json,
    write_study_cells_csv, write_study_rows_csv,
};
use switchdex::oracle::brute_force_table;
use switchdex::study::{run_bench, run_study, Experiment, StudyConfig};
use switchdex::verify::{run_verify, VerifyLevel};
use switchdex::{at_index_table, compute_index_table, generate_instance, CostModel, IndexTable, InstanceEnsembleConfig};

#[derive(Parser)]
#[command(name = "switchdex", version, about = "Switching-cost bandit indices and policy studies")]
struct Cli {
    /// Leave out the `# generated` line at the top of CSV files.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instances as JSON files.
    Gen {
        #[arg(long, default_value_t = 2)]
        projects: usize,
        #[arg(long, default_value_t = 10)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// A constant, `uniform`, or one constant per project (comma separated).
        #[arg(long, default_value = "0", value_parser = parse_cost_model)]
        startup: CostModel,
        #[arg(long, default_value = "0", value_parser = parse_cost_model)]
        shutdown: CostModel,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compute the index table of one project of an instance file.
    Index {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::TwoStage)]
        method: Method,
        /// Append operation counters.
        #[arg(long)]
        ops: bool,
        /// Project to index, 1-based.
        #[arg(long, default_value_t = 1)]
        project: usize,
        /// CSV file; standard output when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time the two-stage method against the augmented scheme.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 400, 800, 1600])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Drop the wall-clock columns.
        #[arg(long)]
        no_timing: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score the index policy against the optimum over a parameter grid.
    Study {
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=6))]
        exp: u32,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Axis ranges such as `c=0:0.1:1,beta=0.2:0.1:0.9`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        projects: Option<usize>,
        /// Cell means go here; per-instance rows go next to it with an
        /// `_instances` suffix.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the whole report, configuration included, as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the self-check suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    TwoStage,
    At,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Fast,
    Full,
}

enum Failure {
    Input(String),
    Numerical(String),
    Verification,
}

impl From<switchdex::Error> for Failure {
    fn from(e: switchdex::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn parse_cost_model(s: &str) -> Result<CostModel, String> {
    if s.eq_ignore_ascii_case("uniform") {
        return Ok(CostModel::Uniform01);
    }
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number")))
        .collect::<Result<_, _>>()?;
    match values.as_slice() {
        [v] => Ok(CostModel::Constant(*v)),
        _ => Ok(CostModel::PerProjectConstant(values)),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn csv_header<W: Write>(out: &mut W, no_timestamp: bool) -> io::Result<()> {
    if !no_timestamp {
        out.write_all(timestamp_line().as_bytes())?;
    }
    Ok(())
}

fn instances_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("study");
    output.with_file_name(format!("{stem}_instances.csv"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let no_ts = cli.no_timestamp;
    match cli.command {
        Command::Gen {
            projects,
            states,
            seed,
            count,
            startup,
            shutdown,
            beta,
            output,
        } => {
            let mut cfg = InstanceEnsembleConfig::new(projects, states, seed, count, beta);
            cfg.startup = startup;
            cfg.shutdown = shutdown;
            fs::create_dir_all(&output)?;
            let width = count.to_string().len().max(4);
            for k in 0..count {
                let specs = generate_instance(&cfg, k)?;
                let path = output.join(format!("instance_{:0width$}.json", k + 1));
                let mut out = create(&path)?;
                write_instance_json(&mut out, &specs)?;
                out.flush()?;
            }
            println!("wrote {count} instances to {}", output.display());
        }
        Command::Index {
            input,
            method,
            ops,
            project,
            output,
        } => {
            let text = fs::read_to_string(&input).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
            let specs = read_instance_json(&text)?;
            if project == 0 || project > specs.len() {
                return Err(Failure::Input(format!(
                    "project {project} out of range; the file has {}",
                    specs.len()
                )));
            }
            let spec = &specs[project - 1];
            let table = match method {
                Method::TwoStage => compute_index_table(spec)?,
                Method::At => at_index_table(spec)?,
                Method::Oracle => {
                    let brute = brute_force_table(&spec.normalize()?)?;
                    IndexTable {
                        nu_cont: brute.nu_cont,
                        nu_switch: brute.nu_switch,
                        order_cont: Vec::new(),
                        order_switch: Vec::new(),
                        merged: Vec::new(),
                        op_count_stage1: 0,
                        op_count_stage2: 0,
                    }
                }
            };
            let mut out: Box<dyn Write> = match &output {
                Some(path) => Box::new(create(path)?),
                None => Box::new(io::stdout().lock()),
            };
            csv_header(&mut out, no_ts)?;
            write_index_csv(&mut out, &table, ops)?;
            out.flush()?;
        }
        Command::Bench {
            sizes,
            seed,
            repeats,
            no_timing,
            output,
        } => {
            let rows = run_bench(&sizes, seed, repeats)?;
            let mut out = create(&output)?;
            csv_header(&mut out, no_ts)?;
            write_bench_csv(&mut out, &rows, !no_timing)?;
            out.flush()?;
            for pair in rows.chunks(2) {
                if let [two, at] = pair {
                    if no_timing {
                        println!("n = {:5}  two-stage {} ops  at {} ops", two.n, two.ops_total(), at.ops_total());
                    } else {
                        println!(
                            "n = {:5}  two-stage {:.4}s  at {:.4}s",
                            two.n, two.seconds_total, at.seconds_total
                        );
                    }
                }
            }
        }
        Command::Study {
            exp,
            instances,
            grid,
            seed,
            states,
            projects,
            output,
            json,
        } => {
            let experiment = Experiment::from_number(exp)?;
            let mut cfg = StudyConfig::new(experiment, instances, seed);
            cfg.grid = experiment.grid(grid.as_deref())?;
            if let Some(n) = states {
                cfg.states = n;
            }
            if let Some(m) = projects {
                cfg.projects = m;
            }
            let report = run_study(&cfg)?;
            let mut out = create(&output)?;
            csv_header(&mut out, no_ts)?;
            write_study_cells_csv(&mut out, &report)?;
            out.flush()?;
            let rows_path = instances_path(&output);
            let mut out = create(&rows_path)?;
            csv_header(&mut out, no_ts)?;
            write_study_rows_csv(&mut out, &report)?;
            out.flush()?;
            if let Some(path) = json {
                let mut out = create(&path)?;
                serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Failure::Input(e.to_string()))?;
                out.write_all(b"\n")?;
                out.flush()?;
            }
            let peak = report.cells.iter().map(|c| c.mean_delta).fold(0.0, f64::max);
            println!(
                "experiment {exp}: {} cells x {instances} instances, peak mean delta {peak:.4}%",
                report.cells.len()
            );
        }
        Command::Verify { level, seed } => {
            let level = match level {
                Level::Fast => VerifyLevel::Fast,
                Level::Full => VerifyLevel::Full,
            };
            let report = run_verify(level, seed)?;
            for s in &report.suites {
                println!(
                    "{} {}: {} checks, max error {:.3e}",
                    if s.passed() { "PASS" } else { "FAIL" },
                    s.name,
                    s.checked,
                    s.max_error
                );
                for f in &s.failures {
                    println!("    {f}");
                }
            }
            if !report.all_passed() {
                return Err(Failure::Verification);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
    }
}
