use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use longtrack::config::Config;
use longtrack::eval::{self, Sequence};
use longtrack::experiment;
use longtrack::synth::{self, SceneScript};
use longtrack::Error;

#[derive(Parser)]
#[command(name = "longtrack", version, about = "Long-term single-object tracker with evaluation and synthetic benchmarks")]
struct Cli {
    /// Worker threads for sequence-level parallelism (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Print every configuration key with its default value and exit.
    #[arg(long)]
    dump_default_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct Sequences {
    /// Sequence directory; may be repeated.
    #[arg(long = "seq", value_name = "DIR")]
    seqs: Vec<PathBuf>,
    /// Directory whose subdirectories are sequences.
    #[arg(long, value_name = "DIR", conflicts_with = "seqs")]
    suite: Option<PathBuf>,
}

impl Sequences {
    fn resolve(&self) -> Result<Vec<PathBuf>, Error> {
        let seqs = match &self.suite {
            Some(root) => eval::list_sequences(root)?,
            None => self.seqs.clone(),
        };
        if seqs.is_empty() {
            return Err(Error::Config("no sequences given (use --seq or --suite)".into()));
        }
        Ok(seqs)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Track sequences and write `<seq>_bbox.txt` / `<seq>_confidence.txt`.
    Run {
        #[command(flatten)]
        seqs: Sequences,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score tracker outputs against ground truth.
    ///
    /// With one `--seq`, `--out` is the metrics CSV. Otherwise `--out` is a
    /// directory receiving `<seq>_metrics.csv` and `attributes.csv`.
    Eval {
        #[command(flatten)]
        seqs: Sequences,
        #[arg(long, value_name = "DIR")]
        pred: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
    /// Render scene scripts, or the standard suite, into sequence directories.
    Synth {
        #[arg(long = "script", value_name = "FILE")]
        scripts: Vec<PathBuf>,
        /// Render the 20-sequence standard suite with this seed.
        #[arg(long, conflicts_with = "scripts")]
        suite_seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run baseline, single-mechanism and full variants over the standard suite.
    Ablate {
        #[arg(long)]
        suite_seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Compare sliding-window and random re-detection search budgets.
    Bench {
        #[arg(long)]
        suite_seed: Option<u64>,
        /// Restrict to one suite family (static, near, far, clutter, occlusion).
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Print every configuration key with its default value.
    DumpDefaultConfig,
}

fn load_config(path: Option<&Path>) -> Result<Config, Error> {
    match path {
        Some(p) => Config::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            e => e,
        }),
        None => Ok(Config::default()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn suite(seed: u64, root: &Path, family: Option<&str>, pool: &rayon::ThreadPool) -> Result<Vec<PathBuf>, Error> {
    let scripts: Vec<SceneScript> = synth::standard_suite(seed)
        .into_iter()
        .filter(|s| family.is_none_or(|f| s.name.split('-').next() == Some(f)))
        .collect();
    if scripts.is_empty() {
        return Err(Error::Config(format!("unknown family {:?}", family.unwrap_or_default())));
    }
    experiment::render_scripts(&scripts, root, pool)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let pool = experiment::pool(cli.jobs)?;
    let command = match cli.command {
        _ if cli.dump_default_config => Command::DumpDefaultConfig,
        Some(c) => c,
        None => return Err(Error::Config("no subcommand given; see --help".into())),
    };
    match command {
        Command::DumpDefaultConfig => print!("{}", Config::default().to_text()),
        Command::Run { seqs, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let runs = experiment::run_all(&cfg, &seqs.resolve()?, &out, &pool)?;
            for r in runs {
                println!("{}: {} frames -> {}", r.sequence, r.results.len(), r.bbox_path.display());
            }
        }
        Command::Eval { seqs, pred, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let th = eval::thresholds(cfg.eval_thresholds);
            let dirs = seqs.resolve()?;
            let scored: Vec<(Sequence, eval::MetricCurve)> = dirs
                .iter()
                .map(|d| eval::evaluate_outputs(d, &pred, &th))
                .collect::<Result<_, _>>()?;
            if let [(seq, curve)] = scored.as_slice() {
                write(&out, &eval::metrics_csv(curve))?;
                println!("{}: f_max {:.6} at tau {:.2}", seq.name, curve.f_max, curve.tau_star);
                return Ok(());
            }
            for (seq, curve) in &scored {
                write(&out.join(format!("{}_metrics.csv", seq.name)), &eval::metrics_csv(curve))?;
                println!("{}: f_max {:.6} at tau {:.2}", seq.name, curve.f_max, curve.tau_star);
            }
            let means = eval::attribute_average(
                scored
                    .iter()
                    .map(|(s, c)| (c.f_max, s.annotation.attributes.as_slice())),
            );
            let mut csv = String::from("attribute,f_max\n");
            for (k, v) in &means {
                csv.push_str(&format!("{k},{v:.6}\n"));
            }
            write(&out.join("attributes.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Synth { scripts, suite_seed, out } => {
            let scripts: Vec<SceneScript> = match suite_seed {
                Some(seed) => synth::standard_suite(seed),
                None if scripts.is_empty() => {
                    return Err(Error::Config("give --script files or --suite-seed".into()))
                }
                None => scripts.iter().map(|p| SceneScript::load(p)).collect::<Result<_, _>>()?,
            };
            for dir in experiment::render_scripts(&scripts, &out, &pool)? {
                println!("{}", dir.display());
            }
        }
        Command::Ablate { suite_seed, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let seed = suite_seed.unwrap_or(cfg.suite_seed);
            let seqs = suite(seed, &out.join("suite"), None, &pool)?;
            let rows = experiment::ablate(&cfg, &seqs, &out.join("runs"), &pool)?;
            let csv = experiment::ablation_csv(&rows);
            write(&out.join("ablation.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Bench { suite_seed, family, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let seed = suite_seed.unwrap_or(cfg.suite_seed);
            let seqs = suite(seed, &out.join("suite"), family.as_deref(), &pool)?;
            let report = experiment::bench(&cfg, &seqs, &out.join("runs"), &pool)?;
            let csv = report.to_csv();
            write(&out.join("bench.csv"), &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn seq_and_suite_conflict() {
        let r = Cli::try_parse_from(["longtrack", "run", "--seq", "a", "--suite", "b", "--out", "o"]);
        assert!(r.is_err());
    }
}
