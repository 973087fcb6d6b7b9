//! Command-line frontend: matrix/Gram-spec I/O, one subcommand per analysis,
//! JSON/CSV/table emission, and a fixed exit-code contract:
//!
//! 0 success · 2 input/parse error · 3 domain/dimension/size-guard error ·
//! 4 precision or internal-consistency error · 5 scientific-check failure.
//!
//! Matrix files are JSON objects `{rows, cols, re, im}` (flat row-major
//! arrays); Gram specifications are JSON objects tagged by `kind` (see
//! docs/formats.md). Mode indices on the command line are 1-based. The
//! `BUNCHLAB_THREADS` environment variable caps the worker count (0 = auto).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bunchlab::bunching::BunchingResult;
use bunchlab::counterexample::{reproduce_with_grid, Sampler};
use bunchlab::gram::{compile_gram, default_nonneg_tol, nonneg_class_test, GramSpec};
use bunchlab::interferometer::{h_matrix, reck_decompose, InterferometerScene};
use bunchlab::matrix::CMatrix;
use bunchlab::permanent::{perm_glynn, perm_naive, perm_ryser, PermanentValue};
use bunchlab::selftest::run_selftest;
use bunchlab::Error as LibError;

#[derive(Parser)]
#[command(
    name = "bunchlab",
    version,
    about = "Boson-bunching probabilities, exact permanents, and anomalous-bunching analysis"
)]
struct Cli {
    /// Seed echoed into every report; drives all randomized subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Permanent of a square matrix file.
    Perm {
        /// JSON matrix file {rows, cols, re, im}
        matrix: PathBuf,
        /// ryser, glynn, naive, or all
        #[arg(long, default_value = "ryser")]
        engine: String,
    },
    /// Recompute the bundled 16-photon anomalous-bunching instance and
    /// check every derived number against its reference value.
    Reproduce {
        /// Scan grid step for the violation-ratio curve.
        #[arg(long, default_value_t = 0.001)]
        grid_step: f64,
    },
    /// Bunching probability perm(H ⊙ S) for a unitary, a detected-mode
    /// subset, and a distinguishability model.
    Bunch {
        /// JSON unitary matrix file
        unitary: PathBuf,
        /// comma-separated 1-based output modes, e.g. --kappa 1,2
        #[arg(long)]
        kappa: String,
        /// Gram-spec JSON (kind-tagged) or an explicit matrix file
        #[arg(long)]
        gram: PathBuf,
    },
    /// Randomized search for violations of the eigenvalue-permanent
    /// inequality over random PSD matrices.
    Search {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        /// haar_gram, wishart, low_rank(r), structured_interp
        #[arg(long, default_value = "haar_gram")]
        sampler: String,
    },
    /// Triangular beam-splitter decomposition of a unitary.
    Reck {
        /// JSON unitary matrix file
        unitary: PathBuf,
    },
    /// Seeded verification suites (engines, oracle equivalence, inequality
    /// families, structural identities).
    Selftest {
        /// reduced trial counts, finishes in a few seconds
        #[arg(long)]
        quick: bool,
    },
}

/// Everything that can go wrong, mapped to the exit-code contract.
enum CliError {
    /// exit 2
    Input(String),
    /// exit 3, 4 depending on variant
    Lib(LibError),
    /// exit 5
    Scientific(String),
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Lib(e) => match e {
                LibError::Dimension(_)
                | LibError::Domain(_)
                | LibError::Index(_)
                | LibError::SizeGuard(_) => 3,
                LibError::Convergence(_)
                | LibError::Precision(_)
                | LibError::Internal(_)
                | LibError::DataCorruption(_) => 4,
            },
            CliError::Scientific(_) => 5,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => format!("input error: {m}"),
            CliError::Lib(e) => e.to_string(),
            CliError::Scientific(m) => format!("scientific check failed: {m}"),
        }
    }
}

fn main() -> ExitCode {
    bunchlab::configure_threads_from_env();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bunchlab: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Perm { matrix, engine } => cmd_perm(cli, matrix, engine),
        Command::Reproduce { grid_step } => cmd_reproduce(cli, *grid_step),
        Command::Bunch {
            unitary,
            kappa,
            gram,
        } => cmd_bunch(cli, unitary, kappa, gram),
        Command::Search { n, trials, sampler } => cmd_search(cli, *n, *trials, sampler),
        Command::Reck { unitary } => cmd_reck(cli, unitary),
        Command::Selftest { quick } => cmd_selftest(cli, *quick),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_matrix(path: &Path) -> Result<CMatrix, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&raw)
        .map_err(|e| CliError::Input(format!("{} is not a valid matrix file: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))
}

#[derive(Serialize)]
struct PermReport {
    seed: u64,
    engines: Vec<PermEngineLine>,
    max_relative_spread: Option<f64>,
}

#[derive(Serialize)]
struct PermEngineLine {
    engine: String,
    perm: PermanentValue,
}

fn cmd_perm(cli: &Cli, path: &Path, engine: &str) -> Result<(), CliError> {
    let m = read_matrix(path)?;
    let engines: Vec<(&str, fn(&CMatrix) -> bunchlab::Result<PermanentValue>)> = match engine {
        "ryser" => vec![("ryser", perm_ryser)],
        "glynn" => vec![("glynn", perm_glynn)],
        "naive" => vec![("naive", perm_naive)],
        "all" => {
            let mut v: Vec<(&str, fn(&CMatrix) -> bunchlab::Result<PermanentValue>)> =
                vec![("ryser", perm_ryser), ("glynn", perm_glynn)];
            // the factorial oracle only participates where its guard allows
            if m.rows() <= bunchlab::permanent::MAX_NAIVE_DIM {
                v.push(("naive", perm_naive));
            }
            v
        }
        other => return Err(CliError::Input(format!("unknown engine '{other}'"))),
    };
    let mut lines = Vec::new();
    for (name, f) in &engines {
        let value = f(&m)?;
        lines.push(PermEngineLine {
            engine: name.to_string(),
            perm: value,
        });
    }
    let spread = if lines.len() > 1 {
        let mut worst = 0.0f64;
        for i in 0..lines.len() {
            for j in (i + 1)..lines.len() {
                worst = worst.max(lines[i].perm.rel_diff(&lines[j].perm));
            }
        }
        Some(worst)
    } else {
        None
    };
    let report = PermReport {
        seed: cli.seed,
        engines: lines,
        max_relative_spread: spread,
    };

    match cli.format {
        Format::Json => emit(cli, &to_json(&report)?),
        _ => {
            let mut text = String::new();
            for line in &report.engines {
                let z = line.perm.to_complex();
                let _ = writeln!(
                    text,
                    "{}: {}  (mantissa {}{:+}i, log2_scale {})",
                    line.engine, line.perm, line.perm.value.re, line.perm.value.im, line.perm.log2_scale
                );
                if !z.re.is_finite() {
                    let _ = writeln!(text, "  (true value exceeds double range)");
                }
            }
            if let Some(s) = report.max_relative_spread {
                let _ = writeln!(text, "max relative spread: {s:.3e}");
            }
            let _ = write!(text, "seed: {}", report.seed);
            emit(cli, &text)
        }
    }
}

fn cmd_reproduce(cli: &Cli, grid_step: f64) -> Result<(), CliError> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(CliError::Input(format!(
            "grid step must lie in (0, 0.5], got {grid_step}"
        )));
    }
    let points = (2.0 / grid_step).round() as usize + 1;
    let grid: Vec<f64> = (0..points).map(|i| grid_step * i as f64).collect();
    let report = reproduce_with_grid(&grid)?;

    match cli.format {
        Format::Json => emit(cli, &to_json(&report)?)?,
        Format::Csv => {
            emit(cli, &report.scan.to_csv())?;
            eprintln!("{report}");
            eprintln!("seed: {}", cli.seed);
        }
        Format::Table => {
            let text = format!("{report}\nseed: {}", cli.seed);
            emit(cli, &text)?;
        }
    }
    if report.all_pass {
        Ok(())
    } else {
        Err(CliError::Scientific(
            "one or more reference-value checks failed (see report)".into(),
        ))
    }
}

fn parse_kappa(text: &str, modes: usize) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let k: usize = part
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("bad mode index '{part}' in kappa")))?;
        if k == 0 || k > modes {
            return Err(CliError::Input(format!(
                "mode index {k} outside 1..={modes} (indices are 1-based)"
            )));
        }
        out.push(k - 1);
    }
    Ok(out)
}

#[derive(Serialize)]
struct BunchReport {
    seed: u64,
    probability: f64,
    engine_agreement: f64,
    photons: usize,
    kappa_1based: Vec<usize>,
    h_in_nonnegative_gauge_class: bool,
    note: String,
}

fn cmd_bunch(cli: &Cli, unitary: &Path, kappa_text: &str, gram: &Path) -> Result<(), CliError> {
    let u = read_matrix(unitary)?;
    let s = read_gram_or_spec(gram)?;
    let n = s.rows();
    let kappa = parse_kappa(kappa_text, u.rows())?;
    let scene = InterferometerScene::new(u, n, &kappa)?;
    let h = h_matrix(&scene)?;
    let result: BunchingResult = bunchlab::bunching_prob(&h, &s)?;

    let class = nonneg_class_test(&h, default_nonneg_tol(&h))?;
    let note = if class.member {
        "H is gauge-equivalent to a nonnegative matrix: anomalous bunching is impossible \
         for this configuration"
            .to_string()
    } else {
        "H is not in the nonnegative gauge class: the bound perm(H .* S) <= perm(H) is \
         not guaranteed for all S"
            .to_string()
    };
    let report = BunchReport {
        seed: cli.seed,
        probability: result.probability,
        engine_agreement: result.engine_agreement,
        photons: n,
        kappa_1based: kappa.iter().map(|k| k + 1).collect(),
        h_in_nonnegative_gauge_class: class.member,
        note,
    };
    match cli.format {
        Format::Json => emit(cli, &to_json(&report)?),
        _ => emit(
            cli,
            &format!(
                "probability: {:.16e}\nengine agreement: {:.3e}\nnonnegative gauge class: {}\n{}\nseed: {}",
                report.probability,
                report.engine_agreement,
                report.h_in_nonnegative_gauge_class,
                report.note,
                report.seed
            ),
        ),
    }
}

fn read_gram_or_spec(path: &Path) -> Result<CMatrix, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| CliError::Input(format!("{} is not JSON: {e}", path.display())))?;
    if value.get("kind").is_some() {
        let spec: GramSpec = serde_json::from_value(value)
            .map_err(|e| CliError::Input(format!("bad Gram spec in {}: {e}", path.display())))?;
        Ok(compile_gram(&spec)?)
    } else {
        let m: CMatrix = serde_json::from_value(value)
            .map_err(|e| CliError::Input(format!("bad matrix file {}: {e}", path.display())))?;
        // explicit S files get the same validation as compiled specs
        bunchlab::gram::validate_gram(&m)?;
        Ok(m)
    }
}

fn cmd_search(cli: &Cli, n: usize, trials: usize, sampler_text: &str) -> Result<(), CliError> {
    let sampler =
        Sampler::parse(sampler_text).map_err(|e| CliError::Input(format!("{e}")))?;
    let report = bunchlab::conjecture_search(n, trials, sampler, cli.seed)?;
    match cli.format {
        Format::Json => emit(cli, &to_json(&report)?),
        _ => {
            let mut text = String::new();
            let _ = writeln!(text, "sampler: {}  n: {}  trials: {}  seed: {}", report.sampler, report.n, report.trials, report.seed);
            let _ = writeln!(
                text,
                "best ratio lambda_max/perm: {:.12} (trial {})",
                report.best_ratio, report.best_trial
            );
            let _ = writeln!(text, "best margin: {:.6e}", report.best_margin);
            let _ = writeln!(text, "trials with positive margin: {}", report.positive_count);
            let _ = write!(text, "histogram (ratio - 1): ");
            for (i, &count) in report.histogram_counts.iter().enumerate() {
                if count > 0 {
                    let _ = write!(
                        text,
                        "[{:+.2},{:+.2}):{} ",
                        report.histogram_edges[i],
                        report.histogram_edges[i + 1],
                        count
                    );
                }
            }
            emit(cli, text.trim_end())
        }
    }
}

#[derive(Serialize)]
struct ReckReport {
    seed: u64,
    modes: usize,
    element_count: usize,
    reconstruction_error: f64,
    network: bunchlab::BsNetwork,
}

fn cmd_reck(cli: &Cli, unitary: &Path) -> Result<(), CliError> {
    let u = read_matrix(unitary)?;
    let network = reck_decompose(&u)?;
    let err = network
        .reconstruct()
        .max_abs_diff(&u)
        .map_err(CliError::from)?;
    let report = ReckReport {
        seed: cli.seed,
        modes: network.modes,
        element_count: network.elements.len(),
        reconstruction_error: err,
        network,
    };
    match cli.format {
        Format::Json => emit(cli, &to_json(&report)?),
        _ => {
            let mut text = String::new();
            let _ = writeln!(
                text,
                "modes: {}  elements: {}  reconstruction error: {:.3e}",
                report.modes, report.element_count, report.reconstruction_error
            );
            for el in &report.network.elements {
                let _ = writeln!(
                    text,
                    "  modes ({}, {})  theta {:+.12}  phi {:+.12}",
                    el.mode_a + 1,
                    el.mode_b + 1,
                    el.theta,
                    el.phi
                );
            }
            let phases: Vec<String> = report
                .network
                .phases
                .iter()
                .map(|p| format!("{p:+.12}"))
                .collect();
            let _ = writeln!(text, "output phases: [{}]", phases.join(", "));
            let _ = write!(text, "seed: {}", report.seed);
            emit(cli, &text)
        }
    }
}

fn cmd_selftest(cli: &Cli, quick: bool) -> Result<(), CliError> {
    let report = run_selftest(quick, cli.seed)?;
    match cli.format {
        Format::Json => emit(cli, &to_json(&report)?)?,
        _ => emit(cli, &format!("{report}\nseed: {}", cli.seed))?,
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Scientific("selftest suites failed".into()))
    }
}
