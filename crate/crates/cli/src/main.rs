//! `blocc` command-line frontend.
//!
//! Reports are JSON, written to `--output` or stdout. Exit status is 0 on
//! success, 1 when a verification fails (the report is still written) and 2
//! on input errors, which print a single-line `{"error": ...}` to stderr.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blocc_core::battery::{fidelity_bound, min_battery_for_fidelity, BatteryConfig};
use blocc_core::lift::{
    boundary_states, complete, lift, product_overlap, verification_report, AggregateReport,
    LiftReport, OverlapReport,
};
use blocc_core::protocols::{concentration_distribution, dilution_canonical, ConcentrationSpec};
use blocc_core::schmidt::{entanglement_entropy, SchmidtVector};
use blocc_core::theorems::{crooks_check, full_suite, jarzynski, third_law_bound, TheoremReport};
use blocc_core::transfer::{
    canonical_reversible, feasibility_lp, sample_joint, verify_conditions, work_marginal,
    ConditionReport, FeasibilityOptions, FeasibilityResult, TransferMatrix, WorkGrid,
};
use blocc_core::{numeric, Error as CoreError};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "blocc",
    version,
    about = "Battery-assisted entanglement transformations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write `<PREFIX>_work.csv` (and `<PREFIX>_ratio.csv` where defined).
    #[arg(long, value_name = "PREFIX")]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixInput {
    /// Transfer matrix JSON.
    #[arg(long)]
    input: PathBuf,
    /// Tolerance override.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a transfer matrix exists on a work grid.
    Feasibility {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Build the canonical reversible matrix for `{"p", "q"}`.
    Canonical {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Lift a matrix onto a battery and verify the bistochastic completion.
    Lift {
        #[command(flatten)]
        m: MatrixInput,
        #[arg(long, default_value_t = 2)]
        u: u32,
        #[arg(long)]
        n: u32,
        #[arg(long = "N")]
        big_n: u32,
        /// Also write the completed matrix as CSV (small instances only).
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Check the feasibility conditions; `--all` adds every identity.
    Verify {
        #[command(flatten)]
        m: MatrixInput,
        #[arg(long)]
        all: bool,
    },
    /// Run every applicable identity and bound.
    Theorems {
        #[command(flatten)]
        m: MatrixInput,
    },
    Jarzynski {
        #[command(flatten)]
        m: MatrixInput,
    },
    Crooks {
        #[command(flatten)]
        m: MatrixInput,
    },
    Thirdlaw {
        #[command(flatten)]
        m: MatrixInput,
    },
    /// Work distribution of entanglement concentration for `{"n", "p"}`.
    Concentrate {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Reversible dilution of `{"target", "m"}`.
    Dilute {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Smallest battery reaching a fidelity bound.
    BatteryBound {
        #[arg(long)]
        fidelity: f64,
        #[arg(long)]
        amax: u32,
        #[command(flatten)]
        out: Output,
    },
    /// Draw `(i, j, w)` outcomes; the CSV table goes to `--output`.
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        count: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Whether every check in a report passed.
enum Verdict {
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeasibilityInput {
    p: SchmidtVector,
    q: SchmidtVector,
    /// Full grid; defaults to the canonical grid.
    #[serde(default)]
    grid: Option<Vec<f64>>,
    /// Points added to the canonical grid.
    #[serde(default)]
    extra_grid: Option<Vec<f64>>,
    #[serde(default)]
    mean_w_target: Option<f64>,
    #[serde(default)]
    relax_c2: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairInput {
    p: SchmidtVector,
    q: SchmidtVector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiluteInput {
    target: SchmidtVector,
    m: u32,
}

#[derive(Serialize)]
struct VerifyOutput {
    conditions: ConditionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorems: Option<Vec<TheoremReport>>,
    pass: bool,
}

#[derive(Serialize)]
struct SuiteOutput {
    reports: Vec<TheoremReport>,
    pass: bool,
}

#[derive(Serialize)]
struct LiftOutput {
    config: BatteryConfig,
    a_max: u32,
    /// Big integers are written as decimal strings.
    m_total: String,
    fill_count: String,
    dimension: String,
    aggregate: AggregateReport,
    explicit: Option<LiftReport>,
    overlap: OverlapReport,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ConcentrateOutput {
    n: u32,
    p: f64,
    mean_work: f64,
    rate: f64,
    entropy: f64,
    distribution: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct BatteryBoundOutput {
    #[serde(rename = "N_min")]
    n_big_min: u32,
    n_min: u32,
    fidelity_bound: f64,
}

#[derive(Serialize)]
struct SampleOutput {
    count: u64,
    seed: u64,
    mean_exp2_w: f64,
    stderr: f64,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: &Output, text: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &Output, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    emit(out, &text)
}

fn plot_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Work marginal, and the Crooks ratio series when the target is uniform.
fn plot_matrix(out: &Output, t: &TransferMatrix) -> CliResult<()> {
    let Some(prefix) = &out.emit_plot_data else {
        return Ok(());
    };
    fs::write(plot_path(prefix, "_work.csv"), work_marginal(t).to_csv())?;
    if t.q().is_uniform(numeric::NORMALIZATION_TOL) {
        let report = crooks_check(t)?;
        fs::write(plot_path(prefix, "_ratio.csv"), report.to_csv())?;
    }
    Ok(())
}

fn tolerance(tol: Option<f64>, default: f64) -> CliResult<f64> {
    match tol {
        Some(t) if !(t.is_finite() && t > 0.0) => {
            Err(CliError::Input("tolerance must be positive".into()))
        }
        Some(t) => Ok(t),
        None => Ok(default),
    }
}

fn retolerate(reports: Vec<TheoremReport>, tol: Option<f64>) -> Vec<TheoremReport> {
    match tol {
        Some(t) => reports.into_iter().map(|r| r.with_tolerance(t)).collect(),
        None => reports,
    }
}

fn suite(m: &MatrixInput, reports: Vec<TheoremReport>) -> CliResult<Verdict> {
    let reports = retolerate(reports, m.tol);
    let pass = reports.iter().all(|r| r.pass);
    emit_json(&m.out, &SuiteOutput { reports, pass })?;
    Ok(pass.into())
}

fn load_matrix(m: &MatrixInput) -> CliResult<TransferMatrix> {
    tolerance(m.tol, 1.0)?;
    read_json(&m.input)
}

fn run(command: Command) -> CliResult<Verdict> {
    match command {
        Command::Feasibility { input, out } => {
            let inp: FeasibilityInput = read_json(&input)?;
            let canonical = WorkGrid::canonical(&inp.p, &inp.q)?;
            let grid = match (inp.grid, inp.extra_grid) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Input(
                        "give either grid or extra_grid, not both".into(),
                    ))
                }
                (Some(g), None) => WorkGrid::new(g)?,
                (None, Some(extra)) => canonical.union(&WorkGrid::new(extra)?),
                (None, None) => canonical,
            };
            let opts = FeasibilityOptions {
                mean_w_target: inp.mean_w_target,
                relax_c2: inp.relax_c2,
            };
            let result: FeasibilityResult = feasibility_lp(&inp.p, &inp.q, &grid, &opts)?;
            emit_json(&out, &result)?;
            if let (Some(prefix), Some(w)) = (&out.emit_plot_data, &result.witness) {
                fs::write(plot_path(prefix, "_work.csv"), work_marginal(w).to_csv())?;
            }
            Ok(Verdict::Pass)
        }
        Command::Canonical { input, out } => {
            let inp: PairInput = read_json(&input)?;
            let t = canonical_reversible(&inp.p, &inp.q)?;
            emit_json(&out, &t)?;
            plot_matrix(&out, &t)?;
            Ok(Verdict::Pass)
        }
        Command::Lift {
            m,
            u,
            n,
            big_n,
            matrix,
        } => {
            let tol = tolerance(m.tol, numeric::STRUCTURAL_TOL)?;
            let t = load_matrix(&m)?;
            let cfg = BatteryConfig::new(u, n, big_n)?;
            let l = lift(&t, &cfg)?;
            let c = complete(&l)?;
            let b = boundary_states(&l);
            let aggregate = c.aggregate_report();
            let explicit = if c.is_materializable() {
                Some(verification_report(&c, &b)?)
            } else {
                None
            };
            let overlap = product_overlap(&b);
            let mut pass = aggregate.row_max_residual <= tol
                && aggregate.col_max_residual <= tol
                && overlap.overlap >= overlap.bound;
            if let Some(r) = &explicit {
                pass &= r.row_max_residual <= tol
                    && r.col_max_residual <= tol
                    && r.mapping_residual <= tol;
            }
            if let Some(path) = matrix {
                if !c.is_materializable() {
                    return Err(CliError::Input("matrix too large to write".into()));
                }
                c.write_csv(io::BufWriter::new(fs::File::create(path)?))?;
            }
            emit_json(
                &m.out,
                &LiftOutput {
                    config: cfg,
                    a_max: l.a_max(),
                    m_total: c.m_total().to_string(),
                    fill_count: c.fill_count().to_string(),
                    dimension: c.dimension().to_string(),
                    aggregate,
                    explicit,
                    overlap,
                    tolerance: tol,
                    pass,
                },
            )?;
            plot_matrix(&m.out, &t)?;
            Ok(pass.into())
        }
        Command::Verify { m, all } => {
            let tol = tolerance(m.tol, numeric::STRUCTURAL_TOL)?;
            let t = load_matrix(&m)?;
            let conditions = verify_conditions(&t, tol);
            let theorems = if all {
                Some(retolerate(full_suite(&t)?, m.tol))
            } else {
                None
            };
            let pass = conditions.pass && theorems.iter().flatten().all(|r| r.pass);
            emit_json(
                &m.out,
                &VerifyOutput {
                    conditions,
                    theorems,
                    pass,
                },
            )?;
            plot_matrix(&m.out, &t)?;
            Ok(pass.into())
        }
        Command::Theorems { m } => {
            let t = load_matrix(&m)?;
            let verdict = suite(&m, full_suite(&t)?)?;
            plot_matrix(&m.out, &t)?;
            Ok(verdict)
        }
        Command::Jarzynski { m } => {
            let t = load_matrix(&m)?;
            let verdict = suite(&m, vec![jarzynski(&t)?])?;
            plot_matrix(&m.out, &t)?;
            Ok(verdict)
        }
        Command::Thirdlaw { m } => {
            let t = load_matrix(&m)?;
            let verdict = suite(&m, vec![third_law_bound(&t)])?;
            plot_matrix(&m.out, &t)?;
            Ok(verdict)
        }
        Command::Crooks { m } => {
            let t = load_matrix(&m)?;
            let mut report = crooks_check(&t)?;
            if let Some(tol) = m.tol {
                report.consistency = report.consistency.with_tolerance(tol);
                for p in &mut report.points {
                    p.pass = p.residual <= tol;
                }
                report.pass = report.consistency.pass && report.points.iter().all(|p| p.pass);
            }
            emit_json(&m.out, &report)?;
            plot_matrix(&m.out, &t)?;
            Ok(report.pass.into())
        }
        Command::Concentrate { input, out } => {
            let spec: ConcentrationSpec = read_json(&input)?;
            let dist = concentration_distribution(&spec);
            let entropy =
                entanglement_entropy(&SchmidtVector::new(vec![spec.p(), 1.0 - spec.p()])?);
            let mean = dist.mean();
            emit_json(
                &out,
                &ConcentrateOutput {
                    n: spec.n_copies(),
                    p: spec.p(),
                    mean_work: mean,
                    rate: mean / spec.n_copies() as f64,
                    entropy,
                    distribution: dist.points().to_vec(),
                },
            )?;
            if let Some(prefix) = &out.emit_plot_data {
                fs::write(plot_path(prefix, "_work.csv"), dist.to_csv())?;
            }
            Ok(Verdict::Pass)
        }
        Command::Dilute { input, out } => {
            let inp: DiluteInput = read_json(&input)?;
            let t = dilution_canonical(&inp.target, inp.m)?;
            emit_json(&out, &t)?;
            plot_matrix(&out, &t)?;
            Ok(Verdict::Pass)
        }
        Command::BatteryBound {
            fidelity,
            amax,
            out,
        } => {
            let (n_big_min, n_min) = min_battery_for_fidelity(fidelity, amax)?;
            emit_json(
                &out,
                &BatteryBoundOutput {
                    n_big_min,
                    n_min,
                    fidelity_bound: fidelity_bound(n_big_min, amax),
                },
            )?;
            Ok(Verdict::Pass)
        }
        Command::Sample {
            input,
            count,
            seed,
            out,
        } => {
            if count == 0 {
                return Err(CliError::Input("count must be positive".into()));
            }
            let t: TransferMatrix = read_json(&input)?;
            let table = sample_joint(&t, count, seed)?;
            if let Some(path) = &out.output {
                fs::write(path, table.to_csv())?;
            }
            if let Some(prefix) = &out.emit_plot_data {
                fs::write(
                    plot_path(prefix, "_work.csv"),
                    table.work_frequencies().to_csv(),
                )?;
            }
            let (mean_exp2_w, stderr) = table.mean_exp2_work();
            let summary = SampleOutput {
                count,
                seed,
                mean_exp2_w,
                stderr,
            };
            let mut text =
                serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
            text.push('\n');
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(Verdict::Pass)
        }
    }
}

fn fail(message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": message }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            return fail(first.trim_start_matches("error: "));
        }
    };
    match run(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(CliError::Input(msg)) | Err(CliError::Io(msg)) => fail(&msg),
    }
}
