//! Command-line front end: argument parsing, config resolution and the four
//! verbs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thermopinn::gradcheck::gradient_check;
use thermopinn::plot::{heatmap, line_chart, Series};
use thermopinn::problems::{Oracle, ProblemCode, ProblemSpec, KIRSCH_RADIUS};
use thermopinn::report::{format_table, run, write_table, SolutionReport, TableRow};
use thermopinn::{Error, Result};

/// Directory that receives run outputs when `--out` is not given.
pub const OUT_ENV: &str = "THERMOPINN_OUT";
const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "thermopinn", version, about = "Energy-based PINN solver for thermo-elastic benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one problem, score it against its reference and write artifacts.
    Run(RunArgs),
    /// Run every problem with defaults and print the table of R² scores.
    Table3 {
        /// Restrict to these problem codes.
        #[arg(long)]
        only: Vec<String>,
        /// Override the epoch count of every problem.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the node set of a problem as CSV and SVG.
    ExportMesh {
        code: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare loss gradients with central finite differences.
    Gradcheck {
        code: String,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        /// Weights sampled per layer; one bias per layer is always added.
        #[arg(long, default_value_t = 4)]
        per_layer: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleChoice {
    Analytic,
    Fem,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Problem code; may be omitted when --config is given.
    pub code: Option<String>,
    /// Problem config in TOML, as written beside every run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleChoice>,
    /// Finite element mesh as NXxNY.
    #[arg(long)]
    pub fem_mesh: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    AcceptanceFailure,
}

/// 0 success, 1 acceptance failure, 2 configuration error, 3 numerical abort.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::AcceptanceFailure) => 1,
        Err(Error::NonFinite { .. } | Error::Singular(_) | Error::DivisionByZero(_)) => 3,
        Err(_) => 2,
    }
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run(args) => run_command(&args),
        Command::Table3 { only, epochs, out } => table3(&only, epochs, out),
        Command::ExportMesh { code, out } => export_mesh(&code, out),
        Command::Gradcheck {
            code,
            seeds,
            per_layer,
        } => gradcheck(&code, seeds, per_layer),
    }
}

fn out_root(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn parse_mesh(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("mesh `{s}` is not NXxNY"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let nx = a.trim().parse().map_err(|_| bad())?;
    let ny = b.trim().parse().map_err(|_| bad())?;
    Ok((nx, ny))
}

/// Problem spec from a config file or a code, with flag overrides applied.
pub fn resolve(args: &RunArgs) -> Result<ProblemSpec> {
    let mut spec = match (&args.config, &args.code) {
        (Some(path), code) => {
            let spec = ProblemSpec::from_toml(&fs::read_to_string(path)?)?;
            if let Some(c) = code {
                let c: ProblemCode = c.parse()?;
                if c != spec.code {
                    return Err(Error::Config(format!("config is for {}, not {c}", spec.code)));
                }
            }
            spec
        }
        (None, Some(code)) => ProblemSpec::default_for(code.parse()?),
        (None, None) => return Err(Error::Config("give a problem code or --config".into())),
    };
    if let Some(e) = args.epochs {
        spec.train.epochs = e;
    }
    if let Some(s) = args.seed {
        spec = spec.with_seed(s);
    }
    if let Some(lr) = args.lr {
        spec.train.learning_rate = lr;
    }
    let mesh = args.fem_mesh.as_deref().map(parse_mesh).transpose()?;
    match (args.oracle, mesh) {
        (Some(OracleChoice::Analytic), _) => {
            spec.oracle = match spec.code {
                ProblemCode::Kirsch => ProblemSpec::default_for(ProblemCode::Kirsch).oracle,
                _ => Oracle::Analytic,
            }
        }
        (Some(OracleChoice::Fem), m) => {
            let (nx, ny) = m.unwrap_or((40, 120));
            spec.oracle = Oracle::Fem { nx, ny };
        }
        (None, Some((nx, ny))) => spec.oracle = Oracle::Fem { nx, ny },
        (None, None) => {}
    }
    spec.validate()?;
    Ok(spec)
}

fn summary(report: &SolutionReport) -> String {
    let t = &report.trace;
    let mut s = format!(
        "{}: {} epochs ({:?}), final loss {:.6} (elastic {:.6}, thermal {:.6}, external {:.6})\n",
        report.spec.code,
        t.epochs(),
        t.stop,
        t.final_loss.total,
        t.final_loss.elastic,
        t.final_loss.thermal,
        t.final_loss.external
    );
    s.push_str(&format_table(&[TableRow::from_report(report)]));
    for c in &report.checks {
        s.push_str(&format!(
            "  {:<4} {:<45} {}\n",
            c.variable.label(),
            c.requirement.to_string(),
            if c.passed { "pass" } else { "FAIL" }
        ));
    }
    s
}

fn run_command(args: &RunArgs) -> Result<Outcome> {
    let spec = resolve(args)?;
    let dir = out_root(args.out.clone()).join(spec.code.as_str());
    let (_, report) = run(&spec)?;
    let files = report.write_all(&dir)?;
    print!("{}", summary(&report));
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(if report.passed() {
        Outcome::Success
    } else {
        Outcome::AcceptanceFailure
    })
}

fn table3(only: &[String], epochs: Option<usize>, out: Option<PathBuf>) -> Result<Outcome> {
    let codes: Vec<ProblemCode> = if only.is_empty() {
        ProblemCode::ALL.to_vec()
    } else {
        only.iter().map(|c| c.parse()).collect::<Result<_>>()?
    };
    let root = out_root(out);
    let mut rows = Vec::new();
    for code in codes {
        let mut spec = ProblemSpec::default_for(code);
        if let Some(e) = epochs {
            spec.train.epochs = e;
        }
        let row = run(&spec).and_then(|(_, report)| {
            report.write_all(&root.join(code.as_str()))?;
            Ok(TableRow::from_report(&report))
        });
        let row = row.unwrap_or_else(|e| TableRow::failed(code, &e));
        eprintln!("{code}: {}", if row.passed() { "pass" } else { "FAIL" });
        rows.push(row);
    }
    let text = format_table(&rows);
    print!("{text}");
    fs::create_dir_all(&root)?;
    fs::write(root.join("table3.txt"), &text)?;
    write_table(&rows, fs::File::create(root.join("table3.csv"))?)?;
    Ok(if rows.iter().all(TableRow::passed) {
        Outcome::Success
    } else {
        Outcome::AcceptanceFailure
    })
}

fn export_mesh(code: &str, out: Option<PathBuf>) -> Result<Outcome> {
    let spec = ProblemSpec::default_for(code.parse()?);
    let nodes = spec.build_nodes()?;
    let dir = out_root(out).join(spec.code.as_str());
    fs::create_dir_all(&dir)?;
    nodes.write_csv(&dir.join("nodes.csv"))?;
    let svg = if nodes.dim == 1 {
        let pts = nodes.points.iter().zip(&nodes.weights).map(|(p, &w)| (p[0], w)).collect();
        line_chart(&format!("{} node weights", spec.code), "x", "w", &[Series::new("w", pts)])
    } else {
        heatmap(&format!("{} node weights", spec.code), &nodes.points, &[("w", &nodes.weights)])
    };
    fs::write(dir.join("nodes.svg"), svg)?;
    println!(
        "{}: {} interior nodes, measure {:.6}, boundary groups {}",
        spec.code,
        nodes.len(),
        nodes.measure(),
        nodes
            .boundaries
            .iter()
            .map(|g| format!("{}({})", g.name, g.nodes.len()))
            .collect::<Vec<_>>()
            .join(" ")
    );
    if spec.code == ProblemCode::Kirsch {
        println!("hole radius {KIRSCH_RADIUS}");
    }
    println!("wrote {}", dir.display());
    Ok(Outcome::Success)
}

fn gradcheck(code: &str, seeds: u64, per_layer: usize) -> Result<Outcome> {
    let spec = ProblemSpec::default_for(code.parse()?);
    let mut ok = true;
    for seed in 0..seeds {
        let c = gradient_check(&spec, seed, per_layer)?;
        ok &= c.passed();
        println!(
            "{} seed {seed}: {} parameters, max relative error {:.3e} {}",
            spec.code,
            c.params.len(),
            c.max_rel_error(),
            if c.passed() { "pass" } else { "FAIL" }
        );
    }
    Ok(if ok { Outcome::Success } else { Outcome::AcceptanceFailure })
}

/// Output directory a run of `code` writes to under `root`.
pub fn run_dir(root: &Path, code: ProblemCode) -> PathBuf {
    root.join(code.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(code: &str) -> RunArgs {
        RunArgs {
            code: Some(code.into()),
            config: None,
            epochs: None,
            seed: None,
            lr: None,
            oracle: None,
            fem_mesh: None,
            out: None,
        }
    }

    #[test]
    fn overrides_apply() {
        let mut a = args("2D-FGM-ELAS-NEU");
        a.epochs = Some(7);
        a.seed = Some(3);
        a.fem_mesh = Some("10x30".into());
        let spec = resolve(&a).unwrap();
        assert_eq!(spec.train.epochs, 7);
        assert_eq!(spec.train.seed, 3);
        assert_eq!(spec.oracle, Oracle::Fem { nx: 10, ny: 30 });
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        let mut a = args("1D-FGM-ELAS-DIRCH");
        a.oracle = Some(OracleChoice::Fem);
        assert_eq!(exit_code(&resolve(&a).map(|_| Outcome::Success)), 2);
        assert!(matches!(resolve(&args("NOPE")), Err(Error::UnknownProblem(_))));
        let mut a = args("2D-FGM-ELAS-NEU");
        a.fem_mesh = Some("ten".into());
        assert!(matches!(resolve(&a), Err(Error::Config(_))));
        let mut a = args("KIRSCH");
        a.lr = Some(-1.0);
        assert!(matches!(resolve(&a), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(Outcome::Success)), 0);
        assert_eq!(exit_code(&Ok(Outcome::AcceptanceFailure)), 1);
        assert_eq!(exit_code(&Err(Error::Config("x".into()))), 2);
        assert_eq!(exit_code(&Err(Error::NonFinite { epoch: 3, value: f64::NAN })), 3);
    }

    #[test]
    fn mesh_strings() {
        assert_eq!(parse_mesh("40x120").unwrap(), (40, 120));
        assert_eq!(parse_mesh("8X24").unwrap(), (8, 24));
        assert!(parse_mesh("8").is_err());
    }
}
