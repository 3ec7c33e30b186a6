use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use varembed::mesh::io::parse_mesh;
use varembed::problem::{manufactured_case, ProblemError};
use varembed::study::{self, MeshKind, MeshSource, RunConfig, Scheme};
use varembed::Error;

#[derive(Parser)]
#[command(name = "varembed", version, about = "Coherence checks and convergence studies for discrete variational embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the discrete functional's gradient equals the scheme's residual.
    Coherence(Common),
    /// Tabulate errors and observed orders over a refinement sequence.
    Convergence(Common),
    /// Check the discrete Green-Gauss formula on random probes (fd, fv).
    Greengauss {
        #[command(flatten)]
        common: Common,
        /// Corrupt the flux continuity relation (negative control).
        #[arg(long, hide = true)]
        break_continuity: bool,
    },
    /// Solve a manufactured case and write the discrete solution as CSV.
    Solve(Common),
}

#[derive(Args)]
struct Common {
    /// fd, fem, fv or mfd.
    #[arg(long)]
    scheme: Scheme,
    /// Manufactured case: sin1d, sinsin2d, quad1d, aniso2d.
    #[arg(long)]
    case: Option<String>,
    /// Spatial dimension; inferred from the mesh or case when omitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Resolution; repeat for several.
    #[arg(long = "n")]
    n: Vec<usize>,
    /// fb|bf (fd), midpoint|refined (fem, fv), rt0|diagonal (mfd).
    #[arg(long)]
    mode: Option<String>,
    /// Random states (or state pairs) per check.
    #[arg(long, default_value_t = 10)]
    probes: usize,
    /// Seed of the probe generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pass threshold on the relative defect [default: 1e-12].
    #[arg(long)]
    tol: Option<f64>,
    /// Built-in mesh (interval, cart2d, tri2d, crisscross2d) or a mesh file.
    #[arg(long)]
    mesh: Option<String>,
    /// Directory for report and solution files.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let usage = matches!(
            e,
            Error::Unsupported(_)
                | Error::DimensionMismatch { .. }
                | Error::Mesh(_)
                | Error::NotAdmissible(_)
                | Error::Io(_)
                | Error::Problem(ProblemError::UnknownCase(_) | ProblemError::Dimension { .. })
        );
        if usage {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl Common {
    fn config(&self, default_tol: f64) -> Result<RunConfig, Failure> {
        let mesh = match &self.mesh {
            None => None,
            Some(s) => Some(match s.parse::<MeshKind>() {
                Ok(kind) => MeshSource::Builtin(kind),
                Err(_) => {
                    let text = std::fs::read_to_string(s).map_err(|e| Failure::Usage(format!("{s}: {e}")))?;
                    MeshSource::Text { name: s.clone(), text }
                }
            }),
        };
        let dim = match (self.dim, &mesh, &self.case) {
            (Some(d), _, _) => d,
            (None, Some(MeshSource::Builtin(k)), _) => k.dim(),
            (None, Some(MeshSource::Text { text, .. }), _) => parse_mesh(text).map_err(Error::from)?.mesh.dim(),
            (None, None, Some(c)) => manufactured_case(c).map_err(Error::from)?.dim,
            (None, None, None) => 2,
        };
        if !(1..=3).contains(&dim) {
            return Err(Failure::Usage(format!("dimension {dim} out of range 1..=3")));
        }
        let tol = self.tol.unwrap_or(default_tol);
        if tol.is_nan() || tol <= 0.0 {
            return Err(Failure::Usage("tolerance must be positive".into()));
        }
        if self.probes == 0 {
            return Err(Failure::Usage("at least one probe is required".into()));
        }
        Ok(RunConfig {
            scheme: self.scheme,
            case: self.case.clone(),
            dim,
            mesh,
            mode: self.mode.clone(),
            probes: self.probes,
            seed: self.seed,
            tol,
        })
    }

    fn resolutions(&self, default: &[usize]) -> Result<Vec<usize>, Failure> {
        let ns = if self.n.is_empty() { default.to_vec() } else { self.n.clone() };
        if ns.contains(&0) {
            return Err(Failure::Usage("resolutions must be positive".into()));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Failure::Usage("resolutions must be strictly increasing".into()));
        }
        Ok(ns)
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), contents))
        .map_err(|e| Failure::Usage(format!("{}: {e}", dir.join(name).display())))
}

/// One object for a single resolution, an array otherwise.
fn json_reports<T: serde::Serialize>(reports: &[T]) -> String {
    let out = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(reports)
    };
    out.expect("reports serialize")
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn print_stdout(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush());
}

fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<(), Failure> {
    print_stdout(&format!("{text}\n"));
    if let Some(dir) = out {
        write_out(dir, name, &format!("{text}\n"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Coherence(c) => {
            let cfg = c.config(1e-12)?;
            let mut reports = Vec::new();
            for n in c.resolutions(&[4])? {
                reports.push(study::coherence(&cfg, n)?);
            }
            emit(&c.out, "coherence.json", &json_reports(&reports))?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Greengauss { common: c, break_continuity } => {
            let cfg = c.config(1e-12)?;
            let mut reports = Vec::new();
            for n in c.resolutions(&[5])? {
                match study::green_gauss(&cfg, n, break_continuity) {
                    Ok(r) => reports.push(r),
                    Err(Error::DiscontinuousFlux) => {
                        eprintln!("green-gauss: flux distribution is not continuous (n = {n})");
                        return Ok(false);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            emit(&c.out, "greengauss.json", &json_reports(&reports))?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Convergence(c) => {
            let cfg = c.config(1e-12)?;
            let table = study::convergence(&cfg, &c.resolutions(&[8, 16, 32])?)?;
            let csv = table.to_csv();
            print_stdout(&csv);
            if let Some(dir) = &c.out {
                write_out(dir, "convergence.csv", &csv)?;
            }
            Ok(true)
        }
        Command::Solve(c) => {
            let cfg = c.config(1e-12)?;
            let ns = c.resolutions(&[16])?;
            let mut summaries = Vec::new();
            for &n in &ns {
                let s = study::solve(&cfg, n)?;
                if let Some(dir) = &c.out {
                    let dir = if ns.len() == 1 { dir.clone() } else { dir.join(format!("n{n}")) };
                    for (name, contents) in &s.files {
                        write_out(&dir, name, contents)?;
                    }
                }
                let mut summary = json!({
                    "scheme": cfg.scheme.name(),
                    "n": s.n,
                    "h": s.h,
                    "err_L2": s.err_l2,
                    "err_max": s.err_max,
                });
                if let Some(f) = s.flux_err {
                    summary["flux_err_L2"] = json!(f);
                }
                summaries.push(summary);
            }
            emit(&c.out, "solve.json", &json_reports(&summaries))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
