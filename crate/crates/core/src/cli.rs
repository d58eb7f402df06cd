//! The `subriem` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{integrate_extremal_at, DEFAULT_TOL};
use crate::heisenberg::{classify_conjugate_with_tol, find_collision_with_tol, grid_values, locus_scan, HeisCovector};
use crate::jacobi::propagate_jacobi;
use crate::maslov::{count_conjugate_on_ray, find_crossings, ray_curve, CrossingReport, CurveKind, JacobiCurve, LagrangianFrame};
use crate::output::{csv_number, indexed_header, to_json, write_csv};
use crate::structure::{PhaseState, Structure};
use crate::verify::{run_suite, Suite};

/// Tolerance on `|φ(α₀)|` for covectors typed on the command line, which
/// carry only a handful of digits.
pub const CLI_CONJUGATE_TOL: f64 = 1e-7;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_CONJUGATE_ENDPOINT: i32 = 3;
pub const EXIT_SEARCH: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "subriem", version, about = "Sub-Riemannian geodesics, Jacobi fields and Maslov indices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a normal extremal and write the trajectory.
    Geodesic(GeodesicArgs),
    /// Propagate a Jacobi field in Darboux coordinates.
    Jacobi(JacobiArgs),
    /// List conjugate times on a ray with multiplicities.
    Conjugate(WindowArgs),
    /// Maslov index of the Jacobi or evolution curve against the vertical.
    Maslov(MaslovArgs),
    /// Find two covectors near a Heisenberg conjugate covector with the same image.
    Collide(CollideArgs),
    /// Scan the Heisenberg conjugate locus over a (u0, alpha0) grid.
    Locus(LocusArgs),
    /// Run an invariant battery: r1, r2, r3, oracle or all.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveArg {
    Jacobi,
    Evolution,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    /// Built-in structure: `heisenberg` or `euclidean:n`.
    #[arg(long, default_value = "heisenberg", conflicts_with = "structure_file")]
    pub structure: String,
    /// JSON structure file.
    #[arg(long)]
    pub structure_file: Option<PathBuf>,
}

impl StructureArgs {
    fn load(&self) -> Result<Structure> {
        match &self.structure_file {
            Some(path) => Structure::from_json_file(path),
            None => Structure::from_registry(&self.structure),
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct RayArgs {
    #[command(flatten)]
    pub structure: StructureArgs,
    /// Base point, comma separated (origin when absent).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Initial covector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub covector: Vec<f64>,
    /// Integrator tolerance, in [1e-13, 1e-3].
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub ray: RayArgs,
    /// First time written.
    #[arg(long, default_value_t = 0.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    /// Write on a uniform grid of this many intervals instead of the integrator steps.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Append the entries of the fundamental matrix, row major.
    #[arg(long)]
    pub phi: bool,
}

#[derive(Debug, Args)]
pub struct JacobiArgs {
    #[command(flatten)]
    pub ray: RayArgs,
    /// Initial Jacobi data `(p0, x0)`, 2n comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub initial: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[command(flatten)]
    pub ray: RayArgs,
    /// Window start; must not be a conjugate time.
    #[arg(long, default_value_t = 0.05)]
    pub t_min: f64,
    /// Window end; must not be a conjugate time.
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
}

#[derive(Debug, Args)]
pub struct MaslovArgs {
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long, value_enum, default_value = "jacobi")]
    pub curve: CurveArg,
}

#[derive(Debug, Args)]
pub struct CollideArgs {
    #[command(flatten)]
    pub ray: RayArgs,
    /// Search radius around the covector.
    #[arg(long)]
    pub radius: f64,
}

#[derive(Debug, Args)]
pub struct LocusArgs {
    /// Grid size: `n` for an n x n grid or `nu,nalpha`.
    #[arg(long, value_delimiter = ',', default_value = "40")]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// r1, r2, r3, oracle or all.
    pub suite: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DimensionMismatch { .. }
        | Error::InvalidStructure(_)
        | Error::UnknownStructure(_)
        | Error::InvalidArgument(_)
        | Error::ZeroHamiltonian
        | Error::NotConjugate
        | Error::Io(_)
        | Error::Json(_) => EXIT_CONFIG,
        Error::EndpointCrossing(_) => EXIT_CONJUGATE_ENDPOINT,
        Error::SearchFailure { .. } => EXIT_SEARCH,
        Error::Monotonicity { .. } | Error::Certification(_) => EXIT_VERIFICATION,
        Error::StepUnderflow { .. }
        | Error::NonFinite { .. }
        | Error::StepBudget(_)
        | Error::TimeOutOfRange { .. }
        | Error::NotOnGrid(_)
        | Error::GridMismatch
        | Error::AmbiguousRank { .. }
        | Error::NoIntersection(_)
        | Error::DegenerateCrossing(_)
        | Error::CrossingCluster(_)
        | Error::NonIdealStructure { .. } => EXIT_INTEGRATION,
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if (1e-13..=1e-3).contains(&tol) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--tol must lie in [1e-13, 1e-3], got {tol}")))
    }
}

fn check_window(t_min: f64, t_max: f64) -> Result<()> {
    if t_min >= 0.0 && t_max > t_min && t_max.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "time window [{t_min}, {t_max}] must be nonempty and nonnegative"
        )))
    }
}

struct Ray {
    structure: Structure,
    point: Vec<f64>,
    covector: Vec<f64>,
    tol: f64,
}

impl RayArgs {
    fn resolve(&self) -> Result<Ray> {
        check_tol(self.tol)?;
        let structure = self.structure.load()?;
        let point = self.point.clone().unwrap_or_else(|| vec![0.0; structure.dim()]);
        structure.check_len("point", point.len())?;
        structure.check_len("covector", self.covector.len())?;
        if point.iter().chain(&self.covector).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("point and covector must be finite".into()));
        }
        Ok(Ray {
            structure,
            point,
            covector: self.covector.clone(),
            tol: self.tol,
        })
    }
}

fn output_times(t_max: f64, grid: Option<usize>) -> Result<Vec<f64>> {
    match grid {
        None => Ok(vec![t_max]),
        Some(0) => Err(Error::InvalidArgument("--grid must be positive".into())),
        Some(n) => Ok(grid_values(0.0, t_max, n, true)),
    }
}

fn open_sink<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn emit(out: &OutputArgs, default: Format, stdout: &mut dyn Write, csv: impl FnOnce() -> (Vec<String>, Vec<Vec<String>>), json: impl FnOnce() -> Value) -> Result<()> {
    let mut sink = open_sink(&out.out, stdout)?;
    match out.format.unwrap_or(default) {
        Format::Csv => {
            let (header, rows) = csv();
            write_csv(&mut sink, &header, &rows)?;
        }
        Format::Json => sink.write_all(to_json(&json())?.as_bytes())?,
    }
    sink.flush()?;
    Ok(())
}

fn numbers(v: impl IntoIterator<Item = f64>) -> impl Iterator<Item = String> {
    v.into_iter().map(csv_number)
}

fn cmd_geodesic(a: &GeodesicArgs, stdout: &mut dyn Write) -> Result<()> {
    let ray = a.ray.resolve()?;
    check_window(a.t_min, a.t_max)?;
    let outputs = output_times(a.t_max, a.grid)?;
    let traj = integrate_extremal_at(&ray.structure, &ray.point, &ray.covector, &outputs, ray.tol)?;
    let n = traj.dim();
    let keep: Vec<usize> = (0..traj.times().len())
        .filter(|&i| {
            let t = traj.times()[i];
            t >= a.t_min && (a.grid.is_none() || t == 0.0 || outputs.binary_search_by(|x| x.total_cmp(&t)).is_ok())
        })
        .collect();
    let energy = |st: &PhaseState| ray.structure.hamiltonian(st).unwrap_or(f64::NAN);
    emit(
        &a.ray.output,
        Format::Csv,
        stdout,
        || {
            let mut header = vec!["t".to_string()];
            header.extend(indexed_header("q", n));
            header.extend(indexed_header("p", n));
            header.push("H".into());
            if a.phi {
                header.extend((1..=2 * n).flat_map(|i| (1..=2 * n).map(move |j| format!("phi{i}_{j}"))));
            }
            let rows = keep
                .iter()
                .map(|&i| {
                    let st = &traj.states()[i];
                    let mut row: Vec<String> = numbers([traj.times()[i]]).collect();
                    row.extend(numbers(st.q.iter().copied()));
                    row.extend(numbers(st.p.iter().copied()));
                    row.extend(numbers([energy(st)]));
                    if a.phi {
                        row.extend(numbers(traj.phis()[i].transpose().iter().copied()));
                    }
                    row
                })
                .collect();
            (header, rows)
        },
        || {
            Value::Array(
                keep.iter()
                    .map(|&i| {
                        let st = &traj.states()[i];
                        let mut v = json!({
                            "t": traj.times()[i],
                            "q": st.q.as_slice(),
                            "p": st.p.as_slice(),
                            "H": energy(st),
                        });
                        if a.phi {
                            let phi = &traj.phis()[i];
                            let rows: Vec<Vec<f64>> = phi.row_iter().map(|r| r.iter().copied().collect()).collect();
                            v["phi"] = json!(rows);
                        }
                        v
                    })
                    .collect(),
            )
        },
    )
}

fn cmd_jacobi(a: &JacobiArgs, stdout: &mut dyn Write) -> Result<()> {
    let ray = a.ray.resolve()?;
    check_window(a.t_min, a.t_max)?;
    let n = ray.structure.dim();
    if a.initial.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            what: "initial Jacobi data",
            expected: 2 * n,
            got: a.initial.len(),
        });
    }
    let outputs = output_times(a.t_max, a.grid)?;
    let traj = integrate_extremal_at(&ray.structure, &ray.point, &ray.covector, &outputs, ray.tol)?;
    let p0 = DVector::from_column_slice(&a.initial[..n]);
    let x0 = DVector::from_column_slice(&a.initial[n..]);
    let field = propagate_jacobi(&traj, &p0, &x0)?;
    let keep: Vec<usize> = (0..field.len())
        .filter(|&i| {
            let t = field.times[i];
            t >= a.t_min && (a.grid.is_none() || t == 0.0 || outputs.binary_search_by(|x| x.total_cmp(&t)).is_ok())
        })
        .collect();
    emit(
        &a.ray.output,
        Format::Csv,
        stdout,
        || {
            let mut header = vec!["t".to_string()];
            header.extend(indexed_header("p", n));
            header.extend(indexed_header("x", n));
            let rows = keep
                .iter()
                .map(|&i| {
                    let mut row: Vec<String> = numbers([field.times[i]]).collect();
                    row.extend(numbers(field.p[i].iter().copied()));
                    row.extend(numbers(field.x[i].iter().copied()));
                    row
                })
                .collect();
            (header, rows)
        },
        || {
            Value::Array(
                keep.iter()
                    .map(|&i| json!({"t": field.times[i], "p": field.p[i].as_slice(), "x": field.x[i].as_slice()}))
                    .collect(),
            )
        },
    )
}

fn crossing_json(c: &CrossingReport, ray: &Ray) -> Value {
    let mut v = json!({
        "t": c.t,
        "multiplicity": c.multiplicity,
        "signature": c.signature,
        "bracket": c.bracket,
    });
    if ray.structure.is_heisenberg() {
        let scaled: Vec<f64> = ray.covector.iter().map(|x| x * c.t).collect();
        if let Ok(hc) = HeisCovector::from_slices(&ray.point, &scaled) {
            if let Ok(class) = classify_conjugate_with_tol(&hc, CLI_CONJUGATE_TOL) {
                v["class"] = json!(class.tag());
            }
        }
    }
    v
}

fn crossing_csv(reports: &[CrossingReport]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["t", "multiplicity", "signature", "bracket_lo", "bracket_hi"].map(String::from).to_vec();
    let rows = reports
        .iter()
        .map(|c| {
            vec![
                csv_number(c.t),
                c.multiplicity.to_string(),
                c.signature.to_string(),
                csv_number(c.bracket[0]),
                csv_number(c.bracket[1]),
            ]
        })
        .collect();
    (header, rows)
}

fn cmd_conjugate(a: &WindowArgs, stdout: &mut dyn Write) -> Result<()> {
    let ray = a.ray.resolve()?;
    check_window(a.t_min, a.t_max)?;
    let reports = count_conjugate_on_ray(&ray.structure, &ray.point, &ray.covector, a.t_min, a.t_max, ray.tol)?;
    emit(&a.ray.output, Format::Json, stdout, || crossing_csv(&reports), || {
        Value::Array(reports.iter().map(|c| crossing_json(c, &ray)).collect())
    })
}

fn cmd_maslov(a: &MaslovArgs, stdout: &mut dyn Write) -> Result<()> {
    let w = &a.window;
    let ray = w.ray.resolve()?;
    check_window(w.t_min, w.t_max)?;
    if w.t_min == 0.0 {
        return Err(Error::EndpointCrossing(0.0));
    }
    let curve = ray_curve(&ray.structure, &ray.point, &ray.covector, w.t_min, w.t_max, ray.tol)?;
    let kind = match a.curve {
        CurveArg::Jacobi => CurveKind::Jacobi,
        CurveArg::Evolution => CurveKind::Evolution,
    };
    let curve = JacobiCurve::new(curve.trajectory().clone(), kind);
    let reports = find_crossings(&curve, &LagrangianFrame::vertical(ray.structure.dim()), w.t_min, w.t_max)?;
    let index: i64 = reports.iter().map(|c| c.signature).sum();
    emit(&w.ray.output, Format::Json, stdout, || crossing_csv(&reports), || {
        json!({
            "curve": match kind { CurveKind::Jacobi => "jacobi", CurveKind::Evolution => "evolution" },
            "window": [w.t_min, w.t_max],
            "index": index,
            "crossings": reports.iter().map(|c| crossing_json(c, &ray)).collect::<Vec<_>>(),
        })
    })
}

fn cmd_collide(a: &CollideArgs, stdout: &mut dyn Write) -> Result<()> {
    let ray = a.ray.resolve()?;
    if !ray.structure.is_heisenberg() {
        return Err(Error::InvalidArgument("collide needs the Heisenberg structure".into()));
    }
    let hc = HeisCovector::from_slices(&ray.point, &ray.covector)?;
    let class = classify_conjugate_with_tol(&hc, CLI_CONJUGATE_TOL)?;
    let c = find_collision_with_tol(&hc, a.radius, CLI_CONJUGATE_TOL)?;
    emit(
        &a.ray.output,
        Format::Json,
        stdout,
        || {
            let header = ["lambda1", "lambda2", "lambda3", "image1", "image2", "image3"].map(String::from).to_vec();
            let rows = vec![
                numbers(c.lambda1.into_iter().chain(c.image1)).collect(),
                numbers(c.lambda2.into_iter().chain(c.image2)).collect(),
            ];
            (header, rows)
        },
        || {
            json!({
                "class": class.tag(),
                "lambda1": c.lambda1,
                "lambda2": c.lambda2,
                "image1": c.image1,
                "image2": c.image2,
                "gap": c.gap,
                "separation": c.separation,
                "iterations": c.iterations,
            })
        },
    )
}

fn cmd_locus(a: &LocusArgs, stdout: &mut dyn Write) -> Result<()> {
    check_tol(a.tol)?;
    let (nu, na) = match a.grid[..] {
        [n] => (n, n),
        [nu, na] => (nu, na),
        _ => return Err(Error::InvalidArgument("--grid takes one or two sizes".into())),
    };
    if nu == 0 || na == 0 {
        return Err(Error::InvalidArgument("--grid sizes must be positive".into()));
    }
    let u = grid_values(0.2, 2.0, nu, false);
    let alpha = grid_values(0.0, 10.0, na, true);
    let rows = locus_scan(&u, &alpha, 0.0, a.tol)?;
    emit(
        &a.output,
        Format::Csv,
        stdout,
        || {
            let header = ["u0", "v0", "alpha0", "conjugate", "class", "k1", "k2", "k3"].map(String::from).to_vec();
            let body = rows
                .iter()
                .map(|r| {
                    let mut row: Vec<String> = numbers([r.u0, r.v0, r.alpha0]).collect();
                    row.push(u8::from(r.class.is_conjugate()).to_string());
                    row.push(r.class.tag().into());
                    match r.class.kernel() {
                        Some(k) => row.extend(numbers(k)),
                        None => row.extend(["", "", ""].map(String::from)),
                    }
                    row
                })
                .collect();
            (header, body)
        },
        || {
            Value::Array(
                rows.iter()
                    .map(|r| {
                        json!({
                            "u0": r.u0,
                            "v0": r.v0,
                            "alpha0": r.alpha0,
                            "conjugate": r.class.is_conjugate(),
                            "class": r.class.tag(),
                            "kernel": r.class.kernel(),
                            "numeric_conjugate": r.numeric_conjugate,
                        })
                    })
                    .collect(),
            )
        },
    )
}

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<bool> {
    check_tol(a.tol)?;
    let suite: Suite = a.suite.parse()?;
    let report = run_suite(suite, a.seed, a.tol);
    let mut sink = open_sink(&a.output.out, stdout)?;
    match a.output.format {
        Some(Format::Json) => sink.write_all(to_json(&report)?.as_bytes())?,
        Some(Format::Csv) => {
            let header = ["suite", "check", "passed", "value", "threshold", "margin", "seconds"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = report
                .checks
                .iter()
                .map(|c| {
                    let mut row = vec![c.suite.to_string(), format!("\"{}\"", c.name), u8::from(c.passed).to_string()];
                    row.extend(numbers([c.value, c.threshold, c.margin(), c.seconds]));
                    row
                })
                .collect();
            write_csv(&mut sink, &header, &rows)?;
        }
        None => {
            for c in &report.checks {
                writeln!(sink, "{c}")?;
            }
            writeln!(
                sink,
                "{} {}: {} checks in {:.2}s",
                if report.passed() { "PASS" } else { "FAIL" },
                suite,
                report.checks.len(),
                report.seconds
            )?;
        }
    }
    sink.flush()?;
    Ok(report.passed())
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Data goes to `out` unless `--out` is given; diagnostics
/// go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().ansi().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_CONFIG
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = write!(err, "{}", strip_ansi(&text));
                    EXIT_CONFIG
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Geodesic(a) => cmd_geodesic(a, out),
        Command::Jacobi(a) => cmd_jacobi(a, out),
        Command::Conjugate(a) => cmd_conjugate(a, out),
        Command::Maslov(a) => cmd_maslov(a, out),
        Command::Collide(a) => cmd_collide(a, out),
        Command::Locus(a) => cmd_locus(a, out),
        Command::Verify(a) => match cmd_verify(a, out) {
            Ok(true) => Ok(()),
            Ok(false) => {
                let _ = writeln!(err, "error: verification failed");
                return EXIT_VERIFICATION;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn strip_ansi(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\u{1b}' {
            for d in chars.by_ref() {
                if d.is_ascii_alphabetic() {
                    break;
                }
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("subriem").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn geodesic_final_row() {
        let (code, out, _) = call(&["geodesic", "--structure", "heisenberg", "--point", "0,0,0", "--covector", "1,0,6.283185307", "--t-max", "1"]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), "t,q1,q2,q3,p1,p2,p3,H");
        let last: Vec<f64> = out.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(last[0], 1.0);
        assert!(last[1].abs() < 1e-8 && last[2].abs() < 1e-8);
        assert!((last[3] - 0.0795775).abs() < 1e-7);
    }

    #[test]
    fn geodesic_grid_and_phi() {
        let (code, out, _) = call(&["geodesic", "--covector", "1,0.5,2", "--grid", "4", "--phi"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 6);
        assert_eq!(out.lines().next().unwrap().split(',').count(), 8 + 36);
        let (code, out, _) = call(&["geodesic", "--covector", "1,0.5,2", "--grid", "4", "--t-min", "0.5"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 4);
    }

    #[test]
    fn config_errors() {
        let (code, _, err) = call(&["geodesic", "--structure", "heisenberg"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--covector") && err.contains("Usage"), "{err}");
        assert_eq!(call(&["geodesic", "--covector", "1,0"]).0, EXIT_CONFIG);
        assert_eq!(call(&["geodesic", "--covector", "1,0,0", "--tol", "1e-2"]).0, EXIT_CONFIG);
        assert_eq!(call(&["geodesic", "--covector", "1,0,0", "--structure", "sphere"]).0, EXIT_CONFIG);
        assert_eq!(call(&["verify", "r9"]).0, EXIT_CONFIG);
        assert_eq!(call(&["frobnicate"]).0, EXIT_CONFIG);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn conjugate_exit_codes() {
        let (code, _, err) = call(&["conjugate", "--covector", "0,0,1"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("zero Hamiltonian"), "{err}");
        let (code, _, _) = call(&["conjugate", "--covector", "1,0,6.283185307179586"]);
        assert_eq!(code, EXIT_CONJUGATE_ENDPOINT);
        let (code, out, _) = call(&["conjugate", "--structure", "euclidean:3", "--covector", "1,2,3"]);
        assert_eq!(code, 0);
        assert_eq!(serde_json::from_str::<Value>(&out).unwrap(), json!([]));
    }

    #[test]
    fn collide_exit_codes() {
        assert_eq!(call(&["collide", "--covector", "1,0,6.283185307", "--radius", "0"]).0, EXIT_CONFIG);
        assert_eq!(call(&["collide", "--covector", "1,0,3", "--radius", "0.5"]).0, EXIT_CONFIG);
        let (code, out, _) = call(&["collide", "--covector", "1,0,6.283185307", "--radius", "0.5"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["class"], "C1");
        assert!(v["gap"].as_f64().unwrap() <= 1e-9);
    }

    #[test]
    fn exit_code_table() {
        assert_eq!(exit_code(&Error::SearchFailure { iterations: 1, best_gap: 1.0 }), EXIT_SEARCH);
        assert_eq!(exit_code(&Error::StepBudget(3)), EXIT_INTEGRATION);
        assert_eq!(exit_code(&Error::Certification("x".into())), EXIT_VERIFICATION);
        assert_eq!(exit_code(&Error::EndpointCrossing(1.0)), EXIT_CONJUGATE_ENDPOINT);
    }
}
