//! Command-line front end. `run` is the whole program minus process exit, so
//! it can be driven from tests.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::audit::{
    self, generate_instance, run_matrix, AuditError, Outcome, RandomInstanceSpec, RuleId,
};
use crate::certify::{self, CertifyError, CheckSpec, InvexClass, Quantifier, Verdict, VviVariant};
use crate::linalg::Matrix;
use crate::model::{KernelKind, ModelError};
use crate::problem::{LoadError, Problem};
use crate::report::Report;
use crate::sampling::{stream_seed, SamplingPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_R: f64 = 0.25;

#[derive(Debug, Parser)]
#[command(
    name = "vvicert",
    version,
    about = "Certify efficiency, variational inequality and invexity claims for piecewise smooth vector functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Problem file, or a bundled fixture name (example5, example23).
    #[arg(long, global = true)]
    problem: Option<String>,
    #[arg(long, global = true, env = "VVICERT_SEED", default_value_t = 42)]
    seed: u64,
    /// Sample count for point and pair searches.
    #[arg(long, global = true, default_value_t = 10_000)]
    samples: usize,
    /// Treat coverage gaps found at load time as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vertices of the generalized Jacobian at a point.
    Jacobian {
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
    },
    #[command(subcommand)]
    Check(CheckCommand),
    /// Audit theorem rules on the problem, or on the fixtures and random instances.
    Audit {
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        /// Comma separated rule ids, or `all`.
        #[arg(long, default_value = "all")]
        rules: String,
        #[arg(long, default_value_t = DEFAULT_R)]
        r: f64,
        #[arg(long, value_parser = parse_kernel)]
        kernel: Option<KernelKind>,
        /// Number of generated instances to add.
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
    /// Re-run the worked examples and compare with the expected outcomes.
    Repro { example: ReproTarget },
    /// Generate a random piecewise polynomial problem.
    Gen {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        pieces: Option<usize>,
        #[arg(long)]
        degree: Option<u32>,
        #[arg(long, value_parser = parse_kernel)]
        kernel: Option<KernelKind>,
    },
}

#[derive(Debug, Args)]
struct PointOpts {
    #[arg(long, allow_hyphen_values = true)]
    at: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    e: Option<String>,
    #[arg(long, default_value_t = DEFAULT_R)]
    r: f64,
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelKind>,
}

#[derive(Debug, Subcommand)]
enum CheckCommand {
    /// Local quasi efficiency (or quasi weak efficiency with --weak).
    Efficiency {
        #[command(flatten)]
        opts: PointOpts,
        #[arg(long)]
        weak: bool,
    },
    Vvi {
        #[command(flatten)]
        opts: PointOpts,
        #[arg(long, default_value = "svvi")]
        variant: VviVariant,
        #[arg(long, default_value = "forall")]
        quantifier: Quantifier,
    },
    Invex {
        #[command(flatten)]
        opts: PointOpts,
        #[arg(long, default_value = "invex")]
        class: InvexClass,
    },
    Critical {
        #[command(flatten)]
        opts: PointOpts,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReproTarget {
    Example5,
    Example23,
}

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "difference" => Ok(KernelKind::Difference),
        "negnormdifference" | "negnorm" => Ok(KernelKind::NegNormDifference),
        _ => Err(format!(
            "unknown kernel '{s}' (difference, neg_norm_difference)"
        )),
    }
}

fn parse_vector(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure(format!("--{what}: '{t}' is not a finite number")))
        })
        .collect()
}

#[derive(Debug)]
struct Failure(String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure(e.to_string())
            }
        }
    )*};
}

failure_from!(LoadError, CertifyError, AuditError, ModelError);

struct Executed {
    payload: Value,
    hash: Option<String>,
    exit: i32,
    summary: String,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Parse `args` (program name first), execute, write the report and return
/// the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let command: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let started = Instant::now();
    let done = match execute(&cli, err) {
        Ok(done) => done,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut report = Report::new(command, done.hash, cli.seed, done.payload);
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    let text = report.to_json();
    let written = match &cli.out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
            .and_then(|_| write!(out, "{}", done.summary).map_err(|e| e.to_string())),
        None => writeln!(out, "{text}")
            .and_then(|_| write!(err, "{}", done.summary))
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    done.exit
}

fn plan(cli: &Cli) -> Result<SamplingPlan, Failure> {
    let plan = SamplingPlan::default()
        .with_seed(cli.seed)
        .with_samples(cli.samples);
    plan.validate().map_err(Failure)?;
    Ok(plan)
}

fn load(cli: &Cli, kernel: Option<KernelKind>, err: &mut dyn Write) -> Result<Problem, Failure> {
    let name = cli
        .problem
        .as_deref()
        .ok_or_else(|| Failure("--problem is required for this command".into()))?;
    let mut problem = Problem::load(name, cli.strict)?;
    for w in &problem.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    if let Some(kind) = kernel {
        problem = problem.with_kernel(kind)?;
    }
    Ok(problem)
}

/// `--at` when given, otherwise the first of `preferred` among the problem's
/// named points, otherwise its first named point.
fn point(problem: &Problem, at: Option<&str>, preferred: &[&str]) -> Result<Vec<f64>, Failure> {
    if let Some(s) = at {
        return parse_vector(s, "at");
    }
    preferred
        .iter()
        .find_map(|k| problem.points.get(*k))
        .or_else(|| problem.points.values().next())
        .cloned()
        .ok_or_else(|| Failure("--at is required: the problem names no points".into()))
}

fn execute(cli: &Cli, err: &mut dyn Write) -> Result<Executed, Failure> {
    match &cli.command {
        Command::Jacobian { at } => {
            let problem = load(cli, None, err)?;
            let x = point(&problem, at.as_deref(), &["xi", "x0"])?;
            let poly = problem
                .f
                .clarke_jacobian(&x, plan(cli)?.tolerances.active)?;
            let mut summary = format!("{} vertices at {:?}\n", poly.num_vertices(), x);
            for v in &poly.vertices {
                summary.push_str(&format!("  {:?}\n", v.to_rows()));
            }
            Ok(Executed {
                payload: to_value(&poly),
                hash: Some(problem.hash().into()),
                exit: EXIT_OK,
                summary,
            })
        }
        Command::Check(check) => run_check(cli, check, err),
        Command::Audit {
            at,
            rules,
            r,
            kernel,
            random,
        } => {
            let rules = RuleId::parse_list(rules)?;
            let plan = plan(cli)?;
            let mut instances = Vec::new();
            let mut hash = None;
            if cli.problem.is_some() {
                let problem = load(cli, *kernel, err)?;
                let x = point(&problem, at.as_deref(), &["xi", "x0"])?;
                hash = Some(problem.hash().to_string());
                instances.push((problem, x));
            } else if *random == 0 {
                for name in crate::problem::BUNDLED {
                    let mut problem = Problem::load(name, cli.strict)?;
                    if let Some(kind) = kernel {
                        problem = problem.with_kernel(*kind)?;
                    }
                    let x = point(&problem, None, &["xi", "x0"])?;
                    instances.push((problem, x));
                }
            }
            for i in 0..*random {
                let spec =
                    RandomInstanceSpec::from_seed(stream_seed(cli.seed, &format!("instance-{i}")));
                let problem = generate_instance(&spec)?;
                let x = vec![0.0; spec.n];
                instances.push((problem, x));
            }
            let summary = run_matrix(&rules, &instances, *r, &plan)?;
            Ok(Executed {
                payload: to_value(&summary),
                hash,
                exit: if summary.has_violation() {
                    EXIT_REFUTED
                } else {
                    EXIT_OK
                },
                summary: summary.table(),
            })
        }
        Command::Repro { example } => {
            let plan = plan(cli)?;
            let (name, rows) = match example {
                ReproTarget::Example5 => ("example5", repro_example5(&plan, cli.strict)?),
                ReproTarget::Example23 => ("example23", repro_example23(&plan, cli.strict)?),
            };
            let all_pass = rows.iter().all(|r| r.pass);
            let mut summary = String::new();
            for row in &rows {
                summary.push_str(&format!(
                    "{} {}: expected {}, observed {}\n",
                    if row.pass { "ok  " } else { "FAIL" },
                    row.claim,
                    row.expected,
                    row.observed
                ));
            }
            let hash = Problem::load(name, cli.strict)?.hash().to_string();
            Ok(Executed {
                payload: json!({ "example": name, "rows": rows, "all_pass": all_pass }),
                hash: Some(hash),
                exit: if all_pass { EXIT_OK } else { EXIT_REFUTED },
                summary,
            })
        }
        Command::Gen {
            n,
            m,
            pieces,
            degree,
            kernel,
        } => {
            let mut spec = RandomInstanceSpec::from_seed(cli.seed);
            spec.n = n.unwrap_or(spec.n);
            spec.m = m.unwrap_or(spec.m);
            spec.pieces = pieces.unwrap_or(spec.pieces);
            spec.degree = degree.unwrap_or(spec.degree);
            spec.kernel = kernel.unwrap_or(spec.kernel);
            let problem = generate_instance(&spec)?;
            let summary = format!(
                "generated {}: n = {}, m = {}, {} pieces\n",
                problem.name, spec.n, spec.m, spec.pieces
            );
            Ok(Executed {
                payload: json!({ "spec": spec, "problem": problem.file }),
                hash: Some(problem.hash().into()),
                exit: EXIT_OK,
                summary,
            })
        }
    }
}

fn run_check(cli: &Cli, check: &CheckCommand, err: &mut dyn Write) -> Result<Executed, Failure> {
    let opts = match check {
        CheckCommand::Efficiency { opts, .. }
        | CheckCommand::Vvi { opts, .. }
        | CheckCommand::Invex { opts, .. }
        | CheckCommand::Critical { opts } => opts,
    };
    let problem = load(cli, opts.kernel, err)?;
    let e = match &opts.e {
        Some(s) => parse_vector(s, "e")?,
        None => problem.e.clone(),
    };
    let spec = match check {
        CheckCommand::Efficiency { weak, .. } => CheckSpec::Efficiency {
            xi: point(&problem, opts.at.as_deref(), &["xi"])?,
            e,
            r: opts.r,
            weak: *weak,
        },
        CheckCommand::Vvi {
            variant,
            quantifier,
            ..
        } => CheckSpec::Vvi {
            variant: *variant,
            xi: point(&problem, opts.at.as_deref(), &["xi"])?,
            quantifier: *quantifier,
        },
        CheckCommand::Invex { class, .. } => CheckSpec::Invex {
            class: *class,
            x0: point(&problem, opts.at.as_deref(), &["x0", "xi"])?,
            e,
            r: opts.r,
        },
        CheckCommand::Critical { .. } => CheckSpec::Critical {
            xi: point(&problem, opts.at.as_deref(), &["xi"])?,
        },
    };
    let plan = plan(cli)?;
    let ctx = problem.context(&plan)?;
    let cert = certify::run(&ctx, &spec)?;
    let exit = match cert.verdict {
        Verdict::CertifiedUpToSampling { .. } => EXIT_OK,
        Verdict::Refuted { .. } => EXIT_REFUTED,
        Verdict::Inapplicable { .. } => EXIT_USAGE,
    };
    let summary = format!(
        "{}: {} ({})\n",
        spec.label(),
        cert.verdict.status(),
        cert.verdict.reason()
    );
    Ok(Executed {
        payload: to_value(&cert),
        hash: Some(problem.hash().into()),
        exit,
        summary,
    })
}

/// One expected outcome of a worked example, as observed now.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReproRow {
    pub claim: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

fn row(claim: &str, expected: &str, observed: String, pass: bool) -> ReproRow {
    ReproRow {
        claim: claim.into(),
        expected: expected.into(),
        observed,
        pass,
    }
}

fn column_vertices(vertices: &[Matrix]) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| v.to_rows().into_iter().flatten().collect())
        .collect();
    cols.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cols
}

fn same_vectors(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(u, v)| u.len() == v.len() && u.iter().zip(v).all(|(x, y)| (x - y).abs() <= tol))
}

fn verdict_row(claim: &str, expect_certified: bool, verdict: &Verdict) -> ReproRow {
    let expected = if expect_certified {
        "CertifiedUpToSampling"
    } else {
        "Refuted"
    };
    let pass = if expect_certified {
        verdict.is_certified()
    } else {
        verdict.is_refuted()
    };
    row(claim, expected, verdict.status().into(), pass)
}

fn repro_example5(plan: &SamplingPlan, strict: bool) -> Result<Vec<ReproRow>, Failure> {
    let p = Problem::load("example5", strict)?;
    let ctx = p.context(plan)?;
    let xi = vec![0.0];
    let half = vec![0.5, 0.5];
    let mut rows = Vec::new();

    let poly = p.f.clarke_jacobian(&xi, plan.tolerances.active)?;
    let cols = column_vertices(&poly.vertices);
    rows.push(row(
        "generalized Jacobian at 0",
        "co{(5,-2), (6,-3)}",
        format!("{cols:?}"),
        same_vectors(&cols, &[vec![5.0, -2.0], vec![6.0, -3.0]], 1e-9),
    ));

    let run = |spec: CheckSpec| certify::run(&ctx, &spec).map(|c| c.verdict);
    let v = run(CheckSpec::Vvi {
        variant: VviVariant::Svvi,
        xi: xi.clone(),
        quantifier: Quantifier::Forall,
    })?;
    rows.push(verdict_row("0 solves SVVI", true, &v));
    for (label, e) in [
        ("quasi efficient at 0, e = (0.5, 0.5)", half.clone()),
        ("quasi efficient at 0, e = (1.5, 1.5)", vec![1.5, 1.5]),
    ] {
        let v = run(CheckSpec::Efficiency {
            xi: xi.clone(),
            e,
            r: DEFAULT_R,
            weak: false,
        })?;
        rows.push(verdict_row(label, true, &v));
    }
    let v = run(CheckSpec::Invex {
        class: InvexClass::PseudoII,
        x0: xi.clone(),
        e: half.clone(),
        r: 0.5,
    })?;
    rows.push(verdict_row(
        "pseudo invex of type II at 0, r = 0.5",
        true,
        &v,
    ));

    let v = run(CheckSpec::Critical { xi: xi.clone() })?;
    let observed = match &v {
        Verdict::CertifiedUpToSampling {
            multiplier: Some(m),
            ..
        } => {
            let s: f64 = m.mu.iter().sum();
            let mu: Vec<f64> = m.mu.iter().map(|x| x / s).collect();
            let col: Vec<f64> = m.jacobian.to_rows().into_iter().flatten().collect();
            Some((mu, col))
        }
        _ => None,
    };
    let pass = observed.as_ref().is_some_and(|(mu, col)| {
        same_vectors(
            std::slice::from_ref(mu),
            &[vec![2.0 / 7.0, 5.0 / 7.0]],
            1e-6,
        ) && same_vectors(std::slice::from_ref(col), &[vec![5.0, -2.0]], 1e-9)
    });
    rows.push(row(
        "vector critical at 0",
        "mu ~ (2/7, 5/7) for the vertex (5,-2)",
        match observed {
            Some((mu, col)) => format!("mu ~ {mu:?} for {col:?}"),
            None => v.status().into(),
        },
        pass,
    ));

    let results = audit::audit_instance(&p, &xi, &RuleId::ALL, DEFAULT_R, plan);
    let violations = results
        .iter()
        .filter(|r| r.outcome == Outcome::Violation)
        .count();
    rows.push(row(
        "theorem audit at 0",
        "no violation",
        format!("{violations} violations"),
        violations == 0,
    ));
    Ok(rows)
}

fn repro_example23(plan: &SamplingPlan, strict: bool) -> Result<Vec<ReproRow>, Failure> {
    let p = Problem::load("example23", strict)?;
    let x0 = vec![0.0];
    let mut rows = Vec::new();
    let poly = p.f.clarke_jacobian(&x0, plan.tolerances.active)?;
    let cols = column_vertices(&poly.vertices);
    rows.push(row(
        "generalized Jacobian at 0",
        "co{(1,2), (1,4)}",
        format!("{cols:?}"),
        same_vectors(&cols, &[vec![1.0, 2.0], vec![1.0, 4.0]], 1e-9),
    ));
    let spec = CheckSpec::Invex {
        class: InvexClass::Invex,
        x0: x0.clone(),
        e: vec![0.5, 0.5],
        r: DEFAULT_R,
    };
    let v = certify::run(&p.context(plan)?, &spec)?.verdict;
    rows.push(verdict_row(
        "approximately invex at 0 with eta = -|x - y|",
        true,
        &v,
    ));

    let diff = p.with_kernel(KernelKind::Difference)?;
    let v = certify::run(&diff.context(plan)?, &spec)?.verdict;
    let (observed, pass) = match &v {
        Verdict::Refuted { witness, .. } => {
            let y = witness.y.clone().unwrap_or_default();
            let ok =
                witness.x.iter().all(|x| x.abs() <= 1e-12) && y.first().is_some_and(|&y| y < 0.0);
            (format!("Refuted at x = {:?}, y = {:?}", witness.x, y), ok)
        }
        other => (other.status().to_string(), false),
    };
    rows.push(row(
        "approximate convexity fails at 0",
        "Refuted with x = 0, y < 0",
        observed,
        pass,
    ));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("vvicert").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn kernels_parse() {
        assert_eq!(
            parse_kernel("neg_norm_difference"),
            Ok(KernelKind::NegNormDifference)
        );
        assert_eq!(
            parse_kernel("negNormDifference"),
            Ok(KernelKind::NegNormDifference)
        );
        assert!(parse_kernel("custom").is_err());
    }

    #[test]
    fn vectors_parse() {
        assert_eq!(parse_vector("0.5, -1", "e").unwrap(), vec![0.5, -1.0]);
        assert!(parse_vector("0.5,x", "e").is_err());
        assert!(parse_vector("inf", "e").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(
            call(&["check", "vvi", "--variant", "nope", "--problem", "example5"]).0,
            EXIT_USAGE
        );
        let (code, _, err) = call(&["jacobian", "--at", "0"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--problem"));
        assert_eq!(
            call(&["jacobian", "--problem", "/no/such/file.json"]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("jacobian"));
    }

    #[test]
    fn jacobian_defaults_to_named_point() {
        let (code, out, _) = call(&["jacobian", "--problem", "example23"]);
        assert_eq!(code, EXIT_OK);
        let report: Report = serde_json::from_str(&out).unwrap();
        assert_eq!(report.payload["vertices"].as_array().unwrap().len(), 2);
        assert_eq!(report.problem_hash.as_deref().map(str::len), Some(64));
    }
}
