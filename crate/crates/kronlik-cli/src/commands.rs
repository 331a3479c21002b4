//! Implementations of the five subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use nalgebra::DMatrix;

use kronlik::io::{parse_dataset, parse_matrix, serialize_dataset, serialize_matrix};
use kronlik::{
    analytic_family_n2, diagonal_mle, flip_flop, one_diag_mle, EstimateReport, FlipFlopConfig,
    MatrixDataset, SolveStatus,
};

use crate::manifest::Manifest;
use crate::{CliError, DiagnoseArgs, EstimateArgs, FamilyArgs, ProbabilityArgs, SimulateArgs};
use crate::{EXIT_NUMERICAL, EXIT_OK, EXIT_REFUSAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    General,
    Diagonal,
    OneDiag,
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    Ok(parse_matrix(&read_to_string(path)?)?)
}

fn load_dataset(path: &Path) -> Result<MatrixDataset, CliError> {
    Ok(parse_dataset(&read_to_string(path)?)?)
}

/// Print the result, mirror it to --out when given, and emit the manifest
/// (file next to --out, or a trailing stdout line otherwise).
fn emit(result_text: &str, out: Option<&PathBuf>, manifest: Manifest) -> Result<(), CliError> {
    print!("{result_text}");
    match out {
        Some(path) => {
            write_file(path, result_text)?;
            let manifest = manifest.with_output(path, result_text);
            let manifest_path = manifest_path(path);
            write_file(&manifest_path, &manifest.to_json()?)?;
        }
        None => {
            println!("manifest: {}", manifest.to_json()?);
        }
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn simulate(args: &SimulateArgs) -> Result<u8, CliError> {
    let gamma = load_matrix(&args.gamma)?;
    let psi = load_matrix(&args.psi)?;
    if gamma.nrows() != args.p || gamma.ncols() != args.p {
        return Err(CliError::Lib(kronlik::Error::DimensionMismatch(format!(
            "gamma file is {}x{}, --p is {}",
            gamma.nrows(),
            gamma.ncols(),
            args.p
        ))));
    }
    if psi.nrows() != args.q || psi.ncols() != args.q {
        return Err(CliError::Lib(kronlik::Error::DimensionMismatch(format!(
            "psi file is {}x{}, --q is {}",
            psi.nrows(),
            psi.ncols(),
            args.q
        ))));
    }
    let mean = args
        .mean
        .as_ref()
        .map(|path| load_matrix(path))
        .transpose()?;
    let data = kronlik::simulate_dataset(&gamma, &psi, mean.as_ref(), args.n, args.seed)?;
    let text = serialize_dataset(&data);
    write_file(&args.out, &text)?;

    let mut manifest = Manifest::new("simulate", Some(args.seed));
    manifest.config("p", args.p);
    manifest.config("q", args.q);
    manifest.config("n", args.n);
    manifest.input(&args.gamma)?;
    manifest.input(&args.psi)?;
    if let Some(path) = &args.mean {
        manifest.input(path)?;
    }
    let manifest = manifest.with_output(&args.out, &text);
    write_file(&manifest_path(&args.out), &manifest.to_json()?)?;
    println!("wrote {} observations to {}", args.n, args.out.display());
    Ok(EXIT_OK)
}

fn format_status(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "Converged",
        SolveStatus::MaxIterations => "MaxIterations",
        SolveStatus::ExistenceRuledOut => "ExistenceRuledOut",
        SolveStatus::DegenerateUpdate => "DegenerateUpdate",
    }
}

fn format_report(model: &str, data: &MatrixDataset, report: &EstimateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model: {model}");
    let _ = writeln!(out, "n: {}  p: {}  q: {}", data.n(), data.p(), data.q());
    let _ = writeln!(out, "status: {}", format_status(report.status));
    if let Some(zone) = &report.zone {
        let _ = writeln!(
            out,
            "existence zone: {:?} (necessary: {}, sufficient: {})",
            zone.zone, zone.necessary_ok, zone.sufficient_ok
        );
    }
    let _ = writeln!(out, "iterations: {}", report.iterations);
    let _ = writeln!(out, "log-likelihood: {}", report.log_likelihood);
    let _ = writeln!(out, "residual: {:e}", report.residual);
    let _ = writeln!(out, "gamma:");
    out.push_str(&serialize_matrix(report.covariance.gamma()));
    let _ = writeln!(out, "psi:");
    out.push_str(&serialize_matrix(report.covariance.psi()));
    out
}

pub fn estimate(args: &EstimateArgs) -> Result<u8, CliError> {
    let data = load_dataset(&args.input)?;
    let init_psi = args.init_psi.as_ref().map(|p| load_matrix(p)).transpose()?;
    let config = FlipFlopConfig {
        max_iterations: args.max_iter,
        product_tol: args.tol,
        init_psi,
        ..FlipFlopConfig::default()
    };

    let (model_name, report, warning) = match args.model {
        Model::General => {
            let report = flip_flop(&data, &config)?;
            // the n = 2 square regime has a whole family of maximizers
            let non_unique = data.n() == 2
                && data.p() == data.q()
                && analytic_family_n2(&data, &DMatrix::identity(data.q(), data.q())).is_ok();
            let warning = non_unique.then(|| {
                "warning: n = 2 with square observations: the MLE is not unique; \
                 this is one member of a family with identical likelihood"
                    .to_string()
            });
            ("general", report, warning)
        }
        Model::Diagonal => {
            let est = diagonal_mle(&data, args.max_iter, args.tol)?;
            let report = EstimateReport {
                covariance: est.to_covariance(),
                log_likelihood: est.log_likelihood,
                iterations: est.iterations,
                status: est.status,
                residual: est.residual,
                ll_trace: Vec::new(),
                zone: None,
            };
            ("diagonal", report, None)
        }
        Model::OneDiag => ("one-diag", one_diag_mle(&data, &config)?, None),
    };

    let mut text = format_report(model_name, &data, &report);
    if let Some(warning) = &warning {
        let _ = writeln!(text, "{warning}");
    }

    let mut manifest = Manifest::new("estimate", None);
    manifest.config("model", format!("{:?}", args.model));
    manifest.config("tol", args.tol);
    manifest.config("max_iter", args.max_iter);
    manifest.input(&args.input)?;
    if let Some(path) = &args.init_psi {
        manifest.input(path)?;
    }
    emit(&text, args.out.as_ref(), manifest)?;

    Ok(if report.status == SolveStatus::Converged {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<u8, CliError> {
    let data = load_dataset(&args.input)?;
    let report = kronlik::diagnose(&data, args.borderline_eps)?;

    let mut text = String::new();
    let _ = writeln!(text, "classification: {:?}", report.classification);
    let _ = writeln!(text, "V1: {}", report.w.v1);
    let _ = writeln!(text, "V2: {}", report.w.v2);
    let _ = writeln!(text, "V3: {}", report.w.v3);
    let _ = writeln!(text, "disc(W): {}", report.w.discriminant);
    match report.classification {
        kronlik::Classification::NonUnique => {
            let (lo, hi) = report
                .interval
                .expect("non-unique report carries its interval");
            let _ = writeln!(text, "interval: ({lo}, {hi})");
            if let Some(ll) = report.family_loglik {
                let _ = writeln!(text, "family log-likelihood: {ll}");
            }
        }
        kronlik::Classification::Unique => {
            let (a, b) = report
                .unique_point
                .expect("unique report carries its point");
            let _ = writeln!(text, "unique point: a = {a}, b = {b}");
        }
        kronlik::Classification::Borderline => {
            let _ = writeln!(
                text,
                "refusing to classify: |disc(W)| within the borderline band"
            );
        }
    }

    if let Some(curve_path) = &args.curves {
        // default range follows the classification: cover the whole
        // non-uniqueness interval, or center on the unique point
        let derived = match report.classification {
            kronlik::Classification::NonUnique => {
                let (lo, hi) = report
                    .interval
                    .expect("non-unique report carries its interval");
                let pad = hi - lo;
                (lo - pad, hi + pad)
            }
            kronlik::Classification::Unique => {
                let (_, b) = report
                    .unique_point
                    .expect("unique report carries its point");
                let pad = 2.0f64.max(2.0 * b.abs());
                (b - pad, b + pad)
            }
            kronlik::Classification::Borderline => (-2.0, 2.0),
        };
        let b_min = args.b_min.unwrap_or(derived.0);
        let b_max = args.b_max.unwrap_or(derived.1);
        // NaN-safe ordering check on the range
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(b_min < b_max) || args.b_steps < 2 {
            return Err(CliError::Io(
                "curve grid needs b-min < b-max and at least 2 steps".into(),
            ));
        }
        let mut grid: Vec<f64> = (0..args.b_steps)
            .map(|k| b_min + (b_max - b_min) * k as f64 / (args.b_steps - 1) as f64)
            .collect();
        // with a derived range, dodge the h2 pole instead of erroring
        if args.b_min.is_none() && args.b_max.is_none() {
            let pole = -report.w.v3;
            let eps = 1e-9 * (1.0 + pole.abs());
            for b in &mut grid {
                if (*b - pole).abs() <= eps {
                    *b += 3.0 * eps;
                }
            }
        }
        let points = kronlik::curves(&report.w, &grid)?;
        let mut table = String::from("b\tg\th1\th2\tw_sign\n");
        for pt in &points {
            let w_val = report.w.eval(pt.b);
            let sign = if w_val < 0.0 {
                -1
            } else {
                i32::from(w_val > 0.0)
            };
            let _ = writeln!(table, "{}\t{}\t{}\t{}\t{}", pt.b, pt.g, pt.h1, pt.h2, sign);
        }
        write_file(curve_path, &table)?;
        let _ = writeln!(
            text,
            "curves: {} points written to {}",
            points.len(),
            curve_path.display()
        );
    }

    let mut manifest = Manifest::new("diagnose", None);
    manifest.config("borderline_eps", args.borderline_eps);
    manifest.input(&args.input)?;
    emit(&text, args.out.as_ref(), manifest)?;

    Ok(match report.classification {
        kronlik::Classification::Borderline => EXIT_REFUSAL,
        _ => EXIT_OK,
    })
}

pub fn probability(args: &ProbabilityArgs) -> Result<u8, CliError> {
    let gamma = load_matrix(&args.gamma)?;
    let psi = load_matrix(&args.psi)?;
    let started = Instant::now();
    let estimate = if args.parallelism == 0 {
        kronlik::nonuniqueness_probability(&gamma, &psi, args.reps, args.seed)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.parallelism)
            .build()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
        pool.install(|| kronlik::nonuniqueness_probability(&gamma, &psi, args.reps, args.seed))?
    };
    // runtime goes to stderr so stdout stays byte-identical across
    // parallelism levels
    eprintln!("runtime: {:.3}s", started.elapsed().as_secs_f64());

    let mut text = String::new();
    let _ = writeln!(text, "replications: {}", estimate.replications);
    let _ = writeln!(text, "non-unique: {}", estimate.non_unique);
    let _ = writeln!(text, "refused: {}", estimate.refused);
    let _ = writeln!(text, "fraction: {}", estimate.fraction);
    let _ = writeln!(text, "ci95: [{}, {}]", estimate.ci_low, estimate.ci_high);

    // parallelism is an execution detail, not provenance: the result is
    // identical at any worker count, so the manifest omits it
    let mut manifest = Manifest::new("probability", Some(args.seed));
    manifest.config("reps", args.reps);
    manifest.input(&args.gamma)?;
    manifest.input(&args.psi)?;
    emit(&text, args.out.as_ref(), manifest)?;
    Ok(EXIT_OK)
}

pub fn family(args: &FamilyArgs) -> Result<u8, CliError> {
    let data = load_dataset(&args.input)?;
    let report = kronlik::diagnose(&data, kronlik::DEFAULT_BORDERLINE_EPS)?;
    if report.classification != kronlik::Classification::NonUnique {
        return Err(CliError::Lib(kronlik::Error::NotNonUnique));
    }
    let (lo, hi) = report
        .interval
        .expect("non-unique report carries its interval");
    let b_values: Vec<f64> = match &args.b_values {
        Some(values) => values.clone(),
        None => {
            let count = args.count.max(1);
            (1..=count)
                .map(|k| lo + (hi - lo) * k as f64 / (count + 1) as f64)
                .collect()
        }
    };
    let members = kronlik::family(&data, &report, &b_values)?;

    let mut text = String::new();
    let _ = writeln!(text, "interval: ({lo}, {hi})");
    if let Some(ll) = report.family_loglik {
        let _ = writeln!(text, "family log-likelihood: {ll}");
    }
    let _ = writeln!(text, "members: {}", members.len());
    for (b, member) in b_values.iter().zip(&members) {
        let _ = writeln!(text, "b: {b}");
        let _ = writeln!(text, "gamma:");
        text.push_str(&serialize_matrix(member.gamma()));
        let _ = writeln!(text, "psi:");
        text.push_str(&serialize_matrix(member.psi()));
    }

    let mut manifest = Manifest::new("family", None);
    manifest.config("b_values", format!("{b_values:?}"));
    manifest.input(&args.input)?;
    emit(&text, args.out.as_ref(), manifest)?;
    Ok(EXIT_OK)
}
