//! Command-line surface: single-point evaluation (`eval`), meridional
//! lattice export (`grid`), multi-method comparison (`compare`), and
//! per-point deviation maps (`errormap`).
//!
//! Exit codes: `0` success, `2` flag/usage errors (including a forced route
//! outside its region and invalid index combinations), `3` evaluation point
//! on a singular structure, `4` non-convergence, `5` output I/O failure.
//!
//! All value columns are serialized with 17 significant digits and rows are
//! emitted in deterministic order, so identical invocations produce
//! byte-identical output.

use crate::coords::{FieldPoint, Frame};
use crate::error::EvalError;
use crate::eval::{EvalOptions, EvalResult, MethodPolicy, Route};
use crate::grid::{
    self, evaluate_grid, evaluate_point, fmt_f64, sample_box, write_csv_file, AxisSpec,
    GridFamily, GridSpec, Transform,
};
use crate::harmonics::FocalFrame;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

const METHOD_NAMES: &str = "auto, multipole-series, second-kind-sum, offset-series, forward, \
     backward, closed-form, stable-minus-m, axis, quadrature (alias oracle), naive-minus-m, \
     recurrence-m, separated, negative-degree, reflected-order";

#[derive(Parser)]
#[command(
    name = "logopoles",
    version,
    about = "Evaluate line-segment multipole potentials (logopoles), prolate spheroidal \
             harmonic products, and solid spherical harmonics; export meridional grids, \
             method comparisons, and error maps as CSV."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate one field value; print one CSV row: re,im,method,err
    Eval(EvalArgs),
    /// Evaluate a (rho, z) lattice; write rho,z,phi,re,im,method,err CSV
    Grid(GridArgs),
    /// Evaluate several routes on shared points; report pairwise deviations
    Compare(CompareArgs),
    /// Two-route comparison emitting per-point log10 relative deviation
    Errormap(ErrormapArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Field family: logopole | pssh | ssh1 | ssh2
    #[arg(long, default_value = "logopole")]
    family: String,
    /// Frame: centered|offset (pssh); o|o-prime|o-double-prime (ssh1/ssh2)
    #[arg(long)]
    frame: Option<String>,
    /// Degree n
    #[arg(long, allow_hyphen_values = true)]
    n: i32,
    /// Order m
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    m: i32,
    /// Cylindrical radius
    #[arg(long)]
    rho: f64,
    /// Height along the source axis
    #[arg(long, allow_hyphen_values = true)]
    z: f64,
    /// Azimuth in radians (enters only through the phase e^{i m phi})
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi: f64,
    /// Segment length R
    #[arg(long = "R", default_value_t = 1.0)]
    scale: f64,
    /// Force one evaluation route (logopole family only); default: automatic
    #[arg(long)]
    method: Option<String>,
    /// Relative tolerance for series truncation
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
}

#[derive(Args)]
struct GridArgs {
    /// Field family: logopole | pssh | ssh1 | ssh2
    #[arg(long, default_value = "logopole")]
    family: String,
    /// Frame: centered|offset (pssh); o|o-prime|o-double-prime (ssh1/ssh2)
    #[arg(long)]
    frame: Option<String>,
    /// Degree n
    #[arg(long, allow_hyphen_values = true)]
    n: i32,
    /// Order m
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    m: i32,
    #[arg(long, default_value_t = 0.0)]
    rho_min: f64,
    #[arg(long)]
    rho_max: f64,
    #[arg(long, default_value_t = 101)]
    rho_count: usize,
    #[arg(long, allow_hyphen_values = true)]
    z_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    z_max: f64,
    #[arg(long, default_value_t = 101)]
    z_count: usize,
    /// Azimuth in radians, fixed for the whole grid
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi: f64,
    /// Segment length R
    #[arg(long = "R", default_value_t = 1.0)]
    scale: f64,
    /// Force one evaluation route (logopole family only)
    #[arg(long)]
    method: Option<String>,
    /// Relative tolerance for series truncation
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    /// Output CSV path (written via a temp file, renamed on success)
    #[arg(long)]
    out: PathBuf,
    /// Append a column asinh(S * re) with this scale S
    #[arg(long, value_name = "S")]
    arcsinh: Option<f64>,
}

#[derive(Args)]
struct SharedSweepArgs {
    /// Degree n (required unless a sweep is given)
    #[arg(long, allow_hyphen_values = true)]
    n: Option<i32>,
    /// Order m
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    m: i32,
    /// Single evaluation point: cylindrical radius
    #[arg(long)]
    rho: Option<f64>,
    /// Single evaluation point: height
    #[arg(long, allow_hyphen_values = true)]
    z: Option<f64>,
    /// Azimuth in radians
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi: f64,
    /// Lattice/box bounds (all four of rho-min/rho-max/z-min/z-max together)
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    z_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    z_max: Option<f64>,
    /// Lattice resolution (used when --samples is absent)
    #[arg(long, default_value_t = 11)]
    rho_count: usize,
    #[arg(long, default_value_t = 11)]
    z_count: usize,
    /// Use this many quasi-random points inside the box instead of a lattice
    #[arg(long)]
    samples: Option<usize>,
    /// Offset into the quasi-random sequence (--samples mode)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sweep the degree: "lo:hi" (inclusive), evaluated at every point
    #[arg(long, value_name = "LO:HI")]
    sweep_n: Option<String>,
    /// Sweep k over "lo:hi", evaluating the lowest member (n, m) = (-k, k)
    #[arg(long, value_name = "LO:HI")]
    sweep_lowest: Option<String>,
    /// Segment length R
    #[arg(long = "R", default_value_t = 1.0)]
    scale: f64,
    /// Relative tolerance for series truncation
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    /// Tolerance passed to the adaptive-quadrature reference
    #[arg(long, default_value_t = 1e-12)]
    oracle_tol: f64,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    shared: SharedSweepArgs,
    /// Comma-separated route names (see --help of eval for the list)
    #[arg(long, value_delimiter = ',', default_value = "auto")]
    methods: Vec<String>,
    /// Skip the adaptive-quadrature reference column
    #[arg(long)]
    no_oracle: bool,
}

#[derive(Args)]
struct ErrormapArgs {
    #[command(flatten)]
    shared: SharedSweepArgs,
    /// Exactly two route names ("oracle" is valid) whose deviation is mapped
    #[arg(long, value_delimiter = ',', default_value = "auto,oracle")]
    methods: Vec<String>,
}

/// Entry point used by the binary: parse `std::env` arguments and dispatch.
pub fn run() -> i32 {
    run_with(std::env::args_os())
}

/// Testable entry point: parse the given arguments and run the subcommand.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Grid(a) => cmd_grid(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Errormap(a) => cmd_errormap(a),
    }
}

fn usage(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    2
}

fn exit_code_for(e: &EvalError) -> i32 {
    if grid::is_singularity(e) {
        3
    } else if matches!(
        e,
        EvalError::NonConvergence { .. }
            | EvalError::QuadNoConvergence { .. }
            | EvalError::TailTooLarge
            | EvalError::SlowConvergence { .. }
    ) {
        4
    } else {
        2
    }
}

fn fail_eval(e: &EvalError) -> i32 {
    eprintln!("error: {e}");
    exit_code_for(e)
}

fn parse_family(family: &str, frame: Option<&str>) -> Result<GridFamily, String> {
    match family {
        "logopole" => match frame {
            None => Ok(GridFamily::Logopole),
            Some(f) => Err(format!("the logopole family takes no --frame (got '{f}')")),
        },
        "pssh" => match frame {
            None | Some("centered") => Ok(GridFamily::ProlateProduct(FocalFrame::Centered)),
            Some("offset") => Ok(GridFamily::ProlateProduct(FocalFrame::Offset)),
            Some(f) => Err(format!("pssh frame must be 'centered' or 'offset', got '{f}'")),
        },
        "ssh1" | "ssh2" => {
            let fr = match frame {
                None | Some("o") => Frame::O,
                Some("o-prime") | Some("oprime") => Frame::OPrime,
                Some("o-double-prime") | Some("odoubleprime") => Frame::ODoublePrime,
                Some(f) => {
                    return Err(format!(
                        "ssh frame must be 'o', 'o-prime', or 'o-double-prime', got '{f}'"
                    ))
                }
            };
            Ok(if family == "ssh1" {
                GridFamily::SolidRegular(fr)
            } else {
                GridFamily::SolidSecondKind(fr)
            })
        }
        other => Err(format!(
            "unknown family '{other}'; expected logopole, pssh, ssh1, or ssh2"
        )),
    }
}

fn parse_policy(method: Option<&str>) -> Result<MethodPolicy, String> {
    match method {
        None | Some("auto") => Ok(MethodPolicy::Auto),
        Some(s) => Route::parse(s).map(MethodPolicy::Fixed).ok_or_else(|| {
            format!("unknown method '{s}'; expected one of: {METHOD_NAMES}")
        }),
    }
}

fn cmd_eval(a: EvalArgs) -> i32 {
    let family = match parse_family(&a.family, a.frame.as_deref()) {
        Ok(f) => f,
        Err(msg) => return usage(&msg),
    };
    let policy = match parse_policy(a.method.as_deref()) {
        Ok(p) => p,
        Err(msg) => return usage(&msg),
    };
    let point = match FieldPoint::new(a.rho, a.z, a.phi, a.scale) {
        Ok(p) => p,
        Err(e) => return fail_eval(&e),
    };
    let opts = EvalOptions {
        tol: a.tol,
        ..EvalOptions::default()
    };
    match evaluate_point(family, a.n, a.m, &point, policy, &opts) {
        Ok(r) => {
            println!(
                "{},{},{},{}",
                fmt_f64(r.value.re),
                fmt_f64(r.value.im),
                r.method.name(),
                fmt_f64(r.est_error)
            );
            0
        }
        Err(e) => fail_eval(&e),
    }
}

fn cmd_grid(a: GridArgs) -> i32 {
    let family = match parse_family(&a.family, a.frame.as_deref()) {
        Ok(f) => f,
        Err(msg) => return usage(&msg),
    };
    let policy = match parse_policy(a.method.as_deref()) {
        Ok(p) => p,
        Err(msg) => return usage(&msg),
    };
    let transform = match a.arcsinh {
        None => Transform::Raw,
        Some(s) if s.is_finite() && s > 0.0 => Transform::ArcsinhScaled(s),
        Some(s) => return usage(&format!("--arcsinh scale must be positive, got {s}")),
    };
    let spec = GridSpec {
        rho: AxisSpec {
            min: a.rho_min,
            max: a.rho_max,
            count: a.rho_count,
        },
        z: AxisSpec {
            min: a.z_min,
            max: a.z_max,
            count: a.z_count,
        },
        phi: a.phi,
        scale: a.scale,
        family,
        n: a.n,
        m: a.m,
        method: policy,
        transform,
    };
    let opts = EvalOptions {
        tol: a.tol,
        ..EvalOptions::default()
    };
    let cells = match evaluate_grid(&spec, &opts) {
        Ok(c) => c,
        Err(msg) => return usage(&msg),
    };
    match write_csv_file(&spec, &cells, &a.out) {
        Ok(()) => {
            eprintln!("wrote {} rows to {}", cells.len(), a.out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            5
        }
    }
}

// ---------------------------------------------------------------------------
// compare / errormap
// ---------------------------------------------------------------------------

struct MethodCol {
    label: String,
    policy: MethodPolicy,
    opts: EvalOptions,
}

struct MatrixRow {
    rho: f64,
    z: f64,
    n: i32,
    m: i32,
    vals: Vec<Result<EvalResult, EvalError>>,
}

fn parse_span(s: &str, what: &str) -> Result<(i32, i32), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(format!("{what} must be 'lo:hi', got '{s}'"));
    }
    let lo: i32 = parts[0]
        .parse()
        .map_err(|_| format!("{what} lower bound '{}' is not an integer", parts[0]))?;
    let hi: i32 = parts[1]
        .parse()
        .map_err(|_| format!("{what} upper bound '{}' is not an integer", parts[1]))?;
    if lo > hi {
        return Err(format!("{what} needs lo <= hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn build_points(a: &SharedSweepArgs) -> Result<Vec<(f64, f64)>, String> {
    let box_given = a.rho_min.is_some()
        || a.rho_max.is_some()
        || a.z_min.is_some()
        || a.z_max.is_some();
    if box_given {
        let (rmin, rmax, zmin, zmax) = match (a.rho_min, a.rho_max, a.z_min, a.z_max) {
            (Some(a1), Some(b), Some(c), Some(d)) => (a1, b, c, d),
            _ => {
                return Err(
                    "box mode needs all of --rho-min --rho-max --z-min --z-max".into(),
                )
            }
        };
        if a.rho.is_some() || a.z.is_some() {
            return Err("give either a single --rho/--z point or a box, not both".into());
        }
        if let Some(count) = a.samples {
            if count == 0 {
                return Err("--samples must be positive".into());
            }
            if !(rmin < rmax && zmin < zmax) {
                return Err("box bounds need min < max on both axes".into());
            }
            Ok(sample_box((rmin, rmax), (zmin, zmax), count, a.seed))
        } else {
            let rho_axis = AxisSpec::new(rmin, rmax, a.rho_count).map_err(|e| format!("rho {e}"))?;
            let z_axis = AxisSpec::new(zmin, zmax, a.z_count).map_err(|e| format!("z {e}"))?;
            let mut pts = Vec::with_capacity(rho_axis.count * z_axis.count);
            for zi in 0..z_axis.count {
                for ri in 0..rho_axis.count {
                    pts.push((rho_axis.value(ri), z_axis.value(zi)));
                }
            }
            Ok(pts)
        }
    } else {
        if a.samples.is_some() {
            return Err("--samples needs a box (--rho-min --rho-max --z-min --z-max)".into());
        }
        match (a.rho, a.z) {
            (Some(r), Some(z)) => Ok(vec![(r, z)]),
            _ => Err("give an evaluation point (--rho and --z) or a box".into()),
        }
    }
}

fn build_indices(a: &SharedSweepArgs) -> Result<Vec<(i32, i32)>, String> {
    match (&a.sweep_n, &a.sweep_lowest) {
        (Some(_), Some(_)) => Err("--sweep-n and --sweep-lowest are mutually exclusive".into()),
        (Some(s), None) => {
            let (lo, hi) = parse_span(s, "--sweep-n")?;
            Ok((lo..=hi).map(|k| (k, a.m)).collect())
        }
        (None, Some(s)) => {
            let (lo, hi) = parse_span(s, "--sweep-lowest")?;
            if lo < 0 {
                return Err("--sweep-lowest sweeps the order k >= 0 of (n, m) = (-k, k)".into());
            }
            Ok((lo..=hi).map(|k| (-k, k)).collect())
        }
        (None, None) => match a.n {
            Some(n) => Ok(vec![(n, a.m)]),
            None => Err("give --n, or a sweep (--sweep-n / --sweep-lowest)".into()),
        },
    }
}

fn build_methods(
    names: &[String],
    include_oracle: bool,
    tol: f64,
    oracle_tol: f64,
) -> Result<Vec<MethodCol>, String> {
    let mut cols: Vec<MethodCol> = Vec::new();
    for name in names {
        if cols.iter().any(|c| c.label == *name) {
            return Err(format!("duplicate method '{name}'"));
        }
        let policy = parse_policy(Some(name))?;
        let opts = EvalOptions {
            tol: if policy == MethodPolicy::Fixed(Route::Quadrature) {
                oracle_tol
            } else {
                tol
            },
            ..EvalOptions::default()
        };
        cols.push(MethodCol {
            label: name.clone(),
            policy,
            opts,
        });
    }
    let have_oracle = cols
        .iter()
        .any(|c| c.policy == MethodPolicy::Fixed(Route::Quadrature));
    if include_oracle && !have_oracle {
        cols.push(MethodCol {
            label: "oracle".into(),
            policy: MethodPolicy::Fixed(Route::Quadrature),
            opts: EvalOptions {
                tol: oracle_tol,
                ..EvalOptions::default()
            },
        });
    }
    Ok(cols)
}

/// Evaluate every method at every (point, index) cell, in parallel over
/// cells, keeping deterministic row order (points outer, indices inner).
fn evaluate_matrix(
    points: &[(f64, f64)],
    indices: &[(i32, i32)],
    methods: &[MethodCol],
    phi: f64,
    scale: f64,
) -> Vec<MatrixRow> {
    let cells: Vec<(f64, f64, i32, i32)> = points
        .iter()
        .flat_map(|&(rho, z)| indices.iter().map(move |&(n, m)| (rho, z, n, m)))
        .collect();
    cells
        .into_par_iter()
        .map(|(rho, z, n, m)| {
            let vals = methods
                .iter()
                .map(|col| {
                    FieldPoint::new(rho, z, phi, scale).and_then(|p| {
                        evaluate_point(GridFamily::Logopole, n, m, &p, col.policy, &col.opts)
                    })
                })
                .collect();
            MatrixRow { rho, z, n, m, vals }
        })
        .collect()
}

/// Relative deviation between two evaluated values: |a - b| over the larger
/// magnitude; exactly-equal values (including both zero) give 0.
fn rel_dev(a: &EvalResult, b: &EvalResult) -> f64 {
    let diff = (a.value - b.value).norm();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.value.norm().max(b.value.norm())
}

fn write_or_print(out: Option<&Path>, text: &str) -> i32 {
    match out {
        None => {
            print!("{text}");
            let _ = std::io::stdout().flush();
            0
        }
        Some(path) => {
            let tmp = grid::temp_sibling(path);
            let result = std::fs::write(&tmp, text).and_then(|()| std::fs::rename(&tmp, path));
            match result {
                Ok(()) => 0,
                Err(e) => {
                    let _ = std::fs::remove_file(&tmp);
                    eprintln!("error: {e}");
                    5
                }
            }
        }
    }
}

/// Exit code for single-cell runs: the first method failure, mapped like
/// `eval`; multi-cell runs always succeed and leave holes in the table.
fn single_cell_exit(rows: &[MatrixRow], n_cells: usize) -> i32 {
    if n_cells == 1 {
        if let Some(e) = rows[0].vals.iter().find_map(|v| v.as_ref().err()) {
            return fail_eval(e);
        }
    }
    0
}

fn cmd_compare(a: CompareArgs) -> i32 {
    let methods = match build_methods(
        &a.methods,
        !a.no_oracle,
        a.shared.tol,
        a.shared.oracle_tol,
    ) {
        Ok(m) => m,
        Err(msg) => return usage(&msg),
    };
    if methods.len() < 2 {
        return usage("compare needs at least two value columns (methods plus the reference)");
    }
    let points = match build_points(&a.shared) {
        Ok(p) => p,
        Err(msg) => return usage(&msg),
    };
    let indices = match build_indices(&a.shared) {
        Ok(i) => i,
        Err(msg) => return usage(&msg),
    };
    let rows = evaluate_matrix(&points, &indices, &methods, a.shared.phi, a.shared.scale);

    let mut text = String::new();
    text.push_str("rho,z,phi,n,m");
    for col in &methods {
        text.push_str(&format!(",{0}_re,{0}_im,{0}_err", col.label));
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..methods.len() {
        for j in (i + 1)..methods.len() {
            pairs.push((i, j));
            text.push_str(&format!(
                ",dev_{}_{}",
                methods[i].label, methods[j].label
            ));
        }
    }
    text.push('\n');

    let mut dev_samples: Vec<Vec<f64>> = vec![Vec::new(); pairs.len()];
    let mut failures: Vec<usize> = vec![0; methods.len()];
    let phi_s = fmt_f64(a.shared.phi);
    for row in &rows {
        text.push_str(&format!(
            "{},{},{},{},{}",
            fmt_f64(row.rho),
            fmt_f64(row.z),
            phi_s,
            row.n,
            row.m
        ));
        for (k, v) in row.vals.iter().enumerate() {
            match v {
                Ok(r) => text.push_str(&format!(
                    ",{},{},{}",
                    fmt_f64(r.value.re),
                    fmt_f64(r.value.im),
                    fmt_f64(r.est_error)
                )),
                Err(_) => {
                    failures[k] += 1;
                    text.push_str(",,,");
                }
            }
        }
        for (pi, &(i, j)) in pairs.iter().enumerate() {
            match (&row.vals[i], &row.vals[j]) {
                (Ok(va), Ok(vb)) => {
                    let d = rel_dev(va, vb);
                    dev_samples[pi].push(d);
                    text.push_str(&format!(",{}", fmt_f64(d)));
                }
                _ => text.push(','),
            }
        }
        text.push('\n');
    }

    let code = write_or_print(a.shared.out.as_deref(), &text);
    if code != 0 {
        return code;
    }
    for (pi, &(i, j)) in pairs.iter().enumerate() {
        let devs = &mut dev_samples[pi];
        if devs.is_empty() {
            eprintln!(
                "# dev_{}_{}: no points where both evaluated",
                methods[i].label, methods[j].label
            );
            continue;
        }
        devs.sort_by(|x, y| x.total_cmp(y));
        let max = *devs.last().unwrap();
        let median = devs[devs.len() / 2];
        eprintln!(
            "# dev_{}_{}: points={} max={max:.3e} median={median:.3e}",
            methods[i].label,
            methods[j].label,
            devs.len()
        );
    }
    for (k, col) in methods.iter().enumerate() {
        if failures[k] > 0 {
            eprintln!(
                "# {}: {} of {} evaluations failed",
                col.label,
                failures[k],
                rows.len()
            );
        }
    }
    single_cell_exit(&rows, points.len() * indices.len())
}

fn cmd_errormap(a: ErrormapArgs) -> i32 {
    let methods = match build_methods(&a.methods, false, a.shared.tol, a.shared.oracle_tol) {
        Ok(m) => m,
        Err(msg) => return usage(&msg),
    };
    if methods.len() != 2 {
        return usage("errormap needs exactly two methods (e.g. --methods forward,oracle)");
    }
    let points = match build_points(&a.shared) {
        Ok(p) => p,
        Err(msg) => return usage(&msg),
    };
    let indices = match build_indices(&a.shared) {
        Ok(i) => i,
        Err(msg) => return usage(&msg),
    };
    let rows = evaluate_matrix(&points, &indices, &methods, a.shared.phi, a.shared.scale);

    let mut text = String::from("rho,z,phi,n,m,log10_rel_dev\n");
    let mut devs: Vec<f64> = Vec::new();
    let phi_s = fmt_f64(a.shared.phi);
    for row in &rows {
        let dev_field = match (&row.vals[0], &row.vals[1]) {
            (Ok(va), Ok(vb)) => {
                let d = rel_dev(va, vb);
                devs.push(d);
                if d == 0.0 {
                    "-inf".to_string()
                } else {
                    format!("{:.4}", d.log10())
                }
            }
            _ => String::new(),
        };
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(row.rho),
            fmt_f64(row.z),
            phi_s,
            row.n,
            row.m,
            dev_field
        ));
    }

    let code = write_or_print(a.shared.out.as_deref(), &text);
    if code != 0 {
        return code;
    }
    if devs.is_empty() {
        eprintln!(
            "# dev_{}_{}: no points where both evaluated",
            methods[0].label, methods[1].label
        );
    } else {
        devs.sort_by(|x, y| x.total_cmp(y));
        eprintln!(
            "# dev_{}_{}: points={} max={:.3e} median={:.3e}",
            methods[0].label,
            methods[1].label,
            devs.len(),
            devs.last().unwrap(),
            devs[devs.len() / 2]
        );
    }
    single_cell_exit(&rows, points.len() * indices.len())
}
