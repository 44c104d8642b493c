//! Meridional-lattice evaluation, quasi-random point sampling, and CSV
//! export.
//!
//! A grid is a rectangular `(rho, z)` lattice at fixed `phi` (all azimuthal
//! dependence is the known `e^{i m phi}` phase, so meridional planes carry
//! the full information). Rows are emitted in z-major, rho-minor order with
//! 17-significant-digit numbers, which makes the output byte-stable across
//! runs: rerunning the same export must produce an identical file.
//!
//! Lattice points that fall on the singular structures of the requested
//! family (the source segment, a focal segment, the expansion origin, the
//! axis for second-kind harmonics) are kept in the output as rows with empty
//! value fields and the method tag `SINGULAR`. A point where a *forced*
//! route refuses to run (outside its region of validity) is likewise kept,
//! tagged `REFUSED`, so method-region maps stay total over the lattice.

use crate::coords::{FieldPoint, Frame};
use crate::error::{EvalError, Result};
use crate::eval::{EvalOptions, EvalResult, MethodPolicy};
use crate::harmonics::{pssh, ssh_regular, ssh_second_kind, FocalFrame};
use crate::logopoles::{logopole_with, LogopoleSpec};
use rayon::prelude::*;
use std::io::{self, Write};
use std::path::Path;

/// One axis of the lattice: `count` equally spaced values covering
/// `[min, max]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, count: usize) -> std::result::Result<AxisSpec, String> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(format!("axis bounds must be finite, got [{min}, {max}]"));
        }
        if count < 2 {
            return Err(format!("axis needs at least 2 points, got {count}"));
        }
        if !(min < max) {
            return Err(format!("axis needs min < max, got [{min}, {max}]"));
        }
        Ok(AxisSpec { min, max, count })
    }

    /// The i-th lattice value; endpoints are exact.
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
    }
}

/// Which field family a command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFamily {
    /// Line-segment potential `L_n^m`.
    Logopole,
    /// Prolate spheroidal product `Q_n^m(xi) P_n^m(eta) e^{im phi}` in the
    /// chosen focal frame.
    ProlateProduct(FocalFrame),
    /// Regular solid harmonic `r^n P_n^m(u) e^{im phi}` about the chosen
    /// frame origin.
    SolidRegular(Frame),
    /// Second-kind solid harmonic `r^n Q_n^m(u) e^{im phi}` about the chosen
    /// frame origin.
    SolidSecondKind(Frame),
}

/// Optional value transform appended as an extra CSV column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Raw,
    /// `asinh(scale * re)`: compresses the dynamic range near singularities
    /// while keeping signs, the usual way these fields are plotted.
    ArcsinhScaled(f64),
}

/// Full description of one lattice export.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub rho: AxisSpec,
    pub z: AxisSpec,
    pub phi: f64,
    /// Segment length R (the unit of all lengths in the output).
    pub scale: f64,
    pub family: GridFamily,
    pub n: i32,
    pub m: i32,
    pub method: MethodPolicy,
    pub transform: Transform,
}

impl GridSpec {
    /// Check everything that does not require evaluating a point: axis
    /// shapes, the scale, and the index against the family.
    pub fn validate(&self) -> std::result::Result<(), String> {
        AxisSpec::new(self.rho.min, self.rho.max, self.rho.count)
            .map_err(|e| format!("rho {e}"))?;
        AxisSpec::new(self.z.min, self.z.max, self.z.count).map_err(|e| format!("z {e}"))?;
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(format!("R must be positive and finite, got {}", self.scale));
        }
        if self.rho.min < 0.0 {
            return Err(format!("rho must be >= 0, got min {}", self.rho.min));
        }
        if !self.phi.is_finite() {
            return Err("phi must be finite".into());
        }
        check_indices(self.family, self.n, self.m).map_err(|e| e.to_string())
    }
}

/// Index-domain check per family, without touching a field point.
pub fn check_indices(family: GridFamily, n: i32, m: i32) -> Result<()> {
    match family {
        GridFamily::Logopole => LogopoleSpec::new(n, m).map(|_| ()),
        GridFamily::ProlateProduct(_) | GridFamily::SolidRegular(_) => {
            if m >= 0 && n >= m {
                Ok(())
            } else {
                Err(EvalError::UnsupportedIndex { n, m })
            }
        }
        GridFamily::SolidSecondKind(_) => {
            if m >= 0 && n >= -m {
                Ok(())
            } else {
                Err(EvalError::UnsupportedIndex { n, m })
            }
        }
    }
}

/// Evaluate one family member at one point under the given route policy.
/// Forcing a route is meaningful only for the logopole family (the other
/// families have a single closed evaluation); a forced route elsewhere is a
/// region violation.
pub fn evaluate_point(
    family: GridFamily,
    n: i32,
    m: i32,
    p: &FieldPoint,
    policy: MethodPolicy,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    match family {
        GridFamily::Logopole => logopole_with(LogopoleSpec::new(n, m)?, p, policy, opts),
        other => {
            if let MethodPolicy::Fixed(route) = policy {
                return Err(EvalError::RegionViolation {
                    method: route.name().into(),
                    reason: "route selection applies to the logopole family only".into(),
                });
            }
            match other {
                GridFamily::ProlateProduct(f) => pssh(n, m, p, f),
                GridFamily::SolidRegular(fr) => ssh_regular(n, m, p, fr),
                GridFamily::SolidSecondKind(fr) => ssh_second_kind(n, m, p, fr),
                GridFamily::Logopole => unreachable!(),
            }
        }
    }
}

/// True for errors that mean "the point sits on a singular structure of the
/// field" (as opposed to a method refusing or failing to converge).
pub fn is_singularity(e: &EvalError) -> bool {
    matches!(
        e,
        EvalError::SingularRegion { .. }
            | EvalError::OriginSingularity
            | EvalError::AxisSingularity
            | EvalError::FocalSegmentSingularity(_)
            | EvalError::SingularArgument(_)
    )
}

/// Outcome at one lattice cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellOutcome {
    Value(EvalResult),
    /// The point is on a singular structure; emitted with empty value fields.
    Singular,
    /// A forced route (or a series) declined at this point.
    Refused,
}

/// One lattice cell: the meridional coordinates plus the outcome.
#[derive(Debug, Clone, Copy)]
pub struct GridCell {
    pub rho: f64,
    pub z: f64,
    pub outcome: CellOutcome,
}

/// Evaluate the whole lattice in parallel. Row order is deterministic:
/// z-major (outer), rho-minor (inner). Per-point singularities and refusals
/// become tagged cells; only an invalid `GridSpec` fails the sweep.
pub fn evaluate_grid(
    spec: &GridSpec,
    opts: &EvalOptions,
) -> std::result::Result<Vec<GridCell>, String> {
    spec.validate()?;
    let total = spec.rho.count * spec.z.count;
    let cells: Vec<GridCell> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let zi = idx / spec.rho.count;
            let ri = idx % spec.rho.count;
            let rho = spec.rho.value(ri);
            let z = spec.z.value(zi);
            let outcome = match FieldPoint::new(rho, z, spec.phi, spec.scale)
                .and_then(|p| evaluate_point(spec.family, spec.n, spec.m, &p, spec.method, opts))
            {
                Ok(r) => CellOutcome::Value(r),
                Err(e) if is_singularity(&e) => CellOutcome::Singular,
                Err(_) => CellOutcome::Refused,
            };
            GridCell { rho, z, outcome }
        })
        .collect();
    Ok(cells)
}

/// 17-significant-digit serialization: round-trip exact for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write the lattice as CSV with header `rho,z,phi,re,im,method,err` (plus
/// an `arcsinh` column under [`Transform::ArcsinhScaled`]). Singular cells
/// carry empty value fields and `method=SINGULAR`; refused cells likewise
/// with `method=REFUSED`.
pub fn write_csv<W: Write>(spec: &GridSpec, cells: &[GridCell], w: &mut W) -> io::Result<()> {
    match spec.transform {
        Transform::Raw => writeln!(w, "rho,z,phi,re,im,method,err")?,
        Transform::ArcsinhScaled(_) => writeln!(w, "rho,z,phi,re,im,method,err,arcsinh")?,
    }
    let phi = fmt_f64(spec.phi);
    for cell in cells {
        let coord = format!("{},{},{}", fmt_f64(cell.rho), fmt_f64(cell.z), phi);
        match (cell.outcome, spec.transform) {
            (CellOutcome::Value(r), Transform::Raw) => writeln!(
                w,
                "{coord},{},{},{},{}",
                fmt_f64(r.value.re),
                fmt_f64(r.value.im),
                r.method.name(),
                fmt_f64(r.est_error)
            )?,
            (CellOutcome::Value(r), Transform::ArcsinhScaled(s)) => writeln!(
                w,
                "{coord},{},{},{},{},{}",
                fmt_f64(r.value.re),
                fmt_f64(r.value.im),
                r.method.name(),
                fmt_f64(r.est_error),
                fmt_f64((s * r.value.re).asinh())
            )?,
            (outcome, transform) => {
                let tag = if outcome == CellOutcome::Singular {
                    "SINGULAR"
                } else {
                    "REFUSED"
                };
                match transform {
                    Transform::Raw => writeln!(w, "{coord},,,{tag},")?,
                    Transform::ArcsinhScaled(_) => writeln!(w, "{coord},,,{tag},,")?,
                }
            }
        }
    }
    Ok(())
}

/// Write the CSV to `path` through a sibling temp file renamed on success,
/// so an I/O failure never leaves a partial file at the destination.
pub fn write_csv_file(spec: &GridSpec, cells: &[GridCell], path: &Path) -> io::Result<()> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let file = std::fs::File::create(&tmp)?;
        let mut w = io::BufWriter::new(file);
        write_csv(spec, cells, &mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

/// Sibling path `<name>.tmp.<pid>` in the same directory (same filesystem,
/// so the final rename is atomic).
pub(crate) fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp.{}", std::process::id()));
    path.with_file_name(name)
}

/// Radical-inverse (van der Corput) value of `index` in the given base:
/// element `index` of the Halton sequence coordinate for that base.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// `count` deterministic quasi-random points in the open box
/// `(rho_min, rho_max) x (z_min, z_max)`: Halton bases 2 and 3, starting at
/// sequence index `seed + 1` (index 0 is the degenerate corner).
pub fn sample_box(
    rho: (f64, f64),
    z: (f64, f64),
    count: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    (0..count as u64)
        .map(|i| {
            let idx = seed + i + 1;
            (
                rho.0 + (rho.1 - rho.0) * halton(idx, 2),
                z.0 + (z.1 - z.0) * halton(idx, 3),
            )
        })
        .collect()
}
