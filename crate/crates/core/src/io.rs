//! On-disk layout of a run directory.
//!
//! ```text
//! manifest.toml          config echo, version, spacing, waivers, tolerances
//! trace.csv              one row per step
//! predictor.csv          energies of the previous crack's elastic minimizer
//! cracks/step_NNNNN.txt  broken bonds with midpoint, normal and area
//! fields/step_NNNNN.txt  nodal displacements, one per line
//! audit_report.json      written by `audit`
//! ```
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit-identically.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{AuditSection, Problem, ProblemSpec, StrategySection};
use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::evolution::{EvolutionTrace, StepStrategy, TraceStep};
use crate::lattice::{crack_segments, CrackSet, DisplacementField, Lattice};
use crate::model::validate_problem;

pub const TRACE_FILE: &str = "trace.csv";
pub const PREDICTOR_FILE: &str = "predictor.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const AUDIT_FILE: &str = "audit_report.json";
pub const LOCK_FILE: &str = ".lock";
pub const CRACK_DIR: &str = "cracks";
pub const FIELD_DIR: &str = "fields";

pub const TRACE_HEADER: &str =
    "i,t,E_bulk,E_surf,F_work,E_total,n_broken,strategy,candidates_evaluated,cum_work";
pub const PREDICTOR_HEADER: &str = "i,t,E_bulk,E_surf,F_work,E_total";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_csv(trace: &EvolutionTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for s in &trace.steps {
        let e = &s.energy;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.index,
            num(s.t),
            num(e.bulk),
            num(e.surface),
            num(e.force_work),
            num(e.total),
            s.crack.len(),
            s.strategy.as_str(),
            s.candidates_evaluated,
            num(s.cumulative_work)
        ));
    }
    out
}

pub fn predictor_csv(trace: &EvolutionTrace) -> String {
    let mut out = String::from(PREDICTOR_HEADER);
    out.push('\n');
    for s in &trace.steps {
        let e = &s.predictor;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.index,
            num(s.t),
            num(e.bulk),
            num(e.surface),
            num(e.force_work),
            num(e.total)
        ));
    }
    out
}

/// One line per broken bond: `bond_id x_mid [y_mid] nu_x [nu_y] area`; the
/// `y` columns are omitted in one dimension.
pub fn crack_snapshot(lattice: &Lattice, crack: &CrackSet) -> Result<String> {
    let two_d = lattice.dimension() == 2;
    let mut out = String::from(if two_d {
        "# bond_id x_mid y_mid nu_x nu_y area\n"
    } else {
        "# bond_id x_mid nu_x area\n"
    });
    for s in crack_segments(crack, lattice)? {
        if two_d {
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                s.bond,
                num(s.midpoint[0]),
                num(s.midpoint[1]),
                num(s.normal[0]),
                num(s.normal[1]),
                num(s.area)
            ));
        } else {
            out.push_str(&format!(
                "{} {} {} {}\n",
                s.bond,
                num(s.midpoint[0]),
                num(s.normal[0]),
                num(s.area)
            ));
        }
    }
    Ok(out)
}

pub fn field_snapshot(u: &DisplacementField) -> String {
    let mut out = String::with_capacity(u.0.len() * 24);
    for v in &u.0 {
        out.push_str(&num(*v));
        out.push('\n');
    }
    out
}

fn step_file(index: usize) -> String {
    format!("step_{index:05}.txt")
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Locked(dir.display().to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub steps: usize,
    pub complete: bool,
    pub first_crack_step: Option<usize>,
    pub heuristic_steps: usize,
    pub search: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub dimension: usize,
    pub spacing: Vec<f64>,
    pub nodes: usize,
    pub interior_bonds: usize,
    pub anchor_bonds: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaiverInfo {
    pub check: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceInfo {
    pub tie_relative: f64,
    pub solver_gradient: f64,
    pub audit: AuditSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: ArtifactInfo,
    pub run: RunInfo,
    pub lattice: LatticeInfo,
    #[serde(default)]
    pub waivers: Vec<WaiverInfo>,
    pub tolerances: ToleranceInfo,
    pub strategy: StrategySection,
    pub config: ProblemSpec,
}

impl Manifest {
    pub fn new(problem: &Problem, trace: &EvolutionTrace, search: &str) -> Self {
        let lattice = &problem.lattice;
        let spacing = lattice.spacing();
        let report = validate_problem(problem);
        Manifest {
            artifact: ArtifactInfo {
                name: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            run: RunInfo {
                steps: trace.len(),
                complete: trace.complete,
                first_crack_step: trace.first_crack_step(),
                heuristic_steps: trace.steps.iter().filter(|s| s.heuristic).count(),
                search: search.into(),
            },
            lattice: LatticeInfo {
                dimension: lattice.dimension(),
                spacing: spacing[..lattice.dimension()].to_vec(),
                nodes: lattice.node_count(),
                interior_bonds: lattice.interior_bond_count(),
                anchor_bonds: lattice.anchor_count(),
                candidates: problem.candidates.len(),
            },
            waivers: report
                .waivers()
                .map(|c| WaiverInfo {
                    check: c.id.into(),
                    message: c.message.clone(),
                })
                .collect(),
            tolerances: ToleranceInfo {
                tie_relative: crate::evolution::TIE_TOL,
                solver_gradient: crate::equilibrium::GRADIENT_TOL,
                audit: problem.spec.audit.clone(),
            },
            strategy: problem.spec.strategy.clone(),
            config: problem.spec.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Writes every trace artifact into `dir` (which must already be locked by
/// the caller).
pub fn write_trace_files(dir: &Path, problem: &Problem, trace: &EvolutionTrace, search: &str) -> Result<()> {
    fs::create_dir_all(dir.join(CRACK_DIR))?;
    fs::create_dir_all(dir.join(FIELD_DIR))?;
    write_file(&dir.join(TRACE_FILE), &trace_csv(trace))?;
    write_file(&dir.join(PREDICTOR_FILE), &predictor_csv(trace))?;
    for s in &trace.steps {
        let name = step_file(s.index);
        write_file(
            &dir.join(CRACK_DIR).join(&name),
            &crack_snapshot(&problem.lattice, &s.crack)?,
        )?;
        write_file(&dir.join(FIELD_DIR).join(&name), &field_snapshot(&s.u))?;
    }
    write_file(
        &dir.join(MANIFEST_FILE),
        &Manifest::new(problem, trace, search).to_toml_string()?,
    )?;
    Ok(())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| parse_error(path, 0, format!("cannot read: {e}")))
}

fn parse_f64(path: &Path, line: usize, field: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| parse_error(path, line, format!("{field}: `{text}` is not a number")))
}

fn parse_usize(path: &Path, line: usize, field: &str, text: &str) -> Result<usize> {
    text.trim()
        .parse::<usize>()
        .map_err(|_| parse_error(path, line, format!("{field}: `{text}` is not a count")))
}

/// Data rows of a CSV file, checked against its header. Yields
/// `(line number, fields)`.
fn csv_rows(path: &Path, text: &str, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((_, h)) => return Err(parse_error(path, 1, format!("unexpected header `{h}`"))),
        None => return Err(parse_error(path, 1, "empty file")),
    }
    let columns = header.split(',').count();
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != columns {
            return Err(parse_error(
                path,
                n + 1,
                format!("expected {columns} columns, found {}", fields.len()),
            ));
        }
        rows.push((n + 1, fields));
    }
    Ok(rows)
}

fn read_crack(path: &Path, lattice: &Lattice) -> Result<CrackSet> {
    let text = read(path)?;
    let mut crack = CrackSet::empty(lattice);
    let columns = if lattice.dimension() == 2 { 6 } else { 4 };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != columns {
            return Err(parse_error(
                path,
                n + 1,
                format!("expected {columns} columns, found {}", fields.len()),
            ));
        }
        let id = parse_usize(path, n + 1, "bond_id", fields[0])?;
        crack
            .insert(lattice, id)
            .map_err(|e| parse_error(path, n + 1, e.to_string()))?;
    }
    Ok(crack)
}

fn read_field(path: &Path, lattice: &Lattice) -> Result<DisplacementField> {
    let text = read(path)?;
    let mut values = Vec::with_capacity(lattice.node_count());
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_f64(path, n + 1, "displacement", line)?);
    }
    if values.len() != lattice.node_count() {
        return Err(parse_error(
            path,
            text.lines().count(),
            format!("expected {} nodal values, found {}", lattice.node_count(), values.len()),
        ));
    }
    Ok(DisplacementField(values))
}

fn energy_columns(path: &Path, line: usize, fields: &[String]) -> Result<EnergyBreakdown> {
    let bulk = parse_f64(path, line, "E_bulk", &fields[0])?;
    let surface = parse_f64(path, line, "E_surf", &fields[1])?;
    let work = parse_f64(path, line, "F_work", &fields[2])?;
    let total = parse_f64(path, line, "E_total", &fields[3])?;
    let e = EnergyBreakdown::new(bulk, surface, work);
    if e.total != total {
        return Err(parse_error(path, line, "E_total differs from E_bulk + E_surf - F_work"));
    }
    Ok(e)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = read(&path)?;
    toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start].lines().count().max(1))
            .unwrap_or(0);
        parse_error(&path, line, e.message().to_string())
    })
}

/// Reads a run directory back into the problem and its trace.
pub fn load_run(dir: &Path) -> Result<(Problem, EvolutionTrace)> {
    let manifest = read_manifest(dir)?;
    let problem = Problem::new(manifest.config)?;
    let lattice = &problem.lattice;

    let trace_path = dir.join(TRACE_FILE);
    let rows = csv_rows(&trace_path, &read(&trace_path)?, TRACE_HEADER)?;
    let predictor_path = dir.join(PREDICTOR_FILE);
    let predictor_rows = csv_rows(&predictor_path, &read(&predictor_path)?, PREDICTOR_HEADER)?;
    if predictor_rows.len() != rows.len() {
        return Err(parse_error(
            &predictor_path,
            predictor_rows.len() + 1,
            format!("expected {} rows to match the trace", rows.len()),
        ));
    }

    let mut steps = Vec::with_capacity(rows.len());
    for ((line, f), (pline, p)) in rows.iter().zip(&predictor_rows) {
        let (line, pline) = (*line, *pline);
        let index = parse_usize(&trace_path, line, "i", &f[0])?;
        if index != steps.len() {
            return Err(parse_error(&trace_path, line, format!("step index {index} out of sequence")));
        }
        let t = parse_f64(&trace_path, line, "t", &f[1])?;
        let energy = energy_columns(&trace_path, line, &f[2..6])?;
        let n_broken = parse_usize(&trace_path, line, "n_broken", &f[6])?;
        let strategy: StepStrategy = f[7]
            .parse()
            .map_err(|e: Error| parse_error(&trace_path, line, e.to_string()))?;
        let candidates_evaluated = parse_usize(&trace_path, line, "candidates_evaluated", &f[8])?;
        let cumulative_work = parse_f64(&trace_path, line, "cum_work", &f[9])?;
        if parse_usize(&predictor_path, pline, "i", &p[0])? != index
            || parse_f64(&predictor_path, pline, "t", &p[1])? != t
        {
            return Err(parse_error(&predictor_path, pline, "row does not match the trace"));
        }
        let predictor = energy_columns(&predictor_path, pline, &p[2..6])?;

        let crack_path = dir.join(CRACK_DIR).join(step_file(index));
        let crack = read_crack(&crack_path, lattice)?;
        if crack.len() != n_broken {
            return Err(parse_error(
                &trace_path,
                line,
                format!("n_broken = {n_broken} but {} lists {}", crack_path.display(), crack.len()),
            ));
        }
        let u = read_field(&dir.join(FIELD_DIR).join(step_file(index)), lattice)?;
        steps.push(TraceStep {
            index,
            t,
            crack,
            u,
            energy,
            predictor,
            strategy,
            heuristic: strategy == StepStrategy::Greedy,
            candidates_evaluated,
            cumulative_work,
        });
    }
    if steps.is_empty() {
        return Err(parse_error(&trace_path, 2, "trace has no steps"));
    }
    let complete = manifest.run.complete && steps.len() == problem.grid.len();
    Ok((problem, EvolutionTrace { steps, complete }))
}
