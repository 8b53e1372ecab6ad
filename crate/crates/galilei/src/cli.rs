//! Spec-file driven verification harness.
//!
//! A manifold spec is a line-oriented sectioned text file declaring a chart,
//! a Galilei structure, and optionally an observer, free connection data,
//! explicit connection coefficients, a frame, a boost field and sampling
//! parameters. Components are keyed by coordinate names and default to
//! zero:
//!
//! ```text
//! [manifold]
//! dim = 4
//! coords = t, x, y, z
//!
//! [tau]
//! t = 1
//!
//! [h]
//! x, x = 1
//! y, y = 1
//! z, z = 1
//!
//! [observer]
//! t = 1
//!
//! [data.omega]
//! t, x = 2*x        # antisymmetric mirror is filled automatically
//! ```
//!
//! Sections: `[manifold]`, `[tau]`, `[h]` (upper triangle, symmetrized),
//! `[observer]`, `[data.spatial_torsion]` (antisymmetrized in the last two
//! indices), `[data.qhat]`, `[data.spatial_q]` (symmetrized in the last two
//! indices), `[data.omega]` (antisymmetrized), `[connection]` (keys
//! `rho, mu, nu` for `Gamma^rho_{mu nu}`), `[frame]` (keys `e<A>, coord`),
//! `[boost]`, `[sampling]` (`points`, `seed`, `box = lo, hi`).
//!
//! [`run`] executes one of ten commands against a spec and produces a
//! machine-readable [`Report`]; the `galilei` binary maps it onto the exit
//! code contract (0 all checks pass, 1 check failure, 2 spec/usage error).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::connection::{
    self, build_connection, check_identities, coefficients_three_ways,
    complete_space_nonmetricity, complete_torsion, difference_newton_coriolis_scan,
    difference_nonmetricity_scan, extract_data, lemma_covariant_space_metric,
    lemma_temporal_torsion, special_connection, Connection, ConnectionData, ConnectionError,
};
use crate::expr::{parse_expression, ScalarExpr};
use crate::frames::{
    self, cartan_torsion_checks, decompose_gal, dual_form_scan, frame_newton_coriolis,
    frame_nonmetricities, frame_nonmetricity_checks, local_connection_form, FrameError,
    GalileiFrame, LocalConnectionForm,
};
use crate::milne::{self, boost, transform_data, MilneError};
use crate::sample::{
    all_passed, max_component_scan, max_difference_scan, Check, Criterion, SamplePlan,
};
use crate::structure::{GalileiStructure, Observer, StructureError};
use crate::tensor::{TensorField, TensorError, Variance};

use Variance::{Down, Up};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("command '{command}' requires {what}")]
    MissingBlock {
        command: &'static str,
        what: &'static str,
    },
    #[error("command '{command}' takes exactly one of a data block or an explicit connection")]
    AmbiguousInput { command: &'static str },
    #[error("invalid spec: {0}")]
    InvalidStructure(#[from] StructureError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Milne(#[from] MilneError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("cannot write {path}: {source}")]
    Dump {
        path: String,
        source: std::io::Error,
    },
}

/// Optional free-data blocks of a spec; `None` means the section is absent
/// (distinct from an explicit all-zero section, which matters for the
/// `identities` override).
#[derive(Debug, Clone, Default)]
pub struct DataBlocks {
    pub spatial_torsion: Option<TensorField>,
    pub clock_nonmetricity: Option<TensorField>,
    pub spatial_nonmetricity: Option<TensorField>,
    pub newton_coriolis: Option<TensorField>,
}

impl DataBlocks {
    pub fn any(&self) -> bool {
        self.spatial_torsion.is_some()
            || self.clock_nonmetricity.is_some()
            || self.spatial_nonmetricity.is_some()
            || self.newton_coriolis.is_some()
    }

    /// Assembles full connection data, zero-filling absent blocks.
    pub fn assemble(&self, dim: usize) -> ConnectionData {
        let zero = ConnectionData::zero(dim);
        ConnectionData {
            spatial_torsion: self
                .spatial_torsion
                .clone()
                .unwrap_or(zero.spatial_torsion),
            clock_nonmetricity: self
                .clock_nonmetricity
                .clone()
                .unwrap_or(zero.clock_nonmetricity),
            spatial_nonmetricity: self
                .spatial_nonmetricity
                .clone()
                .unwrap_or(zero.spatial_nonmetricity),
            newton_coriolis: self
                .newton_coriolis
                .clone()
                .unwrap_or(zero.newton_coriolis),
        }
    }
}

/// A parsed manifold specification file.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub dim: usize,
    pub coords: Vec<String>,
    pub clock_form: TensorField,
    pub space_metric: TensorField,
    pub observer: Option<TensorField>,
    pub data: DataBlocks,
    pub connection: Option<Connection>,
    pub frame: Option<Vec<TensorField>>,
    pub boost: Option<TensorField>,
    pub sampling: SamplePlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Special,
    Build,
    Extract,
    Roundtrip,
    Identities,
    ThreeForms,
    Lemmas,
    Milne,
    Frame,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Special => "special",
            CommandKind::Build => "build",
            CommandKind::Extract => "extract",
            CommandKind::Roundtrip => "roundtrip",
            CommandKind::Identities => "identities",
            CommandKind::ThreeForms => "three-forms",
            CommandKind::Lemmas => "lemmas",
            CommandKind::Milne => "milne",
            CommandKind::Frame => "frame",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Multiplies every tolerance (loosens lower-bound thresholds by the
    /// same factor).
    pub tol_scale: Option<f64>,
    /// Writes the command's central connection, evaluated at the sample
    /// points, as JSON.
    pub dump_gamma: Option<PathBuf>,
}

/// The machine-readable result of one command run. Key order is stable;
/// `timestamp` is the only field that varies between identical runs.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub spec: String,
    pub dim: usize,
    pub sampling: SamplePlan,
    pub tol_scale: f64,
    pub checks: Vec<Check>,
    pub all_passed: bool,
    pub timestamp: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

// ---------------------------------------------------------------------------
// Spec parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Manifold,
    Tau,
    H,
    Observer,
    DataSpatialTorsion,
    DataQhat,
    DataSpatialQ,
    DataOmega,
    Connection,
    Frame,
    Boost,
    Sampling,
}

fn section_from_name(name: &str) -> Option<Section> {
    Some(match name {
        "manifold" => Section::Manifold,
        "tau" => Section::Tau,
        "h" => Section::H,
        "observer" => Section::Observer,
        "data.spatial_torsion" => Section::DataSpatialTorsion,
        "data.qhat" => Section::DataQhat,
        "data.spatial_q" => Section::DataSpatialQ,
        "data.omega" => Section::DataOmega,
        "connection" => Section::Connection,
        "frame" => Section::Frame,
        "boost" => Section::Boost,
        "sampling" => Section::Sampling,
    _ => return None,
    })
}

struct RawEntry {
    line: usize,
    key: String,
    value: String,
}

/// Sparse component table for one tensor block, with duplicate detection.
struct ComponentTable {
    rank: usize,
    entries: HashMap<Vec<usize>, (usize, ScalarExpr)>,
}

impl ComponentTable {
    fn new(rank: usize) -> Self {
        ComponentTable {
            rank,
            entries: HashMap::new(),
        }
    }

    fn insert(
        &mut self,
        path: &str,
        line: usize,
        indices: Vec<usize>,
        expr: ScalarExpr,
    ) -> Result<(), SpecError> {
        debug_assert_eq!(indices.len(), self.rank);
        if self.entries.contains_key(&indices) {
            return Err(SpecError::Parse {
                path: path.to_string(),
                line,
                message: "duplicate component (possibly via a symmetry mirror)".to_string(),
            });
        }
        self.entries.insert(indices, (line, expr));
        Ok(())
    }

    fn to_field(&self, dim: usize, signature: &[Variance]) -> TensorField {
        TensorField::from_fn(dim, signature, |idx| {
            self.entries
                .get(idx)
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| ScalarExpr::zero(dim))
        })
    }
}

pub fn load_spec(path: &Path) -> Result<ManifoldSpec, SpecError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: display.clone(),
        source,
    })?;
    parse_spec(&text, &display)
}

pub fn parse_spec(text: &str, path: &str) -> Result<ManifoldSpec, SpecError> {
    let err = |line: usize, message: String| SpecError::Parse {
        path: path.to_string(),
        line,
        message,
    };

    // Pass 1: split into sections.
    let mut sections: HashMap<Section, Vec<RawEntry>> = HashMap::new();
    let mut current: Option<Section> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, "unterminated section header".to_string()))?;
            let section = section_from_name(name.trim())
                .ok_or_else(|| err(line_no, format!("unknown section '[{}]'", name.trim())))?;
            if sections.contains_key(&section) {
                return Err(err(line_no, format!("section '[{}]' appears twice", name.trim())));
            }
            sections.insert(section, Vec::new());
            current = Some(section);
            continue;
        }
        let section = current
            .ok_or_else(|| err(line_no, "entry before any section header".to_string()))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, "expected 'key = value'".to_string()))?;
        sections.get_mut(&section).unwrap().push(RawEntry {
            line: line_no,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }

    // [manifold]
    let manifold = sections
        .remove(&Section::Manifold)
        .ok_or_else(|| err(0, "missing [manifold] section".to_string()))?;
    let mut dim: Option<usize> = None;
    let mut coords: Option<Vec<String>> = None;
    for entry in &manifold {
        match entry.key.as_str() {
            "dim" => {
                dim = Some(entry.value.parse().map_err(|_| {
                    err(entry.line, format!("invalid dim '{}'", entry.value))
                })?)
            }
            "coords" => {
                coords = Some(
                    split_tokens(&entry.value)
                        .into_iter()
                        .map(str::to_string)
                        .collect(),
                )
            }
            other => return Err(err(entry.line, format!("unknown manifold key '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| err(0, "missing 'dim' in [manifold]".to_string()))?;
    let coords = coords.ok_or_else(|| err(0, "missing 'coords' in [manifold]".to_string()))?;
    if coords.len() != dim {
        return Err(err(
            0,
            format!("dim = {dim} but {} coordinates declared", coords.len()),
        ));
    }
    if dim < 2 {
        return Err(err(0, format!("dim = {dim} is too small (need n >= 1)")));
    }
    let coord_refs: Vec<&str> = coords.iter().map(String::as_str).collect();

    let coord_index = |token: &str, line: usize| -> Result<usize, SpecError> {
        coord_refs
            .iter()
            .position(|c| *c == token)
            .ok_or_else(|| err(line, format!("unknown coordinate '{token}'")))
    };
    let parse_value = |value: &str, line: usize| -> Result<ScalarExpr, SpecError> {
        parse_expression(value, &coord_refs).map_err(|e| err(line, format!("{e}")))
    };

    // Generic component-block reader. `mirror` duplicates each entry under
    // an index permutation with a sign.
    enum Mirror {
        None,
        SymmetricPair(usize, usize),
        AntisymmetricPair(usize, usize),
    }
    let read_block = |entries: &[RawEntry], rank: usize, mirror: Mirror| -> Result<ComponentTable, SpecError> {
        let mut table = ComponentTable::new(rank);
        for entry in entries {
            let tokens = split_tokens(&entry.key);
            if tokens.len() != rank {
                return Err(err(
                    entry.line,
                    format!("expected {rank} coordinate indices, got {}", tokens.len()),
                ));
            }
            let mut indices = Vec::with_capacity(rank);
            for token in &tokens {
                indices.push(coord_index(token, entry.line)?);
            }
            let expr = parse_value(&entry.value, entry.line)?;
            match mirror {
                Mirror::None => table.insert(path, entry.line, indices, expr)?,
                Mirror::SymmetricPair(a, b) => {
                    let mut other = indices.clone();
                    other.swap(a, b);
                    table.insert(path, entry.line, indices.clone(), expr.clone())?;
                    if other != indices {
                        table.insert(path, entry.line, other, expr)?;
                    }
                }
                Mirror::AntisymmetricPair(a, b) => {
                    let mut other = indices.clone();
                    other.swap(a, b);
                    if other == indices {
                        return Err(err(
                            entry.line,
                            "diagonal component of an antisymmetric block".to_string(),
                        ));
                    }
                    table.insert(path, entry.line, indices, expr.clone())?;
                    table.insert(path, entry.line, other, expr.neg())?;
                }
            }
        }
        Ok(table)
    };

    // [tau]
    let tau_entries = sections
        .remove(&Section::Tau)
        .ok_or_else(|| err(0, "missing [tau] section".to_string()))?;
    let clock_form = read_block(&tau_entries, 1, Mirror::None)?.to_field(dim, &[Down]);

    // [h]
    let h_entries = sections
        .remove(&Section::H)
        .ok_or_else(|| err(0, "missing [h] section".to_string()))?;
    let space_metric =
        read_block(&h_entries, 2, Mirror::SymmetricPair(0, 1))?.to_field(dim, &[Up, Up]);

    // [observer]
    let observer = sections
        .remove(&Section::Observer)
        .map(|entries| read_block(&entries, 1, Mirror::None).map(|t| t.to_field(dim, &[Up])))
        .transpose()?;

    // [boost]
    let boost = sections
        .remove(&Section::Boost)
        .map(|entries| read_block(&entries, 1, Mirror::None).map(|t| t.to_field(dim, &[Up])))
        .transpose()?;

    // Data blocks.
    let data = DataBlocks {
        spatial_torsion: sections
            .remove(&Section::DataSpatialTorsion)
            .map(|entries| {
                read_block(&entries, 3, Mirror::AntisymmetricPair(1, 2))
                    .map(|t| t.to_field(dim, &[Up, Down, Down]))
            })
            .transpose()?,
        clock_nonmetricity: sections
            .remove(&Section::DataQhat)
            .map(|entries| {
                read_block(&entries, 2, Mirror::None).map(|t| t.to_field(dim, &[Down, Down]))
            })
            .transpose()?,
        spatial_nonmetricity: sections
            .remove(&Section::DataSpatialQ)
            .map(|entries| {
                read_block(&entries, 3, Mirror::SymmetricPair(1, 2))
                    .map(|t| t.to_field(dim, &[Down, Up, Up]))
            })
            .transpose()?,
        newton_coriolis: sections
            .remove(&Section::DataOmega)
            .map(|entries| {
                read_block(&entries, 2, Mirror::AntisymmetricPair(0, 1))
                    .map(|t| t.to_field(dim, &[Down, Down]))
            })
            .transpose()?,
    };

    // [connection]
    let connection = sections
        .remove(&Section::Connection)
        .map(|entries| {
            read_block(&entries, 3, Mirror::None).map(|t| {
                let field = t.to_field(dim, &[Up, Down, Down]);
                Connection::from_fn(dim, |rho, mu, nu| field.component(&[rho, mu, nu]).clone())
            })
        })
        .transpose()?;

    // [frame]: keys are `e<A>, coord`.
    let frame = sections
        .remove(&Section::Frame)
        .map(|entries| -> Result<Vec<TensorField>, SpecError> {
            let mut tables: Vec<ComponentTable> =
                (0..dim).map(|_| ComponentTable::new(1)).collect();
            for entry in &entries {
                let tokens = split_tokens(&entry.key);
                if tokens.len() != 2 {
                    return Err(err(
                        entry.line,
                        "expected 'e<A>, coordinate' as key".to_string(),
                    ));
                }
                let label = tokens[0]
                    .strip_prefix('e')
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| {
                        err(entry.line, format!("invalid frame label '{}'", tokens[0]))
                    })?;
                if label >= dim {
                    return Err(err(
                        entry.line,
                        format!("frame label e{label} out of range for dim {dim}"),
                    ));
                }
                let mu = coord_index(tokens[1], entry.line)?;
                let expr = parse_value(&entry.value, entry.line)?;
                tables[label].insert(path, entry.line, vec![mu], expr)?;
            }
            Ok(tables
                .iter()
                .map(|t| t.to_field(dim, &[Up]))
                .collect())
        })
        .transpose()?;

    // [sampling]
    let mut sampling = SamplePlan::default();
    if let Some(entries) = sections.remove(&Section::Sampling) {
        for entry in &entries {
            match entry.key.as_str() {
                "points" => {
                    sampling.count = entry.value.parse().map_err(|_| {
                        err(entry.line, format!("invalid point count '{}'", entry.value))
                    })?
                }
                "seed" => {
                    sampling.seed = entry.value.parse().map_err(|_| {
                        err(entry.line, format!("invalid seed '{}'", entry.value))
                    })?
                }
                "box" => {
                    let tokens = split_tokens(&entry.value);
                    let bounds: Option<(f64, f64)> = match tokens.as_slice() {
                        [lo, hi] => lo.parse().ok().zip(hi.parse().ok()),
                        _ => None,
                    };
                    let (lo, hi) = bounds.ok_or_else(|| {
                        err(entry.line, format!("invalid box '{}'", entry.value))
                    })?;
                    if lo >= hi {
                        return Err(err(entry.line, "box lower bound must be below upper".to_string()));
                    }
                    sampling.lo = lo;
                    sampling.hi = hi;
                }
                other => return Err(err(entry.line, format!("unknown sampling key '{other}'"))),
            }
        }
    }

    Ok(ManifoldSpec {
        dim,
        coords,
        clock_form,
        space_metric,
        observer,
        data,
        connection,
        frame,
        boost,
        sampling,
    })
}

fn split_tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect()
}

// ---------------------------------------------------------------------------
// Command execution
// ---------------------------------------------------------------------------

struct RunContext {
    structure: GalileiStructure,
    points: Vec<Vec<f64>>,
}

impl RunContext {
    fn observer(&self, spec: &ManifoldSpec, command: CommandKind) -> Result<Observer, RunError> {
        let field = spec.observer.clone().ok_or(RunError::MissingBlock {
            command: command.name(),
            what: "an [observer] section",
        })?;
        Ok(Observer::new(field)?)
    }
}

/// Runs one command against a parsed spec.
pub fn run(
    command: CommandKind,
    spec: &ManifoldSpec,
    spec_path: &str,
    options: &RunOptions,
) -> Result<Report, RunError> {
    let structure = GalileiStructure::new(spec.clock_form.clone(), spec.space_metric.clone())?;
    let points = spec.sampling.points(spec.dim);
    let ctx = RunContext { structure, points };

    let mut dump: Option<&Connection> = None;
    let held_connection;

    let mut checks: Vec<Check> = Vec::new();
    match command {
        CommandKind::Validate => {
            checks.extend(ctx.structure.validate(&ctx.points));
            if let Some(field) = &spec.observer {
                let observer = Observer::new(field.clone())?;
                checks.push(observer.validate(&ctx.structure, &ctx.points));
                if spec.data.any() {
                    let data = spec.data.assemble(spec.dim);
                    checks.extend(data.validate(&ctx.structure, &observer, &ctx.points));
                }
            }
            if let Some(fields) = &spec.frame {
                let frame = GalileiFrame::from_fields(fields.clone())?;
                checks.extend(frame.validate(&ctx.structure, &ctx.points));
            }
        }

        CommandKind::Special => {
            let observer = ctx.observer(spec, command)?;
            let special = special_connection(&ctx.structure, &observer)?;
            let (clock_nm, space_nm) = special.nonmetricities(&ctx.structure)?;
            checks.push(Check::residual(
                "special_clock_compatibility",
                max_component_scan(&clock_nm, &ctx.points),
                connection::TOL_SPECIAL,
            ));
            checks.push(Check::residual(
                "special_space_compatibility",
                max_component_scan(&space_nm, &ctx.points),
                connection::TOL_SPECIAL,
            ));
            let nc = special.newton_coriolis(&ctx.structure, &observer)?;
            checks.push(Check::residual(
                "special_newton_coriolis_zero",
                max_component_scan(&nc, &ctx.points),
                connection::TOL_SPECIAL,
            ));
            let dtau = connection::exterior_derivative(ctx.structure.clock_form())?;
            let expected = TensorField::from_fn(spec.dim, &[Up, Down, Down], |idx| {
                observer
                    .velocity()
                    .component(&[idx[0]])
                    .mul(dtau.component(&[idx[1], idx[2]]))
            });
            checks.push(Check::residual(
                "special_torsion_is_clock_twist",
                max_difference_scan(&special.torsion(), &expected, &ctx.points),
                connection::TOL_SPECIAL_TORSION,
            ));
            held_connection = special;
            dump = Some(&held_connection);
        }

        CommandKind::Build => {
            let observer = ctx.observer(spec, command)?;
            if !spec.data.any() {
                return Err(RunError::MissingBlock {
                    command: command.name(),
                    what: "at least one [data.*] section",
                });
            }
            if spec.connection.is_some() {
                return Err(RunError::AmbiguousInput {
                    command: command.name(),
                });
            }
            let data = spec.data.assemble(spec.dim);
            checks.extend(data.validate(&ctx.structure, &observer, &ctx.points));
            if all_passed(&checks) {
                let built = build_connection(&ctx.structure, &observer, &data, &ctx.points)?;
                let full_torsion = complete_torsion(&data, &ctx.structure, &observer)?;
                checks.push(Check::residual(
                    "built_torsion_matches",
                    max_difference_scan(&built.torsion(), &full_torsion, &ctx.points),
                    connection::TOL_ROUNDTRIP,
                ));
                let (clock_nm, space_nm) = built.nonmetricities(&ctx.structure)?;
                checks.push(Check::residual(
                    "built_clock_nonmetricity_matches",
                    max_difference_scan(&clock_nm, &data.clock_nonmetricity, &ctx.points),
                    connection::TOL_ROUNDTRIP,
                ));
                let full_q = complete_space_nonmetricity(&data, &ctx.structure, &observer)?;
                checks.push(Check::residual(
                    "built_space_nonmetricity_matches",
                    max_difference_scan(&space_nm, &full_q, &ctx.points),
                    connection::TOL_ROUNDTRIP,
                ));
                let nc = built.newton_coriolis(&ctx.structure, &observer)?;
                checks.push(Check::residual(
                    "built_newton_coriolis_matches",
                    max_difference_scan(&nc, &data.newton_coriolis, &ctx.points),
                    connection::TOL_ROUNDTRIP,
                ));
                held_connection = built;
                dump = Some(&held_connection);
            }
        }

        CommandKind::Extract => {
            let observer = ctx.observer(spec, command)?;
            let input = spec.connection.clone().ok_or(RunError::MissingBlock {
                command: command.name(),
                what: "a [connection] section",
            })?;
            if spec.data.any() {
                return Err(RunError::AmbiguousInput {
                    command: command.name(),
                });
            }
            let data = extract_data(&input, &ctx.structure, &observer)?;
            checks.extend(data.validate(&ctx.structure, &observer, &ctx.points));
            let (clock_nm, space_nm) = input.nonmetricities(&ctx.structure)?;
            checks.extend(check_identities(
                &input.torsion(),
                &clock_nm,
                &space_nm,
                &ctx.structure,
                &ctx.points,
            )?);
            held_connection = input;
            dump = Some(&held_connection);
        }

        CommandKind::Roundtrip => {
            let observer = ctx.observer(spec, command)?;
            match (&spec.connection, spec.data.any()) {
                (Some(input), false) => {
                    let data = extract_data(input, &ctx.structure, &observer)?;
                    let rebuilt = build_connection(&ctx.structure, &observer, &data, &ctx.points)?;
                    checks.push(Check::residual(
                        "roundtrip_rebuild_matches",
                        input.max_difference_scan(&rebuilt, &ctx.points),
                        connection::TOL_ROUNDTRIP,
                    ));
                    held_connection = rebuilt;
                    dump = Some(&held_connection);
                }
                (None, true) => {
                    let data = spec.data.assemble(spec.dim);
                    let built = build_connection(&ctx.structure, &observer, &data, &ctx.points)?;
                    let extracted = extract_data(&built, &ctx.structure, &observer)?;
                    checks.push(Check::residual(
                        "roundtrip_data_matches",
                        extracted.max_difference_scan(&data, &ctx.points),
                        connection::TOL_ROUNDTRIP,
                    ));
                    held_connection = built;
                    dump = Some(&held_connection);
                }
                (Some(_), true) => {
                    return Err(RunError::AmbiguousInput {
                        command: command.name(),
                    })
                }
                (None, false) => {
                    return Err(RunError::MissingBlock {
                        command: command.name(),
                        what: "either a [connection] section or [data.*] sections",
                    })
                }
            }
        }

        CommandKind::Identities => {
            let input = spec.connection.clone().ok_or(RunError::MissingBlock {
                command: command.name(),
                what: "a [connection] section",
            })?;
            let (clock_nm, space_nm) = input.nonmetricities(&ctx.structure)?;
            // A [data.qhat] section overrides the extracted clock
            // non-metricity; this is the hook for negative controls.
            let clock_nm = spec
                .data
                .clock_nonmetricity
                .clone()
                .unwrap_or(clock_nm);
            checks.extend(check_identities(
                &input.torsion(),
                &clock_nm,
                &space_nm,
                &ctx.structure,
                &ctx.points,
            )?);
            held_connection = input;
            dump = Some(&held_connection);
        }

        CommandKind::ThreeForms => {
            let observer = ctx.observer(spec, command)?;
            let (torsion, clock_nm, space_nm, nc) = match (&spec.connection, spec.data.any()) {
                (Some(input), false) => {
                    let (clock_nm, space_nm) = input.nonmetricities(&ctx.structure)?;
                    let nc = input.newton_coriolis(&ctx.structure, &observer)?;
                    (input.torsion(), clock_nm, space_nm, nc)
                }
                (None, true) => {
                    let data = spec.data.assemble(spec.dim);
                    let torsion = complete_torsion(&data, &ctx.structure, &observer)?;
                    let space_nm =
                        complete_space_nonmetricity(&data, &ctx.structure, &observer)?;
                    (
                        torsion,
                        data.clock_nonmetricity,
                        space_nm,
                        data.newton_coriolis,
                    )
                }
                (Some(_), true) => {
                    return Err(RunError::AmbiguousInput {
                        command: command.name(),
                    })
                }
                (None, false) => {
                    return Err(RunError::MissingBlock {
                        command: command.name(),
                        what: "either a [connection] section or [data.*] sections",
                    })
                }
            };
            let (one, two, three) = coefficients_three_ways(
                &ctx.structure,
                &observer,
                &torsion,
                &clock_nm,
                &space_nm,
                &nc,
            )?;
            checks.push(Check::residual(
                "three_forms_one_vs_two",
                one.max_difference_scan(&two, &ctx.points),
                connection::TOL_THREE_FORMS,
            ));
            checks.push(Check::residual(
                "three_forms_one_vs_three",
                one.max_difference_scan(&three, &ctx.points),
                connection::TOL_THREE_FORMS,
            ));
            checks.push(Check::residual(
                "three_forms_two_vs_three",
                two.max_difference_scan(&three, &ctx.points),
                connection::TOL_THREE_FORMS,
            ));
            held_connection = one;
            dump = Some(&held_connection);
        }

        CommandKind::Lemmas => {
            let observer = ctx.observer(spec, command)?;
            let input = spec.connection.clone().ok_or(RunError::MissingBlock {
                command: command.name(),
                what: "a [connection] section",
            })?;
            checks.push(Check::residual(
                "lemma_temporal_torsion",
                lemma_temporal_torsion(&input, &ctx.structure, &ctx.points)?,
                connection::TOL_LEMMA,
            ));
            checks.push(Check::residual(
                "lemma_covariant_space_metric",
                lemma_covariant_space_metric(&input, &ctx.structure, &observer, &ctx.points)?,
                connection::TOL_LEMMA,
            ));
            let special = special_connection(&ctx.structure, &observer)?;
            checks.push(Check::residual(
                "difference_nonmetricity_relation",
                difference_nonmetricity_scan(&input, &special, &ctx.structure, &ctx.points)?,
                connection::TOL_LEMMA,
            ));
            checks.push(Check::residual(
                "difference_newton_coriolis_relation",
                difference_newton_coriolis_scan(
                    &input,
                    &special,
                    &ctx.structure,
                    &observer,
                    &ctx.points,
                )?,
                connection::TOL_LEMMA,
            ));
            held_connection = input;
            dump = Some(&held_connection);
        }

        CommandKind::Milne => {
            let observer = ctx.observer(spec, command)?;
            let boost_field = spec.boost.clone().ok_or(RunError::MissingBlock {
                command: command.name(),
                what: "a [boost] section",
            })?;
            if !spec.data.any() {
                return Err(RunError::MissingBlock {
                    command: command.name(),
                    what: "[data.*] sections",
                });
            }
            let data = spec.data.assemble(spec.dim);
            let boosted = boost(&ctx.structure, &observer, &boost_field, &ctx.points)?;
            checks.push(Check::residual(
                "boost_spacelike",
                crate::sample::scan(&ctx.points, |p| {
                    let mut pairing = ScalarExpr::zero(spec.dim);
                    for mu in 0..spec.dim {
                        pairing = pairing.add(
                            &ctx.structure
                                .clock_form()
                                .component(&[mu])
                                .mul(boost_field.component(&[mu])),
                        );
                    }
                    pairing.evaluate(p).map(f64::abs)
                }),
                milne::TOL_BOOST,
            ));
            let original = build_connection(&ctx.structure, &observer, &data, &ctx.points)?;
            let transformed = transform_data(&original, &ctx.structure, &boosted)?;
            let rebuilt = build_connection(&ctx.structure, &boosted, &transformed, &ctx.points)?;
            checks.push(Check::residual(
                "milne_invariance",
                original.max_difference_scan(&rebuilt, &ctx.points),
                milne::TOL_MILNE,
            ));
            held_connection = original;
            dump = Some(&held_connection);
        }

        CommandKind::Frame => {
            let fields = spec.frame.clone().ok_or(RunError::MissingBlock {
                command: command.name(),
                what: "a [frame] section",
            })?;
            let frame = GalileiFrame::from_fields(fields)?;
            let input = match (&spec.connection, spec.data.any()) {
                (Some(input), false) => input.clone(),
                (None, true) => {
                    let observer = frame.observer()?;
                    let data = spec.data.assemble(spec.dim);
                    build_connection(&ctx.structure, &observer, &data, &ctx.points)?
                }
                (Some(_), true) => {
                    return Err(RunError::AmbiguousInput {
                        command: command.name(),
                    })
                }
                (None, false) => {
                    return Err(RunError::MissingBlock {
                        command: command.name(),
                        what: "either a [connection] section or [data.*] sections",
                    })
                }
            };
            checks.extend(frame.validate(&ctx.structure, &ctx.points));
            let form = local_connection_form(&input, &frame)?;
            checks.push(Check::residual(
                "connection_form_dual_consistency",
                dual_form_scan(&input, &frame, &form, &ctx.points)?,
                frames::TOL_FRAME,
            ));
            checks.extend(frame_nonmetricity_checks(
                &input,
                &ctx.structure,
                &frame,
                &form,
                &ctx.points,
            )?);
            checks.extend(cartan_torsion_checks(
                &input,
                &ctx.structure,
                &frame,
                &form,
                &ctx.points,
            )?);
            let frame_observer = frame.observer()?;
            let coordinate_nc = input.newton_coriolis(&ctx.structure, &frame_observer)?;
            checks.push(Check::residual(
                "frame_newton_coriolis_match",
                max_difference_scan(
                    &frame_newton_coriolis(&frame, &form),
                    &coordinate_nc,
                    &ctx.points,
                ),
                frames::TOL_FRAME,
            ));
            let (gal, rest) = decompose_gal(&form);
            checks.push(Check::residual(
                "gal_split_partition",
                gal_partition_scan(&gal, &rest, &form, &ctx.points),
                frames::TOL_GAL_SPLIT,
            ));
            checks.push(Check::residual(
                "gal_rest_encodes_nonmetricities",
                gal_rest_scan(&rest, &form, &ctx.points),
                frames::TOL_FRAME,
            ));
            held_connection = input;
            dump = Some(&held_connection);
        }
    }

    let tol_scale = options.tol_scale.unwrap_or(1.0);
    if tol_scale != 1.0 {
        for check in &mut checks {
            match check.criterion {
                Criterion::BelowTolerance => {
                    check.tolerance *= tol_scale;
                    check.passed = check.points_used > 0 && check.value < check.tolerance;
                }
                Criterion::AboveThreshold => {
                    check.tolerance /= tol_scale;
                    check.passed = check.points_used > 0 && check.value > check.tolerance;
                }
            }
        }
    }

    if let Some(path) = &options.dump_gamma {
        if let Some(connection) = dump {
            dump_gamma(connection, &ctx.points, path)?;
        }
    }

    let all = all_passed(&checks);
    Ok(Report {
        command: command.name().to_string(),
        spec: spec_path.to_string(),
        dim: spec.dim,
        sampling: spec.sampling,
        tol_scale,
        checks,
        all_passed: all,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}

/// Residual of `gal + rest = omega`.
fn gal_partition_scan(
    gal: &LocalConnectionForm,
    rest: &LocalConnectionForm,
    form: &LocalConnectionForm,
    points: &[Vec<f64>],
) -> crate::sample::ResidualScan {
    let dim = form.dim();
    let mut result = crate::sample::ResidualScan {
        max_residual: 0.0,
        points_used: 0,
        points_skipped: 0,
    };
    for a in 0..dim {
        for b in 0..dim {
            let sum = gal
                .entry(a, b)
                .add(rest.entry(a, b))
                .expect("same shape");
            result = result.merge(max_difference_scan(&sum, form.entry(a, b), points));
        }
    }
    result
}

/// Residual of the rest part against the non-metricity blocks it must
/// carry: first row `-Qhat_A`, spatial block `Q^{ab}/2`.
fn gal_rest_scan(
    rest: &LocalConnectionForm,
    form: &LocalConnectionForm,
    points: &[Vec<f64>],
) -> crate::sample::ResidualScan {
    let dim = form.dim();
    let (clock_frame, space_frame) = frame_nonmetricities(form);
    let mut result = crate::sample::ResidualScan {
        max_residual: 0.0,
        points_used: 0,
        points_skipped: 0,
    };
    for a in 0..dim {
        let expected = clock_frame[a].scale(-1.0);
        result = result.merge(max_difference_scan(rest.entry(0, a), &expected, points));
    }
    for a in 1..dim {
        for b in 1..dim {
            let expected = space_frame[a * dim + b].scale(0.5);
            result = result.merge(max_difference_scan(rest.entry(a, b), &expected, points));
        }
    }
    result
}

fn dump_gamma(
    connection: &Connection,
    points: &[Vec<f64>],
    path: &Path,
) -> Result<(), RunError> {
    let dim = connection.dim();
    let per_point: Vec<serde_json::Value> = points
        .iter()
        .map(|p| match connection.coefficient_field().evaluate_at(p) {
            Ok(values) => {
                let nested: Vec<Vec<Vec<f64>>> = (0..dim)
                    .map(|rho| {
                        (0..dim)
                            .map(|mu| {
                                (0..dim)
                                    .map(|nu| values[(rho * dim + mu) * dim + nu])
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                serde_json::json!(nested)
            }
            Err(_) => serde_json::Value::Null,
        })
        .collect();
    let payload = serde_json::json!({
        "dim": dim,
        "points": points,
        "gamma": per_point,
    });
    let text = serde_json::to_string_pretty(&payload).expect("dump serializes");
    fs::write(path, text).map_err(|source| RunError::Dump {
        path: path.display().to_string(),
        source,
    })
}
