//! On-disk formats.
//!
//! Trajectory: the line `GENESOLTRJ 1`, one line of JSON header, then
//! little-endian f64 payload. Per node: `t`, the velocity, then the
//! deformation gradient, each component-major with the first axis fastest.
//! After the nodes come the `E` series and the cumulative dissipation.
//!
//! Measures and varifolds: JSON lines, a header line followed by one line
//! per (node, cell).

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use genesol_core::{ElasticState, Rank, TorusField, TorusGrid, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{CliError, CliResult};

pub const TRAJECTORY_MAGIC: &str = "GENESOLTRJ";
pub const FORMAT_VERSION: u32 = 1;
pub const MEASURES_FORMAT: &str = "genesol-measures";
pub const VARIFOLD_FORMAT: &str = "genesol-varifold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    pub version: u32,
    pub dim: usize,
    pub extent: Vec<usize>,
    pub period: Vec<f64>,
    pub dt: f64,
    pub nodes: usize,
    pub model_id: String,
    pub model: ModelConfig,
    pub viscosity: f64,
    pub layout: String,
}

/// Creates `path` for writing; refuses to replace an existing file unless `force`.
pub fn create_output(path: &Path, force: bool) -> CliResult<BufWriter<File>> {
    let write_err = |source| CliError::Write { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(write_err)?;
    }
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    match opts.open(path) {
        Ok(f) => Ok(BufWriter::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Exists { path: path.to_path_buf() }),
        Err(e) => Err(write_err(e)),
    }
}

pub fn open_input(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

pub fn write_trajectory<W: Write>(
    out: &mut W,
    traj: &Trajectory,
    model: &ModelConfig,
    model_id: &str,
    viscosity: f64,
) -> std::io::Result<()> {
    let grid = traj.grid();
    let header = TrajectoryHeader {
        version: FORMAT_VERSION,
        dim: grid.dim(),
        extent: grid.extent().to_vec(),
        period: (0..grid.dim()).map(|a| grid.period(a)).collect(),
        dt: traj.dt,
        nodes: traj.len(),
        model_id: model_id.to_string(),
        model: model.clone(),
        viscosity,
        layout: "component-major".into(),
    };
    writeln!(out, "{TRAJECTORY_MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "{}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
    let mut put = |x: f64| out.write_all(&x.to_le_bytes());
    for s in &traj.states {
        put(s.t)?;
        for &x in s.v.values().iter().chain(s.f.values()) {
            put(x)?;
        }
    }
    for &x in traj.energy.iter().chain(&traj.dissipation) {
        put(x)?;
    }
    out.flush()
}

/// Reads the magic line and header only.
pub fn read_trajectory_header<R: BufRead>(input: &mut R, path: &Path) -> CliResult<TrajectoryHeader> {
    let fmt = |m: String| CliError::format(path, m);
    let mut line = String::new();
    input.read_line(&mut line).map_err(|e| fmt(e.to_string()))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(TRAJECTORY_MAGIC) {
        return Err(fmt("not a trajectory file".into()));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fmt("missing format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(fmt(format!("format version {version} is not supported (expected {FORMAT_VERSION})")));
    }
    line.clear();
    input.read_line(&mut line).map_err(|e| fmt(e.to_string()))?;
    let header: TrajectoryHeader = serde_json::from_str(&line).map_err(|e| fmt(format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(fmt(format!("header version {} does not match the magic line", header.version)));
    }
    if header.nodes == 0 {
        return Err(fmt("trajectory has no nodes".into()));
    }
    if header.extent.len() != header.dim || header.period.len() != header.dim {
        return Err(fmt("extent and period must have one entry per dimension".into()));
    }
    Ok(header)
}

pub fn read_trajectory(path: &Path) -> CliResult<(TrajectoryHeader, Trajectory)> {
    let mut input = open_input(path)?;
    let header = read_trajectory_header(&mut input, path)?;
    let fmt = |m: String| CliError::format(path, m);
    let grid = TorusGrid::new(&header.extent, &header.period).map_err(|e| fmt(e.to_string()))?;
    let d = header.dim;
    let cells = grid.cells();
    let per_node = 1 + (d + d * d) * cells;
    let expected = header
        .nodes
        .checked_mul(per_node)
        .and_then(|x| x.checked_add(2 * header.nodes))
        .ok_or_else(|| fmt("header sizes overflow".into()))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| fmt(e.to_string()))?;
    if bytes.len() != 8 * expected {
        return Err(fmt(format!("payload has {} bytes, expected {}", bytes.len(), 8 * expected)));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mut states = Vec::with_capacity(header.nodes);
    for node in values[..header.nodes * per_node].chunks_exact(per_node) {
        let v = TorusField::from_values(grid, Rank::Vector, node[1..1 + d * cells].to_vec());
        let f = TorusField::from_values(grid, Rank::Matrix, node[1 + d * cells..].to_vec());
        let state = v.and_then(|v| ElasticState::new(v, f?, node[0])).map_err(|e| fmt(e.to_string()))?;
        states.push(state);
    }
    let tail = &values[header.nodes * per_node..];
    let traj = Trajectory::from_parts(states, tail[..header.nodes].to_vec(), header.dt, tail[header.nodes..].to_vec())
        .map_err(|e| fmt(e.to_string()))?;
    Ok((header, traj))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonLinesHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub extent: Vec<usize>,
    pub period: Vec<f64>,
    pub nodes: usize,
    pub source: String,
}

/// One coarse cell at one node: atoms `[s; S]` with weights, singular mass and Jensen surplus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureLine {
    pub node: usize,
    pub t: f64,
    pub cell: usize,
    pub weights: Vec<f64>,
    pub atoms: Vec<Vec<f64>>,
    pub gamma: f64,
    pub surplus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarifoldAtomLine {
    pub direction: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarifoldLine {
    pub node: usize,
    pub t: f64,
    pub cell: usize,
    pub atoms: Vec<VarifoldAtomLine>,
}

pub fn write_json_lines<W: Write, T: Serialize>(out: &mut W, header: &JsonLinesHeader, lines: &[T]) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string(header).map_err(std::io::Error::other)?)?;
    for l in lines {
        writeln!(out, "{}", serde_json::to_string(l).map_err(std::io::Error::other)?)?;
    }
    out.flush()
}

pub fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path, format: &str) -> CliResult<(JsonLinesHeader, Vec<T>)> {
    let input = open_input(path)?;
    let fmt = |m: String| CliError::format(path, m);
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| fmt("empty file".into()))?.map_err(|e| fmt(e.to_string()))?;
    let header: JsonLinesHeader = serde_json::from_str(&first).map_err(|e| fmt(format!("bad header: {e}")))?;
    if header.format != format {
        return Err(fmt(format!("expected format {format}, found {}", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(fmt(format!("format version {} is not supported (expected {FORMAT_VERSION})", header.version)));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| fmt(e.to_string()))?;
        out.push(serde_json::from_str(&line).map_err(|e| fmt(format!("line {}: {e}", i + 2)))?);
    }
    Ok((header, out))
}
