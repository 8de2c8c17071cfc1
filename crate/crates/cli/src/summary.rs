//! Human-readable summaries and plot columns for the files a run produces.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::formats::{
    open_input, read_json_lines, read_trajectory, MeasureLine, VarifoldLine, MEASURES_FORMAT, TRAJECTORY_MAGIC,
    VARIFOLD_FORMAT,
};
use crate::pipeline::series_columns;
use crate::report::{Report, Series, REPORT_FORMAT};

/// Rows printed in human-readable tables; the columns carry every node.
const TABLE_ROWS: usize = 12;

/// Text for the terminal and tab-separated columns for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub columns: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Trajectory,
    Measures,
    Varifold,
    Report,
}

fn detect(path: &Path) -> CliResult<Kind> {
    let mut head = Vec::new();
    open_input(path)?
        .take(4096)
        .read_to_end(&mut head)
        .map_err(|e| CliError::format(path, e.to_string()))?;
    if head.is_empty() {
        return Err(CliError::format(path, "file is empty"));
    }
    if head.starts_with(TRAJECTORY_MAGIC.as_bytes()) {
        return Ok(Kind::Trajectory);
    }
    let text = String::from_utf8_lossy(&head);
    let first = text.lines().next().unwrap_or("");
    for (tag, kind) in [(MEASURES_FORMAT, Kind::Measures), (VARIFOLD_FORMAT, Kind::Varifold)] {
        if first.contains(&format!("\"format\":\"{tag}\"")) {
            return Ok(kind);
        }
    }
    if text.contains(&format!("\"format\": \"{REPORT_FORMAT}\"")) || text.contains(&format!("\"format\":\"{REPORT_FORMAT}\"")) {
        return Ok(Kind::Report);
    }
    Err(CliError::format(path, "unrecognized file (expected a trajectory, measure, varifold or report file)"))
}

fn sampled(n: usize) -> Vec<usize> {
    if n <= TABLE_ROWS {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..TABLE_ROWS).map(|k| k * (n - 1) / (TABLE_ROWS - 1)).collect();
    idx.dedup();
    idx
}

fn series_table(out: &mut String, s: &Series) {
    let _ = write!(out, "{:>12} {:>22} {:>22} {:>14}", "t", "E", "energy", "dissipation");
    if s.surplus.is_some() {
        let _ = write!(out, " {:>14}", "surplus");
    }
    out.push('\n');
    for i in sampled(s.t.len()) {
        let _ = write!(out, "{:>12.6} {:>22.15e} {:>22.15e} {:>14.6e}", s.t[i], s.energy[i], s.discrete_energy[i], s.dissipation[i]);
        if let Some(sp) = &s.surplus {
            let _ = write!(out, " {:>14.6e}", sp[i]);
        }
        out.push('\n');
    }
}

pub fn summarize(path: &Path) -> CliResult<Summary> {
    match detect(path)? {
        Kind::Trajectory => {
            let (header, traj) = read_trajectory(path)?;
            let model = header.model.build().map_err(|e| CliError::format(path, e.to_string()))?;
            let discrete = traj.discrete_energy(&model).map_err(|e| CliError::format(path, e.to_string()))?;
            let series = Series {
                t: traj.times(),
                energy: traj.energy.clone(),
                discrete_energy: discrete,
                dissipation: traj.dissipation.clone(),
                surplus: None,
            };
            let mut text = format!(
                "trajectory: {} nodes, dt {:e}, grid {:?}, model {}, viscosity {:e}\n",
                header.nodes, header.dt, header.extent, header.model_id, header.viscosity
            );
            let _ = writeln!(text, "max increase of E between nodes: {:e}", traj.max_energy_increase());
            series_table(&mut text, &series);
            Ok(Summary { text, columns: series_columns(&series) })
        }
        Kind::Measures => {
            let (header, lines) = read_json_lines::<MeasureLine>(path, MEASURES_FORMAT)?;
            let cells: usize = header.extent.iter().product();
            let vol: f64 = header.period.iter().zip(&header.extent).map(|(p, n)| p / *n as f64).product();
            let mut rows = vec![(0.0, 0usize, 0usize, 0.0, 0.0); header.nodes];
            for l in &lines {
                let r = rows.get_mut(l.node).ok_or_else(|| CliError::format(path, format!("node {} out of range", l.node)))?;
                r.0 = l.t;
                r.1 += l.atoms.len();
                r.2 = r.2.max(l.atoms.len());
                r.3 += l.gamma * vol;
                r.4 += l.surplus * vol;
            }
            let mut text = format!(
                "measures ({}): {} nodes, {} cells per node, {} lines\n",
                header.source,
                header.nodes,
                cells,
                lines.len()
            );
            let _ = writeln!(text, "{:>6} {:>12} {:>8} {:>10} {:>14} {:>14}", "node", "t", "atoms", "max/cell", "gamma", "surplus");
            for i in sampled(rows.len()) {
                let r = rows[i];
                let _ = writeln!(text, "{i:>6} {:>12.6} {:>8} {:>10} {:>14.6e} {:>14.6e}", r.0, r.1, r.2, r.3, r.4);
            }
            let mut columns = String::from("node\tt\tatoms\tgamma\tsurplus\n");
            for (i, r) in rows.iter().enumerate() {
                let _ = writeln!(columns, "{i}\t{:e}\t{}\t{:e}\t{:e}", r.0, r.1, r.3, r.4);
            }
            Ok(Summary { text, columns })
        }
        Kind::Varifold => {
            let (header, lines) = read_json_lines::<VarifoldLine>(path, VARIFOLD_FORMAT)?;
            let mut mass = vec![(0.0, 0.0, 0usize); header.nodes];
            for l in &lines {
                let r = mass.get_mut(l.node).ok_or_else(|| CliError::format(path, format!("node {} out of range", l.node)))?;
                r.0 = l.t;
                r.1 += l.atoms.iter().map(|a| a.mass).sum::<f64>();
                r.2 += l.atoms.len();
            }
            let mut text = format!("varifold: {} nodes, grid {:?}\n", header.nodes, header.extent);
            let _ = writeln!(text, "{:>6} {:>12} {:>8} {:>14}", "node", "t", "atoms", "mass");
            for i in sampled(mass.len()) {
                let r = mass[i];
                let _ = writeln!(text, "{i:>6} {:>12.6} {:>8} {:>14.6e}", r.0, r.2, r.1);
            }
            let mut columns = String::from("node\tt\tatoms\tmass\n");
            for (i, r) in mass.iter().enumerate() {
                let _ = writeln!(columns, "{i}\t{:e}\t{}\t{:e}", r.0, r.2, r.1);
            }
            Ok(Summary { text, columns })
        }
        Kind::Report => {
            let mut raw = String::new();
            open_input(path)?.read_to_string(&mut raw).map_err(|e| CliError::format(path, e.to_string()))?;
            let report: Report = serde_json::from_str(&raw).map_err(|e| CliError::format(path, e.to_string()))?;
            let mut text = format!(
                "report: model {}, grid {:?}, config {}, seed {}\n",
                report.model_id, report.grid.extent, report.config_hash, report.seed
            );
            let _ = writeln!(
                text,
                "verifier: max_violation {:e} (weight {:e}, {} rows){}",
                report.verify.max_violation,
                report.verify.weight_constant,
                report.verify.rows,
                report.verify.mvs_max_violation.map(|m| format!(", measure-valued {m:e}")).unwrap_or_default()
            );
            let _ = writeln!(text, "{:<20} {:>14} {:>14}  result", "assertion", "value", "bound");
            for a in &report.assertions {
                let _ = writeln!(
                    text,
                    "{:<20} {:>14.6e} {:>14.6e}  {}",
                    a.name,
                    a.value,
                    a.bound,
                    if a.passed { "pass" } else { "FAIL" }
                );
            }
            let _ = writeln!(text, "largest residuals:");
            for r in &report.verify.top {
                let _ = writeln!(text, "  {:e}  {} / {}  nodes {}..{}", r.max_residual, r.function, r.profile, r.s, r.t);
            }
            series_table(&mut text, &report.series);
            Ok(Summary { text, columns: series_columns(&report.series) })
        }
    }
}
