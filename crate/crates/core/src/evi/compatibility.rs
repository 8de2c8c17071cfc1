//! Pairing of a varifold's first moment with scalar probes against the
//! interface normal measure.

use crate::measure::{InterfaceData, Varifold};

use super::basis::TrigMode;

/// Constant probe followed by trigonometric probes in order of increasing
/// index, `probe_count` in total.
pub fn probe_modes(dim: usize, probe_count: usize) -> Vec<TrigMode> {
    let mut out = Vec::new();
    let mut index = 0;
    while out.len() < probe_count {
        index += 1;
        let all = TrigMode::enumerate(dim, index);
        for m in all {
            if out.len() < probe_count && !out.contains(&m) {
                out.push(m);
            }
        }
        if index > 64 {
            break;
        }
    }
    out
}

/// `max_ψ |Σ_atoms ψ mass direction − Σ_interface ψ |∇χ| vol normal|` over the probes.
pub fn compatibility_check(varifold: &Varifold, interface: Option<&InterfaceData>, probe_count: usize) -> f64 {
    let grid = varifold.grid;
    let d = grid.dim();
    let vol = grid.cell_volume();
    let mut worst: f64 = 0.0;
    for probe in probe_modes(d, probe_count.max(1)) {
        let mut acc = vec![0.0; d];
        for a in &varifold.atoms {
            let w = probe.value(&grid, &grid.center(a.cell)) * a.mass;
            for (x, e) in acc.iter_mut().zip(&a.direction) {
                *x += w * e;
            }
        }
        if let Some(iface) = interface {
            for (cell, normal, mass) in &iface.cells {
                let w = probe.value(&grid, &grid.center(*cell)) * mass * vol;
                for (x, e) in acc.iter_mut().zip(normal) {
                    *x -= w * e;
                }
            }
        }
        worst = worst.max(acc.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    worst
}
