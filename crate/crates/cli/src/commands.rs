//! `analyze` and `constants`.

use std::fmt::Write as _;
use std::path::Path;

use metastab::ek::{ek_lsi, EKResult, ZSource};
use metastab::landscape::{
    check_assumptions, find_critical_points, saddle_graph, saddle_graph_from_locations, CriticalPoint, LandscapeGraph,
};
use metastab::measures::{laplace_partition, GibbsSpec};
use metastab::oracle1d::fd_spectral_gap;
use serde_json::json;

use crate::config::RunConfig;
use crate::Failure;

pub struct Landscape {
    pub critical_points: Vec<CriticalPoint>,
    pub graph: LandscapeGraph,
}

/// Critical points and saddle graph, with the sign fault applied when configured.
pub fn build_landscape(cfg: &RunConfig) -> Result<Landscape, Failure> {
    let cps = find_critical_points(&cfg.potential, &cfg.bbox, None)?;
    let mut graph = match &cfg.saddle_guesses {
        Some(guesses) => saddle_graph_from_locations(&cfg.potential, &cps, &cfg.bbox, guesses)?,
        None => saddle_graph(&cfg.potential, &cps, &cfg.bbox, cfg.saddle_grid)?,
    };
    if cfg.flip_lambda_minus {
        for s in &mut graph.saddles {
            s.hessian_eigenvalues[0] = -s.hessian_eigenvalues[0];
        }
    }
    Ok(Landscape { critical_points: cps, graph })
}

pub fn gibbs(cfg: &RunConfig, graph: &LandscapeGraph, eps: f64) -> Result<GibbsSpec, Failure> {
    Ok(GibbsSpec::new(cfg.potential.clone(), eps, cfg.bbox.clone(), graph.clone())?)
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn kind(cp: &CriticalPoint) -> String {
    match cp.morse_index {
        0 => "minimum".into(),
        1 => "saddle".into(),
        k => format!("index-{k}"),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

pub fn analyze(cfg: &RunConfig) -> Result<String, Failure> {
    let land = build_landscape(cfg)?;
    let assumptions = check_assumptions(&cfg.potential, &cfg.bbox, &cfg.epsilons)?;
    let report = json!({
        "config": cfg.path.display().to_string(),
        "potential": { "expr": cfg.source, "dim": cfg.dim, "name": cfg.potential.name },
        "box": cfg.bbox,
        "critical_points": land.critical_points,
        "graph": land.graph,
        "assumptions": assumptions,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_output(&cfg.out, "landscape.json", &(text + "\n"))?;

    let mut out = String::new();
    let g = &land.graph;
    writeln!(out, "critical points: {}", land.critical_points.len()).unwrap();
    writeln!(out, "  {:<8} {:<30} {:>14}  hessian eigenvalues", "kind", "location", "energy").unwrap();
    for cp in &land.critical_points {
        let loc = fmt_vec(&cp.location);
        writeln!(out, "  {:<8} {:<30} {:>14.6e}  {}", kind(cp), loc, cp.energy, fmt_vec(&cp.hessian_eigenvalues))
            .unwrap();
    }
    writeln!(out, "minima (ordered):").unwrap();
    for (k, m) in g.minima.iter().enumerate() {
        writeln!(out, "  m{} {} H = {:.6e}", k + 1, fmt_vec(&m.location), m.energy).unwrap();
    }
    writeln!(out, "edges: {}", g.edges.len()).unwrap();
    for e in &g.edges {
        let s = &g.saddles[e.saddle];
        writeln!(out, "  m{} - m{}  saddle {}  height {:.6e}", e.i + 1, e.j + 1, fmt_vec(&s.location), e.height).unwrap();
    }
    match g.delta_gap {
        Some(d) => writeln!(out, "delta_gap: {d:.6e}").unwrap(),
        None => writeln!(out, "delta_gap: n/a (fewer than three minima)").unwrap(),
    }
    for w in &assumptions.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    Ok(out)
}

/// One CSV row per ε; FD-oracle columns when enabled and dim ≤ 2.
pub fn constants(cfg: &RunConfig) -> Result<String, Failure> {
    let land = build_landscape(cfg)?;
    let oracle = cfg.oracle && cfg.dim <= 2;
    if cfg.oracle && !oracle {
        eprintln!("warning: the finite-difference oracle needs dim <= 2; skipped for dim {}", cfg.dim);
    }
    let mut csv = String::from(EKResult::CSV_HEADER);
    if oracle {
        csv.push_str(",fd_gap,gap_ratio");
    }
    csv.push('\n');
    for &eps in &cfg.epsilons {
        let g = gibbs(cfg, &land.graph, eps)?;
        let ek = ek_lsi(&g, &laplace_partition(&g), ZSource::Laplace)?;
        csv.push_str(&ek.csv_row());
        if oracle {
            let gap = match fd_spectral_gap(&g, cfg.grid) {
                Ok(r) => r.gap,
                Err(e) => {
                    eprintln!("warning: epsilon {eps}: {e}");
                    f64::NAN
                }
            };
            write!(csv, ",{gap:.16e},{:.16e}", gap * ek.inv_rho / eps).unwrap();
        }
        csv.push('\n');
    }
    write_output(&cfg.out, "constants.csv", &csv)?;
    Ok(csv)
}
