#![allow(dead_code)]

use metastab::grid::Bounds;
use metastab::landscape::{find_critical_points, saddle_graph};
use metastab::measures::GibbsSpec;
use metastab::parse_potential;

pub const DOUBLE_WELL: &str = "(x1^2-1)^2";
pub const ASYMMETRIC_WELL: &str = "(x1^2-1)^2 + 0.05*(x1^3-3*x1)";
pub const MODEL_2D: &str = "(x1^2-1)^2 + 2*x2^2";

pub fn spec_in(src: &str, dim: usize, eps: f64, lo: f64, hi: f64) -> GibbsSpec {
    let p = parse_potential(src, dim).unwrap();
    let bx = Bounds::cube(lo, hi, dim).unwrap();
    let cps = find_critical_points(&p, &bx, None).unwrap();
    let graph = saddle_graph(&p, &cps, &bx, 128).unwrap();
    GibbsSpec::new(p, eps, bx, graph).unwrap()
}

pub fn spec(src: &str, dim: usize, eps: f64) -> GibbsSpec {
    spec_in(src, dim, eps, -2.5, 2.5)
}
