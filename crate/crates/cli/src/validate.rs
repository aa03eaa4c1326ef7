//! Invariant suites behind `validate`.
//!
//! Every check reports a margin that is non-negative exactly when it passes.
//! Inequalities use relative slack; approximate identities use tolerance
//! minus error.

use std::fmt::Write as _;

use metastab::discrete::{
    coarse_entropy_bound, rothaus_linearization, split_entropy, split_variance, tighten_defective_lsi,
    two_point_lsi_constant, weighted_lsi_merged, weighted_lsi_rhs, ComponentStats, DiscreteMeasure, GridFunction,
};
use metastab::ek::{ek_lsi, ek_pi, ZSource};
use metastab::landscape::find_critical_points;
use metastab::lyapunov::search_patch_scale;
use metastab::means::{h_p, log_mean, log_mean_bounds, upper_bound_check};
use metastab::measures::laplace_partition;
use metastab::oracle1d::{bobkov_gotze_lsi, exact_mean_difference_constant, fd_spectral_gap, muckenhoupt_pi};
use metastab::transport::{build_interpolation, matrix_opt_value, partial_gaussian, tilde_matrix_and_subdet, transport_bound};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{build_landscape, gibbs};
use crate::config::RunConfig;
use crate::Failure;

pub const SUITES: [&str; 5] = ["means", "discrete", "transport", "lyapunov", "oracle1d"];

const DRAWS: usize = 500;

#[derive(Debug, Default)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub worst: f64,
    pub worst_check: String,
    pub failures: Vec<String>,
    pub skipped: Option<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport { name, worst: f64::INFINITY, ..Default::default() }
    }

    fn record(&mut self, check: &str, margin: f64) {
        self.checks += 1;
        // NaN counts as a failure and as the worst margin.
        if !self.worst.is_nan() && (margin.is_nan() || margin < self.worst) {
            self.worst = margin;
            self.worst_check = check.to_string();
        }
        if !(margin >= 0.0) {
            if self.failures.len() < 20 {
                self.failures.push(format!("{check}: margin {margin:.3e}"));
            } else if self.failures.len() == 20 {
                self.failures.push("further failures omitted".into());
            }
        }
    }

    /// `lhs ≤ rhs` up to a relative slack of `tol`.
    fn at_most(&mut self, check: &str, lhs: f64, rhs: f64, tol: f64) {
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        self.record(check, (rhs - lhs) / scale + tol);
    }

    /// `|a − b| ≤ tol·max(1, |b|)`.
    fn close(&mut self, check: &str, a: f64, b: f64, tol: f64) {
        self.record(check, tol * b.abs().max(1.0) - (a - b).abs());
    }

    /// A check with no meaningful margin.
    fn holds(&mut self, check: &str, ok: bool) {
        if ok {
            self.checks += 1;
        } else {
            self.fail(check, "does not hold");
        }
    }

    fn fail(&mut self, check: &str, err: impl std::fmt::Display) {
        self.checks += 1;
        self.worst = f64::NAN;
        self.worst_check = check.to_string();
        self.failures.push(format!("{check}: {err}"));
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn rng_for(seed: u64, suite: &str) -> ChaCha8Rng {
    let salt = SUITES.iter().position(|s| *s == suite).unwrap_or(0) as u64;
    ChaCha8Rng::seed_from_u64(seed ^ (salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let w: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-6f64..1.0).ln()).collect();
    DiscreteMeasure::from_masses(&w).expect("positive masses")
}

fn means_suite(seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("means");
    let mut rng = rng_for(seed, "means");
    for _ in 0..DRAWS {
        let a = rng.gen_range(-8.0f64..8.0).exp();
        let b = rng.gen_range(-8.0f64..8.0).exp();
        let Ok((geo, lm, ari)) = log_mean_bounds(a, b) else {
            r.fail("log_mean_bounds", format!("rejected ({a}, {b})"));
            continue;
        };
        r.at_most("geometric <= logarithmic", geo, lm, 1e-14);
        r.at_most("logarithmic <= arithmetic", lm, ari, 1e-14);
        let swapped = log_mean(b, a).unwrap_or(f64::NAN);
        r.close("symmetry", swapped / lm, 1.0, 1e-15);
        let t = rng.gen_range(-4.0f64..4.0).exp();
        let scaled = log_mean(t * a, t * b).unwrap_or(f64::NAN);
        r.close("homogeneity", scaled / (t * lm), 1.0, 1e-12);

        let p = rng.gen_range(0.01f64..0.99);
        match upper_bound_check(p) {
            Ok(ok) => r.holds("two-point upper bound", ok),
            Err(e) => r.fail("two-point upper bound", e),
        }
        let q = rng.gen_range(0.01f64..0.99);
        match (h_p(p, q), h_p(p, 1.0 - p)) {
            (Ok(h), Ok(h_min)) => r.at_most("h_p minimal at 1-p", h_min, h, 1e-9),
            (Err(e), _) | (_, Err(e)) => r.fail("h_p", e),
        }
    }
    r
}

fn discrete_suite(seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("discrete");
    let mut rng = rng_for(seed, "discrete");
    for _ in 0..DRAWS {
        let n = rng.gen_range(2..=6);
        let z = simplex(&mut rng, n);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0f64..3.0)).collect();
        match (weighted_lsi_rhs(&z, &f), weighted_lsi_merged(&z, &f)) {
            (Ok((lhs, rhs)), Ok(merged)) => {
                r.at_most("weighted LSI: entropy <= merged", lhs, merged, 1e-12);
                r.at_most("weighted LSI: merged <= pairwise", merged, rhs, 1e-12);
            }
            (Err(e), _) | (_, Err(e)) => r.fail("weighted LSI", e),
        }

        let z2 = simplex(&mut rng, 2);
        let f2 = [rng.gen_range(0.0f64..3.0), rng.gen_range(0.0f64..3.0)];
        match (weighted_lsi_rhs(&z2, &f2), two_point_lsi_constant(z2.weights()[1])) {
            (Ok((_, rhs)), Ok(c)) => r.close("two-point constant", rhs, c * (f2[0] - f2[1]).powi(2), 1e-12),
            (Err(e), _) | (_, Err(e)) => r.fail("two-point constant", e),
        }

        let components = rng.gen_range(2..=4);
        let nodes = rng.gen_range(components..=24);
        let gf = GridFunction {
            values: (0..nodes).map(|_| rng.gen_range(0.05f64..3.0)).collect(),
            masses: (0..nodes).map(|_| rng.gen_range(0.01f64..1.0)).collect(),
            labels: (0..nodes).map(|k| if k < components { k } else { rng.gen_range(0..components) }).collect(),
            components,
        };
        match gf.measure().and_then(|z| gf.stats().map(|s| (z, s))) {
            Ok((zm, s)) => {
                for (name, split) in
                    [("variance split", split_variance(&zm, &s, Some(&gf))), ("entropy split", split_entropy(&zm, &s, Some(&gf)))]
                {
                    match split {
                        Ok(sp) => r.close(name, sp.total, sp.direct.unwrap_or(f64::NAN), 1e-10),
                        Err(e) => r.fail(name, e),
                    }
                }
                let stats = ComponentStats { local_entropy: vec![0.0; components], ..s };
                match coarse_entropy_bound(&zm, &stats) {
                    Ok((lhs, rhs)) => r.at_most("coarse entropy estimate", lhs, rhs, 1e-12),
                    Err(e) => r.fail("coarse entropy estimate", e),
                }
            }
            Err(e) => r.fail("grid function", e),
        }

        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0f64..3.0)).collect();
        match rothaus_linearization(&z, &g, (1e-3, 5e-4)) {
            Ok((var, lim)) => r.close("Rothaus limit", lim, var, 1e-4),
            Err(e) => r.fail("Rothaus limit", e),
        }

        let (ad, b, rho) = (rng.gen_range(0.1f64..10.0), rng.gen_range(0.0f64..5.0), rng.gen_range(0.1f64..10.0));
        match tighten_defective_lsi(ad, b, rho) {
            Ok(alpha) => r.at_most("defective LSI tightening", alpha, ad, 1e-15),
            Err(e) => r.fail("defective LSI tightening", e),
        }
    }
    r
}

fn spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0f64..1.0));
    g.transpose() * &g + DMatrix::identity(n, n) * shift
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
        if v.norm_squared() > 1e-2 {
            return v.normalize();
        }
    }
}

fn transport_suite(cfg: &RunConfig, seed: u64) -> Result<SuiteReport, Failure> {
    let mut r = SuiteReport::new("transport");
    let mut rng = rng_for(seed, "transport");
    for _ in 0..50 {
        let a = spd(&mut rng, 3, 0.3);
        let eta = unit(&mut rng, 3);
        let z = DVector::from_fn(3, |_, _| rng.gen_range(-1.0f64..1.0));
        let z_perp = &z - &eta * z.dot(&eta);
        match partial_gaussian(&a, &eta, &z_perp) {
            Ok((closed, quad)) => r.close("partial Gaussian integral", quad / closed, 1.0, 1e-8),
            Err(e) => r.fail("partial Gaussian integral", e),
        }

        let n = rng.gen_range(2..=5);
        let a = spd(&mut rng, n, 0.2);
        let eta = unit(&mut rng, n);
        match tilde_matrix_and_subdet(&a, &eta) {
            Ok(rep) => {
                let det = a.clone().lu().determinant();
                r.record("subdeterminant identity", 1e-10 - rep.residual / det);
            }
            Err(e) => r.fail("subdeterminant identity", e),
        }

        let b = spd(&mut rng, 3, 0.3);
        match matrix_opt_value(&b, None) {
            Ok(rep) => {
                let expect = b.clone().lu().determinant().sqrt();
                r.close("matrix optimization", rep.numeric_value / expect, 1.0, 1e-6);
            }
            Err(e) => r.fail("matrix optimization", e),
        }
    }

    let land = build_landscape(cfg)?;
    let eps_min = cfg.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    for &eps in &cfg.epsilons {
        let g = match gibbs(cfg, &land.graph, eps) {
            Ok(g) => g,
            Err(e) => {
                r.fail(&format!("Gibbs measure at epsilon {eps}"), e);
                continue;
            }
        };
        for e in &land.graph.edges {
            let name = format!("interpolation m{}-m{} at epsilon {eps}", e.i + 1, e.j + 1);
            match build_interpolation(&g, e.i, e.j) {
                Ok(it) => {
                    let worst = it.tangents.iter().map(|t| (t.norm() - 1.0).abs()).fold(0.0, f64::max);
                    r.record(&format!("{name}: unit tangents"), 1e-6 - worst);
                    if it.c_gamma.is_finite() {
                        r.at_most(&format!("{name}: tube radius"), it.curvature_threshold(), it.c_gamma, 0.0);
                    }
                }
                Err(err) => r.fail(&name, err),
            }
            if cfg.dim == 1 && eps == eps_min {
                let name = format!("mean-difference bound m{}-m{} at epsilon {eps}", e.i + 1, e.j + 1);
                match (exact_mean_difference_constant(&g, e.i, e.j, cfg.grid), transport_bound(&g, e.i, e.j)) {
                    (Ok(c), Ok(bound)) => r.at_most(&name, c, 1.05 * bound, 0.0),
                    (Err(err), _) | (_, Err(err)) => r.fail(&name, err),
                }
            }
        }
    }
    Ok(r)
}

fn lyapunov_suite(cfg: &RunConfig) -> Result<SuiteReport, Failure> {
    let mut r = SuiteReport::new("lyapunov");
    if cfg.dim > 2 {
        r.skipped = Some(format!("drift verification needs dim <= 2, got {}", cfg.dim));
        return Ok(r);
    }
    let cps = find_critical_points(&cfg.potential, &cfg.bbox, None)?;
    let res = if cfg.dim == 1 { cfg.grid } else { cfg.grid.min(128) };
    for &eps in &cfg.epsilons {
        let name = format!("drift condition at epsilon {eps}");
        match search_patch_scale(&cfg.potential, &cps, eps, None, cfg.lyapunov_a, &cfg.bbox, res) {
            Ok((_, rep)) => {
                r.holds(&format!("{name}: region outside the balls is non-empty"), rep.lambda0 > 0.0);
                r.holds(&format!("{name}: b0 finite"), rep.b0.is_finite());
                r.record(&format!("{name}: lambda0/epsilon"), rep.lambda());
            }
            Err(e) => r.fail(&name, e),
        }
    }
    Ok(r)
}

fn oracle_suite(cfg: &RunConfig) -> Result<SuiteReport, Failure> {
    let mut r = SuiteReport::new("oracle1d");
    if !cfg.oracle {
        r.skipped = Some("oracle disabled".into());
        return Ok(r);
    }
    if cfg.dim > 2 {
        r.skipped = Some(format!("finite-difference oracle needs dim <= 2, got {}", cfg.dim));
        return Ok(r);
    }
    let land = build_landscape(cfg)?;
    for &eps in &cfg.epsilons {
        let g = match gibbs(cfg, &land.graph, eps) {
            Ok(g) => g,
            Err(e) => {
                r.fail(&format!("Gibbs measure at epsilon {eps}"), e);
                continue;
            }
        };
        let pd = laplace_partition(&g);
        let (ek, lsi) = match (ek_pi(&g, &pd, ZSource::Laplace), ek_lsi(&g, &pd, ZSource::Laplace)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                r.fail(&format!("Eyring-Kramers at epsilon {eps}"), e);
                continue;
            }
        };
        let gap = match fd_spectral_gap(&g, cfg.grid) {
            Ok(gr) => gr.gap,
            Err(e) => {
                r.fail(&format!("spectral gap at epsilon {eps}"), e);
                continue;
            }
        };
        let ratio = gap * ek.inv_rho / eps;
        r.record(&format!("EK/oracle gap ratio at epsilon {eps}"), 0.5 - (ratio - 1.0).abs());
        if cfg.dim == 1 {
            let inv_rho = eps / gap;
            match muckenhoupt_pi(&g) {
                Ok(mk) => {
                    let (lo, hi) = mk.best();
                    r.at_most(&format!("Muckenhoupt lower at epsilon {eps}"), lo, inv_rho, 1e-9);
                    r.at_most(&format!("Muckenhoupt upper at epsilon {eps}"), inv_rho, hi, 1e-9);
                }
                Err(e) => r.fail(&format!("Muckenhoupt at epsilon {eps}"), e),
            }
            match bobkov_gotze_lsi(&g) {
                Ok(bg) => {
                    r.at_most(&format!("Bobkov-Goetze upper vs 2/rho at epsilon {eps}"), 2.0 * inv_rho, bg.upper, 1e-9);
                    r.at_most(&format!("Bobkov-Goetze lower vs EK at epsilon {eps}"), bg.lower, lsi.inv_alpha_times2, 0.0);
                    r.at_most(&format!("Bobkov-Goetze upper vs EK at epsilon {eps}"), lsi.inv_alpha_times2, bg.upper, 0.0);
                }
                Err(e) => r.fail(&format!("Bobkov-Goetze at epsilon {eps}"), e),
            }
        }
    }
    Ok(r)
}

/// Runs the selected suites; `filter` restricts to one suite by name.
pub fn run(cfg: &RunConfig, filter: Option<&str>) -> Result<Vec<SuiteReport>, Failure> {
    let mut out = Vec::new();
    for name in SUITES {
        if filter.is_some_and(|f| f != name) {
            continue;
        }
        out.push(match name {
            "means" => means_suite(cfg.seed),
            "discrete" => discrete_suite(cfg.seed),
            "transport" => transport_suite(cfg, cfg.seed)?,
            "lyapunov" => lyapunov_suite(cfg)?,
            _ => oracle_suite(cfg)?,
        });
    }
    Ok(out)
}

pub fn summary(reports: &[SuiteReport]) -> String {
    let mut s = String::new();
    writeln!(s, "{:<10} {:>7} {:>7} {:>8} {:>12}  worst check", "suite", "status", "checks", "failed", "worst margin")
        .unwrap();
    for r in reports {
        if let Some(why) = &r.skipped {
            writeln!(s, "{:<10} {:>7} {:>7} {:>8} {:>12}  {why}", r.name, "SKIP", 0, 0, "-").unwrap();
            continue;
        }
        let status = if r.passed() { "PASS" } else { "FAIL" };
        let failed = r.failures.iter().filter(|f| !f.starts_with("further")).count();
        writeln!(s, "{:<10} {:>7} {:>7} {:>8} {:>12.3e}  {}", r.name, status, r.checks, failed, r.worst, r.worst_check)
            .unwrap();
    }
    for r in reports.iter().filter(|r| !r.passed()) {
        for f in &r.failures {
            writeln!(s, "  {}: {f}", r.name).unwrap();
        }
    }
    s
}
