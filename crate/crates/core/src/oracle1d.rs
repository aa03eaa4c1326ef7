//! Numerical oracles that do not use any asymptotics: a finite-difference
//! spectral gap, the Muckenhoupt and Bobkov–Götze functionals, the sharp
//! one-dimensional mean-difference constant, the explicit LSI test function
//! and an Euler–Maruyama sampler.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::landscape::{label_grid, BasinLabels};
use crate::linalg::sym_eigen;
use crate::means::log_mean;
use crate::measures::{gibbs_grid, GibbsSpec};

/// Relative change of the Rayleigh quotient at which inverse iteration stops.
pub const EIGEN_TOL: f64 = 1e-10;
/// Largest relative change of the gap under 2× refinement.
pub const REFINEMENT_TOL: f64 = 0.05;
const CG_TOL: f64 = 1e-13;
const CG_MAX_ITER: usize = 200_000;

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Finite-volume discretization of the Dirichlet form `ε∫|∇f|²dμ` with
/// zero-flux boundary, stored in the symmetrized variable `u = √m · f`.
///
/// Edge conductances are `ε√(m_k m_l)/h²`, so the symmetrized operator only
/// involves differences of log-weights and never under- or overflows.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub grid: Grid,
    pub epsilon: f64,
    /// `−(H − H(m₁))/ε` per node, shifted so that the maximum is 0.
    pub log_weight: Vec<f64>,
    diag: Vec<f64>,
    /// Unit null vector `√m`.
    null: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn new(g: &GibbsSpec, grid_resolution: usize) -> Result<Self> {
        Self::from_grid(g, Grid::new(g.bbox.clone(), grid_resolution))
    }

    pub fn from_grid(g: &GibbsSpec, grid: Grid) -> Result<Self> {
        if grid.n < 3 {
            return Err(Error::GridTooCoarse(f64::NAN));
        }
        let mut lw: Vec<f64> = (0..grid.len()).map(|k| g.log_density(&grid.point(k))).collect();
        let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::NonFinite);
        }
        for v in &mut lw {
            *v = (*v - top).max(-1400.0);
        }
        let mut gm = GeneratorMatrix { grid, epsilon: g.epsilon, log_weight: lw, diag: Vec::new(), null: Vec::new() };
        let mut diag = vec![0.0; gm.grid.len()];
        gm.for_each_edge(|k, l, kappa| {
            let d = 0.5 * (gm.log_weight[l] - gm.log_weight[k]);
            diag[k] += kappa * d.exp();
            diag[l] += kappa * (-d).exp();
        });
        let mut null: Vec<f64> = gm.log_weight.iter().map(|v| (0.5 * v).exp()).collect();
        let norm = dot(&null, &null).sqrt();
        null.iter_mut().for_each(|v| *v /= norm);
        gm.diag = diag;
        gm.null = null;
        Ok(gm)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        let n = self.grid.n;
        let mut stride = 1;
        for a in 0..self.grid.dim() {
            let kappa = self.epsilon / (self.grid.h[a] * self.grid.h[a]);
            for k in 0..self.len() {
                if (k / stride) % n + 1 < n {
                    f(k, k + stride, kappa);
                }
            }
            stride *= n;
        }
    }

    /// Normalized node masses m_k.
    pub fn masses(&self) -> Vec<f64> {
        let w: Vec<f64> = self.log_weight.iter().map(|v| v.exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (o, (d, x)) in out.iter_mut().zip(self.diag.iter().zip(u)) {
            *o = d * x;
        }
        self.for_each_edge(|k, l, kappa| {
            out[k] -= kappa * u[l];
            out[l] -= kappa * u[k];
        });
    }

    /// `uᵀSu` summed edge by edge, free of global cancellation.
    fn energy_u(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_edge(|k, l, kappa| {
            let q = 0.25 * (self.log_weight[l] - self.log_weight[k]);
            let t = u[k] * q.exp() - u[l] * (-q).exp();
            acc += kappa * t * t;
        });
        acc
    }

    fn deflate(&self, u: &mut [f64]) {
        let c = dot(u, &self.null);
        axpy(-c, &self.null, u);
    }

    /// Discrete `ε∫|∇f|²dμ`.
    pub fn dirichlet(&self, f: &[f64]) -> f64 {
        let m = self.masses();
        let mut acc = 0.0;
        self.for_each_edge(|k, l, kappa| {
            let d = f[k] - f[l];
            acc += kappa * (m[k] * m[l]).sqrt() * d * d;
        });
        acc
    }

    /// Discrete Var_μ(f).
    pub fn variance(&self, f: &[f64]) -> f64 {
        let m = self.masses();
        let mean = dot(&m, f);
        m.iter().zip(f).map(|(w, v)| w * (v - mean) * (v - mean)).sum()
    }

    /// Solves `S x = b` for `b ⊥ √m` by conjugate gradients in the complement.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let bn = dot(b, b).sqrt();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut sp = vec![0.0; n];
        let mut rs = dot(&r, &r);
        for _ in 0..CG_MAX_ITER {
            if rs.sqrt() <= CG_TOL * bn {
                return Ok(x);
            }
            self.apply(&p, &mut sp);
            let alpha = rs / dot(&p, &sp);
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &sp, &mut r);
            self.deflate(&mut r);
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            rs = rs_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
        }
        if rs.sqrt() <= 1e-8 * bn {
            Ok(x)
        } else {
            Err(Error::EigensolveFailed(format!("CG stalled at relative residual {:.3e}", rs.sqrt() / bn)))
        }
    }

    /// Smallest nonzero eigenvalue of −L on the grid by inverse iteration
    /// orthogonal to constants; returns `(λ, eigenvector f, residual)`.
    pub fn smallest_nonzero(&self) -> Result<(f64, Vec<f64>, f64)> {
        let m = self.masses();
        let x0: Vec<f64> = (0..self.len()).map(|k| self.grid.point(k)[0]).collect();
        let mean = dot(&m, &x0);
        let mut v: Vec<f64> = x0.iter().zip(&self.null).map(|(x, s)| (x - mean) * s).collect();
        self.deflate(&mut v);
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lambda = self.energy_u(&v);
        for _ in 0..100 {
            let mut w = self.solve(&v)?;
            self.deflate(&mut w);
            let nw = dot(&w, &w).sqrt();
            if !(nw > 0.0 && nw.is_finite()) {
                return Err(Error::EigensolveFailed("inverse iteration broke down".into()));
            }
            w.iter_mut().for_each(|x| *x /= nw);
            let next = self.energy_u(&w);
            v = w;
            let done = (next - lambda).abs() <= EIGEN_TOL * next;
            lambda = next;
            if done {
                let mut sv = vec![0.0; self.len()];
                self.apply(&v, &mut sv);
                axpy(-lambda, &v, &mut sv);
                let f = v.iter().zip(&self.null).map(|(u, s)| if *s > 0.0 { u / s } else { 0.0 }).collect();
                return Ok((lambda, f, dot(&sv, &sv).sqrt()));
            }
        }
        Err(Error::EigensolveFailed("inverse iteration did not converge".into()))
    }
}

/// Spectral gap estimate with its refinement check.
#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub gap: f64,
    /// Gap on the grid with half as many cells per axis.
    pub gap_coarse: f64,
    pub refinement_ratio: f64,
    /// ‖Su − λu‖ for the unit eigenvector.
    pub residual: f64,
}

/// Smallest nonzero eigenvalue of −L = −(εΔ − ∇H·∇) on the analysis box with
/// reflecting boundary (dim ≤ 2).
pub fn fd_spectral_gap(g: &GibbsSpec, grid_resolution: usize) -> Result<GapResult> {
    if g.dim() > 2 {
        return Err(Error::Invalid("finite differences need dim ≤ 2".into()));
    }
    let (gap, _, residual) = GeneratorMatrix::new(g, grid_resolution)?.smallest_nonzero()?;
    let (gap_coarse, _, _) = GeneratorMatrix::new(g, grid_resolution / 2)?.smallest_nonzero()?;
    let change = (gap - gap_coarse).abs() / gap;
    if change > REFINEMENT_TOL {
        return Err(Error::GridTooCoarse(change));
    }
    Ok(GapResult { gap, gap_coarse, refinement_ratio: gap_coarse / gap, residual })
}

/// Cell-centred log-density of μ on a 1D grid, normalized to `∫ p dx = 1`.
struct LogDensity1d {
    grid: Grid,
    log_p: Vec<f64>,
}

impl LogDensity1d {
    fn new(g: &GibbsSpec, n: usize) -> Result<Self> {
        if g.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: g.dim() });
        }
        let grid = Grid::new(g.bbox.clone(), n);
        let lw: Vec<f64> = (0..n).map(|k| g.log_density(&[grid.coord(0, k)])).collect();
        let log_h = grid.h[0].ln();
        let log_z = lw.iter().fold(f64::NEG_INFINITY, |a, &b| log_sum_exp(a, b)) + log_h;
        Ok(LogDensity1d { log_p: lw.iter().map(|v| v - log_z).collect(), grid })
    }

    fn split_index(&self, x: f64) -> usize {
        (0..self.grid.n).find(|&k| self.grid.coord(0, k) > x).unwrap_or(self.grid.n)
    }

    /// μ-median.
    fn median(&self) -> f64 {
        let h = self.grid.h[0];
        let mut acc = 0.0;
        for k in 0..self.grid.n {
            let w = self.log_p[k].exp() * h;
            if acc + w >= 0.5 {
                return self.grid.bounds.lo[0] + (k as f64 + (0.5 - acc) / w) * h;
            }
            acc += w;
        }
        self.grid.bounds.hi[0]
    }

    /// `sup_x T(x)·ψ(log T(x))·∫_split^x 1/p` over the cells in `order`, which
    /// runs outward from the split; T is the μ-mass beyond x.
    fn hardy_sup(&self, order: &[usize], psi: impl Fn(f64) -> f64) -> f64 {
        let log_h = self.grid.h[0].ln();
        let mut log_tail = vec![f64::NEG_INFINITY; order.len()];
        let mut acc = f64::NEG_INFINITY;
        for (i, &k) in order.iter().enumerate().rev() {
            acc = log_sum_exp(acc, self.log_p[k] + log_h);
            log_tail[i] = acc;
        }
        let mut log_f = f64::NEG_INFINITY;
        let mut best: f64 = 0.0;
        for (i, &k) in order.iter().enumerate() {
            log_f = log_sum_exp(log_f, -self.log_p[k] + log_h);
            let lt = log_tail[i].min(0.0);
            best = best.max((lt + log_f).exp() * psi(lt));
        }
        best
    }

    fn mass_below(&self, idx: usize) -> f64 {
        let h = self.grid.h[0];
        self.log_p[..idx].iter().map(|v| v.exp() * h).sum()
    }

    fn sides(&self, split: f64) -> (Vec<usize>, Vec<usize>, f64) {
        let idx = self.split_index(split);
        let right: Vec<usize> = (idx..self.grid.n).collect();
        let left: Vec<usize> = (0..idx).rev().collect();
        (right, left, self.mass_below(idx))
    }
}

/// Hardy-type functionals for one split point.
#[derive(Debug, Clone, PartialEq)]
pub struct HardySandwich {
    pub split: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    pub lower: f64,
    pub upper: f64,
}

impl HardySandwich {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn midpoint(&self) -> f64 {
        (self.lower * self.upper).sqrt()
    }
}

/// Muckenhoupt sandwich for the optimal constant C in `Var_μ(f) ≤ C∫|f′|²dμ`,
/// i.e. for 1/ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct MuckenhouptResult {
    pub saddle_split: Option<HardySandwich>,
    pub median_split: HardySandwich,
}

impl MuckenhouptResult {
    /// Intersection of the available sandwiches.
    pub fn best(&self) -> (f64, f64) {
        let mut lo = self.median_split.lower;
        let mut hi = self.median_split.upper;
        if let Some(s) = &self.saddle_split {
            lo = lo.max(s.lower);
            hi = hi.min(s.upper);
        }
        (lo, hi)
    }
}

/// Default number of cells for the 1D Hardy functionals.
pub const HARDY_CELLS: usize = 1 << 15;

/// With `B₊ = sup_{x>m} μ([x,∞))∫_m^x 1/p` and `B₋` its mirror,
/// `max(μ(<m)B₊, μ(>m)B₋) ≤ C ≤ 4 max(B₊, B₋)` for every split m.
pub fn muckenhoupt_pi(g: &GibbsSpec) -> Result<MuckenhouptResult> {
    let ld = LogDensity1d::new(g, HARDY_CELLS)?;
    let at = |split: f64| {
        let (right, left, below) = ld.sides(split);
        let bp = ld.hardy_sup(&right, |_| 1.0);
        let bm = ld.hardy_sup(&left, |_| 1.0);
        HardySandwich { split, b_plus: bp, b_minus: bm, lower: (below * bp).max((1.0 - below) * bm), upper: 4.0 * bp.max(bm) }
    };
    let saddle_split = g.graph.saddle(0, 1).map(|s| at(s.location[0]));
    Ok(MuckenhouptResult { saddle_split, median_split: at(ld.median()) })
}

/// Bobkov–Götze sandwich for the optimal C in `Ent_μ(f²) ≤ C∫|f′|²dμ`,
/// i.e. for 2/α, split at the median:
/// `max(D₊, D₋)/150 ≤ C ≤ 468 max(D₊, D₋)` with
/// `D₊ = sup_{x>m} μ([x,∞)) log(1/μ([x,∞))) ∫_m^x 1/p`.
pub fn bobkov_gotze_lsi(g: &GibbsSpec) -> Result<HardySandwich> {
    let ld = LogDensity1d::new(g, HARDY_CELLS)?;
    let split = ld.median();
    let (right, left, _) = ld.sides(split);
    let phi = |lt: f64| -lt;
    let bp = ld.hardy_sup(&right, phi);
    let bm = ld.hardy_sup(&left, phi);
    let d = bp.max(bm);
    Ok(HardySandwich { split, b_plus: bp, b_minus: bm, lower: d / 150.0, upper: 468.0 * d })
}

fn cdf_difference_integral(g: &GibbsSpec, i: usize, j: usize, n: usize) -> Result<f64> {
    let gg = gibbs_grid(g, n)?;
    let h = gg.grid().h[0];
    let z = gg.basin_weights(g.graph.minima.len());
    let (zi, zj) = (z[i], z[j]);
    if !(zi > 0.0 && zj > 0.0) {
        return Err(Error::QuadratureUnderResolved(f64::INFINITY));
    }
    let len = gg.mass.len();
    let part = |k: usize, b: usize, zb: f64| if gg.labels.labels[k] == b { gg.mass[k] / zb } else { 0.0 };
    // Forward and backward cumulative masses at cell centres avoid cancellation near 1.
    let mut fwd = vec![(0.0, 0.0); len];
    let mut acc = (0.0, 0.0);
    for k in 0..len {
        let (a, b) = (part(k, i, zi), part(k, j, zj));
        fwd[k] = (acc.0 + 0.5 * a, acc.1 + 0.5 * b);
        acc = (acc.0 + a, acc.1 + b);
    }
    let mut total = 0.0;
    let mut back = (0.0, 0.0);
    for k in (0..len).rev() {
        let (a, b) = (part(k, i, zi), part(k, j, zj));
        let bk = (back.0 + 0.5 * a, back.1 + 0.5 * b);
        back = (back.0 + a, back.1 + b);
        let d = if fwd[k].0 + fwd[k].1 <= bk.0 + bk.1 { fwd[k].0 - fwd[k].1 } else { bk.1 - bk.0 };
        if d != 0.0 {
            // p = mass/h, so d²/p · h = d² h² / mass.
            total += (2.0 * d.abs().ln() + 2.0 * h.ln() - gg.mass[k].ln()).exp();
        }
    }
    Ok(total)
}

/// Sharp constant C* in `(E_{μ_i}f − E_{μ_j}f)² ≤ C*∫|f′|²dμ` in 1D:
/// `C* = ∫ (G_i − G_j)²/p dx` with G_k the CDF of μ_k and p the density of μ.
pub fn exact_mean_difference_constant(g: &GibbsSpec, i: usize, j: usize, grid_resolution: usize) -> Result<f64> {
    if g.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: g.dim() });
    }
    let m = g.graph.minima.len();
    if i >= m || j >= m {
        return Err(Error::Invalid(format!("minimum index out of range: ({i}, {j})")));
    }
    if i == j {
        return Ok(0.0);
    }
    let fine = cdf_difference_integral(g, i, j, grid_resolution)?;
    let coarse = cdf_difference_integral(g, i, j, grid_resolution / 2)?;
    let err = (fine - coarse).abs() / 3.0 / fine;
    if err > crate::measures::QUADRATURE_RTOL {
        return Err(Error::QuadratureUnderResolved(err));
    }
    Ok(fine)
}

/// Rayleigh quotient data for the explicit LSI test function.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionReport {
    pub tau: f64,
    /// Ent_μ(g²) with ∫g²dμ = 1.
    pub entropy: f64,
    /// ∫(g′)²dμ.
    pub dirichlet: f64,
    /// dirichlet / entropy, an upper bound for the LSI rate.
    pub ratio: f64,
    /// `τ log(τ/Z₁) + (1−τ) log((1−τ)/Z₂)`.
    pub entropy_display: f64,
    /// `(√(τ/Z₁) − √((1−τ)/Z₂))² · √(2πε)/Z_μ · √|H″(s)|/(2πε) · e^{−(H(s)−H(m₁))/ε}`.
    pub dirichlet_display: f64,
    /// `Λ(Z₁,Z₂)/(Z₁Z₂) · √(2πε)/Z_μ · √|H″(s)|/(2πε) · e^{−(H(s)−H(m₁))/ε}`.
    pub ek_lsi_bound: f64,
}

/// Offset applied to τ = Z₂ when Z₁ ≈ Z₂, where g would be constant.
pub const TAU_OFFSET: f64 = 1e-3;

/// Builds `g = a + (b − a)Φ((x − s)/√(σε))` with σ = 1/|H″(s)|,
/// `a² ∝ τ/Z₁`, `b² ∝ (1−τ)/Z₂` and evaluates its LSI Rayleigh quotient by
/// quadrature on `grid_resolution` cells. The default τ is Z₂.
pub fn optimal_test_function(g: &GibbsSpec, tau: Option<f64>, grid_resolution: usize) -> Result<TestFunctionReport> {
    if g.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: g.dim() });
    }
    if g.graph.minima.len() != 2 {
        return Err(Error::NotTwoWells(g.graph.minima.len()));
    }
    let s = g.graph.saddle(0, 1).ok_or(Error::MissingSaddle(0, 1))?;
    let eps = g.epsilon;
    let gg = gibbs_grid(g, grid_resolution)?;
    let z = gg.basin_weights(2);
    // Orient so that label 0 sits left of the saddle.
    let left0 = g.graph.minima[0].location[0] < s.location[0];
    let (z1, z2) = (z[0], z[1]);
    let tau = tau.unwrap_or(if (z1 - z2).abs() < TAU_OFFSET { z2 + TAU_OFFSET } else { z2 });
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::OutOfRange(tau));
    }
    let g1 = (tau / z1).sqrt();
    let g2 = ((1.0 - tau) / z2).sqrt();
    let (a, b) = if left0 { (g1, g2) } else { (g2, g1) };
    let curvature = s.hessian_eigenvalues[0].abs();
    let width = (eps / curvature).sqrt();
    let sx = s.location[0];
    let grid = gg.grid();
    let mut vals = Vec::with_capacity(gg.mass.len());
    let mut ders = Vec::with_capacity(gg.mass.len());
    for k in 0..gg.mass.len() {
        let t = (grid.coord(0, k) - sx) / width;
        vals.push(a + (b - a) * 0.5 * erfc(-t / std::f64::consts::SQRT_2));
        ders.push((b - a) * (-0.5 * t * t).exp() / ((2.0 * std::f64::consts::PI).sqrt() * width));
    }
    let norm: f64 = gg.mass.iter().zip(&vals).map(|(m, v)| m * v * v).sum();
    let entropy: f64 = gg
        .mass
        .iter()
        .zip(&vals)
        .map(|(m, v)| {
            let q = v * v / norm;
            if q > 0.0 {
                m * q * q.ln()
            } else {
                0.0
            }
        })
        .sum();
    let dirichlet: f64 = gg.mass.iter().zip(&ders).map(|(m, d)| m * d * d).sum::<f64>() / norm;
    let two_pi_eps = 2.0 * std::f64::consts::PI * eps;
    let barrier = two_pi_eps.sqrt() / gg.z_mu * curvature.sqrt() / two_pi_eps * (-(s.energy - g.energy_ref()) / eps).exp();
    Ok(TestFunctionReport {
        tau,
        entropy,
        dirichlet,
        ratio: dirichlet / entropy,
        entropy_display: tau * (tau / z1).ln() + (1.0 - tau) * ((1.0 - tau) / z2).ln(),
        dirichlet_display: (g1 - g2).powi(2) * barrier,
        ek_lsi_bound: log_mean(z1, z2)? / (z1 * z2) * barrier,
    })
}

/// Euler–Maruyama run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LangevinConfig {
    pub dt: f64,
    pub n_steps: u64,
    pub seed: u64,
    pub start: Vec<f64>,
    /// Noise temperature; `None` uses the ε of the Gibbs spec.
    pub temperature: Option<f64>,
    /// Largest lag, in steps, of the autocorrelation estimate.
    pub max_lag: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinStats {
    /// Fraction of steps spent in each basin.
    pub occupation: Vec<f64>,
    /// Core-to-core transitions between distinct minima.
    pub transitions: u64,
    /// Decay rate of the autocorrelation of sign(x₁ − s₁).
    pub autocorrelation_rate: f64,
    pub final_state: Vec<f64>,
}

/// Spectral radius of ∇²H sampled on a grid of the analysis box.
pub fn max_hessian_norm(g: &GibbsSpec) -> Result<f64> {
    let n = if g.dim() == 1 { 257 } else { 33 };
    let grid = Grid::new(g.bbox.clone(), n);
    let mut best: f64 = 0.0;
    for k in 0..grid.len() {
        let (vals, _) = sym_eigen(&g.potential.jet(&grid.point(k))?.hessian());
        best = best.max(vals[0].abs()).max(vals[vals.len() - 1].abs());
    }
    Ok(best)
}

fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `dξ = −∇H dt + √(2ε) dB` by Euler–Maruyama with ChaCha8 noise turned into
/// normals by the inverse CDF.
///
/// Requires `dt ≤ 0.01 ε / max‖∇²H‖` on the box; without noise the limit is
/// the explicit-Euler stability bound `1/max‖∇²H‖`.
pub fn simulate_langevin(g: &GibbsSpec, cfg: &LangevinConfig) -> Result<LangevinStats> {
    let d = g.dim();
    if d > 2 {
        return Err(Error::Invalid("Langevin statistics need dim ≤ 2".into()));
    }
    if cfg.start.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: cfg.start.len() });
    }
    let temp = cfg.temperature.unwrap_or(g.epsilon);
    if !(temp >= 0.0) {
        return Err(Error::EpsilonOutOfRange(temp));
    }
    let hmax = max_hessian_norm(g)?;
    let limit = if temp > 0.0 { 0.01 * temp / hmax } else { 1.0 / hmax };
    if !(cfg.dt > 0.0 && cfg.dt <= limit) {
        return Err(Error::StepSizeTooLarge { dt: cfg.dt, limit });
    }
    let labels: BasinLabels = label_grid(&g.potential, &g.graph.minima, &Grid::new(g.bbox.clone(), if d == 1 { 1024 } else { 128 }))?;
    let minima = &g.graph.minima;
    let dist2 = |x: &[f64], m: &[f64]| x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let core_r2 = {
        let mut r: f64 = f64::INFINITY;
        for a in 0..minima.len() {
            for b in a + 1..minima.len() {
                r = r.min(dist2(&minima[a].location, &minima[b].location));
            }
        }
        if r.is_finite() {
            r / 9.0
        } else {
            f64::INFINITY
        }
    };
    let split = g.graph.saddle(0, 1).map_or(0.0, |s| s.location[0]);
    let escape_box = g.bbox.inflate(1.5);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = (2.0 * temp * cfg.dt).sqrt();
    let mut x = cfg.start.clone();
    let mut occupation = vec![0u64; minima.len()];
    let mut core: Option<usize> = None;
    let mut transitions = 0u64;
    let mut signs: Vec<i8> = Vec::with_capacity(cfg.n_steps as usize);
    for step in 0..cfg.n_steps {
        let j = g.potential.jet(&x)?;
        for k in 0..d {
            let noise = if temp > 0.0 { normal.inverse_cdf(unit_open(&mut rng)) } else { 0.0 };
            x[k] += -j.gradient[k] * cfg.dt + amp * noise;
        }
        if !escape_box.contains(&x) {
            return Err(Error::Escape(step));
        }
        let basin = labels.label_of(&x).unwrap_or_else(|| {
            (0..minima.len()).min_by(|&a, &b| dist2(&x, &minima[a].location).total_cmp(&dist2(&x, &minima[b].location))).unwrap()
        });
        occupation[basin] += 1;
        if let Some(c) = (0..minima.len()).find(|&c| dist2(&x, &minima[c].location) < core_r2) {
            if core.is_some_and(|prev| prev != c) {
                transitions += 1;
            }
            core = Some(c);
        }
        signs.push(if x[0] >= split { 1 } else { -1 });
    }
    let total = cfg.n_steps.max(1) as f64;
    Ok(LangevinStats {
        occupation: occupation.iter().map(|&c| c as f64 / total).collect(),
        transitions,
        autocorrelation_rate: autocorrelation_rate(&signs, cfg.dt, cfg.max_lag),
        final_state: x,
    })
}

/// Rate r with `C(t)/C(0) ≈ e^{−rt}`, read off at the first lag on a
/// geometric ladder where the normalized autocorrelation drops below 1/2.
fn autocorrelation_rate(s: &[i8], dt: f64, max_lag: u64) -> f64 {
    let n = s.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = s.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let c0 = 1.0 - mean * mean;
    if c0 <= 0.0 {
        return f64::NAN;
    }
    let corr = |lag: usize| {
        let m = n - lag;
        let sum: i64 = (0..m).map(|k| (s[k] as i64) * (s[k + lag] as i64)).sum();
        (sum as f64 / m as f64 - mean * mean) / c0
    };
    let mut lag = 1usize;
    let cap = (max_lag as usize).min(n / 4).max(1);
    let mut last = (lag, corr(lag));
    while lag <= cap {
        let c = corr(lag);
        last = (lag, c);
        if c < 0.5 {
            break;
        }
        lag = ((lag as f64) * 1.25).ceil() as usize;
    }
    let (lag, c) = last;
    if c > 0.0 {
        -c.ln() / (lag as f64 * dt)
    } else {
        f64::NAN
    }
}
