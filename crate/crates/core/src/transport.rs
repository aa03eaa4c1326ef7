//! Affine transport interpolations between the local Gaussians, their cost
//! density and weighted transport cost, and the matrix facts used to
//! evaluate the cost in closed form.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{householder_completion, is_spd, quad_form, spd_inv_sqrt, spd_sqrt, sym_eigen, sym_fn};
use crate::measures::{laplace_partition, omega, GibbsSpec};

/// Arc-length step of the minimum-energy path.
pub const PATH_STEP: f64 = 1e-3;
/// Half-width of the quintic blend of the covariance path around τ*.
pub const BLEND_WIDTH: f64 = 0.1;
/// Smallest |⟨γ̇_{τ*}, e₋⟩| accepted at the saddle.
pub const TANGENT_TOL: f64 = 1e-3;
const MAX_PATH_STEPS: usize = 200_000;

fn smoothstep(t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, 1.0);
    (t * t * t * (10.0 + t * (6.0 * t - 15.0)), 30.0 * t * t * (1.0 - t) * (1.0 - t))
}

/// Unit-speed curve from m_i through s_ij to m_j with covariance path
/// `Σ_s = σ_s²` and the transport maps `Φ_s(x) = σ_sσ_0⁻¹(x − m_i) + γ_s`.
#[derive(Debug, Clone)]
pub struct AffineInterpolation {
    pub i: usize,
    pub j: usize,
    pub epsilon: f64,
    pub omega: f64,
    /// Cumulative arc length of each path sample.
    pub arclength: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    /// Unit tangents; at the saddle this is the unstable eigenvector.
    pub tangents: Vec<DVector<f64>>,
    pub saddle_index: usize,
    pub sigma_start: DMatrix<f64>,
    pub sigma_saddle: DMatrix<f64>,
    pub sigma_end: DMatrix<f64>,
    /// Time per unit arc length; 1 for the unit-speed parameterization.
    pub time_scale: f64,
    /// Bound with `C⁻¹ ≤ Σ_s ≤ C` and `‖Σ̇_s‖ ≤ C` on sampled s.
    pub c_sigma: f64,
    /// Sampled global radius of curvature of γ; ∞ for straight paths.
    pub c_gamma: f64,
    /// Normalized incomplete-Gamma tail, the same for every ν_s.
    pub tail: f64,
}

/// γ, σ and their time derivatives at one time s.
#[derive(Debug, Clone)]
pub struct SliceState {
    pub gamma: DVector<f64>,
    pub gamma_dot: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_dot: DMatrix<f64>,
    /// Σ_s⁻¹.
    pub precision: DMatrix<f64>,
    /// σ̇_sσ_s⁻¹.
    pub velocity_gain: DMatrix<f64>,
    pub log_z_nu: f64,
}

impl SliceState {
    /// Density of ν_s at x; zero outside the truncation ellipsoid.
    pub fn nu_density(&self, x: &DVector<f64>, epsilon: f64, omega: f64) -> f64 {
        let q = quad_form(&self.precision, &(x - &self.gamma)) / (2.0 * epsilon);
        if q <= omega * omega {
            (-q - self.log_z_nu).exp()
        } else {
            0.0
        }
    }

    /// `Φ̇_s∘Φ_s⁻¹(x) = σ̇_sσ_s⁻¹(x − γ_s) + γ̇_s`.
    pub fn velocity(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.velocity_gain * (x - &self.gamma) + &self.gamma_dot
    }
}

impl AffineInterpolation {
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Arc length T of γ.
    pub fn length(&self) -> f64 {
        *self.arclength.last().unwrap()
    }

    pub fn total_time(&self) -> f64 {
        self.length() * self.time_scale
    }

    /// Time τ* at which γ passes the saddle.
    pub fn saddle_time(&self) -> f64 {
        self.arclength[self.saddle_index] * self.time_scale
    }

    /// The same interpolation run at speed 1/c.
    pub fn rescaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.time_scale *= c;
        out
    }

    fn locate(&self, u: f64) -> (DVector<f64>, DVector<f64>) {
        let u = u.clamp(0.0, self.length());
        let k = self.arclength.partition_point(|&a| a <= u).clamp(1, self.arclength.len() - 1);
        let (a0, a1) = (self.arclength[k - 1], self.arclength[k]);
        let t = if a1 > a0 { (u - a0) / (a1 - a0) } else { 0.0 };
        let p = &self.points[k - 1] * (1.0 - t) + &self.points[k] * t;
        let d = &self.tangents[k - 1] * (1.0 - t) + &self.tangents[k] * t;
        let n = d.norm();
        (p, if n > 0.0 { d / n } else { self.tangents[k].clone() })
    }

    /// σ and dσ/du at arc length u.
    fn sigma_at(&self, u: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let tau = self.arclength[self.saddle_index];
        let total = self.length();
        let d_minus = (&self.sigma_saddle - &self.sigma_start) / tau;
        let d_plus = (&self.sigma_end - &self.sigma_saddle) / (total - tau);
        let l_minus = &self.sigma_saddle + &d_minus * (u - tau);
        let l_plus = &self.sigma_saddle + &d_plus * (u - tau);
        let w = BLEND_WIDTH.min(0.5 * tau).min(0.5 * (total - tau));
        let (b, db) = smoothstep((u - tau + w) / (2.0 * w));
        let db = if (u - tau).abs() < w { db / (2.0 * w) } else { 0.0 };
        let sigma = &l_minus * (1.0 - b) + &l_plus * b;
        let dsigma = &d_minus * (1.0 - b) + &d_plus * b + (&l_plus - &l_minus) * db;
        (sigma, dsigma)
    }

    pub fn state(&self, s: f64) -> SliceState {
        let u = s / self.time_scale;
        let (gamma, tangent) = self.locate(u);
        let (sigma, dsigma) = self.sigma_at(u.clamp(0.0, self.length()));
        let sigma_inv = sym_fn(&sigma, |v| 1.0 / v);
        let n = self.dim() as f64;
        let log_det_sigma: f64 = sym_eigen(&sigma).0.iter().map(|v| v.ln()).sum();
        SliceState {
            gamma,
            gamma_dot: tangent / self.time_scale,
            velocity_gain: &dsigma * &sigma_inv / self.time_scale,
            precision: &sigma_inv * &sigma_inv,
            sigma_dot: dsigma / self.time_scale,
            sigma,
            log_z_nu: 0.5 * n * (2.0 * std::f64::consts::PI * self.epsilon).ln() + log_det_sigma + (1.0 - self.tail).ln(),
        }
    }

    /// Σ_s.
    pub fn covariance(&self, s: f64) -> DMatrix<f64> {
        let st = self.state(s);
        &st.sigma * &st.sigma
    }

    /// Σ_{τ*}⁻¹ restricted to the orthogonal complement of γ̇_{τ*}.
    pub fn transverse_precision_at_saddle(&self) -> DMatrix<f64> {
        let n = self.dim();
        let q = householder_completion(&self.tangents[self.saddle_index]);
        let st = self.state(self.saddle_time());
        let full = q.transpose() * st.precision * q;
        full.view((1, 1), (n - 1, n - 1)).into_owned()
    }

    /// Tube radius scale `4√(2εC_Σ)ω` that c_γ must exceed.
    pub fn curvature_threshold(&self) -> f64 {
        4.0 * (2.0 * self.epsilon * self.c_sigma).sqrt() * self.omega
    }
}

/// Follows `dx/dl = −∇H/|∇H|` from `start` until within `3·PATH_STEP` of a minimum.
fn descend(g: &GibbsSpec, start: DVector<f64>) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, usize)> {
    let dir = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let j = g.potential.jet(x.as_slice())?;
        let v = -DVector::from_vec(j.gradient);
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::StagnatedAtSaddle(x.iter().copied().collect()));
        }
        Ok(v / n)
    };
    let mins = &g.graph.minima;
    let near = |x: &DVector<f64>| mins.iter().position(|m| (x - DVector::from_column_slice(&m.location)).norm() < 3.0 * PATH_STEP);
    let mut pts = vec![start.clone()];
    let mut tans = vec![dir(&start)?];
    let mut x = start;
    for _ in 0..MAX_PATH_STEPS {
        if let Some(k) = near(&x) {
            let m = DVector::from_column_slice(&mins[k].location);
            let seg = &m - &x;
            let len = seg.norm();
            if len > 0.0 {
                let t = &seg / len;
                *tans.last_mut().unwrap() = t.clone();
                pts.push(m);
                tans.push(t);
            }
            return Ok((pts, tans, k));
        }
        let h = PATH_STEP;
        let k1 = dir(&x)?;
        let k2 = dir(&(&x + &k1 * (0.5 * h)))?;
        let k3 = dir(&(&x + &k2 * (0.5 * h)))?;
        let k4 = dir(&(&x + &k3 * h))?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !g.bbox.inflate(1.5).contains(x.as_slice()) {
            return Err(Error::FlowDiverged(x.iter().copied().collect()));
        }
        tans.push(dir(&x)?);
        pts.push(x.clone());
    }
    Err(Error::NoConvergence)
}

fn circumradius(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let (ab, bc, ca) = ((a - b).norm(), (b - c).norm(), (c - a).norm());
    let s = 0.5 * (ab + bc + ca);
    let area_sq = s * (s - ab) * (s - bc) * (s - ca);
    if area_sq <= 1e-24 * s.powi(4) {
        return f64::INFINITY;
    }
    ab * bc * ca / (4.0 * area_sq.sqrt())
}

/// Minimum circumradius over triples of roughly 120 path samples.
fn global_radius_of_curvature(points: &[DVector<f64>]) -> f64 {
    if points[0].len() < 2 {
        return f64::INFINITY;
    }
    let stride = (points.len() / 120).max(1);
    let sample: Vec<&DVector<f64>> = points.iter().step_by(stride).collect();
    let mut best = f64::INFINITY;
    for a in 0..sample.len() {
        for b in a + 1..sample.len() {
            for c in b + 1..sample.len() {
                best = best.min(circumradius(sample[a], sample[b], sample[c]));
            }
        }
    }
    best
}

/// Builds the interpolation from ν_i to ν_j along the steepest-descent curves
/// out of s_ij, with `Σ_{τ*}⁻¹ = |∇²H(s_ij)|`.
pub fn build_interpolation(g: &GibbsSpec, i: usize, j: usize) -> Result<AffineInterpolation> {
    let s = g.graph.saddle(i, j).ok_or(Error::MissingSaddle(i, j))?;
    let e = DVector::from_column_slice(s.unstable_direction());
    let sx = DVector::from_column_slice(&s.location);
    let (pa, ta, ka) = descend(g, &sx + &e * PATH_STEP)?;
    let (pb, tb, kb) = descend(g, &sx - &e * PATH_STEP)?;
    let ((to_i, ti), (to_j, tj)) = match (ka, kb) {
        (a, b) if a == i && b == j => ((pa, ta), (pb, tb)),
        (a, b) if a == j && b == i => ((pb, tb), (pa, ta)),
        _ => return Err(Error::MissingSaddle(i, j)),
    };
    let e_oriented = if (&to_j[0] - &sx).dot(&e) > 0.0 { e.clone() } else { -e.clone() };
    let mut points: Vec<DVector<f64>> = to_i.iter().rev().cloned().collect();
    let mut tangents: Vec<DVector<f64>> = ti.iter().rev().map(|t| -t).collect();
    let saddle_index = points.len();
    points.push(sx.clone());
    tangents.push(e_oriented.clone());
    points.extend(to_j.iter().cloned());
    tangents.extend(tj.iter().cloned());
    let chord = (&points[saddle_index + 1] - &points[saddle_index - 1]) / (2.0 * PATH_STEP);
    let cos = chord.normalize().dot(&e_oriented).abs();
    if 1.0 - cos > TANGENT_TOL {
        return Err(Error::SaddleTangentMismatch(1.0 - cos));
    }
    let mut arclength = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for k in 0..points.len() {
        if k > 0 {
            acc += (&points[k] - &points[k - 1]).norm();
        }
        arclength.push(acc);
    }
    let sigma_of_min = |k: usize| spd_inv_sqrt(&g.graph.minima[k].hessian());
    let sigma_saddle = sym_fn(&s.hessian(), |v| 1.0 / v.abs().sqrt());
    let n = g.dim();
    let w = omega(g.epsilon);
    let mut interp = AffineInterpolation {
        i,
        j,
        epsilon: g.epsilon,
        omega: w,
        arclength,
        points,
        tangents,
        saddle_index,
        sigma_start: sigma_of_min(i)?,
        sigma_saddle,
        sigma_end: sigma_of_min(j)?,
        time_scale: 1.0,
        c_sigma: 0.0,
        c_gamma: 0.0,
        tail: gamma_ur(0.5 * n as f64, w * w),
    };
    let samples = 2001;
    let mut c: f64 = 1.0;
    for k in 0..samples {
        let st = interp.state(interp.total_time() * k as f64 / (samples - 1) as f64);
        let cov = &st.sigma * &st.sigma;
        if !is_spd(&cov) {
            return Err(Error::NotSpd);
        }
        let (vals, _) = sym_eigen(&cov);
        let cov_dot = &st.sigma_dot * &st.sigma + &st.sigma * &st.sigma_dot;
        let (dv, _) = sym_eigen(&cov_dot);
        c = c.max(vals[vals.len() - 1]).max(1.0 / vals[0]).max(dv[0].abs()).max(dv[dv.len() - 1].abs());
    }
    interp.c_sigma = c;
    interp.c_gamma = global_radius_of_curvature(&interp.points);
    let threshold = interp.curvature_threshold();
    if interp.c_gamma < threshold {
        return Err(Error::PathSelfIntersecting { c_gamma: interp.c_gamma, threshold });
    }
    Ok(interp)
}

/// `A(x) = |∫₀ᵀ Φ̇_s∘Φ_s⁻¹(x) ν_s(x) ds|` by the composite midpoint rule.
pub fn cost_density(interp: &AffineInterpolation, x: &[f64], s_steps: usize) -> f64 {
    let x = DVector::from_column_slice(x);
    let ds = interp.total_time() / s_steps as f64;
    let mut acc = DVector::zeros(x.len());
    for k in 0..s_steps {
        let st = interp.state((k as f64 + 0.5) * ds);
        let nu = st.nu_density(&x, interp.epsilon, interp.omega);
        if nu > 0.0 {
            acc += st.velocity(&x) * (nu * ds);
        }
    }
    acc.norm()
}

/// Cost density sampled on every node of `grid`.
pub fn cost_field(interp: &AffineInterpolation, grid: &Grid, s_steps: usize) -> Vec<f64> {
    let n = grid.dim();
    let ds = interp.total_time() / s_steps as f64;
    let mut acc = vec![0.0; grid.len() * n];
    let r2 = 2.0 * interp.epsilon * interp.omega * interp.omega;
    for k in 0..s_steps {
        let st = interp.state((k as f64 + 0.5) * ds);
        let cov = &st.sigma * &st.sigma;
        let ranges: Vec<(usize, usize)> = (0..n)
            .map(|a| {
                let half = (r2 * cov[(a, a)]).sqrt();
                let lo = ((st.gamma[a] - half - grid.bounds.lo[a]) / grid.h[a] - 0.5).floor().max(0.0) as usize;
                let hi = (((st.gamma[a] + half - grid.bounds.lo[a]) / grid.h[a] - 0.5).ceil().max(0.0) as usize).min(grid.n - 1);
                (lo, hi)
            })
            .collect();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            continue;
        }
        let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let idx = grid.flat_index(&multi);
            let x = DVector::from_iterator(n, (0..n).map(|a| grid.coord(a, multi[a])));
            let nu = st.nu_density(&x, interp.epsilon, interp.omega);
            if nu > 0.0 {
                let v = st.velocity(&x);
                for a in 0..n {
                    acc[idx * n + a] += v[a] * nu * ds;
                }
            }
            if !advance(&mut multi, &ranges) {
                break;
            }
        }
    }
    acc.chunks(n).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

/// Odometer step over the box `ranges`; false once every index wrapped.
fn advance(multi: &mut [usize], ranges: &[(usize, usize)]) -> bool {
    for (m, r) in multi.iter_mut().zip(ranges) {
        if *m < r.1 {
            *m += 1;
            return true;
        }
        *m = r.0;
    }
    false
}

/// Weighted transport cost `∫ A²/μ dx` and its split at the saddle region
/// `Ξ = {H ≥ H(s) − εω²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportCost {
    pub total: f64,
    pub saddle_region: f64,
    pub complement: f64,
    /// Richardson estimate of the relative error of `total`.
    pub quadrature_error: f64,
    /// Midpoint quadrature of `∫ e^{−(H−H(m₁))/ε}` on the same grid.
    pub z_mu: f64,
}

fn cost_on_grid(interp: &AffineInterpolation, g: &GibbsSpec, n: usize, s_steps: usize) -> (f64, f64, f64) {
    let grid = Grid::new(g.bbox.clone(), n);
    let lw: Vec<f64> = (0..grid.len()).map(|k| g.log_density(&grid.point(k))).collect();
    let z_mu: f64 = lw.iter().map(|v| v.exp()).sum::<f64>() * grid.cell_volume();
    let a = cost_field(interp, &grid, s_steps);
    let s = g.graph.saddle(interp.i, interp.j).expect("interpolation saddle");
    let level = -(s.energy - g.energy_ref()) / g.epsilon + interp.omega * interp.omega;
    let (mut inside, mut outside) = (0.0, 0.0);
    for k in 0..grid.len() {
        if a[k] == 0.0 {
            continue;
        }
        let v = (2.0 * a[k].ln() - lw[k]).exp() * z_mu * grid.cell_volume();
        if lw[k] <= level {
            inside += v;
        } else {
            outside += v;
        }
    }
    (inside, outside, z_mu)
}

/// Default number of time steps for the s-integral.
pub const S_STEPS: usize = 4000;

/// Quadrature of `T² = ∫ A²/μ dx` over the analysis box (dim ≤ 2).
pub fn transport_cost(interp: &AffineInterpolation, g: &GibbsSpec, grid_resolution: usize, s_steps: usize) -> Result<TransportCost> {
    if g.dim() > 2 {
        return Err(Error::Invalid("transport cost quadrature needs dim ≤ 2".into()));
    }
    let (inside, outside, z_mu) = cost_on_grid(interp, g, grid_resolution, s_steps);
    let (ci, co, _) = cost_on_grid(interp, g, grid_resolution / 2, s_steps);
    let total = inside + outside;
    let err = (total - ci - co).abs() / 3.0 / total;
    if !(err <= crate::measures::QUADRATURE_RTOL) {
        return Err(Error::QuadratureUnderResolved(err));
    }
    Ok(TransportCost { total, saddle_region: inside, complement: outside, quadrature_error: err, z_mu })
}

/// `Z_μ/(2πε)^{n/2} · 2πε√|det ∇²H(s_ij)|/|λ⁻(s_ij)| · e^{(H(s_ij)−H(m₁))/ε}` with Laplace Z_μ.
pub fn transport_bound(g: &GibbsSpec, i: usize, j: usize) -> Result<f64> {
    Ok(crate::ek::log_mean_difference(g, laplace_partition(g).z_mu_laplace, i, j)?.exp())
}

fn check_unit(eta: &DVector<f64>) -> Result<()> {
    if (eta.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Invalid(format!("|eta| = {} is not 1", eta.norm())));
    }
    Ok(())
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `Ã = A − (Aη ⊗ Aη)/A[η]`.
pub fn tilde_matrix(a: &DMatrix<f64>, eta: &DVector<f64>) -> DMatrix<f64> {
    let an = a * eta;
    a - &an * an.transpose() / quad_form(a, eta)
}

/// `∫ exp(−½Σ⁻¹[rη + z⊥]) dr` in closed form, `√(2π/Σ⁻¹[η]) · exp(−½Σ̃⁻¹[z⊥])`,
/// and by adaptive quadrature.
pub fn partial_gaussian(sigma_inv: &DMatrix<f64>, eta: &DVector<f64>, z_perp: &DVector<f64>) -> Result<(f64, f64)> {
    if !is_spd(sigma_inv) {
        return Err(Error::NotSpd);
    }
    check_unit(eta)?;
    let ip = z_perp.dot(eta);
    if ip.abs() > 1e-12 * z_perp.norm().max(1.0) {
        return Err(Error::NotOrthogonal(ip));
    }
    let a = quad_form(sigma_inv, eta);
    let b = (sigma_inv * eta).dot(z_perp);
    let c = quad_form(sigma_inv, z_perp);
    let closed = (2.0 * std::f64::consts::PI / a).sqrt() * (-0.5 * quad_form(&tilde_matrix(sigma_inv, eta), z_perp)).exp();
    let center = -b / a;
    let half = 40.0 / a.sqrt();
    let f = |r: f64| (-0.5 * (a * r * r + 2.0 * b * r + c)).exp();
    let quad = adaptive_simpson(f, center - half, center + half, 1e-14 * closed.max(1e-300));
    Ok((closed, quad))
}

/// Ã, the subdeterminant in the rotated frame and the identity residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdetReport {
    pub tilde: DMatrix<f64>,
    /// `det₁,₁(QᵀÃQ)` with Q the Householder completion of η.
    pub subdet: f64,
    /// `|det A − A[η]·det₁,₁(QᵀÃQ)|`.
    pub residual: f64,
    /// Spectrum of Ã on span{η}⊥, ascending.
    pub transverse_eigenvalues: Vec<f64>,
}

pub fn tilde_matrix_and_subdet(a: &DMatrix<f64>, eta: &DVector<f64>) -> Result<SubdetReport> {
    if !is_spd(a) {
        return Err(Error::NotSpd);
    }
    check_unit(eta)?;
    let n = a.nrows();
    let tilde = tilde_matrix(a, eta);
    let q = householder_completion(eta);
    let rotated = q.transpose() * &tilde * &q;
    let block = rotated.view((1, 1), (n - 1, n - 1)).into_owned();
    let subdet = if n == 1 { 1.0 } else { block.clone().lu().determinant() };
    let residual = (crate::linalg::det(a) - quad_form(a, eta) * subdet).abs();
    let transverse_eigenvalues = if n == 1 { Vec::new() } else { sym_eigen(&block).0 };
    if transverse_eigenvalues.first().is_some_and(|v| *v <= 0.0) {
        return Err(Error::NotSpd);
    }
    Ok(SubdetReport { tilde, subdet, residual, transverse_eigenvalues })
}

/// Closed form and numerical minimum of `det A/√det(2A − B)` over SPD A with 2A > B.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOptReport {
    /// √det B.
    pub inf_value: f64,
    /// A = B.
    pub argmin: DMatrix<f64>,
    pub numeric_value: f64,
    pub numeric_argmin: DMatrix<f64>,
    pub iterations: usize,
}

fn log_objective(b: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let n = b.nrows() as f64;
    let ld = |x: &DMatrix<f64>| sym_eigen(x).0.iter().map(|v| v.ln()).sum::<f64>();
    ld(&(b + m)) - n * 2f64.ln() - 0.5 * ld(m)
}

/// Minimizes over `M = 2A − B` with the affine-invariant gradient flow
/// `M ← M^{1/2} exp(−t M^{1/2} ∇ M^{1/2}) M^{1/2}` and Armijo steps, starting at `A₀`.
pub fn matrix_opt_value(b: &DMatrix<f64>, start: Option<&DMatrix<f64>>) -> Result<MatrixOptReport> {
    if !is_spd(b) {
        return Err(Error::NotSpd);
    }
    let n = b.nrows();
    let a0 = match start {
        Some(a) => a.clone(),
        None => b * 1.3 + DMatrix::identity(n, n) * (0.1 * b.trace() / n as f64),
    };
    let mut m = &a0 * 2.0 - b;
    if !is_spd(&m) {
        return Err(Error::NotSpd);
    }
    let mut f = log_objective(b, &m);
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it;
        let bm_inv = (b + &m).try_inverse().ok_or(Error::Singular(0))?;
        let m_inv = m.clone().try_inverse().ok_or(Error::Singular(0))?;
        let grad = bm_inv - m_inv * 0.5;
        let r = spd_sqrt(&m)?;
        let xi = &r * &grad * &r;
        let xi = (&xi + xi.transpose()) * 0.5;
        let gnorm2 = xi.norm_squared();
        if gnorm2.sqrt() < 1e-14 {
            break;
        }
        let mut t = 1.0;
        loop {
            let cand = &r * sym_fn(&(&xi * -t), f64::exp) * &r;
            let cand = (&cand + cand.transpose()) * 0.5;
            if is_spd(&cand) {
                let fc = log_objective(b, &cand);
                if fc <= f - 1e-4 * t * gnorm2 {
                    m = cand;
                    f = fc;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-20 {
                break;
            }
        }
        if t < 1e-20 {
            break;
        }
    }
    let inf_value = crate::linalg::det(b).sqrt();
    Ok(MatrixOptReport { inf_value, argmin: b.clone(), numeric_value: f.exp(), numeric_argmin: (b + m) * 0.5, iterations })
}

/// Central-difference step used by [`jacobi_formula_check`].
pub const JACOBI_STEP: f64 = 1e-5;

/// `max_t |∂_t log|det Φ_t| − tr(Φ_t⁻¹Φ̇_t)|` with both derivatives by
/// central differences.
pub fn jacobi_formula_check(phi: impl Fn(f64) -> DMatrix<f64>, samples: &[f64]) -> Result<f64> {
    let h = JACOBI_STEP;
    let mut worst: f64 = 0.0;
    let check = |m: &DMatrix<f64>, k: usize| -> Result<f64> {
        let d = crate::linalg::det(m);
        let scale = m.norm().powi(m.nrows() as i32).max(1e-300);
        if d.abs() <= 1e-10 * scale {
            return Err(Error::Singular(k));
        }
        Ok(d)
    };
    for (k, &t) in samples.iter().enumerate() {
        let (p, lo, hi) = (phi(t), phi(t - h), phi(t + h));
        check(&p, k)?;
        let dlo = check(&lo, k)?;
        let dhi = check(&hi, k)?;
        let lhs = (dhi.abs().ln() - dlo.abs().ln()) / (2.0 * h);
        let pdot = (hi - lo) / (2.0 * h);
        let rhs = (p.lu().solve(&pdot).ok_or(Error::Singular(k))?).trace();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
