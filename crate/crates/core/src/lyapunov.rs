//! ε-modification of a potential near its non-minimum critical points, grid
//! verification of the Lyapunov drift condition, and the PI/LSI constants it
//! implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{tri_index, Jet2, Potential};
use crate::grid::{Bounds, Grid};
use crate::landscape::CriticalPoint;
use crate::linalg::sym_eigen;

/// Default patch scale.
pub const DEFAULT_A: f64 = 6.0;
/// Largest patch scale tried by the doubling search.
pub const MAX_A: f64 = 48.0;
/// Fraction of the binding δ bound used when δ is chosen automatically.
pub const DELTA_FRACTION: f64 = 0.9;

/// Maximum of S′ for S(t) = 6t⁵ − 15t⁴ + 10t³ on [0, 1].
const SMOOTHSTEP_SLOPE_MAX: f64 = 1.875;

fn smoothstep(t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, 1.0);
    let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    (s, ds)
}

/// Bump profile ξ on the squared δ-norm u.
///
/// ξ′ = −1 on [0, u1], ξ′ = −1 + S((u − u1)/L) on [u1, u2], ξ ≡ 0 beyond u2,
/// with L = u2 − u1 and S the quintic smoothstep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub u1: f64,
    pub u2: f64,
}

impl BumpProfile {
    fn width(&self) -> f64 {
        self.u2 - self.u1
    }

    /// (ξ, ξ′, ξ″) at u ≥ 0.
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        let l = self.width();
        if u >= self.u2 {
            return (0.0, 0.0, 0.0);
        }
        if u <= self.u1 {
            return (0.5 * l + self.u1 - u, -1.0, 0.0);
        }
        let t = (u - self.u1) / l;
        // P(t) = ∫₀ᵗ (1 − S), P(1) = 1/2.
        let p = t - t.powi(6) + 3.0 * t.powi(5) - 2.5 * t.powi(4);
        let (s, ds) = smoothstep(t);
        (l * (0.5 - p), -1.0 + s, ds / l)
    }

    pub fn max_value(&self) -> f64 {
        0.5 * self.width() + self.u1
    }

    pub fn max_curvature(&self) -> f64 {
        SMOOTHSTEP_SLOPE_MAX / self.width()
    }
}

/// One patch: H_b(x) = ξ(|x − y|²_δ) with |z|²_δ = Σ cᵢ⟨uᵢ, z⟩².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddlePatch {
    pub center: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// ½δ along unstable directions, ½(λᵢ − δ) along stable ones.
    pub coefficients: Vec<f64>,
    pub profile: BumpProfile,
}

impl SaddlePatch {
    pub fn delta_norm_sq(&self, x: &[f64]) -> f64 {
        self.eigenvectors
            .iter()
            .zip(&self.coefficients)
            .map(|(u, c)| {
                let p: f64 = u.iter().zip(x.iter().zip(&self.center)).map(|(u, (x, y))| u * (x - y)).sum();
                c * p * p
            })
            .sum()
    }

    fn jet(&self, x: &[f64]) -> Jet2 {
        let n = x.len();
        let mut q = Jet2::constant(0.0, n);
        for (u, c) in self.eigenvectors.iter().zip(&self.coefficients) {
            let p: f64 = u.iter().zip(x.iter().zip(&self.center)).map(|(u, (x, y))| u * (x - y)).sum();
            q.value += c * p * p;
            for i in 0..n {
                q.gradient[i] += 2.0 * c * p * u[i];
                for j in i..n {
                    q.hessian_upper[tri_index(n, i, j)] += 2.0 * c * u[i] * u[j];
                }
            }
        }
        let (f0, f1, f2) = self.profile.eval(q.value);
        q.chain(f0, f1, f2)
    }
}

/// H̃ = H + Σ over non-minimum critical points of ξ(|x − y|²_δ).
#[derive(Debug, Clone, PartialEq)]
pub struct EpsModification {
    pub base: Potential,
    pub epsilon: f64,
    pub a: f64,
    pub delta: f64,
    pub patches: Vec<SaddlePatch>,
    /// sup|ξ″| ≤ C_ξ/√ε.
    pub c_xi: f64,
    /// sup|H̃ − H| ≤ C_H̃·ε.
    pub c_h_tilde: f64,
}

impl EpsModification {
    pub fn dim(&self) -> usize {
        self.base.dim
    }

    /// Every patch vanishes outside the ball of this radius about its center.
    pub fn support_radius(&self) -> f64 {
        self.a * self.epsilon.sqrt()
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet2> {
        let mut j = self.base.jet(x)?;
        for p in &self.patches {
            j = j.add(&p.jet(x), 1.0);
        }
        Ok(j)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.base.value(x)? + self.difference(x))
    }

    /// H̃(x) − H(x).
    pub fn difference(&self, x: &[f64]) -> f64 {
        self.patches.iter().map(|p| p.profile.eval(p.delta_norm_sq(x)).0).sum()
    }
}

/// Upper bound on δ imposed by one critical point, or None when unconstrained.
fn delta_bound(cp: &CriticalPoint) -> Option<f64> {
    let n = cp.dim() as f64;
    let l = cp.morse_index as f64;
    let mut bound: Option<f64> = None;
    let mut tighten = |b: f64| bound = Some(bound.map_or(b, |c: f64| c.min(b)));
    if let Some(min_pos) = cp.hessian_eigenvalues.iter().copied().filter(|v| *v > 0.0).reduce(f64::min) {
        tighten(0.5 * min_pos);
    }
    let neg_sum: f64 = cp.hessian_eigenvalues.iter().filter(|v| **v < 0.0).sum();
    if n - 2.0 * l > 0.0 {
        tighten(-neg_sum / (n - 2.0 * l));
    }
    bound
}

fn delta_admissible(cp: &CriticalPoint, delta: f64) -> bool {
    let n = cp.dim() as f64;
    let l = cp.morse_index as f64;
    let neg_sum: f64 = cp.hessian_eigenvalues.iter().filter(|v| **v < 0.0).sum();
    let pos_ok = cp.hessian_eigenvalues.iter().filter(|v| **v > 0.0).all(|v| delta <= 0.5 * v);
    delta > 0.0 && pos_ok && (n - 2.0 * l) * delta + neg_sum < 0.0
}

/// Patch every non-minimum critical point in `cps`.
///
/// With `delta = None` δ is `DELTA_FRACTION` times the tightest bound over all
/// patched points; a point whose constraints never bind contributes ½min|λᵢ|.
/// The profile thresholds are u2 = c·a²ε and u1 = u2/4, where c is the
/// smallest δ-norm coefficient, so each patch lives inside B_{a√ε}(y).
pub fn build_eps_modification(
    p: &Potential,
    cps: &[CriticalPoint],
    epsilon: f64,
    a: f64,
    delta: Option<f64>,
) -> Result<EpsModification> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveArgument(epsilon));
    }
    if !(a > 0.0) {
        return Err(Error::NonPositiveArgument(a));
    }
    let saddles: Vec<&CriticalPoint> = cps.iter().filter(|c| !c.is_minimum()).collect();
    let delta = match delta {
        Some(d) => d,
        None => {
            let b = saddles
                .iter()
                .map(|c| {
                    delta_bound(c).unwrap_or_else(|| {
                        0.5 * c.hessian_eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
                    })
                })
                .fold(f64::INFINITY, f64::min);
            if b.is_finite() {
                DELTA_FRACTION * b
            } else {
                1.0
            }
        }
    };
    let mut patches = Vec::with_capacity(saddles.len());
    let mut c_xi: f64 = 0.0;
    let mut c_h_tilde: f64 = 0.0;
    for cp in saddles {
        if !delta_admissible(cp, delta) {
            return Err(Error::DeltaInfeasible(cp.location.clone()));
        }
        let coefficients: Vec<f64> =
            cp.hessian_eigenvalues.iter().map(|&l| if l < 0.0 { 0.5 * delta } else { 0.5 * (l - delta) }).collect();
        let c_lo = coefficients.iter().copied().fold(f64::INFINITY, f64::min);
        let u2 = c_lo * a * a * epsilon;
        let profile = BumpProfile { u1: 0.25 * u2, u2 };
        c_xi = c_xi.max(profile.max_curvature() * epsilon.sqrt());
        c_h_tilde = c_h_tilde.max(profile.max_value() / epsilon);
        patches.push(SaddlePatch {
            center: cp.location.clone(),
            eigenvalues: cp.hessian_eigenvalues.clone(),
            eigenvectors: cp.hessian_eigenvectors.clone(),
            coefficients,
            profile,
        });
    }
    Ok(EpsModification { base: p.clone(), epsilon, a, delta, patches, c_xi, c_h_tilde })
}

/// Outcome of a passing drift check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub epsilon: f64,
    pub a: f64,
    /// R = a√ε, the radius of the excluded balls about the minima.
    pub radius: f64,
    pub delta: f64,
    /// −ε·max drift outside the balls.
    pub lambda0: f64,
    /// ε·max of (drift + λ₀/ε)·W inside the balls.
    pub b0: f64,
    /// max of drift + λ₀/ε outside the balls; zero for the optimal λ₀.
    pub drift_margin_grid: f64,
    pub c_xi: f64,
    pub c_h_tilde: f64,
    /// max(0, −min λ_min(∇²H̃)) over the box.
    pub k_h_tilde: f64,
    /// e^{−2C_H̃}, the factor by which constants of H̃ transfer to H.
    pub holley_stroock_factor: f64,
    /// Minima whose balls were excluded.
    pub minima: Vec<Vec<f64>>,
}

impl LyapunovReport {
    /// λ = λ₀/ε.
    pub fn lambda(&self) -> f64 {
        self.lambda0 / self.epsilon
    }

    /// b = b₀/ε.
    pub fn b(&self) -> f64 {
        self.b0 / self.epsilon
    }
}

fn drift(j: &Jet2, eps: f64) -> f64 {
    j.laplacian() / (2.0 * eps) - j.grad_norm_sq() / (4.0 * eps * eps)
}

fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Evaluate the drift (1/2ε)ΔH̃ − (1/4ε²)|∇H̃|² on a grid over `bx`.
///
/// Balls of radius a√ε about the minima of `minima` that lie in `bx` are
/// excluded; the drift must be negative everywhere else.
pub fn verify_drift(
    m: &EpsModification,
    minima: &[CriticalPoint],
    bx: &Bounds,
    grid_resolution: usize,
) -> Result<LyapunovReport> {
    let eps = m.epsilon;
    let r = m.support_radius();
    let inside: Vec<&CriticalPoint> = minima.iter().filter(|c| c.is_minimum() && bx.contains(&c.location)).collect();
    let h_ref = inside.iter().map(|c| c.energy).fold(f64::INFINITY, f64::min);
    let grid = Grid::new(bx.clone(), grid_resolution);
    let mut max_out = f64::NEG_INFINITY;
    let mut violations: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut ball_samples: Vec<(f64, f64)> = Vec::new();
    let mut k_h: f64 = 0.0;
    for k in 0..grid.len() {
        let x = grid.point(k);
        let j = m.jet(&x)?;
        k_h = k_h.max(-sym_eigen(&j.hessian()).0[0]);
        let d = drift(&j, eps);
        if inside.iter().any(|c| dist_sq(&x, &c.location) < r * r) {
            ball_samples.push((d, j.value));
        } else {
            max_out = max_out.max(d);
            if d > 0.0 {
                violations.push((d, x));
            }
        }
    }
    if !violations.is_empty() {
        let count = violations.len();
        let (worst, at) = violations.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        return Err(Error::DriftViolated { count, worst, at });
    }
    let lambda0 = if max_out.is_finite() { -eps * max_out } else { 0.0 };
    let lambda = lambda0 / eps;
    let b = ball_samples
        .iter()
        .map(|&(d, h)| (d + lambda) * ((h - h_ref) / (2.0 * eps)).exp())
        .fold(0.0, f64::max);
    Ok(LyapunovReport {
        epsilon: eps,
        a: m.a,
        radius: r,
        delta: m.delta,
        lambda0,
        b0: eps * b,
        drift_margin_grid: max_out + lambda,
        c_xi: m.c_xi,
        c_h_tilde: m.c_h_tilde,
        k_h_tilde: k_h,
        holley_stroock_factor: (-2.0 * m.c_h_tilde).exp(),
        minima: inside.iter().map(|c| c.location.clone()).collect(),
    })
}

/// Build and verify with a = a_start, 2a_start, … up to `MAX_A`, returning the
/// first pass. The last violation is returned if none passes.
pub fn search_patch_scale(
    p: &Potential,
    cps: &[CriticalPoint],
    epsilon: f64,
    delta: Option<f64>,
    a_start: f64,
    bx: &Bounds,
    grid_resolution: usize,
) -> Result<(EpsModification, LyapunovReport)> {
    let mut a = a_start;
    loop {
        let m = build_eps_modification(p, cps, epsilon, a, delta)?;
        match verify_drift(&m, cps, bx, grid_resolution) {
            Ok(rep) => return Ok((m, rep)),
            Err(e @ Error::DriftViolated { .. }) if 2.0 * a > MAX_A => return Err(e),
            Err(Error::DriftViolated { .. }) => a *= 2.0,
            Err(e) => return Err(e),
        }
    }
}

fn require_positive(v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveArgument(v))
    }
}

fn require_non_negative(v: f64) -> Result<()> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveArgument(v))
    }
}

/// ρ ≥ λρ_R/(b + ρ_R).
pub fn pi_from_lyapunov(lambda: f64, b: f64, rho_r: f64) -> Result<f64> {
    require_positive(lambda)?;
    require_non_negative(b)?;
    require_positive(rho_r)?;
    Ok(lambda * rho_r / (b + rho_r))
}

/// The LSI bound and its split 1/α = 2√c₁ + c₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsiFromLyapunov {
    pub inv_alpha: f64,
    pub c1: f64,
    pub c2: f64,
    /// Minimiser √c₁ of c₁/τ + τ.
    pub tau: f64,
}

pub fn lsi_from_lyapunov(
    lambda: f64,
    b: f64,
    rho: f64,
    k_h: f64,
    eps: f64,
    second_moment: f64,
) -> Result<LsiFromLyapunov> {
    require_positive(lambda)?;
    require_positive(rho)?;
    require_positive(eps)?;
    require_non_negative(b)?;
    require_non_negative(k_h)?;
    require_non_negative(second_moment)?;
    let bm = b + lambda * second_moment;
    let inv_alpha = 2.0 * ((0.5 + bm / rho) / lambda).sqrt()
        + k_h / (2.0 * eps * lambda)
        + (k_h * bm + 2.0 * eps * lambda) / (rho * eps * lambda);
    let c1 = (0.5 + bm / rho) / lambda;
    let c2 = k_h / (2.0 * eps * lambda) + (k_h * bm + 2.0 * eps * lambda) / (rho * eps * lambda);
    Ok(LsiFromLyapunov { inv_alpha, c1, c2, tau: c1.sqrt() })
}

/// ∫|x|² dμ ≤ (1 + bR²)/λ.
pub fn second_moment_bound(lambda: f64, b: f64, r: f64) -> Result<f64> {
    require_positive(lambda)?;
    require_non_negative(b)?;
    Ok((1.0 + b * r * r) / lambda)
}

/// Bakry–Émery constant λ_min(∇²H(m))/ε on a ball about the minimum m.
pub fn bakry_emery_rho(m: &CriticalPoint, eps: f64) -> Result<f64> {
    require_positive(eps)?;
    let k = m.hessian_eigenvalues[0];
    require_positive(k)?;
    Ok(k / eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_potential;
    use crate::landscape::find_critical_points;

    fn double_well() -> (Potential, Vec<CriticalPoint>) {
        let p = parse_potential("(x1^2 - 1)^2", 1).unwrap();
        let cps = find_critical_points(&p, &Bounds::cube(-2.5, 2.5, 1).unwrap(), None).unwrap();
        (p, cps)
    }

    #[test]
    fn profile_is_c2_and_matches_bounds() {
        let pr = BumpProfile { u1: 0.25, u2: 1.0 };
        let (v0, d0, _) = pr.eval(0.0);
        assert!((v0 - pr.max_value()).abs() < 1e-15 && d0 == -1.0);
        for &u in &[pr.u1, pr.u2] {
            let (a, da, dda) = pr.eval(u - 1e-9);
            let (b, db, ddb) = pr.eval(u + 1e-9);
            assert!((a - b).abs() < 1e-8 && (da - db).abs() < 1e-7 && (dda - ddb).abs() < 1e-6);
        }
        for k in 1..100 {
            let u = pr.u1 + (k as f64 / 100.0) * 0.75;
            let h = 1e-6;
            let (_, d, dd) = pr.eval(u);
            let fd = (pr.eval(u + h).0 - pr.eval(u - h).0) / (2.0 * h);
            assert!((fd - d).abs() < 1e-8);
            assert!((-1.0..=0.0).contains(&d));
            assert!(dd.abs() <= pr.max_curvature() + 1e-12);
        }
    }

    #[test]
    fn delta_auto_values() {
        let (p, cps) = double_well();
        let m = build_eps_modification(&p, &cps, 0.05, 6.0, None).unwrap();
        assert!((m.delta - 1.8).abs() < 1e-9);
        assert_eq!(m.patches.len(), 1);
        let p2 = parse_potential("(x1^2 - 1)^2 + 2*x2^2", 2).unwrap();
        let cps2 = find_critical_points(&p2, &Bounds::cube(-2.0, 2.0, 2).unwrap(), None).unwrap();
        let m2 = build_eps_modification(&p2, &cps2, 0.05, 6.0, None).unwrap();
        assert!((m2.delta - 1.8).abs() < 1e-9);
        assert!(matches!(
            build_eps_modification(&p2, &cps2, 0.05, 6.0, Some(2.5)),
            Err(Error::DeltaInfeasible(_))
        ));
    }

    #[test]
    fn no_saddles_is_identity() {
        let p = parse_potential("x1^2/2", 1).unwrap();
        let cps = find_critical_points(&p, &Bounds::cube(-2.0, 2.0, 1).unwrap(), None).unwrap();
        let m = build_eps_modification(&p, &cps, 0.1, 4.0, None).unwrap();
        assert!(m.patches.is_empty());
        assert_eq!(m.jet(&[0.7]).unwrap(), p.jet(&[0.7]).unwrap());
    }

    #[test]
    fn patch_jet_matches_finite_differences() {
        let p = parse_potential("(x1^2-1)^2 + 2*x2^2 + 0.1*x1*x2", 2).unwrap();
        let cps = find_critical_points(&p, &Bounds::cube(-2.0, 2.0, 2).unwrap(), None).unwrap();
        let m = build_eps_modification(&p, &cps, 0.05, 2.0, None).unwrap();
        let x = [0.15, -0.1];
        let j = m.jet(&x).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let g = (m.value(&xp).unwrap() - m.value(&xm).unwrap()) / (2.0 * h);
            assert!((g - j.gradient[i]).abs() < 1e-6, "{g} vs {}", j.gradient[i]);
            let jp = m.jet(&xp).unwrap();
            let jm = m.jet(&xm).unwrap();
            for k in 0..2 {
                let hk = (jp.gradient[k] - jm.gradient[k]) / (2.0 * h);
                assert!((hk - j.hess(i, k)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn convex_quadratic_drift() {
        let p = parse_potential("x1^2/2", 1).unwrap();
        let cps = find_critical_points(&p, &Bounds::cube(-3.0, 3.0, 1).unwrap(), None).unwrap();
        let m = build_eps_modification(&p, &cps, 0.1, 4.0, None).unwrap();
        let rep = verify_drift(&m, &cps, &Bounds::cube(-3.0, 3.0, 1).unwrap(), 4000).unwrap();
        assert!(rep.lambda0 >= 4.0 * 4.0 / 4.0 - 0.5 - 1e-2);
        assert!(rep.drift_margin_grid <= 1e-12);
    }

    #[test]
    fn double_well_passes_at_default_scale() {
        let (p, cps) = double_well();
        let m = build_eps_modification(&p, &cps, 0.05, DEFAULT_A, None).unwrap();
        let rep = verify_drift(&m, &cps, &Bounds::cube(-2.5, 2.5, 1).unwrap(), 4000).unwrap();
        assert!(rep.lambda0 > 0.0 && rep.b0 > 0.0);
    }

    #[test]
    fn undersized_balls_violate_drift() {
        let (p, cps) = double_well();
        let m = build_eps_modification(&p, &cps, 0.05, 0.4, None).unwrap();
        match verify_drift(&m, &cps, &Bounds::cube(-2.5, 2.5, 1).unwrap(), 4000) {
            Err(Error::DriftViolated { at, .. }) => assert!((at[0].abs() - 1.0).abs() < 0.2),
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn constant_formulas() {
        assert!((pi_from_lyapunov(10.0, 1.0, 5.0).unwrap() - 50.0 / 6.0).abs() < 1e-12);
        assert_eq!(pi_from_lyapunov(10.0, 0.0, 5.0).unwrap(), 10.0);
        let l = lsi_from_lyapunov(10.0, 1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((l.inv_alpha - (2.0 * 0.15f64.sqrt() + 2.0)).abs() < 1e-12);
        assert!((2.0 * l.c1.sqrt() + l.c2 - l.inv_alpha).abs() < 1e-12);
        let big = lsi_from_lyapunov(1e12, 0.0, 0.5, 0.0, 1.0, 0.0).unwrap();
        assert!((big.inv_alpha - 4.0).abs() < 1e-5);
        assert!((second_moment_bound(10.0, 1.0, 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(second_moment_bound(4.0, 0.0, 3.0).unwrap(), 0.25);
        assert!(pi_from_lyapunov(-1.0, 0.0, 1.0).is_err());
        assert!(second_moment_bound(0.0, 1.0, 1.0).is_err());
    }
}
