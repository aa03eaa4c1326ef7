//! The Gibbs measure μ ∝ e^{−H/ε}, its basin restrictions μ_i, and the
//! truncated Gaussians ν_i that approximate them.
//!
//! All partition sums are taken relative to the energy of the global minimum:
//! `Z_μ = ∫ e^{−(H − H(m₁))/ε} dx`. Every ratio used downstream is invariant
//! under this shift.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::expr::Potential;
use crate::grid::{Bounds, Grid};
use crate::landscape::{label_grid, BasinLabels, LandscapeGraph};
use crate::linalg::quad_form;

/// Largest relative Richardson error estimate accepted from grid quadrature.
pub const QUADRATURE_RTOL: f64 = 1e-3;

/// Potential, temperature, analysis box and landscape.
#[derive(Debug, Clone)]
pub struct GibbsSpec {
    pub potential: Potential,
    pub epsilon: f64,
    pub bbox: Bounds,
    pub graph: LandscapeGraph,
}

impl GibbsSpec {
    /// Checks ε > 0 and that every critical point sits at least
    /// `3√(ε C_Σ)` inside the box.
    pub fn new(potential: Potential, epsilon: f64, bbox: Bounds, graph: LandscapeGraph) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::EpsilonOutOfRange(epsilon));
        }
        let spec = GibbsSpec { potential, epsilon, bbox, graph };
        let margin = 3.0 * (epsilon * spec.c_sigma()).sqrt();
        let inside = spec.graph.minima.iter().chain(&spec.graph.saddles).all(|c| spec.bbox.inner_margin(&c.location) >= margin);
        if !inside {
            return Err(Error::BoxTooSmall);
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.potential.dim
    }

    pub fn energy_ref(&self) -> f64 {
        self.graph.energy_ref()
    }

    /// Largest eigenvalue of Σ_i = (∇²H(m_i))⁻¹ over all minima, the squared
    /// spread of the widest local Gaussian at ε = 1.
    pub fn c_sigma(&self) -> f64 {
        self.graph.minima.iter().map(|m| 1.0 / m.hessian_eigenvalues[0]).fold(0.0, f64::max)
    }

    /// `−(H(x) − H(m₁))/ε`, or −∞ where H cannot be evaluated.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.potential.value(x).map_or(f64::NEG_INFINITY, |h| -(h - self.energy_ref()) / self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        GibbsSpec::new(self.potential.clone(), epsilon, self.bbox.clone(), self.graph.clone())
    }
}

/// Partition sums by Laplace asymptotics and, optionally, by quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionData {
    pub energy_ref: f64,
    pub z_mu_laplace: f64,
    /// Normalized basin weights, ordered like `graph.minima`.
    pub z_i_laplace: Vec<f64>,
    pub z_mu_quadrature: Option<f64>,
    pub z_i_quadrature: Option<Vec<f64>>,
    /// Richardson estimate of the relative quadrature error of Z_μ.
    pub quadrature_error: Option<f64>,
}

impl PartitionData {
    pub fn z_mu(&self, quadrature: bool) -> f64 {
        if quadrature {
            self.z_mu_quadrature.unwrap_or(self.z_mu_laplace)
        } else {
            self.z_mu_laplace
        }
    }

    pub fn z_i(&self, quadrature: bool) -> &[f64] {
        match (&self.z_i_quadrature, quadrature) {
            (Some(z), true) => z,
            _ => &self.z_i_laplace,
        }
    }

    /// `ε, Z_μ^quad, Z_μ^laplace, Z_1^quad, …` with 17 significant digits.
    pub fn csv_row(&self, epsilon: f64) -> String {
        let mut cols = vec![epsilon, self.z_mu_quadrature.unwrap_or(f64::NAN), self.z_mu_laplace];
        cols.extend(self.z_i_quadrature.clone().unwrap_or_else(|| vec![f64::NAN; self.z_i_laplace.len()]));
        cols.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
    }
}

/// Laplace asymptotics: `Z_i Z_μ ≈ (2πε)^{n/2}/√det ∇²H(m_i) · e^{−(H(m_i)−H(m₁))/ε}`.
pub fn laplace_partition(g: &GibbsSpec) -> PartitionData {
    let n = g.dim() as f64;
    let eps = g.epsilon;
    let terms: Vec<f64> = g
        .graph
        .minima
        .iter()
        .map(|m| (2.0 * std::f64::consts::PI * eps).powf(0.5 * n) / m.hessian_det().sqrt() * (-(m.energy - g.energy_ref()) / eps).exp())
        .collect();
    let z: f64 = terms.iter().sum();
    PartitionData {
        energy_ref: g.energy_ref(),
        z_mu_laplace: z,
        z_i_laplace: terms.iter().map(|t| t / z).collect(),
        z_mu_quadrature: None,
        z_i_quadrature: None,
        quadrature_error: None,
    }
}

/// Midpoint-rule discretization of μ with basin labels.
#[derive(Debug, Clone)]
pub struct GibbsGrid {
    pub labels: BasinLabels,
    /// Normalized μ-mass of each cell.
    pub mass: Vec<f64>,
    /// `∫ e^{−(H−H(m₁))/ε}` by the midpoint rule.
    pub z_mu: f64,
}

impl GibbsGrid {
    pub fn grid(&self) -> &Grid {
        &self.labels.grid
    }

    pub fn basin_weights(&self, m: usize) -> Vec<f64> {
        let mut z = vec![0.0; m];
        for (w, &l) in self.mass.iter().zip(&self.labels.labels) {
            z[l] += w;
        }
        z
    }
}

fn midpoint_sum(g: &GibbsSpec, grid: &Grid) -> (Vec<f64>, f64) {
    let w: Vec<f64> = (0..grid.len()).map(|k| g.log_density(&grid.point(k)).exp()).collect();
    let total: f64 = w.iter().sum::<f64>() * grid.cell_volume();
    (w, total)
}

/// Discretizes μ on `n` cells per axis of the analysis box (dim ≤ 2).
pub fn gibbs_grid(g: &GibbsSpec, n: usize) -> Result<GibbsGrid> {
    if g.dim() > 2 {
        return Err(Error::Invalid("grid quadrature needs dim ≤ 2".into()));
    }
    let grid = Grid::new(g.bbox.clone(), n);
    let (w, z_mu) = midpoint_sum(g, &grid);
    let labels = label_grid(&g.potential, &g.graph.minima, &grid)?;
    let total: f64 = w.iter().sum();
    Ok(GibbsGrid { labels, mass: w.iter().map(|v| v / total).collect(), z_mu })
}

/// Composite midpoint quadrature of Z_μ and the basin weights Z_i.
///
/// The error estimate compares `n` with `n/2` cells per axis.
pub fn quadrature_partition(g: &GibbsSpec, grid_resolution: usize) -> Result<PartitionData> {
    let fine = gibbs_grid(g, grid_resolution)?;
    let (_, coarse) = midpoint_sum(g, &Grid::new(g.bbox.clone(), grid_resolution / 2));
    let err = (fine.z_mu - coarse).abs() / 3.0 / fine.z_mu;
    if !(err <= QUADRATURE_RTOL) {
        return Err(Error::QuadratureUnderResolved(err));
    }
    let mut pd = laplace_partition(g);
    pd.z_mu_quadrature = Some(fine.z_mu);
    pd.z_i_quadrature = Some(fine.basin_weights(g.graph.minima.len()));
    pd.quadrature_error = Some(err);
    Ok(pd)
}

/// ω(ε) = |log ε|^{1/2}.
pub fn omega(epsilon: f64) -> f64 {
    epsilon.ln().abs().sqrt()
}

/// Gaussian with covariance ε(∇²H(m))⁻¹ restricted to the ellipsoid
/// `(x−m)ᵀ∇²H(m)(x−m) ≤ 2εω²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian {
    pub center: DVector<f64>,
    pub covariance_inverse: DMatrix<f64>,
    pub omega: f64,
    pub epsilon: f64,
    /// Normalized upper incomplete Gamma tail Γ(n/2, ω²)/Γ(n/2).
    pub tail: f64,
    pub z_nu: f64,
    /// Set when ω² < n, outside the regime of the tail expansion.
    pub epsilon_too_large: bool,
}

impl TruncatedGaussian {
    /// Truncated Gaussian with explicit parameters.
    pub fn new(center: DVector<f64>, covariance_inverse: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::EpsilonOutOfRange(epsilon));
        }
        let n = center.len() as f64;
        let w = omega(epsilon);
        let det = covariance_inverse.clone().cholesky().ok_or(Error::NotSpd)?.determinant();
        let tail = gamma_ur(0.5 * n, w * w);
        let z_nu = (2.0 * std::f64::consts::PI * epsilon).powf(0.5 * n) / det.sqrt() * (1.0 - tail);
        Ok(TruncatedGaussian {
            center,
            covariance_inverse,
            omega: w,
            epsilon,
            tail,
            z_nu,
            epsilon_too_large: w * w < n,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `Σ⁻¹[x − m]/(2ε)`; the support is where this is ≤ ω².
    pub fn scaled_radius_sq(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.center;
        quad_form(&self.covariance_inverse, &d) / (2.0 * self.epsilon)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let r2 = self.scaled_radius_sq(x);
        if r2 <= self.omega * self.omega {
            (-r2).exp() / self.z_nu
        } else {
            0.0
        }
    }

    /// Axis-aligned bounding box of the support.
    pub fn support_box(&self) -> Bounds {
        let cov = self.covariance_inverse.clone().try_inverse().expect("SPD");
        let r = (2.0 * self.epsilon).sqrt() * self.omega;
        let (lo, hi) = (0..self.dim())
            .map(|k| {
                let half = r * cov[(k, k)].sqrt();
                (self.center[k] - half, self.center[k] + half)
            })
            .unzip();
        Bounds { lo, hi }
    }
}

/// ν_i around minimum `i` of the landscape.
pub fn build_truncated_gaussian(g: &GibbsSpec, i: usize) -> Result<TruncatedGaussian> {
    let m = g.graph.minima.get(i).ok_or_else(|| Error::Invalid(format!("no minimum {i}")))?;
    TruncatedGaussian::new(DVector::from_column_slice(&m.location), m.hessian(), g.epsilon)
}

fn nu_square_over_mu(g: &GibbsSpec, nu: &TruncatedGaussian, labels: &BasinLabels, i: usize, n: usize) -> f64 {
    let grid = Grid::new(nu.support_box(), n);
    let mut acc = 0.0;
    for k in 0..grid.len() {
        let x = grid.point(k);
        let r2 = nu.scaled_radius_sq(&x);
        if r2 > nu.omega * nu.omega || labels.label_of(&x).is_some_and(|l| l != i) {
            continue;
        }
        acc += (-2.0 * r2 - g.log_density(&x)).exp();
    }
    acc * grid.cell_volume()
}

/// Var_{μ_i}(dν_i/dμ_i) by quadrature over the support of ν_i (dim ≤ 2).
///
/// Cells of the support that lie in another basin are skipped.
pub fn relative_density_variance(g: &GibbsSpec, i: usize, grid_resolution: usize) -> Result<f64> {
    let nu = build_truncated_gaussian(g, i)?;
    let gg = gibbs_grid(g, grid_resolution)?;
    let z_mu_i = gg.basin_weights(g.graph.minima.len())[i] * gg.z_mu;
    let fine = nu_square_over_mu(g, &nu, &gg.labels, i, grid_resolution);
    let coarse = nu_square_over_mu(g, &nu, &gg.labels, i, grid_resolution / 2);
    let second = z_mu_i / (nu.z_nu * nu.z_nu);
    let var = second * fine - 1.0;
    let err = second * (fine - coarse).abs() / 3.0;
    if err > QUADRATURE_RTOL * (1.0 + var.abs()) {
        return Err(Error::QuadratureUnderResolved(err));
    }
    Ok(var)
}

/// Variance and entropy of the density between the Gaussians with
/// covariance σ·Id and Id in dimension n.
pub fn gaussian_remark_check(sigma: f64, n: usize) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveArgument(sigma));
    }
    let half_n = 0.5 * n as f64;
    let var = if sigma < 2.0 { (1.0 / (sigma * (2.0 - sigma))).powf(half_n) - 1.0 } else { f64::INFINITY };
    Ok((var, half_n * (sigma - 1.0 - sigma.ln())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remark_values() {
        assert_eq!(gaussian_remark_check(1.0, 3).unwrap(), (0.0, 0.0));
        let (v, e) = gaussian_remark_check(0.5, 2).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert!((e - (0.5 - 1.0 - 0.5f64.ln())).abs() < 1e-15);
        let (v, e) = gaussian_remark_check(2.0, 1).unwrap();
        assert_eq!(v, f64::INFINITY);
        assert!((e - 0.5 * (1.0 - 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn truncated_gaussian_limits() {
        let m = DVector::from_vec(vec![0.0]);
        let hinv = DMatrix::from_row_slice(1, 1, &[8.0]);
        let nu = TruncatedGaussian::new(m.clone(), hinv.clone(), 0.05).unwrap();
        let full = (2.0 * std::f64::consts::PI * 0.05 / 8.0).sqrt();
        assert!(nu.tail > 0.0 && nu.tail < 0.05);
        assert!((nu.z_nu - full * (1.0 - nu.tail)).abs() < 1e-15);
        let tiny = TruncatedGaussian::new(m, hinv, 1e-300).unwrap();
        assert!((tiny.z_nu / (2.0 * std::f64::consts::PI * 1e-300 / 8.0).sqrt() - 1.0).abs() < 1e-12);
        let wide = TruncatedGaussian::new(DVector::zeros(4), DMatrix::identity(4, 4), 0.5).unwrap();
        assert!(wide.epsilon_too_large);
        assert!(TruncatedGaussian::new(DVector::zeros(1), DMatrix::identity(1, 1), 1.0).is_err());
    }
}
