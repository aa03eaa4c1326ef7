//! Eyring–Kramers predictions for the Poincaré and log-Sobolev constants.

use crate::error::{Error, Result};
use crate::means::log_mean;
use crate::measures::{GibbsSpec, PartitionData};

/// Which partition sums enter the formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZSource {
    #[default]
    Laplace,
    Quadrature,
}

/// One pair (i, j), i < j, and its contribution to 1/ρ and 2/α.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    /// Natural log of the mean-difference prefactor times `e^{(H(s_ij)−H(m₁))/ε}`.
    pub log_mean_difference: f64,
    pub pi_term: f64,
    pub lsi_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EKResult {
    pub epsilon: f64,
    /// The bound on 1/ρ, i.e. the largest PI pair term.
    pub inv_rho: f64,
    pub log_inv_rho: f64,
    /// The bound on 2/α, i.e. the largest LSI pair term.
    pub inv_alpha_times2: f64,
    /// `inv_rho / Λ(Z₁, Z₂)`, the ratio form of the LSI bound.
    pub inv_alpha_ratio_form: f64,
    /// Argmax of the PI pair terms; minima are 0-based.
    pub dominant_pair: (usize, usize),
    pub per_pair_terms: Vec<PairTerm>,
    pub z_source: ZSource,
    /// Set when the landscape has a single minimum; all constants are then 0.
    pub no_metastability: bool,
}

impl EKResult {
    /// ρ/α as implied by the two bounds.
    pub fn ratio_rho_alpha(&self) -> f64 {
        0.5 * self.inv_alpha_times2 / self.inv_rho
    }

    /// `epsilon, inv_rho, inv_alpha_times2, ratio_rho_alpha, dominant_i, dominant_j`
    /// with 1-based minimum labels.
    pub fn csv_row(&self) -> String {
        let nums = [self.epsilon, self.inv_rho, self.inv_alpha_times2, self.ratio_rho_alpha()];
        let mut cols: Vec<String> = nums.iter().map(|v| format!("{v:.16e}")).collect();
        cols.push((self.dominant_pair.0 + 1).to_string());
        cols.push((self.dominant_pair.1 + 1).to_string());
        cols.join(",")
    }

    pub const CSV_HEADER: &'static str = "epsilon,inv_rho,inv_alpha_times2,ratio_rho_alpha,dominant_i,dominant_j";
}

/// log of `Z_μ/(2πε)^{n/2} · 2πε√|det ∇²H(s)|/|λ⁻(s)| · e^{(H(s)−H(m₁))/ε}`.
pub(crate) fn log_mean_difference(g: &GibbsSpec, z_mu: f64, i: usize, j: usize) -> Result<f64> {
    let s = g.graph.saddle(i, j).ok_or(Error::MissingSaddle(i, j))?;
    let n = g.dim() as f64;
    let two_pi_eps = 2.0 * std::f64::consts::PI * g.epsilon;
    Ok(z_mu.ln() - 0.5 * n * two_pi_eps.ln()
        + two_pi_eps.ln()
        + 0.5 * s.hessian_det().abs().ln()
        - (-s.lambda_minus()).ln()
        + (s.energy - g.energy_ref()) / g.epsilon)
}

/// Evaluates both corollary displays over every pair of minima.
fn evaluate(g: &GibbsSpec, pd: &PartitionData, source: ZSource) -> Result<EKResult> {
    let quad = source == ZSource::Quadrature;
    if quad && pd.z_mu_quadrature.is_none() {
        return Err(Error::Invalid("quadrature partition sums requested but not computed".into()));
    }
    let z = pd.z_i(quad);
    let m = g.graph.minima.len();
    if z.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: z.len() });
    }
    if m < 2 {
        return Ok(EKResult {
            epsilon: g.epsilon,
            inv_rho: 0.0,
            log_inv_rho: f64::NEG_INFINITY,
            inv_alpha_times2: 0.0,
            inv_alpha_ratio_form: 0.0,
            dominant_pair: (0, 0),
            per_pair_terms: Vec::new(),
            z_source: source,
            no_metastability: true,
        });
    }
    let mut terms = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let lmd = log_mean_difference(g, pd.z_mu(quad), i, j)?;
            let zz = z[i] * z[j];
            terms.push(PairTerm {
                i,
                j,
                log_mean_difference: lmd,
                pi_term: zz * lmd.exp(),
                lsi_term: zz / log_mean(z[i], z[j])? * lmd.exp(),
            });
        }
    }
    let dom = terms.iter().max_by(|a, b| (a.log_mean_difference + (z[a.i] * z[a.j]).ln()).total_cmp(&(b.log_mean_difference + (z[b.i] * z[b.j]).ln()))).unwrap();
    let lsi = terms.iter().map(|t| t.lsi_term).fold(0.0, f64::max);
    let inv_rho = dom.pi_term;
    Ok(EKResult {
        epsilon: g.epsilon,
        inv_rho,
        log_inv_rho: dom.log_mean_difference + (z[dom.i] * z[dom.j]).ln(),
        inv_alpha_times2: lsi,
        inv_alpha_ratio_form: inv_rho / log_mean(z[0], z[1])?,
        dominant_pair: (dom.i, dom.j),
        per_pair_terms: terms.clone(),
        z_source: source,
        no_metastability: false,
    })
}

/// The PI prediction `1/ρ ≲ max_{i<j} Z_i Z_j · Z_μ/(2πε)^{n/2} · 2πε√|det ∇²H(s_ij)|/|λ⁻(s_ij)| · e^{H(s_ij)/ε}`.
pub fn ek_pi(g: &GibbsSpec, pd: &PartitionData, source: ZSource) -> Result<EKResult> {
    evaluate(g, pd, source)
}

/// The LSI prediction, with the extra weight 1/Λ(Z_i, Z_j) per pair.
///
/// Shares the evaluation with [`ek_pi`]; both constants are always filled in.
pub fn ek_lsi(g: &GibbsSpec, pd: &PartitionData, source: ZSource) -> Result<EKResult> {
    evaluate(g, pd, source)
}

/// Which closed form applies to a two-well landscape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WellCase {
    /// H(m₁) < H(m₂) by more than the tolerance.
    EnergyGap(f64),
    /// |H(m₁) − H(m₂)| within tolerance; `warning` marks a nonzero gap.
    Symmetric { gap: f64, warning: bool },
}

/// Energies closer than this are treated as equal.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialCaseReport {
    pub case: WellCase,
    /// κ_i = √det ∇²H(m_i).
    pub kappa: (f64, f64),
    pub inv_rho: f64,
    pub inv_alpha_times2: f64,
    /// `((κ₁+κ₂)/2)/Λ(κ₁,κ₂)`, which bounds ρ/α in the symmetric case.
    pub quotient: f64,
}

/// Closed forms in terms of κ_i for two wells.
///
/// Gap case: `1/ρ ≈ κ₂⁻¹·P·e^{(H(s)−H(m₂))/ε}` and
/// `2/α ≲ ((H(m₂)−H(m₁))/ε + log(κ₂/κ₁))·(1/ρ)`, where
/// `P = 2πε√|det ∇²H(s)|/|λ⁻(s)|`.
/// Symmetric case: `1/ρ ≈ P·e^{…}/(κ₁+κ₂)` and `2/α ≲ P·e^{…}/Λ(κ₁,κ₂)`.
pub fn ek_special_cases(g: &GibbsSpec) -> Result<SpecialCaseReport> {
    let mins = &g.graph.minima;
    if mins.len() != 2 {
        return Err(Error::NotTwoWells(mins.len()));
    }
    let s = g.graph.saddle(0, 1).ok_or(Error::MissingSaddle(0, 1))?;
    let eps = g.epsilon;
    let k1 = mins[0].hessian_det().sqrt();
    let k2 = mins[1].hessian_det().sqrt();
    let gap = mins[1].energy - mins[0].energy;
    let prefactor = 2.0 * std::f64::consts::PI * eps * s.hessian_det().abs().sqrt() / -s.lambda_minus()
        * ((s.energy - mins[1].energy) / eps).exp();
    let quotient = 0.5 * (k1 + k2) / log_mean(k1, k2)?;
    let (case, inv_rho, inv_alpha_times2) = if gap.abs() <= SYMMETRY_TOL {
        (
            WellCase::Symmetric { gap, warning: gap != 0.0 },
            prefactor / (k1 + k2),
            prefactor / log_mean(k1, k2)?,
        )
    } else {
        let inv_rho = prefactor / k2;
        (WellCase::EnergyGap(gap), inv_rho, (gap / eps + (k2 / k1).ln()) * inv_rho)
    };
    Ok(SpecialCaseReport { case, kappa: (k1, k2), inv_rho, inv_alpha_times2, quotient })
}
