//! Functional inequalities for finite mixtures μ = Σ Z_i μ_i and for
//! discrete measures on {1, …, M}.
//!
//! Entropy is `Ent_μ(f) = ∫ f log(f / ∫f dμ) dμ` with `0 log 0 = 0`.

use crate::error::{Error, Result};
use crate::means::log_mean;

/// Strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&z| !(z > 0.0 && z.is_finite())) {
            return Err(Error::Invalid("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(DiscreteMeasure { weights })
    }

    /// Normalizes positive masses to a probability vector.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        Self::new(masses.iter().map(|m| m / total).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Per-component statistics of a test function f.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStats {
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub local_variance: Vec<f64>,
    /// `Ent_{μ_i}(f)`; only meaningful for f ≥ 0.
    pub local_entropy: Vec<f64>,
}

/// A function sampled on weighted nodes, each node belonging to one component.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
    /// Unnormalized μ-mass of each node.
    pub masses: Vec<f64>,
    /// Component index of each node.
    pub labels: Vec<usize>,
    pub components: usize,
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn entropy(weights: &[f64], f: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mean: f64 = weights.iter().zip(f).map(|(w, v)| w * v).sum::<f64>() / total;
    let e: f64 = weights.iter().zip(f).map(|(w, v)| w * xlogx(*v)).sum::<f64>() / total;
    e - xlogx(mean)
}

impl GridFunction {
    fn check(&self) -> Result<()> {
        let n = self.values.len();
        for len in [self.masses.len(), self.labels.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if self.labels.iter().any(|&l| l >= self.components) {
            return Err(Error::Invalid("label out of range".into()));
        }
        Ok(())
    }

    /// Component weights `Z_i = μ(Ω_i)`.
    pub fn measure(&self) -> Result<DiscreteMeasure> {
        self.check()?;
        let mut m = vec![0.0; self.components];
        for (w, &l) in self.masses.iter().zip(&self.labels) {
            m[l] += w;
        }
        DiscreteMeasure::from_masses(&m)
    }

    pub fn stats(&self) -> Result<ComponentStats> {
        self.check()?;
        let k = self.components;
        let mut stats = ComponentStats {
            mean: vec![0.0; k],
            second_moment: vec![0.0; k],
            local_variance: vec![0.0; k],
            local_entropy: vec![0.0; k],
        };
        for c in 0..k {
            let (w, f): (Vec<f64>, Vec<f64>) = self
                .masses
                .iter()
                .zip(&self.values)
                .zip(&self.labels)
                .filter(|(_, &l)| l == c)
                .map(|((w, v), _)| (*w, *v))
                .unzip();
            let total: f64 = w.iter().sum();
            let mean = w.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() / total;
            stats.mean[c] = mean;
            stats.second_moment[c] = w.iter().zip(&f).map(|(a, b)| a * b * b).sum::<f64>() / total;
            stats.local_variance[c] = w.iter().zip(&f).map(|(a, b)| a * (b - mean).powi(2)).sum::<f64>() / total;
            stats.local_entropy[c] = if f.iter().all(|v| *v >= 0.0) { entropy(&w, &f) } else { f64::NAN };
        }
        Ok(stats)
    }

    pub fn variance(&self) -> f64 {
        let total: f64 = self.masses.iter().sum();
        let mean = self.masses.iter().zip(&self.values).map(|(a, b)| a * b).sum::<f64>() / total;
        self.masses.iter().zip(&self.values).map(|(a, b)| a * (b - mean).powi(2)).sum::<f64>() / total
    }

    pub fn entropy(&self) -> Result<f64> {
        if self.values.iter().any(|v| *v < 0.0) {
            return Err(Error::NegativeFunction);
        }
        Ok(entropy(&self.masses, &self.values))
    }
}

/// A quantity split into a within-component and a between-component part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub total: f64,
    pub local: f64,
    pub between: f64,
    /// The same quantity computed directly from grid data, when supplied.
    pub direct: Option<f64>,
}

fn check_len(z: &DiscreteMeasure, len: usize) -> Result<()> {
    if len != z.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: len });
    }
    Ok(())
}

/// Var_μ(f) = Σ Z_i Var_{μ_i}(f) + Σ_{i<j} Z_i Z_j (E_i f − E_j f)².
pub fn split_variance(z: &DiscreteMeasure, s: &ComponentStats, grid: Option<&GridFunction>) -> Result<Split> {
    check_len(z, s.mean.len())?;
    check_len(z, s.local_variance.len())?;
    let w = z.weights();
    let local: f64 = w.iter().zip(&s.local_variance).map(|(a, v)| a * v).sum();
    let mut between = 0.0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            between += w[i] * w[j] * (s.mean[i] - s.mean[j]).powi(2);
        }
    }
    Ok(Split { total: local + between, local, between, direct: grid.map(GridFunction::variance) })
}

/// Ent_μ(f) = Σ Z_i Ent_{μ_i}(f) + Ent_μ̄(f̄) with f̄_i = E_{μ_i} f.
pub fn split_entropy(z: &DiscreteMeasure, s: &ComponentStats, grid: Option<&GridFunction>) -> Result<Split> {
    check_len(z, s.mean.len())?;
    check_len(z, s.local_entropy.len())?;
    if s.mean.iter().any(|m| *m < 0.0) || s.local_entropy.iter().any(|e| e.is_nan()) {
        return Err(Error::NegativeFunction);
    }
    let w = z.weights();
    let local: f64 = w.iter().zip(&s.local_entropy).map(|(a, e)| a * e).sum();
    let between = entropy(w, &s.mean);
    let direct = grid.map(GridFunction::entropy).transpose()?;
    Ok(Split { total: local + between, local, between, direct })
}

/// Optimal constant `pq/Λ(p,q)` of the two-point LSI
/// `Ent(f²) ≤ c (f(0) − f(1))²` under Bernoulli(p).
pub fn two_point_lsi_constant(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange(p));
    }
    let q = 1.0 - p;
    Ok(p * q / log_mean(p, q)?)
}

fn pair_weight(zi: f64, zj: f64) -> Result<f64> {
    Ok(zi * zj / log_mean(zi, zj)?)
}

/// Both sides of `Ent_Z(f²) ≤ Σ_{i<j} Z_i Z_j/Λ(Z_i,Z_j) (f_i − f_j)²`.
pub fn weighted_lsi_rhs(z: &DiscreteMeasure, f: &[f64]) -> Result<(f64, f64)> {
    check_len(z, f.len())?;
    if f.iter().any(|v| *v < 0.0) {
        return Err(Error::NegativeFunction);
    }
    let w = z.weights();
    let f2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let lhs = entropy(w, &f2);
    let mut rhs = 0.0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            rhs += pair_weight(w[i], w[j])? * (f[i] - f[j]).powi(2);
        }
    }
    Ok((lhs, rhs))
}

/// Intermediate bound from the induction step of the weighted LSI: the
/// last component is compared against the merged rest through
/// `Λ(Z_M, 1 − Z_M)`. It sits between the two sides of `weighted_lsi_rhs`.
pub fn weighted_lsi_merged(z: &DiscreteMeasure, f: &[f64]) -> Result<f64> {
    check_len(z, f.len())?;
    let w = z.weights();
    let m = w.len();
    if m < 2 {
        return Ok(0.0);
    }
    let last = m - 1;
    let mut merged = 0.0;
    for i in 0..last {
        for j in i + 1..last {
            merged += pair_weight(w[i], w[j])? * (f[i] - f[j]).powi(2);
        }
    }
    let c = w[last] / log_mean(w[last], 1.0 - w[last])?;
    for i in 0..last {
        merged += c * w[i] * (f[i] - f[last]).powi(2);
    }
    Ok(merged)
}

/// Both sides of the coarse-grained entropy estimate for `f²`:
/// `Ent_Z(E_i f²) ≤ Σ_i [Σ_{j≠i} Z_iZ_j Var_i/Λ(Z_i,Z_j) + Σ_{j>i} Z_iZ_j/Λ(Z_i,Z_j) (E_i f − E_j f)²]`.
pub fn coarse_entropy_bound(z: &DiscreteMeasure, s: &ComponentStats) -> Result<(f64, f64)> {
    for len in [s.mean.len(), s.second_moment.len(), s.local_variance.len()] {
        check_len(z, len)?;
    }
    let w = z.weights();
    let lhs = entropy(w, &s.second_moment);
    let mut rhs = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            if j == i {
                continue;
            }
            let c = pair_weight(w[i], w[j])?;
            rhs += c * s.local_variance[i];
            if j > i {
                rhs += c * (s.mean[i] - s.mean[j]).powi(2);
            }
        }
    }
    Ok((lhs, rhs))
}

/// LSI constant from a defective LSI and a PI: `1/α = 1/α_d + (B + 2)/ρ`.
pub fn tighten_defective_lsi(alpha_d: f64, b: f64, rho: f64) -> Result<f64> {
    for v in [alpha_d, rho] {
        if !(v > 0.0) {
            return Err(Error::NonPositiveArgument(v));
        }
    }
    if !(b >= 0.0) {
        return Err(Error::NonPositiveArgument(b));
    }
    Ok(1.0 / (1.0 / alpha_d + (b + 2.0) / rho))
}

/// Rothaus linearization on a discrete measure: `Ent((1+ηg)²)/(2η²)` at two
/// step sizes, Richardson-extrapolated to η = 0. Returns `(Var(g), extrapolated)`.
pub fn rothaus_linearization(z: &DiscreteMeasure, g: &[f64], eta: (f64, f64)) -> Result<(f64, f64)> {
    check_len(z, g.len())?;
    let w = z.weights();
    let r = |e: f64| {
        let f2: Vec<f64> = g.iter().map(|v| (1.0 + e * v).powi(2)).collect();
        entropy(w, &f2) / (2.0 * e * e)
    };
    let (e1, e2) = eta;
    let extrapolated = (e1 * r(e2) - e2 * r(e1)) / (e1 - e2);
    let mean: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
    let var: f64 = w.iter().zip(g).map(|(a, b)| a * (b - mean).powi(2)).sum();
    Ok((var, extrapolated))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: &[f64], var: &[f64]) -> ComponentStats {
        ComponentStats {
            mean: mean.to_vec(),
            second_moment: mean.iter().zip(var).map(|(m, v)| v + m * m).collect(),
            local_variance: var.to_vec(),
            local_entropy: vec![0.0; mean.len()],
        }
    }

    #[test]
    fn variance_split_examples() {
        let z = DiscreteMeasure::new(vec![0.5, 0.3, 0.2]).unwrap();
        let s = split_variance(&z, &stats(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]), None).unwrap();
        assert!((s.total - 1.61).abs() < 1e-15);
        let z = DiscreteMeasure::new(vec![0.25, 0.75]).unwrap();
        let s = split_variance(&z, &stats(&[1.0, 4.0], &[0.0, 0.0]), None).unwrap();
        assert!((s.total - 0.25 * 0.75 * 9.0).abs() < 1e-15);
        let s = split_variance(&z, &stats(&[2.0, 2.0], &[0.5, 0.5]), None).unwrap();
        assert_eq!(s.between, 0.0);
    }

    #[test]
    fn entropy_split_examples() {
        let z = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let s = split_entropy(&z, &stats(&[1.0, 3.0], &[0.0, 0.0]), None).unwrap();
        let expect = 0.5 * (0.5f64).ln() + 1.5 * (1.5f64).ln();
        assert!((s.between - expect).abs() < 1e-15);
        assert!((s.between - 0.2616).abs() < 1e-4);
        let s = split_entropy(&z, &stats(&[2.0, 2.0], &[0.0, 0.0]), None).unwrap();
        assert_eq!((s.total, s.local, s.between), (0.0, 0.0, 0.0));
        assert_eq!(split_entropy(&z, &stats(&[-1.0, 2.0], &[0.0, 0.0]), None), Err(Error::NegativeFunction));
    }

    #[test]
    fn two_point_constant() {
        assert!((two_point_lsi_constant(0.5).unwrap() - 0.5).abs() < 1e-15);
        let c = two_point_lsi_constant(0.1).unwrap();
        assert!((c - 0.09 * 9f64.ln() / 0.8).abs() < 1e-15);
        assert!((c - 0.24720).abs() < 1e-4);
    }

    #[test]
    fn weighted_lsi_two_components_is_bernoulli() {
        let z = DiscreteMeasure::new(vec![0.3, 0.7]).unwrap();
        let (_, rhs) = weighted_lsi_rhs(&z, &[1.0, 2.5]).unwrap();
        assert!((rhs - two_point_lsi_constant(0.3).unwrap() * 2.25).abs() < 1e-14);
        assert_eq!(weighted_lsi_rhs(&z, &[2.0, 2.0]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn coarse_bound_two_components() {
        let z = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let (lhs, rhs) = coarse_entropy_bound(&z, &stats(&[0.0, 1.0], &[0.1, 0.1])).unwrap();
        // E f² = (0.1, 1.1); mean 0.6. Λ(½,½) = ½ so each pair weight is ½.
        let expect_lhs = 0.5 * 0.1 * (0.1f64 / 0.6).ln() + 0.5 * 1.1 * (1.1f64 / 0.6).ln();
        assert!((lhs - expect_lhs).abs() < 1e-15);
        assert!((rhs - (0.5 * 0.1 * 2.0 + 0.5)).abs() < 1e-15);
        assert!(lhs < rhs);
        assert_eq!(coarse_entropy_bound(&z, &stats(&[1.0, 1.0], &[0.0, 0.0])).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn defective_tightening() {
        assert!((tighten_defective_lsi(1.0, 0.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((tighten_defective_lsi(2.0, 3.0, 4.0).unwrap() - 1.0 / 1.75).abs() < 1e-15);
        assert!((tighten_defective_lsi(2.0, 0.0, 1e15).unwrap() - 2.0).abs() < 1e-12);
        assert!(tighten_defective_lsi(0.0, 1.0, 1.0).is_err());
        assert!(tighten_defective_lsi(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn rothaus_two_point() {
        let z = DiscreteMeasure::new(vec![0.3, 0.7]).unwrap();
        let (var, ext) = rothaus_linearization(&z, &[1.0, -2.0], (1e-2, 1e-3)).unwrap();
        assert!((var - ext).abs() < 1e-4);
    }
}
