//! Critical points, basins of attraction and saddle heights of a potential
//! on a bounding box.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Potential;
use crate::grid::{Bounds, Grid};
use crate::linalg::sym_eigen;

/// Eigenvalues with magnitude below this violate the Morse condition.
pub const DEGENERATE_TOL: f64 = 1e-8;
/// Critical points closer than this are the same point.
pub const MERGE_TOL: f64 = 1e-6;
/// Saddles closer than this in height compete for the same pair.
pub const HEIGHT_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 20;
const FLOW_GRAD_TOL: f64 = 1e-8;
const SNAP_TOL: f64 = 1e-3;
const SADDLE_PERTURBATION: f64 = 1e-6;

/// A non-degenerate critical point with its Hessian eigenframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub energy: f64,
    /// Ascending.
    pub hessian_eigenvalues: Vec<f64>,
    /// `hessian_eigenvectors[k]` belongs to `hessian_eigenvalues[k]`.
    pub hessian_eigenvectors: Vec<Vec<f64>>,
    pub morse_index: usize,
}

impl CriticalPoint {
    /// Classifies `x`, which is assumed to be a critical point of `p`.
    pub fn classify(p: &Potential, x: &[f64]) -> Result<Self> {
        let j = p.jet(x)?;
        let (vals, vecs) = sym_eigen(&j.hessian());
        if let Some(&bad) = vals.iter().find(|v| v.abs() < DEGENERATE_TOL) {
            return Err(Error::DegenerateCriticalPoint { location: x.to_vec(), eigenvalue: bad });
        }
        Ok(CriticalPoint {
            location: x.to_vec(),
            energy: j.value,
            morse_index: vals.iter().filter(|v| **v < 0.0).count(),
            hessian_eigenvectors: (0..vals.len()).map(|k| vecs.column(k).iter().copied().collect()).collect(),
            hessian_eigenvalues: vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn is_minimum(&self) -> bool {
        self.morse_index == 0
    }

    /// The most negative eigenvalue λ⁻ (the smallest eigenvalue for any point).
    pub fn lambda_minus(&self) -> f64 {
        self.hessian_eigenvalues[0]
    }

    /// Eigenvector of the smallest eigenvalue.
    pub fn unstable_direction(&self) -> &[f64] {
        &self.hessian_eigenvectors[0]
    }

    /// det ∇²H as the product of eigenvalues.
    pub fn hessian_det(&self) -> f64 {
        self.hessian_eigenvalues.iter().product()
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for (lam, v) in self.hessian_eigenvalues.iter().zip(&self.hessian_eigenvectors) {
            let v = DVector::from_column_slice(v);
            h += *lam * &v * v.transpose();
        }
        h
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
}

/// Damped Newton iteration on ∇H = 0; `None` if the iterate leaves `fence`
/// or does not converge.
fn newton(p: &Potential, x0: &[f64], fence: &Bounds) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut j = p.jet(&x).ok()?;
    let mut res = norm(&j.gradient);
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        let hess = j.hessian();
        if res <= 1e-10 * (1.0 + hess.norm()) {
            converged = true;
            break;
        }
        let g = DVector::from_column_slice(&j.gradient);
        let step = hess.clone().lu().solve(&(-&g)).filter(|s| s.iter().all(|v| v.is_finite())).unwrap_or(-g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Ok(cj) = p.jet(&cand) {
                let cres = norm(&cj.gradient);
                if cres < res {
                    accepted = Some((cand, cj, cres));
                    break;
                }
                accepted = Some((cand, cj, cres));
            }
            t *= 0.5;
        }
        let (cand, cj, cres) = accepted?;
        if !fence.contains(&cand) {
            return None;
        }
        x = cand;
        j = cj;
        res = cres;
    }
    if !converged {
        return None;
    }
    // Polish while the residual keeps halving; this also drives iterates of
    // degenerate points far enough in that the degeneracy becomes visible.
    for _ in 0..400 {
        let hess = j.hessian();
        let g = DVector::from_column_slice(&j.gradient);
        let Some(step) = hess.lu().solve(&(-g)) else { break };
        let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
        let Ok(cj) = p.jet(&cand) else { break };
        let cres = norm(&cj.gradient);
        if !(cres <= 0.5 * res) {
            break;
        }
        x = cand;
        j = cj;
        res = cres;
        if res == 0.0 {
            break;
        }
    }
    Some(x)
}

fn auto_seeds(p: &Potential, bx: &Bounds) -> Result<Vec<Vec<f64>>> {
    let per_axis = match bx.dim() {
        1 => 201,
        2 => 41,
        3 => 15,
        d => return Err(Error::Invalid(format!("automatic seeding supports dim ≤ 3, got {d}"))),
    };
    // Node grid including the box faces.
    let nodes = Grid::new(bx.inflate(per_axis as f64 / (per_axis - 1) as f64), per_axis);
    let r: Vec<f64> = (0..nodes.len())
        .map(|k| p.jet(&nodes.point(k)).map(|j| j.grad_norm_sq()).unwrap_or(f64::INFINITY))
        .collect();
    Ok((0..nodes.len())
        .filter(|&k| r[k].is_finite() && nodes.neighbours(k).iter().all(|&m| r[k] < r[m] || (r[k] == r[m] && k < m)))
        .map(|k| nodes.point(k))
        .collect())
}

/// All critical points of `p` inside `bx`, sorted lexicographically by location.
pub fn find_critical_points(p: &Potential, bx: &Bounds, seeds: Option<&[Vec<f64>]>) -> Result<Vec<CriticalPoint>> {
    if bx.dim() != p.dim {
        return Err(Error::DimensionMismatch { expected: p.dim, found: bx.dim() });
    }
    let seeds = match seeds {
        Some(s) => s.to_vec(),
        None => auto_seeds(p, bx)?,
    };
    let fence = bx.inflate(1.5);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut any_converged = false;
    for s in &seeds {
        if let Some(x) = newton(p, s, &fence) {
            any_converged = true;
            let tol = 1e-9 * (1.0 + norm(&x));
            let inside = x.iter().enumerate().all(|(k, v)| *v >= bx.lo[k] - tol && *v <= bx.hi[k] + tol);
            if inside && !found.iter().any(|f| dist(f, &x) < MERGE_TOL) {
                found.push(x);
            }
        }
    }
    if !any_converged {
        return Err(Error::NoConvergence);
    }
    found.sort_by(|a, b| lex_cmp(a, b));
    found.iter().map(|x| CriticalPoint::classify(p, x)).collect()
}

/// Radius and energy threshold of a region around a minimum from which the
/// gradient flow provably stays and converges: the sublevel set below
/// `energy` inside a ball on which the Hessian is positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Capture {
    radius: f64,
    energy: f64,
}

fn sphere_directions(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for code in 1..3usize.pow(n as u32) {
        let mut c = code;
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let o = (c % 3) as f64 - 1.0;
                c /= 3;
                o
            })
            .collect();
        let nv = norm(&v);
        if nv > 0.0 {
            out.push(v.iter().map(|x| x / nv).collect());
        }
    }
    if n == 2 {
        for k in 0..16 {
            let t = (k as f64 + 0.5) * std::f64::consts::PI / 8.0;
            out.push(vec![t.cos(), t.sin()]);
        }
    }
    out
}

fn capture_region(p: &Potential, m: &CriticalPoint) -> Capture {
    let dirs = sphere_directions(m.dim());
    let scale = 1.0 / m.hessian_eigenvalues.last().copied().unwrap_or(1.0).abs().sqrt().max(1e-3);
    let mut r = scale;
    let pd_at = |x: &[f64]| p.jet(x).map(|j| sym_eigen(&j.hessian()).0[0] > 0.0).unwrap_or(false);
    for _ in 0..40 {
        let ok = dirs.iter().all(|d| {
            [0.25, 0.5, 0.75, 1.0].iter().all(|f| {
                let x: Vec<f64> = m.location.iter().zip(d).map(|(a, b)| a + f * r * b).collect();
                pd_at(&x)
            })
        });
        if ok {
            break;
        }
        r *= 0.5;
    }
    let radius = 0.5 * r;
    let sphere_min = dirs
        .iter()
        .map(|d| {
            let x: Vec<f64> = m.location.iter().zip(d).map(|(a, b)| a + radius * b).collect();
            p.value(&x).unwrap_or(f64::NEG_INFINITY)
        })
        .fold(f64::INFINITY, f64::min);
    Capture { radius, energy: m.energy + 0.5 * (sphere_min - m.energy) }
}

/// Gradient-flow integrator shared by `assign_basin` and grid labeling.
struct Flow<'a> {
    p: &'a Potential,
    minima: &'a [CriticalPoint],
    captures: Vec<Capture>,
}

impl<'a> Flow<'a> {
    fn new(p: &'a Potential, minima: &'a [CriticalPoint], use_capture: bool) -> Self {
        let captures = minima
            .iter()
            .map(|m| if use_capture { capture_region(p, m) } else { Capture { radius: 0.0, energy: f64::NEG_INFINITY } })
            .collect();
        Flow { p, minima, captures }
    }

    fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.p.jet(y)?.gradient.iter().map(|g| -g).collect())
    }

    fn rk4(&self, y: &[f64], h: f64) -> Result<Vec<f64>> {
        let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, v)| x + s * v).collect() };
        let k1 = self.rhs(y)?;
        let k2 = self.rhs(&axpy(y, 0.5 * h, &k1))?;
        let k3 = self.rhs(&axpy(y, 0.5 * h, &k2))?;
        let k4 = self.rhs(&axpy(y, h, &k3))?;
        Ok((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    fn captured(&self, y: &[f64]) -> Option<usize> {
        let v = self.p.value(y).ok()?;
        self.minima
            .iter()
            .zip(&self.captures)
            .position(|(m, c)| dist(y, &m.location) < c.radius && v < c.energy)
    }

    fn fence(&self, x: &[f64]) -> Bounds {
        let n = x.len();
        let mut lo = x.to_vec();
        let mut hi = x.to_vec();
        for m in self.minima {
            for k in 0..n {
                lo[k] = lo[k].min(m.location[k]);
                hi[k] = hi[k].max(m.location[k]);
            }
        }
        for k in 0..n {
            let w = hi[k] - lo[k];
            lo[k] -= w + 1.0;
            hi[k] += w + 1.0;
        }
        Bounds { lo, hi }
    }

    fn basin(&self, x: &[f64]) -> Result<usize> {
        let fence = self.fence(x);
        let mut y = x.to_vec();
        let mut h = 1e-2;
        let mut perturbations = 0;
        for _ in 0..200_000 {
            if let Some(i) = self.captured(&y) {
                return Ok(i);
            }
            let j = self.p.jet(&y)?;
            if j.grad_norm_sq().sqrt() < FLOW_GRAD_TOL {
                if let Some(i) = self.minima.iter().position(|m| dist(&y, &m.location) < SNAP_TOL) {
                    return Ok(i);
                }
                if perturbations >= 5 {
                    return Err(Error::StagnatedAtSaddle(y));
                }
                perturbations += 1;
                let (_, vecs) = sym_eigen(&j.hessian());
                y.iter_mut().zip(vecs.column(0).iter()).for_each(|(a, v)| *a += SADDLE_PERTURBATION * v);
                continue;
            }
            let full = self.rk4(&y, h)?;
            let half = self.rk4(&self.rk4(&y, 0.5 * h)?, 0.5 * h)?;
            let err = dist(&full, &half) / 15.0;
            let tol = 1e-9 * (1.0 + norm(&y));
            if err <= tol {
                y = half;
                if !fence.contains(&y) {
                    return Err(Error::FlowDiverged(y));
                }
            }
            let factor = if err == 0.0 { 2.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.1, 2.0) };
            h = (h * factor).min(10.0);
        }
        Err(Error::NoConvergence)
    }
}

/// Index (into `minima`) of the minimum reached by the gradient flow from `x`.
pub fn assign_basin(p: &Potential, x: &[f64], minima: &[CriticalPoint]) -> Result<usize> {
    if minima.is_empty() {
        return Err(Error::Invalid("no minima".into()));
    }
    Flow::new(p, minima, false).basin(x)
}

/// Basin labels cached on a cell-centred grid.
#[derive(Debug, Clone)]
pub struct BasinLabels {
    pub grid: Grid,
    pub labels: Vec<usize>,
    /// Cells whose flow could not be resolved; they keep their descent label.
    pub ambiguous: Vec<bool>,
    pub ambiguous_fraction: f64,
}

impl BasinLabels {
    /// Label of the cell containing `x`; `None` outside the grid.
    pub fn label_of(&self, x: &[f64]) -> Option<usize> {
        let g = &self.grid;
        if !g.bounds.contains(x) {
            return None;
        }
        let multi: Vec<usize> =
            (0..g.dim()).map(|k| (((x[k] - g.bounds.lo[k]) / g.h[k]) as usize).min(g.n - 1)).collect();
        Some(self.labels[g.flat_index(&multi)])
    }

    /// Membership test for the basin of minimum `i`.
    pub fn membership(&self, i: usize, x: &[f64]) -> bool {
        self.label_of(x) == Some(i)
    }
}

/// Labels every cell of `grid` by its basin.
///
/// Labels first follow discrete steepest descent; cells on a label boundary
/// are then re-labelled by the gradient flow, and re-labelling propagates to
/// neighbours until stable.
pub fn label_grid(p: &Potential, minima: &[CriticalPoint], grid: &Grid) -> Result<BasinLabels> {
    if minima.is_empty() {
        return Err(Error::Invalid("no minima".into()));
    }
    let n = grid.len();
    let values: Vec<f64> = (0..n).map(|k| p.value(&grid.point(k)).unwrap_or(f64::INFINITY)).collect();
    let flow = Flow::new(p, minima, true);
    let nearest = |x: &[f64]| {
        (0..minima.len()).min_by(|&a, &b| dist(x, &minima[a].location).total_cmp(&dist(x, &minima[b].location))).unwrap()
    };
    let next: Vec<usize> = (0..n)
        .map(|k| {
            let pk = grid.point(k);
            grid.neighbours(k)
                .into_iter()
                .filter(|&m| values[m] < values[k])
                .map(|m| (m, (values[m] - values[k]) / dist(&pk, &grid.point(m))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map_or(k, |(m, _)| m)
        })
        .collect();
    let mut labels = vec![usize::MAX; n];
    let mut ambiguous = vec![false; n];
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        let mut chain = vec![start];
        let mut k = start;
        while next[k] != k && labels[next[k]] == usize::MAX {
            k = next[k];
            chain.push(k);
        }
        let label = if next[k] != k {
            labels[next[k]]
        } else {
            let x = grid.point(k);
            match flow.basin(&x) {
                Ok(l) => l,
                Err(_) => {
                    ambiguous[k] = true;
                    nearest(&x)
                }
            }
        };
        for c in chain {
            labels[c] = label;
        }
    }
    let mut queue: VecDeque<usize> =
        (0..n).filter(|&k| grid.neighbours(k).iter().any(|&m| labels[m] != labels[k])).collect();
    let mut checked = vec![false; n];
    while let Some(k) = queue.pop_front() {
        if checked[k] {
            continue;
        }
        checked[k] = true;
        let x = grid.point(k);
        match flow.basin(&x) {
            Ok(l) => {
                ambiguous[k] = false;
                if l != labels[k] {
                    labels[k] = l;
                    queue.extend(grid.neighbours(k).into_iter().filter(|&m| !checked[m]));
                }
            }
            Err(_) => ambiguous[k] = true,
        }
    }
    let ambiguous_fraction = ambiguous.iter().filter(|a| **a).count() as f64 / n as f64;
    Ok(BasinLabels { grid: grid.clone(), labels, ambiguous, ambiguous_fraction })
}

/// Saddle communicating between minima `i` and `j`, with its height Ĥ(m_i, m_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Index into `LandscapeGraph::saddles`.
    pub saddle: usize,
    pub height: f64,
}

/// Minima in the standard order with their communicating saddles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGraph {
    /// `minima[0]` is the global minimum; `minima[1]` has the deepest
    /// well as seen from it, measured by H(s_{1,i}) − H(m_i).
    pub minima: Vec<CriticalPoint>,
    pub saddles: Vec<CriticalPoint>,
    /// One edge per unordered pair, i < j.
    pub edges: Vec<Edge>,
    /// `[H(s₁₂) − H(m₂)] − max_{i≥3} [H(s₁ᵢ) − H(mᵢ)]`; absent with fewer than three minima.
    pub delta_gap: Option<f64>,
    pub nondegeneracy_violation: bool,
    /// Pairs with a second index-1 saddle at the same height.
    pub non_unique_saddles: Vec<(usize, usize)>,
    pub ultrametric: bool,
}

impl LandscapeGraph {
    pub fn edge(&self, i: usize, j: usize) -> Option<&Edge> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.iter().find(|e| e.i == a && e.j == b)
    }

    pub fn saddle(&self, i: usize, j: usize) -> Option<&CriticalPoint> {
        self.edge(i, j).map(|e| &self.saddles[e.saddle])
    }

    pub fn height(&self, i: usize, j: usize) -> Option<f64> {
        self.edge(i, j).map(|e| e.height)
    }

    /// Global minimum energy, the reference level for partition sums.
    pub fn energy_ref(&self) -> f64 {
        self.minima[0].energy
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimax costs from `source`: the lowest achievable maximum of `values`
/// over grid paths, with predecessor links.
fn minimax_tree(grid: &Grid, values: &[f64], source: usize) -> (Vec<f64>, Vec<usize>) {
    let n = grid.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[source] = values[source];
    heap.push(HeapItem(values[source], source));
    while let Some(HeapItem(c, k)) = heap.pop() {
        if done[k] {
            continue;
        }
        done[k] = true;
        for m in grid.neighbours(k) {
            let nc = c.max(values[m]);
            if nc < cost[m] {
                cost[m] = nc;
                prev[m] = k;
                heap.push(HeapItem(nc, m));
            }
        }
    }
    (cost, prev)
}

fn nearest_node(grid: &Grid, x: &[f64]) -> usize {
    let multi: Vec<usize> = (0..grid.dim())
        .map(|k| (((x[k] - grid.bounds.lo[k]) / grid.h[k]).floor().max(0.0) as usize).min(grid.n - 1))
        .collect();
    grid.flat_index(&multi)
}

/// Basins reached from both sides of a saddle along its unstable direction.
fn saddle_ends(p: &Potential, s: &CriticalPoint, minima: &[CriticalPoint]) -> Option<(usize, usize)> {
    let flow = Flow::new(p, minima, true);
    let step = 1e-3 * (1.0 + norm(&s.location));
    let side = |sign: f64| {
        let x: Vec<f64> = s.location.iter().zip(s.unstable_direction()).map(|(a, v)| a + sign * step * v).collect();
        flow.basin(&x).ok()
    };
    let (a, b) = (side(1.0)?, side(-1.0)?);
    Some((a.min(b), a.max(b)))
}

/// Builds the saddle graph from classified critical points by grid minimax
/// paths. Requires dim ≤ 2.
pub fn saddle_graph(p: &Potential, cps: &[CriticalPoint], bx: &Bounds, grid_resolution: usize) -> Result<LandscapeGraph> {
    if p.dim > 2 {
        return Err(Error::Invalid("grid minimax needs dim ≤ 2".into()));
    }
    let mut minima: Vec<CriticalPoint> = cps.iter().filter(|c| c.is_minimum()).cloned().collect();
    let index1: Vec<&CriticalPoint> = cps.iter().filter(|c| c.morse_index == 1).collect();
    if minima.is_empty() {
        return Err(Error::Invalid("no minima".into()));
    }
    // Global minimum first; ties broken by location.
    minima.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| lex_cmp(&a.location, &b.location)));
    let grid = Grid::new(bx.clone(), grid_resolution);
    let values: Vec<f64> = (0..grid.len()).map(|k| p.value(&grid.point(k)).unwrap_or(f64::INFINITY)).collect();
    let m = minima.len();
    let fence = bx.inflate(1.5);
    let diag = grid.h.iter().map(|h| h * h).sum::<f64>().sqrt();

    let mut saddles: Vec<CriticalPoint> = Vec::new();
    let mut raw_edges: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..m {
        let src = nearest_node(&grid, &minima[i].location);
        let (_, prev) = minimax_tree(&grid, &values, src);
        for j in i + 1..m {
            let mut k = nearest_node(&grid, &minima[j].location);
            let mut top = k;
            while k != src && prev[k] != usize::MAX {
                if values[k] > values[top] {
                    top = k;
                }
                k = prev[k];
            }
            let x = grid.point(top);
            let nearest = index1
                .iter()
                .filter(|c| dist(&c.location, &x) <= 10.0 * diag)
                .min_by(|a, b| dist(&a.location, &x).total_cmp(&dist(&b.location, &x)));
            let saddle = match nearest {
                Some(c) => (*c).clone(),
                None => {
                    let refined = newton(p, &x, &fence).ok_or(Error::SaddleRefinementFailed(i, j))?;
                    let c = CriticalPoint::classify(p, &refined).map_err(|_| Error::SaddleRefinementFailed(i, j))?;
                    if c.morse_index != 1 {
                        return Err(Error::SaddleRefinementFailed(i, j));
                    }
                    c
                }
            };
            let idx = match saddles.iter().position(|s| dist(&s.location, &saddle.location) < MERGE_TOL) {
                Some(idx) => idx,
                None => {
                    saddles.push(saddle);
                    saddles.len() - 1
                }
            };
            raw_edges.push((i, j, idx));
        }
    }

    assemble_graph(p, minima, saddles, raw_edges, &index1)
}

/// Builds the saddle graph in any dimension from user-supplied approximate
/// saddle locations.
///
/// Each location is refined by Newton to an index-1 critical point whose two
/// basins are found by gradient flow along ±e₋. Pairs without a direct saddle
/// communicate through the minimax path of the resulting graph.
pub fn saddle_graph_from_locations(p: &Potential, cps: &[CriticalPoint], bx: &Bounds, locations: &[Vec<f64>]) -> Result<LandscapeGraph> {
    let mut minima: Vec<CriticalPoint> = cps.iter().filter(|c| c.is_minimum()).cloned().collect();
    let index1: Vec<&CriticalPoint> = cps.iter().filter(|c| c.morse_index == 1).collect();
    if minima.is_empty() {
        return Err(Error::Invalid("no minima".into()));
    }
    minima.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| lex_cmp(&a.location, &b.location)));
    let m = minima.len();
    let fence = bx.inflate(1.5);
    let mut saddles: Vec<CriticalPoint> = Vec::new();
    // direct[i][j]: lowest supplied saddle joining basins i and j.
    let mut direct: Vec<Vec<Option<usize>>> = vec![vec![None; m]; m];
    for (k, x) in locations.iter().enumerate() {
        if x.len() != p.dim {
            return Err(Error::DimensionMismatch { expected: p.dim, found: x.len() });
        }
        let refined = newton(p, x, &fence).ok_or(Error::Invalid(format!("saddle guess {k} did not converge")))?;
        let c = CriticalPoint::classify(p, &refined)?;
        if c.morse_index != 1 {
            return Err(Error::Invalid(format!("saddle guess {k} converged to a point of index {}", c.morse_index)));
        }
        let (a, b) = saddle_ends(p, &c, &minima)
            .filter(|(a, b)| a != b)
            .ok_or(Error::Invalid(format!("saddle guess {k} does not join two distinct basins")))?;
        let idx = match saddles.iter().position(|s| dist(&s.location, &c.location) < MERGE_TOL) {
            Some(idx) => idx,
            None => {
                saddles.push(c);
                saddles.len() - 1
            }
        };
        if direct[a][b].is_none_or(|old| saddles[idx].energy < saddles[old].energy) {
            direct[a][b] = Some(idx);
            direct[b][a] = Some(idx);
        }
    }
    // Bottleneck closure: best[i][j] is the saddle attaining the lowest
    // maximal height over chains of direct saddles.
    let mut best = direct;
    let height = |s: Option<usize>| s.map_or(f64::INFINITY, |s| saddles[s].energy);
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                if i == j || i == k || j == k {
                    continue;
                }
                let via = if height(best[i][k]) >= height(best[k][j]) { best[i][k] } else { best[k][j] };
                if via.is_some() && height(via) < height(best[i][j]) {
                    best[i][j] = via;
                }
            }
        }
    }
    let mut raw_edges = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            raw_edges.push((i, j, best[i][j].ok_or(Error::MissingSaddle(i, j))?));
        }
    }
    assemble_graph(p, minima, saddles, raw_edges, &index1)
}

/// Orders minima, relabels edges and evaluates the consistency diagnostics.
fn assemble_graph(
    p: &Potential,
    minima: Vec<CriticalPoint>,
    saddles: Vec<CriticalPoint>,
    raw_edges: Vec<(usize, usize, usize)>,
    index1: &[&CriticalPoint],
) -> Result<LandscapeGraph> {
    let m = minima.len();
    // Order minima 2..M by decreasing H(s_{1,i}) − H(m_i).
    let depth = |i: usize| -> f64 {
        if i == 0 {
            return f64::INFINITY;
        }
        let e = raw_edges.iter().find(|e| e.0 == 0 && e.1 == i).unwrap();
        saddles[e.2].energy - minima[i].energy
    };
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| depth(b).total_cmp(&depth(a)).then(a.cmp(&b)));
    let mut rank = vec![0; m];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let depths: Vec<f64> = order.iter().map(|&o| depth(o)).collect();
    let minima: Vec<CriticalPoint> = order.iter().map(|&o| minima[o].clone()).collect();
    let mut edges: Vec<Edge> = raw_edges
        .iter()
        .map(|&(i, j, s)| {
            let (a, b) = (rank[i].min(rank[j]), rank[i].max(rank[j]));
            Edge { i: a, j: b, saddle: s, height: saddles[s].energy }
        })
        .collect();
    edges.sort_by_key(|e| (e.i, e.j));

    let delta_gap = (m >= 3).then(|| depths[1] - depths[2..].iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let global_tie = m >= 2 && (minima[1].energy - minima[0].energy).abs() <= HEIGHT_TOL;
    let nondegeneracy_violation = delta_gap.is_some_and(|d| d <= 0.0) || (global_tie && m >= 3);

    let mut ultrametric = true;
    let h = |a: usize, b: usize| edges.iter().find(|e| e.i == a.min(b) && e.j == a.max(b)).map(|e| e.height).unwrap();
    for a in 0..m {
        for b in a + 1..m {
            for c in 0..m {
                if c != a && c != b && h(a, b) > h(a, c).max(h(c, b)) + 1e-9 * (1.0 + h(a, b).abs()) {
                    ultrametric = false;
                }
            }
        }
    }

    let mut non_unique_saddles = Vec::new();
    for e in &edges {
        let s = &saddles[e.saddle];
        let Some(ends) = saddle_ends(p, s, &minima) else { continue };
        let rival = index1.iter().any(|c| {
            dist(&c.location, &s.location) >= MERGE_TOL
                && (c.energy - s.energy).abs() <= HEIGHT_TOL
                && saddle_ends(p, c, &minima) == Some(ends)
        });
        if rival {
            non_unique_saddles.push((e.i, e.j));
        }
    }

    Ok(LandscapeGraph { minima, saddles, edges, delta_gap, nondegeneracy_violation, non_unique_saddles, ultrametric })
}

/// Boundary-shell evidence for the growth assumptions.
///
/// The assumptions concern |x| → ∞, which cannot be certified on a box; the
/// quantities are evaluated on the outer half of the box (max-norm) instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// min |∇H| on the shell.
    pub c_h_a1_pi: f64,
    pub pass_a1_pi: bool,
    /// max(0, −min(|∇H|² − ΔH)) over the box.
    pub k_h_a2_pi: f64,
    /// |∇H|² − ΔH ≥ 0 throughout the shell.
    pub pass_a2_pi: bool,
    /// min (|∇H|² − ΔH)/|x|² on the shell.
    pub c_h_a1_lsi: f64,
    pub pass_a1_lsi: bool,
    /// max(0, −min λ_min(∇²H)) over the box.
    pub k_h_a2_lsi: f64,
    pub pass_a2_lsi: bool,
    /// ¼C_H²/(C_H² + 8K_H), the largest ε for the outside-region drift constant.
    pub epsilon_threshold: f64,
    pub warnings: Vec<String>,
}

pub fn check_assumptions(p: &Potential, bx: &Bounds, eps_range: &[f64]) -> Result<AssumptionReport> {
    let per_axis = match p.dim {
        1 => 2001,
        2 => 201,
        3 => 41,
        _ => 11,
    };
    let grid = Grid::new(bx.clone(), per_axis);
    let mut shell_curvature: f64 = 0.0;
    let center: Vec<f64> = (0..bx.dim()).map(|k| 0.5 * (bx.lo[k] + bx.hi[k])).collect();
    let mut r = AssumptionReport {
        c_h_a1_pi: f64::INFINITY,
        pass_a1_pi: false,
        k_h_a2_pi: 0.0,
        pass_a2_pi: true,
        c_h_a1_lsi: f64::INFINITY,
        pass_a1_lsi: false,
        k_h_a2_lsi: 0.0,
        pass_a2_lsi: true,
        epsilon_threshold: 0.0,
        warnings: Vec::new(),
    };
    for k in 0..grid.len() {
        let x = grid.point(k);
        let Ok(j) = p.jet(&x) else { continue };
        let g2 = j.grad_norm_sq();
        let q = g2 - j.laplacian();
        let lam_min = sym_eigen(&j.hessian()).0[0];
        r.k_h_a2_pi = r.k_h_a2_pi.max(-q);
        r.k_h_a2_lsi = r.k_h_a2_lsi.max(-lam_min);
        let in_shell = (0..bx.dim()).any(|d| (x[d] - center[d]).abs() >= 0.25 * bx.width(d));
        if in_shell {
            r.c_h_a1_pi = r.c_h_a1_pi.min(g2.sqrt());
            shell_curvature = shell_curvature.max(sym_eigen(&j.hessian()).0.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
            r.pass_a2_pi &= q >= 0.0;
            let x2: f64 = x.iter().map(|v| v * v).sum();
            if x2 > 0.0 {
                r.c_h_a1_lsi = r.c_h_a1_lsi.min(q / x2);
            }
        }
    }
    // A zero of ∇H between nodes cannot be excluded unless the minimum beats
    // the variation of ∇H across half a cell.
    let half_diag = 0.5 * grid.h.iter().map(|h| h * h).sum::<f64>().sqrt();
    r.pass_a1_pi = r.c_h_a1_pi > half_diag * shell_curvature;
    r.pass_a1_lsi = r.c_h_a1_lsi > 0.0;
    r.pass_a2_lsi = r.k_h_a2_lsi.is_finite();
    let c2 = r.c_h_a1_pi.powi(2);
    r.epsilon_threshold = if r.pass_a1_pi { 0.25 * c2 / (c2 + 8.0 * r.k_h_a2_pi) } else { 0.0 };
    for &eps in eps_range {
        if eps > r.epsilon_threshold {
            r.warnings.push(format!("epsilon {eps} exceeds the outside-region threshold {:.4e}", r.epsilon_threshold));
        }
    }
    if !r.pass_a1_pi {
        r.warnings.push("gradient does not stay away from zero on the boundary shell".into());
    }
    Ok(r)
}
