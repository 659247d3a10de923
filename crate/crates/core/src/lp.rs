//! Exact discrete multi-marginal Kantorovich problem.
//!
//! For finitely supported marginals the problem is the linear program
//!
//! ```text
//! maximize   sum_J H(J) gamma_J
//! subject to sum_{J : J_i = j} gamma_J = w_i[j]   for every marginal i, atom j
//!            gamma >= 0
//! ```
//!
//! over index tuples `J = (j_1, ..., j_d)`. It is solved by a revised simplex
//! method on the multi-index transportation polytope: a staircase
//! (north-west corner) start, Dantzig pricing over the dense objective tensor,
//! and Bland's rule whenever the method stalls on degenerate pivots. The dual
//! variables are returned as potentials and certified by recomputing the
//! duality gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Point};
use crate::measures::{DiscreteMeasure, RadialMeasure};
use crate::rng::RngState;

/// Default cap on the number of objective-tensor entries.
pub const DEFAULT_MAX_ENTRIES: u128 = 1_000_000;

/// Feasibility slack accepted for potentials.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Relative duality gap below which a solve is certified optimal.
pub const GAP_TOL: f64 = 1e-9;

/// Basic values at or below this are degenerate basics carrying roundoff and
/// are left out of the reported plan (total mass is 1).
pub const PLAN_ZERO_TOL: f64 = 1e-13;

const REINVERT_EVERY: usize = 128;
const DEGENERATE_STREAK: usize = 50;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Det,
    AbsDet,
}

impl Objective {
    pub fn eval(self, atoms: &[&[f64]]) -> f64 {
        let d = atoms.len();
        let v = linalg::det_unchecked(atoms, d);
        match self {
            Objective::Det => v,
            Objective::AbsDet => v.abs(),
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(Objective::Det),
            "absdet" => Ok(Objective::AbsDet),
            other => Err(Error::contract(format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_entries: u128,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }
}

/// Marginals together with the dense objective tensor (last index fastest).
#[derive(Debug, Clone)]
pub struct Instance {
    marginals: Vec<DiscreteMeasure>,
    sizes: Vec<usize>,
    values: Vec<f64>,
}

fn check_size(sizes: &[usize], limit: u128) -> Result<usize> {
    let entries = sizes.iter().fold(1u128, |acc, &n| acc.saturating_mul(n as u128));
    if entries > limit {
        return Err(Error::Resource { entries, limit });
    }
    Ok(entries as usize)
}

impl Instance {
    /// Determinant (or |det|) objective; every atom must live in `R^d` with
    /// `d` the number of marginals.
    pub fn new(marginals: Vec<DiscreteMeasure>, objective: Objective, opts: &SolveOptions) -> Result<Self> {
        let d = marginals.len();
        if !(1..=linalg::MAX_DIM).contains(&d) {
            return Err(Error::contract(format!("need 1..={} marginals", linalg::MAX_DIM)));
        }
        for m in &marginals {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.dim(),
                });
            }
        }
        Self::from_fn(marginals, move |atoms| objective.eval(atoms), opts)
    }

    /// Arbitrary objective evaluated on the atoms of each index tuple.
    pub fn from_fn(
        marginals: Vec<DiscreteMeasure>,
        objective: impl Fn(&[&[f64]]) -> f64 + Sync,
        opts: &SolveOptions,
    ) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::contract("need at least one marginal"));
        }
        let sizes: Vec<usize> = marginals.iter().map(DiscreteMeasure::len).collect();
        let total = check_size(&sizes, opts.max_entries)?;
        let d = sizes.len();
        let inner = sizes[d - 1];
        let outer = total / inner;
        let mut values = vec![0.0; total];
        values
            .par_chunks_mut(inner)
            .enumerate()
            .for_each(|(o, row)| {
                let mut idx = vec![0usize; d];
                let mut rest = o;
                for i in (0..d - 1).rev() {
                    idx[i] = rest % sizes[i];
                    rest /= sizes[i];
                }
                let mut atoms: Vec<&[f64]> = (0..d).map(|i| marginals[i].atoms()[idx[i]].coords()).collect();
                for (j, slot) in row.iter_mut().enumerate() {
                    atoms[d - 1] = marginals[d - 1].atoms()[j].coords();
                    *slot = objective(&atoms);
                }
            });
        debug_assert_eq!(outer * inner, total);
        Ok(Self {
            marginals,
            sizes,
            values,
        })
    }

    /// Explicit objective tensor in row-major order (last index fastest).
    pub fn from_tensor(marginals: Vec<DiscreteMeasure>, values: Vec<f64>, opts: &SolveOptions) -> Result<Self> {
        let sizes: Vec<usize> = marginals.iter().map(DiscreteMeasure::len).collect();
        let total = check_size(&sizes, opts.max_entries)?;
        if values.len() != total {
            return Err(Error::contract(format!(
                "tensor has {} entries, expected {total}",
                values.len()
            )));
        }
        Ok(Self {
            marginals,
            sizes,
            values,
        })
    }

    pub fn marginals(&self) -> &[DiscreteMeasure] {
        &self.marginals
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.sizes).fold(0, |acc, (&j, &n)| acc * n + j)
    }

    pub fn unravel(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.sizes.len()];
        for i in (0..self.sizes.len()).rev() {
            idx[i] = lin % self.sizes[i];
            lin /= self.sizes[i];
        }
        idx
    }

    pub fn entry(&self, idx: &[usize]) -> f64 {
        self.values[self.linear_index(idx)]
    }

    /// Calls `f(idx, value)` for every tensor entry in row-major order.
    fn for_each_entry(&self, mut f: impl FnMut(&[usize], f64)) {
        let d = self.sizes.len();
        let mut idx = vec![0usize; d];
        for &v in &self.values {
            f(&idx, v);
            for i in (0..d).rev() {
                idx[i] += 1;
                if idx[i] < self.sizes[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

/// Sparse transport plan over the index tuples of an [`Instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub sizes: Vec<usize>,
    /// Nonzero entries as `(index tuple, mass)`, sorted by index.
    pub entries: Vec<(Vec<usize>, f64)>,
}

impl Coupling {
    pub fn mass(&self, idx: &[usize]) -> f64 {
        self.entries
            .iter()
            .find(|(j, _)| j.as_slice() == idx)
            .map_or(0.0, |(_, m)| *m)
    }

    pub fn nonzeros(&self) -> usize {
        self.entries.len()
    }

    /// Largest deviation of the plan's marginals from the prescribed weights.
    pub fn marginal_error(&self, marginals: &[DiscreteMeasure]) -> f64 {
        let mut sums: Vec<Vec<f64>> = self.sizes.iter().map(|&n| vec![0.0; n]).collect();
        for (idx, m) in &self.entries {
            for (i, &j) in idx.iter().enumerate() {
                sums[i][j] += m;
            }
        }
        sums.iter()
            .zip(marginals)
            .flat_map(|(s, mu)| s.iter().zip(mu.weights()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, instance: &Instance) -> f64 {
        self.entries.iter().map(|(idx, m)| m * instance.entry(idx)).sum()
    }
}

/// Tabulated potentials `phi_i` on the atoms of each marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSet {
    pub tables: Vec<Vec<f64>>,
}

/// Dual objective of a potential set, with its worst constraint violation.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    /// `max_J (H(J) - sum_i phi_i(J_i))`; feasible when `<= FEASIBILITY_TOL`.
    pub max_violation: f64,
    pub worst_index: Vec<usize>,
}

impl DualEvaluation {
    pub fn is_feasible(&self) -> bool {
        self.max_violation <= FEASIBILITY_TOL
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub plan: Coupling,
    pub potentials: PotentialSet,
    pub pivots: usize,
}

/// `sum_i sum_j phi_i[j] w_i[j]`, plus the feasibility audit.
pub fn dual_value(potentials: &PotentialSet, instance: &Instance) -> DualEvaluation {
    let value = potentials
        .tables
        .iter()
        .zip(instance.marginals())
        .map(|(t, mu)| t.iter().zip(mu.weights()).map(|(p, w)| p * w).sum::<f64>())
        .sum();
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_index = Vec::new();
    instance.for_each_entry(|idx, h| {
        let s: f64 = idx.iter().enumerate().map(|(i, &j)| potentials.tables[i][j]).sum();
        if h - s > max_violation {
            max_violation = h - s;
            worst_index = idx.to_vec();
        }
    });
    DualEvaluation {
        value,
        max_violation,
        worst_index,
    }
}

/// One sweep of `phi_i(a) <- max_{J : J_i = a} (H(J) - sum_{j != i} phi_j(J_j))`
/// over the marginals in `order`. The result is dual feasible; for feasible
/// input it is pointwise no larger than the input.
pub fn convexify(potentials: &PotentialSet, instance: &Instance, order: &[usize]) -> PotentialSet {
    let mut tables = potentials.tables.clone();
    for &i in order {
        let mut fresh = vec![f64::NEG_INFINITY; instance.sizes[i]];
        instance.for_each_entry(|idx, h| {
            let mut s = 0.0;
            for (j, &a) in idx.iter().enumerate() {
                if j != i {
                    s += tables[j][a];
                }
            }
            let v = h - s;
            if v > fresh[idx[i]] {
                fresh[idx[i]] = v;
            }
        });
        tables[i] = fresh;
    }
    PotentialSet { tables }
}

/// Natural sweep order `0, 1, ..., d - 1`.
pub fn full_sweep(instance: &Instance) -> Vec<usize> {
    (0..instance.sizes.len()).collect()
}

/// Shifts `phi_i` (`i < d`) so that its minimum is 0, moving the total shift
/// onto the last potential. Feasibility and the dual value are unchanged.
pub fn normalize(potentials: &PotentialSet) -> PotentialSet {
    let mut tables = potentials.tables.clone();
    let d = tables.len();
    let mut shift = 0.0;
    for t in tables.iter_mut().take(d.saturating_sub(1)) {
        let m = t.iter().copied().fold(f64::INFINITY, f64::min);
        if m.is_finite() && m != 0.0 {
            t.iter_mut().for_each(|v| *v -= m);
            shift += m;
        }
    }
    if shift != 0.0 {
        if let Some(last) = tables.last_mut() {
            last.iter_mut().for_each(|v| *v += shift);
        }
    }
    PotentialSet { tables }
}

/// `dual_value - primal_value`; a negative gap beyond the tolerance means the
/// report is internally inconsistent.
pub fn duality_gap(report: &SolveReport) -> Result<f64> {
    let gap = report.dual_value - report.primal_value;
    if gap < -FEASIBILITY_TOL {
        return Err(Error::Internal(format!("negative duality gap {gap:e}")));
    }
    Ok(gap)
}

/// Whether the report's gap certifies optimality.
pub fn is_certified(report: &SolveReport) -> bool {
    report.gap.abs() <= GAP_TOL * (1.0 + report.primal_value.abs())
}

/// Solves the transportation LP for the determinant (or |det|) objective.
pub fn solve_primal(marginals: &[DiscreteMeasure], objective: Objective, opts: &SolveOptions) -> Result<SolveReport> {
    let instance = Instance::new(marginals.to_vec(), objective, opts)?;
    solve_instance(&instance)
}

/// Solves the transportation LP for a prepared instance.
pub fn solve_instance(instance: &Instance) -> Result<SolveReport> {
    let mut simplex = Simplex::new(instance);
    simplex.run()?;
    let plan = simplex.plan();
    let primal_value = plan.objective(instance);
    let raw = simplex.potentials();
    // One sweep turns the LP duals (feasible up to the pricing tolerance)
    // into exactly feasible potentials.
    let potentials = normalize(&convexify(&raw, instance, &full_sweep(instance)));
    let dual = dual_value(&potentials, instance);
    let report = SolveReport {
        primal_value,
        dual_value: dual.value,
        gap: dual.value - primal_value,
        plan,
        potentials,
        pivots: simplex.pivots,
    };
    duality_gap(&report)?;
    Ok(report)
}

/// Dense revised simplex with an explicit basis inverse.
struct Simplex<'a> {
    inst: &'a Instance,
    /// Row of constraint (marginal i, atom j); `None` for the dropped
    /// redundant rows (atom 0 of every marginal after the first).
    row_of: Vec<Vec<Option<usize>>>,
    rhs: Vec<f64>,
    m: usize,
    basis: Vec<usize>,
    binv: Vec<f64>,
    x: Vec<f64>,
    pivots: usize,
    opt_tol: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Pricing {
    Dantzig,
    Bland,
}

impl<'a> Simplex<'a> {
    fn new(inst: &'a Instance) -> Self {
        let mut row_of = Vec::with_capacity(inst.sizes.len());
        let mut rhs = Vec::new();
        for (i, mu) in inst.marginals.iter().enumerate() {
            let rows = (0..mu.len())
                .map(|j| {
                    if i > 0 && j == 0 {
                        None
                    } else {
                        rhs.push(mu.weights()[j]);
                        Some(rhs.len() - 1)
                    }
                })
                .collect();
            row_of.push(rows);
        }
        let m = rhs.len();
        let scale = inst.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut s = Self {
            inst,
            row_of,
            rhs,
            m,
            basis: Vec::with_capacity(m),
            binv: vec![0.0; m * m],
            x: vec![0.0; m],
            pivots: 0,
            opt_tol: 1e-11 * (1.0 + scale),
        };
        s.staircase_start();
        s
    }

    fn rows_of_column(&self, col: usize, out: &mut Vec<usize>) {
        out.clear();
        let idx = self.inst.unravel(col);
        for (i, &j) in idx.iter().enumerate() {
            if let Some(r) = self.row_of[i][j] {
                out.push(r);
            }
        }
    }

    /// North-west corner rule that advances exactly one atom per step, so the
    /// basis has `sum n_i - d + 1` columns and is triangular.
    fn staircase_start(&mut self) {
        let d = self.inst.sizes.len();
        let mut ptr = vec![0usize; d];
        let mut remaining: Vec<Vec<f64>> = self.inst.marginals.iter().map(|m| m.weights().to_vec()).collect();
        loop {
            let col = self.inst.linear_index(&ptr);
            let mass = (0..d).map(|i| remaining[i][ptr[i]]).fold(f64::INFINITY, f64::min).max(0.0);
            for i in 0..d {
                remaining[i][ptr[i]] -= mass;
            }
            self.basis.push(col);
            let advance = (0..d)
                .filter(|&i| ptr[i] + 1 < self.inst.sizes[i])
                .min_by(|&a, &b| remaining[a][ptr[a]].total_cmp(&remaining[b][ptr[b]]));
            match advance {
                Some(i) => ptr[i] += 1,
                None => break,
            }
        }
        debug_assert_eq!(self.basis.len(), self.m);
        self.reinvert();
    }

    /// Gauss-Jordan inverse of the basis matrix, then `x_B = B^{-1} b`.
    fn reinvert(&mut self) {
        let m = self.m;
        let mut a = vec![0.0f64; m * m];
        let mut rows = Vec::new();
        for (k, &col) in self.basis.iter().enumerate() {
            self.rows_of_column(col, &mut rows);
            for &r in &rows {
                a[r * m + k] = 1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&p, &q| a[p * m + c].abs().total_cmp(&a[q * m + c].abs()))
                .expect("nonempty");
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let p = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= p;
                inv[c * m + k] /= p;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        for k in 0..m {
            let v: f64 = (0..m).map(|r| self.binv[k * m + r] * self.rhs[r]).sum();
            self.x[k] = if v < 0.0 && v > -1e-12 { 0.0 } else { v };
        }
    }

    /// Row duals `y = c_B^T B^{-1}`, expanded per marginal/atom.
    fn duals(&self) -> Vec<Vec<f64>> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &col) in self.basis.iter().enumerate() {
            let c = self.inst.values[col];
            if c != 0.0 {
                for r in 0..m {
                    y[r] += c * self.binv[k * m + r];
                }
            }
        }
        self.row_of
            .iter()
            .map(|rows| rows.iter().map(|r| r.map_or(0.0, |r| y[r])).collect())
            .collect()
    }

    /// Best entering column: largest reduced cost (Dantzig) or smallest index
    /// with positive reduced cost (Bland). Ties resolve to the smaller index.
    fn price(&self, y: &[Vec<f64>], rule: Pricing) -> Option<usize> {
        let sizes = &self.inst.sizes;
        let d = sizes.len();
        let inner = sizes[d - 1];
        let outer = self.inst.values.len() / inner;
        let tol = self.opt_tol;
        let scan = |o: usize| -> Option<(f64, usize)> {
            let mut rest = o;
            let mut prefix = 0.0;
            for i in (0..d - 1).rev() {
                prefix += y[i][rest % sizes[i]];
                rest /= sizes[i];
            }
            let base = o * inner;
            let row = &self.inst.values[base..base + inner];
            let ylast = &y[d - 1];
            let mut best: Option<(f64, usize)> = None;
            for j in 0..inner {
                let rc = row[j] - prefix - ylast[j];
                if rc > tol {
                    match rule {
                        Pricing::Bland => return Some((rc, base + j)),
                        Pricing::Dantzig => {
                            if best.is_none_or(|b| rc > b.0) {
                                best = Some((rc, base + j));
                            }
                        }
                    }
                }
            }
            best
        };
        match rule {
            Pricing::Bland => (0..outer).into_par_iter().find_map_first(scan).map(|b| b.1),
            Pricing::Dantzig => (0..outer)
                .into_par_iter()
                .filter_map(scan)
                .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
                .map(|b| b.1),
        }
    }

    fn run(&mut self) -> Result<()> {
        let m = self.m;
        let max_pivots = 200 * m + 10_000;
        let mut rule = Pricing::Dantzig;
        let mut streak = 0usize;
        let mut rows = Vec::new();
        let mut dir = vec![0.0; m];
        let mut since_reinvert = 0usize;
        loop {
            let y = self.duals();
            let Some(enter) = self.price(&y, rule) else {
                return Ok(());
            };
            // direction = B^{-1} a_enter
            self.rows_of_column(enter, &mut rows);
            for k in 0..m {
                dir[k] = rows.iter().map(|&r| self.binv[k * m + r]).sum();
            }
            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for k in 0..m {
                if dir[k] > PIVOT_TOL {
                    let t = self.x[k].max(0.0) / dir[k];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            t < theta - 1e-15 || (t <= theta + 1e-15 && self.basis[k] < self.basis[l])
                        }
                    };
                    if better {
                        theta = t;
                        leave = Some(k);
                    }
                }
            }
            let Some(l) = leave else {
                return Err(Error::Internal("unbounded direction in a bounded polytope".into()));
            };
            let theta = self.x[l].max(0.0) / dir[l];
            for k in 0..m {
                if k != l {
                    self.x[k] -= theta * dir[k];
                    if self.x[k] < 0.0 && self.x[k] > -1e-13 {
                        self.x[k] = 0.0;
                    }
                }
            }
            self.x[l] = theta;
            self.basis[l] = enter;
            let p = dir[l];
            let (before, rest) = self.binv.split_at_mut(l * m);
            let (pivot_row, after) = rest.split_at_mut(m);
            pivot_row.iter_mut().for_each(|v| *v /= p);
            for (k, chunk) in before.chunks_mut(m).enumerate() {
                let f = dir[k];
                if f != 0.0 {
                    chunk.iter_mut().zip(pivot_row.iter()).for_each(|(a, b)| *a -= f * b);
                }
            }
            for (k, chunk) in after.chunks_mut(m).enumerate() {
                let f = dir[l + 1 + k];
                if f != 0.0 {
                    chunk.iter_mut().zip(pivot_row.iter()).for_each(|(a, b)| *a -= f * b);
                }
            }
            self.pivots += 1;
            since_reinvert += 1;
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert();
                since_reinvert = 0;
            }
            if theta <= 1e-14 {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    rule = Pricing::Bland;
                }
            } else {
                streak = 0;
                rule = Pricing::Dantzig;
            }
            if self.pivots > max_pivots {
                return Err(Error::Internal(format!("simplex exceeded {max_pivots} pivots")));
            }
        }
    }

    fn plan(&mut self) -> Coupling {
        self.reinvert();
        let mut entries: Vec<(Vec<usize>, f64)> = self
            .basis
            .iter()
            .zip(&self.x)
            .filter(|(_, &v)| v > PLAN_ZERO_TOL)
            .map(|(&col, &v)| (self.inst.unravel(col), v))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Coupling {
            sizes: self.inst.sizes.clone(),
            entries,
        }
    }

    fn potentials(&self) -> PotentialSet {
        PotentialSet { tables: self.duals() }
    }
}

/// Discretizes radial laws into `n_radii * n_dirs` equal-weight atoms per
/// marginal: quantile-midpoint radii times unit directions.
///
/// Directions: with `n_dirs = 1` every marginal uses `e_1`; in `R^2` they are
/// equally spaced angles with a random phase; in `R^3` a spherical Fibonacci
/// lattice under a random rotation; in higher dimension i.i.d. uniform draws.
/// Each marginal gets its own random phase/rotation from `rng`.
pub fn discretize_radial_instance(
    marginals: &[RadialMeasure],
    n_radii: usize,
    n_dirs: usize,
    rng: &mut RngState,
    opts: &SolveOptions,
) -> Result<Vec<DiscreteMeasure>> {
    let d = marginals.len();
    if !(2..=linalg::MAX_DIM).contains(&d) {
        return Err(Error::contract(format!("need 2..={} radial laws", linalg::MAX_DIM)));
    }
    if n_radii == 0 || n_dirs == 0 {
        return Err(Error::contract("n_radii and n_dirs must be positive"));
    }
    check_size(&vec![n_radii * n_dirs; d], opts.max_entries)?;
    marginals
        .iter()
        .map(|mu| {
            let dirs = directions(d, n_dirs, rng);
            let mut atoms = Vec::with_capacity(n_radii * n_dirs);
            for k in 0..n_radii {
                let r = mu.quantile_unchecked((k as f64 + 0.5) / n_radii as f64);
                for dir in &dirs {
                    atoms.push(dir.scaled(r));
                }
            }
            DiscreteMeasure::uniform(d, atoms)
        })
        .collect()
}

fn directions(d: usize, n: usize, rng: &mut RngState) -> Vec<Point> {
    use rand::Rng;
    if n == 1 {
        return vec![Point::basis(d, 0)];
    }
    match d {
        2 => {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            (0..n)
                .map(|k| {
                    let a = phase + std::f64::consts::TAU * k as f64 / n as f64;
                    Point::from_vec_unchecked(vec![a.cos(), a.sin()])
                })
                .collect()
        }
        3 => {
            let rot = random_rotation(3, rng);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    let v = [rho * a.cos(), rho * a.sin(), z];
                    let w: Vec<f64> = (0..3).map(|r| (0..3).map(|c| rot[r][c] * v[c]).sum()).collect();
                    Point::from_vec_unchecked(w)
                })
                .collect()
        }
        _ => (0..n).map(|_| linalg::random_unit(d, rng)).collect(),
    }
}

fn random_rotation(d: usize, rng: &mut RngState) -> Vec<Vec<f64>> {
    loop {
        let cols: Vec<Point> = (0..d).map(|_| linalg::random_unit(d, rng)).collect();
        if let Ok(frame) = linalg::Frame::orthonormalized(d, &cols) {
            let v = frame.vectors();
            return (0..d).map(|r| (0..d).map(|c| v[c][r]).collect()).collect();
        }
    }
}
