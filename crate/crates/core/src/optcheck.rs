//! Verifiers for the optimality conditions of the determinant problem.
//!
//! A coupling and a dual-feasible potential family are jointly optimal iff
//! `sum_i phi_i(x_i) = det(x_1, ..., x_d)` on the support. For convex
//! potentials this is equivalent to the subgradient inclusions
//! `(-1)^(d-1-i) wedge_{j != i} x_j in d phi_i(x_i)` (0-based `i`), checked here
//! through the Fenchel equality `phi_i(x_i) + phi_i^*(w) = <x_i, w>`. In `R^3`
//! with differentiable radial potentials the inclusions become the gradient
//! system `grad phi_1(x) = y ^ z`, `grad phi_2(y) = -x ^ z`,
//! `grad phi_3(z) = x ^ y`.
//!
//! The module also has the statistical checks used to validate samplers:
//! a Kolmogorov-Smirnov test on radii, direction-uniformity moments, and a
//! Monte-Carlo check of the sphere-Fubini identity.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, Point};
use crate::lp::{self, Coupling, Instance, Objective, PotentialSet};
use crate::measures::RadialMeasure;
use crate::radial::{RadialPotential, Tuple};
use crate::rng::RngState;

const MC_CHUNK: usize = 1 << 15;

/// Pass thresholds; the defaults are the module tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feasibility: f64,
    pub tightness: f64,
    pub subgradient: f64,
    pub gradient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            tightness: 1e-6,
            subgradient: 1e-5,
            gradient: 1e-5,
        }
    }
}

/// One tracked residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Index of the support tuple attaining the residual, if any.
    pub worst_tuple: Option<usize>,
    pub checked: usize,
    pub skipped: usize,
}

impl ConditionRecord {
    fn new(name: impl Into<String>, worst: Worst, tolerance: f64, checked: usize, skipped: usize) -> Self {
        let residual = worst.value.max(0.0);
        Self {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
            worst_tuple: worst.index,
            checked,
            skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub max_feasibility_violation: f64,
    pub max_tightness_gap: f64,
    pub max_subgradient_residual: f64,
    pub max_gradient_residual: f64,
    pub passed: bool,
    pub details: Vec<ConditionRecord>,
}

impl CertificateReport {
    fn from_records(details: Vec<ConditionRecord>) -> Self {
        let max_of = |prefix: &str| {
            details
                .iter()
                .filter(|r| r.name.starts_with(prefix))
                .map(|r| r.residual)
                .fold(0.0, f64::max)
        };
        Self {
            max_feasibility_violation: max_of("feasibility"),
            max_tightness_gap: max_of("tightness"),
            max_subgradient_residual: max_of("subgradient").max(max_of("conjugate-sum")),
            max_gradient_residual: max_of("gradient"),
            passed: details.iter().all(|r| r.passed),
            details,
        }
    }

    /// Union of several reports; passes iff all of them pass.
    pub fn combine(reports: impl IntoIterator<Item = CertificateReport>) -> Self {
        Self::from_records(reports.into_iter().flat_map(|r| r.details).collect())
    }

    pub fn record(&self, name: &str) -> Option<&ConditionRecord> {
        self.details.iter().find(|r| r.name == name)
    }
}

/// Running maximum with the index where it was attained.
#[derive(Debug, Clone, Copy)]
struct Worst {
    value: f64,
    index: Option<usize>,
}

impl Worst {
    const NONE: Worst = Worst {
        value: f64::NEG_INFINITY,
        index: None,
    };

    fn at(value: f64, index: usize) -> Self {
        Self {
            value,
            index: Some(index),
        }
    }

    /// Larger value wins; ties go to the smaller index. NaN counts as worst.
    fn max(self, other: Self) -> Self {
        let (a, b) = (self.value, other.value);
        if a.is_nan() {
            return self;
        }
        if b.is_nan() || b > a || (b == a && other.index < self.index && other.index.is_some()) {
            other
        } else {
            self
        }
    }
}

fn worst_over<T: Sync>(items: &[T], f: impl Fn(usize, &T) -> f64 + Sync) -> Worst {
    items
        .par_iter()
        .enumerate()
        .map(|(k, t)| Worst::at(f(k, t), k))
        .reduce(|| Worst::NONE, Worst::max)
}

fn check_dims(support: &[Tuple], d: usize) -> Result<()> {
    for t in support {
        if t.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: t.len(),
            });
        }
        for x in t {
            if x.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.dim(),
                });
            }
        }
    }
    Ok(())
}

fn radial_sum(potentials: &[RadialPotential], t: &Tuple) -> f64 {
    potentials.iter().zip(t).map(|(p, x)| p.eval(x.norm())).sum()
}

/// Grid audit of `sum_i psi_i(r_i) >= prod_i r_i`, the radial form of dual
/// feasibility (`|det| <= prod |x_i|` with equality on orthogonal tuples).
/// Returns the largest violation `prod r_i - sum psi_i(r_i)`.
pub fn radial_feasibility_violation(potentials: &[RadialPotential]) -> f64 {
    let d = potentials.len();
    if d == 0 {
        return 0.0;
    }
    let per_axis = ((200_000f64).powf(1.0 / d as f64).floor() as usize).max(2);
    let grids: Vec<Vec<f64>> = potentials
        .iter()
        .map(|p| {
            let k = p.knots();
            let (lo, hi) = (k[0], k[k.len() - 1]);
            let mut g: Vec<f64> = (0..per_axis)
                .map(|j| lo + (hi - lo) * j as f64 / (per_axis - 1) as f64)
                .collect();
            g.extend(k.iter().step_by((k.len() / per_axis).max(1)).copied());
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();
    let values: Vec<Vec<f64>> = grids
        .iter()
        .zip(potentials)
        .map(|(g, p)| g.iter().map(|&r| p.eval(r)).collect())
        .collect();
    let total: usize = grids.iter().map(Vec::len).product();
    (0..total)
        .into_par_iter()
        .map(|mut lin| {
            let mut prod = 1.0;
            let mut sum = 0.0;
            for i in (0..d).rev() {
                let j = lin % grids[i].len();
                lin /= grids[i].len();
                prod *= grids[i][j];
                sum += values[i][j];
            }
            prod - sum
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

/// Tightness `sum_i psi_i(|x_i|) - det(x) = 0` on sampled support tuples,
/// preceded by a dual-feasibility audit on the tuples and on a radius grid.
pub fn check_tightness(support: &[Tuple], potentials: &[RadialPotential], tol: &Tolerances) -> Result<CertificateReport> {
    let d = potentials.len();
    check_dims(support, d)?;
    let grid = radial_feasibility_violation(potentials);
    let on_tuples = worst_over(support, |_, t| linalg::det_unchecked(t, d) - radial_sum(potentials, t));
    let mut details = vec![
        ConditionRecord::new(
            "feasibility-grid",
            Worst { value: grid, index: None },
            tol.feasibility,
            1,
            0,
        ),
        ConditionRecord::new("feasibility-support", on_tuples, tol.feasibility, support.len(), 0),
    ];
    let gap = worst_over(support, |_, t| radial_sum(potentials, t) - linalg::det_unchecked(t, d));
    details.push(ConditionRecord::new("tightness", gap, tol.tightness, support.len(), 0));
    Ok(CertificateReport::from_records(details))
}

/// Tightness of LP potentials on the nonzero entries of a plan, with the
/// full-tensor feasibility audit.
pub fn check_tightness_discrete(
    plan: &Coupling,
    potentials: &PotentialSet,
    instance: &Instance,
    tol: &Tolerances,
) -> Result<CertificateReport> {
    if potentials.tables.len() != instance.sizes().len()
        || potentials.tables.iter().zip(instance.sizes()).any(|(t, &n)| t.len() != n)
        || plan.sizes != instance.sizes()
    {
        return Err(Error::contract("plan, potentials and instance shapes differ"));
    }
    let ev = lp::dual_value(potentials, instance);
    let feas = Worst {
        value: ev.max_violation,
        index: None,
    };
    let gap = worst_over(&plan.entries, |_, (idx, _)| {
        let s: f64 = idx.iter().enumerate().map(|(i, &j)| potentials.tables[i][j]).sum();
        s - instance.entry(idx)
    });
    let details = vec![
        ConditionRecord::new("feasibility-tensor", feas, tol.feasibility, instance.len(), 0),
        ConditionRecord::new("tightness", gap, tol.tightness, plan.entries.len(), 0),
    ];
    Ok(CertificateReport::from_records(details))
}

fn refuse_nonconvex(potentials: &[RadialPotential]) -> Result<()> {
    for (index, p) in potentials.iter().enumerate() {
        let drop = p.convexity_defect();
        if drop > 1e-9 {
            return Err(Error::NonConvexPotential { index, drop });
        }
    }
    Ok(())
}

/// Fenchel-equality residuals, per axis, of the wedge subgradient inclusion,
/// together with the conjugate-sum identity
/// `sum_{j != i} phi_j(x_j) = phi_i^*(w_i)`. For radial potentials
/// `phi^*(w) = psi^*(|w|)`.
pub fn check_subgradient(support: &[Tuple], potentials: &[RadialPotential], tol: &Tolerances) -> Result<CertificateReport> {
    let d = potentials.len();
    check_dims(support, d)?;
    refuse_nonconvex(potentials)?;
    let mut details = Vec::with_capacity(2 * d);
    for i in 0..d {
        let p = &potentials[i];
        let fenchel = worst_over(support, |_, t| {
            let w = signed_wedge(t, i);
            let pair = dot(&t[i], &w);
            let lhs = p.eval(t[i].norm()) + p.conjugate(norm(&w));
            (lhs - pair).abs() / (1.0 + pair.abs())
        });
        let others = worst_over(support, |_, t| {
            let w = signed_wedge(t, i);
            let s: f64 = (0..d).filter(|&j| j != i).map(|j| potentials[j].eval(t[j].norm())).sum();
            let c = p.conjugate(norm(&w));
            (s - c).abs() / (1.0 + c.abs())
        });
        details.push(ConditionRecord::new(format!("subgradient[{i}]"), fenchel, tol.subgradient, support.len(), 0));
        details.push(ConditionRecord::new(format!("conjugate-sum[{i}]"), others, tol.subgradient, support.len(), 0));
    }
    Ok(CertificateReport::from_records(details))
}

fn signed_wedge(t: &Tuple, i: usize) -> Vec<f64> {
    linalg::signed_wedge_excluding(t, i)
        .map(Point::into_vec)
        .unwrap_or_else(|_| vec![f64::NAN; t.len()])
}

/// Discrete analogue of [`check_subgradient`] for the determinant objective:
/// `phi_i^*(w) = max_a (<a, w> - phi_i(a))` over the atoms of marginal `i`,
/// checked on the nonzero entries of `plan`.
pub fn check_subgradient_discrete(
    plan: &Coupling,
    potentials: &PotentialSet,
    instance: &Instance,
    objective: Objective,
    tol: &Tolerances,
) -> Result<CertificateReport> {
    if objective != Objective::Det {
        return Err(Error::contract("the wedge subgradient condition is stated for the det objective"));
    }
    let d = instance.sizes().len();
    let mut details = Vec::with_capacity(d);
    for i in 0..d {
        let atoms = instance.marginals()[i].atoms();
        let table = &potentials.tables[i];
        let res = worst_over(&plan.entries, |_, (idx, _)| {
            let t: Tuple = idx
                .iter()
                .enumerate()
                .map(|(j, &a)| instance.marginals()[j].atoms()[a].clone())
                .collect();
            let w = signed_wedge(&t, i);
            let conj = atoms
                .iter()
                .zip(table)
                .map(|(a, phi)| dot(a, &w) - phi)
                .fold(f64::NEG_INFINITY, f64::max);
            let pair = dot(&t[i], &w);
            (table[idx[i]] + conj - pair).abs() / (1.0 + pair.abs())
        });
        details.push(ConditionRecord::new(format!("subgradient[{i}]"), res, tol.subgradient, plan.entries.len(), 0));
    }
    Ok(CertificateReport::from_records(details))
}

/// Residuals of `psi_1'(|x|) x/|x| = y ^ z`, `psi_2'(|y|) y/|y| = -x ^ z`,
/// `psi_3'(|z|) z/|z| = x ^ y`, relative to the larger side. Tuples with a
/// zero vector are skipped and counted.
pub fn check_gradient_system_3d(
    support: &[Tuple],
    potentials: &[RadialPotential],
    tol: &Tolerances,
) -> Result<CertificateReport> {
    if potentials.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: potentials.len(),
        });
    }
    check_dims(support, 3)?;
    let skipped = support.iter().filter(|t| t.iter().any(|x| x.norm() == 0.0)).count();
    let mut details = Vec::with_capacity(3);
    for i in 0..3 {
        let res = worst_over(support, |_, t| {
            let r = t[i].norm();
            if t.iter().any(|x| x.norm() == 0.0) {
                return f64::NEG_INFINITY;
            }
            let g = potentials[i].slope(r) / r;
            let target = signed_wedge(t, i);
            let grad: Vec<f64> = t[i].iter().map(|c| g * c).collect();
            let diff: f64 = grad.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            diff / (norm(&grad).max(norm(&target)) + 1e-12)
        });
        details.push(ConditionRecord::new(
            format!("gradient[{i}]"),
            res,
            tol.gradient,
            support.len() - skipped,
            skipped,
        ));
    }
    Ok(CertificateReport::from_records(details))
}

/// Test functions on `S^k x S^k` for the sphere-Fubini check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FubiniFn {
    Constant,
    InnerProduct,
    /// `<x, e_1>^2 <y, e_1>^2`
    AxisSquares,
    /// `x_1^2 y_2^2 + x_1 y_1 + 2 x_3 y_3^2`
    AsymmetricPoly,
    /// `cos(x_1 + 2 y_2) + sin(x_2 y_3)`
    Trig,
}

impl FubiniFn {
    pub const CATALOG: [FubiniFn; 5] = [
        FubiniFn::Constant,
        FubiniFn::InnerProduct,
        FubiniFn::AxisSquares,
        FubiniFn::AsymmetricPoly,
        FubiniFn::Trig,
    ];

    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            FubiniFn::Constant => 1.0,
            FubiniFn::InnerProduct => dot(x, y),
            FubiniFn::AxisSquares => x[0] * x[0] * y[0] * y[0],
            FubiniFn::AsymmetricPoly => x[0] * x[0] * y[1] * y[1] + x[0] * y[0] + 2.0 * x[2] * y[2] * y[2],
            FubiniFn::Trig => (x[0] + 2.0 * y[1]).cos() + (x[1] * y[2]).sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FubiniFn::Constant => "constant",
            FubiniFn::InnerProduct => "inner-product",
            FubiniFn::AxisSquares => "axis-squares",
            FubiniFn::AsymmetricPoly => "asymmetric-poly",
            FubiniFn::Trig => "trig",
        }
    }
}

impl std::str::FromStr for FubiniFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FubiniFn::CATALOG
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown test function {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FubiniResult {
    pub lhs: f64,
    pub rhs: f64,
    pub stderr: f64,
    pub passed: bool,
}

/// Mean and variance of `f` over `n` draws, computed in fixed-size chunks on
/// independent streams and reduced in chunk order.
fn mc_moments(n: usize, key: u64, f: impl Fn(&mut RngState) -> f64 + Sync) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngState::stream(key, c as u64);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    (mean, var)
}

/// Monte-Carlo estimates of both sides of the sphere-Fubini identity on
/// `S^k` (the unit sphere of `R^{k+1}`): `x` uniform then `y` uniform on the
/// great sphere orthogonal to `x`, against the same with the roles swapped.
pub fn fubini_sphere_test(k: usize, f: FubiniFn, n: usize, rng: &mut RngState) -> Result<FubiniResult> {
    if k < 2 {
        return Err(Error::contract(format!("sphere dimension must be at least 2, got {k}")));
    }
    if k + 1 > linalg::MAX_DIM {
        return Err(Error::contract(format!("sphere dimension {k} too large")));
    }
    let dim = k + 1;
    let draw_pair = |rng: &mut RngState| -> (Point, Point) {
        let a = linalg::random_unit(dim, rng);
        let frame = linalg::Frame::orthonormalized(dim, std::slice::from_ref(&a)).expect("unit vector");
        let b = linalg::sample_subsphere(&frame, 1.0, rng).expect("k >= 2");
        (a, b)
    };
    let (lkey, rkey) = (rng.derive_key(), rng.derive_key());
    let (lhs, lvar) = mc_moments(n, lkey, |r| {
        let (x, y) = draw_pair(r);
        f.eval(&x, &y)
    });
    let (rhs, rvar) = mc_moments(n, rkey, |r| {
        let (y, x) = draw_pair(r);
        f.eval(&x, &y)
    });
    let stderr = if n == 0 {
        0.0
    } else {
        ((lvar + rvar) / n as f64).sqrt()
    };
    let passed = (lhs - rhs).abs() <= 4.0 * stderr + 1e-12;
    Ok(FubiniResult { lhs, rhs, stderr, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub n: usize,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub ks_passed: bool,
    pub mean_direction_norm: f64,
    pub mean_direction_threshold: f64,
    /// Largest standardized deviation of `mean <u, e>^2` from `1/d` over the
    /// fixed direction set.
    pub second_moment_z: f64,
    pub directions_passed: bool,
    pub passed: bool,
}

pub const KS_P_MIN: f64 = 1e-3;
const MOMENT_Z_MAX: f64 = 4.0;

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn ks_p_value(d_stat: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d_stat;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS statistic of `values` against a CDF.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Law check for one marginal of a sample: KS on the radii against
/// `expected`, and (when `radially_symmetric`) uniformity of the directions
/// through the mean direction and second moments along the coordinate axes
/// and the diagonal.
pub fn marginal_stat_test(samples: &[Point], expected: &RadialMeasure, radially_symmetric: bool) -> Result<MarginalReport> {
    let n = samples.len();
    if n < 10_000 {
        return Err(Error::contract(format!("marginal test needs at least 10^4 samples, got {n}")));
    }
    let d = samples[0].dim();
    if samples.iter().any(|p| p.dim() != d) {
        return Err(Error::contract("samples of mixed dimension"));
    }
    let radii: Vec<f64> = samples.iter().map(Point::norm).collect();
    let ks = ks_statistic(&radii, |r| expected.cdf(r));
    let p = ks_p_value(ks, n);
    let ks_passed = p >= KS_P_MIN;

    let (mean_norm, threshold, z, dir_ok) = if radially_symmetric {
        let units: Vec<Vec<f64>> = samples
            .iter()
            .filter_map(|x| {
                let r = x.norm();
                (r > 0.0).then(|| x.iter().map(|c| c / r).collect())
            })
            .collect();
        let m = units.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for u in &units {
            mean.iter_mut().zip(u).for_each(|(a, b)| *a += b);
        }
        let mean_norm = norm(&mean) / m;
        let threshold = 4.0 * (d as f64).sqrt() / m.sqrt();
        let df = d as f64;
        let var_c2 = 3.0 / (df * (df + 2.0)) - 1.0 / (df * df);
        let sd = (var_c2 / m).sqrt();
        let mut dirs: Vec<Vec<f64>> = (0..d).map(|k| Point::basis(d, k).into_vec()).collect();
        dirs.push(vec![1.0 / df.sqrt(); d]);
        let z = dirs
            .iter()
            .map(|e| {
                let s: f64 = units.iter().map(|u| dot(u, e).powi(2)).sum::<f64>() / m;
                (s - 1.0 / df).abs() / sd
            })
            .fold(0.0, f64::max);
        let ok = mean_norm <= threshold && z <= MOMENT_Z_MAX;
        (mean_norm, threshold, z, ok)
    } else {
        (0.0, 0.0, 0.0, true)
    };
    Ok(MarginalReport {
        n,
        ks_statistic: ks,
        ks_p_value: p,
        ks_passed,
        mean_direction_norm: mean_norm,
        mean_direction_threshold: threshold,
        second_moment_z: z,
        directions_passed: dir_ok,
        passed: ks_passed && dir_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoungChain {
    pub det: f64,
    pub prod_norms: f64,
    pub h0: f64,
}

/// `|det(x)| <= prod_i |x_i| <= sum_i |x_i|^{p_i} / p_i` for conjugate
/// exponents (`p_i > 1`, `sum 1/p_i = 1`).
pub fn hadamard_young_bound(x: &[Point], p: &[f64]) -> Result<YoungChain> {
    let d = x.len();
    if p.len() != d || x.iter().any(|v| v.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() });
    }
    if p.iter().any(|&q| !(q > 1.0 && q.is_finite())) {
        return Err(Error::contract("exponents must exceed 1"));
    }
    let recip: f64 = p.iter().map(|q| 1.0 / q).sum();
    if (recip - 1.0).abs() > 1e-12 {
        return Err(Error::contract(format!("exponent reciprocals sum to {recip}, expected 1")));
    }
    let det = linalg::det(x)?;
    let norms: Vec<f64> = x.iter().map(Point::norm).collect();
    let prod_norms: f64 = norms.iter().product();
    let h0: f64 = norms.iter().zip(p).map(|(r, q)| r.powf(*q) / q).sum();
    let slack = 1e-12 * (1.0 + prod_norms);
    if det.abs() > prod_norms + slack || prod_norms > h0 + 1e-12 * (1.0 + h0) {
        return Err(Error::Internal(format!(
            "chain violated: |det| = {}, prod = {prod_norms}, h0 = {h0}",
            det.abs()
        )));
    }
    Ok(YoungChain { det, prod_norms, h0 })
}

/// Draws `n` tuples whose coordinates are independent draws from the
/// marginals of `support` (shuffling each coordinate of the sample), i.e. a
/// sample of the product coupling.
pub fn product_coupling(support: &[Tuple], rng: &mut RngState) -> Vec<Tuple> {
    use rand::seq::SliceRandom;
    let n = support.len();
    let d = support.first().map_or(0, Vec::len);
    let perms: Vec<Vec<usize>> = (0..d)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    (0..n)
        .map(|k| (0..d).map(|i| support[perms[i][k]][i].clone()).collect())
        .collect()
}

/// Uniform draw in the unit ball of `R^d`.
pub fn uniform_ball_point(d: usize, rng: &mut RngState) -> Point {
    let r = rng.random::<f64>().powf(1.0 / d as f64);
    linalg::random_unit(d, rng).scaled(r)
}
