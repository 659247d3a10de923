//! Closed-form solution for radially symmetric marginals.
//!
//! With radial laws `mu_1^r, ..., mu_d^r` (the laws of `|X_i|`) the optimal
//! coupling is built in three layers:
//!
//! 1. the radii are coupled comonotonically, `|X_i| = H_i(|X_1|)` where `H_i`
//!    is the monotone rearrangement of `mu_1^r` onto `mu_i^r`;
//! 2. `X_1` has a uniform direction, and each `X_i` (`1 < i < d`) is uniform on
//!    the sphere of radius `H_i(|X_1|)` orthogonal to `X_1, ..., X_{i-1}`;
//! 3. `X_d = H_d(|X_1|) * wedge(X_1/|X_1|, ..., X_{d-1}/|X_{d-1}|)`.
//!
//! Every tuple is then an orthogonal system with `det = prod_i |X_i|`. The dual
//! certificate is the family of radial potentials `psi_i`, obtained by
//! integrating `psi_i'(H_i(r)) = prod_{j != i} H_j(r)` along the monotone graph.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, complement_basis, dot, random_unit, sample_on_basis, Frame, Point, MAX_DIM};
use crate::measures::{rearrangement_on_grid, shared_u_grid, MonotoneMap, RadialMeasure};
use crate::rng::RngState;

/// One sampled `(x_1, ..., x_d)`.
pub type Tuple = Vec<Point>;

/// Midpoint nodes for the optimal-value quadrature.
pub const VALUE_QUADRATURE_NODES: usize = 4096;

/// Quantile radii below this are resampled (the wedge closure divides by them).
pub const MIN_RADIUS: f64 = 1e-12;

/// Tuples are generated in chunks of this size, each with its own stream.
pub const SAMPLE_CHUNK: usize = 16_384;

const CONVEXITY_TOL: f64 = 1e-9;

const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Convex nondecreasing potential on `[0, inf)`, stored as values and slopes
/// at knots and evaluated by cubic Hermite interpolation. Outside the knot
/// range it is extended by its tangent lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPotential {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    sorted_slopes: bool,
}

impl RadialPotential {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() || knots.len() != slopes.len() {
            return Err(Error::Format("potential table lengths differ or are empty".into()));
        }
        if knots.iter().chain(&values).chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::Format("potential table must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format("potential knots must be strictly increasing".into()));
        }
        let sorted_slopes = slopes.windows(2).all(|w| w[0] <= w[1]);
        Ok(Self {
            knots,
            values,
            slopes,
            sorted_slopes,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    fn segment(&self, r: f64) -> usize {
        let k = self.knots.partition_point(|&x| x <= r);
        k.clamp(1, self.knots.len() - 1) - 1
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.knots.len();
        if n == 1 || r <= self.knots[0] {
            return self.values[0] + self.slopes[0] * (r - self.knots[0]);
        }
        if r >= self.knots[n - 1] {
            return self.values[n - 1] + self.slopes[n - 1] * (r - self.knots[n - 1]);
        }
        let k = self.segment(r);
        let h = self.knots[k + 1] - self.knots[k];
        let t = (r - self.knots[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.values[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1]
    }

    /// Derivative of the interpolant.
    pub fn slope(&self, r: f64) -> f64 {
        let n = self.knots.len();
        if n == 1 || r <= self.knots[0] {
            return self.slopes[0];
        }
        if r >= self.knots[n - 1] {
            return self.slopes[n - 1];
        }
        let k = self.segment(r);
        let h = self.knots[k + 1] - self.knots[k];
        let t = (r - self.knots[k]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.values[k] + (-6.0 * t2 + 6.0 * t) * self.values[k + 1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[k]
            + (3.0 * t2 - 2.0 * t) * self.slopes[k + 1]
    }

    /// Largest relative violation of discrete convexity (0 when convex): on
    /// every segment the secant slope must lie between the endpoint slopes,
    /// `g0 <= m <= g1`. Tabulated data of a convex function always pass, and
    /// passing data admit a convex interpolant.
    pub fn convexity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.knots.len().saturating_sub(1) {
            let h = self.knots[k + 1] - self.knots[k];
            let m = (self.values[k + 1] - self.values[k]) / h;
            let (g0, g1) = (self.slopes[k], self.slopes[k + 1]);
            let scale = 1.0 + g0.abs() + g1.abs() + m.abs();
            worst = worst
                .max((g0 - m) / scale)
                .max((m - g1) / scale);
        }
        worst
    }

    /// `sup (r s - psi(r))` over the knot range, refined by solving
    /// `psi'(r) = s` on the segments around the best knot. With nondecreasing
    /// slopes the best knot is found by bisection, otherwise by a full scan.
    pub fn conjugate(&self, s: f64) -> f64 {
        let n = self.knots.len();
        let at = |k: usize| self.knots[k] * s - self.values[k];
        let best_k = if self.sorted_slopes {
            let k = self.slopes.partition_point(|&g| g < s).min(n - 1);
            (k.saturating_sub(1)..(k + 2).min(n))
                .max_by(|&a, &b| at(a).total_cmp(&at(b)))
                .unwrap_or(k)
        } else {
            (0..n).max_by(|&a, &b| at(a).total_cmp(&at(b)).then(b.cmp(&a))).unwrap_or(0)
        };
        let mut best = at(best_k);
        let lo = best_k.saturating_sub(1);
        let hi = (best_k + 1).min(n - 1);
        for k in lo..hi {
            for r in self.stationary_points(k, s) {
                best = best.max(r * s - self.eval(r));
            }
        }
        best
    }

    /// Roots of `psi'(r) = s` inside segment `k`.
    fn stationary_points(&self, k: usize, s: f64) -> Vec<f64> {
        let h = self.knots[k + 1] - self.knots[k];
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        let (g0, g1) = (self.slopes[k], self.slopes[k + 1]);
        // psi'(t) = a t^2 + b t + c on t in [0, 1]
        let a = 6.0 * (v0 - v1) / h + 3.0 * g0 + 3.0 * g1;
        let b = 6.0 * (v1 - v0) / h - 4.0 * g0 - 2.0 * g1;
        let c = g0 - s;
        let mut ts = Vec::with_capacity(2);
        if a.abs() <= 1e-14 * (b.abs() + c.abs() + 1.0) {
            if b != 0.0 {
                ts.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let q = -0.5 * (b + b.signum() * sq);
                if q != 0.0 {
                    ts.push(q / a);
                    ts.push(c / q);
                } else {
                    ts.push(0.0);
                }
            }
        }
        ts.into_iter()
            .filter(|t| (0.0..=1.0).contains(t))
            .map(|t| self.knots[k] + t * h)
            .collect()
    }
}

/// Solution of the radial problem: comonotone maps, dual potentials, value.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    marginals: Vec<RadialMeasure>,
    maps: Vec<MonotoneMap>,
    potentials: Vec<RadialPotential>,
    value: f64,
}

impl RadialSolution {
    pub fn dim(&self) -> usize {
        self.maps.len()
    }

    pub fn marginals(&self) -> &[RadialMeasure] {
        &self.marginals
    }

    /// `H_i` (0-based; `map(0)` is the identity).
    pub fn map(&self, i: usize) -> &MonotoneMap {
        &self.maps[i]
    }

    pub fn maps(&self) -> &[MonotoneMap] {
        &self.maps
    }

    pub fn potentials(&self) -> &[RadialPotential] {
        &self.potentials
    }

    /// Optimal value `int prod_i H_i(r) dmu_1^r(r)`.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// `(H_1(r), ..., H_d(r))`.
    pub fn radii(&self, r: f64) -> Vec<f64> {
        self.maps.iter().map(|m| m.eval(r)).collect()
    }

    /// `sum_i int psi_i dmu_i^r`, by the same midpoint rule as the value.
    pub fn dual_value(&self) -> f64 {
        let n = VALUE_QUADRATURE_NODES;
        self.potentials
            .iter()
            .zip(&self.marginals)
            .map(|(psi, mu)| {
                (0..n)
                    .map(|j| psi.eval(mu.quantile_unchecked((j as f64 + 0.5) / n as f64)))
                    .sum::<f64>()
                    / n as f64
            })
            .sum()
    }

    /// Smallest slack `sum_i psi_i(r_i) - prod_i r_i` over the product grid
    /// of `per_axis` quantile levels per marginal (feasibility when `>= 0`).
    pub fn dual_feasibility_slack(&self, per_axis: usize) -> f64 {
        let d = self.dim();
        let per_axis = per_axis.max(2);
        let axes: Vec<Vec<f64>> = self
            .marginals
            .iter()
            .map(|mu| {
                (0..per_axis)
                    .map(|j| mu.quantile_unchecked(j as f64 / (per_axis - 1) as f64))
                    .collect()
            })
            .collect();
        let psi: Vec<Vec<f64>> = axes
            .iter()
            .zip(&self.potentials)
            .map(|(ax, p)| ax.iter().map(|&r| p.eval(r)).collect())
            .collect();
        let total = per_axis.pow(d as u32);
        let mut worst = f64::INFINITY;
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let mut sum = 0.0;
            let mut prod = 1.0;
            for i in 0..d {
                sum += psi[i][idx[i]];
                prod *= axes[i][idx[i]];
            }
            worst = worst.min(sum - prod);
            for i in 0..d {
                idx[i] += 1;
                if idx[i] < per_axis {
                    break;
                }
                idx[i] = 0;
            }
        }
        worst
    }

    /// Largest `sum_i psi_i(H_i(r)) - prod_i H_i(r)` over the map knots and
    /// the midpoints between them.
    pub fn complementary_slackness_gap(&self) -> f64 {
        let knots = self.maps[0].knots();
        let mut worst: f64 = 0.0;
        let mut check = |r: f64| {
            let radii = self.radii(r);
            let sum: f64 = radii.iter().zip(&self.potentials).map(|(&s, p)| p.eval(s)).sum();
            let prod: f64 = radii.iter().product();
            worst = worst.max((sum - prod).abs());
        };
        for (k, &r) in knots.iter().enumerate() {
            check(r);
            if k + 1 < knots.len() {
                check(0.5 * (r + knots[k + 1]));
            }
        }
        worst
    }
}

/// Solves the radial problem for atomless radial marginals.
pub fn solve_radial(marginals: &[RadialMeasure]) -> Result<RadialSolution> {
    let d = marginals.len();
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::contract(format!("need 2..={MAX_DIM} marginals, got {d}")));
    }
    if let Some(index) = marginals.iter().position(|m| !m.is_atomless()) {
        return Err(Error::AtomicMarginal { index });
    }
    let refs: Vec<&RadialMeasure> = marginals.iter().collect();
    let grid = shared_u_grid(&refs);
    let maps = marginals
        .iter()
        .map(|mu| rearrangement_on_grid(&marginals[0], mu, &grid))
        .collect::<Result<Vec<_>>>()?;

    let n = VALUE_QUADRATURE_NODES;
    let value = (0..n)
        .map(|j| {
            let r = marginals[0].quantile_unchecked((j as f64 + 0.5) / n as f64);
            maps.iter().map(|m| m.eval(r)).product::<f64>()
        })
        .sum::<f64>()
        / n as f64;

    let potentials = (0..d)
        .map(|i| integrate_potential(&maps, i))
        .collect::<Result<Vec<_>>>()?;
    for (index, p) in potentials.iter().enumerate() {
        let drop = p.convexity_defect();
        if drop > CONVEXITY_TOL {
            return Err(Error::NonConvexPotential { index, drop });
        }
    }
    Ok(RadialSolution {
        marginals: marginals.to_vec(),
        maps,
        potentials,
        value,
    })
}

/// Integrates `psi_i'(H_i(r)) = prod_{j != i} H_j(r)` along the shared knots.
/// On each segment every `H_j` is affine, so the integrand is a polynomial of
/// degree `d - 1 <= 7` and 4-point Gauss-Legendre is exact.
fn integrate_potential(maps: &[MonotoneMap], i: usize) -> Result<RadialPotential> {
    let d = maps.len();
    let r = maps[0].knots();
    let h: Vec<&[f64]> = maps.iter().map(|m| m.values()).collect();
    let slope_at = |k: usize| -> f64 { (0..d).filter(|&j| j != i).map(|j| h[j][k]).product() };

    let start = if i + 1 == d {
        (0..d).map(|j| h[j][0]).product()
    } else {
        0.0
    };
    let mut knots = vec![h[i][0]];
    let mut values = vec![start];
    let mut slopes = vec![slope_at(0)];
    let mut acc = start;
    for k in 0..r.len() - 1 {
        let (r0, r1) = (r[k], r[k + 1]);
        let dh = h[i][k + 1] - h[i][k];
        if dh > 0.0 {
            let half = 0.5 * (r1 - r0);
            let mut integral = 0.0;
            for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let t = 0.5 * (x + 1.0);
                let prod: f64 = (0..d)
                    .filter(|&j| j != i)
                    .map(|j| h[j][k] + t * (h[j][k + 1] - h[j][k]))
                    .product();
                integral += w * prod;
            }
            // d r = half * dx, dH_i = (dh / (r1 - r0)) dr
            acc += integral * half * dh / (r1 - r0);
            knots.push(h[i][k + 1]);
            values.push(acc);
            slopes.push(slope_at(k + 1));
        }
    }
    RadialPotential::new(knots, values, slopes)
}

/// How the sampler closes each tuple.
#[derive(Debug, Clone, Copy)]
enum Closure {
    Optimal,
    /// `+wedge` with probability `p`, `-wedge` otherwise (d = 3).
    Mixture(f64),
    /// Second vector drawn with density `1 + <y, e>/|y|` on its circle.
    Perturbed([f64; 3]),
}

/// Sampler for the optimal coupling of a [`RadialSolution`].
///
/// Orientation: the last vector is the wedge of the previous unit directions
/// in increasing index order, so `det(x_1, ..., x_d) = prod_i |x_i| >= 0`.
#[derive(Debug, Clone)]
pub struct CouplingSampler {
    solution: RadialSolution,
}

/// Output of [`CouplingSampler::sample_perturbed`].
#[derive(Debug, Clone)]
pub struct PerturbedSample {
    pub tuples: Vec<Tuple>,
    /// Proposals drawn by the rejection step (envelope constant 2).
    pub proposals: u64,
}

impl PerturbedSample {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            return 0.0;
        }
        self.tuples.len() as f64 / self.proposals as f64
    }
}

impl CouplingSampler {
    pub fn new(solution: RadialSolution) -> Self {
        Self { solution }
    }

    pub fn solution(&self) -> &RadialSolution {
        &self.solution
    }

    pub fn dim(&self) -> usize {
        self.solution.dim()
    }

    /// `n` i.i.d. tuples from the optimal coupling.
    pub fn sample(&self, n: usize, rng: &mut RngState) -> Vec<Tuple> {
        self.run(n, rng, Closure::Optimal).0
    }

    /// Calls `visit` on consecutive blocks of tuples, in order, without
    /// holding the whole sample in memory. The concatenated output equals
    /// [`CouplingSampler::sample`] for the same state.
    pub fn sample_blocks(&self, n: usize, rng: &mut RngState, mut visit: impl FnMut(&[Tuple])) {
        let key = rng.derive_key();
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let batch = rayon::current_num_threads().max(1) * 2;
        let mut c0 = 0;
        while c0 < chunks {
            let c1 = (c0 + batch).min(chunks);
            let blocks: Vec<(Vec<Tuple>, u64)> = (c0..c1)
                .into_par_iter()
                .map(|c| self.chunk(key, c, n, Closure::Optimal))
                .collect();
            for (b, _) in &blocks {
                visit(b);
            }
            c0 = c1;
        }
    }

    /// Tuples whose third vector is `+wedge` with probability `p` and `-wedge`
    /// otherwise. Only `|det|` is preserved; for `p = 1` the output equals
    /// [`CouplingSampler::sample`] with the same state.
    pub fn sample_absdet_mixture(&self, p: f64, n: usize, rng: &mut RngState) -> Result<Vec<Tuple>> {
        if self.dim() != 3 {
            return Err(Error::contract("the |det| mixture is defined for d = 3"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::contract(format!("mixture weight {p} outside [0, 1]")));
        }
        Ok(self.run(n, rng, Closure::Mixture(p)).0)
    }

    /// Tuples whose second vector has density `1 + <y, e>/|y|` (w.r.t. the
    /// normalized arc length) on the circle `H_2(|x_1|) S(x_1)`.
    pub fn sample_perturbed(&self, e: &Point, n: usize, rng: &mut RngState) -> Result<PerturbedSample> {
        if self.dim() != 3 || e.dim() != 3 {
            return Err(Error::contract("the perturbed sampler is defined for d = 3"));
        }
        if (e.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::contract(format!("|e| = {} is not 1", e.norm())));
        }
        let (tuples, proposals) = self.run(n, rng, Closure::Perturbed([e[0], e[1], e[2]]));
        Ok(PerturbedSample { tuples, proposals })
    }

    fn run(&self, n: usize, rng: &mut RngState, closure: Closure) -> (Vec<Tuple>, u64) {
        let key = rng.derive_key();
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let blocks: Vec<(Vec<Tuple>, u64)> = (0..chunks)
            .into_par_iter()
            .map(|c| self.chunk(key, c, n, closure))
            .collect();
        let mut out = Vec::with_capacity(n);
        let mut proposals = 0;
        for (b, p) in blocks {
            out.extend(b);
            proposals += p;
        }
        (out, proposals)
    }

    fn chunk(&self, key: u64, c: usize, n: usize, closure: Closure) -> (Vec<Tuple>, u64) {
        let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
        let mut main = RngState::stream(key, 2 * c as u64);
        let mut aux = RngState::stream(key, 2 * c as u64 + 1);
        let mut out = Vec::with_capacity(len);
        let mut proposals = 0;
        for _ in 0..len {
            out.push(self.draw(&mut main, &mut aux, closure, &mut proposals));
        }
        (out, proposals)
    }

    fn draw(&self, main: &mut RngState, aux: &mut RngState, closure: Closure, proposals: &mut u64) -> Tuple {
        let d = self.dim();
        let sol = &self.solution;
        let radii = loop {
            let r = sol.marginals[0].sample(main);
            let radii = sol.radii(r);
            if radii.iter().all(|&x| x >= MIN_RADIUS) {
                break radii;
            }
        };
        let mut dirs: Vec<Point> = Vec::with_capacity(d);
        dirs.push(random_unit(d, main));
        for i in 1..d - 1 {
            let frame = Frame::from_orthonormal(d, dirs.clone());
            let basis = complement_basis(&frame).expect("orthonormal frame of rank < d");
            let y = match closure {
                Closure::Perturbed(e) if i == 1 => loop {
                    *proposals += 1;
                    let y = sample_on_basis(&basis, 1.0, main);
                    // accept with probability (1 + <y, e>) / 2
                    if main.random::<f64>() * 2.0 < 1.0 + dot(&y, &e) {
                        break y;
                    }
                },
                _ => sample_on_basis(&basis, 1.0, main),
            };
            dirs.push(y);
        }
        let mut last = linalg::wedge_unchecked(&dirs, d);
        if let Closure::Mixture(p) = closure {
            if aux.random::<f64>() >= p {
                last = last.neg();
            }
        }
        dirs.push(last);
        dirs.iter()
            .zip(&radii)
            .map(|(u, &r)| u.scaled(r))
            .collect()
    }
}

/// The explicit orthogonal maps of `R^4`:
/// `T_2(x) = (-x2, x1, -x4, x3)`, `T_3(x) = (-x3, x4, x1, -x2)`,
/// `T_4(x) = (-x4, -x3, x2, x1)`.
pub fn monge_maps_4d(x: &Point) -> Result<(Point, Point, Point)> {
    if x.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: x.dim(),
        });
    }
    let (a, b, c, e) = (x[0], x[1], x[2], x[3]);
    Ok((
        Point::from_vec_unchecked(vec![-b, a, -e, c]),
        Point::from_vec_unchecked(vec![-c, e, a, -b]),
        Point::from_vec_unchecked(vec![-e, -c, b, a]),
    ))
}
