//! Discrete and radial probability measures, quantile functions and monotone
//! rearrangements between radial laws.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::rng::RngState;

/// Tolerance on the total mass of a [`DiscreteMeasure`].
pub const MASS_TOL: f64 = 1e-12;

/// Default number of knots used when tabulating a quantile function.
pub const DEFAULT_KNOTS: usize = 1024;

/// Radii closer than this are treated as one atom by [`radial_projection`].
pub const RADIUS_MERGE_TOL: f64 = 1e-12;

/// Finitely supported probability measure on `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::contract("discrete measure needs at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::contract(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        for a in &atoms {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::contract("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::contract(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            dim,
            atoms,
            weights,
        })
    }

    /// Equal weights on the given atoms.
    pub fn uniform(dim: usize, atoms: Vec<Point>) -> Result<Self> {
        let n = atoms.len().max(1);
        let mut weights = vec![1.0 / n as f64; atoms.len()];
        if let Some((last, rest)) = weights.split_last_mut() {
            *last = 1.0 - rest.iter().sum::<f64>();
        }
        Self::new(dim, atoms, weights)
    }

    pub fn dirac(atom: Point) -> Self {
        Self {
            dim: atom.dim(),
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Image of the measure under `x -> -x`, atom by atom.
    pub fn reflected(&self) -> Self {
        Self {
            dim: self.dim,
            atoms: self.atoms.iter().map(Point::neg).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Applies a linear map (given as a closure on coordinates) to every atom.
    pub fn mapped(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Point::new(f(a)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.dim, atoms, self.weights.clone())
    }
}

/// Probability measure on `[0, inf)` stored as a tabulated quantile function.
///
/// The table is a list of knots `(u_k, r_k)` with `u` running from 0 to 1; the
/// quantile is linearly interpolated between knots. Repeated `u` values encode
/// jumps of the quantile (gaps in the support); segments where `r` is flat
/// over a positive `u` interval encode atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMeasure {
    u: Vec<f64>,
    r: Vec<f64>,
    atomless: bool,
}

impl RadialMeasure {
    /// Validates a quantile table. The first `u` must be 0 and the last 1.
    pub fn from_table(u: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        Self::validate_table(&u, &r)?;
        let atomless = u
            .windows(2)
            .zip(r.windows(2))
            .all(|(du, dr)| du[1] == du[0] || dr[1] > dr[0]);
        Ok(Self { u, r, atomless })
    }

    fn validate_table(u: &[f64], r: &[f64]) -> Result<()> {
        if u.len() != r.len() {
            return Err(Error::Format(format!(
                "quantile table has {} u-knots and {} r-knots",
                u.len(),
                r.len()
            )));
        }
        if u.len() < 2 {
            return Err(Error::Format("quantile table needs at least two knots".into()));
        }
        if u.iter().chain(r).any(|v| !v.is_finite()) {
            return Err(Error::Format("quantile table must be finite".into()));
        }
        if u[0] != 0.0 || u[u.len() - 1] != 1.0 {
            return Err(Error::Format("quantile table must span u in [0, 1]".into()));
        }
        if u.windows(2).any(|w| w[1] < w[0]) || r.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Format("quantile table must be nondecreasing".into()));
        }
        if r[0] < 0.0 {
            return Err(Error::Format("radii must be nonnegative".into()));
        }
        Ok(())
    }

    /// Tabulates `q` on a uniform grid of `knots` points in `[0, 1]`.
    pub fn from_quantile_fn(q: impl Fn(f64) -> f64, knots: usize) -> Result<Self> {
        let knots = knots.max(2);
        let u: Vec<f64> = (0..knots)
            .map(|k| k as f64 / (knots - 1) as f64)
            .collect();
        let r = u.iter().map(|&v| q(v)).collect();
        Self::from_table(u, r)
    }

    /// Radial law of the uniform distribution on the unit ball of `R^dim`
    /// (CDF `r^dim`).
    pub fn uniform_ball(dim: usize) -> Self {
        let p = 1.0 / dim as f64;
        Self::from_quantile_fn(|u| u.powf(p), DEFAULT_KNOTS).expect("valid table")
    }

    /// Uniform law on `[0, r_max]`.
    pub fn uniform_radius(r_max: f64) -> Result<Self> {
        Self::from_quantile_fn(|u| r_max * u, DEFAULT_KNOTS)
    }

    pub fn knots_u(&self) -> &[f64] {
        &self.u
    }

    pub fn knots_r(&self) -> &[f64] {
        &self.r
    }

    pub fn is_atomless(&self) -> bool {
        self.atomless
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// Left-continuous generalized inverse of the CDF.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::contract(format!("quantile level {u} outside [0, 1]")));
        }
        Ok(self.quantile_unchecked(u))
    }

    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        let k = self.u.partition_point(|&x| x < u);
        if k == 0 {
            return self.r[0];
        }
        if k == self.u.len() {
            return self.r[k - 1];
        }
        let (u0, u1) = (self.u[k - 1], self.u[k]);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        if u >= u1 {
            return r1;
        }
        r0 + (r1 - r0) * (u - u0) / (u1 - u0)
    }

    /// `F(r) = sup { u : Q(u) <= r }`.
    pub fn cdf(&self, r: f64) -> f64 {
        if r < self.r[0] {
            return 0.0;
        }
        let k = self.r.partition_point(|&x| x <= r) - 1;
        if k + 1 == self.r.len() {
            return 1.0;
        }
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        let (u0, u1) = (self.u[k], self.u[k + 1]);
        u0 + (u1 - u0) * (r - r0) / (r1 - r0)
    }

    /// Draws a radius by inverse-transform sampling.
    pub fn sample(&self, rng: &mut RngState) -> f64 {
        self.quantile_unchecked(rng.random::<f64>())
    }

    /// Same law with every radius multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::contract("scale must be positive"));
        }
        Self::from_table(self.u.clone(), self.r.iter().map(|r| r * s).collect())
    }
}

/// Nondecreasing piecewise-linear map on `[r_min, r_max]`; constant outside.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMap {
    r: Vec<f64>,
    h: Vec<f64>,
}

impl MonotoneMap {
    pub fn new(r: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if r.len() != h.len() || r.is_empty() {
            return Err(Error::contract("monotone map needs matching nonempty knots"));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::contract("monotone map knots must be strictly increasing"));
        }
        if h.windows(2).any(|w| w[1] < w[0]) || h.iter().any(|v| *v < 0.0) {
            return Err(Error::contract("monotone map values must be nondecreasing and >= 0"));
        }
        Ok(Self { r, h })
    }

    pub fn identity(knots: Vec<f64>) -> Result<Self> {
        Self::new(knots.clone(), knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.h
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.r[0], self.r[self.r.len() - 1])
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= self.r[0] {
            return self.h[0];
        }
        if r >= self.r[n - 1] {
            return self.h[n - 1];
        }
        let k = self.r.partition_point(|&x| x <= r);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        let (h0, h1) = (self.h[k - 1], self.h[k]);
        h0 + (h1 - h0) * (r - r0) / (r1 - r0)
    }

    /// `self ∘ inner`, tabulated on the inner knots together with the preimages
    /// of this map's knots, so the piecewise-linear composition is exact on
    /// the inner domain.
    pub fn compose(&self, inner: &MonotoneMap) -> Result<MonotoneMap> {
        let mut r: Vec<f64> = inner.r.clone();
        for &s in &self.r {
            for w in 0..inner.r.len().saturating_sub(1) {
                let (h0, h1) = (inner.h[w], inner.h[w + 1]);
                if h0 < s && s < h1 {
                    let t = (s - h0) / (h1 - h0);
                    r.push(inner.r[w] + t * (inner.r[w + 1] - inner.r[w]));
                }
            }
        }
        r.sort_by(f64::total_cmp);
        r.dedup();
        let h = r.iter().map(|&x| self.eval(inner.eval(x))).collect();
        MonotoneMap::new(r, h)
    }
}

/// Push-forward of `mu` through the Euclidean norm.
///
/// The result is the exact step quantile of the radii. The atomless flag is
/// cleared only when two positive-weight atoms share a radius (within
/// [`RADIUS_MERGE_TOL`]); a cloud of distinct radii is treated as an empirical
/// stand-in for an atomless law.
pub fn radial_projection(mu: &DiscreteMeasure) -> RadialMeasure {
    let mut pairs: Vec<(f64, f64)> = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(a, w)| (a.norm(), *w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    let mut coincident = false;
    for (r, w) in pairs {
        match merged.last_mut() {
            Some(last) if (r - last.0).abs() <= RADIUS_MERGE_TOL => {
                last.1 += w;
                coincident = true;
            }
            _ => merged.push((r, w)),
        }
    }
    let mut u = Vec::with_capacity(2 * merged.len());
    let mut r = Vec::with_capacity(2 * merged.len());
    let mut cum = 0.0;
    let last = merged.len() - 1;
    for (j, (radius, w)) in merged.iter().enumerate() {
        u.push(cum);
        r.push(*radius);
        cum = if j == last { 1.0 } else { (cum + w).min(1.0) };
        u.push(cum);
        r.push(*radius);
    }
    RadialMeasure {
        u,
        r,
        atomless: !coincident,
    }
}

/// Monotone rearrangement `H = Q_2 ∘ F_1` of `mu1` onto `mu2`.
///
/// Both tables are aligned on the union of their `u`-knots, so `H` is exact
/// at every knot of either measure.
pub fn monotone_rearrangement(mu1: &RadialMeasure, mu2: &RadialMeasure) -> Result<MonotoneMap> {
    if !mu1.atomless {
        return Err(Error::AtomicMarginal { index: 0 });
    }
    rearrangement_on_grid(mu1, mu2, &shared_u_grid(&[mu1, mu2]))
}

/// Union of the `u`-knots of several measures.
pub(crate) fn shared_u_grid(measures: &[&RadialMeasure]) -> Vec<f64> {
    let mut u: Vec<f64> = measures.iter().flat_map(|m| m.u.iter().copied()).collect();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

/// Tabulates `Q_2 ∘ F_1` at `r = Q_1(u)` for `u` in the grid. Jumps of `Q_1`
/// contribute both sides so gaps in the support map to flat segments.
pub(crate) fn rearrangement_on_grid(
    mu1: &RadialMeasure,
    mu2: &RadialMeasure,
    grid: &[f64],
) -> Result<MonotoneMap> {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(grid.len() + 4);
    for &u in grid {
        pts.push((mu1.quantile_unchecked(u), mu2.quantile_unchecked(u)));
    }
    for (k, w) in mu1.u.windows(2).enumerate() {
        if w[0] == w[1] {
            pts.push((mu1.r[k + 1], mu2.quantile_unchecked(w[0])));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // Keep the largest value at repeated radii (F_1 takes the sup).
    let mut r: Vec<f64> = Vec::with_capacity(pts.len());
    let mut h: Vec<f64> = Vec::with_capacity(pts.len());
    for (x, y) in pts {
        if r.last() == Some(&x) {
            *h.last_mut().expect("nonempty") = y;
        } else {
            r.push(x);
            h.push(y);
        }
    }
    MonotoneMap::new(r, h)
}

/// `sup_u |Q_2(u) - H(Q_1(u))|` over a 1001-point grid of `[0, 1]`.
pub fn pushforward_check(map: &MonotoneMap, mu1: &RadialMeasure, mu2: &RadialMeasure) -> f64 {
    (0..=1000)
        .map(|j| {
            let u = j as f64 / 1000.0;
            (mu2.quantile_unchecked(u) - map.eval(mu1.quantile_unchecked(u))).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_unit;
    use proptest::prelude::{prop_assert, proptest};

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn discrete_validation() {
        assert!(DiscreteMeasure::new(2, vec![], vec![]).is_err());
        assert!(DiscreteMeasure::new(2, vec![p(&[1.0, 0.0])], vec![0.9]).is_err());
        assert!(DiscreteMeasure::new(2, vec![p(&[1.0, 0.0])], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::new(3, vec![p(&[1.0, 0.0])], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(2, vec![p(&[1.0, 0.0])], vec![1.0]).is_ok());
    }

    #[test]
    fn projection_of_a_dirac() {
        let mu = radial_projection(&DiscreteMeasure::dirac(p(&[0.0, 1.0])));
        for u in [0.0, 0.3, 1.0] {
            assert_eq!(mu.quantile(u).unwrap(), 1.0);
        }
    }

    #[test]
    fn projection_of_two_atoms() {
        let mu = DiscreteMeasure::new(2, vec![p(&[1.0, 0.0]), p(&[0.0, 2.0])], vec![0.5, 0.5])
            .unwrap();
        let q = radial_projection(&mu);
        assert_eq!(q.quantile(0.2).unwrap(), 1.0);
        assert_eq!(q.quantile(0.49).unwrap(), 1.0);
        // left-continuous inverse: the level 1/2 is still the first atom
        assert_eq!(q.quantile(0.5).unwrap(), 1.0);
        assert_eq!(q.quantile(0.51).unwrap(), 2.0);
        assert_eq!(q.quantile(1.0).unwrap(), 2.0);
        assert!(q.is_atomless());
        assert_eq!(q.cdf(1.0), 0.5);
        assert_eq!(q.cdf(1.5), 0.5);
        assert_eq!(q.cdf(2.0), 1.0);
    }

    #[test]
    fn coincident_radii_clear_the_flag() {
        let mu = DiscreteMeasure::new(2, vec![p(&[1.0, 0.0]), p(&[0.0, 1.0])], vec![0.5, 0.5])
            .unwrap();
        let q = radial_projection(&mu);
        assert!(!q.is_atomless());
        assert!(matches!(
            monotone_rearrangement(&q, &q),
            Err(Error::AtomicMarginal { .. })
        ));
    }

    #[test]
    fn projection_preserves_mass() {
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let atoms = vec![p(&[3.0, 0.0]), p(&[0.0, 1.0]), p(&[2.0, 0.0]), p(&[0.0, 4.0])];
        let q = radial_projection(&DiscreteMeasure::new(2, atoms, w).unwrap());
        assert_eq!(*q.knots_u().last().unwrap(), 1.0);
        // atom masses are the u-lengths of the flat segments, in radius order
        let masses: Vec<f64> = q.knots_u().chunks(2).map(|c| c[1] - c[0]).collect();
        for (m, e) in masses.iter().zip([0.2, 0.3, 0.1, 0.4]) {
            assert!((m - e).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_of_ball_cloud() {
        let mut rng = RngState::from_seed(31);
        let n = 100_000;
        let atoms: Vec<Point> = (0..n)
            .map(|_| {
                let r = rng.random::<f64>().powf(1.0 / 3.0);
                random_unit(3, &mut rng).scaled(r)
            })
            .collect();
        let q = radial_projection(&DiscreteMeasure::uniform(3, atoms).unwrap());
        // u = 0 is excluded: there the empirical quantile is the sample
        // minimum, of order N^{-1/3} ~ 0.02 regardless of the fit.
        let err = (1..=1000)
            .map(|j| {
                let u = j as f64 / 1000.0;
                (q.quantile(u).unwrap() - u.powf(1.0 / 3.0)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 0.02, "sup error {err}");
    }

    #[test]
    fn ball_quantiles() {
        let b = RadialMeasure::uniform_ball(3);
        assert!((b.quantile(0.125).unwrap() - 0.5).abs() < 1e-4);
        assert_eq!(b.quantile(1.0).unwrap(), b.r_max());
        assert!(b.quantile(1.5).is_err());
        assert!(b.quantile(-0.1).is_err());
        assert!(b.is_atomless());
    }

    #[test]
    fn quantile_at_knots_is_exact() {
        let b = RadialMeasure::uniform_ball(3);
        for (u, r) in b.knots_u().iter().zip(b.knots_r()) {
            assert_eq!(b.quantile(*u).unwrap(), *r);
        }
    }

    #[test]
    fn cdf_inverts_quantile() {
        let b = RadialMeasure::uniform_ball(3);
        for j in 1..100 {
            let u = j as f64 / 100.0;
            assert!((b.cdf(b.quantile(u).unwrap()) - u).abs() < 1e-12);
        }
        assert_eq!(b.cdf(-1.0), 0.0);
        assert_eq!(b.cdf(2.0), 1.0);
    }

    #[test]
    fn table_validation() {
        assert!(RadialMeasure::from_table(vec![0.0, 1.0], vec![1.0, 0.5]).is_err());
        assert!(RadialMeasure::from_table(vec![0.1, 1.0], vec![0.0, 1.0]).is_err());
        assert!(RadialMeasure::from_table(vec![0.0, 1.0], vec![-1.0, 1.0]).is_err());
        let atom = RadialMeasure::from_table(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(!atom.is_atomless());
        assert_eq!(atom.quantile(0.7).unwrap(), 1.0);
    }

    #[test]
    fn rearrangement_identity_and_scaling() {
        let b = RadialMeasure::uniform_ball(3);
        let h = monotone_rearrangement(&b, &b).unwrap();
        for (r, v) in h.knots().iter().zip(h.values()) {
            assert_eq!(r, v);
        }
        assert!(pushforward_check(&h, &b, &b) <= 1e-10);

        let u1 = RadialMeasure::uniform_radius(1.0).unwrap();
        let u2 = RadialMeasure::uniform_radius(2.0).unwrap();
        let h = monotone_rearrangement(&u1, &u2).unwrap();
        for r in [0.0, 0.1, 0.37, 0.9, 1.0] {
            assert!((h.eval(r) - 2.0 * r).abs() < 1e-12);
        }
        assert!(pushforward_check(&h, &u1, &u2) <= 1e-10);
    }

    #[test]
    fn pushforward_discrepancy_of_wrong_map() {
        let u1 = RadialMeasure::uniform_radius(1.0).unwrap();
        let u2 = u1.scaled(2.0).unwrap();
        let id = MonotoneMap::identity(u1.knots_r().to_vec()).unwrap();
        assert!((pushforward_check(&id, &u1, &u2) - u1.r_max()).abs() < 1e-12);
    }

    #[test]
    fn pushforward_of_quantile_samples() {
        let b = RadialMeasure::uniform_ball(3);
        let h = monotone_rearrangement(&b, &b).unwrap();
        let mut err: f64 = 0.0;
        for j in 0..10_000 {
            let u = (j as f64 + 0.5) / 10_000.0;
            err = err.max((h.eval(b.quantile(u).unwrap()) - b.quantile(u).unwrap()).abs());
        }
        assert!(err <= 1e-6);
    }

    fn law(exponent: f64, scale: f64) -> RadialMeasure {
        RadialMeasure::from_quantile_fn(|u| scale * u.powf(exponent), DEFAULT_KNOTS).unwrap()
    }

    proptest! {
        #[test]
        fn quantile_is_monotone(a in 0.2f64..3.0, s in 0.1f64..5.0, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
            let m = law(a, s);
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            prop_assert!(m.quantile(lo).unwrap() <= m.quantile(hi).unwrap());
        }

        #[test]
        fn rearrangements_compose(a in 0.2f64..3.0, b in 0.2f64..3.0, c in 0.2f64..3.0,
                                  sb in 0.5f64..3.0, sc in 0.5f64..3.0) {
            let (m1, m2, m3) = (law(a, 1.0), law(b, sb), law(c, sc));
            let h12 = monotone_rearrangement(&m1, &m2).unwrap();
            let h23 = monotone_rearrangement(&m2, &m3).unwrap();
            let h13 = monotone_rearrangement(&m1, &m3).unwrap();
            let composed = h23.compose(&h12).unwrap();
            prop_assert!(composed.values().windows(2).all(|w| w[1] >= w[0]));
            for j in 0..=1024 {
                let r = m1.quantile(j as f64 / 1024.0).unwrap();
                prop_assert!((composed.eval(r) - h13.eval(r)).abs() <= 1e-6);
            }
        }
    }
}
