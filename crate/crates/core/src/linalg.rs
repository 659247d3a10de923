//! Small dense linear algebra in `R^d`: determinants, wedge products,
//! orthogonal complements and uniform sampling on sub-spheres.
//!
//! Dimensions up to [`MAX_DIM`] are supported; everything is computed on the
//! stack.

use std::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Largest ambient dimension handled by [`det`] and [`wedge`].
pub const MAX_DIM: usize = 8;

/// Pairwise orthogonality tolerance for [`Frame`] (on unit-normalized vectors).
pub const ORTHO_TOL: f64 = 1e-8;

/// A vector in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// Builds a point, rejecting empty or non-finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::contract("point must have at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::contract("point coordinates must be finite"));
        }
        Ok(Self(coords))
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// The `k`-th standard basis vector of `R^dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_square<C: AsRef<[f64]>>(columns: &[C], count: usize) -> Result<usize> {
    let d = count;
    if d == 0 || d > MAX_DIM {
        return Err(Error::contract(format!(
            "dimension {d} outside supported range 1..={MAX_DIM}"
        )));
    }
    for c in columns {
        let got = c.as_ref().len();
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
    }
    Ok(d)
}

/// LU determinant of an `n x n` row-major matrix stored in `a`, which is
/// destroyed.
fn lu_det(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            det = -det;
        }
        let p = a[k * n + k];
        det *= p;
        for r in (k + 1)..n {
            let f = a[r * n + k] / p;
            if f != 0.0 {
                for c in (k + 1)..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
            }
        }
    }
    det
}

/// Determinant of the matrix whose `i`-th column is `columns[i]`.
pub fn det<C: AsRef<[f64]>>(columns: &[C]) -> Result<f64> {
    let d = check_square(columns, columns.len())?;
    Ok(det_unchecked(columns, d))
}

/// [`det`] without shape validation; `columns` must hold `d` vectors of
/// length `d`.
pub fn det_unchecked<C: AsRef<[f64]>>(columns: &[C], d: usize) -> f64 {
    match d {
        1 => columns[0].as_ref()[0],
        2 => {
            let (a, b) = (columns[0].as_ref(), columns[1].as_ref());
            a[0] * b[1] - a[1] * b[0]
        }
        3 => {
            let (a, b, c) = (columns[0].as_ref(), columns[1].as_ref(), columns[2].as_ref());
            dot(c, &cross3(a, b))
        }
        _ => {
            let mut m = [0.0; MAX_DIM * MAX_DIM];
            // row r, column c
            for (c, col) in columns.iter().enumerate() {
                for (r, v) in col.as_ref().iter().enumerate() {
                    m[r * d + c] = *v;
                }
            }
            lu_det(&mut m[..d * d], d)
        }
    }
}

fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Generalized cross product of `d - 1` vectors in `R^d`: the unique `w` with
/// `det(v_1, ..., v_{d-1}, x) = <x, w>` for every `x`.
pub fn wedge<C: AsRef<[f64]>>(vectors: &[C]) -> Result<Point> {
    let d = vectors.len() + 1;
    check_square(vectors, d)?;
    Ok(wedge_unchecked(vectors, d))
}

pub(crate) fn wedge_unchecked<C: AsRef<[f64]>>(vectors: &[C], d: usize) -> Point {
    match d {
        2 => {
            let v = vectors[0].as_ref();
            Point(vec![-v[1], v[0]])
        }
        3 => Point(cross3(vectors[0].as_ref(), vectors[1].as_ref()).to_vec()),
        _ => {
            // Cofactor expansion along the free last column.
            let n = d - 1;
            let mut out = vec![0.0; d];
            let mut minor = [0.0; MAX_DIM * MAX_DIM];
            for (k, slot) in out.iter_mut().enumerate() {
                let mut rr = 0;
                for r in 0..d {
                    if r == k {
                        continue;
                    }
                    for (c, v) in vectors.iter().enumerate() {
                        minor[rr * n + c] = v.as_ref()[r];
                    }
                    rr += 1;
                }
                // Laplace sign (-1)^((k + 1) + d) for row k+1, column d (1-based).
                let sign = if (k + 1 + d).is_multiple_of(2) { 1.0 } else { -1.0 };
                *slot = sign * lu_det(&mut minor[..n * n], n);
            }
            Point(out)
        }
    }
}

/// The signed wedge of all columns except `i` (0-based), oriented so that
/// `<x_i, result> = det(x_1, ..., x_d)`.
///
/// For odd `d` the sign is `(-1)^i` (0-based), i.e. the usual alternating
/// pattern; for even `d` it is `(-1)^(d - 1 - i)`.
pub fn signed_wedge_excluding<C: AsRef<[f64]>>(x: &[C], i: usize) -> Result<Point> {
    let d = x.len();
    check_square(x, d)?;
    if d < 2 {
        return Err(Error::contract("signed wedge needs d >= 2"));
    }
    if i >= d {
        return Err(Error::contract(format!("index {i} out of range for d = {d}")));
    }
    let others: Vec<&[f64]> = x
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, c)| c.as_ref())
        .collect();
    let w = wedge_unchecked(&others, d);
    if (d - 1 - i).is_multiple_of(2) {
        Ok(w)
    } else {
        Ok(w.neg())
    }
}

/// A family of pairwise orthogonal nonzero vectors in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    dim: usize,
    vectors: Vec<Point>,
}

impl Frame {
    /// The empty frame of `R^dim`; its complement is the whole space.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            vectors: Vec::new(),
        }
    }

    /// Validates pairwise orthogonality within [`ORTHO_TOL`].
    pub fn new(dim: usize, vectors: Vec<Point>) -> Result<Self> {
        if vectors.len() > dim {
            return Err(Error::contract(format!(
                "frame of {} vectors in R^{dim}",
                vectors.len()
            )));
        }
        for v in &vectors {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
            if v.norm() == 0.0 {
                return Err(Error::degenerate("frame vector is zero"));
            }
        }
        for a in 0..vectors.len() {
            for b in (a + 1)..vectors.len() {
                let c = vectors[a].dot(&vectors[b]) / (vectors[a].norm() * vectors[b].norm());
                if c.abs() > ORTHO_TOL {
                    return Err(Error::degenerate(format!(
                        "frame vectors {a} and {b} not orthogonal (cos = {c:e})"
                    )));
                }
            }
        }
        Ok(Self { dim, vectors })
    }

    /// Orthonormalizes arbitrary linearly independent vectors (Gram-Schmidt
    /// with one re-orthogonalization pass).
    pub fn orthonormalized(dim: usize, vectors: &[Point]) -> Result<Self> {
        if vectors.len() > dim {
            return Err(Error::degenerate("more vectors than dimensions"));
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
            let scale = v.norm();
            let mut r = v.coords().to_vec();
            project_out(&mut r, &basis);
            project_out(&mut r, &basis);
            let n = norm(&r);
            if !(n > 1e-10 * scale) {
                return Err(Error::degenerate("frame is rank deficient"));
            }
            r.iter_mut().for_each(|c| *c /= n);
            basis.push(r);
        }
        Ok(Self {
            dim,
            vectors: basis.into_iter().map(Point).collect(),
        })
    }

    /// Trusted constructor for vectors already known to be orthonormal.
    pub(crate) fn from_orthonormal(dim: usize, vectors: Vec<Point>) -> Self {
        Self { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Point] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

fn project_out(r: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(r, q);
        for (x, y) in r.iter_mut().zip(q) {
            *x -= c * y;
        }
    }
}

/// Orthonormal basis of the orthogonal complement of `frame`.
pub fn complement_basis(frame: &Frame) -> Result<Frame> {
    let d = frame.dim;
    let own = Frame::orthonormalized(d, &frame.vectors)?;
    let mut basis: Vec<Vec<f64>> = own.vectors.into_iter().map(Point::into_vec).collect();
    let start = basis.len();
    let mut used = [false; 64];
    while basis.len() < d {
        // Greedily extend with the standard basis vector that keeps the
        // largest residual.
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for k in 0..d {
            if used[k] {
                continue;
            }
            let mut r = vec![0.0; d];
            r[k] = 1.0;
            project_out(&mut r, &basis);
            project_out(&mut r, &basis);
            let n = norm(&r);
            if best.as_ref().is_none_or(|b| n > b.2) {
                best = Some((k, r, n));
            }
        }
        let (k, mut r, n) = best.ok_or_else(|| Error::Internal("complement exhausted".into()))?;
        if n < 1e-6 {
            return Err(Error::Internal("complement extension lost rank".into()));
        }
        used[k] = true;
        r.iter_mut().for_each(|c| *c /= n);
        basis.push(r);
    }
    Ok(Frame {
        dim: d,
        vectors: basis.split_off(start).into_iter().map(Point).collect(),
    })
}

/// Uniform point on the sphere of the given radius inside the orthogonal
/// complement of `frame`.
pub fn sample_subsphere(frame: &Frame, radius: f64, rng: &mut RngState) -> Result<Point> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::contract(format!("radius must be positive, got {radius}")));
    }
    let basis = complement_basis(frame)?;
    if basis.is_empty() {
        return Err(Error::degenerate("orthogonal complement is zero-dimensional"));
    }
    Ok(sample_on_basis(&basis, radius, rng))
}

pub(crate) fn sample_on_basis(basis: &Frame, radius: f64, rng: &mut RngState) -> Point {
    let d = basis.dim;
    loop {
        let mut out = vec![0.0; d];
        for b in &basis.vectors {
            let g: f64 = rng.sample(StandardNormal);
            for (o, c) in out.iter_mut().zip(b.coords()) {
                *o += g * c;
            }
        }
        let n = norm(&out);
        if n > 0.0 {
            let s = radius / n;
            out.iter_mut().for_each(|c| *c *= s);
            return Point(out);
        }
    }
}

/// Uniform unit vector on `S^{d-1}`.
pub fn random_unit(dim: usize, rng: &mut RngState) -> Point {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 0.0 {
            return Point(v.into_iter().map(|c| c / n).collect());
        }
    }
}
