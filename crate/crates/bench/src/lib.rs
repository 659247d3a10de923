//! Benchmark fixtures shared by the criterion targets in `benches/`.

use detmmot_core::{DiscreteMeasure, Point, RngState};
use rand::Rng;

/// `n` uniform atoms drawn from `[-1, 1]^d`.
pub fn random_measure(d: usize, n: usize, rng: &mut RngState) -> DiscreteMeasure {
    let atoms = (0..n)
        .map(|_| Point::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    DiscreteMeasure::uniform(d, atoms).unwrap()
}

/// `d` random vectors in `R^d`.
pub fn random_tuple(d: usize, rng: &mut RngState) -> Vec<Point> {
    (0..d)
        .map(|_| Point::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect()
}
