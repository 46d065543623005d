//! Seeded instance generators shared by the integration tests.

#![allow(dead_code)]

use blocc_core::schmidt::{entanglement_entropy, SchmidtVector};
use blocc_core::transfer::{feasibility_lp, FeasibilityOptions, TransferMatrix, WorkGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_GRID: usize = 24;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coefficients bounded away from zero so logs stay moderate.
pub fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> SchmidtVector {
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
    SchmidtVector::normalized(&w).unwrap()
}

/// Feasible LP witnesses with `d, d' <= 6` on grids of at most 24 points.
/// Roughly a third have a maximally entangled target; about half carry a
/// mean-work target strictly below the entropy gap.
pub fn witness_corpus(count: usize, seed: u64) -> Vec<TransferMatrix> {
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d = rng.gen_range(2..=6usize);
        let dp = rng.gen_range(2..=6usize);
        if d * dp > 20 {
            continue;
        }
        let p = random_vector(&mut rng, d);
        let q = if rng.gen_bool(0.35) {
            SchmidtVector::uniform(dp).unwrap()
        } else {
            random_vector(&mut rng, dp)
        };
        let canonical = WorkGrid::canonical(&p, &q).unwrap();
        let room = MAX_GRID - canonical.len();
        let extras: Vec<f64> = (0..rng.gen_range(0..=room.min(6)))
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();
        let grid = if extras.is_empty() {
            canonical
        } else {
            canonical.union(&WorkGrid::new(extras).unwrap())
        };
        assert!(grid.len() <= MAX_GRID);
        let gap = entanglement_entropy(&p) - entanglement_entropy(&q);
        let mean_w_target = rng.gen_bool(0.5).then(|| gap - rng.gen_range(0.01..0.5));
        let opts = FeasibilityOptions {
            mean_w_target,
            relax_c2: false,
        };
        let result = feasibility_lp(&p, &q, &grid, &opts).unwrap();
        if let Some(w) = result.witness {
            out.push(w);
        }
    }
    out
}

/// `(p, q)` pairs for the mean-work decision problem.
pub fn random_pairs(count: usize, seed: u64) -> Vec<(SchmidtVector, SchmidtVector)> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let d = rng.gen_range(2..=5usize);
            let dp = rng.gen_range(2..=5usize);
            (random_vector(&mut rng, d), random_vector(&mut rng, dp))
        })
        .collect()
}

/// The canonical grid together with `k/4` for `|k| <= 8`.
pub fn extended_grid(p: &SchmidtVector, q: &SchmidtVector) -> WorkGrid {
    let quarters = WorkGrid::new((-8..=8).map(|k| k as f64 / 4.0).collect()).unwrap();
    WorkGrid::canonical(p, q).unwrap().union(&quarters)
}

pub fn reference_pair() -> (SchmidtVector, SchmidtVector) {
    (
        SchmidtVector::new(vec![0.5, 0.25, 0.125, 0.125]).unwrap(),
        SchmidtVector::uniform(4).unwrap(),
    )
}
