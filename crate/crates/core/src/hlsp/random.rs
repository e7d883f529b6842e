//! Seeded random hierarchies for property tests and the CLI oracle suite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Hierarchy, PriorityLevel, Relation};
use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug)]
pub struct RandomShape {
    pub max_n: usize,
    pub max_levels: usize,
    pub max_rows: usize,
    pub max_inequalities: usize,
}

impl Default for RandomShape {
    fn default() -> Self {
        Self { max_n: 6, max_levels: 4, max_rows: 3, max_inequalities: 12 }
    }
}

pub fn random_hierarchy<T: Real, R: Rng>(rng: &mut R, shape: &RandomShape) -> Hierarchy<T> {
    let n = rng.gen_range(1..=shape.max_n);
    let p = rng.gen_range(1..=shape.max_levels);
    let mut h = Hierarchy::new(n);
    let mut ineq = 0;
    for _ in 0..p {
        let m = rng.gen_range(1..=shape.max_rows);
        let a = DMatrix::from_fn(m, n, |_, _| lit::<T>(rng.gen_range(-1.0..1.0)));
        let b = DVector::from_fn(m, |_, _| lit::<T>(rng.gen_range(-1.0..1.0)));
        let relations = (0..m)
            .map(|_| {
                let roll: f64 = rng.gen();
                if ineq >= shape.max_inequalities || roll < 0.4 {
                    Relation::Equal
                } else {
                    ineq += 1;
                    if roll < 0.7 {
                        Relation::Upper
                    } else {
                        Relation::Lower
                    }
                }
            })
            .collect();
        h.push(PriorityLevel::new(a, b, relations).expect("consistent shapes")).expect("finite");
    }
    h
}

/// Hierarchy number `seed` of the default family.
pub fn seeded<T: Real>(seed: u64) -> Hierarchy<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_hierarchy(&mut rng, &RandomShape::default())
}
