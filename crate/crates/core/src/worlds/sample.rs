use rand::Rng;

use super::DiscreteWorld;
use crate::seed;
use crate::trajectory::TrajectoryDataset;

/// Inverse-CDF draw from a probability row.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    // Rounding left `r` above the total; take the last atom with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `n` i.i.d. forward simulations of the world.
pub fn sample_observational(w: &DiscreteWorld, n: usize, seed: u64) -> TrajectoryDataset {
    let mut rng = seed::rng(seed);
    let mut records = Vec::with_capacity(n);
    let mut path = Vec::with_capacity(2 * w.horizon + 1);
    for _ in 0..n {
        let u = sample_index(&mut rng, &w.confounder);
        path.clear();
        path.push(sample_index(&mut rng, &w.x0_table[u]));
        for _ in 0..w.horizon {
            let a = sample_index(&mut rng, w.policy_row(u, &path));
            path.push(a);
            let x = sample_index(&mut rng, w.dynamics_row(u, &path));
            path.push(x);
        }
        records.push(w.trajectory(&path));
    }
    TrajectoryDataset::new(w.schema.clone(), records, format!("world:{}#seed={seed}", w.name))
        .expect("world samples conform to the world schema")
}
