//! Storage and lookup behaviour of the four gallery strategies.

use oritrack::gallery::{FeatureVector, Gallery, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let bins = 4;
    let dim = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Each person looks different from each side.
    let looks: Vec<Vec<FeatureVector>> = (0..3)
        .map(|_| (0..bins).map(|_| FeatureVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())).collect())
        .collect();

    let strategies = [
        ("full", Strategy::Full),
        ("averaged", Strategy::Averaged),
        ("random", Strategy::RandomBins { bins, seed: 1 }),
        ("orientation", Strategy::OrientationBins { bins }),
    ];
    for (name, strategy) in strategies {
        let mut g = Gallery::new(strategy, dim);
        for step in 0..200 {
            let side = step % bins;
            for (p, look) in looks.iter().enumerate() {
                let noisy: Vec<f64> = look[side].as_slice().iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
                g.insert(p as u64 + 1, &FeatureVector::new(noisy), side).unwrap();
            }
        }
        let probe = &looks[1][2];
        let (who, d) = g.nearest_person(probe).unwrap();
        println!("{name:>12}: {:>4} vectors stored, probe -> person {who} at {d:.3}", g.stored_vectors());
    }
}
