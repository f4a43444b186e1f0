//! Position and appearance likelihoods fused and resolved by the particle filter.

use oritrack::association::{self, AssociationMode, Column, ParticleSet, PositionParams, Sampling};
use oritrack::filter::{Measurement, TrackState};
use oritrack::gallery::{FeatureVector, Gallery, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    // Two tracks side by side; detections arrive in the opposite order.
    let tracks = [
        TrackState::from_measurement(&Measurement::new(100.0, 100.0, 40.0, 100.0)),
        TrackState::from_measurement(&Measurement::new(112.0, 100.0, 40.0, 100.0)),
    ];
    let dets = [Measurement::new(111.0, 101.0, 40.0, 100.0), Measurement::new(101.0, 99.0, 40.0, 100.0)];

    let mut gallery = Gallery::new(Strategy::Averaged, 2);
    gallery.insert(1, &FeatureVector::new(vec![1.0, 0.0]), 0).unwrap();
    gallery.insert(2, &FeatureVector::new(vec![0.0, 1.0]), 0).unwrap();
    let feats = [FeatureVector::new(vec![0.1, 0.9]), FeatureVector::new(vec![0.9, 0.1])];

    let pos = association::position_likelihood(&tracks, &dets, &PositionParams::default()).unwrap();
    let app = association::appearance_likelihood(&gallery, &[1, 2], &feats, association::DEFAULT_D0_APPEARANCE).unwrap();
    let both = association::combine(&pos, &app, AssociationMode::PosApp).unwrap();

    for (name, m) in [("position", &pos), ("appearance", &app), ("combined", &both)] {
        println!("{name}:");
        for row in m.rows() {
            println!("  {}", row.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("  "));
        }
    }

    let mut picker = Sampling(ChaCha8Rng::seed_from_u64(0));
    let (ps, consensus) = association::rbpf_step(ParticleSet::new(20), &both, &mut picker);
    let show = |c: &Column| match c {
        Column::Track(j) => format!("track {j}"),
        Column::NewTrack => "new".to_string(),
    };
    println!("consensus: {}", consensus.iter().map(show).collect::<Vec<_>>().join(", "));
    println!("effective sample size {:.1} of {}", ps.effective_sample_size(), ps.len());
}
