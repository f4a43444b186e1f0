//! Rank-1 re-identification accuracy against the number of gallery bins.

use oritrack::metrics;
use oritrack::synth::{self, SynthConfig};
use oritrack::gallery::Strategy;

fn main() {
    let config = SynthConfig { persons: 50, frames: 40, random_facing: true, seed: 1, ..SynthConfig::default() };
    let set = synth::generate(&config).unwrap().labeled_features();
    let (gallery, queries) = metrics::split_gallery_query(&set, 0.8, 0).unwrap();

    let score = |s: Strategy| metrics::rank1(&metrics::build_gallery(s, &gallery, 1.0).unwrap(), &queries).unwrap();
    println!("{} queries", queries.len());
    println!("full      {:.4}", score(Strategy::Full));
    println!("averaged  {:.4}", score(Strategy::Averaged));
    println!("{:>4} {:>8} {:>8}", "bins", "orient", "random");
    for bins in [1, 2, 3, 4, 5, 9] {
        let o = score(Strategy::OrientationBins { bins });
        let r = score(Strategy::RandomBins { bins, seed: 0 });
        println!("{bins:>4} {o:>8.4} {r:>8.4}");
    }
}
