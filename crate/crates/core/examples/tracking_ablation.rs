//! Position-only against position-plus-appearance tracking on crossing walkers.

use oritrack::association::AssociationMode;
use oritrack::metrics;
use oritrack::synth::{self, SynthConfig};
use oritrack::tracker::{run_sequence, SequenceData, TrackerConfig};

fn main() {
    println!("{:>4} {:>16} {:>16}", "seed", "pos idf1/sw", "pos+app idf1/sw");
    for seed in 0..6 {
        let scene = SynthConfig { persons: 4, frames: 200, crossing: true, width: 640.0, height: 360.0, seed, ..SynthConfig::default() };
        let out = synth::generate(&scene).unwrap();
        let data = SequenceData::from_texts(&out.det_text(), Some(&out.features_text()), Some(&out.keypoints_text())).unwrap();
        let mut cells = Vec::new();
        for mode in [AssociationMode::PosOnly, AssociationMode::PosApp] {
            let config = TrackerConfig { mode, seed, ..TrackerConfig::default() };
            let tracks = run_sequence(&config, &data).unwrap();
            let s = metrics::idf1(&out.gt, &tracks, metrics::DEFAULT_IOU_THRESHOLD);
            cells.push(format!("{:.3}/{}", s.idf1, s.id_switches));
        }
        println!("{seed:>4} {:>16} {:>16}", cells[0], cells[1]);
    }
}
