//! Torso keypoints to shoulder-to-torso ratio and orientation bin.
//!
//! Run with `cargo run --example s2t_orientation`.

use oritrack::formats::Keypoint;
use oritrack::pose::{s2t_ratio, Orientation, TorsoPoints};

fn torso(facing: f64) -> TorsoPoints {
    // Upright person seen from the front when `facing` is 1, from behind when -1.
    let half = 20.0 * facing;
    TorsoPoints {
        right_shoulder: Keypoint::new(100.0 - half, 100.0, 1.0),
        left_shoulder: Keypoint::new(100.0 + half, 100.0, 1.0),
        right_hip: Keypoint::new(100.0 - 0.8 * half, 180.0, 1.0),
        left_hip: Keypoint::new(100.0 + 0.8 * half, 180.0, 1.0),
    }
}

fn main() {
    let bins = 5;
    println!("{:>8} {:>8} {:>4}", "facing", "s2t", "bin");
    for facing in [-1.0, -0.6, -0.2, 0.0, 0.2, 0.6, 1.0] {
        let o = Orientation::estimate(&torso(facing), bins, 1.0);
        println!("{facing:>8.1} {:>8.3} {:>4}", o.s2t, o.bin);
    }

    let mut hidden = torso(1.0);
    hidden.left_shoulder.c = 0.0;
    hidden.left_hip.c = 0.0;
    hidden.right_hip.c = 0.0;
    match s2t_ratio(&hidden) {
        Ok(s) => println!("occluded torso: {s:.3}"),
        Err(e) => println!("occluded torso: {e}; falls back to bin {}", Orientation::estimate(&hidden, bins, 1.0).bin),
    }
}
