//! IDF1 and identity switches on a hand-built two-person sequence.

use oritrack::formats::{BoundingBox, DetectionRecord};
use oritrack::metrics;

fn rec(frame: u32, id: i64, left: f64) -> DetectionRecord {
    DetectionRecord::new(frame, id, BoundingBox::new(left, 0.0, 20.0, 50.0), 1.0)
}

fn main() {
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    for f in 1..=10 {
        gt.push(rec(f, 1, 10.0 * f as f64));
        gt.push(rec(f, 2, 300.0 - 10.0 * f as f64));
        // The tracker swaps labels from frame 6 on and drops person 2 in frame 3.
        let (a, b) = if f < 6 { (7, 8) } else { (8, 7) };
        pred.push(rec(f, a, 10.0 * f as f64 + 1.0));
        if f != 3 {
            pred.push(rec(f, b, 300.0 - 10.0 * f as f64));
        }
    }
    let s = metrics::idf1(&gt, &pred, 0.5);
    for (name, value) in s.rows() {
        println!("{name:>12} {value}");
    }
}
