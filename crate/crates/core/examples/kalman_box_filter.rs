//! Constant-velocity Kalman filter following a noisy bounding box.

use oritrack::filter::{self, Measurement, TrackState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 3.0).unwrap();
    let truth = |t: f64| (50.0 + 4.0 * t, 300.0 - 1.0 * t);
    let (x0, y0) = truth(0.0);
    let mut s = TrackState::from_measurement(&Measurement::new(x0, y0, 60.0, 150.0));
    let (mut raw, mut filtered) = (0.0, 0.0);

    for k in 1..=120 {
        s = filter::predict(&s, filter::DEFAULT_PROCESS_NOISE);
        let (x, y) = truth(k as f64);
        let z = Measurement::new(x + noise.sample(&mut rng), y + noise.sample(&mut rng), 60.0, 150.0);
        let d = filter::mahalanobis(&s, &z, filter::DEFAULT_MEASUREMENT_NOISE).unwrap();
        s = filter::update(&s, &z, filter::DEFAULT_MEASUREMENT_NOISE).unwrap();
        if k > 20 {
            raw += (z.z[0] - x).powi(2) + (z.z[1] - y).powi(2);
            filtered += (s.mean[0] - x).powi(2) + (s.mean[1] - y).powi(2);
        }
        if k % 20 == 0 {
            println!("frame {k:>3}: est ({:7.2}, {:7.2}) vel ({:5.2}, {:5.2}) maha {d:.2}", s.mean[0], s.mean[1], s.mean[4], s.mean[5]);
        }
    }
    println!("rmse raw {:.3} px, filtered {:.3} px", (raw / 100.0).sqrt(), (filtered / 100.0).sqrt());
}
