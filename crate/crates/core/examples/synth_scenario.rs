//! Writes a synthetic scenario to disk and reads the generator config back.
//!
//! `cargo run --example synth_scenario -- out_dir` keeps the files.

use oritrack::synth::{self, SynthConfig};

fn main() {
    let config = SynthConfig { persons: 3, frames: 50, crossing: true, seed: 9, ..SynthConfig::default() };
    println!("config:\n{}", config.to_toml());
    let out = synth::generate(&config).unwrap();

    let tmp;
    let dir = match std::env::args().nth(1) {
        Some(d) => std::path::PathBuf::from(d),
        None => {
            tmp = std::env::temp_dir().join("oritrack_synth_example");
            tmp.clone()
        }
    };
    std::fs::create_dir_all(&dir).unwrap();
    out.write_to_dir(&dir).unwrap();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let entry = entry.unwrap();
        println!("{:>20} {:>8} bytes", entry.file_name().to_string_lossy(), entry.metadata().unwrap().len());
    }

    let mut per_quadrant = [0usize; 4];
    for s in &out.samples {
        per_quadrant[s.quadrant] += 1;
    }
    println!("samples per facing quadrant: {per_quadrant:?}");
    assert_eq!(SynthConfig::from_toml(&config.to_toml()).unwrap(), config);
}
