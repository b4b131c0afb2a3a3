//! Sweeps the correlation length and reports the mean top-6 energy capture of
//! generated 64x64 fields. The `Low`/`Medium`/`High` presets in
//! `bluefill_core::field` are the lengths whose capture is closest to 0.95,
//! 0.99 and 0.999.
//!
//! cargo run --release -p bluefill --example calibrate [seeds]

use bluefill_core::diagnostics::energy_fraction_of;
use bluefill_core::field::generate_field;
use bluefill_core::linalg::Svd;
use bluefill_core::CorrelationLevel;

const N: usize = 64;
const TOP: usize = 6;
const TARGETS: [(&str, f64); 3] = [("low", 0.95), ("medium", 0.99), ("high", 0.999)];

fn mean_capture(length: f64, seeds: u64) -> f64 {
    let total: f64 = (0..seeds)
        .map(|seed| {
            let field = generate_field(N, CorrelationLevel::Custom(length), seed).unwrap();
            let s = Svd::singular_values(&field.values).unwrap();
            energy_fraction_of(&s, TOP).unwrap()
        })
        .sum();
    total / seeds as f64
}

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let mut sweep = Vec::new();
    let mut length = 4.0f64;
    while length <= 400.0 {
        let capture = mean_capture(length, seeds);
        println!("length {length:>10.1}  top-{TOP} energy {capture:.5}");
        sweep.push((length, capture));
        length *= 1.05;
    }
    for (name, target) in TARGETS {
        let (best, capture) = sweep
            .iter()
            .copied()
            .min_by(|a, b| (a.1 - target).abs().partial_cmp(&(b.1 - target).abs()).unwrap())
            .unwrap();
        println!("{name}: target {target} -> length {best:.1} (capture {capture:.5})");
    }
}
