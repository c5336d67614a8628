//! Seeded two-dimensional toy datasets in the unit square.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::hyperbox::{ClassId, IntervalPattern};

/// Uniform points; class 1 inside a centred disc of radius 0.3, class 2 outside.
pub fn circle(n: usize, seed: u64) -> Vec<IntervalPattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.gen();
            let y: f64 = rng.gen();
            let inside = (x - 0.5).powi(2) + (y - 0.5).powi(2) < 0.09;
            point(x, y, if inside { 1 } else { 2 })
        })
        .collect()
}

/// Two interleaved spiral arms with a little Gaussian noise.
pub fn spiral(n: usize, seed: u64) -> Vec<IntervalPattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.015).unwrap();
    (0..n)
        .map(|i| {
            let arm = (i % 2) as f64;
            let t: f64 = rng.gen_range(0.05..1.0);
            let angle = 3.0 * std::f64::consts::PI * t + arm * std::f64::consts::PI;
            let r = 0.45 * t;
            let x = 0.5 + r * angle.cos() + noise.sample(&mut rng);
            let y = 0.5 + r * angle.sin() + noise.sample(&mut rng);
            point(x, y, 1 + i as ClassId % 2)
        })
        .collect()
}

/// Gaussian blobs, one per class, with centres spread on a circle.
pub fn blobs(n: usize, n_classes: u32, spread: f64, seed: u64) -> Vec<IntervalPattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).unwrap();
    (0..n)
        .map(|i| {
            let c = (i as u32) % n_classes;
            let a = 2.0 * std::f64::consts::PI * c as f64 / n_classes as f64;
            let x = 0.5 + 0.3 * a.cos() + noise.sample(&mut rng);
            let y = 0.5 + 0.3 * a.sin() + noise.sample(&mut rng);
            point(x, y, c + 1)
        })
        .collect()
}

fn point(x: f64, y: f64, label: ClassId) -> IntervalPattern {
    IntervalPattern::point(vec![x.clamp(0.0, 1.0), y.clamp(0.0, 1.0)], label).unwrap()
}

/// Wrap generated patterns as a dataset with numeric class names.
pub fn to_dataset(name: &str, patterns: &[IntervalPattern]) -> Dataset {
    let k = patterns.iter().map(|p| p.label()).max().unwrap_or(0);
    let n = patterns.first().map_or(0, |p| p.n_dims());
    Dataset {
        name: name.to_string(),
        feature_names: (1..=n).map(|j| format!("x{j}")).collect(),
        class_names: (1..=k).map(|c| c.to_string()).collect(),
        lower: patterns.iter().map(|p| p.lower().to_vec()).collect(),
        upper: patterns.iter().map(|p| p.upper().to_vec()).collect(),
        labels: patterns.iter().map(|p| p.label()).collect(),
        interval: false,
    }
}
