//! Empirical behavior of the whitened keystreams: near-uniform byte
//! histograms and exponential divergence under tiny seed changes.

use qke_core::chaos::{derive_keystream, logistic_sequence, MapKind};

#[test]
fn logistic_keystream_histogram_is_near_uniform() {
    let n = 65_536;
    let trajectory = logistic_sequence(0.37, 3.99, n + 1024).unwrap();
    let ks = derive_keystream(&trajectory, n, 1024, MapKind::Logistic).unwrap();

    let mut histogram = [0u32; 256];
    for &b in &ks.bytes {
        histogram[b as usize] += 1;
    }
    let max = *histogram.iter().max().unwrap();
    let min = *histogram.iter().min().unwrap();
    assert!(min > 0, "some byte value never occurred");
    assert!(
        (max as f64) / (min as f64) < 2.0,
        "histogram spread too wide: max {max}, min {min}"
    );
}

#[test]
fn nearby_seeds_decorrelate_quickly() {
    let n = 4096;
    let delta = 1.0 / (1u64 << 30) as f64;
    let a = logistic_sequence(0.4, 3.99, n).unwrap();
    let b = logistic_sequence(0.4 + delta, 3.99, n).unwrap();
    let ka = derive_keystream(&a, n, 0, MapKind::Logistic).unwrap();
    let kb = derive_keystream(&b, n, 0, MapKind::Logistic).unwrap();

    let matching = ka.bytes[100..]
        .iter()
        .zip(&kb.bytes[100..])
        .filter(|(x, y)| x == y)
        .count();
    let fraction = matching as f64 / (n - 100) as f64;
    assert!(
        fraction < 0.05,
        "streams still agree on {fraction} of bytes past position 100"
    );
}
