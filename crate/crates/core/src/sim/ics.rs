use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Points on the sphere of radius `radius` in `R^n`: evenly spaced angles in
/// 2-D, a Fibonacci lattice in 3-D, normalized Gaussian draws otherwise.
pub fn sphere_ics(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    match n {
        1 => (0..count)
            .map(|i| vec![if i % 2 == 0 { radius } else { -radius }])
            .collect(),
        2 => (0..count)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![radius * th.cos(), radius * th.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![radius * rho * th.cos(), radius * rho * th.sin(), radius * z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v.into_iter().map(|a| radius * a / s).collect()
                })
                .collect()
        }
    }
}

/// Uniform samples from the closed ball of radius `radius`.
pub fn ball_ics(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let s: f64 = v.iter().map(|a| a * a).sum();
            if s <= 1.0 {
                break v.into_iter().map(|a| radius * a).collect();
            }
        })
        .collect()
}
