use vragt::noise::*;

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn neighbouring_keys_are_uncorrelated() {
    let m = NoiseModel::gaussian(Channel::Pull, 1.0, 0.0, 1).unwrap();
    let pairs = 100_000u64;
    let base: Vec<f64> = (0..pairs)
        .map(|t| m.draw(5, (t % 97) as usize, 1 + t / 97)[0])
        .collect();
    let next_k: Vec<f64> = (0..pairs)
        .map(|t| m.draw(5, (t % 97) as usize, 2 + t / 97)[0])
        .collect();
    let next_agent: Vec<f64> = (0..pairs)
        .map(|t| m.draw(5, (t % 97) as usize + 1, 1 + t / 97)[0])
        .collect();
    let other_seed: Vec<f64> = (0..pairs)
        .map(|t| m.draw(6, (t % 97) as usize, 1 + t / 97)[0])
        .collect();
    for (name, other) in [
        ("k + 1", &next_k),
        ("agent + 1", &next_agent),
        ("seed + 1", &other_seed),
    ] {
        let c = correlation(&base, other);
        assert!(c.abs() <= 0.02, "{name}: correlation {c}");
    }
    let mean = base.iter().sum::<f64>() / pairs as f64;
    assert!(mean.abs() < 0.02);
    assert!((sample_variance(&base) - 1.0).abs() < 0.02);
}

#[test]
fn coordinates_within_a_draw_are_uncorrelated() {
    let m = NoiseModel::gaussian(Channel::Push, 1.0, 0.0, 2).unwrap();
    let draws: Vec<Vec<f64>> = (0..100_000).map(|t| m.draw(9, t % 50, 1 + (t / 50) as u64)).collect();
    let a: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let b: Vec<f64> = draws.iter().map(|d| d[1]).collect();
    assert!(correlation(&a, &b).abs() <= 0.02);
}

#[test]
fn channels_are_separate_streams() {
    let pull = NoiseModel::gaussian(Channel::Pull, 1.0, 0.0, 3).unwrap();
    let push = NoiseModel::gaussian(Channel::Push, 1.0, 0.0, 3).unwrap();
    for agent in 0..20 {
        for k in [1, 2, 1000] {
            assert_ne!(pull.draw(1, agent, k), push.draw(1, agent, k));
        }
    }
}

#[test]
fn variance_grows_as_a_power_of_k() {
    for q in [0.1, 0.5] {
        let m = NoiseModel::gaussian(Channel::Pull, 2.0, q, 4).unwrap();
        let at = |k: u64| -> f64 {
            let xs: Vec<f64> = (0..10_000).flat_map(|a| m.draw(3, a, k)).collect();
            sample_variance(&xs)
        };
        let ratio = at(10_000) / at(100);
        let want = 100f64.powf(q);
        assert!(
            (ratio / want - 1.0).abs() <= 0.1,
            "q = {q}: ratio {ratio}, expected {want}"
        );
        assert!((m.variance(100) - 2.0 * 100f64.powf(q)).abs() < 1e-9);
    }
}
