//! Monte Carlo checks of the CSBM generator against closed-form moments.

use sagad::csbm::{csbm_sweep, generate_csbm, random_walk_filter, CsbmParams, ExperimentOptions};
use sagad::dataset::Label;

fn class_members(labels: &[Label], class: Label) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == class).collect()
}

#[test]
fn single_regime_degrees_match_expectation() {
    let mut params = CsbmParams::strong_separation(8, 3000, 0.2, 11);
    params.hetero_frac_anomaly = 0.0;
    params.hetero_frac_normal = 0.0;
    let (na, nn) = (params.n_anomaly as f64, params.n_normal as f64);
    let sample = generate_csbm(&params).unwrap();
    let ds = &sample.dataset;
    for (class, same, other) in [(Label::Anomaly, na, nn), (Label::Normal, nn, na)] {
        let members = class_members(&ds.labels, class);
        let mean = members.iter().map(|&i| ds.adjacency.degree(i) as f64).sum::<f64>() / members.len() as f64;
        let expected = params.p1 * (same - 1.0) + params.q1 * other;
        let var = params.p1 * (1.0 - params.p1) * (same - 1.0) + params.q1 * (1.0 - params.q1) * other;
        let sigma = (2.0 * var / members.len() as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * sigma,
            "{class:?}: mean degree {mean}, expected {expected} ± {sigma}"
        );
    }
}

#[test]
fn feature_means_match_class_means() {
    let params = CsbmParams::strong_separation(16, 4000, 0.1, 5);
    let sample = generate_csbm(&params).unwrap();
    let ds = &sample.dataset;
    let d = params.dim() as f64;
    for (class, mean) in [(Label::Anomaly, &params.mu), (Label::Normal, &params.nu)] {
        let members = class_members(&ds.labels, class);
        let sigma = (1.0 / (d * members.len() as f64)).sqrt();
        for (c, &m) in mean.iter().enumerate() {
            let got = members.iter().map(|&i| ds.features[[i, c]]).sum::<f64>() / members.len() as f64;
            assert!((got - m).abs() <= 4.0 * sigma, "{class:?} coordinate {c}: {got} vs {m}");
        }
    }
}

#[test]
fn filtered_features_concentrate() {
    let params = CsbmParams::strong_separation(32, 4000, 0.1, 2);
    let sample = generate_csbm(&params).unwrap();
    let ds = &sample.dataset;
    let (omega, isolated) = random_walk_filter(ds, &sample.regimes);
    let (na, nn) = (params.n_anomaly as f64, params.n_normal as f64);
    let cross = 0.5 * (params.q1 + params.q2);
    let same = params.p1 * (nn - 1.0);
    let frac_anomalous = cross * na / (same + cross * na);
    let expected: Vec<f64> = params
        .nu
        .iter()
        .zip(&params.mu)
        .map(|(v, m)| (1.0 - frac_anomalous) * v + frac_anomalous * m)
        .collect();

    let normals: Vec<usize> = class_members(&ds.labels, Label::Normal)
        .into_iter()
        .filter(|&i| !isolated[i])
        .collect();
    let mut sq_dev = 0.0;
    let mut inv_deg = 0.0;
    for &i in &normals {
        sq_dev += omega
            .row(i)
            .iter()
            .zip(&expected)
            .map(|(w, e)| (w - e) * (w - e))
            .sum::<f64>();
        inv_deg += 1.0 / ds.adjacency.degree(i) as f64;
    }
    let ratio = sq_dev / inv_deg;
    // Noise contributes 1/deg per node, neighbor composition a further
    // f(1−f)/deg with f the anomalous share.
    let predicted = 1.0 + frac_anomalous * (1.0 - frac_anomalous);
    assert!(
        (ratio - predicted).abs() <= 0.15 * predicted,
        "mean squared deviation is {ratio} × mean 1/deg, predicted {predicted}"
    );
}

#[test]
fn accuracy_grows_with_dimension() {
    let mut base = CsbmParams::strong_separation(4, 2000, 0.1, 0);
    base.mu[0] = -0.025;
    base.nu[0] = 0.025;
    let dims = [4, 16, 64];
    let seeds = [0, 1, 2, 3];
    let rows = csbm_sweep(&base, &dims, &[2000], &seeds, &ExperimentOptions::default()).unwrap();
    let mean_acc: Vec<f64> = dims
        .iter()
        .map(|&d| {
            let accs: Vec<f64> = rows.iter().filter(|r| r.d == d).map(|r| r.accuracy).collect();
            accs.iter().sum::<f64>() / accs.len() as f64
        })
        .collect();
    assert!(
        mean_acc.windows(2).all(|w| w[1] >= w[0] - 1e-3),
        "mean accuracy by dimension {mean_acc:?}"
    );
    assert!(mean_acc[2] > mean_acc[0] + 0.05, "{mean_acc:?}");
}
