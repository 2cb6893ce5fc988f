use super::{AttributedGraph, NetworkError};

const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 12.0,            // B2 / 2!
    -1.0 / 720.0,          // B4 / 4!
    1.0 / 30_240.0,        // B6 / 6!
    -1.0 / 1_209_600.0,    // B8 / 8!
    1.0 / 47_900_160.0,    // B10 / 10!
    -691.0 / 1_307_674_368_000.0, // B12 / 12!
];

/// Hurwitz zeta `sum_{k>=0} (a + k)^-s` for `s > 1`, `a > 0`, by direct
/// summation of the first terms plus an Euler–Maclaurin tail.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0);
    const HEAD: usize = 16;
    let head: f64 = (0..HEAD).map(|k| (a + k as f64).powf(-s)).sum();
    let x = a + HEAD as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s + 2j - 2) times x^(-s-2j+1)
    let mut rising = s;
    let mut power = x.powf(-s - 1.0);
    for (j, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        tail += coeff * rising * power;
        let next = 2.0 * j as f64 + 1.0;
        rising *= (s + next) * (s + next + 1.0);
        power /= x * x;
    }
    head + tail
}

/// Discrete maximum-likelihood exponent of `P(k) ∝ k^-γ` for `k >= k_min`,
/// fitted to the values of `sample` that are at least `k_min`.
///
/// Maximizes `-γ Σ ln k - N ln ζ(γ, k_min)` over `γ ∈ (1, 20)` by golden
/// section search; the log-likelihood is concave in `γ`.
pub fn fit_power_law(sample: &[usize], k_min: usize) -> Result<f64, NetworkError> {
    if k_min == 0 {
        return Err(NetworkError::NonFittable("k_min must be positive".into()));
    }
    let tail: Vec<f64> = sample
        .iter()
        .filter(|&&k| k >= k_min)
        .map(|&k| k as f64)
        .collect();
    if tail.len() < 2 {
        return Err(NetworkError::NonFittable(format!(
            "{} values at or above k_min = {k_min}",
            tail.len()
        )));
    }
    if tail.iter().all(|&k| k == tail[0]) {
        return Err(NetworkError::NonFittable("all degrees are equal".into()));
    }
    let count = tail.len() as f64;
    let log_sum: f64 = tail.iter().map(|k| k.ln()).sum();
    let kmin = k_min as f64;
    let neg_log_likelihood = |g: f64| g * log_sum + count * hurwitz_zeta(g, kmin).ln();

    let (mut lo, mut hi) = (1.0 + 1e-6, 20.0);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (neg_log_likelihood(x1), neg_log_likelihood(x2));
    while hi - lo > 1e-9 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = neg_log_likelihood(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = neg_log_likelihood(x2);
        }
    }
    let gamma = 0.5 * (lo + hi);
    if !(1.0 + 1e-4..=20.0 - 1e-4).contains(&gamma) {
        return Err(NetworkError::NonFittable(format!(
            "likelihood maximum at search boundary ({gamma:.4})"
        )));
    }
    Ok(gamma)
}

/// Tail exponent of the degree distribution with `k_min` equal to the
/// graph's links-per-node `m`.
pub fn degree_exponent(g: &AttributedGraph) -> Result<f64, NetworkError> {
    fit_power_law(&g.degrees(), g.config().m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{Group, NetworkConfig};

    #[test]
    fn zeta_matches_known_values() {
        // ζ(2) = π²/6, ζ(3, 1) = Apéry's constant, ζ(2, 2) = π²/6 - 1
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((hurwitz_zeta(2.0, 1.0) - pi2_6).abs() < 1e-13);
        assert!((hurwitz_zeta(3.0, 1.0) - 1.202_056_903_159_594_2).abs() < 1e-13);
        assert!((hurwitz_zeta(2.0, 2.0) - (pi2_6 - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn zeta_against_brute_force() {
        for &(s, a) in &[(2.5, 2.0), (1.5, 3.0), (4.0, 1.0), (3.0, 7.0)] {
            // partial sum plus integral tail
            let n = 2_000_000usize;
            let partial: f64 = (0..n).map(|k| (a + k as f64).powf(-s)).sum();
            let x = a + n as f64;
            let approx = partial + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
            assert!((hurwitz_zeta(s, a) - approx).abs() < 1e-9, "s={s} a={a}");
        }
    }

    #[test]
    fn star_is_not_fittable() {
        let n = 50;
        let cfg = NetworkConfig::new(n, 0.0, 0.5, 0);
        let g = AttributedGraph::from_parts(
            cfg,
            vec![Group::B; n],
            (1..n).map(|i| (0, i)),
            [],
        )
        .unwrap();
        assert!(matches!(degree_exponent(&g), Err(NetworkError::NonFittable(_))));
    }

    #[test]
    fn equal_degrees_are_not_fittable() {
        assert!(fit_power_law(&[4, 4, 4, 4], 2).is_err());
        assert!(fit_power_law(&[1, 1, 9], 5).is_err());
    }
}
