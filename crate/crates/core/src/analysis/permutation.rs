use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::matrix::{estimate_matrix_with, Observation, TestSettings, TransitionMatrix};
use super::AnalysisError;
use crate::rng::{stream, tag};

pub const DEFAULT_PERMUTATIONS: usize = 1000;
pub const DEFAULT_ALPHA: f64 = 0.01;

// Guards the `>=` comparison against rounding in the null mean.
const EPS: f64 = 1e-9;

/// Attaches two-tailed permutation p-values to a matrix estimated from
/// `observations`.
///
/// The null shuffles the movement outcomes across all events, keeping each
/// event's conditioning fixed. A cell's statistic is the distance of its
/// success count from the count expected under the pooled rate; `p = (1 + #{perm >= obs}) / (n_perm + 1)`. Replicate `r` draws from
/// its own stream, so results do not depend on thread count.
pub fn permutation_test(
    observations: &[Observation],
    given: &TransitionMatrix,
    n_perm: usize,
    alpha: f64,
    seed: u64,
) -> Result<TransitionMatrix, AnalysisError> {
    if n_perm == 0 {
        return Err(AnalysisError::NoPermutations);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalysisError::Alpha(alpha));
    }
    let spec = &given.spec;
    let mut matrix = estimate_matrix_with(observations, spec);
    let same_counts = matrix.cells.len() == given.cells.len()
        && matrix.cells.iter().zip(&given.cells).all(|((ka, a), (kb, b))| {
            ka == kb && (a.n, a.successes) == (b.n, b.successes)
        });
    if !same_counts || matrix.excluded != given.excluded {
        return Err(AnalysisError::MatrixMismatch);
    }
    let keys: Vec<_> = matrix.cells.keys().copied().collect();

    // Every event carries its outcome into the shuffle; excluded events
    // have no cell but still take part.
    let mut cell_of = Vec::with_capacity(observations.len());
    let mut labels = Vec::with_capacity(observations.len());
    for obs in observations {
        cell_of.push(TransitionMatrix::key_of(spec, obs).map(|k| keys.binary_search(&k).expect("key enumerated")));
        labels.push(obs.moved_toward);
    }
    let total = labels.len();
    let pooled = if total == 0 {
        0.0
    } else {
        labels.iter().filter(|&&b| b).count() as f64 / total as f64
    };
    let sizes: Vec<usize> = keys.iter().map(|k| matrix.cells[k].n).collect();
    let observed: Vec<f64> = keys
        .iter()
        .map(|k| {
            let c = &matrix.cells[k];
            (c.successes as f64 - c.n as f64 * pooled).abs()
        })
        .collect();

    let exceed = (0..n_perm)
        .into_par_iter()
        .map(|r| {
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut stream(seed, &[tag::PERMUTATION, r as u64]));
            let mut succ = vec![0usize; keys.len()];
            for (c, &b) in cell_of.iter().zip(&shuffled) {
                if let Some(c) = *c {
                    succ[c] += usize::from(b);
                }
            }
            succ.iter()
                .zip(&sizes)
                .zip(&observed)
                .map(|((&s, &n), &obs)| usize::from((s as f64 - n as f64 * pooled).abs() >= obs - EPS))
                .collect::<Vec<_>>()
        })
        .reduce(
            || vec![0usize; keys.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    for (i, k) in keys.iter().enumerate() {
        let cell = matrix.cells.get_mut(k).expect("key enumerated");
        if cell.n == 0 {
            continue;
        }
        let p = (1 + exceed[i]) as f64 / (n_perm + 1) as f64;
        cell.p_value = Some(p);
        cell.significant = p < alpha;
    }
    matrix.test = Some(TestSettings { n_perm, alpha, seed });
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{estimate_matrix, Conditioning, MatrixSpec, StateClass};
    use crate::opinion::Opinion;
    use statrs::distribution::{Discrete, Hypergeometric};

    fn op(l: u8) -> Opinion {
        Opinion::new(l as i64).unwrap()
    }

    fn events(low_high: (usize, usize), high_low: (usize, usize)) -> Vec<Observation> {
        let mut v = Vec::new();
        for i in 0..low_high.0 {
            v.push(Observation::new(op(1), op(5), if i < low_high.1 { 1 } else { 0 }));
        }
        for i in 0..high_low.0 {
            v.push(Observation::new(op(5), op(1), if i < high_low.1 { -1 } else { 0 }));
        }
        v
    }

    fn test(obs: &[Observation], n_perm: usize, alpha: f64, seed: u64) -> Result<TransitionMatrix, AnalysisError> {
        let m = estimate_matrix_with(obs, &MatrixSpec::new(Conditioning::Pair));
        permutation_test(obs, &m, n_perm, alpha, seed)
    }

    #[test]
    fn argument_checks() {
        let m = estimate_matrix(&[], Conditioning::Pair);
        assert_eq!(permutation_test(&[], &m, 0, 0.01, 1), Err(AnalysisError::NoPermutations));
        assert_eq!(permutation_test(&[], &m, 10, 1.0, 1), Err(AnalysisError::Alpha(1.0)));
        let obs = events((3, 1), (0, 0));
        let other = estimate_matrix(&obs[..2], Conditioning::Pair);
        assert_eq!(permutation_test(&obs, &other, 10, 0.01, 1), Err(AnalysisError::MatrixMismatch));
    }

    #[test]
    fn constant_labels_give_p_one() {
        let obs = events((20, 20), (30, 30));
        let m = test(&obs, 200, 0.01, 3).unwrap();
        let c = m.pair(StateClass::Low, StateClass::High);
        assert_eq!(c.p_value, Some(1.0));
        assert!(!c.significant);
        let empty = m.pair(StateClass::Low, StateClass::Low);
        assert_eq!((empty.p_value, empty.significant), (None, false));
    }

    #[test]
    fn strong_effect_is_significant_and_deterministic() {
        let obs = events((100, 95), (100, 5));
        let a = test(&obs, 500, 0.01, 11).unwrap();
        let b = test(&obs, 500, 0.01, 11).unwrap();
        assert_eq!(a, b);
        let c = a.pair(StateClass::Low, StateClass::High);
        assert!(c.significant);
        assert_eq!(c.p_value, Some(1.0 / 501.0));
    }

    #[test]
    fn matches_hypergeometric_tail() {
        // Two cells of 30 events, 25 successes in total. Under the null the
        // first cell's count is hypergeometric; the permutation p-value
        // estimates the two-tailed tail mass.
        let obs = events((30, 17), (30, 8));
        let n_perm = 20_000;
        let m = test(&obs, n_perm, 0.05, 5).unwrap();
        let p = m.pair(StateClass::Low, StateClass::High).p_value.unwrap();

        let hg = Hypergeometric::new(60, 25, 30).unwrap();
        let mean: f64 = 30.0 * 25.0 / 60.0;
        let dist = (17.0 - mean).abs();
        let exact: f64 = (0..=25u64)
            .filter(|&k| (k as f64 - mean).abs() >= dist - EPS)
            .map(|k| hg.pmf(k))
            .sum();
        let se = (exact * (1.0 - exact) / n_perm as f64).sqrt();
        assert!((p - exact).abs() < 4.0 * se + 1.0 / n_perm as f64, "{p} vs {exact}");
    }
}
