//! Behavior-policy helpers. Action index 0 is "keep", 1 is "switch".

use rand::Rng;

/// Index of the largest value; ties go to the lowest index ("keep").
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniform action, otherwise the greedy one.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Draws an index from a categorical distribution.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// ε-mixed sampling for stochastic actors: uniform with probability
/// `epsilon`, otherwise a draw from `probs`.
pub fn epsilon_sample<R: Rng + ?Sized>(probs: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..probs.len())
    } else {
        sample_categorical(probs, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(epsilon_greedy(&[1.0, 2.0], 0.0, &mut rng), 1);
        assert_eq!(epsilon_greedy(&[3.0, 3.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let switches: usize = (0..n).map(|_| epsilon_greedy(&[5.0, 0.0], 1.0, &mut rng)).sum();
        let freq = switches as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let ones: usize = (0..n).map(|_| sample_categorical(&[0.8, 0.2], &mut rng)).sum();
        assert!((ones as f64 / n as f64 - 0.2).abs() < 0.01);
        assert_eq!(sample_categorical(&[1.0, 0.0], &mut rng), 0);
    }
}
