//! Adaptive operator selection and the simulated-annealing acceptance rule.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::AlnsConfig;
use crate::error::{Error, Result};

pub const NUM_OPERATORS: usize = 11;

/// Selection scores of operators 1..=11 (stored at index id - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorScores {
    pub scores: Vec<f64>,
    /// most recent accepted operators, oldest first
    history: VecDeque<usize>,
    init: f64,
    delta: f64,
    reset: f64,
    backprop: usize,
}

impl OperatorScores {
    pub fn new(cfg: &AlnsConfig) -> Self {
        Self {
            scores: vec![cfg.score_init; NUM_OPERATORS],
            history: VecDeque::new(),
            init: cfg.score_init,
            delta: cfg.score_delta,
            reset: cfg.score_reset,
            backprop: cfg.score_backprop,
        }
    }

    /// Roulette-wheel draw; returns an operator id in 1..=11.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let dist = WeightedIndex::new(&self.scores).expect("scores stay positive");
        dist.sample(rng) + 1
    }

    pub fn probability(&self, op: usize) -> f64 {
        self.scores[op - 1] / self.scores.iter().sum::<f64>()
    }

    /// Credits `op` and the recently accepted operators after an improvement.
    pub fn reward(&mut self, op: usize) {
        self.scores[op - 1] += self.delta;
        for &h in &self.history {
            self.scores[h - 1] += self.delta;
        }
    }

    pub fn record_accepted(&mut self, op: usize) {
        self.history.push_back(op);
        while self.history.len() > self.backprop {
            self.history.pop_front();
        }
    }

    /// Scores above the threshold fall back to the initial value.
    pub fn reset_high(&mut self) {
        for s in &mut self.scores {
            if *s > self.reset {
                *s = self.init;
            }
        }
    }

    pub fn average_with(&mut self, other: &OperatorScores) {
        for (s, o) in self.scores.iter_mut().zip(&other.scores) {
            *s = 0.5 * (*s + o);
        }
    }
}

/// Probability of moving from a solution worth `z_best` to one worth `z_cur`
/// at iteration `it` of `n_max`.
pub fn accept_probability(z_cur: f64, z_best: f64, it: usize, n_max: usize, cfg: &AlnsConfig) -> Result<f64> {
    if !(z_best > 0.0) || !z_cur.is_finite() {
        return Err(Error::Numeric(format!(
            "acceptance needs a positive finite reference objective, got {z_best} vs {z_cur}"
        )));
    }
    if z_cur <= z_best {
        return Ok(1.0);
    }
    let remaining = 1.0 - it as f64 / n_max as f64;
    if remaining <= 0.0 {
        return Ok(0.0);
    }
    let worse = (z_cur - z_best) / z_best * cfg.sa_worsening;
    Ok((-worse / remaining.powf(cfg.sa_convergence)).exp())
}

/// Randomized acceptance: improvements always pass, deteriorations pass
/// with [`accept_probability`].
pub fn accept<R: Rng + ?Sized>(
    z_cur: f64,
    z_best: f64,
    it: usize,
    n_max: usize,
    cfg: &AlnsConfig,
    rng: &mut R,
) -> Result<bool> {
    let p = accept_probability(z_cur, z_best, it, n_max, cfg)?;
    if p >= 1.0 {
        return Ok(true);
    }
    Ok(rng.random::<f64>() < p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_values() {
        let cfg = AlnsConfig::default();
        let p = accept_probability(110.0, 100.0, 0, 5000, &cfg).unwrap();
        assert!((p - (-0.5f64).exp()).abs() < 1e-12);
        assert_eq!(accept_probability(100.0, 100.0, 4999, 5000, &cfg).unwrap(), 1.0);
        assert_eq!(accept_probability(90.0, 100.0, 10, 5000, &cfg).unwrap(), 1.0);
        let late = accept_probability(101.0, 100.0, 4999, 5000, &cfg).unwrap();
        assert!(late < 1e-100);
        assert!(matches!(
            accept_probability(1.0, 0.0, 0, 10, &cfg),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn halfway_probability() {
        let cfg = AlnsConfig::default();
        // remaining share 0.5, squared: 0.25
        let p = accept_probability(110.0, 100.0, 50, 100, &cfg).unwrap();
        assert!((p - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn uniform_selection_when_scores_equal() {
        let scores = OperatorScores::new(&AlnsConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; NUM_OPERATORS];
        let draws = 10_000;
        for _ in 0..draws {
            counts[scores.select(&mut rng) - 1] += 1;
        }
        let expect = draws as f64 / NUM_OPERATORS as f64;
        let sigma = (draws as f64 * (1.0 / 11.0) * (10.0 / 11.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn weighted_probability() {
        let mut scores = OperatorScores::new(&AlnsConfig::default());
        scores.scores[2] = 5.0;
        assert!((scores.probability(3) - 5.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn reward_reaches_recent_operators_and_resets() {
        let mut scores = OperatorScores::new(&AlnsConfig::default());
        for op in [1, 2, 3, 4, 5] {
            scores.record_accepted(op);
        }
        scores.reward(9);
        assert_eq!(scores.scores[8], 1.25);
        assert_eq!(scores.scores[0], 1.0);
        for op in 2..=5 {
            assert_eq!(scores.scores[op - 1], 1.25);
        }
        scores.scores[6] = 5.25;
        scores.scores[7] = 5.0;
        scores.reset_high();
        assert_eq!(scores.scores[6], 1.0);
        assert_eq!(scores.scores[7], 5.0);
    }
}
