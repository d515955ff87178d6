//! Transition storage for off-policy updates.

use rand::Rng;

use crate::{Error, Result};

/// One `(s, a, r, s', done)` tuple. Feeds both the replay and the expert
/// buffer; expert demonstrations use the same reward definition as the
/// agent's own transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

impl Transition {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.obs) || !finite(&self.next_obs) || !self.reward.is_finite() {
            return Err(Error::NonFinite("transition contents".into()));
        }
        if !finite(&self.action) || self.action.iter().any(|a| a.abs() > 1.0) {
            return Err(Error::InvalidInput(
                "action components must lie in [-1, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed-capacity ring of transitions with uniform sampling.
///
/// Once full, the oldest entries are overwritten first. Sampling is uniform
/// with replacement, driven entirely by the caller's generator.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            data: Vec::new(),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Uniform-with-replacement batch of references.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, k: usize) -> Vec<&'a Transition> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        (0..k)
            .map(|_| &self.data[rng.gen_range(0..self.data.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.data.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(tag: f64) -> Transition {
        Transition {
            obs: vec![tag; 3],
            action: vec![0.0; 2],
            reward: tag,
            next_obs: vec![tag; 3],
            done: false,
        }
    }

    #[test]
    fn ring_evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        // Slots 0 and 1 were overwritten by 3 and 4.
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn sampling_is_uniform_within_five_sigma() {
        let mut buf = ReplayBuffer::new(200);
        for i in 0..100 {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let draws = 1_000_000usize;
        let mut counts = vec![0u64; 100];
        for t in buf.sample(&mut rng, draws) {
            counts[t.reward as usize] += 1;
        }
        let p = 1.0 / 100.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let expected = draws as f64 * p;
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() <= 5.0 * sigma,
                "element {i} drawn {c} times, expected {expected} +/- {}",
                5.0 * sigma
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let mut buf = ReplayBuffer::new(50);
        for i in 0..50 {
            buf.push(transition(i as f64));
        }
        let a: Vec<f64> = buf
            .sample(&mut ChaCha8Rng::seed_from_u64(7), 64)
            .iter()
            .map(|t| t.reward)
            .collect();
        let b: Vec<f64> = buf
            .sample(&mut ChaCha8Rng::seed_from_u64(7), 64)
            .iter()
            .map(|t| t.reward)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn transition_validation_catches_bad_values() {
        let mut t = transition(1.0);
        assert!(t.validate().is_ok());
        t.action[0] = 1.5;
        assert!(t.validate().is_err());
        t.action[0] = 0.0;
        t.reward = f64::NAN;
        assert!(t.validate().is_err());
    }
}
