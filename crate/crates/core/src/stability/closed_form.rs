//! Exact stationary law of one queue served by two prioritized servers:
//! server 1 alone when a single job waits, both servers otherwise.

use alloc::vec::Vec;

use super::chain::StationaryDist;
use super::StabilityError;

const TAIL_EPS: f64 = 1e-17;
const MAX_LEN: usize = 1_000_000;

/// `pi_0`, `pi_1`, `pi_2` and the geometric ratio of the tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneByTwo {
    pub pi0: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub alpha: f64,
}

impl OneByTwo {
    pub fn new(lambda: f64, mu1: f64, mu2: f64) -> Result<Self, StabilityError> {
        for (name, v) in [("lambda", lambda), ("mu1", mu1), ("mu2", mu2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(StabilityError::Parameter { name, value: v });
            }
        }
        if lambda >= mu1 + mu2 {
            return Err(StabilityError::UnstableChain { lambda, capacity: mu1 + mu2 });
        }
        let up = lambda * (1.0 - mu1) * (1.0 - mu2);
        let down1 = (1.0 - lambda) * ((1.0 - mu1) * mu2 + (1.0 - mu2) * mu1) + lambda * mu1 * mu2;
        let down2 = (1.0 - lambda) * mu1 * mu2;
        // alpha solves up = (down1 + down2) x + down2 x^2; r = alpha / up is
        // written without the division so that up = 0 is harmless.
        let b = down1 + down2;
        let root = b + libm::sqrt(b * b + 4.0 * up * down2);
        if !(root > 0.0) {
            return Err(StabilityError::Degenerate("no downward transitions from the tail"));
        }
        let r = 2.0 / root;
        let alpha = up * r;
        // Cut between 1 and 2: lambda (1 - mu1) pi1 = (down1 + down2 + down2 alpha) pi2.
        let x2 = lambda * (1.0 - mu1) * r;
        // Cut between 0 and 1: lambda pi0 = (1 - lambda) mu1 pi1 + down2 pi2.
        let denom = (1.0 - lambda) * mu1 + down2 * x2;
        if lambda == 0.0 {
            return Ok(Self { pi0: 1.0, pi1: 0.0, pi2: 0.0, alpha });
        }
        if !(denom > 0.0) {
            return Err(StabilityError::Degenerate("state 0 is unreachable"));
        }
        let x1 = lambda / denom;
        let z = 1.0 + x1 + x1 * x2 / (1.0 - alpha);
        let pi0 = 1.0 / z;
        let pi1 = x1 * pi0;
        Ok(Self { pi0, pi1, pi2: x2 * pi1, alpha })
    }

    pub fn pi(&self, n: u64) -> f64 {
        match n {
            0 => self.pi0,
            1 => self.pi1,
            _ => self.pi2 * libm::pow(self.alpha, (n - 2) as f64),
        }
    }

    /// Mass strictly above `n`.
    pub fn tail_above(&self, n: u64) -> f64 {
        match n {
            0 => 1.0 - self.pi0,
            1 => self.pi2 / (1.0 - self.alpha),
            _ => self.pi2 * libm::pow(self.alpha, (n - 1) as f64) / (1.0 - self.alpha),
        }
    }

    /// Tabulates until the remaining tail is negligible.
    pub fn dist(&self) -> StationaryDist {
        let mut probs: Vec<f64> = Vec::new();
        probs.push(self.pi0);
        probs.push(self.pi1);
        let mut p = self.pi2;
        let mut n = 2u64;
        loop {
            probs.push(p);
            if self.tail_above(n) < TAIL_EPS || p == 0.0 || probs.len() >= MAX_LEN {
                break;
            }
            p *= self.alpha;
            n += 1;
        }
        let residual = self.tail_above(n).max(0.0);
        StationaryDist { bounds: alloc::vec![n], probs, residual_mass: residual }
    }
}

/// Closed-form stationary distribution, priority on `mu1`.
pub fn stationary_1x2_closed_form(lambda: f64, mu1: f64, mu2: f64) -> Result<StationaryDist, StabilityError> {
    Ok(OneByTwo::new(lambda, mu1, mu2)?.dist())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_to_one() {
        for &(l, a, b) in &[(0.3, 0.5, 0.4), (0.1, 0.9, 0.0), (0.6, 0.4, 0.3), (0.5, 0.5, 1.0)] {
            let d = stationary_1x2_closed_form(l, a, b).unwrap();
            let s: f64 = d.probs.iter().sum::<f64>() + d.residual_mass;
            assert!((s - 1.0).abs() < 1e-12, "{l} {a} {b}: {s}");
        }
    }

    #[test]
    fn vanishing_arrivals() {
        let f = OneByTwo::new(1e-9, 0.5, 0.4).unwrap();
        assert!(f.pi0 > 1.0 - 1e-8);
        assert_eq!(OneByTwo::new(0.0, 0.5, 0.4).unwrap().pi0, 1.0);
    }

    #[test]
    fn unstable_rejected() {
        assert!(matches!(OneByTwo::new(0.9, 0.5, 0.4), Err(StabilityError::UnstableChain { .. })));
    }

    #[test]
    fn single_server_limit_is_birth_death() {
        let (l, m) = (0.3, 0.6);
        let f = OneByTwo::new(l, m, 0.0).unwrap();
        let r = l * (1.0 - m) / (m * (1.0 - l));
        assert!((f.alpha - r).abs() < 1e-15);
        assert!((f.pi1 / f.pi0 - l / (m * (1.0 - l))).abs() < 1e-12);
    }
}
