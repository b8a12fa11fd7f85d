use serde::{Deserialize, Serialize};

/// Phase dynamics `tau * ds/dt = -alpha_s * s`, starting at `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSystem {
    pub alpha_s: f64,
    pub tau: f64,
    pub s: f64,
}

impl CanonicalSystem {
    pub fn new(alpha_s: f64, tau: f64) -> Self {
        Self {
            alpha_s,
            tau,
            s: 1.0,
        }
    }

    /// Advances the phase by `dt` using the exact exponential solution.
    pub fn step(&mut self, dt: f64) -> f64 {
        self.s *= (-self.alpha_s * dt / self.tau).exp();
        self.s
    }

    /// Phase after `t` seconds from the start.
    pub fn phase_at(&self, t: f64) -> f64 {
        (-self.alpha_s * t / self.tau).exp()
    }
}

pub fn step_canonical(cs: &CanonicalSystem, dt: f64) -> f64 {
    let mut next = *cs;
    next.step(dt)
}
