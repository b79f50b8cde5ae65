//! Chain parameters, momentum modes and per-mode Hamiltonians.
//!
//! Each positive momentum `k` couples the pair `(k, -k)`. Within the even
//! sector of that pair the dynamics lives on the two states
//! `{|0>, c†_k c†_-k |0>}` (the pair basis, fixed globally in that order).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Static chain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    pub gamma: f64,
    pub h_i: f64,
    pub h_f: f64,
}

impl ChainSpec {
    pub const DEFAULT_N: usize = 200;
    pub const DEFAULT_H_I: f64 = -30.0;
    pub const DEFAULT_H_F: f64 = 30.0;

    pub fn new(n: usize, gamma: f64, h_i: f64, h_f: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidChain(format!("N must be even and >= 4, got {n}")));
        }
        if !gamma.is_finite() || !h_i.is_finite() || !h_f.is_finite() {
            return Err(Error::InvalidChain("gamma and fields must be finite".into()));
        }
        Ok(Self { n, gamma, h_i, h_f })
    }

    /// Ising chain (`gamma = 1`) with the default full ramp `-30 -> 30`.
    pub fn ising(n: usize) -> Result<Self> {
        Self::new(n, 1.0, Self::DEFAULT_H_I, Self::DEFAULT_H_F)
    }

    pub fn num_modes(&self) -> usize {
        self.n / 2
    }
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self { n: Self::DEFAULT_N, gamma: 1.0, h_i: Self::DEFAULT_H_I, h_f: Self::DEFAULT_H_F }
    }
}

/// One positive momentum of the antiperiodic grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: f64,
    /// `-cos k`; the mode's field is `h_k = h + h_offset`.
    pub h_offset: f64,
    /// Pairing amplitude `gamma sin k`.
    pub delta: f64,
}

impl Mode {
    pub fn new(k: f64, gamma: f64) -> Self {
        Self { k, h_offset: -k.cos(), delta: gamma * k.sin() }
    }

    #[inline]
    pub fn h_k(&self, h: f64) -> f64 {
        h + self.h_offset
    }

    #[inline]
    pub fn energy(&self, h: f64) -> f64 {
        self.h_k(h).hypot(self.delta)
    }
}

/// `k = (2m - 1) pi / N` for `m = 1..=N/2`, strictly increasing.
pub fn momentum_grid(spec: &ChainSpec) -> Vec<Mode> {
    let n = spec.n as f64;
    (1..=spec.num_modes())
        .map(|m| Mode::new((2 * m - 1) as f64 * PI / n, spec.gamma))
        .collect()
}

pub fn sigma_x() -> Matrix2<C64> {
    Matrix2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0))
}

pub fn sigma_y() -> Matrix2<C64> {
    Matrix2::new(C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0))
}

pub fn sigma_z() -> Matrix2<C64> {
    Matrix2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0))
}

/// Single-particle BdG matrix `h_k sigma^z + Delta_k sigma^y` in Nambu space.
pub fn bloch_hamiltonian(mode: &Mode, h: f64) -> Matrix2<C64> {
    sigma_z() * C64::from(mode.h_k(h)) + sigma_y() * C64::from(mode.delta)
}

/// Mode-pair Hamiltonian on `{|0>, c†_k c†_-k |0>}`, with the constant
/// `h_k` shift dropped: `-h_k sigma^z + Delta_k sigma^y`.
///
/// Its ground state is `cos(theta/2)|0> - i sin(theta/2)|11>` with
/// `theta = atan2(Delta_k, h_k)`, energy `-eps_k`.
pub fn pair_hamiltonian(mode: &Mode, h: f64) -> Matrix2<C64> {
    sigma_z() * C64::from(-mode.h_k(h)) + sigma_y() * C64::from(mode.delta)
}

/// Instantaneous Bogoliubov angle and quasiparticle energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochAngle {
    pub theta: f64,
    pub epsilon: f64,
}

impl BlochAngle {
    pub fn new(mode: &Mode, h: f64) -> Self {
        let hk = mode.h_k(h);
        Self { theta: mode.delta.atan2(hk), epsilon: hk.hypot(mode.delta) }
    }

    /// Lower (`-eps`) pair eigenstate.
    pub fn ground(&self) -> Vector2<C64> {
        let (s, c) = (0.5 * self.theta).sin_cos();
        Vector2::new(C64::new(c, 0.0), C64::new(0.0, -s))
    }

    /// Upper (`+eps`) pair eigenstate.
    pub fn excited(&self) -> Vector2<C64> {
        let (s, c) = (0.5 * self.theta).sin_cos();
        Vector2::new(C64::new(0.0, -s), C64::new(c, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEigensystem {
    pub angle: BlochAngle,
    pub ground: Vector2<C64>,
    pub excited: Vector2<C64>,
}

pub fn instantaneous_eigensystem(mode: &Mode, h: f64) -> Result<ModeEigensystem> {
    let angle = BlochAngle::new(mode, h);
    if angle.epsilon == 0.0 {
        return Err(Error::Degenerate { k: mode.k });
    }
    Ok(ModeEigensystem { angle, ground: angle.ground(), excited: angle.excited() })
}

/// Linear ramp `h0(t) = t / tau` over `[h_i tau, h_f tau]`, plus white-noise
/// strength `xi` (`<R(t) R(t')> = xi^2 delta(t - t')`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    pub tau: f64,
    pub xi: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl RampProtocol {
    pub fn new(spec: &ChainSpec, tau: f64, xi: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidProtocol(format!("tau must be positive, got {tau}")));
        }
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::InvalidProtocol(format!("xi must be nonnegative, got {xi}")));
        }
        if spec.h_f < spec.h_i {
            return Err(Error::InvalidProtocol("ramp must run upward (h_f >= h_i)".into()));
        }
        Ok(Self { tau, xi, t_start: spec.h_i * tau, t_end: spec.h_f * tau })
    }

    #[inline]
    pub fn field(&self, t: f64) -> f64 {
        t / self.tau
    }

    #[inline]
    pub fn time_at(&self, h: f64) -> f64 {
        h * self.tau
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}
