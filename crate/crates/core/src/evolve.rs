//! Per-mode density-matrix evolution through the ramp.
//!
//! The mode state is stored as a 2x2 density matrix in the pair basis but
//! integrated as its real Bloch vector `r` (`rho = (1 + r.sigma) / 2`), so
//! Hermiticity and unit trace hold by construction. With the pair
//! Hamiltonian `b.sigma`, `b = (0, Delta_k, -h_k(t))`, the dephasing master
//! equation
//!
//! ```text
//! d rho/dt = -i [b.sigma, rho] - (xi^2 / 2) [sigma^z, [sigma^z, rho]]
//! ```
//!
//! becomes `dr/dt = 2 b x r - 2 xi^2 (r_x, r_y, 0)`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::integrator::{self, Tolerances};
use crate::model::{momentum_grid, BlochAngle, ChainSpec, Mode, RampProtocol};
use crate::{par, Error, Result, C64};

/// Most negative mode-matrix eigenvalue tolerated before evolution is
/// declared broken.
pub const POSITIVITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub rho: Matrix2<C64>,
    pub t: f64,
    /// Excited-state population `|u_k|^2` at the field `t / tau`.
    pub u_abs2: f64,
    /// Coherence `v_k u_k^*`.
    pub vu_conj: C64,
}

impl ModeState {
    pub fn from_bloch(r: [f64; 3], t: f64) -> Self {
        Self { rho: bloch_to_rho(r), t, u_abs2: 0.0, vu_conj: C64::new(0.0, 0.0) }
    }

    pub fn bloch(&self) -> [f64; 3] {
        rho_to_bloch(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Smallest eigenvalue of `rho`.
    pub fn min_eigenvalue(&self) -> f64 {
        let [x, y, z] = self.bloch();
        0.5 * (1.0 - (x * x + y * y + z * z).sqrt())
    }

    /// Recomputes `u_abs2` and `vu_conj` against the eigenbasis at field `h`.
    pub fn with_amplitudes(mut self, mode: &Mode, h: f64) -> Self {
        let (u, vu) = extract_amplitudes(&self.rho, mode, h);
        self.u_abs2 = u;
        self.vu_conj = vu;
        self
    }
}

pub fn bloch_to_rho([x, y, z]: [f64; 3]) -> Matrix2<C64> {
    Matrix2::new(
        C64::new(0.5 * (1.0 + z), 0.0),
        C64::new(0.5 * x, -0.5 * y),
        C64::new(0.5 * x, 0.5 * y),
        C64::new(0.5 * (1.0 - z), 0.0),
    )
}

pub fn rho_to_bloch(rho: &Matrix2<C64>) -> [f64; 3] {
    let off = rho[(0, 1)] + rho[(1, 0)].conj();
    [off.re, -off.im, (rho[(0, 0)] - rho[(1, 1)]).re]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Adaptive embedded 5(4) pair.
    DormandPrince,
    /// Fixed-step classic RK4 with step `max_step`.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` selects `0.1 * min(1, tau)`.
    pub max_step: Option<f64>,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-11, max_step: None, method: Method::DormandPrince }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step.is_none_or(|h| h > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProtocol("integrator tolerances and step must be positive".into()))
        }
    }

    pub fn max_step_for(&self, tau: f64) -> f64 {
        self.max_step.unwrap_or(0.1 * tau.min(1.0))
    }

    /// Same method with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }
}

/// Ground state of the pair Hamiltonian at the ramp's initial field.
pub fn initial_state(mode: &Mode, protocol: &RampProtocol) -> ModeState {
    ground_state(mode, protocol.field(protocol.t_start), protocol.t_start)
}

/// `|phi^-(h)><phi^-(h)|` stamped with time `t`.
pub fn ground_state(mode: &Mode, h: f64, t: f64) -> ModeState {
    let g = BlochAngle::new(mode, h).ground();
    ModeState { rho: g * g.adjoint(), t, u_abs2: 0.0, vu_conj: C64::new(0.0, 0.0) }
}

/// `(<phi+|rho|phi+>, <phi-|rho|phi+>)` in the instantaneous eigenbasis at `h`.
pub fn extract_amplitudes(rho: &Matrix2<C64>, mode: &Mode, h: f64) -> (f64, C64) {
    let angle = BlochAngle::new(mode, h);
    let (g, e) = (angle.ground(), angle.excited());
    let rho_e = rho * e;
    (e.dotc(&rho_e).re, g.dotc(&rho_e))
}

fn bloch_rhs(mode: &Mode, field: impl Fn(f64) -> f64, xi: f64) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    let delta = mode.delta;
    let offset = mode.h_offset;
    let gamma = 2.0 * xi * xi;
    move |t, r| {
        let hk = field(t) + offset;
        [
            2.0 * (delta * r[2] + hk * r[1]) - gamma * r[0],
            -2.0 * hk * r[0] - gamma * r[1],
            -2.0 * delta * r[0],
        ]
    }
}

fn integrate(
    state: &ModeState,
    rhs: impl Fn(f64, &[f64; 3]) -> [f64; 3],
    cfg: &IntegratorConfig,
    max_step: f64,
    t_target: f64,
    step: &mut f64,
) -> Result<[f64; 3]> {
    let check = |t: f64, r: &[f64; 3]| {
        let min_eig = 0.5 * (1.0 - (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt());
        if min_eig < -POSITIVITY_TOL {
            Err(Error::Positivity { t, min_eig })
        } else {
            Ok(())
        }
    };
    match cfg.method {
        Method::DormandPrince => {
            let tol = Tolerances { rel: cfg.rel_tol, abs: cfg.abs_tol, max_step };
            integrator::dopri54(&rhs, state.t, state.bloch(), t_target, tol, step, check)
        }
        Method::Rk4 => integrator::rk4(&rhs, state.t, state.bloch(), t_target, max_step, check),
    }
}

/// Integrates one mode from `state.t` to `t_target` along the ramp, then
/// refreshes the amplitudes at the field `t_target / tau`.
pub fn evolve_mode(
    state: &ModeState,
    mode: &Mode,
    protocol: &RampProtocol,
    cfg: &IntegratorConfig,
    t_target: f64,
) -> Result<ModeState> {
    let mut step = 0.0;
    evolve_mode_resumable(state, mode, protocol, cfg, t_target, &mut step)
}

fn evolve_mode_resumable(
    state: &ModeState,
    mode: &Mode,
    protocol: &RampProtocol,
    cfg: &IntegratorConfig,
    t_target: f64,
    step: &mut f64,
) -> Result<ModeState> {
    let slack = 1e-12 * protocol.t_end.abs().max(1.0);
    if t_target < state.t - slack || t_target > protocol.t_end + slack {
        return Err(Error::InvalidProtocol(format!(
            "target time {t_target} outside [{}, {}]",
            state.t, protocol.t_end
        )));
    }
    let tau = protocol.tau;
    let rhs = bloch_rhs(mode, move |t| t / tau, protocol.xi);
    let r = integrate(state, rhs, cfg, cfg.max_step_for(tau), t_target, step)?;
    Ok(ModeState::from_bloch(r, t_target).with_amplitudes(mode, protocol.field(t_target)))
}

/// Integrates one mode in a frozen field `h` with dephasing `xi`.
pub fn evolve_mode_frozen(
    state: &ModeState,
    mode: &Mode,
    h: f64,
    xi: f64,
    cfg: &IntegratorConfig,
    t_target: f64,
) -> Result<ModeState> {
    let rhs = bloch_rhs(mode, move |_| h, xi);
    let mut step = 0.0;
    let max_step = cfg.max_step.unwrap_or(0.1);
    let r = integrate(state, rhs, cfg, max_step, t_target, &mut step)?;
    Ok(ModeState::from_bloch(r, t_target).with_amplitudes(mode, h))
}

/// Evolves every grid mode through the ramp, capturing all modes at each
/// checkpoint. Result is indexed `[checkpoint][mode]` in ascending `k`.
pub fn evolve_chain(
    spec: &ChainSpec,
    protocol: &RampProtocol,
    cfg: &IntegratorConfig,
    checkpoints: &[f64],
) -> Result<Vec<Vec<ModeState>>> {
    cfg.validate()?;
    let slack = 1e-12 * protocol.t_end.abs().max(1.0);
    if checkpoints.windows(2).any(|w| w[1] < w[0])
        || checkpoints
            .iter()
            .any(|&t| t < protocol.t_start - slack || t > protocol.t_end + slack)
    {
        return Err(Error::InvalidProtocol(
            "checkpoints must be sorted and inside the ramp interval".into(),
        ));
    }
    let modes = momentum_grid(spec);
    let per_mode: Vec<Result<Vec<ModeState>>> = par::map_collect(&modes, |mode| {
        let mut state = initial_state(mode, protocol);
        let mut step = 0.0;
        let mut out = Vec::with_capacity(checkpoints.len());
        for &t in checkpoints {
            let t = t.clamp(protocol.t_start, protocol.t_end);
            state = evolve_mode_resumable(&state, mode, protocol, cfg, t, &mut step)
                .map_err(|e| Error::Mode { k: mode.k, source: Box::new(e) })?;
            out.push(state);
        }
        Ok(out)
    });

    let mut by_checkpoint = vec![Vec::with_capacity(modes.len()); checkpoints.len()];
    for states in per_mode {
        for (slot, s) in by_checkpoint.iter_mut().zip(states?) {
            slot.push(s);
        }
    }
    Ok(by_checkpoint)
}

/// Noise-averaged second moments `E[r_k r_q^T]` of the Bloch vectors of every
/// pair of modes (including `k = q`), packed for `k <= q`.
///
/// A common field fluctuation `R(t)` rotates every mode about the same axis,
/// so for `xi > 0` these do not factorize into products of the averaged
/// vectors. With `dr = M_k r dt + xi J r dW` (Ito, damping folded into
/// `M_k`) they obey `dC/dt = M_k C + C M_q^T + xi^2 J C J^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoments {
    pub modes: usize,
    data: Vec<[f64; 9]>,
}

impl SecondMoments {
    fn slot(&self, k: usize, q: usize) -> usize {
        let (a, b) = if k <= q { (k, q) } else { (q, k) };
        a * self.modes - a * (a + 1) / 2 + b
    }

    /// `E[r_k^a r_q^b]` as `[a][b]`.
    pub fn get(&self, k: usize, q: usize) -> [[f64; 3]; 3] {
        let c = &self.data[self.slot(k, q)];
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = if k <= q { c[3 * a + b] } else { c[3 * b + a] };
            }
        }
        m
    }
}

fn drift(mode: &Mode, h: f64, xi: f64) -> [[f64; 3]; 3] {
    let hk = h + mode.h_offset;
    let d = mode.delta;
    let g = 2.0 * xi * xi;
    [[-g, 2.0 * hk, 2.0 * d], [-2.0 * hk, -g, 0.0], [-2.0 * d, 0.0, 0.0]]
}

fn second_moment_rhs<'a>(
    mk: &'a Mode,
    mq: &'a Mode,
    tau: f64,
    xi: f64,
) -> impl Fn(f64, &[f64; 9]) -> [f64; 9] + 'a {
    let x2 = xi * xi;
    move |t, c| {
        let h = t / tau;
        let (a, b) = (drift(mk, h, xi), drift(mq, h, xi));
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += a[i][l] * c[3 * l + j] + c[3 * i + l] * b[j][l];
                }
                out[3 * i + j] = s;
            }
        }
        // J = [[0, 2, 0], [-2, 0, 0], [0, 0, 0]]
        out[0] += 4.0 * x2 * c[4];
        out[1] -= 4.0 * x2 * c[3];
        out[3] -= 4.0 * x2 * c[1];
        out[4] += 4.0 * x2 * c[0];
        out
    }
}

/// Second moments for all mode pairs at each checkpoint time.
pub fn evolve_second_moments(
    spec: &ChainSpec,
    protocol: &RampProtocol,
    cfg: &IntegratorConfig,
    checkpoints: &[f64],
) -> Result<Vec<SecondMoments>> {
    cfg.validate()?;
    let modes = momentum_grid(spec);
    let m = modes.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|k| (k..m).map(move |q| (k, q))).collect();
    let tol = Tolerances {
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        max_step: cfg.max_step_for(protocol.tau),
    };
    let per_pair: Vec<Result<Vec<[f64; 9]>>> = par::map_collect(&pairs, |&(k, q)| {
        let (mk, mq) = (&modes[k], &modes[q]);
        let rk = initial_state(mk, protocol).bloch();
        let rq = initial_state(mq, protocol).bloch();
        let mut c = [0.0; 9];
        for a in 0..3 {
            for b in 0..3 {
                c[3 * a + b] = rk[a] * rq[b];
            }
        }
        let rhs = second_moment_rhs(mk, mq, protocol.tau, protocol.xi);
        let mut t = protocol.t_start;
        let mut step = 0.0;
        let mut out = Vec::with_capacity(checkpoints.len());
        for &target in checkpoints {
            let target = target.clamp(protocol.t_start, protocol.t_end);
            c = integrator::dopri54(&rhs, t, c, target, tol, &mut step, |_, _| Ok(()))
                .map_err(|e| Error::Mode { k: mk.k, source: Box::new(e) })?;
            t = target;
            out.push(c);
        }
        Ok(out)
    });
    let mut result: Vec<SecondMoments> = (0..checkpoints.len())
        .map(|_| SecondMoments { modes: m, data: Vec::with_capacity(pairs.len()) })
        .collect();
    for series in per_pair {
        for (slot, c) in result.iter_mut().zip(series?) {
            slot.data.push(c);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_herm_dev(rho: &Matrix2<C64>) -> f64 {
        (rho - rho.adjoint()).norm()
    }

    #[test]
    fn initial_state_examples() {
        let spec = ChainSpec::default();
        let p = RampProtocol::new(&spec, 1.0, 0.0).unwrap();
        let mode = Mode::new(PI / 2.0, 1.0);
        let s = initial_state(&mode, &p).with_amplitudes(&mode, -30.0);
        assert!((s.purity() - 1.0).abs() < 1e-14);
        assert!(s.u_abs2.abs() < 1e-15);
        assert!(s.vu_conj.norm() < 1e-15);
        assert_eq!(s.t, -30.0);

        // deep paramagnet on the negative side: pair fully occupied
        let s = ground_state(&Mode::new(1.0, 1.0), -1e9, 0.0);
        assert!((s.rho[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_examples() {
        let mode = Mode::new(0.8, 1.0);
        let h = 0.3;
        let angle = BlochAngle::new(&mode, h);
        let (g, e) = (angle.ground(), angle.excited());
        let (u, vu) = extract_amplitudes(&(g * g.adjoint()), &mode, h);
        assert!(u.abs() < 1e-15 && vu.norm() < 1e-15);
        let (u, vu) = extract_amplitudes(&(e * e.adjoint()), &mode, h);
        assert!((u - 1.0).abs() < 1e-15 && vu.norm() < 1e-15);
        let (u, vu) = extract_amplitudes(&(Matrix2::identity() * C64::from(0.5)), &mode, h);
        assert!((u - 0.5).abs() < 1e-15 && vu.norm() < 1e-15);
    }

    #[test]
    fn bloch_round_trip() {
        let r = [0.3, -0.4, 0.5];
        let rho = bloch_to_rho(r);
        assert!(max_herm_dev(&rho) == 0.0);
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        let back = rho_to_bloch(&rho);
        for i in 0..3 {
            assert!((back[i] - r[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_dephasing_decay() {
        let mode = Mode::new(1.0, 0.0);
        let xi = 0.3;
        let s0 = ModeState::from_bloch([0.6, 0.0, 0.8], 0.0);
        let c0 = s0.rho[(0, 1)].norm();
        let cfg = IntegratorConfig::default();
        for t in [0.5, 2.0, 5.0] {
            let s = evolve_mode_frozen(&s0, &mode, 0.7, xi, &cfg, t).unwrap();
            let want = c0 * (-2.0 * xi * xi * t).exp();
            assert!((s.rho[(0, 1)].norm() - want).abs() < 1e-9, "t={t}");
            assert!((s.rho[(0, 0)].re - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_unitary_preserves_spectrum() {
        let mode = Mode::new(0.9, 1.0);
        let s0 = ModeState::from_bloch([0.2, 0.5, -0.3], 0.0);
        let cfg = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() };
        let s = evolve_mode_frozen(&s0, &mode, 1.3, 0.0, &cfg, 20.0).unwrap();
        assert!((s.purity() - s0.purity()).abs() < 1e-10);
        assert!((s.min_eigenvalue() - s0.min_eigenvalue()).abs() < 1e-10);
    }

    #[test]
    fn landau_zener_single_mode() {
        let spec = ChainSpec::default();
        let tau = 2.0;
        let p = RampProtocol::new(&spec, tau, 0.0).unwrap();
        let mode = Mode::new(PI / 2.0, 1.0);
        let s = evolve_mode(&initial_state(&mode, &p), &mode, &p, &Default::default(), p.t_end).unwrap();
        let lz = (-PI * tau).exp();
        assert!(((s.u_abs2 - lz) / lz).abs() < 0.05, "u = {}, lz = {lz}", s.u_abs2);
        assert!((s.purity() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sudden_limit() {
        // tau -> 0: the state is frozen, so u = sin^2((theta_f - theta_i)/2)
        let spec = ChainSpec::new(8, 1.0, -3.0, 2.0).unwrap();
        let tau = 1e-6;
        let p = RampProtocol::new(&spec, tau, 0.0).unwrap();
        let cfg = IntegratorConfig::default();
        for mode in momentum_grid(&spec) {
            let s = evolve_mode(&initial_state(&mode, &p), &mode, &p, &cfg, p.t_end).unwrap();
            let dtheta = BlochAngle::new(&mode, 2.0).theta - BlochAngle::new(&mode, -3.0).theta;
            assert!((s.u_abs2 - (0.5 * dtheta).sin().powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_backwards_target() {
        let spec = ChainSpec::default();
        let p = RampProtocol::new(&spec, 1.0, 0.0).unwrap();
        let mode = Mode::new(1.0, 1.0);
        let s = initial_state(&mode, &p);
        assert!(evolve_mode(&s, &mode, &p, &Default::default(), p.t_start - 1.0).is_err());
        assert!(evolve_mode(&s, &mode, &p, &Default::default(), p.t_end + 1.0).is_err());
    }

    #[test]
    fn chain_checkpoint_structure() {
        let spec = ChainSpec::new(10, 1.0, -5.0, 5.0).unwrap();
        let p = RampProtocol::new(&spec, 0.5, 0.2).unwrap();
        let cps = [p.time_at(-1.0), p.time_at(0.0), p.t_end];
        let states = evolve_chain(&spec, &p, &Default::default(), &cps).unwrap();
        assert_eq!(states.len(), 3);
        assert!(states.iter().all(|s| s.len() == 5));
        for m in 0..5 {
            let purities: Vec<f64> = states.iter().map(|s| s[m].purity()).collect();
            assert!(purities.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            for s in &states {
                let st = &s[m];
                assert!(st.vu_conj.norm_sqr() <= st.u_abs2 * (1.0 - st.u_abs2) + 1e-9);
            }
        }
        let unsorted = [p.t_end, p.t_start];
        assert!(evolve_chain(&spec, &p, &Default::default(), &unsorted).is_err());
    }

    #[test]
    fn second_moments_factorize_without_noise() {
        let spec = ChainSpec::new(8, 1.0, -5.0, 5.0).unwrap();
        let p = RampProtocol::new(&spec, 0.7, 0.0).unwrap();
        let cps = [p.time_at(0.3), p.t_end];
        let states = evolve_chain(&spec, &p, &Default::default(), &cps).unwrap();
        let second = evolve_second_moments(&spec, &p, &Default::default(), &cps).unwrap();
        for (s, c) in states.iter().zip(&second) {
            for k in 0..4 {
                for q in 0..4 {
                    let (rk, rq, m) = (s[k].bloch(), s[q].bloch(), c.get(k, q));
                    for a in 0..3 {
                        for b in 0..3 {
                            assert!((m[a][b] - rk[a] * rq[b]).abs() < 1e-7);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn second_moments_keep_trajectories_pure() {
        // each realization stays pure, so E|r_k|^2 = 1 while |E r_k| shrinks
        let spec = ChainSpec::new(8, 1.0, -5.0, 5.0).unwrap();
        let p = RampProtocol::new(&spec, 1.0, 0.3).unwrap();
        let states = evolve_chain(&spec, &p, &Default::default(), &[p.t_end]).unwrap();
        let c = &evolve_second_moments(&spec, &p, &Default::default(), &[p.t_end]).unwrap()[0];
        for k in 0..4 {
            let m = c.get(k, k);
            assert!((m[0][0] + m[1][1] + m[2][2] - 1.0).abs() < 1e-7);
            assert!(states[0][k].purity() < 1.0 - 1e-3);
            for q in 0..4 {
                let (a, b) = (c.get(k, q), c.get(q, k));
                assert!((0..9).all(|i| a[i / 3][i % 3] == b[i % 3][i / 3]));
            }
        }
    }
}
