//! Exact small-chain reference: the spin Hamiltonian on `2^N` amplitudes,
//! deterministic and noisy ramps, and reduced two-spin states by partial
//! trace.
//!
//! Site `j` is bit `j` of a basis index, bit value 0 is spin up. The field
//! term is `-(h/2) sum sigma^z` so that the mode energies are exactly
//! `sqrt((h - cos k)^2 + gamma^2 sin^2 k)`.
//!
//! Evolution runs in the even-parity, zero-momentum sector that contains the
//! ground state, so `N = 8` costs a 20-dimensional problem.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::measures::{measure, MeasureResult};
use crate::model::{ChainSpec, RampProtocol};
use crate::rdm::TwoSpinRDM;
use crate::{Error, Result, C64};

pub const MAX_SITES: usize = 12;

fn check_size(n: usize) -> Result<()> {
    if n > MAX_SITES {
        return Err(Error::OracleTooLarge(n));
    }
    Ok(())
}

/// Full Hamiltonian `-sum[(1+g)/4 XX + (1-g)/4 YY + (h/2) Z]` with periodic
/// boundary conditions.
pub fn dense_hamiltonian(spec: &ChainSpec, h: f64) -> Result<DMatrix<C64>> {
    check_size(spec.n)?;
    let n = spec.n;
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for s in 0..dim {
        let (diag, flips) = apply_terms(n, spec.gamma, s);
        m[(s, s)] += C64::from(h * diag);
        for (t, c) in flips {
            m[(t, s)] += C64::from(c);
        }
    }
    Ok(m)
}

/// Action on one basis state: the coefficient of `h` on the diagonal and the
/// bond-flip amplitudes.
fn apply_terms(n: usize, gamma: f64, s: usize) -> (f64, Vec<(usize, f64)>) {
    let ups = n as f64 - s.count_ones() as f64;
    let diag = -0.5 * (ups - s.count_ones() as f64);
    let mut flips = Vec::with_capacity(n);
    for i in 0..n {
        let j = (i + 1) % n;
        let same = ((s >> i) & 1) == ((s >> j) & 1);
        let c = if same { -0.5 * gamma } else { -0.5 };
        if c != 0.0 {
            flips.push((s ^ (1 << i) ^ (1 << j), c));
        }
    }
    (diag, flips)
}

fn rotate(s: usize, n: usize) -> usize {
    ((s << 1) | (s >> (n - 1))) & ((1 << n) - 1)
}

/// Even-parity, zero-momentum sector: `H(h) = h_xy + h * z`.
#[derive(Debug, Clone)]
pub struct Sector {
    pub n: usize,
    reps: Vec<usize>,
    orbit_len: Vec<usize>,
    index_of_rep: std::collections::HashMap<usize, usize>,
    rep_of: Vec<usize>,
    h_xy: DMatrix<f64>,
    z: DVector<f64>,
    comm: DMatrix<f64>,
}

impl Sector {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        check_size(spec.n)?;
        let n = spec.n;
        let dim = 1usize << n;
        let mut rep_of = vec![usize::MAX; dim];
        let mut reps = Vec::new();
        let mut orbit_len = Vec::new();
        for s in 0..dim {
            if s.count_ones() % 2 == 1 || rep_of[s] != usize::MAX {
                continue;
            }
            let mut orbit = vec![s];
            let mut t = rotate(s, n);
            while t != s {
                orbit.push(t);
                t = rotate(t, n);
            }
            let rep = *orbit.iter().min().unwrap();
            for &o in &orbit {
                rep_of[o] = rep;
            }
            reps.push(rep);
            orbit_len.push(orbit.len());
        }
        let index_of_rep: std::collections::HashMap<usize, usize> =
            reps.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let d = reps.len();
        let mut h_xy = DMatrix::zeros(d, d);
        let mut z = DVector::zeros(d);
        for (col, &r) in reps.iter().enumerate() {
            let (diag, flips) = apply_terms(n, spec.gamma, r);
            z[col] = diag;
            for (t, c) in flips {
                let row = index_of_rep[&rep_of[t]];
                h_xy[(row, col)] +=
                    c * (orbit_len[col] as f64).sqrt() / (orbit_len[row] as f64).sqrt();
            }
        }
        let zm = DMatrix::from_diagonal(&z);
        let comm = &h_xy * &zm - &zm * &h_xy;
        Ok(Self { n, reps, orbit_len, index_of_rep, rep_of, h_xy, z, comm })
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn hamiltonian(&self, h: f64) -> DMatrix<f64> {
        let mut m = self.h_xy.clone();
        for i in 0..self.dim() {
            m[(i, i)] += h * self.z[i];
        }
        m
    }

    pub fn ground_state(&self, h: f64) -> (f64, DVector<C64>) {
        let e = SymmetricEigen::new(self.hamiltonian(h));
        let i = e.eigenvalues.imin();
        let v = e.eigenvectors.column(i).map(C64::from);
        (e.eigenvalues[i], v)
    }

    /// Sector coordinates to the full `2^N` amplitude vector.
    pub fn expand(&self, psi: &DVector<C64>) -> DVector<C64> {
        let dim = 1usize << self.n;
        let mut out = DVector::zeros(dim);
        for s in 0..dim {
            let rep = self.rep_of[s];
            if rep == usize::MAX {
                continue;
            }
            let i = self.index_of_rep[&rep];
            out[s] = psi[i] / (self.orbit_len[i] as f64).sqrt();
        }
        out
    }

    /// One step of the fourth-order Magnus propagator for
    /// `h(t) = t / tau + offset` over `[t, t + dt]`.
    fn step(&self, psi: &DVector<C64>, t: f64, dt: f64, tau: f64, offset: f64) -> DVector<C64> {
        let f_mid = (t + 0.5 * dt) / tau + offset;
        let c2 = dt * dt * dt / (12.0 * tau);
        let d = self.dim();
        let mut omega = DMatrix::<C64>::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                let mut h = self.h_xy[(i, j)];
                if i == j {
                    h += f_mid * self.z[i];
                }
                omega[(i, j)] = C64::new(c2 * self.comm[(i, j)], -dt * h);
            }
        }
        expm_apply(&omega, psi)
    }
}

/// `exp(omega) psi` by Taylor series until the terms drop below round-off.
fn expm_apply(omega: &DMatrix<C64>, psi: &DVector<C64>) -> DVector<C64> {
    let mut sum = psi.clone();
    let mut term = psi.clone();
    let norm = psi.norm().max(f64::MIN_POSITIVE);
    for k in 1..200 {
        term = omega * term / C64::from(k as f64);
        sum += &term;
        if term.norm() < 1e-17 * norm {
            break;
        }
    }
    sum
}

/// A sampled ramp state on the full Hilbert space.
#[derive(Debug, Clone)]
pub struct DenseChainState {
    pub amplitudes: DVector<C64>,
    pub t: f64,
    pub n: usize,
}

impl DenseChainState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Piecewise-constant white noise: `R_j` on consecutive intervals of width
/// `dt_noise` with variance `xi^2 / dt_noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub dt_noise: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
}

/// `min(0.01, tau / 100)`.
pub fn default_dt_noise(tau: f64) -> f64 {
    (tau / 100.0).min(0.01)
}

impl NoiseRealization {
    /// Interval count is rounded up so the intervals tile the ramp exactly.
    pub fn generate(protocol: &RampProtocol, dt_nominal: f64, seed: u64, stream: u64) -> Self {
        let count = (protocol.duration() / dt_nominal).ceil().max(1.0) as usize;
        let dt_noise = protocol.duration() / count as f64;
        let sd = protocol.xi / dt_noise.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let samples = (0..count)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                sd * z
            })
            .collect();
        Self { dt_noise, samples, seed }
    }

    pub fn silent(protocol: &RampProtocol, dt_nominal: f64) -> Self {
        let mut r = Self::generate(protocol, dt_nominal, 0, 0);
        r.samples.iter_mut().for_each(|x| *x = 0.0);
        r
    }
}

/// Ramps the exact ground state at `h_i` to `t_end`, `substeps` Magnus steps
/// per noise interval.
pub fn trajectory_evolve(
    sector: &Sector,
    protocol: &RampProtocol,
    noise: &NoiseRealization,
    substeps: usize,
) -> DenseChainState {
    let psi = evolve_sector(sector, protocol, noise, substeps);
    DenseChainState { amplitudes: sector.expand(&psi), t: protocol.t_end, n: sector.n }
}

fn evolve_sector(
    sector: &Sector,
    protocol: &RampProtocol,
    noise: &NoiseRealization,
    substeps: usize,
) -> DVector<C64> {
    let (_, mut psi) = sector.ground_state(protocol.field(protocol.t_start));
    let dt = noise.dt_noise / substeps as f64;
    for (j, &r) in noise.samples.iter().enumerate() {
        let t0 = protocol.t_start + j as f64 * noise.dt_noise;
        for s in 0..substeps {
            psi = sector.step(&psi, t0 + s as f64 * dt, dt, protocol.tau, r);
        }
    }
    psi
}

/// Noiseless ramp with Magnus step `dt` (the last step is shortened).
pub fn exact_evolve(sector: &Sector, protocol: &RampProtocol, dt: f64) -> DenseChainState {
    let (_, mut psi) = sector.ground_state(protocol.field(protocol.t_start));
    let mut t = protocol.t_start;
    while t < protocol.t_end {
        let h = dt.min(protocol.t_end - t);
        psi = sector.step(&psi, t, h, protocol.tau, 0.0);
        t += h;
    }
    DenseChainState { amplitudes: sector.expand(&psi), t: protocol.t_end, n: sector.n }
}

/// Two-spin state of sites `0` and `r` by partial trace, in the order
/// `{↑↑, ↑↓, ↓↑, ↓↓}`.
pub fn reduced_rdm(state: &DenseChainState, r: usize) -> Matrix4<C64> {
    let psi = &state.amplitudes;
    let mut rho = Matrix4::<C64>::zeros();
    let mask = 1usize | (1 << r);
    for s in 0..psi.len() {
        if s & mask != 0 {
            continue;
        }
        let amp = [psi[s], psi[s | (1 << r)], psi[s | 1], psi[s | mask]];
        for a in 0..4 {
            for b in 0..4 {
                rho[(a, b)] += amp[a] * amp[b].conj();
            }
        }
    }
    rho
}

/// Noiseless `r = 1, 2` states at the end of the ramp, by partial trace.
pub fn noiseless_rdms(spec: &ChainSpec, protocol: &RampProtocol, dt: f64) -> Result<[TwoSpinRDM; 2]> {
    let sector = Sector::new(spec)?;
    let state = exact_evolve(&sector, protocol, dt);
    let x = |r: usize| -> Result<TwoSpinRDM> {
        let rdm = to_x_state(&reduced_rdm(&state, r), |_, _| 1e-10)?;
        Ok(TwoSpinRDM { r, ..rdm })
    };
    Ok([x(1)?, x(2)?])
}

/// Largest entry-wise distance between two X states.
pub fn max_entry_diff(a: &TwoSpinRDM, b: &TwoSpinRDM) -> f64 {
    (a.to_matrix() - b.to_matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

const OFF_X: [(usize, usize); 8] =
    [(0, 1), (0, 2), (1, 0), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)];

/// Casts a dense matrix into X form; off-X entries beyond `tol(i, j)` are an error.
pub fn to_x_state(m: &Matrix4<C64>, tol: impl Fn(usize, usize) -> f64) -> Result<TwoSpinRDM> {
    for (i, j) in OFF_X {
        let leak = m[(i, j)].norm();
        let t = tol(i, j);
        if leak > t {
            return Err(Error::OffXLeakage { leak, tol: t });
        }
    }
    Ok(TwoSpinRDM::from_matrix(m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub trajectories: usize,
    pub seed: u64,
    pub dt_noise: Option<f64>,
    pub substeps: usize,
    pub batches: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { trajectories: 2000, seed: 0x5eed, dt_noise: None, substeps: 1, batches: 20 }
    }
}

/// Trajectory-averaged two-spin state with Monte-Carlo errors.
#[derive(Debug, Clone)]
pub struct RdmEstimate {
    pub r: usize,
    pub mean: Matrix4<C64>,
    /// Standard error of the real and imaginary part of each entry.
    pub stderr: Matrix4<C64>,
    pub rdm: TwoSpinRDM,
    pub measures: MeasureResult,
    /// Batch-jackknife errors of qfi, lqc_x, lqc_y, lqc_z.
    pub measure_stderr: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub trajectories: usize,
    pub estimates: [RdmEstimate; 2],
}

fn measure_vec(m: &MeasureResult) -> [f64; 4] {
    [m.qfi, m.lqc_x, m.lqc_y, m.lqc_z]
}

fn estimate(samples: &[Matrix4<C64>], r: usize, batches: usize) -> Result<RdmEstimate> {
    let m = samples.len() as f64;
    let mean = samples.iter().fold(Matrix4::zeros(), |a, s| a + s) / C64::from(m);
    let mut var = Matrix4::<C64>::zeros();
    for s in samples {
        let d = s - mean;
        var += d.map(|z| C64::new(z.re * z.re, z.im * z.im));
    }
    let stderr = var.map(|v| C64::new((v.re / (m - 1.0) / m).sqrt(), (v.im / (m - 1.0) / m).sqrt()));
    let tol = |i: usize, j: usize| 3.0 * stderr[(i, j)].norm() + 1e-12;
    let rdm = TwoSpinRDM { r, ..to_x_state(&mean, tol)? };
    let measures = measure(&rdm)?;

    let b = batches.clamp(2, samples.len());
    let size = samples.len() / b;
    let total = samples.iter().fold(Matrix4::zeros(), |a, s| a + s);
    let mut jack = Vec::with_capacity(b);
    for k in 0..b {
        let chunk = &samples[k * size..(k + 1) * size];
        let part = chunk.iter().fold(Matrix4::zeros(), |a, s| a + s);
        let rest = (total - part) / C64::from((samples.len() - size) as f64);
        let x = TwoSpinRDM { r, ..TwoSpinRDM::from_matrix(&rest) };
        jack.push(measure_vec(&measure(&x)?));
    }
    let mut measure_stderr = [0.0; 4];
    for (q, err) in measure_stderr.iter_mut().enumerate() {
        let avg = jack.iter().map(|v| v[q]).sum::<f64>() / b as f64;
        let ss: f64 = jack.iter().map(|v| (v[q] - avg).powi(2)).sum();
        *err = ((b as f64 - 1.0) / b as f64 * ss).sqrt();
    }
    Ok(RdmEstimate { r, mean, stderr, rdm, measures, measure_stderr })
}

/// Agreement of a deterministic state with a trajectory estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    /// Largest deviation in standard errors, over entries and measures whose
    /// error exceeds the floor.
    pub worst_sigma: f64,
    /// Every entry and measure lies within `k` standard errors plus the floor.
    pub within: bool,
}

/// Compares real and imaginary parts of every entry, then QFI and the LQCs.
pub fn ensemble_deviation(rdm: &TwoSpinRDM, est: &RdmEstimate, k: f64, floor: f64) -> Result<Deviation> {
    let mut dev = Deviation { worst_sigma: 0.0, within: true };
    let mut check = |d: f64, s: f64| {
        dev.within &= d.abs() <= k * s + floor;
        if s > floor {
            dev.worst_sigma = dev.worst_sigma.max(d.abs() / s);
        }
    };
    let m = rdm.to_matrix();
    for i in 0..4 {
        for j in 0..4 {
            let d = m[(i, j)] - est.mean[(i, j)];
            check(d.re, est.stderr[(i, j)].re);
            check(d.im, est.stderr[(i, j)].im);
        }
    }
    let mine = measure_vec(&measure(rdm)?);
    let theirs = measure_vec(&est.measures);
    for q in 0..4 {
        check(mine[q] - theirs[q], est.measure_stderr[q]);
    }
    Ok(dev)
}

/// Averages the `r = 1, 2` states over independent noise trajectories.
/// Trajectory `i` uses stream `i` of the seeded generator.
pub fn trajectory_ensemble(
    spec: &ChainSpec,
    protocol: &RampProtocol,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    let sector = Sector::new(spec)?;
    let dt = cfg.dt_noise.unwrap_or_else(|| default_dt_noise(protocol.tau));
    let ids: Vec<u64> = (0..cfg.trajectories as u64).collect();
    let per_traj = crate::par::map_collect(&ids, |&i| {
        let noise = NoiseRealization::generate(protocol, dt, cfg.seed, i);
        let state = trajectory_evolve(&sector, protocol, &noise, cfg.substeps.max(1));
        [reduced_rdm(&state, 1), reduced_rdm(&state, 2)]
    });
    let r1: Vec<_> = per_traj.iter().map(|p| p[0]).collect();
    let r2: Vec<_> = per_traj.iter().map(|p| p[1]).collect();
    Ok(EnsembleResult {
        trajectories: cfg.trajectories,
        estimates: [estimate(&r1, 1, cfg.batches)?, estimate(&r2, 2, cfg.batches)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{momentum_grid, Mode};

    #[test]
    fn two_site_spectrum_symmetric() {
        let spec = ChainSpec { n: 2, gamma: 1.0, h_i: -1.0, h_f: 1.0 };
        let h = dense_hamiltonian(&spec, 0.0).unwrap();
        let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        for i in 0..e.len() {
            assert!((e[i] + e[e.len() - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn too_large_rejected() {
        let spec = ChainSpec::ising(14).unwrap();
        assert!(matches!(dense_hamiltonian(&spec, 0.0), Err(Error::OracleTooLarge(14))));
    }

    #[test]
    fn sector_ground_energy_matches_modes() {
        for (gamma, h) in [(1.0, 1.5), (0.6, 0.4), (1.0, -0.7)] {
            let spec = ChainSpec::new(8, gamma, -30.0, 30.0).unwrap();
            let sector = Sector::new(&spec).unwrap();
            assert_eq!(sector.dim(), 20);
            let (e0, _) = sector.ground_state(h);
            let free: f64 = -momentum_grid(&spec).iter().map(|m: &Mode| m.energy(h)).sum::<f64>();
            assert!((e0 - free).abs() < 1e-10, "{e0} vs {free}");
        }
    }

    #[test]
    fn sector_matches_dense_ground_state() {
        let spec = ChainSpec::ising(8).unwrap();
        let dense = SymmetricEigen::new(dense_hamiltonian(&spec, 1.5).unwrap());
        let e_dense = dense.eigenvalues.min();
        let sector = Sector::new(&spec).unwrap();
        let (e, psi) = sector.ground_state(1.5);
        assert!((e - e_dense).abs() < 1e-10);
        let full = sector.expand(&psi);
        assert!((full.norm() - 1.0).abs() < 1e-12);
        let hpsi = dense_hamiltonian(&spec, 1.5).unwrap() * &full;
        assert!((hpsi - full.clone() * C64::from(e)).norm() < 1e-10);
        for (s, a) in full.iter().enumerate() {
            if a.norm() > 1e-14 {
                assert_eq!(s.count_ones() % 2, 0);
            }
        }
    }

    #[test]
    fn polarized_state_rdm() {
        let spec = ChainSpec::ising(8).unwrap();
        let sector = Sector::new(&spec).unwrap();
        let (_, psi) = sector.ground_state(1e6);
        let st = DenseChainState { amplitudes: sector.expand(&psi), t: 0.0, n: 8 };
        let rho = reduced_rdm(&st, 1);
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-10);
        let mixed = DenseChainState {
            amplitudes: DVector::from_element(256, C64::from(1.0 / 16.0)),
            t: 0.0,
            n: 8,
        };
        // uniform superposition has equal populations
        let rho = reduced_rdm(&mixed, 2);
        for i in 0..4 {
            assert!((rho[(i, i)].re - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn noiseless_evolution_converges_and_keeps_norm() {
        let spec = ChainSpec::new(8, 1.0, -5.0, 5.0).unwrap();
        let sector = Sector::new(&spec).unwrap();
        let p = RampProtocol::new(&spec, 1.0, 0.0).unwrap();
        let a = exact_evolve(&sector, &p, 0.02);
        let b = exact_evolve(&sector, &p, 0.01);
        assert!((a.norm() - 1.0).abs() < 1e-10);
        let ra = reduced_rdm(&a, 1);
        let rb = reduced_rdm(&b, 1);
        assert!((ra - rb).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-8);
    }

    #[test]
    fn noise_realization_is_reproducible() {
        let spec = ChainSpec::ising(8).unwrap();
        let p = RampProtocol::new(&spec, 1.0, 0.3).unwrap();
        let a = NoiseRealization::generate(&p, 0.01, 7, 3);
        let b = NoiseRealization::generate(&p, 0.01, 7, 3);
        let c = NoiseRealization::generate(&p, 0.01, 7, 4);
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
        assert_eq!(a.samples.len(), 6000);
        assert!((a.dt_noise * a.samples.len() as f64 - p.duration()).abs() < 1e-9);
        let var = a.samples.iter().map(|x| x * x).sum::<f64>() / a.samples.len() as f64;
        assert!((var * a.dt_noise / 0.09 - 1.0).abs() < 0.1);
    }
}
