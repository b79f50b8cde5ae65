//! Majorana contractions and two-spin correlators.
//!
//! Conventions: `sigma^z_j = 1 - 2 c†_j c_j` (spin up is the empty site),
//! `c_j = N^{-1/2} sum_k e^{ikj} c_k`, and the Majorana pair
//! `A_j = c†_j + c_j`, `B_j = c†_j - c_j` (so `A^2 = 1`, `B^2 = -1` and
//! `sigma^z_j = A_j B_j`). The pair state `|1⟩` of a mode is
//! `c†_-k c†_k |0⟩`, which is the ordering that gives the pair Hamiltonian
//! `-h_k sigma^z + Delta_k sigma^y`. Each mode contributes its pair occupation
//! `n_k = <c†_k c_k>` and anomalous moment `g_k = <c_k c_-k>`; everything in
//! real space follows from those two numbers.

use crate::evolve::{ModeState, SecondMoments};
use crate::model::{BlochAngle, Mode};
use crate::{Error, Result, C64};

/// One Majorana operator on a lattice site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Majorana {
    A(i64),
    B(i64),
}

impl Majorana {
    fn site(self) -> i64 {
        match self {
            Majorana::A(s) | Majorana::B(s) => s,
        }
    }
}

/// Occupation and anomalous moment of one `(k, -k)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMoments {
    pub n: f64,
    pub g: C64,
}

impl PairMoments {
    /// Rebuilds the pair density matrix from the amplitudes measured in the
    /// eigenbasis at field `h`.
    pub fn from_amplitudes(mode: &Mode, h: f64, u_abs2: f64, vu_conj: C64) -> Self {
        let angle = BlochAngle::new(mode, h);
        let (g, e) = (angle.ground(), angle.excited());
        let rho = g * g.adjoint() * C64::from(1.0 - u_abs2)
            + e * e.adjoint() * C64::from(u_abs2)
            + g * e.adjoint() * vu_conj
            + e * g.adjoint() * vu_conj.conj();
        Self { n: rho[(1, 1)].re, g: rho[(1, 0)] }
    }

    pub fn from_state(state: &ModeState) -> Self {
        Self { n: state.rho[(1, 1)].re, g: state.rho[(1, 0)] }
    }
}

/// Neumaier-compensated sum in iteration order.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Translation-invariant Majorana two-point functions for separations
/// `-r_max..=r_max`: `aa(r) = <A_l A_{l+r}>`, `bb(r) = <B_l B_{l+r}>`,
/// `ab(r) = <A_l B_{l+r}>`; `ba` follows from `{A_i, B_j} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionTable {
    r_max: usize,
    aa: Vec<C64>,
    bb: Vec<C64>,
    ab: Vec<C64>,
    g0: f64,
    n: usize,
    ks: Vec<f64>,
    /// Noise covariance of the Bloch vectors, `[k][q]`, when four-point
    /// functions are averaged exactly.
    cov: Option<Vec<Vec<[[f64; 3]; 3]>>>,
}

impl ContractionTable {
    /// `moments` must cover the full positive half of the grid of a chain of
    /// `n` sites, in any order matching `modes`.
    pub fn from_moments(modes: &[Mode], moments: &[PairMoments], n: usize, r_max: usize) -> Self {
        assert_eq!(modes.len(), moments.len());
        let scale = 4.0 / n as f64;
        let len = 2 * r_max + 1;
        let (mut aa, mut bb, mut ab) = (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len));
        for r in -(r_max as i64)..=(r_max as i64) {
            let rf = r as f64;
            let delta = if r == 0 { 1.0 } else { 0.0 };
            let pair_sin = compensated_sum(
                modes.iter().zip(moments).map(|(m, p)| p.g.re * (m.k * rf).sin()),
            );
            let hop = compensated_sum(modes.iter().zip(moments).map(|(m, p)| {
                let (s, c) = (m.k * rf).sin_cos();
                p.n * c + p.g.im * s
            }));
            aa.push(C64::new(delta, -scale * pair_sin));
            bb.push(C64::new(-delta, -scale * pair_sin));
            ab.push(C64::new(delta - scale * hop, 0.0));
        }
        let g0 = compensated_sum(moments.iter().map(|p| p.n)) * 2.0 / n as f64;
        let ks = modes.iter().map(|m| m.k).collect();
        Self { r_max, aa, bb, ab, g0, n, ks, cov: None }
    }

    /// Switches four-point strings to exact noise averaging: the product of
    /// two contractions picks up the covariance of the underlying mode
    /// moments. `states` are the averaged states the table was built from.
    pub fn with_second_moments(mut self, second: &SecondMoments, states: &[ModeState]) -> Self {
        let means: Vec<[f64; 3]> = states.iter().map(|s| s.bloch()).collect();
        let m = means.len();
        assert_eq!(second.modes, m);
        let cov = (0..m)
            .map(|k| {
                (0..m)
                    .map(|q| {
                        let mut c = second.get(k, q);
                        for a in 0..3 {
                            for b in 0..3 {
                                c[a][b] -= means[k][a] * means[q][b];
                            }
                        }
                        c
                    })
                    .collect()
            })
            .collect();
        self.cov = Some(cov);
        self
    }

    pub fn is_noise_exact(&self) -> bool {
        self.cov.is_some()
    }

    /// Derivative of `<x y>` with respect to the Bloch vector of each mode,
    /// using `n_k = (1 - z) / 2` and `g_k = (x + i y) / 2`.
    fn weights(&self, x: Majorana, y: Majorana) -> Vec<[C64; 3]> {
        let r = (y.site() - x.site()) as f64;
        let c = 2.0 / self.n as f64;
        let zero = C64::new(0.0, 0.0);
        self.ks
            .iter()
            .map(|&k| {
                let (s, co) = (k * r).sin_cos();
                match (x, y) {
                    (Majorana::A(_), Majorana::A(_)) | (Majorana::B(_), Majorana::B(_)) => {
                        [C64::new(0.0, -c * s), zero, zero]
                    }
                    (Majorana::A(_), Majorana::B(_)) => [zero, C64::from(-c * s), C64::from(c * co)],
                    (Majorana::B(_), Majorana::A(_)) => [zero, C64::from(-c * s), C64::from(-c * co)],
                }
            })
            .collect()
    }

    /// `E[<w> <x y>] - E[<w>] E[<x y>]` over the noise.
    fn covariance(&self, cov: &[Vec<[[f64; 3]; 3]>], p: (Majorana, Majorana), q: (Majorana, Majorana)) -> C64 {
        let wp = self.weights(p.0, p.1);
        let wq = self.weights(q.0, q.1);
        let mut acc = C64::new(0.0, 0.0);
        for (k, a) in wp.iter().enumerate() {
            for (l, b) in wq.iter().enumerate() {
                let c = &cov[k][l];
                for i in 0..3 {
                    for j in 0..3 {
                        acc += a[i] * b[j] * c[i][j];
                    }
                }
            }
        }
        acc
    }

    /// Contractions at field `h` from per-mode amplitudes.
    pub fn from_states(modes: &[Mode], states: &[ModeState], h: f64, n: usize, r_max: usize) -> Self {
        let moments: Vec<PairMoments> = modes
            .iter()
            .zip(states)
            .map(|(m, s)| PairMoments::from_amplitudes(m, h, s.u_abs2, s.vu_conj))
            .collect();
        Self::from_moments(modes, &moments, n, r_max)
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    fn idx(&self, r: i64) -> Result<usize> {
        if r.unsigned_abs() as usize > self.r_max {
            return Err(Error::OutOfTable { r, max: self.r_max });
        }
        Ok((r + self.r_max as i64) as usize)
    }

    pub fn aa(&self, r: i64) -> Result<C64> {
        Ok(self.aa[self.idx(r)?])
    }

    pub fn bb(&self, r: i64) -> Result<C64> {
        Ok(self.bb[self.idx(r)?])
    }

    pub fn ab(&self, r: i64) -> Result<C64> {
        Ok(self.ab[self.idx(r)?])
    }

    /// `<B_l A_{l+r}> = -<A_{l+r} B_l>`.
    pub fn ba(&self, r: i64) -> Result<C64> {
        Ok(-self.ab(-r)?)
    }

    /// `<x y>` for two Majoranas in that order.
    pub fn pair(&self, x: Majorana, y: Majorana) -> Result<C64> {
        let r = y.site() - x.site();
        match (x, y) {
            (Majorana::A(_), Majorana::A(_)) => self.aa(r),
            (Majorana::B(_), Majorana::B(_)) => self.bb(r),
            (Majorana::A(_), Majorana::B(_)) => self.ab(r),
            (Majorana::B(_), Majorana::A(_)) => self.ba(r),
        }
    }

    /// `<c†_l c_l>`, the filling per site.
    pub fn filling(&self) -> f64 {
        self.g0
    }
}

/// Pfaffian of an antisymmetric matrix (row-major, `n x n`) by expansion
/// along the first row; intended for `n <= 8`.
pub fn pfaffian(m: &[C64], n: usize) -> C64 {
    fn rec(m: &[C64], n: usize, idx: &[usize]) -> C64 {
        match idx.len() {
            0 => C64::new(1.0, 0.0),
            2 => m[idx[0] * n + idx[1]],
            _ => {
                let first = idx[0];
                let mut acc = C64::new(0.0, 0.0);
                for j in 1..idx.len() {
                    let rest: Vec<usize> =
                        idx[1..].iter().copied().filter(|&x| x != idx[j]).collect();
                    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                    acc += m[first * n + idx[j]] * rec(m, n, &rest) * sign;
                }
                acc
            }
        }
    }
    let idx: Vec<usize> = (0..n).collect();
    rec(m, n, &idx)
}

/// Wick expansion of `<x_1 x_2 ... x_{2p}>` as the Pfaffian of the ordered
/// contraction matrix. With exact noise averaging each product of two
/// contractions also carries their noise covariance.
pub fn wick_string(table: &ContractionTable, string: &[Majorana]) -> Result<C64> {
    let n = string.len();
    if n % 2 == 1 {
        return Err(Error::OddString(n));
    }
    if let Some(cov) = &table.cov {
        if n > 4 {
            return Err(Error::LongString(n));
        }
        if n == 4 {
            let s = string;
            let pf = table.pair(s[0], s[1])? * table.pair(s[2], s[3])?
                - table.pair(s[0], s[2])? * table.pair(s[1], s[3])?
                + table.pair(s[0], s[3])? * table.pair(s[1], s[2])?;
            let corr = table.covariance(cov, (s[0], s[1]), (s[2], s[3]))
                - table.covariance(cov, (s[0], s[2]), (s[1], s[3]))
                + table.covariance(cov, (s[0], s[3]), (s[1], s[2]));
            return Ok(pf + corr);
        }
    }
    let mut m = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = table.pair(string[i], string[j])?;
            m[i * n + j] = c;
            m[j * n + i] = -c;
        }
    }
    Ok(pfaffian(&m, n))
}

/// Spin correlators `<s^a_1 s^b_{1+r}>` (with `s = sigma / 2`) at one separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCorrelators {
    pub r: usize,
    pub sxx: C64,
    pub syy: C64,
    pub szz: C64,
    pub sxy: C64,
    pub syx: C64,
}

impl PairCorrelators {
    pub fn max_imag(&self) -> f64 {
        [self.sxx, self.syy, self.szz, self.sxy, self.syx]
            .iter()
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }
}

/// Correlators for `r = 1, 2` plus the transverse magnetization `<s^z>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinCorrelators {
    pub mz: f64,
    pub pairs: [PairCorrelators; 2],
}

impl SpinCorrelators {
    pub fn at(&self, r: usize) -> &PairCorrelators {
        &self.pairs[r - 1]
    }
}

use Majorana::{A, B};

/// `sigma^x_1 sigma^x_{1+r} = B_1 A_2 B_2 ... A_r B_r A_{r+1}`.
pub fn xx_string(r: i64) -> Vec<Majorana> {
    let mut s = vec![B(1)];
    for j in 2..=r {
        s.extend([A(j), B(j)]);
    }
    s.push(A(r + 1));
    s
}

/// `sigma^y_1 sigma^y_{1+r} = (-1)^r A_1 B_2 A_2 ... B_r A_r B_{r+1}`.
pub fn yy_string(r: i64) -> Vec<Majorana> {
    let mut s = vec![A(1)];
    for j in 2..=r {
        s.extend([B(j), A(j)]);
    }
    s.push(B(r + 1));
    s
}

/// `sigma^z_1 sigma^z_{1+r} = A_1 B_1 A_{r+1} B_{r+1}`.
pub fn zz_string(r: i64) -> Vec<Majorana> {
    vec![A(1), B(1), A(r + 1), B(r + 1)]
}

/// `sigma^x_1 sigma^y_{1+r} = i B_1 A_2 B_2 ... A_r B_r B_{r+1}`.
pub fn xy_string(r: i64) -> Vec<Majorana> {
    let mut s = vec![B(1)];
    for j in 2..=r {
        s.extend([A(j), B(j)]);
    }
    s.push(B(r + 1));
    s
}

/// `sigma^y_1 sigma^x_{1+r} = i A_1 A_2 B_2 ... A_r B_r A_{r+1}`.
pub fn yx_string(r: i64) -> Vec<Majorana> {
    let mut s = vec![A(1)];
    for j in 2..=r {
        s.extend([A(j), B(j)]);
    }
    s.push(A(r + 1));
    s
}

pub fn pair_correlators(table: &ContractionTable, r: usize) -> Result<PairCorrelators> {
    let ri = r as i64;
    let q = C64::new(0.25, 0.0);
    let iq = C64::new(0.0, 0.25);
    let parity = if r % 2 == 0 { 1.0 } else { -1.0 };
    Ok(PairCorrelators {
        r,
        sxx: q * wick_string(table, &xx_string(ri))?,
        syy: q * parity * wick_string(table, &yy_string(ri))?,
        szz: q * wick_string(table, &zz_string(ri))?,
        sxy: iq * wick_string(table, &xy_string(ri))?,
        syx: iq * wick_string(table, &yx_string(ri))?,
    })
}

pub fn spin_correlators(table: &ContractionTable) -> Result<SpinCorrelators> {
    Ok(SpinCorrelators {
        mz: 0.5 - table.filling(),
        pairs: [pair_correlators(table, 1)?, pair_correlators(table, 2)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::ground_state;
    use crate::model::{momentum_grid, ChainSpec};

    fn ground_table(n: usize, h: f64, r_max: usize) -> (ContractionTable, Vec<Mode>) {
        let spec = ChainSpec::new(n, 1.0, -30.0, 30.0).unwrap();
        let modes = momentum_grid(&spec);
        let states: Vec<ModeState> = modes.iter().map(|m| ground_state(m, h, 0.0)).collect();
        (ContractionTable::from_states(&modes, &states, h, n, r_max), modes)
    }

    #[test]
    fn equilibrium_aa_bb_are_deltas() {
        let (t, _) = ground_table(20, 0.7, 3);
        for r in -3..=3 {
            let d = if r == 0 { 1.0 } else { 0.0 };
            assert!((t.aa(r).unwrap() - d).norm() == 0.0);
            assert!((t.bb(r).unwrap() + d).norm() == 0.0);
        }
    }

    #[test]
    fn anticommutation_relations() {
        let spec = ChainSpec::ising(12).unwrap();
        let modes = momentum_grid(&spec);
        let moments: Vec<PairMoments> = modes
            .iter()
            .enumerate()
            .map(|(i, _)| PairMoments { n: 0.1 + 0.05 * i as f64, g: C64::new(0.2 - 0.03 * i as f64, 0.1) })
            .collect();
        let t = ContractionTable::from_moments(&modes, &moments, 12, 2);
        for r in -2..=2i64 {
            let d = if r == 0 { 2.0 } else { 0.0 };
            assert!((t.aa(-r).unwrap() + t.aa(r).unwrap() - d).norm() < 1e-15);
            assert!((t.bb(-r).unwrap() + t.bb(r).unwrap() + d).norm() < 1e-15);
        }
        assert!(t.aa(3).is_err());
    }

    #[test]
    fn ground_state_ab0_at_large_field() {
        // independent finite sum: (2/N) sum cos(theta_k), theta_k = atan2(sin k, h - cos k)
        let n = 200;
        let h = 30.0;
        let direct: f64 = (1..=n / 2)
            .map(|m| {
                let k = (2 * m - 1) as f64 * std::f64::consts::PI / n as f64;
                (k.sin().atan2(h - k.cos())).cos()
            })
            .sum::<f64>()
            * 2.0
            / n as f64;
        let (t, _) = ground_table(n, h, 2);
        assert!((t.ab(0).unwrap().re - direct).abs() < 1e-13);
        assert!((direct - 0.999722).abs() < 1e-6, "{direct}");
    }

    #[test]
    fn post_quench_cosine_sum() {
        // theta = 0 eigenbasis with only populations p_k
        let n = 16;
        let spec = ChainSpec::ising(n).unwrap();
        let modes = momentum_grid(&spec);
        let p: Vec<f64> = modes.iter().map(|m| (-std::f64::consts::PI * m.k.sin().powi(2)).exp()).collect();
        let moments: Vec<PairMoments> = modes
            .iter()
            .zip(&p)
            .map(|(m, &pk)| PairMoments::from_amplitudes(m, 1e12, pk, C64::new(0.0, 0.0)))
            .collect();
        let t = ContractionTable::from_moments(&modes, &moments, n, 2);
        for r in 0..=2i64 {
            let want: f64 = modes
                .iter()
                .zip(&p)
                .map(|(m, pk)| (1.0 - 2.0 * pk) * (m.k * r as f64).cos())
                .sum::<f64>()
                * 2.0
                / n as f64;
            assert!((t.ab(r).unwrap().re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_from_amplitudes_match_state() {
        let mode = Mode::new(0.7, 1.0);
        let s = crate::evolve::ModeState::from_bloch([0.3, -0.2, 0.5], 0.0).with_amplitudes(&mode, 0.4);
        let a = PairMoments::from_amplitudes(&mode, 0.4, s.u_abs2, s.vu_conj);
        let b = PairMoments::from_state(&s);
        assert!((a.n - b.n).abs() < 1e-14 && (a.g - b.g).norm() < 1e-14);
    }

    #[test]
    fn wick_rules() {
        let (t, _) = ground_table(10, 0.4, 3);
        let s2 = [B(1), A(2)];
        assert_eq!(wick_string(&t, &s2).unwrap(), t.ba(1).unwrap());

        let s4 = [B(1), A(2), B(2), A(3)];
        let want = t.ba(1).unwrap() * t.ba(1).unwrap() - t.bb(1).unwrap() * t.aa(1).unwrap()
            + t.ba(2).unwrap() * t.ab(0).unwrap();
        assert!((wick_string(&t, &s4).unwrap() - want).norm() < 1e-15);

        // equilibrium: AA/BB vanish off-site
        let s = [A(1), B(1), A(2), B(2)];
        let want = t.ab(0).unwrap() * t.ab(0).unwrap() + t.ab(1).unwrap() * t.ba(1).unwrap();
        assert!((wick_string(&t, &s).unwrap() - want).norm() < 1e-15);

        assert!(matches!(wick_string(&t, &[A(1), B(1), A(2)]), Err(Error::OddString(3))));
    }

    #[test]
    fn pfaffian_six() {
        // block-diagonal antisymmetric: Pf = product of the blocks
        let n = 6;
        let mut m = vec![C64::new(0.0, 0.0); n * n];
        for (b, v) in [(0usize, 2.0), (2, -3.0), (4, 0.5)] {
            m[b * n + b + 1] = C64::from(v);
            m[(b + 1) * n + b] = C64::from(-v);
        }
        assert!((pfaffian(&m, n) - C64::from(-3.0)).norm() < 1e-15);
    }

    #[test]
    fn polarized_limit() {
        let (t, _) = ground_table(40, 1e14, 2);
        let c = spin_correlators(&t).unwrap();
        assert!((c.mz - 0.5).abs() < 1e-12);
        for r in 1..=2 {
            let p = c.at(r);
            assert!((p.szz.re - 0.25).abs() < 1e-12);
            for v in [p.sxx, p.syy, p.sxy, p.syx] {
                assert!(v.norm() < 1e-12);
            }
        }
    }
}
