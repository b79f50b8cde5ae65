//! Two-spin reduced density matrix in X form, its eigensystem and square root.
//!
//! Basis order is `{↑↑, ↑↓, ↓↑, ↓↓}` with the first site as the first qubit
//! and `↑ = |0⟩`.

use nalgebra::{Matrix4, Vector4};

use crate::fermion_corr::SpinCorrelators;
use crate::{Error, Result, C64};

/// Negative eigenvalues down to this are treated as round-off and clamped.
pub const CLAMP_TOL: f64 = 1e-9;

/// Where a state came from: ramp time `tau`, noise `xi`, field `h`, time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Snapshot {
    pub tau: f64,
    pub xi: f64,
    pub h: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpinRDM {
    pub rho11: f64,
    pub rho22: f64,
    pub rho33: f64,
    pub rho44: f64,
    pub rho14: C64,
    pub rho23: C64,
    pub r: usize,
    pub snapshot: Snapshot,
}

impl TwoSpinRDM {
    pub fn from_entries(d: [f64; 4], rho14: C64, rho23: C64) -> Self {
        Self {
            rho11: d[0],
            rho22: d[1],
            rho33: d[2],
            rho44: d[3],
            rho14,
            rho23,
            r: 0,
            snapshot: Snapshot::default(),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self::from_entries([0.25; 4], C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    /// Keeps only the X entries of a dense matrix.
    pub fn from_matrix(m: &Matrix4<C64>) -> Self {
        Self::from_entries(
            [m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(3, 3)].re],
            m[(0, 3)],
            m[(1, 2)],
        )
    }

    pub fn with_snapshot(mut self, snapshot: Snapshot) -> Self {
        self.snapshot = snapshot;
        self
    }

    pub fn trace(&self) -> f64 {
        self.rho11 + self.rho22 + self.rho33 + self.rho44
    }

    pub fn to_matrix(&self) -> Matrix4<C64> {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = self.rho11.into();
        m[(1, 1)] = self.rho22.into();
        m[(2, 2)] = self.rho33.into();
        m[(3, 3)] = self.rho44.into();
        m[(0, 3)] = self.rho14;
        m[(3, 0)] = self.rho14.conj();
        m[(1, 2)] = self.rho23;
        m[(2, 1)] = self.rho23.conj();
        m
    }

    pub fn purity(&self) -> f64 {
        let d = [self.rho11, self.rho22, self.rho33, self.rho44];
        d.iter().map(|x| x * x).sum::<f64>() + 2.0 * (self.rho14.norm_sqr() + self.rho23.norm_sqr())
    }

    /// Smallest eigenvalue of the two blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        let (lo, _) = block_eigenvalues(self.rho11, self.rho44, self.rho14);
        let (lo2, _) = block_eigenvalues(self.rho22, self.rho33, self.rho23);
        lo.min(lo2)
    }

    pub fn check_positive(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -CLAMP_TOL {
            return Err(Error::NotPositive(format!(
                "two-spin state at r = {} has eigenvalue {min:.3e}",
                self.r
            )));
        }
        Ok(())
    }
}

/// Builds the state at separation `r` from one-snapshot correlators.
pub fn assemble_rdm(corr: &SpinCorrelators, r: usize) -> Result<TwoSpinRDM> {
    if !(1..=2).contains(&r) {
        return Err(Error::OutOfTable { r: r as i64, max: 2 });
    }
    let c = corr.at(r);
    let (mz, szz) = (corr.mz, c.szz.re);
    let i = C64::i();
    let mut rdm = TwoSpinRDM::from_entries(
        [0.25 + mz + szz, 0.25 - szz, 0.25 - szz, 0.25 - mz + szz],
        c.sxx - c.syy - i * (c.sxy + c.syx),
        c.sxx + c.syy + i * (c.sxy - c.syx),
    );
    rdm.r = r;
    rdm.check_positive()?;
    Ok(rdm)
}

fn block_eigenvalues(a: f64, b: f64, c: C64) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let d = (0.5 * (a - b)).hypot(c.norm());
    (m - d, m + d)
}

/// Eigenpairs of `[[a, c], [c*, b]]`, ascending.
fn block_eigensystem(a: f64, b: f64, c: C64) -> [(f64, [C64; 2]); 2] {
    let (lo, hi) = block_eigenvalues(a, b, c);
    let scale = a.abs().max(b.abs()).max(c.norm()).max(f64::MIN_POSITIVE);
    if hi - lo <= 1e-14 * scale {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        return [(lo, [one, zero]), (hi, [zero, one])];
    }
    let vec = |l: f64| {
        let v1 = [c, C64::from(l - a)];
        let v2 = [C64::from(l - b), c.conj()];
        let n1 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
        let n2 = (v2[0].norm_sqr() + v2[1].norm_sqr()).sqrt();
        if n1 >= n2 {
            [v1[0] / n1, v1[1] / n1]
        } else {
            [v2[0] / n2, v2[1] / n2]
        }
    };
    [(lo, vec(lo)), (hi, vec(hi))]
}

/// Entries of the square root in the same X layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtEntries {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: C64,
    pub nu: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RDMEigensystem {
    /// Outer-block pair first, then the inner block; each pair ascending.
    pub p: [f64; 4],
    pub vectors: [Vector4<C64>; 4],
    pub sqrt_entries: SqrtEntries,
}

impl RDMEigensystem {
    pub fn reconstruct(&self) -> Matrix4<C64> {
        self.synthesize(|p| p)
    }

    pub fn sqrt_matrix(&self) -> Matrix4<C64> {
        self.synthesize(f64::sqrt)
    }

    fn synthesize(&self, f: impl Fn(f64) -> f64) -> Matrix4<C64> {
        let mut m = Matrix4::zeros();
        for (p, v) in self.p.iter().zip(&self.vectors) {
            m += v * v.adjoint() * C64::from(f(*p));
        }
        m
    }
}

pub fn eigensystem(rdm: &TwoSpinRDM) -> Result<RDMEigensystem> {
    let outer = block_eigensystem(rdm.rho11, rdm.rho44, rdm.rho14);
    let inner = block_eigensystem(rdm.rho22, rdm.rho33, rdm.rho23);
    let zero = C64::new(0.0, 0.0);
    let mut p = [0.0; 4];
    let mut vectors = [Vector4::zeros(); 4];
    for (i, (l, v)) in outer.iter().enumerate() {
        p[i] = *l;
        vectors[i] = Vector4::new(v[0], zero, zero, v[1]);
    }
    for (i, (l, v)) in inner.iter().enumerate() {
        p[2 + i] = *l;
        vectors[2 + i] = Vector4::new(zero, v[0], v[1], zero);
    }
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -CLAMP_TOL {
        return Err(Error::NotPositive(format!("eigenvalue {min:.3e} below clamp tolerance")));
    }
    for x in &mut p {
        *x = x.max(0.0);
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(Error::NotPositive("zero trace".into()));
    }
    for x in &mut p {
        *x /= total;
    }

    let block_sqrt = |pairs: &[(f64, [C64; 2]); 2], ps: [f64; 2]| {
        let mut s = [[zero; 2]; 2];
        for ((_, v), pk) in pairs.iter().zip(ps) {
            let w = pk.sqrt();
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] += v[i] * v[j].conj() * w;
                }
            }
        }
        s
    };
    let so = block_sqrt(&outer, [p[0], p[1]]);
    let si = block_sqrt(&inner, [p[2], p[3]]);
    let sqrt_entries = SqrtEntries {
        alpha: so[0][0].re,
        beta: si[0][0].re,
        gamma: si[1][1].re,
        delta: so[1][1].re,
        lambda: so[0][1],
        nu: si[0][1],
    };
    Ok(RDMEigensystem { p, vectors, sqrt_entries })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::fermion_corr::PairCorrelators;
    use proptest::prelude::*;

    fn max_diff(a: &Matrix4<C64>, b: &Matrix4<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn corr(mz: f64, szz: f64) -> SpinCorrelators {
        let z = C64::new(0.0, 0.0);
        let pc = |r| PairCorrelators { r, sxx: z, syy: z, szz: C64::from(szz), sxy: z, syx: z };
        SpinCorrelators { mz, pairs: [pc(1), pc(2)] }
    }

    #[test]
    fn product_and_mixed_states() {
        let down = assemble_rdm(&corr(-0.5, 0.25), 1).unwrap();
        assert_eq!([down.rho11, down.rho22, down.rho33, down.rho44], [0.0, 0.0, 0.0, 1.0]);
        let mixed = assemble_rdm(&corr(0.0, 0.0), 2).unwrap();
        assert_eq!(mixed, TwoSpinRDM { r: 2, ..TwoSpinRDM::maximally_mixed() });
        assert!(assemble_rdm(&corr(0.0, 0.0), 3).is_err());
        // szz > 1/4 drives the inner block negative
        assert!(assemble_rdm(&corr(0.0, 0.3), 1).is_err());
    }

    #[test]
    fn mixed_and_projector_spectra() {
        let e = eigensystem(&TwoSpinRDM::maximally_mixed()).unwrap();
        assert!(e.p.iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert!(max_diff(&e.sqrt_matrix(), &(Matrix4::identity() * C64::from(0.5))) < 1e-15);

        let proj = TwoSpinRDM::from_entries([0.0, 0.0, 0.0, 1.0], 0.0.into(), 0.0.into());
        let e = eigensystem(&proj).unwrap();
        let mut p = e.p;
        p.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(p, [1.0, 0.0, 0.0, 0.0]);
        assert!(max_diff(&e.sqrt_matrix(), &proj.to_matrix()) < 1e-15);
    }

    #[test]
    fn bell_block() {
        let bell = TwoSpinRDM::from_entries([0.5, 0.0, 0.0, 0.5], 0.5.into(), 0.0.into());
        let e = eigensystem(&bell).unwrap();
        assert!(e.p[0].abs() < 1e-15 && (e.p[1] - 1.0).abs() < 1e-15);
        assert!(max_diff(&e.sqrt_matrix(), &bell.to_matrix()) < 1e-15);
    }

    #[test]
    fn small_negative_clamped_large_rejected() {
        let s = TwoSpinRDM::from_entries([0.5, 0.0, 0.0, 0.5], C64::new(0.5 + 4e-10, 0.0), 0.0.into());
        let e = eigensystem(&s).unwrap();
        assert!(e.p.iter().all(|&p| p >= 0.0));
        assert!((e.p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let bad = TwoSpinRDM::from_entries([0.5, 0.0, 0.0, 0.5], C64::new(0.6, 0.0), 0.0.into());
        assert!(eigensystem(&bad).is_err());
    }

    #[test]
    fn degenerate_block_is_finite() {
        let s = TwoSpinRDM::from_entries([0.3, 0.2, 0.2, 0.3], 0.0.into(), 0.0.into());
        let e = eigensystem(&s).unwrap();
        let sq = e.sqrt_matrix();
        assert!(max_diff(&(sq * sq), &s.to_matrix()) < 1e-14);
    }

    pub(crate) fn x_state() -> impl Strategy<Value = TwoSpinRDM> {
        (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, -3.2..3.2f64, 0.0..1.0f64, -3.2..3.2f64)
            .prop_map(|(a, b, d, r14, ph14, r23, ph23)| {
                let tot = a + 2.0 * b + d + 1e-12;
                let (a, b, d) = (a / tot, b / tot, d / tot);
                let m14 = r14 * (a * d).sqrt();
                let m23 = r23 * b;
                TwoSpinRDM::from_entries(
                    [a, b, b, d],
                    C64::from_polar(m14, ph14),
                    C64::from_polar(m23, ph23),
                )
            })
    }

    proptest! {
        #[test]
        fn reconstruction_and_sqrt(s in x_state()) {
            let e = eigensystem(&s).unwrap();
            prop_assert!((e.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..4 {
                for j in 0..4 {
                    let ip = (e.vectors[i].adjoint() * e.vectors[j])[(0, 0)];
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((ip - want).norm() < 1e-10);
                }
            }
            let m = s.to_matrix();
            prop_assert!(max_diff(&e.reconstruct(), &m) < 1e-10);
            let sq = e.sqrt_matrix();
            prop_assert!(max_diff(&(sq * sq), &m) < 1e-9);
            let x = e.sqrt_entries;
            prop_assert!((sq[(0, 0)].re - x.alpha).abs() < 1e-14);
            prop_assert!((sq[(0, 3)] - x.lambda).norm() < 1e-14);
            prop_assert!((sq[(1, 2)] - x.nu).norm() < 1e-14);
            for (i, j) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
                prop_assert!(sq[(i, j)].norm() < 1e-12);
            }
        }
    }
}
