//! Quantum Fisher information under local generators and local quantum
//! coherence (Wigner-Yanase skew information of `sigma^a ⊗ I`).

use nalgebra::{Matrix2, Matrix4};

use crate::model::{sigma_x, sigma_y, sigma_z};
use crate::rdm::{eigensystem, RDMEigensystem, Snapshot, TwoSpinRDM};
use crate::{Result, C64};

/// Pairs whose population sum is at or below this contribute nothing.
pub const QFI_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn pauli(self) -> Matrix2<C64> {
        match self {
            Axis::X => sigma_x(),
            Axis::Y => sigma_y(),
            Axis::Z => sigma_z(),
        }
    }
}

/// `sigma^a ⊗ I` on the first spin.
pub fn first_spin(axis: Axis) -> Matrix4<C64> {
    axis.pauli().kronecker(&Matrix2::identity())
}

/// `(sigma^a ⊗ I + I ⊗ sigma^a) / sqrt 2`.
pub fn local_generator(axis: Axis) -> Matrix4<C64> {
    let s = axis.pauli();
    let id = Matrix2::<C64>::identity();
    (s.kronecker(&id) + id.kronecker(&s)) * C64::from(std::f64::consts::FRAC_1_SQRT_2)
}

/// `F = 2 sum (p_m - p_n)^2 / (p_m + p_n) |<m|O|n>|^2`.
pub fn qfi_single(eig: &RDMEigensystem, o: &Matrix4<C64>) -> f64 {
    let mut f = 0.0;
    for m in 0..4 {
        for n in 0..4 {
            let (pm, pn) = (eig.p[m], eig.p[n]);
            if pm + pn <= QFI_EPS || m == n {
                continue;
            }
            let elem = (eig.vectors[m].adjoint() * o * eig.vectors[n])[(0, 0)];
            f += (pm - pn).powi(2) / (pm + pn) * elem.norm_sqr();
        }
    }
    2.0 * f
}

/// Sum of `qfi_single` over the x, y, z local generators.
pub fn qfi_total(eig: &RDMEigensystem) -> f64 {
    Axis::ALL.iter().map(|&a| qfi_single(eig, &local_generator(a))).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lqc {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Lqc {
    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }
}

/// Closed form in the square-root entries, valid for any X state.
pub fn lqc(eig: &RDMEigensystem) -> Lqc {
    let s = eig.sqrt_entries;
    let diag = s.alpha * s.gamma + s.beta * s.delta;
    let coh = 4.0 * (s.lambda * s.nu).re;
    Lqc {
        x: 1.0 - 2.0 * diag - coh,
        y: 1.0 - 2.0 * diag + coh,
        z: 1.0
            - (s.alpha.powi(2) + s.beta.powi(2) + s.gamma.powi(2) + s.delta.powi(2)
                - 2.0 * (s.lambda.norm_sqr() + s.nu.norm_sqr())),
    }
}

/// `-1/2 Tr [sqrt rho, sigma^a ⊗ I]^2` evaluated directly.
pub fn lqc_commutator(eig: &RDMEigensystem, axis: Axis) -> f64 {
    let s = eig.sqrt_matrix();
    let v = first_spin(axis);
    let c = s * v - v * s;
    -0.5 * (c * c).trace().re
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeasureResult {
    pub qfi: f64,
    pub lqc_x: f64,
    pub lqc_y: f64,
    pub lqc_z: f64,
    pub r: usize,
    pub snapshot: Snapshot,
}

pub fn measure(rdm: &TwoSpinRDM) -> Result<MeasureResult> {
    let eig = eigensystem(rdm)?;
    let l = lqc(&eig);
    Ok(MeasureResult {
        qfi: qfi_total(&eig),
        lqc_x: l.x,
        lqc_y: l.y,
        lqc_z: l.z,
        r: rdm.r,
        snapshot: rdm.snapshot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdm::tests::x_state;
    use nalgebra::{SymmetricEigen, Vector4};
    use proptest::prelude::*;

    fn zero() -> C64 {
        C64::new(0.0, 0.0)
    }

    fn eig(s: &TwoSpinRDM) -> RDMEigensystem {
        eigensystem(s).unwrap()
    }

    /// The pair-sum definition on a dense eigendecomposition.
    fn brute_qfi(rho: &Matrix4<C64>, o: &Matrix4<C64>) -> f64 {
        let e = SymmetricEigen::new(*rho);
        let mut f = 0.0;
        for m in 0..4 {
            for n in 0..4 {
                let (pm, pn) = (e.eigenvalues[m], e.eigenvalues[n]);
                if pm + pn > QFI_EPS {
                    let el = (e.eigenvectors.column(m).adjoint() * o * e.eigenvectors.column(n))[(0, 0)];
                    f += (pm - pn).powi(2) / (pm + pn) * el.norm_sqr();
                }
            }
        }
        2.0 * f
    }

    fn variance(psi: &Vector4<C64>, o: &Matrix4<C64>) -> f64 {
        let m = (psi.adjoint() * o * psi)[(0, 0)].re;
        let m2 = (psi.adjoint() * o * o * psi)[(0, 0)].re;
        m2 - m * m
    }

    #[test]
    fn mixed_state_vanishes() {
        let e = eig(&TwoSpinRDM::maximally_mixed());
        assert_eq!(qfi_total(&e), 0.0);
        let l = lqc(&e);
        assert!(l.x.abs() < 1e-15 && l.y.abs() < 1e-15 && l.z.abs() < 1e-15);
    }

    #[test]
    fn product_state() {
        let s = TwoSpinRDM::from_entries([1.0, 0.0, 0.0, 0.0], zero(), zero());
        let e = eig(&s);
        assert!((qfi_total(&e) - 8.0).abs() < 1e-12);
        assert!((qfi_single(&e, &local_generator(Axis::Z))).abs() < 1e-12);
        let l = lqc(&e);
        assert!((l.x - 1.0).abs() < 1e-12 && (l.y - 1.0).abs() < 1e-12 && l.z.abs() < 1e-12);
    }

    #[test]
    fn bell_state_total_is_sixteen() {
        // O_x and O_z each have variance 2, O_y has none
        let s = TwoSpinRDM::from_entries([0.5, 0.0, 0.0, 0.5], 0.5.into(), zero());
        let e = eig(&s);
        let parts: Vec<f64> = Axis::ALL.iter().map(|&a| qfi_single(&e, &local_generator(a))).collect();
        assert!((parts[0] - 8.0).abs() < 1e-12 && parts[1].abs() < 1e-12 && (parts[2] - 8.0).abs() < 1e-12);
        assert!((qfi_total(&e) - 16.0).abs() < 1e-12);
        assert!((brute_qfi(&s.to_matrix(), &local_generator(Axis::X)) - 8.0).abs() < 1e-10);
    }

    #[test]
    fn two_level_toy() {
        // diag(3/4, 1/4) on the outer block with sigma^x acting inside it
        let s = TwoSpinRDM::from_entries([0.75, 0.0, 0.0, 0.25], zero(), zero());
        let mut o = Matrix4::zeros();
        o[(0, 3)] = C64::from(1.0);
        o[(3, 0)] = C64::from(1.0);
        assert!((qfi_single(&eig(&s), &o) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn werner_half() {
        let p = 0.5;
        let s = TwoSpinRDM::from_entries(
            [p / 2.0 + (1.0 - p) / 4.0, (1.0 - p) / 4.0, (1.0 - p) / 4.0, p / 2.0 + (1.0 - p) / 4.0],
            C64::from(p / 2.0),
            zero(),
        );
        let e = eig(&s);
        let l = lqc(&e);
        for a in Axis::ALL {
            assert!((l.get(a) - lqc_commutator(&e, a)).abs() < 1e-12);
        }
        // sqrt rho = b I + (a - b)|Phi+><Phi+| with a^2 = 5/8, b^2 = 1/8
        let want = (3.0 - 5f64.sqrt()) / 4.0;
        for a in Axis::ALL {
            assert!((l.get(a) - want).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn closed_form_bounds(s in x_state()) {
            let e = eig(&s);
            let f = qfi_total(&e);
            prop_assert!(f >= -1e-12);
            let l = lqc(&e);
            for a in Axis::ALL {
                let v = l.get(a);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
                prop_assert!((v - lqc_commutator(&e, a)).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn matches_dense_eigendecomposition(s in x_state()) {
            let e = eig(&s);
            for a in Axis::ALL {
                let o = local_generator(a);
                prop_assert!((qfi_single(&e, &o) - brute_qfi(&s.to_matrix(), &o)).abs() < 1e-8);
            }
        }

        #[test]
        fn unitary_covariance(s in x_state(), t1 in -3.0..3.0f64, t2 in -3.0..3.0f64) {
            // local z rotations keep the X form
            let e = eig(&s);
            let o = local_generator(Axis::X);
            let mut u = Matrix4::zeros();
            let ph = [0.0, t2, t1, t1 + t2];
            for (i, p) in ph.iter().enumerate() {
                u[(i, i)] = C64::from_polar(1.0, *p);
            }
            let rho2 = u * s.to_matrix() * u.adjoint();
            let o2 = u * o * u.adjoint();
            let e2 = eig(&TwoSpinRDM::from_matrix(&rho2));
            prop_assert!((qfi_single(&e, &o) - qfi_single(&e2, &o2)).abs() < 1e-9);
        }

        #[test]
        fn pure_state_collapse(a in 0.0..1.0f64, ph in -3.0..3.0f64, inner in proptest::bool::ANY) {
            let (c, s) = (a.sqrt(), (1.0 - a).sqrt());
            let z = zero();
            let psi = if inner {
                Vector4::new(z, C64::from(c), C64::from_polar(s, ph), z)
            } else {
                Vector4::new(C64::from(c), z, z, C64::from_polar(s, ph))
            };
            let rho = TwoSpinRDM::from_matrix(&(psi * psi.adjoint()));
            let e = eig(&rho);
            for ax in Axis::ALL {
                let o = local_generator(ax);
                prop_assert!((qfi_single(&e, &o) - 4.0 * variance(&psi, &o)).abs() < 1e-7);
                prop_assert!((lqc(&e).get(ax) - variance(&psi, &first_spin(ax))).abs() < 1e-7);
            }
        }
    }
}
