//! Rank-one extraction from a relaxed solution.
//!
//! A rank-one `Q` yields its principal eigenvector directly. Otherwise
//! candidates are drawn from `CN(0, Q)` (covariance factored through the
//! eigendecomposition, negative eigenvalues clipped to zero), projected onto
//! the protocol's amplitudes with the last entry pinned to 1, and filtered by
//! the energy requirement. The candidate with the largest side ratio wins.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::lifted::{quad_form, SideData};
use super::{OptimizerSettings, ENERGY_TOL};
use crate::error::{Error, Result};

/// Negative eigenvalue (relative to the largest) tolerated in the input.
const PSD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// Lifted vector with last entry 1.
    pub q: DVector<Complex64>,
    /// Whether `q` meets the energy requirement.
    pub feasible: bool,
    /// Whether the relaxed solution was numerically rank one.
    pub rank_one: bool,
    /// Side ratio at `q`.
    pub ratio: f64,
}

/// Forces amplitudes to `amplitudes` (unit when `None`) and rotates so the
/// last entry is exactly 1. Elements keep their phase relative to the last
/// entry.
pub fn project(v: &DVector<Complex64>, amplitudes: Option<&[f64]>) -> DVector<Complex64> {
    let n = v.len() - 1;
    let anchor = if v[n].norm() > 0.0 { v[n].conj() / v[n].norm() } else { Complex64::new(1.0, 0.0) };
    DVector::from_fn(n + 1, |i, _| {
        if i == n {
            return Complex64::new(1.0, 0.0);
        }
        let amp = amplitudes.map_or(1.0, |a| a[i].clamp(0.0, 1.0).sqrt());
        let z = v[i] * anchor;
        if z.norm() > 0.0 {
            z * (amp / z.norm())
        } else {
            Complex64::new(amp, 0.0)
        }
    })
}

/// Rank-one extraction. `amplitudes` holds the per-element power share
/// `beta` (so entry `m` gets modulus `sqrt(beta_m)`); `None` means unit
/// modulus.
#[allow(clippy::too_many_arguments)]
pub fn extract_rank_one<R: Rng + ?Sized>(
    q: &DMatrix<Complex64>,
    amplitudes: Option<&[f64]>,
    side: SideData<'_>,
    energy: f64,
    sigma2: f64,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<Extraction> {
    let n = q.nrows();
    if n < 2 || q.ncols() != n {
        return Err(Error::Dimension { expected: side.w_b.nrows(), got: n });
    }
    if let Some(a) = amplitudes {
        if a.len() != n - 1 {
            return Err(Error::Dimension { expected: n - 1, got: a.len() });
        }
    }
    let herm = (q + q.adjoint()).map(|v| v * 0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[order[0]];
    let lmin = eig.eigenvalues[order[n - 1]];
    if !(l1 > 0.0) || lmin < -PSD_TOL * l1 {
        return Err(Error::NotPsd(lmin));
    }
    let l2 = eig.eigenvalues[order[1]].max(0.0);

    let meets = |v: &DVector<Complex64>| quad_form(side.g_e, v) >= energy - ENERGY_TOL;
    let principal = project(&eig.eigenvectors.column(order[0]).into_owned(), amplitudes);
    let principal_ratio = side.ratio_vec(&principal, sigma2);
    let rank_one = l2 / l1 <= settings.rank_one_ratio;

    let mut best: Option<(DVector<Complex64>, f64)> = meets(&principal).then(|| (principal.clone(), principal_ratio));
    if !rank_one {
        let factor = DMatrix::from_fn(n, n, |r, c| {
            eig.eigenvectors[(r, order[c])] * eig.eigenvalues[order[c]].max(0.0).sqrt()
        });
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..settings.randomization_samples {
            let z = DVector::from_fn(n, |_, _| {
                Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * scale
            });
            let cand = project(&(&factor * z), amplitudes);
            if !meets(&cand) {
                continue;
            }
            let ratio = side.ratio_vec(&cand, sigma2);
            if best.as_ref().is_none_or(|(_, r)| ratio > *r) {
                best = Some((cand, ratio));
            }
        }
    }
    Ok(match best {
        Some((q, ratio)) => Extraction {
            q,
            feasible: true,
            rank_one,
            ratio,
        },
        None => Extraction {
            q: principal,
            feasible: false,
            rank_one,
            ratio: principal_ratio,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::lifted::{build_lifted, phases_from_vector, tarc_vector};
    use crate::scenario::{generate_channels, Scenario, Side};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn instance(m: usize) -> crate::optimizer::LiftedData {
        let s = Scenario::default().with_elements(m);
        let ch = generate_channels(&s, &mut s.trial_rng(3)).unwrap();
        build_lifted(&ch, s.transmit_power)
    }

    #[test]
    fn rank_one_input_is_recovered() {
        let l = instance(3);
        let phi = [0.4, 2.0, 5.5];
        let q0 = tarc_vector(&[1.0; 3], &phi);
        // arbitrary global phase and scale must not matter
        let q = (&q0 * q0.adjoint()).map(|v| v * 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = extract_rank_one(&q, None, l.side(Side::Reflect), 0.0, 1.0, &OptimizerSettings::default(), &mut rng)
            .unwrap();
        assert!(ex.rank_one && ex.feasible);
        assert!((&ex.q - &q0).norm() < 1e-10);
        for (a, b) in phases_from_vector(&ex.q).iter().zip(phi) {
            let d = (a - b).rem_euclid(TAU);
            assert!(d.min(TAU - d) < 1e-10);
        }
    }

    #[test]
    fn identity_gives_unit_modulus_candidates() {
        let l = instance(4);
        let q = DMatrix::<Complex64>::identity(5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = extract_rank_one(&q, None, l.side(Side::Transmit), 0.0, 1.0, &OptimizerSettings::default(), &mut rng)
            .unwrap();
        assert!(!ex.rank_one);
        assert_eq!(ex.q[4], Complex64::new(1.0, 0.0));
        for v in ex.q.iter() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitudes_follow_beta() {
        let l = instance(2);
        let q = DMatrix::<Complex64>::identity(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let beta = [0.25, 0.0];
        let ex = extract_rank_one(&q, Some(&beta), l.side(Side::Reflect), 0.0, 1.0, &OptimizerSettings::default(), &mut rng)
            .unwrap();
        assert!((ex.q[0].norm() - 0.5).abs() < 1e-12);
        assert_eq!(ex.q[1].norm(), 0.0);
    }

    #[test]
    fn unreachable_energy_flags_infeasible() {
        let l = instance(2);
        let q = DMatrix::<Complex64>::identity(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ex = extract_rank_one(&q, None, l.side(Side::Reflect), 1e6, 1.0, &OptimizerSettings::default(), &mut rng)
            .unwrap();
        assert!(!ex.feasible);
    }

    #[test]
    fn rejects_indefinite_input() {
        let l = instance(1);
        let q = DMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = extract_rank_one(&q, None, l.side(Side::Reflect), 0.0, 1.0, &OptimizerSettings::default(), &mut rng);
        assert!(matches!(err, Err(Error::NotPsd(_))));
    }
}
