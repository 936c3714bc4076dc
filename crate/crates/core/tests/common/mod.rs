//! Helpers shared by the integration tests: random instance generators and
//! oracles that recompute quantities without going through the library's
//! own evaluation paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use star_secrecy::model::{tarc_matrix, TarcConfig};
use star_secrecy::scenario::{ChannelSet, Side};
use star_secrecy::sdp::{RealSdp, RealTerm, SymCoeff};

pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| gauss(rng));
    (&a + a.transpose()) * 0.5
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(gauss(rng), gauss(rng)));
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Random orthogonal matrix from the QR factors of a Gaussian matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| gauss(rng)).qr().q()
}

/// A real SDP with a known optimal primal-dual pair.
pub struct Planted {
    pub problem: RealSdp,
    pub optimum: f64,
    pub x: DMatrix<f64>,
    pub x_lp: DVector<f64>,
}

/// Builds `max <C, X> + c^T x  s.t.  <A_i, X> + a_i^T x = b_i` with `X`
/// of size `n` and an LP part of size `lp`, by choosing complementary
/// optimal `X*`, `Z*` (and `x*`, `z*`) and multipliers `y*`, then setting
/// `b = A(X*)` and `C = A^T y* - Z*`.
pub fn planted_kkt<R: Rng>(rng: &mut R, n: usize, lp: usize, constraints: usize) -> Planted {
    let u = random_orthogonal(rng, n);
    let rank = rng.random_range(1..=n.div_ceil(2));
    let mut lam = DVector::zeros(n);
    let mut mu = DVector::zeros(n);
    for i in 0..n {
        if i < rank {
            lam[i] = rng.random_range(0.5..2.0);
        } else {
            mu[i] = rng.random_range(0.5..2.0);
        }
    }
    let x = &u * DMatrix::from_diagonal(&lam) * u.transpose();
    let z = &u * DMatrix::from_diagonal(&mu) * u.transpose();
    let x_lp = DVector::from_fn(lp, |i, _| if i % 2 == 0 { rng.random_range(0.5..2.0) } else { 0.0 });
    let z_lp = DVector::from_fn(lp, |i, _| if i % 2 == 0 { 0.0 } else { rng.random_range(0.5..2.0) });

    let y: Vec<f64> = (0..constraints).map(|_| gauss(rng)).collect();
    let mut c = -z;
    let mut c_lp = -z_lp;
    let mut rows = Vec::with_capacity(constraints);
    for &yi in &y {
        let a = random_symmetric(rng, n);
        let a_lp = DVector::from_fn(lp, |_, _| gauss(rng));
        let b = a.dot(&x) + a_lp.dot(&x_lp);
        c += &a * yi;
        c_lp += &a_lp * yi;
        let term = RealTerm {
            blocks: vec![(0, SymCoeff::Dense(a))],
            lp: a_lp.iter().copied().enumerate().collect(),
        };
        rows.push((term, b));
    }
    let optimum = c.dot(&x) + c_lp.dot(&x_lp);
    let problem = RealSdp {
        block_dims: vec![n],
        lp_dim: lp,
        objective: RealTerm {
            blocks: vec![(0, SymCoeff::Dense(c))],
            lp: c_lp.iter().copied().enumerate().collect(),
        },
        constraints: rows,
    };
    Planted { problem, optimum, x, x_lp }
}

/// `max_i |<A_i, X> + a_i^T x - b_i| / (1 + |b_i|)`, recomputed densely.
pub fn real_residual(p: &RealSdp, x: &[DMatrix<f64>], x_lp: &DVector<f64>) -> f64 {
    p.constraints
        .iter()
        .map(|(term, b)| {
            let v: f64 = term
                .blocks
                .iter()
                .map(|(blk, coeff)| coeff.to_dense(p.block_dims[*blk]).dot(&x[*blk]))
                .sum::<f64>()
                + term.lp.iter().map(|&(j, a)| a * x_lp[j]).sum::<f64>();
            (v - b).abs() / (1.0 + b.abs())
        })
        .fold(0.0, f64::max)
}

pub fn real_objective(p: &RealSdp, x: &[DMatrix<f64>], x_lp: &DVector<f64>) -> f64 {
    p.objective
        .blocks
        .iter()
        .map(|(blk, coeff)| coeff.to_dense(p.block_dims[*blk]).dot(&x[*blk]))
        .sum::<f64>()
        + p.objective.lp.iter().map(|&(j, a)| a * x_lp[j]).sum::<f64>()
}

/// `|h^H Phi H + f|^2 * p_s` using explicit matrices: `h^H` as a row vector,
/// `Phi` as a dense diagonal matrix and `H` as a column.
pub fn gain_power_dense(receiver: &[Complex64], direct: Complex64, channels: &ChannelSet, phi: &DMatrix<Complex64>, p_s: f64) -> f64 {
    let h = DVector::from_column_slice(receiver);
    let big_h = DVector::from_column_slice(&channels.h_as);
    let cascade = (h.adjoint() * phi * big_h)[(0, 0)];
    (cascade + direct).norm_sqr() * p_s
}

/// Bob's and Eve's received powers on `side`, via [`gain_power_dense`].
pub fn side_powers(channels: &ChannelSet, config: &TarcConfig, side: Side, p_s: f64) -> (f64, f64) {
    let phi = tarc_matrix(config, side);
    let (h, f) = channels.bob(side);
    let (v, g) = channels.eve(side);
    (
        gain_power_dense(h, f, channels, &phi, p_s),
        gain_power_dense(v, g, channels, &phi, p_s),
    )
}

/// Random ES configuration.
pub fn random_es_config<R: Rng>(rng: &mut R, m: usize) -> TarcConfig {
    let beta_r: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let phi_r = (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let phi_t = (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    TarcConfig::energy_splitting(beta_r, phi_r, phi_t)
}
