//! Lifted quadratic forms.
//!
//! A surface configuration on side `k` is written as the vector
//! `q = [conj(sqrt(b_1) e^{j phi_1}), ..., conj(sqrt(b_M) e^{j phi_M}), 1]`
//! so that `q^H W = h^H Phi H + f` with `W = [diag(h^H) H; f]`. Received
//! power then becomes the trace `tr(W_B Q)` with `W_B = P_s W W^H` and
//! `Q = q q^H`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::scenario::{ChannelSet, Side};

/// Stacked channel vectors and their rank-one power matrices, per side.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedData {
    /// `[diag(h_k^H) H; f_k]`, indexed by [`Side::index`].
    pub w: [DVector<Complex64>; 2],
    /// `[diag(v_k^H) H; g_k]`.
    pub g: [DVector<Complex64>; 2],
    /// `P_s w w^H`.
    pub w_b: [DMatrix<Complex64>; 2],
    /// `P_s g g^H`.
    pub g_e: [DMatrix<Complex64>; 2],
}

/// Forms for one side only.
#[derive(Debug, Clone, Copy)]
pub struct SideData<'a> {
    pub w_b: &'a DMatrix<Complex64>,
    pub g_e: &'a DMatrix<Complex64>,
}

fn stack(vec: &[Complex64], h_as: &[Complex64], direct: Complex64) -> DVector<Complex64> {
    DVector::from_iterator(
        vec.len() + 1,
        vec.iter().zip(h_as).map(|(v, h)| v.conj() * h).chain(std::iter::once(direct)),
    )
}

pub fn build_lifted(channels: &ChannelSet, p_s: f64) -> LiftedData {
    let make = |side: Side| {
        let (h, f) = channels.bob(side);
        let (v, g) = channels.eve(side);
        (stack(h, &channels.h_as, f), stack(v, &channels.h_as, g))
    };
    let (w_r, g_r) = make(Side::Reflect);
    let (w_t, g_t) = make(Side::Transmit);
    let outer = |x: &DVector<Complex64>| x * x.adjoint() * Complex64::new(p_s, 0.0);
    LiftedData {
        w_b: [outer(&w_r), outer(&w_t)],
        g_e: [outer(&g_r), outer(&g_t)],
        w: [w_r, w_t],
        g: [g_r, g_t],
    }
}

impl LiftedData {
    pub fn side(&self, side: Side) -> SideData<'_> {
        SideData {
            w_b: &self.w_b[side.index()],
            g_e: &self.g_e[side.index()],
        }
    }

    pub fn dim(&self) -> usize {
        self.w[0].len()
    }
}

impl SideData<'_> {
    /// `(sigma2 + tr(W_B Q)) / (sigma2 + tr(G_E Q))`.
    pub fn ratio(&self, q: &DMatrix<Complex64>, sigma2: f64) -> f64 {
        (sigma2 + trace_product(self.w_b, q)) / (sigma2 + trace_product(self.g_e, q))
    }

    pub fn ratio_vec(&self, q: &DVector<Complex64>, sigma2: f64) -> f64 {
        (sigma2 + quad_form(self.w_b, q)) / (sigma2 + quad_form(self.g_e, q))
    }
}

/// `Re tr(A B)`.
pub fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

/// `Re(q^H A q)`.
pub fn quad_form(a: &DMatrix<Complex64>, q: &DVector<Complex64>) -> f64 {
    q.dotc(&(a * q)).re
}

/// Lifted vector for amplitudes `beta` and phases `phi`.
pub fn tarc_vector(beta: &[f64], phi: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(
        beta.len() + 1,
        beta.iter()
            .zip(phi)
            .map(|(&b, &p)| Complex64::from_polar(b.max(0.0).sqrt(), -p))
            .chain(std::iter::once(Complex64::new(1.0, 0.0))),
    )
}

/// Phases encoded in a lifted vector, normalized by its last entry, in
/// `[0, 2pi)`.
pub fn phases_from_vector(q: &DVector<Complex64>) -> Vec<f64> {
    let n = q.len() - 1;
    let anchor = q[n].arg();
    (0..n)
        .map(|m| {
            if q[m].norm() == 0.0 {
                0.0
            } else {
                (anchor - q[m].arg()).rem_euclid(TAU)
            }
        })
        .collect()
}

/// One Dinkelbach ratio update per side:
/// `gamma_k = (sigma2 + tr(W_B^k Q_k)) / (sigma2 + tr(G_E^k Q_k))`.
pub fn dinkelbach_update(
    lifted: &LiftedData,
    q_r: &DMatrix<Complex64>,
    q_t: &DMatrix<Complex64>,
    sigma2: f64,
) -> (f64, f64) {
    (
        lifted.side(Side::Reflect).ratio(q_r, sigma2),
        lifted.side(Side::Transmit).ratio(q_t, sigma2),
    )
}
