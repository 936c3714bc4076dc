//! Physical-layer metrics for a given surface configuration: received
//! gains, SNRs, harvested energy at the eavesdroppers and secrecy rates.
//!
//! Rates are in nats. `h^H` is the conjugate transpose of the stored
//! vector `h`, so the composite gain towards a receiver is
//! `sum_m conj(h_m) * tarc_m * H_m + direct`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{ChannelSet, Protocol, Side};

const ES_SUM_TOL: f64 = 1e-9;
const MS_BINARY_TOL: f64 = 1e-6;

/// Per-element amplitudes and phases on both sides of the surface, plus the
/// time shares used by time switching.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TarcConfig {
    pub protocol: Protocol,
    pub beta_t: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub phi_r: Vec<f64>,
    pub lambda_t: f64,
    pub lambda_r: f64,
}

impl TarcConfig {
    /// All amplitudes zero: the surface is switched off.
    pub fn zero(m: usize) -> Self {
        Self {
            protocol: Protocol::NoSurface,
            beta_t: vec![0.0; m],
            beta_r: vec![0.0; m],
            phi_t: vec![0.0; m],
            phi_r: vec![0.0; m],
            lambda_t: 0.5,
            lambda_r: 0.5,
        }
    }

    /// Energy splitting with `beta_r` on the reflect side and `1 - beta_r`
    /// on the transmit side.
    pub fn energy_splitting(beta_r: Vec<f64>, phi_r: Vec<f64>, phi_t: Vec<f64>) -> Self {
        let beta_t = beta_r.iter().map(|b| 1.0 - b).collect();
        Self {
            protocol: Protocol::Es,
            beta_t,
            beta_r,
            phi_t,
            phi_r,
            lambda_t: 0.5,
            lambda_r: 0.5,
        }
    }

    /// Mode selection: element `m` reflects when `reflect[m]`, else transmits.
    pub fn mode_selection(reflect: &[bool], phi_r: Vec<f64>, phi_t: Vec<f64>) -> Self {
        let beta_r = reflect.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect();
        Self {
            protocol: Protocol::Ms,
            ..Self::energy_splitting(beta_r, phi_r, phi_t)
        }
    }

    /// Time switching with unit amplitudes; `lambda_t = 1 - lambda_r`.
    pub fn time_switching(phi_r: Vec<f64>, phi_t: Vec<f64>, lambda_r: f64) -> Self {
        let m = phi_r.len();
        Self {
            protocol: Protocol::Ts,
            beta_t: vec![1.0; m],
            beta_r: vec![1.0; m],
            phi_t,
            phi_r,
            lambda_t: 1.0 - lambda_r,
            lambda_r,
        }
    }

    /// Reflect-only surface: full amplitude on the reflect side.
    pub fn reflect_only(phi_r: Vec<f64>) -> Self {
        let m = phi_r.len();
        Self {
            protocol: Protocol::Ris,
            beta_t: vec![0.0; m],
            beta_r: vec![1.0; m],
            phi_t: vec![0.0; m],
            phi_r,
            lambda_t: 0.5,
            lambda_r: 0.5,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.beta_r.len()
    }

    pub fn beta(&self, side: Side) -> &[f64] {
        match side {
            Side::Reflect => &self.beta_r,
            Side::Transmit => &self.beta_t,
        }
    }

    pub fn phi(&self, side: Side) -> &[f64] {
        match side {
            Side::Reflect => &self.phi_r,
            Side::Transmit => &self.phi_t,
        }
    }

    pub fn lambda(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.lambda_r,
            Side::Transmit => self.lambda_t,
        }
    }

    /// Diagonal of the TARC matrix on `side`: `sqrt(beta_m) * exp(j*phi_m)`.
    pub fn diagonal(&self, side: Side) -> Vec<Complex64> {
        self.beta(side)
            .iter()
            .zip(self.phi(side))
            .map(|(&b, &p)| Complex64::from_polar(b.max(0.0).sqrt(), p))
            .collect()
    }

    /// Checks the protocol's feasible set.
    pub fn validate(&self) -> Result<()> {
        let m = self.beta_r.len();
        for len in [self.beta_t.len(), self.phi_r.len(), self.phi_t.len()] {
            if len != m {
                return Err(Error::Dimension { expected: m, got: len });
            }
        }
        let fail = |msg: String| Err(Error::Config(msg));
        let in_unit = |b: f64| (-ES_SUM_TOL..=1.0 + ES_SUM_TOL).contains(&b);
        if !self.beta_r.iter().chain(&self.beta_t).all(|&b| in_unit(b)) {
            return fail("amplitudes must lie in [0, 1]".into());
        }
        let sums_to_one = || {
            self.beta_r
                .iter()
                .zip(&self.beta_t)
                .all(|(r, t)| (r + t - 1.0).abs() <= ES_SUM_TOL)
        };
        match self.protocol {
            Protocol::Es => {
                if !sums_to_one() {
                    return fail("ES requires beta_t + beta_r = 1".into());
                }
            }
            Protocol::Ms => {
                if !sums_to_one() {
                    return fail("MS requires beta_t + beta_r = 1".into());
                }
                if !self.beta_t.iter().all(|b| (b - b.round()).abs() <= MS_BINARY_TOL) {
                    return fail("MS requires binary amplitudes".into());
                }
            }
            Protocol::Ts => {
                if !self.beta_r.iter().chain(&self.beta_t).all(|&b| (b - 1.0).abs() <= ES_SUM_TOL) {
                    return fail("TS requires unit amplitudes".into());
                }
                let ok = (0.0..=1.0).contains(&self.lambda_r)
                    && (0.0..=1.0).contains(&self.lambda_t)
                    && (self.lambda_r + self.lambda_t - 1.0).abs() <= ES_SUM_TOL;
                if !ok {
                    return fail("TS requires lambda_t + lambda_r = 1".into());
                }
            }
            Protocol::Ris => {
                let ok = self.beta_r.iter().all(|&b| (b - 1.0).abs() <= ES_SUM_TOL)
                    && self.beta_t.iter().all(|&b| b.abs() <= ES_SUM_TOL);
                if !ok {
                    return fail("RIS requires beta_r = 1, beta_t = 0".into());
                }
            }
            Protocol::NoSurface => {
                if !self.beta_r.iter().chain(&self.beta_t).all(|&b| b.abs() <= ES_SUM_TOL) {
                    return fail("no-surface baseline requires zero amplitudes".into());
                }
            }
        }
        Ok(())
    }
}

/// Receiving node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    BobR,
    BobT,
    EveR,
    EveT,
}

impl Node {
    pub fn side(self) -> Side {
        match self {
            Node::BobR | Node::EveR => Side::Reflect,
            Node::BobT | Node::EveT => Side::Transmit,
        }
    }
}

/// Everything reported for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PerformanceMetrics {
    pub snr_bob_r: f64,
    pub snr_bob_t: f64,
    pub snr_eve_r: f64,
    pub snr_eve_t: f64,
    pub rate_r: f64,
    pub rate_t: f64,
    pub rate_sum: f64,
    pub energy_eve_r: f64,
    pub energy_eve_t: f64,
}

impl PerformanceMetrics {
    pub fn energy(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.energy_eve_r,
            Side::Transmit => self.energy_eve_t,
        }
    }

    pub fn rate(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.rate_r,
            Side::Transmit => self.rate_t,
        }
    }

    pub fn snr_bob(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.snr_bob_r,
            Side::Transmit => self.snr_bob_t,
        }
    }

    pub fn snr_eve(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.snr_eve_r,
            Side::Transmit => self.snr_eve_t,
        }
    }
}

/// The TARC matrix on one side as an explicit diagonal matrix.
pub fn tarc_matrix(config: &TarcConfig, side: Side) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(config.diagonal(side)))
}

/// `channel^H * diag(tarc) * h_as + direct`.
pub fn effective_gain(
    channel: &[Complex64],
    tarc: &[Complex64],
    h_as: &[Complex64],
    direct: Complex64,
) -> Result<Complex64> {
    let m = channel.len();
    for len in [tarc.len(), h_as.len()] {
        if len != m {
            return Err(Error::Dimension { expected: m, got: len });
        }
    }
    Ok(channel
        .iter()
        .zip(tarc)
        .zip(h_as)
        .fold(direct, |acc, ((c, t), h)| acc + c.conj() * t * h))
}

fn node_gain(channels: &ChannelSet, config: &TarcConfig, node: Node) -> Complex64 {
    let side = node.side();
    let (vec, direct) = match node {
        Node::BobR | Node::BobT => channels.bob(side),
        Node::EveR | Node::EveT => channels.eve(side),
    };
    effective_gain(vec, &config.diagonal(side), &channels.h_as, direct)
        .expect("channel and configuration sizes agree")
}

/// Received SNR `|gain|^2 * P_s / sigma^2` at `node`.
pub fn snr(channels: &ChannelSet, config: &TarcConfig, node: Node, p_s: f64, sigma2: f64) -> f64 {
    node_gain(channels, config, node).norm_sqr() * p_s / sigma2
}

/// Energy harvested at Eve on `side`, `|v^H Phi H + g|^2 * P_s`.
pub fn harvested_energy(channels: &ChannelSet, config: &TarcConfig, side: Side, p_s: f64) -> f64 {
    let node = match side {
        Side::Reflect => Node::EveR,
        Side::Transmit => Node::EveT,
    };
    node_gain(channels, config, node).norm_sqr() * p_s
}

/// `[ln(1 + snr_bob) - ln(1 + snr_eve)]^+`.
pub fn clamped_rate(snr_bob: f64, snr_eve: f64) -> f64 {
    (snr_bob.ln_1p() - snr_eve.ln_1p()).max(0.0)
}

/// Evaluates every metric; time switching scales each side's rate by its
/// time share.
pub fn secrecy_rate(channels: &ChannelSet, config: &TarcConfig, p_s: f64, sigma2: f64) -> PerformanceMetrics {
    let snr_bob_r = snr(channels, config, Node::BobR, p_s, sigma2);
    let snr_bob_t = snr(channels, config, Node::BobT, p_s, sigma2);
    let snr_eve_r = snr(channels, config, Node::EveR, p_s, sigma2);
    let snr_eve_t = snr(channels, config, Node::EveT, p_s, sigma2);
    let (scale_r, scale_t) = match config.protocol {
        Protocol::Ts => (config.lambda_r, config.lambda_t),
        _ => (1.0, 1.0),
    };
    let rate_r = scale_r * clamped_rate(snr_bob_r, snr_eve_r);
    let rate_t = scale_t * clamped_rate(snr_bob_t, snr_eve_t);
    PerformanceMetrics {
        snr_bob_r,
        snr_bob_t,
        snr_eve_r,
        snr_eve_t,
        rate_r,
        rate_t,
        rate_sum: rate_r + rate_t,
        energy_eve_r: harvested_energy(channels, config, Side::Reflect, p_s),
        energy_eve_t: harvested_energy(channels, config, Side::Transmit, p_s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tarc_matrix_cases() {
        let zero = TarcConfig::zero(3);
        assert_eq!(tarc_matrix(&zero, Side::Reflect), DMatrix::zeros(3, 3));

        let unit = TarcConfig::time_switching(vec![0.0; 3], vec![0.0; 3], 0.5);
        assert_eq!(tarc_matrix(&unit, Side::Transmit), DMatrix::identity(3, 3));

        let cfg = TarcConfig::energy_splitting(vec![0.25], vec![PI], vec![0.0]);
        let d = tarc_matrix(&cfg, Side::Reflect)[(0, 0)];
        assert!((d - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn effective_gain_cases() {
        let ch = [c(0.3, 0.1), c(-0.2, 0.7)];
        let h = [c(1.0, 2.0), c(0.5, 0.5)];
        let direct = c(0.25, -0.5);
        assert_eq!(effective_gain(&ch, &[c(0.0, 0.0); 2], &h, direct).unwrap(), direct);

        let one = [c(1.0, 0.0)];
        assert_eq!(effective_gain(&one, &one, &one, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));

        // h^H conjugates the stored vector: conj(1)*1 + conj(j)*1 + 1 = 2 - j
        let g = effective_gain(&[c(1.0, 0.0), c(0.0, 1.0)], &[c(1.0, 0.0); 2], &[c(1.0, 0.0); 2], c(1.0, 0.0))
            .unwrap();
        assert_eq!(g, c(2.0, -1.0));

        assert!(matches!(
            effective_gain(&ch, &[c(1.0, 0.0)], &h, direct),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    fn scalar_channels() -> ChannelSet {
        ChannelSet {
            h_as: vec![c(0.1, -0.05)],
            h_r: vec![c(0.2, 0.3)],
            h_t: vec![c(-0.4, 0.1)],
            v_r: vec![c(0.35, 0.0)],
            v_t: vec![c(0.0, -0.3)],
            f_r: c(0.05, 0.02),
            f_t: c(-0.03, 0.04),
            g_r: c(0.08, -0.06),
            g_t: c(0.1, 0.0),
        }
    }

    #[test]
    fn snr_direct_only_and_zero() {
        let ch = scalar_channels();
        let off = TarcConfig::zero(1);
        let s = snr(&ch, &off, Node::BobR, 20.0, 2.0);
        assert!((s - ch.f_r.norm_sqr() * 10.0).abs() < 1e-15);
        let zero = ChannelSet::zeros(4);
        let cfg = TarcConfig::time_switching(vec![0.3; 4], vec![1.0; 4], 0.5);
        for node in [Node::BobR, Node::BobT, Node::EveR, Node::EveT] {
            assert_eq!(snr(&zero, &cfg, node, 20.0, 1.0), 0.0);
        }
    }

    #[test]
    fn snr_matches_scalar_arithmetic() {
        let ch = scalar_channels();
        let (beta, phi_r, phi_t) = (0.36_f64, 1.1_f64, -0.4_f64);
        let cfg = TarcConfig::energy_splitting(vec![beta], vec![phi_r], vec![phi_t]);
        // hand-expanded scalar products
        let amp_r = beta.sqrt();
        let amp_t = (1.0 - beta).sqrt();
        let (hr, hi) = (ch.h_r[0].re, -ch.h_r[0].im);
        let (ar, ai) = (amp_r * phi_r.cos(), amp_r * phi_r.sin());
        let (gr, gi) = (ch.h_as[0].re, ch.h_as[0].im);
        let p1r = hr * ar - hi * ai;
        let p1i = hr * ai + hi * ar;
        let re = p1r * gr - p1i * gi + ch.f_r.re;
        let im = p1r * gi + p1i * gr + ch.f_r.im;
        let want = (re * re + im * im) * 20.0 / 1.5;
        let got = snr(&ch, &cfg, Node::BobR, 20.0, 1.5);
        assert!((got - want).abs() <= 1e-12 * want);

        let (vr, vi) = (ch.v_t[0].re, -ch.v_t[0].im);
        let (ar, ai) = (amp_t * phi_t.cos(), amp_t * phi_t.sin());
        let p1r = vr * ar - vi * ai;
        let p1i = vr * ai + vi * ar;
        let re = p1r * gr - p1i * gi + ch.g_t.re;
        let im = p1r * gi + p1i * gr + ch.g_t.im;
        let want = (re * re + im * im) * 20.0 / 1.5;
        let got = snr(&ch, &cfg, Node::EveT, 20.0, 1.5);
        assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn harvested_energy_cases() {
        let ch = scalar_channels();
        let off = TarcConfig::zero(1);
        assert!((harvested_energy(&ch, &off, Side::Transmit, 20.0) - ch.g_t.norm_sqr() * 20.0).abs() < 1e-15);

        // phases aligned so every term adds constructively
        let beta = 0.49;
        let target = ch.g_r.arg();
        let phi = target - (ch.v_r[0].conj() * ch.h_as[0]).arg();
        let cfg = TarcConfig::energy_splitting(vec![beta], vec![phi], vec![0.0]);
        let want = (ch.v_r[0].norm() * ch.h_as[0].norm() * beta.sqrt() + ch.g_r.norm()).powi(2) * 20.0;
        let got = harvested_energy(&ch, &cfg, Side::Reflect, 20.0);
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn harvested_energy_default_geometry() {
        let s = crate::scenario::Scenario::default();
        let ch = crate::scenario::generate_channels(&s, &mut s.trial_rng(0)).unwrap();
        let e = harvested_energy(&ch, &TarcConfig::zero(s.num_elements), Side::Reflect, 20.0);
        assert!((e - 20.0 / 104.0).abs() < 1e-12);
        assert!((e - 0.1923).abs() < 1e-4);
    }

    #[test]
    fn rate_clamps() {
        let mut ch = scalar_channels();
        // identical Bob and Eve channels
        ch.v_r = ch.h_r.clone();
        ch.g_r = ch.f_r;
        let cfg = TarcConfig::energy_splitting(vec![0.5], vec![0.3], vec![0.2]);
        let m = secrecy_rate(&ch, &cfg, 20.0, 1.0);
        assert_eq!(m.rate_r, 0.0);

        // Eve stronger everywhere with the surface off
        let mut ch = scalar_channels();
        ch.g_r = ch.f_r * 3.0;
        ch.g_t = ch.f_t * 3.0;
        let m = secrecy_rate(&ch, &TarcConfig::zero(1), 20.0, 1.0);
        assert_eq!((m.rate_r, m.rate_t, m.rate_sum), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ts_zero_share() {
        let mut ch = scalar_channels();
        ch.g_r = c(0.0, 0.0);
        ch.v_r = vec![c(0.0, 0.0)];
        let cfg = TarcConfig::time_switching(vec![0.0], vec![0.0], 0.0);
        let m = secrecy_rate(&ch, &cfg, 20.0, 1.0);
        assert!(m.snr_bob_r > 0.0);
        assert_eq!(m.rate_r, 0.0);
    }

    #[test]
    fn validate_protocol_sets() {
        assert!(TarcConfig::energy_splitting(vec![0.3, 0.7], vec![0.0; 2], vec![0.0; 2]).validate().is_ok());
        let mut ms = TarcConfig::energy_splitting(vec![1.0, 0.0], vec![0.0; 2], vec![0.0; 2]);
        ms.protocol = Protocol::Ms;
        assert!(ms.validate().is_ok());
        ms.beta_r[0] = 0.5;
        ms.beta_t[0] = 0.5;
        assert!(ms.validate().is_err());

        let mut es = TarcConfig::energy_splitting(vec![0.3], vec![0.0], vec![0.0]);
        es.beta_t[0] = 0.3;
        assert!(es.validate().is_err());

        let mut ts = TarcConfig::time_switching(vec![0.0], vec![0.0], 0.25);
        assert!(ts.validate().is_ok());
        ts.lambda_t = 0.5;
        assert!(ts.validate().is_err());

        assert!(TarcConfig::reflect_only(vec![0.0; 2]).validate().is_ok());
        assert!(TarcConfig::zero(2).validate().is_ok());
    }
}
