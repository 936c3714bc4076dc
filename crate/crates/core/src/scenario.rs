//! Experiment configuration, node geometry and random channel generation.
//!
//! Every channel coefficient follows a geometric path-loss law with an
//! independent uniform phase:
//!
//! ```text
//! c = sqrt((1/d)^a) * exp(j*theta),   theta ~ U[0, 2pi)
//! ```
//!
//! with `a = alpha` on the legitimate links (Alice->surface, surface->Bob,
//! Alice->Bob) and `a = alpha_e` on the wiretap links (surface->Eve,
//! Alice->Eve). Vector channels draw one phase per surface element.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the generator used for every random draw in this crate.
pub const PRNG_NAME: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64, stream = trial index)";

/// A point in the 2-D deployment plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Surface operating protocol, plus the two comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Energy splitting: every element transmits and reflects.
    Es,
    /// Mode selection: each element either transmits or reflects.
    Ms,
    /// Time switching: the whole surface alternates between modes.
    Ts,
    /// Conventional reflect-only surface.
    Ris,
    /// No surface at all.
    #[serde(rename = "none")]
    NoSurface,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Es,
        Protocol::Ms,
        Protocol::Ts,
        Protocol::Ris,
        Protocol::NoSurface,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Es => "es",
            Protocol::Ms => "ms",
            Protocol::Ts => "ts",
            Protocol::Ris => "ris",
            Protocol::NoSurface => "none",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "es" => Ok(Protocol::Es),
            "ms" => Ok(Protocol::Ms),
            "ts" => Ok(Protocol::Ts),
            "ris" => Ok(Protocol::Ris),
            "none" => Ok(Protocol::NoSurface),
            _ => Err(Error::UnknownProtocol(s.to_string())),
        }
    }
}

/// Positions of the six nodes, in the order used by config files:
/// Alice, Bob_r, Bob_t, Eve_r, Eve_t, surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub alice: Point,
    pub bob_r: Point,
    pub bob_t: Point,
    pub eve_r: Point,
    pub eve_t: Point,
    pub surface: Point,
}

impl Default for Positions {
    fn default() -> Self {
        Self {
            alice: Point::new(0.0, 0.0),
            bob_r: Point::new(12.0, 2.0),
            bob_t: Point::new(12.0, -2.0),
            eve_r: Point::new(10.0, 2.0),
            eve_t: Point::new(10.0, -2.0),
            surface: Point::new(8.0, 0.0),
        }
    }
}

impl Positions {
    fn as_array(&self) -> [[f64; 2]; 6] {
        [
            self.alice,
            self.bob_r,
            self.bob_t,
            self.eve_r,
            self.eve_t,
            self.surface,
        ]
        .map(|p| [p.x, p.y])
    }

    fn from_array(a: [[f64; 2]; 6]) -> Self {
        Self {
            alice: a[0].into(),
            bob_r: a[1].into(),
            bob_t: a[2].into(),
            eve_r: a[3].into(),
            eve_t: a[4].into(),
            surface: a[5].into(),
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub positions: Positions,
    /// Number of surface elements M.
    pub num_elements: usize,
    pub transmit_power: f64,
    pub noise_power: f64,
    /// Minimum harvested energy at Eve_r.
    pub energy_r: f64,
    /// Minimum harvested energy at Eve_t.
    pub energy_t: f64,
    /// Path-loss exponent of the legitimate links.
    pub alpha: f64,
    /// Path-loss exponent of the wiretap links.
    pub alpha_e: f64,
    pub protocol: Protocol,
    pub trials: usize,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            positions: Positions::default(),
            num_elements: 10,
            transmit_power: 20.0,
            noise_power: 1.0,
            energy_r: 0.1,
            energy_t: 0.1,
            alpha: 2.2,
            alpha_e: 2.0,
            protocol: Protocol::Es,
            trials: 50,
            seed: 0,
        }
    }
}

/// On-disk layout: every key optional, missing keys fall back to defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    positions: Option<[[f64; 2]; 6]>,
    m: Option<usize>,
    p_s: Option<f64>,
    sigma2: Option<f64>,
    e_r: Option<f64>,
    e_t: Option<f64>,
    alpha: Option<f64>,
    alpha_e: Option<f64>,
    protocol: Option<String>,
    trials: Option<usize>,
    seed: Option<u64>,
}

impl Scenario {
    /// Sets both Eves' energy requirement.
    pub fn with_energy(mut self, e: f64) -> Self {
        self.energy_r = e;
        self.energy_t = e;
        self
    }

    pub fn with_elements(mut self, m: usize) -> Self {
        self.num_elements = m;
        self
    }

    pub fn with_power(mut self, p_s: f64) -> Self {
        self.transmit_power = p_s;
        self
    }

    pub fn with_protocol(mut self, protocol: Protocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(what.to_string()))
            }
        };
        check(self.num_elements >= 1, "m must be at least 1")?;
        check(
            self.transmit_power > 0.0 && self.transmit_power.is_finite(),
            "p_s must be positive",
        )?;
        check(
            self.noise_power > 0.0 && self.noise_power.is_finite(),
            "sigma2 must be positive",
        )?;
        check(
            self.energy_r >= 0.0 && self.energy_t >= 0.0,
            "energy requirements must be non-negative",
        )?;
        check(self.energy_r.is_finite() && self.energy_t.is_finite(), "energy requirements must be finite")?;
        check(self.alpha > 0.0 && self.alpha_e > 0.0, "path-loss exponents must be positive")?;
        check(self.trials >= 1, "trials must be at least 1")?;
        for (a, b, name) in self.links() {
            if !(distance(a, b) > 0.0) {
                return Err(Error::Config(format!("coincident nodes on link {name}")));
            }
        }
        Ok(())
    }

    fn links(&self) -> [(Point, Point, &'static str); 9] {
        let p = &self.positions;
        [
            (p.alice, p.surface, "alice-surface"),
            (p.surface, p.bob_r, "surface-bob_r"),
            (p.surface, p.bob_t, "surface-bob_t"),
            (p.surface, p.eve_r, "surface-eve_r"),
            (p.surface, p.eve_t, "surface-eve_t"),
            (p.alice, p.bob_r, "alice-bob_r"),
            (p.alice, p.bob_t, "alice-bob_t"),
            (p.alice, p.eve_r, "alice-eve_r"),
            (p.alice, p.eve_t, "alice-eve_t"),
        ]
    }

    /// Parses a TOML config. Keys: positions, m, p_s, sigma2, e_r, e_t,
    /// alpha, alpha_e, protocol, trials, seed.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        let d = Scenario::default();
        let scenario = Scenario {
            positions: file.positions.map(Positions::from_array).unwrap_or(d.positions),
            num_elements: file.m.unwrap_or(d.num_elements),
            transmit_power: file.p_s.unwrap_or(d.transmit_power),
            noise_power: file.sigma2.unwrap_or(d.noise_power),
            energy_r: file.e_r.unwrap_or(d.energy_r),
            energy_t: file.e_t.unwrap_or(d.energy_t),
            alpha: file.alpha.unwrap_or(d.alpha),
            alpha_e: file.alpha_e.unwrap_or(d.alpha_e),
            protocol: match file.protocol {
                Some(p) => p.parse()?,
                None => d.protocol,
            },
            trials: file.trials.unwrap_or(d.trials),
            seed: file.seed.unwrap_or(d.seed),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Serializes using the same keys `from_toml_str` accepts.
    pub fn to_toml_string(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            positions: [[f64; 2]; 6],
            m: usize,
            p_s: f64,
            sigma2: f64,
            e_r: f64,
            e_t: f64,
            alpha: f64,
            alpha_e: f64,
            protocol: &'a str,
            trials: usize,
            seed: u64,
        }
        let out = Out {
            positions: self.positions.as_array(),
            m: self.num_elements,
            p_s: self.transmit_power,
            sigma2: self.noise_power,
            e_r: self.energy_r,
            e_t: self.energy_t,
            alpha: self.alpha,
            alpha_e: self.alpha_e,
            protocol: self.protocol.as_str(),
            trials: self.trials,
            seed: self.seed,
        };
        toml::to_string(&out).expect("scenario serializes")
    }

    /// Generator for trial `trial`: the master seed keys the generator and
    /// the trial index selects an independent stream.
    pub fn trial_rng(&self, trial: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// Deterministic path-loss amplitude `sqrt((1/d)^exponent)`.
pub fn path_loss_amplitude(d: f64, exponent: f64) -> f64 {
    d.powf(-exponent / 2.0)
}

/// One realization of every channel coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Alice -> surface, one entry per element.
    pub h_as: Vec<Complex64>,
    /// Surface -> Bob_r.
    pub h_r: Vec<Complex64>,
    /// Surface -> Bob_t.
    pub h_t: Vec<Complex64>,
    /// Surface -> Eve_r.
    pub v_r: Vec<Complex64>,
    /// Surface -> Eve_t.
    pub v_t: Vec<Complex64>,
    /// Alice -> Bob_r, direct.
    pub f_r: Complex64,
    pub f_t: Complex64,
    /// Alice -> Eve_r, direct.
    pub g_r: Complex64,
    pub g_t: Complex64,
}

/// Side of the surface a receiver sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Reflect,
    Transmit,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Reflect, Side::Transmit];

    pub fn index(self) -> usize {
        match self {
            Side::Reflect => 0,
            Side::Transmit => 1,
        }
    }
}

impl ChannelSet {
    pub fn num_elements(&self) -> usize {
        self.h_as.len()
    }

    /// Surface -> Bob_k vector and Alice -> Bob_k scalar.
    pub fn bob(&self, side: Side) -> (&[Complex64], Complex64) {
        match side {
            Side::Reflect => (&self.h_r, self.f_r),
            Side::Transmit => (&self.h_t, self.f_t),
        }
    }

    /// Surface -> Eve_k vector and Alice -> Eve_k scalar.
    pub fn eve(&self, side: Side) -> (&[Complex64], Complex64) {
        match side {
            Side::Reflect => (&self.v_r, self.g_r),
            Side::Transmit => (&self.v_t, self.g_t),
        }
    }

    /// All-zero channel set, handy for tests.
    pub fn zeros(m: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); m];
        Self {
            h_as: z.clone(),
            h_r: z.clone(),
            h_t: z.clone(),
            v_r: z.clone(),
            v_t: z,
            f_r: Complex64::new(0.0, 0.0),
            f_t: Complex64::new(0.0, 0.0),
            g_r: Complex64::new(0.0, 0.0),
            g_t: Complex64::new(0.0, 0.0),
        }
    }
}

fn draw_phase<R: Rng + ?Sized>(rng: &mut R, amplitude: f64) -> Complex64 {
    Complex64::from_polar(amplitude, rng.random::<f64>() * TAU)
}

fn draw_vector<R: Rng + ?Sized>(rng: &mut R, m: usize, amplitude: f64) -> Vec<Complex64> {
    (0..m).map(|_| draw_phase(rng, amplitude)).collect()
}

/// Draws one channel realization. Magnitudes are fixed by geometry; only
/// the phases consume randomness.
pub fn generate_channels<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<ChannelSet> {
    scenario.validate()?;
    let p = &scenario.positions;
    let m = scenario.num_elements;
    let (a, ae) = (scenario.alpha, scenario.alpha_e);

    let dist_amp = |from: Point, to: Point, exponent: f64| path_loss_amplitude(distance(from, to), exponent);

    let h_as = draw_vector(rng, m, dist_amp(p.alice, p.surface, a));
    let h_r = draw_vector(rng, m, dist_amp(p.surface, p.bob_r, a));
    let h_t = draw_vector(rng, m, dist_amp(p.surface, p.bob_t, a));
    let v_r = draw_vector(rng, m, dist_amp(p.surface, p.eve_r, ae));
    let v_t = draw_vector(rng, m, dist_amp(p.surface, p.eve_t, ae));
    let f_r = draw_phase(rng, dist_amp(p.alice, p.bob_r, a));
    let f_t = draw_phase(rng, dist_amp(p.alice, p.bob_t, a));
    let g_r = draw_phase(rng, dist_amp(p.alice, p.eve_r, ae));
    let g_t = draw_phase(rng, dist_amp(p.alice, p.eve_t, ae));

    Ok(ChannelSet {
        h_as,
        h_r,
        h_t,
        v_r,
        v_t,
        f_r,
        f_t,
        g_r,
        g_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(8.0, 0.0)), 8.0);
        assert_eq!(distance(Point::new(3.0, 4.0), Point::new(3.0, 4.0)), 0.0);
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn default_magnitudes() {
        let s = Scenario::default();
        let ch = generate_channels(&s, &mut s.trial_rng(3)).unwrap();
        // sqrt((1/8)^2.2) = 8^-1.1
        let h = (1.0f64 / 8.0).powf(2.2).sqrt();
        assert!((h - 0.101_53).abs() < 1e-5);
        for c in &ch.h_as {
            assert!((c.norm() - h).abs() < 1e-15);
        }
        let g = (1.0 / 104.0f64.sqrt()).powi(2).sqrt();
        assert!((ch.g_r.norm() - g).abs() < 1e-15);
        assert!((ch.g_r.norm() - 104.0f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn determinism() {
        let s = Scenario::default();
        let a = generate_channels(&s, &mut s.trial_rng(11)).unwrap();
        let b = generate_channels(&s, &mut s.trial_rng(11)).unwrap();
        let c = generate_channels(&s, &mut s.trial_rng(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn coincident_nodes_rejected() {
        let mut s = Scenario::default();
        s.positions.eve_r = s.positions.surface;
        let err = generate_channels(&s, &mut s.trial_rng(0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_values_rejected() {
        for s in [
            Scenario::default().with_elements(0),
            Scenario::default().with_power(0.0),
            Scenario::default().with_energy(-1.0),
            Scenario { noise_power: 0.0, ..Scenario::default() },
            Scenario { alpha_e: 0.0, ..Scenario::default() },
        ] {
            assert!(s.validate().is_err());
        }
    }

    #[test]
    fn config_defaults_and_overrides() {
        let s = Scenario::from_toml_str("").unwrap();
        assert_eq!(s, Scenario::default());

        let s = Scenario::from_toml_str(
            "m = 4\np_s = 40.0\ne_r = 0.05\nprotocol = \"ts\"\nseed = 9\n\
             positions = [[0,0],[12,2],[12,-2],[10,2],[10,-2],[7,0]]\n",
        )
        .unwrap();
        assert_eq!(s.num_elements, 4);
        assert_eq!(s.transmit_power, 40.0);
        assert_eq!(s.energy_r, 0.05);
        assert_eq!(s.energy_t, 0.1);
        assert_eq!(s.protocol, Protocol::Ts);
        assert_eq!(s.seed, 9);
        assert_eq!(s.positions.surface, Point::new(7.0, 0.0));

        let round = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(round, s);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            Scenario::from_toml_str("protocol = \"xs\""),
            Err(Error::UnknownProtocol(_))
        ));
        assert!(matches!(Scenario::from_toml_str("bogus = 1"), Err(Error::Parse(_))));
        assert!(matches!(Scenario::from_toml_str("m = 0"), Err(Error::Config(_))));
    }
}
