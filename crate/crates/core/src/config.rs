//! System configuration, constellations and the seeded random-source contract.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::index_bits_per_group;

/// Speed of light used for the speed/Doppler conversion, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    #[default]
    Psk,
    Qam,
}

/// Raw frame and channel parameters as written in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_subcarriers: usize,
    pub n_groups: usize,
    pub alphabet_size: usize,
    pub constellation_order: usize,
    #[serde(default)]
    pub constellation_kind: ConstellationKind,
    pub max_delay: usize,
    pub max_doppler: usize,
    /// Post-chirp parameter; `None` selects [`default_c1`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_chirp: Option<f64>,
    /// Prefix length; `None` selects `max_delay`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpp_length: Option<usize>,
}

impl SystemConfig {
    /// PSK configuration with default chirp and minimal prefix.
    pub fn psk(
        n_subcarriers: usize,
        n_groups: usize,
        alphabet_size: usize,
        constellation_order: usize,
        max_delay: usize,
        max_doppler: usize,
    ) -> Self {
        Self {
            n_subcarriers,
            n_groups,
            alphabet_size,
            constellation_order,
            constellation_kind: ConstellationKind::Psk,
            max_delay,
            max_doppler,
            post_chirp: None,
            cpp_length: None,
        }
    }

    pub fn with_kind(mut self, kind: ConstellationKind) -> Self {
        self.constellation_kind = kind;
        self
    }

    pub fn with_post_chirp(mut self, c1: f64) -> Self {
        self.post_chirp = Some(c1);
        self
    }

    pub fn validate(self) -> Result<Config> {
        validate_config(self)
    }
}

/// A validated configuration with every derived quantity filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub raw: SystemConfig,
    /// Subcarriers per group, `N / G`.
    pub n_c: usize,
    pub c1: f64,
    pub cpp_length: usize,
    /// Symbol bits per group.
    pub b1: usize,
    /// Index bits per group.
    pub b2: usize,
    /// `(d_max + 1)(2 α_max + 1) <= N`: paths with distinct delay/Doppler
    /// land on distinct columns of the effective channel.
    pub separable_placement: bool,
}

impl Config {
    pub fn n(&self) -> usize {
        self.raw.n_subcarriers
    }
    pub fn groups(&self) -> usize {
        self.raw.n_groups
    }
    pub fn lambda(&self) -> usize {
        self.raw.alphabet_size
    }
    pub fn order(&self) -> usize {
        self.raw.constellation_order
    }
    pub fn bits_per_symbol(&self) -> usize {
        self.raw.constellation_order.trailing_zeros() as usize
    }
    pub fn max_delay(&self) -> usize {
        self.raw.max_delay
    }
    pub fn max_doppler(&self) -> usize {
        self.raw.max_doppler
    }
    /// Bits per group, `b1 + b2`.
    pub fn group_bits(&self) -> usize {
        self.b1 + self.b2
    }
    /// Payload bits per frame, `B = G (b1 + b2)`.
    pub fn frame_bits(&self) -> usize {
        self.groups() * self.group_bits()
    }
    /// Number of delay/Doppler cells, `(d_max + 1)(2 α_max + 1)`.
    pub fn cell_count(&self) -> usize {
        (self.max_delay() + 1) * (2 * self.max_doppler() + 1)
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.raw.constellation_kind, self.order())
            .expect("validated configuration has a supported constellation")
    }

    /// `2N·c1` when it is an integer (to 1e-9), which is what makes the
    /// effective channel exactly sparse for every integer delay.
    pub fn placement_step(&self) -> Option<i64> {
        let v = 2.0 * self.n() as f64 * self.c1;
        let r = v.round();
        ((v - r).abs() < 1e-9).then_some(r as i64)
    }

    /// Cyclic column offset of a path, `(α + 2N·c1·d) mod N`.
    pub fn loc(&self, delay: usize, doppler: i64) -> Result<usize> {
        let step = self.placement_step().ok_or(Error::NonIntegerPlacement {
            value: 2.0 * self.n() as f64 * self.c1 * delay as f64,
            delay,
        })?;
        let n = self.n() as i64;
        Ok((doppler + step * delay as i64).rem_euclid(n) as usize)
    }
}

/// `(2 α_max + 1) / (2N)`.
pub fn default_c1(n: usize, max_doppler: usize) -> f64 {
    (2 * max_doppler + 1) as f64 / (2 * n) as f64
}

/// Maximum normalized Doppler `v·f_c / (c·Δf)` for a speed in km/h.
pub fn normalized_doppler_from_speed(speed_kmh: f64, carrier_hz: f64, subcarrier_spacing_hz: f64) -> f64 {
    let v = speed_kmh / 3.6;
    v * carrier_hz / (SPEED_OF_LIGHT * subcarrier_spacing_hz)
}

pub fn validate_config(raw: SystemConfig) -> Result<Config> {
    let n = raw.n_subcarriers;
    let g = raw.n_groups;
    if n == 0 || g == 0 {
        return Err(Error::InvalidConfig("N and G must be positive".into()));
    }
    if n % g != 0 {
        return Err(Error::InvalidConfig(format!("G = {g} does not divide N = {n}")));
    }
    if raw.alphabet_size == 0 {
        return Err(Error::InvalidConfig("alphabet size must be positive".into()));
    }
    let m = raw.constellation_order;
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("constellation order {m} is not a power of two >= 2")));
    }
    if raw.constellation_kind == ConstellationKind::Qam && m.trailing_zeros() % 2 != 0 {
        return Err(Error::InvalidConfig(format!("QAM order {m} is not a perfect square")));
    }
    let cpp_length = raw.cpp_length.unwrap_or(raw.max_delay);
    if cpp_length < raw.max_delay {
        return Err(Error::InvalidConfig(format!(
            "prefix length {cpp_length} shorter than maximum delay {}",
            raw.max_delay
        )));
    }
    let c1 = raw.post_chirp.unwrap_or_else(|| default_c1(n, raw.max_doppler));
    if !c1.is_finite() {
        return Err(Error::InvalidConfig("post-chirp parameter must be finite".into()));
    }
    let n_c = n / g;
    let b1 = n_c * m.trailing_zeros() as usize;
    let b2 = index_bits_per_group(raw.alphabet_size, n_c);
    let separable_placement = (raw.max_delay + 1) * (2 * raw.max_doppler + 1) <= n;
    Ok(Config {
        raw,
        n_c,
        c1,
        cpp_length,
        b1,
        b2,
        separable_placement,
    })
}

/// Unit-average-energy symbol alphabet, indexed by Gray label.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub kind: ConstellationKind,
    /// `points[label]` is the symbol carrying the `bits_per_symbol`-bit label.
    pub points: Vec<Complex<f64>>,
    pub bits_per_symbol: usize,
}

fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

impl Constellation {
    pub fn new(kind: ConstellationKind, order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("unsupported constellation order {order}")));
        }
        let bits = order.trailing_zeros() as usize;
        let mut points = vec![Complex::new(0.0, 0.0); order];
        match kind {
            ConstellationKind::Psk => {
                for k in 0..order {
                    let phase = 2.0 * PI * k as f64 / order as f64;
                    points[gray(k)] = Complex::from_polar(1.0, phase);
                }
            }
            ConstellationKind::Qam => {
                if bits % 2 != 0 {
                    return Err(Error::InvalidConfig(format!("QAM order {order} is not a perfect square")));
                }
                let half = bits / 2;
                let side = 1usize << half;
                let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
                let level = |l: usize| (2 * l) as f64 - (side as f64 - 1.0);
                for li in 0..side {
                    for lq in 0..side {
                        let label = (gray(li) << half) | gray(lq);
                        points[label] = Complex::new(level(li), level(lq)) / scale;
                    }
                }
            }
        }
        Ok(Self {
            kind,
            points,
            bits_per_symbol: bits,
        })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

/// Seeded, stream-split random source. Every `(seed, stream_id)` pair names
/// an independent ChaCha8 keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for the `frame`-th trial of the `point`-th sweep point.
    pub fn for_trial(seed: u64, point: usize, frame: u64) -> Self {
        Self::new(seed, ((point as u64) << 40) ^ frame)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
