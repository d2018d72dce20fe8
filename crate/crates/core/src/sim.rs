//! Monte-Carlo BER sweeps, scenario presets and CSV output.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::{n0_from_snr_db, AbepEvaluator, GeometrySet, PhiDomain};
use crate::channel::{apply_channel_time, sample_channel};
use crate::config::{Config, RandomSource, SystemConfig};
use crate::detection::{count_bit_errors, MlDetector, PatternBank};
use crate::error::{Error, Result};
use crate::mapping::{bits_to_frame, check_enumeration_cap, payload_from_value, PreChirpAlphabet, DEFAULT_CAP_BITS};
use crate::transceiver::{add_cpp, modulate, remove_cpp};

pub const CSV_HEADER: &str = "scheme,snr_db,kind,bits,errors,ber,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Simulation,
    Theory,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Simulation => "simulation",
            Kind::Theory => "theory",
        }
    }
}

/// Which geometry distribution the theory rows average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoryMode {
    #[default]
    None,
    /// The simulator's own geometry law (Jakes Doppler, uniform delay).
    Jakes,
    /// Uniform over distinct delay/Doppler placements.
    Placements,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scheme: String,
    pub cfg: Config,
    pub alphabet: PreChirpAlphabet,
    pub p_paths: usize,
    /// Strictly increasing; `+∞` stands for a noiseless run.
    pub snr_grid_db: Vec<f64>,
    pub min_bits: u64,
    pub min_errors: u64,
    /// Hard ceiling per point.
    pub max_bits: u64,
    pub seed: u64,
    /// Frames simulated between stopping-rule checks.
    pub frames_per_chunk: usize,
    pub theory: TheoryMode,
    /// Codeword images used by the theory rows.
    pub phi_domain: PhiDomain,
}

impl Scenario {
    pub fn new(scheme: &str, cfg: Config, alphabet: PreChirpAlphabet, p_paths: usize, snr_grid_db: Vec<f64>) -> Self {
        Self {
            scheme: scheme.to_string(),
            cfg,
            alphabet,
            p_paths,
            snr_grid_db,
            min_bits: 100_000,
            min_errors: 100,
            max_bits: 2_000_000,
            seed: 1,
            frames_per_chunk: 256,
            theory: TheoryMode::None,
            phi_domain: PhiDomain::Time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_paths == 0 {
            return Err(Error::InvalidConfig("at least one path required".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig("SNR grid must be non-empty and strictly increasing".into()));
        }
        if self.min_errors < 100 && self.min_bits < 100_000 {
            return Err(Error::InvalidConfig(
                "stopping rule needs min_errors >= 100 or min_bits >= 100000".into(),
            ));
        }
        if self.max_bits < self.min_bits {
            return Err(Error::InvalidConfig("max_bits must be at least min_bits".into()));
        }
        if self.frames_per_chunk == 0 {
            return Err(Error::InvalidConfig("frames_per_chunk must be positive".into()));
        }
        if self.alphabet.len() != self.cfg.lambda() {
            return Err(Error::InvalidAlphabet(format!(
                "alphabet has {} values, configuration expects {}",
                self.alphabet.len(),
                self.cfg.lambda()
            )));
        }
        check_enumeration_cap(&self.cfg, DEFAULT_CAP_BITS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub kind: Kind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scheme: String,
    pub seed: u64,
    pub points: Vec<BerPoint>,
    /// The sweep was stopped early; the last simulated point may be short.
    pub interrupted: bool,
}

impl SweepResult {
    pub fn simulation(&self) -> impl Iterator<Item = &BerPoint> {
        self.points.iter().filter(|p| p.kind == Kind::Simulation)
    }

    pub fn theory(&self) -> impl Iterator<Item = &BerPoint> {
        self.points.iter().filter(|p| p.kind == Kind::Theory)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.11e},{}",
                self.scheme,
                p.snr_db,
                p.kind.as_str(),
                p.bits,
                p.errors,
                p.ber,
                self.seed
            );
        }
        out
    }
}

/// Bit errors of one frame: random payload, fresh channel, AWGN, ML detection.
fn simulate_frame(sc: &Scenario, bank: &PatternBank<f64>, point: usize, frame: u64, n0: f64) -> Result<usize> {
    let cfg = &sc.cfg;
    let mut rng = RandomSource::for_trial(sc.seed, point, frame).rng();
    let b = cfg.frame_bits();
    let payload = payload_from_value(rng.random_range(0..1u64 << b), b);
    let f = bits_to_frame(&payload, cfg, &sc.alphabet)?;
    let ch = sample_channel(cfg, sc.p_paths, &mut rng);
    let s = add_cpp(&modulate(&f.symbols, cfg, &sc.alphabet, &f.pcpg)?, cfg)?;
    let r = remove_cpp(&apply_channel_time(&s, &ch, cfg, &mut rng, n0)?, cfg)?;
    let det = MlDetector::new(cfg, bank, &ch, DEFAULT_CAP_BITS)?.detect(&r.samples)?;
    count_bit_errors(&payload, &det.payload_bits)
}

pub fn run_ber_sweep(sc: &Scenario) -> Result<SweepResult> {
    run_ber_sweep_with(sc, &AtomicBool::new(false), |_| {})
}

/// Sweep with a cooperative stop flag, checked between chunks, and a
/// callback invoked with every finished point.
pub fn run_ber_sweep_with(sc: &Scenario, stop: &AtomicBool, mut on_point: impl FnMut(&BerPoint)) -> Result<SweepResult> {
    sc.validate()?;
    let bank = PatternBank::<f64>::new(&sc.cfg, &sc.alphabet)?;
    let bits_per_frame = sc.cfg.frame_bits() as u64;
    let mut points = Vec::new();
    let mut interrupted = false;
    'grid: for (pi, &snr) in sc.snr_grid_db.iter().enumerate() {
        let n0 = if snr.is_infinite() { 0.0 } else { n0_from_snr_db(snr) };
        let (mut bits, mut errors, mut next) = (0u64, 0u64, 0u64);
        loop {
            let done = (errors >= sc.min_errors && bits >= sc.min_bits) || bits >= sc.max_bits;
            if done {
                break;
            }
            if stop.load(Ordering::Relaxed) {
                interrupted = true;
            }
            if interrupted {
                if bits > 0 {
                    points.push(sim_point(snr, bits, errors));
                }
                break 'grid;
            }
            let remaining = (sc.max_bits - bits).div_ceil(bits_per_frame);
            let count = (sc.frames_per_chunk as u64).min(remaining);
            let chunk: Result<Vec<usize>> = (next..next + count)
                .into_par_iter()
                .map(|f| simulate_frame(sc, &bank, pi, f, n0))
                .collect();
            errors += chunk?.iter().map(|&e| e as u64).sum::<u64>();
            bits += count * bits_per_frame;
            next += count;
        }
        let p = sim_point(snr, bits, errors);
        on_point(&p);
        points.push(p);
    }
    if sc.theory != TheoryMode::None && !interrupted {
        let geo = match sc.theory {
            TheoryMode::Jakes => GeometrySet::jakes(&sc.cfg, sc.p_paths),
            _ => GeometrySet::placements(&sc.cfg, sc.p_paths),
        };
        let eval = AbepEvaluator::with_domain(&sc.cfg, &sc.alphabet, &geo, DEFAULT_CAP_BITS, sc.phi_domain)?;
        for &snr in sc.snr_grid_db.iter().filter(|s| s.is_finite()) {
            let r = eval.bound(n0_from_snr_db(snr));
            let p = BerPoint {
                snr_db: snr,
                bits: 0,
                errors: 0,
                ber: r.bound,
                kind: Kind::Theory,
            };
            on_point(&p);
            points.push(p);
        }
    }
    Ok(SweepResult {
        scheme: sc.scheme.clone(),
        seed: sc.seed,
        points,
        interrupted,
    })
}

fn sim_point(snr_db: f64, bits: u64, errors: u64) -> BerPoint {
    BerPoint {
        snr_db,
        bits,
        errors,
        ber: if bits == 0 { 0.0 } else { errors as f64 / bits as f64 },
        kind: Kind::Simulation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig4,
    Fig7Pim,
    Fig8Lo,
    Fig8Hi,
    BaselineAfdm,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig4, Preset::Fig7Pim, Preset::Fig8Lo, Preset::Fig8Hi, Preset::BaselineAfdm];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig4 => "fig4",
            Preset::Fig7Pim => "fig7_pim",
            Preset::Fig8Lo => "fig8_lo",
            Preset::Fig8Hi => "fig8_hi",
            Preset::BaselineAfdm => "baseline_afdm",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Parse(format!("unknown preset {name:?}")))
    }
}

/// Pre-chirp alphabets for `λ = 2, 3, 4`.
pub fn table_alphabet(lambda: usize) -> Option<PreChirpAlphabet> {
    let v = match lambda {
        2 => vec![0.20, 0.60],
        3 => vec![0.29, 0.62, 0.93],
        4 => vec![0.01, 0.20, 0.41, 0.80],
        _ => return None,
    };
    Some(PreChirpAlphabet::new(v).expect("table alphabets are valid"))
}

/// Fixed pre-chirp of the single-chirp baseline, an irrational value in `(0, 1)`.
pub fn baseline_c2() -> f64 {
    std::f64::consts::SQRT_2 / 10.0
}

pub fn preset_scenario(preset: Preset) -> Scenario {
    let grid = |hi: u32, step: usize| (0..=hi).step_by(step).map(f64::from).collect::<Vec<_>>();
    let build = |raw: SystemConfig| raw.validate().expect("preset configuration is valid");
    let mut sc = match preset {
        Preset::Fig4 => Scenario::new(
            preset.name(),
            build(SystemConfig::psk(6, 2, 3, 2, 1, 1)),
            table_alphabet(3).unwrap(),
            3,
            grid(20, 4),
        ),
        Preset::Fig7Pim => Scenario::new(
            preset.name(),
            build(SystemConfig::psk(8, 2, 4, 2, 1, 2)),
            table_alphabet(4).unwrap(),
            3,
            grid(20, 5),
        ),
        Preset::Fig8Lo | Preset::Fig8Hi => {
            let a = if preset == Preset::Fig8Lo { 1 } else { 2 };
            let mut sc = Scenario::new(
                preset.name(),
                build(SystemConfig::psk(4, 2, 2, 2, 0, a)),
                table_alphabet(2).unwrap(),
                3,
                grid(25, 5),
            );
            sc.theory = TheoryMode::Jakes;
            sc
        }
        Preset::BaselineAfdm => Scenario::new(
            preset.name(),
            build(SystemConfig::psk(8, 1, 1, 4, 2, 2)),
            PreChirpAlphabet::new(vec![baseline_c2()]).unwrap(),
            4,
            grid(20, 5),
        ),
    };
    sc.max_bits = 1_000_000;
    sc
}
