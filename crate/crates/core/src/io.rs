//! Configuration files, alphabet files and the optimizer log.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::PhiDomain;
use crate::config::{Config, SystemConfig};
use crate::error::{Error, Result};
use crate::mapping::PreChirpAlphabet;
use crate::optimizer::PsoParams;
use crate::sim::{baseline_c2, table_alphabet, Scenario, TheoryMode};

/// Parses one decimal value per line. Blank lines and `#` comments are skipped.
pub fn parse_alphabet(text: &str) -> Result<PreChirpAlphabet> {
    let values = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| Error::Parse(format!("alphabet value {l:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    PreChirpAlphabet::new(values)
}

/// Shortest round-tripping decimal per value, one per line.
pub fn format_alphabet(alphabet: &PreChirpAlphabet) -> String {
    let mut s = String::new();
    for v in alphabet.values() {
        writeln!(s, "{v}").unwrap();
    }
    s
}

pub fn read_alphabet(path: &Path) -> Result<PreChirpAlphabet> {
    parse_alphabet(&std::fs::read_to_string(path)?)
}

pub fn write_alphabet(path: &Path, alphabet: &PreChirpAlphabet) -> Result<()> {
    Ok(std::fs::write(path, format_alphabet(alphabet))?)
}

/// `iteration,best_fitness` CSV.
pub fn format_pso_log(log: &[(usize, f64)]) -> String {
    let mut s = String::from("iteration,best_fitness\n");
    for (i, f) in log {
        writeln!(s, "{i},{f:.12e}").unwrap();
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Alphabet file, relative to the configuration file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub paths: usize,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { paths: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub scheme: String,
    pub snr_db: Vec<f64>,
    pub min_bits: u64,
    pub min_errors: u64,
    pub max_bits: u64,
    pub seed: Option<u64>,
    pub frames_per_chunk: usize,
    pub theory: TheoryMode,
    pub phi_domain: PhiDomain,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            scheme: "afdm_pim".into(),
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            min_bits: 100_000,
            min_errors: 100,
            max_bits: 2_000_000,
            seed: None,
            frames_per_chunk: 256,
            theory: TheoryMode::None,
            phi_domain: PhiDomain::Time,
        }
    }
}

/// A complete configuration file:
///
/// ```toml
/// [system]
/// n_subcarriers = 4
/// n_groups = 2
/// alphabet_size = 2
/// constellation_order = 2
/// max_delay = 0
/// max_doppler = 1
///
/// [alphabet]
/// values = [0.2, 0.6]
///
/// [channel]
/// paths = 3
///
/// [simulation]
/// snr_db = [0, 5, 10]
/// seed = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemConfig,
    #[serde(default)]
    pub alphabet: AlphabetSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub pso: PsoParams,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = Self::parse(&std::fs::read_to_string(path)?)?;
        f.base_dir = path.parent().map(Path::to_path_buf);
        Ok(f)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn config(&self) -> Result<Config> {
        self.system.clone().validate()
    }

    /// Explicit values, then the file, then the tabulated alphabet for `λ`,
    /// then an irrational single value for `λ = 1`, then evenly spaced values.
    pub fn alphabet(&self) -> Result<PreChirpAlphabet> {
        let a = match (&self.alphabet.values, &self.alphabet.file) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("alphabet: give either values or file, not both".into()))
            }
            (Some(v), None) => PreChirpAlphabet::new(v.clone())?,
            (None, Some(f)) => {
                let path = match &self.base_dir {
                    Some(dir) if f.is_relative() => dir.join(f),
                    _ => f.clone(),
                };
                read_alphabet(&path)?
            }
            (None, None) => match self.system.alphabet_size {
                1 => PreChirpAlphabet::new(vec![baseline_c2()])?,
                l => table_alphabet(l).unwrap_or_else(|| PreChirpAlphabet::uniform(l)),
            },
        };
        if a.len() != self.system.alphabet_size {
            return Err(Error::InvalidAlphabet(format!(
                "alphabet has {} values, configuration expects {}",
                a.len(),
                self.system.alphabet_size
            )));
        }
        Ok(a)
    }

    /// Validated scenario; `seed` overrides the file's seed.
    pub fn scenario(&self, seed: Option<u64>) -> Result<Scenario> {
        let s = &self.simulation;
        let mut sc = Scenario::new(&s.scheme, self.config()?, self.alphabet()?, self.channel.paths, s.snr_db.clone());
        sc.min_bits = s.min_bits;
        sc.min_errors = s.min_errors;
        sc.max_bits = s.max_bits;
        sc.seed = seed.or(s.seed).unwrap_or(1);
        sc.frames_per_chunk = s.frames_per_chunk;
        sc.theory = s.theory;
        sc.phi_domain = s.phi_domain;
        sc.validate()?;
        Ok(sc)
    }
}
