//! Self-checks run by the `validate` command: chirp orthogonality, the two
//! effective-channel constructions, and the objective reduction.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{apply_channel_time, build_effective_analytic, build_effective_matrix, sample_channel};
use crate::config::{ConstellationKind, RandomSource, SystemConfig};
use crate::error::{Error, Result};
use crate::mapping::{all_patterns, PreChirpAlphabet};
use crate::optimizer::{brute_objective, brute_objective_diagonal, reduced_objective, ObjectiveContext};
use crate::sim::table_alphabet;
use crate::transceiver::{add_cpp, demodulate, modulate, remove_cpp, subcarrier_inner_product, DaftBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Orthogonality,
    Channel,
    Reduction,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Orthogonality, Suite::Channel, Suite::Reduction];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Orthogonality => "orthogonality",
            Suite::Channel => "channel",
            Suite::Reduction => "reduction",
        }
    }

    pub fn from_name(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            return Ok(Self::ALL.to_vec());
        }
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .map(|s| vec![s])
            .ok_or_else(|| Error::Parse(format!("unknown suite {name:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.suite.name(), self.name, self.detail)
    }
}

fn check(suite: Suite, name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        suite,
        name,
        passed,
        detail,
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<CheckResult>> {
    match suite {
        Suite::Orthogonality => orthogonality(),
        Suite::Channel => channel(),
        Suite::Reduction => reduction(),
    }
}

pub fn run_suites(suites: &[Suite]) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for &s in suites {
        out.extend(run_suite(s)?);
    }
    Ok(out)
}

fn table_values() -> Vec<f64> {
    (2..=4).flat_map(|l| table_alphabet(l).unwrap().values().to_vec()).collect()
}

fn orthogonality() -> Result<Vec<CheckResult>> {
    let s = Suite::Orthogonality;
    let values = table_values();
    let mut off = 0f64;
    let mut diag = 0f64;
    for n in [4usize, 8, 16] {
        let c1 = crate::config::default_c1(n, 1);
        for &a in &values {
            for &b in &values {
                for m1 in 0..n {
                    for m2 in 0..n {
                        let ip = subcarrier_inner_product::<f64>(m1, m2, a, b, c1, n);
                        if m1 == m2 {
                            diag = diag.max((ip.norm() - 1.0).abs());
                        } else {
                            off = off.max(ip.norm());
                        }
                    }
                }
            }
        }
    }
    let mut out = vec![
        check(s, "distinct subcarriers orthogonal", off < 1e-10, format!("max |<m1,m2>| = {off:.3e}")),
        check(s, "same subcarrier unit modulus", diag < 1e-10, format!("max ||<m,m>| - 1| = {diag:.3e}")),
    ];

    let cfg = SystemConfig::psk(8, 2, 4, 2, 2, 2).validate()?;
    let alphabet = table_alphabet(4).unwrap();
    let pats = all_patterns(&cfg)?;
    let basis = DaftBasis::<f64>::from_config(&cfg);
    let mut rng = RandomSource::new(0x0a7, 0).rng();
    let mut worst = 0f64;
    for _ in 0..100 {
        let a = basis.daft(&pats[rng.random_range(0..pats.len())].c2_values(&alphabet));
        worst = worst.max((&a * a.adjoint() - DMatrix::identity(8, 8)).norm());
    }
    out.push(check(s, "transform unitary", worst < 1e-10, format!("max ||A A^H - I||_F = {worst:.3e}")));
    Ok(out)
}

fn channel() -> Result<Vec<CheckResult>> {
    let s = Suite::Channel;
    let cfg = SystemConfig::psk(8, 2, 4, 2, 2, 2).validate()?;
    let alphabet = table_alphabet(4).unwrap();
    let pats = all_patterns(&cfg)?;
    let mut rng = RandomSource::new(0xc4a, 0).rng();
    let (mut dual, mut pipe, mut energy) = (0f64, 0f64, 0f64);
    for _ in 0..100 {
        let ch = sample_channel(&cfg, 3, &mut rng);
        let p = &pats[rng.random_range(0..pats.len())];
        let op = build_effective_matrix::<f64>(&ch, &cfg, &alphabet, p);
        let an = build_effective_analytic::<f64>(&ch, &cfg, &alphabet, p)?;
        dual = dual.max((&op.matrix - &an.matrix).camax());
        for hp in &an.per_path {
            energy = energy.max((hp.norm_squared() - 8.0).abs());
        }
        let x: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let tx = add_cpp(&modulate(&x, &cfg, &alphabet, p)?, &cfg)?;
        let rx = remove_cpp(&apply_channel_time(&tx, &ch, &cfg, &mut rng, 0.0)?, &cfg)?;
        let y = demodulate(&rx.samples, &cfg, &alphabet, p)?;
        let want = &an.matrix * DVector::from_column_slice(&x);
        pipe = pipe.max((DVector::from_column_slice(&y) - want).camax());
    }
    Ok(vec![
        check(s, "analytic matches operator product", dual < 1e-9, format!("max entry error {dual:.3e}")),
        check(s, "per-path energy equals N", energy < 1e-9, format!("max ||H_p||_F^2 - N = {energy:.3e}")),
        check(s, "prefixed pipeline matches H_eff x", pipe < 1e-9, format!("max error {pipe:.3e}")),
    ])
}

fn reduction() -> Result<Vec<CheckResult>> {
    let s = Suite::Reduction;
    let mut out = Vec::new();
    let mut rng = RandomSource::new(0x4ed, 0).rng();
    let alphabets: Vec<PreChirpAlphabet> = (0..10)
        .map(|_| PreChirpAlphabet::new(vec![rng.random_range(0.01..0.49), rng.random_range(0.51..0.99)]))
        .collect::<Result<_>>()?;
    for (kind, order, name_diag, name_const) in [
        (ConstellationKind::Psk, 2, "BPSK matched-symbol sum is 2 M^N reduced", "BPSK full sum alphabet independent"),
        (ConstellationKind::Qam, 4, "4-QAM matched-symbol sum is 2 M^N reduced", "4-QAM full sum alphabet independent"),
    ] {
        let cfg = SystemConfig::psk(4, 2, 2, order, 0, 1).with_kind(kind).validate()?;
        let ctx = ObjectiveContext::new(&cfg, 2)?;
        let scale = 2.0 * (order as f64).powi(cfg.n() as i32);
        let mut rel = 0f64;
        let mut full = Vec::new();
        for a in &alphabets {
            for &p in &ctx.pairs {
                let d = brute_objective_diagonal(a, &ctx, p, 20)?;
                let r = reduced_objective(a, &ctx, p)?;
                rel = rel.max((d - scale * r).abs() / d.abs().max(1e-300));
            }
            full.push(brute_objective(a, &ctx, ctx.pairs[0], 20)?);
        }
        let spread = full.iter().map(|f| (f - full[0]).abs() / full[0]).fold(0.0, f64::max);
        out.push(check(s, name_diag, rel < 1e-8, format!("max relative error {rel:.3e}")));
        out.push(check(s, name_const, spread < 1e-8, format!("max relative spread {spread:.3e}")));
    }
    let cfg = SystemConfig::psk(6, 2, 3, 2, 1, 1).validate()?;
    let ctx = ObjectiveContext::new(&cfg, 3)?;
    let a = table_alphabet(3).unwrap();
    let worst = (0..ctx.patterns.len())
        .map(|j| reduced_objective(&a, &ctx, (j, j)).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(check(s, "identical patterns give zero", worst < 1e-12, format!("max |O_jj| = {worst:.3e}")));
    Ok(out)
}
