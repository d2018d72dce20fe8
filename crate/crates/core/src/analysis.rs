//! Pairwise error analysis: UPEP, the ABEP union bound, diversity order and
//! spectral efficiency.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rayon::prelude::*;

use crate::channel::{analytic_path, path_time_operator, PathGeometry};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::mapping::{all_patterns, check_enumeration_cap, index_bits_per_group, CodewordIndex, PreChirpAlphabet};
use crate::scalar::Real;
use crate::transceiver::DaftBasis;

/// Relative eigenvalue threshold below which an eigenvalue of `Ψ` counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// `ΔΦ = Φ̂(x̂) - Φ(x)` with the spectrum of `Ψ = ΔΦᴴ ΔΦ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDifference<T: Real> {
    pub delta_phi: DMatrix<Complex<T>>,
    pub psi: DMatrix<Complex<T>>,
    /// Non-negative, descending. Entries under the rank tolerance are set to 0.
    pub eigenvalues: Vec<T>,
    pub rank: usize,
}

impl<T: Real> PairwiseDifference<T> {
    pub fn new(delta_phi: DMatrix<Complex<T>>) -> Self {
        let psi = delta_phi.adjoint() * &delta_phi;
        let (eigenvalues, rank) = psi_spectrum(&psi);
        Self {
            delta_phi,
            psi,
            eigenvalues,
            rank,
        }
    }

    pub fn upep(&self, p_paths: usize, n0: f64) -> f64 {
        let ev: Vec<f64> = self.eigenvalues.iter().map(|v| v.as_f64()).collect();
        upep(&ev, p_paths, n0)
    }
}

/// Clamped, thresholded eigenvalues of a Hermitian PSD matrix and its rank.
pub fn psi_spectrum<T: Real>(psi: &DMatrix<Complex<T>>) -> (Vec<T>, usize) {
    let mut ev: Vec<T> = SymmetricEigen::new(psi.clone())
        .eigenvalues
        .iter()
        .map(|v| v.max(T::zero()))
        .collect();
    ev.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    let max = ev.first().copied().unwrap_or(T::zero());
    let tol = max * T::lit(RANK_TOLERANCE);
    let mut rank = 0;
    for v in ev.iter_mut() {
        if *v > tol && *v > T::zero() {
            rank += 1;
        } else {
            *v = T::zero();
        }
    }
    (ev, rank)
}

/// `(1/12) Π 1/(1 + λ/(4 P n0)) + (1/4) Π 1/(1 + λ/(3 P n0))`.
pub fn upep(eigenvalues: &[f64], p_paths: usize, n0: f64) -> f64 {
    let p = p_paths as f64;
    let prod = |k: f64| {
        eigenvalues
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| {
                let s = k * p * n0;
                s / (s + l)
            })
            .product::<f64>()
    };
    prod(4.0) / 12.0 + prod(3.0) / 4.0
}

/// A weighted set of path geometries (one `PathGeometry` per path).
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySet {
    pub geometries: Vec<Vec<PathGeometry>>,
    /// Sum to 1.
    pub weights: Vec<f64>,
}

/// Delay/Doppler cells in delay-major order.
pub fn cells(cfg: &Config) -> Vec<PathGeometry> {
    let a = cfg.max_doppler() as i64;
    (0..=cfg.max_delay())
        .flat_map(|d| (-a..=a).map(move |al| PathGeometry::new(d, al)))
        .collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// `P(⌊α_max cos θ⌋ = k)` for `θ ~ U[-π, π]`.
pub fn jakes_doppler_pmf(max_doppler: usize) -> Vec<(i64, f64)> {
    if max_doppler == 0 {
        return vec![(0, 1.0)];
    }
    let a = max_doppler as f64;
    let cdf = |t: f64| 1.0 - t.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
    (-(max_doppler as i64)..=max_doppler as i64)
        .map(|k| (k, cdf((k + 1) as f64 / a) - cdf(k as f64 / a)))
        .filter(|(_, p)| *p > 0.0)
        .collect()
}

impl GeometrySet {
    pub fn len(&self) -> usize {
        self.geometries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geometries.is_empty()
    }

    pub fn paths(&self) -> usize {
        self.geometries.first().map_or(0, Vec::len)
    }

    pub fn single(geometry: Vec<PathGeometry>) -> Self {
        Self {
            geometries: vec![geometry],
            weights: vec![1.0],
        }
    }

    /// All `C(P_max, P)` sets of distinct cells, uniformly weighted. When
    /// `P > P_max` distinct placements do not exist; every multiset of size
    /// `P` that covers all cells is used instead.
    pub fn placements(cfg: &Config, p_paths: usize) -> Self {
        let cells = cells(cfg);
        let idx = if p_paths <= cells.len() {
            combinations(cells.len(), p_paths)
        } else {
            multisets(cells.len(), p_paths)
                .into_iter()
                .filter(|m| {
                    let mut d = m.clone();
                    d.dedup();
                    d.len() == cells.len()
                })
                .collect()
        };
        let w = 1.0 / idx.len() as f64;
        Self {
            weights: vec![w; idx.len()],
            geometries: idx.into_iter().map(|c| c.into_iter().map(|i| cells[i]).collect()).collect(),
        }
    }

    /// The exact distribution of the simulator's channel geometry: `P`
    /// independent paths, delay uniform, Doppler `⌊α_max cos θ⌋`. Tuples are
    /// merged into sorted multisets with summed probability.
    pub fn jakes(cfg: &Config, p_paths: usize) -> Self {
        let pd = 1.0 / (cfg.max_delay() + 1) as f64;
        let single: Vec<(PathGeometry, f64)> = (0..=cfg.max_delay())
            .flat_map(|d| {
                jakes_doppler_pmf(cfg.max_doppler())
                    .into_iter()
                    .map(move |(a, p)| (PathGeometry::new(d, a), p * pd))
            })
            .collect();
        let mut acc: BTreeMap<Vec<PathGeometry>, f64> = BTreeMap::new();
        for m in multisets(single.len(), p_paths) {
            // multinomial count of orderings
            let mut count = (1..=p_paths).product::<usize>() as f64;
            let mut i = 0;
            while i < m.len() {
                let j = m[i..].iter().take_while(|&&v| v == m[i]).count();
                count /= (1..=j).product::<usize>() as f64;
                i += j;
            }
            let prob = count * m.iter().map(|&i| single[i].1).product::<f64>();
            *acc.entry(m.iter().map(|&i| single[i].0).collect()).or_default() += prob;
        }
        let (geometries, weights) = acc.into_iter().unzip();
        Self { geometries, weights }
    }
}

/// Which per-path image a codeword difference is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiDomain {
    /// `Φ(x) = [H_1 x, …, H_P x]` with `H_p = A T_p Aᴴ` built from the
    /// codeword's own pattern, so two hypotheses are compared after
    /// demodulation with different transforms.
    #[default]
    Daft,
    /// `Φ(x) = [T_1 Aᴴ x, …, T_P Aᴴ x]`, the images the ML receiver actually
    /// separates. Equal to the DAFT form up to a unitary when both codewords
    /// share a pattern.
    Time,
}

/// Gain-free `Φ` of every codeword under one geometry, stored row-major per
/// codeword as `N·P` entries.
struct PhiTable<T: Real> {
    n: usize,
    p: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> PhiTable<T> {
    fn new(cfg: &Config, alphabet: &PreChirpAlphabet, geometry: &[PathGeometry], domain: PhiDomain) -> Result<Self> {
        let n = cfg.n();
        let p = geometry.len();
        let patterns = all_patterns(cfg)?;
        let points: Vec<Complex<T>> = cfg
            .constellation()
            .points
            .iter()
            .map(|z| Complex::new(T::lit(z.re), T::lit(z.im)))
            .collect();
        let count = 1usize << cfg.frame_bits();
        let mut data = Vec::with_capacity(count * n * p);
        match domain {
            PhiDomain::Daft => {
                let mut sparse = Vec::with_capacity(patterns.len());
                for pat in &patterns {
                    let c2 = pat.c2_values(alphabet);
                    let paths = geometry
                        .iter()
                        .map(|g| analytic_path::<T>(*g, cfg, &c2))
                        .collect::<Result<Vec<_>>>()?;
                    sparse.push(paths);
                }
                for v in 0..count as u64 {
                    let idx = CodewordIndex::from_value(v, cfg);
                    let paths = &sparse[idx.pattern_id(cfg)];
                    for row in 0..n {
                        for sp in paths {
                            data.push(sp.values[row] * points[idx.labels[sp.column(row)]]);
                        }
                    }
                }
            }
            PhiDomain::Time => {
                for g in geometry {
                    analytic_path::<T>(*g, cfg, &vec![0.0; n])?;
                }
                let basis = DaftBasis::<T>::from_config(cfg);
                let ops: Vec<DMatrix<Complex<T>>> = geometry.iter().map(|g| path_time_operator::<T>(*g, cfg)).collect();
                let per_pattern: Vec<Vec<DMatrix<Complex<T>>>> = patterns
                    .iter()
                    .map(|pat| {
                        let ah = basis.daft(&pat.c2_values(alphabet)).adjoint();
                        ops.iter().map(|t| t * &ah).collect()
                    })
                    .collect();
                for v in 0..count as u64 {
                    let idx = CodewordIndex::from_value(v, cfg);
                    let x = DVector::from_iterator(n, idx.labels.iter().map(|&l| points[l]));
                    let cols: Vec<DVector<Complex<T>>> = per_pattern[idx.pattern_id(cfg)].iter().map(|m| m * &x).collect();
                    for row in 0..n {
                        for c in &cols {
                            data.push(c[row]);
                        }
                    }
                }
            }
        }
        Ok(Self { n, p, data })
    }

    fn get(&self, v: usize) -> &[Complex<T>] {
        let s = self.n * self.p;
        &self.data[v * s..(v + 1) * s]
    }

    fn difference(&self, a: usize, b: usize) -> DMatrix<Complex<T>> {
        let (x, y) = (self.get(a), self.get(b));
        DMatrix::from_fn(self.n, self.p, |r, c| x[r * self.p + c] - y[r * self.p + c])
    }
}

fn check_analysis_inputs(cfg: &Config, alphabet: &PreChirpAlphabet, geometries: &GeometrySet, cap_bits: usize) -> Result<()> {
    check_enumeration_cap(cfg, cap_bits)?;
    if alphabet.len() != cfg.lambda() {
        return Err(Error::InvalidAlphabet(format!(
            "alphabet has {} values, configuration expects {}",
            alphabet.len(),
            cfg.lambda()
        )));
    }
    if geometries.is_empty() {
        return Err(Error::InvalidConfig("empty geometry set".into()));
    }
    Ok(())
}

/// Ψ spectra of every unordered codeword pair under every geometry,
/// precomputed once so the bound can be evaluated on a whole SNR grid.
#[derive(Debug, Clone)]
pub struct AbepEvaluator {
    p_paths: usize,
    frame_bits: usize,
    /// `(geometry weight · bit errors, eigenvalues)` per (geometry, pair).
    terms: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbepResult {
    /// Clipped to `[0, 1]`.
    pub bound: f64,
    /// Before clipping.
    pub raw: f64,
    pub n0: f64,
}

impl AbepEvaluator {
    pub fn new(cfg: &Config, alphabet: &PreChirpAlphabet, geometries: &GeometrySet, cap_bits: usize) -> Result<Self> {
        Self::with_domain(cfg, alphabet, geometries, cap_bits, PhiDomain::Daft)
    }

    pub fn with_domain(
        cfg: &Config,
        alphabet: &PreChirpAlphabet,
        geometries: &GeometrySet,
        cap_bits: usize,
        domain: PhiDomain,
    ) -> Result<Self> {
        check_analysis_inputs(cfg, alphabet, geometries, cap_bits)?;
        let count = 1usize << cfg.frame_bits();
        let mut terms = Vec::new();
        for (geo, &w) in geometries.geometries.iter().zip(&geometries.weights) {
            let table = PhiTable::<f64>::new(cfg, alphabet, geo, domain)?;
            let part: Vec<(f64, Vec<f64>)> = (0..count)
                .into_par_iter()
                .flat_map_iter(|a| {
                    let table = &table;
                    (a + 1..count).map(move |b| {
                        let tau = ((a ^ b) as u64).count_ones() as f64;
                        let psi = {
                            let d = table.difference(a, b);
                            d.adjoint() * d
                        };
                        let (ev, _) = psi_spectrum(&psi);
                        (w * tau, ev.into_iter().filter(|&l| l > 0.0).collect())
                    })
                })
                .collect();
            terms.extend(part);
        }
        Ok(Self {
            p_paths: geometries.paths(),
            frame_bits: cfg.frame_bits(),
            terms,
        })
    }

    /// `(1 / (B 2^B)) Σ_{ordered pairs} UPEP · τ`, clipped to `[0, 1]`.
    pub fn bound(&self, n0: f64) -> AbepResult {
        let b = self.frame_bits as f64;
        let sum: f64 = self.terms.iter().map(|(wt, ev)| wt * upep(ev, self.p_paths, n0)).sum();
        // each unordered pair stands for both orders
        let raw = 2.0 * sum / (b * 2f64.powi(self.frame_bits as i32));
        AbepResult {
            bound: raw.clamp(0.0, 1.0),
            raw,
            n0,
        }
    }

    pub fn curve(&self, snr_db: &[f64]) -> Vec<AbepResult> {
        snr_db.iter().map(|&s| self.bound(n0_from_snr_db(s))).collect()
    }
}

/// `N0 = 10^(-SNR/10)` with unit symbol energy.
pub fn n0_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub fn abep_upper_bound(
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
    geometries: &GeometrySet,
    n0: f64,
    cap_bits: usize,
) -> Result<AbepResult> {
    Ok(AbepEvaluator::new(cfg, alphabet, geometries, cap_bits)?.bound(n0))
}

/// Slope of `-log10(bound)` per decade of SNR between two SNRs.
pub fn bound_slope(evaluator: &AbepEvaluator, snr_lo_db: f64, snr_hi_db: f64) -> f64 {
    let lo = evaluator.bound(n0_from_snr_db(snr_lo_db)).raw;
    let hi = evaluator.bound(n0_from_snr_db(snr_hi_db)).raw;
    (lo.log10() - hi.log10()) / ((snr_hi_db - snr_lo_db) / 10.0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiversityReport {
    /// Minimum rank of `ΔΦ` over all distinct pairs and geometries.
    pub mu: usize,
    /// A pair attaining the minimum, as payload values.
    pub worst_pair: (u64, u64),
    pub worst_geometry: Vec<PathGeometry>,
    pub pairs_checked: u64,
}

/// Exhaustive minimum rank. Geometries with the same set of distinct cells
/// are scanned once since duplicate columns do not change the rank.
pub fn diversity_order(
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
    geometries: &GeometrySet,
    cap_bits: usize,
) -> Result<DiversityReport> {
    diversity_order_in(cfg, alphabet, geometries, cap_bits, PhiDomain::Daft)
}

pub fn diversity_order_in(
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
    geometries: &GeometrySet,
    cap_bits: usize,
    domain: PhiDomain,
) -> Result<DiversityReport> {
    check_analysis_inputs(cfg, alphabet, geometries, cap_bits)?;
    let mut seen = std::collections::BTreeSet::new();
    let count = 1usize << cfg.frame_bits();
    let mut best: Option<DiversityReport> = None;
    let mut pairs_checked = 0u64;
    for geo in &geometries.geometries {
        let mut key = geo.clone();
        key.sort();
        key.dedup();
        if !seen.insert(key) {
            continue;
        }
        let table = PhiTable::<f64>::new(cfg, alphabet, geo, domain)?;
        let found = (0..count)
            .into_par_iter()
            .map(|a| {
                let mut local: Option<(usize, usize, usize)> = None;
                for b in a + 1..count {
                    let d = table.difference(a, b);
                    let (_, rank) = psi_spectrum(&(d.adjoint() * &d));
                    if local.is_none_or(|(r, _, _)| rank < r) {
                        local = Some((rank, a, b));
                    }
                }
                local
            })
            .reduce(
                || None,
                |x, y| match (x, y) {
                    (Some(p), Some(q)) => Some(if q.0 < p.0 || (q.0 == p.0 && (q.1, q.2) < (p.1, p.2)) { q } else { p }),
                    (p, None) => p,
                    (None, q) => q,
                },
            );
        pairs_checked += (count * (count - 1) / 2) as u64;
        if let Some((rank, a, b)) = found {
            if best.as_ref().is_none_or(|r| rank < r.mu) {
                best = Some(DiversityReport {
                    mu: rank,
                    worst_pair: (a as u64, b as u64),
                    worst_geometry: geo.clone(),
                    pairs_checked: 0,
                });
            }
        }
    }
    let mut report = best.ok_or_else(|| Error::InvalidConfig("no codeword pairs to compare".into()))?;
    report.pairs_checked = pairs_checked;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullDiversityReport {
    pub p_paths: usize,
    /// `(d_max + 1)(2 α_max + 1)`.
    pub cells: usize,
    pub n: usize,
    pub paths_fit: bool,
    pub cells_fit: bool,
    /// `P <= (d_max + 1)(2 α_max + 1) <= N`.
    pub condition1: bool,
    /// Irrational alphabet values cannot be certified in floating point.
    pub condition2: &'static str,
}

pub fn check_full_diversity_conditions(cfg: &Config, p_paths: usize) -> FullDiversityReport {
    let cells = cfg.cell_count();
    let paths_fit = p_paths <= cells;
    let cells_fit = cells <= cfg.n();
    FullDiversityReport {
        p_paths,
        cells,
        n: cfg.n(),
        paths_fit,
        cells_fit,
        condition1: paths_fit && cells_fit,
        condition2: "assumed: irrational pre-chirp values cannot be certified in floating point",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Classic AFDM with `M`-ary symbols.
    Afdm { order: usize },
    /// Subcarrier-activation index modulation, `a` of `n` active.
    AfdmIm { n: usize, active: usize, order: usize },
    /// Pre-chirp index modulation with `λ = N_c`.
    AfdmPim { n_c: usize, order: usize },
}

fn log2_binomial_floor(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    // C(n, k) fits u128 for every practical group size
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    (127 - c.leading_zeros()) as usize
}

/// Bits per subcarrier, including index bits.
pub fn spectral_efficiency(scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Afdm { order } => (order as f64).log2(),
        Scheme::AfdmIm { n, active, order } => {
            (log2_binomial_floor(n, active) as f64 + active as f64 * (order as f64).log2()) / n as f64
        }
        Scheme::AfdmPim { n_c, order } => index_bits_per_group(n_c, n_c) as f64 / n_c as f64 + (order as f64).log2(),
    }
}
