//! Bits <-> (symbol vector, pre-chirp pattern group).
//!
//! Each group of `n_c` subcarriers carries `b1 = n_c·log2(M)` symbol bits
//! followed by `b2` index bits. The index bits select one of the first
//! `2^b2` permutations of `(0, .., n_c-1)` in lexicographic order; entry `m`
//! of the permutation is the alphabet index used as pre-chirp on subcarrier
//! `m` of the group. All bit words are most-significant-bit first.

use num_bigint::BigUint;
use num_complex::Complex;

use crate::config::{Config, Constellation};
use crate::error::{Error, Result};

/// Default enumeration cap, `2^20` codewords.
pub const DEFAULT_CAP_BITS: usize = 20;

/// Largest group size whose permutation index fits the `u64` rank arithmetic.
const MAX_PERMUTATION_LEN: usize = 20;

/// Candidate pre-chirp values, strictly increasing inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreChirpAlphabet {
    values: Vec<f64>,
}

impl PreChirpAlphabet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidAlphabet("empty alphabet".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidAlphabet(format!("value {v} outside (0, 1)")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidAlphabet("values must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// Wraps arbitrary values without validation. Used for candidate
    /// evaluation and for degenerate experiments.
    pub fn unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// `λ` evenly spaced values, `(2i + 1) / (2λ)`.
    pub fn uniform(lambda: usize) -> Self {
        let values = (0..lambda)
            .map(|i| (2 * i + 1) as f64 / (2 * lambda) as f64)
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// Per-subcarrier alphabet indices for a whole frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PreChirpPatternGroup {
    pub assignment: Vec<usize>,
    pub group_size: usize,
}

impl PreChirpPatternGroup {
    /// Classic single-chirp frame: every subcarrier uses alphabet entry 0.
    pub fn uniform(n: usize, group_size: usize) -> Self {
        Self {
            assignment: vec![0; n],
            group_size,
        }
    }

    /// Pre-chirp value of every subcarrier.
    pub fn c2_values(&self, alphabet: &PreChirpAlphabet) -> Vec<f64> {
        self.assignment.iter().map(|&i| alphabet.get(i)).collect()
    }

    pub fn hamming_distance(&self, other: &Self) -> usize {
        self.assignment
            .iter()
            .zip(&other.assignment)
            .filter(|(a, b)| a != b)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub payload_bits: Vec<u8>,
    pub symbols: Vec<Complex<f64>>,
    pub pcpg: PreChirpPatternGroup,
}

/// Index bits a group can carry for alphabet size `λ` and `n_c` subcarriers.
pub fn index_bits_per_group(lambda: usize, n_c: usize) -> usize {
    let fact = |k: usize| (1..=k).fold(BigUint::from(1u32), |acc, i| acc * i);
    let binom = |a: usize, b: usize| fact(a) / (fact(b) * fact(a - b));
    let floor_log2 = |x: BigUint| if x.bits() == 0 { 0 } else { (x.bits() - 1) as usize };
    let c = binom(lambda.max(n_c), lambda.min(n_c));
    if lambda >= n_c {
        floor_log2(c * fact(n_c))
    } else if n_c % lambda == 0 {
        floor_log2(fact(lambda)) * (n_c / lambda)
    } else {
        let tail = BigUint::from(lambda).pow((n_c - lambda) as u32);
        floor_log2(c * fact(lambda) * tail)
    }
}

fn factorial_u64(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// The `rank`-th permutation of `(0, .., n-1)` in lexicographic order.
pub fn unrank_permutation(mut rank: u64, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = factorial_u64(n - 1 - i);
        let d = (rank / f) as usize;
        rank %= f;
        out.push(pool.remove(d));
    }
    out
}

/// Lexicographic rank of a permutation, `None` if `perm` is not one.
pub fn rank_permutation(perm: &[usize]) -> Option<u64> {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut rank = 0u64;
    for (i, &p) in perm.iter().enumerate() {
        if p >= n || seen[p] {
            return None;
        }
        let smaller_unused = (0..p).filter(|&q| !seen[q]).count() as u64;
        rank += smaller_unused * factorial_u64(n - 1 - i);
        seen[p] = true;
    }
    Some(rank)
}

fn bits_to_u64(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

fn u64_to_bits(value: u64, width: usize, out: &mut Vec<u8>) {
    for i in (0..width).rev() {
        out.push(((value >> i) & 1) as u8);
    }
}

/// Payload bits of `value`, `width` bits, most significant first.
pub fn payload_from_value(value: u64, width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(width);
    u64_to_bits(value, width, &mut out);
    out
}

pub fn value_from_payload(bits: &[u8]) -> u64 {
    bits_to_u64(bits)
}

fn check_pattern_support(lambda: usize, n_c: usize) -> Result<()> {
    if lambda != n_c && lambda != 1 {
        return Err(Error::UnsupportedPatternMapping { lambda, n_c });
    }
    if n_c > MAX_PERMUTATION_LEN {
        return Err(Error::InvalidConfig(format!("group size {n_c} too large for pattern indexing")));
    }
    Ok(())
}

/// Pattern of one group for a `b2`-bit index word.
///
/// Requires `λ = n_c`. With `λ = 1` there are no index bits and the single
/// legitimate pattern uses alphabet entry 0 everywhere.
pub fn index_bits_to_group_pattern(bits: &[u8], lambda: usize, n_c: usize) -> Result<Vec<usize>> {
    check_pattern_support(lambda, n_c)?;
    let b2 = index_bits_per_group(lambda, n_c);
    if bits.len() != b2 {
        return Err(Error::BitLength {
            expected: b2,
            got: bits.len(),
        });
    }
    Ok(group_pattern(bits_to_u64(bits), lambda, n_c))
}

/// Pattern with codebook index `index`; caller guarantees `index < 2^b2`.
pub(crate) fn group_pattern(index: u64, lambda: usize, n_c: usize) -> Vec<usize> {
    if lambda == 1 && n_c != 1 {
        vec![0; n_c]
    } else {
        unrank_permutation(index, n_c)
    }
}

/// Inverse of [`index_bits_to_group_pattern`].
pub fn group_pattern_to_index(pattern: &[usize], lambda: usize, n_c: usize, group: usize) -> Result<u64> {
    check_pattern_support(lambda, n_c)?;
    if pattern.len() != n_c {
        return Err(Error::LengthMismatch {
            expected: n_c,
            got: pattern.len(),
        });
    }
    if lambda == 1 && n_c != 1 {
        return if pattern.iter().all(|&p| p == 0) {
            Ok(0)
        } else {
            Err(Error::IllegalPattern {
                group,
                reason: "single-entry alphabet only admits index 0".into(),
            })
        };
    }
    let rank = rank_permutation(pattern).ok_or_else(|| Error::IllegalPattern {
        group,
        reason: format!("{pattern:?} is not a permutation"),
    })?;
    let b2 = index_bits_per_group(lambda, n_c);
    if rank >> b2 != 0 {
        return Err(Error::IllegalPattern {
            group,
            reason: format!("permutation rank {rank} outside the {}-entry codebook", 1u64 << b2),
        });
    }
    Ok(rank)
}

/// All `2^b2` legitimate patterns of one group, in codebook order.
pub fn group_codebook(lambda: usize, n_c: usize) -> Result<Vec<Vec<usize>>> {
    check_pattern_support(lambda, n_c)?;
    let b2 = index_bits_per_group(lambda, n_c);
    Ok((0..1u64 << b2).map(|i| group_pattern(i, lambda, n_c)).collect())
}

/// Maps a payload of exactly `B` bits to a frame.
pub fn bits_to_frame(payload: &[u8], cfg: &Config, alphabet: &PreChirpAlphabet) -> Result<Frame> {
    check_alphabet(cfg, alphabet)?;
    check_pattern_support(cfg.lambda(), cfg.n_c)?;
    if payload.len() != cfg.frame_bits() {
        return Err(Error::BitLength {
            expected: cfg.frame_bits(),
            got: payload.len(),
        });
    }
    if payload.iter().any(|&b| b > 1) {
        return Err(Error::Parse("payload bits must be 0 or 1".into()));
    }
    let constellation = cfg.constellation();
    let k = cfg.bits_per_symbol();
    let mut symbols = Vec::with_capacity(cfg.n());
    let mut assignment = Vec::with_capacity(cfg.n());
    for group in payload.chunks(cfg.group_bits()) {
        let (sym_bits, idx_bits) = group.split_at(cfg.b1);
        for word in sym_bits.chunks(k) {
            symbols.push(constellation.points[bits_to_u64(word) as usize]);
        }
        assignment.extend(group_pattern(bits_to_u64(idx_bits), cfg.lambda(), cfg.n_c));
    }
    Ok(Frame {
        payload_bits: payload.to_vec(),
        symbols,
        pcpg: PreChirpPatternGroup {
            assignment,
            group_size: cfg.n_c,
        },
    })
}

fn symbol_label(constellation: &Constellation, s: Complex<f64>) -> Option<usize> {
    constellation.points.iter().position(|p| (p - s).norm() < 1e-9)
}

/// Recovers the payload of a frame built from legitimate codewords.
pub fn frame_to_bits(frame: &Frame, cfg: &Config, _alphabet: &PreChirpAlphabet) -> Result<Vec<u8>> {
    let n = cfg.n();
    if frame.symbols.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: frame.symbols.len(),
        });
    }
    if frame.pcpg.assignment.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: frame.pcpg.assignment.len(),
        });
    }
    let constellation = cfg.constellation();
    let k = cfg.bits_per_symbol();
    let mut bits = Vec::with_capacity(cfg.frame_bits());
    for g in 0..cfg.groups() {
        let range = g * cfg.n_c..(g + 1) * cfg.n_c;
        for &s in &frame.symbols[range.clone()] {
            let label = symbol_label(&constellation, s).ok_or_else(|| {
                Error::Parse(format!("symbol {s} is not a constellation point"))
            })?;
            u64_to_bits(label as u64, k, &mut bits);
        }
        let index = group_pattern_to_index(&frame.pcpg.assignment[range], cfg.lambda(), cfg.n_c, g)?;
        u64_to_bits(index, cfg.b2, &mut bits);
    }
    Ok(bits)
}

fn check_alphabet(cfg: &Config, alphabet: &PreChirpAlphabet) -> Result<()> {
    if alphabet.len() != cfg.lambda() {
        return Err(Error::InvalidAlphabet(format!(
            "alphabet has {} values, configuration expects {}",
            alphabet.len(),
            cfg.lambda()
        )));
    }
    Ok(())
}

/// Checks that `2^B` codewords fit under the cap.
pub fn check_enumeration_cap(cfg: &Config, cap_bits: usize) -> Result<()> {
    let bits = cfg.frame_bits();
    if bits > cap_bits || bits >= 63 {
        return Err(Error::EnumerationCap { bits, cap_bits });
    }
    Ok(())
}

/// Every legitimate frame exactly once, in ascending payload order.
pub fn enumerate_codewords<'a>(
    cfg: &'a Config,
    alphabet: &'a PreChirpAlphabet,
    cap_bits: usize,
) -> Result<impl Iterator<Item = Frame> + 'a> {
    check_enumeration_cap(cfg, cap_bits)?;
    check_alphabet(cfg, alphabet)?;
    check_pattern_support(cfg.lambda(), cfg.n_c)?;
    let b = cfg.frame_bits();
    Ok((0..1u64 << b).map(move |v| {
        bits_to_frame(&payload_from_value(v, b), cfg, alphabet).expect("enumerated payload is well formed")
    }))
}

/// Compact description of the codeword with payload value `v`: the
/// constellation label of every subcarrier and the codebook index of every
/// group's pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordIndex {
    pub labels: Vec<usize>,
    pub pattern_indices: Vec<u64>,
}

impl CodewordIndex {
    pub fn from_value(v: u64, cfg: &Config) -> Self {
        let k = cfg.bits_per_symbol();
        let gb = cfg.group_bits();
        let total = cfg.frame_bits();
        let mut labels = Vec::with_capacity(cfg.n());
        let mut pattern_indices = Vec::with_capacity(cfg.groups());
        for g in 0..cfg.groups() {
            let shift = total - (g + 1) * gb;
            let word = (v >> shift) & ((1u64 << gb) - 1);
            for s in 0..cfg.n_c {
                let sshift = gb - (s + 1) * k;
                labels.push(((word >> sshift) & ((1u64 << k) - 1)) as usize);
            }
            pattern_indices.push(word & ((1u64 << cfg.b2) - 1));
        }
        Self { labels, pattern_indices }
    }

    /// Inverse of [`CodewordIndex::from_value`].
    pub fn to_value(&self, cfg: &Config) -> u64 {
        let k = cfg.bits_per_symbol();
        let mut v = 0u64;
        for g in 0..cfg.groups() {
            for &l in &self.labels[g * cfg.n_c..(g + 1) * cfg.n_c] {
                v = (v << k) | l as u64;
            }
            v = (v << cfg.b2) | self.pattern_indices[g];
        }
        v
    }

    /// Frame-wide pattern id in `[0, 2^(G·b2))`, group 0 most significant.
    pub fn pattern_id(&self, cfg: &Config) -> usize {
        self.pattern_indices
            .iter()
            .fold(0usize, |acc, &i| (acc << cfg.b2) | i as usize)
    }
}

/// Frame-wide pattern for a pattern id produced by [`CodewordIndex::pattern_id`].
pub fn pattern_from_id(id: usize, cfg: &Config) -> PreChirpPatternGroup {
    let mut assignment = Vec::with_capacity(cfg.n());
    for g in 0..cfg.groups() {
        let shift = (cfg.groups() - 1 - g) * cfg.b2;
        let idx = (id >> shift) & ((1usize << cfg.b2) - 1);
        assignment.extend(group_pattern(idx as u64, cfg.lambda(), cfg.n_c));
    }
    PreChirpPatternGroup {
        assignment,
        group_size: cfg.n_c,
    }
}

/// Every legitimate frame-wide pattern, indexed by pattern id.
pub fn all_patterns(cfg: &Config) -> Result<Vec<PreChirpPatternGroup>> {
    check_pattern_support(cfg.lambda(), cfg.n_c)?;
    let count = 1usize << (cfg.groups() * cfg.b2);
    Ok((0..count).map(|id| pattern_from_id(id, cfg)).collect())
}
