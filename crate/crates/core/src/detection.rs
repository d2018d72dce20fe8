//! Joint maximum-likelihood detection of (symbols, pre-chirp pattern) and the
//! gain-free codeword-channel matrix `Φ(x) = [H_1 x, .., H_P x]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::channel::{analytic_path, time_domain_operator, ChannelRealization, PathGeometry};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::mapping::{all_patterns, check_enumeration_cap, payload_from_value, CodewordIndex, PreChirpAlphabet, PreChirpPatternGroup};
use crate::scalar::Real;
use crate::transceiver::DaftBasis;

#[derive(Debug, Clone, PartialEq)]
pub struct CodewordChannel<T: Real> {
    /// `N × P`, column `p` is `H_p x`.
    pub phi: DMatrix<Complex<T>>,
}

impl<T: Real> CodewordChannel<T> {
    /// `Φ(x) h`.
    pub fn apply_gains(&self, gains: &[Complex<T>]) -> DVector<Complex<T>> {
        &self.phi * DVector::from_column_slice(gains)
    }
}

/// `Φ(x)` for a pattern and a path geometry, from the closed-form path
/// matrices at unit gain.
pub fn build_phi<T: Real>(
    x: &[Complex<T>],
    pcpg: &PreChirpPatternGroup,
    geometry: &[PathGeometry],
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
) -> Result<CodewordChannel<T>> {
    let n = cfg.n();
    if x.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: x.len() });
    }
    let c2 = pcpg.c2_values(alphabet);
    let mut phi = DMatrix::zeros(n, geometry.len());
    for (p, g) in geometry.iter().enumerate() {
        let col = analytic_path::<T>(*g, cfg, &c2)?.apply(x);
        phi.set_column(p, &col);
    }
    Ok(CodewordChannel { phi })
}

/// `Aᴴ` for every legitimate pattern, indexed by pattern id. Independent of
/// the channel, so one bank serves a whole sweep.
#[derive(Debug, Clone)]
pub struct PatternBank<T: Real> {
    pub patterns: Vec<PreChirpPatternGroup>,
    pub idaft: Vec<DMatrix<Complex<T>>>,
}

impl<T: Real> PatternBank<T> {
    pub fn new(cfg: &Config, alphabet: &PreChirpAlphabet) -> Result<Self> {
        if alphabet.len() != cfg.lambda() {
            return Err(Error::InvalidAlphabet(format!(
                "alphabet has {} values, configuration expects {}",
                alphabet.len(),
                cfg.lambda()
            )));
        }
        let patterns = all_patterns(cfg)?;
        let basis = DaftBasis::<T>::from_config(cfg);
        let idaft = patterns
            .iter()
            .map(|p| basis.daft(&p.c2_values(alphabet)).adjoint())
            .collect();
        Ok(Self { patterns, idaft })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T: Real> {
    pub payload_bits: Vec<u8>,
    pub value: u64,
    /// `‖r - H_time Aᴴ x‖²` of the winning hypothesis.
    pub metric: T,
}

/// ML detector for one channel realization. Hypotheses are enumerated as
/// (pattern, symbol labels); images are built incrementally subcarrier by
/// subcarrier from the columns of `H_time Aᴴ(pattern)`.
pub struct MlDetector<'a, T: Real> {
    cfg: &'a Config,
    points: Vec<Complex<T>>,
    /// Per pattern id, `N × N` matrix `H_time Aᴴ`.
    images: Vec<DMatrix<Complex<T>>>,
}

impl<'a, T: Real> MlDetector<'a, T> {
    pub fn new(cfg: &'a Config, bank: &PatternBank<T>, ch: &ChannelRealization<T>, cap_bits: usize) -> Result<Self> {
        check_enumeration_cap(cfg, cap_bits)?;
        let h = time_domain_operator(ch, cfg);
        let images = bank.idaft.iter().map(|a_h| &h * a_h).collect();
        let points = cfg
            .constellation()
            .points
            .iter()
            .map(|p| Complex::new(T::lit(p.re), T::lit(p.im)))
            .collect();
        Ok(Self { cfg, points, images })
    }

    /// Noise-free received frame of a hypothesis.
    pub fn image(&self, idx: &CodewordIndex) -> DVector<Complex<T>> {
        let g = &self.images[idx.pattern_id(self.cfg)];
        let x = DVector::from_iterator(self.cfg.n(), idx.labels.iter().map(|&l| self.points[l]));
        g * x
    }

    /// Argmin of `‖r - H_time Aᴴ(pattern) x‖²`; ties go to the lowest payload.
    pub fn detect(&self, r: &[Complex<T>]) -> Result<Detection<T>> {
        let n = self.cfg.n();
        if r.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: r.len() });
        }
        let shifts = self.label_shifts();
        let mut best: Option<(T, u64)> = None;
        let mut stack = vec![DVector::from_column_slice(r); n + 1];
        for (pid, g) in self.images.iter().enumerate() {
            let base = self.pattern_value(pid);
            self.search(g, &shifts, 0, base, &mut stack, &mut |value, metric| {
                let better = match best {
                    None => true,
                    Some((m, v)) => metric < m || (metric == m && value < v),
                };
                if better {
                    best = Some((metric, value));
                }
            });
        }
        let (metric, value) = best.expect("at least one hypothesis");
        Ok(Detection {
            payload_bits: payload_from_value(value, self.cfg.frame_bits()),
            value,
            metric,
        })
    }

    /// Bit offset of each subcarrier's label inside the payload value.
    fn label_shifts(&self) -> Vec<u32> {
        let (k, gb, g) = (self.cfg.bits_per_symbol(), self.cfg.group_bits(), self.cfg.groups());
        (0..self.cfg.n())
            .map(|m| {
                let (grp, s) = (m / self.cfg.n_c, m % self.cfg.n_c);
                ((g - 1 - grp) * gb + gb - (s + 1) * k) as u32
            })
            .collect()
    }

    /// Payload bits contributed by the pattern indices of pattern id `pid`.
    fn pattern_value(&self, pid: usize) -> u64 {
        let (b2, gb, g) = (self.cfg.b2, self.cfg.group_bits(), self.cfg.groups());
        (0..g).fold(0u64, |acc, k| {
            let idx = ((pid >> ((g - 1 - k) * b2)) & ((1usize << b2) - 1)) as u64;
            acc | (idx << ((g - 1 - k) * gb))
        })
    }

    /// Depth-first over subcarriers; `stack[m]` holds `r - Σ_{i<m} g_i x_i`.
    fn search(
        &self,
        g: &DMatrix<Complex<T>>,
        shifts: &[u32],
        m: usize,
        value: u64,
        stack: &mut [DVector<Complex<T>>],
        visit: &mut dyn FnMut(u64, T),
    ) {
        let n = self.cfg.n();
        if m == n {
            let metric = stack[n].iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
            visit(value, metric);
            return;
        }
        for (l, &s) in self.points.iter().enumerate() {
            let (head, tail) = stack.split_at_mut(m + 1);
            let next = &mut tail[0];
            next.copy_from(&head[m]);
            next.axpy(-s, &g.column(m), Complex::new(T::one(), T::zero()));
            self.search(g, shifts, m + 1, value | ((l as u64) << shifts[m]), stack, visit);
        }
    }
}

/// One-shot ML detection on a CPP-free received frame.
pub fn ml_detect<T: Real>(
    r: &[Complex<T>],
    ch: &ChannelRealization<T>,
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
    cap_bits: usize,
) -> Result<Detection<T>> {
    check_enumeration_cap(cfg, cap_bits)?;
    let bank = PatternBank::new(cfg, alphabet)?;
    MlDetector::new(cfg, &bank, ch, cap_bits)?.detect(r)
}

/// Time-domain metric `‖r - H_time Aᴴ(pattern) x‖²`.
pub fn time_metric<T: Real>(
    r: &[Complex<T>],
    x: &[Complex<T>],
    pcpg: &PreChirpPatternGroup,
    ch: &ChannelRealization<T>,
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
) -> T {
    let a_h = DaftBasis::<T>::from_config(cfg).daft(&pcpg.c2_values(alphabet)).adjoint();
    let img = time_domain_operator(ch, cfg) * a_h * DVector::from_column_slice(x);
    (DVector::from_column_slice(r) - img).norm_squared()
}

/// DAFT-domain metric `‖A(pattern) r - H_eff(pattern) x‖²`.
pub fn daft_metric<T: Real>(
    r: &[Complex<T>],
    x: &[Complex<T>],
    pcpg: &PreChirpPatternGroup,
    ch: &ChannelRealization<T>,
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
) -> Result<T> {
    let a = DaftBasis::<T>::from_config(cfg).daft(&pcpg.c2_values(alphabet));
    let y = &a * DVector::from_column_slice(r);
    let h = crate::channel::build_effective_analytic(ch, cfg, alphabet, pcpg)?.matrix;
    Ok((y - h * DVector::from_column_slice(x)).norm_squared())
}

pub fn count_bit_errors(tx: &[u8], rx: &[u8]) -> Result<usize> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            got: rx.len(),
        });
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count())
}
