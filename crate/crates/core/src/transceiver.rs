//! Discrete affine Fourier transform with per-subcarrier pre-chirp.
//!
//! `A = Λ_c2 · F · Λ_c1` with
//! `Λ_c2[m,m] = exp(-j2π c2_m m²)`, `Λ_c1[n,n] = exp(-j2π c1 n²)` and the
//! unitary DFT `F[m,n] = exp(-j2π mn/N)/√N`. The transmitter sends
//! `s = Aᴴ x`; the receiver computes `y = A r`. Matrices are dense.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::mapping::{PreChirpAlphabet, PreChirpPatternGroup};
use crate::scalar::{cis_cycles, cis_ratio, frac_mul, Real};

/// `exp(-j2π·c·k)` for integer `k`, with the product reduced in `f64`.
fn chirp<T: Real>(c: f64, k: i64) -> Complex<T> {
    cis_cycles(T::lit(-frac_mul(c, k)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaftMatrices<T: Real> {
    /// Diagonal of `Λ_c2`.
    pub pre_chirp_diag: DVector<Complex<T>>,
    /// Diagonal of `Λ_c1`.
    pub post_chirp_diag: DVector<Complex<T>>,
    pub dft: DMatrix<Complex<T>>,
    pub daft: DMatrix<Complex<T>>,
}

impl<T: Real> DaftMatrices<T> {
    pub fn pre_chirp(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_diagonal(&self.pre_chirp_diag)
    }

    pub fn post_chirp(&self) -> DMatrix<Complex<T>> {
        DMatrix::from_diagonal(&self.post_chirp_diag)
    }

    pub fn n(&self) -> usize {
        self.daft.nrows()
    }
}

/// Unitary DFT matrix of size `n`.
pub fn dft_matrix<T: Real>(n: usize) -> DMatrix<Complex<T>> {
    let scale = T::one() / T::from_usize_exact(n).sqrt();
    DMatrix::from_fn(n, n, |m, k| cis_ratio::<T>(-((m * k) as i64), n) * scale)
}

/// The pre-chirp-independent factor `F·Λ_c1`, shared by every pattern.
#[derive(Debug, Clone)]
pub struct DaftBasis<T: Real> {
    pub n: usize,
    pub c1: f64,
    post_chirp_diag: DVector<Complex<T>>,
    dft: DMatrix<Complex<T>>,
    dft_post: DMatrix<Complex<T>>,
}

impl<T: Real> DaftBasis<T> {
    pub fn new(n: usize, c1: f64) -> Self {
        let post_chirp_diag = DVector::from_fn(n, |i, _| chirp::<T>(c1, (i * i) as i64));
        let dft = dft_matrix::<T>(n);
        let mut dft_post = dft.clone();
        for (j, mut col) in dft_post.column_iter_mut().enumerate() {
            col *= post_chirp_diag[j];
        }
        Self {
            n,
            c1,
            post_chirp_diag,
            dft,
            dft_post,
        }
    }

    pub fn from_config(cfg: &Config) -> Self {
        Self::new(cfg.n(), cfg.c1)
    }

    /// Diagonal of `Λ_c2` for per-subcarrier pre-chirp values.
    pub fn pre_chirp_diag(&self, c2: &[f64]) -> DVector<Complex<T>> {
        DVector::from_fn(self.n, |m, _| chirp::<T>(c2[m], (m * m) as i64))
    }

    /// `A` for per-subcarrier pre-chirp values.
    pub fn daft(&self, c2: &[f64]) -> DMatrix<Complex<T>> {
        assert_eq!(c2.len(), self.n, "one pre-chirp value per subcarrier");
        let pre = self.pre_chirp_diag(c2);
        let mut a = self.dft_post.clone();
        for (m, mut row) in a.row_iter_mut().enumerate() {
            row *= pre[m];
        }
        a
    }

    pub fn matrices(&self, c2: &[f64]) -> DaftMatrices<T> {
        DaftMatrices {
            pre_chirp_diag: self.pre_chirp_diag(c2),
            post_chirp_diag: self.post_chirp_diag.clone(),
            dft: self.dft.clone(),
            daft: self.daft(c2),
        }
    }
}

pub fn build_daft<T: Real>(cfg: &Config, alphabet: &PreChirpAlphabet, pcpg: &PreChirpPatternGroup) -> DaftMatrices<T> {
    DaftBasis::from_config(cfg).matrices(&pcpg.c2_values(alphabet))
}

/// Time-domain samples, optionally preceded by a chirp-periodic prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrame<T: Real> {
    pub samples: Vec<Complex<T>>,
    pub cpp_length: usize,
}

impl<T: Real> TimeFrame<T> {
    pub fn without_prefix(samples: Vec<Complex<T>>) -> Self {
        Self {
            samples,
            cpp_length: 0,
        }
    }

    /// Samples after the prefix.
    pub fn body(&self) -> &[Complex<T>] {
        &self.samples[self.cpp_length..]
    }
}

fn mat_vec<T: Real>(a: &DMatrix<Complex<T>>, x: &[Complex<T>]) -> Vec<Complex<T>> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

/// IDAFT, `s = Aᴴ x`, without prefix.
pub fn modulate<T: Real>(
    x: &[Complex<T>],
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
    pcpg: &PreChirpPatternGroup,
) -> Result<TimeFrame<T>> {
    check_len(x.len(), cfg.n())?;
    let a = build_daft::<T>(cfg, alphabet, pcpg).daft;
    Ok(TimeFrame::without_prefix(mat_vec(&a.adjoint(), x)))
}

/// DAFT under a pattern hypothesis, `y = A r`.
pub fn demodulate<T: Real>(
    r: &[Complex<T>],
    cfg: &Config,
    alphabet: &PreChirpAlphabet,
    pcpg_hypothesis: &PreChirpPatternGroup,
) -> Result<Vec<Complex<T>>> {
    check_len(r.len(), cfg.n())?;
    let a = build_daft::<T>(cfg, alphabet, pcpg_hypothesis).daft;
    Ok(mat_vec(&a, r))
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Prepends `L_cp` samples, `s[n] = s[N+n]·exp(-j2π c1 (N² + 2Nn))` for
/// `n = -L_cp, .., -1`.
pub fn add_cpp<T: Real>(s: &TimeFrame<T>, cfg: &Config) -> Result<TimeFrame<T>> {
    let n = cfg.n();
    if s.cpp_length != 0 {
        return Err(Error::LengthMismatch {
            expected: 0,
            got: s.cpp_length,
        });
    }
    check_len(s.samples.len(), n)?;
    let l = cfg.cpp_length;
    if l > n {
        return Err(Error::InvalidConfig(format!("prefix length {l} exceeds frame length {n}")));
    }
    let ni = n as i64;
    let mut samples = Vec::with_capacity(n + l);
    for k in -(l as i64)..0 {
        let phase = chirp::<T>(cfg.c1, ni * ni + 2 * ni * k);
        samples.push(s.samples[(ni + k) as usize] * phase);
    }
    samples.extend_from_slice(&s.samples);
    Ok(TimeFrame {
        samples,
        cpp_length: l,
    })
}

pub fn remove_cpp<T: Real>(r: &TimeFrame<T>, cfg: &Config) -> Result<TimeFrame<T>> {
    if r.cpp_length != cfg.cpp_length {
        return Err(Error::LengthMismatch {
            expected: cfg.cpp_length,
            got: r.cpp_length,
        });
    }
    check_len(r.samples.len(), cfg.n() + cfg.cpp_length)?;
    Ok(TimeFrame::without_prefix(r.body().to_vec()))
}

/// `Σ_n φ_n(m1; c2_a) · conj(φ_n(m2; c2_b))` for the chirp subcarriers
/// `φ_n(m; c2) = exp(j2π(c1 n² + c2 m² + mn/N))/√N`.
pub fn subcarrier_inner_product<T: Real>(m1: usize, m2: usize, c2_a: f64, c2_b: f64, c1: f64, n: usize) -> Complex<T> {
    let phi = |m: usize, c2: f64, k: usize| -> Complex<T> {
        // conj of chirp() flips the sign back to exp(+j2π·…)
        let post = chirp::<T>(c1, (k * k) as i64).conj();
        let pre = chirp::<T>(c2, (m * m) as i64).conj();
        let lin = cis_ratio::<T>((m * k) as i64, n);
        post * pre * lin / T::from_usize_exact(n).sqrt()
    };
    (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
        acc + phi(m1, c2_a, k) * phi(m2, c2_b, k).conj()
    })
}
