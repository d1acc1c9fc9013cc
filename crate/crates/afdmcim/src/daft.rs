//! Discrete affine Fourier transform pair and the chirp-periodic prefix.
//!
//! A frame of `N` chirp-domain symbols `x` becomes time samples through the
//! inverse transform `s = A^H x`, where
//!
//! ```text
//! A = L2 * F * L1,   L_i = diag(exp(-j 2 pi c_i k^2)),  k = 0..N-1,
//! F[m, k] = exp(-j 2 pi m k / N) / sqrt(N)
//! ```
//!
//! so `A` is unitary for any real chirp rates. Elementwise,
//! `s[k] = (1/sqrt(N)) sum_m x[m] exp(j 2 pi (c1 k^2 + c2 m^2 + m k / N))`,
//! and the forward transform of received samples is `y = A r`.
//!
//! The guard interval is a chirp-periodic prefix (CPP): the last `L_cpp`
//! time samples are prepended with a quadratic phase correction so that a
//! delayed copy of the signal still looks like a cyclic shift with a known
//! per-sample phase in the block. With `c1 = 0` (or any integer multiple of
//! `1/N`) the correction vanishes and the CPP is an ordinary cyclic prefix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// `exp(j * theta)`.
#[inline]
pub(crate) fn cis(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

/// Frame length and chirp rates of the transform pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaftParams {
    /// Number of chirp subcarriers `N`; a power of two, at least 2.
    pub len: usize,
    /// Chirp rate along the time index.
    pub c1: f64,
    /// Chirp rate along the chirp-domain index.
    pub c2: f64,
}

impl DaftParams {
    /// Validates and builds transform parameters. Chirp rates must be
    /// finite and non-negative (zero is allowed and degenerates toward the
    /// plain DFT).
    pub fn new(len: usize, c1: f64, c2: f64) -> Result<Self> {
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::config(format!(
                "frame length must be a power of two >= 2, got {len}"
            )));
        }
        if !c1.is_finite() || !c2.is_finite() || c1 < 0.0 || c2 < 0.0 {
            return Err(Error::config(format!(
                "chirp rates must be finite and non-negative, got c1={c1}, c2={c2}"
            )));
        }
        Ok(DaftParams { len, c1, c2 })
    }

    /// Parameters with both chirp rates at their defaults for a channel
    /// whose integer Doppler span is `alpha_max`.
    pub fn with_defaults(len: usize, alpha_max: usize) -> Result<Self> {
        DaftParams::new(len, default_c1(alpha_max, len)?, default_c2())
    }
}

/// Default first chirp rate `(2 (alpha_max + 1) + 1) / (2 N)`.
///
/// The extra `+1` over the integer Doppler span leaves room for fractional
/// Doppler spillover between neighbouring bins.
pub fn default_c1(alpha_max: usize, len: usize) -> Result<f64> {
    if len < 2 {
        return Err(Error::config(format!(
            "frame length must be at least 2, got {len}"
        )));
    }
    Ok((2.0 * (alpha_max as f64 + 1.0) + 1.0) / (2.0 * len as f64))
}

/// Default second chirp rate `(sqrt(5) - 1) / 2`.
///
/// An irrational rate avoids accidental resonances between the second
/// chirp and the subcarrier grid; any non-negative value is accepted by
/// [`DaftParams::new`].
pub fn default_c2() -> f64 {
    (5.0_f64.sqrt() - 1.0) / 2.0
}

/// Block of time-domain samples, tagged with whether a prefix is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: DVector<Complex64>,
    /// True when a chirp-periodic prefix is still attached.
    pub prefixed: bool,
}

impl TimeSignal {
    /// Wraps bare (unprefixed) time samples.
    pub fn new(samples: DVector<Complex64>) -> Self {
        TimeSignal { samples, prefixed: false }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Frame of chirp-domain values.
#[derive(Debug, Clone, PartialEq)]
pub struct DaftFrame {
    pub values: DVector<Complex64>,
}

impl DaftFrame {
    pub fn new(values: DVector<Complex64>) -> Self {
        DaftFrame { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Precomputed dense transform matrix and its adjoint.
///
/// Frame sizes stay small (tens to a few hundred subcarriers), so dense
/// matrix products are used throughout; no factored fast path is needed.
#[derive(Debug, Clone)]
pub struct DaftMatrix {
    params: DaftParams,
    a: DMatrix<Complex64>,
    a_h: DMatrix<Complex64>,
}

impl DaftMatrix {
    pub fn new(params: &DaftParams) -> Self {
        let n = params.len;
        let scale = 1.0 / (n as f64).sqrt();
        // The DFT phase uses (m*k) mod N so the argument never grows with
        // the frame size; the chirp phases wrap on their own.
        let a = DMatrix::from_fn(n, n, |m, k| {
            let chirp = params.c2 * (m * m) as f64 + params.c1 * (k * k) as f64;
            let twiddle = ((m * k) % n) as f64 / n as f64;
            cis(-TAU * (chirp + twiddle)) * scale
        });
        let a_h = a.adjoint();
        DaftMatrix { params: *params, a, a_h }
    }

    pub fn params(&self) -> &DaftParams {
        &self.params
    }

    /// The unitary analysis matrix `A`.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    /// The synthesis matrix `A^H`.
    pub fn adjoint(&self) -> &DMatrix<Complex64> {
        &self.a_h
    }

    /// Forward transform `y = A r` of an unprefixed block of `N` samples.
    pub fn forward(&self, r: &TimeSignal) -> Result<DaftFrame> {
        if r.prefixed {
            return Err(Error::dim(
                "forward transform expects the prefix to be stripped first",
            ));
        }
        if r.len() != self.params.len {
            return Err(Error::dim(format!(
                "signal length {} does not match frame length {}",
                r.len(),
                self.params.len
            )));
        }
        Ok(DaftFrame::new(&self.a * &r.samples))
    }

    /// Inverse transform `s = A^H x`.
    pub fn inverse(&self, x: &DaftFrame) -> Result<TimeSignal> {
        if x.len() != self.params.len {
            return Err(Error::dim(format!(
                "frame length {} does not match configured length {}",
                x.len(),
                self.params.len
            )));
        }
        Ok(TimeSignal::new(&self.a_h * &x.values))
    }
}

/// One-shot forward transform; builds the matrix internally.
pub fn daft(r: &TimeSignal, params: &DaftParams) -> Result<DaftFrame> {
    DaftMatrix::new(params).forward(r)
}

/// One-shot inverse transform; builds the matrix internally.
pub fn idaft(x: &DaftFrame, params: &DaftParams) -> Result<TimeSignal> {
    DaftMatrix::new(params).inverse(x)
}

/// Prepends the chirp-periodic prefix of `l_cpp` samples.
///
/// Prefix sample at offset `k` from the block start (`k = -l_cpp .. -1`) is
/// `s[N + k] * exp(-j 2 pi c1 (N^2 + 2 N k))`, which reduces to a plain
/// cyclic prefix whenever `c1 * 2 N` is an even integer (in particular for
/// `c1 = 0`).
pub fn add_cpp(s: &TimeSignal, l_cpp: usize, params: &DaftParams) -> Result<TimeSignal> {
    if s.prefixed {
        return Err(Error::dim("signal already carries a prefix"));
    }
    let n = params.len;
    if s.len() != n {
        return Err(Error::dim(format!(
            "signal length {} does not match frame length {n}",
            s.len()
        )));
    }
    if l_cpp >= n {
        return Err(Error::config(format!(
            "prefix length {l_cpp} must be shorter than the frame length {n}"
        )));
    }
    let mut out = DVector::zeros(n + l_cpp);
    for j in 0..l_cpp {
        // k runs over the negative offsets -l_cpp..-1.
        let k = j as f64 - l_cpp as f64;
        let phase = cis(-TAU * params.c1 * ((n * n) as f64 + 2.0 * n as f64 * k));
        out[j] = s.samples[n - l_cpp + j] * phase;
    }
    out.rows_mut(l_cpp, n).copy_from(&s.samples);
    Ok(TimeSignal { samples: out, prefixed: true })
}

/// Drops the prefix, returning the trailing block of `N = len - l_cpp`
/// samples.
pub fn remove_cpp(r: &TimeSignal, l_cpp: usize) -> Result<TimeSignal> {
    if !r.prefixed {
        return Err(Error::dim("signal carries no prefix to remove"));
    }
    if r.len() <= l_cpp {
        return Err(Error::dim(format!(
            "signal length {} is inconsistent with prefix length {l_cpp}",
            r.len()
        )));
    }
    let n = r.len() - l_cpp;
    Ok(TimeSignal::new(r.samples.rows(l_cpp, n).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(n: usize, rng: &mut impl Rng) -> DaftFrame {
        DaftFrame::new(DVector::from_fn(n, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        }))
    }

    /// Raw double-sum synthesis, kept independent of the matrix path.
    fn idaft_by_sum(x: &DaftFrame, p: &DaftParams) -> DVector<Complex64> {
        let n = p.len;
        let scale = 1.0 / (n as f64).sqrt();
        DVector::from_fn(n, |k, _| {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..n {
                let arg = TAU
                    * (p.c1 * (k * k) as f64 + p.c2 * (m * m) as f64 + (m * k) as f64 / n as f64);
                acc += x.values[m] * cis(arg);
            }
            acc * scale
        })
    }

    /// Raw double-sum analysis.
    fn daft_by_sum(r: &TimeSignal, p: &DaftParams) -> DVector<Complex64> {
        let n = p.len;
        let scale = 1.0 / (n as f64).sqrt();
        DVector::from_fn(n, |m, _| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let arg = -TAU
                    * (p.c1 * (k * k) as f64 + p.c2 * (m * m) as f64 + (m * k) as f64 / n as f64);
                acc += r.samples[k] * cis(arg);
            }
            acc * scale
        })
    }

    #[test]
    fn rejects_bad_params() {
        assert!(DaftParams::new(0, 0.1, 0.1).is_err());
        assert!(DaftParams::new(1, 0.1, 0.1).is_err());
        assert!(DaftParams::new(6, 0.1, 0.1).is_err());
        assert!(DaftParams::new(8, -0.1, 0.1).is_err());
        assert!(DaftParams::new(8, 0.1, f64::NAN).is_err());
        assert!(DaftParams::new(8, 0.0, 0.0).is_ok());
        assert!(default_c1(1, 0).is_err());
    }

    #[test]
    fn default_chirp_rates() {
        assert_eq!(default_c1(1, 8).unwrap(), 0.3125);
        assert_eq!(default_c1(0, 2).unwrap(), 0.75);
        assert_eq!(default_c1(1, 64).unwrap(), 5.0 / 128.0);
        assert!((default_c2() - 0.618_033_988_749_894_9).abs() < 1e-15);
    }

    #[test]
    fn unitarity_over_sizes_and_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[2usize, 4, 8, 16, 64] {
            for _ in 0..20 {
                let p = DaftParams::new(n, rng.gen::<f64>(), rng.gen::<f64>()).unwrap();
                let m = DaftMatrix::new(&p);
                let gram = m.matrix() * m.adjoint();
                let err = (gram - DMatrix::<Complex64>::identity(n, n)).norm();
                assert!(err < 1e-10, "unitarity residual {err} at N={n}");
            }
        }
    }

    #[test]
    fn round_trip_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let p = DaftParams::new(16, rng.gen::<f64>(), rng.gen::<f64>()).unwrap();
            let m = DaftMatrix::new(&p);
            let x = random_frame(16, &mut rng);
            let s = m.inverse(&x).unwrap();
            assert!((s.samples.norm_squared() - x.values.norm_squared()).abs() < 1e-12);
            let back = m.forward(&s).unwrap();
            assert!((back.values - &x.values).norm() < 1e-10);
        }
    }

    #[test]
    fn matches_summation_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &n in &[2usize, 8, 32] {
            let p = DaftParams::new(n, rng.gen::<f64>(), rng.gen::<f64>()).unwrap();
            let m = DaftMatrix::new(&p);
            let x = random_frame(n, &mut rng);
            let s = m.inverse(&x).unwrap();
            assert!((&s.samples - idaft_by_sum(&x, &p)).norm() < 1e-10);
            let y = m.forward(&s).unwrap();
            assert!((&y.values - daft_by_sum(&s, &p)).norm() < 1e-10);
        }
    }

    #[test]
    fn reduces_to_dft_at_zero_rates() {
        let n = 4;
        let p = DaftParams::new(n, 0.0, 0.0).unwrap();
        let m = DaftMatrix::new(&p);
        for mm in 0..n {
            for k in 0..n {
                let want = cis(-TAU * (mm * k) as f64 / n as f64) * 0.5;
                assert!((m.matrix()[(mm, k)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn impulse_synthesis_is_a_chirp() {
        // x = e_0 with c1 = 1/4, c2 = 0: s[k] = exp(j pi k^2 / 2) / 2.
        let p = DaftParams::new(4, 0.25, 0.0).unwrap();
        let mut x = DVector::zeros(4);
        x[0] = Complex64::new(1.0, 0.0);
        let s = idaft(&DaftFrame::new(x), &p).unwrap();
        for k in 0..4 {
            let want = cis(std::f64::consts::PI * (k * k) as f64 / 2.0) * 0.5;
            assert!((s.samples[k] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn cpp_is_plain_cp_when_c1_vanishes() {
        let p = DaftParams::new(4, 0.0, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let s = idaft(&random_frame(4, &mut rng), &p).unwrap();
        let pre = add_cpp(&s, 2, &p).unwrap();
        assert!(pre.prefixed);
        assert_eq!(pre.len(), 6);
        assert_eq!(pre.samples[0], s.samples[2]);
        assert_eq!(pre.samples[1], s.samples[3]);
    }

    #[test]
    fn cpp_samples_stay_unit_modulus_scaled() {
        let p = DaftParams::new(8, 0.3125, default_c2()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = idaft(&random_frame(8, &mut rng), &p).unwrap();
        let pre = add_cpp(&s, 3, &p).unwrap();
        for j in 0..3 {
            // Prefix is a phase-rotated copy: same magnitude as the source sample.
            assert!((pre.samples[j].norm() - s.samples[8 - 3 + j].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn cpp_round_trip() {
        let p = DaftParams::new(8, 0.3125, default_c2()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let s = idaft(&random_frame(8, &mut rng), &p).unwrap();
        for &k in &[0usize, 1, 3] {
            let back = remove_cpp(&add_cpp(&s, k, &p).unwrap(), k).unwrap();
            assert_eq!(back.samples, s.samples, "round trip failed for l_cpp={k}");
        }
    }

    #[test]
    fn cpp_rejects_bad_shapes() {
        let p = DaftParams::new(4, 0.25, 0.1).unwrap();
        let s = TimeSignal::new(DVector::zeros(4));
        assert!(add_cpp(&s, 4, &p).is_err());
        assert!(add_cpp(&TimeSignal::new(DVector::zeros(3)), 1, &p).is_err());
        let pre = add_cpp(&s, 2, &p).unwrap();
        assert!(add_cpp(&pre, 1, &p).is_err());
        assert!(remove_cpp(&s, 1).is_err());
        assert!(remove_cpp(&TimeSignal { samples: DVector::zeros(2), prefixed: true }, 2).is_err());
    }

    #[test]
    fn forward_rejects_prefixed_input() {
        let p = DaftParams::new(4, 0.25, 0.1).unwrap();
        let s = TimeSignal { samples: DVector::zeros(6), prefixed: true };
        assert!(daft(&s, &p).is_err());
    }
}
