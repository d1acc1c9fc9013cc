//! Doubly dispersive channel model and its chirp-domain representation.
//!
//! A realization is a set of `L` discrete paths, each with a complex gain,
//! an integer delay in samples, and a (possibly fractional) Doppler shift
//! in units of one subcarrier spacing. Applied in the time domain,
//!
//! ```text
//! r[k] = sum_l h_l * s[k - tau_l] * exp(-j 2 pi nu_l k / N) + w[k],
//! ```
//!
//! with the Doppler phase indexed from the block start (prefix samples sit
//! at negative indices). After prefix removal and the forward transform
//! the same action is the matrix `H_eff = A * H_time * A^H`, where
//! `H_time` stacks, per path, the prefix phase fixup `G_l`, the Doppler
//! diagonal `D_l`, and the cyclic shift `P^tau_l`. Each per-path factor is
//! unitary, so path powers carry through the transform unchanged.
//!
//! Gains are complex normal with total mean power 1. Delays are uniform on
//! `{0..tau_max}` with the first path anchored at 0. Doppler is either a
//! Jakes draw `nu = alpha_max * cos(theta)`, `theta ~ U(-pi, pi]`
//! (fractional mode), or uniform over the integers `-alpha_max..alpha_max`.
//! A mismatched-CSI model mixes each gain with an independent error term.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

use crate::daft::{cis, DaftMatrix, DaftParams, TimeSignal};
use crate::error::{Error, Result};

/// Statistical description of the channel to draw realizations from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Number of paths `L`.
    pub num_paths: usize,
    /// Largest delay in samples, `tau_max`.
    pub max_delay: usize,
    /// Integer Doppler span `alpha_max` in subcarrier spacings.
    pub max_doppler: usize,
    /// Jakes (fractional) Doppler when true, integer Doppler otherwise.
    pub fractional: bool,
    /// Degenerate single-path unit-gain channel (pure AWGN), used for
    /// calibration against closed-form BER.
    pub awgn: bool,
}

impl ChannelConfig {
    pub fn new(num_paths: usize, max_delay: usize, max_doppler: usize, fractional: bool) -> Result<Self> {
        let cfg = ChannelConfig { num_paths, max_delay, max_doppler, fractional, awgn: false };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Single unit-gain path at zero delay and zero Doppler.
    pub fn awgn() -> Self {
        ChannelConfig { num_paths: 1, max_delay: 0, max_doppler: 0, fractional: false, awgn: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::config("channel needs at least one path"));
        }
        // Distinct (delay, Doppler) pairs must be possible.
        let doppler_choices = if self.max_doppler == 0 && !self.awgn {
            1
        } else {
            2 * self.max_doppler + 1
        };
        if !self.fractional || self.max_doppler == 0 {
            let slots = (self.max_delay + 1) * doppler_choices;
            if self.num_paths > slots {
                return Err(Error::config(format!(
                    "{} paths cannot have distinct delay/Doppler pairs in {} slots",
                    self.num_paths, slots
                )));
            }
        }
        Ok(())
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub gain: Complex64,
    /// Delay in samples.
    pub delay: usize,
    /// Doppler in subcarrier spacings; `integer + fractional` with the
    /// fractional part in `(-1/2, 1/2]`.
    pub doppler: f64,
}

impl PathSpec {
    /// Integer Doppler part, splitting so the remainder lies in `(-1/2, 1/2]`.
    pub fn doppler_integer(&self) -> i64 {
        (self.doppler - 0.5).ceil() as i64
    }

    /// Fractional Doppler part in `(-1/2, 1/2]`.
    pub fn doppler_fractional(&self) -> f64 {
        self.doppler - self.doppler_integer() as f64
    }
}

/// A drawn channel: paths plus the frame geometry they were drawn for.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<PathSpec>,
    /// Subcarriers per frame `N`.
    pub frame_len: usize,
    /// Prefix length the frame will carry; must exceed every path delay.
    pub cpp_len: usize,
}

impl ChannelRealization {
    /// Plain-text export, one path per line: `gain_re gain_im delay doppler`.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for p in &self.paths {
            out.push_str(&format!(
                "{:.17e} {:.17e} {} {:.17e}\n",
                p.gain.re, p.gain.im, p.delay, p.doppler
            ));
        }
        out
    }

    /// Parses the [`to_records`](Self::to_records) format back into a
    /// realization for the given frame geometry.
    pub fn from_records(text: &str, frame_len: usize, cpp_len: usize) -> Result<Self> {
        let mut paths = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::config(format!(
                    "path record line {} must have 4 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse_f = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad {what} '{s}' on line {}", lineno + 1)))
            };
            let re = parse_f(fields[0], "gain")?;
            let im = parse_f(fields[1], "gain")?;
            let delay: usize = fields[2]
                .parse()
                .map_err(|_| Error::Config(format!("bad delay '{}' on line {}", fields[2], lineno + 1)))?;
            let doppler = parse_f(fields[3], "doppler")?;
            paths.push(PathSpec { gain: Complex64::new(re, im), delay, doppler });
        }
        let ch = ChannelRealization { paths, frame_len, cpp_len };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::config("realization has no paths"));
        }
        for p in &self.paths {
            if p.delay >= self.cpp_len && p.delay > 0 {
                return Err(Error::config(format!(
                    "path delay {} is not covered by the prefix length {}",
                    p.delay, self.cpp_len
                )));
            }
            if p.delay >= self.frame_len {
                return Err(Error::config(format!(
                    "path delay {} must be shorter than the frame length {}",
                    p.delay, self.frame_len
                )));
            }
        }
        Ok(())
    }

    /// Max path delay in this realization.
    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }
}

fn complex_normal(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draws a channel realization for a frame of `frame_len` subcarriers
/// carrying a prefix of `cpp_len` samples.
///
/// The first path sits at delay 0; remaining delays are uniform on
/// `{0..max_delay}`. Gains are CN(0, 1/L). Duplicate (delay, Doppler)
/// pairs are redrawn so distinct paths stay resolvable.
pub fn sample_channel(
    cfg: &ChannelConfig,
    frame_len: usize,
    cpp_len: usize,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    if cfg.max_delay >= frame_len {
        return Err(Error::config(format!(
            "max delay {} must be shorter than the frame length {}",
            cfg.max_delay, frame_len
        )));
    }
    if cfg.max_delay > 0 && cpp_len <= cfg.max_delay {
        return Err(Error::config(format!(
            "prefix length {} must exceed the max delay {}",
            cpp_len, cfg.max_delay
        )));
    }
    if cpp_len >= frame_len {
        return Err(Error::config(format!(
            "prefix length {cpp_len} must be shorter than the frame length {frame_len}"
        )));
    }
    if cfg.awgn {
        return Ok(ChannelRealization {
            paths: vec![PathSpec { gain: Complex64::new(1.0, 0.0), delay: 0, doppler: 0.0 }],
            frame_len,
            cpp_len,
        });
    }

    let l = cfg.num_paths;
    let gain_var = 1.0 / l as f64;
    let draw_doppler = |rng: &mut dyn rand::RngCore| -> f64 {
        if cfg.max_doppler == 0 {
            0.0
        } else if cfg.fractional {
            // theta ~ U(-pi, pi]
            let theta = PI - rng.gen::<f64>() * TAU;
            cfg.max_doppler as f64 * theta.cos()
        } else {
            rng.gen_range(-(cfg.max_doppler as i64)..=cfg.max_doppler as i64) as f64
        }
    };

    let mut paths: Vec<PathSpec> = Vec::with_capacity(l);
    for i in 0..l {
        let gain = complex_normal(rng, gain_var);
        let delay = if i == 0 { 0 } else { rng.gen_range(0..=cfg.max_delay) };
        let doppler = draw_doppler(rng);
        paths.push(PathSpec { gain, delay, doppler });
    }

    // Resolve (delay, Doppler) collisions; feasibility was checked above.
    let mut guard = 0;
    loop {
        let mut clash = None;
        'outer: for i in 1..l {
            for j in 0..i {
                if paths[i].delay == paths[j].delay && paths[i].doppler == paths[j].doppler {
                    clash = Some(i);
                    break 'outer;
                }
            }
        }
        let Some(i) = clash else { break };
        if cfg.max_doppler > 0 {
            paths[i].doppler = draw_doppler(rng);
        } else {
            paths[i].delay = rng.gen_range(0..=cfg.max_delay);
        }
        guard += 1;
        if guard > 100_000 {
            return Err(Error::config("could not draw distinct delay/Doppler pairs"));
        }
    }

    Ok(ChannelRealization { paths, frame_len, cpp_len })
}

/// Per-sample phase of the prefix fixup for a path of delay `tau`: rows
/// `k < tau` wrap around the block and pick up the quadratic prefix phase.
#[inline]
fn prefix_phase(k: usize, tau: usize, n: usize, c1: f64) -> Complex64 {
    if k < tau {
        cis(-TAU * c1 * ((n * n) as f64 - 2.0 * (n as f64) * (tau - k) as f64))
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn single_path_time_matrix(path: &PathSpec, gain: Complex64, n: usize, c1: f64) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = (k + n - path.delay % n) % n;
        let doppler = cis(-TAU * path.doppler * k as f64 / n as f64);
        m[(k, col)] = gain * prefix_phase(k, path.delay, n, c1) * doppler;
    }
    m
}

/// Time-domain channel matrix on the unprefixed block:
/// `H = sum_l h_l * G_l * D_l * P^tau_l`.
pub fn build_time_matrix(ch: &ChannelRealization, params: &DaftParams) -> Result<DMatrix<Complex64>> {
    if params.len != ch.frame_len {
        return Err(Error::dim("transform length does not match the realization"));
    }
    ch.validate()?;
    let mut m = DMatrix::zeros(params.len, params.len);
    for p in &ch.paths {
        m += single_path_time_matrix(p, p.gain, params.len, params.c1);
    }
    Ok(m)
}

/// Applies the channel to a prefixed signal sample by sample and adds
/// circular complex noise of the given variance.
///
/// Samples earlier than the prefix start are taken as zero; they only
/// affect outputs that are discarded with the prefix. The output keeps the
/// prefix attached.
pub fn apply_channel_time(
    s: &TimeSignal,
    ch: &ChannelRealization,
    noise_var: f64,
    rng: &mut impl Rng,
) -> Result<TimeSignal> {
    if !s.prefixed {
        return Err(Error::dim("channel application expects the prefixed signal"));
    }
    if s.len() != ch.frame_len + ch.cpp_len {
        return Err(Error::dim(format!(
            "signal length {} does not match frame {} + prefix {}",
            s.len(),
            ch.frame_len,
            ch.cpp_len
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::config(format!("noise variance must be >= 0, got {noise_var}")));
    }
    ch.validate()?;
    let n = ch.frame_len as f64;
    let len = s.len();
    let mut out = DVector::zeros(len);
    for j in 0..len {
        // Doppler phase counts from the block start; prefix samples sit at
        // negative indices.
        let k = j as f64 - ch.cpp_len as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in &ch.paths {
            if j >= p.delay {
                acc += p.gain * s.samples[j - p.delay] * cis(-TAU * p.doppler * k / n);
            }
        }
        out[j] = acc;
    }
    if noise_var > 0.0 {
        for j in 0..len {
            out[j] += complex_normal(rng, noise_var);
        }
    }
    Ok(TimeSignal { samples: out, prefixed: true })
}

/// Chirp-domain channel: the summed matrix and the unit-gain per-path
/// factors `H_l = A G_l D_l P^tau_l A^H` (so `matrix = sum_l h_l H_l`).
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub matrix: DMatrix<Complex64>,
    pub per_path: Vec<DMatrix<Complex64>>,
}

/// Builds the chirp-domain channel with its per-path decomposition.
pub fn build_effective_matrix(ch: &ChannelRealization, daft: &DaftMatrix) -> Result<EffectiveChannel> {
    if daft.params().len != ch.frame_len {
        return Err(Error::dim("transform length does not match the realization"));
    }
    ch.validate()?;
    let unit = Complex64::new(1.0, 0.0);
    let per_path: Vec<DMatrix<Complex64>> = ch
        .paths
        .iter()
        .map(|p| {
            let t = single_path_time_matrix(p, unit, ch.frame_len, daft.params().c1);
            daft.matrix() * t * daft.adjoint()
        })
        .collect();
    let mut matrix = DMatrix::zeros(ch.frame_len, ch.frame_len);
    for (p, h) in ch.paths.iter().zip(&per_path) {
        matrix += h * p.gain;
    }
    Ok(EffectiveChannel { matrix, per_path })
}

/// Chirp-domain channel matrix without the per-path factors; same result
/// as [`build_effective_matrix`] up to float round-off, cheaper per trial.
pub fn effective_matrix(ch: &ChannelRealization, daft: &DaftMatrix) -> Result<DMatrix<Complex64>> {
    let time = build_time_matrix(ch, daft.params())?;
    Ok(daft.matrix() * time * daft.adjoint())
}

/// Mixes each path gain with an independent error term:
/// `g_hat = sqrt(1 - rho) g + sqrt(rho) e`, `e ~ CN(0, 1/L)`.
///
/// `rho = 0` reproduces the gains exactly; `rho = 1` replaces them with
/// draws of the same power. This is a synthetic estimation-error model,
/// not a fit to any estimator.
pub fn corrupt_gains(ch: &ChannelRealization, rho: f64, rng: &mut impl Rng) -> Result<ChannelRealization> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::config(format!("csi mismatch must lie in [0, 1], got {rho}")));
    }
    let l = ch.paths.len() as f64;
    let keep = (1.0 - rho).sqrt();
    let mix = rho.sqrt();
    let mut out = ch.clone();
    for p in &mut out.paths {
        let e = complex_normal(rng, 1.0 / l);
        p.gain = p.gain * keep + e * mix;
    }
    Ok(out)
}

/// Chirp-domain channel as seen by a receiver with mismatched gain
/// knowledge; `rho = 0` rebuilds the true channel exactly.
pub fn corrupt_csi(
    ch: &ChannelRealization,
    daft: &DaftMatrix,
    rho: f64,
    rng: &mut impl Rng,
) -> Result<EffectiveChannel> {
    let mismatched = corrupt_gains(ch, rho, rng)?;
    build_effective_matrix(&mismatched, daft)
}
