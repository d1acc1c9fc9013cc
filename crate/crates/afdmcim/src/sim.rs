//! Monte Carlo BER engine: seeded trials, adaptive sweeps, paired
//! comparisons, text configs, and CSV emission.
//!
//! Every trial is reproducible from `(master_seed, snr index, trial
//! index)` alone. Those three values key four independent ChaCha streams,
//! one per randomness consumer (payload bits, channel draw, noise,
//! receiver CSI error), so changing the detector, the scheme, or the CSI
//! mismatch level leaves the channel and noise of trial `t` untouched.
//! Paired A/B comparisons are therefore exact, and parallel execution
//! cannot reorder anything observable: trials run in fixed-size batches,
//! error counts add as integers, and the stop rule is checked only at
//! batch boundaries.
//!
//! SNR is per-element symbol energy over noise density, `Es/N0`; mapped
//! frames have unit average energy per chirp subcarrier, so
//! `N0 = 10^{-snr_db/10}`. Each trial sends one frame over a freshly drawn
//! channel (block fading) and counts bit errors against the transmitted
//! payload.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::abep_bound_curve;
use crate::channel::{
    apply_channel_time, corrupt_gains, effective_matrix, sample_channel, ChannelConfig,
};
use crate::daft::{add_cpp, default_c1, default_c2, remove_cpp, DaftMatrix, DaftParams};
use crate::detect::{detect_baseline, ml_detect, mrc_detect, EqualizerKind};
use crate::error::{Error, Result};
use crate::mapping::{map_bits, Codebook, Constellation, ConstellationKind, GcimConfig, Scheme};

/// Trials run and scored between stop-rule checks.
const BATCH: u64 = 1000;

/// Which detector a sweep drives for the code-index scheme. Reference
/// schemes always use their own exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Ml,
    Mrc,
}

impl DetectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Mrc => "mrc",
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(DetectorKind::Ml),
            "mrc" => Ok(DetectorKind::Mrc),
            other => Err(Error::config(format!("unknown detector '{other}' (ml, mrc)"))),
        }
    }
}

/// Everything a BER experiment needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mapping: GcimConfig,
    pub detector: DetectorKind,
    pub equalizer: EqualizerKind,
    pub channel: ChannelConfig,
    /// Prefix length; must exceed the channel's maximum delay.
    pub cpp_len: usize,
    pub c1: f64,
    pub c2: f64,
    /// Receiver gain-knowledge mismatch in [0, 1]; 0 is perfect CSI.
    pub csi_rho: f64,
    /// Strictly increasing, in dB.
    pub snr_grid_db: Vec<f64>,
    pub min_trials: u64,
    pub max_trials: u64,
    pub target_bit_errors: u64,
    pub master_seed: u64,
    /// Delay/Doppler profiles averaged by the analytical bound.
    pub bound_profiles: usize,
}

impl SimConfig {
    /// Config with library defaults: ML detection, MMSE equalizer,
    /// perfect CSI, prefix covering the delay spread, auto chirp rates,
    /// 10^3..10^7 trials targeting 200 bit errors, seed 1.
    pub fn new(mapping: GcimConfig, channel: ChannelConfig, snr_grid_db: Vec<f64>) -> Result<Self> {
        let cfg = SimConfig {
            c1: default_c1(channel.max_doppler, mapping.frame_len)?,
            c2: default_c2(),
            cpp_len: channel.max_delay + 1,
            mapping,
            detector: DetectorKind::Ml,
            equalizer: EqualizerKind::Mmse,
            channel,
            csi_rho: 0.0,
            snr_grid_db,
            min_trials: 1000,
            max_trials: 10_000_000,
            target_bit_errors: 200,
            master_seed: 1,
            bound_profiles: 50,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.daft_params()?;
        self.channel.validate()?;
        if self.channel.max_delay > 0 && self.cpp_len <= self.channel.max_delay {
            return Err(Error::config(format!(
                "prefix length {} must exceed the maximum delay {}",
                self.cpp_len, self.channel.max_delay
            )));
        }
        if self.cpp_len == 0 || self.cpp_len >= self.mapping.frame_len {
            return Err(Error::config(format!(
                "prefix length {} must lie in 1..{}",
                self.cpp_len, self.mapping.frame_len
            )));
        }
        if !(0.0..=1.0).contains(&self.csi_rho) {
            return Err(Error::config(format!(
                "csi_rho must lie in [0, 1], got {}",
                self.csi_rho
            )));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::config("the SNR grid is empty"));
        }
        if !self.snr_grid_db.iter().all(|v| v.is_finite()) {
            return Err(Error::config("the SNR grid has a non-finite entry"));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("the SNR grid must be strictly increasing"));
        }
        if self.min_trials == 0 || self.min_trials > self.max_trials {
            return Err(Error::config(format!(
                "need 1 <= min_trials <= max_trials, got {}..{}",
                self.min_trials, self.max_trials
            )));
        }
        if self.bound_profiles == 0 {
            return Err(Error::config("bound_profiles must be positive"));
        }
        Ok(())
    }

    pub fn daft_params(&self) -> Result<DaftParams> {
        DaftParams::new(self.mapping.frame_len, self.c1, self.c2)
    }

    /// Parses the flat `key = value` experiment format. Unknown or
    /// repeated keys are errors; `#` starts a comment.
    ///
    /// Keys: scheme, frame_len, spread_len, mod_order, constellation,
    /// im_active, detector, equalizer, paths, tau_max, alpha_max,
    /// fractional, channel, cpp_len, c1, c2, csi_rho, snr_db, min_trials,
    /// max_trials, target_bit_errors, master_seed, bound_profiles.
    /// `snr_db` is either a comma list or `start:step:end` (inclusive).
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {} is not a key = value pair: '{}'",
                    lineno + 1,
                    line
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if seen.iter().any(|(k, _)| *k == key) {
                return Err(Error::config(format!("key '{key}' appears twice")));
            }
            seen.push((key, value));
        }

        let mut take = |key: &str| -> Option<String> {
            seen.iter()
                .position(|(k, _)| k == key)
                .map(|i| seen.remove(i).1)
        };
        fn parsed<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse::<T>()
                .map_err(|_| Error::Config(format!("bad value '{v}' for key '{key}'")))
        }

        let scheme: Scheme = match take("scheme") {
            Some(v) => v.parse()?,
            None => Scheme::Gcim,
        };
        let frame_len: usize = parsed("frame_len", take("frame_len").ok_or_else(|| Error::config("missing key 'frame_len'"))?)?;
        let spread_len: usize = match take("spread_len") {
            Some(v) => parsed("spread_len", v)?,
            None if scheme == Scheme::Afdm => 1,
            None => return Err(Error::config("missing key 'spread_len'")),
        };
        let mod_order: usize = parsed("mod_order", take("mod_order").ok_or_else(|| Error::config("missing key 'mod_order'"))?)?;
        let kind: ConstellationKind = match take("constellation") {
            Some(v) => v.parse()?,
            None => ConstellationKind::Psk,
        };
        let im_active: usize = match take("im_active") {
            Some(v) => parsed("im_active", v)?,
            None => 1,
        };
        let mapping = GcimConfig::new(scheme, frame_len, spread_len, mod_order, kind, im_active)?;

        let detector: DetectorKind = match take("detector") {
            Some(v) => v.parse()?,
            None => DetectorKind::Ml,
        };
        let equalizer: EqualizerKind = match take("equalizer") {
            Some(v) => v.parse()?,
            None => EqualizerKind::Mmse,
        };

        let paths: usize = match take("paths") {
            Some(v) => parsed("paths", v)?,
            None => 3,
        };
        let tau_max: usize = match take("tau_max") {
            Some(v) => parsed("tau_max", v)?,
            None => 2,
        };
        let alpha_max: usize = match take("alpha_max") {
            Some(v) => parsed("alpha_max", v)?,
            None => 1,
        };
        let fractional: bool = match take("fractional") {
            Some(v) => parsed("fractional", v)?,
            None => true,
        };
        let channel = match take("channel").as_deref() {
            None | Some("rayleigh") => ChannelConfig::new(paths, tau_max, alpha_max, fractional)?,
            Some("awgn") => ChannelConfig::awgn(),
            Some(other) => {
                return Err(Error::config(format!(
                    "unknown channel '{other}' (rayleigh, awgn)"
                )))
            }
        };

        let cpp_len: usize = match take("cpp_len") {
            Some(v) => parsed("cpp_len", v)?,
            None => channel.max_delay + 1,
        };
        let c1: f64 = match take("c1") {
            Some(v) => parsed("c1", v)?,
            None => default_c1(channel.max_doppler, frame_len)?,
        };
        let c2: f64 = match take("c2") {
            Some(v) => parsed("c2", v)?,
            None => default_c2(),
        };
        let csi_rho: f64 = match take("csi_rho") {
            Some(v) => parsed("csi_rho", v)?,
            None => 0.0,
        };

        let snr_raw = take("snr_db").ok_or_else(|| Error::config("missing key 'snr_db'"))?;
        let snr_grid_db = parse_snr_grid(&snr_raw)?;

        let min_trials: u64 = match take("min_trials") {
            Some(v) => parsed("min_trials", v)?,
            None => 1000,
        };
        let max_trials: u64 = match take("max_trials") {
            Some(v) => parsed("max_trials", v)?,
            None => 10_000_000,
        };
        let target_bit_errors: u64 = match take("target_bit_errors") {
            Some(v) => parsed("target_bit_errors", v)?,
            None => 200,
        };
        let master_seed: u64 = match take("master_seed") {
            Some(v) => parsed("master_seed", v)?,
            None => 1,
        };
        let bound_profiles: usize = match take("bound_profiles") {
            Some(v) => parsed("bound_profiles", v)?,
            None => 50,
        };

        if let Some((key, _)) = seen.first() {
            return Err(Error::config(format!("unknown key '{key}'")));
        }

        let cfg = SimConfig {
            mapping,
            detector,
            equalizer,
            channel,
            cpp_len,
            c1,
            c2,
            csi_rho,
            snr_grid_db,
            min_trials,
            max_trials,
            target_bit_errors,
            master_seed,
            bound_profiles,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Analytical union-bound curve over this config's SNR grid,
    /// averaged over `bound_profiles` channel profiles.
    pub fn bound_curve(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let daft = DaftMatrix::new(&self.daft_params()?);
        abep_bound_curve(
            &self.mapping,
            &daft,
            &self.channel,
            self.cpp_len,
            &self.snr_grid_db,
            self.bound_profiles,
            self.master_seed,
        )
    }
}

fn parse_snr_grid(raw: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::Config(format!("bad snr_db '{raw}': {what}"));
    if raw.contains(':') {
        let parts: Vec<&str> = raw.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("ranges are start:step:end"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("non-numeric range bound"))?;
        let (start, step, end) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || end < start {
            return Err(bad("need step > 0 and end >= start"));
        }
        let mut grid = Vec::new();
        let mut k = 0u32;
        loop {
            let v = start + step * k as f64;
            if v > end + 1e-9 {
                break;
            }
            grid.push(v);
            k += 1;
        }
        Ok(grid)
    } else {
        let grid: Vec<f64> = raw
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("non-numeric entry"))?;
        if grid.is_empty() {
            return Err(bad("empty"));
        }
        Ok(grid)
    }
}

/// One BER measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// Half-width of the 95% normal-approximation interval on `ber`.
    pub ci_half_width: f64,
}

impl BerPoint {
    fn new(snr_db: f64, trials: u64, bit_errors: u64, bits_per_trial: u64) -> Self {
        let total_bits = (trials * bits_per_trial) as f64;
        let ber = bit_errors as f64 / total_bits;
        let ci_half_width = 1.96 * (ber * (1.0 - ber) / total_bits).sqrt();
        BerPoint { snr_db, trials, bit_errors, ber, ci_half_width }
    }
}

/// What one trial transmitted and recovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub tx_bits: Vec<bool>,
    pub rx_bits: Vec<bool>,
    pub bit_errors: usize,
}

// Randomness lanes: one independent stream per consumer.
const LANE_BITS: u64 = 0;
const LANE_CHANNEL: u64 = 1;
const LANE_NOISE: u64 = 2;
const LANE_CSI: u64 = 3;

fn trial_rng(master_seed: u64, snr_index: u64, trial: u64, lane: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&snr_index.to_le_bytes());
    seed[16..24].copy_from_slice(&trial.to_le_bytes());
    seed[24..32].copy_from_slice(&lane.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Precomputed per-sweep state; everything here is read-only during
/// trials.
struct SimContext<'a> {
    cfg: &'a SimConfig,
    daft: DaftMatrix,
    codebook: Codebook,
    constellation: Constellation,
}

impl<'a> SimContext<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SimContext {
            cfg,
            daft: DaftMatrix::new(&cfg.daft_params()?),
            codebook: Codebook::walsh(cfg.mapping.spread_len)?,
            constellation: Constellation::new(cfg.mapping.mod_order, cfg.mapping.kind)?,
        })
    }

    fn run(&self, snr_index: u64, snr_db: f64, trial: u64) -> Result<TrialOutcome> {
        let cfg = self.cfg;
        let noise_var = 10f64.powf(-snr_db / 10.0);
        let seed = cfg.master_seed;

        let mut bits_rng = trial_rng(seed, snr_index, trial, LANE_BITS);
        let tx_bits: Vec<bool> =
            (0..cfg.mapping.bits_per_frame()).map(|_| bits_rng.gen()).collect();
        let frame = map_bits(&tx_bits, &cfg.mapping, &self.codebook, &self.constellation)?;
        let s = self.daft.inverse(&frame)?;
        let tx = add_cpp(&s, cfg.cpp_len, self.daft.params())?;

        let mut channel_rng = trial_rng(seed, snr_index, trial, LANE_CHANNEL);
        let ch = sample_channel(&cfg.channel, cfg.mapping.frame_len, cfg.cpp_len, &mut channel_rng)?;

        let mut noise_rng = trial_rng(seed, snr_index, trial, LANE_NOISE);
        let rx = apply_channel_time(&tx, &ch, noise_var, &mut noise_rng)?;
        let y = self.daft.forward(&remove_cpp(&rx, cfg.cpp_len)?)?;

        // The receiver's channel knowledge; a fourth lane keeps the CSI
        // error independent of everything the air saw.
        let h_hat: DMatrix<Complex64> = if cfg.csi_rho > 0.0 {
            let mut csi_rng = trial_rng(seed, snr_index, trial, LANE_CSI);
            effective_matrix(&corrupt_gains(&ch, cfg.csi_rho, &mut csi_rng)?, &self.daft)?
        } else {
            effective_matrix(&ch, &self.daft)?
        };

        let rx_bits = match (cfg.mapping.scheme, cfg.detector) {
            (Scheme::Gcim, DetectorKind::Ml) => {
                ml_detect(&y, &h_hat, &cfg.mapping, &self.codebook, &self.constellation)?.bits
            }
            (Scheme::Gcim, DetectorKind::Mrc) => {
                mrc_detect(
                    &y,
                    &h_hat,
                    &cfg.mapping,
                    &self.codebook,
                    &self.constellation,
                    cfg.equalizer,
                    noise_var,
                )?
                .bits
            }
            _ => detect_baseline(&y, &h_hat, &cfg.mapping, &self.constellation, cfg.equalizer, noise_var)?,
        };

        let bit_errors = tx_bits.iter().zip(&rx_bits).filter(|(a, b)| a != b).count();
        Ok(TrialOutcome { tx_bits, rx_bits, bit_errors })
    }
}

/// Runs one fully seeded trial. `snr_db` must be a grid point of the
/// config; its position supplies the seeding index.
pub fn run_trial(cfg: &SimConfig, snr_db: f64, trial_index: u64) -> Result<TrialOutcome> {
    let snr_index = cfg
        .snr_grid_db
        .iter()
        .position(|&v| v == snr_db)
        .ok_or_else(|| Error::config(format!("{snr_db} dB is not on the configured SNR grid")))?;
    SimContext::new(cfg)?.run(snr_index as u64, snr_db, trial_index)
}

fn sweep_point(ctx: &SimContext<'_>, snr_index: u64, snr_db: f64) -> Result<BerPoint> {
    let cfg = ctx.cfg;
    let mut done: u64 = 0;
    let mut errors: u64 = 0;
    while done < cfg.max_trials
        && !(done >= cfg.min_trials && errors >= cfg.target_bit_errors)
    {
        let next = if done < cfg.min_trials {
            cfg.min_trials.min(cfg.max_trials)
        } else {
            (done + BATCH).min(cfg.max_trials)
        };
        let batch_errors: u64 = (done..next)
            .into_par_iter()
            .map(|t| ctx.run(snr_index, snr_db, t).map(|o| o.bit_errors as u64))
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        errors += batch_errors;
        done = next;
    }
    Ok(BerPoint::new(snr_db, done, errors, cfg.mapping.bits_per_frame() as u64))
}

/// Sweeps the SNR grid, at each point running trials until
/// `target_bit_errors` accumulate (never fewer than `min_trials`, never
/// more than `max_trials`). Byte-reproducible from the config alone.
pub fn run_ber_sweep(cfg: &SimConfig) -> Result<Vec<BerPoint>> {
    let ctx = SimContext::new(cfg)?;
    cfg.snr_grid_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| sweep_point(&ctx, i as u64, snr))
        .collect()
}

/// Derives the reference-scheme configs that match the spectral
/// efficiency of a code-index config: plain multicarrier, all-ones
/// spreading with an enlarged constellation, and sparse index modulation
/// with `mapping.active` carriers per subblock.
pub fn matched_se_baselines(cfg: &SimConfig) -> Result<Vec<SimConfig>> {
    if cfg.mapping.scheme != Scheme::Gcim {
        return Err(Error::config("baselines are derived from a code-index config"));
    }
    let m = &cfg.mapping;
    let subblock_bits = m.subblock_bits();
    let n = m.spread_len;

    let order_from_bits = |bits: usize, what: &str| -> Result<usize> {
        if bits == 0 || bits > 20 {
            return Err(Error::Config(format!(
                "no workable constellation for {what}: {bits} bits per symbol"
            )));
        }
        Ok(1usize << bits)
    };

    // Plain multicarrier: the subblock's bits spread over n carriers.
    if subblock_bits % n != 0 {
        return Err(Error::config(format!(
            "spectral efficiency {}/{} bits per carrier is not an integer; no plain multicarrier match",
            subblock_bits, n
        )));
    }
    let afdm_order = order_from_bits(subblock_bits / n, "the plain multicarrier baseline")?;
    let afdm = GcimConfig::new(Scheme::Afdm, m.frame_len, 1, afdm_order, m.kind, 1)?;

    // All-ones spreading: one symbol carries the whole subblock budget.
    let ss_order = order_from_bits(subblock_bits, "the spread baseline")?;
    let ss = GcimConfig::new(Scheme::AfdmSs, m.frame_len, n, ss_order, m.kind, 1)?;

    // Sparse index modulation with the configured number of active
    // carriers: index bits come off the subblock budget first.
    let active = m.active.max(1);
    let probe = GcimConfig::new(Scheme::ImAfdm, m.frame_len, n, 2, m.kind, active)?;
    let im_index_bits = probe.index_bits();
    let symbol_budget = subblock_bits
        .checked_sub(im_index_bits)
        .filter(|b| b % active == 0 && *b > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "cannot split {subblock_bits} subblock bits into {im_index_bits} index bits plus {active} equal symbols"
            ))
        })?;
    let im_order = order_from_bits(symbol_budget / active, "the index-modulation baseline")?;
    let im = GcimConfig::new(Scheme::ImAfdm, m.frame_len, n, im_order, m.kind, active)?;

    let mut out = Vec::new();
    for mapping in [afdm, ss, im] {
        debug_assert_eq!(mapping.bits_per_frame(), m.bits_per_frame());
        let mut alt = cfg.clone();
        alt.mapping = mapping;
        alt.validate()?;
        out.push(alt);
    }
    Ok(out)
}

/// Paired multi-scheme sweep at matched spectral efficiency: the
/// code-index config plus its three derived baselines, all sharing
/// per-trial channel and noise draws. Returns `(scheme, points)` in a
/// fixed order.
pub fn compare_schemes(cfg: &SimConfig) -> Result<Vec<(Scheme, Vec<BerPoint>)>> {
    let mut out = vec![(Scheme::Gcim, run_ber_sweep(cfg)?)];
    for alt in matched_se_baselines(cfg)? {
        out.push((alt.mapping.scheme, run_ber_sweep(&alt)?));
    }
    Ok(out)
}

/// Formats with 6 significant digits, plain decimal where compact and
/// scientific elsewhere; integers shed their trailing zeros.
pub(crate) fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

/// CSV for a sweep: `snr_db,trials,bit_errors,ber,ci`, LF endings.
pub fn ber_csv(points: &[BerPoint]) -> String {
    let mut out = String::from("snr_db,trials,bit_errors,ber,ci\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(p.snr_db),
            p.trials,
            p.bit_errors,
            fmt_sig(p.ber),
            fmt_sig(p.ci_half_width)
        );
    }
    out
}

/// CSV for an analytical curve: `snr_db,abep`, LF endings.
pub fn bound_csv(snr_grid_db: &[f64], abep: &[f64]) -> String {
    let mut out = String::from("snr_db,abep\n");
    for (snr, v) in snr_grid_db.iter().zip(abep) {
        let _ = writeln!(out, "{},{}", fmt_sig(*snr), fmt_sig(*v));
    }
    out
}

pub fn write_ber_csv(path: &Path, points: &[BerPoint]) -> Result<()> {
    std::fs::write(path, ber_csv(points))?;
    Ok(())
}

pub fn write_bound_csv(path: &Path, snr_grid_db: &[f64], abep: &[f64]) -> Result<()> {
    std::fs::write(path, bound_csv(snr_grid_db, abep))?;
    Ok(())
}

fn selftest_err(what: &str) -> Error {
    Error::Selftest(what.to_string())
}

/// Fast end-to-end health check: transform unitarity, pipeline
/// equivalence, despreading orthogonality, transmit energy, closed-form
/// anchors, and sweep determinism. Seconds, not minutes.
pub fn selftest() -> Result<()> {
    use crate::channel::build_effective_matrix;

    // Transform unitarity at several sizes.
    for n in [2usize, 8, 64] {
        let params = DaftParams::with_defaults(n, 1).map_err(|_| selftest_err("params"))?;
        let daft = DaftMatrix::new(&params);
        let eye = DMatrix::<Complex64>::identity(n, n);
        if (daft.matrix() * daft.adjoint() - &eye).norm() > 1e-10 {
            return Err(selftest_err("transform is not unitary"));
        }
    }

    // Time-domain channel application agrees with the matrix route.
    let params = DaftParams::with_defaults(8, 1).map_err(|_| selftest_err("params"))?;
    let daft = DaftMatrix::new(&params);
    let ch_cfg = ChannelConfig::new(3, 2, 1, true).map_err(|_| selftest_err("channel config"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xAFD);
    for _ in 0..5 {
        let ch = sample_channel(&ch_cfg, 8, 3, &mut rng).map_err(|_| selftest_err("sample"))?;
        let x = crate::daft::DaftFrame::new(nalgebra::DVector::from_fn(8, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        }));
        let s = daft.inverse(&x).map_err(|_| selftest_err("inverse"))?;
        let tx = add_cpp(&s, 3, &params).map_err(|_| selftest_err("prefix"))?;
        let rx = apply_channel_time(&tx, &ch, 0.0, &mut rng).map_err(|_| selftest_err("apply"))?;
        let y = daft
            .forward(&remove_cpp(&rx, 3).map_err(|_| selftest_err("deprefix"))?)
            .map_err(|_| selftest_err("forward"))?;
        let h_eff = effective_matrix(&ch, &daft).map_err(|_| selftest_err("effective"))?;
        if (&y.values - &h_eff * &x.values).norm() > 1e-10 {
            return Err(selftest_err("time and matrix channel routes disagree"));
        }
        let eff = build_effective_matrix(&ch, &daft).map_err(|_| selftest_err("per-path"))?;
        if (&eff.matrix - &h_eff).norm() > 1e-10 {
            return Err(selftest_err("per-path sum disagrees with the direct build"));
        }
    }

    // Walsh rows stay orthogonal in integer arithmetic.
    let cb = Codebook::walsh(8).map_err(|_| selftest_err("codebook"))?;
    for i in 0..8 {
        for j in 0..8 {
            let dot: i32 = cb.code(i).iter().zip(cb.code(j)).map(|(a, b)| a * b).sum();
            if dot != if i == j { 8 } else { 0 } {
                return Err(selftest_err("codebook rows are not orthogonal"));
            }
        }
    }

    // Unit transmit energy per element for the standard scheme set.
    let mut rng = ChaCha8Rng::seed_from_u64(0xE5);
    for mapping in [
        GcimConfig::new(Scheme::Gcim, 8, 4, 4, ConstellationKind::Psk, 1),
        GcimConfig::new(Scheme::Afdm, 8, 1, 2, ConstellationKind::Psk, 1),
        GcimConfig::new(Scheme::AfdmSs, 8, 4, 16, ConstellationKind::Psk, 1),
        GcimConfig::new(Scheme::ImAfdm, 8, 4, 4, ConstellationKind::Psk, 1),
    ] {
        let mapping = mapping.map_err(|_| selftest_err("mapping config"))?;
        let cb = Codebook::walsh(mapping.spread_len).map_err(|_| selftest_err("codebook"))?;
        let cst = Constellation::new(mapping.mod_order, mapping.kind)
            .map_err(|_| selftest_err("constellation"))?;
        let mut energy = 0.0;
        let frames = 2000;
        for _ in 0..frames {
            let bits: Vec<bool> = (0..mapping.bits_per_frame()).map(|_| rng.gen()).collect();
            let x = map_bits(&bits, &mapping, &cb, &cst).map_err(|_| selftest_err("map"))?;
            energy += x.values.norm_squared();
        }
        let per_element = energy / (frames * mapping.frame_len) as f64;
        if (per_element - 1.0).abs() > 1e-3 {
            return Err(selftest_err("transmit energy is off calibration"));
        }
    }

    // Closed-form anchors.
    if (crate::analysis::q_approx(0.0).map_err(|_| selftest_err("q"))? - 1.0 / 3.0).abs() > 1e-12 {
        return Err(selftest_err("tail fit anchor is off"));
    }

    // A miniature sweep is reproducible.
    let mapping = GcimConfig::new(Scheme::Gcim, 4, 2, 2, ConstellationKind::Psk, 1)
        .map_err(|_| selftest_err("mapping config"))?;
    let channel = ChannelConfig::new(2, 1, 1, true).map_err(|_| selftest_err("channel config"))?;
    let mut cfg = SimConfig::new(mapping, channel, vec![0.0, 10.0])
        .map_err(|_| selftest_err("sim config"))?;
    cfg.min_trials = 200;
    cfg.max_trials = 200;
    let a = run_ber_sweep(&cfg).map_err(|_| selftest_err("sweep"))?;
    let b = run_ber_sweep(&cfg).map_err(|_| selftest_err("sweep"))?;
    if ber_csv(&a) != ber_csv(&b) {
        return Err(selftest_err("repeated sweeps differ"));
    }
    Ok(())
}
