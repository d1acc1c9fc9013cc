//! Bit-to-frame mapping: Walsh spreading codebooks, Gray-labelled
//! constellations, and the mappers for the spread code-index scheme and its
//! three reference schemes.
//!
//! The frame of `N` chirp subcarriers splits into `G` subblocks of `n`
//! chips. In the code-index scheme every subblock carries
//! `log2(n) + log2(M)` bits: the first group picks one of the `n` Walsh
//! rows, the second a constellation point that multiplies the chosen row.
//! The reference schemes reuse the same frame geometry so that sweeps can
//! be run at matched spectral efficiency:
//!
//! * plain multicarrier: one constellation symbol per subcarrier,
//! * all-ones spreading: one symbol repeated across each subblock,
//! * index modulation: a few active subcarriers per subblock, chosen
//!   combinadically from the index bits, each carrying a boosted symbol.

use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::daft::DaftFrame;
use crate::error::{Error, Result};

/// Which transmission scheme a frame is mapped for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Code-index modulation with Walsh spreading (the scheme under study).
    Gcim,
    /// Plain multicarrier: one symbol per subcarrier, no spreading.
    Afdm,
    /// Spread spectrum with the all-ones code only; no index bits.
    AfdmSs,
    /// Index modulation: sparse active subcarriers per subblock.
    ImAfdm,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Gcim => "gcim",
            Scheme::Afdm => "afdm",
            Scheme::AfdmSs => "afdm_ss",
            Scheme::ImAfdm => "im_afdm",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcim" => Ok(Scheme::Gcim),
            "afdm" => Ok(Scheme::Afdm),
            "afdm_ss" => Ok(Scheme::AfdmSs),
            "im_afdm" => Ok(Scheme::ImAfdm),
            other => Err(Error::config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Constellation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    Psk,
    Qam,
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psk" => Ok(ConstellationKind::Psk),
            "qam" => Ok(ConstellationKind::Qam),
            other => Err(Error::config(format!("unknown constellation '{other}'"))),
        }
    }
}

/// Frame geometry and modulation choice shared by all schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcimConfig {
    pub scheme: Scheme,
    /// Subcarriers per frame `N`.
    pub frame_len: usize,
    /// Chips per subblock `n` (spreading-code length); 1 for the plain
    /// multicarrier scheme.
    pub spread_len: usize,
    /// Subblocks per frame `G = N / n`.
    pub groups: usize,
    /// Constellation order `M`.
    pub mod_order: usize,
    pub kind: ConstellationKind,
    /// Active subcarriers per subblock for the index-modulation scheme.
    pub active: usize,
}

fn log2_exact(x: usize) -> usize {
    debug_assert!(x.is_power_of_two());
    x.trailing_zeros() as usize
}

/// Binomial coefficient, saturating instead of overflowing.
fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

impl GcimConfig {
    /// Validates geometry and builds a config. `active` is only meaningful
    /// for the index-modulation scheme; pass 1 otherwise.
    pub fn new(
        scheme: Scheme,
        frame_len: usize,
        spread_len: usize,
        mod_order: usize,
        kind: ConstellationKind,
        active: usize,
    ) -> Result<Self> {
        if frame_len < 2 {
            return Err(Error::config(format!(
                "frame length must be at least 2, got {frame_len}"
            )));
        }
        if spread_len == 0 || !spread_len.is_power_of_two() {
            return Err(Error::config(format!(
                "spreading length must be a power of two, got {spread_len}"
            )));
        }
        if scheme == Scheme::Afdm && spread_len != 1 {
            return Err(Error::config(
                "the plain multicarrier scheme has no spreading; use spread_len = 1",
            ));
        }
        if scheme != Scheme::Afdm && spread_len < 2 {
            return Err(Error::config(
                "spread schemes need a spreading length of at least 2",
            ));
        }
        if frame_len % spread_len != 0 {
            return Err(Error::config(format!(
                "frame length {frame_len} is not a whole number of subblocks of {spread_len}"
            )));
        }
        if mod_order < 2 || !mod_order.is_power_of_two() {
            return Err(Error::config(format!(
                "constellation order must be a power of two >= 2, got {mod_order}"
            )));
        }
        if scheme == Scheme::ImAfdm && (active == 0 || active > spread_len) {
            return Err(Error::config(format!(
                "active subcarriers per subblock must lie in 1..={spread_len}, got {active}"
            )));
        }
        let cfg = GcimConfig {
            scheme,
            frame_len,
            spread_len,
            groups: frame_len / spread_len,
            mod_order,
            kind,
            active,
        };
        if cfg.subblock_bits() == 0 {
            return Err(Error::config("configuration carries zero bits per subblock"));
        }
        Ok(cfg)
    }

    /// Index bits per subblock (0 for schemes without index selection).
    pub fn index_bits(&self) -> usize {
        match self.scheme {
            Scheme::Gcim => log2_exact(self.spread_len),
            Scheme::ImAfdm => {
                let combos = binomial(self.spread_len, self.active);
                (combos.max(1).ilog2()) as usize
            }
            Scheme::Afdm | Scheme::AfdmSs => 0,
        }
    }

    /// Constellation bits per subblock.
    pub fn symbol_bits(&self) -> usize {
        let per_symbol = log2_exact(self.mod_order);
        match self.scheme {
            Scheme::ImAfdm => self.active * per_symbol,
            _ => per_symbol,
        }
    }

    pub fn subblock_bits(&self) -> usize {
        self.index_bits() + self.symbol_bits()
    }

    pub fn bits_per_frame(&self) -> usize {
        self.groups * self.subblock_bits()
    }

    /// Bits per subcarrier use, `bits_per_frame / N`.
    pub fn spectral_efficiency(&self) -> f64 {
        self.bits_per_frame() as f64 / self.frame_len as f64
    }
}

/// MSB-first bit slice to integer.
pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
}

/// Integer to MSB-first bit vector of the given width.
pub fn index_to_bits(value: usize, width: usize) -> Vec<bool> {
    (0..width).map(|i| (value >> (width - 1 - i)) & 1 == 1).collect()
}

/// Number of positions at which two equal-length bit vectors differ.
pub fn hamming_distance(a: &[bool], b: &[bool]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn gray_encode(w: usize) -> usize {
    w ^ (w >> 1)
}

fn gray_decode(mut g: usize) -> usize {
    let mut w = 0;
    while g != 0 {
        w ^= g;
        g >>= 1;
    }
    w
}

/// Rectangular grid for a QAM order: I levels, Q levels, and the bit split.
fn qam_grid(m: usize) -> (usize, usize, usize, usize) {
    let bits = log2_exact(m);
    let i_bits = bits - bits / 2;
    let q_bits = bits / 2;
    (1 << i_bits, 1 << q_bits, i_bits, q_bits)
}

/// Point index (geometric position) for a bit word, Gray-labelled.
fn point_of_word(kind: ConstellationKind, m: usize, word: usize) -> usize {
    match kind {
        ConstellationKind::Psk => gray_decode(word),
        ConstellationKind::Qam => {
            let (_, nq, _, q_bits) = qam_grid(m);
            let ki = gray_decode(word >> q_bits);
            let kq = gray_decode(word & (nq - 1));
            ki * nq + kq
        }
    }
}

/// Bit word carried by a point index; inverse of [`point_of_word`].
fn word_of_point(kind: ConstellationKind, m: usize, index: usize) -> usize {
    match kind {
        ConstellationKind::Psk => gray_encode(index),
        ConstellationKind::Qam => {
            let (_, nq, _, q_bits) = qam_grid(m);
            (gray_encode(index / nq) << q_bits) | gray_encode(index % nq)
        }
    }
}

/// Unit-average-energy constellation with Gray labelling.
///
/// `points` is in geometric order: counter-clockwise phase for PSK (with
/// the four-point ring rotated by `pi/4` so points sit on the diagonals),
/// row-major over the I/Q grid for QAM. Use the word translation tables to
/// go between bit labels and point indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub kind: ConstellationKind,
    pub points: Vec<Complex64>,
    /// `point_of_word[w]` is the point index labelled by bit word `w`.
    pub point_of_word: Vec<usize>,
    /// `word_of_point[t]` is the bit word carried by point `t`.
    pub word_of_point: Vec<usize>,
}

impl Constellation {
    pub fn new(m: usize, kind: ConstellationKind) -> Result<Self> {
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::config(format!(
                "constellation order must be a power of two >= 2, got {m}"
            )));
        }
        let points: Vec<Complex64> = match kind {
            ConstellationKind::Psk => {
                let rot = if m == 4 { PI / 4.0 } else { 0.0 };
                (0..m)
                    .map(|t| crate::daft::cis(TAU * t as f64 / m as f64 + rot))
                    .collect()
            }
            ConstellationKind::Qam => {
                let (ni, nq, _, _) = qam_grid(m);
                let energy =
                    ((ni * ni - 1) as f64 + (nq * nq - 1) as f64) / 3.0;
                let scale = 1.0 / energy.sqrt();
                let level = |k: usize, levels: usize| (2 * k) as f64 - (levels - 1) as f64;
                (0..m)
                    .map(|t| {
                        let (ki, kq) = (t / nq, t % nq);
                        Complex64::new(level(ki, ni) * scale, level(kq, nq) * scale)
                    })
                    .collect()
            }
        };
        let point_of_word = (0..m).map(|w| point_of_word(kind, m, w)).collect();
        let word_of_point = (0..m).map(|t| word_of_point(kind, m, t)).collect();
        Ok(Constellation { kind, points, point_of_word, word_of_point })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Point reached by an MSB-first bit word.
    pub fn map_word(&self, word: usize) -> Complex64 {
        self.points[self.point_of_word[word]]
    }
}

/// Walsh-Hadamard spreading codebook with `n` rows of `n` chips in
/// `{-1, +1}`, built by the doubling construction. Row 0 is all ones and
/// distinct rows have exactly zero dot product in integer arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    codes: Vec<Vec<i32>>,
}

impl Codebook {
    pub fn walsh(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "codebook size must be a power of two, got {n}"
            )));
        }
        let mut codes = vec![vec![1i32]];
        while codes.len() < n {
            let half = codes;
            let mut grown = Vec::with_capacity(half.len() * 2);
            for row in &half {
                let mut r: Vec<i32> = row.clone();
                r.extend(row.iter());
                grown.push(r);
            }
            for row in &half {
                let mut r: Vec<i32> = row.clone();
                r.extend(row.iter().map(|v| -v));
                grown.push(r);
            }
            codes = grown;
        }
        Ok(Codebook { codes })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Chips of row `i`.
    pub fn code(&self, i: usize) -> &[i32] {
        &self.codes[i]
    }
}

/// What one subblock of the code-index scheme carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubblockSelection {
    /// Walsh row selected by the index bits.
    pub code_index: usize,
    /// Constellation point index (geometric position, not the bit word).
    pub symbol_index: usize,
    pub symbol: Complex64,
}

/// Lexicographic `k`-combination of `0..n` at the given rank.
fn combination_from_rank(n: usize, k: usize, rank: u128) -> Vec<usize> {
    let mut combo = Vec::with_capacity(k);
    let mut r = rank;
    let mut next = 0usize;
    for j in 0..k {
        let mut c = next;
        loop {
            let with_c = binomial(n - 1 - c, k - 1 - j);
            if r < with_c {
                combo.push(c);
                next = c + 1;
                break;
            }
            r -= with_c;
            c += 1;
        }
    }
    combo
}

/// Maps one subblock's bits to its chips. For the code-index scheme the
/// chosen code/symbol pair is also reported.
pub(crate) fn map_subblock(
    bits: &[bool],
    cfg: &GcimConfig,
    codebook: &Codebook,
    constellation: &Constellation,
) -> Result<(Vec<Complex64>, Option<SubblockSelection>)> {
    if bits.len() != cfg.subblock_bits() {
        return Err(Error::dim(format!(
            "subblock expects {} bits, got {}",
            cfg.subblock_bits(),
            bits.len()
        )));
    }
    let p1 = cfg.index_bits();
    match cfg.scheme {
        Scheme::Gcim => {
            if codebook.len() != cfg.spread_len {
                return Err(Error::dim("codebook size does not match the spreading length"));
            }
            let code_index = bits_to_index(&bits[..p1]);
            let word = bits_to_index(&bits[p1..]);
            let symbol_index = constellation.point_of_word[word];
            let symbol = constellation.points[symbol_index];
            let chips = codebook
                .code(code_index)
                .iter()
                .map(|&c| symbol * c as f64)
                .collect();
            Ok((chips, Some(SubblockSelection { code_index, symbol_index, symbol })))
        }
        Scheme::Afdm | Scheme::AfdmSs => {
            let symbol = constellation.map_word(bits_to_index(bits));
            Ok((vec![symbol; cfg.spread_len], None))
        }
        Scheme::ImAfdm => {
            let rank = bits_to_index(&bits[..p1]) as u128;
            let positions = combination_from_rank(cfg.spread_len, cfg.active, rank);
            let boost = (cfg.spread_len as f64 / cfg.active as f64).sqrt();
            let per_symbol = log2_exact(cfg.mod_order);
            let mut chips = vec![Complex64::new(0.0, 0.0); cfg.spread_len];
            for (a, &pos) in positions.iter().enumerate() {
                let lo = p1 + a * per_symbol;
                let word = bits_to_index(&bits[lo..lo + per_symbol]);
                chips[pos] = constellation.map_word(word) * boost;
            }
            Ok((chips, None))
        }
    }
}

fn check_frame_inputs(
    bits: &[bool],
    cfg: &GcimConfig,
    constellation: &Constellation,
) -> Result<()> {
    if bits.len() != cfg.bits_per_frame() {
        return Err(Error::dim(format!(
            "frame expects {} bits, got {}",
            cfg.bits_per_frame(),
            bits.len()
        )));
    }
    if constellation.order() != cfg.mod_order {
        return Err(Error::dim("constellation order does not match the config"));
    }
    Ok(())
}

/// Maps a whole frame of bits for any scheme.
pub fn map_bits(
    bits: &[bool],
    cfg: &GcimConfig,
    codebook: &Codebook,
    constellation: &Constellation,
) -> Result<DaftFrame> {
    check_frame_inputs(bits, cfg, constellation)?;
    let p = cfg.subblock_bits();
    let n = cfg.spread_len;
    let mut values = DVector::zeros(cfg.frame_len);
    for g in 0..cfg.groups {
        let (chips, _) = map_subblock(&bits[g * p..(g + 1) * p], cfg, codebook, constellation)?;
        for (k, chip) in chips.into_iter().enumerate() {
            values[g * n + k] = chip;
        }
    }
    Ok(DaftFrame::new(values))
}

/// Maps a frame for the code-index scheme, reporting per-subblock choices.
pub fn map_bits_gcim(
    bits: &[bool],
    cfg: &GcimConfig,
    codebook: &Codebook,
    constellation: &Constellation,
) -> Result<(DaftFrame, Vec<SubblockSelection>)> {
    if cfg.scheme != Scheme::Gcim {
        return Err(Error::config("map_bits_gcim expects the code-index scheme"));
    }
    check_frame_inputs(bits, cfg, constellation)?;
    let p = cfg.subblock_bits();
    let n = cfg.spread_len;
    let mut values = DVector::zeros(cfg.frame_len);
    let mut selections = Vec::with_capacity(cfg.groups);
    for g in 0..cfg.groups {
        let (chips, sel) = map_subblock(&bits[g * p..(g + 1) * p], cfg, codebook, constellation)?;
        for (k, chip) in chips.into_iter().enumerate() {
            values[g * n + k] = chip;
        }
        selections.push(sel.expect("gcim subblock always yields a selection"));
    }
    Ok((DaftFrame::new(values), selections))
}

/// Recovers the bit stream from per-subblock code/symbol choices; exact
/// inverse of [`map_bits_gcim`].
pub fn demap_gcim(selections: &[SubblockSelection], cfg: &GcimConfig) -> Result<Vec<bool>> {
    if cfg.scheme != Scheme::Gcim {
        return Err(Error::config("demap_gcim expects the code-index scheme"));
    }
    if selections.len() != cfg.groups {
        return Err(Error::dim(format!(
            "expected {} subblock selections, got {}",
            cfg.groups,
            selections.len()
        )));
    }
    let p1 = cfg.index_bits();
    let p2 = cfg.symbol_bits();
    let mut bits = Vec::with_capacity(cfg.bits_per_frame());
    for sel in selections {
        if sel.code_index >= cfg.spread_len {
            return Err(Error::config(format!(
                "code index {} out of range for {} codes",
                sel.code_index, cfg.spread_len
            )));
        }
        if sel.symbol_index >= cfg.mod_order {
            return Err(Error::config(format!(
                "symbol index {} out of range for order {}",
                sel.symbol_index, cfg.mod_order
            )));
        }
        bits.extend(index_to_bits(sel.code_index, p1));
        bits.extend(index_to_bits(
            word_of_point(cfg.kind, cfg.mod_order, sel.symbol_index),
            p2,
        ));
    }
    Ok(bits)
}
