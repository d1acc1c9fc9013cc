//! Pairwise error probabilities and the union bound on average BER.
//!
//! For a candidate pair (x, x_hat) over a channel with unit-gain per-path
//! matrices H_l and gains h ~ CN(0, 1/L), the receiver sees
//! `y = Upsilon(x) h + w` with `Upsilon(x) = [H_1 x | ... | H_L x]`. The
//! pairwise error probability conditioned on the gains is
//! `Q(sqrt(Theta / 2 N0))` with `Theta = ||(Upsilon(x) - Upsilon(x_hat)) h||^2
//! = h^H Gamma h`, and averaging over the gains with the two-term
//! exponential fit of Q gives a closed form in the nonzero eigenvalues
//! zeta_q of Gamma:
//!
//! ```text
//! PEP = (1/12) prod_q 1 / (1 + zeta_q / (4 N0 L))
//!     + (1/4)  prod_q 1 / (1 + zeta_q / (3 N0 L)).
//! ```
//!
//! Summing PEP times bit distance over all frame pairs yields the union
//! bound on average BER. The fit `Q(v) ~ (1/12)e^{-v^2/2} + (1/4)e^{-2v^2/3}`
//! is accurate in the tail but not a true upper bound for small arguments
//! (it gives 1/3 at v = 0), so the "bound" inherits that caveat at low SNR.
//!
//! Eigenvalues depend on the pair only through the difference x - x_hat,
//! so the bound groups pairs by difference vector and reuses one
//! eigendecomposition per group across the whole SNR grid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;

use crate::channel::{build_effective_matrix, sample_channel, ChannelConfig};
use crate::daft::{DaftFrame, DaftMatrix};
use crate::error::{Error, Result};
use crate::mapping::{map_bits, Codebook, Constellation, GcimConfig};

/// Frames whose Gamma spectrum fits one machine word of bits each: the
/// union bound enumerates all 2^b of them, pairwise.
const MAX_BOUND_BITS: usize = 12;

/// Rank threshold relative to the largest eigenvalue.
const EIG_REL_TOL: f64 = 1e-10;

/// Compensated accumulator; the pair sums mix magnitudes across many
/// orders at high SNR.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Exact Gaussian tail `Q(v) = P(Z > v)` via the complementary error
/// function.
pub fn q_exact(v: f64) -> f64 {
    0.5 * libm::erfc(v / std::f64::consts::SQRT_2)
}

/// Two-term exponential fit of the Gaussian tail,
/// `(1/12) e^{-v^2/2} + (1/4) e^{-2 v^2 / 3}`.
///
/// Gives 1/3 at v = 0 (not 1/2); good to a few tens of percent for
/// v >= 1, which is where it is used.
pub fn q_approx(v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::config(format!("tail argument must be >= 0, got {v}")));
    }
    Ok((-0.5 * v * v).exp() / 12.0 + (-2.0 * v * v / 3.0).exp() / 4.0)
}

/// Column-stacks the per-path responses of one frame:
/// `Upsilon(x) = [H_1 x | ... | H_L x]`, an N x L matrix.
pub fn upsilon_matrix(x: &DaftFrame, per_path: &[DMatrix<Complex64>]) -> Result<DMatrix<Complex64>> {
    if per_path.is_empty() {
        return Err(Error::dim("need at least one per-path matrix"));
    }
    let n = x.len();
    for h in per_path {
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::dim(format!(
                "per-path matrix is {}x{}, frame has {n} entries",
                h.nrows(),
                h.ncols()
            )));
        }
    }
    let mut m = DMatrix::zeros(n, per_path.len());
    for (l, h) in per_path.iter().enumerate() {
        m.set_column(l, &(h * &x.values));
    }
    Ok(m)
}

/// A candidate pair with the channel structure and noise level needed to
/// evaluate its error probability.
#[derive(Debug, Clone)]
pub struct PepInputs {
    pub x: DaftFrame,
    pub x_hat: DaftFrame,
    /// Unit-gain per-path matrices; the gains are marginalized as
    /// i.i.d. CN(0, 1/L).
    pub per_path: Vec<DMatrix<Complex64>>,
    pub noise_var: f64,
}

impl PepInputs {
    pub fn new(
        x: DaftFrame,
        x_hat: DaftFrame,
        per_path: Vec<DMatrix<Complex64>>,
        noise_var: f64,
    ) -> Result<Self> {
        let inputs = PepInputs { x, x_hat, per_path, noise_var };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn path_count(&self) -> usize {
        self.per_path.len()
    }

    fn validate(&self) -> Result<()> {
        if self.x.len() != self.x_hat.len() {
            return Err(Error::dim("candidate frames differ in length"));
        }
        if self.x.values == self.x_hat.values {
            return Err(Error::config("candidate frames must differ"));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::config(format!(
                "noise variance must be positive, got {}",
                self.noise_var
            )));
        }
        upsilon_matrix(&self.x, &self.per_path).map(|_| ())
    }

    /// `Upsilon(x) - Upsilon(x_hat)`, equal to `Upsilon(x - x_hat)`.
    fn upsilon_diff(&self) -> DMatrix<Complex64> {
        let d = DaftFrame::new(&self.x.values - &self.x_hat.values);
        upsilon_matrix(&d, &self.per_path).expect("validated dimensions")
    }
}

/// Error probability of the pair conditioned on specific gains, with the
/// exact Gaussian tail: `Q(sqrt(h^H Gamma h / 2 N0))`.
pub fn pep_conditional(inputs: &PepInputs, gains: &DVector<Complex64>) -> Result<f64> {
    Ok(q_exact(conditional_argument(inputs, gains)?))
}

/// Same conditioning, with the two-term tail fit instead of exact Q; this
/// is the integrand whose gain average has the closed form below.
pub fn pep_conditional_approx(inputs: &PepInputs, gains: &DVector<Complex64>) -> Result<f64> {
    q_approx(conditional_argument(inputs, gains)?)
}

fn conditional_argument(inputs: &PepInputs, gains: &DVector<Complex64>) -> Result<f64> {
    inputs.validate()?;
    if gains.len() != inputs.path_count() {
        return Err(Error::dim(format!(
            "{} gains for {} paths",
            gains.len(),
            inputs.path_count()
        )));
    }
    let theta = (inputs.upsilon_diff() * gains).norm_squared();
    Ok((theta / (2.0 * inputs.noise_var)).sqrt())
}

/// Gain-averaged pairwise error probability.
#[derive(Debug, Clone)]
pub struct PepResult {
    /// Nonzero eigenvalues of Gamma, with multiplicity, descending.
    pub eigenvalues: Vec<f64>,
    /// Count of nonzero eigenvalues; the pair's diversity order.
    pub rank: usize,
    /// Averaged error probability, in [0, 1/3].
    pub pep: f64,
}

/// Nonzero spectrum of `Gamma = (Upsilon diff)^H (Upsilon diff)`; keeps
/// eigenvalues above `1e-10 * max` so repeated roots retain multiplicity
/// while round-off stays out.
fn gamma_spectrum(upsilon_diff: &DMatrix<Complex64>) -> Vec<f64> {
    let gamma = upsilon_diff.adjoint() * upsilon_diff;
    let eig = SymmetricEigen::new(gamma);
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut kept: Vec<f64> =
        eig.eigenvalues.iter().cloned().filter(|&z| z > EIG_REL_TOL * max).collect();
    kept.sort_by(|a, b| b.partial_cmp(a).unwrap());
    kept
}

fn pep_from_spectrum(eigenvalues: &[f64], path_count: usize, noise_var: f64) -> f64 {
    let l = path_count as f64;
    let mut p1 = 1.0 / 12.0;
    let mut p2 = 1.0 / 4.0;
    for &z in eigenvalues {
        p1 /= 1.0 + z / (4.0 * noise_var * l);
        p2 /= 1.0 + z / (3.0 * noise_var * l);
    }
    p1 + p2
}

/// Error probability of the pair averaged over i.i.d. CN(0, 1/L) gains,
/// via the eigenvalues of Gamma.
pub fn pep_unconditional(inputs: &PepInputs) -> Result<PepResult> {
    inputs.validate()?;
    let eigenvalues = gamma_spectrum(&inputs.upsilon_diff());
    let rank = eigenvalues.len();
    let pep = pep_from_spectrum(&eigenvalues, inputs.path_count(), inputs.noise_var);
    Ok(PepResult { eigenvalues, rank, pep })
}

/// Small-noise limit of the averaged PEP:
/// `(N0 L)^R (4^R/12 + 3^R/4) prod_q zeta_q^{-1}`.
///
/// The ratio to [`pep_unconditional`] tends to 1 as N0 -> 0; the `L^R`
/// factor follows the same per-path `zeta_q / L` normalization.
pub fn pep_high_snr(inputs: &PepInputs) -> Result<f64> {
    inputs.validate()?;
    let eigenvalues = gamma_spectrum(&inputs.upsilon_diff());
    if eigenvalues.is_empty() {
        return Err(Error::config(
            "pair has no nonzero eigenvalue; the high-SNR form needs a positive spectrum",
        ));
    }
    let r = eigenvalues.len() as i32;
    let l = inputs.path_count() as f64;
    let scale = (inputs.noise_var * l).powi(r);
    let fit = 4f64.powi(r) / 12.0 + 3f64.powi(r) / 4.0;
    let inv_prod: f64 = eigenvalues.iter().map(|z| 1.0 / z).product();
    Ok(scale * fit * inv_prod)
}

/// One group of frame pairs sharing a difference vector: a single Gamma
/// spectrum plus the total bit distance it multiplies in the union bound.
struct PairClass {
    eigenvalues: Vec<f64>,
    /// Sum of Hamming distances over the ordered pairs in the group.
    weight: f64,
}

fn enumerate_frames(
    cfg: &GcimConfig,
    codebook: &Codebook,
    constellation: &Constellation,
) -> Result<Vec<DVector<Complex64>>> {
    let b = cfg.bits_per_frame();
    if b > MAX_BOUND_BITS {
        return Err(Error::TooLarge(format!(
            "union bound enumerates 2^{b} frames; the budget stops at 2^{MAX_BOUND_BITS}"
        )));
    }
    (0..(1usize << b))
        .map(|pattern| {
            let bits: Vec<bool> = (0..b).map(|j| (pattern >> (b - 1 - j)) & 1 == 1).collect();
            Ok(map_bits(&bits, cfg, codebook, constellation)?.values)
        })
        .collect()
}

/// Bit pattern of a difference vector, used to pool pairs with identical
/// differences. Mapped frames are exact arithmetic results, so equal
/// differences match bit for bit.
fn difference_key(d: &DVector<Complex64>) -> Vec<u64> {
    let mut key = Vec::with_capacity(2 * d.len());
    for v in d.iter() {
        key.push(v.re.to_bits());
        key.push(v.im.to_bits());
    }
    key
}

fn pair_classes(
    frames: &[DVector<Complex64>],
    per_path: &[DMatrix<Complex64>],
) -> Result<Vec<PairClass>> {
    let mut classes: Vec<PairClass> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    for p in 0..frames.len() {
        for q in 0..p {
            let d = &frames[p] - &frames[q];
            let slot = match index.entry(difference_key(&d)) {
                std::collections::hash_map::Entry::Occupied(e) => *e.get(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    let ups = upsilon_matrix(&DaftFrame::new(d.clone()), per_path)?;
                    classes.push(PairClass { eigenvalues: gamma_spectrum(&ups), weight: 0.0 });
                    *e.insert(classes.len() - 1)
                }
            };
            // Both orderings of the pair, with the same bit distance.
            classes[slot].weight += 2.0 * ((p ^ q).count_ones() as f64);
        }
    }
    Ok(classes)
}

fn bound_from_classes(classes: &[PairClass], path_count: usize, noise_var: f64, b: usize) -> f64 {
    let mut acc = Kahan::default();
    for class in classes {
        acc.add(class.weight * pep_from_spectrum(&class.eigenvalues, path_count, noise_var));
    }
    acc.sum / (b as f64 * (1usize << b) as f64)
}

/// Union bound on average BER for one fixed delay/Doppler profile:
/// `(1 / (b 2^b)) sum_x sum_{x_hat != x} PEP(x -> x_hat) * bits(x, x_hat)`,
/// gains marginalized analytically.
pub fn abep_upper_bound(
    cfg: &GcimConfig,
    per_path: &[DMatrix<Complex64>],
    noise_var: f64,
) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::config(format!("noise variance must be positive, got {noise_var}")));
    }
    if per_path.is_empty() {
        return Err(Error::dim("need at least one per-path matrix"));
    }
    let codebook = Codebook::walsh(cfg.spread_len)?;
    let constellation = Constellation::new(cfg.mod_order, cfg.kind)?;
    let frames = enumerate_frames(cfg, &codebook, &constellation)?;
    let classes = pair_classes(&frames, per_path)?;
    Ok(bound_from_classes(&classes, per_path.len(), noise_var, cfg.bits_per_frame()))
}

/// Union bound averaged over randomly drawn delay/Doppler profiles, one
/// value per SNR grid point (dB, symbol energy 1, so `N0 = 10^{-snr/10}`).
///
/// Profiles are drawn from `seed` independently of everything else; each
/// profile's eigendecompositions are shared across the whole grid.
pub fn abep_bound_curve(
    cfg: &GcimConfig,
    daft: &DaftMatrix,
    channel: &ChannelConfig,
    cpp_len: usize,
    snr_grid_db: &[f64],
    profiles: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if profiles == 0 {
        return Err(Error::config("need at least one channel profile"));
    }
    if snr_grid_db.is_empty() {
        return Err(Error::config("empty SNR grid"));
    }
    let codebook = Codebook::walsh(cfg.spread_len)?;
    let constellation = Constellation::new(cfg.mod_order, cfg.kind)?;
    let frames = enumerate_frames(cfg, &codebook, &constellation)?;
    let b = cfg.bits_per_frame();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<_> = (0..profiles)
        .map(|_| sample_channel(channel, cfg.frame_len, cpp_len, &mut rng))
        .collect::<Result<_>>()?;

    // Per-profile curves in parallel; the final average runs in draw
    // order, so the result does not depend on scheduling.
    let curves: Vec<Vec<f64>> = draws
        .par_iter()
        .map(|ch| {
            let per_path = build_effective_matrix(ch, daft)?.per_path;
            let classes = pair_classes(&frames, &per_path)?;
            Ok(snr_grid_db
                .iter()
                .map(|snr| {
                    bound_from_classes(&classes, per_path.len(), 10f64.powf(-snr / 10.0), b)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut avg = vec![Kahan::default(); snr_grid_db.len()];
    for curve in &curves {
        for (a, v) in avg.iter_mut().zip(curve) {
            a.add(*v);
        }
    }
    Ok(avg.into_iter().map(|a| a.sum / profiles as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daft::DaftParams;
    use crate::mapping::{ConstellationKind, Scheme};
    use rand::Rng;
    use std::f64::consts::PI;

    /// Gaussian tail by quadrature of the finite-interval form
    /// `Q(v) = (1/pi) Int_0^{pi/2} exp(-v^2 / (2 sin^2 t)) dt`, v >= 0.
    fn q_quadrature(v: f64) -> f64 {
        if v == 0.0 {
        	return 0.5;
        }
        let panels = 4000;
        let h = (PI / 2.0) / panels as f64;
        let f = |t: f64| {
            if t == 0.0 {
                0.0
            } else {
                (-v * v / (2.0 * t.sin().powi(2))).exp()
            }
        };
        let mut s = f(0.0) + f(PI / 2.0);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    fn unit_paths(n: usize, l: usize, rng: &mut impl Rng) -> Vec<DMatrix<Complex64>> {
        let cfg = ChannelConfig::new(l, 2.min(n - 1), 1, true).unwrap();
        let ch = sample_channel(&cfg, n, 2.min(n - 1) + 1, rng).unwrap();
        let params = DaftParams::with_defaults(n, 1).unwrap();
        build_effective_matrix(&ch, &DaftMatrix::new(&params)).unwrap().per_path
    }

    fn random_frame(n: usize, rng: &mut impl Rng) -> DaftFrame {
        DaftFrame::new(DVector::from_fn(n, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        }))
    }

    fn random_gains(l: usize, rng: &mut impl Rng) -> DVector<Complex64> {
        let s = (0.5 / l as f64).sqrt();
        DVector::from_fn(l, |_, _| {
            Complex64::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
                rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
            )
        })
    }

    #[test]
    fn tail_functions() {
        assert_eq!(q_approx(0.0).unwrap(), 1.0 / 12.0 + 0.25);
        let want = (-4.5f64).exp() / 12.0 + (-6.0f64).exp() / 4.0;
        assert!((q_approx(3.0).unwrap() - want).abs() < 1e-16);
        assert!(q_approx(-0.1).is_err());
        assert!(q_approx(f64::NAN).is_err());

        // Exact tail against independent quadrature.
        assert_eq!(q_exact(0.0), 0.5);
        for v in [0.5, 1.0, 2.0, 3.0, 5.0] {
            let want = q_quadrature(v);
            assert!((q_exact(v) - want).abs() < 1e-12 * want, "v = {v}");
        }
        assert!((q_exact(3.0) - 1.3499e-3).abs() < 1e-7);

        // The fit overestimates the exact tail in its working range.
        let mut v = 1.0;
        while v <= 5.0 {
            let exact = q_exact(v);
            let fit = q_approx(v).unwrap();
            assert!(fit >= exact, "v = {v}");
            assert!((fit - exact) / exact < 0.30, "v = {v}");
            v += 0.25;
        }
    }

    #[test]
    fn upsilon_shapes_and_linearity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
        let x = random_frame(8, &mut rng);

        // Single identity path: the one column is the frame itself.
        let eye = vec![DMatrix::<Complex64>::identity(8, 8)];
        let u = upsilon_matrix(&x, &eye).unwrap();
        assert_eq!(u.ncols(), 1);
        assert!((u.column(0) - &x.values).norm() < 1e-15);

        let per_path = unit_paths(8, 3, &mut rng);
        let u = upsilon_matrix(&x, &per_path).unwrap();
        assert_eq!((u.nrows(), u.ncols()), (8, 3));
        for (l, h) in per_path.iter().enumerate() {
            assert!((u.column(l) - h * &x.values).norm() < 1e-12);
        }

        // Upsilon(x) h equals the summed-channel response.
        let gains = random_gains(3, &mut rng);
        let mut summed: DMatrix<Complex64> = DMatrix::zeros(8, 8);
        for (h, g) in per_path.iter().zip(gains.iter()) {
            summed += h * *g;
        }
        assert!((&u * &gains - summed * &x.values).norm() < 1e-12);

        let short = DaftFrame::new(DVector::zeros(4));
        assert!(upsilon_matrix(&short, &per_path).is_err());
        assert!(upsilon_matrix(&x, &[]).is_err());
    }

    #[test]
    fn conditional_pep_matches_known_tail_values() {
        // L=1, identity path, d = sqrt(18) e0, h = 1, N0 = 1:
        // Theta / 2 N0 = 9, so the PEP is Q(3).
        let n = 4;
        let x = DaftFrame::new(DVector::from_fn(n, |i, _| {
            if i == 0 { Complex64::new(18f64.sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) }
        }));
        let x_hat = DaftFrame::new(DVector::zeros(n));
        let inputs =
            PepInputs::new(x, x_hat, vec![DMatrix::identity(n, n)], 1.0).unwrap();
        let h = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let got = pep_conditional(&inputs, &h).unwrap();
        assert!((got - q_exact(3.0)).abs() < 1e-15);
        assert!((got - 1.3499e-3).abs() < 1e-7);

        // Zero gains zero the argument: Q(0) = 1/2, fit gives 1/3.
        let h0 = DVector::from_element(1, Complex64::new(0.0, 0.0));
        assert_eq!(pep_conditional(&inputs, &h0).unwrap(), 0.5);
        assert!((pep_conditional_approx(&inputs, &h0).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        // Identical frames are rejected at construction.
        let x = random_frame(n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(31));
        assert!(PepInputs::new(
            x.clone(),
            x.clone(),
            vec![DMatrix::identity(n, n)],
            1.0
        )
        .is_err());
        let y = random_frame(n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(32));
        assert!(PepInputs::new(x.clone(), y.clone(), vec![DMatrix::identity(n, n)], 0.0).is_err());
        let inputs = PepInputs::new(x, y, vec![DMatrix::identity(n, n)], 1.0).unwrap();
        assert!(pep_conditional(&inputs, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn quadratic_form_equals_eigen_expansion() {
        // h^H Gamma h == sum_q zeta_q |hhat_q|^2 with hhat = U^H h.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..1000 {
            let per_path = unit_paths(8, 3, &mut rng);
            let mut d = random_frame(8, &mut rng);
            let norm = d.values.norm();
            d.values /= Complex64::new(norm, 0.0);
            let ups = upsilon_matrix(&d, &per_path).unwrap();
            let gamma = ups.adjoint() * &ups;

            let mut h = random_gains(3, &mut rng);
            let hn = h.norm();
            h /= Complex64::new(hn, 0.0);

            let theta_direct = (&ups * &h).norm_squared();
            let quad = (h.adjoint() * &gamma * &h)[(0, 0)].re;
            assert!((theta_direct - quad).abs() < 1e-10);

            let eig = SymmetricEigen::new(gamma.clone());
            let projected = eig.eigenvectors.adjoint() * &h;
            let expanded: f64 = eig
                .eigenvalues
                .iter()
                .zip(projected.iter())
                .map(|(z, c)| z * c.norm_sqr())
                .sum();
            assert!((theta_direct - expanded).abs() < 1e-10);

            // Gamma is PSD within round-off.
            let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10 * max);
        }
    }

    #[test]
    fn unconditional_pep_closed_forms() {
        // Single path, identity, unit-norm difference: one eigenvalue
        // zeta = 1 = L, so at N0 = 1 the PEP is 1/15 + 3/16.
        let n = 4;
        let x = DaftFrame::new(DVector::from_fn(n, |i, _| {
            if i == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        }));
        let x_hat = DaftFrame::new(DVector::zeros(n));
        let inputs =
            PepInputs::new(x.clone(), x_hat.clone(), vec![DMatrix::identity(n, n)], 1.0).unwrap();
        let res = pep_unconditional(&inputs).unwrap();
        assert_eq!(res.rank, 1);
        assert!((res.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((res.pep - (1.0 / 15.0 + 3.0 / 16.0)).abs() < 1e-12);

        // Vanishing SNR: both products tend to 1, PEP to 1/3.
        let inputs = PepInputs::new(x, x_hat, vec![DMatrix::identity(n, n)], 1e6).unwrap();
        let res = pep_unconditional(&inputs).unwrap();
        assert!((res.pep - 1.0 / 3.0).abs() < 1e-5);
        assert!(res.pep <= 1.0 / 3.0);
    }

    #[test]
    fn unconditional_pep_invariants_and_symmetry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(34);
        for _ in 0..50 {
            let per_path = unit_paths(8, 3, &mut rng);
            let x = random_frame(8, &mut rng);
            let y = random_frame(8, &mut rng);
            let fwd =
                pep_unconditional(&PepInputs::new(x.clone(), y.clone(), per_path.clone(), 0.1).unwrap())
                    .unwrap();
            let rev =
                pep_unconditional(&PepInputs::new(y, x, per_path, 0.1).unwrap()).unwrap();
            assert_eq!(fwd.pep, rev.pep);
            assert_eq!(fwd.eigenvalues, rev.eigenvalues);
            assert!(fwd.rank <= 3);
            assert!(fwd.eigenvalues.iter().all(|&z| z > 0.0));
            assert!(fwd.pep > 0.0 && fwd.pep <= 1.0 / 3.0);
        }
    }

    #[test]
    fn unconditional_pep_matches_gain_average() {
        // Monte Carlo average of the fitted conditional PEP over Rayleigh
        // gains reproduces the closed form.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(35);
        let per_path = unit_paths(4, 2, &mut rng);
        let x = random_frame(4, &mut rng);
        let y = random_frame(4, &mut rng);
        let inputs = PepInputs::new(x, y, per_path, 0.25).unwrap();
        let closed = pep_unconditional(&inputs).unwrap().pep;
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h = random_gains(2, &mut rng);
            acc += pep_conditional_approx(&inputs, &h).unwrap();
        }
        let mc = acc / draws as f64;
        assert!(
            (mc - closed).abs() / closed < 0.05,
            "closed {closed}, monte carlo {mc}"
        );
    }

    #[test]
    fn high_snr_form_is_the_small_noise_limit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(36);
        let per_path = unit_paths(8, 3, &mut rng);
        let x = random_frame(8, &mut rng);
        let y = random_frame(8, &mut rng);

        let tiny = PepInputs::new(x.clone(), y.clone(), per_path.clone(), 1e-6).unwrap();
        let ratio = pep_high_snr(&tiny).unwrap() / pep_unconditional(&tiny).unwrap().pep;
        assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");

        // R = 1, zeta = L = 1, N0 = 1e-3.
        let e0 = DaftFrame::new(DVector::from_fn(4, |i, _| {
            if i == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        }));
        let zero = DaftFrame::new(DVector::zeros(4));
        let inputs = PepInputs::new(e0, zero, vec![DMatrix::identity(4, 4)], 1e-3).unwrap();
        let want = 1e-3 * (4.0 / 12.0 + 3.0 / 4.0);
        assert!((pep_high_snr(&inputs).unwrap() - want).abs() < 1e-15);

        // Doubling every eigenvalue halves the bound once per rank.
        let base = PepInputs::new(x.clone(), y.clone(), per_path.clone(), 1e-3).unwrap();
        let rank = pep_unconditional(&base).unwrap().rank;
        let stretched = DaftFrame::new(
            &x.values + (&y.values - &x.values) * Complex64::new(2f64.sqrt(), 0.0),
        );
        let scaled = PepInputs::new(x, stretched, per_path, 1e-3).unwrap();
        let ratio = pep_high_snr(&scaled).unwrap() / pep_high_snr(&base).unwrap();
        assert!((ratio - 0.5f64.powi(rank as i32)).abs() < 1e-9);
    }

    fn toy_cfg() -> GcimConfig {
        // One subblock of two chips, BPSK: two bits per frame.
        GcimConfig::new(Scheme::Gcim, 2, 2, 2, ConstellationKind::Psk, 0).unwrap()
    }

    #[test]
    fn union_bound_matches_explicit_double_sum() {
        let cfg = toy_cfg();
        let per_path = vec![DMatrix::<Complex64>::identity(2, 2)];
        let n0 = 0.5;
        let got = abep_upper_bound(&cfg, &per_path, n0).unwrap();

        let cb = Codebook::walsh(2).unwrap();
        let cst = Constellation::new(2, ConstellationKind::Psk).unwrap();
        let mut total = 0.0;
        for p in 0..4usize {
            for q in 0..4usize {
                if p == q {
                    continue;
                }
                let to_bits = |v: usize| vec![(v >> 1) & 1 == 1, v & 1 == 1];
                let x = map_bits(&to_bits(p), &cfg, &cb, &cst).unwrap();
                let y = map_bits(&to_bits(q), &cfg, &cb, &cst).unwrap();
                let pep =
                    pep_unconditional(&PepInputs::new(x, y, per_path.clone(), n0).unwrap())
                        .unwrap()
                        .pep;
                total += pep * (p ^ q).count_ones() as f64;
            }
        }
        let want = total / (2.0 * 4.0);
        assert!((got - want).abs() < 1e-14 * (1.0 + want), "got {got}, want {want}");
    }

    #[test]
    fn union_bound_decreases_with_snr() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let cfg = GcimConfig::new(Scheme::Gcim, 4, 2, 4, ConstellationKind::Psk, 0).unwrap();
        let per_path = unit_paths(4, 2, &mut rng);
        let mut prev = f64::INFINITY;
        for snr_db in (0..=30).step_by(3) {
            let n0 = 10f64.powf(-(snr_db as f64) / 10.0);
            let bound = abep_upper_bound(&cfg, &per_path, n0).unwrap();
            assert!(bound < prev, "snr {snr_db}: {bound} !< {prev}");
            prev = bound;
        }
    }

    #[test]
    fn union_bound_guard_and_validation() {
        // 16 bits per frame is past the enumeration budget.
        let cfg = GcimConfig::new(Scheme::Gcim, 16, 4, 16, ConstellationKind::Psk, 0).unwrap();
        assert_eq!(cfg.bits_per_frame(), 24);
        let per_path = vec![DMatrix::<Complex64>::identity(16, 16)];
        assert!(matches!(
            abep_upper_bound(&cfg, &per_path, 0.1).unwrap_err(),
            Error::TooLarge(_)
        ));
        let cfg = toy_cfg();
        let per_path = vec![DMatrix::<Complex64>::identity(2, 2)];
        assert!(abep_upper_bound(&cfg, &per_path, 0.0).is_err());
        assert!(abep_upper_bound(&cfg, &[], 0.1).is_err());
    }

    #[test]
    fn averaged_bound_orders_path_counts() {
        // More paths, more diversity: at high SNR the averaged bound
        // drops as L grows.
        let cfg = GcimConfig::new(Scheme::Gcim, 4, 2, 4, ConstellationKind::Psk, 0).unwrap();
        let params = DaftParams::with_defaults(4, 1).unwrap();
        let daft = DaftMatrix::new(&params);
        let snr = [20.0, 30.0];
        let mut at20 = Vec::new();
        let mut at30 = Vec::new();
        for l in [2usize, 3, 4] {
            let ch = ChannelConfig::new(l, 2, 1, true).unwrap();
            let curve = abep_bound_curve(&cfg, &daft, &ch, 3, &snr, 50, 99).unwrap();
            at20.push(curve[0]);
            at30.push(curve[1]);
        }
        assert!(at20[0] > at20[1] && at20[1] > at20[2], "{at20:?}");
        assert!(at30[0] > at30[1] && at30[1] > at30[2], "{at30:?}");
    }
}
