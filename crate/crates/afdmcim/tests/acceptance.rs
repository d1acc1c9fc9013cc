//! Acceptance gates for the whole library: nine end-to-end criteria
//! covering transform correctness, pipeline equivalence, the quadratic
//! form behind the analytical bound, bound-vs-simulation agreement,
//! scheme ordering at matched rate, detector ordering, imperfect-CSI
//! trends, Monte Carlo calibration against a closed form, and
//! bit-reproducibility. Each test prints one PASS/FAIL line with the
//! measured numbers and asserts its runtime budget.
//!
//! The tests serialize on a shared gate so the per-criterion wall-clock
//! budgets are meaningful while the trial loops inside still use every
//! core.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use afdmcim::{
    add_cpp, apply_channel_time, build_effective_matrix, daft, effective_matrix, idaft, q_exact,
    remove_cpp, run_ber_sweep, sample_channel, upsilon_matrix, BerPoint, ChannelConfig,
    ConstellationKind, DaftFrame, DaftMatrix, DaftParams, DetectorKind, GcimConfig, Scheme,
    SimConfig,
};

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    // A failed criterion must not wedge the rest of the suite.
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn random_frame(n: usize, rng: &mut ChaCha8Rng) -> DaftFrame {
    DaftFrame::new(DVector::from_fn(n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    }))
}

/// dB position where a log-interpolated curve crosses `level`.
fn crossing_db(points: &[BerPoint], level: f64) -> Option<f64> {
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.ber > level && b.ber <= level && b.ber > 0.0 {
            let (y0, y1) = (a.ber.log10(), b.ber.log10());
            return Some(a.snr_db + (b.snr_db - a.snr_db) * (level.log10() - y0) / (y1 - y0));
        }
    }
    None
}

fn ci_below(a: &BerPoint, b: &BerPoint) -> bool {
    a.ber + a.ci_half_width < b.ber - b.ci_half_width
}

fn report(criterion: &str, clauses: &[(bool, String)], elapsed: Duration, budget: Duration) {
    let mut all = clauses.to_vec();
    all.push((
        elapsed < budget,
        format!("runtime {:.1}s within {:.0}s budget", elapsed.as_secs_f64(), budget.as_secs_f64()),
    ));
    let verdict = if all.iter().all(|c| c.0) { "PASS" } else { "FAIL" };
    let detail: Vec<&str> = all.iter().map(|c| c.1.as_str()).collect();
    println!("{criterion}: {verdict} — {}", detail.join("; "));
    for (ok, msg) in &all {
        assert!(*ok, "{criterion}: {msg}");
    }
}

#[test]
fn criterion_1_transform_unitarity_and_roundtrip() {
    let _g = gate();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_unitary = 0.0f64;
    let mut worst_roundtrip = 0.0f64;
    for &n in &[2usize, 4, 8, 16, 64] {
        let eye = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..100 {
            let params = DaftParams::new(n, rng.gen::<f64>(), rng.gen::<f64>()).unwrap();
            let m = DaftMatrix::new(&params);
            worst_unitary = worst_unitary.max((m.matrix() * m.adjoint() - &eye).norm());
            let x = random_frame(n, &mut rng);
            let back = daft(&idaft(&x, &params).unwrap(), &params).unwrap();
            worst_roundtrip = worst_roundtrip.max((&back.values - &x.values).norm());
            let via_matrix = m.forward(&m.inverse(&x).unwrap()).unwrap();
            worst_roundtrip = worst_roundtrip.max((&via_matrix.values - &x.values).norm());
        }
    }
    let clauses = vec![
        (worst_unitary <= 1e-10, format!("max |AA^H - I| = {worst_unitary:.2e} <= 1e-10")),
        (worst_roundtrip <= 1e-10, format!("max roundtrip dev = {worst_roundtrip:.2e} <= 1e-10")),
    ];
    report(
        "criterion 1 (transform correctness, 5 sizes x 100 draws)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_2_time_and_matrix_channel_routes_agree() {
    let _g = gate();
    let t0 = Instant::now();
    let n = 8;
    let cpp = 3;
    let params = DaftParams::with_defaults(n, 1).unwrap();
    let transform = DaftMatrix::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let paths = 1 + (k % 4);
        let cfg = ChannelConfig::new(paths, 2, 1, true).unwrap();
        let ch = sample_channel(&cfg, n, cpp, &mut rng).unwrap();
        let x = random_frame(n, &mut rng);
        let tx = add_cpp(&transform.inverse(&x).unwrap(), cpp, &params).unwrap();
        let rx = apply_channel_time(&tx, &ch, 0.0, &mut rng).unwrap();
        let y = transform.forward(&remove_cpp(&rx, cpp).unwrap()).unwrap();
        let h_eff = effective_matrix(&ch, &transform).unwrap();
        worst = worst.max((&y.values - &h_eff * &x.values).norm());
    }
    let clauses = vec![(
        worst <= 1e-10,
        format!("max |time route - matrix route| = {worst:.2e} <= 1e-10 over 100 channels"),
    )];
    report(
        "criterion 2 (pipeline equivalence, noiseless)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_3_quadratic_form_matches_eigen_expansion() {
    let _g = gate();
    let t0 = Instant::now();
    let n = 8;
    let params = DaftParams::with_defaults(n, 1).unwrap();
    let transform = DaftMatrix::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let paths = 1 + (k % 4);
        let cfg = ChannelConfig::new(paths, 2, 1, true).unwrap();
        let ch = sample_channel(&cfg, n, 3, &mut rng).unwrap();
        let eff = build_effective_matrix(&ch, &transform).unwrap();
        let mut delta = random_frame(n, &mut rng);
        let scale = delta.values.norm();
        delta.values /= Complex64::new(scale, 0.0);
        let upsilon = upsilon_matrix(&delta, &eff.per_path).unwrap();
        let gains = DVector::from_iterator(paths, ch.paths.iter().map(|p| p.gain));

        // Three routes to the same number: the received-difference
        // energy, the quadratic form, and the eigenvalue expansion.
        let direct = (&upsilon * &gains).norm_squared();
        let gamma = upsilon.adjoint() * &upsilon;
        let quad = (gains.adjoint() * &gamma * &gains)[(0, 0)].re;
        let eig = nalgebra::SymmetricEigen::new(gamma);
        let h_hat = eig.eigenvectors.adjoint() * &gains;
        let expansion: f64 = eig
            .eigenvalues
            .iter()
            .zip(h_hat.iter())
            .map(|(z, h)| z * h.norm_sqr())
            .sum();
        worst = worst.max((direct - quad).abs().max((quad - expansion).abs()));
    }
    let clauses = vec![(
        worst <= 1e-10,
        format!("max |h^H G h - sum z|h_q|^2| = {worst:.2e} <= 1e-10 over 1000 triples"),
    )];
    report(
        "criterion 3 (quadratic-form identity)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_4_bound_tracks_simulation_across_path_counts() {
    let _g = gate();
    let t0 = Instant::now();
    let mapping = GcimConfig::new(Scheme::Gcim, 4, 2, 4, ConstellationKind::Psk, 1).unwrap();
    let grid: Vec<f64> = (0..=7).map(|k| 3.0 * k as f64).collect();

    let mut clauses = Vec::new();
    let mut by_paths = Vec::new();
    for paths in [2usize, 3, 4] {
        let channel = ChannelConfig::new(paths, 2, 1, true).unwrap();
        let mut cfg = SimConfig::new(mapping, channel, grid.clone()).unwrap();
        cfg.master_seed = 7;
        cfg.min_trials = 2000;
        cfg.max_trials = 500_000;
        cfg.target_bit_errors = 300;
        cfg.bound_profiles = 300;
        let bound = cfg.bound_curve().unwrap();
        let points = run_ber_sweep(&cfg).unwrap();

        // Simulation never exceeds the analytical curve beyond CI noise
        // from 15 dB up.
        for (p, b) in points.iter().zip(&bound).filter(|(p, _)| p.snr_db >= 15.0) {
            clauses.push((
                p.ber <= b + p.ci_half_width,
                format!("L={paths} {} dB: sim {:.2e} <= bound {:.2e} + ci", p.snr_db, p.ber, b),
            ));
        }
        // At the first point under 1e-3 the bound is tight (within 5x).
        let first = points.iter().position(|p| p.ber < 1e-3);
        match first {
            Some(i) => {
                let ratio = bound[i] / points[i].ber;
                clauses.push((
                    ratio <= 5.0,
                    format!(
                        "L={paths}: bound/sim = {ratio:.2} <= 5 at {} dB (first point under 1e-3)",
                        points[i].snr_db
                    ),
                ));
            }
            None => clauses.push((false, format!("L={paths}: no grid point under 1e-3"))),
        }
        by_paths.push(points);
    }

    // More paths, more diversity: strict ordering with separated CIs at
    // the top of the shared grid.
    let last = grid.len() - 1;
    let (l2, l3, l4) = (&by_paths[0][last], &by_paths[1][last], &by_paths[2][last]);
    clauses.push((
        ci_below(l4, l3) && ci_below(l3, l2),
        format!(
            "at {} dB: L=4 {:.2e} < L=3 {:.2e} < L=2 {:.2e} with non-overlapping CIs",
            grid[last], l4.ber, l3.ber, l2.ber
        ),
    ));
    report(
        "criterion 4 (analytical bound vs simulation, L in {2,3,4})",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(15 * 60),
    );
}

#[test]
fn criterion_5_scheme_ordering_at_matched_rate() {
    let _g = gate();
    let t0 = Instant::now();
    // 1 bit/s/Hz set: code-index (4,4)/QPSK against sparse index
    // modulation (4,1)/QPSK and all-ones spreading with 16-PSK, all
    // under exhaustive joint search on identical channel/noise draws.
    let channel = ChannelConfig::new(3, 2, 1, true).unwrap();
    let grid: Vec<f64> = (10..=15).map(|k| k as f64).collect();
    let mut sweep = |mapping: GcimConfig| {
        let mut cfg = SimConfig::new(mapping, channel, grid.clone()).unwrap();
        cfg.min_trials = 20_000;
        cfg.max_trials = 2_000_000;
        cfg.target_bit_errors = 1200;
        run_ber_sweep(&cfg).unwrap()
    };
    let gcim = sweep(GcimConfig::new(Scheme::Gcim, 8, 4, 4, ConstellationKind::Psk, 1).unwrap());
    let im = sweep(GcimConfig::new(Scheme::ImAfdm, 8, 4, 4, ConstellationKind::Psk, 1).unwrap());
    let ss = sweep(GcimConfig::new(Scheme::AfdmSs, 8, 4, 16, ConstellationKind::Psk, 1).unwrap());

    let mut clauses = Vec::new();
    let gcim_cross = crossing_db(&gcim, 1e-3);
    clauses.push((
        gcim_cross.is_some(),
        format!(
            "code-index scheme crosses 1e-3 inside the grid at {} dB",
            gcim_cross.map_or("(no crossing)".into(), |c| format!("{c:.2}"))
        ),
    ));
    if let Some(at) = gcim_cross {
        // Evaluate the baselines at the grid point nearest the crossing.
        let i = grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - at).abs().total_cmp(&(b.1 - at).abs()))
            .unwrap()
            .0;
        clauses.push((
            ci_below(&gcim[i], &im[i]),
            format!(
                "index-modulation baseline strictly worse at {} dB with separated CIs (gcim {:.3e}±{:.1e} vs im {:.3e}±{:.1e})",
                grid[i], gcim[i].ber, gcim[i].ci_half_width, im[i].ber, im[i].ci_half_width
            ),
        ));
        clauses.push((
            ci_below(&gcim[i], &ss[i]),
            format!(
                "all-ones spreading baseline strictly worse at {} dB with separated CIs (gcim {:.3e} vs ss {:.3e})",
                grid[i], gcim[i].ber, ss[i].ber
            ),
        ));
        let im_cross = crossing_db(&im, 1e-3);
        let gap = im_cross.map(|c| c - at);
        clauses.push((
            gap.map_or(false, |g| (0.25..=2.5).contains(&g)),
            format!(
                "SNR gap to the index-modulation baseline at 1e-3 is {} dB, required within [0.25, 2.5]",
                gap.map_or("(no crossing)".into(), |g| format!("{g:.2}"))
            ),
        ));
    }
    report(
        "criterion 5 (scheme ordering at 1 bit/s/Hz)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(30 * 60),
    );
}

#[test]
fn criterion_6_joint_search_never_loses_to_two_stage() {
    let _g = gate();
    let t0 = Instant::now();
    let mapping = GcimConfig::new(Scheme::Gcim, 8, 4, 4, ConstellationKind::Psk, 1).unwrap();
    let channel = ChannelConfig::new(3, 2, 1, true).unwrap();
    let grid: Vec<f64> = (0..=5).map(|k| 4.0 * k as f64).collect();

    let mut run = |detector: DetectorKind, grid: Vec<f64>, trials: u64| {
        let mut cfg = SimConfig::new(mapping, channel, grid).unwrap();
        cfg.detector = detector;
        cfg.min_trials = trials;
        cfg.max_trials = trials;
        run_ber_sweep(&cfg).unwrap()
    };
    let ml = run(DetectorKind::Ml, grid.clone(), 30_000);
    let mrc = run(DetectorKind::Mrc, grid.clone(), 30_000);

    let mut clauses = Vec::new();
    for (a, b) in ml.iter().zip(&mrc) {
        clauses.push((
            a.bit_errors <= b.bit_errors,
            format!(
                "{} dB paired errors: joint {} <= two-stage {}",
                a.snr_db, a.bit_errors, b.bit_errors
            ),
        ));
    }
    let ml0 = run(DetectorKind::Ml, vec![200.0], 3000);
    let mrc0 = run(DetectorKind::Mrc, vec![200.0], 3000);
    clauses.push((
        ml0[0].bit_errors == 0 && mrc0[0].bit_errors == 0,
        format!(
            "noiseless: joint {} errors, two-stage {} errors over 3000 trials each",
            ml0[0].bit_errors, mrc0[0].bit_errors
        ),
    ));
    report(
        "criterion 6 (detector ordering, paired seeds)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(10 * 60),
    );
}

#[test]
fn criterion_7_csi_mismatch_trends() {
    let _g = gate();
    let t0 = Instant::now();
    let channel = ChannelConfig::new(3, 2, 1, true).unwrap();
    let mut clauses = Vec::new();

    // Paired trials at 20 dB: degrading only the receiver's channel
    // knowledge never helps, under either detector.
    let mapping = GcimConfig::new(Scheme::Gcim, 8, 4, 4, ConstellationKind::Psk, 1).unwrap();
    for detector in [DetectorKind::Ml, DetectorKind::Mrc] {
        let mut counts = Vec::new();
        for rho in [0.0, 0.1, 0.3] {
            let mut cfg = SimConfig::new(mapping, channel, vec![20.0]).unwrap();
            cfg.detector = detector;
            cfg.csi_rho = rho;
            cfg.min_trials = 30_000;
            cfg.max_trials = 30_000;
            counts.push(run_ber_sweep(&cfg).unwrap()[0].bit_errors);
        }
        clauses.push((
            counts[0] <= counts[1] && counts[1] <= counts[2],
            format!("paired errors non-decreasing in rho under {detector}: {counts:?}"),
        ));
    }

    // At equal rate (0.75 bit/s/Hz) under the two-stage detector, the
    // longer spreading code rides out mismatch better: despreading
    // averages the estimate error over twice the chips.
    let short = GcimConfig::new(Scheme::Gcim, 8, 4, 2, ConstellationKind::Psk, 1).unwrap();
    let long = GcimConfig::new(Scheme::Gcim, 8, 8, 8, ConstellationKind::Psk, 1).unwrap();
    assert_eq!(short.bits_per_frame(), long.bits_per_frame());
    let mut at_rho = |mapping: GcimConfig| {
        let mut cfg = SimConfig::new(mapping, channel, vec![20.0]).unwrap();
        cfg.detector = DetectorKind::Mrc;
        cfg.csi_rho = 0.1;
        cfg.min_trials = 60_000;
        cfg.max_trials = 60_000;
        run_ber_sweep(&cfg).unwrap().remove(0)
    };
    let p4 = at_rho(short);
    let p8 = at_rho(long);
    clauses.push((
        ci_below(&p8, &p4),
        format!(
            "rho=0.1, 20 dB, two-stage: n=8 {:.3e}±{:.1e} below n=4 {:.3e}±{:.1e} with separated CIs",
            p8.ber, p8.ci_half_width, p4.ber, p4.ci_half_width
        ),
    ));
    report(
        "criterion 7 (imperfect-CSI trends)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(15 * 60),
    );
}

#[test]
fn criterion_8_calibration_against_closed_form() {
    let _g = gate();
    let t0 = Instant::now();
    // Binary signalling over the unit channel has an exact per-bit error
    // rate; the harness must land inside its own 95% intervals.
    let text = "\
scheme = afdm
frame_len = 4
mod_order = 2
channel = awgn
snr_db = 0,2,4,6,8
min_trials = 200000
max_trials = 200000
master_seed = 4
";
    let cfg = SimConfig::parse(text).unwrap();
    let points = run_ber_sweep(&cfg).unwrap();
    let mut clauses = Vec::new();
    for p in &points {
        let snr = 10f64.powf(p.snr_db / 10.0);
        let want = q_exact((2.0 * snr).sqrt());
        clauses.push((
            (p.ber - want).abs() <= p.ci_half_width,
            format!("{} dB: |{:.3e} - {:.3e}| <= ci {:.1e}", p.snr_db, p.ber, want, p.ci_half_width),
        ));
    }
    report(
        "criterion 8 (closed-form calibration, 5 points)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_9_sweeps_are_bit_reproducible() {
    let _g = gate();
    let t0 = Instant::now();
    // Trial batches fan out over the rayon pool; integer error counts
    // and fixed batch boundaries make the result independent of
    // scheduling. Checked in-process and through the binary.
    let mapping = GcimConfig::new(Scheme::Gcim, 8, 4, 4, ConstellationKind::Psk, 1).unwrap();
    let channel = ChannelConfig::new(3, 2, 1, true).unwrap();
    let mut cfg = SimConfig::new(mapping, channel, vec![0.0, 6.0, 12.0]).unwrap();
    cfg.min_trials = 20_000;
    cfg.max_trials = 20_000;
    let a = run_ber_sweep(&cfg).unwrap();
    let b = run_ber_sweep(&cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep.cfg");
    std::fs::write(
        &config_path,
        "scheme = gcim\nframe_len = 8\nspread_len = 4\nmod_order = 4\nsnr_db = 0,6,12\nmin_trials = 20000\nmax_trials = 20000\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_afdmcim"))
            .args(["simulate", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }

    let clauses = vec![
        (a == b, "repeated in-process sweeps equal field-for-field".to_string()),
        (outputs[0] == outputs[1], "repeated binary runs byte-identical".to_string()),
        (!outputs[0].is_empty(), format!("CSV output {} bytes", outputs[0].len())),
    ];
    report(
        "criterion 9 (bit reproducibility under parallel execution)",
        &clauses,
        t0.elapsed(),
        Duration::from_secs(10 * 60),
    );
}
