//! Joint ML search vs the two-stage despreading detector.
//!
//! Runs both detectors on the same frames, channels, and noise, then
//! reports error counts and the work each one did. The two-stage
//! detector despreads once per code (stage 1), pins the code choice, and
//! only searches symbols (stage 2); ML searches codes and symbols
//! jointly.

use afdmcim::{run_trial, ChannelConfig, ConstellationKind, DetectorKind, GcimConfig, Scheme, SimConfig};

fn main() {
    let mapping = GcimConfig::new(Scheme::Gcim, 8, 4, 4, ConstellationKind::Psk, 1).unwrap();
    let channel = ChannelConfig::new(3, 2, 1, true).unwrap();
    let snr_db = 16.0;
    let trials = 4000;

    let mut cfg = SimConfig::new(mapping, channel, vec![snr_db]).unwrap();

    // The search-space arithmetic, before running anything: per subblock
    // ML scores n * M chip patterns jointly across G subblocks, while
    // stage 1 of the two-stage detector needs only n correlations per
    // subblock.
    let g = mapping.groups;
    let per_subblock = 1usize << mapping.subblock_bits();
    println!(
        "N = {}, n = {}, M = {}: ML search {} ^ {} = {} frame hypotheses; stage 1 despreading {} correlations",
        mapping.frame_len,
        mapping.spread_len,
        mapping.mod_order,
        per_subblock,
        g,
        per_subblock.pow(g as u32),
        g * mapping.spread_len,
    );

    let mut errors = [0usize; 2];
    let mut frame_errors = [0usize; 2];
    for (slot, detector) in [DetectorKind::Ml, DetectorKind::Mrc].into_iter().enumerate() {
        cfg.detector = detector;
        for t in 0..trials {
            // Identical seeds per trial: both detectors face the same air.
            let out = run_trial(&cfg, snr_db, t).unwrap();
            errors[slot] += out.bit_errors;
            frame_errors[slot] += (out.bit_errors > 0) as usize;
        }
    }

    let bits = (trials as usize) * mapping.bits_per_frame();
    println!("\n{trials} paired trials at {snr_db} dB ({bits} bits each detector):");
    for (slot, name) in ["joint ML", "two-stage"].into_iter().enumerate() {
        println!(
            "  {name:<9}: {:>4} bit errors (BER {:.2e}), {:>4} frames hit",
            errors[slot],
            errors[slot] as f64 / bits as f64,
            frame_errors[slot],
        );
    }
    assert!(errors[0] <= errors[1], "ML is optimal on paired draws");
    println!("\nML never loses on paired draws; the two-stage detector trades a small gap for linear stage-1 work.");
}
