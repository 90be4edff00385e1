//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured quantity. Run with `cargo test --test acceptance --
//! --nocapture` to see every line.

mod support;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cuffless::estimation::{
    calibrate, map_pp_from_reading, reading_from_map_pp, BPReading, BasalBP, BaselineHyper,
    BaselineKind,
};
use cuffless::evaluation::{
    compute_metrics, default_alpha_grid, make_folds, run_experiment, sweep_alpha, EstimatorSpec,
    ExperimentConfig, FoldPlan,
};
use cuffless::features::{FeatureVector, GroupingConfig, GroupingPreset, FEATURE_COUNT};
use cuffless::ingest::{
    synthesize_record, Gender, SyntheticConfig, UserProfile, VisitDay,
};
use cuffless::pipeline::{extract_batch, ExtractOptions, RecordOutcome};
use cuffless::prompting::{build_prompt, build_tuning_record, ContextLevel, TuningRecord};
use cuffless::waveform::{
    butterworth_lowpass_sos, detect_beat_fiducials, detect_r_peaks, lowpass_filter,
    FilteredBundle, ECG_CUTOFF_HZ, FILTER_ORDER, PPG_CUTOFF_HZ,
};
use support::{mock_config, MockBehavior, MockEndpoint};

// -------------------------------------------------------------------------
// 1. Conversion identity
// -------------------------------------------------------------------------

#[test]
fn acceptance_01_conversion_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let readings: Vec<BPReading> = (0..10_000)
        .map(|_| {
            let dbp = rng.random_range(40.0..120.0);
            let sbp = dbp + rng.random_range(5.0..90.0);
            BPReading::new(sbp, dbp).unwrap()
        })
        .collect();
    let start = Instant::now();
    let mut max_err: f64 = 0.0;
    for r in &readings {
        let (map, pp) = map_pp_from_reading(r);
        let back = reading_from_map_pp(map, pp).unwrap();
        max_err = max_err
            .max((back.sbp_mmhg - r.sbp_mmhg).abs())
            .max((back.dbp_mmhg - r.dbp_mmhg).abs());
    }
    let elapsed = start.elapsed();
    assert!(max_err < 1e-9, "max round-trip error {max_err:e}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "[acceptance 01] conversion round trip over 10,000 readings: PASS (max err {max_err:.2e}, {:.0} ms)",
        elapsed.as_secs_f64() * 1e3
    );
}

// -------------------------------------------------------------------------
// 2. Calibration endpoints
// -------------------------------------------------------------------------

#[test]
fn acceptance_02_calibration_endpoints() {
    let free = BPReading::new(120.0, 80.0).unwrap();
    let base = BasalBP {
        base_sbp_mmhg: 110.0,
        base_dbp_mmhg: 70.0,
        n_day_d: 1,
    };
    let c0 = calibrate(&free, &base, 0.0).unwrap();
    assert_eq!((c0.sbp_mmhg, c0.dbp_mmhg), (110.0, 70.0));
    let c1 = calibrate(&free, &base, 1.0).unwrap();
    assert_eq!((c1.sbp_mmhg, c1.dbp_mmhg), (120.0, 80.0));
    let c3 = calibrate(&free, &base, 0.3).unwrap();
    assert_eq!((c3.sbp_mmhg, c3.dbp_mmhg), (113.0, 73.0));
    println!("[acceptance 02] calibration endpoints and 0.3 blend: PASS (113.0/73.0 exact)");
}

// -------------------------------------------------------------------------
// 3. Metric oracle
// -------------------------------------------------------------------------

/// Kahan-compensated reference implementation, written independently of
/// `compute_metrics`.
fn brute_force_metrics(refs: &[f64], ests: &[f64]) -> (f64, f64, f64) {
    fn kahan(values: impl Iterator<Item = f64>) -> f64 {
        let mut sum = 0.0;
        let mut c = 0.0;
        for v in values {
            let y = v - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }
    let n = refs.len() as f64;
    let me = kahan(refs.iter().zip(ests).map(|(r, e)| r - e)) / n;
    let mae = kahan(refs.iter().zip(ests).map(|(r, e)| (r - e).abs())) / n;
    let sde = (kahan(refs.iter().zip(ests).map(|(r, e)| {
        let d = r - e - me;
        d * d
    })) / (n - 1.0))
        .sqrt();
    (mae, me, sde)
}

#[test]
fn acceptance_03_metric_oracle() {
    let m = compute_metrics(&[120.0, 110.0], &[118.0, 114.0]).unwrap();
    assert!((m.mae_mmhg - 3.0).abs() < 1e-12);
    assert!((m.me_mmhg - -1.0).abs() < 1e-12);
    assert!((m.sde_mmhg - 18f64.sqrt()).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=50);
        let refs: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..220.0)).collect();
        let ests: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..220.0)).collect();
        let ours = compute_metrics(&refs, &ests).unwrap();
        let (mae, me, sde) = brute_force_metrics(&refs, &ests);
        worst = worst
            .max((ours.mae_mmhg - mae).abs())
            .max((ours.me_mmhg - me).abs())
            .max((ours.sde_mmhg - sde).abs());
    }
    assert!(worst < 1e-9, "worst deviation {worst:e}");
    println!(
        "[acceptance 03] metrics vs brute force on 1,000 cases: PASS (worst dev {worst:.2e}; worked example 3 / -1 / sqrt18)"
    );
}

// -------------------------------------------------------------------------
// 4. Golden prompt
// -------------------------------------------------------------------------

fn reference_feature_vector() -> FeatureVector {
    let mut values = [0.0; FEATURE_COUNT];
    for (slot, v) in [0.18, 0.24, 0.33].into_iter().enumerate() {
        values[slot] = v;
    }
    let co = [0.16, 0.51, 0.18, 0.29, 0.66, 0.1, 0.18, 0.07, 0.08];
    for (slot, v) in [3, 4, 5, 15, 16, 17, 27, 28, 29].into_iter().zip(co) {
        values[slot] = v;
    }
    let pr = [
        2.64, 16.83, 231.92, 2.64, 5.2, 705.58, 0.89, 0.54, 0.04, 0.39, 1.77, 0.04, 0.23, 2.58,
        0.01, 0.03, 0.08, 0.01, 0.05,
    ];
    let pr_slots = [6, 7, 8, 9, 10, 11, 12, 13, 14, 18, 19, 20, 21, 22, 23, 24, 25, 26, 30];
    for (slot, v) in pr_slots.into_iter().zip(pr) {
        values[slot] = v;
    }
    FeatureVector {
        values,
        beat_count: 64,
        user: Some(UserProfile {
            age_years: 56.0,
            gender: Gender::Female,
            height_cm: 155.0,
            weight_kg: 54.0,
            hypertension_history: false,
        }),
        subject_id: "S-ref".to_owned(),
        visit_day: VisitDay::D,
        ref_sbp_mmhg: 110.0,
        ref_dbp_mmhg: 74.0,
    }
}

#[test]
fn acceptance_04_golden_prompt_bytes() {
    let fv = reference_feature_vector();
    let grouping = GroupingConfig::preset(GroupingPreset::AppendixB);
    let prompt = build_prompt(&fv, ContextLevel::BpKnowledgeUser, &grouping).unwrap();
    assert_eq!(prompt.input, include_str!("golden/table6_input.txt"));
    let tuned = build_tuning_record(&prompt, 110.0, 74.0).unwrap();
    assert_eq!(
        tuned.response.as_deref(),
        Some("Predicted_MAP: 86.0 mmHg, Predicted_PP: 36.0 mmHg.")
    );
    println!("[acceptance 04] golden prompt and response bytes: PASS (input + response byte-equal)");
}

// -------------------------------------------------------------------------
// 5. Fiducial accuracy
// -------------------------------------------------------------------------

fn fiducial_cohort(noise_std: f64) -> (usize, usize, usize) {
    // (ground-truth beats, detected beats, worst landmark error)
    let mut truth_total = 0usize;
    let mut detected_total = 0usize;
    let mut worst: usize = 0;
    for i in 0..100usize {
        let hr = 60.0 + 60.0 * (i as f64 / 99.0);
        let cfg = SyntheticConfig {
            heart_rate_bpm: hr,
            duration_s: 12.0,
            sampling_rate_hz: 1000.0,
            ptt_ms: 120.0 + (i % 7) as f64 * 15.0,
            noise_std,
            seed: 1000 + i as u64,
        };
        let (record, truth) = synthesize_record(&cfg).unwrap();
        truth_total += truth.beats.len();
        let bundle = FilteredBundle::from_record(&record, ECG_CUTOFF_HZ, PPG_CUTOFF_HZ).unwrap();
        let Ok(peaks) = detect_r_peaks(&bundle.ecg_f, record.sampling_rate_hz) else {
            continue;
        };
        let Ok(det) = detect_beat_fiducials(&bundle, &peaks) else {
            continue;
        };
        detected_total += det.beats.len();
        if noise_std == 0.0 {
            for got in &det.beats {
                let Some(want) = truth.beats.iter().find(|b| got.r.abs_diff(b.r) <= 50) else {
                    panic!("detected beat with no ground-truth partner at r={}", got.r);
                };
                for (g, w) in [
                    (got.r, want.r),
                    (got.ppg_s, want.ppg_s),
                    (got.ppg_m, want.ppg_m),
                    (got.ppg_p, want.ppg_p),
                    (got.ppg_n, want.ppg_n),
                    (got.ppg_v, want.ppg_v),
                    (got.vppg_s, want.vppg_s),
                    (got.vppg_p, want.vppg_p),
                    (got.vppg_v, want.vppg_v),
                    (got.appg_s, want.appg_s),
                    (got.appg_p, want.appg_p),
                    (got.appg_v, want.appg_v),
                ] {
                    worst = worst.max(g.abs_diff(w));
                }
            }
        }
    }
    (truth_total, detected_total, worst)
}

#[test]
fn acceptance_05_fiducial_accuracy() {
    let start = Instant::now();
    let (truth, detected, worst) = fiducial_cohort(0.0);
    let elapsed = start.elapsed();
    let rate = detected as f64 / truth as f64;
    assert!(rate >= 0.99, "clean detection rate {rate:.4}");
    assert!(worst <= 10, "worst landmark error {worst} samples");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");

    // 2% of the 0.9 pulse amplitude.
    let (truth_n, detected_n, _) = fiducial_cohort(0.018);
    let rate_noise = detected_n as f64 / truth_n as f64;
    assert!(rate_noise >= 0.95, "noisy retention rate {rate_noise:.4}");
    println!(
        "[acceptance 05] fiducials on 100 records: PASS (clean rate {:.1}%, worst landmark {worst} samples, noisy retention {:.1}%, {:.1} s)",
        rate * 100.0,
        rate_noise * 100.0,
        elapsed.as_secs_f64()
    );
}

// -------------------------------------------------------------------------
// 6. Filter contract
// -------------------------------------------------------------------------

fn sos_magnitude(sections: &[cuffless::waveform::Biquad], freq_hz: f64, fs: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / fs;
    let (c1, s1) = (w.cos(), -w.sin());
    let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
    sections
        .iter()
        .map(|s| {
            let num_re = s.b0 + s.b1 * c1 + s.b2 * c2;
            let num_im = s.b1 * s1 + s.b2 * s2;
            let den_re = 1.0 + s.a1 * c1 + s.a2 * c2;
            let den_im = s.a1 * s1 + s.a2 * s2;
            ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).sqrt()
        })
        .product()
}

#[test]
fn acceptance_06_filter_contract() {
    let fs = 1000.0;
    let mut report = Vec::new();
    for cutoff in [PPG_CUTOFF_HZ, ECG_CUTOFF_HZ] {
        // Unity DC gain.
        let dc = lowpass_filter(&vec![1.0; 4000], fs, cutoff).unwrap();
        let worst_dc = dc.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst_dc < 1e-6, "DC error {worst_dc:e} at cutoff {cutoff}");

        // Attenuation at twice the cutoff, measured and designed.
        let n = 8000;
        let tone: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 2.0 * cutoff * i as f64 / fs).sin())
            .collect();
        let out = lowpass_filter(&tone, fs, cutoff).unwrap();
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let measured_db = -20.0 * (rms(&out[1000..7000]) / rms(&tone[1000..7000])).log10();
        let designed = sos_magnitude(
            &butterworth_lowpass_sos(FILTER_ORDER, cutoff, fs),
            2.0 * cutoff,
            fs,
        )
        .powi(2);
        let designed_db = -20.0 * designed.log10();
        assert!(measured_db >= 20.0, "attenuation {measured_db:.1} dB");
        assert!(
            (measured_db - designed_db).abs() < 1.0,
            "measured {measured_db:.1} vs designed {designed_db:.1}"
        );

        // Zero group delay on a band-limited tone pair.
        let probe: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * std::f64::consts::PI * cutoff / 8.0 * t).sin()
                    + 0.4 * (2.0 * std::f64::consts::PI * cutoff / 3.0 * t).cos()
            })
            .collect();
        let filtered = lowpass_filter(&probe, fs, cutoff).unwrap();
        let mut best = (0i64, f64::MIN);
        for lag in -40i64..=40 {
            let mut acc = 0.0;
            for i in 0..n {
                let j = i as i64 + lag;
                if j >= 0 && (j as usize) < n {
                    acc += probe[i] * filtered[j as usize];
                }
            }
            if acc > best.1 {
                best = (lag, acc);
            }
        }
        assert_eq!(best.0, 0, "group delay {} samples at cutoff {cutoff}", best.0);
        report.push(format!("{cutoff} Hz: dc {worst_dc:.1e}, {measured_db:.1} dB, lag 0"));
    }
    println!("[acceptance 06] filter contract: PASS ({})", report.join("; "));
}

// -------------------------------------------------------------------------
// 7. End-to-end oracle run
// -------------------------------------------------------------------------

/// High-precision oracle response for a record's reference reading.
fn oracle_response(sbp: f64, dbp: f64) -> String {
    let (map, pp) = map_pp_from_reading(&BPReading::new(sbp, dbp).unwrap());
    format!("Predicted_MAP: {map:.10} mmHg, Predicted_PP: {pp:.10} mmHg.")
}

#[test]
fn acceptance_07_end_to_end_oracle_run() {
    let start = Instant::now();
    let subjects = 100usize;
    let level = ContextLevel::BpKnowledgeUser;
    let grouping_preset = GroupingPreset::Table1;
    let grouping = GroupingConfig::preset(grouping_preset);

    // Generate and extract in chunks so raw signals never accumulate.
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let mut features: Vec<FeatureVector> = Vec::new();
    let mut configs: Vec<(String, VisitDay, SyntheticConfig, UserProfile)> = Vec::new();
    for s in 0..subjects {
        let subject_id = format!("S{s:04}");
        let hr: f64 = rng.random_range(55.0..90.0);
        let base_ptt: f64 = rng.random_range(0.15..0.26);
        let profile = UserProfile {
            age_years: rng.random_range(25..=78) as f64,
            gender: if rng.random_bool(0.5) {
                Gender::Female
            } else {
                Gender::Male
            },
            height_cm: (rng.random_range(150.0..190.0_f64) * 10.0).round() / 10.0,
            weight_kg: (rng.random_range(48.0..95.0_f64) * 10.0).round() / 10.0,
            hypertension_history: rng.random_bool(0.25),
        };
        for visit in VisitDay::ALL {
            let ptt = (base_ptt + rng.random_range(-0.02..0.02)).clamp(0.12, 0.30);
            configs.push((
                subject_id.clone(),
                visit,
                SyntheticConfig {
                    heart_rate_bpm: hr,
                    duration_s: 120.0,
                    sampling_rate_hz: 1000.0,
                    ptt_ms: ptt * 1000.0,
                    noise_std: 0.005,
                    seed: rng.random(),
                },
                profile.clone(),
            ));
        }
    }

    let opts = ExtractOptions::default();
    for chunk in configs.chunks(32) {
        let records: Vec<_> = chunk
            .iter()
            .map(|(subject, visit, cfg, _)| {
                let (mut record, _) = synthesize_record(cfg).unwrap();
                record.subject_id = subject.clone();
                record.visit_day = *visit;
                record
            })
            .collect();
        let profiles: BTreeMap<String, UserProfile> = chunk
            .iter()
            .map(|(subject, _, _, profile)| (subject.clone(), profile.clone()))
            .collect();
        let summary = extract_batch(&records, &profiles, &opts);
        assert!(
            summary.failed.is_empty(),
            "extraction failures: {:?}",
            summary.failed
        );
        features.extend(summary.features);
    }
    let extraction_done = Instant::now();
    assert!(
        features.len() >= subjects * 4 * 99 / 100,
        "only {} of {} records extracted",
        features.len(),
        subjects * 4
    );

    // Mock endpoint replies with each record's reference MAP/PP, keyed by
    // the rendered prompt input.
    let mut replies: HashMap<String, String> = HashMap::new();
    for fv in &features {
        let prompt = build_prompt(fv, level, &grouping).unwrap();
        let clash = replies.insert(
            prompt.input,
            oracle_response(fv.ref_sbp_mmhg, fv.ref_dbp_mmhg),
        );
        assert!(clash.is_none(), "prompt collision for {}", fv.subject_id);
    }
    let server = MockEndpoint::start(MockBehavior::MapByInput(Arc::new(replies)));
    let mut endpoint_cfg = mock_config(&server.base_url);
    endpoint_cfg.max_concurrency = 8;

    let keys: Vec<String> = features.iter().map(|f| f.subject_id.clone()).collect();
    let plan = make_folds(&keys, 5, 77).unwrap();
    let cfg = ExperimentConfig {
        context_level: level,
        grouping: grouping_preset,
        alpha: 1.0,
        seed: 77,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(
        &features,
        &EstimatorSpec::Endpoint { cfg: endpoint_cfg },
        &cfg,
        &plan,
    )
    .unwrap();
    let elapsed = start.elapsed();

    assert!(report.faults.is_empty(), "faults: {:?}", &report.faults[..report.faults.len().min(3)]);
    assert_eq!(report.n_evaluated, features.len());
    assert!(
        report.pooled_sbp.mae_mmhg < 1e-6,
        "SBP MAE {}",
        report.pooled_sbp.mae_mmhg
    );
    assert!(
        report.pooled_dbp.mae_mmhg < 1e-6,
        "DBP MAE {}",
        report.pooled_dbp.mae_mmhg
    );
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "[acceptance 07] end-to-end oracle run ({} records, 2 min @ 1 kHz): PASS (pooled MAE {:.2}/{:.2}, extract {:.1} s, total {:.1} s)",
        features.len(),
        report.pooled_sbp.mae_mmhg,
        report.pooled_dbp.mae_mmhg,
        (extraction_done - start).as_secs_f64(),
        elapsed.as_secs_f64()
    );
}

// -------------------------------------------------------------------------
// 8. Noise oracle
// -------------------------------------------------------------------------

/// Feature-level synthetic records (no signal processing).
fn feature_cohort(subjects: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(subjects * 4);
    for s in 0..subjects {
        let subject_id = format!("S{s:05}");
        let base_ptt: f64 = rng.random_range(0.12..0.28);
        for visit in VisitDay::ALL {
            let ptt = (base_ptt + rng.random_range(-0.06..0.06)).clamp(0.10, 0.30);
            let mut values = [0.0; FEATURE_COUNT];
            values[0] = ptt;
            for v in values.iter_mut().skip(1) {
                *v = rng.random_range(0.0..1.0);
            }
            out.push(FeatureVector {
                values,
                beat_count: 40,
                user: None,
                subject_id: subject_id.clone(),
                visit_day: visit,
                ref_sbp_mmhg: 100.0 + 100.0 * ptt,
                ref_dbp_mmhg: 50.0 + 60.0 * ptt,
            });
        }
    }
    out
}

#[test]
fn acceptance_08_noise_oracle_folded_normal_mae() {
    let records = feature_cohort(2500, 800); // 10,000 records
    assert_eq!(records.len(), 10_000);
    let sigma = 5.0;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(801);

    let mut replies: HashMap<String, String> = HashMap::new();
    let grouping = GroupingConfig::preset(GroupingPreset::Table1);
    for fv in &records {
        let prompt = build_prompt(fv, ContextLevel::Basic, &grouping).unwrap();
        let noisy_sbp = fv.ref_sbp_mmhg + normal.sample(&mut rng);
        let clash = replies.insert(prompt.input, oracle_response(noisy_sbp, fv.ref_dbp_mmhg));
        assert!(clash.is_none(), "prompt collision");
    }
    let server = MockEndpoint::start(MockBehavior::MapByInput(Arc::new(replies)));
    let mut endpoint_cfg = mock_config(&server.base_url);
    endpoint_cfg.max_concurrency = 16;

    let keys: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
    let plan = make_folds(&keys, 5, 88).unwrap();
    let cfg = ExperimentConfig {
        context_level: ContextLevel::Basic,
        alpha: 1.0,
        seed: 88,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let report = run_experiment(
        &records,
        &EstimatorSpec::Endpoint { cfg: endpoint_cfg },
        &cfg,
        &plan,
    )
    .unwrap();
    let elapsed = start.elapsed();

    assert!(report.faults.is_empty(), "{} faults", report.faults.len());
    assert_eq!(report.n_evaluated, 10_000);
    let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
    let measured = report.pooled_sbp.mae_mmhg;
    assert!(
        (measured - expected).abs() <= 0.05 * expected,
        "SBP MAE {measured:.4} vs folded-normal mean {expected:.4}"
    );
    assert!(report.pooled_dbp.mae_mmhg < 1e-6);
    println!(
        "[acceptance 08] folded-normal noise oracle (n=10,000): PASS (MAE {measured:.3} vs {expected:.3}, {:.1} s)",
        elapsed.as_secs_f64()
    );
}

// -------------------------------------------------------------------------
// 9. Alpha-sweep law
// -------------------------------------------------------------------------

#[test]
fn acceptance_09_alpha_sweep_law() {
    let records = feature_cohort(60, 900);
    let keys: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
    let plan = make_folds(&keys, 5, 99).unwrap();
    let cfg = ExperimentConfig {
        seed: 99,
        ..ExperimentConfig::default()
    };
    let grid = default_alpha_grid();
    assert_eq!(grid.len(), 11);

    let oracle = sweep_alpha(&records, &EstimatorSpec::Oracle, &cfg, &plan, &grid).unwrap();
    let mae0 = oracle[0].1.pooled_sbp.mae_mmhg;
    let mut worst: f64 = 0.0;
    for (alpha, report) in &oracle {
        worst = worst.max((report.pooled_sbp.mae_mmhg - (1.0 - alpha) * mae0).abs());
        worst = worst.max(
            (report.pooled_dbp.mae_mmhg - (1.0 - alpha) * oracle[0].1.pooled_dbp.mae_mmhg).abs(),
        );
    }
    assert!(worst < 1e-6, "affine deviation {worst:e}");

    let zero = sweep_alpha(&records, &EstimatorSpec::Zero, &cfg, &plan, &grid).unwrap();
    let first = zero[0].1.pooled_sbp.mae_mmhg;
    for (_, report) in &zero {
        assert!((report.pooled_sbp.mae_mmhg - first).abs() < 1e-12);
    }
    println!(
        "[acceptance 09] alpha-sweep affine law across 11 points: PASS (worst dev {worst:.2e}; zero baseline invariant)"
    );
}

// -------------------------------------------------------------------------
// 10. Baseline learning
// -------------------------------------------------------------------------

#[test]
fn acceptance_10_baselines_beat_the_zero_baseline() {
    // Targets ride on the first feature with sigma = 3 mmHg noise. Transit
    // times are drawn independently per visit, so between-visit BP movement
    // (which the zero baseline cannot track) dominates the noise floor.
    let mut records = feature_cohort(80, 1000);
    let noise = Normal::new(0.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for r in records.iter_mut() {
        r.values[0] = rng.random_range(0.10..0.30);
        r.ref_sbp_mmhg = 100.0 + 100.0 * r.values[0] + noise.sample(&mut rng);
        r.ref_dbp_mmhg = 50.0 + 100.0 * r.values[0] + noise.sample(&mut rng);
    }
    let keys: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
    let plan = make_folds(&keys, 5, 110).unwrap();
    let cfg = ExperimentConfig {
        alpha: 1.0,
        seed: 110,
        ..ExperimentConfig::default()
    };

    let zero = run_experiment(&records, &EstimatorSpec::Zero, &cfg, &plan).unwrap();
    let hyper = BaselineHyper::default();
    let mut lines = Vec::new();
    for kind in [BaselineKind::Adaboost, BaselineKind::Dtr] {
        let report = run_experiment(
            &records,
            &EstimatorSpec::Baseline { kind, hyper },
            &cfg,
            &plan,
        )
        .unwrap();
        for (label, learned, base) in [
            ("SBP", report.pooled_sbp.mae_mmhg, zero.pooled_sbp.mae_mmhg),
            ("DBP", report.pooled_dbp.mae_mmhg, zero.pooled_dbp.mae_mmhg),
        ] {
            assert!(
                learned <= 0.8 * base,
                "{kind:?} {label} MAE {learned:.3} not 20% under zero baseline {base:.3}"
            );
        }
        lines.push(format!(
            "{kind:?} {:.2}/{:.2} vs zero {:.2}/{:.2}",
            report.pooled_sbp.mae_mmhg,
            report.pooled_dbp.mae_mmhg,
            zero.pooled_sbp.mae_mmhg,
            zero.pooled_dbp.mae_mmhg
        ));
    }
    println!(
        "[acceptance 10] learned baselines beat the zero baseline by >=20%: PASS ({})",
        lines.join("; ")
    );
}

// -------------------------------------------------------------------------
// 11. Leakage guard
// -------------------------------------------------------------------------

#[test]
fn acceptance_11_fold_leakage_guard() {
    let records = feature_cohort(23, 1100);
    let keys: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
    for seed in 0..100u64 {
        let plan: FoldPlan = make_folds(&keys, 5, seed).unwrap();
        for fold in 0..plan.k {
            let test: std::collections::BTreeSet<&str> = records
                .iter()
                .filter(|r| plan.assignments[&r.subject_id] == fold)
                .map(|r| r.subject_id.as_str())
                .collect();
            let train: std::collections::BTreeSet<&str> = records
                .iter()
                .filter(|r| plan.assignments[&r.subject_id] != fold)
                .map(|r| r.subject_id.as_str())
                .collect();
            assert!(test.is_disjoint(&train), "seed {seed} fold {fold} leaks");
            assert_eq!(test.len() + train.len(), 23);
        }
    }
    println!("[acceptance 11] subject leakage guard over 100 fold plans: PASS");
}

// -------------------------------------------------------------------------
// 12. Context ablation harness
// -------------------------------------------------------------------------

fn bracket_numbers(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (start, _) in text.match_indices('[') {
        let end = text[start..].find(']').unwrap() + start;
        out.extend(text[start + 1..end].split(", ").map(str::to_owned));
    }
    out.sort();
    out
}

#[test]
fn acceptance_12_context_ablation_exports() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = feature_cohort(10, 1200);
    let mut rng = ChaCha8Rng::seed_from_u64(1201);
    for (i, r) in records.iter_mut().enumerate() {
        r.user = Some(UserProfile {
            age_years: rng.random_range(30..70) as f64,
            gender: if i % 2 == 0 { Gender::Male } else { Gender::Female },
            height_cm: 160.0 + (i % 5) as f64,
            weight_kg: 60.0 + (i % 7) as f64,
            hypertension_history: i % 3 == 0,
        });
    }
    let grouping = GroupingConfig::preset(GroupingPreset::Table1);

    let mut exports: Vec<Vec<TuningRecord>> = Vec::new();
    for level in ContextLevel::ALL {
        let tuning: Vec<TuningRecord> = records
            .iter()
            .map(|fv| {
                let prompt = build_prompt(fv, level, &grouping).unwrap();
                let tuned =
                    build_tuning_record(&prompt, fv.ref_sbp_mmhg, fv.ref_dbp_mmhg).unwrap();
                TuningRecord::from(&tuned)
            })
            .collect();
        let path = dir.path().join(format!("tuning_{}.jsonl", level.slug()));
        cuffless::prompting::write_tuning_jsonl(&tuning, &path).unwrap();
        exports.push(cuffless::prompting::read_tuning_jsonl(&path).unwrap());
    }

    let [basic, knowledge, knowledge_user] = &exports[..] else {
        panic!("expected three exports");
    };
    assert_eq!(basic.len(), records.len());
    assert_eq!(knowledge.len(), records.len());
    assert_eq!(knowledge_user.len(), records.len());

    for i in 0..records.len() {
        // Same targets and task preamble at every level.
        assert_eq!(basic[i].output, knowledge[i].output);
        assert_eq!(basic[i].output, knowledge_user[i].output);
        assert_eq!(basic[i].instruction, knowledge[i].instruction);
        assert_eq!(basic[i].instruction, knowledge_user[i].instruction);
        // Identical numeric payload, different template text.
        let b = bracket_numbers(&basic[i].input);
        assert_eq!(b.len(), FEATURE_COUNT);
        assert_eq!(b, bracket_numbers(&knowledge[i].input));
        assert_eq!(b, bracket_numbers(&knowledge_user[i].input));
        assert_ne!(basic[i].input, knowledge[i].input);
        assert_ne!(knowledge[i].input, knowledge_user[i].input);
        assert!(knowledge_user[i].input.contains("Given the user's profile"));
        assert!(!knowledge[i].input.contains("Given the user's profile"));
    }
    println!(
        "[acceptance 12] context-ablation exports: PASS ({} records per level, payloads identical, templates differ)",
        records.len()
    );
}
