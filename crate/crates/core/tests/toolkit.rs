use epic_core::netem::NetworkProfile;
use epic_core::numerics::Tensor;
use epic_core::physics::{generate_dataset, AcquisitionGeometry, Family};
use epic_core::runtime::{PipelineMode, RunReport, SampleReport};
use epic_core::toolkit::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_map(seed: u64, lo: f32, hi: f32) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[70, 70], |_| rng.gen_range(lo..hi))
}

/// Moment-form SSIM computed window by window from raw sums.
fn ssim_oracle(a: &Tensor, b: &Tensor, window: usize, l: f64) -> f64 {
    let (h, w) = (a.dims()[0], a.dims()[1]);
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let n = (window * window) as f64;
    let mut total = 0.0;
    let mut count = 0;
    for r in 0..=h - window {
        for c in 0..=w - window {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in r..r + window {
                for j in c..c + window {
                    let x = a.get(&[i, j]) as f64;
                    let y = b.get(&[i, j]) as f64;
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = saa / n - ma * ma;
            let vb = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn ssim_identity_is_exactly_one() {
    let p = SsimParams::for_range(1500.0, 4500.0);
    for seed in 0..5 {
        let x = random_map(seed, 1500.0, 4500.0);
        assert_eq!(ssim(&x, &x, &p).unwrap(), 1.0);
    }
}

#[test]
fn ssim_constant_fields_closed_form() {
    let p = SsimParams::for_range(0.0, 1.0);
    let a = Tensor::zeros(&[70, 70]);
    let b = Tensor::full(&[70, 70], 1.0);
    let c1 = 1e-4;
    assert!((ssim(&a, &b, &p).unwrap() - c1 / (1.0 + c1)).abs() < 1e-9);
}

#[test]
fn ssim_matches_moment_oracle_and_is_symmetric() {
    let p = SsimParams::for_range(0.0, 1.0);
    for seed in 0..4 {
        let a = random_map(seed, 0.0, 1.0);
        let b = random_map(seed + 100, 0.0, 1.0);
        let s = ssim(&a, &b, &p).unwrap();
        assert!((s - ssim_oracle(&a, &b, 7, 1.0)).abs() < 1e-9);
        assert!((s - ssim(&b, &a, &p).unwrap()).abs() < 1e-9);
        assert!((-1.0..=1.0).contains(&s));
    }
}

#[test]
fn contrast_structure_is_translation_invariant() {
    let p = SsimParams::for_range(0.0, 1.0);
    let a = random_map(1, 0.0, 1.0);
    let b = random_map(2, 0.0, 1.0);
    let shift = |t: &Tensor| Tensor::from_fn(&[70, 70], |i| t.data()[i] + 0.25);
    let base = ssim_contrast_structure(&a, &b, &p).unwrap();
    let moved = ssim_contrast_structure(&shift(&a), &shift(&b), &p).unwrap();
    assert!((base - moved).abs() < 1e-6);
}

#[test]
fn ssim_rejects_bad_inputs() {
    let p = SsimParams::for_range(0.0, 1.0);
    assert!(ssim(&Tensor::zeros(&[70, 70]), &Tensor::zeros(&[70, 69]), &p).is_err());
    let even = SsimParams { window: 6, ..p };
    assert!(ssim(&Tensor::zeros(&[70, 70]), &Tensor::zeros(&[70, 70]), &even).is_err());
    let wide = SsimParams { window: 71, ..p };
    assert!(wide.validate((70, 70)).is_err());
}

#[test]
fn loss_identity_offset_and_oracle() {
    let gt = random_map(3, 0.0, 1.0);
    assert_eq!(loss_mae_mse(&gt, &gt, (0.0, 1.0)).unwrap(), 0.0);
    let shifted = Tensor::from_fn(&[70, 70], |i| gt.data()[i] + 1.0);
    assert!((loss_mae_mse(&shifted, &gt, (0.0, 1.0)).unwrap() - 1.0).abs() < 1e-6);

    let pred = random_map(4, 1500.0, 4500.0);
    let truth = random_map(5, 1500.0, 4500.0);
    let (mut abs, mut sq) = (0.0f64, 0.0f64);
    for i in 0..pred.len() {
        let d = (pred.data()[i] as f64 - truth.data()[i] as f64) / 3000.0;
        abs += d.abs();
        sq += d * d;
    }
    let n = pred.len() as f64;
    let oracle = 0.5 * abs / n + 0.5 * sq / n;
    assert!((loss_mae_mse(&pred, &truth, (1500.0, 4500.0)).unwrap() - oracle).abs() < 1e-9);
    assert!(loss_mae_mse(&pred, &Tensor::zeros(&[70, 69]), (0.0, 1.0)).is_err());
}

fn row(sample_id: u64, l: [f64; 3], bytes: u64, received: usize, failure: Option<&str>) -> SampleReport {
    let mut mask = vec![true; 3];
    for m in mask.iter_mut().skip(received) {
        *m = false;
    }
    SampleReport {
        sample_id,
        l_edge_s: l[0],
        l_comm_s: l[1],
        l_central_s: l[2],
        l_total_s: l.iter().sum(),
        energy_j: 0.01,
        comm_bytes: bytes,
        mask,
        timed_out: received < 3,
        deadline_met: failure.is_none(),
        failure: failure.map(String::from),
        ssim: failure.is_none().then_some(0.5),
    }
}

fn report(mode: PipelineMode, samples: Vec<SampleReport>) -> RunReport {
    let json = serde_json::json!({
        "mode": mode, "n_devices": 3, "deadline_s": 0.5, "decoder_time_s": 0.1,
        "samples": samples, "duplicates": 0, "late_frames": 0, "stale_frames": 0
    });
    serde_json::from_value(json).unwrap()
}

#[test]
fn summary_excludes_failed_samples_from_latency() {
    let r = report(
        PipelineMode::Epic,
        vec![
            row(0, [0.01, 0.02, 0.03], 100, 3, None),
            row(1, [0.03, 0.04, 0.05], 100, 2, None),
            row(2, [0.0, 0.0, 0.0], 0, 0, Some("no latents")),
        ],
    );
    let s = summarize(&r, "4g");
    assert_eq!((s.samples, s.failed), (3, 1));
    assert!((s.l_edge_ms - 20.0).abs() < 1e-9);
    assert!((s.l_total_ms - 90.0).abs() < 1e-9);
    assert!((s.comm_fraction_pct - 100.0 / 3.0).abs() < 1e-9);
    assert!((s.mean_received - 5.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.ssim, Some(0.5));
    let rows = sample_rows(&r, "4g");
    assert_eq!(rows[1].mask, "110");
    assert_eq!(rows[2].failure, "no latents");
}

#[test]
fn csv_headers_are_golden() {
    let r = report(PipelineMode::Sla, vec![row(0, [0.01, 0.02, 0.03], 10, 3, None)]);
    let mut buf = Vec::new();
    write_csv(&mut buf, &[summarize(&r, "wifi")]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let expected = "mode,n_devices,profile,samples,failed,l_edge_ms,l_comm_ms,l_central_ms,l_total_ms,comm_fraction_pct,energy_mj,comm_bytes,mean_received,deadline_met_pct,ssim";
    assert_eq!(text.lines().next().unwrap(), expected);
    assert_eq!(SUMMARY_HEADER, expected);
    assert!(text.lines().nth(1).unwrap().starts_with("sla,3,wifi,1,0,"));

    let mut buf = Vec::new();
    write_csv(&mut buf, &sample_rows(&r, "wifi")).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let expected = "mode,n_devices,profile,sample_id,l_edge_ms,l_comm_ms,l_central_ms,l_total_ms,energy_mj,comm_bytes,mask,timed_out,deadline_met,failure,ssim";
    assert_eq!(text.lines().next().unwrap(), expected);
    assert_eq!(SAMPLE_HEADER, expected);

    let mut buf = Vec::new();
    write_json(&mut buf, &[summarize(&r, "wifi")]).unwrap();
    let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(value[0]["mode"], "sla");
}

const MINIMAL: &str = r#"{"n_devices": 5, "network": {"b": 15e6, "l": 0.05, "p": 0.005}}"#;

#[test]
fn config_defaults() {
    let c = RunConfig::from_json(MINIMAL).unwrap();
    assert_eq!(c.deadline_s, 0.5);
    assert_eq!(c.model, ModelPreset::Standard);
    assert_eq!(c.samples, 8);
    assert_eq!(c.network, NetworkProfile::four_g());
    let infra = c.infra(5, c.network).unwrap();
    assert_eq!(infra.partition.len(), 5);
    assert!(infra.decoder_time_s > 0.0 && infra.decoder_time_s < 0.5);
    assert_eq!(c.geometry().n_t, 1000);
}

fn pointer_of(json: &str) -> String {
    match RunConfig::from_json(json) {
        Err(ToolkitError::Config { pointer, .. }) => pointer,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_errors_point_at_the_field() {
    let cases = [
        (r#"{"n_devices": 5, "network": {"b": "fast", "l": 0.05, "p": 0}}"#, "/network/b"),
        (r#"{"n_devices": 5, "network": {"b": 1e6, "l": 0.05, "p": 1.5}}"#, "/network/p"),
        (r#"{"n_devices": 5, "network": {"b": 1e6, "l": -1, "p": 0}}"#, "/network/l"),
        (r#"{"n_devices": 0, "network": {"b": 1e6, "l": 0, "p": 0}}"#, "/n_devices"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "T": -1}"#, "/T"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "T_d": 0.9}"#, "/T_d"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "partition": [[0, 30], [31, 70]]}"#, "/partition"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "seeds": {"data": -3}}"#, "/seeds/data"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "model": "huge"}"#, "/model"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "bench": {"modes": []}}"#, "/bench/modes"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "bench": {"devices": [2, 0]}}"#, "/bench/devices/1"),
        (r#"{"n_devices": 2, "network": {"b": 1e6, "l": 0, "p": 0}, "bench": {"modes": ["epik"]}}"#, "/bench/modes/0"),
    ];
    for (json, want) in cases {
        assert_eq!(pointer_of(json), want, "{json}");
    }
    let err = RunConfig::from_json(r#"{"n_devices": 5, "network": {"b": 1e6, "l": 0, "p": 0}, "colour": 1}"#).unwrap_err();
    assert!(err.to_string().contains("colour"));
    let err = RunConfig::from_json(r#"{"network": {"b": 1e6, "l": 0, "p": 0}}"#).unwrap_err();
    assert!(err.to_string().contains("n_devices"));
}

#[test]
fn seed_override_replaces_every_seed() {
    let c = RunConfig::from_json(MINIMAL).unwrap();
    let c = c.with_seed_override(Some("42")).unwrap();
    assert_eq!(c.seeds, Seeds { data: 42, weights: 42, faults: 42, link: 42 });
    assert!(c.clone().with_seed_override(Some("x")).is_err());
    assert_eq!(c.clone().with_seed_override(None).unwrap(), c);
}

#[test]
fn bench_emits_one_row_per_mode_and_device_count() {
    let json = r#"{
        "n_devices": 2, "network": {"b": 15e6, "l": 0.05, "p": 0}, "model": "compact",
        "bench": {"devices": [2, 5], "modes": ["centralized", "epic"], "samples": 2}
    }"#;
    let config = RunConfig::from_json(json).unwrap();
    let geom = AcquisitionGeometry::standard().with_steps(200);
    let data = generate_dataset(3, 2, Family::Layered, &geom).unwrap();
    let spec = config.bench.clone().unwrap();
    let rows = bench(&spec, &config, &data).unwrap();
    let keys: Vec<(PipelineMode, usize)> = rows.iter().map(|r| (r.mode, r.n_devices)).collect();
    assert_eq!(
        keys,
        vec![
            (PipelineMode::Centralized, 2),
            (PipelineMode::Epic, 2),
            (PipelineMode::Centralized, 5),
            (PipelineMode::Epic, 5)
        ]
    );
    for pair in rows.chunks(2) {
        assert!(pair[1].comm_bytes < pair[0].comm_bytes);
        assert!(pair[0].comm_fraction_pct > 50.0);
        assert!(pair[1].ssim.is_some());
    }
    assert_eq!(rows, bench(&spec, &config, &data).unwrap());
}
