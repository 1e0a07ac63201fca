use epic_core::numerics::Tensor;
use epic_core::physics::*;

fn onset(trace: &[f64], frac: f64) -> usize {
    let peak = trace.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    trace.iter().position(|v| v.abs() > frac * peak).expect("non-zero trace")
}

/// First-arrival time picked at 1% of the trace peak, minus the same pick on
/// the emitted wavelet.
fn first_arrival(rec: &WaveformRecord, shot: usize, receiver: usize, geom: &AcquisitionGeometry) -> f64 {
    let trace: Vec<f64> = rec.trace(shot, receiver).iter().map(|&v| v as f64).collect();
    let wavelet: Vec<f64> = (0..geom.n_t).map(|k| ricker(k as f64 * geom.dt, geom.f0)).collect();
    (onset(&trace, 0.01) as f64 - onset(&wavelet, 0.01) as f64) * geom.dt
}

fn halves() -> Vec<std::ops::Range<usize>> {
    vec![0..35, 35..70]
}

fn layered() -> VelocityModel {
    let grid = Tensor::from_fn(&[GRID, GRID], |i| match i / GRID {
        0..=24 => 2000.0,
        25..=49 => 2800.0,
        _ => 3600.0,
    });
    VelocityModel::new(grid, 10.0).unwrap()
}

#[test]
fn homogeneous_first_arrival_matches_travel_time() {
    let vm = VelocityModel::homogeneous(3000.0, 10.0).unwrap();
    let geom = AcquisitionGeometry::standard().with_sources(vec![35]);
    let rec = simulate(&vm, &geom).unwrap();
    let expected = 200.0 / 3000.0;
    for receiver in [15, 55] {
        let t = first_arrival(&rec, 0, receiver, &geom);
        assert!((t - expected).abs() <= 0.05 * expected, "receiver {receiver}: {t} vs {expected}");
    }
}

#[test]
fn default_geometry_record_dims() {
    let rec = simulate(&layered(), &AcquisitionGeometry::standard()).unwrap();
    assert_eq!(rec.dims(), (5, 1000, 70));
    assert!(rec.data().is_finite());
}

#[test]
fn zero_wavelet_gives_zero_record() {
    let geom = AcquisitionGeometry::standard().with_steps(200).with_amplitude(0.0);
    let rec = simulate(&layered(), &geom).unwrap();
    assert!(rec.data().data().iter().all(|&v| v == 0.0));
}

#[test]
fn cfl_violation_names_admissible_step() {
    let vm = VelocityModel::homogeneous(4500.0, 10.0).unwrap();
    let mut geom = AcquisitionGeometry::standard().with_steps(10);
    geom.dt = 0.002;
    let err = simulate(&vm, &geom).unwrap_err();
    match &err {
        Error::Cfl { dt, max_dt } => {
            assert_eq!(*dt, 0.002);
            assert!((max_dt - 0.5 * 10.0 / 4500.0).abs() < 1e-15);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("0.00111"), "{err}");
}

#[test]
fn record_is_linear_in_the_wavelet() {
    let geom = AcquisitionGeometry::standard().with_steps(400);
    let base = simulate(&layered(), &geom).unwrap();
    let scaled = simulate(&layered(), &geom.clone().with_amplitude(3.0)).unwrap();
    let scale = base.data().max_abs() as f64;
    for (a, b) in base.data().data().iter().zip(scaled.data().data()) {
        assert!((3.0 * *a as f64 - *b as f64).abs() <= 1e-6 * 3.0 * scale);
    }
}

#[test]
fn mirrored_model_mirrors_the_record() {
    let roi = Roi { rows: 30..40, cols: 8..20 };
    let vm = insert_roi(&layered(), &roi, 4200.0).unwrap();
    let geom = AcquisitionGeometry::standard().with_sources(vec![0, 17, 52, 69]).with_steps(500);
    let rec = simulate(&vm, &geom).unwrap();
    let mirrored = simulate(&vm.mirrored(), &geom).unwrap();
    let (n_s, n_t, n_r) = rec.dims();
    let scale = rec.data().max_abs();
    for s in 0..n_s {
        for t in 0..n_t {
            for r in 0..n_r {
                let a = rec.data().get(&[s, t, r]);
                let b = mirrored.data().get(&[n_s - 1 - s, t, n_r - 1 - r]);
                assert!((a - b).abs() <= 1e-5 * scale, "s{s} t{t} r{r}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn mirrored_geometry_matches_mirrored_model() {
    let vm = insert_roi(&layered(), &Roi { rows: 10..20, cols: 5..15 }, 4000.0).unwrap();
    let geom = AcquisitionGeometry::standard().with_sources(vec![12]).with_steps(300);
    let rec = simulate(&vm, &geom).unwrap();
    let mirrored = simulate(&vm.mirrored(), &geom.mirrored(GRID)).unwrap();
    for t in 0..300 {
        for r in 0..GRID {
            assert_eq!(rec.data().get(&[0, t, r]), mirrored.data().get(&[0, t, r]));
        }
    }
}

#[test]
fn zero_contrast_differential_is_zero() {
    let geom = AcquisitionGeometry::standard().with_steps(300);
    let d = differential_waveform(&layered(), &layered(), &geom).unwrap();
    assert!(d.data().data().iter().all(|&v| v == 0.0));
}

#[test]
fn differential_rejects_mismatched_models() {
    let small = VelocityModel::new(Tensor::full(&[40, 70], 2000.0), 10.0).unwrap();
    let geom = AcquisitionGeometry::standard().with_steps(10);
    assert!(matches!(differential_waveform(&layered(), &small, &geom), Err(Error::Shape(_))));
}

#[test]
fn left_roi_energy_leans_left_but_reaches_right() {
    let roi = Roi { rows: 8..22, cols: 5..25 };
    let with_roi = insert_roi(&layered(), &roi, 4000.0).unwrap();
    let background = background_model(&with_roi, &roi, Background::SurroundingLayer).unwrap();
    assert_eq!(background, layered());
    let geom = AcquisitionGeometry::standard().with_sources(vec![35]);
    let diff = differential_waveform(&with_roi, &background, &geom).unwrap();
    let e = energy_distribution(&diff, &halves()).unwrap();
    assert!(e.group_fractions[0] > 0.5, "{:?}", e.group_fractions);
    assert!(e.per_receiver[50..].iter().all(|&v| v > 0.0));
}

#[test]
fn symmetric_roi_splits_energy_evenly() {
    let roi = Roi { rows: 25..40, cols: 25..45 };
    let with_roi = insert_roi(&layered(), &roi, 4200.0).unwrap();
    let background = background_model(&with_roi, &roi, Background::Constant(2800.0)).unwrap();
    let symmetric = AcquisitionGeometry::standard().with_sources(vec![0, 17, 52, 69]);
    let diff = differential_waveform(&with_roi, &background, &symmetric).unwrap();
    let e = energy_distribution(&diff, &halves()).unwrap();
    assert!((e.group_fractions[0] - 0.5).abs() <= 1e-6, "{:?}", e.group_fractions);

    let diff = differential_waveform(&with_roi, &background, &AcquisitionGeometry::standard()).unwrap();
    let e = energy_distribution(&diff, &halves()).unwrap();
    assert!((e.group_fractions[0] - 0.5).abs() <= 0.02, "{:?}", e.group_fractions);
}

#[test]
fn energy_point_mass_and_errors() {
    let mut data = Tensor::zeros(&[2, 10, 70]);
    data.set(&[1, 4, 3], 2.0);
    let rec = WaveformRecord::new(data).unwrap();
    let singles: Vec<_> = (0..70).map(|r| r..r + 1).collect();
    let e = energy_distribution(&rec, &singles).unwrap();
    assert_eq!(e.group_fractions[3], 1.0);
    assert_eq!(e.per_receiver[3], 4.0);

    let zero = WaveformRecord::new(Tensor::zeros(&[1, 5, 70])).unwrap();
    assert!(matches!(energy_distribution(&zero, &halves()), Err(Error::ZeroEnergy)));
    assert!(matches!(energy_distribution(&rec, &[0..30, 31..70]), Err(Error::Groups(_))));
    assert!(matches!(energy_distribution(&rec, &[0..30]), Err(Error::Groups(_))));
}

#[test]
fn energy_fractions_sum_to_one() {
    let rec = simulate(&layered(), &AcquisitionGeometry::standard().with_steps(300)).unwrap();
    let groups = vec![0..14, 14..28, 28..42, 42..56, 56..70];
    let e = energy_distribution(&rec, &groups).unwrap();
    assert!((e.group_fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    assert!(e.group_fractions.iter().all(|f| (0.0..=1.0).contains(f)));
}

#[test]
fn background_fallbacks() {
    let vm = layered();
    let roi = Roi { rows: 0..5, cols: 0..3 };
    let filled = background_model(&insert_roi(&vm, &roi, 4400.0).unwrap(), &roi, Background::SurroundingLayer).unwrap();
    assert_eq!(filled, vm);
    let full = Roi { rows: 0..70, cols: 0..3 };
    assert!(background_model(&vm, &full, Background::SurroundingLayer).is_err());
    assert!(background_model(&vm, &full, Background::Constant(3000.0)).is_ok());
    assert!(insert_roi(&vm, &Roi { rows: 60..71, cols: 0..3 }, 3000.0).is_err());
}

#[test]
fn velocity_model_validation() {
    assert!(VelocityModel::homogeneous(1400.0, 10.0).is_err());
    assert!(VelocityModel::homogeneous(3000.0, 0.0).is_err());
    assert!(VelocityModel::new(Tensor::full(&[70], 3000.0), 10.0).is_err());
    let geom = AcquisitionGeometry::standard().with_sources(vec![70]);
    assert!(matches!(simulate(&layered(), &geom), Err(Error::Geometry(_))));
}

#[test]
fn dataset_is_deterministic_and_in_range() {
    let geom = AcquisitionGeometry::standard().with_steps(120);
    for family in [Family::Layered, Family::Faulted] {
        let a = generate_dataset(7, 6, family, &geom).unwrap();
        let b = generate_dataset(7, 6, family, &geom).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(8, 6, family, &geom).unwrap());
        for s in &a {
            assert!(s.velocity.grid().data().iter().all(|v| (1500.0..=4500.0).contains(v)));
            assert!(s.waveform.data().is_finite());
        }
    }
    let prefix = generate_dataset(7, 2, Family::Layered, &geom).unwrap();
    assert_eq!(prefix[..], generate_dataset(7, 6, Family::Layered, &geom).unwrap()[..2]);
    assert!(generate_dataset(7, 0, Family::Layered, &geom).is_err());
}

#[test]
fn layered_rows_are_constant_and_faults_break_them() {
    let geom = AcquisitionGeometry::standard().with_steps(5);
    let row_constant = |vm: &VelocityModel| {
        vm.grid().data().chunks(GRID).all(|row| row.iter().all(|&v| v == row[0]))
    };
    let layered = generate_dataset(3, 8, Family::Layered, &geom).unwrap();
    assert!(layered.iter().all(|s| row_constant(&s.velocity)));
    let faulted = generate_dataset(3, 8, Family::Faulted, &geom).unwrap();
    assert!(faulted.iter().any(|s| !row_constant(&s.velocity)));
}

#[test]
fn long_runs_stay_finite_on_generated_models() {
    let geom = AcquisitionGeometry::standard();
    for s in generate_dataset(11, 3, Family::Faulted, &geom).unwrap() {
        assert!(s.waveform.data().max_abs().is_finite());
        assert!(s.waveform.data().max_abs() > 0.0);
    }
}

#[test]
fn dataset_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let geom = AcquisitionGeometry::standard().with_steps(50);
    let samples = generate_dataset(5, 3, Family::Faulted, &geom).unwrap();
    let manifest = save_dataset(dir.path(), &samples, 5, Family::Faulted, &geom).unwrap();
    assert_eq!(manifest.files.len(), 3);
    let (loaded_manifest, loaded) = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded_manifest, manifest);
    assert_eq!(loaded, samples);
    let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(text.contains("\"family\": \"faulted\""));
}
