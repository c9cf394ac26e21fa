use num_complex::Complex64;
use proptest::prelude::*;

use shared_adc_core::cost::{bill_of_materials, compare, ArchitectureSpec, PriceBook};
use shared_adc_core::frontend::{
    generate_clocks, run_shared_chain, switched_combine, FrontendConfig, LpfSetting,
};
use shared_adc_core::harness::{read_records_csv, write_records_csv, SweepRecord};
use shared_adc_core::ofdm::EqualizerMode;
use shared_adc_core::signal::{
    complex_gaussian, decimate, design_lowpass, measure_snr, upsample, ComplexSignal,
    UpsampleMethod,
};

fn signal(rate: f64, len: usize, seed: u64) -> ComplexSignal {
    ComplexSignal::new(rate, complex_gaussian(len, 1.0, seed)).unwrap()
}

fn lincomb(a: &ComplexSignal, ga: Complex64, b: &ComplexSignal, gb: Complex64) -> ComplexSignal {
    a.scaled(ga).add(&b.scaled(gb)).unwrap()
}

fn max_diff(a: &ComplexSignal, b: &ComplexSignal) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lowpass_taps_symmetric_with_unit_dc(
        cutoff in 20.0e6..700.0e6f64,
        transition in 10.0e6..200.0e6f64,
        atten in 30.0..90.0f64,
    ) {
        let f = design_lowpass(cutoff, 1600.0e6, transition, atten).unwrap();
        let t = f.taps();
        let n = t.len();
        for i in 0..n / 2 {
            prop_assert!((t[i] - t[n - 1 - i]).abs() < 1e-14);
        }
        prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_ignores_common_and_test_scaling(
        seed in 0u64..1000,
        re in -4.0..4.0f64,
        im in -4.0..4.0f64,
        noise in 0.01..1.0f64,
    ) {
        prop_assume!(re.hypot(im) > 1e-3);
        let r = signal(1.0e6, 512, seed);
        let n = signal(1.0e6, 512, seed + 7777);
        let t = r.add_scaled(&n, noise).unwrap();
        let g = Complex64::new(re, im);
        let base = measure_snr(&r, &t).unwrap();
        prop_assert!((measure_snr(&r, &t.scaled(g)).unwrap() - base).abs() < 1e-9);
        prop_assert!((measure_snr(&r.scaled(g), &t.scaled(g)).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn clocks_partition_every_sample(m in 1usize..9, slot_mult in 1usize..6) {
        let cfg = FrontendConfig {
            m_antennas: m,
            adc_rate_fs: m as f64 * 100.0e6,
            analog_rate: (m * slot_mult) as f64 * 100.0e6,
            ..FrontendConfig::default()
        };
        let clocks = generate_clocks(&cfg).unwrap();
        for n in 0..3 * clocks.period() {
            let on = (0..m).filter(|&i| clocks.gate(i, n)).count();
            prop_assert_eq!(on, 1);
        }
        for i in 0..m {
            let duty: usize = clocks.gate_period(i).iter().map(|&g| g as usize).sum();
            prop_assert_eq!(duty * m, clocks.period());
        }
    }

    #[test]
    fn switched_combiner_is_linear(seed in 0u64..1000, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let cfg = FrontendConfig {
            analog_rate: 3.2e9,
            ..FrontendConfig::default()
        };
        let clocks = generate_clocks(&cfg).unwrap();
        let len = 4 * clocks.period();
        let xs: Vec<ComplexSignal> = (0..4).map(|i| signal(3.2e9, len, seed * 10 + i)).collect();
        let ys: Vec<ComplexSignal> = (0..4).map(|i| signal(3.2e9, len, seed * 10 + 5 + i)).collect();
        let (ga, gb) = (Complex64::new(a, 0.5), Complex64::new(-0.25, b));
        let mixed: Vec<ComplexSignal> =
            xs.iter().zip(&ys).map(|(x, y)| lincomb(x, ga, y, gb)).collect();
        let lhs = switched_combine(&mixed, &clocks).unwrap();
        let rhs = lincomb(
            &switched_combine(&xs, &clocks).unwrap(),
            ga,
            &switched_combine(&ys, &clocks).unwrap(),
            gb,
        );
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn sinc_upsampling_keeps_original_samples(seed in 0u64..1000, len in 8usize..200, factor in 1usize..9) {
        let x = signal(1.0e6, len, seed);
        let up = upsample(&x, factor, UpsampleMethod::Sinc).unwrap();
        prop_assert_eq!(up.len(), len * factor);
        let back = decimate(&up, factor, 0).unwrap();
        prop_assert!(max_diff(&back, &x) < 1e-9);
    }

    #[test]
    fn records_csv_round_trip(
        seed in any::<u64>(),
        snr in -10.0..60.0f64,
        fc in proptest::option::of(1.0e8..1.0e9f64),
        layers in proptest::collection::vec((-50.0..80.0f64, 0.0..500.0f64), 1..6),
        siso in any::<bool>(),
    ) {
        let rec = SweepRecord {
            regime_label: "r".into(),
            fc,
            input_snr_db: snr,
            equalizer_mode: if siso { EqualizerMode::Siso } else { EqualizerMode::Mmse },
            seed,
            per_layer_output_snr_db: layers.iter().map(|l| l.0).collect(),
            per_layer_evm_percent: layers.iter().map(|l| l.1).collect(),
            mean_output_snr_db: layers.iter().map(|l| l.0).sum::<f64>() / layers.len() as f64,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_records_csv(&path, &[rec.clone(), rec.clone()]).unwrap();
        prop_assert_eq!(read_records_csv(&path).unwrap(), vec![rec.clone(), rec]);
    }

    #[test]
    fn bom_total_grows_with_antennas(n in 1usize..256, extra in 1usize..64, mux in 1usize..9) {
        let book = PriceBook::default();
        let small = bill_of_materials(&ArchitectureSpec::shared(n, mux), &book).unwrap();
        let large = bill_of_materials(&ArchitectureSpec::shared(n + extra, mux), &book).unwrap();
        prop_assert!(large.total >= small.total);
    }

    #[test]
    fn sharing_saves_more_with_cheap_switches(
        n in 1usize..256,
        mux in 2usize..9,
        switch in 0.0..20.0f64,
    ) {
        let cheap = PriceBook { switch_price: switch, ..PriceBook::default() };
        let dear = PriceBook { switch_price: switch + 10.0, ..PriceBook::default() };
        let a = ArchitectureSpec::traditional(n);
        let b = ArchitectureSpec::shared(n, mux);
        let s_cheap = compare(&a, &b, &cheap).unwrap().savings;
        let s_dear = compare(&a, &b, &dear).unwrap().savings;
        prop_assert!(s_cheap > s_dear);
        prop_assert!(compare(&a, &a, &cheap).unwrap().savings.abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn shared_chain_superposition(seed in 0u64..1000, a in -2.0..2.0f64) {
        let cfg = FrontendConfig {
            analog_rate: 3.2e9,
            lpf: LpfSetting::lowpass(500.0e6),
            guard_samples: 32,
            ..FrontendConfig::default()
        };
        let len = 128 * 32;
        let xs: Vec<ComplexSignal> = (0..4).map(|i| signal(3.2e9, len, seed * 10 + i)).collect();
        let ys: Vec<ComplexSignal> = (0..4).map(|i| signal(3.2e9, len, seed * 10 + 5 + i)).collect();
        let (ga, gb) = (Complex64::new(a, 1.0), Complex64::new(0.5, -a));
        let mixed: Vec<ComplexSignal> =
            xs.iter().zip(&ys).map(|(x, y)| lincomb(x, ga, y, gb)).collect();
        let lhs = run_shared_chain(&mixed, &cfg).unwrap().streams;
        let ox = run_shared_chain(&xs, &cfg).unwrap().streams;
        let oy = run_shared_chain(&ys, &cfg).unwrap().streams;
        for i in 0..4 {
            prop_assert!(max_diff(&lhs[i], &lincomb(&ox[i], ga, &oy[i], gb)) < 1e-9);
        }
    }
}
