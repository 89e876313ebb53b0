use proptest::prelude::*;
use qecx::run::{PointResult, RunResult};
use qecx::{block_qubits, emit_results, fit_slope, footprint, parse_results, wilson, Footprint, Format};

proptest! {
    #[test]
    fn wilson_brackets_the_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac) as u64;
        let (lo, hi) = wilson(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        let (lo2, hi2) = wilson(4 * k, 4 * n);
        prop_assert!(hi2 - lo2 <= hi - lo + 1e-12);
    }

    #[test]
    fn fit_recovers_power_laws(a in 1e-2f64..1e4, k in 0.5f64..4.0, n in 3usize..10) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| {
            let p = 1e-4 * 10f64.powf(i as f64 / (n - 1) as f64);
            (p, a * p.powf(k))
        }).collect();
        let f = fit_slope(&pts).unwrap();
        prop_assert!((f.slope - k).abs() < 1e-9);
    }

    #[test]
    fn footprint_shrinks_with_looser_targets(pl3 in 1e-6f64..1e-3, ratio in 0.01f64..0.5, t1 in 1e-15f64..1e-7, t2 in 1e-15f64..1e-7) {
        let p = 1e-3;
        let pts = [(3, pl3), (5, pl3 * ratio)];
        let (tight, loose) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let q = |t| match footprint(&pts, p, t).unwrap() {
            Footprint::Qubits { qubits, .. } => qubits,
            Footprint::NoFiniteFootprint { .. } => u64::MAX,
        };
        prop_assert!(q(loose) <= q(tight));
        prop_assert!(q(loose) >= block_qubits(3));
    }

    #[test]
    fn results_round_trip(rows in prop::collection::vec((0.0f64..1.0, 0u64..1_000_000, 0u64..1000, 0u64..1000, 0.0f64..10.0), 0..6), seed in any::<u64>()) {
        let points = rows.iter().map(|&(param, shots, d, f, wall)| {
            let shots = shots + d + f;
            PointResult {
                param,
                state: "+".into(),
                shots,
                discards: d,
                failures: f,
                p_l: f as f64 / (shots - d).max(1) as f64,
                ci_low: 0.0,
                ci_high: 1.0,
                wall_s: wall,
                branches: [(1, shots)].into_iter().collect(),
            }
        }).collect();
        let r = RunResult { config_hash: "0123456789abcdef".into(), seed, gadget: "memory".into(), param_name: "p".into(), points };
        let mut buf = Vec::new();
        emit_results(&r, Format::Json, &mut buf).unwrap();
        prop_assert_eq!(parse_results(&buf[..], Format::Json).unwrap(), r.clone());
        if !r.points.is_empty() {
            let mut buf = Vec::new();
            emit_results(&r, Format::Csv, &mut buf).unwrap();
            prop_assert_eq!(parse_results(&buf[..], Format::Csv).unwrap(), r);
        }
    }
}
