use colorcode::gadgets::*;
use pframe::exec::run_single;
use pframe::{execute, ExecOptions, SingleOptions};
use proptest::prelude::*;

#[test]
fn resource_counts() {
    let seq = count_resources(Scheme::Sequential).unwrap();
    let sim = count_resources(Scheme::Simultaneous).unwrap();
    let sd = count_resources(Scheme::Superdense).unwrap();

    assert_eq!(seq.cnots_flagged, vec![36, 36]);
    assert_eq!(seq.cnots_unflagged, Some(vec![24, 24]));
    assert_eq!(seq.depth_flagged, (24, 48));
    assert_eq!(seq.flags, vec![1, 1]);

    assert_eq!(sim.qubits_total, 28);
    assert_eq!(sim.flags, vec![3, 3]);
    assert_eq!(sim.depth_flagged, (8, 16));

    assert_eq!(sd.qubits_total, 28);
    assert_eq!((sd.data.iter().sum::<usize>(), sd.syndrome.iter().sum::<usize>(), sd.surgery), (14, 12, 2));
    assert_eq!(sd.flags, vec![0, 0]);
    assert_eq!(sd.cnots_flagged, vec![30, 30]);
    assert_eq!(sd.depth_flagged, (7, 10));
    assert!(sd.cnots_unflagged.is_none());
}

#[test]
fn data_counts_grow_quadratically() {
    assert_eq!(data_qubits(3), 7);
    assert_eq!(2 * data_qubits(5), 38);
}

#[test]
fn halted_merge_leaves_a_bell_pair() {
    for s in [Cardinal::Zero, Cardinal::One] {
        let t = teleport_ls_with(s, Scheme::Simultaneous, TeleportOptions { halt_before_split: true }).unwrap();
        for seed in 0..16 {
            let run = run_single(&t, &[], SingleOptions { randomize: Some(seed), forced: None }).unwrap();
            assert!(!run.outcome.failed(), "{s:?} seed {seed}");
        }
    }
}

// Pearson statistic against the uniform distribution over the four (a, b)
// patterns; 11.345 is the 0.99 quantile of chi-square with 3 dof.
fn chi2_uniform(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

#[test]
fn teleport_outcomes_are_uniform_and_exact() {
    for s in Cardinal::ALL {
        let t = teleport_ls(s, Scheme::Simultaneous).unwrap();
        let mut counts = [0u64; 4];
        for seed in 0..1000 {
            let run = run_single(&t, &[], SingleOptions { randomize: Some(seed), forced: None }).unwrap();
            assert!(!run.outcome.failed() && !run.outcome.discarded, "{s:?} seed {seed}");
            let [a, b] = run.outcome.report[..] else { panic!("expected a and b") };
            counts[2 * a as usize + b as usize] += 1;
        }
        assert!(chi2_uniform(&counts) < 11.345, "{s:?}: {counts:?}");
    }
}

#[test]
fn sparse_sampler_reads_random_outcomes_as_zero() {
    let t = teleport_ls(Cardinal::Zero, Scheme::Simultaneous).unwrap();
    let tally = execute(&t, 1000, &ExecOptions { seed: 11, workers: 1, chunk: 250 }).unwrap();
    assert_eq!((tally.failures, tally.discards), (0, 0));
    assert_eq!(tally.reports.get("00"), Some(&1000));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn noiseless_teleport_never_fails(state in 0usize..6, direct in any::<bool>(), seed in any::<u64>()) {
        let s = Cardinal::ALL[state];
        let t = if direct { teleport_direct(s, true).unwrap() } else { teleport_ls(s, Scheme::Sequential).unwrap() };
        let tally = execute(&t, 64, &ExecOptions { seed, workers: 1, chunk: 64 }).unwrap();
        prop_assert_eq!(tally.failures, 0);
        prop_assert_eq!(tally.discards, 0);
    }

    #[test]
    fn flags_cost_gates_and_depth(scheme in 0usize..3) {
        let r = count_resources(Scheme::ALL[scheme]).unwrap();
        prop_assert!(r.depth_flagged.0 <= r.depth_flagged.1);
        if let Some(c) = &r.cnots_unflagged {
            prop_assert!(c[0] < r.cnots_flagged[0]);
        }
    }
}
