use iontrap::{accumulate_excitation, cooling_time, lower_node, NodeSchedule, OpKind, Placement, Scenario, TimingScenario};
use pframe::noise::idle_dephase_prob;
use pframe::{Circuit, Gate, Instr, MultiChannelParams, NoiseChannel};
use proptest::prelude::*;
use std::collections::BTreeMap;

#[test]
fn cooling_times_for_the_reference_excitations() {
    for (nbar, wc, ms) in [(27.0, 1e4, 0.79), (9.0, 3e4, 0.23), (2.4, 5e4, 0.11)] {
        let t = cooling_time(nbar, 0.01, wc).unwrap() * 1e3;
        assert!((t - ms).abs() <= 0.005, "{nbar} {wc}: {t}");
    }
}

#[test]
fn swap_heats_by_coherent_plus_thermal() {
    let s = TimingScenario::load(Scenario::Current);
    assert!((accumulate_excitation(&[OpKind::Swap], &s) - 4.3).abs() < 1e-9);
    assert_eq!(accumulate_excitation(&[], &s), 0.0);
}

#[test]
fn step_two_heating_and_cooling() {
    let mut ops = vec![OpKind::Swap];
    ops.extend([OpKind::Split, OpKind::Merge, OpKind::JunctionCross, OpKind::Split, OpKind::Merge, OpKind::Split, OpKind::Merge]);
    for (tag, nbar, ms) in [(Scenario::Current, 27.4, 0.792), (Scenario::Intermediate, 9.16, 0.227), (Scenario::Optimistic, 2.4, 0.110)] {
        let s = TimingScenario::load(tag);
        let n = accumulate_excitation(&ops, &s);
        assert!((n - nbar).abs() < 1e-9, "{tag:?}: {n}");
        assert!((s.recool_us(n) * 1e-3 - ms).abs() < 0.0005, "{tag:?}");
    }
}

#[test]
fn scenarios_get_faster() {
    let [c, i, o] = Scenario::ALL.map(TimingScenario::load);
    for k in OpKind::ALL.into_iter().filter(|&k| k != OpKind::Recool) {
        let d = |s: &TimingScenario| s.integrated_op(k).duration_us;
        assert!(d(&c) > d(&i) && d(&i) > d(&o), "{k:?}");
        let g = |s: &TimingScenario| s.segmented_duration(k);
        assert!(g(&c) > g(&o), "{k:?}");
    }
}

fn two_gate_schedule(gap_us: f64) -> (Circuit, NodeSchedule) {
    let c = Circuit {
        instrs: vec![Instr::Gate { gate: Gate::H, qubits: vec![0] }, Instr::Idle { qubits: vec![0], duration: None }, Instr::Gate { gate: Gate::H, qubits: vec![0] }],
        noisy: false,
        ideal: false,
    };
    let ns = NodeSchedule {
        node: 0,
        name: "n".into(),
        start: Placement::empty(1, 1),
        ops: vec![],
        instr_times: vec![Some((0.0, 300.0)), None, Some((300.0 + gap_us, 600.0 + gap_us))],
        duration: 600.0 + gap_us,
    };
    (c, ns)
}

fn params(t2: f64) -> MultiChannelParams {
    MultiChannelParams { t2, ..MultiChannelParams::uniform(0.0) }
}

#[test]
fn idle_gap_becomes_one_dephasing_channel() {
    for (gap, p) in [(500.0, 1.2498e-4), (300.0, 7.497e-5)] {
        let (c, ns) = two_gate_schedule(gap);
        let low = lower_node(&c, &ns, 1, &params(2.0), &BTreeMap::new()).unwrap();
        let rates: Vec<f64> = low
            .instrs
            .iter()
            .filter_map(|i| match i {
                Instr::Noise(ch @ NoiseChannel::IdleDephase { .. }) => Some(ch.rate()),
                _ => None,
            })
            .collect();
        assert_eq!(rates.len(), 1);
        assert!((rates[0] - p).abs() < 1e-7, "{gap}: {}", rates[0]);
        assert!((idle_dephase_prob(gap * 1e-6, 2.0).unwrap() - p).abs() < 1e-7);
    }
}

#[test]
fn back_to_back_gates_get_no_idle() {
    let (c, ns) = two_gate_schedule(0.0);
    let low = lower_node(&c, &ns, 1, &params(2.0), &BTreeMap::new()).unwrap();
    assert!(!low.instrs.iter().any(|i| matches!(i, Instr::Idle { .. })));
}

#[test]
fn ideal_nodes_pass_through() {
    let (mut c, ns) = two_gate_schedule(500.0);
    c.ideal = true;
    let low = lower_node(&c, &ns, 1, &params(2.0), &BTreeMap::new()).unwrap();
    assert!(low.noisy && !low.instrs.iter().any(|i| matches!(i, Instr::Noise(_))));
}

proptest! {
    #[test]
    fn cooling_is_monotone(a in 0.02f64..100.0, b in 0.02f64..100.0, wc in 1e3f64..1e5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let t = |n| cooling_time(n, 0.01, wc).unwrap();
        prop_assert!(t(lo) <= t(hi));
        prop_assert!(t(hi) >= cooling_time(hi, 0.01, wc * 2.0).unwrap());
        prop_assert_eq!(cooling_time(0.01 * a / 100.0, 0.01, wc).unwrap(), 0.0);
    }

    #[test]
    fn excitation_adds_up(ops in prop::collection::vec(0usize..7, 0..20), cut in 0usize..20) {
        let kinds = [OpKind::Split, OpKind::Merge, OpKind::JunctionCross, OpKind::Swap, OpKind::LinearShuttle, OpKind::Readout, OpKind::Gate2q];
        let ops: Vec<OpKind> = ops.into_iter().map(|i| kinds[i]).collect();
        let s = TimingScenario::load(Scenario::Intermediate);
        let cut = cut.min(ops.len());
        let whole = accumulate_excitation(&ops, &s);
        let parts = accumulate_excitation(&ops[..cut], &s) + accumulate_excitation(&ops[cut..], &s);
        prop_assert!((whole - parts).abs() < 1e-9);
        let mut cooled = ops.clone();
        cooled.insert(cut, OpKind::Recool);
        prop_assert!((accumulate_excitation(&cooled, &s) - accumulate_excitation(&ops[cut..], &s)).abs() < 1e-9);
    }
}
