use colorcode::gadgets::*;
use pframe::exec::run_single;
use pframe::{validate_tree, ProtocolTree, SingleOptions};

fn all_trees() -> Vec<ProtocolTree> {
    let mut v = Vec::new();
    for s in Cardinal::ALL {
        v.push(prep_verified(s).unwrap());
        v.push(prep_stabilizer(s).unwrap());
        for scheme in Scheme::ALL {
            v.push(memory(scheme, true, s, 2).unwrap());
        }
        v.push(memory(Scheme::Simultaneous, false, s, 2).unwrap());
        v.push(memory(Scheme::Sequential, false, s, 1).unwrap());
        v.push(teleport_ls(s, Scheme::Simultaneous).unwrap());
        v.push(teleport_ls(s, Scheme::Sequential).unwrap());
        v.push(teleport_direct(s, true).unwrap());
        v.push(teleport_direct(s, false).unwrap());
    }
    v.push(teleport_ls_with(Cardinal::Zero, Scheme::Simultaneous, TeleportOptions { halt_before_split: true }).unwrap());
    v.push(s_gate_hazard(true).unwrap());
    v.push(s_gate_hazard(false).unwrap());
    v
}

#[test]
fn trees_validate_noiselessly() {
    for t in all_trees().into_iter().filter(|t| !t.name.starts_with("s-hazard")) {
        let rep = validate_tree(&t, 12, 7);
        assert!(rep.is_ok(), "{}: {:?}", t.name, &rep.violations[..rep.violations.len().min(3)]);
    }
}

#[test]
fn every_path_passes_its_checks_without_faults() {
    for t in all_trees() {
        if t.name.starts_with("s-hazard") {
            continue;
        }
        for (pi, path) in t.paths().iter().enumerate() {
            // Re-measurement branches need a detected error on the joint
            // support; the single-fault certificates cover them.
            if path.iter().any(|&n| t.node(n).name == "re-measure joint value") {
                continue;
            }
            for seed in 0..8u64 {
                let run = run_single(&t, &[], SingleOptions { randomize: Some(seed * 1000 + pi as u64), forced: Some(path) }).unwrap();
                assert!(!run.outcome.failed(), "{} path {pi} {:?} seed {seed}", t.name, path);
            }
        }
    }
}

#[test]
fn s_hazard_fails_only_when_corrected_after_s() {
    let first = s_gate_hazard(true).unwrap();
    let after = s_gate_hazard(false).unwrap();
    let r1 = run_single(&first, &[], SingleOptions::default()).unwrap();
    let r2 = run_single(&after, &[], SingleOptions::default()).unwrap();
    assert!(!r1.outcome.failed());
    assert!(r2.outcome.failed());
}

#[test]
fn unsupported_configurations_error() {
    assert!(teleport_ls(Cardinal::Zero, Scheme::Superdense).is_err());
    assert!(teleport_ls_with(Cardinal::Plus, Scheme::Simultaneous, TeleportOptions { halt_before_split: true }).is_err());
    assert!(memory(Scheme::Superdense, true, Cardinal::Zero, 1).is_ok());
}
