use colorcode::code::{build_hex_color_code, STEANE_LOGICAL, STEANE_PLAQUETTES};
use colorcode::decoders::*;
use colorcode::gadgets::*;
use pframe::noise::scem_attach;
use pframe::{Basis, Circuit, Expr, LogicalCheck, PauliFrame, ProtocolTree, ScemParams, Terminal};

fn noisy(t: &ProtocolTree) -> ProtocolTree {
    t.map_circuits(|c| scem_attach(c, ScemParams { p: 1e-3 })).unwrap()
}

fn cert(t: &ProtocolTree) -> Certificate {
    ft_certificate(&noisy(t), &[11, 12]).unwrap()
}

#[test]
fn lookup_examples() {
    let t = LookupTable::table_iii();
    assert_eq!(decode_lookup(&t, 0b100, 0), vec![0]);
    assert_eq!(decode_lookup(&t, 0b010, 1), vec![2, 3]);
    for ctx in 0..CONTEXTS {
        assert!(decode_lookup(&t, 0, ctx).is_empty());
        for s in 0..8 {
            let e = t.get(s, ctx);
            assert!(e.len() <= 2 && (e.len() < 2 || ctx > 0));
            assert_eq!(steane_syndrome(mask_of(e)), s);
        }
    }
}

#[test]
fn table_text_roundtrip() {
    let t = LookupTable::table_iii();
    assert_eq!(LookupTable::from_text(&t.to_text()).unwrap(), t);
    assert!(LookupTable::from_text("nope\n").is_err());
    assert!(LookupTable::from_text("lookup-table v1\n111 9 1\n").is_err());
}

#[test]
fn flagged_probe_rebuilds_published_table() {
    let built = build_lookup(&se_probe(SeKind::Flagged).unwrap()).unwrap();
    assert_eq!(built.differences(&LookupTable::table_iii()), vec![]);
}

#[test]
fn bare_probe_is_inconsistent() {
    let err = build_lookup(&se_probe(SeKind::Bare).unwrap()).unwrap_err();
    assert!(matches!(err, DecoderError::Inconsistent { .. }), "{err}");
}

#[test]
fn superdense_probe_builds_a_table() {
    let probe = se_probe(SeKind::Superdense).unwrap();
    // Z errors move during the second round, so one shared table is not enough.
    assert!(matches!(build_lookup(&probe), Err(DecoderError::Inconsistent { .. })));
    let (x, z) = build_lookup_split(&probe).unwrap();
    assert!(x.get(0, 0).is_empty() && z.get(0, 0).is_empty());
    assert_eq!(x.entries[0].len(), 64);
    assert_eq!(superdense_tables().unwrap(), &(x, z));
}

#[test]
fn ml_oracle_examples() {
    let code = build_hex_color_code(3).unwrap().css;
    let syn = |checks: &[Vec<u32>], e: &[u32]| syndrome_bits(checks, e);
    let (x, z) = brute_force_ml_decode(&code, &syn(&code.z_checks, &[3]), &syn(&code.x_checks, &[]), 0.01).unwrap();
    assert!(steane_equivalent(mask_of(&x), mask_of(&[3])) && z.is_empty());
    let (x, z) = brute_force_ml_decode(&code, &syn(&code.z_checks, &[4]), &syn(&code.x_checks, &[1]), 0.01).unwrap();
    assert!(steane_equivalent(mask_of(&x), mask_of(&[4])));
    assert!(steane_equivalent(mask_of(&z), mask_of(&[1])));
    // Y4 Z1: the Z part {1, 4} decodes to a weight-one correction that
    // completes a logical operator.
    let (_, z) = brute_force_ml_decode(&code, &syn(&code.z_checks, &[4]), &syn(&code.x_checks, &[1, 4]), 0.01).unwrap();
    let residual = mask_of(&z) ^ mask_of(&[1, 4]);
    assert_eq!(steane_syndrome(residual), 0);
    assert_eq!((residual & mask_of(&STEANE_LOGICAL)).count_ones() % 2, 1);
    let big = build_hex_color_code(7).unwrap().css;
    assert!(matches!(brute_force_ml_decode(&big, &[], &[], 0.01), Err(DecoderError::TooLarge(_))));
}

#[test]
fn lookup_agrees_with_ml_on_single_faults() {
    use rand::{Rng, SeedableRng};
    let code = build_hex_color_code(3).unwrap().css;
    let checks: Vec<Vec<u32>> = STEANE_PLAQUETTES.iter().map(|p| p.to_vec()).collect();
    assert_eq!(code.z_checks, checks);
    let t = LookupTable::table_iii();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let e: Vec<u32> = match rng.gen_range(0..8u32) {
            7 => vec![],
            q => vec![q],
        };
        let s = syndrome_bits(&checks, &e);
        let idx = s.iter().fold(0usize, |a, &b| (a << 1) | b as usize);
        let ml = ml_correction(&checks, &STEANE_LOGICAL, 7, &s, 0.01).unwrap();
        assert!(steane_equivalent(mask_of(&ml), mask_of(t.get(idx, 0))));
    }
}

#[test]
fn fault_tolerant_trees_have_certificates() {
    let mut trees = vec![];
    for s in [Cardinal::Zero, Cardinal::One, Cardinal::Plus, Cardinal::Minus] {
        trees.push(prep_verified(s).unwrap());
    }
    for s in Cardinal::ALL {
        trees.push(prep_stabilizer(s).unwrap());
    }
    for scheme in Scheme::ALL {
        trees.push(memory(scheme, true, Cardinal::Zero, 1).unwrap());
        trees.push(memory(scheme, true, Cardinal::Plus, 1).unwrap());
    }
    for s in [Cardinal::Zero, Cardinal::Plus, Cardinal::PlusI] {
        trees.push(teleport_ls(s, Scheme::Simultaneous).unwrap());
        trees.push(teleport_ls(s, Scheme::Sequential).unwrap());
        trees.push(teleport_direct(s, true).unwrap());
    }
    for t in trees {
        assert!(t.has_tag("ft"), "{}", t.name);
        let c = cert(&t);
        assert!(c.sites > 0);
        assert!(c.passed(), "{}: {} of {} sites fail, first {:?}", t.name, c.failures.len(), c.sites, &c.failures[..c.failures.len().min(3)]);
    }
}

#[test]
fn non_fault_tolerant_trees_have_witnesses() {
    for t in [
        prep_verified(Cardinal::PlusI).unwrap(),
        memory(Scheme::Simultaneous, false, Cardinal::Zero, 1).unwrap(),
        teleport_direct(Cardinal::Plus, false).unwrap(),
    ] {
        assert!(t.has_tag("non-ft"), "{}", t.name);
        assert!(!cert(&t).passed(), "{}", t.name);
    }
}

#[test]
fn dem_examples() {
    let mut c = Circuit::new();
    c.reset(0, Basis::Z).reset(1, Basis::Z);
    let checks = ["Z0", "X0", "Z1", "X1"]
        .map(|o| LogicalCheck { name: o.into(), observable: PauliFrame::parse(o).unwrap(), decode: None, flip: Expr::Const(false) });
    let term = Terminal { checks: checks.to_vec(), alive: vec![0, 1], ..Default::default() };
    let clean = ProtocolTree::single("idle", 2, c.clone(), term.clone());
    assert!(export_dem(&clean).unwrap().mechanisms.is_empty());

    let mut g = Circuit::new();
    g.cx(0, 1);
    let one = ProtocolTree::single("cx", 2, g, term);
    let p = 0.03;
    let dem = export_dem(&one.map_circuits(|c| scem_attach(c, ScemParams { p })).unwrap()).unwrap();
    assert_eq!(dem.mechanisms.len(), 15);
    assert!(dem.mechanisms.iter().all(|m| (m.p - p / 15.0).abs() < 1e-15));
    assert!(dem.to_text().lines().nth(1).unwrap().starts_with("error("));

    let branching = memory(Scheme::Simultaneous, true, Cardinal::Zero, 1).unwrap();
    assert!(matches!(export_dem(&noisy(&branching)), Err(DecoderError::Branching(_))));
}

#[test]
fn dem_of_probe_counts_signatures() {
    let layout = Layout::new(Scheme::Simultaneous, 1);
    let mut t = encode_ideal(&layout, 0, Cardinal::Zero).unwrap();
    t.chain(&se_probe(SeKind::Bare).unwrap().tree).unwrap();
    let t = noisy(&t);
    let dem = export_dem(&t).unwrap();
    let path = t.paths().remove(0);
    let sites = pframe::exec::fault_sites(&t, &path).len();
    assert!(!dem.mechanisms.is_empty() && dem.mechanisms.len() <= sites);
    let mut seen = std::collections::BTreeSet::new();
    for m in &dem.mechanisms {
        assert!(seen.insert((m.detectors.clone(), m.observables.clone())));
    }
}
