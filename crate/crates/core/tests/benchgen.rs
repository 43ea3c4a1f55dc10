// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use common::{seeded, simulate};
use htscan_core::benchgen::{
    gen_clean, gen_suite, BenchError, generate_suite, inject_trojan, SuiteConfig, Template, TrojanKind, TrojanSpec, TROJAN_PREFIX,
};
use htscan_core::eval::{load_dataset, load_labels};
use htscan_core::graph::build_graph;
use htscan_core::netlist::{emit_netlist, parse_netlist, validate, GateKind, Netlist};
use proptest::prelude::*;
use rand::Rng;

fn template() -> impl Strategy<Value = Template> {
    prop::sample::select(Template::ALL.to_vec())
}

fn spec(seed: u64) -> impl Strategy<Value = TrojanSpec> {
    prop_oneof![
        "[01]{1,3}".prop_map(move |p| TrojanSpec::input_triggered(&p, seed)),
        Just(TrojanSpec::always_on(seed)),
        (1usize..4).prop_map(move |b| TrojanSpec::state_based(b, seed)),
    ]
}

#[test]
fn templates_match_gate_count_formula() {
    for t in Template::ALL {
        for size in 1..=8 {
            let n = gen_clean(t, size, 7).unwrap();
            assert_eq!(n.instances.len(), t.gate_count(size), "{t} size {size}");
            assert!(validate(&n).is_empty(), "{t} size {size}: {:?}", validate(&n));
            assert!(build_graph(&n).unwrap().combinational_order().is_some());
        }
    }
    assert!(gen_clean(Template::Adder, 0, 0).is_err());
}

#[test]
fn adder_computes_sums() {
    let n = gen_clean(Template::Adder, 3, 0).unwrap();
    assert_eq!(n.input_ports.len(), 7);
    assert_eq!(n.output_ports.len(), 4);
    let mut rng = seeded(1);
    for _ in 0..64 {
        let (a, b, c): (u32, u32, u32) = (rng.gen_range(0..8), rng.gen_range(0..8), rng.gen_range(0..2));
        let mut vals = BTreeMap::new();
        for i in 0..3 {
            vals.insert(format!("a{i}"), (a >> i) & 1 == 1);
            vals.insert(format!("b{i}"), (b >> i) & 1 == 1);
        }
        vals.insert("cin".to_string(), c == 1);
        let v = simulate(&n, &vals, &BTreeMap::new());
        let sum: u32 = (0..3).map(|i| (v[&format!("s{i}")] as u32) << i).sum::<u32>() + ((v["cout"] as u32) << 3);
        assert_eq!(sum, a + b + c);
    }
}

fn trojan_ids(clean: &Netlist, infected: &Netlist) -> BTreeSet<String> {
    let before: BTreeSet<&str> = clean.instances.iter().map(|g| g.id.as_str()).collect();
    infected
        .instances
        .iter()
        .filter(|g| !before.contains(g.id.as_str()))
        .map(|g| g.id.clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn injection_is_labelled_and_minimal(t in template(), size in 3usize..8, host_seed in any::<u64>(), s in any::<u64>().prop_flat_map(spec)) {
        let clean = gen_clean(t, size, host_seed).unwrap();
        let lc = match inject_trojan(&clean, &s) {
            Ok(lc) => lc,
            Err(BenchError::InsufficientNets { needed, available }) => {
                prop_assert!(available < needed);
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let added = trojan_ids(&clean, &lc.netlist);
        let labels: BTreeSet<String> = lc.trojan_gate_ids.iter().cloned().collect();
        prop_assert_eq!(&added, &labels);
        prop_assert!(labels.iter().all(|id| id.starts_with(TROJAN_PREFIX)));
        prop_assert_eq!(lc.netlist.instances.len(), clean.instances.len() + labels.len());

        let splice = lc.splice.clone().unwrap();
        let mut changed = 0;
        for g in &clean.instances {
            let h = lc.netlist.instance(&g.id).unwrap();
            prop_assert_eq!((h.kind, &h.output), (g.kind, &g.output));
            let diffs: Vec<usize> = (0..g.inputs.len()).filter(|&i| g.inputs[i] != h.inputs[i]).collect();
            if !diffs.is_empty() {
                changed += 1;
                prop_assert_eq!(&g.id, &splice.gate);
                prop_assert_eq!(diffs, vec![splice.pin]);
                prop_assert_eq!(&g.inputs[splice.pin], &splice.victim);
                prop_assert_eq!(&h.inputs[splice.pin], &splice.payload_net);
            }
        }
        prop_assert_eq!(changed, 1);
        prop_assert!(validate(&lc.netlist).is_empty(), "{:?}", validate(&lc.netlist));
        let text = emit_netlist(&lc.netlist).unwrap();
        let back = parse_netlist(&text, "i.v").unwrap();
        prop_assert!(back.structurally_eq(&lc.netlist));
        prop_assert!(build_graph(&back).is_ok());
    }

    #[test]
    fn input_trigger_fires_on_pattern_only(t in template(), size in 3usize..8, host_seed in any::<u64>(), seed in any::<u64>(), pattern in "[01]{1,4}") {
        let clean = gen_clean(t, size, host_seed).unwrap();
        let lc = match inject_trojan(&clean, &TrojanSpec::input_triggered(&pattern, seed)) {
            Ok(lc) => lc,
            // Small hosts may not offer enough independent nets to tap.
            Err(BenchError::InsufficientNets { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let splice = lc.splice.clone().unwrap();
        prop_assert_eq!(lc.taps.len(), pattern.len());
        prop_assert!(!lc.taps.contains(&splice.victim));
        let inputs: BTreeMap<String, bool> = lc.netlist.input_ports.iter().map(|p| (p.name.clone(), false)).collect();
        let w = pattern.len();
        for code in 0..(1u32 << w) {
            for victim in [false, true] {
                let mut forced = BTreeMap::new();
                let mut hit = true;
                for (k, tap) in lc.taps.iter().enumerate() {
                    let bit = (code >> k) & 1 == 1;
                    hit &= bit == (pattern.as_bytes()[k] == b'1');
                    forced.insert(tap.clone(), bit);
                }
                forced.insert(splice.victim.clone(), victim);
                let v = simulate(&lc.netlist, &inputs, &forced);
                prop_assert_eq!(v[&splice.payload_net], victim ^ hit, "code {:b}", code);
            }
        }
    }
}

#[test]
fn always_on_inverts_victim() {
    let clean = gen_clean(Template::Alu, 4, 3).unwrap();
    let lc = inject_trojan(&clean, &TrojanSpec::always_on(9)).unwrap();
    let splice = lc.splice.unwrap();
    let inputs: BTreeMap<String, bool> = lc.netlist.input_ports.iter().map(|p| (p.name.clone(), true)).collect();
    for victim in [false, true] {
        let forced = BTreeMap::from([(splice.victim.clone(), victim)]);
        assert_eq!(simulate(&lc.netlist, &inputs, &forced)[&splice.payload_net], !victim);
    }
}

#[test]
fn dormant_trigger_leaves_outputs_alone() {
    // Combinational hosts only: without registers every input vector settles.
    let mut rng = seeded(4);
    for (t, pattern) in [(Template::Adder, "11"), (Template::Alu, "101"), (Template::Adder, "0110")] {
        let clean = gen_clean(t, 4, 2).unwrap();
        let lc = inject_trojan(&clean, &TrojanSpec::input_triggered(pattern, 6)).unwrap();
        let mut dormant = 0;
        for _ in 0..256 {
            let inputs: BTreeMap<String, bool> =
                clean.input_ports.iter().map(|p| (p.name.clone(), rng.gen_bool(0.5))).collect();
            let before = simulate(&clean, &inputs, &BTreeMap::new());
            let after = simulate(&lc.netlist, &inputs, &BTreeMap::new());
            let fires = lc
                .taps
                .iter()
                .zip(pattern.bytes())
                .all(|(tap, b)| before[tap] == (b == b'1'));
            if !fires {
                dormant += 1;
                for p in &clean.output_ports {
                    assert_eq!(before[&p.name], after[&p.name], "{t} output {}", p.name);
                }
            }
        }
        assert!(dormant > 0);
    }
}

#[test]
fn spec_json_shape() {
    let s = TrojanSpec::input_triggered("1011", 3);
    let json = serde_json::to_value(&s).unwrap();
    assert_eq!(json["kind"], "input_triggered");
    assert_eq!(json["pattern"], "1011");
    let back: TrojanSpec = serde_json::from_value(json).unwrap();
    assert_eq!(back, s);
    assert!(matches!(back.kind, TrojanKind::InputTriggered { .. }));
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn suite_on_disk_is_reproducible_and_labelled() {
    let config = SuiteConfig {
        clean: 6,
        infected: 9,
        seed: 42,
        ..SuiteConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = gen_suite(&config, a.path()).unwrap();
    gen_suite(&config, b.path()).unwrap();
    assert_eq!(dir_contents(a.path()), dir_contents(b.path()));

    assert_eq!(manifest.circuits.len(), 15);
    assert_eq!(manifest.circuits.iter().filter(|c| c.clean).count(), 6);
    let labels = load_labels(&a.path().join("labels.json")).unwrap();
    for entry in &manifest.circuits {
        let text = fs::read_to_string(a.path().join(&entry.path)).unwrap();
        let n = parse_netlist(&text, &entry.path).unwrap();
        assert!(validate(&n).is_empty());
        let ids: BTreeSet<String> = n
            .instances
            .iter()
            .filter(|g| g.id.starts_with(TROJAN_PREFIX))
            .map(|g| g.id.clone())
            .collect();
        let want: BTreeSet<String> = labels[&entry.name].iter().cloned().collect();
        assert_eq!(ids, want, "{}", entry.name);
        assert_eq!(entry.clean, want.is_empty());
        if n.instances.iter().any(|g| g.kind == GateKind::Dff) {
            assert!(matches!(entry.template, Template::Counter | Template::Lfsr) || !entry.clean);
        }
    }
    let circuits = load_dataset(&a.path().join("manifest.json")).unwrap();
    assert_eq!(circuits.len(), 15);
    assert_eq!(circuits.iter().filter(|c| c.is_infected()).count(), 9);
}

#[test]
fn empty_and_default_suites() {
    let dir = tempfile::tempdir().unwrap();
    let empty = SuiteConfig {
        clean: 0,
        infected: 0,
        ..SuiteConfig::default()
    };
    assert!(gen_suite(&empty, dir.path()).unwrap().circuits.is_empty());

    let all = generate_suite(&SuiteConfig::default()).unwrap();
    assert_eq!(all.len(), 200);
    assert_eq!(all.iter().filter(|c| c.circuit.is_infected()).count(), 100);
    let names: BTreeSet<&str> = all.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names.len(), 200);
}
