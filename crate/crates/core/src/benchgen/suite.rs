// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trojan::{inject_trojan, LabeledCircuit, TrojanKind, TrojanSpec};
use super::{gen_clean_named, BenchError, Template};
use crate::netlist::emit_netlist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrojanFamily {
    InputTriggered,
    AlwaysOn,
    StateBased,
}

impl TrojanFamily {
    pub const ALL: [TrojanFamily; 3] = [
        TrojanFamily::InputTriggered,
        TrojanFamily::AlwaysOn,
        TrojanFamily::StateBased,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub clean: usize,
    pub infected: usize,
    pub templates: Vec<Template>,
    /// Inclusive bit-width range.
    pub sizes: (usize, usize),
    pub families: Vec<TrojanFamily>,
    /// Inclusive trigger-width range for input-triggered Trojans.
    pub trigger_widths: (usize, usize),
    /// Inclusive counter-width range for state-based Trojans.
    pub counter_bits: (usize, usize),
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            clean: 100,
            infected: 100,
            templates: Template::ALL.to_vec(),
            sizes: (3, 8),
            families: TrojanFamily::ALL.to_vec(),
            trigger_widths: (2, 4),
            counter_bits: (2, 4),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedCircuit {
    pub name: String,
    pub template: Template,
    pub size: usize,
    pub seed: u64,
    pub spec: Option<TrojanSpec>,
    pub circuit: LabeledCircuit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    /// Relative to the suite directory.
    pub path: String,
    pub clean: bool,
    pub template: Template,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<TrojanSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub circuits: Vec<ManifestEntry>,
}

fn pick_range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    if hi <= lo {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn draw_spec(rng: &mut ChaCha8Rng, config: &SuiteConfig, family: TrojanFamily) -> TrojanSpec {
    let seed = rng.gen::<u64>();
    match family {
        TrojanFamily::InputTriggered => {
            let w = pick_range(rng, config.trigger_widths).max(1);
            let pattern: String = (0..w).map(|_| if rng.gen::<bool>() { '1' } else { '0' }).collect();
            TrojanSpec::input_triggered(&pattern, seed)
        }
        TrojanFamily::AlwaysOn => TrojanSpec::always_on(seed),
        TrojanFamily::StateBased => TrojanSpec::state_based(pick_range(rng, config.counter_bits).max(1), seed),
    }
}

/// Builds the suite in memory: `config.clean` clean circuits followed by
/// `config.infected` infected ones, each on a freshly drawn host.
pub fn generate_suite(config: &SuiteConfig) -> Result<Vec<GeneratedCircuit>, BenchError> {
    let total = config.clean + config.infected;
    if total > 0 && config.templates.is_empty() {
        return Err(BenchError::InvalidSpec("no templates configured".into()));
    }
    if config.infected > 0 && config.families.is_empty() {
        return Err(BenchError::InvalidSpec("no Trojan families configured".into()));
    }
    if config.sizes.0 == 0 {
        return Err(BenchError::BadSize(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let template = *config.templates.choose(&mut rng).expect("templates checked");
        let size = pick_range(&mut rng, config.sizes);
        let seed = rng.gen::<u64>();
        let name = format!("c{idx:03}_{}{size}", template.name());
        let host = gen_clean_named(template, size, seed, &name)?;
        if idx < config.clean {
            out.push(GeneratedCircuit {
                name,
                template,
                size,
                seed,
                spec: None,
                circuit: LabeledCircuit::clean(host),
            });
            continue;
        }
        let family = config.families[(idx - config.clean) % config.families.len()];
        let mut spec = draw_spec(&mut rng, config, family);
        let mut attempt = inject_trojan(&host, &spec);
        // Narrow hosts may not offer enough tap candidates; shrink the trigger.
        while let Err(BenchError::InsufficientNets { available, .. }) = attempt {
            spec = match (&spec.kind, available) {
                (TrojanKind::InputTriggered { pattern }, a) if a >= 1 => {
                    TrojanSpec::input_triggered(&pattern[..a.min(pattern.len() - 1).max(1)], spec.seed)
                }
                _ => TrojanSpec::always_on(spec.seed),
            };
            attempt = inject_trojan(&host, &spec);
        }
        out.push(GeneratedCircuit {
            name,
            template,
            size,
            seed,
            spec: Some(spec),
            circuit: attempt?,
        });
    }
    Ok(out)
}

/// Writes `circuits/<name>.v`, `labels.json` and `manifest.json` under `dir`.
pub fn gen_suite(config: &SuiteConfig, dir: &Path) -> Result<Manifest, BenchError> {
    let circuits = generate_suite(config)?;
    fs::create_dir_all(dir)?;
    if !circuits.is_empty() {
        fs::create_dir_all(dir.join("circuits"))?;
    }
    let mut manifest = Manifest::default();
    let mut labels: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for c in &circuits {
        let path = format!("circuits/{}.v", c.name);
        fs::write(dir.join(&path), emit_netlist(&c.circuit.netlist)?)?;
        labels.insert(c.name.clone(), c.circuit.trojan_gate_ids.clone());
        manifest.circuits.push(ManifestEntry {
            name: c.name.clone(),
            path,
            clean: !c.circuit.is_infected(),
            template: c.template,
            size: c.size,
            spec: c.spec.clone(),
            seed: c.seed,
        });
    }
    fs::write(dir.join("labels.json"), serde_json::to_string_pretty(&labels)? + "\n")?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}
