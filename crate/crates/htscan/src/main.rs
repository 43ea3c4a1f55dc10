// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use htscan_core::benchgen::{gen_suite, SuiteConfig};
use htscan_core::eval::{run_eval, run_scan, run_train, summary_table, Mode, RunConfig, ScanTarget, Verdict};
use htscan_core::graph::{build_graph, to_dot};
use htscan_core::netlist::{flatten, parse_netlist};

/// Hardware Trojan detection and localization for gate-level netlists.
#[derive(Parser)]
#[command(name = "htscan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled suite of clean and infected circuits.
    Gen {
        /// Suite configuration JSON; defaults apply to missing fields.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a detector on a suite manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Model output; loss trace, held-out metrics and patterns go beside it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Scan netlists with a trained model and write per-circuit reports.
    Scan {
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        netlist: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        nn_level: Option<u8>,
        #[arg(long)]
        patterns: Option<PathBuf>,
        /// Labels JSON; adds confusion categories to reports and DOT colours.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a Graphviz file per circuit.
        #[arg(long)]
        dot: bool,
    },
    /// Score scan reports against ground-truth labels.
    Eval {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the circuit graph of a netlist.
    Graph {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        dot: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    mode: Option<Mode>,
    /// Run configuration JSON; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Leave timings out of reports so reruns are byte-identical.
    #[arg(long)]
    reproducible: bool,
}

impl RunArgs {
    fn resolve(&self, nn_level: Option<u8>) -> Result<RunConfig> {
        let mut c: RunConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.mode {
            c.mode = m;
            if m == Mode::Tree && nn_level.is_none() {
                c.nn_level = 0;
            }
        }
        if let Some(l) = nn_level {
            c.nn_level = l;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.threshold {
            c.threshold = t;
        }
        c.reproducible |= self.reproducible;
        c.check()?;
        Ok(c)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { suite, out, seed } => {
            let mut config: SuiteConfig = match &suite {
                Some(p) => read_json(p)?,
                None => SuiteConfig::default(),
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            let manifest = gen_suite(&config, &out)?;
            let infected = manifest.circuits.iter().filter(|c| !c.clean).count();
            println!(
                "wrote {} circuits ({} clean, {infected} infected) to {}",
                manifest.circuits.len(),
                manifest.circuits.len() - infected,
                out.display()
            );
        }
        Command::Train { manifest, run, out } => {
            let config = run.resolve(None)?;
            let outcome = run_train(&config, &manifest, &out)?;
            let m = &outcome.metrics;
            println!(
                "trained {} model on {} circuits, held out {}",
                config.mode,
                m.train.len(),
                m.test.len()
            );
            println!(
                "held-out circuit accuracy {:.3} precision {:.3} recall {:.3} f1 {:.3}",
                m.graph.accuracy, m.graph.precision, m.graph.recall, m.graph.f1
            );
            if let Some(n) = &m.node {
                println!(
                    "held-out node accuracy {:.3} precision {:.3} recall {:.3} f1 {:.3}",
                    n.accuracy, n.precision, n.recall, n.f1
                );
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Scan {
            netlist,
            manifest,
            model,
            run,
            nn_level,
            patterns,
            truth,
            out,
            dot,
        } => {
            let config = run.resolve(nn_level)?;
            let target = match (netlist, manifest) {
                (Some(n), _) => ScanTarget::Netlist(n),
                (None, Some(m)) => ScanTarget::Manifest(m),
                (None, None) => bail!("one of --netlist or --manifest is required"),
            };
            let summary = run_scan(
                &config,
                &model,
                patterns.as_deref(),
                &target,
                &out,
                dot,
                truth.as_deref(),
            )?;
            for r in &summary.reports {
                let verdict = match r.verdict {
                    Verdict::Trojan => "TROJAN",
                    Verdict::NonTrojan => "NON_TROJAN",
                };
                println!(
                    "{}: {verdict} flagged={} coverage={:.1}%",
                    r.circuit,
                    r.flags.len(),
                    r.coverage_at_level()
                );
                if r.verdict == Verdict::Trojan {
                    for loc in &r.locations {
                        println!("  infected node found in netlist: {} (line {})", loc.name, loc.line);
                    }
                }
            }
            for e in &summary.errors {
                eprintln!("error: {e}");
            }
            return Ok(ExitCode::from(summary.exit_code() as u8));
        }
        Command::Eval { reports, truth, out } => {
            let summary = run_eval(&reports, &truth, &out)?;
            print!("{}", summary_table(&summary));
        }
        Command::Graph { netlist, dot, json } => {
            let text = fs::read_to_string(&netlist).with_context(|| format!("reading {}", netlist.display()))?;
            let parsed = parse_netlist(&text, &netlist.display().to_string())?;
            let flat = if parsed.is_flat() { parsed } else { flatten(&parsed)? };
            let graph = build_graph(&flat)?;
            write_file(&dot, &to_dot(&graph, &BTreeMap::new()))?;
            if let Some(j) = json {
                write_file(&j, &(serde_json::to_string_pretty(&graph.to_json())? + "\n"))?;
            }
            println!("{} nodes, {} edges", graph.len(), graph.edges().len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
