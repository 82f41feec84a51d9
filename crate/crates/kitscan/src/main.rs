//! kitscan: scan phishing kits, export feature matrices, train/evaluate
//! classifiers, profile authors, and generate synthetic test corpora.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kitscan::authors::load_name_list;
use kitscan::evaluation::{
    render_table, run_scenario1, run_scenario2, run_scenario3, write_json_report,
    write_table_report, TargetLabel, Technique,
};
use kitscan::features::export_matrix;
use kitscan::ml::ClassifierKind;
use kitscan::obfuscation::FingerprintRegistry;
use kitscan::pipeline::{scan_corpus, scan_path, KitScan, ScanConfig};
use kitscan::synth::{generate_corpus, CorpusSpec, KITS_SUBDIR};
use kitscan::SCHEMA_VERSION;

#[derive(Parser)]
#[command(name = "kitscan", version, about = "Phishing-kit static analysis and ML toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config-file overrides; files absent from the config dir fall back to
/// compiled-in defaults.
#[derive(Args, Clone)]
struct ConfigOpts {
    /// Watchlist keywords file (one per line)
    #[arg(long)]
    watchlist: Option<PathBuf>,
    /// Brand tokens file (one per line)
    #[arg(long)]
    brands: Option<PathBuf>,
    /// Obfuscator fingerprint registry (JSON)
    #[arg(long)]
    fingerprints: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a kit (archive or directory) or a corpus directory
    Scan {
        path: PathBuf,
        /// Treat the path as a corpus of kits rather than a single kit
        #[arg(long)]
        corpus: bool,
        /// Worker threads for corpus scans (0 = automatic)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Write JSON-lines output here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigOpts,
    },
    /// Export the labeled feature matrix of a corpus as CSV
    Features {
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        config: ConfigOpts,
    },
    /// Run an evaluation scenario over a feature matrix
    Evaluate {
        matrix: PathBuf,
        /// s1 | s2 | s3
        #[arg(long)]
        scenario: String,
        /// evasive | obfuscated (s1/s2; s3 derives it from --exclude)
        #[arg(long, default_value = "evasive")]
        target: String,
        /// Technique to exclude (s3 only), e.g. eval or ev_htaccess
        #[arg(long)]
        exclude: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the JSON report here
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the plain-text table here (also printed to stdout)
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Profile author signatures across a corpus
    Authors {
        corpus: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Names always kept (one per line)
        #[arg(long)]
        allowlist: Option<PathBuf>,
        /// Names always dropped (one per line)
        #[arg(long)]
        denylist: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigOpts,
    },
    /// Generate a synthetic corpus plus ground-truth manifest
    GenCorpus {
        /// Corpus spec (JSON); see CorpusSpec
        spec: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// Resolve a config file: explicit flag, else KITSCAN_CONFIG_DIR/<name>.
fn config_file(explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
    if let Some(path) = explicit {
        return Some(path.clone());
    }
    let dir = std::env::var_os("KITSCAN_CONFIG_DIR")?;
    let candidate = Path::new(&dir).join(name);
    candidate.exists().then_some(candidate)
}

fn build_scan_config(opts: &ConfigOpts) -> Result<ScanConfig, String> {
    let mut cfg = ScanConfig::default();
    if let Some(path) = config_file(&opts.watchlist, "watchlist.txt") {
        cfg.evasion = cfg
            .evasion
            .with_watchlist_file(&path)
            .map_err(|e| format!("watchlist {}: {e}", path.display()))?;
    }
    if let Some(path) = config_file(&opts.brands, "brands.txt") {
        cfg.features = cfg
            .features
            .with_brands_file(&path)
            .map_err(|e| format!("brands {}: {e}", path.display()))?;
    }
    if let Some(path) = config_file(&opts.fingerprints, "fingerprints.json") {
        cfg.registry = FingerprintRegistry::load(&path)
            .map_err(|e| format!("fingerprints {}: {e}", path.display()))?;
    }
    Ok(cfg)
}

fn kit_report(scan: &KitScan) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kit_id": scan.sample.kit_id,
        "is_evasive": scan.sample.labels.evasive,
        "is_obfuscated": scan.sample.labels.obfuscated,
        "evasion": scan.evasion,
        "obfuscation": scan.obfuscation,
        "signatures": scan.signatures,
        "features": scan.sample.features,
    })
}

fn write_lines(lines: &[String], output: &Option<PathBuf>) -> Result<(), String> {
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    match output {
        Some(path) => std::fs::write(path, body).map_err(|e| e.to_string()),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| e.to_string()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Scan {
            path,
            corpus,
            jobs,
            output,
            config,
        } => {
            let cfg = build_scan_config(&config)?;
            if corpus {
                let scan = scan_corpus(&path, &cfg, jobs).map_err(|e| e.to_string())?;
                for warning in &scan.warnings {
                    eprintln!("{}", json!({"kit_id": warning.kit_id, "warning": warning.warning}));
                }
                let mut lines: Vec<String> =
                    scan.kits.iter().map(|k| kit_report(k).to_string()).collect();
                for failure in &scan.failures {
                    lines.push(
                        json!({
                            "schema_version": SCHEMA_VERSION,
                            "kit_id": failure.kit_id,
                            "error": failure.error,
                        })
                        .to_string(),
                    );
                }
                write_lines(&lines, &output)?;
                Ok(if scan.failures.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                })
            } else {
                let scan = scan_path(&path, &cfg).map_err(|e| e.to_string())?;
                for warning in &scan.warnings {
                    eprintln!("{}", json!({"kit_id": warning.kit_id, "warning": warning.warning}));
                }
                write_lines(&[kit_report(&scan).to_string()], &output)?;
                Ok(ExitCode::SUCCESS)
            }
        }

        Command::Features {
            corpus,
            output,
            jobs,
            config,
        } => {
            let cfg = build_scan_config(&config)?;
            let scan = scan_corpus(&corpus, &cfg, jobs).map_err(|e| e.to_string())?;
            let samples: Vec<_> = scan.kits.iter().map(|k| k.sample.clone()).collect();
            export_matrix(&samples, &output).map_err(|e| e.to_string())?;
            for failure in &scan.failures {
                eprintln!("{}", json!({"kit_id": failure.kit_id, "error": failure.error}));
            }
            Ok(if scan.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }

        Command::Evaluate {
            matrix,
            scenario,
            target,
            exclude,
            seed,
            report,
            table,
        } => {
            let samples = kitscan::features::load_matrix(&matrix).map_err(|e| e.to_string())?;
            let target = TargetLabel::parse(&target)
                .ok_or_else(|| format!("unknown target {target:?}"))?;
            let result = match scenario.to_ascii_lowercase().as_str() {
                "s1" => run_scenario1(&samples, target, &ClassifierKind::ALL, seed),
                "s2" => run_scenario2(&samples, target, &ClassifierKind::ALL, seed),
                "s3" => {
                    let name = exclude
                        .as_deref()
                        .ok_or("scenario s3 requires --exclude <technique>")?;
                    let technique = Technique::parse(name)
                        .ok_or_else(|| format!("unknown technique {name:?}"))?;
                    run_scenario3(&samples, technique, &ClassifierKind::ALL, seed)
                }
                other => return Err(format!("unknown scenario {other:?}")),
            }
            .map_err(|e| e.to_string())?;
            if let Some(path) = &report {
                write_json_report(&result, path).map_err(|e| e.to_string())?;
            }
            if let Some(path) = &table {
                write_table_report(&result, path).map_err(|e| e.to_string())?;
            }
            print!("{}", render_table(&result));
            Ok(ExitCode::SUCCESS)
        }

        Command::Authors {
            corpus,
            top,
            jobs,
            allowlist,
            denylist,
            config,
        } => {
            let cfg = build_scan_config(&config)?;
            let scan = scan_corpus(&corpus, &cfg, jobs).map_err(|e| e.to_string())?;
            let allow = match config_file(&allowlist, "allowlist.txt") {
                Some(p) => load_name_list(&p).map_err(|e| e.to_string())?,
                None => BTreeSet::new(),
            };
            let deny = match config_file(&denylist, "denylist.txt") {
                Some(p) => load_name_list(&p).map_err(|e| e.to_string())?,
                None => BTreeSet::new(),
            };
            let records: Vec<_> = scan
                .kits
                .iter()
                .map(|k| kitscan::authors::KitSignatureRecord {
                    kit_id: k.sample.kit_id.clone(),
                    signatures: k.sample.signatures.clone(),
                    evasive: k.sample.labels.evasive,
                    obfuscated: k.sample.labels.obfuscated,
                })
                .collect();
            let profiles = kitscan::evaluation::profile_report(&records, &allow, &deny, top);
            println!(
                "{:<24} {:>5} {:>9} {:>12}",
                "Author", "Kits", "Evasive%", "Obfuscated%"
            );
            for p in &profiles {
                println!(
                    "{:<24} {:>5} {:>8.1}% {:>11.1}%",
                    p.name,
                    p.kit_count,
                    p.evasive_rate * 100.0,
                    p.obfuscated_rate * 100.0
                );
            }
            Ok(if scan.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }

        Command::GenCorpus { spec, seed, out } => {
            let spec = CorpusSpec::from_json_file(&spec).map_err(|e| e.to_string())?;
            let manifest = generate_corpus(&spec, seed, &out).map_err(|e| e.to_string())?;
            println!(
                "{}",
                json!({
                    "schema_version": SCHEMA_VERSION,
                    "kits": manifest.records.len(),
                    "seed": seed,
                    "kits_dir": out.join(KITS_SUBDIR),
                    "manifest": out.join(kitscan::synth::MANIFEST_FILE),
                })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
