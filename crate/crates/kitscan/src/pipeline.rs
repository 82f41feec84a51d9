//! End-to-end scan pipeline: ingest a kit, run the detectors, extract the
//! feature vector and author signatures. Used by the CLI and the corpus
//! verification tooling.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::authors::{extract_signatures, AuthorSignature};
use crate::evasion::{detect_evasion, EvasionConfig, EvasionReport};
use crate::features::{extract_features, label_kit, FeatureConfig, LabeledSample};
use crate::ingest::{enumerate_corpus, load_kit, IngestError, IngestLimits, IngestWarning, KitArchive};
use crate::lexer::analyze_php;
use crate::obfuscation::{detect_obfuscation, FingerprintRegistry, ObfuscationConfig, ObfuscationReport};

/// Everything a scan needs; all parts default to the documented settings.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub limits: IngestLimits,
    pub evasion: EvasionConfig,
    pub obfuscation: ObfuscationConfig,
    pub features: FeatureConfig,
    pub registry: FingerprintRegistry,
    pub author_keywords: Vec<String>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            limits: IngestLimits::default(),
            evasion: EvasionConfig::default(),
            obfuscation: ObfuscationConfig::default(),
            features: FeatureConfig::default(),
            registry: FingerprintRegistry::default(),
            author_keywords: crate::authors::default_keywords(),
        }
    }
}

/// Full scan result for one kit.
#[derive(Debug, Clone)]
pub struct KitScan {
    pub sample: LabeledSample,
    pub evasion: EvasionReport,
    pub obfuscation: ObfuscationReport,
    pub signatures: Vec<AuthorSignature>,
    pub warnings: Vec<IngestWarning>,
}

/// Pure scan of an already-loaded kit.
pub fn scan_archive(kit: &KitArchive, cfg: &ScanConfig) -> KitScan {
    let bundle = analyze_php(kit);
    let evasion = detect_evasion(kit, &bundle, &cfg.evasion);
    let obfuscation = detect_obfuscation(kit, &bundle, &cfg.obfuscation, &cfg.registry);
    let features = extract_features(kit, &bundle, &cfg.features);
    let labels = label_kit(&evasion, &obfuscation);
    let signatures = extract_signatures(kit, &bundle, &cfg.author_keywords);
    KitScan {
        sample: LabeledSample {
            kit_id: kit.kit_id.clone(),
            features,
            labels,
            signatures: signatures.iter().map(|s| s.name.clone()).collect(),
        },
        evasion,
        obfuscation,
        signatures,
        warnings: Vec::new(),
    }
}

pub fn scan_path(path: &Path, cfg: &ScanConfig) -> Result<KitScan, IngestError> {
    let loaded = load_kit(path, &cfg.limits)?;
    let mut scan = scan_archive(&loaded.kit, cfg);
    scan.warnings = loaded.warnings;
    Ok(scan)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanFailure {
    pub kit_id: String,
    pub error: String,
}

/// Corpus scan results, ordered by kit_id regardless of thread count.
#[derive(Debug)]
pub struct CorpusScan {
    pub kits: Vec<KitScan>,
    pub failures: Vec<ScanFailure>,
    pub warnings: Vec<IngestWarning>,
}

/// Scan every kit under `root`. `jobs` = 0 uses the rayon default; per-kit
/// failures are collected, never fatal. Output order follows the sorted kit
/// list, so parallelism cannot change bytes downstream.
pub fn scan_corpus(root: &Path, cfg: &ScanConfig, jobs: usize) -> Result<CorpusScan, IngestError> {
    let (refs, mut warnings) = enumerate_corpus(root)?;
    let run = || -> Vec<Result<KitScan, ScanFailure>> {
        refs.par_iter()
            .map(|r| {
                scan_path(&r.path, cfg).map_err(|e| ScanFailure {
                    kit_id: r.kit_id.clone(),
                    error: e.to_string(),
                })
            })
            .collect()
    };
    let results = if jobs == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| IngestError::Io(std::io::Error::other(e.to_string())))?;
        pool.install(run)
    };

    let mut kits = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(mut scan) => {
                warnings.append(&mut scan.warnings);
                kits.push(scan);
            }
            Err(failure) => failures.push(failure),
        }
    }
    Ok(CorpusScan {
        kits,
        failures,
        warnings,
    })
}
