//! Phase II: the 43-feature vector per kit plus labels derived from the
//! Phase I reports, and the CSV feature-matrix format.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evasion::{self, EvasionReport, EvasionTechnique};
use crate::ingest::{FileKind, KitArchive};
use crate::lexer::{CallSite, PhpAnalysisBundle};
use crate::obfuscation::{ObfuscationReport, ObfuscationTechnique};

pub const NUM_FEATURES: usize = 43;

/// Fixed, versioned column order of the feature vector.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    // structural counts
    "nFiles",
    "nDir",
    "nPhp",
    "nJs",
    "nTxt",
    "nExe",
    "nDll",
    "nApk",
    "nHtml",
    "nCss",
    "nPdf",
    "nMul",
    "Otherfiles",
    // relevant files
    "htaccess",
    "robots_txt",
    "admin",
    "config",
    // development frameworks
    "wordpress",
    "laravel",
    "code_ign",
    "zend",
    "httrack",
    // PHP functions
    "api_call",
    "array_hostnames",
    "array_ipaddresses",
    "form_validation",
    "deceiving_url",
    "deceiving_zipname",
    "read_file",
    "redirection",
    "random_file",
    "random_dir",
    // superglobals
    "sg_server",
    "sg_get",
    "sg_post",
    "sg_files",
    "sg_request",
    "sg_session",
    "sg_env",
    "sg_cookie",
    // exfiltration
    "mail",
    "bot_telegram",
    "write",
];

pub const TECHNIQUE_COLUMNS: [&str; 8] = [
    "ev_htaccess",
    "ev_robots_txt",
    "ev_php",
    "ob_urldecode",
    "ob_eval",
    "ob_hex",
    "ob_base64",
    "ob_obfuscator",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub evasive: bool,
    pub obfuscated: bool,
    pub evasion_techniques: BTreeSet<EvasionTechnique>,
    pub obfuscation_techniques: BTreeSet<ObfuscationTechnique>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub kit_id: String,
    pub features: FeatureVector,
    pub labels: Labels,
    pub signatures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FeatureConfig {
    /// Brand tokens for the deceiving_url / deceiving_zipname features.
    pub brand_tokens: Vec<String>,
}

pub const DEFAULT_BRANDS: [&str; 6] = ["paypal", "apple", "amazon", "chase", "office", "netflix"];

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            brand_tokens: DEFAULT_BRANDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FeatureConfig {
    pub fn with_brands_file(mut self, path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let tokens: Vec<String> = text
            .lines()
            .map(|l| l.trim().to_ascii_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if !tokens.is_empty() {
            self.brand_tokens = tokens;
        }
        Ok(self)
    }
}

fn is_file_mode(lit: &str) -> Option<char> {
    let mut chars = lit.chars();
    let first = chars.next()?;
    if lit.len() <= 3 && lit.chars().all(|c| "rwaxcebt+".contains(c)) {
        Some(first)
    } else {
        None
    }
}

fn stmt_has_random(bundle: &PhpAnalysisBundle, call: &CallSite) -> bool {
    const RANDOM: [&str; 4] = ["rand", "mt_rand", "uniqid", "md5"];
    bundle.statements[call.stmt]
        .callees
        .iter()
        .any(|c| RANDOM.contains(&c.as_str()))
}

/// Compute the fixed-order 43-feature vector. Pure function of its inputs.
pub fn extract_features(
    kit: &KitArchive,
    bundle: &PhpAnalysisBundle,
    config: &FeatureConfig,
) -> FeatureVector {
    let mut v = vec![0.0f64; NUM_FEATURES];
    let mut set = |name: &str, value: f64| {
        let idx = FEATURE_NAMES.iter().position(|n| *n == name).unwrap();
        v[idx] = value;
    };
    let flag = |b: bool| if b { 1.0 } else { 0.0 };

    // structural counts
    set("nFiles", kit.entries.len() as f64);
    set("nDir", kit.directory_count as f64);
    for (name, kind) in [
        ("nPhp", FileKind::Php),
        ("nJs", FileKind::Js),
        ("nTxt", FileKind::Txt),
        ("nExe", FileKind::Exe),
        ("nDll", FileKind::Dll),
        ("nApk", FileKind::Apk),
        ("nHtml", FileKind::Html),
        ("nCss", FileKind::Css),
        ("nPdf", FileKind::Pdf),
        ("nMul", FileKind::Multimedia),
        ("Otherfiles", FileKind::Other),
    ] {
        set(name, kit.entries_of_kind(kind).count() as f64);
    }

    // relevant files
    set("htaccess", flag(kit.entries_named(".htaccess").next().is_some()));
    set("robots_txt", flag(kit.entries_named("robots.txt").next().is_some()));
    let mut has_admin = false;
    let mut has_config = false;
    for entry in &kit.entries {
        for comp in entry.relative_path.split(['/', '!']) {
            let lower = comp.to_ascii_lowercase();
            let stem = lower.rsplit_once('.').map(|(s, _)| s).unwrap_or(&lower);
            if lower == "admin" || stem == "admin" {
                has_admin = true;
            }
            if lower.contains("config") {
                has_config = true;
            }
        }
    }
    set("admin", flag(has_admin));
    set("config", flag(has_config));

    // frameworks
    let mut texts: Vec<(&str, String)> = Vec::new();
    for entry in &kit.entries {
        if matches!(
            entry.kind,
            FileKind::Php | FileKind::Html | FileKind::Js | FileKind::Txt
        ) {
            texts.push((&entry.relative_path, entry.text().to_ascii_lowercase()));
        }
    }
    let any_text = |needle: &str| texts.iter().any(|(_, t)| t.contains(needle));
    let any_component = |want: &str| {
        kit.entries.iter().any(|e| {
            e.relative_path
                .split(['/', '!'])
                .any(|c| c.eq_ignore_ascii_case(want))
        })
    };
    set(
        "wordpress",
        flag(
            kit.entries_named("wp-config.php").next().is_some()
                || any_component("wp-content")
                || any_text("wordpress"),
        ),
    );
    set(
        "laravel",
        flag(kit.entries_named("artisan").next().is_some() || any_text("laravel")),
    );
    set(
        "code_ign",
        flag(
            any_text("codeigniter")
                || kit
                    .entries
                    .iter()
                    .any(|e| e.relative_path.to_ascii_lowercase().contains("system/core/")),
        ),
    );
    set(
        "zend",
        flag(any_text("zend framework") || any_component("zend")),
    );
    set("httrack", flag(any_text("mirrored from") && any_text("httrack")));

    // PHP function features
    let mut api_call = false;
    let mut form_validation = false;
    let mut read_file = false;
    let mut write = false;
    let mut redirection = false;
    let mut random_file = false;
    let mut random_dir = false;
    let mut mail = false;
    for call in &bundle.call_sites {
        match call.callee.as_str() {
            "curl_init" | "curl_exec" | "fsockopen" => api_call = true,
            "file_get_contents" => {
                read_file = true;
                if call.arg_literals.iter().any(|l| l.to_ascii_lowercase().contains("http")) {
                    api_call = true;
                }
                if stmt_has_random(bundle, call) {
                    random_file = true;
                }
            }
            "filter_var" | "preg_match" => {
                if bundle.statements[call.stmt].has_superglobal {
                    form_validation = true;
                }
            }
            "fopen" => {
                for lit in &call.arg_literals {
                    match is_file_mode(lit) {
                        Some('r') => read_file = true,
                        Some('w') | Some('a') => write = true,
                        _ => {}
                    }
                }
                if stmt_has_random(bundle, call) {
                    random_file = true;
                }
            }
            "fread" | "readfile" => read_file = true,
            "fwrite" => write = true,
            "file_put_contents" => {
                write = true;
                if stmt_has_random(bundle, call) {
                    random_file = true;
                }
            }
            "mkdir" => {
                if stmt_has_random(bundle, call) {
                    random_dir = true;
                }
            }
            "header" => {
                if call
                    .arg_literals
                    .iter()
                    .any(|l| l.to_ascii_lowercase().starts_with("location:"))
                {
                    redirection = true;
                }
            }
            "mail" => mail = true,
            _ => {}
        }
    }
    set("api_call", flag(api_call));
    set("form_validation", flag(form_validation));
    set("read_file", flag(read_file));
    set("write", flag(write));
    set("redirection", flag(redirection));
    set("random_file", flag(random_file));
    set("random_dir", flag(random_dir));
    set("mail", flag(mail));

    // blacklist matchers with presence threshold 1
    let any_host_array = bundle
        .string_arrays
        .iter()
        .any(|a| a.elements.iter().any(|e| evasion::is_hostname(e)));
    let any_ip_array = bundle
        .string_arrays
        .iter()
        .any(|a| a.elements.iter().any(|e| evasion::is_ipv4_or_cidr(e)));
    set("array_hostnames", flag(any_host_array));
    set("array_ipaddresses", flag(any_ip_array));

    // deceiving names: brand token in top-level directory names / archive name
    let mut top_dirs: BTreeSet<String> = BTreeSet::new();
    for entry in &kit.entries {
        if let Some((first, _)) = entry.relative_path.split_once('/') {
            top_dirs.insert(first.to_ascii_lowercase());
        }
    }
    let deceiving_url = config
        .brand_tokens
        .iter()
        .any(|b| top_dirs.iter().any(|d| d.contains(b.as_str())));
    let origin_lower = kit.origin_name.to_ascii_lowercase();
    let deceiving_zip = config.brand_tokens.iter().any(|b| origin_lower.contains(b.as_str()));
    set("deceiving_url", flag(deceiving_url));
    set("deceiving_zipname", flag(deceiving_zip));

    // superglobals
    for (name, var) in [
        ("sg_server", "$_SERVER"),
        ("sg_get", "$_GET"),
        ("sg_post", "$_POST"),
        ("sg_files", "$_FILES"),
        ("sg_request", "$_REQUEST"),
        ("sg_session", "$_SESSION"),
        ("sg_env", "$_ENV"),
        ("sg_cookie", "$_COOKIE"),
    ] {
        set(name, flag(bundle.superglobals_used.contains(var)));
    }

    // telegram bot API
    let telegram = bundle
        .string_literals
        .iter()
        .any(|l| l.decoded.to_ascii_lowercase().contains("api.telegram.org/bot"))
        || any_text("api.telegram.org/bot");
    set("bot_telegram", flag(telegram));

    FeatureVector(v)
}

/// Map the Phase I reports onto labels.
pub fn label_kit(evasion: &EvasionReport, obfuscation: &ObfuscationReport) -> Labels {
    let evasion_techniques: BTreeSet<EvasionTechnique> = EvasionTechnique::ALL
        .into_iter()
        .filter(|t| evasion.flag(*t))
        .collect();
    let obfuscation_techniques: BTreeSet<ObfuscationTechnique> = ObfuscationTechnique::ALL
        .into_iter()
        .filter(|t| obfuscation.flag(*t))
        .collect();
    Labels {
        evasive: !evasion_techniques.is_empty(),
        obfuscated: !obfuscation_techniques.is_empty(),
        evasion_techniques,
        obfuscation_techniques,
    }
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("malformed matrix at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn bool_cell(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Serialize samples into the feature-matrix CSV. Byte-deterministic for
/// identical input.
pub fn write_matrix<W: Write>(samples: &[LabeledSample], mut out: W) -> Result<(), MatrixError> {
    if samples.is_empty() {
        return Err(MatrixError::EmptySampleSet);
    }
    let mut header = vec!["kit_id".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    header.push("evasive".to_string());
    header.push("obfuscated".to_string());
    header.extend(TECHNIQUE_COLUMNS.iter().map(|s| s.to_string()));
    writeln!(out, "{}", header.join(","))?;
    for sample in samples {
        let mut row = vec![sample.kit_id.clone()];
        for v in &sample.features.0 {
            row.push(format!("{}", *v as i64));
        }
        row.push(bool_cell(sample.labels.evasive).to_string());
        row.push(bool_cell(sample.labels.obfuscated).to_string());
        for t in EvasionTechnique::ALL {
            row.push(bool_cell(sample.labels.evasion_techniques.contains(&t)).to_string());
        }
        for t in ObfuscationTechnique::ALL {
            row.push(bool_cell(sample.labels.obfuscation_techniques.contains(&t)).to_string());
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn export_matrix(samples: &[LabeledSample], destination: &Path) -> Result<(), MatrixError> {
    let mut buf = Vec::new();
    write_matrix(samples, &mut buf)?;
    std::fs::write(destination, buf)?;
    Ok(())
}

/// Parse the feature-matrix CSV back into labeled samples.
pub fn parse_matrix(text: &str) -> Result<Vec<LabeledSample>, MatrixError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(MatrixError::Malformed {
        line: 1,
        reason: "missing header".into(),
    })?;
    let expected_cols = 1 + NUM_FEATURES + 2 + TECHNIQUE_COLUMNS.len();
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() != expected_cols {
        return Err(MatrixError::Malformed {
            line: 1,
            reason: format!("expected {expected_cols} columns, found {}", cols.len()),
        });
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected_cols {
            return Err(MatrixError::Malformed {
                line: idx + 1,
                reason: format!("expected {expected_cols} columns, found {}", cells.len()),
            });
        }
        let parse_flag = |cell: &str, line: usize| -> Result<bool, MatrixError> {
            match cell {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(MatrixError::Malformed {
                    line,
                    reason: format!("flag cell must be 0/1, got {other:?}"),
                }),
            }
        };
        let mut values = Vec::with_capacity(NUM_FEATURES);
        for cell in &cells[1..1 + NUM_FEATURES] {
            let v: f64 = cell.parse().map_err(|_| MatrixError::Malformed {
                line: idx + 1,
                reason: format!("bad numeric cell {cell:?}"),
            })?;
            values.push(v);
        }
        let evasive = parse_flag(cells[1 + NUM_FEATURES], idx + 1)?;
        let obfuscated = parse_flag(cells[2 + NUM_FEATURES], idx + 1)?;
        let tech_base = 3 + NUM_FEATURES;
        let mut evasion_techniques = BTreeSet::new();
        for (i, t) in EvasionTechnique::ALL.into_iter().enumerate() {
            if parse_flag(cells[tech_base + i], idx + 1)? {
                evasion_techniques.insert(t);
            }
        }
        let mut obfuscation_techniques = BTreeSet::new();
        for (i, t) in ObfuscationTechnique::ALL.into_iter().enumerate() {
            if parse_flag(cells[tech_base + 3 + i], idx + 1)? {
                obfuscation_techniques.insert(t);
            }
        }
        samples.push(LabeledSample {
            kit_id: cells[0].to_string(),
            features: FeatureVector(values),
            labels: Labels {
                evasive,
                obfuscated,
                evasion_techniques,
                obfuscation_techniques,
            },
            signatures: Vec::new(),
        });
    }
    Ok(samples)
}

pub fn load_matrix(path: &Path) -> Result<Vec<LabeledSample>, MatrixError> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evasion::{detect_evasion, EvasionConfig};
    use crate::ingest::{classify_file, FileEntry};
    use crate::lexer::analyze_php;
    use crate::obfuscation::{detect_obfuscation, FingerprintRegistry, ObfuscationConfig};

    fn kit_named(origin: &str, files: &[(&str, &str)]) -> KitArchive {
        let entries: Vec<FileEntry> = files
            .iter()
            .map(|(p, c)| FileEntry {
                relative_path: p.to_string(),
                kind: classify_file(p, c.as_bytes()),
                size_bytes: c.len() as u64,
                content: c.as_bytes().to_vec(),
            })
            .collect();
        let mut dirs = BTreeSet::new();
        for e in &entries {
            let mut idx = 0;
            let p = &e.relative_path;
            while let Some(pos) = p[idx..].find('/') {
                dirs.insert(p[..idx + pos].to_string());
                idx += pos + 1;
            }
        }
        KitArchive {
            kit_id: origin.trim_end_matches(".zip").to_string(),
            origin_name: origin.to_string(),
            entries,
            directory_count: dirs.len(),
        }
    }

    fn kit(files: &[(&str, &str)]) -> KitArchive {
        kit_named("t.zip", files)
    }

    fn features(k: &KitArchive) -> FeatureVector {
        let bundle = analyze_php(k);
        extract_features(k, &bundle, &FeatureConfig::default())
    }

    #[test]
    fn structural_counts() {
        let k = kit(&[("a.php", "<?php"), ("b.js", "x"), ("sub/c.html", "<p>")]);
        let f = features(&k);
        assert_eq!(f.get("nFiles"), Some(3.0));
        assert_eq!(f.get("nDir"), Some(1.0));
        assert_eq!(f.get("nPhp"), Some(1.0));
        assert_eq!(f.get("nJs"), Some(1.0));
        assert_eq!(f.get("nHtml"), Some(1.0));
        assert_eq!(f.get("nCss"), Some(0.0));
        // count consistency
        let kinds_sum: f64 = [
            "nPhp", "nJs", "nTxt", "nExe", "nDll", "nApk", "nHtml", "nCss", "nPdf", "nMul",
            "Otherfiles",
        ]
        .iter()
        .map(|n| f.get(n).unwrap())
        .sum();
        assert_eq!(kinds_sum, f.get("nFiles").unwrap());
    }

    #[test]
    fn marker_features() {
        let k = kit(&[
            ("wp-content/theme.php", "<?php"),
            ("admin/login.php", "<?php"),
            ("includes/config.inc", "x"),
        ]);
        let f = features(&k);
        assert_eq!(f.get("wordpress"), Some(1.0));
        assert_eq!(f.get("admin"), Some(1.0));
        assert_eq!(f.get("config"), Some(1.0));
    }

    #[test]
    fn telegram_marker() {
        let k = kit(&[(
            "send.php",
            r#"<?php $u = "https://api.telegram.org/bot123/sendMessage";"#,
        )]);
        assert_eq!(features(&k).get("bot_telegram"), Some(1.0));
    }

    #[test]
    fn function_flags() {
        let k = kit(&[(
            "a.php",
            concat!(
                "<?php mail($to, $s, $m);\n",
                "header(\"Location: next.php\");\n",
                "$h = fopen($n, \"w\");\n",
                "$c = file_get_contents(\"https://api.example.com/x\");\n",
                "if (preg_match('/x/', $_POST['e'])) {}\n",
            ),
        )]);
        let f = features(&k);
        assert_eq!(f.get("mail"), Some(1.0));
        assert_eq!(f.get("redirection"), Some(1.0));
        assert_eq!(f.get("write"), Some(1.0));
        assert_eq!(f.get("read_file"), Some(1.0));
        assert_eq!(f.get("api_call"), Some(1.0));
        assert_eq!(f.get("form_validation"), Some(1.0));
        assert_eq!(f.get("sg_post"), Some(1.0));
        assert_eq!(f.get("sg_get"), Some(0.0));
    }

    #[test]
    fn random_file_and_dir() {
        let k = kit(&[(
            "a.php",
            "<?php $f = fopen(md5(rand()) . '.txt', 'w'); mkdir(uniqid());",
        )]);
        let f = features(&k);
        assert_eq!(f.get("random_file"), Some(1.0));
        assert_eq!(f.get("random_dir"), Some(1.0));
    }

    #[test]
    fn blacklist_presence_threshold_one() {
        let k = kit(&[("a.php", r#"<?php $x = array("8.8.8.8");"#)]);
        let f = features(&k);
        assert_eq!(f.get("array_ipaddresses"), Some(1.0));
        assert_eq!(f.get("array_hostnames"), Some(0.0));
    }

    #[test]
    fn deceiving_names() {
        let k = kit_named(
            "paypal-secure.zip",
            &[("appleid/login.php", "<?php"), ("misc/readme.txt", "x")],
        );
        let f = features(&k);
        assert_eq!(f.get("deceiving_zipname"), Some(1.0));
        assert_eq!(f.get("deceiving_url"), Some(1.0));
        let neutral = kit_named("kit42.zip", &[("site/login.php", "<?php")]);
        let f = features(&neutral);
        assert_eq!(f.get("deceiving_zipname"), Some(0.0));
        assert_eq!(f.get("deceiving_url"), Some(0.0));
    }

    #[test]
    fn labeling_rules() {
        let clean = kit(&[("i.php", "<?php echo 1;")]);
        let bundle = analyze_php(&clean);
        let er = detect_evasion(&clean, &bundle, &EvasionConfig::default());
        let or = detect_obfuscation(
            &clean,
            &bundle,
            &ObfuscationConfig::default(),
            &FingerprintRegistry::default(),
        );
        let labels = label_kit(&er, &or);
        assert!(!labels.evasive && !labels.obfuscated);
        assert!(labels.evasion_techniques.is_empty());

        let robots = kit(&[("robots.txt", "Disallow: /\n")]);
        let bundle = analyze_php(&robots);
        let er = detect_evasion(&robots, &bundle, &EvasionConfig::default());
        let or = detect_obfuscation(
            &robots,
            &bundle,
            &ObfuscationConfig::default(),
            &FingerprintRegistry::default(),
        );
        let labels = label_kit(&er, &or);
        assert!(labels.evasive);
        assert_eq!(labels.evasion_techniques.len(), 1);
        assert!(labels.evasion_techniques.contains(&EvasionTechnique::RobotsTxt));
    }

    #[test]
    fn feature_label_consistency_htaccess() {
        let k = kit(&[(".htaccess", "deny from 1.2.3.4\n")]);
        let bundle = analyze_php(&k);
        let er = detect_evasion(&k, &bundle, &EvasionConfig::default());
        assert!(er.flag(EvasionTechnique::Htaccess));
        let f = extract_features(&k, &bundle, &FeatureConfig::default());
        assert_eq!(f.get("htaccess"), Some(1.0));
    }

    fn sample(id: &str) -> LabeledSample {
        LabeledSample {
            kit_id: id.to_string(),
            features: FeatureVector((0..NUM_FEATURES).map(|i| (i % 3) as f64).collect()),
            labels: Labels {
                evasive: true,
                obfuscated: false,
                evasion_techniques: [EvasionTechnique::RobotsTxt].into_iter().collect(),
                obfuscation_techniques: BTreeSet::new(),
            },
            signatures: vec![],
        }
    }

    #[test]
    fn matrix_roundtrip_and_determinism() {
        let samples = vec![sample("a"), sample("b")];
        let mut buf1 = Vec::new();
        write_matrix(&samples, &mut buf1).unwrap();
        let text = String::from_utf8(buf1.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().ends_with(",1,0,0,1,0,0,0,0,0,0"));

        let parsed = parse_matrix(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].kit_id, "a");
        assert_eq!(parsed[0].features, samples[0].features);
        assert_eq!(parsed[0].labels, samples[0].labels);

        let mut buf2 = Vec::new();
        write_matrix(&samples, &mut buf2).unwrap();
        assert_eq!(buf1, buf2);
    }

    #[test]
    fn empty_sample_set_rejected() {
        assert!(matches!(
            write_matrix(&[], &mut Vec::new()),
            Err(MatrixError::EmptySampleSet)
        ));
    }

    #[test]
    fn malformed_matrix_rejected() {
        assert!(parse_matrix("kit_id,oops\nx,1\n").is_err());
        let samples = vec![sample("a")];
        let mut buf = Vec::new();
        write_matrix(&samples, &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("short,row\n");
        assert!(matches!(
            parse_matrix(&text),
            Err(MatrixError::Malformed { .. })
        ));
    }
}
