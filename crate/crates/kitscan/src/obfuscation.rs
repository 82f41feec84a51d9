//! Phase I obfuscation detection: eval-style dynamic execution, urldecode
//! abuse, hexadecimal assignments, base64 payloads, and known obfuscator
//! tool fingerprints.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::GeneralPurpose;
use base64::engine::{DecodePaddingMode, GeneralPurposeConfig};
use base64::{alphabet, Engine};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evasion::{excerpt_of, Evidence};
use crate::ingest::{FileKind, KitArchive};
use crate::lexer::PhpAnalysisBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObfuscationTechnique {
    UrlDecode,
    Eval,
    Hex,
    Base64,
    ObfuscatorTool,
}

impl ObfuscationTechnique {
    pub const ALL: [ObfuscationTechnique; 5] = [
        ObfuscationTechnique::UrlDecode,
        ObfuscationTechnique::Eval,
        ObfuscationTechnique::Hex,
        ObfuscationTechnique::Base64,
        ObfuscationTechnique::ObfuscatorTool,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObfuscationTechnique::UrlDecode => "urldecode",
            ObfuscationTechnique::Eval => "eval",
            ObfuscationTechnique::Hex => "hex",
            ObfuscationTechnique::Base64 => "base64",
            ObfuscationTechnique::ObfuscatorTool => "obfuscator_tool",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObfuscationReport {
    pub flags: BTreeMap<ObfuscationTechnique, bool>,
    pub evidence: Vec<Evidence>,
    pub is_obfuscated: bool,
}

impl ObfuscationReport {
    pub fn flag(&self, t: ObfuscationTechnique) -> bool {
        self.flags.get(&t).copied().unwrap_or(false)
    }
}

/// Thresholds that separate obfuscation from ordinary templating.
#[derive(Debug, Clone)]
pub struct ObfuscationConfig {
    pub min_percent_escapes: usize,
    pub min_hex_escapes: usize,
    pub min_base64_len: usize,
}

impl Default for ObfuscationConfig {
    fn default() -> Self {
        ObfuscationConfig {
            min_percent_escapes: 5,
            min_hex_escapes: 8,
            min_base64_len: 128,
        }
    }
}

// ---------------------------------------------------------------------------
// Fingerprint registry
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum RegistryLoadError {
    #[error("cannot read registry file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed registry JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("registry entry {tool_name:?}: invalid pattern: {source}")]
    BadPattern {
        tool_name: String,
        source: regex::Error,
    },
    #[error("registry entry {0:?}: duplicate tool name")]
    DuplicateTool(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FingerprintEntry {
    pub tool_name: String,
    pub pattern: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct ObfuscatorFingerprint {
    pub tool_name: String,
    pub regex: Regex,
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct FingerprintRegistry {
    pub entries: Vec<ObfuscatorFingerprint>,
}

const SEED_REGISTRY: &str = r#"[
  {"tool_name":"FOPO","pattern":"(?i)obfuscation provided by\\s+fopo|fopo obfuscator","description":"Free Online PHP Obfuscator banner"},
  {"tool_name":"ionCube","pattern":"ionCube Loader|extension_loaded\\('ionCube","description":"ionCube loader stub"},
  {"tool_name":"ZendGuard","pattern":"Zend \\d{4}[0-9]*\\n|zend_loader_file_encoded","description":"Zend-encoded file preamble"},
  {"tool_name":"GenericProtected","pattern":"(?i)this file is protected by","description":"generic protection banner"},
  {"tool_name":"PhpEncode","pattern":"(?i)encoded by php ?encode","description":"phpencode.org banner"}
]"#;

impl FingerprintRegistry {
    pub fn from_entries(entries: Vec<FingerprintEntry>) -> Result<Self, RegistryLoadError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut compiled = Vec::new();
        for entry in entries {
            if !seen.insert(entry.tool_name.clone()) {
                return Err(RegistryLoadError::DuplicateTool(entry.tool_name));
            }
            let regex = Regex::new(&entry.pattern).map_err(|source| {
                RegistryLoadError::BadPattern {
                    tool_name: entry.tool_name.clone(),
                    source,
                }
            })?;
            compiled.push(ObfuscatorFingerprint {
                tool_name: entry.tool_name,
                regex,
                description: entry.description,
            });
        }
        Ok(FingerprintRegistry { entries: compiled })
    }

    pub fn load(path: &Path) -> Result<Self, RegistryLoadError> {
        let text = std::fs::read_to_string(path)?;
        let entries: Vec<FingerprintEntry> = serde_json::from_str(&text)?;
        Self::from_entries(entries)
    }
}

impl Default for FingerprintRegistry {
    fn default() -> Self {
        let entries: Vec<FingerprintEntry> =
            serde_json::from_str(SEED_REGISTRY).expect("seed registry parses");
        Self::from_entries(entries).expect("seed registry compiles")
    }
}

// ---------------------------------------------------------------------------
// Detectors
// ---------------------------------------------------------------------------

/// Trailing modifiers of a PCRE literal like "/x/e" or "#p#ie".
fn preg_modifiers(pattern: &str) -> &str {
    let mut chars = pattern.chars();
    let Some(delim) = chars.next() else { return "" };
    if delim.is_ascii_alphanumeric() || delim == '\\' || delim.is_whitespace() {
        return "";
    }
    let close = match delim {
        '(' => ')',
        '[' => ']',
        '{' => '}',
        '<' => '>',
        d => d,
    };
    match pattern.rfind(close) {
        Some(idx) if idx > 0 => &pattern[idx + close.len_utf8()..],
        _ => "",
    }
}

pub fn detect_eval(bundle: &PhpAnalysisBundle) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();
    for call in &bundle.call_sites {
        match call.callee.as_str() {
            "eval" => evidence.push(Evidence {
                file: call.file.clone(),
                line: call.line,
                rule_id: "obf.eval_call".to_string(),
                excerpt: "eval".to_string(),
            }),
            "preg_replace" => {
                if let Some(pat) = &call.first_arg_literal {
                    if preg_modifiers(pat).contains('e') {
                        evidence.push(Evidence {
                            file: call.file.clone(),
                            line: call.line,
                            rule_id: "obf.preg_replace_e".to_string(),
                            excerpt: excerpt_of(call.arg_literal_raws.first().map(String::as_str).unwrap_or("")),
                        });
                    }
                }
            }
            "assert" | "create_function" if call.first_arg_literal.is_some() => {
                evidence.push(Evidence {
                    file: call.file.clone(),
                    line: call.line,
                    rule_id: format!("obf.{}_literal", call.callee),
                    excerpt: excerpt_of(&call.callee),
                });
            }
            _ => {}
        }
    }
    (!evidence.is_empty(), evidence)
}

fn percent_escape_count(s: &str) -> usize {
    let bytes = s.as_bytes();
    let mut count = 0;
    let mut i = 0;
    while i + 2 < bytes.len() {
        if bytes[i] == b'%'
            && bytes[i + 1].is_ascii_hexdigit()
            && bytes[i + 2].is_ascii_hexdigit()
        {
            count += 1;
            i += 3;
        } else {
            i += 1;
        }
    }
    count
}

pub fn detect_urldecode(
    bundle: &PhpAnalysisBundle,
    config: &ObfuscationConfig,
) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();
    for call in &bundle.call_sites {
        if call.callee != "urldecode" && call.callee != "rawurldecode" {
            continue;
        }
        let dense = call
            .arg_literals
            .iter()
            .zip(&call.arg_literal_raws)
            .find(|(lit, _)| percent_escape_count(lit) >= config.min_percent_escapes);
        if let Some((_, raw)) = dense {
            evidence.push(Evidence {
                file: call.file.clone(),
                line: call.line,
                rule_id: "obf.urldecode_dense".to_string(),
                excerpt: excerpt_of(raw),
            });
            continue;
        }
        let stmt = &bundle.statements[call.stmt];
        if stmt.callees.contains("eval") {
            evidence.push(Evidence {
                file: call.file.clone(),
                line: call.line,
                rule_id: "obf.urldecode_with_eval".to_string(),
                excerpt: excerpt_of(&call.callee),
            });
        }
    }
    (!evidence.is_empty(), evidence)
}

pub fn detect_hex(bundle: &PhpAnalysisBundle, config: &ObfuscationConfig) -> (bool, Vec<Evidence>) {
    let run = Regex::new(&format!(
        r"(?:\\x[0-9A-Fa-f]{{2}}){{{},}}",
        config.min_hex_escapes
    ))
    .expect("hex run pattern");
    let all_hex = Regex::new(r#"^"(?:\\x[0-9A-Fa-f]{2})+"$"#).expect("hex name pattern");

    let mut evidence = Vec::new();
    for lit in &bundle.string_literals {
        if lit.raw.starts_with('"') && run.is_match(&lit.raw) {
            evidence.push(Evidence {
                file: lit.file.clone(),
                line: lit.line,
                rule_id: "obf.hex_run".to_string(),
                excerpt: excerpt_of(&lit.raw),
            });
        }
    }
    for name in &bundle.dynamic_string_names {
        if all_hex.is_match(&name.raw) {
            evidence.push(Evidence {
                file: name.file.clone(),
                line: name.line,
                rule_id: "obf.hex_dynamic_name".to_string(),
                excerpt: excerpt_of(&name.raw),
            });
        }
    }
    (!evidence.is_empty(), evidence)
}

fn base64_engine() -> GeneralPurpose {
    GeneralPurpose::new(
        &alphabet::STANDARD,
        GeneralPurposeConfig::new().with_decode_padding_mode(DecodePaddingMode::Indifferent),
    )
}

pub fn is_decodable_base64(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'+' || b == b'/' || b == b'=')
        && base64_engine().decode(s).is_ok()
}

pub fn detect_base64(
    bundle: &PhpAnalysisBundle,
    config: &ObfuscationConfig,
) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();
    for call in &bundle.call_sites {
        if call.callee == "base64_decode" {
            evidence.push(Evidence {
                file: call.file.clone(),
                line: call.line,
                rule_id: "obf.base64_decode_call".to_string(),
                excerpt: "base64_decode".to_string(),
            });
        }
    }
    for lit in &bundle.string_literals {
        if lit.decoded.len() >= config.min_base64_len && is_decodable_base64(&lit.decoded) {
            evidence.push(Evidence {
                file: lit.file.clone(),
                line: lit.line,
                rule_id: "obf.base64_literal".to_string(),
                excerpt: excerpt_of(&lit.raw),
            });
        }
    }
    (!evidence.is_empty(), evidence)
}

pub fn detect_obfuscator(kit: &KitArchive, registry: &FingerprintRegistry) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();
    for entry in &kit.entries {
        if !matches!(entry.kind, FileKind::Php | FileKind::Js | FileKind::Html) {
            continue;
        }
        let text = entry.text();
        for fp in &registry.entries {
            if let Some(m) = fp.regex.find(&text) {
                let line = text[..m.start()].matches('\n').count() as u32 + 1;
                evidence.push(Evidence {
                    file: entry.relative_path.clone(),
                    line,
                    rule_id: format!("obf.tool.{}", fp.tool_name),
                    excerpt: excerpt_of(m.as_str()),
                });
            }
        }
    }
    // result must not depend on registry entry order
    evidence.sort_by(|a, b| (&a.file, a.line, &a.rule_id).cmp(&(&b.file, b.line, &b.rule_id)));
    (!evidence.is_empty(), evidence)
}

/// Aggregate the five detectors into one report.
pub fn detect_obfuscation(
    kit: &KitArchive,
    bundle: &PhpAnalysisBundle,
    config: &ObfuscationConfig,
    registry: &FingerprintRegistry,
) -> ObfuscationReport {
    let (url, url_ev) = detect_urldecode(bundle, config);
    let (eval, eval_ev) = detect_eval(bundle);
    let (hex, hex_ev) = detect_hex(bundle, config);
    let (b64, b64_ev) = detect_base64(bundle, config);
    let (tool, tool_ev) = detect_obfuscator(kit, registry);

    let mut flags = BTreeMap::new();
    flags.insert(ObfuscationTechnique::UrlDecode, url);
    flags.insert(ObfuscationTechnique::Eval, eval);
    flags.insert(ObfuscationTechnique::Hex, hex);
    flags.insert(ObfuscationTechnique::Base64, b64);
    flags.insert(ObfuscationTechnique::ObfuscatorTool, tool);

    let mut evidence = Vec::new();
    for ev in [url_ev, eval_ev, hex_ev, b64_ev, tool_ev] {
        evidence.extend(ev);
    }

    ObfuscationReport {
        is_obfuscated: url || eval || hex || b64 || tool,
        flags,
        evidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{classify_file, FileEntry};
    use crate::lexer::analyze_php;

    fn kit(files: &[(&str, &str)]) -> KitArchive {
        KitArchive {
            kit_id: "t".into(),
            origin_name: "t".into(),
            entries: files
                .iter()
                .map(|(p, c)| FileEntry {
                    relative_path: p.to_string(),
                    kind: classify_file(p, c.as_bytes()),
                    size_bytes: c.len() as u64,
                    content: c.as_bytes().to_vec(),
                })
                .collect(),
            directory_count: 0,
        }
    }

    fn bundle_of(src: &str) -> PhpAnalysisBundle {
        analyze_php(&kit(&[("a.php", src)]))
    }

    #[test]
    fn eval_call_detected() {
        let b = bundle_of("<?php eval(base64_decode($p));");
        assert!(detect_eval(&b).0);
    }

    #[test]
    fn preg_replace_e_modifier() {
        let b = bundle_of(r#"<?php preg_replace("/x/e", $c, $s);"#);
        let (flag, ev) = detect_eval(&b);
        assert!(flag);
        assert_eq!(ev[0].rule_id, "obf.preg_replace_e");
        let clean = bundle_of(r#"<?php preg_replace("/x/i", $c, $s);"#);
        assert!(!detect_eval(&clean).0);
    }

    #[test]
    fn eval_in_comment_is_not_a_call() {
        let b = bundle_of("<?php // eval($x)\n/* eval($y) */ $a = 1;");
        assert!(!detect_eval(&b).0);
    }

    #[test]
    fn assert_with_literal_argument() {
        let b = bundle_of(r#"<?php assert("strlen('x') > 0");"#);
        assert!(detect_eval(&b).0);
        let dynamic = bundle_of("<?php assert($cond);");
        assert!(!detect_eval(&dynamic).0);
    }

    #[test]
    fn urldecode_dense_escapes() {
        let cfg = ObfuscationConfig::default();
        let b = bundle_of(r#"<?php urldecode("%65%76%61%6c%28");"#);
        assert!(detect_urldecode(&b, &cfg).0);
        let sparse = bundle_of(r#"<?php urldecode("%65%76");"#);
        assert!(!detect_urldecode(&sparse, &cfg).0);
    }

    #[test]
    fn urldecode_of_input_alone_is_fine() {
        let b = bundle_of("<?php urldecode($_GET['q']);");
        assert!(!detect_urldecode(&b, &ObfuscationConfig::default()).0);
    }

    #[test]
    fn urldecode_cooccurring_with_eval() {
        let b = bundle_of("<?php eval(urldecode($s));");
        let (flag, ev) = detect_urldecode(&b, &ObfuscationConfig::default());
        assert!(flag);
        assert_eq!(ev[0].rule_id, "obf.urldecode_with_eval");
    }

    #[test]
    fn hex_run_threshold() {
        let cfg = ObfuscationConfig::default();
        let b = bundle_of(r#"<?php $f = "\x47\x4c\x4f\x42\x41\x4c\x53\x00";"#);
        assert!(detect_hex(&b, &cfg).0);
        let below = bundle_of(r#"<?php $s = "\x0A";"#);
        assert!(!detect_hex(&below, &cfg).0);
    }

    #[test]
    fn hex_dynamic_name() {
        let b = bundle_of(r#"<?php ${"\x5f\x50\x4f\x53\x54"} = 1;"#);
        let (flag, ev) = detect_hex(&b, &ObfuscationConfig::default());
        assert!(flag);
        assert_eq!(ev[0].rule_id, "obf.hex_dynamic_name");
        // oracle: the dynamic name decodes to a real superglobal name
        assert_eq!(b.dynamic_string_names[0].decoded, "_POST");
    }

    #[test]
    fn base64_call_and_long_literal() {
        let cfg = ObfuscationConfig::default();
        assert!(detect_base64(&bundle_of(r#"<?php base64_decode("aGVsbG8=");"#), &cfg).0);

        let payload: Vec<u8> = (0u8..150).collect();
        let encoded = base64::engine::general_purpose::STANDARD.encode(&payload);
        assert!(encoded.len() >= 128);
        // round-trip oracle for the generated literal
        assert_eq!(
            base64::engine::general_purpose::STANDARD.decode(&encoded).unwrap(),
            payload
        );
        let src = format!(r#"<?php $p = "{encoded}";"#);
        assert!(detect_base64(&bundle_of(&src), &cfg).0);

        let short = "QUJDREVGR0hJSktMTU5PUFFSU1RVVldYWVphYmNkZWZnaGlqa2xtbm9wcXJzdHV2";
        assert_eq!(short.len(), 64);
        let src = format!(r#"<?php $p = "{short}";"#);
        assert!(!detect_base64(&bundle_of(&src), &cfg).0);
    }

    #[test]
    fn obfuscator_fingerprints() {
        let registry = FingerprintRegistry::default();
        let k = kit(&[("x.php", "<?php /* Obfuscation provided by FOPO */ $a=1;")]);
        let (flag, ev) = detect_obfuscator(&k, &registry);
        assert!(flag);
        assert!(ev[0].rule_id.contains("FOPO"));

        let clean = kit(&[("x.php", "<?php $a = 1;")]);
        assert!(!detect_obfuscator(&clean, &registry).0);
    }

    #[test]
    fn registry_order_does_not_matter() {
        let mut entries: Vec<FingerprintEntry> = serde_json::from_str(SEED_REGISTRY).unwrap();
        let k = kit(&[(
            "x.php",
            "<?php /* Obfuscation provided by FOPO */ // This file is protected by magic",
        )]);
        let fwd = detect_obfuscator(&k, &FingerprintRegistry::from_entries(entries.clone()).unwrap());
        entries.reverse();
        let rev = detect_obfuscator(&k, &FingerprintRegistry::from_entries(entries).unwrap());
        assert_eq!(fwd.1, rev.1);
        assert_eq!(fwd.0, rev.0);
    }

    #[test]
    fn bad_registry_pattern_is_named() {
        let entries = vec![FingerprintEntry {
            tool_name: "Broken".into(),
            pattern: "(unclosed".into(),
            description: String::new(),
        }];
        match FingerprintRegistry::from_entries(entries) {
            Err(RegistryLoadError::BadPattern { tool_name, .. }) => {
                assert_eq!(tool_name, "Broken")
            }
            other => panic!("expected BadPattern, got {other:?}"),
        }
    }

    #[test]
    fn aggregate_multi_technique() {
        let cfg = ObfuscationConfig::default();
        let registry = FingerprintRegistry::default();
        let k = kit(&[(
            "a.php",
            concat!(
                "<?php eval($p);\n",
                r#"$h = "\x41\x42\x43\x44\x45\x46\x47\x48";"#,
                "\nbase64_decode($q);\n"
            ),
        )]);
        let bundle = analyze_php(&k);
        let report = detect_obfuscation(&k, &bundle, &cfg, &registry);
        assert!(report.is_obfuscated);
        assert!(report.flag(ObfuscationTechnique::Eval));
        assert!(report.flag(ObfuscationTechnique::Hex));
        assert!(report.flag(ObfuscationTechnique::Base64));
        assert!(!report.flag(ObfuscationTechnique::UrlDecode));
        assert!(!report.flag(ObfuscationTechnique::ObfuscatorTool));
    }

    #[test]
    fn clean_kit_is_clean() {
        let cfg = ObfuscationConfig::default();
        let registry = FingerprintRegistry::default();
        let k = kit(&[("index.php", "<?php echo 'welcome'; mail($a, $b, $c);")]);
        let bundle = analyze_php(&k);
        let report = detect_obfuscation(&k, &bundle, &cfg, &registry);
        assert!(!report.is_obfuscated);
        assert!(report.evidence.is_empty());
    }
}
