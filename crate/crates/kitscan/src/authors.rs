//! Author-signature extraction ("coded by ...") and per-author profiles
//! joining signature counts with evasion/obfuscation rates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::{FileKind, KitArchive};
use crate::lexer::PhpAnalysisBundle;

pub const DEFAULT_KEYWORDS: [&str; 7] = [
    "coded by",
    "created by",
    "developed by",
    "made by",
    "hacked by",
    "spam by",
    "by",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorSignature {
    /// Lowercased, punctuation-trimmed, at most 40 chars.
    pub name: String,
    pub matched_keyword: String,
    pub file: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub name: String,
    pub kit_count: usize,
    pub evasive_count: usize,
    pub obfuscated_count: usize,
    pub evasive_rate: f64,
    pub obfuscated_rate: f64,
}

/// Normalize a captured name: lowercase, trim leading/trailing punctuation,
/// cap at 40 chars. Idempotent.
pub fn normalize_name(raw: &str) -> String {
    let lowered = raw.to_ascii_lowercase();
    let trimmed = lowered.trim_matches(|c: char| !c.is_alphanumeric());
    trimmed.chars().take(40).collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn capture_name(text: &str, after: usize) -> Option<(String, String)> {
    let rest = &text[after..];
    let rest = rest.trim_start_matches([' ', '\t', ':']);
    let mut end = 0;
    for c in rest.chars() {
        // name runs over word chars, dots, dashes, underscores; stops at
        // newline, quote, or tag boundary like everything else
        if is_word_char(c) || c == '.' || c == '-' {
            end += c.len_utf8();
            if end >= 40 {
                break;
            }
        } else {
            break;
        }
    }
    if end == 0 {
        return None;
    }
    let raw = &rest[..end];
    let name = normalize_name(raw);
    if name.is_empty() {
        None
    } else {
        Some((name, raw.to_string()))
    }
}

/// Find keyword occurrences at word boundaries, case-insensitive.
fn keyword_matches(text: &str, keyword: &str) -> Vec<usize> {
    let lower = text.to_ascii_lowercase();
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(keyword) {
        let start = from + pos;
        let end = start + keyword.len();
        let before_ok = start == 0
            || !lower[..start].chars().next_back().map(is_word_char).unwrap_or(false);
        let after_ok = end == lower.len()
            || !lower[end..].chars().next().map(is_word_char).unwrap_or(false);
        if before_ok && after_ok {
            out.push(end);
        }
        from = end;
    }
    out
}

fn scan_text(
    text: &str,
    file: &str,
    base_line: u32,
    in_comment: bool,
    keywords: &[String],
    out: &mut Vec<AuthorSignature>,
) {
    for keyword in keywords {
        // bare "by" matches everywhere would be pure noise
        if keyword == "by" && !in_comment {
            continue;
        }
        for end in keyword_matches(text, keyword) {
            if let Some((name, _raw)) = capture_name(text, end) {
                let line = base_line + text[..end].matches('\n').count() as u32;
                out.push(AuthorSignature {
                    name,
                    matched_keyword: keyword.clone(),
                    file: file.to_string(),
                    line,
                });
            }
        }
    }
}

/// Scan comments, string literals, and Txt/Html entries for signatures.
/// Identical names are deduplicated per kit.
pub fn extract_signatures(
    kit: &KitArchive,
    bundle: &PhpAnalysisBundle,
    keywords: &[String],
) -> Vec<AuthorSignature> {
    let mut found = Vec::new();
    for comment in &bundle.comments {
        scan_text(&comment.text, &comment.file, comment.line, true, keywords, &mut found);
    }
    for lit in &bundle.string_literals {
        scan_text(&lit.decoded, &lit.file, lit.line, false, keywords, &mut found);
    }
    for entry in &kit.entries {
        if matches!(entry.kind, FileKind::Txt | FileKind::Html) {
            scan_text(&entry.text(), &entry.relative_path, 1, false, keywords, &mut found);
        }
    }
    let mut seen = BTreeSet::new();
    found.retain(|sig| seen.insert(sig.name.clone()));
    found
}

/// One scanned kit's contribution to author profiling.
#[derive(Debug, Clone)]
pub struct KitSignatureRecord {
    pub kit_id: String,
    pub signatures: Vec<String>,
    pub evasive: bool,
    pub obfuscated: bool,
}

/// Build per-author profiles. Kits with several signatures count toward each
/// name. Sorted by kit_count descending, ties by name.
pub fn build_author_profiles(
    records: &[KitSignatureRecord],
    allowlist: &BTreeSet<String>,
    denylist: &BTreeSet<String>,
) -> Vec<AuthorProfile> {
    let mut acc: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for record in records {
        let mut names: BTreeSet<&String> = record.signatures.iter().collect();
        names.retain(|n| allowlist.contains(*n) || !denylist.contains(*n));
        for name in names {
            let entry = acc.entry(name.clone()).or_default();
            entry.0 += 1;
            if record.evasive {
                entry.1 += 1;
            }
            if record.obfuscated {
                entry.2 += 1;
            }
        }
    }
    let mut profiles: Vec<AuthorProfile> = acc
        .into_iter()
        .map(|(name, (kits, ev, ob))| AuthorProfile {
            name,
            kit_count: kits,
            evasive_count: ev,
            obfuscated_count: ob,
            evasive_rate: ev as f64 / kits as f64,
            obfuscated_rate: ob as f64 / kits as f64,
        })
        .collect();
    profiles.sort_by(|a, b| b.kit_count.cmp(&a.kit_count).then(a.name.cmp(&b.name)));
    profiles
}

/// Load an allow/deny list: plain text, one normalized name per line.
pub fn load_name_list(path: &std::path::Path) -> std::io::Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(normalize_name)
        .filter(|l| !l.is_empty())
        .collect())
}

pub fn default_keywords() -> Vec<String> {
    DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect()
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

    fn extract(files: &[(&str, &str)]) -> Vec<AuthorSignature> {
        let k = kit(files);
        let bundle = analyze_php(&k);
        extract_signatures(&k, &bundle, &default_keywords())
    }

    #[test]
    fn coded_by_in_comment() {
        let sigs = extract(&[("a.php", "<?php // coded by xbalti\n$a = 1;")]);
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].name, "xbalti");
    }

    #[test]
    fn developed_by_in_string_normalizes() {
        let sigs = extract(&[("a.php", r#"<?php $s = "Developed By EX-ROBOTOS!!!";"#)]);
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].name, "ex-robotos");
    }

    #[test]
    fn standby_is_not_a_signature() {
        let sigs = extract(&[("a.php", r#"<?php $s = "standby mode";"#)]);
        assert!(sigs.is_empty());
    }

    #[test]
    fn bare_by_only_in_comments() {
        let in_string = extract(&[("a.php", r#"<?php $s = "sorted by name";"#)]);
        assert!(in_string.is_empty());
        let in_comment = extract(&[("a.php", "<?php // by venza\n")]);
        assert_eq!(in_comment.len(), 1);
        assert_eq!(in_comment[0].name, "venza");
    }

    #[test]
    fn html_entries_are_scanned() {
        let sigs = extract(&[("index.html", "<!-- hacked by l33bo-phishers -->")]);
        assert_eq!(sigs.len(), 1);
        assert_eq!(sigs[0].name, "l33bo-phishers");
    }

    #[test]
    fn duplicate_names_deduplicated_per_kit() {
        let sigs = extract(&[(
            "a.php",
            "<?php // coded by venza\n// made by VENZA\n$x = 1;",
        )]);
        assert_eq!(sigs.len(), 1);
    }

    #[test]
    fn normalization_is_idempotent() {
        for raw in ["EX-ROBOTOS!!!", "..xbalti..", "Venza", "a_b-c.d"] {
            let once = normalize_name(raw);
            assert_eq!(normalize_name(&once), once);
        }
    }

    #[test]
    fn profile_counting() {
        let records = vec![
            KitSignatureRecord {
                kit_id: "k1".into(),
                signatures: vec!["venza".into()],
                evasive: false,
                obfuscated: false,
            },
            KitSignatureRecord {
                kit_id: "k2".into(),
                signatures: vec!["venza".into()],
                evasive: false,
                obfuscated: false,
            },
            KitSignatureRecord {
                kit_id: "k3".into(),
                signatures: vec!["venza".into(), "xbalti".into()],
                evasive: true,
                obfuscated: false,
            },
        ];
        let profiles = build_author_profiles(&records, &BTreeSet::new(), &BTreeSet::new());
        assert_eq!(profiles[0].name, "venza");
        assert_eq!(profiles[0].kit_count, 3);
        assert_eq!(profiles[0].evasive_count, 1);
        assert_eq!(profiles[1].name, "xbalti");
        assert_eq!(profiles[1].kit_count, 1);
        assert!((profiles[1].evasive_rate - 1.0).abs() < 1e-12);
        // multi-signature kits count multiply
        let total: usize = profiles.iter().map(|p| p.kit_count).sum();
        assert!(total >= records.len());
    }

    #[test]
    fn denylist_removes_allowlist_pins() {
        let records = vec![KitSignatureRecord {
            kit_id: "k1".into(),
            signatures: vec!["spamlord".into(), "keeper".into()],
            evasive: false,
            obfuscated: false,
        }];
        let mut deny = BTreeSet::new();
        deny.insert("spamlord".to_string());
        deny.insert("keeper".to_string());
        let mut allow = BTreeSet::new();
        allow.insert("keeper".to_string());
        let profiles = build_author_profiles(&records, &allow, &deny);
        assert_eq!(profiles.len(), 1);
        assert_eq!(profiles[0].name, "keeper");
    }
}
