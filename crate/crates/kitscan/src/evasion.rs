//! Phase I evasion detection: .htaccess rules, robots.txt Disallow, and
//! PHP-level blacklists / external redirections. Every true flag carries at
//! least one evidence item pointing at the triggering line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::KitArchive;
use crate::lexer::PhpAnalysisBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvasionTechnique {
    Htaccess,
    RobotsTxt,
    Php,
}

impl EvasionTechnique {
    pub const ALL: [EvasionTechnique; 3] = [
        EvasionTechnique::Htaccess,
        EvasionTechnique::RobotsTxt,
        EvasionTechnique::Php,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EvasionTechnique::Htaccess => "htaccess",
            EvasionTechnique::RobotsTxt => "robots_txt",
            EvasionTechnique::Php => "php",
        }
    }
}

/// Where and why a flag fired. The excerpt is a verbatim fragment of the
/// cited line, capped at 200 characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub file: String,
    pub line: u32,
    pub rule_id: String,
    pub excerpt: String,
}

pub fn excerpt_of(text: &str) -> String {
    let first_line = text.split('\n').next().unwrap_or("");
    first_line.chars().take(200).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvasionReport {
    pub flags: BTreeMap<EvasionTechnique, bool>,
    pub evidence: Vec<Evidence>,
    pub is_evasive: bool,
}

impl EvasionReport {
    pub fn flag(&self, t: EvasionTechnique) -> bool {
        self.flags.get(&t).copied().unwrap_or(false)
    }
}

/// Tunable rule parameters. Defaults follow the documented interpretation:
/// a blacklist needs at least 3 IP/hostname literals.
#[derive(Debug, Clone)]
pub struct EvasionConfig {
    pub blacklist_min_elements: usize,
    pub watchlist: Vec<String>,
}

pub const DEFAULT_WATCHLIST: [&str; 9] = [
    "google", "phishtank", "netcraft", "kaspersky", "mcafee", "avast", "crawler", "spider", "bot",
];

impl Default for EvasionConfig {
    fn default() -> Self {
        EvasionConfig {
            blacklist_min_elements: 3,
            watchlist: DEFAULT_WATCHLIST.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl EvasionConfig {
    /// Load watchlist keywords from a plain-text file, one per line.
    pub fn with_watchlist_file(mut self, path: &std::path::Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let words: Vec<String> = text
            .lines()
            .map(|l| l.trim().to_ascii_lowercase())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if !words.is_empty() {
            self.watchlist = words;
        }
        Ok(self)
    }
}

// ---------------------------------------------------------------------------
// .htaccess
// ---------------------------------------------------------------------------

fn htaccess_rule_for_line(line: &str, file_has_deny: bool) -> Option<&'static str> {
    let trimmed = line.trim();
    if trimmed.starts_with('#') {
        return None;
    }
    let lower = trimmed.to_ascii_lowercase();
    if lower.starts_with("deny from") {
        return Some("forbid.deny_from");
    }
    if lower.starts_with("require not") {
        return Some("forbid.require_not");
    }
    if lower.starts_with("order allow,deny") {
        return Some("forbid.order_allow_deny");
    }
    if lower.starts_with("setenvif") && file_has_deny {
        return Some("forbid.setenvif_deny");
    }
    if lower.starts_with("redirect ") {
        return Some("redirect.redirect");
    }
    if lower.starts_with("redirectmatch") {
        return Some("redirect.redirectmatch");
    }
    if lower.starts_with("rewriterule") {
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let target_http = fields
            .get(2)
            .map(|t| t.to_ascii_lowercase().starts_with("http"))
            .unwrap_or(false);
        let flags_r = fields
            .get(3)
            .map(|f| {
                f.trim_matches(['[', ']'])
                    .split(',')
                    .any(|fl| fl == "R" || fl.starts_with("R="))
            })
            .unwrap_or(false);
        if target_http || flags_r {
            return Some("redirect.rewrite_r");
        }
    }
    // External bounce on error pages has the same access-prevention effect.
    if lower.starts_with("errordocument") {
        let fields: Vec<&str> = lower.split_whitespace().collect();
        if matches!(fields.get(1), Some(&"403") | Some(&"404"))
            && fields.get(2).map(|t| t.starts_with("http")).unwrap_or(false)
        {
            return Some("redirect.errordocument");
        }
    }
    None
}

pub fn detect_htaccess(kit: &KitArchive) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();
    for entry in kit.entries_named(".htaccess") {
        let text = entry.text();
        let has_deny = text.lines().any(|l| {
            let t = l.trim();
            !t.starts_with('#') && t.to_ascii_lowercase().contains("deny")
        });
        for (idx, line) in text.lines().enumerate() {
            if let Some(rule_id) = htaccess_rule_for_line(line, has_deny) {
                evidence.push(Evidence {
                    file: entry.relative_path.clone(),
                    line: idx as u32 + 1,
                    rule_id: rule_id.to_string(),
                    excerpt: excerpt_of(line),
                });
            }
        }
    }
    (!evidence.is_empty(), evidence)
}

// ---------------------------------------------------------------------------
// robots.txt
// ---------------------------------------------------------------------------

pub fn detect_robots(kit: &KitArchive) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();
    for entry in kit.entries_named("robots.txt") {
        for (idx, line) in entry.text().lines().enumerate() {
            let trimmed = line.trim();
            let lower = trimmed.to_ascii_lowercase();
            if let Some(value) = lower.strip_prefix("disallow:") {
                // an empty value permits all crawling
                if !value.trim().is_empty() {
                    evidence.push(Evidence {
                        file: entry.relative_path.clone(),
                        line: idx as u32 + 1,
                        rule_id: "robots.disallow".to_string(),
                        excerpt: excerpt_of(line),
                    });
                }
            }
        }
    }
    (!evidence.is_empty(), evidence)
}

// ---------------------------------------------------------------------------
// PHP-level evasion
// ---------------------------------------------------------------------------

/// Dotted-quad IPv4, optionally with a /0-32 CIDR suffix.
pub fn is_ipv4_or_cidr(s: &str) -> bool {
    let (addr, suffix) = match s.split_once('/') {
        Some((a, p)) => (a, Some(p)),
        None => (s, None),
    };
    if let Some(p) = suffix {
        match p.parse::<u8>() {
            Ok(v) if v <= 32 => {}
            _ => return false,
        }
    }
    let octets: Vec<&str> = addr.split('.').collect();
    if octets.len() != 4 {
        return false;
    }
    octets.iter().all(|o| {
        !o.is_empty() && o.len() <= 3 && o.chars().all(|c| c.is_ascii_digit()) && o.parse::<u16>().map(|v| v <= 255).unwrap_or(false)
    })
}

/// Dotted hostname with an alphabetic top-level label of length >= 2.
pub fn is_hostname(s: &str) -> bool {
    if s.len() > 253 || !s.contains('.') {
        return false;
    }
    let labels: Vec<&str> = s.split('.').collect();
    if labels.len() < 2 {
        return false;
    }
    let tld = labels.last().unwrap();
    if tld.len() < 2 || !tld.chars().all(|c| c.is_ascii_alphabetic()) {
        return false;
    }
    labels.iter().all(|l| {
        !l.is_empty()
            && !l.starts_with('-')
            && !l.ends_with('-')
            && l.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
    })
}

pub fn contains_watchlist_keyword(s: &str, watchlist: &[String]) -> bool {
    let lower = s.to_ascii_lowercase();
    watchlist.iter().any(|k| lower.contains(k.as_str()))
}

fn is_absolute_http_location(literal: &str) -> bool {
    let lower = literal.to_ascii_lowercase();
    lower.starts_with("location:") && (lower.contains("http://") || lower.contains("https://"))
}

pub fn detect_php_evasion(bundle: &PhpAnalysisBundle, config: &EvasionConfig) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();

    for array in &bundle.string_arrays {
        let ip_count = array.elements.iter().filter(|e| is_ipv4_or_cidr(e)).count();
        if ip_count >= config.blacklist_min_elements {
            evidence.push(Evidence {
                file: array.file.clone(),
                line: array.line,
                rule_id: "php.ip_blacklist".to_string(),
                excerpt: excerpt_of(&array.raw_first),
            });
            continue;
        }
        let host_count = array.elements.iter().filter(|e| is_hostname(e)).count();
        let keyword_hit = array
            .elements
            .iter()
            .any(|e| contains_watchlist_keyword(e, &config.watchlist));
        if host_count >= config.blacklist_min_elements || keyword_hit {
            evidence.push(Evidence {
                file: array.file.clone(),
                line: array.line,
                rule_id: "php.hostname_blacklist".to_string(),
                excerpt: excerpt_of(&array.raw_first),
            });
        }
    }

    for call in &bundle.call_sites {
        match call.callee.as_str() {
            "header" => {
                for (lit, raw) in call.arg_literals.iter().zip(&call.arg_literal_raws) {
                    if is_absolute_http_location(lit) {
                        evidence.push(Evidence {
                            file: call.file.clone(),
                            line: call.line,
                            rule_id: "php.redirect_external".to_string(),
                            excerpt: excerpt_of(raw),
                        });
                        break;
                    }
                }
            }
            "http_redirect" => {
                evidence.push(Evidence {
                    file: call.file.clone(),
                    line: call.line,
                    rule_id: "php.http_redirect".to_string(),
                    excerpt: excerpt_of(&call.callee),
                });
            }
            _ => {}
        }
    }

    (!evidence.is_empty(), evidence)
}

/// Aggregate the three detectors into one report.
pub fn detect_evasion(
    kit: &KitArchive,
    bundle: &PhpAnalysisBundle,
    config: &EvasionConfig,
) -> EvasionReport {
    let (ht, ht_ev) = detect_htaccess(kit);
    let (rb, rb_ev) = detect_robots(kit);
    let (php, php_ev) = detect_php_evasion(bundle, config);

    let mut flags = BTreeMap::new();
    flags.insert(EvasionTechnique::Htaccess, ht);
    flags.insert(EvasionTechnique::RobotsTxt, rb);
    flags.insert(EvasionTechnique::Php, php);

    let mut evidence = Vec::new();
    evidence.extend(ht_ev);
    evidence.extend(rb_ev);
    evidence.extend(php_ev);

    EvasionReport {
        is_evasive: ht || rb || php,
        flags,
        evidence,
    }
}
