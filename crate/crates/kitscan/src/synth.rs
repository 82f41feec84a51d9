//! Seeded generator of synthetic kit directories with a ground-truth
//! manifest. Plant templates satisfy exactly one detector rule each;
//! near-miss templates satisfy none. The manifest doubles as the oracle
//! for detector verification.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Technique;
use crate::features::{LabeledSample, TECHNIQUE_COLUMNS};

pub const KITS_SUBDIR: &str = "kits";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("kit ids differ between scan results and manifest: {0}")]
    KitIdMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureSpec {
    pub name: String,
    pub weight: f64,
}

fn default_file_count_range() -> (usize, usize) {
    (2, 6)
}

fn default_depth_range() -> (usize, usize) {
    (1, 2)
}

fn default_signature_probability() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub kit_count: usize,
    /// Keyed by technique column name (ev_htaccess … ob_obfuscator);
    /// missing keys mean probability 0.
    #[serde(default)]
    pub plant_probabilities: BTreeMap<String, f64>,
    #[serde(default)]
    pub near_miss_probability: f64,
    #[serde(default = "default_signature_probability")]
    pub signature_probability: f64,
    #[serde(default)]
    pub signature_pool: Vec<SignatureSpec>,
    #[serde(default = "default_file_count_range")]
    pub file_count_range: (usize, usize),
    #[serde(default = "default_depth_range")]
    pub directory_depth_range: (usize, usize),
    /// How strongly kit structure (admin/ and config/ directories, extra
    /// source files) tracks the labels; 0 = no structural signal.
    #[serde(default)]
    pub correlation_strength: f64,
}

impl CorpusSpec {
    /// Same plant probability for all eight techniques.
    pub fn uniform(kit_count: usize, plant_probability: f64, near_miss_probability: f64) -> Self {
        CorpusSpec {
            kit_count,
            plant_probabilities: TECHNIQUE_COLUMNS
                .iter()
                .map(|c| (c.to_string(), plant_probability))
                .collect(),
            near_miss_probability,
            signature_probability: default_signature_probability(),
            signature_pool: vec![
                SignatureSpec { name: "z1n".into(), weight: 3.0 },
                SignatureSpec { name: "darkmailer".into(), weight: 2.0 },
                SignatureSpec { name: "kitsmith".into(), weight: 1.0 },
            ],
            file_count_range: default_file_count_range(),
            directory_depth_range: default_depth_range(),
            correlation_strength: 0.0,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)?;
        let spec: CorpusSpec =
            serde_json::from_str(&text).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.kit_count == 0 {
            return Err(SynthError::InvalidSpec("kit_count must be >= 1".into()));
        }
        for (key, p) in &self.plant_probabilities {
            if !TECHNIQUE_COLUMNS.contains(&key.as_str()) {
                return Err(SynthError::InvalidSpec(format!("unknown technique {key:?}")));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(SynthError::InvalidSpec(format!("probability for {key} out of range")));
            }
        }
        for (label, p) in [
            ("near_miss_probability", self.near_miss_probability),
            ("signature_probability", self.signature_probability),
            ("correlation_strength", self.correlation_strength),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidSpec(format!("{label} out of range")));
            }
        }
        if self.file_count_range.0 > self.file_count_range.1
            || self.directory_depth_range.0 > self.directory_depth_range.1
        {
            return Err(SynthError::InvalidSpec("empty range".into()));
        }
        if self.signature_pool.iter().any(|s| s.weight < 0.0) {
            return Err(SynthError::InvalidSpec("negative signature weight".into()));
        }
        Ok(())
    }

    fn probability_of(&self, column: &str) -> f64 {
        self.plant_probabilities.get(column).copied().unwrap_or(0.0)
    }
}

/// Label-correlated structure planted into a kit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructurePlan {
    pub admin_dir: bool,
    pub config_dir: bool,
    pub extra_php: usize,
    pub extra_js: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub kit_id: String,
    /// Technique column names in fixed order.
    pub techniques: Vec<String>,
    pub near_misses: Vec<String>,
    pub signature: Option<String>,
    pub evasive: bool,
    pub obfuscated: bool,
    pub structure: StructurePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn write_jsonl(&self, path: &Path) -> Result<(), SynthError> {
        let mut out = Vec::new();
        for record in &self.records {
            serde_json::to_writer(&mut out, record)
                .map_err(|e| SynthError::MalformedManifest(e.to_string()))?;
            out.push(b'\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(line)
                .map_err(|e| SynthError::MalformedManifest(format!("line {}: {e}", idx + 1)))?;
            records.push(record);
        }
        Ok(Manifest { records })
    }
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

fn random_private_ip(rng: &mut ChaCha8Rng) -> String {
    format!(
        "10.{}.{}.{}",
        rng.gen_range(0..256),
        rng.gen_range(0..256),
        rng.gen_range(1..255)
    )
}

/// Percent-encode a word as %HH escapes.
fn percent_encode(word: &str) -> String {
    word.bytes().map(|b| format!("%{b:02x}")).collect()
}

/// \xHH-escape a word.
fn hex_escape(word: &str) -> String {
    word.bytes().map(|b| format!("\\x{b:02x}")).collect()
}

const WORDS: [&str; 12] = [
    "account", "billing", "update", "secure", "verify", "member", "portal", "session", "token",
    "notice", "support", "invoice",
];

fn random_word(rng: &mut ChaCha8Rng) -> &'static str {
    WORDS[rng.gen_range(0..WORDS.len())]
}

const OBFUSCATOR_BANNERS: [(&str, &str); 4] = [
    ("FOPO", "/* Obfuscation provided by FOPO - Free Online PHP Obfuscator */"),
    ("ionCube", "/* this build requires the ionCube Loader extension */"),
    ("GenericProtected", "/* This file is protected by copyright law and provided under license. */"),
    ("PhpEncode", "/* Encoded by PHP Encode v1.0 */"),
];

struct KitBuilder {
    files: Vec<(String, String)>,
    htaccess_lines: Vec<String>,
    robots_lines: Vec<String>,
}

impl KitBuilder {
    fn new() -> Self {
        KitBuilder {
            files: Vec::new(),
            htaccess_lines: Vec::new(),
            robots_lines: Vec::new(),
        }
    }

    fn plant(&mut self, technique: Technique, rng: &mut ChaCha8Rng) {
        match technique.column() {
            "ev_htaccess" => {
                self.htaccess_lines
                    .push(format!("deny from {}", random_private_ip(rng)));
            }
            "ev_robots_txt" => {
                self.robots_lines
                    .push(format!("Disallow: /{}/", random_word(rng)));
            }
            "ev_php" => {
                let ips: Vec<String> = (0..4).map(|_| format!("\"{}\"", random_private_ip(rng))).collect();
                self.files.push((
                    "filter.php".into(),
                    format!("<?php\n$blocked = array({});\n", ips.join(", ")),
                ));
            }
            "ob_urldecode" => {
                let phrase = format!("{}/{}", random_word(rng), random_word(rng));
                self.files.push((
                    "decode.php".into(),
                    format!("<?php\n$seg = urldecode(\"{}\");\necho $seg;\n", percent_encode(&phrase)),
                ));
            }
            "ob_eval" => {
                self.files.push((
                    "run.php".into(),
                    format!("<?php\n$code = 'print(\"{}\");';\neval($code);\n", random_word(rng)),
                ));
            }
            "ob_hex" => {
                let phrase = format!("{}_{}", random_word(rng), random_word(rng));
                self.files.push((
                    "keys.php".into(),
                    format!("<?php\n$key = \"{}\";\n", hex_escape(&phrase)),
                ));
            }
            "ob_base64" => {
                let len = rng.gen_range(100..160);
                let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                let encoded = BASE64.encode(&payload);
                self.files.push((
                    "payload.php".into(),
                    format!("<?php\n$blob = \"{encoded}\";\n"),
                ));
            }
            "ob_obfuscator" => {
                let (_, banner) = OBFUSCATOR_BANNERS[rng.gen_range(0..OBFUSCATOR_BANNERS.len())];
                self.files.push((
                    "loader.php".into(),
                    format!("<?php\n{banner}\n$licensed = 1;\n"),
                ));
            }
            other => unreachable!("unknown column {other}"),
        }
    }

    fn plant_near_miss(&mut self, technique: Technique, rng: &mut ChaCha8Rng) {
        match technique.column() {
            "ev_htaccess" => {
                self.htaccess_lines.push("Options -Indexes".into());
                self.htaccess_lines.push("DirectoryIndex index.php".into());
            }
            "ev_robots_txt" => {
                self.robots_lines.push("Allow: /".into());
                self.robots_lines.push("Disallow:".into());
            }
            "ev_php" => {
                // two entries: below the blacklist threshold
                self.files.push((
                    "peers.php".into(),
                    format!(
                        "<?php\n$peers = array(\"{}\", \"{}\");\n",
                        random_private_ip(rng),
                        random_private_ip(rng)
                    ),
                ));
            }
            "ob_urldecode" => {
                self.files.push((
                    "query.php".into(),
                    format!("<?php\n$q = urldecode(\"{}\");\n", percent_encode("up")),
                ));
            }
            "ob_eval" => {
                self.files.push((
                    "notes.php".into(),
                    "<?php\n// eval($data) support was removed\n$ok = true;\n".into(),
                ));
            }
            "ob_hex" => {
                self.files.push((
                    "sep.php".into(),
                    format!("<?php\n$sep = \"{}\";\n", hex_escape("../")),
                ));
            }
            "ob_base64" => {
                let payload: Vec<u8> = (0..48).map(|_| rng.gen()).collect();
                let encoded = BASE64.encode(&payload);
                self.files.push((
                    "tag.php".into(),
                    format!("<?php\n$tag = \"{encoded}\";\n"),
                ));
            }
            "ob_obfuscator" => {
                self.files.push((
                    "build.php".into(),
                    "<?php\n/* This file is not protected. Plain development build. */\n$v = 2;\n"
                        .into(),
                ));
            }
            other => unreachable!("unknown column {other}"),
        }
    }

    fn finish(mut self) -> Vec<(String, String)> {
        if !self.htaccess_lines.is_empty() {
            self.files
                .push((".htaccess".into(), self.htaccess_lines.join("\n") + "\n"));
        }
        if !self.robots_lines.is_empty() {
            let content = format!("User-agent: *\n{}\n", self.robots_lines.join("\n"));
            self.files.push(("robots.txt".into(), content));
        }
        self.files
    }
}

fn pick_signature(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Option<String> {
    let total: f64 = spec.signature_pool.iter().map(|s| s.weight).sum();
    if spec.signature_pool.is_empty() || total <= 0.0 {
        return None;
    }
    if !rng.gen_bool(spec.signature_probability) {
        return None;
    }
    let mut draw = rng.gen_range(0.0..total);
    for entry in &spec.signature_pool {
        if draw < entry.weight {
            return Some(crate::authors::normalize_name(&entry.name));
        }
        draw -= entry.weight;
    }
    Some(crate::authors::normalize_name(
        &spec.signature_pool.last().unwrap().name,
    ))
}

/// Generate `spec.kit_count` kit directories under `destination/kits/` and
/// write the manifest to `destination/manifest.jsonl`. A single sequential
/// seeded stream drives every draw, so (spec, seed) fixes all bytes.
pub fn generate_corpus(
    spec: &CorpusSpec,
    seed: u64,
    destination: &Path,
) -> Result<Manifest, SynthError> {
    spec.validate()?;
    let kits_root = destination.join(KITS_SUBDIR);
    std::fs::create_dir_all(&kits_root)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(spec.kit_count);

    for index in 0..spec.kit_count {
        let kit_id = format!("kit-{index:04}");
        let mut builder = KitBuilder::new();

        let mut techniques = Vec::new();
        for technique in Technique::ALL {
            if rng.gen_bool(spec.probability_of(technique.column())) {
                builder.plant(technique, &mut rng);
                techniques.push(technique.column().to_string());
            }
        }
        let mut near_misses = Vec::new();
        for technique in Technique::ALL {
            if rng.gen_bool(spec.near_miss_probability) {
                builder.plant_near_miss(technique, &mut rng);
                near_misses.push(technique.column().to_string());
            }
        }

        let evasive = techniques.iter().any(|t| t.starts_with("ev_"));
        let obfuscated = techniques.iter().any(|t| t.starts_with("ob_"));

        // structural bias gives ML a label-correlated signal
        let mut structure = StructurePlan::default();
        if evasive && rng.gen_bool(spec.correlation_strength) {
            structure.admin_dir = true;
            structure.extra_php = rng.gen_range(2..5);
            for i in 0..structure.extra_php {
                builder.files.push((
                    format!("admin/panel{i}.php"),
                    format!("<?php\necho \"{} section {i}\";\n", random_word(&mut rng)),
                ));
            }
        }
        if obfuscated && rng.gen_bool(spec.correlation_strength) {
            structure.config_dir = true;
            structure.extra_js = rng.gen_range(2..5);
            for i in 0..structure.extra_js {
                builder.files.push((
                    format!("config/set{i}.js"),
                    format!("var option{i} = \"{}\";\n", random_word(&mut rng)),
                ));
            }
        }

        let signature = pick_signature(spec, &mut rng);
        let mut index_php = String::from("<?php\n");
        if let Some(name) = &signature {
            index_php.push_str(&format!("// coded by {name}\n"));
        }
        index_php.push_str(&format!("echo \"{} portal\";\n", random_word(&mut rng)));
        builder.files.push(("index.php".into(), index_php));
        builder.files.push((
            "login.html".into(),
            format!(
                "<html><body><form action=\"index.php\" method=\"post\">\n\
                 <input name=\"{}\"><input name=\"{}\"></form></body></html>\n",
                random_word(&mut rng),
                random_word(&mut rng)
            ),
        ));
        builder
            .files
            .push(("style.css".into(), "body { margin: 0; }\n".into()));

        // benign filler at a random nesting depth
        let filler = rng.gen_range(spec.file_count_range.0..=spec.file_count_range.1);
        for i in 0..filler {
            let depth = rng.gen_range(spec.directory_depth_range.0..=spec.directory_depth_range.1);
            let mut path = PathBuf::new();
            for _ in 0..depth {
                path.push(random_word(&mut rng));
            }
            path.push(format!("page{i}.txt"));
            builder.files.push((
                path.to_string_lossy().into_owned(),
                format!("{} {} reference text\n", random_word(&mut rng), random_word(&mut rng)),
            ));
        }

        let kit_dir = kits_root.join(&kit_id);
        let mut files = builder.finish();
        files.sort_by(|a, b| a.0.cmp(&b.0));
        files.dedup_by(|a, b| a.0 == b.0);
        for (rel, content) in &files {
            let path = kit_dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let mut f = std::fs::File::create(path)?;
            f.write_all(content.as_bytes())?;
        }

        records.push(ManifestRecord {
            kit_id,
            techniques,
            near_misses,
            signature,
            evasive,
            obfuscated,
            structure,
        });
    }

    let manifest = Manifest { records };
    manifest.write_jsonl(&destination.join(MANIFEST_FILE))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub kit_id: String,
    pub technique: String,
    pub expected: bool,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Technique column -> fraction of kits whose detector flag matches the
    /// manifest.
    pub per_technique: BTreeMap<String, f64>,
    pub disagreements: Vec<Disagreement>,
}

impl AgreementReport {
    pub fn all_perfect(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Compare scanned technique flags against the manifest ground truth.
pub fn verify_against_manifest(
    samples: &[LabeledSample],
    manifest: &Manifest,
) -> Result<AgreementReport, SynthError> {
    let scanned: BTreeMap<&str, &LabeledSample> =
        samples.iter().map(|s| (s.kit_id.as_str(), s)).collect();
    let expected_ids: BTreeSet<&str> =
        manifest.records.iter().map(|r| r.kit_id.as_str()).collect();
    let scanned_ids: BTreeSet<&str> = scanned.keys().copied().collect();
    if expected_ids != scanned_ids {
        let missing: Vec<&&str> = expected_ids.difference(&scanned_ids).collect();
        let extra: Vec<&&str> = scanned_ids.difference(&expected_ids).collect();
        return Err(SynthError::KitIdMismatch(format!(
            "missing {missing:?}, unexpected {extra:?}"
        )));
    }

    let mut per_technique = BTreeMap::new();
    let mut disagreements = Vec::new();
    if manifest.records.is_empty() {
        return Ok(AgreementReport {
            per_technique,
            disagreements,
        });
    }
    for technique in Technique::ALL {
        let column = technique.column();
        let mut matching = 0usize;
        for record in &manifest.records {
            let sample = scanned[record.kit_id.as_str()];
            let expected = record.techniques.iter().any(|t| t == column);
            let observed = technique.present_in(sample);
            if expected == observed {
                matching += 1;
            } else {
                disagreements.push(Disagreement {
                    kit_id: record.kit_id.clone(),
                    technique: column.to_string(),
                    expected,
                    observed,
                });
            }
        }
        per_technique.insert(
            column.to_string(),
            matching as f64 / manifest.records.len() as f64,
        );
    }
    disagreements.sort_by(|a, b| (&a.kit_id, &a.technique).cmp(&(&b.kit_id, &b.technique)));
    Ok(AgreementReport {
        per_technique,
        disagreements,
    })
}
