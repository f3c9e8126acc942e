//! Target configuration: where the system under test lives, which accounts
//! to use, and all tunable detection knobs.
//!
//! The same TOML document drives collection and testing, and a copy is
//! persisted inside every pool directory so campaigns are self-contained.

use std::path::Path;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::User;

fn d_true() -> bool {
    true
}
fn d_seed() -> u64 {
    42
}
fn d_threshold() -> f64 {
    0.05
}
fn d_cookie() -> String {
    "sid".to_string()
}
fn d_connect() -> u64 {
    10
}
fn d_response() -> u64 {
    30
}
fn d_views() -> usize {
    100
}
fn d_max_states() -> usize {
    64
}
fn d_max_actions() -> usize {
    32
}
fn d_crawl_budget() -> u64 {
    300
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Credential {
    pub username: String,
    pub password: String,
    pub role: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Supervision {
    /// (supervisor, supervised) pairs. When this section is present the
    /// pairs are authoritative; when absent, supervision defaults to the
    /// reachable-URL superset relation.
    #[serde(default)]
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    #[serde(default = "Detection::default_error_regexes")]
    pub error_regexes: Vec<String>,
    #[serde(default = "Detection::default_login_pattern")]
    pub login_url_pattern: String,
    #[serde(default = "Detection::default_signup_pattern")]
    pub signup_url_pattern: String,
    #[serde(default = "Detection::default_username_field")]
    pub username_field_pattern: String,
    #[serde(default = "Detection::default_password_field")]
    pub password_field_pattern: String,
}

impl Detection {
    fn default_error_regexes() -> Vec<String> {
        vec![
            "(?i)error".into(),
            "(?i)forbidden".into(),
            r"(?i)not\s+found".into(),
            "(?i)exception".into(),
        ]
    }
    fn default_login_pattern() -> String {
        "login|signin|session".into()
    }
    fn default_signup_pattern() -> String {
        "signup|register".into()
    }
    fn default_username_field() -> String {
        "(?i)user|login|email|name".into()
    }
    fn default_password_field() -> String {
        "(?i)pass".into()
    }
}

impl Default for Detection {
    fn default() -> Self {
        Detection {
            error_regexes: Self::default_error_regexes(),
            login_url_pattern: Self::default_login_pattern(),
            signup_url_pattern: Self::default_signup_pattern(),
            username_field_pattern: Self::default_username_field(),
            password_field_pattern: Self::default_password_field(),
        }
    }
}

/// Values used to fill non-credential form fields during crawling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormDefaults {
    #[serde(default = "FormDefaults::default_text")]
    pub text: String,
    #[serde(default = "FormDefaults::default_email")]
    pub email: String,
    #[serde(default = "FormDefaults::default_number")]
    pub number: String,
    #[serde(default = "d_true")]
    pub check_boxes: bool,
}

impl FormDefaults {
    fn default_text() -> String {
        "test".into()
    }
    fn default_email() -> String {
        "test@example.com".into()
    }
    fn default_number() -> String {
        "1".into()
    }
}

impl Default for FormDefaults {
    fn default() -> Self {
        FormDefaults {
            text: Self::default_text(),
            email: Self::default_email(),
            number: Self::default_number(),
            check_boxes: true,
        }
    }
}

/// Source of file paths for `RandomFilePath()`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathCorpus {
    /// Paths listed inline in the config.
    #[serde(default)]
    pub corpus: Vec<String>,
    /// Optional file with one path per line (`#` starts a comment).
    #[serde(default)]
    pub corpus_file: Option<String>,
    /// Optional directory to scan recursively. Image files are skipped.
    #[serde(default)]
    pub document_root: Option<String>,
    /// (alias, target) prefix pairs substituted into scanned/listed paths.
    #[serde(default)]
    pub aliases: Vec<(String, String)>,
    /// Number of provider views a random-valued pool presents.
    #[serde(default = "d_views")]
    pub views: usize,
}

impl Default for PathCorpus {
    fn default() -> Self {
        PathCorpus {
            corpus: Vec::new(),
            corpus_file: None,
            document_root: None,
            aliases: Vec::new(),
            views: d_views(),
        }
    }
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "gif", "svg", "ico"];

impl PathCorpus {
    /// Collects the effective path corpus. Relative `corpus_file` and
    /// `document_root` entries resolve against `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Vec<String>, ConfigError> {
        let mut paths: Vec<String> = self.corpus.clone();
        if let Some(file) = &self.corpus_file {
            let text = std::fs::read_to_string(base_dir.join(file))?;
            for line in text.lines() {
                let line = line.trim();
                if !line.is_empty() && !line.starts_with('#') {
                    paths.push(line.to_string());
                }
            }
        }
        if let Some(root) = &self.document_root {
            let root = base_dir.join(root);
            let mut scanned = Vec::new();
            for entry in walkdir::WalkDir::new(&root).sort_by_file_name() {
                let entry = entry.map_err(|e| {
                    ConfigError::Invalid(format!("document_root scan failed: {e}"))
                })?;
                if !entry.file_type().is_file() {
                    continue;
                }
                let ext = entry
                    .path()
                    .extension()
                    .and_then(|e| e.to_str())
                    .unwrap_or("")
                    .to_ascii_lowercase();
                if IMAGE_EXTENSIONS.contains(&ext.as_str()) {
                    continue;
                }
                if let Ok(rel) = entry.path().strip_prefix(&root) {
                    scanned.push(rel.to_string_lossy().replace('\\', "/"));
                }
            }
            paths.extend(scanned);
        }
        // Alias substitution: a path under an aliased prefix is rewritten
        // to the target prefix, mirroring symlink resolution.
        let substituted: Vec<String> = paths
            .into_iter()
            .map(|p| {
                for (alias, target) in &self.aliases {
                    if p == *alias {
                        return target.clone();
                    }
                    if let Some(rest) = p.strip_prefix(&format!("{alias}/")) {
                        return format!("{target}/{rest}");
                    }
                }
                p
            })
            .collect();
        let mut out = Vec::new();
        for p in substituted {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrawlLimits {
    #[serde(default = "d_max_states")]
    pub max_states: usize,
    #[serde(default = "d_max_actions")]
    pub max_actions_per_state: usize,
    #[serde(default = "d_crawl_budget")]
    pub budget_secs: u64,
}

impl Default for CrawlLimits {
    fn default() -> Self {
        CrawlLimits {
            max_states: d_max_states(),
            max_actions_per_state: d_max_actions(),
            budget_secs: d_crawl_budget(),
        }
    }
}

/// Everything the toolkit needs to know about one target system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetConfig {
    /// Canonical entry point, normally on the secure channel.
    pub base_url: String,
    /// Port serving the plain channel.
    pub insecure_port: u16,
    /// Port serving the secure channel.
    pub secure_port: u16,
    /// When true, `https` URLs are transported as plain TCP to
    /// `secure_port` (the fixture mode); real targets set this to false.
    #[serde(default = "d_true")]
    pub simulated_tls: bool,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_threshold")]
    pub page_eq_threshold: f64,
    #[serde(default = "d_threshold")]
    pub state_threshold: f64,
    /// Name of the session cookie.
    #[serde(default = "d_cookie")]
    pub session_cookie: String,
    #[serde(default = "d_connect")]
    pub connect_timeout_secs: u64,
    #[serde(default = "d_response")]
    pub response_timeout_secs: u64,
    #[serde(default)]
    pub credentials: Vec<Credential>,
    #[serde(default)]
    pub supervision: Option<Supervision>,
    #[serde(default)]
    pub detection: Detection,
    #[serde(default)]
    pub forms: FormDefaults,
    #[serde(default)]
    pub paths: PathCorpus,
    #[serde(default)]
    pub crawl: CrawlLimits,
}

impl TargetConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: TargetConfig = toml::from_str(text)?;
        url::Url::parse(&cfg.base_url).map_err(|e| ConfigError::BaseUrl {
            url: cfg.base_url.clone(),
            reason: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&cfg.page_eq_threshold) || !(0.0..=1.0).contains(&cfg.state_threshold) {
            return Err(ConfigError::Invalid(
                "thresholds must lie within 0.0..=1.0".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn users(&self) -> Vec<User> {
        self.credentials
            .iter()
            .map(|c| User::new(&c.username, &c.password, &c.role))
            .collect()
    }

    pub fn connect_timeout(&self) -> Duration {
        Duration::from_secs(self.connect_timeout_secs)
    }

    pub fn response_timeout(&self) -> Duration {
        Duration::from_secs(self.response_timeout_secs)
    }

    pub fn rules(&self) -> Result<DetectionRules, ConfigError> {
        DetectionRules::compile(&self.detection)
    }

    /// A config against the built-in fixture: its accounts, short
    /// timeouts, and a file-path corpus probing the confined area. Ports
    /// default to 0 and are filled in by the caller once the fixture is
    /// bound.
    pub fn for_tests(base_url: &str) -> Self {
        let credentials = crate::fixture::site::accounts()
            .iter()
            .map(|(u, p, r)| Credential {
                username: u.to_string(),
                password: p.to_string(),
                role: r.to_string(),
            })
            .collect();
        TargetConfig {
            base_url: base_url.to_string(),
            insecure_port: 0,
            secure_port: 0,
            simulated_tls: true,
            seed: d_seed(),
            page_eq_threshold: d_threshold(),
            state_threshold: d_threshold(),
            session_cookie: d_cookie(),
            connect_timeout_secs: 5,
            response_timeout_secs: 10,
            credentials,
            supervision: Some(Supervision {
                pairs: vec![
                    ("admin".to_string(), "devel".to_string()),
                    ("admin".to_string(), "tester".to_string()),
                ],
            }),
            detection: Detection::default(),
            forms: FormDefaults::default(),
            paths: PathCorpus {
                corpus: vec![
                    "secret/credentials.txt".to_string(),
                    "secret/backup-plan.txt".to_string(),
                    "etc/passwd".to_string(),
                    "logs/coordinator.log".to_string(),
                ],
                ..PathCorpus::default()
            },
            crawl: CrawlLimits::default(),
        }
    }
}

/// Compiled detection patterns shared by the collector and the evaluator.
#[derive(Debug, Clone)]
pub struct DetectionRules {
    pub error_regexes: Vec<Regex>,
    pub login_url: Regex,
    pub signup_url: Regex,
    pub username_field: Regex,
    pub password_field: Regex,
}

fn compile(pattern: &str) -> Result<Regex, ConfigError> {
    Regex::new(pattern).map_err(|source| ConfigError::Regex {
        pattern: pattern.to_string(),
        source,
    })
}

impl DetectionRules {
    pub fn compile(detection: &Detection) -> Result<Self, ConfigError> {
        let mut error_regexes = Vec::new();
        for p in &detection.error_regexes {
            error_regexes.push(compile(p)?);
        }
        Ok(DetectionRules {
            error_regexes,
            login_url: compile(&format!("(?i){}", detection.login_url_pattern))?,
            signup_url: compile(&format!("(?i){}", detection.signup_url_pattern))?,
            username_field: compile(&detection.username_field_pattern)?,
            password_field: compile(&detection.password_field_pattern)?,
        })
    }
}
