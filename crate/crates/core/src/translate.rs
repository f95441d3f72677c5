//! Synthetic translation of English titles into the other training languages.
//!
//! Prompts are built from a fixed system template; the actual translation is
//! delegated to a [`TranslationProvider`]. The default provider reads a TSV
//! lookup file so the pipeline runs offline and deterministically.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{JobAdRecord, Language};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
    pub target_language: Language,
}

/// Display name used after "from English to", and the market adjective used
/// in "within the ... job market".
fn language_names(lang: Language) -> Option<(&'static str, &'static str)> {
    match lang {
        Language::De => Some(("German", "German")),
        Language::Es => Some(("Spanish", "Spanish")),
        Language::Zh => Some(("Chinese (Simplified)", "Chinese")),
        Language::En => None,
    }
}

pub fn system_prompt(target: Language) -> Result<String> {
    let (name, market) = language_names(target)
        .ok_or_else(|| Error::Config(format!("unsupported translation target {target}")))?;
    Ok(format!(
        "You are a professional translator specializing in job ad titles and professional \
         language. Translate the following job ad title from English to {name}. Preserve any \
         technical terms that are commonly used in English within the {market} job market. \
         Do not include any other text or commentary."
    ))
}

pub fn build_prompt(title: &str, target: Language) -> Result<PromptPair> {
    if title.trim().is_empty() {
        return Err(Error::empty("title to translate"));
    }
    Ok(PromptPair {
        system: system_prompt(target)?,
        user: title.to_string(),
        target_language: target,
    })
}

/// Parses a target tag, rejecting anything outside de/es/zh.
pub fn parse_target(tag: &str) -> Result<Language> {
    match tag.parse::<Language>() {
        Ok(l) if l != Language::En => Ok(l),
        _ => Err(Error::Config(format!(
            "unsupported translation target {tag:?} (expected de, es or zh)"
        ))),
    }
}

pub trait TranslationProvider: Sync {
    fn name(&self) -> &str;
    fn translate(&self, prompt: &PromptPair) -> Result<String>;
}

/// Strips surrounding whitespace and enforces a single line of output.
pub fn clean_output(raw: &str) -> Result<String> {
    let text = raw.trim();
    if text.is_empty() {
        return Err(Error::Provider("empty translation".to_string()));
    }
    if text.contains('\n') || text.contains('\r') {
        return Err(Error::Provider(
            "translation spans multiple lines".to_string(),
        ));
    }
    Ok(text.to_string())
}

/// Translations read from a TSV file of `source_title, lang, translation`.
#[derive(Debug, Default, Clone)]
pub struct LookupProvider {
    table: HashMap<(String, Language), String>,
}

impl LookupProvider {
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(
                    line_no,
                    1,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let lang = cols[1]
                .parse::<Language>()
                .map_err(|tag| Error::UnknownLanguage { line: line_no, tag })?;
            table.insert((cols[0].to_string(), lang), cols[2].to_string());
        }
        Ok(Self { table })
    }

    pub fn insert(&mut self, source: &str, lang: Language, translation: &str) {
        self.table
            .insert((source.to_string(), lang), translation.to_string());
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl TranslationProvider for LookupProvider {
    fn name(&self) -> &str {
        "lookup"
    }

    fn translate(&self, prompt: &PromptPair) -> Result<String> {
        self.table
            .get(&(prompt.user.clone(), prompt.target_language))
            .cloned()
            .ok_or_else(|| {
                Error::Provider(format!(
                    "no {} entry for {:?}",
                    prompt.target_language, prompt.user
                ))
            })
    }
}

/// Settings for an OpenAI-style chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
}

#[derive(Debug, Clone)]
pub struct ChatCompletionsProvider {
    config: LiveProviderConfig,
}

impl ChatCompletionsProvider {
    pub fn new(config: LiveProviderConfig) -> Self {
        Self { config }
    }

    /// Request body: model plus the two messages, no sampling overrides.
    pub fn request_body(&self, prompt: &PromptPair) -> serde_json::Value {
        serde_json::json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        })
    }

    pub fn extract_content(response: &serde_json::Value) -> Result<String> {
        response
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| Error::Provider("response carries no message content".to_string()))
    }
}

impl TranslationProvider for ChatCompletionsProvider {
    fn name(&self) -> &str {
        "chat-completions"
    }

    #[cfg(feature = "live-translate")]
    fn translate(&self, prompt: &PromptPair) -> Result<String> {
        let token = std::env::var(&self.config.token_env).map_err(|_| {
            Error::Config(format!(
                "environment variable {} is not set",
                self.config.token_env
            ))
        })?;
        let response: serde_json::Value = ureq::post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {token}"))
            .send_json(self.request_body(prompt))
            .map_err(|e| Error::Provider(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| Error::Provider(e.to_string()))?;
        Self::extract_content(&response)
    }

    #[cfg(not(feature = "live-translate"))]
    fn translate(&self, _prompt: &PromptPair) -> Result<String> {
        Err(Error::Config(
            "built without the live-translate feature".to_string(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationFailure {
    pub id: String,
    pub lang: Language,
    pub error: String,
}

pub fn write_failures_jsonl<W: Write>(mut out: W, failures: &[TranslationFailure]) -> Result<()> {
    for f in failures {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Suffix separating a source id from the target language tag.
pub const ID_SEPARATOR: char = '/';

/// Translates every English record into every target language. Output records
/// are ordered by source record, then by target order; failures are collected
/// instead of aborting the run.
pub fn translate_corpus(
    records: &[JobAdRecord],
    provider: &dyn TranslationProvider,
    targets: &[Language],
) -> Result<(Vec<JobAdRecord>, Vec<TranslationFailure>)> {
    if let Some(r) = records.iter().find(|r| r.language != Language::En) {
        return Err(Error::Validation(format!(
            "record {} is {}, only en records can be translated",
            r.id, r.language
        )));
    }
    for &t in targets {
        system_prompt(t)?;
    }

    let jobs: Vec<(&JobAdRecord, Language)> = records
        .iter()
        .flat_map(|r| targets.iter().map(move |&t| (r, t)))
        .collect();

    let results: Vec<Result<JobAdRecord, TranslationFailure>> = jobs
        .par_iter()
        .map(|&(record, lang)| {
            let fail = |e: Error| TranslationFailure {
                id: record.id.clone(),
                lang,
                error: e.to_string(),
            };
            let prompt = build_prompt(&record.title, lang).map_err(fail)?;
            let raw = provider.translate(&prompt).map_err(fail)?;
            let title = clean_output(&raw).map_err(fail)?;
            Ok(JobAdRecord {
                id: format!("{}{}{}", record.id, ID_SEPARATOR, lang),
                language: lang,
                title,
                skills: record.skills.clone(),
            })
        })
        .collect();

    let mut translated = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => translated.push(rec),
            Err(f) => failures.push(f),
        }
    }
    Ok((translated, failures))
}

/// Recovers the source id of a translated record.
pub fn source_id(translated_id: &str) -> Option<&str> {
    let (src, tag) = translated_id.rsplit_once(ID_SEPARATOR)?;
    parse_target(tag).ok().map(|_| src)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TITLE: &str = "Software Developer – NYC fulltime (JobID ja164956189)";

    #[test]
    fn german_system_prompt_is_exact() {
        let p = build_prompt(TITLE, Language::De).unwrap();
        assert_eq!(
            p.system,
            "You are a professional translator specializing in job ad titles and professional language. \
Translate the following job ad title from English to German. Preserve any technical terms that are \
commonly used in English within the German job market. Do not include any other text or commentary."
        );
        assert_eq!(p.user, TITLE);
    }

    #[test]
    fn chinese_prompt_uses_simplified_name_and_market() {
        let p = build_prompt(TITLE, Language::Zh).unwrap();
        assert!(p.system.contains("from English to Chinese (Simplified)."));
        assert!(p.system.contains("within the Chinese job market."));
    }

    #[test]
    fn unsupported_targets_are_config_errors() {
        assert!(matches!(
            build_prompt("x", Language::En),
            Err(Error::Config(_))
        ));
        assert!(matches!(parse_target("fr"), Err(Error::Config(_))));
        assert!(matches!(parse_target("en"), Err(Error::Config(_))));
        assert_eq!(parse_target("zh").unwrap(), Language::Zh);
    }

    #[test]
    fn outputs_must_be_single_line() {
        assert_eq!(clean_output("  Koch \n").unwrap(), "Koch");
        assert!(clean_output("Koch\nKöchin").is_err());
        assert!(clean_output("   ").is_err());
    }

    #[test]
    fn lookup_provider_reproduces_reference_translations() {
        let tsv = format!(
            "{TITLE}\tde\tSoftwareentwickler – New York, Vollzeit (JobID ja164956189)\n\
             {TITLE}\tes\tDesarrollador de Software – Nueva York, tiempo completo (JobID ja164956189)\n\
             {TITLE}\tzh\t软件开发人员——纽约全职（职位编号 ja164956189）\n"
        );
        let provider = LookupProvider::from_tsv(tsv.as_bytes()).unwrap();
        let de = provider
            .translate(&build_prompt(TITLE, Language::De).unwrap())
            .unwrap();
        assert_eq!(
            de,
            "Softwareentwickler – New York, Vollzeit (JobID ja164956189)"
        );
        let es = provider
            .translate(&build_prompt(TITLE, Language::Es).unwrap())
            .unwrap();
        assert_eq!(
            es,
            "Desarrollador de Software – Nueva York, tiempo completo (JobID ja164956189)"
        );
    }

    #[test]
    fn request_body_carries_prompt_verbatim() {
        let provider = ChatCompletionsProvider::new(LiveProviderConfig {
            endpoint: "http://localhost/v1/chat/completions".into(),
            model: "some-model".into(),
            token_env: "TRANSLATE_TOKEN".into(),
        });
        let prompt = build_prompt(TITLE, Language::Es).unwrap();
        let body = provider.request_body(&prompt);
        assert_eq!(body["model"], "some-model");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], prompt.system.as_str());
        assert_eq!(body["messages"][1]["content"], TITLE);
        assert!(body.get("temperature").is_none());
    }

    #[test]
    fn extracts_chat_content() {
        let resp =
            serde_json::json!({"choices":[{"message":{"role":"assistant","content":"Koch"}}]});
        assert_eq!(
            ChatCompletionsProvider::extract_content(&resp).unwrap(),
            "Koch"
        );
        assert!(ChatCompletionsProvider::extract_content(&serde_json::json!({})).is_err());
    }

    #[test]
    fn source_ids_round_trip() {
        assert_eq!(source_id("a1/de"), Some("a1"));
        assert_eq!(source_id("x/y/zh"), Some("x/y"));
        assert_eq!(source_id("a1"), None);
        assert_eq!(source_id("a1/en"), None);
    }
}
