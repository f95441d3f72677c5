//! Training tuples: parsing, quality filtering, language balance and
//! deterministic shuffled batching.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
    Es,
    Zh,
}

impl Language {
    pub const ALL: [Language; 4] = [Language::En, Language::De, Language::Es, Language::Zh];

    pub fn tag(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
            Language::Es => "es",
            Language::Zh => "zh",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "de" => Ok(Language::De),
            "es" => Ok(Language::Es),
            "zh" => Ok(Language::Zh),
            other => Err(other.to_string()),
        }
    }
}

/// One job ad: a title and the set of ESCO skill ids annotated on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobAdRecord {
    pub id: String,
    #[serde(rename = "lang")]
    pub language: Language,
    pub title: String,
    pub skills: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Tsv,
}

impl FromStr for RecordFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json" => Ok(RecordFormat::Jsonl),
            "tsv" => Ok(RecordFormat::Tsv),
            other => Err(Error::Config(format!("unknown record format {other:?}"))),
        }
    }
}

impl RecordFormat {
    /// Guess from a file extension, defaulting to JSONL.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => RecordFormat::Tsv,
            _ => RecordFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    lang: String,
    title: String,
    skills: Vec<String>,
}

/// Parses JSONL (`id`, `lang`, `title`, `skills`) or 4-column TSV
/// (`id`, `lang`, `title`, `skill;skill;...`). Blank lines are skipped.
pub fn parse_records<R: BufRead>(reader: R, format: RecordFormat) -> Result<Vec<JobAdRecord>> {
    let mut records = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let raw = match format {
            RecordFormat::Jsonl => serde_json::from_str::<RawRecord>(line)
                .map_err(|e| Error::parse(line_no, e.column(), e.to_string()))?,
            RecordFormat::Tsv => parse_tsv_line(line, line_no)?,
        };

        let language = raw
            .lang
            .parse::<Language>()
            .map_err(|tag| Error::UnknownLanguage { line: line_no, tag })?;
        if raw.id.is_empty() {
            return Err(Error::Validation(format!("line {line_no}: empty id")));
        }
        if let Some(&first_line) = first_seen.get(&raw.id) {
            return Err(Error::DuplicateId {
                line: line_no,
                first_line,
                id: raw.id,
            });
        }
        first_seen.insert(raw.id.clone(), line_no);

        records.push(JobAdRecord {
            id: raw.id,
            language,
            title: raw.title,
            skills: raw
                .skills
                .into_iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        });
    }
    Ok(records)
}

fn parse_tsv_line(line: &str, line_no: usize) -> Result<RawRecord> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 4 {
        // Column of the first missing or surplus field.
        let column = cols
            .iter()
            .take(4)
            .map(|c| c.chars().count() + 1)
            .sum::<usize>();
        return Err(Error::parse(
            line_no,
            column,
            format!("expected 4 tab-separated columns, found {}", cols.len()),
        ));
    }
    Ok(RawRecord {
        id: cols[0].to_string(),
        lang: cols[1].to_string(),
        title: cols[2].to_string(),
        skills: cols[3].split(';').map(str::to_string).collect(),
    })
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[JobAdRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Title length in Unicode scalar values after NFKC and trimming.
pub fn title_length(title: &str) -> usize {
    let normalized: String = title.nfkc().collect();
    normalized.trim().chars().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub min_title_chars: usize,
    pub min_unique_skills: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_title_chars: 3,
            min_unique_skills: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TitleTooShort,
    TooFewSkills,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectionReport {
    pub rejections: Vec<Rejection>,
}

impl RejectionReport {
    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejections
            .iter()
            .filter(|r| r.reason == reason)
            .count()
    }

    pub fn len(&self) -> usize {
        self.rejections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejections.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.rejections {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Drops records whose title is too short or that carry too few distinct
/// skills. A record failing both checks is reported as `title_too_short`.
pub fn filter_records(
    records: Vec<JobAdRecord>,
    config: &FilterConfig,
) -> Result<(Vec<JobAdRecord>, RejectionReport)> {
    if config.min_title_chars < 1 || config.min_unique_skills < 1 {
        return Err(Error::Config(
            "filter thresholds must be at least 1".to_string(),
        ));
    }
    let mut kept = Vec::with_capacity(records.len());
    let mut report = RejectionReport::default();
    for record in records {
        let reason = if title_length(&record.title) < config.min_title_chars {
            Some(RejectReason::TitleTooShort)
        } else if record.skills.len() < config.min_unique_skills {
            Some(RejectReason::TooFewSkills)
        } else {
            None
        };
        match reason {
            Some(reason) => report.rejections.push(Rejection {
                id: record.id,
                reason,
            }),
            None => kept.push(record),
        }
    }
    Ok((kept, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub counts: BTreeMap<Language, usize>,
    pub total: usize,
    pub min_title_len: usize,
    pub max_title_len: usize,
    pub min_unique_skills: usize,
    pub max_unique_skills: usize,
    /// Largest absolute deviation of a language count from the mean count.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub balanced: bool,
}

impl DatasetStats {
    /// Balance bookkeeping from per-language counts alone. Length fields are zero.
    pub fn from_counts(counts: BTreeMap<Language, usize>, tolerance: f64) -> Self {
        let mut full: BTreeMap<Language, usize> = Language::ALL.iter().map(|&l| (l, 0)).collect();
        full.extend(counts);
        let total: usize = full.values().sum();
        let mean = total as f64 / full.len() as f64;
        let max_deviation = full
            .values()
            .map(|&c| (c as f64 - mean).abs())
            .fold(0.0, f64::max);
        Self {
            counts: full,
            total,
            min_title_len: 0,
            max_title_len: 0,
            min_unique_skills: 0,
            max_unique_skills: 0,
            max_deviation,
            tolerance,
            balanced: max_deviation <= tolerance,
        }
    }

    /// The common per-language count when the corpus is exactly balanced.
    pub fn per_language(&self) -> Option<usize> {
        let first = *self.counts.values().next()?;
        self.counts.values().all(|&c| c == first).then_some(first)
    }
}

pub fn balance_report(records: &[JobAdRecord], tolerance: f64) -> DatasetStats {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.language).or_insert(0) += 1;
    }
    let mut stats = DatasetStats::from_counts(counts, tolerance);
    let title_lens = records.iter().map(|r| title_length(&r.title));
    let skill_counts = records.iter().map(|r| r.skills.len());
    stats.min_title_len = title_lens.clone().min().unwrap_or(0);
    stats.max_title_len = title_lens.max().unwrap_or(0);
    stats.min_unique_skills = skill_counts.clone().min().unwrap_or(0);
    stats.max_unique_skills = skill_counts.max().unwrap_or(0);
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BatchItem {
    pub id: String,
    pub title: String,
    /// Skill ids in sorted order; labels are resolved against a gazetteer.
    pub skills: Vec<String>,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Batch {
    pub index: usize,
    pub epoch: u64,
    pub items: Vec<BatchItem>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn languages(&self) -> BTreeSet<Language> {
        self.items.iter().map(|i| i.language).collect()
    }
}

/// Shuffles the whole dataset with the (seed, epoch) stream and slices it into
/// consecutive batches. A trailing batch of one record is dropped.
pub fn make_batches(
    records: &[JobAdRecord],
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Batch>> {
    if batch_size < 2 {
        return Err(Error::Config(format!(
            "batch size must be at least 2, got {batch_size}"
        )));
    }
    if records.is_empty() {
        return Err(Error::Config("cannot batch an empty dataset".to_string()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    SplitMix64::for_epoch(seed, epoch).shuffle(&mut order);

    Ok(order
        .chunks(batch_size)
        .filter(|chunk| chunk.len() >= 2)
        .enumerate()
        .map(|(index, chunk)| Batch {
            index,
            epoch,
            items: chunk
                .iter()
                .map(|&i| {
                    let r = &records[i];
                    BatchItem {
                        id: r.id.clone(),
                        title: r.title.clone(),
                        skills: r.skills.iter().cloned().collect(),
                        language: r.language,
                    }
                })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, lang: Language, title: &str, n_skills: usize) -> JobAdRecord {
        JobAdRecord {
            id: id.to_string(),
            language: lang,
            title: title.to_string(),
            skills: (0..n_skills).map(|i| format!("s{i}")).collect(),
        }
    }

    #[test]
    fn parses_jsonl_record() {
        let input = r#"{"id":"a1","lang":"en","title":"media buyer","skills":["s1","s2"]}"#;
        let records = parse_records(input.as_bytes(), RecordFormat::Jsonl).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].id, "a1");
        assert_eq!(records[0].language, Language::En);
        assert_eq!(records[0].skills.len(), 2);
    }

    #[test]
    fn duplicate_skills_collapse_to_a_set() {
        let input = "a1\tde\tKoch\ts1;s1;s2;\n";
        let records = parse_records(input.as_bytes(), RecordFormat::Tsv).unwrap();
        assert_eq!(records[0].skills.len(), 2);
    }

    #[test]
    fn tsv_unknown_language_is_rejected() {
        let input = "a1\tfr\tchef\ts1;s2\n";
        let err = parse_records(input.as_bytes(), RecordFormat::Tsv).unwrap_err();
        assert!(matches!(err, Error::UnknownLanguage { line: 1, ref tag } if tag == "fr"));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let input = "a1\ten\tchef\ts1\n\na1\tde\tkoch\ts1\n";
        let err = parse_records(input.as_bytes(), RecordFormat::Tsv).unwrap_err();
        assert!(matches!(
            err,
            Error::DuplicateId {
                line: 3,
                first_line: 1,
                ..
            }
        ));
    }

    #[test]
    fn malformed_json_names_the_line() {
        let input = "{\"id\":\"a\",\"lang\":\"en\",\"title\":\"x\",\"skills\":[]}\n{not json\n";
        match parse_records(input.as_bytes(), RecordFormat::Jsonl).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_tsv_line_is_a_parse_error() {
        let err = parse_records("a1\ten\tchef\n".as_bytes(), RecordFormat::Tsv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn filter_rejects_per_reason() {
        let records = vec![
            rec("1", Language::En, "ab", 6),
            rec("2", Language::En, "chef", 4),
            rec("3", Language::En, "chef", 5),
        ];
        let (kept, report) = filter_records(records, &FilterConfig::default()).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "3");
        assert_eq!(report.count(RejectReason::TitleTooShort), 1);
        assert_eq!(report.count(RejectReason::TooFewSkills), 1);
    }

    #[test]
    fn title_length_counts_scalars_after_nfkc() {
        assert_eq!(title_length("  ab  "), 2);
        assert_eq!(title_length("厨师长"), 3);
        // U+FB01 (fi ligature) expands to two scalars under NFKC.
        assert_eq!(title_length("\u{FB01}x"), 3);
    }

    #[test]
    fn rejection_report_jsonl_shape() {
        let report = RejectionReport {
            rejections: vec![Rejection {
                id: "x".into(),
                reason: RejectReason::TooFewSkills,
            }],
        };
        let mut buf = Vec::new();
        report.write_jsonl(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"id\":\"x\",\"reason\":\"too_few_skills\"}\n"
        );
    }

    #[test]
    fn balance_flags_imbalance() {
        let counts = BTreeMap::from([
            (Language::En, 100),
            (Language::De, 100),
            (Language::Es, 100),
            (Language::Zh, 99),
        ]);
        let stats = DatasetStats::from_counts(counts, 0.0);
        assert!(!stats.balanced);
        assert!((stats.max_deviation - 0.75).abs() < 1e-12);
        assert_eq!(stats.per_language(), None);
    }

    #[test]
    fn balanced_corpus_report() {
        let records: Vec<_> = (0..400)
            .map(|i| rec(&i.to_string(), Language::ALL[i % 4], "chef", 5))
            .collect();
        let stats = balance_report(&records, 0.0);
        assert!(stats.balanced);
        assert_eq!(stats.total, 400);
        assert_eq!(stats.per_language(), Some(100));
        assert_eq!(stats.min_title_len, 4);
        assert_eq!(stats.max_unique_skills, 5);
    }

    #[test]
    fn batches_partition_the_dataset() {
        let records: Vec<_> = (0..8)
            .map(|i| rec(&i.to_string(), Language::En, "chef", 5))
            .collect();
        let batches = make_batches(&records, 4, 11, 0).unwrap();
        assert_eq!(batches.len(), 2);
        let mut ids: Vec<_> = batches
            .iter()
            .flat_map(|b| b.items.iter().map(|i| i.id.clone()))
            .collect();
        ids.sort();
        let mut expected: Vec<_> = (0..8).map(|i| i.to_string()).collect();
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn singleton_tail_batch_is_dropped() {
        let records: Vec<_> = (0..9)
            .map(|i| rec(&i.to_string(), Language::En, "chef", 5))
            .collect();
        let batches = make_batches(&records, 4, 1, 0).unwrap();
        assert_eq!(
            batches.iter().map(Batch::len).collect::<Vec<_>>(),
            vec![4, 4]
        );
        let records: Vec<_> = (0..10)
            .map(|i| rec(&i.to_string(), Language::En, "chef", 5))
            .collect();
        let batches = make_batches(&records, 4, 1, 0).unwrap();
        assert_eq!(
            batches.iter().map(Batch::len).collect::<Vec<_>>(),
            vec![4, 4, 2]
        );
    }

    #[test]
    fn batching_rejects_bad_config() {
        let records = vec![rec("1", Language::En, "chef", 5)];
        assert!(matches!(
            make_batches(&records, 1, 0, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(make_batches(&[], 4, 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn large_batch_mixes_all_languages() {
        let records: Vec<_> = (0..4000)
            .map(|i| rec(&i.to_string(), Language::ALL[i % 4], "chef", 5))
            .collect();
        let batches = make_batches(&records, 2048, 2025, 0).unwrap();
        assert_eq!(batches[0].len(), 2048);
        assert_eq!(batches[0].languages().len(), 4);
    }
}
