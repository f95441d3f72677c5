//! Binary-relevance ranking metrics (AP, RR, nDCG, P@K) over TREC run and
//! qrels files.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};

/// Query id to the set of relevant candidate ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    queries: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    /// Builds qrels, rejecting queries without any relevant candidate.
    pub fn new(queries: BTreeMap<String, BTreeSet<String>>) -> Result<Self> {
        if let Some((q, _)) = queries.iter().find(|(_, rel)| rel.is_empty()) {
            return Err(Error::Validation(format!(
                "query {q} has no relevant candidates"
            )));
        }
        Ok(Self { queries })
    }

    /// TREC qrels: `qid 0 docid rel`; rel > 0 marks the document relevant.
    pub fn from_trec<R: BufRead>(reader: R) -> Result<Self> {
        let mut queries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                continue;
            }
            if cols.len() != 4 {
                return Err(Error::parse(
                    idx + 1,
                    1,
                    format!("qrels line needs 4 columns, found {}", cols.len()),
                ));
            }
            let rel: i64 = cols[3].parse().map_err(|_| {
                Error::parse(
                    idx + 1,
                    4,
                    format!("relevance {:?} is not an integer", cols[3]),
                )
            })?;
            let entry = queries.entry(cols[0].to_string()).or_default();
            if rel > 0 {
                entry.insert(cols[2].to_string());
            }
        }
        Self::new(queries)
    }

    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (q, rel) in &self.queries {
            for d in rel {
                let _ = writeln!(out, "{q} 0 {d} 1");
            }
        }
        out
    }

    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.queries.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Ranked candidate ids per query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Run {
    pub queries: BTreeMap<String, Vec<String>>,
}

impl Run {
    /// TREC run: `qid Q0 docid rank score tag`. Each query is ordered by its
    /// rank column, which must hold distinct positive integers.
    pub fn from_trec<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: BTreeMap<String, Vec<(u64, String, usize)>> = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                continue;
            }
            if cols.len() != 6 {
                return Err(Error::parse(
                    line_no,
                    1,
                    format!("run line needs 6 columns, found {}", cols.len()),
                ));
            }
            let rank: u64 = cols[3]
                .parse()
                .ok()
                .filter(|&r| r >= 1)
                .ok_or_else(|| Error::parse(line_no, 4, format!("bad rank {:?}", cols[3])))?;
            let score: f64 = cols[4]
                .parse()
                .map_err(|_| Error::parse(line_no, 5, format!("bad score {:?}", cols[4])))?;
            if !score.is_finite() {
                return Err(Error::parse(line_no, 5, "score is not finite"));
            }
            rows.entry(cols[0].to_string())
                .or_default()
                .push((rank, cols[2].to_string(), line_no));
        }

        let mut queries = BTreeMap::new();
        for (q, mut entries) in rows {
            entries.sort_by_key(|e| e.0);
            if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation(format!(
                    "query {q}: rank {} repeated on lines {} and {}",
                    w[0].0, w[0].2, w[1].2
                )));
            }
            let docs: Vec<String> = entries.into_iter().map(|e| e.1).collect();
            check_unique(&docs).map_err(|e| Error::Validation(format!("query {q}: {e}")))?;
            queries.insert(q, docs);
        }
        Ok(Self { queries })
    }
}

fn check_unique<S: AsRef<str>>(ranked: &[S]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ranked.len());
    for id in ranked {
        if !seen.insert(id.as_ref()) {
            return Err(Error::Validation(format!(
                "candidate {} ranked more than once",
                id.as_ref()
            )));
        }
    }
    Ok(())
}

fn check_inputs<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>) -> Result<()> {
    if relevant.is_empty() {
        return Err(Error::Validation("relevant set is empty".to_string()));
    }
    check_unique(ranked)
}

/// Positions (1-based) of relevant items.
fn hits<'a, S: AsRef<str>>(
    ranked: &'a [S],
    relevant: &'a BTreeSet<String>,
) -> impl Iterator<Item = usize> + 'a {
    ranked
        .iter()
        .enumerate()
        .filter(|(_, id)| relevant.contains(id.as_ref()))
        .map(|(i, _)| i + 1)
}

/// Mean over all relevant items of precision at that item's rank; relevant
/// items missing from the ranking contribute zero.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>) -> Result<f64> {
    check_inputs(ranked, relevant)?;
    let sum: f64 = hits(ranked, relevant)
        .enumerate()
        .map(|(found, rank)| (found + 1) as f64 / rank as f64)
        .fold(0.0, |acc, x| acc + x);
    Ok(sum / relevant.len() as f64)
}

pub fn reciprocal_rank<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>) -> Result<f64> {
    check_inputs(ranked, relevant)?;
    Ok(hits(ranked, relevant)
        .next()
        .map_or(0.0, |r| 1.0 / r as f64))
}

/// Binary-gain nDCG over the whole ranking.
pub fn ndcg<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>) -> Result<f64> {
    check_inputs(ranked, relevant)?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg = hits(ranked, relevant)
        .map(discount)
        .fold(0.0, |acc, x| acc + x);
    let idcg: f64 = (1..=relevant.len()).map(discount).sum();
    Ok(dcg / idcg)
}

/// Relevant items in the top `k`, divided by `k` even if fewer are ranked.
pub fn precision_at_k<S: AsRef<str>>(
    ranked: &[S],
    relevant: &BTreeSet<String>,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".to_string()));
    }
    check_inputs(ranked, relevant)?;
    let n = hits(ranked, relevant).take_while(|&r| r <= k).count();
    Ok(n as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub relevant: usize,
    pub retrieved: usize,
    pub ap: f64,
    pub rr: f64,
    pub ndcg: f64,
    pub precision: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub map: f64,
    pub mrr: f64,
    pub ndcg: f64,
    pub precision: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub query_count: usize,
    pub depth: Option<usize>,
    pub mean: MeanMetrics,
    pub per_query: Vec<QueryMetrics>,
}

impl MetricReport {
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>8}", "queries", self.query_count);
        let _ = writeln!(out, "{:<8} {:>8.4}", "MAP", self.mean.map);
        let _ = writeln!(out, "{:<8} {:>8.4}", "MRR", self.mean.mrr);
        let _ = writeln!(out, "{:<8} {:>8.4}", "nDCG", self.mean.ndcg);
        for (k, p) in &self.mean.precision {
            let _ = writeln!(out, "{:<8} {:>8.4}", format!("P@{k}"), p);
        }
        out
    }
}

fn query_metrics<S: AsRef<str>>(
    query_id: &str,
    ranked: &[S],
    relevant: &BTreeSet<String>,
    ks: &[usize],
) -> Result<QueryMetrics> {
    Ok(QueryMetrics {
        query_id: query_id.to_string(),
        relevant: relevant.len(),
        retrieved: ranked.len(),
        ap: average_precision(ranked, relevant)?,
        rr: reciprocal_rank(ranked, relevant)?,
        ndcg: ndcg(ranked, relevant)?,
        precision: ks
            .iter()
            .map(|&k| precision_at_k(ranked, relevant, k).map(|p| (k, p)))
            .collect::<Result<_>>()?,
    })
}

/// Scores every qrels query; queries absent from the run score zero. A run
/// query missing from the qrels is an error. `depth` truncates each ranking
/// before scoring.
pub fn evaluate_run(
    run: &Run,
    qrels: &Qrels,
    ks: &[usize],
    depth: Option<usize>,
) -> Result<MetricReport> {
    if ks.contains(&0) {
        return Err(Error::Config("K must be at least 1".to_string()));
    }
    if depth == Some(0) {
        return Err(Error::Config("depth must be at least 1".to_string()));
    }
    let unknown: Vec<String> = run
        .queries
        .keys()
        .filter(|q| qrels.relevant(q).is_none())
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownQueries(unknown));
    }

    let empty: Vec<String> = Vec::new();
    let per_query = qrels
        .queries
        .iter()
        .map(|(q, relevant)| {
            let ranked = run.queries.get(q).unwrap_or(&empty);
            let ranked = &ranked[..depth.map_or(ranked.len(), |d| d.min(ranked.len()))];
            query_metrics(q, ranked, relevant, ks)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = per_query.len().max(1) as f64;
    let mean_of =
        |f: &dyn Fn(&QueryMetrics) -> f64| per_query.iter().map(f).fold(0.0, |acc, x| acc + x) / n;
    let mean = MeanMetrics {
        map: mean_of(&|m| m.ap),
        mrr: mean_of(&|m| m.rr),
        ndcg: mean_of(&|m| m.ndcg),
        precision: ks
            .iter()
            .map(|&k| (k, mean_of(&|m| m.precision[&k])))
            .collect(),
    };
    Ok(MetricReport {
        query_count: per_query.len(),
        depth,
        mean,
        per_query,
    })
}
