//! Exhaustive cosine ranking for title matching and alias-collapsed skill
//! prediction.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{dot, EmbeddingVector, ModelParams, Space};
use crate::error::{Error, Result};

/// ESCO skill id to its alias labels, aliases kept in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkillGazetteer {
    skills: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct GazetteerLine {
    skill_id: String,
    aliases: Vec<String>,
}

impl SkillGazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, skill_id: &str, alias: &str) -> Result<()> {
        let alias = alias.trim();
        if skill_id.is_empty() || alias.is_empty() {
            return Err(Error::Validation(format!(
                "empty skill id or alias ({skill_id:?}, {alias:?})"
            )));
        }
        let aliases = self.skills.entry(skill_id.to_string()).or_default();
        if !aliases.iter().any(|a| a == alias) {
            aliases.push(alias.to_string());
        }
        Ok(())
    }

    /// Reads `{"skill_id": ..., "aliases": [...]}` lines.
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut g = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: GazetteerLine = serde_json::from_str(&line)
                .map_err(|e| Error::parse(idx + 1, e.column(), e.to_string()))?;
            if entry.aliases.is_empty() {
                return Err(Error::Validation(format!(
                    "line {}: skill {} has no aliases",
                    idx + 1,
                    entry.skill_id
                )));
            }
            for alias in &entry.aliases {
                g.insert(&entry.skill_id, alias)
                    .map_err(|e| Error::Validation(format!("line {}: {e}", idx + 1)))?;
            }
        }
        Ok(g)
    }

    /// Reads `skill_id<TAB>alias` lines, one alias per line.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut g = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let (id, alias) = line.split_once('\t').ok_or_else(|| {
                Error::parse(
                    idx + 1,
                    line.chars().count() + 1,
                    "expected skill_id<TAB>alias",
                )
            })?;
            g.insert(id, alias)
                .map_err(|e| Error::Validation(format!("line {}: {e}", idx + 1)))?;
        }
        Ok(g)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, aliases) in &self.skills {
            serde_json::to_writer(
                &mut out,
                &serde_json::json!({"skill_id": id, "aliases": aliases}),
            )?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn aliases(&self, skill_id: &str) -> Option<&[String]> {
        self.skills.get(skill_id).map(Vec::as_slice)
    }

    /// First alias listed for the skill.
    pub fn preferred_label(&self, skill_id: &str) -> Option<&str> {
        self.skills
            .get(skill_id)
            .and_then(|a| a.first())
            .map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.skills.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn alias_count(&self) -> usize {
        self.skills.values().map(Vec::len).sum()
    }
}

/// Unit vectors for a fixed candidate set, one row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    ids: Vec<String>,
    dim: usize,
    rows: Vec<f64>,
    space: Space,
}

impl VectorIndex {
    pub fn from_vectors(entries: Vec<(String, EmbeddingVector)>, space: Space) -> Result<Self> {
        let dim = entries.first().map_or(0, |(_, v)| v.dim());
        let mut seen = HashSet::new();
        let mut ids = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len() * dim);
        for (id, v) in entries {
            if v.space != space || v.dim() != dim {
                return Err(Error::Shape(format!(
                    "candidate {id}: {}-dim {} vector in a {dim}-dim {space} index",
                    v.dim(),
                    v.space
                )));
            }
            if (v.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "candidate {id} is not unit-norm"
                )));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Validation(format!("duplicate candidate id {id}")));
            }
            ids.push(id);
            rows.extend_from_slice(&v.values);
        }
        Ok(Self {
            ids,
            dim,
            rows,
            space,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major little-endian bytes, for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.rows.iter().flat_map(|x| x.to_le_bytes()).collect()
    }
}

/// Embeds each `(id, text)` title in the requested space.
pub fn build_index(
    params: &ModelParams,
    texts: &[(String, String)],
    space: Space,
) -> Result<VectorIndex> {
    if texts.is_empty() {
        return Err(Error::empty("candidate list"));
    }
    let entries = texts
        .par_iter()
        .map(|(id, text)| {
            params
                .embed_title(text, space)
                .map(|v| (id.clone(), v))
                .map_err(|e| with_id(e, id))
        })
        .collect::<Result<Vec<_>>>()?;
    VectorIndex::from_vectors(entries, space)
}

fn with_id(err: Error, id: &str) -> Error {
    match err {
        Error::EmptyInput { context } => Error::EmptyInput {
            context: Some(match context {
                Some(c) => format!("{id}: {c}"),
                None => id.to_string(),
            }),
        },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<Scored>,
}

impl RankedList {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }
}

/// Descending score, then ascending id.
pub fn rank_order(a: &Scored, b: &Scored) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

/// Ranks the index against an already-embedded query.
pub fn rank_vector(
    query_id: &str,
    query: &EmbeddingVector,
    index: &VectorIndex,
    depth: Option<usize>,
) -> Result<RankedList> {
    if query.space != index.space || query.dim() != index.dim {
        return Err(Error::Shape(format!(
            "{}-dim {} query against {}-dim {} index",
            query.dim(),
            query.space,
            index.dim,
            index.space
        )));
    }
    let mut entries: Vec<Scored> = index
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| Scored {
            id: id.clone(),
            score: cosine(&query.values, index.row(i)),
        })
        .collect();
    entries.sort_by(rank_order);
    if let Some(depth) = depth {
        entries.truncate(depth);
    }
    Ok(RankedList {
        query_id: query_id.to_string(),
        entries,
    })
}

/// Task A ranking: the query is embedded in the index's space.
pub fn rank_titles(
    params: &ModelParams,
    query_id: &str,
    query: &str,
    index: &VectorIndex,
    depth: Option<usize>,
) -> Result<RankedList> {
    if depth == Some(0) {
        return Err(Error::Config("depth must be at least 1".to_string()));
    }
    let v = params.embed_title(query, index.space)?;
    rank_vector(query_id, &v, index, depth)
}

/// Encoder-space embeddings of every gazetteer alias.
#[derive(Debug, Clone)]
pub struct SkillIndex {
    /// (skill id, alias) per row.
    aliases: Vec<(String, String)>,
    index: VectorIndex,
}

impl SkillIndex {
    pub fn build(params: &ModelParams, gazetteer: &SkillGazetteer) -> Result<Self> {
        if gazetteer.is_empty() {
            return Err(Error::empty("gazetteer"));
        }
        let aliases: Vec<(String, String)> = gazetteer
            .iter()
            .flat_map(|(id, als)| als.iter().map(move |a| (id.to_string(), a.clone())))
            .collect();
        let keyed: Vec<(String, String)> = aliases
            .iter()
            .enumerate()
            .map(|(i, (_, a))| (i.to_string(), a.clone()))
            .collect();
        let index = build_index(params, &keyed, Space::Encoder)?;
        Ok(Self { aliases, index })
    }

    /// Every alias scored against the title, in rank order.
    pub fn rank_aliases(&self, title_vec: &EmbeddingVector) -> Vec<(String, String, f64)> {
        let mut scored: Vec<(String, String, f64)> = self
            .aliases
            .iter()
            .enumerate()
            .map(|(i, (skill, alias))| {
                (
                    skill.clone(),
                    alias.clone(),
                    cosine(&title_vec.values, self.index.row(i)),
                )
            })
            .collect();
        scored.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| (&a.0, &a.1).cmp(&(&b.0, &b.1)))
        });
        scored
    }

    /// Each skill keeps the score of its best alias.
    pub fn rank(&self, params: &ModelParams, query_id: &str, title: &str) -> Result<RankedList> {
        let v = params.embed_text(title)?;
        let mut best: BTreeMap<&str, f64> = BTreeMap::new();
        for (i, (skill, _)) in self.aliases.iter().enumerate() {
            let s = cosine(&v.values, self.index.row(i));
            best.entry(skill.as_str())
                .and_modify(|b| *b = b.max(s))
                .or_insert(s);
        }
        let mut entries: Vec<Scored> = best
            .into_iter()
            .map(|(id, score)| Scored {
                id: id.to_string(),
                score,
            })
            .collect();
        entries.sort_by(rank_order);
        Ok(RankedList {
            query_id: query_id.to_string(),
            entries,
        })
    }
}

/// Task B ranking over skills, using encoder-space (unprojected) title vectors.
pub fn rank_skills(
    params: &ModelParams,
    query_id: &str,
    title: &str,
    gazetteer: &SkillGazetteer,
) -> Result<RankedList> {
    SkillIndex::build(params, gazetteer)?.rank(params, query_id, title)
}

/// `qid Q0 docid rank score tag`, ranks from 1, six decimals.
pub fn write_trec_run<W: Write>(mut out: W, lists: &[RankedList], tag: &str) -> Result<()> {
    for list in lists {
        for (rank, e) in list.entries.iter().enumerate() {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                list.query_id,
                e.id,
                rank + 1,
                e.score,
                tag
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderConfig;

    fn params() -> ModelParams {
        ModelParams::init(
            EncoderConfig {
                hash_buckets: 256,
                embed_dim: 8,
                proj_dim: 8,
                ngram_min: 3,
                ngram_max: 4,
            },
            21,
        )
        .unwrap()
    }

    fn texts(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn index_shapes_follow_space() {
        let mut p = params();
        p.config.proj_dim = 5;
        p.projection = (0..40).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let t = texts(&[("a", "chef"), ("b", "nurse"), ("c", "welder")]);
        let proj = build_index(&p, &t, Space::Projected).unwrap();
        assert_eq!((proj.len(), proj.dim()), (3, 5));
        let enc = build_index(&p, &t, Space::Encoder).unwrap();
        assert_eq!((enc.len(), enc.dim()), (3, 8));
        assert_eq!(
            build_index(&p, &t, Space::Encoder).unwrap().to_bytes(),
            enc.to_bytes()
        );
    }

    #[test]
    fn empty_candidate_names_its_id() {
        let err = build_index(
            &params(),
            &texts(&[("a", "chef"), ("bad", " ")]),
            Space::Encoder,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");
    }

    #[test]
    fn duplicate_candidates_rejected() {
        let err = build_index(
            &params(),
            &texts(&[("a", "chef"), ("a", "cook")]),
            Space::Encoder,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn exact_match_ranks_first() {
        let p = params();
        let idx = build_index(
            &p,
            &texts(&[("1", "nurse"), ("2", "media buyer"), ("3", "welder")]),
            Space::Projected,
        )
        .unwrap();
        let list = rank_titles(&p, "q", "media buyer", &idx, None).unwrap();
        assert_eq!(list.entries[0].id, "2");
        assert!((list.entries[0].score - 1.0).abs() < 1e-12);
        assert!(rank_titles(&p, "q", "", &idx, None).is_err());
        assert_eq!(
            rank_titles(&p, "q", "chef", &idx, Some(2))
                .unwrap()
                .entries
                .len(),
            2
        );
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let v = |x: f64, y: f64| EmbeddingVector::unit(vec![x, y], Space::Encoder).unwrap();
        let idx = VectorIndex::from_vectors(
            vec![
                ("b".into(), v(1.0, 0.0)),
                ("a".into(), v(1.0, 0.0)),
                ("c".into(), v(0.0, 1.0)),
            ],
            Space::Encoder,
        )
        .unwrap();
        let list = rank_vector("q", &v(1.0, 0.0), &idx, None).unwrap();
        assert_eq!(list.ids(), vec!["a", "b", "c"]);
    }

    #[test]
    fn max_alias_wins_collapse() {
        // Hand-built table: label "xa" hits row of e1, "xb" hits e2, "xc" hits
        // 0.5 e1 + ..., title "xt" sits at e1-ish.
        let config = EncoderConfig {
            hash_buckets: 512,
            embed_dim: 3,
            proj_dim: 3,
            ngram_min: 9,
            ngram_max: 9,
        };
        let mut table = vec![0.0; 512 * 3];
        let mut set = |tok: &str, v: [f64; 3]| {
            let r = config.bucket(tok);
            table[r * 3..r * 3 + 3].copy_from_slice(&v);
        };
        set("xt", [1.0, 0.0, 0.0]);
        set("xa", [0.2, (1.0f64 - 0.04).sqrt(), 0.0]);
        set("xb", [0.9, 0.0, (1.0f64 - 0.81).sqrt()]);
        set("xc", [0.5, 0.0, -(1.0f64 - 0.25).sqrt()]);
        let identity = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let p = ModelParams::from_parts(config, table, identity).unwrap();
        let mut g = SkillGazetteer::new();
        g.insert("X", "xa").unwrap();
        g.insert("X", "xb").unwrap();
        g.insert("Y", "xc").unwrap();
        let list = rank_skills(&p, "q", "xt", &g).unwrap();
        assert_eq!(list.ids(), vec!["X", "Y"]);
        assert!((list.entries[0].score - 0.9).abs() < 1e-12);
        assert!((list.entries[1].score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gazetteer_formats() {
        let g = SkillGazetteer::from_tsv(
            "s1\tcook food\ns1\tprepare meals\ns2\tweld\ns1\tcook food\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.aliases("s1").unwrap().len(), 2);
        assert_eq!(g.preferred_label("s1"), Some("cook food"));
        let mut buf = Vec::new();
        g.write_jsonl(&mut buf).unwrap();
        let back = SkillGazetteer::from_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        assert!(SkillGazetteer::from_jsonl(r#"{"skill_id":"s","aliases":[]}"#.as_bytes()).is_err());
        assert!(SkillGazetteer::from_tsv("s1 no tab\n".as_bytes()).is_err());
    }

    #[test]
    fn trec_run_format() {
        let lists = vec![RankedList {
            query_id: "q1".into(),
            entries: vec![
                Scored {
                    id: "d1".into(),
                    score: 0.5,
                },
                Scored {
                    id: "d2".into(),
                    score: -0.25,
                },
            ],
        }];
        let mut buf = Vec::new();
        write_trec_run(&mut buf, &lists, "jobbert").unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "q1 Q0 d1 1 0.500000 jobbert\nq1 Q0 d2 2 -0.250000 jobbert\n"
        );
    }
}
