//! Subword-hashing text encoder shared by titles and skills, and the
//! title-side linear projection.
//!
//! Text is NFKC-normalized, trimmed and lowercased, then split into word
//! tokens plus character n-grams. Every token is hashed with 64-bit FNV-1a
//! (offset `0xcbf29ce484222325`, prime `0x100000001b3`) over its UTF-8 bytes and
//! reduced modulo the bucket count to pick a row of the embedding table. A text
//! embedding is the L2-normalized mean of its token rows.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Norm below which a vector is treated as zero.
pub const MIN_NORM: f64 = 1e-12;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub hash_buckets: usize,
    pub embed_dim: usize,
    pub proj_dim: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hash_buckets: 1 << 16,
            embed_dim: 64,
            proj_dim: 64,
            ngram_min: 3,
            ngram_max: 5,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hash_buckets < 2 || self.embed_dim < 2 || self.proj_dim < 2 {
            return Err(Error::Config(format!(
                "hash_buckets, embed_dim and proj_dim must be at least 2 (got {}, {}, {})",
                self.hash_buckets, self.embed_dim, self.proj_dim
            )));
        }
        if self.ngram_min < 1 || self.ngram_min > self.ngram_max {
            return Err(Error::Config(format!(
                "need 1 <= ngram_min <= ngram_max (got {}..{})",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.as_bytes()) % self.hash_buckets as u64) as usize
    }

    /// Row indices of every token of `text`, duplicates kept.
    pub fn buckets(&self, text: &str) -> Result<Vec<usize>> {
        Ok(tokenize(text, self)?
            .iter()
            .map(|t| self.bucket(t))
            .collect())
    }
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF        // hiragana, katakana
        | 0x3400..=0x4DBF      // CJK extension A
        | 0x4E00..=0x9FFF      // CJK unified ideographs
        | 0xAC00..=0xD7AF      // hangul syllables
        | 0xF900..=0xFAFF      // compatibility ideographs
        | 0x20000..=0x2FA1F) // extensions B-F, compatibility supplement
}

fn push_ngrams(out: &mut Vec<String>, chars: &[char], min: usize, max: usize) {
    for n in min..=max.min(chars.len()) {
        out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
}

/// Word tokens plus character n-grams.
///
/// Words are maximal runs of alphanumeric scalars. A word without CJK scalars
/// contributes itself and the n-grams of `<word>`. A word containing CJK
/// scalars contributes itself, each CJK scalar, and the n-grams of its raw
/// scalar sequence (no boundary markers).
pub fn tokenize(text: &str, config: &EncoderConfig) -> Result<Vec<String>> {
    let normalized: String = text.nfkc().collect();
    let normalized = normalized.trim().to_lowercase();
    if normalized.is_empty() {
        return Err(Error::empty("text"));
    }

    let mut tokens = Vec::new();
    for word in normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        tokens.push(word.to_string());
        let chars: Vec<char> = word.chars().collect();
        if chars.iter().any(|&c| is_cjk(c)) {
            tokens.extend(chars.iter().filter(|&&c| is_cjk(c)).map(|c| c.to_string()));
            push_ngrams(&mut tokens, &chars, config.ngram_min, config.ngram_max);
        } else {
            let mut bracketed = Vec::with_capacity(chars.len() + 2);
            bracketed.push('<');
            bracketed.extend_from_slice(&chars);
            bracketed.push('>');
            push_ngrams(&mut tokens, &bracketed, config.ngram_min, config.ngram_max);
        }
    }
    if tokens.is_empty() {
        return Err(Error::empty(format!("no word characters in {text:?}")));
    }
    Ok(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Encoder,
    Projected,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Encoder => "encoder",
            Space::Projected => "projected",
        })
    }
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encoder" => Ok(Space::Encoder),
            "projected" => Ok(Space::Projected),
            other => Err(Error::Config(format!("unknown space {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub space: Space,
    pub normalized: bool,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.values, &other.values)
    }

    /// Builds a unit vector from raw values.
    pub fn unit(values: Vec<f64>, space: Space) -> Result<Self> {
        let mut values = values;
        normalize_in_place(&mut values, "embedding")?;
        Ok(Self {
            values,
            space,
            normalized: true,
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales to unit length and returns the original norm.
pub fn normalize_in_place(v: &mut [f64], what: &'static str) -> Result<f64> {
    let n = norm(v);
    if n.is_nan() || n < MIN_NORM {
        return Err(Error::Degenerate { what, norm: n });
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(n)
}

/// Trainable state: the `H x d` embedding table and the `p x d` title projection,
/// both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub embeddings: Vec<f64>,
    pub projection: Vec<f64>,
}

impl ModelParams {
    /// Table entries uniform on `[-1/sqrt(d), 1/sqrt(d))` drawn row-major from
    /// `SplitMix64(seed)`. The projection is the identity when `p == d`,
    /// otherwise drawn the same way from the continuing stream.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (h, d, p) = (config.hash_buckets, config.embed_dim, config.proj_dim);
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = SplitMix64::new(seed);
        let embeddings = (0..h * d).map(|_| rng.uniform(-bound, bound)).collect();
        let projection = if p == d {
            let mut w = vec![0.0; p * d];
            (0..d).for_each(|i| w[i * d + i] = 1.0);
            w
        } else {
            (0..p * d).map(|_| rng.uniform(-bound, bound)).collect()
        };
        Ok(Self {
            config,
            embeddings,
            projection,
        })
    }

    pub fn from_parts(
        config: EncoderConfig,
        embeddings: Vec<f64>,
        projection: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let (h, d, p) = (config.hash_buckets, config.embed_dim, config.proj_dim);
        if embeddings.len() != h * d || projection.len() != p * d {
            return Err(Error::Shape(format!(
                "expected {h}x{d} table and {p}x{d} projection, got {} and {} values",
                embeddings.len(),
                projection.len()
            )));
        }
        let params = Self {
            config,
            embeddings,
            projection,
        };
        params.check_finite()?;
        Ok(params)
    }

    pub fn row(&self, bucket: usize) -> &[f64] {
        let d = self.config.embed_dim;
        &self.embeddings[bucket * d..(bucket + 1) * d]
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, values) in [
            ("embedding", &self.embeddings),
            ("projection", &self.projection),
        ] {
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("non-finite {name} entry {v}")));
            }
        }
        Ok(())
    }

    /// Unnormalized mean of the rows hit by `buckets`.
    pub fn pool(&self, buckets: &[usize]) -> Vec<f64> {
        let d = self.config.embed_dim;
        let mut acc = vec![0.0; d];
        for &b in buckets {
            acc.iter_mut().zip(self.row(b)).for_each(|(a, r)| *a += r);
        }
        let scale = 1.0 / buckets.len() as f64;
        acc.iter_mut().for_each(|a| *a *= scale);
        acc
    }

    /// `W v`.
    pub fn apply_projection(&self, v: &[f64]) -> Vec<f64> {
        let d = self.config.embed_dim;
        self.projection
            .chunks_exact(d)
            .map(|row| dot(row, v))
            .collect()
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let buckets = self.config.buckets(text)?;
        EmbeddingVector::unit(self.pool(&buckets), Space::Encoder)
    }

    pub fn project_title(&self, v: &EmbeddingVector) -> Result<EmbeddingVector> {
        if v.space != Space::Encoder || v.dim() != self.config.embed_dim {
            return Err(Error::Shape(format!(
                "projection expects a {}-dim encoder vector, got {}-dim {}",
                self.config.embed_dim,
                v.dim(),
                v.space
            )));
        }
        let mut z = self.apply_projection(&v.values);
        normalize_in_place(&mut z, "projection")?;
        Ok(EmbeddingVector {
            values: z,
            space: Space::Projected,
            normalized: true,
        })
    }

    /// Title vector in the requested space.
    pub fn embed_title(&self, text: &str, space: Space) -> Result<EmbeddingVector> {
        let v = self.embed_text(text)?;
        match space {
            Space::Encoder => Ok(v),
            Space::Projected => self.project_title(&v),
        }
    }

    /// Normalized mean of the distinct labels' encoder embeddings.
    pub fn embed_skill_set<S: AsRef<str>>(&self, labels: &[S]) -> Result<EmbeddingVector> {
        let unique: BTreeSet<&str> = labels.iter().map(AsRef::as_ref).collect();
        if unique.is_empty() {
            return Err(Error::empty("skill set"));
        }
        let mut acc = vec![0.0; self.config.embed_dim];
        for label in &unique {
            let v = self.embed_text(label)?;
            acc.iter_mut().zip(&v.values).for_each(|(a, x)| *a += x);
        }
        let scale = 1.0 / unique.len() as f64;
        acc.iter_mut().for_each(|a| *a *= scale);
        EmbeddingVector::unit(acc, Space::Encoder)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(64 + 8 * (self.embeddings.len() + self.projection.len()));
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for v in [c.hash_buckets, c.embed_dim, c.proj_dim] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in [c.ngram_min, c.ngram_max] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&FNV_OFFSET.to_le_bytes());
        out.extend_from_slice(&FNV_PRIME.to_le_bytes());
        for x in self.embeddings.iter().chain(&self.projection) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".to_string()));
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let (h, d, p) = (
            cur.u64()? as usize,
            cur.u64()? as usize,
            cur.u64()? as usize,
        );
        let (ngram_min, ngram_max) = (cur.u32()? as usize, cur.u32()? as usize);
        let (offset, prime) = (cur.u64()?, cur.u64()?);
        if offset != FNV_OFFSET || prime != FNV_PRIME {
            return Err(Error::Checkpoint(
                "checkpoint was written with different hash constants".to_string(),
            ));
        }
        let config = EncoderConfig {
            hash_buckets: h,
            embed_dim: d,
            proj_dim: p,
            ngram_min,
            ngram_max,
        };
        config.validate()?;
        let expected = h
            .checked_mul(d)
            .zip(p.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint("dimensions overflow".to_string()))?;
        let remaining = bytes.len() - cur.pos;
        if remaining != 8 * (expected.0 + expected.1) {
            return Err(Error::Checkpoint(format!(
                "expected {} payload bytes, found {remaining}",
                8 * (expected.0 + expected.1)
            )));
        }
        let mut floats = (0..expected.0 + expected.1).map(|_| cur.f64());
        let embeddings = floats
            .by_ref()
            .take(expected.0)
            .collect::<Result<Vec<_>>>()?;
        let projection = floats.collect::<Result<Vec<_>>>()?;
        Self::from_parts(config, embeddings, projection)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        file.write_all(&self.to_bytes())
            .map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the checkpoint encoding, hex.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Checkpoint layout, all integers and floats little-endian:
///
/// | field | type |
/// |---|---|
/// | magic `JBV3CKPT` | 8 bytes |
/// | format version (1) | u32 |
/// | hash buckets H, embed dim d, proj dim p | 3 x u64 |
/// | ngram min, ngram max | 2 x u32 |
/// | FNV offset basis, FNV prime | 2 x u64 |
/// | embedding table, row-major | H*d x f64 |
/// | projection, row-major | p*d x f64 |
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"JBV3CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".to_string()))?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EncoderConfig {
        EncoderConfig {
            hash_buckets: 64,
            embed_dim: 8,
            proj_dim: 8,
            ngram_min: 3,
            ngram_max: 5,
        }
    }

    #[test]
    fn fnv1a_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn tokenizes_latin_word_with_boundary_ngrams() {
        let tokens = tokenize("Chef", &small()).unwrap();
        assert_eq!(
            tokens,
            vec!["chef", "<ch", "che", "hef", "ef>", "<che", "chef", "hef>", "<chef", "chef>"]
        );
    }

    #[test]
    fn splits_on_punctuation_and_whitespace() {
        let tokens = tokenize("Media-Buyer  (NYC)", &small()).unwrap();
        let words: Vec<_> = tokens
            .iter()
            .filter(|t| !t.contains('<') && !t.contains('>'))
            .collect();
        assert!(words.contains(&&"media".to_string()));
        assert!(words.contains(&&"buyer".to_string()));
        assert!(words.contains(&&"nyc".to_string()));
    }

    #[test]
    fn cjk_scalars_become_tokens() {
        let tokens = tokenize("软件开发", &small()).unwrap();
        assert_eq!(
            tokens,
            vec![
                "软件开发",
                "软",
                "件",
                "开",
                "发",
                "软件开",
                "件开发",
                "软件开发"
            ]
        );
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(
            tokenize("", &small()),
            Err(Error::EmptyInput { .. })
        ));
        assert!(matches!(
            tokenize(" \t ", &small()),
            Err(Error::EmptyInput { .. })
        ));
        assert!(matches!(
            tokenize("--", &small()),
            Err(Error::EmptyInput { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = small();
        c.ngram_min = 6;
        assert!(c.validate().is_err());
        let mut c = small();
        c.hash_buckets = 1;
        assert!(c.validate().is_err());
        assert!(EncoderConfig::default().validate().is_ok());
    }

    #[test]
    fn embeddings_are_unit_and_deterministic() {
        let params = ModelParams::init(small(), 3).unwrap();
        let a = params.embed_text("media buyer").unwrap();
        let b = params.embed_text("media buyer").unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a, b);
        assert_eq!(a.space, Space::Encoder);
    }

    #[test]
    fn single_token_reads_its_row() {
        // One token: with ngram range 9..9 the word "ab" yields only itself.
        let config = EncoderConfig {
            hash_buckets: 4,
            embed_dim: 4,
            proj_dim: 4,
            ngram_min: 9,
            ngram_max: 9,
        };
        let token = "ab";
        let row = (fnv1a64(token.as_bytes()) % 4) as usize;
        let mut table = vec![0.0; 16];
        for r in 0..4 {
            table[r * 4 + r] = 3.0;
        }
        let identity = (0..16)
            .map(|i| if i % 5 == 0 { 1.0 } else { 0.0 })
            .collect();
        let params = ModelParams::from_parts(config, table, identity).unwrap();
        let v = params.embed_text(token).unwrap();
        let mut expected = vec![0.0; 4];
        expected[row] = 1.0;
        assert_eq!(v.values, expected);
    }

    #[test]
    fn identity_projection_is_a_no_op() {
        let params = ModelParams::init(small(), 5).unwrap();
        let v = params.embed_text("chef").unwrap();
        let t = params.project_title(&v).unwrap();
        assert_eq!(t.space, Space::Projected);
        for (a, b) in t.values.iter().zip(&v.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_is_scale_invariant() {
        let mut params = ModelParams::init(small(), 5).unwrap();
        params.projection.iter_mut().for_each(|w| *w *= 2.0);
        let v = params.embed_text("chef").unwrap();
        let t = params.project_title(&v).unwrap();
        for (a, b) in t.values.iter().zip(&v.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_of_basis_vector_is_normalized_column() {
        let config = EncoderConfig {
            hash_buckets: 4,
            embed_dim: 4,
            proj_dim: 4,
            ngram_min: 3,
            ngram_max: 5,
        };
        let w = vec![
            0.5, -1.0, 2.0, 0.0, //
            1.5, 0.3, 0.0, 1.0, //
            -2.0, 0.7, 1.0, 0.0, //
            1.0, 0.0, 0.0, 4.0,
        ];
        let params = ModelParams::from_parts(config, vec![0.1; 16], w).unwrap();
        let e1 = EmbeddingVector::unit(vec![1.0, 0.0, 0.0, 0.0], Space::Encoder).unwrap();
        let t = params.project_title(&e1).unwrap();
        // First column (0.5, 1.5, -2.0, 1.0) has norm sqrt(7.5).
        let n = 7.5f64.sqrt();
        let expected = [0.5 / n, 1.5 / n, -2.0 / n, 1.0 / n];
        for (a, b) in t.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_projection_is_degenerate() {
        let mut params = ModelParams::init(small(), 5).unwrap();
        params.projection.iter_mut().for_each(|w| *w = 0.0);
        let v = params.embed_text("chef").unwrap();
        assert!(matches!(
            params.project_title(&v),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn projection_rejects_projected_input() {
        let params = ModelParams::init(small(), 5).unwrap();
        let v = params.embed_title("chef", Space::Projected).unwrap();
        assert!(matches!(params.project_title(&v), Err(Error::Shape(_))));
    }

    #[test]
    fn skill_set_of_one_equals_text_embedding() {
        let params = ModelParams::init(small(), 9).unwrap();
        let a = params.embed_skill_set(&["negotiation"]).unwrap();
        let b = params.embed_text("negotiation").unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn skill_set_is_order_free_and_deduplicated() {
        let params = ModelParams::init(small(), 9).unwrap();
        let a = params
            .embed_skill_set(&["cook", "bake", "plan menus"])
            .unwrap();
        let b = params
            .embed_skill_set(&["plan menus", "cook", "bake", "cook"])
            .unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            params.embed_skill_set::<&str>(&[]),
            Err(Error::EmptyInput { .. })
        ));
    }

    #[test]
    fn orthogonal_labels_average_to_diagonal() {
        // Table rows are the basis vectors; labels "xa" and "xb" (ngrams off)
        // each hash to one row.
        let config = EncoderConfig {
            hash_buckets: 64,
            embed_dim: 4,
            proj_dim: 4,
            ngram_min: 9,
            ngram_max: 9,
        };
        let (ra, rb) = (config.bucket("xa"), config.bucket("xb"));
        assert_ne!(ra, rb);
        let mut table = vec![0.0; 64 * 4];
        table[ra * 4] = 1.0;
        table[rb * 4 + 1] = 1.0;
        let identity = (0..16)
            .map(|i| if i % 5 == 0 { 1.0 } else { 0.0 })
            .collect();
        let params = ModelParams::from_parts(config, table, identity).unwrap();
        let s = params.embed_skill_set(&["xa", "xb"]).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(s.values.len(), 4);
        for (a, b) in s.values.iter().zip([h, h, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut config = small();
        config.proj_dim = 5;
        let params = ModelParams::init(config, 17).unwrap();
        let bytes = params.to_bytes();
        assert_eq!(&bytes[..8], b"JBV3CKPT");
        let back = ModelParams::from_bytes(&bytes).unwrap();
        assert_eq!(back, params);
        assert_eq!(back.checksum(), params.checksum());
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let params = ModelParams::init(small(), 17).unwrap();
        let bytes = params.to_bytes();
        assert!(ModelParams::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ModelParams::from_bytes(&bad).is_err());
    }

    #[test]
    fn rectangular_projection_init() {
        let mut config = small();
        config.proj_dim = 12;
        let params = ModelParams::init(config, 1).unwrap();
        assert_eq!(params.projection.len(), 12 * 8);
        let bound = 1.0 / 8f64.sqrt();
        assert!(params.projection.iter().all(|w| w.abs() <= bound));
        let t = params.embed_title("chef", Space::Projected).unwrap();
        assert_eq!(t.dim(), 12);
    }
}
