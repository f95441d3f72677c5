//! InfoNCE training of the shared encoder and the title projection.
//!
//! Titles are queries and the skill sets of the same batch are candidates:
//!
//! ```text
//! loss = -(1/B) * sum_i log( exp(t_i . s_i / tau) / sum_j exp(t_i . s_j / tau) )
//! ```
//!
//! Gradients are derived by hand through the softmax, both L2
//! normalizations, the projection, the skill-set mean and the table lookups.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{make_batches, BatchItem, JobAdRecord};
use crate::encoder::{dot, norm, EncoderConfig, ModelParams, MIN_NORM};
use crate::error::{Error, Result};
use crate::ranker::SkillGazetteer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Average the title->skill and skill->title directions.
    pub symmetric: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            temperature: 0.05,
            learning_rate: 1e-3,
            epochs: 1,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            symmetric: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad_titles: Vec<Vec<f64>>,
    pub grad_skills: Vec<Vec<f64>>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_batch<V: AsRef<[f64]>>(titles: &[V], skills: &[V], temperature: f64) -> Result<()> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if titles.len() != skills.len() {
        return Err(Error::Shape(format!(
            "{} titles vs {} skill sets",
            titles.len(),
            skills.len()
        )));
    }
    if titles.len() < 2 {
        return Err(Error::Shape("InfoNCE needs at least 2 pairs".to_string()));
    }
    let dim = titles[0].as_ref().len();
    if titles.iter().chain(skills).any(|v| v.as_ref().len() != dim) {
        return Err(Error::Shape("vectors differ in dimension".to_string()));
    }
    Ok(())
}

/// Loss and exact gradients for titles as queries over in-batch skill sets.
///
/// The caller supplies unit vectors; the formula itself does not renormalize.
pub fn info_nce_loss<V: AsRef<[f64]>>(
    titles: &[V],
    skills: &[V],
    temperature: f64,
) -> Result<LossOutput> {
    check_batch(titles, skills, temperature)?;
    let b = titles.len();
    let dim = titles[0].as_ref().len();
    let inv_tau = 1.0 / temperature;

    let mut loss = 0.0;
    let mut grad_titles = vec![vec![0.0; dim]; b];
    let mut grad_skills = vec![vec![0.0; dim]; b];
    for i in 0..b {
        let t = titles[i].as_ref();
        let logits: Vec<f64> = skills
            .iter()
            .map(|s| dot(t, s.as_ref()) * inv_tau)
            .collect();
        let lse = log_sum_exp(logits.iter().copied());
        loss += lse - logits[i];
        for (j, &l) in logits.iter().enumerate() {
            // d loss / d logit_ij, already scaled by 1/B and 1/tau.
            let p = (l - lse).exp();
            let coeff = (p - if i == j { 1.0 } else { 0.0 }) * inv_tau / b as f64;
            let s = skills[j].as_ref();
            for k in 0..dim {
                grad_titles[i][k] += coeff * s[k];
                grad_skills[j][k] += coeff * t[k];
            }
        }
    }
    Ok(LossOutput {
        loss: loss / b as f64,
        grad_titles,
        grad_skills,
    })
}

/// Mean of the title->skill and skill->title losses.
pub fn symmetric_info_nce_loss<V: AsRef<[f64]>>(
    titles: &[V],
    skills: &[V],
    temperature: f64,
) -> Result<LossOutput> {
    let forward = info_nce_loss(titles, skills, temperature)?;
    let backward = info_nce_loss(skills, titles, temperature)?;
    let mix = |a: Vec<Vec<f64>>, b: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        a.into_iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect())
            .collect()
    };
    Ok(LossOutput {
        loss: 0.5 * (forward.loss + backward.loss),
        grad_titles: mix(forward.grad_titles, backward.grad_skills),
        grad_skills: mix(forward.grad_skills, backward.grad_titles),
    })
}

/// A training pair reduced to table rows: the title's token buckets and one
/// bucket list per distinct skill label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub title: Vec<usize>,
    pub skills: Vec<Vec<usize>>,
}

impl Example {
    pub fn from_text<S: AsRef<str>>(
        config: &EncoderConfig,
        title: &str,
        labels: &[S],
    ) -> Result<Self> {
        let unique: BTreeSet<&str> = labels.iter().map(AsRef::as_ref).collect();
        if unique.is_empty() {
            return Err(Error::empty("skill set"));
        }
        Ok(Self {
            title: config.buckets(title)?,
            skills: unique
                .into_iter()
                .map(|l| config.buckets(l))
                .collect::<Result<_>>()?,
        })
    }

    /// Resolves skill ids to label text (preferred gazetteer alias, else the id).
    pub fn from_item(
        config: &EncoderConfig,
        item: &BatchItem,
        gazetteer: Option<&SkillGazetteer>,
    ) -> Result<Self> {
        let labels: Vec<&str> = item
            .skills
            .iter()
            .map(|id| {
                gazetteer
                    .and_then(|g| g.preferred_label(id))
                    .unwrap_or(id.as_str())
            })
            .collect();
        Self::from_text(config, &item.title, &labels)
    }

    fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.title
            .iter()
            .chain(self.skills.iter().flatten())
            .copied()
    }
}

/// Gradient of the batch loss: sparse over table rows, dense over the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: BTreeMap<usize, Vec<f64>>,
    pub projection: Vec<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        let rows: f64 = self.embeddings.values().map(|r| dot(r, r)).sum();
        (rows + dot(&self.projection, &self.projection)).sqrt()
    }

    /// Gradient for one table entry; untouched rows are exactly zero.
    pub fn embedding(&self, row: usize, col: usize) -> f64 {
        self.embeddings.get(&row).map_or(0.0, |r| r[col])
    }
}

struct Pooled {
    buckets_len: usize,
    raw_norm: f64,
    unit: Vec<f64>,
}

fn pool_unit(params: &ModelParams, buckets: &[usize], what: &'static str) -> Result<Pooled> {
    let mut v = params.pool(buckets);
    let n = norm(&v);
    if n.is_nan() || n < MIN_NORM {
        return Err(Error::Degenerate { what, norm: n });
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(Pooled {
        buckets_len: buckets.len(),
        raw_norm: n,
        unit: v,
    })
}

struct TitleTape {
    pooled: Pooled,
    proj_norm: f64,
    t: Vec<f64>,
}

struct SkillTape {
    labels: Vec<Pooled>,
    mean_norm: f64,
    s: Vec<f64>,
}

fn forward_title(params: &ModelParams, buckets: &[usize]) -> Result<TitleTape> {
    let pooled = pool_unit(params, buckets, "title embedding")?;
    let mut t = params.apply_projection(&pooled.unit);
    let proj_norm = norm(&t);
    if proj_norm.is_nan() || proj_norm < MIN_NORM {
        return Err(Error::Degenerate {
            what: "projection",
            norm: proj_norm,
        });
    }
    t.iter_mut().for_each(|x| *x /= proj_norm);
    Ok(TitleTape {
        pooled,
        proj_norm,
        t,
    })
}

fn forward_skills(params: &ModelParams, labels: &[Vec<usize>]) -> Result<SkillTape> {
    let d = params.config.embed_dim;
    let labels = labels
        .iter()
        .map(|l| pool_unit(params, l, "skill label embedding"))
        .collect::<Result<Vec<_>>>()?;
    let mut s = vec![0.0; d];
    for l in &labels {
        s.iter_mut().zip(&l.unit).for_each(|(a, x)| *a += x);
    }
    let inv = 1.0 / labels.len() as f64;
    s.iter_mut().for_each(|a| *a *= inv);
    let mean_norm = norm(&s);
    if mean_norm.is_nan() || mean_norm < MIN_NORM {
        return Err(Error::Degenerate {
            what: "skill-set embedding",
            norm: mean_norm,
        });
    }
    s.iter_mut().for_each(|x| *x /= mean_norm);
    Ok(SkillTape {
        labels,
        mean_norm,
        s,
    })
}

/// Pulls `grad` (w.r.t. `y = x / |x|`) back to `x`.
fn through_normalize(y: &[f64], grad: &[f64], raw_norm: f64) -> Vec<f64> {
    let along = dot(y, grad);
    y.iter()
        .zip(grad)
        .map(|(yk, gk)| (gk - yk * along) / raw_norm)
        .collect()
}

fn scatter_rows(
    acc: &mut BTreeMap<usize, Vec<f64>>,
    d: usize,
    buckets: &[usize],
    grad_pooled: &[f64],
) {
    let scale = 1.0 / buckets.len() as f64;
    for &b in buckets {
        let row = acc.entry(b).or_insert_with(|| vec![0.0; d]);
        row.iter_mut()
            .zip(grad_pooled)
            .for_each(|(r, g)| *r += g * scale);
    }
}

fn batch_forward(
    params: &ModelParams,
    examples: &[Example],
) -> Result<(Vec<TitleTape>, Vec<SkillTape>)> {
    let titles = examples
        .iter()
        .map(|e| forward_title(params, &e.title))
        .collect::<Result<Vec<_>>>()?;
    let skills = examples
        .iter()
        .map(|e| forward_skills(params, &e.skills))
        .collect::<Result<Vec<_>>>()?;
    Ok((titles, skills))
}

fn objective(t: &[&[f64]], s: &[&[f64]], temperature: f64, symmetric: bool) -> Result<LossOutput> {
    if symmetric {
        symmetric_info_nce_loss(t, s, temperature)
    } else {
        info_nce_loss(t, s, temperature)
    }
}

/// Batch loss only.
pub fn batch_loss(
    params: &ModelParams,
    examples: &[Example],
    temperature: f64,
    symmetric: bool,
) -> Result<f64> {
    let (titles, skills) = batch_forward(params, examples)?;
    let t: Vec<&[f64]> = titles.iter().map(|x| x.t.as_slice()).collect();
    let s: Vec<&[f64]> = skills.iter().map(|x| x.s.as_slice()).collect();
    Ok(objective(&t, &s, temperature, symmetric)?.loss)
}

/// Batch loss and its gradient with respect to the table and the projection.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    examples: &[Example],
    temperature: f64,
    symmetric: bool,
) -> Result<(f64, Gradients)> {
    let d = params.config.embed_dim;
    let (titles, skills) = batch_forward(params, examples)?;
    let t: Vec<&[f64]> = titles.iter().map(|x| x.t.as_slice()).collect();
    let s: Vec<&[f64]> = skills.iter().map(|x| x.s.as_slice()).collect();
    let out = objective(&t, &s, temperature, symmetric)?;

    let mut grad = Gradients {
        embeddings: BTreeMap::new(),
        projection: vec![0.0; params.projection.len()],
    };

    for (tape, (g_t, ex)) in titles.iter().zip(out.grad_titles.iter().zip(examples)) {
        let g_z = through_normalize(&tape.t, g_t, tape.proj_norm);
        let u = &tape.pooled.unit;
        // dW += g_z u^T ; g_u = W^T g_z
        let mut g_u = vec![0.0; d];
        for (r, gz) in g_z.iter().enumerate() {
            let w_row = &params.projection[r * d..(r + 1) * d];
            let dw_row = &mut grad.projection[r * d..(r + 1) * d];
            for k in 0..d {
                dw_row[k] += gz * u[k];
                g_u[k] += gz * w_row[k];
            }
        }
        debug_assert_eq!(tape.pooled.buckets_len, ex.title.len());
        let g_m = through_normalize(u, &g_u, tape.pooled.raw_norm);
        scatter_rows(&mut grad.embeddings, d, &ex.title, &g_m);
    }

    for (tape, (g_s, ex)) in skills.iter().zip(out.grad_skills.iter().zip(examples)) {
        let g_a = through_normalize(&tape.s, g_s, tape.mean_norm);
        let inv = 1.0 / tape.labels.len() as f64;
        let g_label: Vec<f64> = g_a.iter().map(|g| g * inv).collect();
        for (label, buckets) in tape.labels.iter().zip(&ex.skills) {
            let g_m = through_normalize(&label.unit, &g_label, label.raw_norm);
            scatter_rows(&mut grad.embeddings, d, buckets, &g_m);
        }
    }

    Ok((out.loss, grad))
}

/// Below this magnitude the comparison is absolute rather than relative.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Compares the analytic gradient with central differences on every table
/// entry of every row the batch touches and on every projection entry.
pub fn grad_check(
    params: &ModelParams,
    examples: &[Example],
    temperature: f64,
    symmetric: bool,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, grad) = batch_loss_and_grad(params, examples, temperature, symmetric)?;
    let d = params.config.embed_dim;
    let rows: BTreeSet<usize> = examples.iter().flat_map(Example::rows).collect();

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    let mut record = |analytic: f64, numeric: f64| {
        report.max_rel_error = report.max_rel_error.max(relative_error(analytic, numeric));
        report.max_abs_error = report.max_abs_error.max((analytic - numeric).abs());
        report.checked += 1;
    };

    for &row in &rows {
        for col in 0..d {
            let idx = row * d + col;
            let orig = probe.embeddings[idx];
            probe.embeddings[idx] = orig + h;
            let plus = batch_loss(&probe, examples, temperature, symmetric)?;
            probe.embeddings[idx] = orig - h;
            let minus = batch_loss(&probe, examples, temperature, symmetric)?;
            probe.embeddings[idx] = orig;
            record(grad.embedding(row, col), (plus - minus) / (2.0 * h));
        }
    }
    for idx in 0..probe.projection.len() {
        let orig = probe.projection[idx];
        probe.projection[idx] = orig + h;
        let plus = batch_loss(&probe, examples, temperature, symmetric)?;
        probe.projection[idx] = orig - h;
        let minus = batch_loss(&probe, examples, temperature, symmetric)?;
        probe.projection[idx] = orig;
        record(grad.projection[idx], (plus - minus) / (2.0 * h));
    }
    Ok(report)
}

enum OptimizerState {
    Sgd,
    Adam {
        step: i32,
        m_e: Vec<f64>,
        v_e: Vec<f64>,
        m_w: Vec<f64>,
        v_w: Vec<f64>,
    },
}

struct Optimizer<'a> {
    config: &'a TrainConfig,
    state: OptimizerState,
}

impl<'a> Optimizer<'a> {
    fn new(config: &'a TrainConfig, params: &ModelParams) -> Self {
        let state = match config.optimizer {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                step: 0,
                m_e: vec![0.0; params.embeddings.len()],
                v_e: vec![0.0; params.embeddings.len()],
                m_w: vec![0.0; params.projection.len()],
                v_w: vec![0.0; params.projection.len()],
            },
        };
        Self { config, state }
    }

    fn step(&mut self, params: &mut ModelParams, grad: &Gradients) {
        let lr = self.config.learning_rate;
        let d = params.config.embed_dim;
        match &mut self.state {
            OptimizerState::Sgd => {
                for (&row, g) in &grad.embeddings {
                    let dst = &mut params.embeddings[row * d..(row + 1) * d];
                    dst.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
                }
                params
                    .projection
                    .iter_mut()
                    .zip(&grad.projection)
                    .for_each(|(p, g)| *p -= lr * g);
            }
            OptimizerState::Adam {
                step,
                m_e,
                v_e,
                m_w,
                v_w,
            } => {
                let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.epsilon);
                *step += 1;
                let c1 = 1.0 - b1.powi(*step);
                let c2 = 1.0 - b2.powi(*step);
                let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                };
                let mut rows = grad.embeddings.iter().peekable();
                for (row, ((p_row, m_row), v_row)) in params
                    .embeddings
                    .chunks_exact_mut(d)
                    .zip(m_e.chunks_exact_mut(d))
                    .zip(v_e.chunks_exact_mut(d))
                    .enumerate()
                {
                    let g_row = rows.next_if(|(&r, _)| r == row).map(|(_, g)| g);
                    for k in 0..d {
                        let g = g_row.map_or(0.0, |g| g[k]);
                        update(&mut p_row[k], &mut m_row[k], &mut v_row[k], g);
                    }
                }
                for (k, p) in params.projection.iter_mut().enumerate() {
                    update(p, &mut m_w[k], &mut v_w[k], grad.projection[k]);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub batches: usize,
    pub mean_loss: f64,
    pub mean_grad_norm: f64,
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub epochs: Vec<EpochReport>,
    pub wall_time_secs: f64,
    pub checksum: String,
}

impl TrainReport {
    pub fn mean_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

pub fn train(
    records: &[JobAdRecord],
    gazetteer: Option<&SkillGazetteer>,
    encoder: &EncoderConfig,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_with_callback(records, gazetteer, encoder, config, |_, _| Ok(()))
}

/// Like [`train`], calling `on_epoch(epoch, params)` after each epoch.
pub fn train_with_callback<F>(
    records: &[JobAdRecord],
    gazetteer: Option<&SkillGazetteer>,
    encoder: &EncoderConfig,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<(ModelParams, TrainReport)>
where
    F: FnMut(usize, &ModelParams) -> Result<()>,
{
    encoder.validate()?;
    config.validate()?;
    if encoder.proj_dim != encoder.embed_dim {
        return Err(Error::Config(format!(
            "training scores projected titles against skill sets, so proj_dim ({}) must equal embed_dim ({})",
            encoder.proj_dim, encoder.embed_dim
        )));
    }
    if records.is_empty() {
        return Err(Error::Config("training set is empty".to_string()));
    }
    let start = Instant::now();
    let mut params = ModelParams::init(*encoder, config.seed)?;
    let mut optimizer = Optimizer::new(config, &params);
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches = make_batches(records, config.batch_size, config.seed, epoch as u64)?;
        let mut loss_sum = 0.0;
        let mut norm_sum = 0.0;
        let mut norm_max: f64 = 0.0;
        for batch in &batches {
            let examples = batch
                .items
                .iter()
                .map(|item| Example::from_item(encoder, item, gazetteer))
                .collect::<Result<Vec<_>>>()?;
            let (loss, grad) =
                batch_loss_and_grad(&params, &examples, config.temperature, config.symmetric)?;
            let grad_norm = grad.norm();
            for (what, value) in [("loss", loss), ("gradient norm", grad_norm)] {
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        batch: batch.index,
                        what: format!("{what} (epoch {epoch})"),
                        value,
                    });
                }
            }
            optimizer.step(&mut params, &grad);
            if let Some(v) = params
                .embeddings
                .iter()
                .chain(&params.projection)
                .find(|v| !v.is_finite())
            {
                return Err(Error::NonFinite {
                    batch: batch.index,
                    what: format!("parameter after update (epoch {epoch})"),
                    value: *v,
                });
            }
            loss_sum += loss;
            norm_sum += grad_norm;
            norm_max = norm_max.max(grad_norm);
        }
        let n = batches.len() as f64;
        epochs.push(EpochReport {
            epoch,
            batches: batches.len(),
            mean_loss: loss_sum / n,
            mean_grad_norm: norm_sum / n,
            max_grad_norm: norm_max,
        });
        on_epoch(epoch, &params)?;
    }

    let report = TrainReport {
        encoder: *encoder,
        train: config.clone(),
        epochs,
        wall_time_secs: start.elapsed().as_secs_f64(),
        checksum: params.checksum(),
    };
    Ok((params, report))
}
