//! Gradient connectivity maps and `[CLS]` sentence projections.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRecord;
use crate::encoder::{EncoderAdapter, LogitSelector, Mat};
use crate::error::{Error, Result};
use crate::packing::{QAInstance, QaSetup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub doc_id: String,
    pub sent_id: String,
    pub event_type: String,
    pub question: String,
    pub window_index: usize,
    pub answer_start: usize,
    pub answer_end: usize,
    /// Display string per input position, markers included.
    pub tokens: Vec<String>,
    pub start_raw: Vec<f64>,
    pub end_raw: Vec<f64>,
    pub start_normalized: Vec<f64>,
    pub end_normalized: Vec<f64>,
    /// Elementwise max of the two normalized maps.
    pub combined: Vec<f64>,
}

/// Divides by the maximum; an all-zero map stays zero.
pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

fn row_norms(g: &Mat) -> Vec<f64> {
    g.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

/// L2 norm, per input position, of the gradient of the start logit at
/// `answer_start` and of the end logit at `answer_end` w.r.t. the input
/// embeddings.
pub fn connectivity(
    adapter: &dyn EncoderAdapter,
    instance: &QAInstance,
    answer_start: usize,
    answer_end: usize,
) -> Result<SaliencyMap> {
    let n = instance.len();
    if answer_start > answer_end || answer_end >= n {
        return Err(Error::arg(format!(
            "answer positions ({answer_start}, {answer_end}) invalid for {n} positions"
        )));
    }
    let start_raw = row_norms(&adapter.gradient_of(instance, LogitSelector::Start(answer_start))?);
    let end_raw = row_norms(&adapter.gradient_of(instance, LogitSelector::End(answer_end))?);
    let start_normalized = normalize(&start_raw);
    let end_normalized = normalize(&end_raw);
    let combined = start_normalized
        .iter()
        .zip(&end_normalized)
        .map(|(a, b)| a.max(*b))
        .collect();
    Ok(SaliencyMap {
        doc_id: instance.doc_id.clone(),
        sent_id: instance.sent_id.clone(),
        event_type: instance.event_type.clone(),
        question: instance.question.clone(),
        window_index: instance.window_index,
        answer_start,
        answer_end,
        tokens: instance.tokens.clone(),
        start_raw,
        end_raw,
        start_normalized,
        end_normalized,
        combined,
    })
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl SaliencyMap {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// A standalone page with one heat row per map.
    pub fn to_html(&self) -> String {
        let mut out = String::new();
        let title = format!("{} / {}: {}", self.doc_id, self.sent_id, self.question);
        let _ = write!(
            out,
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{}</title>\n<style>\
body{{font-family:sans-serif;margin:2em}} .row{{margin:.6em 0;line-height:2em}} \
.t{{padding:.15em .3em;margin:0 1px;border-radius:3px}} .a{{outline:2px solid #225}} \
h3{{margin:.2em 0;font-size:1em}}</style></head><body>\n<h2>{}</h2>\n",
            escape_html(&title),
            escape_html(&title)
        );
        let answer = self.answer_start..=self.answer_end;
        for (label, values) in [
            ("start", &self.start_normalized),
            ("end", &self.end_normalized),
            ("combined", &self.combined),
        ] {
            let _ = write!(out, "<h3>{label}</h3><div class=\"row\">");
            for (i, (tok, v)) in self.tokens.iter().zip(values.iter()).enumerate() {
                let class = if answer.contains(&i) { "t a" } else { "t" };
                let _ = write!(
                    out,
                    "<span class=\"{class}\" title=\"{v:.4}\" style=\"background:rgba(220,30,30,{v:.3})\">{}</span>",
                    escape_html(tok)
                );
            }
            out.push_str("</div>\n");
        }
        out.push_str("</body></html>\n");
        out
    }

    pub fn save(&self, json_path: &Path, html_path: &Path) -> Result<()> {
        std::fs::write(json_path, self.to_json()? + "\n").map_err(|e| Error::io(json_path, e))?;
        std::fs::write(html_path, self.to_html()).map_err(|e| Error::io(html_path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePoint {
    pub doc_id: String,
    pub sent_id: String,
    pub label: String,
    pub cls_vector: Vec<f64>,
    pub x: f64,
    pub y: f64,
}

/// Projects rows of `vectors` onto their first two principal components.
/// Power iteration starts from seeded vectors; each component's sign is
/// fixed so its largest-magnitude entry is positive.
pub fn pca_2d(vectors: &[Vec<f64>], seed: u64) -> Vec<(f64, f64)> {
    let n = vectors.len();
    if n == 0 {
        return Vec::new();
    }
    let d = vectors[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for v in &centered {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += v[i] * v[j];
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut components: Vec<Vec<f64>> = Vec::new();
    for _ in 0..2.min(d) {
        let mut u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..500 {
            let mut w: Vec<f64> = (0..d).map(|i| cov[i].iter().zip(&u).map(|(c, x)| c * x).sum()).collect();
            for c in &components {
                let dot: f64 = w.iter().zip(c).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            let delta: f64 = w.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
            u = w;
            if delta < 1e-12 {
                break;
            }
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            u.iter_mut().for_each(|x| *x /= norm);
        }
        let lead = u.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(u);
    }
    let proj = |v: &Vec<f64>, k: usize| -> f64 {
        components
            .get(k)
            .map(|c| c.iter().zip(v).map(|(a, b)| a * b).sum())
            .unwrap_or(0.0)
    };
    centered.iter().map(|v| (proj(v, 0), proj(v, 1))).collect()
}

/// One point per record with at least one event of the ontology, labeled by
/// its first event (by id). The vector is the `[CLS]` output for that
/// event type's question over the first window.
pub fn cls_projection(
    adapter: &dyn EncoderAdapter,
    setup: &QaSetup,
    records: &[SentenceRecord],
    seed: u64,
) -> Result<Vec<SentencePoint>> {
    let mut points = Vec::new();
    for rec in records {
        let Some(first) = rec
            .events
            .iter()
            .filter(|e| setup.ontology.contains(&e.event_type))
            .min_by(|a, b| a.id.cmp(&b.id))
        else {
            continue;
        };
        let prepared = setup.prepare_for(rec, std::slice::from_ref(&first.event_type))?;
        let inst = prepared
            .instances
            .first()
            .ok_or_else(|| Error::arg(format!("{} produced no instance", rec.key())))?;
        points.push(SentencePoint {
            doc_id: rec.doc_id.clone(),
            sent_id: rec.sent_id.clone(),
            label: first.event_type.clone(),
            cls_vector: adapter.cls_embedding(inst)?,
            x: 0.0,
            y: 0.0,
        });
    }
    let vectors: Vec<Vec<f64>> = points.iter().map(|p| p.cls_vector.clone()).collect();
    for (p, (x, y)) in points.iter_mut().zip(pca_2d(&vectors, seed)) {
        p.x = x;
        p.y = y;
    }
    Ok(points)
}

pub fn write_projection_csv(path: &Path, points: &[SentencePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["doc_id", "sent_id", "x", "y", "label"])?;
    for p in points {
        w.write_record([
            p.doc_id.as_str(),
            p.sent_id.as_str(),
            &p.x.to_string(),
            &p.y.to_string(),
            p.label.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Scatter plot colored by label, with a legend.
pub fn projection_svg(points: &[SentencePoint]) -> String {
    let (w, h, pad, legend_w) = (640.0, 480.0, 30.0, 160.0);
    let labels: Vec<&str> = {
        let mut l: Vec<&str> = points.iter().map(|p| p.label.as_str()).collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    let color: BTreeMap<&str, &str> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (*l, PALETTE[i % PALETTE.len()]))
        .collect();
    let span = |f: fn(&SentencePoint) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if points.is_empty() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(|p| p.x);
    let (y0, y1) = span(|p| p.y);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">",
        w + legend_w
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for p in points {
        let cx = pad + (p.x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let cy = h - pad - (p.y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let _ = writeln!(
            out,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{}\" fill-opacity=\"0.75\"><title>{}/{} {}</title></circle>",
            color[p.label.as_str()],
            escape_html(&p.doc_id),
            escape_html(&p.sent_id),
            escape_html(&p.label)
        );
    }
    for (i, l) in labels.iter().enumerate() {
        let y = pad + 18.0 * i as f64;
        let _ = writeln!(
            out,
            "<circle cx=\"{:.0}\" cy=\"{y:.0}\" r=\"5\" fill=\"{}\"/><text x=\"{:.0}\" y=\"{:.0}\">{}</text>",
            w + 10.0,
            color[l],
            w + 20.0,
            y + 4.0,
            escape_html(l)
        );
    }
    out.push_str("</svg>\n");
    out
}
