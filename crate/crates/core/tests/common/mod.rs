#![allow(dead_code)]

use gsal::concept_graph::ConceptGraph;
use gsal::generative::{FileProvider, ReconstructionTrajectory, ScoreEntry};
use gsal::pool::{Proposal, Sample};
use serde_json::json;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// One item of the hand-traced pool: id, latent, reconstructions, embedding, confidence.
pub struct Item {
    pub id: &'static str,
    pub z: Vec<f64>,
    pub recon: Vec<Vec<f64>>,
    pub embedding: Vec<f64>,
    pub confidence: f64,
}

fn item(id: &'static str, z: [f64; 2], recon: [[f64; 2]; 2], embedding: [f64; 2], confidence: f64) -> Item {
    Item {
        id,
        z: z.to_vec(),
        recon: recon.iter().map(|r| r.to_vec()).collect(),
        embedding: embedding.to_vec(),
        confidence,
    }
}

/// Three samples: two proposals, one proposal, none.
pub fn trace_items() -> Vec<(Item, Vec<Item>)> {
    vec![
        (
            item("s1", [1.0, 0.0], [[1.5, 0.0], [0.5, 1.0]], [1.0, 0.2], 1.0),
            vec![
                item("s1/p1", [0.0, 1.0], [[0.0, 2.0], [1.0, 1.0]], [0.9, 0.1], 0.9),
                item("s1/p2", [2.0, 2.0], [[2.0, 1.0], [3.0, 3.0]], [0.1, 0.8], 0.4),
            ],
        ),
        (
            item("s2", [0.0, 0.0], [[1.0, 1.0], [1.0, -1.0]], [0.3, 1.0], 1.0),
            vec![item("s2/p1", [1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [0.2, 1.0], 0.7)],
        ),
        (item("s3", [3.0, -1.0], [[2.0, -1.0], [2.0, 0.0]], [1.0, 0.0], 1.0), vec![]),
    ]
}

/// Fine `crack` (common) and `void` (never labeled) under `surface`;
/// `dark` hangs off `void` only and has never been covered.
pub fn trace_graph_json() -> String {
    json!({
        "fine": [
            {"id": "crack", "parent": "surface", "embedding": [1.0, 0.0], "count": 5},
            {"id": "void", "parent": "surface", "attachments": ["dark"], "embedding": [0.0, 1.0], "count": 0}
        ],
        "coarse": [{"id": "surface", "count": 5}],
        "abstract": [{"id": "dark", "count": 0}]
    })
    .to_string()
}

pub fn trace_graph() -> ConceptGraph {
    ConceptGraph::from_json(&trace_graph_json()).unwrap()
}

pub fn trace_samples() -> Vec<Sample> {
    trace_items()
        .into_iter()
        .map(|(s, props)| Sample {
            id: s.id.into(),
            latent: s.z,
            embedding: s.embedding,
            proposals: props
                .into_iter()
                .map(|p| Proposal {
                    id: p.id.into(),
                    parent: s.id.into(),
                    latent: p.z,
                    embedding: p.embedding,
                    confidence: p.confidence,
                })
                .collect(),
        })
        .collect()
}

pub fn trace_provider() -> FileProvider {
    let mut fp = FileProvider::new();
    let mut row = 0;
    for (s, props) in trace_items() {
        for it in std::iter::once(s).chain(props) {
            row += 1;
            let traj = ReconstructionTrajectory::new(it.z, it.recon).unwrap();
            fp.insert(it.id.into(), ScoreEntry::Trajectory(traj), row).unwrap();
        }
    }
    fp
}

/// The pool as JSON Lines with inline reconstructions.
pub fn trace_pool_jsonl() -> String {
    let mut out = String::new();
    for (s, props) in trace_items() {
        let proposals: Vec<_> = props
            .iter()
            .map(|p| json!({"id": p.id, "z": p.z, "embedding": p.embedding, "confidence": p.confidence, "recon": p.recon}))
            .collect();
        let line = json!({"id": s.id, "z": s.z, "embedding": s.embedding, "recon": s.recon, "proposals": proposals});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

// ---- step-by-step oracle, written without the library ----

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// (R, V) from first principles.
pub fn oracle_rv(z: &[f64], recon: &[Vec<f64>]) -> (f64, f64) {
    let t = recon.len() as f64;
    let mut mean = vec![0.0; z.len()];
    for r in recon {
        for i in 0..z.len() {
            mean[i] += r[i] / t;
        }
    }
    let r = sq_dist(z, &mean);
    let mut v = 0.0;
    for rec in recon {
        v += sq_dist(rec, &mean);
    }
    (r, v / t)
}

pub fn oracle_zscore(xs: &[f64], eps: f64) -> Vec<f64> {
    let n = xs.len() as f64;
    let mut mean = 0.0;
    for x in xs {
        mean += x;
    }
    mean /= n;
    let mut var = 0.0;
    for x in xs {
        var += (x - mean) * (x - mean);
    }
    let sd = (var / n).sqrt();
    xs.iter().map(|x| (x - mean) / (sd + eps)).collect()
}

pub fn oracle_power_mean(xs: &[f64], rho: f64) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x.powf(rho);
    }
    (s / xs.len() as f64).powf(1.0 / rho)
}

#[derive(Debug, Clone)]
pub struct OracleProposal {
    pub id: String,
    pub r: f64,
    pub v: f64,
    pub u: f64,
    pub bonus: f64,
    pub u_norm: f64,
    pub b_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OracleSample {
    pub id: String,
    pub r: f64,
    pub v: f64,
    pub u_img: f64,
    pub u_img_norm: f64,
    pub proposals: Vec<OracleProposal>,
    pub s_prop: Option<f64>,
    pub u_g: f64,
    pub bonus_img: f64,
    pub bonus_img_norm: f64,
    pub score: f64,
}

/// Hand computation of the default acquisition score for the trace pool.
///
/// Concept assignment and rarity are read off the fixture by hand:
/// thresholds are fine 1.0 (counts 5, 0), coarse 5 (single count 5, not
/// rare) and abstract 1e-6 (single zero count). Proposals nearest `void`
/// therefore fire fine and abstract: B = 2; those nearest `crack`: B = 0.
pub fn oracle_trace() -> Vec<OracleSample> {
    let (rho, gamma, eta, lambda, eps) = (2.0, 0.5, 0.5, 1.0, 1e-8);
    let bonus_of = |emb: &[f64]| if emb[1] > emb[0] { 2.0 } else { 0.0 };

    let items = trace_items();
    let mut samples: Vec<OracleSample> = Vec::new();
    let mut flat_u = Vec::new();
    let mut flat_b = Vec::new();
    for (s, props) in &items {
        let (r, v) = oracle_rv(&s.z, &s.recon);
        let mut ps = Vec::new();
        for p in props {
            let (pr, pv) = oracle_rv(&p.z, &p.recon);
            let b = bonus_of(&p.embedding);
            flat_u.push(pr + pv);
            flat_b.push(b);
            ps.push(OracleProposal {
                id: p.id.into(),
                r: pr,
                v: pv,
                u: pr + pv,
                bonus: b,
                u_norm: 0.0,
                b_norm: 0.0,
            });
        }
        samples.push(OracleSample {
            id: s.id.into(),
            r,
            v,
            u_img: r + v,
            u_img_norm: 0.0,
            proposals: ps,
            s_prop: None,
            u_g: 0.0,
            bonus_img: 0.0,
            bonus_img_norm: 0.0,
            score: 0.0,
        });
    }
    let u_img_norm = oracle_zscore(&samples.iter().map(|s| s.u_img).collect::<Vec<_>>(), eps);
    let u_norm = oracle_zscore(&flat_u, eps);
    let b_norm = oracle_zscore(&flat_b, eps);
    let combined: Vec<f64> = (0..u_norm.len()).map(|i| u_norm[i] + lambda * b_norm[i]).collect();
    let c_min = combined.iter().cloned().fold(f64::INFINITY, f64::min);
    let b_min = b_norm.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut k = 0;
    let mut pooled_bonus = Vec::new();
    for (i, s) in samples.iter_mut().enumerate() {
        s.u_img_norm = u_img_norm[i];
        let mut c = Vec::new();
        let mut b = Vec::new();
        for p in s.proposals.iter_mut() {
            p.u_norm = u_norm[k];
            p.b_norm = b_norm[k];
            c.push(combined[k] - c_min);
            b.push(b_norm[k] - b_min);
            k += 1;
        }
        if c.is_empty() {
            s.u_g = s.u_img_norm;
        } else {
            let sp = oracle_power_mean(&c, rho);
            s.s_prop = Some(sp);
            s.u_g = (1.0 - gamma) * sp + gamma * s.u_img_norm;
            s.bonus_img = oracle_power_mean(&b, rho);
            pooled_bonus.push(s.bonus_img);
        }
    }
    let bn = oracle_zscore(&pooled_bonus, eps);
    let mut j = 0;
    for s in samples.iter_mut() {
        if s.s_prop.is_some() {
            s.bonus_img_norm = bn[j];
            j += 1;
        }
        s.score = s.u_g + eta * s.bonus_img_norm;
    }
    samples
}
