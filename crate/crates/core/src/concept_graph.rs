//! Three-level concept DAG (fine → coarse → abstract) with coverage counts.
//!
//! Fine nodes carry the concept embeddings used for assignment. Each fine node
//! has exactly one coarse parent and any number of abstract attachments.
//! Coarse nodes may also attach to abstract nodes; those edges are stored and
//! validated but [`ConceptGraph::ancestors`] resolves abstracts through the
//! fine node's own attachments only.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GsalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fine,
    Coarse,
    Abstract,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Fine, Level::Coarse, Level::Abstract];

    pub fn name(self) -> &'static str {
        match self {
            Level::Fine => "fine",
            Level::Coarse => "coarse",
            Level::Abstract => "abstract",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptNode {
    id: String,
    level: Level,
    label: String,
    coverage_count: u64,
}

impl ConceptNode {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn coverage_count(&self) -> u64 {
        self.coverage_count
    }
}

/// A fine concept together with its coarse parent and abstract attributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConceptPath {
    pub fine: NodeId,
    pub coarse: NodeId,
    pub abstracts: Vec<NodeId>,
}

/// [`ConceptPath`] with node ids resolved to strings, for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedPath {
    pub fine: String,
    pub coarse: String,
    pub abstracts: Vec<String>,
}

impl fmt::Display for NamedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} → {} → [{}]", self.fine, self.coarse, self.abstracts.join(", "))
    }
}

/// Similarity used to match an item embedding against concept embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    InnerProduct,
    Cosine,
}

#[derive(Debug, Clone)]
pub struct ConceptGraph {
    nodes: Vec<ConceptNode>,
    index: HashMap<String, NodeId>,
    parent: Vec<Option<NodeId>>,
    attachments: Vec<Vec<NodeId>>,
    embeddings: Vec<Option<Vec<f64>>>,
    embedding_norms: Vec<f64>,
    /// Fine nodes in lexicographic id order; argmax ties go to the first.
    fine_order: Vec<NodeId>,
    dim: usize,
}

impl ConceptGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    /// Parses and validates a graph-definition document (JSON).
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        doc.into_graph()
    }

    pub fn to_document(&self) -> GraphDocument {
        let entry = |id: NodeId| {
            let node = &self.nodes[id.index()];
            NodeEntry {
                id: node.id.clone(),
                label: Some(node.label.clone()),
                parent: self.parent[id.index()].map(|p| self.nodes[p.index()].id.clone()),
                attachments: self.attachments[id.index()]
                    .iter()
                    .map(|a| self.nodes[a.index()].id.clone())
                    .collect(),
                embedding: self.embeddings[id.index()].clone(),
                count: node.coverage_count,
            }
        };
        let at = |level| self.ids_at(level).map(entry).collect();
        GraphDocument {
            fine: at(Level::Fine),
            coarse: at(Level::Coarse),
            abstract_: at(Level::Abstract),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph document serializes")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn embedding_dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, id: NodeId) -> &ConceptNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[ConceptNode] {
        &self.nodes
    }

    pub fn lookup(&self, id: &str) -> Option<NodeId> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].id
    }

    pub fn ids_at(&self, level: Level) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.level == level)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn fine_ids(&self) -> &[NodeId] {
        &self.fine_order
    }

    pub fn counts_at(&self, level: Level) -> Vec<u64> {
        self.ids_at(level).map(|id| self.nodes[id.index()].coverage_count).collect()
    }

    pub fn coverage(&self, id: NodeId) -> u64 {
        self.nodes[id.index()].coverage_count
    }

    pub fn embedding(&self, id: NodeId) -> Option<&[f64]> {
        self.embeddings[id.index()].as_deref()
    }

    /// Abstract nodes attached directly to `id` (fine or coarse).
    pub fn attachments(&self, id: NodeId) -> &[NodeId] {
        &self.attachments[id.index()]
    }

    pub fn coarse_parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id.index()]
    }

    /// Assigns an embedding to the fine concept with the highest similarity.
    pub fn assign(&self, embedding: &[f64], similarity: Similarity) -> Result<ConceptPath> {
        let fine = self.assign_fine(embedding, similarity)?;
        Ok(self.path_of(fine))
    }

    pub fn assign_fine(&self, embedding: &[f64], similarity: Similarity) -> Result<NodeId> {
        if self.fine_order.is_empty() {
            return Err(GsalError::NoFineConcepts);
        }
        if embedding.len() != self.dim {
            return Err(GsalError::DimensionMismatch {
                expected: self.dim,
                actual: embedding.len(),
            });
        }
        let query_norm = match similarity {
            Similarity::InnerProduct => 1.0,
            Similarity::Cosine => norm(embedding),
        };
        let mut best = self.fine_order[0];
        let mut best_score = f64::NEG_INFINITY;
        for &id in &self.fine_order {
            let concept = self.embeddings[id.index()].as_deref().expect("fine nodes carry embeddings");
            let mut score = dot(embedding, concept);
            if similarity == Similarity::Cosine {
                let denom = query_norm * self.embedding_norms[id.index()];
                score = if denom > 0.0 { score / denom } else { 0.0 };
            }
            if score > best_score {
                best_score = score;
                best = id;
            }
        }
        Ok(best)
    }

    /// Coarse parent and abstract attachments of a fine node.
    pub fn ancestors(&self, fine_id: &str) -> Result<ConceptPath> {
        let id = self
            .lookup(fine_id)
            .ok_or_else(|| GsalError::UnknownNode(fine_id.to_string()))?;
        let level = self.nodes[id.index()].level;
        if level != Level::Fine {
            return Err(GsalError::WrongLevel {
                id: fine_id.to_string(),
                expected: "fine",
                actual: level.name(),
            });
        }
        Ok(self.path_of(id))
    }

    /// Path of a fine node known to be valid.
    pub fn path_of(&self, fine: NodeId) -> ConceptPath {
        ConceptPath {
            fine,
            coarse: self.parent[fine.index()].expect("fine nodes have a coarse parent"),
            abstracts: self.attachments[fine.index()].clone(),
        }
    }

    pub fn named(&self, path: &ConceptPath) -> NamedPath {
        NamedPath {
            fine: self.id_of(path.fine).to_string(),
            coarse: self.id_of(path.coarse).to_string(),
            abstracts: path.abstracts.iter().map(|&a| self.id_of(a).to_string()).collect(),
        }
    }

    pub fn resolve(&self, path: &NamedPath) -> Result<ConceptPath> {
        let get = |s: &str| self.lookup(s).ok_or_else(|| GsalError::UnknownNode(s.to_string()));
        Ok(ConceptPath {
            fine: get(&path.fine)?,
            coarse: get(&path.coarse)?,
            abstracts: path.abstracts.iter().map(|a| get(a)).collect::<Result<_>>()?,
        })
    }

    /// Adds one to the coverage count of every node on `path`.
    ///
    /// All ids are checked before any count changes.
    pub fn increment_coverage(&mut self, path: &ConceptPath) -> Result<()> {
        self.check_node(path.fine, Level::Fine)?;
        self.check_node(path.coarse, Level::Coarse)?;
        for &a in &path.abstracts {
            self.check_node(a, Level::Abstract)?;
        }
        self.nodes[path.fine.index()].coverage_count += 1;
        self.nodes[path.coarse.index()].coverage_count += 1;
        for &a in &path.abstracts {
            self.nodes[a.index()].coverage_count += 1;
        }
        Ok(())
    }

    /// Overwrites coverage counts, e.g. when restoring a checkpoint.
    pub fn set_counts(&mut self, counts: &HashMap<String, u64>) -> Result<()> {
        for id in counts.keys() {
            if !self.index.contains_key(id) {
                return Err(GsalError::UnknownNode(id.clone()));
            }
        }
        for node in &mut self.nodes {
            node.coverage_count = counts.get(&node.id).copied().unwrap_or(0);
        }
        Ok(())
    }

    pub fn count_map(&self) -> HashMap<String, u64> {
        self.nodes.iter().map(|n| (n.id.clone(), n.coverage_count)).collect()
    }

    pub fn reset_coverage(&mut self) {
        for node in &mut self.nodes {
            node.coverage_count = 0;
        }
    }

    fn check_node(&self, id: NodeId, level: Level) -> Result<()> {
        let node = self
            .nodes
            .get(id.index())
            .ok_or_else(|| GsalError::UnknownNode(format!("#{}", id.0)))?;
        if node.level != level {
            return Err(GsalError::WrongLevel {
                id: node.id.clone(),
                expected: level.name(),
                actual: node.level.name(),
            });
        }
        Ok(())
    }

    fn edges(&self) -> Vec<Vec<usize>> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, _)| {
                self.parent[i]
                    .into_iter()
                    .chain(self.attachments[i].iter().copied())
                    .map(NodeId::index)
                    .collect()
            })
            .collect()
    }

    /// Topological order of all nodes, or the id of a node on a cycle.
    pub fn topological_order(&self) -> std::result::Result<Vec<NodeId>, String> {
        topo_sort(&self.edges())
            .map(|order| order.into_iter().map(|i| NodeId(i as u32)).collect())
            .map_err(|i| self.nodes[i].id.clone())
    }
}

fn topo_sort(edges: &[Vec<usize>]) -> std::result::Result<Vec<usize>, usize> {
    let n = edges.len();
    let mut indegree = vec![0usize; n];
    for outs in edges {
        for &t in outs {
            indegree[t] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &t in &edges[i] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                queue.push_back(t);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&i| indegree[i] > 0).expect("some node remains"))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// On-disk graph definition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    #[serde(default)]
    pub fine: Vec<NodeEntry>,
    #[serde(default)]
    pub coarse: Vec<NodeEntry>,
    #[serde(rename = "abstract", default)]
    pub abstract_: Vec<NodeEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub count: u64,
}

fn is_zero(x: &u64) -> bool {
    *x == 0
}

impl GraphDocument {
    pub fn into_graph(self) -> Result<ConceptGraph> {
        let mut b = GraphBuilder::default();
        for (level, entries) in [
            (Level::Fine, self.fine),
            (Level::Coarse, self.coarse),
            (Level::Abstract, self.abstract_),
        ] {
            for e in entries {
                b.entries.push((level, e));
            }
        }
        b.build()
    }
}

/// Programmatic graph construction; `build` applies the same checks as loading.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    entries: Vec<(Level, NodeEntry)>,
}

impl GraphBuilder {
    pub fn coarse(mut self, id: &str, attachments: &[&str]) -> Self {
        self.entries.push((
            Level::Coarse,
            NodeEntry {
                id: id.to_string(),
                attachments: attachments.iter().map(|s| s.to_string()).collect(),
                ..Default::default()
            },
        ));
        self
    }

    pub fn abstract_node(mut self, id: &str) -> Self {
        self.entries.push((
            Level::Abstract,
            NodeEntry {
                id: id.to_string(),
                ..Default::default()
            },
        ));
        self
    }

    pub fn fine(mut self, id: &str, parent: &str, attachments: &[&str], embedding: Vec<f64>) -> Self {
        self.entries.push((
            Level::Fine,
            NodeEntry {
                id: id.to_string(),
                parent: Some(parent.to_string()),
                attachments: attachments.iter().map(|s| s.to_string()).collect(),
                embedding: Some(embedding),
                ..Default::default()
            },
        ));
        self
    }

    pub fn entry(mut self, level: Level, entry: NodeEntry) -> Self {
        self.entries.push((level, entry));
        self
    }

    pub fn build(self) -> Result<ConceptGraph> {
        let mut index = HashMap::new();
        let mut nodes = Vec::with_capacity(self.entries.len());
        for (i, (level, e)) in self.entries.iter().enumerate() {
            if index.insert(e.id.clone(), NodeId(i as u32)).is_some() {
                return Err(GsalError::DuplicateNode(e.id.clone()));
            }
            nodes.push(ConceptNode {
                id: e.id.clone(),
                level: *level,
                label: e.label.clone().unwrap_or_else(|| e.id.clone()),
                coverage_count: e.count,
            });
        }
        let resolve = |owner: &str, target: &str| {
            index.get(target).copied().ok_or_else(|| GsalError::InvalidNode {
                id: owner.to_string(),
                reason: format!("references unknown node `{target}`"),
            })
        };

        let mut parent = vec![None; nodes.len()];
        let mut attachments = vec![Vec::new(); nodes.len()];
        for (i, (_, e)) in self.entries.iter().enumerate() {
            if let Some(p) = &e.parent {
                parent[i] = Some(resolve(&e.id, p)?);
            }
            for a in &e.attachments {
                let t = resolve(&e.id, a)?;
                if attachments[i].contains(&t) {
                    return Err(GsalError::InvalidNode {
                        id: e.id.clone(),
                        reason: format!("duplicate attachment `{a}`"),
                    });
                }
                attachments[i].push(t);
            }
        }

        let edges: Vec<Vec<usize>> = (0..nodes.len())
            .map(|i| parent[i].into_iter().chain(attachments[i].iter().copied()).map(NodeId::index).collect())
            .collect();
        topo_sort(&edges).map_err(|i| GsalError::Cycle(nodes[i].id.clone()))?;

        let mut dim = None;
        let mut embeddings = vec![None; nodes.len()];
        for (i, (level, e)) in self.entries.into_iter().enumerate() {
            let invalid = |reason: &str| GsalError::InvalidNode {
                id: e.id.clone(),
                reason: reason.to_string(),
            };
            if level != Level::Fine && e.embedding.is_some() {
                return Err(invalid("embeddings are only accepted on fine nodes"));
            }
            match level {
                Level::Fine => {
                    let p = parent[i].ok_or_else(|| GsalError::OrphanFine(e.id.clone()))?;
                    if nodes[p.index()].level != Level::Coarse {
                        return Err(invalid("parent must be a coarse node"));
                    }
                    if attachments[i].iter().any(|a| nodes[a.index()].level != Level::Abstract) {
                        return Err(invalid("attachments must be abstract nodes"));
                    }
                    let emb = e.embedding.ok_or_else(|| GsalError::MissingEmbedding(e.id.clone()))?;
                    if emb.is_empty() || emb.iter().any(|x| !x.is_finite()) {
                        return Err(invalid("embedding must be nonempty and finite"));
                    }
                    match dim {
                        None => dim = Some(emb.len()),
                        Some(d) if d != emb.len() => {
                            return Err(invalid(&format!(
                                "embedding has dimension {}, expected {d}",
                                emb.len()
                            )))
                        }
                        _ => {}
                    }
                    embeddings[i] = Some(emb);
                }
                Level::Coarse => {
                    if parent[i].is_some() {
                        return Err(invalid("coarse nodes take no parent"));
                    }
                    if attachments[i].iter().any(|a| nodes[a.index()].level != Level::Abstract) {
                        return Err(invalid("attachments must be abstract nodes"));
                    }
                }
                Level::Abstract => {
                    if parent[i].is_some() || !attachments[i].is_empty() {
                        return Err(invalid("abstract nodes have no outgoing edges"));
                    }
                }
            }
        }

        let embedding_norms = embeddings
            .iter()
            .map(|e| e.as_deref().map(norm).unwrap_or(0.0))
            .collect();
        let mut fine_order: Vec<NodeId> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.level == Level::Fine)
            .map(|(i, _)| NodeId(i as u32))
            .collect();
        fine_order.sort_by(|a, b| nodes[a.index()].id.cmp(&nodes[b.index()].id));

        Ok(ConceptGraph {
            nodes,
            index,
            parent,
            attachments,
            embeddings,
            embedding_norms,
            fine_order,
            dim: dim.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthogonal_graph() -> ConceptGraph {
        ConceptGraph::builder()
            .coarse("c1", &[])
            .coarse("c2", &[])
            .abstract_node("x")
            .abstract_node("y")
            .fine("a", "c1", &["x"], vec![1.0, 0.0, 0.0])
            .fine("b", "c1", &["x", "y"], vec![0.0, 1.0, 0.0])
            .fine("c", "c2", &[], vec![0.0, 0.0, 1.0])
            .build()
            .unwrap()
    }

    #[test]
    fn exact_match_is_assigned() {
        let g = orthogonal_graph();
        let p = g.assign(&[0.0, 1.0, 0.0], Similarity::InnerProduct).unwrap();
        assert_eq!(g.id_of(p.fine), "b");
        assert_eq!(g.id_of(p.coarse), "c1");
        assert_eq!(p.abstracts.len(), 2);
    }

    #[test]
    fn singleton_graph_always_assigns() {
        let g = ConceptGraph::builder()
            .coarse("c", &[])
            .fine("only", "c", &[], vec![0.3, -0.2])
            .build()
            .unwrap();
        for q in [[5.0, 5.0], [-1.0, 0.0], [0.0, 0.0]] {
            assert_eq!(g.id_of(g.assign_fine(&q, Similarity::InnerProduct).unwrap()), "only");
        }
    }

    #[test]
    fn four_node_argmax_matches_enumeration() {
        let embs = [
            ("d", [0.2, 0.9, -0.1]),
            ("a", [0.8, 0.1, 0.3]),
            ("c", [-0.5, 0.5, 0.7]),
            ("b", [0.4, 0.4, 0.4]),
        ];
        let mut b = ConceptGraph::builder().coarse("k", &[]);
        for (id, e) in embs {
            b = b.fine(id, "k", &[], e.to_vec());
        }
        let g = b.build().unwrap();
        let queries = [[0.1, 0.2, 0.9], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, -1.0, 2.0]];
        for q in queries {
            // brute force: full enumeration, lexicographic tie-break
            let mut scored: Vec<(f64, &str)> = embs
                .iter()
                .map(|(id, e)| (q[0] * e[0] + q[1] * e[1] + q[2] * e[2], *id))
                .collect();
            scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(y.1)));
            let got = g.id_of(g.assign_fine(&q, Similarity::InnerProduct).unwrap());
            assert_eq!(got, scored[0].1, "query {q:?}");
        }
    }

    #[test]
    fn ties_go_to_lexicographically_first_id() {
        let g = ConceptGraph::builder()
            .coarse("k", &[])
            .fine("zeta", "k", &[], vec![1.0, 0.0])
            .fine("alpha", "k", &[], vec![1.0, 0.0])
            .build()
            .unwrap();
        assert_eq!(g.id_of(g.assign_fine(&[1.0, 0.0], Similarity::InnerProduct).unwrap()), "alpha");
    }

    #[test]
    fn inner_product_and_cosine_can_disagree() {
        let g = ConceptGraph::builder()
            .coarse("k", &[])
            .fine("long", "k", &[], vec![10.0, 10.0])
            .fine("unit", "k", &[], vec![1.0, 0.0])
            .build()
            .unwrap();
        let q = [1.0, 0.0];
        assert_eq!(g.id_of(g.assign_fine(&q, Similarity::InnerProduct).unwrap()), "long");
        assert_eq!(g.id_of(g.assign_fine(&q, Similarity::Cosine).unwrap()), "unit");
    }

    #[test]
    fn assignment_errors() {
        let g = orthogonal_graph();
        assert!(matches!(
            g.assign(&[1.0, 0.0], Similarity::InnerProduct),
            Err(GsalError::DimensionMismatch { expected: 3, actual: 2 })
        ));
        let empty = ConceptGraph::builder().coarse("c", &[]).build().unwrap();
        assert!(matches!(
            empty.assign(&[], Similarity::InnerProduct),
            Err(GsalError::NoFineConcepts)
        ));
    }

    #[test]
    fn ancestors_resolves_fine_attachments() {
        let g = ConceptGraph::builder()
            .coarse("subsurface", &[])
            .coarse("surface", &[])
            .abstract_node("dark")
            .abstract_node("round")
            .abstract_node("bright")
            .fine("void", "subsurface", &["dark", "round"], vec![1.0])
            .fine("petal", "surface", &[], vec![0.5])
            .build()
            .unwrap();
        let p = g.named(&g.ancestors("void").unwrap());
        assert_eq!(p.coarse, "subsurface");
        // enumerate outgoing edges of `void` to abstract nodes
        let void = g.lookup("void").unwrap();
        let mut expected: Vec<&str> = g.attachments(void).iter().map(|&a| g.id_of(a)).collect();
        expected.sort();
        let mut got = p.abstracts.clone();
        got.sort();
        assert_eq!(got, expected);
        assert_eq!(got, vec!["dark", "round"]);
        assert!(g.ancestors("petal").unwrap().abstracts.is_empty());
    }

    #[test]
    fn coarse_attachments_are_not_inherited() {
        let g = ConceptGraph::builder()
            .coarse("animal", &["outdoor"])
            .abstract_node("outdoor")
            .abstract_node("furry")
            .fine("dog", "animal", &["furry"], vec![1.0])
            .build()
            .unwrap();
        let path = g.ancestors("dog").unwrap();
        // brute-force reachability from `dog` through any edges
        let dog = g.lookup("dog").unwrap();
        let mut reach = vec![dog];
        let mut i = 0;
        while i < reach.len() {
            let n = reach[i];
            for t in g.coarse_parent(n).into_iter().chain(g.attachments(n).iter().copied()) {
                if !reach.contains(&t) {
                    reach.push(t);
                }
            }
            i += 1;
        }
        let outdoor = g.lookup("outdoor").unwrap();
        assert!(reach.contains(&outdoor), "outdoor is reachable via the coarse parent");
        assert_eq!(g.named(&path).abstracts, vec!["furry"]);
    }

    #[test]
    fn ancestors_errors() {
        let g = orthogonal_graph();
        assert!(matches!(g.ancestors("nope"), Err(GsalError::UnknownNode(_))));
        assert!(matches!(g.ancestors("c1"), Err(GsalError::WrongLevel { .. })));
    }

    #[test]
    fn increment_touches_only_the_path() {
        let mut g = orthogonal_graph();
        let p = g.ancestors("b").unwrap();
        g.increment_coverage(&p).unwrap();
        for n in g.nodes() {
            let expected = u64::from(matches!(n.id(), "b" | "c1" | "x" | "y"));
            assert_eq!(n.coverage_count(), expected, "{}", n.id());
        }
        let p = g.ancestors("c").unwrap();
        g.increment_coverage(&p).unwrap();
        assert_eq!(g.coverage(g.lookup("c2").unwrap()), 1);
        assert_eq!(g.coverage(g.lookup("x").unwrap()), 1);
    }

    #[test]
    fn repeated_increments_accumulate() {
        let mut g = orthogonal_graph();
        let p = g.ancestors("a").unwrap();
        for k in 1..=7u64 {
            g.increment_coverage(&p).unwrap();
            assert_eq!(g.coverage(p.fine), k);
            assert_eq!(g.coverage(p.coarse), k);
            assert_eq!(g.coverage(p.abstracts[0]), k);
        }
    }

    #[test]
    fn bad_increment_leaves_counts_alone() {
        let mut g = orthogonal_graph();
        let mut p = g.ancestors("b").unwrap();
        p.abstracts.push(g.lookup("c2").unwrap());
        assert!(g.increment_coverage(&p).is_err());
        assert!(g.nodes().iter().all(|n| n.coverage_count() == 0));
    }

    #[test]
    fn loader_rejects_back_edge() {
        let doc = r#"{
            "fine": [{"id": "void", "parent": "sub", "embedding": [1.0]}],
            "coarse": [{"id": "sub", "attachments": ["void"]}],
            "abstract": []
        }"#;
        assert!(matches!(ConceptGraph::from_json(doc), Err(GsalError::Cycle(_))));
    }

    #[test]
    fn loader_structural_errors() {
        let orphan = r#"{"fine": [{"id": "a", "embedding": [1.0]}], "coarse": [{"id": "c"}]}"#;
        assert!(matches!(ConceptGraph::from_json(orphan), Err(GsalError::OrphanFine(id)) if id == "a"));

        let dup = r#"{"fine": [{"id": "a", "parent": "c", "embedding": [1.0]}], "coarse": [{"id": "a"}]}"#;
        assert!(matches!(ConceptGraph::from_json(dup), Err(GsalError::DuplicateNode(id)) if id == "a"));

        let noemb = r#"{"fine": [{"id": "a", "parent": "c"}], "coarse": [{"id": "c"}]}"#;
        assert!(matches!(ConceptGraph::from_json(noemb), Err(GsalError::MissingEmbedding(id)) if id == "a"));

        let unknown = r#"{"fine": [{"id": "a", "parent": "c", "embedding": [1.0], "colour": 3}], "coarse": [{"id": "c"}]}"#;
        assert!(matches!(ConceptGraph::from_json(unknown), Err(GsalError::Json(_))));

        let dims = r#"{"fine": [{"id": "a", "parent": "c", "embedding": [1.0]},
                               {"id": "b", "parent": "c", "embedding": [1.0, 2.0]}], "coarse": [{"id": "c"}]}"#;
        assert!(matches!(ConceptGraph::from_json(dims), Err(GsalError::InvalidNode { id, .. }) if id == "b"));
    }

    #[test]
    fn document_round_trip() {
        let mut g = orthogonal_graph();
        let p = g.ancestors("a").unwrap();
        g.increment_coverage(&p).unwrap();
        let back = ConceptGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.to_document(), g.to_document());
        assert_eq!(back.coverage(back.lookup("x").unwrap()), 1);
    }
}
