//! Provenance graphs over objects and their datasets: traversal, element
//! filtering, tooltips, and DOT/JSON export.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{is_element_symbol, ObjectRecord, PermId, RepoState, SAMPLE_TYPE_VOCAB, TECHNIQUE_VOCAB};
use crate::store::DatasetRecord;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Sample,
    Protocol,
    Device,
    ExperimentEntry,
    Dataset,
    Other(String),
}

impl NodeKind {
    pub fn of_type(type_name: &str) -> NodeKind {
        match type_name {
            "Sample" => NodeKind::Sample,
            "Protocol" | "Preparation Step" => NodeKind::Protocol,
            "Device" => NodeKind::Device,
            "Experiment Entry" | "Metallographic Prep" | "Micro Mech Exp" => NodeKind::ExperimentEntry,
            other => NodeKind::Other(other.to_string()),
        }
    }

    pub fn fill_color(&self) -> &'static str {
        match self {
            NodeKind::Sample => "#f4a261",
            NodeKind::Protocol => "#2a9d8f",
            NodeKind::Device => "#8ecae6",
            NodeKind::ExperimentEntry => "#e9c46a",
            NodeKind::Dataset => "#cdb4db",
            NodeKind::Other(_) => "#dddddd",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Sample => f.write_str("Sample"),
            NodeKind::Protocol => f.write_str("Protocol"),
            NodeKind::Device => f.write_str("Device"),
            NodeKind::ExperimentEntry => f.write_str("ExperimentEntry"),
            NodeKind::Dataset => f.write_str("Dataset"),
            NodeKind::Other(t) => write!(f, "Other:{t}"),
        }
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Sample" => NodeKind::Sample,
            "Protocol" => NodeKind::Protocol,
            "Device" => NodeKind::Device,
            "ExperimentEntry" => NodeKind::ExperimentEntry,
            "Dataset" => NodeKind::Dataset,
            _ => match s.strip_prefix("Other:") {
                Some(t) => NodeKind::Other(t.to_string()),
                None => return Err(Error::Parse(format!("unknown node kind `{s}`"))),
            },
        })
    }
}

impl Serialize for NodeKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Both,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            "both" => Ok(Direction::Both),
            _ => Err(Error::Parse(format!("direction must be up, down or both, not `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: PermId,
    pub kind: NodeKind,
    pub label: String,
    pub tooltip: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: PermId,
    pub to: PermId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceGraph {
    /// Sorted by id.
    pub nodes: Vec<GraphNode>,
    /// Sorted by (from, to).
    pub edges: Vec<GraphEdge>,
    /// `None` for filter results, which have several roots.
    pub root: Option<PermId>,
    pub truncated: bool,
}

impl ProvenanceGraph {
    pub fn node_ids(&self) -> BTreeSet<PermId> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    pub fn node(&self, id: &PermId) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| &n.id == id)
    }
}

/// BFS from `root` along one edge direction; returns node depths and
/// whether the depth limit cut off any further node.
fn bfs(
    state: &RepoState,
    root: &PermId,
    up: bool,
    max_depth: Option<usize>,
) -> (BTreeMap<PermId, usize>, bool) {
    let next = |id: &PermId| -> Vec<PermId> {
        state
            .object(id)
            .map(|r| if up { &r.parents } else { &r.children })
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    };
    let mut depth = BTreeMap::from([(root.clone(), 0usize)]);
    let mut queue = VecDeque::from([root.clone()]);
    let mut truncated = false;
    while let Some(id) = queue.pop_front() {
        let d = depth[&id];
        for n in next(&id) {
            if depth.contains_key(&n) {
                continue;
            }
            if max_depth.is_some_and(|m| d >= m) {
                truncated = true;
                continue;
            }
            depth.insert(n.clone(), d + 1);
            queue.push_back(n);
        }
    }
    (depth, truncated)
}

/// Objects reachable from `root` in `direction` within `max_depth` steps.
pub fn reachable(
    state: &RepoState,
    root: &PermId,
    direction: Direction,
    max_depth: Option<usize>,
) -> Result<(BTreeSet<PermId>, bool)> {
    state.object(root)?;
    let mut members = BTreeSet::new();
    let mut truncated = false;
    if matches!(direction, Direction::Up | Direction::Both) {
        let (d, t) = bfs(state, root, true, max_depth);
        members.extend(d.into_keys());
        truncated |= t;
    }
    if matches!(direction, Direction::Down | Direction::Both) {
        let (d, t) = bfs(state, root, false, max_depth);
        members.extend(d.into_keys());
        truncated |= t;
    }
    Ok((members, truncated))
}

/// Graph of everything reachable from `root`, plus datasets attached to the
/// reached entries.
pub fn build_graph(
    state: &RepoState,
    root: &PermId,
    direction: Direction,
    max_depth: Option<usize>,
) -> Result<ProvenanceGraph> {
    let (members, truncated) = reachable(state, root, direction, max_depth)?;
    let mut graph = assemble(state, &members);
    graph.root = Some(root.clone());
    graph.truncated = truncated;
    Ok(graph)
}

/// Union of the full up and down graphs of every sample whose composition
/// lists `element` with a positive fraction.
pub fn filter_by_element(state: &RepoState, element: &str) -> Result<ProvenanceGraph> {
    filter_by_element_within(state, element, None)
}

/// As [`filter_by_element`], expanding at most `radius` links from each
/// matched sample.
pub fn filter_by_element_within(
    state: &RepoState,
    element: &str,
    radius: Option<usize>,
) -> Result<ProvenanceGraph> {
    if !is_element_symbol(element) {
        return Err(Error::Domain(format!("`{element}` is not an element symbol")));
    }
    let mut members = BTreeSet::new();
    let mut truncated = false;
    for sample in samples_containing(state, element) {
        let (m, t) = reachable(state, &sample, Direction::Both, radius)?;
        members.extend(m);
        truncated |= t;
    }
    let mut graph = assemble(state, &members);
    graph.truncated = truncated;
    Ok(graph)
}

/// Ids of samples with `composition[element] > 0`.
pub fn samples_containing(state: &RepoState, element: &str) -> Vec<PermId> {
    state
        .objects()
        .filter(|o| NodeKind::of_type(&o.type_name) == NodeKind::Sample)
        .filter(|o| {
            o.composition()
                .and_then(|c| c.get(element).copied())
                .is_some_and(|x| x > 0.0)
        })
        .map(|o| o.perm_id.clone())
        .collect()
}

fn assemble(state: &RepoState, members: &BTreeSet<PermId>) -> ProvenanceGraph {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for id in members {
        let Ok(rec) = state.object(id) else { continue };
        nodes.push(GraphNode {
            id: id.clone(),
            kind: NodeKind::of_type(&rec.type_name),
            label: rec.label(),
            tooltip: node_tooltip(state, rec),
        });
        for c in rec.children.iter().filter(|c| members.contains(*c)) {
            edges.push(GraphEdge {
                from: id.clone(),
                to: c.clone(),
            });
        }
        for d in state.datasets_of(id) {
            nodes.push(GraphNode {
                id: d.dataset_id.clone(),
                kind: NodeKind::Dataset,
                label: d.original_filename.clone(),
                tooltip: dataset_tooltip(d),
            });
            edges.push(GraphEdge {
                from: id.clone(),
                to: d.dataset_id.clone(),
            });
        }
    }
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    edges.sort();
    ProvenanceGraph {
        nodes,
        edges,
        root: None,
        truncated: false,
    }
}

fn fmt_number(x: f64) -> String {
    format!("{x}")
}

/// "Fe 60, Al 40": descending fraction, ties by symbol.
pub fn composition_summary(composition: &BTreeMap<String, f64>) -> String {
    let mut parts: Vec<(&String, &f64)> = composition.iter().collect();
    parts.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    parts
        .iter()
        .map(|(el, x)| format!("{el} {}", fmt_number(**x)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn term_label(state: &RepoState, vocab: &str, code: &str) -> String {
    state
        .catalog()
        .vocabulary(vocab)
        .ok()
        .and_then(|v| v.term(code))
        .map(|t| t.label.clone())
        .unwrap_or_else(|| code.to_string())
}

/// Kind-dependent summary of a record for hover display.
pub fn node_tooltip(state: &RepoState, rec: &ObjectRecord) -> BTreeMap<String, String> {
    let mut tip = BTreeMap::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            tip.insert(k.to_string(), v);
        }
    };
    match NodeKind::of_type(&rec.type_name) {
        NodeKind::Sample => {
            put("composition", rec.composition().map(|c| composition_summary(&c)));
            let dims = rec
                .properties
                .get("dimensions_mm")
                .and_then(|v| v.as_array())
                .map(|a| a.iter().filter_map(|x| x.as_f64()).map(fmt_number).collect::<Vec<_>>())
                .filter(|d| !d.is_empty())
                .map(|d| format!("{} mm", d.join("×")));
            put("dimensions", dims);
            put(
                "category",
                rec.text("sample_category").map(|c| term_label(state, SAMPLE_TYPE_VOCAB, c)),
            );
            if rec.properties.get("is_computational").and_then(|v| v.as_bool()) == Some(true) {
                put("computational", Some("yes".into()));
            }
        }
        NodeKind::Device => {
            put("model", rec.text("model").map(str::to_string));
            put("manufacturer", rec.text("manufacturer").map(str::to_string));
        }
        NodeKind::ExperimentEntry => {
            put("type", Some(rec.type_name.clone()));
            put(
                "technique",
                rec.text("technique").map(|c| term_label(state, TECHNIQUE_VOCAB, c)),
            );
            put("date", rec.text("date").map(str::to_string));
            put("dataset_count", Some(state.datasets_of(&rec.perm_id).len().to_string()));
        }
        NodeKind::Protocol => {
            put("type", Some(rec.type_name.clone()));
            put(
                "technique",
                rec.text("technique").map(|c| term_label(state, TECHNIQUE_VOCAB, c)),
            );
            put("abrasive", rec.text("abrasive").map(str::to_string));
            put("lubricant", rec.text("lubricant").map(str::to_string));
        }
        NodeKind::Dataset | NodeKind::Other(_) => {
            put("type", Some(rec.type_name.clone()));
        }
    }
    tip
}

pub fn dataset_tooltip(d: &DatasetRecord) -> BTreeMap<String, String> {
    let mut tip = BTreeMap::from([
        ("type".to_string(), d.dataset_type.clone()),
        ("size".to_string(), format!("{} B", d.blob.size_bytes)),
        ("vendor".to_string(), d.vendor.to_string()),
        ("registered".to_string(), d.registered_at.format("%Y-%m-%d").to_string()),
    ]);
    if let Some(u) = &d.unified_metadata {
        for (field, value) in u.present() {
            let unit = field.unit();
            let text = if unit.is_empty() {
                fmt_number(value)
            } else {
                format!("{} {unit}", fmt_number(value))
            };
            tip.insert(field.name().to_string(), text);
        }
    }
    tip
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub const TRUNCATION_PLACEHOLDER: &str = "…";

/// Graphviz digraph with one statement per node and edge.
pub fn export_dot(graph: &ProvenanceGraph) -> String {
    let mut out = String::from("digraph provenance {\n  rankdir=TB;\n");
    for n in &graph.nodes {
        let tip = n
            .tooltip
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect::<Vec<_>>()
            .join("\n");
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{}\", tooltip=\"{}\", shape=box, style=filled, fillcolor=\"{}\"];",
            n.id,
            dot_escape(&n.label),
            dot_escape(&tip),
            n.kind.fill_color()
        );
    }
    if graph.truncated {
        let _ = writeln!(
            out,
            "  \"{TRUNCATION_PLACEHOLDER}\" [label=\"{TRUNCATION_PLACEHOLDER}\", shape=plaintext];"
        );
    }
    for e in &graph.edges {
        let _ = writeln!(out, "  \"{}\" -> \"{}\";", e.from, e.to);
    }
    out.push_str("}\n");
    out
}

pub fn export_json(graph: &ProvenanceGraph) -> String {
    serde_json::to_string_pretty(graph).expect("graph serializes")
}

pub fn parse_json(text: &str) -> Result<ProvenanceGraph> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph JSON: {e}")))
}
