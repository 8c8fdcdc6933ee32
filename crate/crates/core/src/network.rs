//! Threshold-selected transaction networks and the walnut partition.
//!
//! A *big node* at threshold `T` is any account that sent or received at least
//! one transaction of `T` or more. The network at `T` is the subgraph induced
//! by big nodes: every transaction between two big nodes, of any size, merged
//! into one weighted edge per ordered pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{classify_node, FlowIndex, NodeClass};
use crate::ingest::TransactionRecord;
use crate::stats::CcdfCurve;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EdgeWeight {
    pub total_drops: u128,
    pub txn_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ThresholdNetwork {
    pub threshold_drops: u64,
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), EdgeWeight>,
}

impl ThresholdNetwork {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Distinct ordered (source, destination) pairs, self-loops included.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn txn_count(&self) -> u64 {
        self.edges.values().map(|e| e.txn_count).sum()
    }

    pub fn total_drops(&self) -> u128 {
        self.edges.values().map(|e| e.total_drops).sum()
    }

    /// Distinct-counterparty degree of every node, in node order.
    pub fn degrees(&self, direction: Direction) -> BTreeMap<&str, usize> {
        let mut deg: BTreeMap<&str, usize> = self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for (src, dst) in self.edges.keys() {
            let end = match direction {
                Direction::In => dst,
                Direction::Out => src,
            };
            *deg.get_mut(end.as_str()).expect("edge endpoints are nodes") += 1;
        }
        deg
    }
}

/// Accounts on either side of a transaction of at least `threshold_drops`.
pub fn select_big_nodes<'a>(
    records: impl IntoIterator<Item = &'a TransactionRecord>,
    threshold_drops: u64,
) -> BTreeSet<String> {
    let mut nodes = BTreeSet::new();
    for rec in records {
        if rec.amount_drops >= threshold_drops {
            if !nodes.contains(&rec.source) {
                nodes.insert(rec.source.clone());
            }
            if !nodes.contains(&rec.destination) {
                nodes.insert(rec.destination.clone());
            }
        }
    }
    nodes
}

/// All transactions with both endpoints in `nodes`, merged per ordered pair.
pub fn induced_network<'a>(
    records: impl IntoIterator<Item = &'a TransactionRecord>,
    nodes: &BTreeSet<String>,
    threshold_drops: u64,
) -> ThresholdNetwork {
    let mut edges: BTreeMap<(String, String), EdgeWeight> = BTreeMap::new();
    for rec in records {
        if nodes.contains(&rec.source) && nodes.contains(&rec.destination) {
            let key = (rec.source.clone(), rec.destination.clone());
            let e = edges.entry(key).or_default();
            e.total_drops += rec.amount_drops as u128;
            e.txn_count += 1;
        }
    }
    ThresholdNetwork { threshold_drops, nodes: nodes.clone(), edges }
}

pub fn threshold_network(records: &[TransactionRecord], threshold_drops: u64) -> ThresholdNetwork {
    let nodes = select_big_nodes(records, threshold_drops);
    induced_network(records, &nodes, threshold_drops)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// CCDF over positive degrees; zero-degree nodes are counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeCcdf {
    pub curve: CcdfCurve,
    pub zero_degree: usize,
}

pub fn degree_ccdf(network: &ThresholdNetwork, direction: Direction) -> Result<DegreeCcdf> {
    if network.nodes.is_empty() {
        return Err(Error::domain("degree distribution of an empty network"));
    }
    let degrees = network.degrees(direction);
    let zero_degree = degrees.values().filter(|&&d| d == 0).count();
    let mut positive: Vec<f64> = degrees.values().filter(|&&d| d > 0).map(|&d| d as f64).collect();
    positive.sort_by(f64::total_cmp);
    Ok(DegreeCcdf { curve: CcdfCurve::from_sorted(&positive), zero_degree })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CrossEdges {
    pub pair_count: usize,
    pub txn_count: u64,
    pub total_drops: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeAssignment {
    pub class: NodeClass,
    pub index: FlowIndex,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalnutPartition {
    pub in_set: BTreeSet<String>,
    pub out_set: BTreeSet<String>,
    pub body_set: BTreeSet<String>,
    pub dormant_set: BTreeSet<String>,
    pub assignments: BTreeMap<String, NodeAssignment>,
    /// Edge totals between classes, keyed by (source class, destination class).
    pub cross: BTreeMap<(NodeClass, NodeClass), CrossEdges>,
}

impl WalnutPartition {
    pub fn set(&self, class: NodeClass) -> &BTreeSet<String> {
        match class {
            NodeClass::In => &self.in_set,
            NodeClass::Out => &self.out_set,
            NodeClass::Body => &self.body_set,
            NodeClass::Dormant => &self.dormant_set,
        }
    }

    pub fn class_of(&self, node: &str) -> Option<NodeClass> {
        self.assignments.get(node).map(|a| a.class)
    }
}

/// Classifies every network node from its (full-history) Flow Index.
pub fn walnut_decomposition(
    network: &ThresholdNetwork,
    flow: &BTreeMap<String, FlowIndex>,
    cutoff: f64,
) -> Result<WalnutPartition> {
    let mut p = WalnutPartition::default();
    for node in &network.nodes {
        let index = *flow.get(node).ok_or_else(|| Error::MissingNode(node.clone()))?;
        let class = classify_node(index, cutoff);
        let set = match class {
            NodeClass::In => &mut p.in_set,
            NodeClass::Out => &mut p.out_set,
            NodeClass::Body => &mut p.body_set,
            NodeClass::Dormant => &mut p.dormant_set,
        };
        set.insert(node.clone());
        p.assignments.insert(node.clone(), NodeAssignment { class, index });
    }
    for ((src, dst), w) in &network.edges {
        let key = (p.assignments[src].class, p.assignments[dst].class);
        let c = p.cross.entry(key).or_default();
        c.pair_count += 1;
        c.txn_count += w.txn_count;
        c.total_drops += w.total_drops;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "json" => Ok(GraphFormat::Json),
            other => Err(Error::Config(format!("unknown graph format {other:?}"))),
        }
    }
}

impl GraphFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            GraphFormat::Dot => "dot",
            GraphFormat::Json => "json",
        }
    }
}

fn fill_color(class: NodeClass) -> &'static str {
    match class {
        NodeClass::In => "#4e79a7",
        NodeClass::Out => "#e15759",
        NodeClass::Body => "#59a14f",
        NodeClass::Dormant => "#bab0ac",
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Serialize)]
struct GraphDoc<'a> {
    threshold_drops: u64,
    nodes: Vec<NodeDoc<'a>>,
    edges: Vec<EdgeDoc<'a>>,
}

#[derive(Serialize)]
struct NodeDoc<'a> {
    id: &'a str,
    class: NodeClass,
    a_in: f64,
    a_out: f64,
}

#[derive(Serialize)]
struct EdgeDoc<'a> {
    src: &'a str,
    dst: &'a str,
    total_drops: u128,
    txn_count: u64,
}

/// Renders the network with its partition. Output is deterministic.
pub fn export_graph(network: &ThresholdNetwork, partition: &WalnutPartition, format: GraphFormat) -> Result<Vec<u8>> {
    let assignment =
        |node: &str| partition.assignments.get(node).copied().ok_or_else(|| Error::MissingNode(node.to_owned()));
    match format {
        GraphFormat::Json => {
            let nodes = network
                .nodes
                .iter()
                .map(|id| {
                    let a = assignment(id)?;
                    Ok(NodeDoc { id, class: a.class, a_in: a.index.a_in, a_out: a.index.a_out })
                })
                .collect::<Result<Vec<_>>>()?;
            let edges = network
                .edges
                .iter()
                .map(|((src, dst), w)| EdgeDoc { src, dst, total_drops: w.total_drops, txn_count: w.txn_count })
                .collect();
            let doc = GraphDoc { threshold_drops: network.threshold_drops, nodes, edges };
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        GraphFormat::Dot => {
            let mut s = String::new();
            let _ = writeln!(s, "digraph walnut {{");
            let _ = writeln!(s, "  graph [threshold_drops=\"{}\"];", network.threshold_drops);
            let _ = writeln!(s, "  node [style=filled];");
            let mut walnut = Vec::new();
            for id in &network.nodes {
                let a = assignment(id)?;
                let _ = writeln!(
                    s,
                    "  {} [class=\"{}\", fillcolor=\"{}\", a_in=\"{}\", a_out=\"{}\"];",
                    dot_id(id),
                    a.class,
                    fill_color(a.class),
                    a.index.a_in,
                    a.index.a_out
                );
                if a.class != NodeClass::Dormant {
                    walnut.push(dot_id(id));
                }
            }
            if !walnut.is_empty() {
                let _ = writeln!(s, "  subgraph cluster_walnut {{");
                let _ = writeln!(s, "    label=\"walnut\";");
                for id in walnut {
                    let _ = writeln!(s, "    {id};");
                }
                let _ = writeln!(s, "  }}");
            }
            for ((src, dst), w) in &network.edges {
                let _ = writeln!(
                    s,
                    "  {} -> {} [total_drops=\"{}\", txn_count=\"{}\"];",
                    dot_id(src),
                    dot_id(dst),
                    w.total_drops,
                    w.txn_count
                );
            }
            s.push_str("}\n");
            Ok(s.into_bytes())
        }
    }
}
