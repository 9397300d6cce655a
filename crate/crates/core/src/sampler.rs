//! Per-target subgraph extraction.
//!
//! Starting from the target node, the selection first absorbs every ancestor
//! (rows that reference into the selected set, transitively), then every
//! descendant of the selected set (rows referenced from it, transitively).
//! The datapoint holds the forward edges induced on the selection; reverse
//! edges and self loops are re-derived inside the subgraph.

use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{EdgeType, GraphSchema, HeteroGraph, NodeId};

pub const DEFAULT_SIZE_CAP: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("node {0:?} is not in the graph")]
    UnknownNode(NodeId),
    #[error("target {target:?} is not in the target table {target_table}")]
    WrongTable { target: NodeId, target_table: usize },
    #[error("datapoint for {target:?} exceeds the size cap of {cap} nodes")]
    SizeCap { target: NodeId, cap: usize },
    #[error("target row {row}: {source}")]
    Batch { row: usize, source: Box<SampleError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOptions {
    pub size_cap: usize,
    /// Follow each edge type in at most one expansion round.
    pub edge_type_once: bool,
    pub reverse_edges: bool,
    pub self_loops: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { size_cap: DEFAULT_SIZE_CAP, edge_type_once: false, reverse_edges: true, self_loops: true }
    }
}

/// Edge between two datapoint-local node positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalEdge {
    pub src: usize,
    pub dst: usize,
    pub edge_type: EdgeType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datapoint {
    /// Selected nodes ordered by (table, row).
    pub nodes: Vec<NodeId>,
    /// Induced forward edges followed by the derived reverse and self-loop edges.
    pub edges: Vec<LocalEdge>,
    /// Position of the target node in `nodes`.
    pub target: usize,
    pub label: Option<u8>,
}

impl Datapoint {
    pub fn target_node(&self) -> NodeId {
        self.nodes[self.target]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn forward_edges(&self) -> impl Iterator<Item = &LocalEdge> {
        self.edges.iter().filter(|e| matches!(e.edge_type, EdgeType::Forward { .. }))
    }

    /// Reorders nodes so that new position `i` holds old node `perm[i]`.
    /// Used to check that models do not depend on node order.
    pub fn permuted(&self, perm: &[usize]) -> Datapoint {
        assert_eq!(perm.len(), self.nodes.len());
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Datapoint {
            nodes: perm.iter().map(|&old| self.nodes[old]).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| LocalEdge { src: inverse[e.src], dst: inverse[e.dst], edge_type: e.edge_type })
                .collect(),
            target: inverse[self.target],
            label: self.label,
        }
    }

    pub fn to_record(&self, schema: &GraphSchema) -> DatapointRecord {
        let t = self.target_node();
        DatapointRecord {
            target: [t.table, t.row],
            label: self.label,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord { id: [n.table, n.row], node_type: schema.node_types[n.table].clone() })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    let (s, d) = (self.nodes[e.src], self.nodes[e.dst]);
                    EdgeRecord { src: [s.table, s.row], dst: [d.table, d.row], edge_type: schema.edge_type_name(e.edge_type) }
                })
                .collect(),
        }
    }
}

/// One JSON Lines record of the `sample` output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatapointRecord {
    pub target: [usize; 2],
    pub label: Option<u8>,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRecord {
    pub id: [usize; 2],
    #[serde(rename = "type")]
    pub node_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRecord {
    pub src: [usize; 2],
    pub dst: [usize; 2],
    #[serde(rename = "type")]
    pub edge_type: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// Sources of edges entering the selection.
    Ancestors,
    /// Destinations of edges leaving the selection.
    Descendants,
}

struct Closure<'g> {
    graph: &'g HeteroGraph,
    selected: HashSet<usize>,
    order: Vec<usize>,
    cap: usize,
    target: NodeId,
}

impl Closure<'_> {
    fn insert(&mut self, node: usize) -> Result<bool, SampleError> {
        if !self.selected.insert(node) {
            return Ok(false);
        }
        self.order.push(node);
        if self.order.len() > self.cap {
            return Err(SampleError::SizeCap { target: self.target, cap: self.cap });
        }
        Ok(true)
    }

    fn neighbors(&self, node: usize, dir: Direction) -> &[(usize, usize)] {
        match dir {
            Direction::Ancestors => self.graph.forward_in(node),
            Direction::Descendants => self.graph.forward_out(node),
        }
    }

    /// Plain fixpoint: a breadth-first sweep that only ever visits new nodes.
    fn expand(&mut self, dir: Direction) -> Result<(), SampleError> {
        let mut queue: VecDeque<usize> = self.order.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for i in 0..self.neighbors(v, dir).len() {
                let (w, _) = self.neighbors(v, dir)[i];
                if self.insert(w)? {
                    queue.push_back(w);
                }
            }
        }
        Ok(())
    }

    /// Round-based fixpoint where an edge type that added nodes in one round
    /// is unavailable in every later round (of either phase).
    fn expand_once(&mut self, dir: Direction, spent: &mut HashSet<usize>) -> Result<(), SampleError> {
        let mut frontier: Vec<usize> = self.order.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            let mut used = HashSet::new();
            for &v in &frontier {
                for i in 0..self.neighbors(v, dir).len() {
                    let (w, fk) = self.neighbors(v, dir)[i];
                    if spent.contains(&fk) {
                        continue;
                    }
                    if self.insert(w)? {
                        used.insert(fk);
                        next.push(w);
                    }
                }
            }
            spent.extend(used);
            frontier = next;
        }
        Ok(())
    }
}

fn check_target(graph: &HeteroGraph, target: NodeId, target_table: Option<usize>) -> Result<(), SampleError> {
    if !graph.contains(target) {
        return Err(SampleError::UnknownNode(target));
    }
    if let Some(k) = target_table {
        if target.table != k {
            return Err(SampleError::WrongTable { target, target_table: k });
        }
    }
    Ok(())
}

/// Ancestor-then-descendant closure around `target`; see the module docs.
pub fn rdb_to_graph(graph: &HeteroGraph, target: NodeId, options: &SampleOptions) -> Result<Datapoint, SampleError> {
    check_target(graph, target, None)?;
    let start = graph.global(target);
    let mut c = Closure { graph, selected: HashSet::new(), order: Vec::new(), cap: options.size_cap, target };
    c.insert(start)?;
    if options.edge_type_once {
        let mut spent = HashSet::new();
        c.expand_once(Direction::Ancestors, &mut spent)?;
        c.expand_once(Direction::Descendants, &mut spent)?;
    } else {
        c.expand(Direction::Ancestors)?;
        c.expand(Direction::Descendants)?;
    }
    Ok(induce(graph, c.order, start, options))
}

/// [`rdb_to_graph`] with each edge type followed in at most one expansion round.
pub fn rdb_to_graph_edge_type_once(graph: &HeteroGraph, target: NodeId) -> Result<Datapoint, SampleError> {
    rdb_to_graph(graph, target, &SampleOptions { edge_type_once: true, ..SampleOptions::default() })
}

fn induce(graph: &HeteroGraph, mut selected: Vec<usize>, target: usize, options: &SampleOptions) -> Datapoint {
    // Global indices are (table, row)-ordered already.
    selected.sort_unstable();
    let local: HashMap<usize, usize> = selected.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut edges = Vec::new();
    for (i, &v) in selected.iter().enumerate() {
        for &(w, fk) in graph.forward_out(v) {
            if let Some(&j) = local.get(&w) {
                edges.push(LocalEdge { src: i, dst: j, edge_type: graph.fk_edge_type(fk) });
            }
        }
    }
    edges.sort_unstable();
    if options.reverse_edges {
        let rev: Vec<LocalEdge> = edges
            .iter()
            .map(|e| LocalEdge { src: e.dst, dst: e.src, edge_type: e.edge_type.reversed().unwrap() })
            .collect();
        edges.extend(rev);
    }
    let nodes: Vec<NodeId> = selected.iter().map(|&g| graph.node_at(g)).collect();
    if options.self_loops {
        edges.extend(
            nodes.iter().enumerate().map(|(i, n)| LocalEdge { src: i, dst: i, edge_type: EdgeType::SelfLoop { table: n.table } }),
        );
    }
    Datapoint { target: local[&target], nodes, edges, label: None }
}

/// One datapoint per target row of table `target_table`, in request order,
/// labelled from `labels` (indexed by target row).
pub fn batch_sample(
    graph: &HeteroGraph,
    target_table: usize,
    rows: &[usize],
    labels: &[Option<u8>],
    options: &SampleOptions,
) -> Result<Vec<Datapoint>, SampleError> {
    rows.par_iter()
        .map(|&row| {
            let target = NodeId::new(target_table, row);
            check_target(graph, target, Some(target_table))
                .and_then(|_| rdb_to_graph(graph, target, options))
                .map(|mut dp| {
                    dp.label = labels.get(row).copied().flatten();
                    dp
                })
                .map_err(|e| SampleError::Batch { row, source: Box::new(e) })
        })
        .collect()
}
