//! The whole database as a typed directed multigraph: one node per row, one
//! edge type per foreign-key column, one edge per resolved foreign-key cell.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rdb::Database;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId {
    pub table: usize,
    pub row: usize,
}

impl NodeId {
    pub fn new(table: usize, row: usize) -> Self {
        NodeId { table, row }
    }
}

/// Edge type: a foreign-key column in either direction, or a per-node-type self loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    /// From the referencing row to the referenced row.
    Forward { table: usize, column: usize },
    Reverse { table: usize, column: usize },
    SelfLoop { table: usize },
}

impl EdgeType {
    pub fn reversed(self) -> Option<EdgeType> {
        match self {
            EdgeType::Forward { table, column } => Some(EdgeType::Reverse { table, column }),
            EdgeType::Reverse { table, column } => Some(EdgeType::Forward { table, column }),
            EdgeType::SelfLoop { .. } => None,
        }
    }

    pub fn is_self_loop(self) -> bool {
        matches!(self, EdgeType::SelfLoop { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FkType {
    pub table: usize,
    pub column: usize,
    pub ref_table: usize,
    /// `Table.column`
    pub name: String,
}

/// Node and edge types of a database, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSchema {
    pub node_types: Vec<String>,
    pub fks: Vec<FkType>,
}

impl GraphSchema {
    pub fn from_database(db: &Database) -> Self {
        GraphSchema {
            node_types: db.tables().iter().map(|t| t.name.clone()).collect(),
            fks: db
                .foreign_keys()
                .iter()
                .map(|f| FkType {
                    table: f.table,
                    column: f.column,
                    ref_table: f.ref_table,
                    name: db.column_name(f.table, f.column),
                })
                .collect(),
        }
    }

    /// Forward then reverse per foreign key, then one self loop per node type.
    pub fn edge_types(&self) -> Vec<EdgeType> {
        let mut out = Vec::with_capacity(2 * self.fks.len() + self.node_types.len());
        for f in &self.fks {
            out.push(EdgeType::Forward { table: f.table, column: f.column });
            out.push(EdgeType::Reverse { table: f.table, column: f.column });
        }
        out.extend((0..self.node_types.len()).map(|table| EdgeType::SelfLoop { table }));
        out
    }

    pub fn edge_type_index(&self, et: EdgeType) -> Option<usize> {
        match et {
            EdgeType::Forward { table, column } => self.fk_index(table, column).map(|i| 2 * i),
            EdgeType::Reverse { table, column } => self.fk_index(table, column).map(|i| 2 * i + 1),
            EdgeType::SelfLoop { table } => (table < self.node_types.len()).then_some(2 * self.fks.len() + table),
        }
    }

    pub fn num_edge_types(&self) -> usize {
        2 * self.fks.len() + self.node_types.len()
    }

    fn fk_index(&self, table: usize, column: usize) -> Option<usize> {
        self.fks.iter().position(|f| f.table == table && f.column == column)
    }

    /// (source node type, destination node type)
    pub fn endpoints(&self, et: EdgeType) -> (usize, usize) {
        match et {
            EdgeType::Forward { table, column } => (table, self.fks[self.fk_index(table, column).unwrap()].ref_table),
            EdgeType::Reverse { table, column } => (self.fks[self.fk_index(table, column).unwrap()].ref_table, table),
            EdgeType::SelfLoop { table } => (table, table),
        }
    }

    pub fn edge_type_name(&self, et: EdgeType) -> String {
        match et {
            EdgeType::Forward { table, column } => self.fks[self.fk_index(table, column).unwrap()].name.clone(),
            EdgeType::Reverse { table, column } => format!("{}~rev", self.fks[self.fk_index(table, column).unwrap()].name),
            EdgeType::SelfLoop { table } => format!("{}~self", self.node_types[table]),
        }
    }
}

/// Compressed adjacency over global node indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Csr {
    offsets: Vec<usize>,
    /// (neighbor, foreign key index)
    targets: Vec<(usize, usize)>,
}

impl Csr {
    fn build(n: usize, edges: &[(usize, usize, usize)]) -> Csr {
        let mut counts = vec![0usize; n + 1];
        for &(s, _, _) in edges {
            counts[s + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut targets = vec![(0, 0); edges.len()];
        for &(s, d, f) in edges {
            targets[fill[s]] = (d, f);
            fill[s] += 1;
        }
        Csr { offsets: counts, targets }
    }

    pub(crate) fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeteroGraph {
    schema: GraphSchema,
    node_counts: Vec<usize>,
    offsets: Vec<usize>,
    edges: BTreeMap<EdgeType, Vec<(NodeId, NodeId)>>,
    forward_out: Csr,
    forward_in: Csr,
}

/// One node per row, one forward edge per resolved non-null foreign-key cell.
pub fn database_to_graph(db: &Database) -> HeteroGraph {
    let schema = GraphSchema::from_database(db);
    let node_counts = db.row_counts();
    let mut offsets = Vec::with_capacity(node_counts.len() + 1);
    let mut acc = 0;
    for &c in &node_counts {
        offsets.push(acc);
        acc += c;
    }
    offsets.push(acc);

    let mut edges = BTreeMap::new();
    let mut flat = Vec::new();
    for (fi, fk) in db.foreign_keys().iter().enumerate() {
        let list: Vec<(NodeId, NodeId)> = fk
            .resolved
            .iter()
            .enumerate()
            .filter_map(|(r, dst)| dst.map(|d| (NodeId::new(fk.table, r), NodeId::new(fk.ref_table, d))))
            .collect();
        flat.extend(list.iter().map(|(s, d)| (offsets[s.table] + s.row, offsets[d.table] + d.row, fi)));
        edges.insert(EdgeType::Forward { table: fk.table, column: fk.column }, list);
    }
    let n = acc;
    let forward_out = Csr::build(n, &flat);
    let reversed: Vec<_> = flat.iter().map(|&(s, d, f)| (d, s, f)).collect();
    let forward_in = Csr::build(n, &reversed);
    HeteroGraph { schema, node_counts, offsets, edges, forward_out, forward_in }
}

impl HeteroGraph {
    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    pub fn num_nodes(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.node_counts
    }

    pub fn num_edges(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    pub fn edges(&self) -> &BTreeMap<EdgeType, Vec<(NodeId, NodeId)>> {
        &self.edges
    }

    pub fn edges_of(&self, et: EdgeType) -> &[(NodeId, NodeId)] {
        self.edges.get(&et).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.table < self.node_counts.len() && node.row < self.node_counts[node.table]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_counts.iter().enumerate().flat_map(|(t, &n)| (0..n).map(move |r| NodeId::new(t, r)))
    }

    pub(crate) fn global(&self, node: NodeId) -> usize {
        self.offsets[node.table] + node.row
    }

    pub(crate) fn node_at(&self, global: usize) -> NodeId {
        let table = self.offsets.partition_point(|&o| o <= global) - 1;
        NodeId::new(table, global - self.offsets[table])
    }

    /// Forward edges leaving / entering a node, as (other global index, fk index).
    pub(crate) fn forward_out(&self, global: usize) -> &[(usize, usize)] {
        self.forward_out.neighbors(global)
    }

    pub(crate) fn forward_in(&self, global: usize) -> &[(usize, usize)] {
        self.forward_in.neighbors(global)
    }

    pub(crate) fn fk_edge_type(&self, fk: usize) -> EdgeType {
        let f = &self.schema.fks[fk];
        EdgeType::Forward { table: f.table, column: f.column }
    }

    /// Adds the paired reverse edge for every forward edge. Idempotent.
    pub fn add_reverse_edges(mut self) -> HeteroGraph {
        let forward: Vec<(EdgeType, Vec<(NodeId, NodeId)>)> = self
            .edges
            .iter()
            .filter(|(et, _)| matches!(et, EdgeType::Forward { .. }))
            .map(|(et, list)| (*et, list.clone()))
            .collect();
        for (et, list) in forward {
            let rev = et.reversed().unwrap();
            self.edges.insert(rev, list.into_iter().map(|(s, d)| (d, s)).collect());
        }
        self
    }

    /// Gives every node exactly one self loop of its node type. Idempotent.
    pub fn add_self_loops(mut self) -> HeteroGraph {
        for (t, &n) in self.node_counts.iter().enumerate() {
            let loops = (0..n).map(|r| (NodeId::new(t, r), NodeId::new(t, r))).collect();
            self.edges.insert(EdgeType::SelfLoop { table: t }, loops);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeCount {
    pub name: String,
    pub count: usize,
}

/// Histogram with unit-width buckets `[lower, lower + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bucket_lower_edges: Vec<usize>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn of(values: &[usize]) -> Histogram {
        let Some(&max) = values.iter().max() else {
            return Histogram { bucket_lower_edges: vec![], counts: vec![] };
        };
        let mut counts = vec![0; max + 1];
        for &v in values {
            counts[v] += 1;
        }
        Histogram { bucket_lower_edges: (0..=max).collect(), counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub nodes_per_type: Vec<TypeCount>,
    pub edges_per_type: Vec<TypeCount>,
    pub in_degree: Histogram,
    pub out_degree: Histogram,
}

/// Counts per node/edge type and degree histograms over all edges present.
pub fn graph_stats(g: &HeteroGraph) -> GraphStats {
    let n = g.num_nodes();
    let mut indeg = vec![0usize; n];
    let mut outdeg = vec![0usize; n];
    for list in g.edges.values() {
        for &(s, d) in list {
            outdeg[g.global(s)] += 1;
            indeg[g.global(d)] += 1;
        }
    }
    let edges_per_type = g
        .schema
        .edge_types()
        .into_iter()
        .filter_map(|et| g.edges.get(&et).map(|l| TypeCount { name: g.schema.edge_type_name(et), count: l.len() }))
        .collect();
    GraphStats {
        num_nodes: n,
        num_edges: g.num_edges(),
        nodes_per_type: g
            .schema
            .node_types
            .iter()
            .zip(&g.node_counts)
            .map(|(name, &count)| TypeCount { name: name.clone(), count })
            .collect(),
        edges_per_type,
        in_degree: Histogram::of(&indeg),
        out_degree: Histogram::of(&outdeg),
    }
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes {}", self.num_nodes)?;
        writeln!(f, "edges {}", self.num_edges)?;
        for t in &self.nodes_per_type {
            writeln!(f, "node_type {} {}", t.name, t.count)?;
        }
        for t in &self.edges_per_type {
            writeln!(f, "edge_type {} {}", t.name, t.count)?;
        }
        for (label, h) in [("in_degree", &self.in_degree), ("out_degree", &self.out_degree)] {
            for (lo, c) in h.bucket_lower_edges.iter().zip(&h.counts) {
                writeln!(f, "{label} [{lo},{}) {c}", lo + 1)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdb::fixtures::{employee_chain, patient_visit};
    use crate::rdb::{CellValue, ColumnKind, ColumnSpec, Table};

    #[test]
    fn fixture_counts() {
        let db = patient_visit();
        let g = database_to_graph(&db);
        assert_eq!(g.num_nodes(), 6);
        let patient_edges = g.edges_of(EdgeType::Forward { table: 2, column: 1 });
        assert_eq!(patient_edges.len(), 3);
        // Visit.doctor_id has one null.
        assert_eq!(g.edges_of(EdgeType::Forward { table: 2, column: 2 }).len(), 2);
        for &(s, d) in patient_edges {
            assert_eq!((s.table, d.table), (2, 0));
        }
        let stats = graph_stats(&g);
        let counts: Vec<_> = stats.nodes_per_type.iter().map(|t| (t.name.as_str(), t.count)).collect();
        assert_eq!(counts, vec![("Patient", 2), ("Doctor", 1), ("Visit", 3)]);
    }

    #[test]
    fn null_foreign_key_drops_edge() {
        let mut tables = patient_visit().tables().to_vec();
        tables[2].rows[1][1] = CellValue::Null;
        let g = database_to_graph(&Database::new(tables, true).unwrap());
        assert_eq!(g.edges_of(EdgeType::Forward { table: 2, column: 1 }).len(), 2);
    }

    #[test]
    fn single_table_no_edges() {
        let mut t = Table::new("T", vec![ColumnSpec::new("x", ColumnKind::Scalar)]);
        t.rows = vec![vec![CellValue::Scalar(1.0)]; 4];
        let g = database_to_graph(&Database::new(vec![t], true).unwrap());
        assert_eq!((g.num_nodes(), g.num_edges()), (4, 0));
    }

    #[test]
    fn reverse_and_self_loops() {
        let g = database_to_graph(&patient_visit());
        let forward = g.num_edges();
        let r = g.clone().add_reverse_edges();
        assert_eq!(r.num_edges(), 2 * forward);
        assert_eq!(r.clone().add_reverse_edges(), r);
        for (et, list) in r.edges() {
            if let EdgeType::Reverse { table, column } = et {
                let fwd = r.edges_of(EdgeType::Forward { table: *table, column: *column });
                assert_eq!(list.len(), fwd.len());
                assert!(fwd.iter().zip(list).all(|(a, b)| a.0 == b.1 && a.1 == b.0));
            }
        }
        let s = g.clone().add_self_loops();
        assert_eq!(s.num_edges() - forward, 6);
        assert_eq!(s.clone().add_self_loops(), s);
        // The doctor has only its self loop plus incoming visit edges; every node gets one loop.
        for node in s.nodes() {
            let loops = s.edges_of(EdgeType::SelfLoop { table: node.table });
            assert_eq!(loops.iter().filter(|(a, _)| *a == node).count(), 1);
        }
    }

    #[test]
    fn empty_graph() {
        let t = Table::new("T", vec![ColumnSpec::new("x", ColumnKind::Scalar)]);
        let g = database_to_graph(&Database::new(vec![t], true).unwrap()).add_reverse_edges().add_self_loops();
        assert_eq!((g.num_nodes(), g.num_edges()), (0, 0));
        let stats = graph_stats(&g);
        assert_eq!(stats.num_nodes, 0);
        assert!(stats.in_degree.counts.is_empty());
    }

    #[test]
    fn chain_in_degree_histogram() {
        let g = database_to_graph(&employee_chain());
        let stats = graph_stats(&g);
        // e1 and e2 each have one incoming manager edge; e3 none.
        assert_eq!(stats.in_degree.bucket_lower_edges, vec![0, 1]);
        assert_eq!(stats.in_degree.counts, vec![1, 2]);
        let text = stats.to_string();
        assert!(text.contains("in_degree [0,1) 1"));
        assert!(text.contains("edge_type Employee.manager 2"));
    }

    #[test]
    fn node_index_round_trip() {
        let g = database_to_graph(&patient_visit());
        for node in g.nodes() {
            assert_eq!(g.node_at(g.global(node)), node);
        }
    }

    #[test]
    fn edge_type_registry() {
        let schema = GraphSchema::from_database(&patient_visit());
        let all = schema.edge_types();
        assert_eq!(all.len(), schema.num_edge_types());
        for (i, et) in all.iter().enumerate() {
            assert_eq!(schema.edge_type_index(*et), Some(i));
        }
        assert_eq!(schema.edge_type_name(all[1]), "Visit.patient_id~rev");
        assert_eq!(schema.endpoints(all[1]), (0, 2));
    }
}
