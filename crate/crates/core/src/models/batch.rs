use crate::encode::EncodedTable;
use crate::graph::GraphSchema;
use crate::sampler::Datapoint;
use crate::tensor::Tensor;

/// Nodes of one type inside a batch.
#[derive(Debug, Clone)]
pub struct TypeBlock {
    pub node_type: usize,
    /// Batch positions of this type's nodes, ascending.
    pub positions: Vec<usize>,
    /// `[positions.len(), dense_width]`
    pub dense: Tensor,
    /// One index vector per categorical column.
    pub categorical: Vec<Vec<usize>>,
}

/// Disjoint union of datapoints, addressed through segment ids.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub num_nodes: usize,
    pub num_graphs: usize,
    pub graph_of: Vec<usize>,
    pub node_type: Vec<usize>,
    /// Edges as (src, dst, edge type index) over batch positions.
    pub edges: Vec<(usize, usize, usize)>,
    pub blocks: Vec<TypeBlock>,
    /// Row of node `i` within the concatenation of `blocks` outputs.
    pub block_row: Vec<usize>,
    pub labels: Vec<Option<u8>>,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
}

impl GraphBatch {
    pub fn new(datapoints: &[&Datapoint], features: &[EncodedTable], schema: &GraphSchema) -> GraphBatch {
        let mut graph_of = Vec::new();
        let mut node_type = Vec::new();
        let mut rows = Vec::new();
        let mut edges = Vec::new();
        for (g, dp) in datapoints.iter().enumerate() {
            let base = graph_of.len();
            for n in &dp.nodes {
                graph_of.push(g);
                node_type.push(n.table);
                rows.push(n.row);
            }
            for e in &dp.edges {
                let t = schema.edge_type_index(e.edge_type).expect("edge type in schema");
                edges.push((base + e.src, base + e.dst, t));
            }
        }
        let num_nodes = graph_of.len();
        let mut in_degree = vec![0; num_nodes];
        let mut out_degree = vec![0; num_nodes];
        for &(s, d, _) in &edges {
            out_degree[s] += 1;
            in_degree[d] += 1;
        }

        let mut blocks = Vec::new();
        let mut block_row = vec![0; num_nodes];
        let mut offset = 0;
        for (t, table) in features.iter().enumerate() {
            let positions: Vec<usize> = (0..num_nodes).filter(|&i| node_type[i] == t).collect();
            if positions.is_empty() {
                continue;
            }
            let mut dense = Vec::with_capacity(positions.len() * table.dense_width);
            let mut categorical = vec![Vec::with_capacity(positions.len()); table.num_categorical];
            for (k, &p) in positions.iter().enumerate() {
                dense.extend_from_slice(table.dense_row(rows[p]));
                for (c, &idx) in table.categorical_row(rows[p]).iter().enumerate() {
                    categorical[c].push(idx);
                }
                block_row[p] = offset + k;
            }
            offset += positions.len();
            let dense = Tensor::new(vec![positions.len(), table.dense_width], dense);
            blocks.push(TypeBlock { node_type: t, positions, dense, categorical });
        }

        GraphBatch {
            num_nodes,
            num_graphs: datapoints.len(),
            graph_of,
            node_type,
            edges,
            blocks,
            block_row,
            labels: datapoints.iter().map(|d| d.label).collect(),
            in_degree,
            out_degree,
        }
    }

    /// Labels as class indices; unlabeled datapoints count as negative.
    pub fn class_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.unwrap_or(0) as usize).collect()
    }

    /// Symmetric normalization coefficient of edge `k` over the full edge set.
    pub fn gcn_norm(&self, k: usize) -> f64 {
        let (s, d, _) = self.edges[k];
        1.0 / ((self.out_degree[s] * self.in_degree[d]) as f64).sqrt()
    }
}
