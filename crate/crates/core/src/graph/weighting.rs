use super::RegularGraph;
use crate::error::{Error, Result};

/// Per-edge weights in `[0, 1]`, indexed by edge id. The weight an edge
/// loses reappears as self-loop mass, so the weighted graph stays
/// `d`-regular.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeighting {
    x: Vec<f64>,
}

impl EdgeWeighting {
    pub fn new(graph: &RegularGraph, x: Vec<f64>) -> Result<Self> {
        if x.len() != graph.edge_count() {
            return Err(Error::Parameter(format!(
                "{} weights for {} edges",
                x.len(),
                graph.edge_count()
            )));
        }
        if let Some((e, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!("weight {v} of edge {e} outside [0, 1]")));
        }
        Ok(Self { x })
    }

    pub fn ones(graph: &RegularGraph) -> Self {
        Self {
            x: vec![1.0; graph.edge_count()],
        }
    }

    pub fn get(&self, e: usize) -> f64 {
        self.x[e]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// Self-loop mass `ℓ'(v) = d − Σ_{e∋v} x_e`.
    pub fn loop_mass(&self, graph: &RegularGraph, v: usize) -> f64 {
        graph.d() as f64 - graph.incident_edges(v).iter().map(|&e| self.x[e]).sum::<f64>()
    }

    /// Total weight of edges whose id satisfies `pred`.
    pub fn weight_where(&self, mut pred: impl FnMut(usize) -> bool) -> f64 {
        self.x
            .iter()
            .enumerate()
            .filter(|(e, _)| pred(*e))
            .map(|(_, w)| w)
            .sum()
    }
}
