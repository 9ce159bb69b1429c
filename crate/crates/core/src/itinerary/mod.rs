//! Connection graphs over the periodic orbits at one energy, walks on them,
//! and orbits that shadow a walk.

use serde::{Deserialize, Serialize};

use crate::connections::ConnectionOrbit;
use crate::error::{Error, Result};
use crate::upo::PeriodicOrbit;

mod shadow;

pub use shadow::{construct_shadow_orbit, ShadowKind, ShadowOptions, ShadowOrbit, ShadowSpec, DWELL_RADIUS, N_MIN, SHADOW_TOL};

/// Energies of orbits and connections in one graph must agree to this.
const ENERGY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub connection: ConnectionOrbit,
}

/// Directed multigraph: one vertex per periodic orbit, one edge per
/// connection. Loops and parallel edges are allowed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionGraph {
    pub energy: f64,
    pub vertices: Vec<PeriodicOrbit>,
    pub edges: Vec<Edge>,
}

impl ConnectionGraph {
    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.source == v).map(|(i, _)| i)
    }

    pub fn loops(&self) -> usize {
        self.edges.iter().filter(|e| e.source == e.target).count()
    }
}

/// Graph over `upos` (all at one energy, distinct saddles) with an edge per
/// connection, ordered by connection id and then section point.
pub fn build_graph(upos: &[PeriodicOrbit], connections: &[ConnectionOrbit]) -> Result<ConnectionGraph> {
    let Some(first) = upos.first() else {
        if connections.is_empty() {
            return Ok(ConnectionGraph { energy: f64::NAN, vertices: Vec::new(), edges: Vec::new() });
        }
        return Err(Error::InvalidConfig("connections given without periodic orbits".into()));
    };
    let energy = first.energy;
    for o in upos {
        if (o.energy - energy).abs() > ENERGY_TOL {
            return Err(Error::EnergyMismatch(format!("orbits at {} and {}", energy, o.energy)));
        }
    }
    for (i, a) in upos.iter().enumerate() {
        if upos[..i].iter().any(|b| b.saddle == a.saddle) {
            return Err(Error::InvalidConfig(format!("two orbits around {}", a.saddle.as_str())));
        }
    }
    let vertex = |label| {
        upos.iter()
            .position(|o| o.saddle == label)
            .ok_or_else(|| Error::InvalidConfig(format!("no orbit around {}", label.as_str())))
    };
    let mut edges = Vec::with_capacity(connections.len());
    for c in connections {
        if (c.energy - energy).abs() > ENERGY_TOL {
            return Err(Error::EnergyMismatch(format!("connection {} at {} in a graph at {}", c.id, c.energy, energy)));
        }
        edges.push(Edge { source: vertex(c.source)?, target: vertex(c.target)?, connection: c.clone() });
    }
    edges.sort_by(|a, b| {
        let (p, q) = (a.connection.section_point, b.connection.section_point);
        a.connection.id.cmp(&b.connection.id).then(p[0].total_cmp(&q[0])).then(p[1].total_cmp(&q[1]))
    });
    Ok(ConnectionGraph { energy, vertices: upos.to_vec(), edges })
}

/// An edge sequence whose consecutive edges compose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk {
    pub edges: Vec<usize>,
    /// `edges.len() + 1` vertices.
    pub vertices: Vec<usize>,
}

impl Walk {
    pub fn new(graph: &ConnectionGraph, edges: Vec<usize>) -> Result<Self> {
        let Some(&e0) = edges.first() else { return Err(Error::InvalidWalk("empty walk".into())) };
        let get = |e: usize| graph.edges.get(e).ok_or_else(|| Error::InvalidWalk(format!("no edge {e}")));
        let mut vertices = vec![get(e0)?.source];
        for &e in &edges {
            let edge = get(e)?;
            if edge.source != *vertices.last().unwrap() {
                return Err(Error::InvalidWalk(format!("edge {e} does not start where the walk is")));
            }
            vertices.push(edge.target);
        }
        Ok(Self { edges, vertices })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.vertices.first() == self.vertices.last()
    }
}

/// All walks of `k` edges, optionally from one vertex and/or closed.
pub fn enumerate_walks(graph: &ConnectionGraph, k: usize, start: Option<usize>, closed_only: bool) -> Vec<Walk> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let starts: Vec<usize> = match start {
        Some(v) => vec![v],
        None => (0..graph.vertices.len()).collect(),
    };
    fn extend(g: &ConnectionGraph, k: usize, path: &mut Vec<usize>, at: usize, first: usize, closed: bool, out: &mut Vec<Walk>) {
        if path.len() == k {
            if !closed || at == first {
                let mut vertices = vec![first];
                vertices.extend(path.iter().map(|&e| g.edges[e].target));
                out.push(Walk { edges: path.clone(), vertices });
            }
            return;
        }
        for e in g.out_edges(at) {
            path.push(e);
            extend(g, k, path, g.edges[e].target, first, closed, out);
            path.pop();
        }
    }
    for v in starts {
        extend(graph, k, &mut Vec::with_capacity(k), v, v, closed_only, &mut out);
    }
    out
}
