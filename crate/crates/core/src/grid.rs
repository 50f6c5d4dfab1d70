//! Energy discretization of the half-line `[0, L]`.
//!
//! The domain is split into `n` cells with edges `x_i = L (i/n)^p`; each cell
//! carries one node at its midpoint and a weight equal to its width. With
//! `p > 1` the cells crowd towards `ε = 0`, where condensation concentrates
//! mass. An optional condensate slot represents a point mass at `ε = 0` and
//! is kept apart from the continuum nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters from which an [`EnergyGrid`] is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_nodes: usize,
    pub cutoff_energy: f64,
    #[serde(default = "default_clustering")]
    pub clustering: f64,
    #[serde(default = "default_condensate_slot")]
    pub condensate_slot: bool,
}

fn default_clustering() -> f64 {
    2.0
}

fn default_condensate_slot() -> bool {
    true
}

impl GridSpec {
    pub fn new(n_nodes: usize, cutoff_energy: f64, clustering: f64) -> Self {
        Self {
            n_nodes,
            cutoff_energy,
            clustering,
            condensate_slot: true,
        }
    }

    pub fn uniform(n_nodes: usize, cutoff_energy: f64) -> Self {
        Self::new(n_nodes, cutoff_energy, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 nodes, got {}",
                self.n_nodes
            )));
        }
        if !(self.cutoff_energy.is_finite() && self.cutoff_energy > 0.0) {
            return Err(Error::Config(format!(
                "cutoff energy must be positive and finite, got {}",
                self.cutoff_energy
            )));
        }
        if !(self.clustering.is_finite() && self.clustering > 0.0) {
            return Err(Error::Config(format!(
                "clustering exponent must be positive, got {}",
                self.clustering
            )));
        }
        Ok(())
    }
}

/// Cell-centred energy grid with midpoint quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    edges: Vec<f64>,
    cutoff: f64,
    has_condensate_slot: bool,
    spec: GridSpec,
}

impl EnergyGrid {
    pub fn build(spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_nodes;
        let l = spec.cutoff_energy;
        let p = spec.clustering;
        let mut edges: Vec<f64> = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                if p == 1.0 {
                    l * s
                } else {
                    l * s.powf(p)
                }
            })
            .collect();
        edges[n] = l;
        let nodes: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let weights: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let grid = Self {
            nodes,
            weights,
            edges,
            cutoff: l,
            has_condensate_slot: spec.condensate_slot,
            spec: spec.clone(),
        };
        grid.check_invariants()?;
        Ok(grid)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.nodes[0] <= 0.0 {
            return Err(Error::Config("first node must be positive".into()));
        }
        if self.nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "nodes are not strictly increasing; reduce n_nodes or clustering".into(),
            ));
        }
        if self.weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Config("non-positive quadrature weight".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cell edges `x_0 = 0 < x_1 < … < x_n = L`; node `i` sits in `[x_i, x_{i+1}]`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn has_condensate_slot(&self) -> bool {
        self.has_condensate_slot
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn first_node(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last_node(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `Σ w_i v_i`.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        Ok(self.quadrature_unchecked(values))
    }

    pub(crate) fn quadrature_unchecked(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Quadrature of `h(ε_i) · values_i`.
    pub fn weighted_quadrature(&self, values: &[f64], h: impl Fn(f64) -> f64) -> Result<f64> {
        self.check_len(values)?;
        Ok(self
            .nodes
            .iter()
            .zip(&self.weights)
            .zip(values)
            .map(|((&e, &w), &v)| w * h(e) * v)
            .sum())
    }

    /// Piecewise-linear interpolant of nodal values, constant beyond the end nodes.
    pub fn interpolate(&self, values: &[f64], energy: f64) -> Result<f64> {
        self.check_len(values)?;
        if !(0.0..=self.cutoff).contains(&energy) {
            return Err(Error::Domain(format!(
                "energy {energy} outside [0, {}]",
                self.cutoff
            )));
        }
        Ok(self.interpolate_clamped(values, energy))
    }

    pub(crate) fn interpolate_clamped(&self, values: &[f64], energy: f64) -> f64 {
        match self.bracket(energy) {
            Bracket::Below => values[0],
            Bracket::Above => values[values.len() - 1],
            Bracket::Inside(i, t) => values[i] + t * (values[i + 1] - values[i]),
        }
    }

    /// Locates `energy` between two consecutive nodes.
    pub fn bracket(&self, energy: f64) -> Bracket {
        let n = self.nodes.len();
        if energy <= self.nodes[0] {
            return if energy == self.nodes[0] {
                Bracket::Inside(0, 0.0)
            } else {
                Bracket::Below
            };
        }
        if energy >= self.nodes[n - 1] {
            return if energy == self.nodes[n - 1] {
                Bracket::Inside(n - 2, 1.0)
            } else {
                Bracket::Above
            };
        }
        // first index with node > energy
        let hi = self.nodes.partition_point(|&x| x <= energy);
        let lo = hi - 1;
        let t = (energy - self.nodes[lo]) / (self.nodes[hi] - self.nodes[lo]);
        Bracket::Inside(lo, t)
    }

    /// Index of the cell containing `energy` (clamped to the last cell).
    pub fn cell_of(&self, energy: f64) -> usize {
        let k = self.edges.partition_point(|&x| x <= energy);
        k.saturating_sub(1).min(self.nodes.len() - 1)
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.nodes.len() {
            return Err(Error::Contract(format!(
                "expected {} nodal values, got {}",
                self.nodes.len(),
                values.len()
            )));
        }
        Ok(())
    }
}

/// Position of an energy relative to the node list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    Below,
    Above,
    /// `ε = (1 − t) ε_i + t ε_{i+1}` with `t ∈ [0, 1]`.
    Inside(usize, f64),
}
