use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{EquilibriumParams, MomentPair};
use crate::error::{Error, Result};
use crate::grid::EnergyGrid;

/// Which density a [`Distribution`] stores at the grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    /// Occupation number `f(ε)`.
    Occupation,
    /// Mass density per unit energy `g(ε) = 4π√(2ε) f(ε)`.
    MassDensity,
}

/// `4π√(2ε)`, the factor converting `f` into `g`.
pub fn density_factor(energy: f64) -> f64 {
    4.0 * PI * (2.0 * energy).sqrt()
}

/// Nodal values of `f` or `g`, plus the condensate mass for `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    kind: DistributionKind,
    values: Vec<f64>,
    condensate: f64,
    grid: Arc<EnergyGrid>,
}

impl Distribution {
    pub fn new(
        grid: Arc<EnergyGrid>,
        kind: DistributionKind,
        values: Vec<f64>,
        condensate: f64,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "expected {} nodal values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Contract(format!("value {v} at node {i} is not a finite non-negative number")));
        }
        if !(condensate.is_finite() && condensate >= 0.0) {
            return Err(Error::Contract(format!("condensate mass {condensate} is invalid")));
        }
        if kind == DistributionKind::Occupation && condensate != 0.0 {
            return Err(Error::Contract(
                "an occupation density cannot carry a condensate".into(),
            ));
        }
        if condensate > 0.0 && !grid.has_condensate_slot() {
            return Err(Error::Contract("grid has no condensate slot".into()));
        }
        Ok(Self {
            kind,
            values,
            condensate,
            grid,
        })
    }

    pub fn occupation(grid: Arc<EnergyGrid>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, DistributionKind::Occupation, values, 0.0)
    }

    pub fn mass_density(grid: Arc<EnergyGrid>, values: Vec<f64>, condensate: f64) -> Result<Self> {
        Self::new(grid, DistributionKind::MassDensity, values, condensate)
    }

    /// Occupation density sampled from `f` at the nodes.
    pub fn from_occupation_fn(grid: Arc<EnergyGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&e| f(e)).collect();
        Self::occupation(grid, values)
    }

    /// Bose–Einstein occupation at the nodes (the condensate part is dropped).
    pub fn bose_einstein(grid: Arc<EnergyGrid>, params: &EquilibriumParams) -> Result<Self> {
        let values = grid
            .nodes()
            .iter()
            .map(|&e| params.density(e))
            .collect::<Result<Vec<_>>>()?;
        Self::occupation(grid, values)
    }

    pub fn zeros(grid: Arc<EnergyGrid>, kind: DistributionKind) -> Self {
        let n = grid.len();
        Self {
            kind,
            values: vec![0.0; n],
            condensate: 0.0,
            grid,
        }
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn condensate(&self) -> f64 {
        self.condensate
    }

    pub fn grid(&self) -> &Arc<EnergyGrid> {
        &self.grid
    }

    pub(crate) fn expect_kind(&self, kind: DistributionKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Contract(format!(
                "expected a {kind:?} distribution, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// `g = 4π√(2ε) f`.
    pub fn to_mass_density(&self) -> Result<Self> {
        self.expect_kind(DistributionKind::Occupation)?;
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&e, &f)| density_factor(e) * f)
            .collect();
        Ok(Self {
            kind: DistributionKind::MassDensity,
            values,
            condensate: 0.0,
            grid: self.grid.clone(),
        })
    }

    /// `f = g / (4π√(2ε))`; fails when a condensate is present.
    pub fn to_occupation(&self) -> Result<Self> {
        self.expect_kind(DistributionKind::MassDensity)?;
        if self.condensate > 0.0 {
            return Err(Error::Contract(
                "a condensate cannot be represented as an occupation density".into(),
            ));
        }
        Ok(self.continuum_occupation())
    }

    /// Occupation density of the continuous part, ignoring any condensate.
    pub fn continuum_occupation(&self) -> Self {
        match self.kind {
            DistributionKind::Occupation => self.clone(),
            DistributionKind::MassDensity => {
                let values = self
                    .grid
                    .nodes()
                    .iter()
                    .zip(&self.values)
                    .map(|(&e, &g)| g / density_factor(e))
                    .collect();
                Self {
                    kind: DistributionKind::Occupation,
                    values,
                    condensate: 0.0,
                    grid: self.grid.clone(),
                }
            }
        }
    }

    /// Continuum mass density `g` at the nodes.
    pub fn mass_values(&self) -> Vec<f64> {
        match self.kind {
            DistributionKind::MassDensity => self.values.clone(),
            DistributionKind::Occupation => self
                .grid
                .nodes()
                .iter()
                .zip(&self.values)
                .map(|(&e, &f)| density_factor(e) * f)
                .collect(),
        }
    }

    /// Occupation density `f` at the nodes (continuum part).
    pub fn occupation_values(&self) -> Vec<f64> {
        match self.kind {
            DistributionKind::Occupation => self.values.clone(),
            DistributionKind::MassDensity => self.continuum_occupation().values,
        }
    }

    /// Particle density (condensate included) and energy density.
    pub fn moments(&self) -> MomentPair {
        let g = self.mass_values();
        let w = self.grid.weights();
        let e = self.grid.nodes();
        let mut mass = 0.0;
        let mut energy = 0.0;
        for i in 0..g.len() {
            mass += w[i] * g[i];
            energy += w[i] * e[i] * g[i];
        }
        MomentPair::new(mass + self.condensate, energy)
    }

    /// `max_i f_i`.
    pub fn linf(&self) -> f64 {
        self.occupation_values().into_iter().fold(0.0, f64::max)
    }
}
