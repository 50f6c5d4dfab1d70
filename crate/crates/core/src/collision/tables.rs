use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Bracket, EnergyGrid};

use super::{kernel_phi, kernel_ratio3, STRONG_PREFACTOR};

/// Default memory budget for kernel tables (2 GiB).
pub const DEFAULT_TABLE_BUDGET: u64 = 2 << 30;

/// Which of the two table families to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableSelection {
    /// Pair tables for the strong `f` form.
    pub strong: bool,
    /// Shell triples for the weak `g` form and the dissipation.
    pub shell: bool,
}

impl TableSelection {
    pub const ALL: Self = Self {
        strong: true,
        shell: true,
    };
    pub const STRONG: Self = Self {
        strong: true,
        shell: false,
    };
    pub const SHELL: Self = Self {
        strong: false,
        shell: true,
    };
}

const SHELL_ENTRY_BYTES: u64 = 3 * 4 + 3 * 8;
const STRONG_ENTRY_BYTES: u64 = 3 * 4 + 2 * 8;

/// Shell triples `(a, b, c)` on the extended node list `e_0 = 0, e_k = ε_{k−1}`.
///
/// Entries are grouped by `a` and only `a ≤ b` is stored. The fourth energy
/// `ε₄ = e_a + e_b − e_c` is split linearly between extended nodes `p` and
/// `p + 1` with fraction `t` towards `p + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellTable {
    pub(crate) energies: Vec<f64>,
    pub(crate) offsets: Vec<usize>,
    pub(crate) b: Vec<u32>,
    pub(crate) c: Vec<u32>,
    pub(crate) p: Vec<u32>,
    pub(crate) t: Vec<f64>,
    /// Multiplicity times `Φ/√(e_a e_b e_c)` (continuous extension at 0).
    pub(crate) k3: Vec<f64>,
    /// Raw `Φ(e_a, e_b, e_c)`.
    pub(crate) phi: Vec<f64>,
}

/// View of one shell entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellEntry {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub p: usize,
    pub t: f64,
    pub multiplicity: f64,
    pub ratio: f64,
    pub phi: f64,
}

impl ShellTable {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Extended energies, `e_0 = 0` followed by the grid nodes.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn entries(&self) -> impl Iterator<Item = ShellEntry> + '_ {
        (0..self.offsets.len() - 1).flat_map(move |a| {
            (self.offsets[a]..self.offsets[a + 1]).map(move |j| {
                let b = self.b[j] as usize;
                let multiplicity = if a < b { 2.0 } else { 1.0 };
                ShellEntry {
                    a,
                    b,
                    c: self.c[j] as usize,
                    p: self.p[j] as usize,
                    t: self.t[j],
                    multiplicity,
                    ratio: self.k3[j] / multiplicity,
                    phi: self.phi[j],
                }
            })
        })
    }

    fn count(energies: &[f64]) -> usize {
        let m = energies.len();
        let top = energies[m - 1];
        let mut count = 0;
        for a in 0..m {
            for b in a..m {
                for c in 0..m {
                    if shell_keep(energies, a, b, c, top) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    fn build(energies: Vec<f64>) -> Self {
        let m = energies.len();
        let top = energies[m - 1];
        let mut table = ShellTable {
            offsets: Vec::with_capacity(m + 1),
            b: Vec::new(),
            c: Vec::new(),
            p: Vec::new(),
            t: Vec::new(),
            k3: Vec::new(),
            phi: Vec::new(),
            energies,
        };
        let e = &table.energies;
        table.offsets.push(0);
        for a in 0..m {
            for b in a..m {
                let mult = if a < b { 2.0 } else { 1.0 };
                for c in 0..m {
                    if !shell_keep(e, a, b, c, top) {
                        continue;
                    }
                    let e4 = e[a] + e[b] - e[c];
                    let hi = e.partition_point(|&x| x <= e4).min(m - 1).max(1);
                    let lo = hi - 1;
                    let t = ((e4 - e[lo]) / (e[hi] - e[lo])).clamp(0.0, 1.0);
                    table.b.push(b as u32);
                    table.c.push(c as u32);
                    table.p.push(lo as u32);
                    table.t.push(t);
                    table.k3.push(mult * kernel_ratio3(e[a], e[b], e[c]));
                    table.phi.push(kernel_phi(e[a], e[b], e[c]));
                }
            }
            table.offsets.push(table.b.len());
        }
        table
    }
}

fn shell_keep(e: &[f64], a: usize, b: usize, c: usize, top: f64) -> bool {
    let e4 = e[a] + e[b] - e[c];
    // round-off may push a node-aligned ε₄ just past the top node
    if !(e4 > 0.0 && e4 <= top * (1.0 + 1e-12)) {
        return false;
    }
    kernel_ratio3(e[a], e[b], e[c]) > 0.0
}

/// Per output node `i`, pairs `(k ≤ l)` of integration nodes for `(ε₃, ε₄)`
/// with `ε₂ = ε_k + ε_l − ε_i ∈ [0, L]` located between nodes `p`, `p + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongTable {
    pub(crate) offsets: Vec<usize>,
    pub(crate) k: Vec<u32>,
    pub(crate) l: Vec<u32>,
    pub(crate) p: Vec<u32>,
    pub(crate) t: Vec<f64>,
    /// `(8π²/√2) · mult · w_k w_l · W`.
    pub(crate) weight: Vec<f64>,
}

impl StrongTable {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    fn pair_range(grid: &EnergyGrid, i: usize, k: usize) -> std::ops::Range<usize> {
        // ε_l ranges over [ε_i − ε_k, L + ε_i − ε_k]; nodes increase, so the
        // admissible l form a contiguous run
        let e = grid.nodes();
        let lo_e = e[i] - e[k];
        let hi_e = grid.cutoff() + e[i] - e[k];
        let start = e.partition_point(|&x| x < lo_e).max(k);
        let end = e.partition_point(|&x| x <= hi_e);
        start..end.max(start)
    }

    fn count(grid: &EnergyGrid) -> usize {
        let n = grid.len();
        (0..n)
            .map(|i| (0..n).map(|k| Self::pair_range(grid, i, k).len()).sum::<usize>())
            .sum()
    }

    fn build(grid: &EnergyGrid) -> Self {
        let n = grid.len();
        let e = grid.nodes();
        let w = grid.weights();
        let mut table = StrongTable {
            offsets: Vec::with_capacity(n + 1),
            k: Vec::new(),
            l: Vec::new(),
            p: Vec::new(),
            t: Vec::new(),
            weight: Vec::new(),
        };
        table.offsets.push(0);
        for i in 0..n {
            for k in 0..n {
                for l in Self::pair_range(grid, i, k) {
                    let e2 = (e[k] + e[l] - e[i]).max(0.0);
                    let (p, t) = match grid.bracket(e2) {
                        Bracket::Below => (0, 0.0),
                        Bracket::Above => (n - 2, 1.0),
                        Bracket::Inside(p, t) => (p, t),
                    };
                    let mult = if k < l { 2.0 } else { 1.0 };
                    let kw = super::kernel_w_unchecked(e[i], e2, e[k], e[l]);
                    table.k.push(k as u32);
                    table.l.push(l as u32);
                    table.p.push(p as u32);
                    table.t.push(t);
                    table.weight.push(STRONG_PREFACTOR * mult * w[k] * w[l] * kw);
                }
            }
            table.offsets.push(table.k.len());
        }
        table
    }
}

/// Precomputed collision weights for one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTables {
    grid: Arc<EnergyGrid>,
    shell: Option<ShellTable>,
    strong: Option<StrongTable>,
}

impl KernelTables {
    /// Builds both table families under [`DEFAULT_TABLE_BUDGET`].
    pub fn build(grid: Arc<EnergyGrid>) -> Result<Self> {
        Self::build_with(grid, TableSelection::ALL, DEFAULT_TABLE_BUDGET)
    }

    pub fn build_with(grid: Arc<EnergyGrid>, which: TableSelection, budget_bytes: u64) -> Result<Self> {
        let energies = extended_energies(&grid);
        let mut required = 0u64;
        if which.shell {
            required += ShellTable::count(&energies) as u64 * SHELL_ENTRY_BYTES;
        }
        if which.strong {
            required += StrongTable::count(&grid) as u64 * STRONG_ENTRY_BYTES;
        }
        if required > budget_bytes {
            return Err(Error::Resource {
                required_bytes: required,
                budget_bytes,
            });
        }
        let shell = which.shell.then(|| ShellTable::build(energies));
        let strong = which.strong.then(|| StrongTable::build(&grid));
        Ok(Self {
            grid,
            shell,
            strong,
        })
    }

    /// Bytes the selected tables would occupy on `grid`.
    pub fn estimate_bytes(grid: &EnergyGrid, which: TableSelection) -> u64 {
        let mut required = 0;
        if which.shell {
            required += ShellTable::count(&extended_energies(grid)) as u64 * SHELL_ENTRY_BYTES;
        }
        if which.strong {
            required += StrongTable::count(grid) as u64 * STRONG_ENTRY_BYTES;
        }
        required
    }

    pub fn grid(&self) -> &Arc<EnergyGrid> {
        &self.grid
    }

    pub fn shell(&self) -> Result<&ShellTable> {
        self.shell
            .as_ref()
            .ok_or_else(|| Error::Contract("shell tables were not built".into()))
    }

    pub fn strong(&self) -> Result<&StrongTable> {
        self.strong
            .as_ref()
            .ok_or_else(|| Error::Contract("strong-form tables were not built".into()))
    }

    pub(crate) fn check_grid(&self, grid: &Arc<EnergyGrid>) -> Result<()> {
        if Arc::ptr_eq(grid, &self.grid) || **grid == *self.grid {
            Ok(())
        } else {
            Err(Error::Contract("distribution and tables use different grids".into()))
        }
    }
}

fn extended_energies(grid: &EnergyGrid) -> Vec<f64> {
    std::iter::once(0.0).chain(grid.nodes().iter().copied()).collect()
}
