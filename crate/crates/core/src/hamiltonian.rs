//! Single-particle operator coefficients, quantum-number bookkeeping, and
//! assembly of the Hartree-Fock operators.
//!
//! Energies are in Rydberg units of the charge-Z Coulomb potential and
//! lengths in Bohr radii of the charge-Z atom, so the hydrogenic operator
//! itself carries no explicit nuclear charge; `Z` enters only through the
//! `2/Z` prefactor of the inter-electron terms.

use crate::error::{Error, Result};
use crate::grid::{Grid, LN10};
use crate::spectral::{
    assemble_operator, eliminate_boundaries, Bc, BoundaryPolicy, CoeffFields, Kron2d, Layout,
    ReducedOperator,
};
use faer::Mat;

/// Which physically optional terms enter the diagonal coefficient field.
#[derive(Debug, Clone, Copy)]
pub struct CoeffTerms {
    pub coulomb: bool,
    /// The `2 beta_Z (m - 1)` orbital-Zeeman plus spin shift. With it the
    /// eigenvalues sit directly on the scale whose continuum edge is zero
    /// for spin-down electrons.
    pub spin_zeeman: bool,
}

impl Default for CoeffTerms {
    fn default() -> Self {
        Self {
            coulomb: true,
            spin_zeeman: true,
        }
    }
}

/// Coefficient fields of the transformed single-particle operator.
///
/// In the compactified coordinates, with `u = 10^(x+1)` and
/// `alpha~ = alpha / ln 10`:
///
/// ```text
///   a = -alpha~^2 / u^2                      (the paper's quotient form
///                                             collapses to this)
///   b = -alpha alpha~ / (u^2 (u - 1))
///   c = -alpha~^2 / v^2,   d = +alpha alpha~ / v^2,   v = 10^(y+1)
///   e = m^2/rho^2 + beta^2 rho^2 - 2/r + 2 beta (m - 1)
/// ```
pub fn single_particle_coeffs(grid: &Grid, m: i32, beta_z: f64) -> CoeffFields {
    single_particle_coeffs_with(grid, m, beta_z, CoeffTerms::default())
}

pub fn single_particle_coeffs_with(
    grid: &Grid,
    m: i32,
    beta_z: f64,
    terms: CoeffTerms,
) -> CoeffFields {
    let n = grid.n();
    let dom = grid.domain().clone();
    let (ar, az) = (dom.alpha_rho, dom.alpha_z);
    let (art, azt) = (ar / LN10, az / LN10);
    let x = grid.coord_nodes();
    let ux: Vec<f64> = x.iter().map(|&t| 10f64.powf(t + 1.0)).collect();
    let rho: Vec<f64> = (0..=n).map(|i| grid.rho(i)).collect();
    let zc: Vec<f64> = (0..=n).map(|j| grid.z(j)).collect();
    let mf = m as f64;
    let shift = if terms.spin_zeeman {
        2.0 * beta_z * (mf - 1.0)
    } else {
        0.0
    };
    CoeffFields::sample(
        n,
        |i, _| -art * art / (ux[i] * ux[i]),
        |i, _| -art / (ux[i] * ux[i] * rho[i]),
        |_, j| -azt * azt / (ux[j] * ux[j]),
        |_, j| az * azt / (ux[j] * ux[j]),
        |i, j| {
            let r2 = rho[i] * rho[i] + zc[j] * zc[j];
            let mut e = beta_z * beta_z * rho[i] * rho[i] + shift;
            if m != 0 {
                e += mf * mf / (rho[i] * rho[i]);
            }
            if terms.coulomb {
                e -= 2.0 / r2.sqrt();
            }
            e
        },
    )
}

/// Boundary policies by field type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Orbital { m: i32, z_parity: i8 },
    DirectPotential,
    ExchangePotential { delta_m: i32 },
}

/// Orbitals: regular on the axis only for `m = 0`, even about the plane
/// only for positive z-parity. The direct potential of a self-interaction
/// (`delta m = 0`) is regular on both inner edges; an exchange potential
/// with `delta m != 0` vanishes on the axis.
pub fn boundary_policy(kind: FieldKind) -> BoundaryPolicy {
    match kind {
        FieldKind::Orbital { m, z_parity } => BoundaryPolicy::new(
            if m == 0 { Bc::Neumann } else { Bc::Dirichlet },
            if z_parity >= 0 { Bc::Neumann } else { Bc::Dirichlet },
        ),
        FieldKind::DirectPotential => BoundaryPolicy::new(Bc::Neumann, Bc::Neumann),
        FieldKind::ExchangePotential { delta_m } => BoundaryPolicy::new(
            if delta_m == 0 { Bc::Neumann } else { Bc::Dirichlet },
            Bc::Neumann,
        ),
    }
}

/// Hydrogenic reduced operator for one `(m, z-parity)` subspace on `grid`.
pub fn hydrogenic_operator(
    grid: &Grid,
    kron: &Kron2d,
    m: i32,
    z_parity: i8,
) -> Result<ReducedOperator> {
    hydrogenic_operator_with(grid, kron, m, z_parity, CoeffTerms::default())
}

pub fn hydrogenic_operator_with(
    grid: &Grid,
    kron: &Kron2d,
    m: i32,
    z_parity: i8,
    terms: CoeffTerms,
) -> Result<ReducedOperator> {
    let coeffs = single_particle_coeffs_with(grid, m, grid.domain().beta_z, terms);
    let op = assemble_operator(&coeffs, kron)?;
    eliminate_boundaries(&op, boundary_policy(FieldKind::Orbital { m, z_parity }), kron)
}

/// One electron's quantum labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitalSpec {
    pub m: i32,
    pub z_parity: i8,
    /// Excitation index within the `(m, z-parity)` subspace, 1-based.
    pub nu: usize,
    /// Field-free name, e.g. `2p-1`.
    pub label: String,
}

impl OrbitalSpec {
    pub fn new(m: i32, z_parity: i8, nu: usize, label: impl Into<String>) -> Self {
        Self {
            m,
            z_parity,
            nu,
            label: label.into(),
        }
    }

    pub fn policy(&self) -> BoundaryPolicy {
        boundary_policy(FieldKind::Orbital {
            m: self.m,
            z_parity: self.z_parity,
        })
    }

    fn key(&self) -> (i32, i8, usize) {
        (self.m, self.z_parity, self.nu)
    }
}

/// The atomic state: nuclear charge, electrons, and their orbitals.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub z: u32,
    pub orbitals: Vec<OrbitalSpec>,
    pub spin_multiplicity: u32,
    pub fully_spin_polarized: bool,
    pub state_label: String,
}

impl Configuration {
    pub fn new(
        z: u32,
        orbitals: Vec<OrbitalSpec>,
        fully_spin_polarized: bool,
        state_label: impl Into<String>,
    ) -> Result<Self> {
        if orbitals.is_empty() {
            return Err(Error::InvalidParameter {
                name: "orbitals",
                reason: "need at least one electron".into(),
            });
        }
        for i in 0..orbitals.len() {
            for j in i + 1..orbitals.len() {
                if orbitals[i].key() == orbitals[j].key() {
                    return Err(Error::InvalidParameter {
                        name: "orbitals",
                        reason: format!(
                            "electrons {i} and {j} share (m, parity, nu) = {:?}; the Slater \
                             determinant vanishes",
                            orbitals[i].key()
                        ),
                    });
                }
            }
        }
        let n_e = orbitals.len() as u32;
        let spin_multiplicity = if fully_spin_polarized { n_e + 1 } else { 1 };
        Ok(Self {
            z,
            orbitals,
            spin_multiplicity,
            fully_spin_polarized,
            state_label: state_label.into(),
        })
    }

    /// Resolve a state label in either notation of the shipped catalog.
    pub fn from_state_label(z: u32, label: &str) -> Result<Self> {
        let state = resolve_state(label)?;
        let orbitals = state
            .orbitals
            .iter()
            .map(|&(m, p, nu, name)| OrbitalSpec::new(m, p, nu, name))
            .collect();
        Configuration::new(z, orbitals, true, state.intense)
    }

    pub fn n_e(&self) -> usize {
        self.orbitals.len()
    }

    pub fn total_m(&self) -> i32 {
        self.orbitals.iter().map(|o| o.m).sum()
    }

    pub fn total_z_parity(&self) -> i8 {
        self.orbitals.iter().map(|o| o.z_parity).product()
    }

    /// Unordered electron pairs `(i, j)`, `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_e();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push((i, j));
            }
        }
        out
    }
}

/// A catalog entry tying the intense-field label to its field-free
/// orbital content.
#[derive(Debug, Clone, Copy)]
pub struct StateSpec {
    pub intense: &'static str,
    pub field_free: &'static str,
    pub n_e: usize,
    pub orbitals: &'static [(i32, i8, usize, &'static str)],
}

/// The twelve catalogued states of helium and lithium.
pub const STATES: &[StateSpec] = &[
    StateSpec {
        intense: "1^3(-1)+",
        field_free: "1s02p-1",
        n_e: 2,
        orbitals: &[(0, 1, 1, "1s0"), (-1, 1, 1, "2p-1")],
    },
    StateSpec {
        intense: "1^3(-1)-",
        field_free: "1s03d-1",
        n_e: 2,
        orbitals: &[(0, 1, 1, "1s0"), (-1, -1, 1, "3d-1")],
    },
    StateSpec {
        intense: "1^3(-2)+",
        field_free: "1s03d-2",
        n_e: 2,
        orbitals: &[(0, 1, 1, "1s0"), (-2, 1, 1, "3d-2")],
    },
    StateSpec {
        intense: "1^3(-2)-",
        field_free: "1s04f-2",
        n_e: 2,
        orbitals: &[(0, 1, 1, "1s0"), (-2, -1, 1, "4f-2")],
    },
    StateSpec {
        intense: "1^3(0)+",
        field_free: "1s02s0",
        n_e: 2,
        orbitals: &[(0, 1, 1, "1s0"), (0, 1, 2, "2s0")],
    },
    StateSpec {
        intense: "1^3(0)-",
        field_free: "1s02p0",
        n_e: 2,
        orbitals: &[(0, 1, 1, "1s0"), (0, -1, 1, "2p0")],
    },
    StateSpec {
        intense: "1^4(-3)+",
        field_free: "1s02p-13d-2",
        n_e: 3,
        orbitals: &[(0, 1, 1, "1s0"), (-1, 1, 1, "2p-1"), (-2, 1, 1, "3d-2")],
    },
    StateSpec {
        intense: "1^4(-3)-",
        field_free: "1s02p-14f-2",
        n_e: 3,
        orbitals: &[(0, 1, 1, "1s0"), (-1, 1, 1, "2p-1"), (-2, -1, 1, "4f-2")],
    },
    StateSpec {
        intense: "1^4(-2)+",
        field_free: "1s02s03d-2",
        n_e: 3,
        orbitals: &[(0, 1, 1, "1s0"), (0, 1, 2, "2s0"), (-2, 1, 1, "3d-2")],
    },
    StateSpec {
        intense: "1^4(-2)-",
        field_free: "1s02p-13d-1",
        n_e: 3,
        orbitals: &[(0, 1, 1, "1s0"), (-1, 1, 1, "2p-1"), (-1, -1, 1, "3d-1")],
    },
    StateSpec {
        intense: "1^4(-1)+",
        field_free: "1s02s02p-1",
        n_e: 3,
        orbitals: &[(0, 1, 1, "1s0"), (0, 1, 2, "2s0"), (-1, 1, 1, "2p-1")],
    },
    StateSpec {
        intense: "1^4(-1)-",
        field_free: "1s02p02p-1",
        n_e: 3,
        orbitals: &[(0, 1, 1, "1s0"), (0, -1, 1, "2p0"), (-1, 1, 1, "2p-1")],
    },
];

/// Normalize a state label: strip whitespace, fold the unicode
/// superscripts/subscripts and the minus sign to ASCII, lowercase.
fn normalize_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        match ch {
            ' ' | '\t' => {}
            '\u{2212}' => out.push('-'),
            '\u{00b9}' => out.push_str("^1"),
            '\u{00b2}' => out.push_str("^2"),
            '\u{00b3}' => out.push_str("^3"),
            '\u{2074}' => out.push_str("^4"),
            '\u{207a}' => out.push('+'),
            '\u{207b}' => out.push('-'),
            '\u{2080}' => out.push('0'),
            '\u{2081}' => out.push('1'),
            '\u{2082}' => out.push('2'),
            '\u{208b}' => out.push('-'),
            c => out.push(c.to_ascii_lowercase()),
        }
    }
    out
}

pub fn resolve_state(label: &str) -> Result<&'static StateSpec> {
    let norm = normalize_label(label);
    STATES
        .iter()
        .find(|s| s.intense == norm || s.field_free == norm)
        .ok_or_else(|| Error::UnknownState {
            label: label.to_string(),
        })
}

/// Direct and exchange potentials of one SCF iteration, on interior nodes.
#[derive(Debug, Clone, Default)]
pub struct InteractionSet {
    /// `direct[j]` is the potential sourced by electron `j`'s density.
    pub direct: Vec<Vec<f64>>,
    /// Exchange potential per unordered pair `(i, j)`, `i < j`.
    pub exchange: Vec<((usize, usize), Vec<f64>)>,
}

impl InteractionSet {
    pub fn zero(n_e: usize, interior: usize, pairs: &[(usize, usize)]) -> Self {
        Self {
            direct: vec![vec![0.0; interior]; n_e],
            exchange: pairs
                .iter()
                .map(|&p| (p, vec![0.0; interior]))
                .collect(),
        }
    }

    pub fn exchange_for(&self, i: usize, j: usize) -> Option<&[f64]> {
        let key = (i.min(j), i.max(j));
        self.exchange
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_slice())
    }
}

/// Nodes where the previous orbital is this small (relative to its peak)
/// contribute no exchange in the local approximation.
pub const EXCHANGE_RATIO_FLOOR: f64 = 1e-8;

/// Effective local potential for each electron: the direct potentials of
/// the others plus the exchange contribution folded through the previous
/// iteration's orbitals, `W_i = -(2/Z) sum_j alpha_E,ij psi_j / psi_i`.
pub fn slater_effective_potentials(
    config: &Configuration,
    inter: &InteractionSet,
    prev: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let n_e = config.n_e();
    if inter.direct.len() != n_e || prev.len() != n_e {
        return Err(Error::SizeMismatch {
            expected: n_e,
            got: inter.direct.len().min(prev.len()),
            context: "per-electron potential/orbital lists",
        });
    }
    let dim = inter.direct[0].len();
    let two_over_z = 2.0 / config.z as f64;
    let mut out = vec![vec![0.0; dim]; n_e];
    for i in 0..n_e {
        let floor = EXCHANGE_RATIO_FLOOR
            * prev[i].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..n_e {
            if j == i {
                continue;
            }
            for (vi, dj) in out[i].iter_mut().zip(&inter.direct[j]) {
                *vi += two_over_z * dj;
            }
            if config.fully_spin_polarized {
                let alpha_e = inter.exchange_for(i, j).ok_or(Error::MissingPotential {
                    kind: "exchange",
                    i,
                    j,
                })?;
                for k in 0..dim {
                    if prev[i][k].abs() >= floor {
                        out[i][k] -= two_over_z * alpha_e[k] * prev[j][k] / prev[i][k];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-electron operators with the interactions folded in locally.
pub fn decoupled_operators(
    config: &Configuration,
    hydrogenic: &[ReducedOperator],
    inter: &InteractionSet,
    prev: &[Vec<f64>],
) -> Result<Vec<ReducedOperator>> {
    let pots = slater_effective_potentials(config, inter, prev)?;
    Ok(hydrogenic
        .iter()
        .zip(&pots)
        .map(|(h, v)| h.with_added_diagonal(v))
        .collect())
}

/// The fully coupled operator over `n_e (N-1)^2` unknowns: per-electron
/// reduced blocks (with their direct potentials) on the diagonal and
/// `-(2/Z) diag(alpha_E,ij)` off the diagonal.
pub fn coupled_matrix(
    config: &Configuration,
    hydrogenic: &[ReducedOperator],
    inter: &InteractionSet,
) -> Result<Mat<f64>> {
    let n_e = config.n_e();
    let dim = hydrogenic[0].dim();
    let two_over_z = 2.0 / config.z as f64;
    let mut big = Mat::<f64>::zeros(n_e * dim, n_e * dim);
    for i in 0..n_e {
        let a = hydrogenic[i].matrix();
        for r in 0..dim {
            for c in 0..dim {
                big[(i * dim + r, i * dim + c)] = a[(r, c)];
            }
        }
        for j in 0..n_e {
            if j == i {
                continue;
            }
            for k in 0..dim {
                big[(i * dim + k, i * dim + k)] += two_over_z * inter.direct[j][k];
            }
            if config.fully_spin_polarized {
                let alpha_e = inter.exchange_for(i, j).ok_or(Error::MissingPotential {
                    kind: "exchange",
                    i,
                    j,
                })?;
                for k in 0..dim {
                    big[(i * dim + k, j * dim + k)] = -two_over_z * alpha_e[k];
                }
            }
        }
    }
    Ok(big)
}

/// Interior layout helper matching the operators built here.
pub fn interior_layout(grid: &Grid) -> Layout {
    Layout::new(grid.n())
}
