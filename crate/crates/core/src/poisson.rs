//! Direct and exchange interaction potentials as solutions of the
//! compactified elliptic equations.
//!
//! The operators depend only on the grid geometry and on `|delta m|`
//! (plus the boundary policy), never on the iterating densities, so each
//! one is assembled and LU-factored once and reused across the SCF loop.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonian::{
    boundary_policy, single_particle_coeffs_with, CoeffTerms, Configuration, FieldKind,
};
use crate::spectral::{
    assemble_operator, eliminate_boundaries, Bc, BoundaryPolicy, Kron2d, Layout, ReducedOperator,
};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    /// Electrostatic potential of electron `source`'s density.
    Direct { source: usize },
    /// Exchange coupling field of an electron pair.
    Exchange { pair: (usize, usize), delta_m: i32 },
}

/// A solved interaction potential on interior nodes.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub kind: PotentialKind,
    pub policy: BoundaryPolicy,
}

struct FactoredOp {
    red: ReducedOperator,
    lu: PartialPivLu<f64>,
}

impl FactoredOp {
    fn build(grid: &Grid, kron: &Kron2d, m_like: i32, policy: BoundaryPolicy) -> Result<Self> {
        let coeffs = single_particle_coeffs_with(
            grid,
            m_like,
            0.0,
            CoeffTerms {
                coulomb: false,
                spin_zeeman: false,
            },
        );
        let op = assemble_operator(&coeffs, kron)?;
        let red = eliminate_boundaries(&op, policy, kron)?;
        let lu = red.matrix().partial_piv_lu();
        let u = lu.U();
        let dim = red.dim();
        let mut min_d = f64::INFINITY;
        let mut max_d = 0.0f64;
        for i in 0..dim {
            let d = u[(i, i)].abs();
            min_d = min_d.min(d);
            max_d = max_d.max(d);
        }
        if !(min_d > max_d * 1e-14) || !min_d.is_finite() {
            return Err(Error::SingularOperator {
                context: "interaction-potential operator",
            });
        }
        Ok(Self { red, lu })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Factored interaction-potential operators for one grid.
pub struct PoissonSolver {
    lay: Layout,
    direct: FactoredOp,
    exchange: Vec<((i32, Bc), FactoredOp)>,
}

impl PoissonSolver {
    /// Solver with the direct-interaction operator only.
    pub fn new(grid: &Grid, kron: &Kron2d) -> Result<Self> {
        Ok(Self {
            lay: Layout::new(grid.n()),
            direct: FactoredOp::build(
                grid,
                kron,
                0,
                boundary_policy(FieldKind::DirectPotential),
            )?,
            exchange: Vec::new(),
        })
    }

    /// Solver with exchange operators for the given `(|delta m|, plane)`
    /// combinations.
    pub fn with_exchange(
        grid: &Grid,
        kron: &Kron2d,
        kinds: &[(i32, Bc)],
    ) -> Result<Self> {
        let mut solver = Self::new(grid, kron)?;
        for &(dm, plane) in kinds {
            let dm = dm.abs();
            if solver.exchange_op(dm, plane).is_none() {
                let mut policy = boundary_policy(FieldKind::ExchangePotential { delta_m: dm });
                policy.plane = plane;
                solver
                    .exchange
                    .push(((dm, plane), FactoredOp::build(grid, kron, dm, policy)?));
            }
        }
        Ok(solver)
    }

    /// Solver covering every exchange pair of `config`. The plane
    /// condition is Neumann throughout, matching the catalogued policy.
    pub fn for_config(grid: &Grid, kron: &Kron2d, config: &Configuration) -> Result<Self> {
        let mut kinds = Vec::new();
        if config.fully_spin_polarized {
            for (i, j) in config.pairs() {
                let dm = config.orbitals[i].m - config.orbitals[j].m;
                let plane = boundary_policy(FieldKind::ExchangePotential { delta_m: dm }).plane;
                kinds.push((dm.abs(), plane));
            }
        }
        Self::with_exchange(grid, kron, &kinds)
    }

    fn exchange_op(&self, dm: i32, plane: Bc) -> Option<&FactoredOp> {
        self.exchange
            .iter()
            .find(|((d, p), _)| *d == dm && *p == plane)
            .map(|(_, op)| op)
    }

    /// `nabla^2 Phi_D = -4 pi |psi|^2` for a physically normalized
    /// orbital given on interior nodes.
    pub fn direct_potential(&self, psi_int: &[f64], source: usize) -> Result<PotentialField> {
        if psi_int.len() != self.lay.interior_len() {
            return Err(Error::SizeMismatch {
                expected: self.lay.interior_len(),
                got: psi_int.len(),
                context: "direct-potential source",
            });
        }
        let rhs: Vec<f64> = psi_int.iter().map(|p| 4.0 * PI * (p * p)).collect();
        Ok(PotentialField {
            values: self.direct.solve(&rhs),
            kind: PotentialKind::Direct { source },
            policy: self.direct.red.policy(),
        })
    }

    /// Modified Poisson solve for the exchange field of a pair:
    /// `[nabla_2d^2 - (delta m)^2 / rho^2] alpha_E = -4 pi psi_i psi_j`.
    pub fn exchange_potential(
        &self,
        psi_i: &[f64],
        psi_j: &[f64],
        delta_m: i32,
        pair: (usize, usize),
    ) -> Result<PotentialField> {
        self.exchange_potential_with_plane(
            psi_i,
            psi_j,
            delta_m,
            boundary_policy(FieldKind::ExchangePotential { delta_m }).plane,
            pair,
        )
    }

    pub fn exchange_potential_with_plane(
        &self,
        psi_i: &[f64],
        psi_j: &[f64],
        delta_m: i32,
        plane: Bc,
        pair: (usize, usize),
    ) -> Result<PotentialField> {
        if psi_i.len() != psi_j.len() || psi_i.len() != self.lay.interior_len() {
            return Err(Error::SizeMismatch {
                expected: self.lay.interior_len(),
                got: psi_i.len().min(psi_j.len()),
                context: "exchange-potential sources",
            });
        }
        let dm = delta_m.abs();
        let op = self.exchange_op(dm, plane).ok_or(Error::MissingPotential {
            kind: "exchange operator",
            i: pair.0,
            j: pair.1,
        })?;
        // the inner product first: f64 multiplication commutes, so the
        // exchange source (and hence the field) is exactly symmetric in
        // the pair
        let rhs: Vec<f64> = psi_i
            .iter()
            .zip(psi_j)
            .map(|(p, q)| 4.0 * PI * (p * q))
            .collect();
        Ok(PotentialField {
            values: op.solve(&rhs),
            kind: PotentialKind::Exchange {
                pair,
                delta_m,
            },
            policy: op.red.policy(),
        })
    }

    /// Full-grid values of a solved potential, boundary lines included.
    pub fn reconstruct(&self, pot: &PotentialField) -> Result<Vec<f64>> {
        let op = match pot.kind {
            PotentialKind::Direct { .. } => &self.direct,
            PotentialKind::Exchange { delta_m, .. } => self
                .exchange_op(delta_m.abs(), pot.policy.plane)
                .ok_or(Error::MissingPotential {
                    kind: "exchange operator",
                    i: 0,
                    j: 0,
                })?,
        };
        Ok(op.red.reconstruct(&pot.values))
    }
}
