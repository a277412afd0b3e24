//! Computational domain, Chebyshev-Lobatto nodes and quadrature.
//!
//! The half-plane `[0, rho_max] x [0, z_max]` is compactified onto
//! `[-1, 1] x [-1, 1]` with the logarithmic map
//!
//! ```text
//!     x = log10(1 + rho * alpha) - 1,     alpha = 99 / rho_max,
//! ```
//!
//! so that `rho = 0 -> x = -1` and `rho = rho_max -> x = +1` (and likewise
//! for `z`). Collocation uses Chebyshev-Lobatto points `x_j = cos(pi j / N)`;
//! note `j = 0` is the *outer* edge (`x = +1`) and `j = N` the inner one.

use crate::error::{Error, Result};
use std::f64::consts::PI;

pub const LN10: f64 = std::f64::consts::LN_10;

/// Physical and compactified extents of the computational domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub beta_z: f64,
    pub eta: f64,
    pub rho_max: f64,
    pub z_max: f64,
    pub alpha_rho: f64,
    pub alpha_z: f64,
}

impl DomainSpec {
    /// Square domain sized by the field strength, `rho_max = z_max =
    /// 100 eta / (1 + log10(beta_Z))`.
    ///
    /// Rejects `beta_Z <= 0.1` where the denominator is non-positive;
    /// those field strengths belong to a spherical-coordinate treatment.
    pub fn new(beta_z: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be positive, got {eta}"),
            });
        }
        if !(beta_z > 0.0) {
            return Err(Error::DomainScale {
                beta_z,
                denom: f64::NEG_INFINITY,
            });
        }
        let denom = 1.0 + beta_z.log10();
        if denom <= 0.0 {
            return Err(Error::DomainScale { beta_z, denom });
        }
        let extent = 100.0 * eta / denom;
        Ok(Self::from_extents(beta_z, eta, extent, extent))
    }

    /// Domain with explicit extents (Coulomb test mode, or unequal
    /// rho/z scalings). `beta_z` is stored for provenance only.
    pub fn from_extents(beta_z: f64, eta: f64, rho_max: f64, z_max: f64) -> Self {
        Self {
            beta_z,
            eta,
            rho_max,
            z_max,
            alpha_rho: 99.0 / rho_max,
            alpha_z: 99.0 / z_max,
        }
    }

    pub fn area(&self) -> f64 {
        self.rho_max * self.z_max
    }
}

/// `10^t - 1`, accurate near `t = 0`.
#[inline]
pub fn pow10_m1(t: f64) -> f64 {
    (t * LN10).exp_m1()
}

/// `x = log10(1 + rho * alpha) - 1`. The admissible range is
/// `0 <= rho <= 99 / alpha`, mapping onto `[-1, 1]`.
pub fn compactify(rho: f64, alpha: f64) -> Result<f64> {
    let max = 99.0 / alpha;
    if !(0.0..=max * (1.0 + 1e-12)).contains(&rho) {
        return Err(Error::OutOfDomain {
            coord: "rho",
            value: rho,
            max,
        });
    }
    Ok((rho * alpha).ln_1p() / LN10 - 1.0)
}

/// Inverse of [`compactify`]: `rho = (10^(x+1) - 1) / alpha`.
pub fn decompactify(x: f64, alpha: f64) -> f64 {
    pow10_m1(x + 1.0) / alpha
}

/// Clenshaw-Curtis weights for the `n + 1` Chebyshev-Lobatto points
/// `cos(pi j / n)`, integrating over `[-1, 1]`.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let endpoint = if n % 2 == 0 {
        1.0 / (nf * nf - 1.0)
    } else {
        1.0 / (nf * nf)
    };
    w[0] = endpoint;
    w[n] = endpoint;
    for j in 1..n {
        let theta = PI * j as f64 / nf;
        let mut v = 1.0;
        if n % 2 == 0 {
            for k in 1..n / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (nf * theta).cos() / (nf * nf - 1.0);
        } else {
            for k in 1..=(n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        w[j] = 2.0 * v / nf;
    }
    w
}

/// Tensor grid of Chebyshev-Lobatto nodes over a compactified domain.
///
/// `n` is the polynomial degree; there are `n + 1` nodes per direction.
/// The node at `x = -1` is shifted to `-1 + delta` when evaluating
/// coordinate-dependent quantities, which keeps the `1/rho` factors of
/// the cylindrical operator finite on the magnetic axis.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    nodes: Vec<f64>,
    coord_nodes: Vec<f64>,
    domain: DomainSpec,
    delta: f64,
}

pub const DEFAULT_DELTA: f64 = 1e-14;

impl Grid {
    pub fn new(domain: DomainSpec, n: usize) -> Self {
        Self::with_delta(domain, n, DEFAULT_DELTA)
    }

    pub fn with_delta(domain: DomainSpec, n: usize, delta: f64) -> Self {
        let nodes = chebyshev_lobatto(n);
        let mut coord_nodes = nodes.clone();
        coord_nodes[n] = -1.0 + delta;
        Self {
            n,
            nodes,
            coord_nodes,
            domain,
            delta,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// Exact Lobatto nodes, `x_0 = 1` down to `x_N = -1`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Nodes with the axis point offset to `-1 + delta`, for evaluating
    /// coefficients with coordinate singularities.
    pub fn coord_nodes(&self) -> &[f64] {
        &self.coord_nodes
    }

    /// Physical `rho` at x-node `i`, using the delta-offset node.
    pub fn rho(&self, i: usize) -> f64 {
        decompactify(self.coord_nodes[i], self.domain.alpha_rho)
    }

    /// Physical `z` at y-node `j`, using the delta-offset node.
    pub fn z(&self, j: usize) -> f64 {
        decompactify(self.coord_nodes[j], self.domain.alpha_z)
    }

    /// Number of nodes in the full tensor grid, `(N + 1)^2`.
    pub fn full_len(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    /// Nodes left after trimming the outer Dirichlet edges, `N^2`.
    pub fn trimmed_len(&self) -> usize {
        self.n * self.n
    }

    /// Strictly interior nodes, `(N - 1)^2`.
    pub fn interior_len(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    /// Flat index into full-grid vectors; `i`, `j` in `0..=N`, y fastest.
    #[inline]
    pub fn full_index(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    /// Quadrature weights over the full `(N + 1)^2` grid for
    /// `integral integral f(rho, z) 2 pi rho drho dz` on the half-plane.
    ///
    /// Clenshaw-Curtis weights in each direction times the map Jacobians
    /// `d rho / dx = ln(10) 10^(x+1) / alpha` and the cylindrical measure
    /// `2 pi rho`. Callers integrating a z-symmetric density over all
    /// space apply an extra factor 2 themselves.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let cc = clenshaw_curtis(self.n);
        let np1 = self.n + 1;
        let d = &self.domain;
        let mut w = vec![0.0; np1 * np1];
        for i in 0..np1 {
            let x = self.nodes[i];
            let jac_x = LN10 * 10f64.powf(x + 1.0) / d.alpha_rho;
            // exact rho here: the axis node carries zero measure
            let rho = decompactify(x, d.alpha_rho);
            let radial = cc[i] * jac_x * 2.0 * PI * rho;
            for j in 0..np1 {
                let y = self.nodes[j];
                let jac_y = LN10 * 10f64.powf(y + 1.0) / d.alpha_z;
                w[i * np1 + j] = radial * cc[j] * jac_y;
            }
        }
        w
    }

    /// Integrate a full-grid field against [`Grid::quadrature_weights`].
    pub fn integrate(&self, weights: &[f64], field: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), field.len());
        weights.iter().zip(field).map(|(w, f)| w * f).sum()
    }
}

/// `x_j = cos(pi j / N)`, strictly decreasing from 1 to -1.
pub fn chebyshev_lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 1, "need at least two nodes");
    (0..=n)
        .map(|j| {
            // cos evaluated so the endpoints are exact
            if j == 0 {
                1.0
            } else if j == n {
                -1.0
            } else {
                (PI * j as f64 / n as f64).cos()
            }
        })
        .collect()
}
