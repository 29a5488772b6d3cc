//! Second-order central-difference operators on periodic grids and the
//! steady incompressible Navier-Stokes momentum residual.
//!
//! Every operator writes each output node from its own stencil only, with
//! exact index wraparound on all three axes.

use crate::field::{FlowSnapshot, Grid3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid3,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid3,
    pub comps: [Vec<f64>; 3],
}

impl ScalarField {
    pub fn new(grid: Grid3, data: Vec<f64>) -> Result<Self> {
        check_len(&grid, &data)?;
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid3, f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        Self {
            data: grid.sample(f),
            grid,
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }
}

impl VectorField {
    pub fn new(grid: Grid3, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            check_len(&grid, c)?;
        }
        Ok(Self { grid, comps })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self {
            grid,
            comps: std::array::from_fn(|_| vec![0.0; grid.len()]),
        }
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| max_abs(c)).fold(0.0, f64::max)
    }

    /// Euclidean norm of the vector at every node.
    pub fn magnitude(&self) -> Vec<f64> {
        let [a, b, c] = &self.comps;
        (0..self.grid.len())
            .map(|n| (a[n] * a[n] + b[n] * b[n] + c[n] * c[n]).sqrt())
            .collect()
    }

    /// Componentwise `self + scale·other`.
    pub fn axpy(&self, scale: f64, other: &VectorField) -> VectorField {
        VectorField {
            grid: self.grid,
            comps: std::array::from_fn(|c| {
                self.comps[c]
                    .iter()
                    .zip(&other.comps[c])
                    .map(|(a, b)| a + scale * b)
                    .collect()
            }),
        }
    }
}

fn check_len(grid: &Grid3, data: &[f64]) -> Result<()> {
    if data.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: data.len(),
        });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("grid field has non-finite entries".into()));
    }
    Ok(())
}

fn max_abs(data: &[f64]) -> f64 {
    data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Flat offsets of the `-1` and `+1` neighbors of `idx` along `axis`.
#[inline]
fn neighbors(grid: &Grid3, idx: usize, axis: usize) -> (usize, usize) {
    let (i, j, k) = grid.coords(idx);
    let [nx, ny, nz] = grid.dims();
    match axis {
        0 => (
            grid.index((i + nx - 1) % nx, j, k),
            grid.index((i + 1) % nx, j, k),
        ),
        1 => (
            grid.index(i, (j + ny - 1) % ny, k),
            grid.index(i, (j + 1) % ny, k),
        ),
        _ => (
            grid.index(i, j, (k + nz - 1) % nz),
            grid.index(i, j, (k + 1) % nz),
        ),
    }
}

/// `(f[i+1] - f[i-1]) / 2h` along `axis`.
pub fn central_diff(grid: &Grid3, f: &[f64], axis: usize) -> Vec<f64> {
    let inv = 1.0 / (2.0 * grid.spacing()[axis]);
    (0..grid.len())
        .map(|n| {
            let (m, p) = neighbors(grid, n, axis);
            (f[p] - f[m]) * inv
        })
        .collect()
}

/// `(f[i+1] - 2f[i] + f[i-1]) / h²` along `axis`.
pub fn second_diff(grid: &Grid3, f: &[f64], axis: usize) -> Vec<f64> {
    let h = grid.spacing()[axis];
    let inv = 1.0 / (h * h);
    (0..grid.len())
        .map(|n| {
            let (m, p) = neighbors(grid, n, axis);
            (f[p] - 2.0 * f[n] + f[m]) * inv
        })
        .collect()
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField {
        grid: f.grid,
        comps: std::array::from_fn(|a| central_diff(&f.grid, &f.data, a)),
    }
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let g = &v.grid;
    let dx = central_diff(g, &v.comps[0], 0);
    let dy = central_diff(g, &v.comps[1], 1);
    let dz = central_diff(g, &v.comps[2], 2);
    ScalarField {
        grid: *g,
        data: (0..g.len()).map(|n| dx[n] + dy[n] + dz[n]).collect(),
    }
}

pub fn curl(v: &VectorField) -> VectorField {
    let g = &v.grid;
    let [a, b, c] = &v.comps;
    let dc_dy = central_diff(g, c, 1);
    let db_dz = central_diff(g, b, 2);
    let da_dz = central_diff(g, a, 2);
    let dc_dx = central_diff(g, c, 0);
    let db_dx = central_diff(g, b, 0);
    let da_dy = central_diff(g, a, 1);
    let n = g.len();
    VectorField {
        grid: *g,
        comps: [
            (0..n).map(|i| dc_dy[i] - db_dz[i]).collect(),
            (0..n).map(|i| da_dz[i] - dc_dx[i]).collect(),
            (0..n).map(|i| db_dx[i] - da_dy[i]).collect(),
        ],
    }
}

fn laplacian_raw(grid: &Grid3, f: &[f64]) -> Vec<f64> {
    let dxx = second_diff(grid, f, 0);
    let dyy = second_diff(grid, f, 1);
    let dzz = second_diff(grid, f, 2);
    (0..grid.len()).map(|n| dxx[n] + dyy[n] + dzz[n]).collect()
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    ScalarField {
        grid: f.grid,
        data: laplacian_raw(&f.grid, &f.data),
    }
}

/// Componentwise Laplacian of a vector field.
pub fn vector_laplacian(v: &VectorField) -> VectorField {
    VectorField {
        grid: v.grid,
        comps: std::array::from_fn(|c| laplacian_raw(&v.grid, &v.comps[c])),
    }
}

/// `(v·∇)v`, each component differentiated with central differences.
pub fn convective_term(v: &VectorField) -> VectorField {
    let g = &v.grid;
    let n = g.len();
    let comps = std::array::from_fn(|c| {
        let d: [Vec<f64>; 3] = std::array::from_fn(|a| central_diff(g, &v.comps[c], a));
        (0..n)
            .map(|i| v.comps[0][i] * d[0][i] + v.comps[1][i] * d[1][i] + v.comps[2][i] * d[2][i])
            .collect()
    });
    VectorField { grid: *g, comps }
}

/// Steady momentum residual `(v·∇)v + ∇p - (1/Re)∇²v`.
pub fn momentum_residual(s: &FlowSnapshot) -> Result<VectorField> {
    if !(s.re.is_finite() && s.re > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "momentum residual needs re > 0, got {}",
            s.re
        )));
    }
    let vel = s.velocity();
    let conv = convective_term(&vel);
    let grad_p = gradient(&s.pressure());
    let lap = vector_laplacian(&vel);
    let inv_re = 1.0 / s.re;
    let n = s.grid.len();
    Ok(VectorField {
        grid: s.grid,
        comps: std::array::from_fn(|c| {
            (0..n)
                .map(|i| conv.comps[c][i] + grad_p.comps[c][i] - inv_re * lap.comps[c][i])
                .collect()
        }),
    })
}

/// Local turbulence-intensity proxy `re · |velocity| · (hx / lx)`.
pub fn local_re_feature(s: &FlowSnapshot) -> ScalarField {
    let scale = s.re * s.grid.spacing()[0] / s.grid.lx;
    ScalarField {
        grid: s.grid,
        data: s.velocity().magnitude().into_iter().map(|m| scale * m).collect(),
    }
}
