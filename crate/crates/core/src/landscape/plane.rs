use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{axpy_combine, ParamVector};

/// Relative tolerance below which an anchor offset counts as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

/// The affine plane through three anchors, with an orthonormal basis of
/// `span{p1 − p0, p2 − p0}` built by Gram–Schmidt.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    anchors: [ParamVector; 3],
    u: ParamVector,
    v: ParamVector,
    anchor_coords: [[f64; 2]; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub coords: [f64; 2],
    pub projected: ParamVector,
    pub residual_norm: f64,
}

pub fn build_plane(p0: &ParamVector, p1: &ParamVector, p2: &ParamVector) -> Result<Plane> {
    p1.check_len(p0.len())?;
    p2.check_len(p0.len())?;
    let d1 = p1.sub(p0)?;
    let d2 = p2.sub(p0)?;
    let n1 = d1.norm();
    let n2 = d2.norm();
    let scale = p0.norm().max(p1.norm()).max(p2.norm()).max(1.0);
    if n1 <= DEGENERACY_TOL * scale || n2 <= DEGENERACY_TOL * scale {
        return Err(Error::DegeneratePlane);
    }
    let u = d1.scale(1.0 / n1);
    // two passes of Gram–Schmidt keep u·v at rounding level
    let mut r = d2.clone();
    for _ in 0..2 {
        let c = r.dot(&u)?;
        r.axpy_in_place(-c, &u)?;
    }
    let rn = r.norm();
    if rn <= DEGENERACY_TOL * n2 {
        return Err(Error::DegeneratePlane);
    }
    let v = r.scale(1.0 / rn);
    let anchor_coords = [[0.0, 0.0], [n1, 0.0], [d2.dot(&u)?, d2.dot(&v)?]];
    Ok(Plane {
        anchors: [p0.clone(), p1.clone(), p2.clone()],
        u,
        v,
        anchor_coords,
    })
}

impl Plane {
    pub fn anchors(&self) -> &[ParamVector; 3] {
        &self.anchors
    }

    pub fn basis(&self) -> (&ParamVector, &ParamVector) {
        (&self.u, &self.v)
    }

    pub fn anchor_coords(&self) -> [[f64; 2]; 3] {
        self.anchor_coords
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// `p0 + x·u + y·v`, evaluated as the equivalent affine combination of
    /// the anchors so that each anchor's own coordinates return it exactly.
    pub fn point_at(&self, x: f64, y: f64) -> ParamVector {
        let [_, [c1x, _], [c2x, c2y]] = self.anchor_coords;
        let gamma = y / c2y;
        let beta = (x - gamma * c2x) / c1x;
        let alpha = 1.0 - beta - gamma;
        let [p0, p1, p2] = &self.anchors;
        axpy_combine(&[alpha, beta, gamma], &[p0, p1, p2]).expect("anchor lengths checked")
    }

    /// Orthogonal projection onto the affine plane.
    pub fn project(&self, w: &ParamVector) -> Result<Projection> {
        w.check_len(self.dim())?;
        let offset = w.sub(&self.anchors[0])?;
        let coords = [offset.dot(&self.u)?, offset.dot(&self.v)?];
        let projected = axpy_combine(
            &[1.0, coords[0], coords[1]],
            &[&self.anchors[0], &self.u, &self.v],
        )?;
        let residual_norm = w.distance(&projected)?;
        Ok(Projection {
            coords,
            projected,
            residual_norm,
        })
    }
}

pub fn project_iterate(plane: &Plane, w: &ParamVector) -> Result<Projection> {
    plane.project(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProjection {
    pub lambda: [f64; 3],
    pub projected: ParamVector,
}

/// Least-squares projection onto the linear span of the three points:
/// `λ* = argmin_λ |w − Σ λ_i p_i|`, solved through the 3×3 normal equations.
pub fn project_linear(
    p0: &ParamVector,
    p1: &ParamVector,
    p2: &ParamVector,
    w: &ParamVector,
) -> Result<LinearProjection> {
    let pts = [p0, p1, p2];
    for p in &pts[1..] {
        p.check_len(p0.len())?;
    }
    w.check_len(p0.len())?;
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = pts[i].dot(pts[j])?;
        }
        b[i] = pts[i].dot(w)?;
    }
    let lambda = solve3(a, b)?;
    let projected = axpy_combine(&lambda, &pts)?;
    Ok(LinearProjection { lambda, projected })
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3]> {
    let scale = (0..3).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::SingularSystem);
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedIterate {
    pub epoch: u64,
    pub coords: [f64; 2],
    pub residual_norm: f64,
}
