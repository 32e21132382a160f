use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plane::{Plane, ProjectedIterate};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{forward_loss, MlpSpec};
use crate::tensor::ParamVector;

/// Fraction of the anchor bounding box added on each side by default.
pub const DEFAULT_MARGIN: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRanges {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl SurfaceRanges {
    /// Bounding box of the anchor coordinates, widened by `margin` of its
    /// extent on every side.
    pub fn around_anchors(plane: &Plane, margin: f64) -> Self {
        let coords = plane.anchor_coords();
        let span = |axis: usize| {
            let lo = coords.iter().map(|c| c[axis]).fold(f64::INFINITY, f64::min);
            let hi = coords.iter().map(|c| c[axis]).fold(f64::NEG_INFINITY, f64::max);
            let pad = margin * (hi - lo);
            [lo - pad, hi + pad]
        };
        Self {
            x: span(0),
            y: span(1),
        }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        (self.x[0]..=self.x[1]).contains(&p[0]) && (self.y[0]..=self.y[1]).contains(&p[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoint {
    pub name: String,
    pub coords: [f64; 2],
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Train and validation loss over a rectangular grid of plane coordinates.
/// Rows of `train_loss` / `val_loss` are indexed by `y`, columns by `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub ranges: SurfaceRanges,
    pub resolution: [usize; 2],
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub train_loss: Vec<Vec<f64>>,
    pub val_loss: Vec<Vec<f64>>,
    pub anchors: Vec<AnchorPoint>,
    pub projected_iterates: Vec<ProjectedIterate>,
    pub warnings: Vec<String>,
}

/// Sidecar written next to the surface CSV.
#[derive(Serialize)]
struct SurfaceSidecar<'a> {
    x_range: [f64; 2],
    y_range: [f64; 2],
    resolution: [usize; 2],
    anchors: &'a [AnchorPoint],
    projected_iterates: &'a [ProjectedIterate],
    warnings: &'a [String],
}

fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range[0]];
    }
    let step = (range[1] - range[0]) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { range[1] } else { range[0] + i as f64 * step })
        .collect()
}

pub const ANCHOR_NAMES: [&str; 3] = ["p0", "p1", "p2"];

/// Evaluates losses at `p0 + x·u + y·v` for every grid point. Anchors that
/// fall outside `ranges` produce warnings, not errors.
pub fn eval_surface(
    plane: &Plane,
    ranges: SurfaceRanges,
    resolution: [usize; 2],
    spec: &MlpSpec,
    train: &Dataset,
    val: &Dataset,
) -> Result<SurfaceGrid> {
    let [nx, ny] = resolution;
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("surface resolution must be positive"));
    }
    if !(ranges.x[0] <= ranges.x[1] && ranges.y[0] <= ranges.y[1])
        || ![ranges.x, ranges.y].iter().flatten().all(|v| v.is_finite())
    {
        return Err(Error::invalid("surface ranges must be finite and ordered"));
    }
    plane.anchors()[0].check_len(spec.num_params())?;
    let xs = axis(ranges.x, nx);
    let ys = axis(ranges.y, ny);
    let train_batch = train.full_batch();
    let val_batch = val.full_batch();
    let eval = |w: &ParamVector| -> Result<(f64, f64)> {
        Ok((
            forward_loss(spec, w, &train_batch)?.cross_entropy,
            forward_loss(spec, w, &val_batch)?.cross_entropy,
        ))
    };

    let cells = (0..nx * ny)
        .into_par_iter()
        .map(|k| eval(&plane.point_at(xs[k % nx], ys[k / nx])))
        .collect::<Result<Vec<_>>>()?;
    let mut train_loss = vec![vec![0.0; nx]; ny];
    let mut val_loss = vec![vec![0.0; nx]; ny];
    for (k, (tr, va)) in cells.into_iter().enumerate() {
        train_loss[k / nx][k % nx] = tr;
        val_loss[k / nx][k % nx] = va;
    }

    let mut anchors = Vec::with_capacity(3);
    let mut warnings = Vec::new();
    for (i, (p, coords)) in plane.anchors().iter().zip(plane.anchor_coords()).enumerate() {
        let (tr, va) = eval(p)?;
        if !ranges.contains(coords) {
            warnings.push(format!(
                "anchor {} at ({}, {}) lies outside the surface ranges",
                ANCHOR_NAMES[i], coords[0], coords[1]
            ));
        }
        anchors.push(AnchorPoint {
            name: ANCHOR_NAMES[i].to_string(),
            coords,
            train_loss: tr,
            val_loss: va,
        });
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(SurfaceGrid {
        ranges,
        resolution,
        xs,
        ys,
        train_loss,
        val_loss,
        anchors,
        projected_iterates: Vec::new(),
        warnings,
    })
}

impl SurfaceGrid {
    pub const CSV_HEADER: &'static str = "x,y,train_loss,val_loss";

    /// Names the anchors, e.g. after the snapshots they came from.
    pub fn name_anchors(&mut self, names: [&str; 3]) {
        for (a, n) in self.anchors.iter_mut().zip(names) {
            a.name = n.to_string();
        }
    }

    /// Projects each `(epoch, iterate)` onto `plane` and records it.
    pub fn add_iterates<'a>(
        &mut self,
        plane: &Plane,
        iterates: impl IntoIterator<Item = (u64, &'a ParamVector)>,
    ) -> Result<()> {
        for (epoch, w) in iterates {
            let p = plane.project(w)?;
            self.projected_iterates.push(ProjectedIterate {
                epoch,
                coords: p.coords,
                residual_norm: p.residual_norm,
            });
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for (j, y) in self.ys.iter().enumerate() {
            for (i, x) in self.xs.iter().enumerate() {
                out.push_str(&format!(
                    "{x},{y},{},{}\n",
                    self.train_loss[j][i], self.val_loss[j][i]
                ));
            }
        }
        out
    }

    pub fn sidecar_json(&self) -> String {
        let sidecar = SurfaceSidecar {
            x_range: self.ranges.x,
            y_range: self.ranges.y,
            resolution: self.resolution,
            anchors: &self.anchors,
            projected_iterates: &self.projected_iterates,
            warnings: &self.warnings,
        };
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes")
    }
}
