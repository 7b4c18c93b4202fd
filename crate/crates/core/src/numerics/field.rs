//! Sampled functions: radial profiles and fields on polar grids.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::grid::PolarGrid;

/// Samples `values[i] = u(r0 + i h)` of a radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub r0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn sample<F: Fn(f64) -> f64>(r0: f64, h: f64, count: usize, f: F) -> Self {
        RadialField {
            r0,
            h,
            values: (0..count).map(|i| f(r0 + i as f64 * h)).collect(),
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.r0 + i as f64 * self.h
    }
}

/// Asserted envelope `|u| ≤ C (1 + r)^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<PolarGrid>,
    pub values: Vec<f64>,
    pub decay: Option<Decay>,
}

impl ScalarField {
    pub fn new(grid: Arc<PolarGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::domain(format!(
                "field has {} values for a grid with {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "field value at node {k} is not finite"
            )));
        }
        Ok(ScalarField {
            grid,
            values,
            decay: None,
        })
    }

    pub fn zeros(grid: Arc<PolarGrid>) -> Self {
        let n = grid.n_nodes();
        ScalarField {
            grid,
            values: vec![0.0; n],
            decay: None,
        }
    }

    /// Sample `f(r, θ)` in the model's polar coordinates about `p`.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: Arc<PolarGrid>, f: F) -> Result<Self> {
        let values = (0..grid.n_nodes())
            .map(|k| f(grid.model_radius(k), grid.model_theta(k)))
            .collect();
        Self::new(grid, values)
    }

    /// Attach a decay envelope after checking it against every sample.
    pub fn with_decay(mut self, decay: Decay) -> Result<Self> {
        for (k, v) in self.values.iter().enumerate() {
            let r = self.grid.model_radius(k);
            let bound = decay.constant * (1.0 + r).powf(-decay.exponent);
            if v.abs() > bound * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::Domain(format!(
                    "decay envelope violated at r = {r}: |u| = {:.6e} > {:.6e}",
                    v.abs(),
                    bound
                )));
            }
        }
        self.decay = Some(decay);
        Ok(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `r,theta,value`; coordinates are the model's polar
    /// coordinates about `p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,theta,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                self.grid.model_radius(k),
                self.grid.model_theta(k),
                v
            )?;
        }
        Ok(())
    }
}
