use rayon::prelude::*;

use crate::error::Result;
use crate::protocol::chain::run_chain_experiment;
use crate::protocol::config::SweepSpec;

/// One grid point. A failed point keeps its coordinates and the error text.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub point: Vec<f64>,
    pub exact: Option<f64>,
    pub hpa: Option<f64>,
    pub epsilon: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn columns(&self) -> Vec<String> {
        let mut cols = self.axes.clone();
        cols.extend(["final_exact", "final_hpa", "epsilon", "error"].map(String::from));
        cols
    }

    /// Row for the grid point equal to `point`.
    pub fn find(&self, point: &[f64]) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.point == point)
    }
}

/// Final polarizations and relative error at every grid point, evaluated in
/// parallel and returned in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let rows = (0..spec.point_count())
        .into_par_iter()
        .map(|k| {
            let point = spec.point(k);
            match run_chain_experiment(&spec.config_at(&point)) {
                Ok(out) => SweepRow {
                    point,
                    exact: out.exact.as_ref().and_then(|s| s.final_mean()),
                    hpa: out.hpa.as_ref().and_then(|s| s.final_mean()),
                    epsilon: out.comparison.as_ref().and_then(|c| c.final_epsilon()),
                    error: None,
                },
                Err(e) => SweepRow { point, exact: None, hpa: None, epsilon: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(SweepTable { axes: spec.axes.iter().map(|a| a.name.name().to_string()).collect(), rows })
}
