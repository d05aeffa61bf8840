//! Artifact writers: CSV tables, JSON reports and raw grid dumps with JSON
//! sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nlfc::geometry::CartesianGrid;
use nlfc::harness::ConvergenceRow;
use serde::Serialize;

/// Output directory with helpers that log each written path.
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    h: f64,
    dtype: &'a str,
    layout: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<usize>,
}

/// Time stamp recorded in a dump's sidecar.
#[derive(Clone, Copy, Debug, Default)]
pub struct Stamp {
    pub t: Option<f64>,
    pub step: Option<usize>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        let mut f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        f.write_all(bytes).with_context(|| format!("writing {}", p.display()))?;
        self.written.push(p);
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write_text(name, &s)
    }

    /// `stem.f64` (little-endian, row-major `j*nx + i`) and `stem.json`.
    pub fn write_grid(&mut self, stem: &str, grid: &CartesianGrid, values: &[f64], stamp: Stamp) -> Result<()> {
        assert_eq!(values.len(), grid.len());
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.write_bytes(&format!("{stem}.f64"), &bytes)?;
        self.sidecar(stem, grid, "float64-le", stamp)
    }

    /// `stem.u8` label mask and `stem.json`.
    pub fn write_mask(&mut self, stem: &str, grid: &CartesianGrid, labels: &[u8]) -> Result<()> {
        self.write_bytes(&format!("{stem}.u8"), labels)?;
        self.sidecar(stem, grid, "uint8", Stamp::default())
    }

    fn sidecar(&mut self, stem: &str, grid: &CartesianGrid, dtype: &str, stamp: Stamp) -> Result<()> {
        let car = Sidecar {
            nx: grid.nx,
            ny: grid.ny,
            x0: grid.x0,
            y0: grid.y0,
            h: grid.h,
            dtype,
            layout: "row-major, index j*nx+i, x fastest",
            t: stamp.t,
            step: stamp.step,
        };
        self.write_json(&format!("{stem}.json"), &car)
    }
}

/// Round-trip formatting for CSV cells; NaN is written as `nan`.
pub fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("resolution,eps2,order\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", cell(r.resolution), cell(r.eps2), cell(r.order)));
    }
    s
}

/// Short stable label for β in file names, e.g. `2.5` → `beta2.5`.
pub fn beta_tag(beta: f64) -> String {
    format!("beta{beta}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_cells_round_trip() {
        for v in [0.1, -82.87098585883194, 1e-300, 3.0] {
            assert_eq!(cell(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(cell(f64::NAN), "nan");
        let rows = [ConvergenceRow {
            resolution: 100.0,
            eps2: 1e-5,
            order: f64::NAN,
        }];
        assert_eq!(convergence_csv(&rows), "resolution,eps2,order\n1e2,1e-5,nan\n");
    }
}
