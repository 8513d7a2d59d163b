//! Grid functions on a [`LatticeDomain`] and the plain-text grid file format.
//!
//! Values are stored densely over the whole lattice; exterior nodes hold NaN.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::domain::LatticeDomain;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GridFunction {
    lattice: Arc<LatticeDomain>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Zero on masked nodes.
    pub fn zeros(lattice: &Arc<LatticeDomain>) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn constant(lattice: &Arc<LatticeDomain>, c: f64) -> Self {
        Self::from_fn(lattice, |_| c)
    }

    /// Samples `f` at every masked node.
    pub fn from_fn(lattice: &Arc<LatticeDomain>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = vec![f64::NAN; lattice.len()];
        let mut z = vec![0.0; 2 * lattice.n()];
        for &i in lattice.masked() {
            lattice.coords_into(i, &mut z);
            values[i] = f(&z);
        }
        GridFunction {
            lattice: Arc::clone(lattice),
            values,
        }
    }

    /// Wraps dense values; masked entries must be finite.
    pub fn from_values(lattice: &Arc<LatticeDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::Domain(format!(
                "expected {} values, got {}",
                lattice.len(),
                values.len()
            )));
        }
        for i in 0..values.len() {
            if lattice.is_masked(i) {
                if !values[i].is_finite() {
                    return Err(Error::Domain(format!(
                        "non-finite value at masked node {i} ({:?})",
                        lattice.coords(i)
                    )));
                }
            } else {
                values[i] = f64::NAN;
            }
        }
        Ok(GridFunction {
            lattice: Arc::clone(lattice),
            values,
        })
    }

    /// Function defined on a subset of the masked nodes; NaN marks the rest.
    pub fn partial(lattice: &Arc<LatticeDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::Domain(format!(
                "expected {} values, got {}",
                lattice.len(),
                values.len()
            )));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !lattice.is_masked(i) || v.is_infinite() {
                *v = f64::NAN;
            }
        }
        Ok(GridFunction {
            lattice: Arc::clone(lattice),
            values,
        })
    }

    /// Masked nodes carrying a value.
    pub fn support(&self) -> Vec<usize> {
        self.lattice
            .masked()
            .iter()
            .copied()
            .filter(|&i| self.values[i].is_finite())
            .collect()
    }

    pub fn lattice(&self) -> &Arc<LatticeDomain> {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn set(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    pub fn same_lattice(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice.same_geometry(&other.lattice)
    }

    pub fn check_same_lattice(&self, other: &GridFunction) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(Error::Domain("grid functions live on different lattices".into()))
        }
    }

    /// Applies `f` to each masked value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        let mut out = self.clone();
        for &i in self.lattice.masked() {
            out.values[i] = f(self.values[i]);
        }
        out
    }

    /// Combines two grid functions on the same lattice nodewise.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.check_same_lattice(other)?;
        let mut out = self.clone();
        for &i in self.lattice.masked() {
            out.values[i] = f(self.values[i], other.values[i]);
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_lattice(other)?;
        Ok(self
            .lattice
            .masked()
            .iter()
            .map(|&i| (self.values[i] - other.values[i]).abs())
            .fold(0.0, f64::max))
    }

    /// Writes the grid file: one header line, then one value per node.
    pub fn write_grid<W: Write>(&self, mut w: W, field: &str) -> Result<()> {
        let lat = &self.lattice;
        let join = |v: Vec<String>| v.join(",");
        writeln!(
            w,
            "n={} h={} origin={} dims={} field={}",
            lat.n(),
            lat.h(),
            join(lat.origin().iter().map(|x| x.to_string()).collect()),
            join(lat.dims().iter().map(|x| x.to_string()).collect()),
            field
        )?;
        for &v in &self.values {
            if v.is_nan() {
                writeln!(w, "nan")?;
            } else {
                writeln!(w, "{v:e}")?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path, field: &str) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_grid(std::io::BufWriter::new(f), field)
    }
}

/// Parsed grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub n: usize,
    pub h: f64,
    pub origin: Vec<f64>,
    pub dims: Vec<usize>,
    pub field: String,
    pub values: Vec<f64>,
}

impl GridFile {
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))??;
        let mut n = None;
        let mut h = None;
        let mut origin = None;
        let mut dims = None;
        let mut field = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header token {tok:?}")))?;
            let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("{k}: {e}"));
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
                "h" => h = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
                "origin" => {
                    origin = Some(
                        v.split(',')
                            .map(|x| x.parse::<f64>().map_err(|e| bad(&e)))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "dims" => {
                    dims = Some(
                        v.split(',')
                            .map(|x| x.parse::<usize>().map_err(|e| bad(&e)))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "field" => field = Some(v.to_string()),
                _ => return Err(Error::Parse(format!("unknown header key {k:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("header lacks {k}"));
        let n = n.ok_or_else(|| missing("n"))?;
        let dims = dims.ok_or_else(|| missing("dims"))?;
        let origin = origin.ok_or_else(|| missing("origin"))?;
        if dims.len() != 2 * n || origin.len() != 2 * n {
            return Err(Error::Parse(format!("origin and dims need {} entries", 2 * n)));
        }
        let mut values = Vec::with_capacity(dims.iter().product());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(if t == "nan" {
                f64::NAN
            } else {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("value {t:?}: {e}")))?
            });
        }
        if values.len() != dims.iter().product::<usize>() {
            return Err(Error::Parse(format!(
                "expected {} values, found {}",
                dims.iter().product::<usize>(),
                values.len()
            )));
        }
        Ok(GridFile {
            n,
            h: h.ok_or_else(|| missing("h"))?,
            origin,
            dims,
            field: field.ok_or_else(|| missing("field"))?,
            values,
        })
    }

    /// Attaches the values to a lattice with matching geometry.
    pub fn into_grid_function(self, lattice: &Arc<LatticeDomain>) -> Result<GridFunction> {
        let same_origin = self
            .origin
            .iter()
            .zip(lattice.origin())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        if self.n != lattice.n() || self.dims != lattice.dims() || self.h != lattice.h() || !same_origin {
            return Err(Error::Domain("grid file geometry does not match the lattice".into()));
        }
        GridFunction::from_values(lattice, self.values)
    }
}
