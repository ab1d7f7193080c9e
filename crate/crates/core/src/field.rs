//! Discrete profile functions.

use nalgebra::DVector;
use std::io::{Read, Write};

use crate::mesh::Mesh;
use crate::{Error, Result};

/// Nodal coefficients of a piecewise-linear function, in the global
/// degree-of-freedom order of a [`Mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: DVector<f64>,
}

impl Field {
    pub fn new(mesh: &Mesh, values: DVector<f64>) -> Result<Self> {
        if values.len() != mesh.dofs() {
            return Err(Error::FieldShape { expected: mesh.dofs(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("field values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn from_vec(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        Self::new(mesh, DVector::from_vec(values))
    }

    /// Interpolate `f(component, t)` at the nodes.
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let values = mesh.dof_coordinates().into_iter().map(|(c, t)| f(c, t)).collect::<Vec<_>>();
        Self { values: DVector::from_vec(values) }
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self { values: DVector::from_element(mesh.dofs(), value) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn abs(&self) -> Self {
        Self { values: self.values.abs() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: &self.values * c }
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    pub fn mean(&self) -> f64 {
        self.values.mean()
    }

    /// Nodewise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Self {
        Self { values: &self.values * a + &other.values * b }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.map(f) }
    }

    /// Nodewise product.
    pub fn product(&self, other: &Field) -> Self {
        Self { values: self.values.component_mul(&other.values) }
    }

    pub fn write_csv<W: Write>(&self, mesh: &Mesh, preamble: &[String], mut out: W) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["component", "t", "value"])?;
        for ((c, t), v) in mesh.dof_coordinates().into_iter().zip(self.values.iter()) {
            w.write_record([c.to_string(), format!("{t:.17e}"), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a field written by [`Field::write_csv`] onto the same mesh.
    pub fn read_csv<R: Read>(mesh: &Mesh, input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let coords = mesh.dof_coordinates();
        let mut values = Vec::with_capacity(coords.len());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Precondition(format!("bad CSV field in row {i}")))
            };
            let (c, t) = coords
                .get(i)
                .copied()
                .ok_or(Error::FieldShape { expected: coords.len(), found: i + 1 })?;
            let (rc, rt) = (parse(0)? as usize, parse(1)?);
            if rc != c || (rt - t).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::Precondition(format!("CSV row {i} at ({rc}, {rt}) does not match mesh node ({c}, {t})")));
            }
            values.push(parse(2)?);
        }
        Field::from_vec(mesh, values)
    }
}

/// A non-negative field representing `u` in `g̃ = u^{N-2} g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor {
    field: Field,
    normalized: bool,
}

impl ConformalFactor {
    pub fn new(field: Field) -> Result<Self> {
        if field.is_empty() || field.is_zero() {
            return Err(Error::ZeroField);
        }
        let m = field.min();
        if m < 0.0 {
            return Err(Error::NegativeFactor(m));
        }
        Ok(Self { field, normalized: false })
    }

    pub(crate) fn normalized_unchecked(field: Field) -> Self {
        Self { field, normalized: true }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}
