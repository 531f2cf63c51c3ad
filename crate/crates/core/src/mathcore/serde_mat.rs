//! Serde helpers: matrices as row-major nested arrays, vectors as flat arrays.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::linalg::{Matrix, SpdMatrix, Vector};
use crate::error::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NestedRows(pub Vec<Vec<f64>>);

impl NestedRows {
    pub fn from_matrix(m: &Matrix) -> Self {
        NestedRows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    pub fn to_matrix(&self) -> Result<Matrix, Error> {
        let rows = self.0.len();
        let cols = self.0.first().map(|r| r.len()).unwrap_or(0);
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged matrix rows".into()));
        }
        let flat: Vec<f64> = self.0.iter().flatten().copied().collect();
        Ok(Matrix::from_row_slice(rows, cols, &flat))
    }
}

impl TryFrom<NestedRows> for SpdMatrix {
    type Error = Error;
    fn try_from(n: NestedRows) -> Result<Self, Error> {
        SpdMatrix::new(n.to_matrix()?)
    }
}

impl From<SpdMatrix> for NestedRows {
    fn from(s: SpdMatrix) -> Self {
        NestedRows::from_matrix(s.as_matrix())
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        NestedRows::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        NestedRows::deserialize(d)?
            .to_matrix()
            .map_err(serde::de::Error::custom)
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub mod matrices {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<NestedRows> = ms.iter().map(NestedRows::from_matrix).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Matrix>, D::Error> {
        Vec::<NestedRows>::deserialize(d)?
            .iter()
            .map(|n| n.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod vectors {
    use super::*;

    pub fn serialize<S: Serializer>(vs: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(Vector::from_vec)
            .collect())
    }
}
