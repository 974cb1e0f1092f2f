//! Row-major nested-array serialization for ndarray values.

pub mod matrix {
    use ndarray::Array2;
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.outer_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }
}

pub mod vector {
    use ndarray::Array1;
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice()
            .map(|x| x.to_vec())
            .unwrap_or_else(|| v.to_vec())
            .serialize(s)
    }
}

/// Builds a matrix from rows; `cols` fixes the width when `rows` is empty
/// or every row is empty.
pub fn from_rows(rows: &[Vec<f64>], cols: Option<usize>) -> Result<ndarray::Array2<f64>, String> {
    let width = rows.first().map(Vec::len).or(cols).unwrap_or(0);
    if let Some(r) = rows.iter().position(|r| r.len() != width) {
        return Err(format!("row {r} has {} entries, expected {width}", rows[r].len()));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    ndarray::Array2::from_shape_vec((rows.len(), width), data).map_err(|e| e.to_string())
}
