//! Helpers for the TOML documents used to store models and reductions:
//! floats are written with 17 significant digits.

use nalgebra::DMatrix;

use crate::bilinear::BilinearMap;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub(crate) fn fmt_f<T: Real>(x: T) -> String {
    format!("{:.16e}", to_f64(x))
}

pub(crate) fn fmt_vec<T: Real>(v: impl Iterator<Item = T>) -> String {
    let items: Vec<String> = v.map(fmt_f).collect();
    format!("[{}]", items.join(", "))
}

pub(crate) fn fmt_matrix<T: Real>(m: &DMatrix<T>) -> String {
    if m.nrows() == 0 {
        return "[]".to_string();
    }
    let rows: Vec<String> = (0..m.nrows()).map(|i| fmt_vec(m.row(i).iter().copied())).collect();
    format!("[\n  {},\n]", rows.join(",\n  "))
}

pub(crate) fn value_f64(v: &toml::Value, key: &str) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Parse(format!("{key}: expected a number"))),
    }
}

pub(crate) fn value_vec(v: &toml::Value, key: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{key}: expected an array")))?
        .iter()
        .map(|x| value_f64(x, key))
        .collect()
}

pub(crate) fn value_matrix<T: Real>(v: &toml::Value, key: &str, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    let arr = v.as_array().ok_or_else(|| Error::Parse(format!("{key}: expected an array of rows")))?;
    if arr.len() != rows {
        return Err(Error::Parse(format!("{key}: expected {rows} rows, found {}", arr.len())));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, row) in arr.iter().enumerate() {
        let vals = value_vec(row, key)?;
        if vals.len() != cols {
            return Err(Error::Parse(format!("{key}: row {i} has {} entries, expected {cols}", vals.len())));
        }
        for (j, x) in vals.into_iter().enumerate() {
            m[(i, j)] = lit(x);
        }
    }
    Ok(m)
}


pub(crate) fn value_usize(v: &toml::Value, key: &str) -> Result<usize> {
    v.as_integer()
        .filter(|i| *i >= 0)
        .map(|i| i as usize)
        .ok_or_else(|| Error::Parse(format!("{key}: expected a nonnegative integer")))
}

/// Array of per-output coefficient matrices.
pub(crate) fn fmt_bilinear<T: Real>(b: &BilinearMap<T>) -> String {
    if b.out_dim() == 0 {
        return "[]".to_string();
    }
    let mut s = String::from("[\n");
    for o in 0..b.out_dim() {
        s.push_str(&format!("  {},\n", fmt_matrix(&b.slice(o)).replace('\n', "\n  ")));
    }
    s.push(']');
    s
}

pub(crate) fn value_bilinear<T: Real>(v: &toml::Value, key: &str, out_dim: usize, in_dim: usize) -> Result<BilinearMap<T>> {
    let arr = v.as_array().ok_or_else(|| Error::Parse(format!("{key}: expected array")))?;
    if arr.len() != out_dim {
        return Err(Error::Parse(format!("{key}: expected {out_dim} slices, found {}", arr.len())));
    }
    if out_dim == 0 {
        return Ok(BilinearMap::zeros(0, in_dim));
    }
    let slices: Vec<DMatrix<T>> = arr
        .iter()
        .map(|s| value_matrix(s, key, in_dim, in_dim))
        .collect::<Result<_>>()?;
    Ok(BilinearMap::from_slices(&slices))
}
