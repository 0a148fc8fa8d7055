use serde::{Deserialize, Serialize};

use super::{Operator, C64};
use crate::error::{Error, Result};

/// `{"dim": d, "re": [[...]], "im": [[...]]}`, rows first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn from_operator(x: &Operator) -> Self {
        let d = x.dim();
        let rows = |f: fn(C64) -> f64| (0..d).map(|i| (0..d).map(|j| f(x.get(i, j))).collect()).collect();
        MatrixJson { dim: d, re: rows(|z| z.re), im: Some(rows(|z| z.im)) }
    }

    /// Converts to an operator; `path` names the field in error messages.
    pub fn to_operator(&self, path: &str) -> Result<Operator> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::model(path, "dim must be positive"));
        }
        let check = |rows: &Vec<Vec<f64>>, part: &str| -> Result<()> {
            if rows.len() != d {
                return Err(Error::model(format!("{path}.{part}"), format!("expected {d} rows, found {}", rows.len())));
            }
            for (i, row) in rows.iter().enumerate() {
                if row.len() != d {
                    return Err(Error::model(
                        format!("{path}.{part}[{i}]"),
                        format!("expected {d} entries, found {}", row.len()),
                    ));
                }
                if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                    return Err(Error::model(format!("{path}.{part}[{i}][{j}]"), "entry is not finite"));
                }
            }
            Ok(())
        };
        check(&self.re, "re")?;
        if let Some(im) = &self.im {
            check(im, "im")?;
        }
        Ok(Operator::from_fn(d, |i, j| {
            C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_row_major() {
        let x = Operator::from_fn(2, |i, j| C64::new((2 * i + j) as f64, i as f64 - j as f64));
        let js = MatrixJson::from_operator(&x);
        assert_eq!(js.re, vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
        let text = serde_json::to_string(&js).unwrap();
        let back: MatrixJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_operator("m").unwrap(), x);
    }

    #[test]
    fn imaginary_part_is_optional() {
        let js: MatrixJson = serde_json::from_str(r#"{"dim": 2, "re": [[0, 1], [1, 0]]}"#).unwrap();
        assert!(js.to_operator("m").unwrap().is_real());
    }

    #[test]
    fn malformed_rows_name_the_field() {
        let js: MatrixJson = serde_json::from_str(r#"{"dim": 2, "re": [[0, 1], [1]]}"#).unwrap();
        let err = js.to_operator("system.H_S").unwrap_err().to_string();
        assert!(err.contains("system.H_S.re[1]"), "{err}");
    }
}
