//! Observed design and response data.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// An n x d design matrix with entries in [0,1] (the inputs are assumed
/// uniform on the unit cube) together with the length-n response vector.
#[derive(Debug, Clone)]
pub struct DesignData {
    x: Array2<f64>,
    y: Array1<f64>,
}

impl DesignData {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, d) = x.dim();
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 observations, got {n}")));
        }
        if d == 0 {
            return Err(Error::invalid("design matrix has no columns"));
        }
        if y.len() != n {
            return Err(Error::invalid(format!(
                "response length {} does not match {} design rows",
                y.len(),
                n
            )));
        }
        validate_unit_range(&x)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("response contains a non-finite value"));
        }
        Ok(DesignData { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }
}

/// Checks that every entry of a prospective design matrix lies in [0,1].
pub fn validate_unit_range(x: &Array2<f64>) -> Result<()> {
    for (idx, &v) in x.indexed_iter() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "design entry at row {}, column {} is {v}, outside [0,1]",
                idx.0, idx.1
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_out_of_range_entries() {
        let x = array![[0.0, 0.5], [1.2, 0.1]];
        let y = array![0.0, 1.0];
        assert!(DesignData::new(x, y).is_err());
    }

    #[test]
    fn rejects_single_observation() {
        let x = array![[0.5]];
        let y = array![1.0];
        assert!(DesignData::new(x, y).is_err());
    }

    #[test]
    fn accepts_valid_data() {
        let x = array![[0.0, 1.0], [0.5, 0.25]];
        let y = array![1.0, -2.0];
        let data = DesignData::new(x, y).unwrap();
        assert_eq!((data.n(), data.d()), (2, 2));
    }
}
