use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::MlpError;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension mean and (population) standard deviation of the training embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(train: ArrayView2<'_, f64>) -> Result<Self, MlpError> {
        if train.nrows() < 2 {
            return Err(MlpError::EmptyData(format!(
                "standardization needs at least 2 training rows, got {}",
                train.nrows()
            )));
        }
        let mean = train.mean_axis(Axis(0)).expect("nonempty");
        let mut std = train.std_axis(Axis(0), 0.0);
        let mut floored = 0;
        std.mapv_inplace(|s| {
            if s < STD_FLOOR {
                floored += 1;
                STD_FLOOR
            } else {
                s
            }
        });
        if floored > 0 {
            log::warn!("{floored} constant embedding dimensions; std floored at {STD_FLOOR}");
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, MlpError> {
        if x.ncols() != self.dim() {
            return Err(MlpError::Shape(format!(
                "embeddings have {} dimensions, standardizer {}",
                x.ncols(),
                self.dim()
            )));
        }
        Ok((&x - &self.mean) / &self.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_case() {
        let x = array![[0.0], [2.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.apply(x.view()).unwrap(), array![[-1.0], [1.0]]);
    }

    #[test]
    fn standardized_data_is_a_fixpoint() {
        let x = array![[-1.0, 1.0], [1.0, -1.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        let y = s.apply(x.view()).unwrap();
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_matrix_moments_match_direct_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_simple_fn((100, 5), || rng.random_range(-3.0..7.0));
        let s = Standardizer::fit(x.view()).unwrap();
        for j in 0..5 {
            let col: Vec<f64> = x.column(j).to_vec();
            let m = col.iter().sum::<f64>() / 100.0;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 100.0).sqrt();
            assert!((s.mean[j] - m).abs() < 1e-12);
            assert!((s.std[j] - sd).abs() < 1e-12);
        }
        let y = s.apply(x.view()).unwrap();
        for j in 0..5 {
            let col = y.column(j);
            let m = col.sum() / 100.0;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 100.0).sqrt();
            assert!(m.abs() < 1e-6 && (sd - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_dimension_is_floored() {
        let x = array![[3.0, 1.0], [3.0, 2.0], [3.0, 4.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        assert_eq!(s.std[0], STD_FLOOR);
        assert!(s.apply(x.view()).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn needs_two_rows() {
        assert!(Standardizer::fit(array![[1.0, 2.0]].view()).is_err());
    }
}
