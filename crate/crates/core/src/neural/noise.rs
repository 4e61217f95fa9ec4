use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Multiplicative factors of the multinomial noise, in order of `p1`, `p2`, `p3`.
pub const NOISE_FACTORS: [f64; 3] = [0.0, 0.5, 1.0];

/// Multinomial noise at one injection site: a weight is multiplied by 0 with
/// probability `p1`, by 0.5 with probability `p2`, and kept otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNoiseSpec {
    pub p1: f64,
    pub p2: f64,
}

impl MultinomialNoiseSpec {
    pub const NONE: MultinomialNoiseSpec = MultinomialNoiseSpec { p1: 0.0, p2: 0.0 };

    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let spec = MultinomialNoiseSpec { p1, p2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p1 >= 0.0 && self.p2 >= 0.0 && self.p1 + self.p2 <= 1.0) {
            return Err(Error::Argument(format!(
                "noise spec needs p1, p2 ≥ 0 and p1 + p2 ≤ 1, got ({}, {})",
                self.p1, self.p2
            )));
        }
        Ok(())
    }

    pub fn p3(&self) -> f64 {
        (1.0 - self.p1 - self.p2).max(0.0)
    }

    pub fn probabilities(&self) -> [f64; 3] {
        [self.p1, self.p2, self.p3()]
    }

    /// `E[η] = 1 − p1 − 0.5·p2`
    pub fn mean_factor(&self) -> f64 {
        0.5 * self.p2 + self.p3()
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    #[inline]
    pub(crate) fn draw(&self, rng: &mut Rng) -> f64 {
        let u: f64 = rng.random();
        if u < self.p1 {
            0.0
        } else if u < self.p1 + self.p2 {
            0.5
        } else {
            1.0
        }
    }
}

/// I.i.d. mask of factors in `{0, 0.5, 1}`.
pub fn sample_noise_mask(spec: &MultinomialNoiseSpec, rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    spec.validate()?;
    let data = (0..rows * cols).map(|_| spec.draw(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}
