//! Ridge regression and disjoint LinUCB.
//!
//! Contexts are augmented with a trailing constant 1 so every model carries
//! an intercept. Two penalty shapes are supported: `ridge_fit` leaves the
//! intercept unpenalized (the usual offline ridge estimator), while LinUCB
//! arms start from `alpha * I` over the whole augmented vector so an arm with
//! no data still has an invertible design matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{argmax, Policy};
use crate::types::{ArmHistory, ContextPoint};

/// Relative pivot size below which a Cholesky factor is treated as singular.
const RANK_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    /// `alpha` on the slope weights only.
    Slopes,
    /// `alpha` on every augmented coordinate, intercept included.
    Full,
}

#[derive(Debug, Clone)]
pub struct RidgeModel {
    dim: usize,
    l2_alpha: f64,
    penalty: Penalty,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    inverse: Option<DMatrix<f64>>,
    weights: Option<DVector<f64>>,
    count: usize,
}

fn augment(x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len() + 1, x.iter().copied().chain(std::iter::once(1.0)))
}

impl RidgeModel {
    pub fn new(dim: usize, l2_alpha: f64, penalty: Penalty) -> Result<Self> {
        if !(l2_alpha >= 0.0 && l2_alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("l2_alpha {l2_alpha} must be >= 0")));
        }
        let p = dim + 1;
        let mut gram = DMatrix::zeros(p, p);
        let penalized = match penalty {
            Penalty::Slopes => dim,
            Penalty::Full => p,
        };
        for i in 0..penalized {
            gram[(i, i)] = l2_alpha;
        }
        let mut model = Self {
            dim,
            l2_alpha,
            penalty,
            gram,
            moment: DVector::zeros(p),
            inverse: None,
            weights: None,
            count: 0,
        };
        model.refactor();
        Ok(model)
    }

    /// An empty LinUCB arm: design matrix `alpha * I`.
    pub fn linucb_arm(dim: usize, l2_alpha: f64) -> Result<Self> {
        Self::new(dim, l2_alpha, Penalty::Full)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l2_alpha(&self) -> f64 {
        self.l2_alpha
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Slopes followed by the intercept, or `RankDeficient` when the
    /// regularized design is singular.
    pub fn weights(&self) -> Result<&DVector<f64>> {
        self.weights.as_ref().ok_or(Error::RankDeficient)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Recomputes inverse and weights from the accumulated sums.
    fn refactor(&mut self) {
        self.inverse = None;
        self.weights = None;
        let Some(chol) = self.gram.clone().cholesky() else {
            return;
        };
        let l = chol.l_dirty();
        let diag = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]);
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        if !(lo > RANK_TOL * hi.max(1e-300)) {
            return;
        }
        self.weights = Some(chol.solve(&self.moment));
        self.inverse = Some(chol.inverse());
    }

    /// Adds one observation, keeping the inverse current with a
    /// Sherman-Morrison step once the design is invertible.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.check(x)?;
        if !y.is_finite() {
            return Err(Error::InvalidValue(format!("non-finite reward {y}")));
        }
        let xa = augment(x);
        self.gram.ger(1.0, &xa, &xa, 1.0);
        self.moment.axpy(y, &xa, 1.0);
        self.count += 1;
        match self.inverse.as_mut() {
            Some(inv) => {
                let u = &*inv * &xa;
                let denom = 1.0 + xa.dot(&u);
                inv.ger(-1.0 / denom, &u, &u, 1.0);
                self.weights = Some(&*inv * &self.moment);
            }
            None => self.refactor(),
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.weights()?.dot(&augment(x)))
    }

    /// `sqrt(x~' A^-1 x~)`.
    pub fn confidence_width(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let inv = self.inverse.as_ref().ok_or(Error::RankDeficient)?;
        let xa = augment(x);
        Ok(xa.dot(&(inv * &xa)).max(0.0).sqrt())
    }
}

/// Solves the regularized normal equations with the intercept unpenalized.
pub fn ridge_fit(contexts: &[ContextPoint], rewards: &[f64], l2_alpha: f64) -> Result<RidgeModel> {
    if contexts.len() != rewards.len() {
        return Err(Error::InvalidValue(format!(
            "{} contexts but {} rewards",
            contexts.len(),
            rewards.len()
        )));
    }
    let dim = contexts.first().map(|c| c.dim()).ok_or(Error::EmptySet)?;
    let mut model = RidgeModel::new(dim, l2_alpha, Penalty::Slopes)?;
    for (x, &y) in contexts.iter().zip(rewards) {
        x.check_dim(dim)?;
        if !y.is_finite() {
            return Err(Error::InvalidValue(format!("non-finite reward {y}")));
        }
        let xa = augment(x.coords());
        model.gram.ger(1.0, &xa, &xa, 1.0);
        model.moment.axpy(y, &xa, 1.0);
        model.count += 1;
    }
    model.refactor();
    model.weights()?;
    Ok(model)
}

/// Disjoint LinUCB choice: argmax of prediction plus `confidence` times the
/// ellipsoidal width; ties go to the lowest arm.
pub fn linucb_decide(models: &[RidgeModel], x: &ContextPoint, confidence: f64) -> Result<usize> {
    if models.is_empty() {
        return Err(Error::InvalidConfig("no arms".into()));
    }
    let scores = models
        .iter()
        .map(|m| Ok(m.predict(x.coords())? + confidence * m.confidence_width(x.coords())?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(argmax(&scores))
}

/// Frozen per-arm ridge predictors.
#[derive(Debug, Clone)]
pub struct RidgePolicy {
    pub models: Vec<RidgeModel>,
}

impl RidgePolicy {
    pub fn fit(histories: &[ArmHistory], l2_alpha: f64) -> Result<Self> {
        let models = histories
            .iter()
            .map(|h| {
                let (xs, ys): (Vec<ContextPoint>, Vec<f64>) = h
                    .observations()
                    .iter()
                    .map(|o| (o.context.clone(), o.reward))
                    .unzip();
                ridge_fit(&xs, &ys, l2_alpha)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { models })
    }
}

impl Policy for RidgePolicy {
    fn num_arms(&self) -> usize {
        self.models.len()
    }

    fn estimates(&self, x: &ContextPoint) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.predict(x.coords())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(xs: &[f64]) -> Vec<ContextPoint> {
        xs.iter().map(|&x| ContextPoint::new(vec![x]).unwrap()).collect()
    }

    #[test]
    fn interpolates_exact_line() {
        let m = ridge_fit(&pts(&[0.0, 1.0, 2.0]), &[1.0, 3.0, 5.0], 0.0).unwrap();
        let w = m.weights().unwrap();
        assert_abs_diff_eq!(w[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn hand_solved_two_point_fit() {
        // Minimise b^2 + (w + b - 1)^2 + w^2: w = b = 1/3.
        let m = ridge_fit(&pts(&[0.0, 1.0]), &[0.0, 1.0], 1.0).unwrap();
        let w = m.weights().unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn huge_penalty_flattens_slopes() {
        let xs = pts(&[0.1, 0.4, 0.9, 0.3]);
        let ys = [2.0, -1.0, 0.5, 4.0];
        let m = ridge_fit(&xs, &ys, 1e12).unwrap();
        let w = m.weights().unwrap();
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-6);
        // The unpenalized intercept settles on the mean response.
        assert_abs_diff_eq!(w[1], 1.375, epsilon = 1e-6);
    }

    #[test]
    fn singular_design_without_penalty() {
        let err = ridge_fit(&pts(&[0.5, 0.5, 0.5]), &[1.0, 2.0, 3.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::RankDeficient));
    }

    #[test]
    fn linucb_single_arm() {
        let models = vec![RidgeModel::linucb_arm(2, 1.0).unwrap()];
        let x = ContextPoint::new(vec![0.3, 0.4]).unwrap();
        assert_eq!(linucb_decide(&models, &x, 0.1).unwrap(), 0);
    }

    #[test]
    fn linucb_identical_arms_tie_to_zero() {
        let mut a = RidgeModel::linucb_arm(1, 1.0).unwrap();
        a.update(&[0.5], 0.7).unwrap();
        let models = vec![a.clone(), a];
        let x = ContextPoint::new(vec![0.2]).unwrap();
        assert_eq!(linucb_decide(&models, &x, 0.1).unwrap(), 0);
    }

    #[test]
    fn linucb_exploits_with_zero_confidence() {
        let mut a0 = RidgeModel::linucb_arm(1, 1.0).unwrap();
        let mut a1 = RidgeModel::linucb_arm(1, 1.0).unwrap();
        for _ in 0..10 {
            a0.update(&[0.5], 0.0).unwrap();
            a1.update(&[0.5], 1.0).unwrap();
        }
        let x = ContextPoint::new(vec![0.5]).unwrap();
        assert!(a1.predict(&[0.5]).unwrap() > a0.predict(&[0.5]).unwrap());
        assert_eq!(linucb_decide(&[a0, a1], &x, 0.0).unwrap(), 1);
    }

    #[test]
    fn linucb_singular_gram_errors() {
        let m = RidgeModel::new(1, 0.0, Penalty::Full).unwrap();
        let x = ContextPoint::new(vec![0.5]).unwrap();
        assert!(matches!(linucb_decide(&[m], &x, 1.0), Err(Error::RankDeficient)));
    }

    #[test]
    fn incremental_matches_refit() {
        let mut m = RidgeModel::linucb_arm(2, 0.5).unwrap();
        let data = [([0.1, 0.2], 1.0), ([0.7, 0.1], 0.0), ([0.4, 0.9], 0.5), ([0.3, 0.3], 2.0)];
        for (x, y) in data {
            m.update(&x, y).unwrap();
        }
        let mut fresh = m.clone();
        fresh.refactor();
        let (w1, w2) = (m.weights().unwrap(), fresh.weights().unwrap());
        for i in 0..3 {
            assert_abs_diff_eq!(w1[i], w2[i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            m.confidence_width(&[0.5, 0.5]).unwrap(),
            fresh.confidence_width(&[0.5, 0.5]).unwrap(),
            epsilon = 1e-12
        );
    }
}
