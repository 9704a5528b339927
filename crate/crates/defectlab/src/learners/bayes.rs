//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

/// Class index 0 = clean, 1 = defective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

/// Caller guarantees both classes are present and rows are rectangular.
pub fn fit(x: &[Vec<f64>], y: &[bool]) -> GaussianNb {
    let n_features = x[0].len();
    let n = x.len() as f64;

    // Variance floor keyed to the widest feature so per-class point masses
    // cannot produce infinite densities.
    let mut max_var = 0.0f64;
    for j in 0..n_features {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        max_var = max_var.max(var);
    }
    let eps = (1e-9 * max_var).max(1e-12);

    let mut model = GaussianNb {
        log_prior: [0.0; 2],
        mean: [vec![0.0; n_features], vec![0.0; n_features]],
        var: [vec![0.0; n_features], vec![0.0; n_features]],
    };
    for class in 0..2 {
        let rows: Vec<&Vec<f64>> = x
            .iter()
            .zip(y)
            .filter(|(_, &label)| label == (class == 1))
            .map(|(r, _)| r)
            .collect();
        let m = rows.len() as f64;
        model.log_prior[class] = (m / n).ln();
        for j in 0..n_features {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m;
            model.mean[class][j] = mean;
            model.var[class][j] = var.max(eps);
        }
    }
    model
}

impl GaussianNb {
    fn log_joint(&self, class: usize, x: &[f64]) -> f64 {
        let mut lp = self.log_prior[class];
        for (j, &v) in x.iter().enumerate() {
            let var = self.var[class][j];
            let d = v - self.mean[class][j];
            lp += -0.5 * (std::f64::consts::TAU * var).ln() - d * d / (2.0 * var);
        }
        lp
    }

    /// Normalized posterior probability of the defective class.
    #[must_use]
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let lp0 = self.log_joint(0, x);
        let lp1 = self.log_joint(1, x);
        1.0 / (1.0 + (lp0 - lp1).exp())
    }
}
