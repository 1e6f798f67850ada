use serde::{Deserialize, Serialize};

/// Residual norm used by the convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormType {
    Euclidean,
    #[default]
    WeightedL2,
    Infinity,
}

impl NormType {
    /// Evaluated sequentially so the result never depends on the thread count.
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            NormType::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormType::WeightedL2 => {
                if v.is_empty() {
                    0.0
                } else {
                    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
                }
            }
            NormType::Infinity => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormType::Euclidean => "euclidean",
            NormType::WeightedL2 => "weighted-l2",
            NormType::Infinity => "infinity",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_l2_of_three_four() {
        let v = NormType::WeightedL2.eval(&[3.0, 4.0]);
        assert!((v - 3.535_533_905_932_737_6).abs() < 1e-15);
        assert_eq!(NormType::Euclidean.eval(&[3.0, 4.0]), 5.0);
        assert_eq!(NormType::Infinity.eval(&[3.0, -4.0]), 4.0);
    }

    #[test]
    fn constant_and_singleton() {
        let c = vec![-1.75; 37];
        assert!((NormType::WeightedL2.eval(&c) - 1.75).abs() < 1e-15);
        for n in [
            NormType::Euclidean,
            NormType::WeightedL2,
            NormType::Infinity,
        ] {
            assert_eq!(n.eval(&[-2.5]), 2.5);
        }
    }
}
