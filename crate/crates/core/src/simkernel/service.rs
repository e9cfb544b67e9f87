use thiserror::Error;

/// Distribution of the per-packet service time (backoff plus airtime), in ms.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceTimeDistribution {
    Uniform {
        a: f64,
        b: f64,
    },
    /// Sorted, non-negative samples.
    Empirical(Vec<f64>),
}

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("uniform support needs a < b (got a={a}, b={b})")]
    EmptySupport { a: f64, b: f64 },
    #[error("empirical distribution needs at least one sample")]
    NoSamples,
    #[error("samples must be finite and non-negative")]
    BadSample,
}

impl ServiceTimeDistribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self, DistributionError> {
        if !(a < b) {
            return Err(DistributionError::EmptySupport { a, b });
        }
        Ok(ServiceTimeDistribution::Uniform { a, b })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self, DistributionError> {
        if samples.is_empty() {
            return Err(DistributionError::NoSamples);
        }
        if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DistributionError::BadSample);
        }
        samples.sort_by(f64::total_cmp);
        Ok(ServiceTimeDistribution::Empirical(samples))
    }

    /// `P(T <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ServiceTimeDistribution::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            ServiceTimeDistribution::Empirical(s) => s.partition_point(|&v| v <= x) as f64 / s.len() as f64,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ServiceTimeDistribution::Uniform { a, b } => 0.5 * (a + b),
            ServiceTimeDistribution::Empirical(s) => s.iter().sum::<f64>() / s.len() as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cdf_examples() {
        let d = ServiceTimeDistribution::uniform(10.0, 30.0).unwrap();
        assert_eq!(d.cdf(20.0), 0.5);
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.cdf(30.0), 1.0);
        assert!(ServiceTimeDistribution::uniform(3.0, 3.0).is_err());
    }

    #[test]
    fn empirical_cdf_counts_samples_at_or_below() {
        let d = ServiceTimeDistribution::empirical(vec![4.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.cdf(1.0), 0.25);
        assert_eq!(d.cdf(2.0), 0.75);
        assert_eq!(d.cdf(3.9), 0.75);
        assert_eq!(d.cdf(4.0), 1.0);
        assert!(ServiceTimeDistribution::empirical(vec![-1.0]).is_err());
    }
}
