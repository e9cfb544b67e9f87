use rand::Rng;

/// Robust soliton degree distribution over `1..=k`.
#[derive(Debug, Clone)]
pub struct RobustSoliton {
    k: usize,
    cdf: Vec<f64>,
}

impl RobustSoliton {
    pub const DEFAULT_C: f64 = 0.1;
    pub const DEFAULT_DELTA: f64 = 0.5;

    pub fn new(k: usize) -> Self {
        Self::with_params(k, Self::DEFAULT_C, Self::DEFAULT_DELTA)
    }

    pub fn with_params(k: usize, c: f64, delta: f64) -> Self {
        assert!(k >= 1, "soliton needs k >= 1");
        if k == 1 {
            return RobustSoliton { k, cdf: vec![1.0] };
        }
        let kf = k as f64;
        let r = c * (kf / delta).ln() * kf.sqrt();
        let spike = ((kf / r).floor() as usize).clamp(1, k);
        let mut pmf = vec![0.0; k + 1];
        pmf[1] = 1.0 / kf;
        for (d, p) in pmf.iter_mut().enumerate().skip(2) {
            *p = 1.0 / (d as f64 * (d as f64 - 1.0));
        }
        for (d, p) in pmf.iter_mut().enumerate().take(spike).skip(1) {
            *p += r / (d as f64 * kf);
        }
        pmf[spike] += r * (r / delta).ln().max(0.0) / kf;
        let total: f64 = pmf.iter().sum();
        let mut acc = 0.0;
        let cdf = pmf[1..]
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        RobustSoliton { k, cdf }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn prob(&self, d: usize) -> f64 {
        if d == 0 || d > self.k {
            return 0.0;
        }
        let prev = if d == 1 { 0.0 } else { self.cdf[d - 2] };
        self.cdf[d - 1] - prev
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u);
        (i + 1).min(self.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn pmf_sums_to_one() {
        for k in [1, 2, 10, 63, 250] {
            let s = RobustSoliton::new(k);
            let sum: f64 = (1..=k).map(|d| s.prob(d)).sum();
            assert!((sum - 1.0).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn samples_stay_in_range() {
        let s = RobustSoliton::new(20);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let d = s.sample(&mut rng);
            assert!((1..=20).contains(&d));
        }
    }
}
