use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::Tensor;
use crate::error::{Error, Result};

/// Generator used everywhere randomness is needed. ChaCha output is stable
/// across platforms and crate versions, which the reproducibility guarantees
/// depend on.
pub type SeededRng = ChaCha8Rng;

/// Derives an independent generator for a named stream under a base seed.
///
/// Parameter groups get their own stream so the initial value of one group
/// does not depend on which other groups were initialized before it.
pub fn derive_rng(seed: u64, stream: &str) -> SeededRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stream.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Half-width of the Glorot uniform interval.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot/Xavier uniform matrix of shape `fan_out x fan_in`.
pub fn glorot_init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid(format!(
            "glorot_init needs positive fans, got fan_in={fan_in} fan_out={fan_out}"
        )));
    }
    let bound = glorot_bound(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Tensor::matrix(fan_out, fan_in, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_bound_for_three_by_three() {
        let mut rng = derive_rng(1, "t");
        let w = glorot_init(3, 3, &mut rng).unwrap();
        assert_eq!(w.shape(), &[3, 3]);
        assert!(w.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = glorot_init(5, 7, &mut derive_rng(42, "w")).unwrap();
        let b = glorot_init(5, 7, &mut derive_rng(42, "w")).unwrap();
        assert!(a.bit_eq(&b));
        let c = glorot_init(5, 7, &mut derive_rng(42, "other")).unwrap();
        assert!(!a.bit_eq(&c));
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(glorot_init(0, 3, &mut derive_rng(0, "")).is_err());
        assert!(glorot_init(3, 0, &mut derive_rng(0, "")).is_err());
    }

    #[test]
    fn sample_moments_match_uniform() {
        // Uniform on [-b, b] has variance b^2/3 = 2/(fan_in+fan_out).
        let (fan_in, fan_out) = (64, 64);
        let variance = 2.0 / (fan_in + fan_out) as f64;
        let mut rng = derive_rng(7, "moments");
        let mut samples = Vec::new();
        while samples.len() < 10_000 {
            let w = glorot_init(fan_in, fan_out, &mut rng).unwrap();
            samples.extend_from_slice(w.data());
        }
        samples.truncate(10_000);
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sigma_mean = (variance / n).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean} vs 3σ {}", 3.0 * sigma_mean);
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - variance).abs() / variance < 0.05);
    }
}
