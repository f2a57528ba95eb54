//! Probability that every station of an `n`-station cluster has an error
//! inside `[-gamma0, gamma0]`, with and without the precondition that all
//! pairwise error differences stay below `l`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalSampler};
use statrs::distribution::{ContinuousCDF, Normal};

/// Monte Carlo settings for [`cluster_probability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMc {
    pub fleets: usize,
    pub seed: u64,
}

impl Default for ClusterMc {
    fn default() -> Self {
        Self {
            fleets: 1_000_000,
            seed: 0x5eed_c1a5,
        }
    }
}

/// Monte Carlo estimate over i.i.d. `N(0, sigma^2)` station errors.
///
/// With a finite `l` every simulated fleet satisfies the precondition by
/// construction: the smallest error `x` is drawn from the unconditioned
/// normal and weighted by `(F(x+l) - F(x))^(n-1)`, the other `n-1` errors
/// are drawn from the normal truncated to `[x, x+l]`. The estimate is the
/// self-normalized weighted fraction of fleets inside the band. Pass
/// `f64::INFINITY` for `l` to drop the precondition.
pub fn cluster_probability(n: usize, gamma0: f64, l: f64, sigma: f64, mc: ClusterMc) -> f64 {
    assert!(n >= 1 && gamma0 > 0.0 && sigma > 0.0 && l > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let normal = NormalSampler::new(0.0, sigma).expect("sigma > 0");

    if l.is_infinite() || n == 1 {
        let hits = (0..mc.fleets)
            .filter(|_| (0..n).all(|_| normal.sample(&mut rng).abs() <= gamma0))
            .count();
        return hits as f64 / mc.fleets as f64;
    }

    let cdf = Normal::new(0.0, sigma).expect("sigma > 0");
    let (mut total, mut inside) = (0.0, 0.0);
    for _ in 0..mc.fleets {
        let x: f64 = normal.sample(&mut rng);
        let (lo, hi) = (cdf.cdf(x), cdf.cdf(x + l));
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let weight = width.powi(n as i32 - 1);
        let mut ok = x.abs() <= gamma0;
        for _ in 1..n {
            let u = lo + width * rng.random::<f64>();
            let g = cdf.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
            ok &= g.abs() <= gamma0;
        }
        total += weight;
        if ok {
            inside += weight;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}
