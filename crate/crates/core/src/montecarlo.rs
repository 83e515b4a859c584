//! Seeded, order-independent Monte Carlo replication.
//!
//! Every replica owns a ChaCha8 stream derived from `(seed, domain, replica)`.
//! Replicas are summed in fixed-size chunks and the chunks are reduced in
//! index order, so results are bit-identical for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

const CHUNK: u64 = 2048;

/// RNG for one replica. `domain` separates unrelated uses of the same seed.
pub fn replica_rng(seed: u64, domain: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(replica);
    rng
}

/// Running first and second moments of a vector-valued observable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub n: u64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    pub fn new(width: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; width],
            sum_sq: vec![0.0; width],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.n += 1;
        for (i, &v) in values.iter().enumerate() {
            self.sum[i] += v;
            self.sum_sq[i] += v * v;
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum[i] / self.n as f64
    }

    /// Standard error of the mean.
    pub fn stderr(&self, i: usize) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let mean = self.sum[i] / n;
        let var = ((self.sum_sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Runs `replicas` independent draws of a `width`-dimensional observable.
pub fn run_replicas<F>(replicas: u64, width: usize, seed: u64, domain: u64, f: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng, u64, &mut [f64]) + Sync,
{
    let chunks = replicas.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::new(width);
            let mut buf = vec![0.0; width];
            let end = ((c + 1) * CHUNK).min(replicas);
            for r in c * CHUNK..end {
                let mut rng = replica_rng(seed, domain, r);
                buf.iter_mut().for_each(|v| *v = 0.0);
                f(&mut rng, r, &mut buf);
                m.push(&buf);
            }
            m
        })
        .collect();
    let mut total = Moments::new(width);
    for m in &partial {
        total.merge(m);
    }
    total
}

/// Two-sample z-score of independent means.
pub fn z_score(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let se = (se_a * se_a + se_b * se_b).sqrt();
    if se == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b) / se
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn uniform_mean_and_determinism() {
        let f = |rng: &mut ChaCha8Rng, _r: u64, out: &mut [f64]| {
            out[0] = rng.random::<f64>();
        };
        let a = run_replicas(10_000, 1, 7, 1, f);
        let b = run_replicas(10_000, 1, 7, 1, f);
        assert_eq!(a, b);
        assert!((a.mean(0) - 0.5).abs() < 4.0 * a.stderr(0));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| run_replicas(10_000, 1, 7, 1, f));
        assert_eq!(a, c);
    }

    #[test]
    fn zero_variance_z() {
        assert_eq!(z_score(0.25, 0.0, 0.25, 0.0), 0.0);
        assert!(z_score(0.2, 0.0, 0.25, 0.0).is_infinite());
    }
}
