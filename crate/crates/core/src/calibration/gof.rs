use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::CalibrationError;
use crate::imbalance::PriceDist;

/// Smallest expected count per cell after tail pooling.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketGof {
    pub bucket: usize,
    /// Mean imbalance of the samples in the bucket.
    pub i_bar: f64,
    pub i_lo: f64,
    pub i_hi: f64,
    pub n: usize,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Some interior cell still has an expected count below five.
    pub sparse: bool,
}

/// Pearson chi-square test of the conditional move law, per equal-count
/// imbalance bucket. The model histogram of a bucket is `dp(i_bar)`, where
/// `i_bar` is the bucket's mean imbalance; tail cells are pooled inward until
/// each holds an expected count of at least five.
pub fn chi_square_gof(
    dp_plus: &PriceDist,
    x: &[i64],
    imb: &[f64],
    buckets: usize,
) -> Result<Vec<BucketGof>, CalibrationError> {
    if x.len() != imb.len() || x.len() < buckets || buckets == 0 {
        return Err(CalibrationError::InsufficientSamples {
            what: "goodness of fit",
            got: x.len(),
            need: buckets.max(1),
        });
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| imb[a].total_cmp(&imb[b]).then(a.cmp(&b)));
    let n = order.len();
    let dp_minus = dp_plus.mirrored();
    let x0 = dp_plus.max_move() as i64;
    (0..buckets)
        .map(|l| {
            let idx = &order[l * n / buckets..(l + 1) * n / buckets];
            let i_bar = idx.iter().map(|&m| imb[m]).sum::<f64>() / idx.len() as f64;
            let model = dp_plus.mix(&dp_minus, i_bar);
            let mut observed = vec![0.0; model.probs().len()];
            for &m in idx {
                observed[(x[m].clamp(-x0, x0) + x0) as usize] += 1.0;
            }
            let expected: Vec<f64> = model.probs().iter().map(|p| p * idx.len() as f64).collect();
            let (obs, exp) = pool_tails(&observed, &expected);
            let statistic: f64 =
                obs.iter().zip(&exp).filter(|(_, e)| **e > 0.0).map(|(o, e)| (o - e).powi(2) / e).sum();
            let dof = obs.len().saturating_sub(1);
            let p_value = if dof == 0 || statistic == 0.0 {
                1.0
            } else {
                1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic)
            };
            Ok(BucketGof {
                bucket: l + 1,
                i_bar,
                i_lo: imb[idx[0]],
                i_hi: imb[idx[idx.len() - 1]],
                n: idx.len(),
                statistic,
                dof,
                p_value,
                sparse: exp.iter().any(|e| *e < MIN_EXPECTED),
            })
        })
        .collect()
}

/// Merges outer cells into their inward neighbours until both tails carry at
/// least [`MIN_EXPECTED`] expected observations.
fn pool_tails(observed: &[f64], expected: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut obs = observed.to_vec();
    let mut exp = expected.to_vec();
    while exp.len() > 1 && exp[0] < MIN_EXPECTED {
        let (o, e) = (obs.remove(0), exp.remove(0));
        obs[0] += o;
        exp[0] += e;
    }
    while exp.len() > 1 && exp[exp.len() - 1] < MIN_EXPECTED {
        let (o, e) = (obs.pop().unwrap(), exp.pop().unwrap());
        *obs.last_mut().unwrap() += o;
        *exp.last_mut().unwrap() += e;
    }
    (obs, exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_fit_scores_zero() {
        let dp = PriceDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        // at i = 1/2 the model is (0.35, 0.3, 0.35)
        let mut x = vec![-1; 35];
        x.extend(vec![0; 30]);
        x.extend(vec![1; 35]);
        let imb = vec![0.5; 100];
        let g = chi_square_gof(&dp, &x, &imb, 1).unwrap();
        assert!(g[0].statistic.abs() < 1e-12);
        assert_eq!(g[0].p_value, 1.0);
        assert_eq!(g[0].dof, 2);
    }

    #[test]
    fn tails_pool_inward() {
        let (o, e) = pool_tails(&[1.0, 2.0, 50.0, 3.0, 0.0], &[1.0, 6.0, 50.0, 6.0, 2.0]);
        assert_eq!(o, vec![3.0, 50.0, 3.0]);
        assert_eq!(e, vec![7.0, 50.0, 8.0]);
        let (o, e) = pool_tails(&[1.0, 2.0, 50.0, 3.0, 0.0], &[1.0, 3.0, 50.0, 2.0, 1.0]);
        assert_eq!((o, e), (vec![56.0], vec![57.0]));
        let (o, e) = pool_tails(&[10.0, 20.0], &[10.0, 20.0]);
        assert_eq!((o.len(), e.len()), (2, 2));
    }

    #[test]
    fn null_data_passes_most_buckets() {
        let dp = PriceDist::new(vec![0.03, 0.1, 0.2, 0.3, 0.2, 0.12, 0.05]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (mut x, mut imb) = (Vec::new(), Vec::new());
        for _ in 0..200_000 {
            let i: f64 = rng.random_range(0.2..0.8);
            let law = dp.mix(&dp.mirrored(), i);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = 3;
            for (y, p) in law.iter() {
                acc += p;
                if u < acc {
                    pick = y;
                    break;
                }
            }
            x.push(pick);
            imb.push(i);
        }
        let g = chi_square_gof(&dp, &x, &imb, 20).unwrap();
        let passed = g.iter().filter(|b| b.p_value > 0.05).count();
        assert!(passed >= 18, "{passed}/20");
        assert!(g.iter().all(|b| b.dof == 6 && !b.sparse));
        assert!(g.windows(2).all(|w| w[0].i_bar < w[1].i_bar));
    }
}
