use std::collections::BTreeMap;

use super::sample::{EstimatorConfig, MIEstimate};
use crate::error::{Error, Result};

fn plugin_config() -> EstimatorConfig {
    EstimatorConfig { k_neighbors: 0, jitter_amplitude: 0.0, ..Default::default() }
}

/// Plug-in entropy Σ −p log p of the empirical label distribution, in nats.
pub fn plugin_discrete_entropy<T: Ord + Copy>(x: &[T]) -> Result<MIEstimate> {
    if x.is_empty() {
        return Err(Error::shape("plug-in entropy of an empty sample"));
    }
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for &v in x {
        *counts.entry(v).or_default() += 1;
    }
    let n = x.len() as f64;
    let value = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(MIEstimate { value, config: plugin_config(), n_used: x.len() })
}

/// Exact plug-in mutual information Σ p(a,b) log[p(a,b) / p(a)p(b)] from
/// empirical joint counts, in nats.
pub fn plugin_discrete_mi<A: Ord + Copy, B: Ord + Copy>(x: &[A], y: &[B]) -> Result<MIEstimate> {
    if x.is_empty() {
        return Err(Error::shape("plug-in MI of an empty sample"));
    }
    if x.len() != y.len() {
        return Err(Error::shape(format!("plug-in MI: lengths {} and {} differ", x.len(), y.len())));
    }
    let mut joint: BTreeMap<(A, B), usize> = BTreeMap::new();
    let mut px: BTreeMap<A, usize> = BTreeMap::new();
    let mut py: BTreeMap<B, usize> = BTreeMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *px.entry(a).or_default() += 1;
        *py.entry(b).or_default() += 1;
    }
    let n = x.len() as f64;
    let value = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pab = c as f64 / n;
            let pa = px[&a] as f64 / n;
            let pb = py[&b] as f64 / n;
            pab * (pab / (pa * pb)).ln()
        })
        .sum::<f64>()
        .max(0.0);
    Ok(MIEstimate { value, config: plugin_config(), n_used: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Samples realising the joint p(0,0)=p(1,1)=0.4, p(0,1)=p(1,0)=0.1.
    fn correlated_pair() -> (Vec<u8>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (a, b, count) in [(0, 0, 40), (1, 1, 40), (0, 1, 10), (1, 0, 10)] {
            x.extend(std::iter::repeat_n(a, count));
            y.extend(std::iter::repeat_n(b, count));
        }
        (x, y)
    }

    #[test]
    fn correlated_coins() {
        let (x, y) = correlated_pair();
        // 0.8 log 1.6 + 0.2 log 0.4
        let expected = 0.8 * 1.6_f64.ln() + 0.2 * 0.4_f64.ln();
        let got = plugin_discrete_mi(&x, &y).unwrap().value;
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.19274).abs() < 1e-5);
    }

    #[test]
    fn independent_coins_have_zero_mi() {
        let x: Vec<u8> = vec![0, 0, 1, 1];
        let y: Vec<u8> = vec![0, 1, 0, 1];
        assert_eq!(plugin_discrete_mi(&x, &y).unwrap().value, 0.0);
    }

    #[test]
    fn self_information_is_entropy() {
        let x: Vec<u8> = (0..1000).map(|i| (i % 2) as u8).collect();
        let mi = plugin_discrete_mi(&x, &x).unwrap().value;
        assert!((mi - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((plugin_discrete_entropy(&x).unwrap().value - mi).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let empty: Vec<u8> = vec![];
        assert!(plugin_discrete_mi(&empty, &empty).is_err());
        assert!(plugin_discrete_mi(&[0u8, 1], &[0u8]).is_err());
        assert!(plugin_discrete_entropy(&empty).is_err());
    }
}
