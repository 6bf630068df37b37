//! Incremental association Markov blanket search (grow, then shrink).

use super::ci::CorrelationMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlanketSearch {
    /// Column indices, ascending.
    pub members: Vec<usize>,
    pub degenerate: bool,
    pub warning: Option<String>,
}

/// Conditioning set: the `cap` members with the strongest association at
/// admission (ties to the lower column), further capped so the Fisher-z test
/// stays valid for `n` samples.
fn conditioning<T: Scalar>(members: &[(usize, T)], cap: usize, n: usize) -> Vec<usize> {
    let limit = cap.min(n.saturating_sub(4));
    if members.len() <= limit {
        return members.iter().map(|&(c, _)| c).collect();
    }
    let mut ranked = members.to_vec();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    ranked.truncate(limit);
    ranked.into_iter().map(|(c, _)| c).collect()
}

/// Markov blanket of column `focused`.
pub fn discover_mb<T: Scalar>(corr: &CorrelationMatrix<T>, focused: usize, alpha: f64, max_cond: usize) -> BlanketSearch {
    let m = corr.n_vars();
    let n = corr.n_samples();
    if n <= 3 {
        return BlanketSearch {
            warning: Some(format!("{n} samples are too few for any conditional independence test")),
            ..Default::default()
        };
    }
    if corr.is_constant(focused) {
        return BlanketSearch {
            degenerate: true,
            ..Default::default()
        };
    }
    let mut degenerate = false;
    let mut members: Vec<(usize, T)> = Vec::new();

    // grow
    loop {
        let cond = conditioning(&members, max_cond, n);
        let mut best: Option<(usize, T, bool)> = None;
        for c in 0..m {
            if c == focused || members.iter().any(|&(x, _)| x == c) {
                continue;
            }
            let res = corr
                .ci_test(focused, c, &cond, alpha)
                .expect("conditioning set respects test preconditions");
            degenerate |= res.degenerate && !corr.is_constant(c);
            if best.is_none_or(|(_, s, _)| res.statistic > s) {
                best = Some((c, res.statistic, res.independent));
            }
        }
        match best {
            Some((c, stat, false)) => members.push((c, stat)),
            _ => break,
        }
    }

    // shrink
    'shrink: loop {
        for idx in 0..members.len() {
            let c = members[idx].0;
            let rest: Vec<(usize, T)> = members.iter().copied().filter(|&(x, _)| x != c).collect();
            let cond = conditioning(&rest, max_cond, n);
            let res = corr
                .ci_test(focused, c, &cond, alpha)
                .expect("conditioning set respects test preconditions");
            if res.independent {
                members.remove(idx);
                continue 'shrink;
            }
        }
        break;
    }

    let mut members: Vec<usize> = members.into_iter().map(|(c, _)| c).collect();
    members.sort_unstable();
    BlanketSearch {
        members,
        degenerate,
        warning: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn chain(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut c = Vec::new();
        for _ in 0..n {
            let x = gauss(&mut rng);
            let y = 0.9 * x + gauss(&mut rng);
            let z = -0.8 * y + gauss(&mut rng);
            a.push(x);
            b.push(y);
            c.push(z);
        }
        vec![a, b, c]
    }

    #[test]
    fn chain_blankets() {
        let corr = CorrelationMatrix::from_columns(&chain(5000, 1));
        assert_eq!(discover_mb(&corr, 0, 0.05, 8).members, [1]);
        assert_eq!(discover_mb(&corr, 1, 0.05, 8).members, [0, 2]);
        assert_eq!(discover_mb(&corr, 2, 0.05, 8).members, [1]);
    }

    #[test]
    fn collider_includes_spouse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..5000 {
            let x = gauss(&mut rng);
            let y = gauss(&mut rng);
            a.push(x);
            b.push(y);
            c.push(x + y + 0.5 * gauss(&mut rng));
        }
        let corr = CorrelationMatrix::from_columns(&[a, b, c]);
        assert_eq!(discover_mb(&corr, 0, 0.05, 8).members, [1, 2]);
    }

    #[test]
    fn constant_focus_and_tiny_samples() {
        let corr = CorrelationMatrix::from_columns(&[vec![1.0; 10], (0..10).map(f64::from).collect()]);
        let r = discover_mb(&corr, 0, 0.05, 8);
        assert!(r.members.is_empty() && r.degenerate);
        let corr = CorrelationMatrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 4.0]]);
        let r = discover_mb(&corr, 0, 0.05, 8);
        assert!(r.members.is_empty() && r.warning.is_some());
    }

    #[test]
    fn conditioning_cap_keeps_strongest() {
        let members = [(4, 1.0), (2, 5.0), (7, 3.0), (1, 5.0)];
        assert_eq!(conditioning(&members, 2, 1000), vec![1, 2]);
        assert_eq!(conditioning(&members, 8, 1000).len(), 4);
        assert_eq!(conditioning(&members, 8, 6), vec![1, 2]);
    }
}
