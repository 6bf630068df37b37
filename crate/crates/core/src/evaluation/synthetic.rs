//! Planted-dependency count matrices with known ground truth.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventId, Label};
use crate::fingerprint::{fingerprint, mix_seed};
use crate::sequencer::EventCountMatrix;

/// `coeff * x[source]^power`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub source: usize,
    pub coeff: f64,
    #[serde(default = "one")]
    pub power: u32,
}

fn one() -> u32 {
    1
}

/// `x[target] = intercept + sum(terms) + noise`, rounded and clamped at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependencyDef {
    pub target: usize,
    #[serde(default)]
    pub intercept: f64,
    pub terms: Vec<Term>,
}

impl DependencyDef {
    pub fn expected(&self, row: &[u32]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * (row[t.source] as f64).powi(t.power as i32))
            .sum::<f64>()
            + self.intercept
    }
}

/// Uniform integer draw on `low..=high` for an event no definition targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub event: usize,
    pub low: u32,
    pub high: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    /// Multiples of the noise standard deviation.
    Sigma(f64),
    /// Raw counts.
    Absolute(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Move a dependency target towards its training mean, so its count
    /// stays inside the normal marginal range.
    TowardMean,
    Up,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub events: usize,
    pub marginals: Vec<Marginal>,
    pub dependencies: Vec<DependencyDef>,
    /// Noise is uniform on the integers `-k..=k`.
    pub noise_half_width: u32,
    pub anomaly_rate: f64,
    pub magnitude: Magnitude,
    pub direction: Direction,
    /// Chance that an anomaly shifts an unrelated event instead of breaking
    /// a dependency (when both kinds are available).
    pub proximity_share: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// Ten events: `e6 = e0 + e1`, `e7 = 2 e2`, `e8 = e3^2`, the rest
    /// independent; anomalies at 10% with 5-sigma perturbations.
    fn default() -> Self {
        let m = |event, low, high| Marginal { event, low, high };
        let t = |source, coeff, power| Term { source, coeff, power };
        Self {
            events: 10,
            marginals: vec![m(0, 1, 5), m(1, 1, 5), m(2, 1, 6), m(3, 0, 4), m(4, 0, 3), m(5, 2, 6), m(9, 0, 5)],
            dependencies: vec![
                DependencyDef {
                    target: 6,
                    intercept: 0.0,
                    terms: vec![t(0, 1.0, 1), t(1, 1.0, 1)],
                },
                DependencyDef {
                    target: 7,
                    intercept: 0.0,
                    terms: vec![t(2, 2.0, 1)],
                },
                DependencyDef {
                    target: 8,
                    intercept: 0.0,
                    terms: vec![t(3, 1.0, 2)],
                },
            ],
            noise_half_width: 1,
            anomaly_rate: 0.1,
            magnitude: Magnitude::Sigma(5.0),
            direction: Direction::TowardMean,
            proximity_share: 0.5,
            n_train: 1000,
            n_val: 500,
            n_test: 500,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn noise_sigma(&self) -> f64 {
        let k = self.noise_half_width as f64;
        (k * (k + 1.0) / 3.0).sqrt()
    }

    /// Perturbation size in counts (at least 1).
    pub fn magnitude_counts(&self) -> u32 {
        let raw = match self.magnitude {
            Magnitude::Sigma(s) => s * self.noise_sigma(),
            Magnitude::Absolute(v) => v,
        };
        raw.round().max(1.0) as u32
    }

    /// Events that are neither a dependency target nor one of its sources.
    pub fn independent_events(&self) -> BTreeSet<usize> {
        let linked: BTreeSet<usize> = self
            .dependencies
            .iter()
            .flat_map(|d| std::iter::once(d.target).chain(d.terms.iter().map(|t| t.source)))
            .collect();
        (0..self.events).filter(|e| !linked.contains(e)).collect()
    }

    /// Blankets of the planted graph: parents, children and co-parents.
    pub fn true_blankets(&self) -> BTreeMap<EventId, BTreeSet<EventId>> {
        let mut mb: BTreeMap<EventId, BTreeSet<EventId>> =
            (0..self.events as u32).map(|e| (EventId(e), BTreeSet::new())).collect();
        for d in &self.dependencies {
            let parents: Vec<usize> = d.terms.iter().map(|t| t.source).collect();
            for &p in &parents {
                mb.get_mut(&EventId(d.target as u32)).unwrap().insert(EventId(p as u32));
                mb.get_mut(&EventId(p as u32)).unwrap().insert(EventId(d.target as u32));
                for &q in &parents {
                    if p != q {
                        mb.get_mut(&EventId(p as u32)).unwrap().insert(EventId(q as u32));
                    }
                }
            }
        }
        mb
    }

    fn order(&self) -> Result<Vec<usize>> {
        let bad = |msg: String| Err(Error::Config(format!("synthetic spec: {msg}")));
        let mut defined = vec![0u8; self.events];
        for m in &self.marginals {
            if m.event >= self.events || m.low > m.high {
                return bad(format!("invalid marginal for event {}", m.event));
            }
            defined[m.event] += 1;
        }
        for d in &self.dependencies {
            if d.target >= self.events || d.terms.iter().any(|t| t.source >= self.events) {
                return bad(format!("dependency for event {} references unknown events", d.target));
            }
            defined[d.target] += 1;
        }
        if let Some(e) = defined.iter().position(|&c| c != 1) {
            return bad(format!("event {e} needs exactly one marginal or dependency"));
        }
        // Kahn's algorithm over source -> target edges
        let mut indegree = vec![0usize; self.events];
        for d in &self.dependencies {
            indegree[d.target] = d.terms.iter().map(|t| t.source).collect::<BTreeSet<_>>().len();
        }
        let mut ready: Vec<usize> = (0..self.events).filter(|&e| indegree[e] == 0).collect();
        let mut order = Vec::with_capacity(self.events);
        while let Some(e) = ready.pop() {
            order.push(e);
            for d in &self.dependencies {
                if d.terms.iter().any(|t| t.source == e) {
                    indegree[d.target] -= 1;
                    if indegree[d.target] == 0 {
                        ready.push(d.target);
                    }
                }
            }
        }
        if order.len() != self.events {
            return bad("dependency graph has a cycle".into());
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.anomaly_rate) {
            return Err(Error::Config(format!(
                "anomaly rate must lie in [0, 1), got {}",
                self.anomaly_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.proximity_share) {
            return Err(Error::Config("proximity share must lie in [0, 1]".into()));
        }
        self.order().map(|_| ())
    }

    pub fn source(&self) -> String {
        format!("synthetic:{}", fingerprint(self))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Dependency,
    Proximity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedAnomaly {
    pub kind: AnomalyKind,
    pub event_id: EventId,
    /// Signed count change applied to the event.
    pub shift: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticLabel {
    pub sequence_id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<PlantedAnomaly>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub spec: SyntheticSpec,
    pub train: EventCountMatrix,
    pub val: EventCountMatrix,
    pub test: EventCountMatrix,
    pub labels: Vec<SyntheticLabel>,
}

struct Sampler<'a> {
    spec: &'a SyntheticSpec,
    order: Vec<usize>,
}

impl Sampler<'_> {
    fn normal_row(&self, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let spec = self.spec;
        let mut row = vec![0u32; spec.events];
        let k = spec.noise_half_width as i64;
        for &e in &self.order {
            if let Some(m) = spec.marginals.iter().find(|m| m.event == e) {
                row[e] = rng.gen_range(m.low..=m.high);
            } else {
                let d = spec.dependencies.iter().find(|d| d.target == e).unwrap();
                let noise = if k > 0 { rng.gen_range(-k..=k) } else { 0 };
                row[e] = (d.expected(&row) + noise as f64).round().max(0.0) as u32;
            }
        }
        row
    }
}

fn matrix(spec: &SyntheticSpec, prefix: &str, rows: Vec<(Vec<u32>, Label)>) -> Result<EventCountMatrix> {
    EventCountMatrix::from_rows(
        (0..spec.events as u32).map(EventId).collect(),
        spec.source(),
        rows.into_iter()
            .enumerate()
            .map(|(i, (row, label))| (format!("{prefix}-{i:06}"), label, row)),
    )
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let sampler = Sampler {
        spec,
        order: spec.order()?,
    };
    let draw = |salt: u64, n: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, salt));
        (0..n).map(|_| (sampler.normal_row(&mut rng), Label::Normal)).collect::<Vec<_>>()
    };
    let train = draw(1, spec.n_train);
    let val = draw(2, spec.n_val);

    let mut means = vec![0.0; spec.events];
    for (row, _) in &train {
        for (m, &c) in means.iter_mut().zip(row) {
            *m += c as f64;
        }
    }
    means.iter_mut().for_each(|m| *m /= spec.n_train.max(1) as f64);

    let targets: Vec<usize> = spec.dependencies.iter().map(|d| d.target).collect();
    let independent: Vec<usize> = spec.independent_events().into_iter().collect();
    let magnitude = spec.magnitude_counts();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 3));
    let mut test = Vec::with_capacity(spec.n_test);
    let mut labels = Vec::with_capacity(spec.n_test);
    for i in 0..spec.n_test {
        let mut row = sampler.normal_row(&mut rng);
        let anomalous = (!targets.is_empty() || !independent.is_empty()) && rng.gen_bool(spec.anomaly_rate);
        let anomaly = anomalous.then(|| {
            let proximity = targets.is_empty() || (!independent.is_empty() && rng.gen_bool(spec.proximity_share));
            if proximity {
                let e = independent[rng.gen_range(0..independent.len())];
                let high = spec.marginals.iter().find(|m| m.event == e).unwrap().high;
                let shift = (high + magnitude) as i64 - row[e] as i64;
                row[e] = high + magnitude;
                PlantedAnomaly {
                    kind: AnomalyKind::Proximity,
                    event_id: EventId(e as u32),
                    shift,
                }
            } else {
                let e = targets[rng.gen_range(0..targets.len())];
                let down = spec.direction == Direction::TowardMean
                    && row[e] as f64 > means[e]
                    && row[e] >= magnitude;
                let shift = if down { -(magnitude as i64) } else { magnitude as i64 };
                row[e] = (row[e] as i64 + shift) as u32;
                PlantedAnomaly {
                    kind: AnomalyKind::Dependency,
                    event_id: EventId(e as u32),
                    shift,
                }
            }
        });
        let label = if anomaly.is_some() { Label::Anomalous } else { Label::Normal };
        labels.push(SyntheticLabel {
            sequence_id: format!("test-{i:06}"),
            label,
            anomaly,
        });
        test.push((row, label));
    }

    Ok(SyntheticDataset {
        spec: spec.clone(),
        train: matrix(spec, "train", train)?,
        val: matrix(spec, "val", val)?,
        test: matrix(spec, "test", test)?,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_spec() -> SyntheticSpec {
        SyntheticSpec {
            events: 3,
            marginals: vec![
                Marginal { event: 1, low: 0, high: 9 },
                Marginal { event: 2, low: 0, high: 9 },
            ],
            dependencies: vec![DependencyDef {
                target: 0,
                intercept: 0.0,
                terms: vec![
                    Term { source: 1, coeff: 1.0, power: 1 },
                    Term { source: 2, coeff: 1.0, power: 1 },
                ],
            }],
            noise_half_width: 0,
            anomaly_rate: 0.3,
            magnitude: Magnitude::Absolute(10.0),
            direction: Direction::Up,
            proximity_share: 0.5,
            n_train: 50,
            n_val: 20,
            n_test: 200,
            seed: 3,
        }
    }

    #[test]
    fn planted_sum_violated_by_exactly_ten() {
        let ds = generate_synthetic(&sum_spec()).unwrap();
        let mut planted = 0;
        for (i, l) in ds.labels.iter().enumerate() {
            let r = ds.test.row(i);
            let residual = (r[0] as i64 - (r[1] + r[2]) as i64).abs();
            if l.label.is_anomalous() {
                planted += 1;
                assert_eq!(residual, 10);
            } else {
                assert_eq!(residual, 0);
            }
        }
        assert!(planted > 20);
    }

    #[test]
    fn zero_rate_all_normal() {
        let spec = SyntheticSpec {
            anomaly_rate: 0.0,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic(&spec).unwrap();
        assert!(ds.labels.iter().all(|l| l.label == Label::Normal));
        assert_eq!(ds.test.n_rows(), 500);
    }

    #[test]
    fn default_spec_shape() {
        let spec = SyntheticSpec::default();
        assert!((spec.noise_sigma() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(spec.magnitude_counts(), 4);
        assert_eq!(spec.independent_events(), [4, 5, 9].into_iter().collect());
        let dependent = spec.true_blankets().values().filter(|s| !s.is_empty()).count();
        assert_eq!(dependent, 7);
        let ds = generate_synthetic(&spec).unwrap();
        assert_eq!((ds.train.n_rows(), ds.val.n_rows(), ds.test.n_rows()), (1000, 500, 500));
    }

    #[test]
    fn rejects_cycles_and_gaps() {
        let mut spec = sum_spec();
        spec.marginals.pop();
        spec.dependencies.push(DependencyDef {
            target: 2,
            intercept: 0.0,
            terms: vec![Term { source: 0, coeff: 1.0, power: 1 }],
        });
        assert!(spec.validate().unwrap_err().to_string().contains("cycle"));
        let mut gap = sum_spec();
        gap.marginals.pop();
        assert!(gap.validate().is_err());
    }

    #[test]
    fn seed_determinism() {
        let a = generate_synthetic(&SyntheticSpec::default()).unwrap();
        let b = generate_synthetic(&SyntheticSpec::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticSpec::default().with_seed(43)).unwrap();
        assert_ne!(a.test, c.test);
    }
}
