use alloc::string::String;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::system::{AttributeSet, TimeBase, Trajectory, Value};
use super::KernelError;

/// Admissible values of one point constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSet {
    Values(Vec<Value>),
    /// Closed numeric range.
    Range {
        lo: f64,
        hi: f64,
    },
}

impl ValueSet {
    pub fn admits(&self, value: &Value) -> bool {
        match self {
            ValueSet::Values(values) => values.iter().any(|v| v == value),
            ValueSet::Range { lo, hi } => {
                let v = value.as_f64();
                *lo <= v && v <= *hi
            }
        }
    }
}

/// `z(instant, attribute) ∈ admissible`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub instant: usize,
    pub attribute: usize,
    pub admissible: ValueSet,
}

/// The set of trajectories satisfying every constraint. No constraints is the
/// sure event.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Event {
    pub constraints: Vec<Constraint>,
}

impl Event {
    pub fn sure() -> Self {
        Self::default()
    }

    pub fn point(instant: usize, attribute: usize, admissible: ValueSet) -> Self {
        Self { constraints: alloc::vec![Constraint { instant, attribute, admissible }] }
    }

    pub fn and(mut self, instant: usize, attribute: usize, admissible: ValueSet) -> Self {
        self.constraints.push(Constraint { instant, attribute, admissible });
        self
    }

    /// Checks every constraint against the time base and attribute domains.
    pub fn validate(&self, time: &TimeBase, attributes: &AttributeSet) -> Result<(), KernelError> {
        for (index, c) in self.constraints.iter().enumerate() {
            let Some(attr) = attributes.get(c.attribute) else {
                return Err(KernelError::InvalidEvent { index });
            };
            let in_domain = match &c.admissible {
                ValueSet::Values(values) => values.iter().all(|v| attr.domain.contains(v)),
                ValueSet::Range { lo, hi } => attr.domain.covers_range(*lo, *hi),
            };
            if c.instant >= time.len() || !in_domain {
                return Err(KernelError::InvalidEvent { index });
            }
        }
        Ok(())
    }
}

/// Whether the realised trajectory lies in the event.
pub fn event_occurred(event: &Event, trajectory: &Trajectory<'_>) -> Result<bool, KernelError> {
    if let Some((instant, attribute)) = trajectory.first_gap() {
        return Err(KernelError::IncompleteTrajectory { instant, attribute });
    }
    event.validate(trajectory.time(), trajectory.attributes())?;
    Ok(event
        .constraints
        .iter()
        .all(|c| trajectory.get(c.instant, c.attribute).is_some_and(|v| c.admissible.admits(&v))))
}

/// A stochastic system that can draw one realised trajectory from a random
/// stream.
pub trait TrajectorySampler {
    fn time_base(&self) -> &TimeBase;
    fn attributes(&self) -> &AttributeSet;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Trajectory<'_>, KernelError>;
}

/// Random stream of sample `index` under `seed`. Streams depend only on
/// `(seed, index)`, so samples may be drawn in any order or in parallel.
pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte Carlo estimate of `P(event)`: the fraction of `n_samples` drawn
/// trajectories on which the event occurs.
pub fn estimate_event_probability<S: TrajectorySampler + ?Sized>(
    sampler: &S,
    event: &Event,
    n_samples: usize,
    seed: u64,
) -> Result<f64, KernelError> {
    Ok(estimate_event_probabilities(sampler, core::slice::from_ref(event), n_samples, seed)?[0])
}

/// Estimates several events on one shared sample set.
pub fn estimate_event_probabilities<S: TrajectorySampler + ?Sized>(
    sampler: &S,
    events: &[Event],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>, KernelError> {
    if n_samples == 0 {
        return Err(KernelError::NoSamples);
    }
    for event in events {
        event.validate(sampler.time_base(), sampler.attributes())?;
    }
    let mut hits = alloc::vec![0usize; events.len()];
    for index in 0..n_samples as u64 {
        let mut rng = sample_stream(seed, index);
        let z = sampler.sample(&mut rng)?;
        for (event, hit) in events.iter().zip(hits.iter_mut()) {
            if event_occurred(event, &z)? {
                *hit += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / n_samples as f64).collect())
}

/// Convenience for generators that can fail with a message.
impl From<String> for KernelError {
    fn from(message: String) -> Self {
        KernelError::Generator(message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Attribute, Domain};
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    const HEADS: i64 = 0;
    const TAILS: i64 = 1;

    struct Coin {
        time: TimeBase,
        attrs: AttributeSet,
    }

    impl Coin {
        fn new(instants: usize) -> Self {
            Self {
                time: TimeBase::ticks(instants).unwrap(),
                attrs: AttributeSet::new(vec![Attribute::new(
                    "coin",
                    Domain::Labels(vec!["heads".into(), "tails".into(), "edge".into()]),
                )])
                .unwrap(),
            }
        }
    }

    impl TrajectorySampler for Coin {
        fn time_base(&self) -> &TimeBase {
            &self.time
        }
        fn attributes(&self) -> &AttributeSet {
            &self.attrs
        }
        fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Trajectory<'_>, KernelError> {
            let mut z = Trajectory::new(&self.time, &self.attrs);
            for k in 0..self.time.len() {
                let v = if rng.random::<bool>() { HEADS } else { TAILS };
                z.set(k, 0, Value::Int(v))?;
            }
            Ok(z)
        }
    }

    fn fixed<'a>(time: &'a TimeBase, attrs: &'a AttributeSet, value: i64) -> Trajectory<'a> {
        let mut z = Trajectory::new(time, attrs);
        for k in 0..time.len() {
            for i in 0..attrs.len() {
                z.set(k, i, Value::Int(value)).unwrap();
            }
        }
        z
    }

    #[test]
    fn point_event_matches() {
        let time = TimeBase::ticks(3).unwrap();
        let attrs = AttributeSet::new(vec![
            Attribute::new("a", Domain::IntRange { min: 0, max: 9 }),
            Attribute::new("b", Domain::IntRange { min: 0, max: 9 }),
        ])
        .unwrap();
        let ev = Event::point(2, 1, ValueSet::Values(vec![Value::Int(5)]));
        assert!(event_occurred(&ev, &fixed(&time, &attrs, 5)).unwrap());
        assert!(!event_occurred(&ev, &fixed(&time, &attrs, 4)).unwrap());
        assert!(event_occurred(&Event::sure(), &fixed(&time, &attrs, 4)).unwrap());
    }

    #[test]
    fn incomplete_trajectory_is_an_error() {
        let time = TimeBase::ticks(2).unwrap();
        let attrs = AttributeSet::new(vec![Attribute::new("a", Domain::IntRange { min: 0, max: 1 })]).unwrap();
        let mut z = Trajectory::new(&time, &attrs);
        z.set(0, 0, Value::Int(0)).unwrap();
        assert_eq!(
            event_occurred(&Event::sure(), &z),
            Err(KernelError::IncompleteTrajectory { instant: 1, attribute: 0 })
        );
    }

    #[test]
    fn invalid_constraints_are_rejected() {
        let time = TimeBase::ticks(2).unwrap();
        let attrs = AttributeSet::new(vec![Attribute::new("a", Domain::IntRange { min: 0, max: 1 })]).unwrap();
        let z = fixed(&time, &attrs, 1);
        let bad_value = Event::point(0, 0, ValueSet::Values(vec![Value::Int(7)]));
        assert_eq!(event_occurred(&bad_value, &z), Err(KernelError::InvalidEvent { index: 0 }));
        let bad_instant = Event::sure().and(5, 0, ValueSet::Range { lo: 0.0, hi: 1.0 });
        assert_eq!(event_occurred(&bad_instant, &z), Err(KernelError::InvalidEvent { index: 0 }));
    }

    #[test]
    fn sure_and_impossible_events() {
        let coin = Coin::new(1);
        assert_eq!(estimate_event_probability(&coin, &Event::sure(), 500, 3).unwrap(), 1.0);
        // "edge" is in the domain but never produced.
        let edge = Event::point(0, 0, ValueSet::Values(vec![Value::Int(2)]));
        assert_eq!(estimate_event_probability(&coin, &edge, 500, 3).unwrap(), 0.0);
        assert_eq!(estimate_event_probability(&coin, &edge, 0, 3), Err(KernelError::NoSamples));
    }

    #[test]
    fn fair_coin_probability() {
        // Binomial sd at n = 1e5 is 0.5 / sqrt(1e5) ≈ 0.00158, so ±0.01 is > 6 sd.
        let coin = Coin::new(1);
        let heads = Event::point(0, 0, ValueSet::Values(vec![Value::Int(HEADS)]));
        let p = estimate_event_probability(&coin, &heads, 100_000, 2024).unwrap();
        assert!((p - 0.5).abs() <= 0.01, "p = {p}");
        assert_eq!(p, estimate_event_probability(&coin, &heads, 100_000, 2024).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn complements_sum_to_one(seed in any::<u64>(), n in 1usize..400, k in 0usize..3) {
            let coin = Coin::new(3);
            let heads = Event::point(k, 0, ValueSet::Values(vec![Value::Int(HEADS)]));
            let not_heads = Event::point(k, 0, ValueSet::Values(vec![Value::Int(TAILS), Value::Int(2)]));
            let p = estimate_event_probabilities(&coin, &[heads, not_heads], n, seed).unwrap();
            prop_assert!((0.0..=1.0).contains(&p[0]));
            prop_assert!((p[0] + p[1] - 1.0).abs() <= 2.0 / (n as f64).sqrt());
        }

        #[test]
        fn conjunction_is_monotone(seed in any::<u64>(), picks in proptest::collection::vec((0usize..4, any::<bool>()), 0..6), cut in 0usize..6) {
            let coin = Coin::new(4);
            let mut rng = sample_stream(seed, 0);
            let z = coin.sample(&mut rng).unwrap();
            let strong = Event {
                constraints: picks
                    .iter()
                    .map(|&(k, h)| Constraint {
                        instant: k,
                        attribute: 0,
                        admissible: ValueSet::Values(vec![Value::Int(if h { HEADS } else { TAILS })]),
                    })
                    .collect(),
            };
            let weak = Event { constraints: strong.constraints[..cut.min(strong.constraints.len())].to_vec() };
            if event_occurred(&strong, &z).unwrap() {
                prop_assert!(event_occurred(&weak, &z).unwrap());
            }
        }
    }
}
