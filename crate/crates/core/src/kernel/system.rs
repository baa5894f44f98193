use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::KernelError;

/// Finite strictly increasing set of instants `t_0 < t_1 < ... < t_F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBase {
    instants: Vec<f64>,
}

/// Builds a [`TimeBase`], rejecting empty or non-strictly-ordered input.
///
/// A single instant is a valid time base.
pub fn make_timebase(instants: Vec<f64>) -> Result<TimeBase, KernelError> {
    TimeBase::new(instants)
}

impl TimeBase {
    pub fn new(instants: Vec<f64>) -> Result<Self, KernelError> {
        if instants.is_empty() {
            return Err(KernelError::Empty);
        }
        for (index, w) in instants.windows(2).enumerate() {
            // `!(a < b)` also rejects NaN.
            if !(w[0] < w[1]) {
                return Err(KernelError::NonStrictOrder { index: index + 1 });
            }
        }
        if instants[0].is_nan() {
            return Err(KernelError::NonStrictOrder { index: 0 });
        }
        Ok(Self { instants })
    }

    /// Integer ticks `0, 1, ..., count - 1`.
    pub fn ticks(count: usize) -> Result<Self, KernelError> {
        Self::new((0..count).map(|k| k as f64).collect())
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The largest index `F`.
    pub fn last_index(&self) -> usize {
        self.instants.len() - 1
    }
}

/// Attribute value. Labelled domains use `Int` as the label index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Int(v) => v as f64,
            Value::Real(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Integers `min..=max`.
    IntRange { min: i64, max: i64 },
    /// Enumerated labels, values are indices into the list.
    Labels(Vec<String>),
    /// Closed real interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
}

impl Domain {
    pub fn is_empty(&self) -> bool {
        match self {
            Domain::IntRange { min, max } => min > max,
            Domain::Labels(labels) => labels.is_empty(),
            Domain::Interval { lo, hi } => !(lo <= hi),
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, *value) {
            (Domain::IntRange { min, max }, Value::Int(v)) => *min <= v && v <= *max,
            (Domain::Labels(labels), Value::Int(v)) => v >= 0 && (v as usize) < labels.len(),
            (Domain::Interval { lo, hi }, v) => {
                let v = v.as_f64();
                *lo <= v && v <= *hi
            }
            _ => false,
        }
    }

    /// Whether every value in `[lo, hi]` that this domain can hold lies in it;
    /// used to check that interval constraints stay inside the domain.
    pub fn covers_range(&self, lo: f64, hi: f64) -> bool {
        if !(lo <= hi) {
            return false;
        }
        match self {
            Domain::IntRange { min, max } => *min as f64 <= lo && hi <= *max as f64,
            Domain::Labels(labels) => lo >= 0.0 && hi <= (labels.len() as f64 - 1.0),
            Domain::Interval { lo: a, hi: b } => *a <= lo && hi <= *b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub domain: Domain,
    #[serde(default)]
    pub inertial: Option<bool>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, domain: Domain) -> Self {
        Self { name: name.into(), domain, inertial: None }
    }
}

/// Attributes `a_1..a_n`, stored zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSet {
    attributes: Vec<Attribute>,
}

impl AttributeSet {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self, KernelError> {
        if attributes.is_empty() {
            return Err(KernelError::NoAttributes);
        }
        if let Some(index) = attributes.iter().position(|a| a.domain.is_empty()) {
            return Err(KernelError::EmptyDomain { index });
        }
        Ok(Self { attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, index: usize) -> Option<&Attribute> {
        self.attributes.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }
}

/// Value table `z(k, i)` over `K x I`, possibly still partial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<'a> {
    time: &'a TimeBase,
    attributes: &'a AttributeSet,
    cells: Vec<Option<Value>>,
}

impl<'a> Trajectory<'a> {
    pub fn new(time: &'a TimeBase, attributes: &'a AttributeSet) -> Self {
        Self { time, attributes, cells: alloc::vec![None; time.len() * attributes.len()] }
    }

    pub fn time(&self) -> &'a TimeBase {
        self.time
    }

    pub fn attributes(&self) -> &'a AttributeSet {
        self.attributes
    }

    fn offset(&self, instant: usize, attribute: usize) -> Result<usize, KernelError> {
        if instant >= self.time.len() || attribute >= self.attributes.len() {
            return Err(KernelError::CellOutOfRange { instant, attribute });
        }
        Ok(instant * self.attributes.len() + attribute)
    }

    pub fn set(&mut self, instant: usize, attribute: usize, value: Value) -> Result<(), KernelError> {
        let at = self.offset(instant, attribute)?;
        if !self.attributes.attributes[attribute].domain.contains(&value) {
            return Err(KernelError::DomainViolation { attribute });
        }
        self.cells[at] = Some(value);
        Ok(())
    }

    pub fn get(&self, instant: usize, attribute: usize) -> Option<Value> {
        self.offset(instant, attribute).ok().and_then(|at| self.cells[at])
    }

    /// First unset cell, if any.
    pub fn first_gap(&self) -> Option<(usize, usize)> {
        let n = self.attributes.len();
        self.cells.iter().position(Option::is_none).map(|p| (p / n, p % n))
    }

    pub fn is_total(&self) -> bool {
        self.first_gap().is_none()
    }
}
