//! Flat space-time geometry in units where c = 1.
//!
//! Events carry one time coordinate and one to three spatial coordinates.
//! Causal cones are closed: lightlike-separated events count as causally
//! related. All comparisons on slacks use the absolute tolerance
//! [`SLACK_TOLERANCE`].

mod cone;
mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cone::{binary_condition, cone_join_1p1, ConeContainmentVerdict, RIDGE_SAMPLES};
pub use oracle::{binary_condition_oracle, SearchBox};

pub(crate) use cone::ridge_slack_probe;

/// Absolute tolerance applied to slack comparisons and lightlike classification.
pub const SLACK_TOLERANCE: f64 = 1e-9;

/// Largest supported number of spatial dimensions.
pub const MAX_SPATIAL_DIMENSION: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("spatial dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("spatial dimension must be 1, 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("operation requires 1+1 dimensions, got {0} spatial")]
    RequiresOnePlusOne(usize),
    #[error("event coordinates must be finite")]
    NonFinite,
    #[error("boost speed {0} is not below the speed of light")]
    Superluminal(f64),
    #[error("search box is empty along axis {0}")]
    EmptyBox(usize),
    #[error("search box does not contain event {0}")]
    BoxMissesApex(usize),
    #[error("grid step must be positive and finite, got {0}")]
    NonPositiveStep(f64),
}

/// A point in flat space-time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEvent", into = "RawEvent")]
pub struct Event {
    t: f64,
    x: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    t: f64,
    x: Vec<f64>,
}

impl TryFrom<RawEvent> for Event {
    type Error = GeometryError;

    fn try_from(raw: RawEvent) -> Result<Self, Self::Error> {
        Event::new(raw.t, raw.x)
    }
}

impl From<Event> for RawEvent {
    fn from(e: Event) -> Self {
        RawEvent { t: e.t, x: e.x }
    }
}

impl Event {
    pub fn new(t: f64, x: Vec<f64>) -> Result<Self, GeometryError> {
        if x.is_empty() || x.len() > MAX_SPATIAL_DIMENSION {
            return Err(GeometryError::UnsupportedDimension(x.len()));
        }
        if !t.is_finite() || x.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Event { t, x })
    }

    /// Event in 1+1 dimensions.
    ///
    /// Panics if a coordinate is not finite.
    pub fn line(t: f64, x: f64) -> Self {
        Self::new(t, vec![x]).expect("finite 1+1 event")
    }

    /// Event in 2+1 dimensions.
    ///
    /// Panics if a coordinate is not finite.
    pub fn plane(t: f64, x: f64, y: f64) -> Self {
        Self::new(t, vec![x, y]).expect("finite 2+1 event")
    }

    /// Event in 3+1 dimensions.
    ///
    /// Panics if a coordinate is not finite.
    pub fn space(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self::new(t, vec![x, y, z]).expect("finite 3+1 event")
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    /// Same spatial position, time shifted by `dt`.
    pub fn delayed(&self, dt: f64) -> Event {
        Event {
            t: self.t + dt,
            x: self.x.clone(),
        }
    }

    /// Light-cone coordinates `(u, v) = (t + x, t - x)` of a 1+1 event.
    pub fn light_cone_coordinates(&self) -> Result<(f64, f64), GeometryError> {
        match self.x.as_slice() {
            [x] => Ok((self.t + x, self.t - x)),
            other => Err(GeometryError::RequiresOnePlusOne(other.len())),
        }
    }

    pub(crate) fn from_parts_unchecked(t: f64, x: Vec<f64>) -> Event {
        debug_assert!(!x.is_empty() && x.len() <= MAX_SPATIAL_DIMENSION);
        Event { t, x }
    }
}

pub(crate) fn check_dimensions(events: &[&Event]) -> Result<usize, GeometryError> {
    let d = events[0].dimension();
    for e in &events[1..] {
        if e.dimension() != d {
            return Err(GeometryError::DimensionMismatch {
                left: d,
                right: e.dimension(),
            });
        }
    }
    Ok(d)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn spatial_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `(t_q - t_p)^2 - |x_q - x_p|^2`, signature (+, -, ..., -).
pub fn interval_squared(p: &Event, q: &Event) -> Result<f64, GeometryError> {
    check_dimensions(&[p, q])?;
    let dt = q.t - p.t;
    let dx2: f64 = p.x.iter().zip(&q.x).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(dt * dt - dx2)
}

/// Slack of `q` with respect to the future cone of `apex`:
/// `(t_q - t_apex) - |x_q - x_apex|`. Non-negative iff `q` lies in the
/// closed future cone. Dimensions are assumed to match.
pub fn future_slack(apex: &Event, q: &Event) -> f64 {
    (q.t - apex.t) - spatial_distance(&q.x, &apex.x)
}

/// Where the second event sits relative to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalRelation {
    TimelikeFuture,
    LightlikeFuture,
    Spacelike,
    LightlikePast,
    TimelikePast,
    Coincident,
}

impl CausalRelation {
    /// The relation seen from the other event.
    pub fn reversed(self) -> Self {
        use CausalRelation::*;
        match self {
            TimelikeFuture => TimelikePast,
            LightlikeFuture => LightlikePast,
            LightlikePast => LightlikeFuture,
            TimelikePast => TimelikeFuture,
            Spacelike => Spacelike,
            Coincident => Coincident,
        }
    }

    /// True when the second event lies in the closed future cone of the first.
    pub fn is_causal_future(self) -> bool {
        matches!(
            self,
            Self::TimelikeFuture | Self::LightlikeFuture | Self::Coincident
        )
    }

    pub fn is_causal_past(self) -> bool {
        self.reversed().is_causal_future()
    }
}

/// Classifies `q` relative to `p`.
///
/// Events within [`SLACK_TOLERANCE`] of each other in both time and space
/// are coincident; a slack within the tolerance of zero is lightlike.
pub fn causal_relation(p: &Event, q: &Event) -> Result<CausalRelation, GeometryError> {
    check_dimensions(&[p, q])?;
    let dt = q.t - p.t;
    let dist = spatial_distance(&p.x, &q.x);
    if dt.abs() <= SLACK_TOLERANCE && dist <= SLACK_TOLERANCE {
        return Ok(CausalRelation::Coincident);
    }
    if dt == 0.0 {
        return Ok(CausalRelation::Spacelike);
    }
    let slack = dt.abs() - dist;
    let future = dt > 0.0;
    Ok(if slack > SLACK_TOLERANCE {
        if future {
            CausalRelation::TimelikeFuture
        } else {
            CausalRelation::TimelikePast
        }
    } else if slack >= -SLACK_TOLERANCE {
        if future {
            CausalRelation::LightlikeFuture
        } else {
            CausalRelation::LightlikePast
        }
    } else {
        CausalRelation::Spacelike
    })
}

/// Whether `q` lies in the closed future cone of `apex`.
pub fn in_future_cone(apex: &Event, q: &Event) -> Result<bool, GeometryError> {
    Ok(causal_relation(apex, q)?.is_causal_future())
}

/// A pure Lorentz boost to a frame moving with velocity `v` (|v| < 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Boost {
    v: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Boost {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Boost::new(v)
    }
}

impl From<Boost> for Vec<f64> {
    fn from(b: Boost) -> Self {
        b.v
    }
}

impl Boost {
    pub fn new(v: Vec<f64>) -> Result<Self, GeometryError> {
        if v.is_empty() || v.len() > MAX_SPATIAL_DIMENSION {
            return Err(GeometryError::UnsupportedDimension(v.len()));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let speed = norm(&v);
        if speed >= 1.0 {
            return Err(GeometryError::Superluminal(speed));
        }
        Ok(Boost { v })
    }

    pub fn identity(dimension: usize) -> Result<Self, GeometryError> {
        Self::new(vec![0.0; dimension])
    }

    pub fn velocity(&self) -> &[f64] {
        &self.v
    }

    pub fn speed(&self) -> f64 {
        norm(&self.v)
    }

    pub fn gamma(&self) -> f64 {
        let v2 = dot(&self.v, &self.v);
        1.0 / (1.0 - v2).sqrt()
    }

    /// Coordinates of `e` in the boosted frame.
    pub fn apply(&self, e: &Event) -> Result<Event, GeometryError> {
        if e.dimension() != self.v.len() {
            return Err(GeometryError::DimensionMismatch {
                left: e.dimension(),
                right: self.v.len(),
            });
        }
        let v2 = dot(&self.v, &self.v);
        if v2 == 0.0 {
            return Ok(e.clone());
        }
        let gamma = self.gamma();
        let vx = dot(&self.v, &e.x);
        let t = gamma * (e.t - vx);
        // x' = x + ((gamma - 1) (v.x) / v^2 - gamma t) v
        let k = (gamma - 1.0) * vx / v2 - gamma * e.t;
        let x =
            e.x.iter()
                .zip(&self.v)
                .map(|(xi, vi)| xi + k * vi)
                .collect();
        Ok(Event::from_parts_unchecked(t, x))
    }
}

/// Lorentz boost of a single event; see [`Boost::apply`].
pub fn boost(e: &Event, b: &Boost) -> Result<Event, GeometryError> {
    b.apply(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        let p = Event::line(0.0, 0.0);
        assert_eq!(interval_squared(&p, &p).unwrap(), 0.0);
        assert_eq!(interval_squared(&p, &Event::line(1.0, 1.0)).unwrap(), 0.0);
        let q = interval_squared(&Event::line(0.0, -1.0), &Event::line(3.0, 1.0)).unwrap();
        assert_eq!(q, 5.0);
    }

    #[test]
    fn interval_rejects_mixed_dimensions() {
        let err = interval_squared(&Event::line(0.0, 0.0), &Event::plane(0.0, 0.0, 0.0));
        assert_eq!(
            err,
            Err(GeometryError::DimensionMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn relation_examples() {
        let o = Event::line(0.0, 0.0);
        use CausalRelation::*;
        assert_eq!(
            causal_relation(&o, &Event::line(2.0, 0.0)).unwrap(),
            TimelikeFuture
        );
        assert_eq!(
            causal_relation(&o, &Event::line(0.0, 5.0)).unwrap(),
            Spacelike
        );
        assert_eq!(
            causal_relation(&o, &Event::line(1.0, 1.0)).unwrap(),
            LightlikeFuture
        );
        assert_eq!(
            causal_relation(&o, &Event::line(-1.0, 1.0)).unwrap(),
            LightlikePast
        );
        assert_eq!(
            causal_relation(&o, &Event::line(-3.0, 1.0)).unwrap(),
            TimelikePast
        );
        assert_eq!(causal_relation(&o, &o).unwrap(), Coincident);
    }

    #[test]
    fn event_validation() {
        assert_eq!(
            Event::new(0.0, vec![]),
            Err(GeometryError::UnsupportedDimension(0))
        );
        assert_eq!(
            Event::new(0.0, vec![0.0; 4]),
            Err(GeometryError::UnsupportedDimension(4))
        );
        assert_eq!(
            Event::new(f64::NAN, vec![0.0]),
            Err(GeometryError::NonFinite)
        );
        let e: Result<Event, _> = serde_json::from_str(r#"{"t": 1.0, "x": []}"#);
        assert!(e.is_err());
    }

    #[test]
    fn boost_examples() {
        let e = Event::line(0.0, 2.0);
        let still = Boost::new(vec![0.0]).unwrap();
        assert_eq!(still.apply(&e).unwrap(), e);

        let b = Boost::new(vec![0.5]).unwrap();
        let moved = b.apply(&e).unwrap();
        assert!((moved.t() - (-2.0 / 3f64.sqrt())).abs() < 1e-12);
        assert!((moved.x()[0] - 4.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn boost_rejects_light_speed() {
        assert_eq!(Boost::new(vec![1.0]), Err(GeometryError::Superluminal(1.0)));
        assert!(Boost::new(vec![0.8, 0.7]).is_err());
        let b = Boost::new(vec![0.1]).unwrap();
        assert!(b.apply(&Event::plane(0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn simultaneous_events_reorder() {
        let a = Event::line(0.0, -2.0);
        let j = Event::line(0.0, 0.0);
        let b = Event::line(0.0, 2.0);
        let boost = Boost::new(vec![0.5]).unwrap();
        let [a2, j2, b2] = [&a, &j, &b].map(|e| boost.apply(e).unwrap());
        assert!(b2.t() < j2.t() && j2.t() < a2.t());
    }

    #[test]
    fn light_cone_coordinates_need_one_spatial_axis() {
        assert_eq!(
            Event::line(1.0, 2.0).light_cone_coordinates().unwrap(),
            (3.0, -1.0)
        );
        assert!(Event::plane(0.0, 0.0, 0.0)
            .light_cone_coordinates()
            .is_err());
    }
}
