//! Canonical event data model.
//!
//! Polarity lives on the wire as `0`/`1` and is stored here as `-1`/`+1` so
//! that accumulations can sum it directly. Timestamps are microseconds from a
//! per-stream epoch.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EventError {
    #[error("event ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds { x: u32, y: u32, width: u16, height: u16 },
    #[error("empty event input")]
    EmptyInput,
    #[error("invalid sensor geometry {width}x{height}")]
    BadGeometry { width: u16, height: u16 },
    #[error("invalid wire polarity {0}")]
    BadPolarity(i64),
    #[error("window invariant violated: {0}")]
    Invalid(Violation),
}

/// Sensor resolution in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    width: u16,
    height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self, EventError> {
        if width == 0 || height == 0 {
            return Err(EventError::BadGeometry { width, height });
        }
        Ok(Self { width, height })
    }

    /// DAVIS-346 resolution.
    pub const DAVIS346: SensorGeometry = SensorGeometry {
        width: 346,
        height: 260,
    };

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width as u32 && y < self.height as u32
    }
}

/// Brightness-change sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(i8)]
pub enum Polarity {
    Negative = -1,
    Positive = 1,
}

impl Polarity {
    /// Maps the `0`/`1` wire encoding.
    pub fn from_wire(p: u8) -> Result<Self, EventError> {
        match p {
            0 => Ok(Polarity::Negative),
            1 => Ok(Polarity::Positive),
            other => Err(EventError::BadPolarity(other as i64)),
        }
    }

    pub fn from_signed(p: i64) -> Result<Self, EventError> {
        match p {
            -1 => Ok(Polarity::Negative),
            1 => Ok(Polarity::Positive),
            other => Err(EventError::BadPolarity(other)),
        }
    }

    pub fn to_wire(self) -> u8 {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }

    #[inline]
    pub fn sign(self) -> i32 {
        self as i8 as i32
    }

    pub fn is_positive(self) -> bool {
        self == Polarity::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }
}

/// An event as it arrives from a sensor or file, before canonicalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEvent {
    pub x: u32,
    pub y: u32,
    pub t: u64,
    /// `0` for a brightness decrease, `1` for an increase.
    pub p: u8,
}

impl RawEvent {
    pub fn new(x: u32, y: u32, t: u64, p: u8) -> Self {
        Self { x, y, t, p }
    }
}

impl From<Event> for RawEvent {
    fn from(e: Event) -> Self {
        RawEvent::new(e.x as u32, e.y as u32, e.t, e.p.to_wire())
    }
}

/// First broken window invariant found by [`validate_window`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    OutOfBounds { index: usize },
    NonMonotoneTime { index: usize },
    BeforeStart { index: usize },
    AfterEnd { index: usize },
    InvertedSpan,
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::OutOfBounds { .. } => "OutOfBounds",
            Violation::NonMonotoneTime { .. } => "NonMonotoneTime",
            Violation::BeforeStart { .. } => "BeforeStart",
            Violation::AfterEnd { .. } => "AfterEnd",
            Violation::InvertedSpan => "InvertedSpan",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutOfBounds { index }
            | Violation::NonMonotoneTime { index }
            | Violation::BeforeStart { index }
            | Violation::AfterEnd { index } => write!(f, "{} at event {index}", self.kind()),
            Violation::InvertedSpan => f.write_str(self.kind()),
        }
    }
}

/// A time-sorted batch of events over the half-open span `[t_start, t_end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventWindow {
    geometry: SensorGeometry,
    events: Vec<Event>,
    t_start: u64,
    t_end: u64,
    camera_id: u8,
}

impl EventWindow {
    /// Builds a window with an explicit span, checking every invariant.
    pub fn new(geometry: SensorGeometry, events: Vec<Event>, t_start: u64, t_end: u64) -> Result<Self, EventError> {
        let window = Self::new_unchecked(geometry, events, t_start, t_end);
        match validate_window(&window) {
            None => Ok(window),
            Some(v) => Err(EventError::Invalid(v)),
        }
    }

    /// Builds a window spanning `[first.t, last.t + 1)` from already sorted events.
    pub fn spanning(geometry: SensorGeometry, events: Vec<Event>) -> Result<Self, EventError> {
        let (Some(first), Some(last)) = (events.first(), events.last()) else {
            return Err(EventError::EmptyInput);
        };
        let (t_start, t_end) = (first.t, last.t + 1);
        Self::new(geometry, events, t_start, t_end)
    }

    /// No checks. Callers must uphold the invariants; [`validate_window`] reports violations.
    pub fn new_unchecked(geometry: SensorGeometry, events: Vec<Event>, t_start: u64, t_end: u64) -> Self {
        Self {
            geometry,
            events,
            t_start,
            t_end,
            camera_id: 0,
        }
    }

    pub fn with_camera(mut self, camera_id: u8) -> Self {
        self.camera_id = camera_id;
        self
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn t_start(&self) -> u64 {
        self.t_start
    }

    pub fn t_end(&self) -> u64 {
        self.t_end
    }

    /// Span length in microseconds.
    pub fn duration(&self) -> u64 {
        self.t_end - self.t_start
    }

    pub fn camera_id(&self) -> u8 {
        self.camera_id
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_time(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_time(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }
}

/// Sorts raw events by time (stable), maps wire polarity and checks bounds.
pub fn canonicalize(raw: &[RawEvent], geometry: SensorGeometry) -> Result<EventWindow, EventError> {
    if raw.is_empty() {
        return Err(EventError::EmptyInput);
    }
    let mut events = Vec::with_capacity(raw.len());
    for r in raw {
        if !geometry.contains(r.x, r.y) {
            return Err(EventError::OutOfBounds {
                x: r.x,
                y: r.y,
                width: geometry.width,
                height: geometry.height,
            });
        }
        events.push(Event::new(r.x as u16, r.y as u16, r.t, Polarity::from_wire(r.p)?));
    }
    events.sort_by_key(|e| e.t);
    EventWindow::spanning(geometry, events)
}

/// Returns the first invariant the window breaks, if any.
pub fn validate_window(window: &EventWindow) -> Option<Violation> {
    if window.t_start > window.t_end {
        return Some(Violation::InvertedSpan);
    }
    let mut prev_t = None;
    for (index, e) in window.events.iter().enumerate() {
        if !window.geometry.contains(e.x as u32, e.y as u32) {
            return Some(Violation::OutOfBounds { index });
        }
        if prev_t.is_some_and(|p| e.t < p) {
            return Some(Violation::NonMonotoneTime { index });
        }
        if e.t < window.t_start {
            return Some(Violation::BeforeStart { index });
        }
        if e.t >= window.t_end {
            return Some(Violation::AfterEnd { index });
        }
        prev_t = Some(e.t);
    }
    None
}

/// Pre-filter applied to raw streams before windowing (denoising, region masks, ...).
pub trait EventFilter {
    fn keep(&mut self, event: &Event) -> bool;
}

impl<F: FnMut(&Event) -> bool> EventFilter for F {
    fn keep(&mut self, event: &Event) -> bool {
        self(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(10, 8).unwrap()
    }

    #[test]
    fn single_event_identity() {
        let w = canonicalize(&[RawEvent::new(3, 4, 100, 1)], geom()).unwrap();
        assert_eq!(w.events(), &[Event::new(3, 4, 100, Polarity::Positive)]);
        assert_eq!((w.t_start(), w.t_end()), (100, 101));
    }

    #[test]
    fn zero_maps_to_negative() {
        let w = canonicalize(&[RawEvent::new(3, 4, 100, 0)], geom()).unwrap();
        assert_eq!(w.events()[0].p, Polarity::Negative);
        assert_eq!(w.events()[0].p.sign(), -1);
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let raw = [RawEvent::new(1, 1, 200, 1), RawEvent::new(2, 2, 100, 0)];
        let w = canonicalize(&raw, geom()).unwrap();
        let ts: Vec<_> = w.events().iter().map(|e| (e.t, e.p.sign())).collect();
        assert_eq!(ts, vec![(100, -1), (200, 1)]);
    }

    #[test]
    fn ties_keep_input_order() {
        let raw = [
            RawEvent::new(5, 0, 7, 1),
            RawEvent::new(1, 0, 7, 0),
            RawEvent::new(3, 0, 2, 1),
        ];
        let w = canonicalize(&raw, geom()).unwrap();
        let xs: Vec<_> = w.events().iter().map(|e| e.x).collect();
        assert_eq!(xs, vec![3, 5, 1]);
    }

    #[test]
    fn canonicalize_errors() {
        assert_eq!(canonicalize(&[], geom()), Err(EventError::EmptyInput));
        assert!(matches!(
            canonicalize(&[RawEvent::new(10, 0, 0, 1)], geom()),
            Err(EventError::OutOfBounds { x: 10, .. })
        ));
        assert_eq!(
            canonicalize(&[RawEvent::new(0, 0, 0, 2)], geom()),
            Err(EventError::BadPolarity(2))
        );
    }

    #[test]
    fn bad_geometry() {
        assert!(SensorGeometry::new(0, 5).is_err());
        assert!(SensorGeometry::new(5, 0).is_err());
    }

    #[test]
    fn validate_reports() {
        let g = geom();
        let ok = canonicalize(&[RawEvent::new(0, 0, 1, 1)], g).unwrap();
        assert_eq!(validate_window(&ok), None);

        let oob = EventWindow::new_unchecked(g, vec![Event::new(10, 0, 1, Polarity::Positive)], 0, 5);
        let v = validate_window(&oob).unwrap();
        assert_eq!(v.kind(), "OutOfBounds");

        let inverted = EventWindow::new_unchecked(
            g,
            vec![
                Event::new(0, 0, 3, Polarity::Positive),
                Event::new(0, 0, 2, Polarity::Positive),
            ],
            0,
            5,
        );
        assert_eq!(
            validate_window(&inverted),
            Some(Violation::NonMonotoneTime { index: 1 })
        );

        let at_end = EventWindow::new_unchecked(g, vec![Event::new(0, 0, 5, Polarity::Positive)], 0, 5);
        assert_eq!(validate_window(&at_end).unwrap().kind(), "AfterEnd");
    }

    fn raw_strategy() -> impl Strategy<Value = Vec<RawEvent>> {
        prop::collection::vec(
            (0u32..10, 0u32..8, 0u64..1000, 0u8..2).prop_map(|(x, y, t, p)| RawEvent::new(x, y, t, p)),
            1..64,
        )
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(raw in raw_strategy()) {
            let once = canonicalize(&raw, geom()).unwrap();
            let back: Vec<RawEvent> = once.events().iter().copied().map(RawEvent::from).collect();
            let twice = canonicalize(&back, geom()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn canonicalize_preserves_multiset(raw in raw_strategy()) {
            let w = canonicalize(&raw, geom()).unwrap();
            let mut a: Vec<_> = raw.iter().map(|r| (r.x as u16, r.y as u16, r.t)).collect();
            let mut b: Vec<_> = w.events().iter().map(|e| (e.x, e.y, e.t)).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            prop_assert_eq!(validate_window(&w), None);
        }
    }
}
