//! Event and label file formats, fixed-count windowing and window labelling.
//!
//! `EVT1` layout, little-endian:
//!
//! ```text
//! "EVT1" | u16 version = 1 | u16 width | u16 height | u32 reserved = 0
//! then N records of 13 bytes: u64 t_us | u16 x | u16 y | i8 p (-1 or +1)
//! ```
//!
//! The record count is implied by the file length.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::event::{Event, EventError, EventFilter, EventWindow, Polarity, SensorGeometry};
use crate::pose::{JointSet, PoseError};

pub const EVT1_MAGIC: &[u8; 4] = b"EVT1";
pub const EVT1_VERSION: u16 = 1;
pub const EVT1_HEADER_LEN: usize = 14;
pub const EVT1_RECORD_LEN: usize = 13;

/// Events per window.
pub const DEFAULT_WINDOW_COUNT: usize = 30_000;
/// Windows with fewer surviving events are discarded.
pub const DEFAULT_MIN_POINTS: usize = 1024;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported EVT1 version {0}")]
    VersionUnsupported(u16),
    #[error("truncated record: payload of {0} bytes is not a multiple of 13")]
    TruncatedRecord(usize),
    #[error("file shorter than the EVT1 header")]
    TruncatedHeader,
    #[error("record {index}: {source}")]
    BadRecord { index: usize, source: EventError },
    #[error("csv header must be `{expected}`, got `{found}`")]
    BadHeader { expected: &'static str, found: String },
    #[error("csv line {line}: {msg}")]
    ParseError { line: u64, msg: String },
    #[error("window count must be positive")]
    InvalidN,
    #[error("no label timestamp inside the event span [{first}, {last}]")]
    NoLabelInWindow { first: u64, last: u64 },
    #[error("empty window")]
    EmptyWindow,
    #[error("invalid label track: {0}")]
    BadTrack(String),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    fn from_csv(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            other => IngestError::ParseError {
                line,
                msg: format!("{other:?}"),
            },
        }
    }
}

pub fn encode_evt1<W: Write>(mut w: W, geometry: SensorGeometry, events: &[Event]) -> io::Result<()> {
    let mut header = [0u8; EVT1_HEADER_LEN];
    header[..4].copy_from_slice(EVT1_MAGIC);
    header[4..6].copy_from_slice(&EVT1_VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&geometry.width().to_le_bytes());
    header[8..10].copy_from_slice(&geometry.height().to_le_bytes());
    w.write_all(&header)?;
    let mut rec = [0u8; EVT1_RECORD_LEN];
    for e in events {
        rec[..8].copy_from_slice(&e.t.to_le_bytes());
        rec[8..10].copy_from_slice(&e.x.to_le_bytes());
        rec[10..12].copy_from_slice(&e.y.to_le_bytes());
        rec[12] = e.p.sign() as i8 as u8;
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn evt1_bytes(geometry: SensorGeometry, events: &[Event]) -> Vec<u8> {
    let mut out = Vec::with_capacity(EVT1_HEADER_LEN + EVT1_RECORD_LEN * events.len());
    encode_evt1(&mut out, geometry, events).expect("writing to a Vec cannot fail");
    out
}

/// Parses a complete `EVT1` buffer. Events keep file order.
pub fn decode_evt1(bytes: &[u8]) -> Result<(SensorGeometry, Vec<Event>), IngestError> {
    if bytes.len() < 4 {
        return Err(IngestError::TruncatedHeader);
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != EVT1_MAGIC {
        return Err(IngestError::BadMagic(magic));
    }
    if bytes.len() < EVT1_HEADER_LEN {
        return Err(IngestError::TruncatedHeader);
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let version = u16_at(4);
    if version != EVT1_VERSION {
        return Err(IngestError::VersionUnsupported(version));
    }
    let geometry = SensorGeometry::new(u16_at(6), u16_at(8))?;
    let payload = &bytes[EVT1_HEADER_LEN..];
    if !payload.len().is_multiple_of(EVT1_RECORD_LEN) {
        return Err(IngestError::TruncatedRecord(payload.len()));
    }
    let mut events = Vec::with_capacity(payload.len() / EVT1_RECORD_LEN);
    for (index, rec) in payload.chunks_exact(EVT1_RECORD_LEN).enumerate() {
        let t = u64::from_le_bytes(rec[..8].try_into().unwrap());
        let x = u16::from_le_bytes([rec[8], rec[9]]);
        let y = u16::from_le_bytes([rec[10], rec[11]]);
        let p =
            Polarity::from_signed(rec[12] as i8 as i64).map_err(|source| IngestError::BadRecord { index, source })?;
        if !geometry.contains(x as u32, y as u32) {
            return Err(IngestError::BadRecord {
                index,
                source: EventError::OutOfBounds {
                    x: x as u32,
                    y: y as u32,
                    width: geometry.width(),
                    height: geometry.height(),
                },
            });
        }
        events.push(Event::new(x, y, t, p));
    }
    Ok((geometry, events))
}

pub fn read_evt1(path: impl AsRef<Path>) -> Result<(SensorGeometry, Vec<Event>), IngestError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_evt1(&bytes)
}

pub fn write_evt1(path: impl AsRef<Path>, geometry: SensorGeometry, events: &[Event]) -> Result<(), IngestError> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_evt1(&mut w, geometry, events)?;
    w.flush()?;
    Ok(())
}

/// How the `p` column of an event CSV is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityFormat {
    /// `0` = decrease, `1` = increase.
    ZeroOne,
    /// `-1` / `+1`.
    Signed,
}

const EVENT_CSV_HEADER: &str = "t_us,x,y,p";

/// Parses a `t_us,x,y,p` CSV. Rows keep file order; no bounds check is applied.
pub fn parse_events_csv<R: Read>(reader: R, format: PolarityFormat) -> Result<Vec<Event>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(IngestError::from_csv)?;
    let found = header.iter().collect::<Vec<_>>().join(",");
    if found != EVENT_CSV_HEADER {
        return Err(IngestError::BadHeader {
            expected: EVENT_CSV_HEADER,
            found,
        });
    }
    let mut events = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(IngestError::from_csv)? {
        let line = record.position().map_or(0, |p| p.line());
        let err = |msg: String| IngestError::ParseError { line, msg };
        if record.len() != 4 {
            return Err(err(format!("expected 4 fields, got {}", record.len())));
        }
        let t: u64 = record[0].parse().map_err(|e| err(format!("t_us: {e}")))?;
        let x: u16 = record[1].parse().map_err(|e| err(format!("x: {e}")))?;
        let y: u16 = record[2].parse().map_err(|e| err(format!("y: {e}")))?;
        let p_raw: i64 = record[3].parse().map_err(|e| err(format!("p: {e}")))?;
        let p = match format {
            PolarityFormat::ZeroOne => match p_raw {
                0 => Polarity::Negative,
                1 => Polarity::Positive,
                _ => return Err(err(format!("polarity {p_raw} is not 0 or 1"))),
            },
            PolarityFormat::Signed => Polarity::from_signed(p_raw).map_err(|e| err(e.to_string()))?,
        };
        events.push(Event::new(x, y, t, p));
    }
    Ok(events)
}

pub fn read_csv(path: impl AsRef<Path>, format: PolarityFormat) -> Result<Vec<Event>, IngestError> {
    parse_events_csv(BufReader::new(File::open(path)?), format)
}

pub fn write_events_csv<W: Write>(mut w: W, events: &[Event], format: PolarityFormat) -> io::Result<()> {
    writeln!(w, "{EVENT_CSV_HEADER}")?;
    for e in events {
        let p = match format {
            PolarityFormat::ZeroOne => e.p.to_wire() as i32,
            PolarityFormat::Signed => e.p.sign(),
        };
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, p)?;
    }
    Ok(())
}

/// Splits a time-sorted stream into consecutive windows of exactly `n` events.
///
/// The trailing remainder shorter than `n` is dropped. When a filter is
/// given it is applied to each window's events, and windows left with fewer
/// than `min_points` events are discarded.
pub fn window_by_count(
    stream: &[Event],
    geometry: SensorGeometry,
    n: usize,
    min_points: usize,
    mut filter: Option<&mut dyn EventFilter>,
) -> Result<Vec<EventWindow>, IngestError> {
    if n == 0 {
        return Err(IngestError::InvalidN);
    }
    let mut windows = Vec::with_capacity(stream.len() / n);
    for chunk in stream.chunks_exact(n) {
        let events: Vec<Event> = match filter.as_mut() {
            Some(f) => chunk.iter().filter(|e| f.keep(e)).copied().collect(),
            None => chunk.to_vec(),
        };
        if events.len() < min_points || events.is_empty() {
            continue;
        }
        windows.push(EventWindow::spanning(geometry, events)?);
    }
    Ok(windows)
}

/// Merges per-camera streams into one time-ordered stream, tagging each event
/// with its camera. Ties keep camera order.
pub fn merge_streams(streams: &[(u8, Vec<Event>)]) -> Vec<(u8, Event)> {
    let mut merged: Vec<(u8, Event)> = streams
        .iter()
        .flat_map(|(cam, events)| events.iter().map(move |e| (*cam, *e)))
        .collect();
    merged.sort_by_key(|(_, e)| e.t);
    merged
}

/// Windows that count `n` events over all cameras together and share one label.
#[derive(Debug, Clone)]
pub struct MultiCameraWindow {
    /// One window per camera that contributed events, all with the merged span.
    pub views: Vec<EventWindow>,
    pub label: JointSet,
}

/// Counts `n` events over the merged stream of all cameras, assigns the
/// mean label of the merged span and attaches it to every camera's view.
pub fn window_multi_camera(
    streams: &[(u8, Vec<Event>)],
    geometry: SensorGeometry,
    n: usize,
    track: &LabelTrack,
) -> Result<Vec<MultiCameraWindow>, IngestError> {
    if n == 0 {
        return Err(IngestError::InvalidN);
    }
    let merged = merge_streams(streams);
    let mut out = Vec::new();
    for chunk in merged.chunks_exact(n) {
        let first = chunk[0].1.t;
        let last = chunk[n - 1].1.t;
        let label = track.mean_over(first, last)?;
        let mut cams: Vec<u8> = chunk.iter().map(|(c, _)| *c).collect();
        cams.sort_unstable();
        cams.dedup();
        let mut views = Vec::with_capacity(cams.len());
        for cam in cams {
            let events: Vec<Event> = chunk.iter().filter(|(c, _)| *c == cam).map(|(_, e)| *e).collect();
            views.push(EventWindow::new(geometry, events, first, last + 1)?.with_camera(cam));
        }
        out.push(MultiCameraWindow { views, label });
    }
    Ok(out)
}

/// `(joint_id, coords)` for one CSV row.
type JointRow = (usize, Vec<f64>);

/// Joint labels sampled at a constant period: label `i` sits at `t0 + i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTrack {
    t0: u64,
    dt: u64,
    labels: Vec<JointSet>,
}

impl LabelTrack {
    pub fn new(t0: u64, dt: u64, labels: Vec<JointSet>) -> Result<Self, IngestError> {
        if dt == 0 {
            return Err(IngestError::BadTrack("period must be positive".into()));
        }
        let Some(first) = labels.first() else {
            return Err(IngestError::BadTrack("no labels".into()));
        };
        if let Some(i) = labels.iter().position(|l| !l.same_shape(first)) {
            return Err(IngestError::BadTrack(format!(
                "label {i} has a different joint count or dimension"
            )));
        }
        Ok(Self { t0, dt, labels })
    }

    pub fn t0(&self) -> u64 {
        self.t0
    }

    pub fn dt(&self) -> u64 {
        self.dt
    }

    pub fn labels(&self) -> &[JointSet] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn time_of(&self, i: usize) -> u64 {
        self.t0 + i as u64 * self.dt
    }

    pub fn t_last(&self) -> u64 {
        self.time_of(self.labels.len() - 1)
    }

    /// Index range of labels with timestamps in `[first, last]`.
    fn indices_within(&self, first: u64, last: u64) -> Option<(usize, usize)> {
        if last < first || last < self.t0 || first > self.t_last() {
            return None;
        }
        // earliest label at or after `first`
        let lo = if first <= self.t0 {
            0
        } else {
            (first - self.t0).div_ceil(self.dt) as usize
        };
        // latest label at or before `last`
        let hi = (((last - self.t0) / self.dt) as usize).min(self.labels.len() - 1);
        (lo <= hi).then_some((lo, hi))
    }

    /// Mean of all labels with timestamps in `[first, last]`.
    pub fn mean_over(&self, first: u64, last: u64) -> Result<JointSet, IngestError> {
        let (lo, hi) = self
            .indices_within(first, last)
            .ok_or(IngestError::NoLabelInWindow { first, last })?;
        Ok(JointSet::mean(&self.labels[lo..=hi]).expect("non-empty range"))
    }

    /// Index of the label nearest to `t`; ties go to the earlier label.
    pub fn nearest_index(&self, t: u64) -> usize {
        if t <= self.t0 {
            return 0;
        }
        let below = (((t - self.t0) / self.dt) as usize).min(self.labels.len() - 1);
        let above = below + 1;
        if above >= self.labels.len() {
            return below;
        }
        let d_below = t - self.time_of(below);
        let d_above = self.time_of(above) - t;
        if d_above < d_below {
            above
        } else {
            below
        }
    }

    /// Parses a `t_us,joint_id,u,v[,w]` CSV with one row per joint per label
    /// time. The label period is inferred and must be constant.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(IngestError::from_csv)?;
        let found = header.iter().collect::<Vec<_>>().join(",");
        let dim = match found.as_str() {
            "t_us,joint_id,u,v" => 2,
            "t_us,joint_id,u,v,w" => 3,
            _ => {
                return Err(IngestError::BadHeader {
                    expected: "t_us,joint_id,u,v[,w]",
                    found,
                })
            }
        };
        let mut groups: Vec<(u64, Vec<JointRow>)> = Vec::new();
        let mut record = csv::StringRecord::new();
        while rdr.read_record(&mut record).map_err(IngestError::from_csv)? {
            let line = record.position().map_or(0, |p| p.line());
            let err = |msg: String| IngestError::ParseError { line, msg };
            if record.len() != dim + 2 {
                return Err(err(format!("expected {} fields, got {}", dim + 2, record.len())));
            }
            let t: u64 = record[0].parse().map_err(|e| err(format!("t_us: {e}")))?;
            let id: usize = record[1].parse().map_err(|e| err(format!("joint_id: {e}")))?;
            let mut coords = Vec::with_capacity(dim);
            for f in record.iter().skip(2) {
                coords.push(f.parse::<f64>().map_err(|e| err(format!("{f}: {e}")))?);
            }
            match groups.last_mut() {
                Some((gt, rows)) if *gt == t => rows.push((id, coords)),
                Some((gt, _)) if *gt > t => {
                    return Err(err(format!("label time {t} goes backwards")));
                }
                _ => groups.push((t, vec![(id, coords)])),
            }
        }
        if groups.is_empty() {
            return Err(IngestError::BadTrack("no labels".into()));
        }
        let t0 = groups[0].0;
        let dt = if groups.len() > 1 { groups[1].0 - t0 } else { 1 };
        for (i, (t, _)) in groups.iter().enumerate() {
            if *t != t0 + i as u64 * dt {
                return Err(IngestError::BadTrack(format!(
                    "label {i} at {t} breaks the constant period {dt}"
                )));
            }
        }
        let mut labels = Vec::with_capacity(groups.len());
        for (t, mut rows) in groups {
            rows.sort_by_key(|r| r.0);
            if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
                return Err(IngestError::BadTrack(format!(
                    "joint ids at {t} must be 0..J without gaps"
                )));
            }
            labels.push(JointSet::new(dim, rows.into_iter().flat_map(|r| r.1).collect())?);
        }
        Self::new(t0, dt, labels)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.labels[0].dim();
        writeln!(
            w,
            "{}",
            if dim == 2 {
                "t_us,joint_id,u,v"
            } else {
                "t_us,joint_id,u,v,w"
            }
        )?;
        for (i, label) in self.labels.iter().enumerate() {
            let t = self.time_of(i);
            for (j, c) in label.joints().enumerate() {
                write!(w, "{t},{j}")?;
                for v in c {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Which label a window receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Mean of all labels inside the event span.
    Mean,
    /// The label nearest the last event.
    Last,
}

#[derive(Debug, Clone)]
pub struct LabeledWindow {
    pub window: EventWindow,
    pub label: JointSet,
    pub label_mode: LabelMode,
}

/// Mean of every label whose timestamp lies between the first and last event.
pub fn mean_label(window: &EventWindow, track: &LabelTrack) -> Result<JointSet, IngestError> {
    let (Some(first), Some(last)) = (window.first_time(), window.last_time()) else {
        return Err(IngestError::EmptyWindow);
    };
    track.mean_over(first, last)
}

/// The label nearest in time to the window's last event.
pub fn last_label(window: &EventWindow, track: &LabelTrack) -> Result<JointSet, IngestError> {
    let last = window.last_time().ok_or(IngestError::EmptyWindow)?;
    Ok(track.labels[track.nearest_index(last)].clone())
}

pub fn label_window(window: EventWindow, track: &LabelTrack, mode: LabelMode) -> Result<LabeledWindow, IngestError> {
    let label = match mode {
        LabelMode::Mean => mean_label(&window, track)?,
        LabelMode::Last => last_label(&window, track)?,
    };
    Ok(LabeledWindow {
        window,
        label,
        label_mode: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(x: u16, y: u16, t: u64, p: i64) -> Event {
        Event::new(x, y, t, Polarity::from_signed(p).unwrap())
    }

    fn geom() -> SensorGeometry {
        SensorGeometry::new(16, 16).unwrap()
    }

    fn track_1d(t0: u64, dt: u64, xs: &[f64]) -> LabelTrack {
        let labels = xs
            .iter()
            .map(|&x| JointSet::from_points(&[[x, 0.0]]).unwrap())
            .collect();
        LabelTrack::new(t0, dt, labels).unwrap()
    }

    fn window_span(first: u64, last: u64) -> EventWindow {
        EventWindow::spanning(geom(), vec![ev(0, 0, first, 1), ev(1, 1, last, -1)]).unwrap()
    }

    #[test]
    fn evt1_round_trip() {
        let events = vec![ev(1, 2, 10, 1), ev(3, 4, 20, -1), ev(15, 15, u64::MAX, 1)];
        let bytes = evt1_bytes(geom(), &events);
        assert_eq!(bytes.len(), EVT1_HEADER_LEN + 3 * EVT1_RECORD_LEN);
        assert_eq!(decode_evt1(&bytes).unwrap(), (geom(), events));
    }

    #[test]
    fn evt1_header_is_little_endian() {
        let bytes = evt1_bytes(SensorGeometry::DAVIS346, &[ev(1, 2, 0x0102, -1)]);
        assert_eq!(&bytes[..14], b"EVT1\x01\x00\x5a\x01\x04\x01\x00\x00\x00\x00");
        assert_eq!(&bytes[14..], &[0x02, 0x01, 0, 0, 0, 0, 0, 0, 1, 0, 2, 0, 0xff]);
    }

    #[test]
    fn evt1_errors() {
        let mut bad = evt1_bytes(geom(), &[]);
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_evt1(&bad), Err(IngestError::BadMagic(m)) if &m == b"XXXX"));

        let mut truncated = evt1_bytes(geom(), &[ev(0, 0, 0, 1)]);
        truncated.pop();
        assert!(matches!(decode_evt1(&truncated), Err(IngestError::TruncatedRecord(12))));

        let mut v2 = evt1_bytes(geom(), &[]);
        v2[4] = 2;
        assert!(matches!(decode_evt1(&v2), Err(IngestError::VersionUnsupported(2))));

        let mut bad_p = evt1_bytes(geom(), &[ev(0, 0, 0, 1)]);
        *bad_p.last_mut().unwrap() = 0;
        assert!(matches!(
            decode_evt1(&bad_p),
            Err(IngestError::BadRecord { index: 0, .. })
        ));

        assert!(matches!(decode_evt1(b"EVT1\x01"), Err(IngestError::TruncatedHeader)));
    }

    #[test]
    fn csv_polarity_formats() {
        let zo = parse_events_csv(&b"t_us,x,y,p\n100,3,4,1\n100,3,4,0\n"[..], PolarityFormat::ZeroOne).unwrap();
        assert_eq!(zo, vec![ev(3, 4, 100, 1), ev(3, 4, 100, -1)]);
        let signed = parse_events_csv(&b"t_us,x,y,p\n100,3,4,-1\n"[..], PolarityFormat::Signed).unwrap();
        assert_eq!(signed, vec![ev(3, 4, 100, -1)]);
        assert!(matches!(
            parse_events_csv(&b"t_us,x,y,p\n100,3,4,-1\n"[..], PolarityFormat::ZeroOne),
            Err(IngestError::ParseError { line: 2, .. })
        ));
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse_events_csv(&b"t,x,y,p\n"[..], PolarityFormat::ZeroOne),
            Err(IngestError::BadHeader { .. })
        ));
        assert!(matches!(
            parse_events_csv(&b"t_us,x,y,p\n1,2,3,1\nzz,2,3,1\n"[..], PolarityFormat::ZeroOne),
            Err(IngestError::ParseError { line: 3, .. })
        ));
    }

    #[test]
    fn csv_writer_round_trip() {
        let events = vec![ev(3, 4, 100, 1), ev(5, 6, 101, -1)];
        for fmt in [PolarityFormat::ZeroOne, PolarityFormat::Signed] {
            let mut buf = Vec::new();
            write_events_csv(&mut buf, &events, fmt).unwrap();
            assert_eq!(parse_events_csv(&buf[..], fmt).unwrap(), events);
        }
    }

    fn stream(n: usize) -> Vec<Event> {
        (0..n)
            .map(|i| ev((i % 16) as u16, (i / 16 % 16) as u16, i as u64, 1))
            .collect()
    }

    #[test]
    fn windowing_counts() {
        let g = geom();
        let w = window_by_count(&stream(60_000), g, 30_000, 1024, None).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.len() == 30_000));
        assert!(window_by_count(&stream(29_999), g, 30_000, 1024, None)
            .unwrap()
            .is_empty());
        let w = window_by_count(&stream(70_000), g, 30_000, 1024, None).unwrap();
        assert_eq!(w.len(), 70_000 / 30_000);
        assert_eq!(w[1].events().last().unwrap().t, 59_999);
        assert!(matches!(
            window_by_count(&stream(5), g, 0, 0, None),
            Err(IngestError::InvalidN)
        ));
    }

    #[test]
    fn windowing_defaults() {
        assert_eq!(DEFAULT_WINDOW_COUNT, 30_000);
        assert_eq!(DEFAULT_MIN_POINTS, 1024);
    }

    #[test]
    fn filter_drops_sparse_windows() {
        let s = stream(4000);
        // keep only x == 0: 1/16 of each 2000-event window survives
        let mut keep_col0 = |e: &Event| e.x == 0;
        let w = window_by_count(&s, geom(), 2000, 100, Some(&mut keep_col0)).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.len() == 125));
        let mut keep_col0 = |e: &Event| e.x == 0;
        let w = window_by_count(&s, geom(), 2000, 1024, Some(&mut keep_col0)).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn mean_label_examples() {
        // labels at 0, 10, 20 ms
        let track = track_1d(0, 10_000, &[0.0, 10.0, 20.0]);
        let l = mean_label(&window_span(4_000, 16_000), &track).unwrap();
        assert_eq!(l.coords(), &[10.0, 0.0]);
        let l = mean_label(&window_span(10_000, 10_000), &track).unwrap();
        assert_eq!(l.coords(), &[10.0, 0.0]);
        let l = mean_label(&window_span(9_000, 20_000), &track).unwrap();
        assert_eq!(l.coords(), &[15.0, 0.0]);
        assert!(matches!(
            mean_label(&window_span(11_000, 19_000), &track),
            Err(IngestError::NoLabelInWindow { .. })
        ));
        assert!(matches!(
            mean_label(&window_span(21_000, 29_000), &track),
            Err(IngestError::NoLabelInWindow { .. })
        ));
    }

    #[test]
    fn last_label_examples() {
        let track = track_1d(0, 10_000, &[0.0, 10.0, 20.0]);
        assert_eq!(last_label(&window_span(0, 14_000), &track).unwrap().coords()[0], 10.0);
        assert_eq!(last_label(&window_span(0, 20_000), &track).unwrap().coords()[0], 20.0);
        assert_eq!(last_label(&window_span(0, 15_000), &track).unwrap().coords()[0], 10.0);
        assert_eq!(last_label(&window_span(0, 16_000), &track).unwrap().coords()[0], 20.0);
        assert_eq!(
            last_label(&window_span(90_000, 99_000), &track).unwrap().coords()[0],
            20.0
        );
        let late = track_1d(50_000, 10_000, &[1.0, 2.0]);
        assert_eq!(last_label(&window_span(0, 10), &late).unwrap().coords()[0], 1.0);
    }

    #[test]
    fn label_track_validation() {
        assert!(LabelTrack::new(0, 0, vec![JointSet::from_points(&[[0.0, 0.0]]).unwrap()]).is_err());
        assert!(LabelTrack::new(0, 1, vec![]).is_err());
        let mixed = vec![
            JointSet::from_points(&[[0.0, 0.0]]).unwrap(),
            JointSet::from_points(&[[0.0, 0.0], [1.0, 1.0]]).unwrap(),
        ];
        assert!(LabelTrack::new(0, 1, mixed).is_err());
    }

    #[test]
    fn label_csv_round_trip_and_period_check() {
        let track = LabelTrack::new(
            500,
            250,
            vec![
                JointSet::from_points(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap(),
                JointSet::from_points(&[[1.5, 2.5, 3.5], [4.5, 5.5, 6.5]]).unwrap(),
                JointSet::from_points(&[[2.0, 3.0, 4.0], [5.0, 6.0, 7.0]]).unwrap(),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        track.write_csv(&mut buf).unwrap();
        assert_eq!(LabelTrack::read_csv(&buf[..]).unwrap(), track);

        let irregular = b"t_us,joint_id,u,v\n0,0,1,1\n10,0,1,1\n25,0,1,1\n";
        assert!(matches!(
            LabelTrack::read_csv(&irregular[..]),
            Err(IngestError::BadTrack(_))
        ));
        let backwards = b"t_us,joint_id,u,v\n10,0,1,1\n0,0,1,1\n";
        assert!(matches!(
            LabelTrack::read_csv(&backwards[..]),
            Err(IngestError::ParseError { .. })
        ));
        let gap = b"t_us,joint_id,u,v\n0,0,1,1\n0,2,1,1\n";
        assert!(matches!(LabelTrack::read_csv(&gap[..]), Err(IngestError::BadTrack(_))));
    }

    #[test]
    fn multi_camera_shares_label() {
        let cam0: Vec<Event> = (0..6).map(|i| ev(0, 0, i * 10, 1)).collect();
        let cam1: Vec<Event> = (0..6).map(|i| ev(1, 1, i * 10 + 5, -1)).collect();
        let track = track_1d(0, 20, &[0.0, 2.0, 4.0, 6.0]);
        let windows = window_multi_camera(&[(0, cam0), (1, cam1)], geom(), 4, &track).unwrap();
        assert_eq!(windows.len(), 3);
        // first merged window covers t = 0, 5, 10, 15 -> labels at 0 only
        assert_eq!(windows[0].label.coords(), &[0.0, 0.0]);
        assert_eq!(windows[0].views.len(), 2);
        assert_eq!(windows[0].views[1].camera_id(), 1);
        assert_eq!(windows[0].views[0].t_end(), 16);
        // second: t = 20, 25, 30, 35 -> label at 20
        assert_eq!(windows[1].label.coords(), &[2.0, 0.0]);
        let total: usize = windows.iter().flat_map(|w| &w.views).map(|v| v.len()).sum();
        assert_eq!(total, 12);
    }
}
