use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> i32 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn from_sign(sign: i32) -> Option<Self> {
        match sign {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// A single brightness-change event. `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: usize,
    pub y: usize,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: f64, x: usize, y: usize, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

/// Time-ordered events of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    width: usize,
    height: usize,
}

impl EventStream {
    /// Validates coordinates and timestamps, then stably sorts by time.
    pub fn new(mut events: Vec<Event>, width: usize, height: usize) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if !e.t.is_finite() || e.t < 0.0 {
                return Err(Error::Validation(format!(
                    "event {i} has invalid timestamp {}",
                    e.t
                )));
            }
            if e.x >= width || e.y >= height {
                return Err(Error::Validation(format!(
                    "event {i} at ({}, {}) lies outside the {width}x{height} sensor",
                    e.x, e.y
                )));
            }
        }
        if !is_time_sorted(&events) {
            warn!("event timestamps are not monotone; sorting stably by time");
            events.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        Ok(Self {
            events,
            width,
            height,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            events: Vec::new(),
            width,
            height,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

fn is_time_sorted(events: &[Event]) -> bool {
    events.windows(2).all(|w| w[0].t <= w[1].t)
}

/// Parses the `t x y p` text format. Lines starting with `#` and blank lines
/// are skipped. Polarities may be written as 0/1 or -1/+1; a file containing
/// any -1 is read as signed, otherwise 0 maps to negative and 1 to positive.
pub fn parse_events<R: BufRead>(
    reader: R,
    source: &Path,
    width: usize,
    height: usize,
) -> Result<EventStream> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        message,
    };

    let mut raw: Vec<(usize, f64, usize, usize, i32)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err(source))?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 4 fields `t x y p`, found {}", fields.len()),
            ));
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad timestamp `{}`", fields[0])))?;
        let x: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad x coordinate `{}`", fields[1])))?;
        let y: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad y coordinate `{}`", fields[2])))?;
        let p: i32 = fields[3]
            .trim_start_matches('+')
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad polarity `{}`", fields[3])))?;
        if !(-1..=1).contains(&p) {
            return Err(parse_err(lineno, format!("polarity {p} not in {{-1, 0, 1}}")));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(parse_err(lineno, format!("timestamp {t} must be finite and >= 0")));
        }
        raw.push((lineno, t, x, y, p));
    }

    let signed = raw.iter().any(|r| r.4 == -1);
    if !signed && !raw.is_empty() {
        warn!(
            "{}: no -1 polarities found; reading polarities as 0/1",
            source.display()
        );
    }

    let mut events = Vec::with_capacity(raw.len());
    for (lineno, t, x, y, p) in raw {
        let polarity = match (signed, p) {
            (true, 0) => {
                return Err(parse_err(
                    lineno,
                    "polarity 0 in a file using the -1/+1 convention".into(),
                ))
            }
            (true, s) => Polarity::from_sign(s).expect("checked range"),
            (false, 0) => Polarity::Negative,
            (false, _) => Polarity::Positive,
        };
        if x >= width || y >= height {
            return Err(Error::Validation(format!(
                "{}:{lineno}: event at ({x}, {y}) lies outside the {width}x{height} sensor",
                source.display()
            )));
        }
        events.push(Event::new(t, x, y, polarity));
    }
    EventStream::new(events, width, height)
}

pub fn parse_event_file(path: impl AsRef<Path>, width: usize, height: usize) -> Result<EventStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_events(BufReader::new(file), path, width, height)
}

/// Writes events with signed polarities, one `t x y p` line each.
pub fn write_event_file(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "# t x y p  ({}x{} sensor)", stream.width, stream.height)?;
        for e in &stream.events {
            writeln!(out, "{} {} {} {}", e.t, e.x, e.y, e.p.sign())?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(&path))
}
