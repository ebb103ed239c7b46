//! Request traces: the record model, CSV ingestion, per-user mobility
//! statistics and the synthetic workload generator.

mod generator;
mod mobility;

pub use generator::{
    default_migration_matrix, generate_trace, stationary_distribution, CategoryConfig, Generated,
    Release, TraceConfig, World,
};
pub use mobility::{
    active_users, canonical_pattern, classify_users, describe_pattern, migration_matrix,
    movement_stats, user_day_groups, DayClass, LocationKey, MigrationCounts, MobilityStats,
    UserDayClass, UserDayKey,
};

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VideoId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub user: UserId,
    /// Epoch seconds.
    pub timestamp: i64,
    pub position: GeoPoint,
    pub video: VideoId,
}

/// Local-time calendar used to cut traces into days and hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayClock {
    pub utc_offset_hours: i32,
}

impl Default for DayClock {
    fn default() -> Self {
        Self { utc_offset_hours: 8 }
    }
}

impl DayClock {
    pub fn new(utc_offset_hours: i32) -> Self {
        Self { utc_offset_hours }
    }

    fn local(self, ts: i64) -> i64 {
        ts + self.utc_offset_hours as i64 * 3600
    }

    /// Local day number since the epoch.
    pub fn day(self, ts: i64) -> i64 {
        self.local(ts).div_euclid(86_400)
    }

    /// Local hour of day, 0..24.
    pub fn hour_of_day(self, ts: i64) -> u32 {
        (self.local(ts).rem_euclid(86_400) / 3600) as u32
    }

    /// Absolute hour index; hour boundaries coincide with local ones since
    /// offsets are whole hours.
    pub fn hour(self, ts: i64) -> i64 {
        ts.div_euclid(3600)
    }

    /// Epoch second of local midnight opening `day`.
    pub fn day_start(self, day: i64) -> i64 {
        day * 86_400 - self.utc_offset_hours as i64 * 3600
    }
}

/// A time-sorted request trace with interned user and video tokens.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<RequestRecord>,
    users: Vec<String>,
    videos: Vec<String>,
}

impl Trace {
    /// Builds a trace from already-interned parts. Records are stably sorted
    /// by timestamp.
    pub fn from_parts(mut records: Vec<RequestRecord>, users: Vec<String>, videos: Vec<String>) -> Self {
        records.sort_by_key(|r| r.timestamp);
        Self { records, users, videos }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_videos(&self) -> usize {
        self.videos.len()
    }

    pub fn user_token(&self, id: UserId) -> &str {
        &self.users[id.0 as usize]
    }

    pub fn video_token(&self, id: VideoId) -> &str {
        &self.videos[id.0 as usize]
    }

    pub fn video_id(&self, token: &str) -> Option<VideoId> {
        self.videos.iter().position(|v| v == token).map(|i| VideoId(i as u32))
    }

    pub fn user_id(&self, token: &str) -> Option<UserId> {
        self.users.iter().position(|v| v == token).map(|i| UserId(i as u32))
    }

    pub fn user_tokens(&self) -> &[String] {
        &self.users
    }

    pub fn video_tokens(&self) -> &[String] {
        &self.videos
    }

    /// Keeps only the records for which `keep` returns true; the token
    /// tables are left untouched so ids stay valid.
    pub fn filtered(&self, mut keep: impl FnMut(usize, &RequestRecord) -> bool) -> Trace {
        let records = self
            .records
            .iter()
            .enumerate()
            .filter(|(i, r)| keep(*i, r))
            .map(|(_, r)| *r)
            .collect();
        Trace { records, users: self.users.clone(), videos: self.videos.clone() }
    }

    /// Distinct local days present, ascending.
    pub fn days(&self, clock: DayClock) -> Vec<i64> {
        let set: BTreeSet<i64> = self.records.iter().map(|r| clock.day(r.timestamp)).collect();
        set.into_iter().collect()
    }
}

/// A trace line that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedLine {
    pub line: u64,
    pub reason: String,
}

const TRACE_HEADER: [&str; 5] = ["user_id", "timestamp", "lat", "lon", "video_id"];

struct RawRecord {
    user: String,
    timestamp: i64,
    position: GeoPoint,
    video: String,
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<RawRecord, String> {
    if row.len() != 5 {
        return Err(format!("expected 5 fields, found {}", row.len()));
    }
    let user = row[0].trim();
    let video = row[4].trim();
    if user.is_empty() {
        return Err("empty user id".into());
    }
    if video.is_empty() {
        return Err("empty video id".into());
    }
    let timestamp: i64 = row[1].trim().parse().map_err(|_| "timestamp is not an integer".to_string())?;
    let lat: f64 = row[2].trim().parse().map_err(|_| "unparseable latitude".to_string())?;
    let lon: f64 = row[3].trim().parse().map_err(|_| "unparseable longitude".to_string())?;
    let position = GeoPoint::new(lat, lon).map_err(|e| match e {
        Error::InvalidCoordinate(reason) => reason,
        other => other.to_string(),
    })?;
    Ok(RawRecord { user: user.to_string(), timestamp, position, video: video.to_string() })
}

/// Parses a trace CSV (`user_id,timestamp,lat,lon,video_id`). Malformed
/// lines are returned in the rejection report with their 1-based line
/// numbers; the surviving records are stably sorted by timestamp. Tokens are
/// interned in sorted order so ids depend only on the token sets.
pub fn parse_trace<R: Read>(input: R) -> Result<(Trace, Vec<RejectedLine>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
        Err(_) => return Err(Error::MissingHeader { expected: "user_id,timestamp,lat,lon,video_id" }),
    };
    if header.iter().map(str::trim).ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::MissingHeader { expected: "user_id,timestamp,lat,lon,video_id" });
    }

    let mut raw = Vec::new();
    let mut rejected = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                match parse_row(&record) {
                    Ok(r) => raw.push(r),
                    Err(reason) => rejected.push(RejectedLine { line, reason }),
                }
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(e.into()),
                _ => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    rejected.push(RejectedLine { line, reason: e.to_string() });
                }
            },
        }
    }

    let users: Vec<String> =
        raw.iter().map(|r| r.user.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let videos: Vec<String> =
        raw.iter().map(|r| r.video.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let lookup = |table: &[String], key: &str| table.binary_search_by(|t| t.as_str().cmp(key)).unwrap() as u32;
    let records = raw
        .iter()
        .map(|r| RequestRecord {
            user: UserId(lookup(&users, &r.user)),
            timestamp: r.timestamp,
            position: r.position,
            video: VideoId(lookup(&videos, &r.video)),
        })
        .collect();
    Ok((Trace::from_parts(records, users, videos), rejected))
}

pub fn write_trace<W: Write>(out: W, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            trace.user_token(r.user),
            &r.timestamp.to_string(),
            &r.position.lat.to_string(),
            &r.position.lon.to_string(),
            trace.video_token(r.video),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "user_id,timestamp,lat,lon,video_id\n";

    #[test]
    fn empty_body_parses_to_nothing() {
        let (trace, rejected) = parse_trace(HEADER.as_bytes()).unwrap();
        assert!(trace.is_empty());
        assert!(rejected.is_empty());
    }

    #[test]
    fn single_line() {
        let input = format!("{HEADER}u1,1475251200,39.9,116.3,v9\n");
        let (trace, rejected) = parse_trace(input.as_bytes()).unwrap();
        assert_eq!(trace.len(), 1);
        assert!(rejected.is_empty());
        let r = trace.records[0];
        assert_eq!(trace.user_token(r.user), "u1");
        assert_eq!(trace.video_token(r.video), "v9");
        assert_eq!(r.timestamp, 1475251200);
    }

    #[test]
    fn bad_lines_are_reported_with_line_numbers() {
        let input = format!(
            "{HEADER}u1,10,200,116.3,v1\nu2,x,39.9,116.3,v1\nu3,5,39.9,116.3,v2\nu4,6,39.9\n"
        );
        let (trace, rejected) = parse_trace(input.as_bytes()).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(rejected.len(), 3);
        assert_eq!(rejected[0], RejectedLine { line: 2, reason: "latitude out of range".into() });
        assert_eq!(rejected[1].line, 3);
        assert_eq!(rejected[2].line, 5);
    }

    #[test]
    fn missing_header_is_an_error() {
        assert!(matches!(parse_trace("".as_bytes()), Err(Error::MissingHeader { .. })));
        assert!(matches!(
            parse_trace("u1,1,2,3,v\n".as_bytes()),
            Err(Error::MissingHeader { .. })
        ));
    }

    #[test]
    fn records_sorted_stably_by_time() {
        let input = format!("{HEADER}b,20,1,1,v1\na,10,1,1,v2\nc,10,1,1,v3\n");
        let (trace, _) = parse_trace(input.as_bytes()).unwrap();
        let order: Vec<&str> = trace.records.iter().map(|r| trace.user_token(r.user)).collect();
        assert_eq!(order, vec!["a", "c", "b"]);
    }

    #[test]
    fn day_clock_cuts_at_local_midnight() {
        let clock = DayClock::default();
        // 2016-10-01T00:00:00+08:00
        let midnight = 1_475_251_200;
        assert_eq!(clock.day_start(clock.day(midnight)), midnight);
        assert_eq!(clock.day(midnight - 1) + 1, clock.day(midnight));
        assert_eq!(clock.hour_of_day(midnight), 0);
        assert_eq!(clock.hour_of_day(midnight + 21 * 3600 + 59), 21);
    }
}
