use std::collections::HashSet;
use std::io::{Read, Write};
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::{
    Session, SessionRow, TrackCatalog, TrackMetadata, N_SCALAR_FEATURES, SCALAR_FEATURE_NAMES,
};
use crate::error::{Error, Result};

const TRACK_ID: &str = "track_id";
const DURATION: &str = "duration";
const RELEASE_YEAR: &str = "release_year";
const ACOUSTIC_PREFIX: &str = "acoustic_vector_";

const SESSION_COLUMNS: [&str; 12] = [
    "session_id",
    "session_position",
    "session_length",
    "track_id",
    "skip_1",
    "skip_2",
    "skip_3",
    "premium",
    "shuffle",
    "hour_of_day",
    "day",
    "month",
];

struct Header {
    names: Vec<String>,
}

impl Header {
    fn new(record: &StringRecord) -> Self {
        Self {
            names: record.iter().map(|s| s.trim().to_string()).collect(),
        }
    }

    fn index(&self, column: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == column)
            .ok_or_else(|| Error::MissingColumn {
                column: column.to_string(),
            })
    }
}

fn line_of(record: &StringRecord, fallback: usize) -> usize {
    record
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback)
}

fn cell(record: &StringRecord, idx: usize) -> &str {
    record.get(idx).unwrap_or("").trim()
}

fn parse_cell<T: FromStr>(
    record: &StringRecord,
    idx: usize,
    column: &str,
    row: usize,
) -> Result<T> {
    let raw = cell(record, idx);
    raw.parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

fn parse_finite(record: &StringRecord, idx: usize, column: &str, row: usize) -> Result<f64> {
    let v: f64 = parse_cell(record, idx, column, row)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse {
            row,
            column: column.to_string(),
            value: cell(record, idx).to_string(),
        })
    }
}

fn parse_bool(record: &StringRecord, idx: usize, column: &str, row: usize) -> Result<bool> {
    let raw = cell(record, idx);
    match raw {
        "1" => Ok(true),
        "0" => Ok(false),
        _ if raw.eq_ignore_ascii_case("true") => Ok(true),
        _ if raw.eq_ignore_ascii_case("false") => Ok(false),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Parses a track-feature CSV. Columns are located by header name; extra
/// columns are ignored. The acoustic-vector dimension is the number of
/// consecutive `acoustic_vector_{k}` columns starting at 0.
pub fn parse_track_features<R: Read>(input: R) -> Result<TrackCatalog> {
    let mut reader = ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = Header::new(reader.headers()?);

    let id_idx = header.index(TRACK_ID)?;
    let duration_idx = header.index(DURATION)?;
    let year_idx = header.index(RELEASE_YEAR)?;
    let scalar_idx = SCALAR_FEATURE_NAMES
        .iter()
        .map(|name| header.index(name))
        .collect::<Result<Vec<_>>>()?;
    let mut acoustic_idx = Vec::new();
    while let Ok(i) = header.index(&format!("{ACOUSTIC_PREFIX}{}", acoustic_idx.len())) {
        acoustic_idx.push(i);
    }
    if acoustic_idx.is_empty() {
        return Err(Error::MissingColumn {
            column: format!("{ACOUSTIC_PREFIX}0"),
        });
    }

    let mut catalog = TrackCatalog::new(acoustic_idx.len());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = line_of(&record, i + 2);
        let track_id = cell(&record, id_idx).to_string();
        if track_id.is_empty() {
            return Err(Error::Parse {
                row,
                column: TRACK_ID.to_string(),
                value: String::new(),
            });
        }
        let duration_s = parse_finite(&record, duration_idx, DURATION, row)?;
        if duration_s <= 0.0 {
            return Err(Error::Integrity(format!(
                "row {row}: duration must be positive, got {duration_s}"
            )));
        }
        let release_year = parse_cell(&record, year_idx, RELEASE_YEAR, row)?;
        let mut scalar_features = [0.0; N_SCALAR_FEATURES];
        for (k, &idx) in scalar_idx.iter().enumerate() {
            scalar_features[k] = parse_finite(&record, idx, SCALAR_FEATURE_NAMES[k], row)?;
        }
        let acoustic_vector = acoustic_idx
            .iter()
            .enumerate()
            .map(|(k, &idx)| parse_finite(&record, idx, &format!("{ACOUSTIC_PREFIX}{k}"), row))
            .collect::<Result<Vec<_>>>()?;
        if catalog.get(&track_id).is_some() {
            return Err(Error::DuplicateKey { key: track_id, row });
        }
        catalog.insert(TrackMetadata {
            track_id,
            duration_s,
            release_year,
            scalar_features,
            acoustic_vector,
        })?;
    }
    Ok(catalog)
}

/// Writes the catalog in canonical column order, tracks sorted by id.
pub fn write_track_features<W: Write>(output: W, catalog: &TrackCatalog) -> Result<()> {
    let mut writer = WriterBuilder::new().from_writer(output);
    let mut header = vec![TRACK_ID.to_string(), DURATION.into(), RELEASE_YEAR.into()];
    header.extend(SCALAR_FEATURE_NAMES.iter().map(|s| s.to_string()));
    header.extend((0..catalog.acoustic_dim()).map(|k| format!("{ACOUSTIC_PREFIX}{k}")));
    writer.write_record(&header)?;

    let mut fields = Vec::with_capacity(header.len());
    for track in catalog.iter() {
        fields.clear();
        fields.push(track.track_id.clone());
        fields.push(track.duration_s.to_string());
        fields.push(track.release_year.to_string());
        fields.extend(track.scalar_features.iter().map(f64::to_string));
        fields.extend(track.acoustic_vector.iter().map(f64::to_string));
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses a session log. Rows of a session must be contiguous and ordered
/// by position; every referenced track must exist in `catalog`.
pub fn parse_session_log<R: Read>(input: R, catalog: &TrackCatalog) -> Result<Vec<Session>> {
    let mut reader = ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = Header::new(reader.headers()?);
    let idx = SESSION_COLUMNS
        .iter()
        .map(|c| header.index(c))
        .collect::<Result<Vec<_>>>()?;

    let mut sessions = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Vec<SessionRow> = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = line_of(&record, i + 2);
        let parsed = SessionRow {
            session_id: cell(&record, idx[0]).to_string(),
            position: parse_cell(&record, idx[1], SESSION_COLUMNS[1], row)?,
            session_length: parse_cell(&record, idx[2], SESSION_COLUMNS[2], row)?,
            track_id: cell(&record, idx[3]).to_string(),
            skip_1: parse_bool(&record, idx[4], SESSION_COLUMNS[4], row)?,
            skip_2: parse_bool(&record, idx[5], SESSION_COLUMNS[5], row)?,
            skip_3: parse_bool(&record, idx[6], SESSION_COLUMNS[6], row)?,
            premium: parse_bool(&record, idx[7], SESSION_COLUMNS[7], row)?,
            shuffle: parse_bool(&record, idx[8], SESSION_COLUMNS[8], row)?,
            hour: parse_cell(&record, idx[9], SESSION_COLUMNS[9], row)?,
            day: parse_cell(&record, idx[10], SESSION_COLUMNS[10], row)?,
            month: parse_cell(&record, idx[11], SESSION_COLUMNS[11], row)?,
        };
        if catalog.get(&parsed.track_id).is_none() {
            return Err(Error::UnknownTrack {
                track_id: parsed.track_id,
                row,
            });
        }
        if !parsed.skip_flags_nested() {
            return Err(Error::Integrity(format!(
                "row {row}: skip flags not nested (skip_1={}, skip_2={}, skip_3={})",
                parsed.skip_1 as u8, parsed.skip_2 as u8, parsed.skip_3 as u8
            )));
        }

        let starts_new = current
            .first()
            .is_some_and(|r| r.session_id != parsed.session_id);
        if starts_new {
            let rows = std::mem::take(&mut current);
            sessions.push(Session::new(rows[0].session_id.clone(), rows)?);
        }
        if current.is_empty() && !seen.insert(parsed.session_id.clone()) {
            return Err(Error::MalformedSession {
                session_id: parsed.session_id,
                reason: format!("rows are not contiguous (reappears at row {row})"),
            });
        }
        if parsed.position != current.len() + 1 {
            return Err(Error::MalformedSession {
                session_id: parsed.session_id,
                reason: format!(
                    "row {row}: expected position {}, found {}",
                    current.len() + 1,
                    parsed.position
                ),
            });
        }
        current.push(parsed);
    }
    if !current.is_empty() {
        sessions.push(Session::new(current[0].session_id.clone(), current)?);
    }
    Ok(sessions)
}

pub fn write_session_log<W: Write>(output: W, sessions: &[Session]) -> Result<()> {
    let mut writer = WriterBuilder::new().from_writer(output);
    writer.write_record(SESSION_COLUMNS)?;
    let flag = |b: bool| if b { "1" } else { "0" };
    for row in sessions.iter().flat_map(Session::rows) {
        writer.write_record([
            row.session_id.as_str(),
            &row.position.to_string(),
            &row.session_length.to_string(),
            &row.track_id,
            flag(row.skip_1),
            flag(row.skip_2),
            flag(row.skip_3),
            flag(row.premium),
            flag(row.shuffle),
            &row.hour.to_string(),
            &row.day.to_string(),
            &row.month.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
