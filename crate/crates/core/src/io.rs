//! Session data ingestion and the JSON fixtures shared by the CLI.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use serde::Deserialize;

use crate::domain::{DemandScenario, TimeGrid};
use crate::error::{Error, Result};
use crate::stochastic::{DayType, PoolDay, PoolSession, SessionPool};

#[derive(Debug, Deserialize)]
struct Row {
    start_time: String,
    end_time: String,
    #[serde(rename = "energy_kWh")]
    energy_kwh: f64,
}

const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

/// Parses an ISO-8601 local timestamp. An explicit UTC offset is accepted
/// and dropped: times are read as station-local.
pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(text) {
        return Some(t.naive_local());
    }
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
}

fn day_type_of(date: NaiveDate) -> DayType {
    match date.weekday() {
        Weekday::Sat | Weekday::Sun => DayType::Weekend,
        _ => DayType::Weekday,
    }
}

/// Reads sessions with header `start_time,end_time,energy_kWh` onto a
/// uniform day grid: arrivals floor and departures ceil to step
/// boundaries, stays past midnight end at the end of the arrival day.
/// Days are ordered by date.
pub fn ingest_sessions<R: Read>(reader: R, grid: &TimeGrid) -> Result<SessionPool> {
    if !grid.is_uniform() {
        return Err(Error::Config("session ingestion needs a uniform grid".into()));
    }
    let steps = grid.step_count();
    let step_minutes = grid.step_length(0) * 60.0;
    let mut days: BTreeMap<NaiveDate, Vec<PoolSession>> = BTreeMap::new();
    let mut rows = 0;
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for (k, record) in csv.deserialize::<Row>().enumerate() {
        let line = k + 2;
        rows += 1;
        let row = record.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        let start = parse_timestamp(&row.start_time)
            .ok_or_else(|| Error::Data(format!("line {line}: bad start_time `{}`", row.start_time)))?;
        let end = parse_timestamp(&row.end_time)
            .ok_or_else(|| Error::Data(format!("line {line}: bad end_time `{}`", row.end_time)))?;
        if !(row.energy_kwh >= 0.0) || !row.energy_kwh.is_finite() {
            return Err(Error::Data(format!("line {line}: bad energy {}", row.energy_kwh)));
        }
        if end <= start {
            log::warn!("line {line}: session ends before it starts; dropped");
            continue;
        }
        let date = start.date();
        let midnight = date.and_hms_opt(0, 0, 0).expect("valid midnight");
        let start_min = (start - midnight).num_seconds() as f64 / 60.0;
        let end_min = (end - midnight).num_seconds() as f64 / 60.0;
        let arrival = (start_min / step_minutes + 1e-9).floor() as usize;
        let departure = ((end_min / step_minutes - 1e-9).ceil() as usize).min(steps);
        if arrival >= steps {
            log::warn!("line {line}: arrival {} is outside the day grid; dropped", start.time());
            continue;
        }
        if end_min > steps as f64 * step_minutes {
            log::debug!("line {line}: stay past midnight cut at the end of the day");
        }
        days.entry(date).or_default().push(PoolSession {
            arrival,
            departure: departure.max(arrival + 1),
            energy: row.energy_kwh,
        });
    }
    if rows == 0 {
        return Err(Error::Data("session file has no rows".into()));
    }
    let days = days
        .into_iter()
        .map(|(date, mut sessions)| {
            sessions.sort_by_key(|s| (s.arrival, s.departure));
            PoolDay {
                day_type: day_type_of(date),
                sessions,
            }
        })
        .collect();
    Ok(SessionPool { days })
}

pub fn ingest_file(path: &Path, grid: &TimeGrid) -> Result<SessionPool> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    ingest_sessions(file, grid)
}

/// Writes `pool` in the ingestion format. Days get consecutive calendar
/// dates of their day type starting from Monday 2024-01-01.
pub fn write_sessions_csv<W: Write>(pool: &SessionPool, grid: &TimeGrid, writer: W) -> Result<()> {
    let step = Duration::seconds((grid.step_length(0) * 3600.0).round() as i64);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["start_time", "end_time", "energy_kWh"])?;
    let mut date = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    for day in &pool.days {
        while day_type_of(date) != day.day_type {
            date = date.succ_opt().expect("date in range");
        }
        let midnight = date.and_hms_opt(0, 0, 0).expect("valid midnight");
        for s in &day.sessions {
            let at = |k: usize| (midnight + step * k as i32).format("%Y-%m-%dT%H:%M:%S").to_string();
            w.write_record([at(s.arrival), at(s.departure), s.energy.to_string()])?;
        }
        date = date.succ_opt().expect("date in range");
    }
    w.flush()?;
    Ok(())
}

pub fn write_pool<W: Write>(pool: &SessionPool, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, pool)?;
    Ok(())
}

pub fn read_pool(path: &Path) -> Result<SessionPool> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn write_scenarios<W: Write>(scenarios: &[DemandScenario], writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, scenarios)?;
    Ok(())
}

/// Reads a scenario list, or a single scenario object.
pub fn read_scenarios(path: &Path) -> Result<Vec<DemandScenario>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<DemandScenario>),
        One(DemandScenario),
    }
    match serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))? {
        OneOrMany::Many(v) => Ok(v),
        OneOrMany::One(s) => Ok(vec![s]),
    }
}
