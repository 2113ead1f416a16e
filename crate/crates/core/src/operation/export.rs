use std::io::{Read, Write};

use serde::Serialize;

use crate::domain::{Assignment, DemandScenario, Schedule};
use crate::error::Result;

pub fn write_schedule_json<W: Write>(schedule: &Schedule, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, schedule)?;
    Ok(())
}

pub fn read_schedule_json<R: Read>(reader: R) -> Result<Schedule> {
    Ok(serde_json::from_reader(reader)?)
}

#[derive(Serialize)]
struct GanttRow {
    id: usize,
    step: usize,
    plugged: u8,
    power_kw: f64,
    charge_kwh: f64,
    charger_type: &'static str,
}

/// One row per session and presence step; charge is the value at the end
/// of the step.
pub fn write_gantt_csv<W: Write>(schedule: &Schedule, scenario: &DemandScenario, writer: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    out.write_record(["id", "step", "plugged", "power_kW", "charge_kWh", "charger_type"])?;
    for (i, s) in scenario.sessions.iter().enumerate() {
        let kind = match schedule.assignments[i] {
            Assignment::Fix => "fix",
            Assignment::Robo => "robo",
            Assignment::Leave => "leave",
        };
        for t in s.arrival..s.departure {
            out.serialize(GanttRow {
                id: s.id,
                step: t,
                plugged: schedule.plug[i][t] as u8,
                power_kw: schedule.power[i][t],
                charge_kwh: schedule.charge[i][t + 1],
                charger_type: kind,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}
