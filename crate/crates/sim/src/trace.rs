//! JSON-lines episode traces, one record per step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::AircraftState;
use crate::engagement::StepReport;
use crate::FPS_PER_KT;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftTrace {
    pub position: [f64; 3],
    /// roll, pitch, yaw
    pub attitude_deg: [f64; 3],
    pub tas_kt: f64,
    pub aoa_deg: f64,
    pub life: u8,
}

impl From<&AircraftState> for AircraftTrace {
    fn from(s: &AircraftState) -> Self {
        let (r, p, y) = s.euler();
        Self {
            position: [s.position.x, s.position.y, s.position.z],
            attitude_deg: [r.to_degrees(), p.to_degrees(), y.to_degrees()],
            tas_kt: s.airspeed() / FPS_PER_KT,
            aoa_deg: s.alpha_beta().0.to_degrees(),
            life: s.life,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryTrace {
    pub range_ft: f64,
    pub deviation_deg: f64,
    pub elevation_deg: f64,
    pub horizontal_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardTrace {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub r7: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WezTrace {
    pub own: bool,
    pub oppo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub step: usize,
    pub sim_time_s: f64,
    pub own: AircraftTrace,
    pub oppo: AircraftTrace,
    pub geometry: GeometryTrace,
    pub reward: RewardTrace,
    pub total_reward: f64,
    pub wez: WezTrace,
    pub termination: String,
}

impl TraceRecord {
    pub fn new(report: &StepReport, own: &AircraftState, oppo: &AircraftState) -> Self {
        let t = report.reward.terms;
        Self {
            step: report.step,
            sim_time_s: report.sim_time,
            own: own.into(),
            oppo: oppo.into(),
            geometry: GeometryTrace {
                range_ft: report.geometry.range,
                deviation_deg: report.geometry.deviation,
                elevation_deg: report.geometry.elevation,
                horizontal_deg: report.geometry.horizontal,
            },
            reward: RewardTrace {
                r1: t[0],
                r2: t[1],
                r3: t[2],
                r4: t[3],
                r5: t[4],
                r6: t[5],
                r7: t[6],
            },
            total_reward: report.reward.total,
            wez: WezTrace {
                own: report.own_wez,
                oppo: report.oppo_wez,
            },
            termination: report.termination.name().to_string(),
        }
    }

    pub fn write_line<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, self)?;
        out.write_all(b"\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlCommand;
    use crate::engagement::{Engagement, EpisodeConfig, Mode};

    #[test]
    fn records_round_trip_through_json() {
        let mut e = Engagement::new(EpisodeConfig {
            mode: Mode::Evaluation,
            ..EpisodeConfig::default()
        });
        let report = e.step(&ControlCommand::neutral()).unwrap();
        let rec = TraceRecord::new(&report, e.own(), e.oppo());
        let mut buf = Vec::new();
        rec.write_line(&mut buf).unwrap();
        assert_eq!(buf.last(), Some(&b'\n'));
        let back: TraceRecord = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.termination, "none");
    }
}
