//! CSV writers for traces and frequency responses.

use std::io::Write;

use crate::df::DfResult;
use crate::error::Result;
use crate::lti::ComplexResponse;
use crate::sim::sensitivity::SensitivityEstimate;
use crate::sim::SimulationTrace;

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Columns `time,e,u,y,event`; `event` counts resets since the last sample.
pub fn write_trace<W: Write>(trace: &SimulationTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "e", "u", "y", "event"])?;
    for (k, count) in trace.event_counts().into_iter().enumerate() {
        w.write_record([
            num(trace.time[k]),
            num(trace.e[k]),
            num(trace.u[k]),
            num(trace.y[k]),
            count.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Columns `freq_hz,mag_db,phase_deg`.
pub fn write_bode<W: Write>(response: &ComplexResponse, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["freq_hz", "mag_db", "phase_deg"])?;
    let (mag, phase) = (response.magnitude_db(), response.phase_deg());
    for (i, f) in response.grid.hz().into_iter().enumerate() {
        w.write_record([num(f), num(mag[i]), num(phase[i])])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Columns `freq_hz,re,im,mag_db,phase_deg,phase_lead_deg`.
pub fn write_df<W: Write>(df: &DfResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["freq_hz", "re", "im", "mag_db", "phase_deg", "phase_lead_deg"])?;
    let r = &df.response;
    let (mag, phase) = (r.magnitude_db(), r.phase_deg());
    for (i, f) in r.grid.hz().into_iter().enumerate() {
        w.write_record([
            num(f),
            num(r.values[i].re),
            num(r.values[i].im),
            num(mag[i]),
            num(phase[i]),
            num(df.phase_lead[i].to_degrees()),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Columns `freq_hz,S_re,S_im,T_re,T_im`; points that did not settle are
/// left out.
pub fn write_sensitivity<W: Write>(est: &SensitivityEstimate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["freq_hz", "S_re", "S_im", "T_re", "T_im"])?;
    for p in est.points.iter().filter(|p| p.settled) {
        w.write_record([num(p.freq_hz), num(p.s.re), num(p.s.im), num(p.t.re), num(p.t.im)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
