use super::RateRegion;
use crate::config::DlMode;
use crate::error::{invalid, Result};
use crate::feedback::FeedbackMode;
use serde::Serialize;
use std::io::Write;

#[derive(Serialize)]
struct Row<'a> {
    ul_pattern: &'a str,
    dl_pattern: &'a str,
    rho_ul: f64,
    rho_dl: f64,
    n_b: f64,
    dl_mode: DlMode,
    feedback_mode: FeedbackMode,
    gross_ul: f64,
    gross_dl: f64,
    net_ul: f64,
    net_dl: f64,
    pareto: u8,
    hull: u8,
}

/// One row per swept point, in sweep order.
pub fn write_csv<W: Write>(region: &RateRegion, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for (i, p) in region.points.iter().enumerate() {
        w.serialize(Row {
            ul_pattern: &p.params.ul_pattern,
            dl_pattern: &p.params.dl_pattern,
            rho_ul: p.params.rho_ul,
            rho_dl: p.params.rho_dl,
            n_b: p.params.n_b,
            dl_mode: p.params.dl_mode,
            feedback_mode: p.params.feedback_mode,
            gross_ul: p.gross_ul,
            gross_dl: p.gross_dl,
            net_ul: p.net_ul,
            net_dl: p.net_dl,
            pareto: region.on_frontier(i) as u8,
            hull: region.on_hull(i) as u8,
        })
        .map_err(|e| invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| invalid(format!("csv: {e}")))?;
    Ok(())
}

pub fn write_json<W: Write>(region: &RateRegion, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, region).map_err(|e| invalid(format!("json: {e}")))?;
    out.write_all(b"\n").map_err(|e| invalid(format!("json: {e}")))
}
