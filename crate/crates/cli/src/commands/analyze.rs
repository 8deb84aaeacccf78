use rossler_knots::dynamics::{check_assumptions, eval_field};
use serde_json::json;

use crate::config::RunConfig;
use crate::report::{to_value, Artifacts, Report};
use crate::CliError;

/// Fixed points, their spectra and the assumption verdicts. A failed assumption is recorded
/// in the diagnostics, never raised.
pub fn analyze(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.params;
    let rep = check_assumptions(&p);
    let fixed = p.fixed_points().ok().map(|(pin, pout)| {
        json!({
            "p_in": [pin.x, pin.y, pin.z],
            "p_out": [pout.x, pout.y, pout.z],
            "field_norm_p_in": eval_field(&p, &pin).norm(),
            "field_norm_p_out": eval_field(&p, &pout).norm(),
        })
    });
    let mut diagnostics = Vec::new();
    if !rep.ranges {
        diagnostics.push("parameter ranges: a, b in (0, 1) and c > 1 do not hold".to_string());
    }
    if !rep.opposing_saddle_foci {
        diagnostics.push("fixed points are not saddle-foci of opposing type".to_string());
    }
    if !rep.shilnikov {
        diagnostics.push("neither saddle index is below 1".to_string());
    }
    diagnostics.extend(rep.notes.iter().cloned());
    let results = json!({
        "fixed_points": fixed,
        "assumptions": to_value(&rep),
    });
    Ok(Artifacts::report(Report::new("analyze", cfg, results, diagnostics)))
}
