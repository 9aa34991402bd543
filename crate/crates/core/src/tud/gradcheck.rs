use serde::Serialize;

use super::model::TudModel;
use super::Sequence;
use crate::{Error, Result};

/// Step of the five-point central-difference stencil.
pub const FD_STEP: f64 = 1e-3;
/// Largest hidden size accepted by [`gradient_check`].
pub const MAX_CHECK_HIDDEN: usize = 8;
/// Entries where both gradients are below this magnitude are not compared.
pub const GRAD_FLOOR: f64 = 1e-8;
/// A prediction this close to its label has a vanishing loss gradient.
const SATURATION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Largest relative error per parameter block.
    pub per_block: Vec<(String, f64)>,
    pub checked: usize,
    /// The output sat on the label, so no entries were compared.
    pub saturated: bool,
}

/// Compare analytic BCE gradients with fourth-order central differences.
pub fn gradient_check(model: &TudModel, seq: &Sequence, label: bool) -> Result<GradCheckReport> {
    if model.dims().hidden > MAX_CHECK_HIDDEN {
        return Err(Error::Config(format!(
            "gradient check needs hidden size <= {MAX_CHECK_HIDDEN}, got {}",
            model.dims().hidden
        )));
    }
    let y = f64::from(u8::from(label));
    let mut analytic = vec![0.0; model.params().len()];
    model.accumulate_gradient(seq, y, None, &mut analytic)?;
    let p = model.probability(seq)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_block: Vec::new(),
        checked: 0,
        saturated: false,
    };
    if (p - y).abs() < SATURATION {
        report.saturated = true;
        return Ok(report);
    }
    let mut probe = model.clone();
    for (name, range) in model.block_ranges() {
        let mut worst = 0.0f64;
        for k in range {
            let orig = probe.params()[k];
            let mut at = |offset: f64| -> Result<f64> {
                probe.params_mut()[k] = orig + offset;
                let l = probe.loss(seq, y);
                probe.params_mut()[k] = orig;
                l
            };
            let h = FD_STEP;
            let near = at(h)? - at(-h)?;
            let far = at(2.0 * h)? - at(-2.0 * h)?;
            let numeric = (8.0 * near - far) / (12.0 * h);
            let scale = analytic[k].abs().max(numeric.abs());
            if scale < GRAD_FLOOR {
                continue;
            }
            worst = worst.max((analytic[k] - numeric).abs() / scale);
            report.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        report.per_block.push((name.to_string(), worst));
    }
    Ok(report)
}
