//! Central finite-difference verification of analytic gradients.

use super::grad::Gradients;
use crate::error::Result;
use crate::store::{ParamId, ParamStore};

/// Denominator floor for the relative error, so that entries where both
/// gradients are essentially zero are judged on absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub group: String,
    pub entries: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

/// Compares `analytic` against `(L(θ+h) - L(θ-h)) / 2h` for every entry of
/// every parameter accepted by `include`. Parameters without an analytic
/// buffer are treated as having zero gradient.
pub fn check_gradients(
    store: &ParamStore,
    analytic: &Gradients,
    step: f64,
    include: impl Fn(ParamId) -> bool,
    loss: impl Fn(&ParamStore) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut probe = store.clone();
    let mut groups: Vec<GroupCheck> = Vec::new();
    let mut worst = None;
    let mut max_rel_err = 0.0f64;

    for id in store.ids().filter(|&id| include(id)) {
        let group = store.group_of(id).to_string();
        let n = store.get(id).len();
        let mut group_max = 0.0f64;
        for i in 0..n {
            let orig = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + step;
            let plus = loss(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig - step;
            let minus = loss(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(id).map_or(0.0, |g| g[i]);
            let err = relative_error(a, numeric);
            if err > max_rel_err || worst.is_none() {
                max_rel_err = max_rel_err.max(err);
                worst = Some((store.name(id).to_string(), i));
            }
            group_max = group_max.max(err);
        }
        match groups.iter_mut().find(|g| g.group == group) {
            Some(g) => {
                g.entries += n;
                g.max_rel_err = g.max_rel_err.max(group_max);
            }
            None => groups.push(GroupCheck {
                group,
                entries: n,
                max_rel_err: group_max,
            }),
        }
    }
    Ok(GradCheckReport {
        groups,
        max_rel_err,
        worst,
    })
}
