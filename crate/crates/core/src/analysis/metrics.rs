//! Trace metrics and a-posteriori checks of the boundedness, jump-count and
//! Lyapunov claims.

use serde::{Deserialize, Serialize};

use super::lyapunov::{sigma1, sigma2, sigma3};
use crate::sim::{ControllerSpec, JumpVariable, Scenario, SimTrace, TraceRecord};

/// Default convergence threshold on max(‖q_e‖, ‖ω_e‖).
pub const DEFAULT_ERR_THRESHOLD: f64 = 1e-3;

/// Slack of the per-step flow check: ΔV ≤ FLOW_SLACK·(1 + V).
pub const FLOW_SLACK: f64 = 1e-8;

/// Slack of the jump decrease check: ΔV ≤ −σ + JUMP_SLACK.
pub const JUMP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// First time after which the error stays below the threshold; `None`
    /// when the final sample is still above it.
    pub settling_time: Option<f64>,
    pub threshold: f64,
    /// RMS of the error over the final 20% of the horizon.
    pub steady_state_error: f64,
    pub final_error: f64,
    pub jump_count: usize,
    pub max_torque_inf_norm: f64,
    pub max_applied_torque_inf_norm: f64,
}

impl ConvergenceReport {
    pub fn converged(&self) -> bool {
        self.settling_time.is_some()
    }
}

fn inf_norm(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Settling uses the last crossing of `threshold` by max(‖q_e‖, ‖ω_e‖).
pub fn convergence_metrics(trace: &SimTrace, threshold: f64) -> ConvergenceReport {
    let recs = &trace.records;
    let errs: Vec<f64> = recs.iter().map(TraceRecord::tracking_error).collect();
    let settling_time = match errs.iter().rposition(|&e| e >= threshold) {
        None => Some(recs.first().map_or(0.0, |r| r.t)),
        Some(i) if i + 1 == recs.len() => None,
        Some(i) => Some(recs[i + 1].t),
    };
    let t_end = recs.last().map_or(0.0, |r| r.t);
    let t_start = recs.first().map_or(0.0, |r| r.t);
    let tail_from = t_end - 0.2 * (t_end - t_start);
    let tail: Vec<f64> = recs
        .iter()
        .zip(&errs)
        .filter(|(r, _)| r.t >= tail_from)
        .map(|(_, e)| *e)
        .collect();
    let steady_state_error = if tail.is_empty() {
        0.0
    } else {
        (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt()
    };
    ConvergenceReport {
        settling_time,
        threshold,
        steady_state_error,
        final_error: errs.last().copied().unwrap_or(0.0),
        jump_count: trace.jump_count(),
        max_torque_inf_norm: recs.iter().map(|r| inf_norm(&r.u_cmd)).fold(0.0, f64::max),
        max_applied_torque_inf_norm: recs.iter().map(|r| inf_norm(&r.u_applied)).fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueBoundCheck {
    pub label: String,
    pub bound: f64,
    pub max_component: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpBoundCheck {
    pub label: String,
    pub v0: f64,
    pub sigma: f64,
    /// V(0)/σ.
    pub predicted_max: f64,
    pub observed: usize,
    pub holds: bool,
    /// False when the loop's theory does not make V monotone (the h jumps
    /// of the certainty-equivalence loop); reported for information.
    pub guaranteed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallCheck {
    pub c0: f64,
    pub c1: f64,
    /// min over samples of bound(t) − V₁(t).
    pub min_margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub torque: Vec<TorqueBoundCheck>,
    pub jumps: Vec<JumpBoundCheck>,
    pub gronwall: Option<GronwallCheck>,
}

impl BoundReport {
    /// All guaranteed checks hold. The torque variants of the attitude-only
    /// loop only need one of the two printed forms to hold.
    pub fn all_hold(&self) -> bool {
        let torque_ok = self.torque.iter().any(|c| c.holds);
        torque_ok
            && self.jumps.iter().filter(|j| j.guaranteed).all(|j| j.holds)
            && self.gronwall.as_ref().is_none_or(|g| g.holds)
    }
}

/// Value of a Lyapunov column just before any jump at t = 0.
fn initial_value(trace: &SimTrace, var: JumpVariable, column: impl Fn(&TraceRecord) -> Option<f64>) -> f64 {
    trace
        .jumps
        .iter()
        .find(|e| e.step == 0 && e.variable == var)
        .map(|e| e.v_before)
        .or_else(|| trace.records.first().and_then(&column))
        .unwrap_or(f64::NAN)
}

fn jump_check(
    trace: &SimTrace,
    label: &str,
    var: JumpVariable,
    sigma: f64,
    guaranteed: bool,
    column: impl Fn(&TraceRecord) -> Option<f64>,
) -> JumpBoundCheck {
    let v0 = initial_value(trace, var, column);
    let observed = trace.jumps.iter().filter(|e| e.variable == var).count();
    let predicted_max = v0 / sigma;
    JumpBoundCheck {
        label: label.to_string(),
        v0,
        sigma,
        predicted_max,
        observed,
        holds: observed as f64 <= predicted_max,
        guaranteed,
    }
}

fn torque_check(trace: &SimTrace, label: &str, bound: f64) -> TorqueBoundCheck {
    let max_component = trace.records.iter().map(|r| inf_norm(&r.u_cmd)).fold(0.0, f64::max);
    TorqueBoundCheck {
        label: label.to_string(),
        bound,
        max_component,
        holds: max_component < bound,
    }
}

/// Torque bound, jump-count bound and (for the full-state law) the
/// Gronwall growth bound on V₁.
pub fn bound_checks(trace: &SimTrace, sc: &Scenario) -> BoundReport {
    let (w1, w2) = sc.trajectory.bounds();
    let jn = sc.inertia.norm();
    let mut torque = Vec::new();
    let mut jumps = Vec::new();
    let mut gronwall = None;
    match &sc.controller {
        ControllerSpec::FullState { gains } | ControllerSpec::BiasedGyro { gains, .. } => {
            torque.push(torque_check(
                trace,
                "k1+k2+(w1^2+w2)|J|",
                gains.k1 + gains.k2 + (w1 * w1 + w2) * jn,
            ));
            let guaranteed_h = matches!(sc.controller, ControllerSpec::FullState { .. });
            jumps.push(jump_check(
                trace,
                "h: V1(0)/sigma1",
                JumpVariable::H,
                sigma1(gains.k1, gains.alpha1, gains.delta),
                guaranteed_h,
                |r| Some(r.v1),
            ));
            if let ControllerSpec::BiasedGyro { observer, .. } = &sc.controller {
                jumps.push(jump_check(
                    trace,
                    "h_tilde: V2(0)/sigma2",
                    JumpVariable::HTilde,
                    sigma2(observer.mu2, observer.beta1, observer.delta),
                    true,
                    |r| r.v2,
                ));
            }
            let c0 = 2.0 * gains.k2 / sc.inertia.min_eigenvalue();
            let v_start = initial_value(trace, JumpVariable::H, |r| Some(r.v1));
            let c1 = v_start + 3.0 * gains.k2 / c0;
            let t0 = trace.records.first().map_or(0.0, |r| r.t);
            let min_margin = trace
                .records
                .iter()
                .map(|r| c1 * (c0 * (r.t - t0)).exp() - 3.0 * gains.k2 / c0 - r.v1)
                .fold(f64::INFINITY, f64::min);
            gronwall = Some(GronwallCheck {
                c0,
                c1,
                min_margin,
                holds: min_margin >= 0.0,
            });
        }
        ControllerSpec::AttitudeOnly { gains, .. } => {
            torque.push(torque_check(
                trace,
                "k1+k2+(w1^2+w2)|J|",
                gains.k1 + gains.k2 + (w1 * w1 + w2) * jn,
            ));
            torque.push(torque_check(
                trace,
                "k1+k2+(w1+w2)|J|",
                gains.k1 + gains.k2 + (w1 + w2) * jn,
            ));
            jumps.push(jump_check(
                trace,
                "joint: V3(0)/sigma3",
                JumpVariable::Joint,
                sigma3(gains.k1, gains.k2, gains.alpha3, gains.delta),
                true,
                |r| r.v3,
            ));
        }
    }
    BoundReport {
        torque,
        jumps,
        gronwall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovColumn {
    V1,
    V2,
    V3,
}

impl LyapunovColumn {
    pub fn get(self, r: &TraceRecord) -> Option<f64> {
        match self {
            LyapunovColumn::V1 => Some(r.v1),
            LyapunovColumn::V2 => r.v2,
            LyapunovColumn::V3 => r.v3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCheck {
    pub steps_checked: usize,
    pub violations: usize,
    /// max over steps of ΔV − slack·(1 + V); `None` when no step was checked.
    pub max_excess: Option<f64>,
    /// Largest raw per-step increase.
    pub max_increase: Option<f64>,
}

impl FlowCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Per-step ΔV along flows (steps ending in a jump are skipped).
pub fn flow_decrease_check(trace: &SimTrace, column: LyapunovColumn, slack: f64) -> FlowCheck {
    let mut out = FlowCheck {
        steps_checked: 0,
        violations: 0,
        max_excess: None,
        max_increase: None,
    };
    for w in trace.records.windows(2) {
        if w[1].jumps > 0 {
            continue;
        }
        let (Some(a), Some(b)) = (column.get(&w[0]), column.get(&w[1])) else {
            continue;
        };
        out.steps_checked += 1;
        let excess = b - a - slack * (1.0 + a);
        out.max_excess = Some(out.max_excess.map_or(excess, |m| m.max(excess)));
        out.max_increase = Some(out.max_increase.map_or(b - a, |m| m.max(b - a)));
        if excess > 0.0 {
            out.violations += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDecreaseCheck {
    pub sigma: f64,
    pub jumps: usize,
    /// min over jumps of (V_before − V_after) − σ; `None` without jumps.
    pub min_margin: Option<f64>,
}

impl JumpDecreaseCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.min_margin.is_none_or(|m| m >= -slack)
    }
}

pub fn jump_decrease_check(trace: &SimTrace, var: JumpVariable, sigma: f64) -> JumpDecreaseCheck {
    let events: Vec<_> = trace.jumps.iter().filter(|e| e.variable == var).collect();
    JumpDecreaseCheck {
        sigma,
        jumps: events.len(),
        min_margin: events.iter().map(|e| e.v_before - e.v_after - sigma).reduce(f64::min),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    /// Time of the worst sample.
    pub worst_t: f64,
}

/// Compares a five-point central difference of a Lyapunov column with a
/// closed-form derivative. Samples are skipped when a jump falls inside
/// the stencil, when |closed form| is below `floor`, or when `smooth`
/// rejects any record of the stencil.
pub fn fd_vdot_check(
    trace: &SimTrace,
    column: LyapunovColumn,
    closed_form: impl Fn(&TraceRecord) -> f64,
    floor: f64,
    smooth: impl Fn(&[TraceRecord]) -> bool,
) -> FdReport {
    let r = &trace.records;
    let mut rep = FdReport {
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
        worst_t: f64::NAN,
    };
    if r.len() < 5 {
        return rep;
    }
    for k in 2..r.len() - 2 {
        let win = &r[k - 2..=k + 2];
        let dt = (win[4].t - win[0].t) / 4.0;
        let vals: Option<Vec<f64>> = win.iter().map(|x| column.get(x)).collect();
        let cf = closed_form(&r[k]);
        let jump_inside = win[1..].iter().any(|x| x.jumps > 0);
        let Some(v) = vals else {
            rep.skipped += 1;
            continue;
        };
        if jump_inside || cf.abs() < floor || !smooth(win) {
            rep.skipped += 1;
            continue;
        }
        let fd = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * dt);
        let rel = (fd - cf).abs() / cf.abs();
        rep.checked += 1;
        if rel > rep.max_rel_error {
            rep.max_rel_error = rel;
            rep.worst_t = r[k].t;
        }
    }
    rep
}
