//! Browser demo: bracket of vector fields, Hamiltonian flow with explicit
//! time, and the same motion seen from two inertial frames.

use affgeo::brackets::commutator;
use affgeo::mechanics::{compare_frames, NewtonSpaceTime, ObservedPhase, TimeDepSystem};
use affgeo::phase::CotangentSpacetime;
use affgeo::symexpr::{parse, Expr, VarContext, VarRole};
use nalgebra::DVector;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Most points returned for plotting.
const PLOT_POINTS: usize = 600;

fn exprs(text: &str, vars: &[String]) -> Result<Vec<Expr>, String> {
    let ctx = VarContext::from_names(vars, VarRole::Base).map_err(|e| e.to_string())?;
    text.split(';')
        .map(|c| parse(c.trim(), &ctx).map_err(|e| format!("`{}`: {e}", c.trim())))
        .collect()
}

fn names(list: &str) -> Result<Vec<String>, String> {
    let vars: Vec<String> = list.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if vars.is_empty() {
        return Err("no coordinates given".into());
    }
    Ok(vars)
}

/// `[X, Y]` of two vector fields on coordinates `base` (comma separated);
/// components are separated by `;`.
pub fn field_bracket(base: &str, x: &str, y: &str) -> Result<String, String> {
    let base = names(base)?;
    let (x, y) = (exprs(x, &base)?, exprs(y, &base)?);
    for (label, f) in [("X", &x), ("Y", &y)] {
        if f.len() != base.len() {
            return Err(format!("{label} has {} components for {} coordinates", f.len(), base.len()));
        }
    }
    let parts: Vec<String> = commutator(&x, &y, &base).iter().map(|c| c.expand().to_string()).collect();
    Ok(format!("({})", parts.join("; ")))
}

#[derive(Debug, Serialize)]
pub struct Flow {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub energy: Vec<f64>,
}

/// RK4 flow of a one-degree-of-freedom `H(q, t, p)` from `(q0, t0, p0)`.
pub fn hamiltonian_flow(h: &str, q0: f64, t0: f64, p0: f64, step: f64, duration: f64) -> Result<Flow, String> {
    let z = CotangentSpacetime::standard(1);
    let h = exprs(h, &z.quotient_vars())?.pop().ok_or("empty Hamiltonian")?;
    let sys = TimeDepSystem::new(z, h).map_err(|e| e.to_string())?;
    let traj = sys.integrate(&[q0, t0, p0], step, duration).map_err(|e| e.to_string())?;
    let energy = sys.energy_along(&traj).map_err(|e| e.to_string())?;
    let stride = traj.len().div_ceil(PLOT_POINTS).max(1);
    let mut flow = Flow {
        t: Vec::new(),
        q: Vec::new(),
        p: Vec::new(),
        energy: Vec::new(),
    };
    for k in (0..traj.len()).step_by(stride) {
        flow.t.push(traj.time(k));
        flow.q.push(traj.states[k][0]);
        flow.p.push(traj.states[k][1]);
        flow.energy.push(energy[k]);
    }
    Ok(flow)
}

#[derive(Debug, Serialize)]
pub struct Frames {
    pub max_deviation: f64,
    pub clock_residual: f64,
    pub pass: bool,
    /// Spatial event coordinates `(x1, x2)` seen from the rest frame.
    pub rest: Vec<[f64; 2]>,
    /// The same motion integrated in the boosted frame.
    pub boosted: Vec<[f64; 2]>,
}

/// Planar motion in potential `phi(x0, x1, x2)`, integrated in the rest
/// frame and in the frame moving with velocity `boost`.
pub fn frame_comparison(
    phi: &str,
    mass: f64,
    position: [f64; 2],
    momentum: [f64; 2],
    boost: [f64; 2],
    step: f64,
    duration: f64,
) -> Result<Frames, String> {
    let st = NewtonSpaceTime::standard(2);
    let phi = exprs(phi, st.coords())?.pop().ok_or("empty potential")?;
    let initial = ObservedPhase {
        x: DVector::from_vec(vec![0.0, position[0], position[1]]),
        p: DVector::from_row_slice(&momentum),
        s: 0.0,
        u: DVector::from_vec(vec![1.0, 0.0, 0.0]),
    };
    let v = st.embed_spatial(&DVector::from_row_slice(&boost));
    let cmp = compare_frames(&st, mass, &phi, &initial, &v, step, duration).map_err(|e| e.to_string())?;
    let stride = cmp.trajectories[0].len().div_ceil(PLOT_POINTS).max(1);
    let plane = |k: usize| -> Vec<[f64; 2]> {
        cmp.trajectories[k].events.iter().step_by(stride).map(|e| [e[1], e[2]]).collect()
    };
    Ok(Frames {
        max_deviation: cmp.max_deviation,
        clock_residual: cmp.clock_residual,
        pass: cmp.pass(),
        rest: plane(0),
        boosted: plane(1),
    })
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = fieldBracket)]
pub fn field_bracket_js(base: &str, x: &str, y: &str) -> Result<String, JsError> {
    field_bracket(base, x, y).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = hamiltonianFlow)]
pub fn hamiltonian_flow_js(h: &str, q0: f64, t0: f64, p0: f64, step: f64, duration: f64) -> Result<String, JsError> {
    json(hamiltonian_flow(h, q0, t0, p0, step, duration))
}

#[wasm_bindgen(js_name = frameComparison)]
#[allow(clippy::too_many_arguments)]
pub fn frame_comparison_js(
    phi: &str,
    mass: f64,
    x1: f64,
    x2: f64,
    p1: f64,
    p2: f64,
    v1: f64,
    v2: f64,
    step: f64,
    duration: f64,
) -> Result<String, JsError> {
    json(frame_comparison(phi, mass, [x1, x2], [p1, p2], [v1, v2], step, duration))
}
