//! Time-dependent mechanics generated by the aff-Poisson bracket on
//! `T*M → T*M/⟨dt⟩`, frame-independent Newtonian mechanics, and a fixed-step
//! RK4 integrator.

use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::phase::{hamiltonian_vector_field, CotangentSpacetime};
use crate::report::Worst;
use crate::sampling::Point;
use crate::symexpr::{Compiled, Expr, ExprError};

/// Tolerance on `⟨τ, u⟩ = 1` and `⟨τ, v⟩ = 0`.
pub const FRAME_TOL: f64 = 1e-12;
/// World-line deviation below which two frames agree.
pub const FRAME_DEVIATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MechanicsError {
    #[error("non-finite state at step {step} (time {time})")]
    NonFinite { step: usize, time: f64 },
    #[error("invalid integration parameters: {0}")]
    InvalidStep(String),
    #[error("vector is not spatial: <tau, v> = {0:e}")]
    NotSpatial(f64),
    #[error("frame velocity must satisfy <tau, u> = 1, found {0}")]
    NotUnitTime(f64),
    #[error("metric is not symmetric positive definite")]
    NotSpd,
    #[error("degenerate space-time data: {0}")]
    Degenerate(String),
    #[error("mass must be positive and finite, found {0}")]
    Mass(f64),
    #[error("{what}: expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("Hamiltonian depends on the energy coordinate `{0}`")]
    EnergyDependence(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn dim_check(what: &'static str, expected: usize, found: usize) -> Result<(), MechanicsError> {
    if expected == found {
        Ok(())
    } else {
        Err(MechanicsError::Dimension { what, expected, found })
    }
}

/// An autonomous vector field on `ℝ^n`.
pub trait Field {
    fn dim(&self) -> usize;
    fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), ExprError>;
}

/// Vector field given by one expression per coordinate.
#[derive(Debug, Clone)]
pub struct ExprField {
    vars: Vec<String>,
    exprs: Vec<Expr>,
    compiled: Vec<Compiled>,
}

impl ExprField {
    pub fn new(vars: Vec<String>, exprs: Vec<Expr>) -> Result<Self, MechanicsError> {
        dim_check("vector field", vars.len(), exprs.len())?;
        let compiled = exprs
            .iter()
            .map(|e| Compiled::new(e, &vars))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { vars, exprs, compiled })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn components(&self) -> &[Expr] {
        &self.exprs
    }
}

impl Field for ExprField {
    fn dim(&self) -> usize {
        self.vars.len()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let mut stack = Vec::new();
        for (o, c) in out.iter_mut().zip(&self.compiled) {
            *o = c.eval(y, &mut stack)?;
        }
        Ok(())
    }
}

/// Number of RK4 steps for duration `t` and nominal step `h`: `⌈t/h⌉`, where
/// ratios within `1e-9` (relative) of an integer round to that integer. The
/// step actually taken is `t / n`.
pub fn step_count(h: f64, t: f64) -> Result<usize, MechanicsError> {
    if !(h.is_finite() && t.is_finite() && h > 0.0) {
        return Err(MechanicsError::InvalidStep(format!("step {h} and duration {t} must be finite with step > 0")));
    }
    if t < h {
        return Err(MechanicsError::InvalidStep(format!("duration {t} is shorter than the step {h}")));
    }
    let ratio = t / h;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    Ok(n as usize)
}

/// Uniformly sampled solution: `states[k]` at time `t0 + k·step`, with an
/// optional event (a point of space-time) per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub step: f64,
    pub state_names: Vec<String>,
    pub states: Vec<Vec<f64>>,
    pub event_names: Vec<String>,
    pub events: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("a trajectory has at least one row")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.state_names.iter().position(|n| n == name)?;
        Some(self.states.iter().map(|s| s[i]).collect())
    }

    /// RFC-4180 CSV, header `step,time,<state>,<event>`, values with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        let mut header = vec!["step".to_string(), "time".to_string()];
        header.extend(self.state_names.iter().cloned());
        header.extend(self.event_names.iter().cloned());
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for (k, s) in self.states.iter().enumerate() {
            row.clear();
            row.push(k.to_string());
            row.push(fmt_num(self.time(k)));
            row.extend(s.iter().map(|v| fmt_num(*v)));
            if let Some(e) = self.events.get(k) {
                row.extend(e.iter().map(|v| fmt_num(*v)));
            }
            out.write_record(&row)?;
        }
        out.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Classical fixed-step fourth-order Runge–Kutta; records every step.
pub fn integrate<F: Field + ?Sized>(
    field: &F,
    names: Vec<String>,
    y0: &[f64],
    h: f64,
    duration: f64,
) -> Result<Trajectory, MechanicsError> {
    let n = field.dim();
    dim_check("initial state", n, y0.len())?;
    dim_check("state names", n, names.len())?;
    let steps = step_count(h, duration)?;
    let dt = duration / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = y0.to_vec();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(MechanicsError::NonFinite { step: 0, time: 0.0 });
    }
    states.push(y.clone());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for step in 1..=steps {
        let fail = |_| MechanicsError::NonFinite {
            step,
            time: step as f64 * dt,
        };
        field.eval_into(&y, &mut k1).map_err(fail)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        field.eval_into(&tmp, &mut k2).map_err(fail)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        field.eval_into(&tmp, &mut k3).map_err(fail)?;
        for i in 0..n {
            tmp[i] = y[i] + dt * k3[i];
        }
        field.eval_into(&tmp, &mut k4).map_err(fail)?;
        for i in 0..n {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(fail(ExprError::Domain(String::new())));
        }
        states.push(y.clone());
    }
    Ok(Trajectory {
        t0: 0.0,
        step: dt,
        state_names: names,
        states,
        event_names: Vec::new(),
        events: Vec::new(),
    })
}

/// Time-dependent Hamiltonian system on `M = Q × T`, represented by the
/// section `Ĥ(α, t) = (α, t, −H(α, t))` of `T*M → T*M/⟨dt⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDepSystem {
    z: CotangentSpacetime,
    h: Expr,
}

impl TimeDepSystem {
    pub fn new(z: CotangentSpacetime, h: Expr) -> Result<Self, MechanicsError> {
        if h.depends_on(z.energy()) {
            return Err(MechanicsError::EnergyDependence(z.energy().to_string()));
        }
        let vars = z.quotient_vars();
        if let Some(v) = h.free_vars().into_iter().find(|v| !vars.contains(v)) {
            return Err(ExprError::Unbound(v).into());
        }
        Ok(Self { z, h })
    }

    pub fn phase(&self) -> &CotangentSpacetime {
        &self.z
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.h
    }

    /// `−H`, the fibre value of `Ĥ`.
    pub fn section(&self) -> Expr {
        (-self.h.clone()).simplify()
    }

    /// `F_Ĥ = s + H`.
    pub fn f_hat(&self) -> Expr {
        (Expr::var(self.z.energy()) + self.h.clone()).simplify()
    }

    /// `ζ_*(X_{F_Ĥ})` in the order `(q, t, p)`.
    pub fn reduced_field(&self) -> Vec<Expr> {
        let x = hamiltonian_vector_field(&self.f_hat(), &self.z.base(), &self.z.all_momenta());
        // x is ordered (q̇, ṫ, ṗ, ṡ); ζ drops ṡ.
        x[..x.len() - 1].to_vec()
    }

    /// `X_{H_t} + ∂_t`: `q̇ = ∂H/∂p`, `ṫ = 1`, `ṗ = −∂H/∂q`.
    pub fn closed_form_field(&self) -> Vec<Expr> {
        let mut out: Vec<Expr> = self.z.momenta().iter().map(|p| self.h.diff(p).simplify()).collect();
        out.push(Expr::one());
        out.extend(self.z.space().iter().map(|q| (-self.h.diff(q)).simplify()));
        out
    }

    /// Worst componentwise difference between the two fields at the samples.
    pub fn recovery_residual(&self, samples: &[Point]) -> Result<Worst, MechanicsError> {
        let names = self.z.quotient_vars();
        let a = self.reduced_field();
        let b = self.closed_form_field();
        let mut worst = Worst::new();
        for p in samples {
            for (i, (x, y)) in a.iter().zip(&b).enumerate() {
                let r = x.eval(p)? - y.eval(p)?;
                worst.observe(r, || format!("component {} at {}", names[i], crate::brackets::format_point(p)));
            }
        }
        Ok(worst)
    }

    pub fn field(&self) -> Result<ExprField, MechanicsError> {
        ExprField::new(self.z.quotient_vars(), self.reduced_field())
    }

    /// Integrates from `(q, t, p)`; rows hold `(q, p)` with the event `(q, t)`.
    pub fn integrate(&self, initial: &[f64], h: f64, duration: f64) -> Result<Trajectory, MechanicsError> {
        let d = self.z.space().len();
        dim_check("initial state", 2 * d + 1, initial.len())?;
        let raw = integrate(&self.field()?, self.z.quotient_vars(), initial, h, duration)?;
        let mut names: Vec<String> = self.z.space().to_vec();
        names.extend(self.z.momenta().iter().cloned());
        let mut event_names: Vec<String> = self.z.space().iter().map(|q| format!("event_{q}")).collect();
        event_names.push(format!("event_{}", self.z.time()));
        let states = raw
            .states
            .iter()
            .map(|y| y[..d].iter().chain(&y[d + 1..]).copied().collect())
            .collect();
        let events = raw.states.iter().map(|y| y[..=d].to_vec()).collect();
        Ok(Trajectory {
            t0: initial[d],
            step: raw.step,
            state_names: names,
            states,
            event_names,
            events,
        })
    }

    /// `H` along a trajectory produced by [`TimeDepSystem::integrate`].
    pub fn energy_along(&self, traj: &Trajectory) -> Result<Vec<f64>, MechanicsError> {
        let d = self.z.space().len();
        let c = Compiled::new(&self.h, &self.z.quotient_vars())?;
        let mut stack = Vec::new();
        traj.states
            .iter()
            .zip(&traj.events)
            .map(|(s, e)| {
                let y: Vec<f64> = s[..d].iter().chain(std::iter::once(&e[d])).chain(&s[d..]).copied().collect();
                Ok(c.eval(&y, &mut stack)?)
            })
            .collect()
    }
}

/// Free-function form of [`TimeDepSystem::reduced_field`].
pub fn timedep_dynamics(sys: &TimeDepSystem) -> Vec<Expr> {
    sys.reduced_field()
}

/// Newtonian space-time: an affine space `N` of dimension `d + 1` with
/// coordinates `x0, …, xd`, a time covector `τ`, a basis `B` of
/// `E₀ = ker τ` and a metric `G` on `E₀` in that basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSpaceTime {
    coords: Vec<String>,
    tau: DVector<f64>,
    basis: DMatrix<f64>,
    metric: DMatrix<f64>,
    metric_inv: DMatrix<f64>,
    basis_pinv: DMatrix<f64>,
}

impl NewtonSpaceTime {
    pub fn new(tau: DVector<f64>, basis: DMatrix<f64>, metric: DMatrix<f64>) -> Result<Self, MechanicsError> {
        let n = tau.len();
        if n < 2 {
            return Err(MechanicsError::Degenerate("space-time needs dimension at least 2".into()));
        }
        let d = n - 1;
        dim_check("spatial basis rows", n, basis.nrows())?;
        dim_check("spatial basis columns", d, basis.ncols())?;
        dim_check("metric", d, metric.nrows())?;
        dim_check("metric", d, metric.ncols())?;
        if tau.norm() == 0.0 {
            return Err(MechanicsError::Degenerate("time covector is zero".into()));
        }
        let leak = (basis.transpose() * &tau).amax();
        if leak > FRAME_TOL {
            return Err(MechanicsError::NotSpatial(leak));
        }
        let gram = basis.transpose() * &basis;
        let gram_inv = gram
            .clone()
            .cholesky()
            .ok_or_else(|| MechanicsError::Degenerate("spatial basis is not independent".into()))?
            .inverse();
        if (&metric - metric.transpose()).amax() > FRAME_TOL {
            return Err(MechanicsError::NotSpd);
        }
        let metric_inv = metric.clone().cholesky().ok_or(MechanicsError::NotSpd)?.inverse();
        Ok(Self {
            coords: (0..n).map(|i| format!("x{i}")).collect(),
            tau,
            basis_pinv: gram_inv * basis.transpose(),
            basis,
            metric,
            metric_inv,
        })
    }

    /// `τ = dx0`, `E₀` spanned by `∂_{x1}, …, ∂_{xd}`, Euclidean metric.
    pub fn standard(d: usize) -> Self {
        let n = d + 1;
        let mut tau = DVector::zeros(n);
        tau[0] = 1.0;
        let mut basis = DMatrix::zeros(n, d);
        for i in 0..d {
            basis[(i + 1, i)] = 1.0;
        }
        Self::new(tau, basis, DMatrix::identity(d, d)).expect("standard data is valid")
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn tau(&self) -> &DVector<f64> {
        &self.tau
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    /// `Δt(x₁, x₂) = ⟨τ, x₂ − x₁⟩`.
    pub fn time_between(&self, x1: &DVector<f64>, x2: &DVector<f64>) -> f64 {
        self.tau.dot(&(x2 - x1))
    }

    pub fn frame(&self, u: DVector<f64>) -> Result<InertialFrame, MechanicsError> {
        dim_check("frame velocity", self.tau.len(), u.len())?;
        let r = self.tau.dot(&u);
        if (r - 1.0).abs() > FRAME_TOL {
            return Err(MechanicsError::NotUnitTime(r));
        }
        Ok(InertialFrame { u })
    }

    /// Components in the basis of `E₀` of a spatial vector of `N`.
    pub fn spatial_components(&self, v: &DVector<f64>) -> Result<DVector<f64>, MechanicsError> {
        dim_check("vector", self.tau.len(), v.len())?;
        let r = self.tau.dot(v);
        if r.abs() > FRAME_TOL {
            return Err(MechanicsError::NotSpatial(r));
        }
        Ok(&self.basis_pinv * v)
    }

    pub fn embed_spatial(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.basis * q
    }

    /// `g(v)` for `v ∈ E₀` in basis components.
    pub fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.metric * v
    }

    pub fn raise(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.metric_inv * p
    }

    /// `p² / 2m` with `p² = ⟨p, g⁻¹(p)⟩`.
    pub fn kinetic(&self, p: &DVector<f64>, m: f64) -> f64 {
        0.5 * p.dot(&self.raise(p)) / m
    }
}

/// A velocity `u` with `⟨τ, u⟩ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialFrame {
    pub u: DVector<f64>,
}

/// `(x, p, s)` observed in the inertial frame `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPhase {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
    pub s: f64,
    pub u: DVector<f64>,
}

fn check_mass(m: f64) -> Result<(), MechanicsError> {
    if m.is_finite() && m > 0.0 {
        Ok(())
    } else {
        Err(MechanicsError::Mass(m))
    }
}

/// Re-expresses an observed phase in the frame `u + v` (`v ∈ E₀`):
/// `x` unchanged, `p = p′ − m g(v)`, `s = s′ + ⟨p, v⟩ + ½ m ⟨g(v), v⟩` with
/// the new `p`. With this sign the world-line `ẋ = g⁻¹(p)/m + u` is the
/// same in both frames and `s = −H_u` goes to `s = −H_{u+v}`.
pub fn gauge_transform(
    st: &NewtonSpaceTime,
    phase: &ObservedPhase,
    v: &DVector<f64>,
    m: f64,
) -> Result<ObservedPhase, MechanicsError> {
    check_mass(m)?;
    let w = st.spatial_components(v)?;
    dim_check("momentum", st.dim(), phase.p.len())?;
    let gw = st.lower(&w);
    let p = &phase.p - &gw * m;
    let s = phase.s + p.dot(&w) + 0.5 * m * gw.dot(&w);
    Ok(ObservedPhase {
        x: phase.x.clone(),
        p,
        s,
        u: &phase.u + v,
    })
}

/// Observed dynamics in a frame: state `(x, p)` with
/// `ẋ = B g⁻¹(p)/m + u`, `ṗ = −Bᵀ ∇φ(x)`.
#[derive(Debug, Clone)]
pub struct NewtonField {
    st: NewtonSpaceTime,
    u: DVector<f64>,
    m: f64,
    potential: Expr,
    grad: Vec<Compiled>,
    potential_c: Compiled,
    /// `B g⁻¹ / m`, row-major.
    velocity: Vec<f64>,
    /// `Bᵀ`, row-major.
    force: Vec<f64>,
}

/// Builds the observed dynamics for potential `φ` (an expression in the
/// space-time coordinates `x0, …, xd`).
pub fn newton_dynamics(
    st: &NewtonSpaceTime,
    frame: &InertialFrame,
    m: f64,
    potential: &Expr,
) -> Result<NewtonField, MechanicsError> {
    check_mass(m)?;
    dim_check("frame velocity", st.tau.len(), frame.u.len())?;
    let grad = st
        .coords
        .iter()
        .map(|x| Compiled::new(&potential.diff(x).simplify(), &st.coords))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NewtonField {
        st: st.clone(),
        u: frame.u.clone(),
        m,
        potential: potential.clone(),
        grad,
        potential_c: Compiled::new(potential, &st.coords)?,
        velocity: row_major(&(&st.basis * &st.metric_inv / m)),
        force: row_major(&st.basis.transpose()),
    })
}

impl NewtonField {
    pub fn frame(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn potential(&self) -> &Expr {
        &self.potential
    }

    /// `H_u(x, p) = p²/2m + φ(x)` on a state `(x, p)`.
    pub fn hamiltonian(&self, y: &[f64]) -> Result<f64, ExprError> {
        let n = self.st.tau.len();
        let p = DVector::from_column_slice(&y[n..]);
        Ok(self.st.kinetic(&p, self.m) + self.potential_c.eval(&y[..n], &mut Vec::new())?)
    }

    /// `⟨τ, ẋ⟩ − 1` at a state.
    pub fn clock_residual(&self, y: &[f64]) -> Result<f64, ExprError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(y, &mut out)?;
        let n = self.st.tau.len();
        Ok(self.st.tau.iter().zip(&out[..n]).map(|(a, b)| a * b).sum::<f64>() - 1.0)
    }

    pub fn state_names(&self) -> Vec<String> {
        let mut v = self.st.coords.clone();
        v.extend((1..=self.st.dim()).map(|i| format!("p{i}")));
        v
    }

    /// Integrates from `(x, p)`; rows hold `p` with the event `x`.
    pub fn integrate(&self, x0: &DVector<f64>, p0: &DVector<f64>, h: f64, duration: f64) -> Result<Trajectory, MechanicsError> {
        let n = self.st.tau.len();
        dim_check("event", n, x0.len())?;
        dim_check("momentum", self.st.dim(), p0.len())?;
        let y0: Vec<f64> = x0.iter().chain(p0.iter()).copied().collect();
        let raw = integrate(self, self.state_names(), &y0, h, duration)?;
        Ok(Trajectory {
            t0: 0.0,
            step: raw.step,
            state_names: raw.state_names[n..].to_vec(),
            states: raw.states.iter().map(|y| y[n..].to_vec()).collect(),
            event_names: raw.state_names[..n].to_vec(),
            events: raw.states.iter().map(|y| y[..n].to_vec()).collect(),
        })
    }

    /// Worst `|⟨τ, ẋ⟩ − 1|` along a trajectory from [`NewtonField::integrate`].
    pub fn clock_along(&self, traj: &Trajectory) -> Result<f64, ExprError> {
        let mut worst = 0.0_f64;
        for (s, e) in traj.states.iter().zip(&traj.events) {
            let y: Vec<f64> = e.iter().chain(s).copied().collect();
            worst = worst.max(self.clock_residual(&y)?.abs());
        }
        Ok(worst)
    }

    /// Worst `|H_u(z(t)) − H_u(z(0))|` along a trajectory.
    pub fn energy_drift(&self, traj: &Trajectory) -> Result<f64, ExprError> {
        let mut h0 = None;
        let mut worst = 0.0_f64;
        for (s, e) in traj.states.iter().zip(&traj.events) {
            let y: Vec<f64> = e.iter().chain(s).copied().collect();
            let h = self.hamiltonian(&y)?;
            let base = *h0.get_or_insert(h);
            worst = worst.max((h - base).abs());
        }
        Ok(worst)
    }
}

impl Field for NewtonField {
    fn dim(&self) -> usize {
        self.st.tau.len() + self.st.dim()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let n = self.st.tau.len();
        let d = self.st.dim();
        let (x, p) = y.split_at(n);
        let (xdot, pdot) = out.split_at_mut(n);
        for (i, v) in xdot.iter_mut().enumerate() {
            *v = dot(&self.velocity[i * d..(i + 1) * d], p) + self.u[i];
        }
        let mut stack = Vec::with_capacity(16);
        let mut grad = vec![0.0; n];
        for (g, c) in grad.iter_mut().zip(&self.grad) {
            *g = c.eval(x, &mut stack)?;
        }
        for (i, f) in pdot.iter_mut().enumerate() {
            *f = -dot(&self.force[i * n..(i + 1) * n], &grad);
        }
        Ok(())
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splitting of `N` by an observer through `x₀` moving with `u`:
/// `x = x₀ + B q + t u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverSplit {
    pub origin: DVector<f64>,
    pub u: DVector<f64>,
}

impl ObserverSplit {
    pub fn split(&self, st: &NewtonSpaceTime, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let t = st.time_between(&self.origin, x);
        let q = &st.basis_pinv * (x - &self.origin - &self.u * t);
        (q, t)
    }

    pub fn join(&self, st: &NewtonSpaceTime, q: &DVector<f64>, t: f64) -> DVector<f64> {
        &self.origin + st.embed_spatial(q) + &self.u * t
    }
}

/// Result of integrating the same motion in two inertial frames.
#[derive(Debug, Clone)]
pub struct FrameComparison {
    pub frames: [DVector<f64>; 2],
    pub initial: [ObservedPhase; 2],
    pub max_deviation: f64,
    pub worst_step: usize,
    pub clock_residual: f64,
    pub trajectories: [Trajectory; 2],
}

impl FrameComparison {
    pub fn pass(&self) -> bool {
        self.max_deviation < FRAME_DEVIATION_TOL
    }
}

/// Integrates in the frame of `initial` and in the frame boosted by `v`
/// (initial data gauge-transformed), and compares world-lines as events of
/// `N` at equal times.
#[allow(clippy::too_many_arguments)]
pub fn compare_frames(
    st: &NewtonSpaceTime,
    m: f64,
    potential: &Expr,
    initial: &ObservedPhase,
    v: &DVector<f64>,
    h: f64,
    duration: f64,
) -> Result<FrameComparison, MechanicsError> {
    let second = gauge_transform(st, initial, v, m)?;
    let f1 = newton_dynamics(st, &st.frame(initial.u.clone())?, m, potential)?;
    let f2 = newton_dynamics(st, &st.frame(second.u.clone())?, m, potential)?;
    let t1 = f1.integrate(&initial.x, &initial.p, h, duration)?;
    let t2 = f2.integrate(&second.x, &second.p, h, duration)?;
    let (mut max_deviation, mut worst_step) = (0.0_f64, 0);
    for (k, (a, b)) in t1.events.iter().zip(&t2.events).enumerate() {
        let dev = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if dev > max_deviation {
            max_deviation = dev;
            worst_step = k;
        }
    }
    let clock_residual = f1.clock_along(&t1)?.max(f2.clock_along(&t2)?);
    Ok(FrameComparison {
        frames: [initial.u.clone(), second.u.clone()],
        initial: [initial.clone(), second],
        max_deviation,
        worst_step,
        clock_residual,
        trajectories: [t1, t2],
    })
}

/// Named state values for reporting.
pub fn state_map(names: &[String], values: &[f64]) -> BTreeMap<String, f64> {
    names.iter().cloned().zip(values.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::grid;
    use crate::symexpr::parse_free;
    use nalgebra::dvector;

    fn e(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    fn oscillator() -> TimeDepSystem {
        TimeDepSystem::new(CotangentSpacetime::standard(1), e("p^2/2 + q^2/2")).unwrap()
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(1e-3, 10.0).unwrap(), 10000);
        assert_eq!(step_count(1e-3, 1.0).unwrap(), 1000);
        assert_eq!(step_count(0.3, 1.0).unwrap(), 4);
        assert!(step_count(0.0, 1.0).is_err());
        assert!(step_count(2.0, 1.0).is_err());
    }

    #[test]
    fn timedep_fields() {
        let osc = oscillator();
        let f = osc.reduced_field();
        let at = [("q", 0.7), ("t", 0.0), ("p", -1.3)];
        let vals: Vec<f64> = f.iter().map(|c| c.eval(&at[..]).unwrap()).collect();
        assert_eq!(vals, vec![-1.3, 1.0, -0.7]);
        let free = TimeDepSystem::new(CotangentSpacetime::standard(1), Expr::zero()).unwrap();
        assert_eq!(free.reduced_field(), vec![Expr::zero(), Expr::one(), Expr::zero()]);
        let qt = TimeDepSystem::new(CotangentSpacetime::standard(1), e("q*t")).unwrap();
        let f = qt.reduced_field();
        assert!(f[0].is_zero());
        assert_eq!(f[2].eval(&[("t", 2.5)]).unwrap(), -2.5);
        let samples = grid(&["q", "t", "p"], &[-1.0, 0.5, 2.0]);
        assert_eq!(qt.recovery_residual(&samples).unwrap().value, 0.0);
        assert_eq!(osc.f_hat().diff("s"), Expr::one());
        assert!(osc.f_hat().substitute("s", &osc.section()).simplify().eval(&[("p", 0.3), ("q", 2.0)]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rk4_exponential_and_constant() {
        let f = ExprField::new(vec!["x".into()], vec![e("x")]).unwrap();
        let t = integrate(&f, vec!["x".into()], &[1.0], 1e-3, 1.0).unwrap();
        assert!((t.last()[0] - 1f64.exp()).abs() < 1e-10);
        let z = ExprField::new(vec!["x".into()], vec![Expr::zero()]).unwrap();
        let t = integrate(&z, vec!["x".into()], &[4.2], 0.1, 1.0).unwrap();
        assert!(t.states.iter().all(|s| s[0] == 4.2));
    }

    #[test]
    fn rk4_reports_blow_up() {
        let f = ExprField::new(vec!["x".into()], vec![e("x^2")]).unwrap();
        match integrate(&f, vec!["x".into()], &[1.0], 0.1, 5.0) {
            Err(MechanicsError::NonFinite { step, .. }) => assert!(step > 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oscillator_period() {
        let osc = oscillator();
        let t = osc.integrate(&[1.0, 0.0, 0.5], 1e-3, 2.0 * std::f64::consts::PI).unwrap();
        let last = t.last();
        assert!((last[0] - 1.0).abs() < 1e-9 && (last[1] - 0.5).abs() < 1e-9, "{last:?}");
        assert_eq!(t.state_names, vec!["q", "p"]);
        assert_eq!(t.event_names, vec!["event_q", "event_t"]);
    }

    #[test]
    fn csv_shape() {
        let osc = oscillator();
        let t = osc.integrate(&[1.0, 0.0, 0.0], 0.5, 1.0).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.split("\r\n").filter(|l| !l.is_empty()).collect();
        assert_eq!(lines[0], "step,time,q,p,event_q,event_t");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0.0000000000000000e0,1.0000000000000000e0,"));
        let mut odd = t.clone();
        odd.state_names[0] = "q,\"1\"".into();
        assert!(odd.to_csv().starts_with("step,time,\"q,\"\"1\"\"\",p,"));
    }

    #[test]
    fn gauge_examples() {
        let st = NewtonSpaceTime::standard(3);
        let ph = ObservedPhase {
            x: dvector![0.0, 1.0, 2.0, 3.0],
            p: dvector![0.0, 0.0, 0.0],
            s: 2.0,
            u: dvector![1.0, 0.0, 0.0, 0.0],
        };
        let id = gauge_transform(&st, &ph, &DVector::zeros(4), 1.0).unwrap();
        assert_eq!(id, ph);
        let v = dvector![0.0, 1.0, 0.0, 0.0];
        let g = gauge_transform(&st, &ph, &v, 1.0).unwrap();
        assert_eq!(g.p, dvector![-1.0, 0.0, 0.0]);
        assert_eq!(g.s, 1.5);
        assert_eq!(g.x, ph.x);
        let back = gauge_transform(&st, &g, &-v.clone(), 1.0).unwrap();
        assert!((back.p - &ph.p).amax() < 1e-12 && (back.s - ph.s).abs() < 1e-12);
        assert!(matches!(
            gauge_transform(&st, &ph, &dvector![1.0, 0.0, 0.0, 0.0], 1.0),
            Err(MechanicsError::NotSpatial(_))
        ));
    }

    #[test]
    fn gauge_maps_hamiltonian_sections() {
        let st = NewtonSpaceTime::standard(2);
        let m = 1.7;
        let p = dvector![0.4, -1.1];
        let ph = ObservedPhase {
            x: dvector![0.0, 0.3, 0.2],
            p: p.clone(),
            s: -st.kinetic(&p, m),
            u: dvector![1.0, 0.0, 0.0],
        };
        let g = gauge_transform(&st, &ph, &dvector![0.0, 0.25, -0.6], m).unwrap();
        assert!((g.s + st.kinetic(&g.p, m)).abs() < 1e-14);
    }

    #[test]
    fn free_particle_at_rest_moves_with_frame() {
        let st = NewtonSpaceTime::standard(2);
        let frame = st.frame(dvector![1.0, 0.5, -0.2]).unwrap();
        let f = newton_dynamics(&st, &frame, 2.0, &Expr::zero()).unwrap();
        let x0 = dvector![0.0, 1.0, 1.0];
        let t = f.integrate(&x0, &DVector::zeros(2), 0.1, 1.0).unwrap();
        let end = DVector::from_column_slice(t.events.last().unwrap());
        assert!((end - (x0 + &frame.u)).amax() < 1e-14);
        assert!(f.clock_along(&t).unwrap() < 1e-12);
    }

    #[test]
    fn observer_split_reads_newtonian() {
        let st = NewtonSpaceTime::standard(2);
        let u = dvector![1.0, 0.3, 0.0];
        let split = ObserverSplit {
            origin: dvector![0.5, 0.0, 1.0],
            u: u.clone(),
        };
        let x = dvector![2.0, -1.0, 0.7];
        let (q, t) = split.split(&st, &x);
        assert!((split.join(&st, &q, t) - &x).amax() < 1e-14);
        let f = newton_dynamics(&st, &st.frame(u).unwrap(), 2.0, &e("x1^2")).unwrap();
        let y = [2.0, -1.0, 0.7, 0.4, 0.8];
        let mut dy = [0.0; 5];
        f.eval_into(&y, &mut dy).unwrap();
        let xdot = dvector![dy[0], dy[1], dy[2]];
        let qdot = &st.basis_pinv * (&xdot - &split.u * st.tau.dot(&xdot));
        assert!((st.tau.dot(&xdot) - 1.0).abs() < 1e-15);
        assert!((qdot - dvector![0.2, 0.4]).amax() < 1e-15);
        assert_eq!(dy[3], 2.0);
    }

    #[test]
    fn frames_agree_on_world_lines() {
        let st = NewtonSpaceTime::standard(1);
        let init = ObservedPhase {
            x: dvector![0.0, 1.0],
            p: dvector![0.0],
            s: 0.0,
            u: dvector![1.0, 0.0],
        };
        let cmp = compare_frames(&st, 1.0, &e("x1^2/2"), &init, &dvector![0.0, 0.3], 1e-2, 3.0).unwrap();
        assert!(cmp.pass(), "{}", cmp.max_deviation);
        let same = compare_frames(&st, 1.0, &e("x1^2/2"), &init, &dvector![0.0, 0.0], 1e-2, 3.0).unwrap();
        assert_eq!(same.max_deviation, 0.0);
        assert_eq!(same.trajectories[0], same.trajectories[1]);
    }

    #[test]
    fn rejects_bad_spacetime() {
        let tau = dvector![1.0, 0.0];
        let basis = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            NewtonSpaceTime::new(tau.clone(), basis.clone(), DMatrix::from_element(1, 1, -1.0)),
            Err(MechanicsError::NotSpd)
        ));
        let tilted = DMatrix::from_column_slice(2, 1, &[0.5, 1.0]);
        assert!(matches!(
            NewtonSpaceTime::new(tau, tilted, DMatrix::identity(1, 1)),
            Err(MechanicsError::NotSpatial(_))
        ));
        let st = NewtonSpaceTime::standard(1);
        assert!(matches!(st.frame(dvector![2.0, 0.0]), Err(MechanicsError::NotUnitTime(_))));
    }
}
