use std::fs;
use std::path::Path;

use affgeo::affine::{AffineMap, AffineSpaceSpec, BiAffineMap};
use affgeo::brackets::{
    atiyah_algebroid, clocked_atiyah, format_point, hull_extend, is_aff_poisson, random_affine_section,
    unit_time_fields, verify_affgebra, verify_affgebroid, verify_hull_extension, AffJacobiBracket, LieAffgebraData,
    LieAffgebroidData, RESIDUAL_TOL,
};
use affgeo::duality::{chi_derivative, dual_dimension, f_of_section, SpecialAffineSpace};
use affgeo::mechanics::{
    compare_frames, gauge_transform, newton_dynamics, NewtonSpaceTime, ObservedPhase, ObserverSplit, TimeDepSystem,
    FRAME_DEVIATION_TOL,
};
use affgeo::phase::{
    bold_d_oneform, canonical_poisson, canonical_two_form, check_affine_reduction, omega_z_via, AffineOneForm,
    AvBundle, CotangentSpacetime, ReductionMap,
};
use affgeo::report::{Check, CheckReport, Worst};
use affgeo::sampling::{grid, random_points};
use affgeo::symexpr::Expr;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::*;
use crate::RunError;

const EXACT: f64 = 1e-12;

/// World-line comparison of one potential under one boost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub potential: String,
    pub boost: Vec<f64>,
    pub frames: [Vec<f64>; 2],
    pub max_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub kind: Kind,
    pub description: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<Comparison>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.report.pass
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes") + "\n"
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

fn domain(e: impl std::fmt::Display) -> RunError {
    RunError::Domain(e.to_string())
}

fn bad(msg: impl Into<String>) -> RunError {
    RunError::Parse(msg.into())
}

struct Acc {
    report: CheckReport,
    comparisons: Vec<Comparison>,
    artifacts: Vec<Artifact>,
}

impl Acc {
    fn push(&mut self, c: Check) {
        self.report.push(c);
    }

    fn below(&mut self, name: impl Into<String>, worst: Worst, tol: f64) {
        self.report.push(Check::below(name, worst, tol));
    }

    /// Adds `checks` under `prefix:`.
    fn prefixed(&mut self, prefix: &str, checks: CheckReport) {
        for mut c in checks.checks {
            c.check = format!("{prefix}:{}", c.check);
            self.report.push(c);
        }
    }

    /// A check that passes iff `checks` fail and name a witness.
    fn rejected(&mut self, name: impl Into<String>, checks: &CheckReport) {
        let failed: Vec<&Check> = checks.failures().collect();
        let witness = failed.iter().find_map(|c| c.witness.clone().map(|w| format!("{}: {w}", c.check)));
        let residual = failed.iter().map(|c| c.residual).fold(0.0, f64::max);
        let pass = !failed.is_empty() && witness.is_some();
        let witness = witness.or_else(|| Some("no counterexample found".to_string()));
        self.report.push(Check::new(name, pass, residual, witness));
    }
}

/// Runs a scenario; `seed` overrides the scenario's own seed.
pub fn run(s: &Scenario, seed: Option<u64>) -> Result<Outcome, RunError> {
    let seed = seed.unwrap_or(s.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Acc {
        report: CheckReport::new(),
        comparisons: Vec::new(),
        artifacts: Vec::new(),
    };
    let section = || bad(format!("missing [{}] section", section_name(s.kind)));
    match s.kind {
        Kind::AffineAxioms => affine_axioms(s.affine.as_ref().ok_or_else(section)?, &mut rng, &mut acc)?,
        Kind::Duality => duality(s.duality.as_ref().ok_or_else(section)?, &mut rng, &mut acc)?,
        Kind::AffgebraVerify => affgebra(s.affgebra.as_ref().ok_or_else(section)?, &mut rng, &mut acc)?,
        Kind::AffgebroidVerify => affgebroid(s.affgebroid.as_ref().ok_or_else(section)?, seed, &mut rng, &mut acc)?,
        Kind::AffPoisson => aff_poisson(s.aff_poisson.as_ref().ok_or_else(section)?, &mut rng, &mut acc)?,
        Kind::TwoForm => two_form(s.two_form.as_ref().ok_or_else(section)?, &mut rng, &mut acc)?,
        Kind::ReductionCheck => reduction(s.reduction.as_ref().ok_or_else(section)?, &mut acc)?,
        Kind::Timedep => timedep(&s.id, s.timedep.as_ref().ok_or_else(section)?, &mut rng, &mut acc)?,
        Kind::Newton => newton(&s.id, s.newton.as_ref().ok_or_else(section)?, &mut acc)?,
        Kind::CompareFrames => compare(s.compare.as_ref().ok_or_else(section)?, &mut rng, &mut acc)?,
    }
    let report = Report {
        scenario: s.id.clone(),
        kind: s.kind,
        description: s.description.clone(),
        seed,
        pass: acc.report.pass(),
        checks: acc.report.checks,
        comparisons: acc.comparisons,
        artifacts: acc.artifacts.iter().map(|a| a.name.clone()).collect(),
    };
    Ok(Outcome {
        report,
        artifacts: acc.artifacts,
    })
}

/// Writes `<id>.report.json` and every artifact into `dir`.
pub fn write_outcome(outcome: &Outcome, dir: &Path) -> Result<Vec<std::path::PathBuf>, RunError> {
    let out = |e: std::io::Error| RunError::Output(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(out)?;
    let mut written = Vec::new();
    let report = dir.join(format!("{}.report.json", outcome.report.scenario));
    fs::write(&report, outcome.report_json()).map_err(out)?;
    written.push(report);
    for a in &outcome.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).map_err(out)?;
        written.push(path);
    }
    Ok(written)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..=scale))
}

fn uniform_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-scale..=scale))
}

fn resolve_matrix(spec: &MatrixSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>, RunError> {
    match spec {
        MatrixSpec::Named(name) => match name.as_str() {
            "zero" => Ok(DMatrix::zeros(n, n)),
            "identity" => Ok(DMatrix::identity(n, n)),
            "random" => Ok(uniform_mat(rng, n, n, 1.0)),
            other => Err(bad(format!("unknown matrix `{other}` (expected zero, identity, random or rows)"))),
        },
        MatrixSpec::Rows(rows) => matrix_rows(rows, n, n, "matrix d"),
    }
}

fn affgebra_data(
    dim: usize,
    bilinear: BilinearPart,
    d: &MatrixSpec,
    rng: &mut ChaCha8Rng,
) -> Result<LieAffgebraData, RunError> {
    let d = resolve_matrix(d, dim, rng)?;
    match bilinear {
        BilinearPart::Abelian => Ok(LieAffgebraData::abelian(d)),
        BilinearPart::CrossProduct if dim == 3 => LieAffgebraData::cross_product(d).map_err(domain),
        BilinearPart::CrossProduct => Err(bad("the cross-product bracket needs dim = 3")),
    }
}

fn build_structure(spec: &StructureSpec, rng: &mut ChaCha8Rng) -> Result<LieAffgebroidData, RunError> {
    match spec {
        StructureSpec::UnitTimeFields { space, time } => unit_time_fields(space, time).map_err(domain),
        StructureSpec::ClockedAtiyah { space, time } => clocked_atiyah(space, time).map_err(domain),
        StructureSpec::Atiyah { base } => atiyah_algebroid(base).map_err(domain),
        StructureSpec::Affgebra {
            dim,
            bilinear,
            d,
            distinguished,
        } => {
            let mut data = affgebra_data(*dim, *bilinear, d, rng)?;
            if let Some(v) = distinguished {
                data = data.with_distinguished(vector(v, *dim, "distinguished")?).map_err(|e| bad(e.to_string()))?;
            }
            Ok(data.to_affgebroid())
        }
    }
}

fn affine_axioms(cfg: &AffineSection, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    let n = cfg.dim;
    let mut space = AffineSpaceSpec::new("A", n, "ref");
    let mut charts = vec!["ref".to_string()];
    for c in &cfg.charts {
        let m = matrix_rows(&c.matrix, n, n, &format!("chart {}", c.name))?;
        let b = vector(&c.offset, n, &format!("chart {} offset", c.name))?;
        space = space.with_chart(&c.name, m, b).map_err(|e| bad(e.to_string()))?;
        charts.push(c.name.clone());
    }
    let k = cfg.biaffine_outputs;
    let map = AffineMap::new(uniform_mat(rng, k, n, 1.0), uniform_vec(rng, k, 1.0)).map_err(domain)?;
    let mut cocycle = Worst::new();
    let mut chart_indep = Worst::new();
    for i in 0..cfg.samples {
        let pick = |rng: &mut ChaCha8Rng| charts[rng.gen_range(0..charts.len())].clone();
        let (c1, c2, c3) = (pick(rng), pick(rng), pick(rng));
        let a1 = space.point(&c1, uniform_vec(rng, n, 5.0)).map_err(domain)?;
        let a2 = space.point(&c2, uniform_vec(rng, n, 5.0)).map_err(domain)?;
        let a3 = space.point(&c3, uniform_vec(rng, n, 5.0)).map_err(domain)?;
        let r = space.cocycle_check(&a1, &a2, &a3).map_err(domain)?;
        cocycle.observe(r, || format!("sample {i} in charts ({c1}, {c2}, {c3})"));

        let target = pick(rng);
        let d1 = space.vector_to_reference(&space.difference(&a1, &a2).map_err(domain)?).map_err(domain)?;
        let (b1, b2) = (space.convert(&a1, &target).map_err(domain)?, space.convert(&a2, &target).map_err(domain)?);
        let d2 = space.vector_to_reference(&space.difference(&b1, &b2).map_err(domain)?).map_err(domain)?;
        let f1 = map.apply_point(&space, &a1).map_err(domain)?;
        let f2 = map.apply_point(&space, &b1).map_err(domain)?;
        let r = (d1 - d2).amax().max((f1 - f2).amax());
        chart_indep.observe(r, || format!("sample {i}: {c1} vs {target}"));
    }
    acc.below("cocycle", cocycle, EXACT);
    acc.below("chart_independence", chart_indep, EXACT);

    let phi = BiAffineMap::new(
        (0..k).map(|_| uniform_mat(rng, n, n, 1.0)).collect(),
        uniform_mat(rng, k, n, 1.0),
        uniform_mat(rng, k, n, 1.0),
        uniform_vec(rng, k, 1.0),
    )
    .map_err(domain)?;
    let parts = phi.parts();
    let mut worst = Worst::new();
    for i in 0..cfg.samples {
        let (x, y, u, w) = (
            uniform_vec(rng, n, 3.0),
            uniform_vec(rng, n, 3.0),
            uniform_vec(rng, n, 3.0),
            uniform_vec(rng, n, 3.0),
        );
        let ap = |a: &DVector<f64>, b: &DVector<f64>| phi.apply(a, b).map_err(domain);
        let (xu, yw) = (&x + &u, &y + &w);
        let first = ap(&xu, &y)? - ap(&x, &y)? - parts.first(&u, &y).map_err(domain)?;
        let second = ap(&x, &yw)? - ap(&x, &y)? - parts.second(&x, &w).map_err(domain)?;
        let mixed = ap(&xu, &yw)? - ap(&xu, &y)? - ap(&x, &yw)? + ap(&x, &y)? - parts.bilinear(&u, &w).map_err(domain)?;
        let r = first.amax().max(second.amax()).max(mixed.amax());
        worst.observe(r, || format!("sample {i}"));
    }
    acc.below("biaffine_parts", worst, EXACT);
    Ok(())
}

fn duality(cfg: &DualitySection, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    let mut hull_dim = Worst::new();
    let mut round_trip = Worst::new();
    let mut membership = Worst::new();
    for &n in &cfg.dims {
        if n == 0 {
            return Err(bad("dimensions must be positive"));
        }
        let chart = DMatrix::identity(n, n) + uniform_mat(rng, n, n, 0.2);
        let space = AffineSpaceSpec::new("A", n, "ref")
            .with_chart("alt", chart, uniform_vec(rng, n, 2.0))
            .map_err(domain)?;
        let dd = dual_dimension(&space);
        hull_dim.observe(dd as f64 - (n + 1) as f64, || format!("n = {n}: dim = {dd}"));
        let v = loop {
            let v = uniform_vec(rng, n, 2.0);
            if v.amax() > 0.1 {
                break v;
            }
        };
        let special = SpecialAffineSpace::new(space, v).map_err(domain)?;
        let double = special.double_dual();
        let sd = special.special_dual();
        for i in 0..cfg.points {
            let a = uniform_vec(rng, n, 5.0);
            let u = uniform_vec(rng, n, 5.0);
            let back = double.from_double(&double.to_double(&a)).map_err(domain)?;
            let vback = double.vector_from_double(&double.vector_to_double(&u)).map_err(domain)?;
            let r = (back - &a).amax().max((vback - &u).amax());
            round_trip.observe(r, || format!("n = {n}, point {i}"));
            let coords = uniform_vec(rng, sd.dim(), 3.0);
            let elt = sd.element(&coords).map_err(domain)?;
            let back = sd.coords(&elt).map_err(domain)?;
            let r = sd.constraint_residual(&elt).abs().max((back - &coords).amax());
            membership.observe(r, || format!("n = {n}, element {i}"));
        }
    }
    acc.below("hull_dimension", hull_dim, 0.5);
    acc.below("double_dual_round_trip", round_trip, EXACT);
    acc.below("special_dual_coordinates", membership, EXACT);

    if cfg.base.contains(&cfg.fiber) {
        return Err(bad(format!("fibre coordinate `{}` is also a base coordinate", cfg.fiber)));
    }
    let mut unit = Worst::new();
    let mut vanish = Worst::new();
    let mut chi = Worst::new();
    for text in &cfg.sections {
        let sigma = expr_in(text, &cfg.base, "section")?;
        let f = f_of_section(&sigma, &cfg.fiber).map_err(domain)?;
        let ds = f.diff(&cfg.fiber).simplify();
        unit.observe(if ds.is_one() { 0.0 } else { 1.0 }, || format!("dF/d{} = {ds} for {text}", cfg.fiber));
        let on = f.substitute(&cfg.fiber, &sigma).simplify();
        vanish.observe(if on.is_zero() { 0.0 } else { 1.0 }, || format!("F o sigma = {on} for {text}"));
        let c = chi_derivative(&f, &cfg.fiber);
        chi.observe(if c.as_constant() == Some(-1.0) { 0.0 } else { 1.0 }, || format!("chi(F) = {c} for {text}"));
    }
    acc.below("f_sigma_unit_derivative", unit, 0.5);
    acc.below("f_sigma_vanishes_on_section", vanish, 0.5);
    acc.below("f_sigma_chi", chi, 0.5);
    Ok(())
}

fn affgebra(cfg: &AffgebraSection, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    for case in &cfg.cases {
        let data = affgebra_data(case.dim, case.bilinear, &case.d, rng)?;
        let report = verify_affgebra(&data);
        match case.expect {
            Some(Expect::Fail) => acc.rejected(format!("{}:rejected", case.name), &report),
            _ => acc.prefixed(&case.name, report),
        }
    }
    Ok(())
}

fn affgebroid(cfg: &AffgebroidSection, seed: u64, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    let mut data = build_structure(&cfg.structure, rng)?;
    if let Some(k) = cfg.anchor_scale {
        data = data.with_scaled_anchor(k);
    }
    let samples = grid(data.base(), &cfg.grid);
    let report = verify_affgebroid(&data, &samples, seed).map_err(domain)?;
    let verified = report.pass();
    acc.report.extend(report);
    if cfg.hull {
        if verified {
            let hull = hull_extend(&data, &samples, seed).map_err(domain)?;
            let report = verify_hull_extension(&data, &hull, &samples, seed).map_err(domain)?;
            acc.prefixed("hull", report);
        } else {
            acc.push(Check::new(
                "hull:extension",
                false,
                f64::INFINITY,
                Some("input is not a Lie affgebroid".into()),
            ));
        }
    }
    Ok(())
}

fn aff_poisson(cfg: &AffPoissonSection, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    for base in &cfg.canonical_bases {
        let momenta: Vec<String> = base.iter().map(|x| format!("p_{x}")).collect();
        let mut dual_names = momenta.clone();
        dual_names.push("e".into());
        let b = AffJacobiBracket::new(atiyah_algebroid(base).map_err(domain)?, dual_names, "s")
            .map_err(|e| bad(e.to_string()))?;
        if b.quotient_names() != momenta {
            return Err(domain("unexpected quotient coordinates for the Atiyah dual"));
        }
        let mut worst = Worst::new();
        for _ in 0..cfg.pairs {
            let s1 = random_affine_section(rng, base, &momenta);
            let s2 = random_affine_section(rng, base, &momenta);
            let got = b.bracket(&s1, &s2).map_err(domain)?;
            let want = canonical_poisson(&s1, &s2, base, &momenta);
            for p in random_points(rng, &b.vars(), cfg.points, -2.0, 2.0) {
                let r = got.eval(&p).map_err(domain)? - want.eval(&p).map_err(domain)?;
                worst.observe(r, || format!("sigma={s1}, sigma'={s2} at {}", format_point(&p)));
            }
        }
        acc.below(format!("canonical:{}", base.join(",")), worst, RESIDUAL_TOL);
    }
    for s in &cfg.structures {
        let data = build_structure(&s.structure, rng)?;
        let b = AffJacobiBracket::with_default_names(data)
            .map_err(|e| bad(format!("structure {}: {e}", s.name)))?;
        let samples = grid(&b.vars(), &cfg.grid);
        let r = is_aff_poisson(&b, &samples).map_err(domain)?;
        let verdict = |c: &Check| if c.pass { "holds" } else { "fails" };
        acc.push(Check::new(
            format!("criteria_agree:{}", s.name),
            r.criteria_agree(),
            r.derivation.residual.max(r.centrality.residual),
            Some(format!(
                "derivation {} ({:e}), centrality {} ({:e})",
                verdict(&r.derivation),
                r.derivation.residual,
                verdict(&r.centrality),
                r.centrality.residual
            )),
        ));
    }
    Ok(())
}

fn two_form(cfg: &TwoFormSection, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    if cfg.sections.is_empty() {
        return Err(bad("at least one section is required"));
    }
    let mut bundle = AvBundle::new(cfg.base.clone(), cfg.momenta.clone(), &cfg.fiber).map_err(|e| bad(e.to_string()))?;
    let mut tags = Vec::new();
    let mut sections = Vec::new();
    for (i, text) in cfg.sections.iter().enumerate() {
        let sigma = expr_in(text, &cfg.base, "section")?;
        let tag = format!("section{i}");
        bundle.register(&tag, sigma.clone()).map_err(|e| bad(e.to_string()))?;
        tags.push(tag);
        sections.push(sigma);
    }
    let samples = grid(&bundle.phase_vars(), &cfg.grid);
    let reference = omega_z_via(&bundle, &tags[0]).map_err(domain)?;
    let mut invariance = Worst::new();
    for (tag, text) in tags.iter().zip(&cfg.sections).skip(1) {
        let other = omega_z_via(&bundle, tag).map_err(domain)?;
        let r = reference.max_deviation(&other, &samples).map_err(domain)?;
        invariance.observe(r, || format!("via {text} vs via {}", cfg.sections[0]));
    }
    acc.below("omega_invariance", invariance, EXACT);
    let canonical = canonical_two_form(&cfg.base, &cfg.momenta);
    let mut worst = Worst::new();
    worst.observe(reference.max_deviation(&canonical, &samples).map_err(domain)?, || {
        "omega_Z vs canonical form".into()
    });
    acc.below("omega_canonical", worst, EXACT);

    for _ in 0..cfg.random_sections {
        sections.push(Expr::random_polynomial(rng, &cfg.base, 3, 5));
    }
    let mut dd = Worst::new();
    for sigma in &sections {
        for tag in &tags {
            let alpha = AffineOneForm::of_section(&bundle, sigma, tag).map_err(domain)?;
            let r = bold_d_oneform(&bundle, &alpha).map_err(domain)?.max_abs(&samples).map_err(domain)?;
            dd.observe(r, || format!("sigma={sigma} in tag {tag}"));
        }
    }
    acc.below("bold_d_squared", dd, EXACT);
    Ok(())
}

fn reduction(cfg: &ReductionSection, acc: &mut Acc) -> Result<(), RunError> {
    let z = CotangentSpacetime::standard(cfg.dim);
    let vars = z.quotient_vars();
    let mut total = z.total_vars();
    if total.contains(&cfg.fiber) {
        return Err(bad(format!("fibre coordinate `{}` clashes with a phase coordinate", cfg.fiber)));
    }
    let sections = cfg
        .sections
        .iter()
        .map(|t| expr_in(t, &vars, "section"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pairs = Vec::new();
    for i in 0..sections.len() {
        for j in i + 1..sections.len() {
            pairs.push((sections[i].clone(), sections[j].clone()));
        }
    }
    if pairs.is_empty() {
        return Err(bad("at least two sections are required"));
    }
    let phase_samples = grid(&total, &cfg.grid);
    let mut constancy = Worst::new();
    for (a, b) in &pairs {
        let r = z.fiber_constancy_residual(a, b, &phase_samples).map_err(domain)?;
        constancy.observe(r, || format!("sigma={a}, sigma'={b}"));
    }
    acc.below("fiber_constancy", constancy, RESIDUAL_TOL);
    total.push(cfg.fiber.clone());
    let samples = grid(&total, &cfg.grid);
    for v in &cfg.variants {
        let (rho, label) = match v.map {
            ReductionKind::Standard => (ReductionMap::standard(&z, &cfg.fiber), "standard"),
            ReductionKind::Flipped => (ReductionMap::flipped(&z, &cfg.fiber), "flipped"),
        };
        let report = check_affine_reduction(&z, &rho, &pairs, &samples).map_err(domain)?;
        match v.expect {
            Expect::Pass => acc.prefixed(label, report),
            Expect::Fail => acc.rejected(format!("{label}:rejected"), &report),
        }
    }
    Ok(())
}

fn timedep(id: &str, cfg: &TimedepSection, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    let z = CotangentSpacetime::standard(cfg.dim);
    let vars = z.quotient_vars();
    let h = expr_in(&cfg.hamiltonian, &vars, "hamiltonian")?;
    let sys = TimeDepSystem::new(z.clone(), h.clone()).map_err(|e| bad(e.to_string()))?;
    let initial = vars
        .iter()
        .map(|v| cfg.initial.get(v).copied().ok_or_else(|| bad(format!("initial value for `{v}` missing"))))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = cfg.initial.keys().find(|k| !vars.contains(k)) {
        return Err(bad(format!("initial value for undeclared variable `{extra}`")));
    }
    let samples = grid(&vars, &cfg.grid);
    acc.below("dynamics_recovery", sys.recovery_residual(&samples).map_err(domain)?, EXACT);
    if cfg.random_hamiltonians > 0 {
        let mut worst = Worst::new();
        for _ in 0..cfg.random_hamiltonians {
            let h = Expr::random_polynomial(rng, &vars, 3, 6);
            let s = TimeDepSystem::new(z.clone(), h.clone()).map_err(domain)?;
            let w = s.recovery_residual(&samples).map_err(domain)?;
            worst.observe(w.value, || format!("H = {h}: {}", w.witness.unwrap_or_default()));
        }
        acc.below("dynamics_recovery_random", worst, EXACT);
    }

    let traj = sys.integrate(&initial, cfg.step, cfg.duration).map_err(domain)?;
    if !cfg.closed_form.is_empty() {
        let time = [z.time().to_string()];
        let mut worst = Worst::new();
        for (var, text) in &cfg.closed_form {
            let exact = expr_in(text, &time, "closed form")?;
            let column = traj
                .column(var)
                .ok_or_else(|| bad(format!("closed form given for unknown state `{var}`")))?;
            for (k, value) in column.iter().enumerate() {
                let t = traj.time(k);
                let r = value - exact.eval(&[(time[0].as_str(), t)]).map_err(domain)?;
                worst.observe(r, || format!("{var} at t = {t}"));
            }
        }
        acc.below("closed_form", worst, cfg.closed_form_tol);
    }
    if !h.depends_on(z.time()) {
        let energy = sys.energy_along(&traj).map_err(domain)?;
        let mut worst = Worst::new();
        for (k, e) in energy.iter().enumerate() {
            worst.observe(e - energy[0], || format!("step {k}"));
        }
        acc.below("energy_drift", worst, cfg.energy_tol);
    }
    if let Some(period) = cfg.period {
        let d = cfg.dim;
        let one = sys.integrate(&initial, cfg.step, period).map_err(domain)?;
        let start: Vec<f64> = initial[..d].iter().chain(&initial[d + 1..]).copied().collect();
        let mut worst = Worst::new();
        for (i, (a, b)) in one.last().iter().zip(&start).enumerate() {
            worst.observe(a - b, || one.state_names[i].clone());
        }
        acc.below("period_return", worst, cfg.period_tol);
    }
    acc.artifacts.push(Artifact {
        name: format!("{id}.csv"),
        contents: traj.to_csv(),
    });
    Ok(())
}

struct NewtonSetup {
    st: NewtonSpaceTime,
    phase: ObservedPhase,
}

fn newton_setup(dim: usize, frame: &[f64], init: &InitialPhase) -> Result<NewtonSetup, RunError> {
    if dim == 0 {
        return Err(bad("spatial dimension must be positive"));
    }
    let st = NewtonSpaceTime::standard(dim);
    let u = st.frame(vector(frame, dim + 1, "frame")?).map_err(|e| bad(e.to_string()))?.u;
    let phase = ObservedPhase {
        x: vector(&init.x, dim + 1, "initial x")?,
        p: vector(&init.p, dim, "initial p")?,
        s: init.s,
        u,
    };
    Ok(NewtonSetup { st, phase })
}

/// Whether `φ` is constant along the frame velocity, so that the frame's
/// Hamiltonian is conserved.
fn static_along(phi: &Expr, coords: &[String], u: &DVector<f64>) -> bool {
    coords
        .iter()
        .zip(u.iter())
        .map(|(x, &ui)| Expr::num(ui) * phi.diff(x))
        .sum::<Expr>()
        .simplify()
        .is_zero()
}

fn gauge_round_trip(st: &NewtonSpaceTime, ph: &ObservedPhase, v: &DVector<f64>, m: f64) -> Result<f64, RunError> {
    let there = gauge_transform(st, ph, v, m).map_err(domain)?;
    let back = gauge_transform(st, &there, &-v.clone(), m).map_err(domain)?;
    Ok((back.p - &ph.p).amax().max((back.s - ph.s).abs()).max((back.u - &ph.u).amax()))
}

fn newton(id: &str, cfg: &NewtonSection, acc: &mut Acc) -> Result<(), RunError> {
    let NewtonSetup { st, phase } = newton_setup(cfg.dim, &cfg.frame, &cfg.initial)?;
    let phi = expr_in(&cfg.potential, st.coords(), "potential")?;
    let frame = st.frame(phase.u.clone()).map_err(domain)?;
    let field = newton_dynamics(&st, &frame, cfg.mass, &phi).map_err(|e| bad(e.to_string()))?;
    let traj = field.integrate(&phase.x, &phase.p, cfg.step, cfg.duration).map_err(domain)?;

    let mut clock = Worst::new();
    clock.observe(field.clock_along(&traj).map_err(domain)?, || "along trajectory".into());
    acc.below("clock", clock, EXACT);
    if static_along(&phi, st.coords(), &phase.u) {
        let mut drift = Worst::new();
        drift.observe(field.energy_drift(&traj).map_err(domain)?, || "along trajectory".into());
        acc.below("energy_drift", drift, cfg.energy_tol);
    }
    let split = ObserverSplit {
        origin: phase.x.clone(),
        u: phase.u.clone(),
    };
    let mut observed = Worst::new();
    for (k, e) in traj.events.iter().enumerate() {
        let (_, t) = split.split(&st, &DVector::from_column_slice(e));
        observed.observe(t - traj.time(k), || format!("step {k}"));
    }
    acc.below("observer_time", observed, 1e-9);
    if let Some(b) = &cfg.boost {
        let v = st.embed_spatial(&vector(b, cfg.dim, "boost")?);
        let mut worst = Worst::new();
        worst.observe(gauge_round_trip(&st, &phase, &v, cfg.mass)?, || format!("boost {b:?}"));
        acc.below("gauge_round_trip", worst, EXACT);
    }
    acc.artifacts.push(Artifact {
        name: format!("{id}.csv"),
        contents: traj.to_csv(),
    });
    Ok(())
}

fn compare(cfg: &CompareSection, rng: &mut ChaCha8Rng, acc: &mut Acc) -> Result<(), RunError> {
    let NewtonSetup { st, phase } = newton_setup(cfg.dim, &cfg.frame, &cfg.initial)?;
    let mut boosts = cfg
        .boosts
        .iter()
        .map(|b| vector(b, cfg.dim, "boost"))
        .collect::<Result<Vec<_>, _>>()?;
    for _ in 0..cfg.random_boosts {
        boosts.push(uniform_vec(rng, cfg.dim, cfg.boost_scale));
    }
    if boosts.is_empty() || cfg.potentials.is_empty() {
        return Err(bad("at least one potential and one boost are required"));
    }
    let mut round_trip = Worst::new();
    for b in &boosts {
        let v = st.embed_spatial(b);
        round_trip.observe(gauge_round_trip(&st, &phase, &v, cfg.mass)?, || format!("boost {:?}", b.as_slice()));
    }
    let mut clock = Worst::new();
    for pot in &cfg.potentials {
        let phi = expr_in(&pot.phi, st.coords(), &format!("potential {}", pot.name))?;
        let mut drift_done = false;
        for (i, b) in boosts.iter().enumerate() {
            let v = st.embed_spatial(b);
            let cmp = compare_frames(&st, cfg.mass, &phi, &phase, &v, cfg.step, cfg.duration).map_err(domain)?;
            clock.observe(cmp.clock_residual, || format!("{} with boost {i}", pot.name));
            let mut dev = Worst::new();
            dev.observe(cmp.max_deviation, || format!("step {}", cmp.worst_step));
            acc.below(format!("world_line:{}:{i}", pot.name), dev, FRAME_DEVIATION_TOL);
            acc.comparisons.push(Comparison {
                potential: pot.name.clone(),
                boost: b.as_slice().to_vec(),
                frames: [cmp.frames[0].as_slice().to_vec(), cmp.frames[1].as_slice().to_vec()],
                max_deviation: cmp.max_deviation,
                pass: cmp.pass(),
            });
            if !drift_done && static_along(&phi, st.coords(), &phase.u) {
                let frame = st.frame(phase.u.clone()).map_err(domain)?;
                let field = newton_dynamics(&st, &frame, cfg.mass, &phi).map_err(domain)?;
                let mut drift = Worst::new();
                drift.observe(field.energy_drift(&cmp.trajectories[0]).map_err(domain)?, || "base frame".into());
                acc.below(format!("energy_drift:{}", pot.name), drift, cfg.energy_tol);
                drift_done = true;
            }
        }
    }
    acc.below("clock", clock, EXACT);
    acc.below("gauge_round_trip", round_trip, EXACT);
    Ok(())
}
