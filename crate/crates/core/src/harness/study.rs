//! 3D solves, error metrics against the limit problem, and the epsilon sweep.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Matrix3;

use crate::beam::{solve_limit, BeamSolution, LimitModel, LimitOptions};
use crate::capacity::{coercivity_eigen, penalty_form, Bracket, CapacitarySet, CapacityParams, Farfield};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_body_load, assemble_prestrain_load, assemble_stiffness, impose_dirichlet, quadratic_energy,
    solve_spd, strain_at_quadrature, work, DisplacementField, Frame, SolveStats, StrainSamples,
};
use crate::geometry::element::{hex_eval, hex_gauss, quad_eval, quad_gauss};
use crate::geometry::{build_cylinder_mesh, build_section_mesh, NodeSet, VolumeMesh};
use crate::harness::config::StudyConfig;
use crate::material::Point3;
use crate::regimes::{corrector_eval, RegimeSpec, RegimeTag};

fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// A solved thin-cylinder problem.
#[derive(Clone, Debug)]
pub struct Solve3d {
    pub eps: f64,
    pub r_eps: f64,
    pub mesh: Arc<VolumeMesh>,
    pub field: DisplacementField,
    pub samples: StrainSamples,
    pub stats: SolveStats,
    /// `int A^eps e(U) : e(U)`.
    pub energy: f64,
    /// `int F . U + int H : e(U)`.
    pub work: f64,
}

impl Solve3d {
    pub fn dof(&self) -> usize {
        3 * self.mesh.nodes().len()
    }

    /// Area-weighted mean of `U1` over the end face `x1 = 0`.
    pub fn end_face_mean_u1(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for el in self.mesh.elements() {
            let face = [el[0], el[1], el[2], el[3]];
            if face.iter().any(|&k| self.mesh.nodes()[k][0] != 0.0) {
                continue;
            }
            let c = face.map(|k| [self.mesh.nodes()[k][1], self.mesh.nodes()[k][2]]);
            for xi in quad_gauss() {
                let q = quad_eval(&c, xi);
                let u1: f64 = (0..4).map(|a| q.n[a] * self.field.values[face[a]][0]).sum();
                num += q.det.abs() * u1;
                den += q.det.abs();
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// `solve3d`: the clamped thin-cylinder problem at one `eps`.
pub fn solve3d(cfg: &StudyConfig, eps: f64) -> Result<Solve3d> {
    let material = cfg.material_field()?;
    let regime = cfg.regime()?;
    let r_eps = regime.r_eps(eps);
    let mesh = Arc::new(build_cylinder_mesh(&cfg.section_spec(), eps, r_eps, cfg.axial_n(eps), &cfg.grading)?);
    let frame = Frame::Cylinder { eps };
    let mut sys = assemble_stiffness(&mesh, &material, frame)?;
    let mut load = vec![0.0; sys.dim()];
    if let Some(f) = cfg.body_load() {
        for (a, b) in load.iter_mut().zip(assemble_body_load(&mesh, &f, eps, frame)) {
            *a += b;
        }
    }
    if let Some(h) = cfg.prestrain() {
        for (a, b) in load.iter_mut().zip(assemble_prestrain_load(&mesh, &h, frame)?) {
            *a += b;
        }
    }
    sys.rhs.copy_from_slice(&load);
    let mut clamped: Vec<usize> = mesh.node_set(NodeSet::Gamma0).to_vec();
    clamped.extend_from_slice(mesh.node_set(NodeSet::Gamma1));
    impose_dirichlet(&mut sys, &clamped, |_| [0.0; 3])?;
    let (x, stats) = solve_spd(&mut sys, &cfg.solver)?;
    let field = DisplacementField::from_dofs(&x);
    let samples = strain_at_quadrature(&mesh, &field);
    let energy = quadratic_energy(&samples, &material, frame)?;
    let w = work(&load, &x);
    log::info!(
        "solve3d eps={eps}: {} dof, {} iterations, residual {:.2e}",
        x.len(),
        stats.iterations,
        stats.residual
    );
    Ok(Solve3d { eps, r_eps, mesh, field, samples, stats, energy, work: w })
}

fn reference_point(x: &Point3, eps: f64) -> Point3 {
    [x[0], x[1] / eps, x[2] / eps]
}

/// Evaluates `f(e, xi, x)` at every 3D quadrature point and sums in element order.
fn quadrature_sum(mesh: &VolumeMesh, f: impl Fn(usize, [f64; 3], &Point3, usize) -> Result<f64> + Sync + Send) -> Result<f64> {
    let parts = par_map(mesh.elements().len(), |e| -> Result<f64> {
        let coords = mesh.element_coords(e);
        let mut s = 0.0;
        for (q, xi) in hex_gauss().into_iter().enumerate() {
            let g = hex_eval(&coords, xi);
            s += g.det * f(e, xi, &g.x, 8 * e + q)?;
        }
        Ok(s)
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total)
}

/// `err_disp`: `(1/|Omega^eps|) int |U1 - u1|^2 + sum |eps U_a - u_a|^2`.
pub fn err_disp(u: &Solve3d, beam: &BeamSolution) -> Result<f64> {
    let eps = u.eps;
    let total = quadrature_sum(&u.mesh, |e, xi, x, _| {
        let uu = u.field.value_at(&u.mesh, e, xi);
        let ul = beam.eval_limit_displacement(&reference_point(x, eps))?;
        Ok((uu[0] - ul[0]).powi(2) + (eps * uu[1] - ul[1]).powi(2) + (eps * uu[2] - ul[2]).powi(2))
    })?;
    Ok(total / u.mesh.volume())
}

/// `err_strain`: `(1/|Omega^eps|) int |e(U) - E(u,v,w)(x1, x'/eps) - P^eps(x/(eps r))|^2`.
pub fn err_strain(u: &Solve3d, beam: &BeamSolution, regime: &RegimeSpec, set: Option<&CapacitarySet>) -> Result<f64> {
    let (eps, r) = (u.eps, u.r_eps);
    let t = beam.trace_vector();
    let s = eps * r;
    let total = quadrature_sum(&u.mesh, |_, _, x, q| {
        let ee = beam.eval_e(&reference_point(x, eps))?;
        let p = corrector_eval(regime, set, &t, eps, r, &[x[0] / s, x[1] / s, x[2] / s])?;
        let d: Matrix3<f64> = u.samples.strains[q] - ee - p;
        Ok(d.norm_squared())
    })?;
    Ok(total / u.mesh.volume())
}

/// `(1/|Omega|) int |f|^2 + (1/|Omega|) int |h|^2` on the reference cylinder.
pub fn load_norm(cfg: &StudyConfig) -> Result<f64> {
    let section = build_section_mesh(&cfg.section, cfg.section_h)?;
    let f = cfg.body_load();
    let h = cfg.prestrain();
    let layout = crate::beam::Layout::new(cfg.limit_elements);
    let mut total = 0.0;
    for (_, _, y1, w1) in layout.quadrature() {
        for q in section.quadrature() {
            let y = [y1, q.x[0], q.x[1]];
            let mut v = 0.0;
            if let Some(f) = &f {
                v += f(&y).iter().map(|c| c * c).sum::<f64>();
            }
            if let Some(h) = &h {
                v += h(&y).norm_squared();
            }
            total += w1 * q.weight * v;
        }
    }
    Ok(total / section.area())
}

/// The limit solution of a configuration and, for critical regimes, the capacitary set
/// behind its penalty.
pub struct LimitRun {
    pub regime: RegimeSpec,
    pub beam: BeamSolution,
    pub capacity: Option<CapacitarySet>,
    pub coercivity: Option<f64>,
    pub bracket: Option<Bracket>,
}

pub fn capacity_params(cfg: &StudyConfig, length: f64, farfield: Farfield) -> CapacityParams {
    let mut p = CapacityParams::new(length, farfield);
    p.grading = cfg.capacity_grading;
    p.solver = cfg.solver;
    p
}

pub fn limit_model(cfg: &StudyConfig) -> Result<LimitModel> {
    let material = cfg.material_field()?;
    let opts = LimitOptions { elements: cfg.limit_elements, section_h: cfg.section_h, cell_tol: cfg.cell_tol };
    LimitModel::build(&material, cfg.body_load().as_ref(), cfg.prestrain().as_ref(), &opts)
}

/// Solves the limit problem once; critical regimes also build the natural (penalty) and
/// clamped (bracket) capacitary sets at the largest truncation length.
pub fn run_limit(cfg: &StudyConfig) -> Result<LimitRun> {
    let regime = cfg.regime()?;
    let model = Arc::new(limit_model(cfg)?);
    let (capacity, coercivity, bracket) = if regime.is_critical() {
        let a0 = cfg.material_field()?.at_origin();
        let l = cfg.penalty_length();
        let natural = CapacitarySet::build(&a0, &cfg.patch, capacity_params(cfg, l, cfg.penalty_farfield()))?;
        let clamped = CapacitarySet::build(&a0, &cfg.patch, capacity_params(cfg, l, Farfield::Clamped))?;
        let bracket = Bracket::new(&natural, &clamped);
        let n = coercivity_eigen(&penalty_form(&regime, Some(&natural))?)?;
        (Some(natural), Some(n), Some(bracket))
    } else {
        (None, None, None)
    };
    let penalty = penalty_form(&regime, capacity.as_ref())?;
    let beam = solve_limit(model, &regime, penalty)?;
    Ok(LimitRun { regime, beam, capacity, coercivity, bracket })
}

/// One row of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub eps: f64,
    pub r_eps: f64,
    pub err_disp: f64,
    pub err_strain: f64,
    /// `None` when the loads vanish.
    pub energy_ratio: Option<f64>,
    pub cg_iters: usize,
    pub residual: f64,
    pub dof: usize,
    pub end_face_u1: f64,
    pub energy: f64,
    pub work: f64,
    pub failure: Option<String>,
}

/// Pass/fail flags of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub all_solved: bool,
    pub disp_decreasing: bool,
    pub strain_decreasing: bool,
    pub energy_bounded: bool,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.all_solved && self.disp_decreasing && self.strain_decreasing && self.energy_bounded
    }
}

/// `ConvergenceReport`.
pub struct ConvergenceReport {
    pub regime: RegimeSpec,
    pub rows: Vec<StudyRow>,
    pub limit: LimitRun,
    pub verdict: Verdict,
}

/// Strict decrease of the finite entries, treating zero sequences as decreasing.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    if v.iter().all(|&x| x == 0.0) {
        return true;
    }
    v.windows(2).all(|w| w[1] < w[0])
}

/// Energy-bound verdict on a ratio sequence: max within 3x the median. Empty or load-free
/// sequences are not applicable and pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBound {
    pub ratios: Vec<(f64, Option<f64>)>,
    pub max_over_median: Option<f64>,
}

impl EnergyBound {
    pub fn from_ratios(ratios: Vec<(f64, Option<f64>)>) -> Self {
        let mut vals: Vec<f64> = ratios.iter().filter_map(|r| r.1).collect();
        let max_over_median = if vals.is_empty() {
            None
        } else {
            vals.sort_by(f64::total_cmp);
            let n = vals.len();
            let median = if n % 2 == 1 { vals[n / 2] } else { 0.5 * (vals[n / 2 - 1] + vals[n / 2]) };
            Some(vals[n - 1] / median)
        };
        Self { ratios, max_over_median }
    }

    pub fn pass(&self) -> bool {
        self.max_over_median.is_none_or(|m| m.is_finite() && m <= 3.0)
    }
}

fn study_row(cfg: &StudyConfig, eps: f64, limit: &LimitRun, load: f64) -> Result<StudyRow> {
    let u = solve3d(cfg, eps)?;
    let ed = err_disp(&u, &limit.beam)?;
    let es = err_strain(&u, &limit.beam, &limit.regime, limit.capacity.as_ref())?;
    let norm_energy = u.samples.norm_sq() / u.mesh.volume();
    let energy_ratio = (load > 0.0).then(|| norm_energy / load);
    Ok(StudyRow {
        eps,
        r_eps: u.r_eps,
        err_disp: ed,
        err_strain: es,
        energy_ratio,
        cg_iters: u.stats.iterations,
        residual: u.stats.residual,
        dof: u.dof(),
        end_face_u1: u.end_face_mean_u1(),
        energy: u.energy,
        work: u.work,
        failure: None,
    })
}

/// `run_study`: one limit solve, then a 3D solve and the error metrics per `eps`. A failing
/// `eps` is recorded and the sweep continues.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let limit = run_limit(cfg)?;
    let load = load_norm(cfg)?;
    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let row = study_row(cfg, eps, &limit, load).unwrap_or_else(|e| {
            log::warn!("eps={eps} failed: {e}");
            StudyRow {
                eps,
                r_eps: limit.regime.r_eps(eps),
                err_disp: f64::NAN,
                err_strain: f64::NAN,
                energy_ratio: None,
                cg_iters: 0,
                residual: f64::NAN,
                dof: 0,
                end_face_u1: f64::NAN,
                energy: f64::NAN,
                work: f64::NAN,
                failure: Some(e.to_string()),
            }
        });
        rows.push(row);
    }
    let ed: Vec<f64> = rows.iter().map(|r| r.err_disp).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.err_strain).collect();
    let bound = EnergyBound::from_ratios(rows.iter().map(|r| (r.eps, r.energy_ratio)).collect());
    let verdict = Verdict {
        all_solved: rows.iter().all(|r| r.failure.is_none()),
        disp_decreasing: strictly_decreasing(&ed),
        strain_decreasing: strictly_decreasing(&es),
        energy_bounded: bound.pass(),
    };
    Ok(ConvergenceReport { regime: limit.regime, rows, limit, verdict })
}

/// `energy_bound_report`: normalized strain energy over the load norm per `eps`.
pub fn energy_bound_report(cfg: &StudyConfig) -> Result<EnergyBound> {
    let load = load_norm(cfg)?;
    let mut ratios = Vec::new();
    for &eps in &cfg.eps {
        let u = solve3d(cfg, eps)?;
        let e = u.samples.norm_sq() / u.mesh.volume();
        ratios.push((eps, (load > 0.0).then(|| e / load)));
    }
    Ok(EnergyBound::from_ratios(ratios))
}

pub const STUDY_HEADER: &str = "epsilon,r_epsilon,regime,rho,err_disp,err_strain,energy_ratio,cg_iters,residual";

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        "nan".into()
    }
}

impl ConvergenceReport {
    pub fn csv(&self) -> String {
        let mut s = String::from(STUDY_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                fmt_num(r.eps),
                fmt_num(r.r_eps),
                self.regime.tag.name(),
                fmt_num(self.regime.rho_or_zero()),
                fmt_num(r.err_disp),
                fmt_num(r.err_strain),
                r.energy_ratio.map_or("na".into(), fmt_num),
                r.cg_iters,
                fmt_num(r.residual),
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = header(&self.regime);
        let t = self.limit.beam.trace_vector();
        let _ = writeln!(s, "trace (z2, z3, z1, c, z2', z3') at y1=0: {}", fmt_vec(&t));
        if let Some(n) = self.limit.coercivity {
            let _ = writeln!(s, "penalty smallest eigenvalue: {}", fmt_num(n));
        }
        if let Some(b) = &self.limit.bracket {
            let _ = writeln!(s, "truncation L={}: natural {} clamped {}", b.length, fmt_vec(&b.natural), fmt_vec(&b.clamped));
        }
        if let Some(c) = &self.limit.capacity {
            let _ = writeln!(s, "capacity tail shell fraction: {}", fmt_vec(&c.tail));
        }
        for r in &self.rows {
            match &r.failure {
                None => {
                    let _ = writeln!(
                        s,
                        "eps={} r={} dof={} err_disp={} err_strain={} energy_ratio={} end_face_u1={} cg={}",
                        r.eps,
                        fmt_num(r.r_eps),
                        r.dof,
                        fmt_num(r.err_disp),
                        fmt_num(r.err_strain),
                        r.energy_ratio.map_or("na".into(), fmt_num),
                        fmt_num(r.end_face_u1),
                        r.cg_iters
                    );
                }
                Some(e) => {
                    let _ = writeln!(s, "eps={} FAILED: {e}", r.eps);
                }
            }
        }
        let v = &self.verdict;
        let flag = |b: bool| if b { "yes" } else { "no" };
        let _ = writeln!(s, "all solved: {}", flag(v.all_solved));
        let _ = writeln!(s, "err_disp strictly decreasing: {}", flag(v.disp_decreasing));
        let _ = writeln!(s, "err_strain strictly decreasing: {}", flag(v.strain_decreasing));
        let _ = writeln!(s, "energy ratio bounded (max <= 3 x median): {}", flag(v.energy_bounded));
        let _ = writeln!(s, "verdict: {}", if v.pass() { "PASS" } else { "FAIL" });
        s
    }
}

pub fn header(regime: &RegimeSpec) -> String {
    let rho = match regime.rho {
        Some(r) => format!("{r}"),
        None => "none".into(),
    };
    format!("# regime {} rho {} (r = {} eps^{})\n", regime.tag.name(), rho, regime.kappa, regime.p)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Uniform samples of the beam variables: `y1, zeta1, zeta2, zeta3, c`.
pub fn limit_csv(beam: &BeamSolution, samples: usize) -> String {
    let mut s = String::from("y1,zeta1,zeta2,zeta3,c\n");
    let n = samples.max(1);
    for k in 0..=n {
        let y = k as f64 / n as f64;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_num(y),
            fmt_num(beam.zeta1(y).0),
            fmt_num(beam.zeta(2, y).0),
            fmt_num(beam.zeta(3, y).0),
            fmt_num(beam.twist(y).0)
        );
    }
    s
}

pub fn trace_csv(beam: &BeamSolution) -> String {
    let t = beam.trace_vector();
    let names = ["zeta2_0", "zeta3_0", "zeta1_0", "c_0", "dzeta2_0", "dzeta3_0"];
    let mut s = String::from("slot,value\n");
    for (n, v) in names.iter().zip(t) {
        let _ = writeln!(s, "{n},{}", fmt_num(v));
    }
    s
}

/// Capacity report rows `length, farfield, entry, value` for every listed length and both
/// far fields, plus the penalty eigenvalues of the three critical regimes at `rho = 1`.
pub fn capacity_report(cfg: &StudyConfig) -> Result<(String, String)> {
    let a0 = cfg.material_field()?.at_origin();
    let mut csv = String::from("length,farfield,entry,value\n");
    let mut summary = String::new();
    for &l in &cfg.capacity_lengths {
        let mut pair = Vec::new();
        for ff in [Farfield::Natural, Farfield::Clamped] {
            let set = CapacitarySet::build(&a0, &cfg.patch, capacity_params(cfg, l, ff))?;
            let mut row = |entry: String, v: f64| {
                let _ = writeln!(csv, "{l},{},{entry},{}", ff.name(), fmt_num(v));
            };
            for i in 0..6 {
                for j in 0..6 {
                    row(format!("G{}{}", i + 1, j + 1), set.gram[(i, j)]);
                }
            }
            row("a2".into(), set.a[0]);
            row("a3".into(), set.a[1]);
            for i in 0..3 {
                for k in 0..3 {
                    row(format!("b{}{}", i + 1, k + 1), set.b[i][k]);
                }
            }
            row("k_hat".into(), set.k_hat());
            row("condition_a".into(), set.condition_a);
            row("condition_b".into(), set.condition_b);
            let worst = set.orthogonality_residuals().iter().map(|r| r.2).fold(0.0, f64::max);
            row("orthogonality_residual".into(), worst);
            for (k, v) in set.tail.iter().enumerate() {
                row(format!("tail{}", k + 1), *v);
            }
            for (name, n) in coercivity_rows(&set)? {
                row(format!("lambda_min_{name}"), n);
            }
            pair.push(set);
        }
        let b = Bracket::new(&pair[0], &pair[1]);
        let _ = writeln!(
            summary,
            "L={l}: natural {} clamped {} relative gap {} ordered {}",
            fmt_vec(&b.natural),
            fmt_vec(&b.clamped),
            fmt_vec(&b.relative_gap()),
            b.ordered(1e-10)
        );
    }
    Ok((csv, summary))
}

/// Smallest active-block eigenvalues of the three critical penalties at `rho = 1`.
pub fn coercivity_rows(set: &CapacitarySet) -> Result<Vec<(&'static str, f64)>> {
    let mut out = Vec::new();
    for tag in [RegimeTag::Critical3, RegimeTag::Critical1, RegimeTag::CriticalThird] {
        let regime = critical_unit_regime(tag)?;
        out.push((tag.name(), coercivity_eigen(&penalty_form(&regime, Some(set))?)?));
    }
    Ok(out)
}

/// The critical regime `tag` with `rho = 1`.
pub fn critical_unit_regime(tag: RegimeTag) -> Result<RegimeSpec> {
    use num_rational::Rational64;
    let p = match tag {
        RegimeTag::Critical3 => Rational64::from_integer(3),
        RegimeTag::Critical1 => Rational64::from_integer(1),
        RegimeTag::CriticalThird => Rational64::new(1, 3),
        other => return Err(Error::Regime(format!("{other} is not critical"))),
    };
    crate::regimes::classify(1.0, p)
}

/// Smallest penalty eigenvalues `length, farfield, regime, lambda_min` for every listed
/// truncation length.
pub fn coercivity_report(cfg: &StudyConfig) -> Result<String> {
    let a0 = cfg.material_field()?.at_origin();
    let mut csv = String::from("length,farfield,regime,lambda_min\n");
    for &l in &cfg.capacity_lengths {
        for ff in [Farfield::Natural, Farfield::Clamped] {
            let set = CapacitarySet::build(&a0, &cfg.patch, capacity_params(cfg, l, ff))?;
            for (name, n) in coercivity_rows(&set)? {
                let _ = writeln!(csv, "{l},{},{name},{}", ff.name(), fmt_num(n));
            }
        }
    }
    Ok(csv)
}

/// Per-`eps` 3D solve statistics.
pub fn solve3d_report(cfg: &StudyConfig) -> Result<String> {
    cfg.validate()?;
    let mut csv = String::from("epsilon,r_epsilon,dof,cg_iters,residual,energy,work,end_face_u1\n");
    for &eps in &cfg.eps {
        let u = solve3d(cfg, eps)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt_num(eps),
            fmt_num(u.r_eps),
            u.dof(),
            u.stats.iterations,
            fmt_num(u.stats.residual),
            fmt_num(u.energy),
            fmt_num(u.work),
            fmt_num(u.end_face_mean_u1())
        );
    }
    Ok(csv)
}
