mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use common::*;
use nalgebra::{Matrix3, Matrix6};
use num_rational::Rational64;
use patchbeam::beam::*;
use patchbeam::capacity::PenaltyForm;
use patchbeam::fem::{TensorFn, VectorFn};
use patchbeam::geometry::{build_section_mesh, Shape2};
use patchbeam::material::MaterialField;
use patchbeam::regimes::{classify, constraint_set_for, RegimeSpec, RegimeTag};
use proptest::prelude::*;

fn regime(tag: RegimeTag, kappa: f64) -> RegimeSpec {
    let p = match tag {
        RegimeTag::SubCubic => Rational64::from_integer(4),
        RegimeTag::Critical3 => Rational64::from_integer(3),
        RegimeTag::CubicToLinear => Rational64::from_integer(2),
        RegimeTag::Critical1 => Rational64::from_integer(1),
        RegimeTag::LinearToCubeRoot => Rational64::new(2, 3),
        RegimeTag::CriticalThird => Rational64::new(1, 3),
        RegimeTag::SuperCubeRoot => Rational64::from_integer(0),
    };
    classify(kappa, p).unwrap()
}

fn penalty(r: &RegimeSpec, gg: &Matrix6<f64>) -> PenaltyForm {
    PenaltyForm::from_generator_gram(r, gg)
}

fn iso_disc() -> MaterialField {
    MaterialField::isotropic(1.0, 0.3, unit_disc()).unwrap()
}

fn axial() -> VectorFn {
    Arc::new(|_| [1.0, 0.0, 0.0])
}

fn opts(elements: usize, h: f64) -> LimitOptions {
    LimitOptions { elements, section_h: h, ..LimitOptions::default() }
}

fn solve(m: &MaterialField, f: Option<&VectorFn>, h: Option<&TensorFn>, o: &LimitOptions, r: &RegimeSpec, p: PenaltyForm) -> BeamSolution {
    let model = Arc::new(LimitModel::build(m, f, h, o).unwrap());
    solve_limit(model, r, p).unwrap()
}

/// Classical square torsion constant `k` with `J = k a^4`, summed to convergence.
fn square_torsion_series() -> f64 {
    let s: f64 = (0..50)
        .map(|n| {
            let k = (2 * n + 1) as f64;
            (k * PI / 2.0).tanh() / k.powi(5)
        })
        .sum();
    (1.0 - 192.0 / PI.powi(5) * s) / 3.0
}

#[test]
fn torsion_series_oracle() {
    assert!((square_torsion_series() - 0.140577).abs() < 1e-6);
}

#[test]
fn disc_stiffness_converges_to_rod_theory() {
    let mu = 1.0 / (2.0 * 1.3);
    let exact = [PI, PI / 4.0, PI / 4.0, mu * PI / 2.0];
    let mut prev = f64::INFINITY;
    for h in [0.2, 0.1, 0.05] {
        let model = LimitModel::build(&iso_disc(), None, None, &opts(1, h)).unwrap();
        let d = model.cells[0].d;
        let err = (0..4).map(|i| ((d[(i, i)] - exact[i]) / exact[i]).abs()).fold(0.0, f64::max);
        assert!(err < prev, "h={h}: {err} not below {prev}");
        prev = err;
        assert!((d - d.transpose()).amax() == 0.0);
        assert!(d.cholesky().is_some());
    }
    assert!(prev < 0.01);
}

#[test]
fn square_torsion_matches_series() {
    let m = MaterialField::isotropic(1.0, 0.3, Shape2::Rect { width: 1.0, height: 1.0 }).unwrap();
    let model = LimitModel::build(&m, None, None, &opts(1, 0.05)).unwrap();
    let mu = 1.0 / 2.6;
    let d = model.cells[0].d[(3, 3)];
    assert!((d / (mu * square_torsion_series()) - 1.0).abs() < 0.01, "{d}");
}

#[test]
fn no_prestrain_means_no_cell_load() {
    let model = LimitModel::build(&iso_disc(), None, None, &opts(2, 0.2)).unwrap();
    assert!(model.cells.iter().all(|c| c.load.iter().all(|&v| v == 0.0) && c.prestrain_mode.is_none()));
}

#[test]
fn section_load_examples() {
    let section = build_section_mesh(&unit_disc(), 0.1).unwrap();
    let a = section.area();
    let l = beam_loads(Some(&axial()), &section, &[0.3]).values[0];
    assert_relative_eq!(l[0], a, max_relative = 1e-12);
    assert!(l[1].abs() < 1e-12 && l[2].abs() < 1e-12);
    let t: VectorFn = Arc::new(|_| [0.0, 1.0, 0.0]);
    let l = beam_loads(Some(&t), &section, &[0.3]).values[0];
    assert_relative_eq!(l[3], a, max_relative = 1e-12);
    assert!(l[0] == 0.0 && l[4] == 0.0);
    let m: VectorFn = Arc::new(|y| [y[1], 0.0, 0.0]);
    let l = beam_loads(Some(&m), &section, &[0.3]).values[0];
    assert!(l[0].abs() < 1e-12);
    assert!((l[1] - PI / 4.0).abs() < 0.01 * PI / 4.0);
    // Polygonal disc: the analytic areas are approached from below.
    assert!((a - PI).abs() < 0.01);
}

#[test]
fn fully_constrained_regime_fixes_all_traces() {
    let model = LimitModel::build(&iso_disc(), Some(&axial()), None, &opts(4, 0.2)).unwrap();
    let r = regime(RegimeTag::SuperCubeRoot, 1.0);
    let sys = assemble_limit_system(&model, &constraint_set_for(r.tag), &PenaltyForm::zero(r.tag)).unwrap();
    let free = sys.free_dofs();
    for d in model.layout.trace_dofs() {
        assert!(!free.contains(&d));
    }
    let b = solve_limit(Arc::new(model), &r, PenaltyForm::zero(r.tag)).unwrap();
    assert_eq!(b.trace_vector(), [0.0; 6]);
}

#[test]
fn sub_cubic_end_is_free() {
    let model = LimitModel::build(&iso_disc(), Some(&axial()), None, &opts(4, 0.2)).unwrap();
    let r = regime(RegimeTag::SubCubic, 1.0);
    let sys = assemble_limit_system(&model, &constraint_set_for(r.tag), &PenaltyForm::zero(r.tag)).unwrap();
    let free = sys.free_dofs();
    for d in model.layout.trace_dofs() {
        assert!(free.contains(&d));
    }
}

#[test]
fn penalty_adds_exactly_k() {
    let model = LimitModel::build(&iso_disc(), Some(&axial()), None, &opts(4, 0.2)).unwrap();
    let r = regime(RegimeTag::Critical1, 1.0);
    let zero = assemble_limit_system(&model, &constraint_set_for(r.tag), &PenaltyForm::zero(r.tag)).unwrap();
    let mut gg = Matrix6::zeros();
    gg[(0, 0)] = 2.75;
    let with = assemble_limit_system(&model, &constraint_set_for(r.tag), &penalty(&r, &gg)).unwrap();
    let d = model.layout.trace_dofs()[2];
    assert_eq!(with.matrix.get(d, d) - zero.matrix.get(d, d), 2.75);
    let before = zero.matrix.to_dense();
    let mut after = with.matrix.to_dense();
    after[(d, d)] -= 2.75;
    assert_eq!(after, before);
}

#[test]
fn mismatched_regime_is_rejected() {
    let model = LimitModel::build(&iso_disc(), Some(&axial()), None, &opts(2, 0.2)).unwrap();
    let r1 = regime(RegimeTag::Critical1, 1.0);
    let bad = assemble_limit_system(&model, &constraint_set_for(RegimeTag::SuperCubeRoot), &PenaltyForm::zero(r1.tag));
    assert!(matches!(bad, Err(patchbeam::Error::Regime(_))));
    let r3 = regime(RegimeTag::CriticalThird, 1.0);
    let p3 = penalty(&r3, &sample_gram());
    assert!(matches!(solve_limit(Arc::new(model), &r1, p3), Err(patchbeam::Error::Regime(_))));
}

#[test]
fn zero_loads_give_zero_solution() {
    for tag in regime_tag_all() {
        let r = regime(tag, 1.5);
        let b = solve(&iso_disc(), None, None, &opts(4, 0.2), &r, penalty(&r, &sample_gram()));
        assert!(b.coef.iter().all(|&c| c == 0.0), "{tag}");
        assert_eq!(b.trace_vector(), [0.0; 6]);
        assert_eq!(b.eval_e(&[0.3, 0.2, 0.1]).unwrap(), Matrix3::zeros());
    }
}

#[test]
fn free_rod_closed_form() {
    let r = regime(RegimeTag::CubicToLinear, 1.0);
    let b = solve(&iso_disc(), Some(&axial()), None, &opts(8, 0.1), &r, PenaltyForm::zero(r.tag));
    let model = &b.model;
    let (n, d1) = (model.section.area(), model.cells[0].d[(0, 0)]);
    for y in [0.0, 0.3, 0.77, 1.0] {
        let exact = n / d1 * (1.0 - y * y) / 2.0;
        assert!((b.zeta1(y).0 - exact).abs() < 1e-10, "{y}");
    }
    assert!((b.trace_vector()[2] - 0.5).abs() < 0.005 * 0.5);
}

#[test]
fn penalized_rod_closed_form() {
    let mut prev = f64::INFINITY;
    for rho in [1e-3, 1.0, 1e3] {
        let r = regime(RegimeTag::Critical1, rho);
        let mut gg = Matrix6::zeros();
        gg[(0, 0)] = 2.4;
        let b = solve(&iso_disc(), Some(&axial()), None, &opts(8, 0.1), &r, penalty(&r, &gg));
        let (n, d1) = (b.model.section.area(), b.model.cells[0].d[(0, 0)]);
        let z0 = b.trace_vector()[2];
        let exact = n / (2.0 * (d1 + rho * 2.4));
        assert!((z0 - exact).abs() < 0.005 * exact, "{rho}: {z0} {exact}");
        assert!(z0 < prev);
        prev = z0;
    }
}

#[test]
fn displacement_examples() {
    let r = regime(RegimeTag::SubCubic, 1.0);
    let model = Arc::new(LimitModel::build(&iso_disc(), None, None, &opts(4, 0.2)).unwrap());
    let l = model.layout;
    let mut coef = vec![0.0; l.dim()];
    for k in 0..=8 {
        coef[l.zeta1(k)] = 1.0 - k as f64 / 8.0;
    }
    let q = |y: f64| (1.0 - y) * (1.0 - y) * (1.0 + y);
    let dq = |y: f64| (1.0 - y) * (-1.0 - 3.0 * y);
    let b = BeamSolution { model: model.clone(), regime: r, penalty: PenaltyForm::zero(r.tag), coef };
    for y in [[0.0, 0.1, 0.2], [0.45, -0.3, 0.5], [1.0, 0.0, 0.9]] {
        let u = b.eval_limit_displacement(&y).unwrap();
        assert!((u[0] - (1.0 - y[0])).abs() < 1e-14 && u[1] == 0.0 && u[2] == 0.0);
    }
    let mut coef = vec![0.0; l.dim()];
    for node in 0..=4 {
        let y = node as f64 / 4.0;
        coef[l.zeta(2, 2 * node)] = q(y);
        coef[l.zeta(2, 2 * node + 1)] = dq(y);
    }
    let b = BeamSolution { model, regime: r, penalty: PenaltyForm::zero(r.tag), coef };
    for y in [[0.1, 0.3, 0.2], [0.6, -0.5, 0.5]] {
        let u = b.eval_limit_displacement(&y).unwrap();
        assert!((u[0] + dq(y[0]) * y[1]).abs() < 1e-13);
        assert!((u[1] - q(y[0])).abs() < 1e-13 && u[2] == 0.0);
    }
    assert!(matches!(b.eval_limit_displacement(&[0.5, 2.0, 0.0]), Err(patchbeam::Error::Domain(_))));
    assert!(matches!(b.eval_limit_displacement(&[1.5, 0.0, 0.0]), Err(patchbeam::Error::Domain(_))));
}

#[test]
fn clamped_end_has_zero_displacement() {
    let f: VectorFn = Arc::new(|y| [1.0 + y[1], 0.5 - y[0], y[2]]);
    for tag in regime_tag_all() {
        let r = regime(tag, 1.0);
        let b = solve(&iso_disc(), Some(&f), None, &opts(4, 0.2), &r, penalty(&r, &sample_gram()));
        for y in [[1.0, 0.0, 0.0], [1.0, 0.5, -0.5]] {
            assert!(b.eval_limit_displacement(&y).unwrap().iter().all(|v| v.abs() < 1e-14));
        }
        assert_eq!(b.twist(1.0).0, 0.0);
        assert_eq!(b.zeta(2, 1.0).1, 0.0);
    }
}

#[test]
fn extension_strain_has_poisson_contraction() {
    let r = regime(RegimeTag::SubCubic, 1.0);
    let model = Arc::new(LimitModel::build(&iso_disc(), None, None, &opts(4, 0.1)).unwrap());
    let l = model.layout;
    let mut coef = vec![0.0; l.dim()];
    for k in 0..=8 {
        coef[l.zeta1(k)] = k as f64 / 8.0 - 1.0;
    }
    let b = BeamSolution { model, regime: r, penalty: PenaltyForm::zero(r.tag), coef };
    for y in [[0.2, 0.1, 0.3], [0.7, -0.4, 0.2], [0.5, 0.0, 0.0]] {
        let e = b.eval_e(&y).unwrap();
        assert!((e[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((e[(1, 1)] + 0.3).abs() < 0.003, "{e}");
        assert!((e[(2, 2)] + 0.3).abs() < 0.003);
        assert!(e[(1, 2)].abs() < 0.003 && e[(0, 1)].abs() < 1e-3);
    }
}

#[test]
fn disc_twist_does_not_warp() {
    let r = regime(RegimeTag::SubCubic, 1.0);
    let model = Arc::new(LimitModel::build(&iso_disc(), None, None, &opts(4, 0.05)).unwrap());
    let l = model.layout;
    let mut coef = vec![0.0; l.dim()];
    for k in 0..=8 {
        coef[l.twist(k)] = k as f64 / 8.0 - 1.0;
    }
    let b = BeamSolution { model, regime: r, penalty: PenaltyForm::zero(r.tag), coef };
    for y in [[0.2, 0.1, 0.3], [0.7, -0.4, 0.2], [0.5, 0.6, -0.6]] {
        let e = b.eval_e(&y).unwrap();
        assert!((e[(0, 1)] - 0.5 * y[2]).abs() < 1e-3, "{e}");
        assert!((e[(0, 2)] + 0.5 * y[1]).abs() < 1e-3);
        assert!(b.micro_fields(&y).unwrap()[0].abs() < 1e-3);
    }
}

#[test]
fn micro_modes_satisfy_gauge() {
    let section = Arc::new(build_section_mesh(&Shape2::Rect { width: 1.0, height: 0.6 }, 0.1).unwrap());
    let m = MaterialField::isotropic(1.0, 0.25, Shape2::Rect { width: 1.0, height: 0.6 }).unwrap();
    let solver = CellSolver::new(section.clone(), &m, 0.5, 1e-11).unwrap();
    let h: TensorFn = Arc::new(|y| Matrix3::new(y[1], 0.2, 0.0, 0.2, 1.0, y[2], 0.0, y[2], -0.5));
    let cell = micro_cell_solve(section, &m, Some(&h), 0.5, 1e-11).unwrap();
    let mut fields: Vec<&Vec<f64>> = cell.modes.iter().collect();
    fields.push(cell.prestrain_mode.as_ref().unwrap());
    for f in fields {
        let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for row in solver.constraint_rows() {
            let c: f64 = row.iter().zip(f).map(|(a, b)| a * b).sum();
            assert!(c.abs() < 1e-9 * scale, "{c}");
        }
    }
}

#[test]
fn heterogeneous_but_axially_constant_material_gives_constant_d() {
    let m = iso_disc().with_modulation(Arc::new(|y| 1.0 + 0.5 * y[1] * y[1]));
    let model = LimitModel::build(&m, None, None, &opts(2, 0.2)).unwrap();
    let d0 = model.cells[0].d;
    for c in &model.cells {
        assert!((c.d - d0).amax() < 1e-9 * d0.amax());
        assert!(c.d.cholesky().is_some());
    }
}

#[test]
fn energy_equals_work() {
    let f: VectorFn = Arc::new(|y| [1.0 + y[1], 0.3 * y[0], -0.2]);
    let h: TensorFn = Arc::new(|y| Matrix3::new(0.1, y[2], 0.0, y[2], 0.0, 0.0, 0.0, 0.0, y[0]));
    for tag in regime_tag_all() {
        let r = regime(tag, 0.7);
        let b = solve(&iso_disc(), Some(&f), Some(&h), &opts(6, 0.2), &r, penalty(&r, &sample_gram()));
        assert_relative_eq!(b.energy(), b.work(), max_relative = 1e-10);
    }
}

#[test]
fn condensed_equals_monolithic() {
    let m = iso_disc().with_modulation(Arc::new(|y| 1.0 + 0.3 * y[0] + 0.2 * y[1]));
    let f: VectorFn = Arc::new(|y| [1.0 + y[1], 0.5 * y[0], -0.3 + y[2]]);
    let h: TensorFn = Arc::new(|y| Matrix3::new(0.2, y[2], 0.1, y[2], y[0], 0.0, 0.1, 0.0, -0.4));
    let o = LimitOptions { elements: 3, section_h: 0.35, cell_tol: 1e-13 };
    for tag in [RegimeTag::SubCubic, RegimeTag::Critical3, RegimeTag::Critical1, RegimeTag::CriticalThird] {
        let r = regime(tag, 1.3);
        let p = penalty(&r, &sample_gram());
        let b = solve(&m, Some(&f), Some(&h), &o, &r, p.clone());
        let mono = monolithic_solve(&m, Some(&f), Some(&h), &o, &p);
        let d = rel_diff(&b.coef, &mono.beam);
        assert!(d < 1e-8, "{tag}: {d}");
        for (k, q) in b.model.quadrature.iter().enumerate() {
            let theta = b.theta(q.2);
            let cell = &b.model.cells[k];
            let rec: Vec<f64> = (0..cell.modes[0].len())
                .map(|i| {
                    (0..4).map(|mm| theta[mm] * cell.modes[mm][i]).sum::<f64>()
                        + cell.prestrain_mode.as_ref().map_or(0.0, |p| p[i])
                })
                .collect();
            let dm = rel_diff(&rec, &mono.micro[k]);
            assert!(dm < 1e-7, "{tag} cell {k}: {dm}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solution_is_linear_in_loads(s in -3.0f64..3.0, a in -1.0f64..1.0) {
        let r = regime(RegimeTag::Critical1, 1.0);
        let mut gg = Matrix6::zeros();
        gg[(0, 0)] = 1.7;
        let f1: VectorFn = Arc::new(move |y| [1.0 + a * y[1], a, 0.0]);
        let fs: VectorFn = Arc::new(move |y| [s * (1.0 + a * y[1]), s * a, 0.0]);
        let b1 = solve(&iso_disc(), Some(&f1), None, &opts(4, 0.25), &r, penalty(&r, &gg));
        let bs = solve(&iso_disc(), Some(&fs), None, &opts(4, 0.25), &r, penalty(&r, &gg));
        for (x, y) in b1.coef.iter().zip(&bs.coef) {
            prop_assert!((s * x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn effective_stiffness_is_spd_for_anisotropic_scaling(t in 0.5f64..2.0, nu in 0.0f64..0.45) {
        let m = MaterialField::isotropic(t, nu, unit_disc()).unwrap();
        let model = LimitModel::build(&m, None, None, &opts(1, 0.3)).unwrap();
        let d = model.cells[0].d;
        prop_assert!((d - d.transpose()).amax() == 0.0);
        prop_assert!(d.cholesky().is_some());
        prop_assert!((d[(0, 0)] / (t * model.section.area()) - 1.0).abs() < 1e-8);
    }
}
