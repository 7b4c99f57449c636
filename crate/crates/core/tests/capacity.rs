use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::Rational64;
use patchbeam::capacity::*;
use patchbeam::fem::{strain_at_quadrature, StrainSamples};
use patchbeam::geometry::Shape2;
use patchbeam::material::VoigtMatrix;
use patchbeam::regimes::{classify, corrector_eval, corrector_mass, RegimeTag};
use proptest::prelude::*;

fn a0() -> VoigtMatrix {
    VoigtMatrix::isotropic(1.0, 0.3).unwrap()
}

fn disc() -> Shape2 {
    Shape2::Disc { radius: 0.5 }
}

fn set(length: f64, ff: Farfield) -> CapacitarySet {
    CapacitarySet::build(&a0(), &disc(), CapacityParams::new(length, ff)).unwrap()
}

fn natural4() -> &'static CapacitarySet {
    static S: OnceLock<CapacitarySet> = OnceLock::new();
    S.get_or_init(|| set(4.0, Farfield::Natural))
}

fn clamped4() -> &'static CapacitarySet {
    static S: OnceLock<CapacitarySet> = OnceLock::new();
    S.get_or_init(|| set(4.0, Farfield::Clamped))
}

#[test]
fn potentials_are_linear_in_data() {
    let p = HalfSpaceProblem::new(&a0(), &disc(), CapacityParams::new(4.0, Farfield::Clamped)).unwrap();
    let (z, _) = p.solve(PatchProfileKind::Trans2, 0.0).unwrap();
    assert_eq!(z.max_abs(), 0.0);
    let (u1, _) = p.solve(PatchProfileKind::Rot3, 1.0).unwrap();
    let (u2, _) = p.solve(PatchProfileKind::Rot3, 2.0).unwrap();
    let scale = u1.max_abs();
    for (a, b) in u1.values.iter().zip(&u2.values) {
        for c in 0..3 {
            assert!((2.0 * a[c] - b[c]).abs() < 1e-7 * scale);
        }
    }
}

#[test]
fn potentials_take_patch_data() {
    let s = natural4();
    for &n in s.mesh.node_set(patchbeam::geometry::NodeSet::Patch) {
        let z = s.mesh.nodes()[n];
        for (k, kind) in PatchProfileKind::ALL.into_iter().enumerate() {
            let want = patch_profile(kind, &[0.0, z[1], z[2]], &disc()).unwrap();
            assert_eq!(s.fields[k].values[n], want);
        }
    }
}

#[test]
fn gram_is_symmetric_and_phi_block_is_definite() {
    for s in [natural4(), clamped4()] {
        assert_eq!((s.gram - s.gram.transpose()).amax(), 0.0);
        let phi = s.gram.fixed_view::<3, 3>(0, 0).into_owned();
        let e = SymmetricEigen::new(phi);
        assert!(e.eigenvalues.min() > 0.0);
        assert!(s.condition_a.is_finite() && s.condition_b.is_finite());
    }
}

#[test]
fn gram_matches_direct_quadrature() {
    // Independent route: contract the stored strains with the tensor point by point.
    let s = natural4();
    let c = a0();
    for i in 0..6 {
        for j in 0..=i {
            let (a, b): (&StrainSamples, &StrainSamples) = (&s.strains[i], &s.strains[j]);
            let mut g = 0.0;
            for q in 0..a.len() {
                g += a.weights[q] * (c.apply(&a.strains[q]).component_mul(&b.strains[q])).sum();
            }
            assert!((g - s.gram[(i, j)]).abs() < 1e-10 * s.gram[(i, i)].max(s.gram[(j, j)]));
        }
    }
}

#[test]
fn orthogonalized_generators_match_least_squares() {
    // Dense oracle: minimize the energy of target + sum c_k basis_k through a generic solver.
    let s = natural4();
    let g = DMatrix::from_fn(6, 6, |i, j| s.gram[(i, j)]);
    let check = |target: usize, basis: &[usize], got: &[f64]| {
        let gbb = DMatrix::from_fn(basis.len(), basis.len(), |a, b| g[(basis[a], basis[b])]);
        let rhs = DMatrix::from_fn(basis.len(), 1, |a, _| -g[(basis[a], target)]);
        let svd = gbb.svd(true, true);
        let x = svd.solve(&rhs, 1e-14).unwrap();
        for k in 0..basis.len() {
            assert!((x[k] - got[k]).abs() < 1e-8 * (1.0 + x[k].abs()), "{target}: {x} vs {got:?}");
        }
    };
    check(0, &[1, 2], &s.a);
    for i in 0..3 {
        check(3 + i, &[0, 1, 2], &s.b[i]);
    }
    for (_, _, r) in s.orthogonality_residuals() {
        assert!(r <= 1e-8, "{r}");
    }
}

#[test]
fn truncation_brackets() {
    let (n4, c4) = (natural4(), clamped4());
    let (n8, c8) = (set(8.0, Farfield::Natural), set(8.0, Farfield::Clamped));
    let b4 = Bracket::new(n4, c4);
    let b8 = Bracket::new(&n8, &c8);
    assert!(b4.ordered(1e-10) && b8.ordered(1e-10));
    for k in 0..6 {
        assert!(b8.relative_gap()[k] < b4.relative_gap()[k], "entry {k}");
        assert!(c8.gram[(k, k)] <= c4.gram[(k, k)] * (1.0 + 1e-10));
    }
}

#[test]
fn penalty_blocks() {
    let s = natural4();
    let gg = s.generator_gram();
    for (p, tag) in [(4, RegimeTag::SubCubic), (2, RegimeTag::CubicToLinear), (0, RegimeTag::SuperCubeRoot)] {
        let r = classify(1.0, Rational64::from_integer(p)).unwrap();
        assert_eq!(r.tag, tag);
        let pf = penalty_form(&r, Some(s)).unwrap();
        assert!(pf.is_zero());
        assert!(coercivity_eigen(&pf).is_err());
    }
    let r = classify(3.0, Rational64::from_integer(1)).unwrap();
    let pf = penalty_form(&r, Some(s)).unwrap();
    assert!((pf.matrix[(2, 2)] - 3.0 * s.k_hat()).abs() < 1e-12 * s.k_hat());
    let r = classify(2.0, Rational64::from_integer(3)).unwrap();
    let pf = penalty_form(&r, Some(s)).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(pf.matrix[(i, j)], 2.0 * gg[(1 + i, 1 + j)]);
        }
    }
    assert!(coercivity_eigen(&pf).unwrap() > 0.0);
    let e = SymmetricEigen::new(pf.matrix);
    assert!(e.eigenvalues.min() > -1e-12 * pf.matrix.amax());
}

#[test]
fn critical_penalties_require_potentials() {
    let r = classify(1.0, Rational64::from_integer(1)).unwrap();
    assert!(penalty_form(&r, None).is_err());
}

#[test]
fn corrector_prefactor_critical3() {
    let s = natural4();
    let r = classify(1.0, Rational64::from_integer(3)).unwrap();
    let t = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let eps = 0.1;
    let z = [0.4, 0.3, -0.2];
    let p = corrector_eval(&r, Some(s), &t, eps, eps.powi(3), &z).unwrap();
    let (e, xi) = s.mesh.locate(z).unwrap();
    let e2 = s.fields[1].strain_at(&s.mesh, e, xi);
    assert!((p + 1e5 * e2).amax() < 1e-9 * p.amax());
}

#[test]
fn corrector_zero_cases() {
    let s = natural4();
    let z = [0.5, 0.1, 0.1];
    for p in [Rational64::from_integer(3), Rational64::from_integer(1), Rational64::new(1, 3)] {
        let r = classify(1.0, p).unwrap();
        assert_eq!(corrector_eval(&r, Some(s), &[0.0; 6], 0.1, 0.01, &z).unwrap(), nalgebra::Matrix3::zeros());
    }
    for p in [Rational64::from_integer(4), Rational64::from_integer(2), Rational64::new(2, 3), Rational64::new(1, 5)] {
        let r = classify(1.0, p).unwrap();
        assert_eq!(corrector_eval(&r, None, &[1.0; 6], 0.1, 0.01, &z).unwrap(), nalgebra::Matrix3::zeros());
    }
    // Beyond the truncated box the potentials are extended by zero.
    let r = classify(1.0, Rational64::from_integer(1)).unwrap();
    assert_eq!(corrector_eval(&r, Some(s), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 0.1, 0.1, &[10.0, 0.0, 0.0]).unwrap(), nalgebra::Matrix3::zeros());
}

#[test]
fn corrector_mass_is_order_one_along_critical_sequences() {
    let s = set(8.0, Farfield::Natural);
    let t = [0.3, -0.2, 0.5, 0.4, 0.2, -0.1];
    for (p, kappa) in [(Rational64::from_integer(1), 1.0), (Rational64::new(1, 3), 0.5)] {
        let r = classify(kappa, p).unwrap();
        let masses: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| corrector_mass(&r, &s, &t, e, r.r_eps(e), &disc()))
            .collect();
        for w in masses.windows(2) {
            let q = w[1] / w[0];
            assert!((0.25..=4.0).contains(&q), "{p}: {masses:?}");
        }
    }
}

#[test]
fn tail_fraction_is_reported() {
    for s in [natural4(), clamped4()] {
        assert!(s.tail.iter().all(|&t| (0.0..1.0).contains(&t)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn penalty_is_psd_with_definite_active_block(rho in 0.01f64..100.0, which in 0usize..3) {
        let s = natural4();
        let p = [Rational64::from_integer(3), Rational64::from_integer(1), Rational64::new(1, 3)][which];
        let kappa = if which == 2 { rho.cbrt() } else { rho };
        let r = classify(kappa, p).unwrap();
        let pf = penalty_form(&r, Some(s)).unwrap();
        let e = SymmetricEigen::new(pf.matrix);
        prop_assert!(e.eigenvalues.min() >= -1e-10 * pf.matrix.amax());
        prop_assert!(coercivity_eigen(&pf).unwrap() > 0.0);
    }

    #[test]
    fn strain_of_scaled_potential_scales(sc in -3.0f64..3.0) {
        let s = natural4();
        let u = s.fields[0].scaled(sc);
        let e = strain_at_quadrature(&s.mesh, &u);
        for q in (0..e.len()).step_by(97) {
            prop_assert!((e.strains[q] - sc * s.strains[0].strains[q]).amax() < 1e-12);
        }
    }
}
