//! Browser bindings: regime classification, section stiffness and the end displacement of
//! an axially loaded rod held by a boundary spring.

use std::sync::Arc;

use nalgebra::Matrix6;
use patchbeam::beam::{solve_limit, LimitModel, LimitOptions};
use patchbeam::capacity::PenaltyForm;
use patchbeam::geometry::Shape2;
use patchbeam::harness::config::parse_rational;
use patchbeam::material::MaterialField;
use patchbeam::regimes::{classify, constraint_set};
use patchbeam::Result;
use wasm_bindgen::prelude::*;

fn shape(kind: &str, a: f64, b: f64) -> Result<Shape2> {
    let s = match kind {
        "disc" => Shape2::Disc { radius: a },
        "rect" => Shape2::Rect { width: a, height: b },
        other => return Err(patchbeam::Error::Config(format!("unknown section shape {other:?}"))),
    };
    s.validate()?;
    Ok(s)
}

/// Regime of `r = kappa eps^p`: name, penalty weight (or none) and constrained traces.
pub fn regime_summary(kappa: f64, p: &str) -> Result<String> {
    let r = classify(kappa, parse_rational(p)?)?;
    let rho = r.rho.map_or("none".to_string(), |v| format!("{v}"));
    let slots: Vec<String> = constraint_set(&r).slots().iter().map(|s| s.name().to_string()).collect();
    Ok(format!("{} | rho {} | vanishing traces: {}", r.tag.name(), rho, if slots.is_empty() { "none".into() } else { slots.join(", ") }))
}

/// Row-major 4x4 section stiffness for extension, the two bendings and torsion.
pub fn stiffness(kind: &str, a: f64, b: f64, young: f64, poisson: f64, h: f64) -> Result<Vec<f64>> {
    let s = shape(kind, a, b)?;
    let m = MaterialField::isotropic(young, poisson, s)?;
    let opts = LimitOptions { elements: 1, section_h: h, ..LimitOptions::default() };
    let model = LimitModel::build(&m, None, None, &opts)?;
    let d = model.cells[0].d;
    Ok((0..16).map(|k| d[(k / 4, k % 4)]).collect())
}

/// `zeta1(0)` of the unit-disc rod under `f = (1, 0, 0)` with end spring `rho * k_hat`, and
/// the closed form `N / (2 (D1 + rho k_hat))`.
pub fn rod_end(rho: f64, k_hat: f64, elements: usize) -> Result<[f64; 2]> {
    let m = MaterialField::isotropic(1.0, 0.3, Shape2::Disc { radius: 1.0 })?;
    let f: patchbeam::fem::VectorFn = Arc::new(|_| [1.0, 0.0, 0.0]);
    let opts = LimitOptions { elements: elements.max(1), section_h: 0.1, ..LimitOptions::default() };
    let model = Arc::new(LimitModel::build(&m, Some(&f), None, &opts)?);
    let regime = classify(rho, parse_rational("1")?)?;
    let mut gg = Matrix6::zeros();
    gg[(0, 0)] = k_hat;
    let penalty = PenaltyForm::from_generator_gram(&regime, &gg);
    let d1 = model.cells[0].d[(0, 0)];
    let n = model.section.area();
    let beam = solve_limit(model, &regime, penalty)?;
    Ok([beam.zeta1(0.0).0, n / (2.0 * (d1 + rho * k_hat))])
}

fn js(e: patchbeam::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = classifyRegime)]
pub fn classify_regime(kappa: f64, p: &str) -> std::result::Result<String, JsError> {
    regime_summary(kappa, p).map_err(js)
}

#[wasm_bindgen(js_name = sectionStiffness)]
pub fn section_stiffness(kind: &str, a: f64, b: f64, young: f64, poisson: f64, h: f64) -> std::result::Result<Vec<f64>, JsError> {
    stiffness(kind, a, b, young, poisson, h).map_err(js)
}

#[wasm_bindgen(js_name = rodEndDisplacement)]
pub fn rod_end_displacement(rho: f64, k_hat: f64, elements: usize) -> std::result::Result<Vec<f64>, JsError> {
    rod_end(rho, k_hat, elements).map(|v| v.to_vec()).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn regime_names() {
        assert!(regime_summary(1.0, "2").unwrap().starts_with("cubic-to-linear"));
        assert!(regime_summary(2.0, "1/3").unwrap().contains("rho 8"));
        assert!(regime_summary(1.0, "x").is_err());
    }

    #[test]
    fn disc_extension_stiffness() {
        let d = stiffness("disc", 1.0, 0.0, 1.0, 0.3, 0.1).unwrap();
        assert!((d[0] - PI).abs() < 0.01 * PI);
        assert!(stiffness("hexagon", 1.0, 1.0, 1.0, 0.3, 0.1).is_err());
    }

    #[test]
    fn rod_matches_closed_form() {
        for rho in [1e-3, 1.0, 10.0] {
            let [num, closed] = rod_end(rho, 2.0, 8).unwrap();
            assert!((num - closed).abs() < 1e-8 * closed.max(1.0), "{num} {closed}");
        }
    }
}
