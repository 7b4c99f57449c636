//! Plain-text run configuration: one `key = value` per line, dotted section prefixes,
//! `#` comments. Unknown keys are rejected.
//!
//! ```text
//! material.young = 1.0
//! material.poisson = 0.3
//! section.shape = disc
//! section.radius = 1
//! patch.radius = 0.5
//! load.f1 = 1
//! load.f3 = 1 + y1
//! regime.kappa = 1
//! regime.p = 2
//! study.eps = 0.2, 0.1, 0.05
//! ```
//!
//! Load and modulation entries are expressions in `y1`, `y2`, `y3`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use exmex::prelude::*;
use nalgebra::Matrix3;
use num_rational::Rational64;

use crate::capacity::Farfield;
use crate::error::{Error, Result};
use crate::fem::{SolverOptions, TensorFn, VectorFn};
use crate::geometry::{Grading, SectionSpec, Shape2};
use crate::material::{MaterialField, Point3, VoigtMatrix};
use crate::regimes::{classify, RegimeSpec};

/// Closed-form scalar expression in `y1, y2, y3`.
#[derive(Clone)]
pub struct Expr {
    text: String,
    ex: FlatEx<f64>,
    slots: Vec<usize>,
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Expr({:?})", self.text)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self> {
        let ex = exmex::parse::<f64>(&expand_exponents(text)).map_err(|e| Error::Config(format!("expression {text:?}: {e}")))?;
        let mut slots = Vec::new();
        for name in ex.var_names() {
            let k = match name.as_str() {
                "y1" => 0,
                "y2" => 1,
                "y3" => 2,
                other => return Err(Error::Config(format!("unknown variable {other:?} in {text:?}"))),
            };
            slots.push(k);
        }
        let e = Self { text: text.to_string(), ex, slots };
        let probe = e.eval(&[0.5, 0.1, 0.1]);
        if !probe.is_finite() {
            return Err(Error::Config(format!("expression {text:?} is not finite at a sample point")));
        }
        Ok(e)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_zero(&self) -> bool {
        self.slots.is_empty() && self.eval(&[0.0; 3]) == 0.0
    }

    pub fn eval(&self, y: &Point3) -> f64 {
        let vars: Vec<f64> = self.slots.iter().map(|&k| y[k]).collect();
        self.ex.eval(&vars).unwrap_or(f64::NAN)
    }
}

/// Rewrites literals such as `2.5e-3` as plain decimals; the expression parser only
/// understands the latter.
fn expand_exponents(text: &str) -> String {
    let b = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < b.len() {
        let starts_number = b[i].is_ascii_digit() && (i == 0 || !(b[i - 1].is_ascii_alphanumeric() || b[i - 1] == b'_' || b[i - 1] == b'.'));
        if !starts_number {
            out.push(b[i] as char);
            i += 1;
            continue;
        }
        let mut j = i;
        while j < b.len() && (b[j].is_ascii_digit() || b[j] == b'.') {
            j += 1;
        }
        let mut k = j;
        if k < b.len() && (b[k] == b'e' || b[k] == b'E') {
            k += 1;
            if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                k += 1;
            }
            let digits = k;
            while k < b.len() && b[k].is_ascii_digit() {
                k += 1;
            }
            if k > digits {
                if let Ok(v) = text[i..k].parse::<f64>() {
                    out.push_str(&format!("{v}"));
                    i = k;
                    continue;
                }
            }
        }
        out.push_str(&text[i..j]);
        i = j;
    }
    out
}

#[derive(Clone, Debug)]
pub enum MaterialSpec {
    Isotropic { young: f64, poisson: f64 },
    /// Upper triangle of the Voigt matrix, row by row.
    Voigt([f64; 21]),
}

/// `StudyConfig`.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub material: MaterialSpec,
    pub modulation: Option<Expr>,
    pub section: Shape2,
    pub patch: Shape2,
    /// `(f1, f2, f3)`.
    pub f: [Expr; 3],
    /// `(h11, h22, h33, h23, h13, h12)`.
    pub h: [Expr; 6],
    pub kappa: f64,
    pub p: Rational64,
    pub eps: Vec<f64>,
    /// Axial elements per unit length times `eps`; `axial_n = ceil(axial_aspect / eps)`.
    pub axial_aspect: f64,
    /// Fixed axial element count, overriding `axial_aspect`.
    pub axial_n: Option<usize>,
    pub grading: Grading,
    pub limit_elements: usize,
    pub section_h: f64,
    pub capacity_lengths: Vec<f64>,
    pub capacity_grading: Grading,
    pub solver: SolverOptions,
    pub cell_tol: f64,
    pub out_dir: PathBuf,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let zero = || Expr::parse("0").expect("constant");
        Self {
            material: MaterialSpec::Isotropic { young: 1.0, poisson: 0.3 },
            modulation: None,
            section: Shape2::Disc { radius: 1.0 },
            patch: Shape2::Disc { radius: 1.0 },
            f: std::array::from_fn(|_| zero()),
            h: std::array::from_fn(|_| zero()),
            kappa: 1.0,
            p: Rational64::from_integer(2),
            eps: vec![0.2, 0.1, 0.05],
            axial_aspect: 3.0,
            axial_n: None,
            grading: Grading::default(),
            limit_elements: 32,
            section_h: 0.05,
            capacity_lengths: vec![8.0, 16.0],
            capacity_grading: Grading::default(),
            solver: SolverOptions::default(),
            cell_tol: 1e-11,
            out_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: &[&str] = &[
    "material.kind",
    "material.young",
    "material.poisson",
    "material.voigt",
    "material.modulation",
    "section.shape",
    "section.radius",
    "section.width",
    "section.height",
    "patch.shape",
    "patch.radius",
    "patch.width",
    "patch.height",
    "load.f1",
    "load.f2",
    "load.f3",
    "load.h11",
    "load.h22",
    "load.h33",
    "load.h23",
    "load.h13",
    "load.h12",
    "regime.kappa",
    "regime.p",
    "study.eps",
    "mesh.axial_aspect",
    "mesh.axial_n",
    "mesh.section_n",
    "mesh.ratio",
    "limit.elements",
    "limit.section_h",
    "capacity.lengths",
    "capacity.section_n",
    "capacity.ratio",
    "solver.tol",
    "solver.maxit",
    "solver.cell_tol",
    "output.dir",
];

fn num(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| Error::Config(format!("{key}: {v:?} is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: {v:?} is not finite")));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: {v:?} is not a nonnegative integer")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

/// Parses an exponent written as `a/b`, an integer or an exact decimal.
pub fn parse_rational(v: &str) -> Result<Rational64> {
    rational("exponent", v)
}

fn rational(key: &str, v: &str) -> Result<Rational64> {
    let v = v.trim();
    let bad = || Error::Config(format!("{key}: {v:?} is not a rational number"));
    if let Some((a, b)) = v.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(a, b));
    }
    if let Ok(i) = v.parse::<i64>() {
        return Ok(Rational64::from_integer(i));
    }
    // finite decimals are exact rationals
    let (int, frac) = v.split_once('.').ok_or_else(bad)?;
    if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let den = 10i64.pow(frac.len() as u32);
    let neg = int.trim_start().starts_with('-');
    let ip: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
    let fp: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let n = ip.abs() * den + fp;
    Ok(Rational64::new(if neg { -n } else { n }, den))
}

fn shape(entries: &BTreeMap<String, String>, prefix: &str, default: Shape2) -> Result<Shape2> {
    let get = |k: &str| entries.get(&format!("{prefix}.{k}"));
    let kind = get("shape").map(|s| s.trim().to_ascii_lowercase());
    let s = match kind.as_deref() {
        None if get("width").is_none() && get("height").is_none() && get("radius").is_none() => default,
        None | Some("disc") if get("width").is_none() && get("height").is_none() => {
            let r = get("radius").map(|v| num(&format!("{prefix}.radius"), v)).transpose()?;
            let base = match default {
                Shape2::Disc { radius } => radius,
                _ => 1.0,
            };
            Shape2::Disc { radius: r.unwrap_or(base) }
        }
        None | Some("rect") => {
            if get("radius").is_some() {
                return Err(Error::Config(format!("{prefix}: radius given for a rectangle")));
            }
            let w = get("width").ok_or_else(|| Error::Config(format!("{prefix}.width missing")))?;
            let h = get("height").ok_or_else(|| Error::Config(format!("{prefix}.height missing")))?;
            Shape2::Rect { width: num(&format!("{prefix}.width"), w)?, height: num(&format!("{prefix}.height"), h)? }
        }
        Some(other) => return Err(Error::Config(format!("{prefix}.shape: unknown shape {other:?}"))),
    };
    s.validate().map_err(|e| Error::Config(format!("{prefix}: {e}")))?;
    Ok(s)
}

impl StudyConfig {
    /// Parses configuration text; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim().to_string();
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key {k:?}", lineno + 1)));
            }
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
        }
        Self::from_entries(&entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_entries(m: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        let get = |k: &str| m.get(k).map(String::as_str);
        let kind = get("material.kind").unwrap_or(if get("material.voigt").is_some() { "voigt" } else { "isotropic" });
        c.material = match kind {
            "isotropic" => {
                if get("material.voigt").is_some() {
                    return Err(Error::Config("material.voigt given for an isotropic material".into()));
                }
                MaterialSpec::Isotropic {
                    young: get("material.young").map(|v| num("material.young", v)).transpose()?.unwrap_or(1.0),
                    poisson: get("material.poisson").map(|v| num("material.poisson", v)).transpose()?.unwrap_or(0.3),
                }
            }
            "voigt" => {
                let v = list("material.voigt", get("material.voigt").unwrap_or(""))?;
                let arr: [f64; 21] = v
                    .try_into()
                    .map_err(|_| Error::Config("material.voigt needs 21 coefficients".into()))?;
                MaterialSpec::Voigt(arr)
            }
            other => return Err(Error::Config(format!("material.kind: unknown kind {other:?}"))),
        };
        c.modulation = get("material.modulation").map(Expr::parse).transpose()?;
        c.section = shape(m, "section", c.section)?;
        c.patch = shape(m, "patch", c.patch)?;
        for (k, name) in ["f1", "f2", "f3"].iter().enumerate() {
            if let Some(v) = get(&format!("load.{name}")) {
                c.f[k] = Expr::parse(v)?;
            }
        }
        for (k, name) in ["h11", "h22", "h33", "h23", "h13", "h12"].iter().enumerate() {
            if let Some(v) = get(&format!("load.{name}")) {
                c.h[k] = Expr::parse(v)?;
            }
        }
        if let Some(v) = get("regime.kappa") {
            c.kappa = num("regime.kappa", v)?;
        }
        if let Some(v) = get("regime.p") {
            c.p = rational("regime.p", v)?;
        }
        if let Some(v) = get("study.eps") {
            c.eps = list("study.eps", v)?;
        }
        if let Some(v) = get("mesh.axial_aspect") {
            c.axial_aspect = num("mesh.axial_aspect", v)?;
        }
        c.axial_n = get("mesh.axial_n").map(|v| count("mesh.axial_n", v)).transpose()?;
        if let Some(v) = get("mesh.section_n") {
            c.grading.patch_divisions = count("mesh.section_n", v)?;
        }
        if let Some(v) = get("mesh.ratio") {
            c.grading.ratio = num("mesh.ratio", v)?;
        }
        if let Some(v) = get("limit.elements") {
            c.limit_elements = count("limit.elements", v)?;
        }
        if let Some(v) = get("limit.section_h") {
            c.section_h = num("limit.section_h", v)?;
        }
        if let Some(v) = get("capacity.lengths") {
            c.capacity_lengths = list("capacity.lengths", v)?;
        }
        if let Some(v) = get("capacity.section_n") {
            c.capacity_grading.patch_divisions = count("capacity.section_n", v)?;
        }
        if let Some(v) = get("capacity.ratio") {
            c.capacity_grading.ratio = num("capacity.ratio", v)?;
        }
        if let Some(v) = get("solver.tol") {
            c.solver.tol = num("solver.tol", v)?;
        }
        c.solver.maxit = get("solver.maxit").map(|v| count("solver.maxit", v)).transpose()?;
        if let Some(v) = get("solver.cell_tol") {
            c.cell_tol = num("solver.cell_tol", v)?;
        }
        if let Some(v) = get("output.dir") {
            c.out_dir = PathBuf::from(v);
        }
        c.validate()?;
        Ok(c)
    }

    /// Checks the invariants: decreasing `eps`, positive resolutions, `r S0` inside `S`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.eps.is_empty() {
            return bad("study.eps is empty".into());
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad(format!("study.eps values must lie in (0, 1): {:?}", self.eps));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("study.eps must be strictly decreasing: {:?}", self.eps));
        }
        if !(self.axial_aspect > 0.0) || self.axial_n == Some(0) {
            return bad("axial resolution must be positive".into());
        }
        if self.grading.patch_divisions < 2 || !(self.grading.ratio > 1.0) {
            return bad(format!("mesh grading must have section_n >= 2 and ratio > 1, got {:?}", self.grading));
        }
        if self.capacity_grading.patch_divisions < 2 || !(self.capacity_grading.ratio > 1.0) {
            return bad(format!("capacity grading invalid: {:?}", self.capacity_grading));
        }
        if self.limit_elements == 0 || !(self.section_h > 0.0) {
            return bad("limit resolution must be positive".into());
        }
        if self.capacity_lengths.is_empty() || self.capacity_lengths.iter().any(|&l| !(l > 0.0)) {
            return bad("capacity.lengths must be a nonempty list of positive lengths".into());
        }
        if !(self.solver.tol > 0.0) || !(self.cell_tol > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        if !(self.kappa > 0.0) || self.p < Rational64::from_integer(0) {
            return bad(format!("regime needs kappa > 0 and p >= 0, got ({}, {})", self.kappa, self.p));
        }
        let r = self.regime()?.r_eps(self.eps[0]);
        if !self.section.contains_scaled(&self.patch, r) {
            return bad(format!("r_eps * S0 with r_eps = {r:.4} does not fit inside S"));
        }
        if let MaterialSpec::Isotropic { young, poisson } = self.material {
            if !(young > 0.0) || !(poisson > -1.0 && poisson < 0.5) {
                return bad(format!("isotropic constants out of range: E = {young}, nu = {poisson}"));
            }
        }
        self.material_field()?;
        Ok(())
    }

    pub fn regime(&self) -> Result<RegimeSpec> {
        classify(self.kappa, self.p).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn section_spec(&self) -> SectionSpec {
        SectionSpec { section: self.section, patch: self.patch }
    }

    pub fn axial_n(&self, eps: f64) -> usize {
        self.axial_n.unwrap_or_else(|| (self.axial_aspect / eps - 1e-9).ceil() as usize).max(4)
    }

    pub fn material_field(&self) -> Result<MaterialField> {
        let mut m = match &self.material {
            MaterialSpec::Isotropic { young, poisson } => MaterialField::isotropic(*young, *poisson, self.section)
                .map_err(|e| Error::Config(e.to_string()))?,
            MaterialSpec::Voigt(c) => MaterialField::voigt(
                VoigtMatrix::from_upper(c).map_err(|e| Error::Config(e.to_string()))?,
                self.section,
            ),
        };
        if let Some(e) = &self.modulation {
            let e = e.clone();
            m = m.with_modulation(Arc::new(move |y: &Point3| e.eval(y)));
        }
        match m.coercivity_estimate(8) {
            Ok(_) => Ok(m),
            Err(e) => Err(Error::Config(e.to_string())),
        }
    }

    pub fn has_body_load(&self) -> bool {
        self.f.iter().any(|e| !e.is_zero())
    }

    pub fn has_prestrain(&self) -> bool {
        self.h.iter().any(|e| !e.is_zero())
    }

    pub fn body_load(&self) -> Option<VectorFn> {
        if !self.has_body_load() {
            return None;
        }
        let f = self.f.clone();
        Some(Arc::new(move |y: &Point3| [f[0].eval(y), f[1].eval(y), f[2].eval(y)]))
    }

    pub fn prestrain(&self) -> Option<TensorFn> {
        if !self.has_prestrain() {
            return None;
        }
        let h = self.h.clone();
        Some(Arc::new(move |y: &Point3| {
            let v: [f64; 6] = std::array::from_fn(|k| h[k].eval(y));
            Matrix3::new(v[0], v[5], v[4], v[5], v[1], v[3], v[4], v[3], v[2])
        }))
    }

    /// Same configuration with every load expression multiplied by `s`.
    pub fn scaled_loads(&self, s: f64) -> Result<Self> {
        let mut c = self.clone();
        let wrap = |e: &Expr| -> Result<Expr> {
            if e.is_zero() {
                Ok(e.clone())
            } else {
                Expr::parse(&format!("({s})*({})", e.text()))
            }
        };
        for k in 0..3 {
            c.f[k] = wrap(&self.f[k])?;
        }
        for k in 0..6 {
            c.h[k] = wrap(&self.h[k])?;
        }
        Ok(c)
    }

    /// Capacity far field used for the penalty and the corrector.
    pub fn penalty_farfield(&self) -> Farfield {
        Farfield::Natural
    }

    /// Truncation length used for the penalty and the corrector: the largest listed.
    pub fn penalty_length(&self) -> f64 {
        self.capacity_lengths.iter().copied().fold(0.0, f64::max)
    }
}
