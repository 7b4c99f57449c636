use crate::error::{Error, Result};

/// Bounded planar domain centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape2 {
    Disc { radius: f64 },
    Rect { width: f64, height: f64 },
}

impl Shape2 {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape2::Disc { radius } => radius > 0.0 && radius.is_finite(),
            Shape2::Rect { width, height } => {
                width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!("degenerate shape {self:?}")))
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape2::Disc { radius } => std::f64::consts::PI * radius * radius,
            Shape2::Rect { width, height } => width * height,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Shape2::Disc { radius } => 2.0 * radius,
            Shape2::Rect { width, height } => width.hypot(height),
        }
    }

    pub fn half_extents(&self) -> (f64, f64) {
        match *self {
            Shape2::Disc { radius } => (radius, radius),
            Shape2::Rect { width, height } => (0.5 * width, 0.5 * height),
        }
    }

    /// Closed-set membership; `tol` is relative to the shape size.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        match *self {
            Shape2::Disc { radius } => p[0].hypot(p[1]) <= radius * (1.0 + tol),
            Shape2::Rect { width, height } => {
                p[0].abs() <= 0.5 * width * (1.0 + tol) && p[1].abs() <= 0.5 * height * (1.0 + tol)
            }
        }
    }

    /// Whether `scale * other` fits inside `self`.
    pub fn contains_scaled(&self, other: &Shape2, scale: f64) -> bool {
        let (w, h) = other.half_extents();
        match (*self, *other) {
            (Shape2::Disc { radius }, Shape2::Disc { radius: r0 }) => scale * r0 <= radius,
            (Shape2::Disc { radius }, Shape2::Rect { .. }) => scale * w.hypot(h) <= radius,
            (Shape2::Rect { .. }, _) => {
                let (sw, sh) = self.half_extents();
                scale * w <= sw && scale * h <= sh
            }
        }
    }

    /// Boundary point attached to a point `u` of the unit-square boundary (`|u|_inf = 1`).
    ///
    /// Discs use an equi-angular parametrisation so boundary nodes are evenly spaced.
    pub fn boundary_point(&self, u: [f64; 2]) -> [f64; 2] {
        match *self {
            Shape2::Disc { radius } => {
                let theta = square_angle(u);
                [radius * theta.cos(), radius * theta.sin()]
            }
            Shape2::Rect { width, height } => [0.5 * width * u[0], 0.5 * height * u[1]],
        }
    }
}

/// Angle attached to a unit-square boundary point, linear along each side.
fn square_angle(u: [f64; 2]) -> f64 {
    use std::f64::consts::FRAC_PI_4;
    let (x, y) = (u[0], u[1]);
    if x >= y.abs() {
        FRAC_PI_4 * y
    } else if y >= x.abs() {
        2.0 * FRAC_PI_4 - FRAC_PI_4 * x
    } else if -x >= y.abs() {
        4.0 * FRAC_PI_4 - FRAC_PI_4 * y
    } else {
        6.0 * FRAC_PI_4 + FRAC_PI_4 * x
    }
}

/// Cross-section `S` and clamped patch shape `S0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionSpec {
    pub section: Shape2,
    pub patch: Shape2,
}

impl SectionSpec {
    pub fn discs(radius: f64, patch_radius: f64) -> Self {
        Self {
            section: Shape2::Disc { radius },
            patch: Shape2::Disc { radius: patch_radius },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.section.validate()?;
        self.patch.validate()
    }
}
