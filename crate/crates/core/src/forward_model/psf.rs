//! One-dimensional PSF profiles and their tabulated primitives.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Default tabulation step of the primitive, in image pixels.
pub const DEFAULT_QUADRATURE_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PsfKind {
    /// `1` inside `|x| <= r`, `0` outside.
    Box,
    /// `exp(-2|x| / r)`.
    Exponential,
    /// `exp(-(x / r)^2)`.
    Gaussian,
}

impl PsfKind {
    pub const ALL: [PsfKind; 3] = [PsfKind::Box, PsfKind::Exponential, PsfKind::Gaussian];

    /// Half-width beyond which the profile is below `f64` resolution (or is zero).
    fn support(self, radius: f64) -> f64 {
        match self {
            PsfKind::Box => radius,
            PsfKind::Exponential => 20.0 * radius,
            PsfKind::Gaussian => 7.0 * radius,
        }
    }
}

impl fmt::Display for PsfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsfKind::Box => "box",
            PsfKind::Exponential => "exponential",
            PsfKind::Gaussian => "gaussian",
        })
    }
}

impl FromStr for PsfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "box" | "psf1" => Ok(PsfKind::Box),
            "exponential" | "exp" | "psf2" => Ok(PsfKind::Exponential),
            "gaussian" | "gauss" | "psf3" => Ok(PsfKind::Gaussian),
            other => Err(invalid(format!("unknown PSF kind `{other}`"))),
        }
    }
}

/// A symmetric, nonnegative PSF profile `p` of radius `r` together with its
/// primitive `P` (`P(0) = 0`, odd by construction).
///
/// `P` is tabulated on `[0, support]` by corrected cumulative trapezoid and evaluated
/// between nodes by cubic Hermite interpolation using the analytic `p` as the
/// node slopes. Beyond the support `P` is held constant.
#[derive(Debug, Clone)]
pub struct PsfModel {
    kind: PsfKind,
    radius: f64,
    step: f64,
    support: f64,
    table: Vec<f64>,
}

impl PsfModel {
    pub fn new(kind: PsfKind, radius: f64) -> Result<Self> {
        Self::with_step(kind, radius, DEFAULT_QUADRATURE_STEP)
    }

    pub fn with_step(kind: PsfKind, radius: f64, step: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("PSF radius must be positive, got {radius}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!("quadrature step must be positive, got {step}")));
        }
        let support = kind.support(radius);
        let nodes = (support / step).ceil().max(1.0) as usize;
        let h = support / nodes as f64;

        let mut table = Vec::with_capacity(nodes + 1);
        table.push(0.0);
        let mut acc = 0.0;
        let mut prev = (profile(kind, radius, 0.0), right_slope(kind, radius, 0.0));
        for i in 1..=nodes {
            // The last node sits exactly on the support so the Box edge is captured.
            let x = if i == nodes { support } else { i as f64 * h };
            let cur = (profile(kind, radius, x), right_slope(kind, radius, x));
            // Trapezoid with the endpoint-derivative correction.
            acc += 0.5 * (prev.0 + cur.0) * h - h * h / 12.0 * (cur.1 - prev.1);
            table.push(acc);
            prev = cur;
        }

        Ok(Self {
            kind,
            radius,
            step: h,
            support,
            table,
        })
    }

    pub fn kind(&self) -> PsfKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Actual spacing of the primitive table.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    /// `p(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        profile(self.kind, self.radius, x)
    }

    /// `p'(x)`. Box has no classical derivative; a backward second difference
    /// of the primitive table stands in for it.
    pub fn derivative(&self, x: f64) -> f64 {
        let r = self.radius;
        match self.kind {
            PsfKind::Box => {
                let h = self.step;
                let s = x.signum();
                let a = x.abs();
                s * (self.primitive(a) - 2.0 * self.primitive(a - h) + self.primitive(a - 2.0 * h))
                    / (h * h)
            }
            PsfKind::Exponential => {
                if x == 0.0 {
                    0.0
                } else {
                    -2.0 / r * x.signum() * (-2.0 * x.abs() / r).exp()
                }
            }
            PsfKind::Gaussian => -2.0 * x / (r * r) * (-(x / r).powi(2)).exp(),
        }
    }

    /// `P(x) = ∫_0^x p`.
    pub fn primitive(&self, x: f64) -> f64 {
        let a = x.abs();
        let value = if a >= self.support {
            *self.table.last().expect("table has at least two nodes")
        } else {
            let t = a / self.step;
            let i = (t.floor() as usize).min(self.table.len() - 2);
            let u = t - i as f64;
            let x0 = i as f64 * self.step;
            let h = self.step;
            let (p0, p1) = (self.table[i], self.table[i + 1]);
            let (m0, m1) = (self.eval(x0) * h, self.eval(x0 + h) * h);
            if self.kind == PsfKind::Box {
                p0 + (p1 - p0) * u
            } else {
                let u2 = u * u;
                let u3 = u2 * u;
                (2.0 * u3 - 3.0 * u2 + 1.0) * p0
                    + (u3 - 2.0 * u2 + u) * m0
                    + (-2.0 * u3 + 3.0 * u2) * p1
                    + (u3 - u2) * m1
            }
        };
        value.copysign(x)
    }

    /// `∫_{lo}^{hi} p(x - t) dt`, the weight a unit spanning `[lo, hi]`
    /// contributes to the field at `x`.
    pub fn window(&self, x: f64, lo: f64, hi: f64) -> f64 {
        self.primitive(x - lo) - self.primitive(x - hi)
    }

    /// Total kernel mass `∫ p`.
    pub fn mass(&self) -> f64 {
        2.0 * self.primitive(self.support)
    }
}

fn profile(kind: PsfKind, radius: f64, x: f64) -> f64 {
    let a = x.abs();
    match kind {
        PsfKind::Box => {
            if a <= radius {
                1.0
            } else {
                0.0
            }
        }
        PsfKind::Exponential => (-2.0 * a / radius).exp(),
        PsfKind::Gaussian => (-(a / radius).powi(2)).exp(),
    }
}

/// `p'` on `x >= 0`, taken from the right at the exponential cusp.
fn right_slope(kind: PsfKind, radius: f64, x: f64) -> f64 {
    match kind {
        PsfKind::Box => 0.0,
        PsfKind::Exponential => -2.0 / radius * (-2.0 * x / radius).exp(),
        PsfKind::Gaussian => -2.0 * x / (radius * radius) * (-(x / radius).powi(2)).exp(),
    }
}

/// `p(x)` for the given model.
pub fn psf_eval(model: &PsfModel, x: f64) -> f64 {
    model.eval(x)
}
