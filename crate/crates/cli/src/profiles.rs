//! Named analytic families for exponents and weights.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use triharm_core::{Grid, GridFunction};

/// `p(x) = base + slope·x₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentProfile {
    Constant(f64),
    Affine { base: f64, slope: f64 },
}

impl ExponentProfile {
    /// `"2.5"`, `"constant 2.5"` or `"affine 2 0.1"`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let n = |s: &str| s.parse::<f64>().map_err(|_| format!("cannot parse number '{s}'"));
        match words.as_slice() {
            [v] => Ok(ExponentProfile::Constant(n(v)?)),
            ["constant", v] => Ok(ExponentProfile::Constant(n(v)?)),
            ["affine", b, s] => Ok(ExponentProfile::Affine { base: n(b)?, slope: n(s)? }),
            _ => Err(format!("bad exponent profile '{text}'")),
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Vec<f64> {
        (0..grid.len())
            .map(|k| match *self {
                ExponentProfile::Constant(v) => v,
                ExponentProfile::Affine { base, slope } => base + slope * grid.coords(k)[0],
            })
            .collect()
    }
}

impl fmt::Display for ExponentProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentProfile::Constant(v) => write!(f, "constant {v:?}"),
            ExponentProfile::Affine { base, slope } => write!(f, "affine {base:?} {slope:?}"),
        }
    }
}

/// Weight families for `f`, `g`, `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightProfile {
    Zero,
    Constant(f64),
    /// The value on `Ω₀`, zero elsewhere.
    Indicator(f64),
    /// `amp · Π sin²(π x_i / L)`.
    Bump(f64),
    /// `amplitude · sin(2π·frequency·x₁/L) + shift`; sign-changing when
    /// `|shift| < |amplitude|`.
    Sine { amplitude: f64, frequency: f64, shift: f64 },
}

impl WeightProfile {
    /// `"zero"`, `"constant c"`, `"indicator c"`, `"bump amp"` or
    /// `"sine amplitude frequency shift"`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let words: Vec<&str> = text.split_whitespace().collect();
        let n = |s: &str| s.parse::<f64>().map_err(|_| format!("cannot parse number '{s}'"));
        match words.as_slice() {
            ["zero"] => Ok(WeightProfile::Zero),
            ["constant", c] => Ok(WeightProfile::Constant(n(c)?)),
            ["indicator", c] => Ok(WeightProfile::Indicator(n(c)?)),
            ["bump", a] => Ok(WeightProfile::Bump(n(a)?)),
            ["sine", a, k, s] => Ok(WeightProfile::Sine {
                amplitude: n(a)?,
                frequency: n(k)?,
                shift: n(s)?,
            }),
            _ => Err(format!("bad weight profile '{text}'")),
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>, omega0: &[f64]) -> GridFunction {
        let len = grid.extents()[0];
        let dim = grid.dim();
        let inside = |x: f64, y: f64| {
            let c = [x, y];
            (0..dim).all(|a| c[a] >= omega0[2 * a] && c[a] <= omega0[2 * a + 1])
        };
        match *self {
            WeightProfile::Zero => GridFunction::zeros(grid),
            WeightProfile::Constant(c) => GridFunction::constant(grid, c),
            WeightProfile::Indicator(c) => GridFunction::from_fn(grid, |x, y| if inside(x, y) { c } else { 0.0 }),
            WeightProfile::Bump(amp) => GridFunction::from_fn(grid, |x, y| {
                let sx = (PI * x / len).sin().powi(2);
                if dim == 1 {
                    amp * sx
                } else {
                    amp * sx * (PI * y / grid.extents()[1]).sin().powi(2)
                }
            }),
            WeightProfile::Sine {
                amplitude,
                frequency,
                shift,
            } => GridFunction::from_fn(grid, |x, _| amplitude * (2.0 * PI * frequency * x / len).sin() + shift),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            WeightProfile::Zero => true,
            WeightProfile::Constant(c) | WeightProfile::Indicator(c) | WeightProfile::Bump(c) => c == 0.0,
            WeightProfile::Sine { amplitude, shift, .. } => amplitude == 0.0 && shift == 0.0,
        }
    }

    /// Sufficient test for `≥ 0` everywhere.
    pub fn is_nonnegative(&self) -> bool {
        match *self {
            WeightProfile::Zero => true,
            WeightProfile::Constant(c) | WeightProfile::Indicator(c) | WeightProfile::Bump(c) => c >= 0.0,
            WeightProfile::Sine { amplitude, shift, .. } => shift >= amplitude.abs(),
        }
    }

    /// Sufficient test for `> 0` on an `Ω₀` kept away from `∂Ω`.
    pub fn is_positive_on_omega0(&self) -> bool {
        match *self {
            WeightProfile::Zero => false,
            WeightProfile::Constant(c) | WeightProfile::Indicator(c) | WeightProfile::Bump(c) => c > 0.0,
            WeightProfile::Sine { amplitude, shift, .. } => shift > amplitude.abs(),
        }
    }
}

impl fmt::Display for WeightProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightProfile::Zero => f.write_str("zero"),
            WeightProfile::Constant(c) => write!(f, "constant {c:?}"),
            WeightProfile::Indicator(c) => write!(f, "indicator {c:?}"),
            WeightProfile::Bump(a) => write!(f, "bump {a:?}"),
            WeightProfile::Sine {
                amplitude,
                frequency,
                shift,
            } => write!(f, "sine {amplitude:?} {frequency:?} {shift:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use triharm_core::build_grid;

    #[test]
    fn parse_display_round_trip() {
        for text in ["zero", "constant 1.0", "indicator 2.5", "bump 0.1", "sine 1.0 2.0 0.3"] {
            let p = WeightProfile::parse(text).unwrap();
            assert_eq!(p.to_string(), text);
        }
        assert_eq!(ExponentProfile::parse("2").unwrap(), ExponentProfile::Constant(2.0));
        assert_eq!(
            ExponentProfile::parse("affine 2 0.1").unwrap().to_string(),
            "affine 2.0 0.1"
        );
        assert!(WeightProfile::parse("gauss 1").is_err());
        assert!(ExponentProfile::parse("affine 2").is_err());
    }

    #[test]
    fn sampled_profiles() {
        let g = build_grid(1, &[1.0], 9).unwrap();
        let om = [0.25, 0.75];
        let ind = WeightProfile::Indicator(1.0).sample(&g, &om);
        assert_eq!(ind.values(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let bump = WeightProfile::Bump(0.1).sample(&g, &om);
        assert!((bump.values()[4] - 0.1).abs() < 1e-15 && bump.values()[0] == 0.0);
        let s = WeightProfile::Sine {
            amplitude: 1.0,
            frequency: 1.0,
            shift: 0.3,
        };
        let v = s.sample(&g, &om);
        assert!(v.values().iter().any(|x| *x < 0.0) && v.values().iter().any(|x| *x > 0.0));
        assert!(!s.is_nonnegative());
        let e = ExponentProfile::Affine { base: 2.0, slope: 0.2 }.sample(&g);
        assert_eq!((e[0], e[8]), (2.0, 2.2));
    }
}
