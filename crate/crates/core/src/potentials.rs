//! Radial potentials `V(r)`: the explicit two-bubble potential built from the
//! Aubin–Talenti profile, Gaussian and square wells, tabulated data, and the
//! coupling family `α·V`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RadialField};

/// Minimum number of nodes required inside `r < 1/λ` for the inner bubble.
pub const MIN_BUBBLE_NODES: usize = 8;

/// `W(r) = (1 + r²/3)^{-1/2}`.
#[inline]
pub fn w_profile(r: f64) -> f64 {
    1.0 / (1.0 + r * r / 3.0).sqrt()
}

/// `W_λ(r) = λ^{1/2} W(λr)`.
#[inline]
pub fn w_rescaled(r: f64, lambda: f64) -> f64 {
    lambda.sqrt() * w_profile(lambda * r)
}

/// Aubin–Talenti profile sampled on the grid.
pub fn aubin_talenti(grid: Grid) -> RadialField {
    RadialField::from_fn(grid, w_profile)
}

/// `λ^{1/2}·f(λr)` for an analytically known profile `f`.
pub fn rescale_profile(grid: Grid, profile: impl Fn(f64) -> f64, lambda: f64) -> Result<RadialField> {
    check_scale(lambda)?;
    Ok(RadialField::from_fn(grid, |r| lambda.sqrt() * profile(lambda * r)))
}

/// `λ^{1/2}·u(λr)` for a sampled field (linear interpolation, harmonic tail
/// beyond `r_max`).
pub fn rescale_field(field: &RadialField, lambda: f64) -> Result<RadialField> {
    check_scale(lambda)?;
    Ok(RadialField::from_fn(*field.grid(), |r| lambda.sqrt() * field.value_at(lambda * r)))
}

fn check_scale(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {lambda}")));
    }
    Ok(())
}

/// JSON description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `2W⁴(r) + 2λ²W⁴(λr)`.
    Composite { lambda: f64 },
    /// `A·exp(-r²/σ²)`.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    /// `c` on `r < a`, zero outside.
    SquareWell {
        depth: f64,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    /// Linear interpolation of tabulated values, zero beyond the last radius.
    Table { r: Vec<f64>, v: Vec<f64>, beta: f64 },
    Zero,
}

const DEFAULT_BETA: f64 = 4.0;

impl PotentialSpec {
    fn beta(&self) -> f64 {
        match self {
            PotentialSpec::Composite { .. } | PotentialSpec::Zero => DEFAULT_BETA,
            PotentialSpec::Gaussian { beta, .. } | PotentialSpec::SquareWell { beta, .. } => {
                beta.unwrap_or(DEFAULT_BETA)
            }
            PotentialSpec::Table { beta, .. } => *beta,
        }
    }

    fn validate(&self) -> Result<()> {
        let beta = self.beta();
        if !(beta.is_finite() && beta > 2.0) {
            return Err(Error::Domain(format!("decay exponent must exceed 2, got {beta}")));
        }
        match self {
            PotentialSpec::Composite { lambda } if !(lambda.is_finite() && *lambda >= 1.0) => {
                Err(Error::Domain(format!("composite potential needs lambda >= 1, got {lambda}")))
            }
            PotentialSpec::Gaussian { amplitude, width, .. } if !(amplitude.is_finite() && width.is_finite() && *width > 0.0) => {
                Err(Error::Domain("gaussian needs finite amplitude and positive width".into()))
            }
            PotentialSpec::SquareWell { depth, radius, .. } if !(depth.is_finite() && radius.is_finite() && *radius > 0.0) => {
                Err(Error::Domain("square well needs finite depth and positive radius".into()))
            }
            PotentialSpec::Table { r, v, .. } => {
                if r.len() != v.len() || r.len() < 2 {
                    return Err(Error::Domain("table needs matching r and v arrays of length >= 2".into()));
                }
                if r.windows(2).any(|p| !(p[1] > p[0])) || r[0] < 0.0 {
                    return Err(Error::Domain("table radii must be nonnegative and strictly increasing".into()));
                }
                if v.iter().chain(r.iter()).any(|x| !x.is_finite()) {
                    return Err(Error::Domain("table contains non-finite entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Pointwise value at an arbitrary radius.
    fn eval(&self, r: f64) -> f64 {
        match self {
            PotentialSpec::Composite { lambda } => {
                let w = w_profile(r);
                let wl = w_profile(lambda * r);
                2.0 * w.powi(4) + 2.0 * lambda * lambda * wl.powi(4)
            }
            PotentialSpec::Gaussian { amplitude, width, .. } => amplitude * (-(r * r) / (width * width)).exp(),
            PotentialSpec::SquareWell { depth, radius, .. } => {
                if r < *radius {
                    *depth
                } else {
                    0.0
                }
            }
            PotentialSpec::Table { r: rs, v, .. } => {
                let last = rs.len() - 1;
                if r > rs[last] {
                    return 0.0;
                }
                if r <= rs[0] {
                    return v[0];
                }
                let j = rs.partition_point(|&x| x <= r).min(last) - 1;
                let t = (r - rs[j]) / (rs[j + 1] - rs[j]);
                v[j] * (1.0 - t) + v[j + 1] * t
            }
            PotentialSpec::Zero => 0.0,
        }
    }

    /// Value used at grid node `r`; a jump that lands on a node takes the
    /// mean of its one-sided limits.
    fn sample(&self, r: f64, dr: f64) -> f64 {
        match self {
            PotentialSpec::SquareWell { depth, radius, .. } if (r - radius).abs() < 1e-9 * dr => 0.5 * depth,
            _ => self.eval(r),
        }
    }
}

/// A sampled radial potential together with its analytic description.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    spec: PotentialSpec,
    coupling: f64,
    values: RadialField,
    beta: f64,
    y_norm: f64,
    under_resolved: bool,
}

impl Potential {
    pub fn from_spec(grid: Grid, spec: &PotentialSpec) -> Result<Self> {
        spec.validate()?;
        let values = RadialField::from_fn(grid, |r| spec.sample(r, grid.dr()));
        let beta = spec.beta();
        let under_resolved = match spec {
            PotentialSpec::Composite { lambda } => bubble_nodes(&grid, *lambda) < MIN_BUBBLE_NODES,
            _ => false,
        };
        if under_resolved {
            log::warn!("inner bubble under-resolved: fewer than {MIN_BUBBLE_NODES} nodes inside r < 1/lambda");
        }
        let y_norm = y_norm(&values, beta);
        Ok(Self { spec: spec.clone(), coupling: 1.0, values, beta, y_norm, under_resolved })
    }

    pub fn zero(grid: Grid) -> Self {
        Self::from_spec(grid, &PotentialSpec::Zero).expect("zero potential is valid")
    }

    pub fn gaussian(grid: Grid, amplitude: f64, width: f64) -> Result<Self> {
        Self::from_spec(grid, &PotentialSpec::Gaussian { amplitude, width, beta: None })
    }

    pub fn square_well(grid: Grid, depth: f64, radius: f64) -> Result<Self> {
        Self::from_spec(grid, &PotentialSpec::SquareWell { depth, radius, beta: None })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// The factor `α` of the coupling family `α·V`.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn values(&self) -> &RadialField {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `sup_i (1 + r_i)^β |V(r_i)|`.
    pub fn y_norm(&self) -> f64 {
        self.y_norm
    }

    pub fn under_resolved(&self) -> bool {
        self.under_resolved
    }

    /// `V(r)` off the grid (used by the shooting integrators).
    pub fn eval(&self, r: f64) -> f64 {
        self.coupling * self.spec.eval(r)
    }
}

fn bubble_nodes(grid: &Grid, lambda: f64) -> usize {
    ((1.0 / lambda) / grid.dr()).ceil() as usize
}

fn y_norm(values: &RadialField, beta: f64) -> f64 {
    let g = values.grid();
    values
        .values()
        .iter()
        .enumerate()
        .fold(0.0_f64, |m, (i, v)| m.max((1.0 + g.r(i)).powf(beta) * v.abs()))
}

/// `V = 2W⁴ + 2λ²W⁴(λ·)`: each bubble `W`, `W_λ` solves its own half of the
/// potential, and their difference is the seed of a sign-changing state.
pub fn composite_potential(grid: Grid, lambda: f64) -> Result<Potential> {
    Potential::from_spec(grid, &PotentialSpec::Composite { lambda })
}

/// `α·V`.
pub fn scaled_family(v: &Potential, alpha: f64) -> Result<Potential> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Domain(format!("coupling must be nonnegative, got {alpha}")));
    }
    Ok(Potential {
        spec: v.spec.clone(),
        coupling: v.coupling * alpha,
        values: v.values.scaled(alpha),
        beta: v.beta,
        y_norm: alpha * v.y_norm,
        under_resolved: v.under_resolved,
    })
}
