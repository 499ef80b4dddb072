//! Adaptive Dormand–Prince 5(4) integrator for the planar radial ODEs used by
//! the shooting methods.

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// The target radius was reached.
    Reached,
    /// The event predicate fired after an accepted step.
    Event,
    StepUnderflow,
    TooManySteps,
    NonFinite,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-13, h_min: 1e-14, max_steps: 2_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error coefficients (5th order minus embedded 4th order)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator state carried across successive `advance_to` calls.
pub struct Dopri<F: Fn(f64, &State) -> State> {
    f: F,
    tol: Tolerances,
    pub r: f64,
    pub y: State,
    h: f64,
    steps: usize,
}

#[inline]
fn comb(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

impl<F: Fn(f64, &State) -> State> Dopri<F> {
    pub fn new(f: F, r0: f64, y0: State, h0: f64, tol: Tolerances) -> Self {
        Self { f, tol, r: r0, y: y0, h: h0, steps: 0 }
    }

    /// Integrates to `r_target`, stopping early if `event(r, y)` becomes true.
    pub fn advance_to(&mut self, r_target: f64, event: impl Fn(f64, &State) -> bool) -> Stop {
        while self.r < r_target {
            if self.steps >= self.tol.max_steps {
                return Stop::TooManySteps;
            }
            let h = self.h.min(r_target - self.r);
            let last = h >= r_target - self.r;
            let (r, y) = (self.r, self.y);
            let f = &self.f;
            let k1 = f(r, &y);
            let k2 = f(r + C2 * h, &comb(&y, h, &[(A21, &k1)]));
            let k3 = f(r + C3 * h, &comb(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(r + C4 * h, &comb(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(r + C5 * h, &comb(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(r + h, &comb(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y5 = comb(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(r + h, &y5);
            let mut err = 0.0_f64;
            for c in 0..2 {
                let e = h * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c]);
                let sc = self.tol.atol + self.tol.rtol * y[c].abs().max(y5[c].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() || !y5[0].is_finite() || !y5[1].is_finite() {
                if h <= self.tol.h_min {
                    return Stop::NonFinite;
                }
                self.h = h * 0.1;
                continue;
            }
            if err <= 1.0 {
                self.steps += 1;
                self.r = if last { r_target } else { r + h };
                self.y = y5;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || grow < 1.0 {
                    self.h = h * grow;
                }
                if event(self.r, &self.y) {
                    return Stop::Event;
                }
            } else {
                let shrink = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                self.h = h * shrink;
                if self.h < self.tol.h_min {
                    return Stop::StepUnderflow;
                }
            }
        }
        Stop::Reached
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let mut ode = Dopri::new(|_r, y: &State| [y[1], -y[0]], 0.0, [0.0, 1.0], 0.01, Tolerances::default());
        let stop = ode.advance_to(10.0, |_, _| false);
        assert_eq!(stop, Stop::Reached);
        assert!((ode.y[0] - 10f64.sin()).abs() < 1e-9);
        assert!((ode.y[1] - 10f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn event_stops_blowup() {
        // y' = y², y(0) = 1 blows up at r = 1.
        let mut ode = Dopri::new(|_r, y: &State| [y[0] * y[0], 0.0], 0.0, [1.0, 0.0], 0.01, Tolerances::default());
        let stop = ode.advance_to(2.0, |_, y| y[0].abs() > 1e6);
        assert_eq!(stop, Stop::Event);
        assert!(ode.r < 1.0 && ode.r > 0.999);
    }
}
