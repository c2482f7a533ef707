//! Complex-argument evaluation of ψ and ψ', used by the numeric transform
//! inversion. The closed forms extend analytically off the real axis; the
//! contours used downstream stay in the upper half plane, away from the
//! branch cuts of ln and the principal power.

use num_complex::Complex64;

use crate::mechanism::{BranchingMechanism, LevyMeasure};

impl BranchingMechanism<f64> {
    /// ψ(z) for complex z (analytic continuation of the closed forms).
    pub fn eval_psi_complex(&self, z: Complex64) -> Complex64 {
        self.base_psi_complex(z + self.complex_shift()) - self.base_at_shift_f64()
    }

    /// ψ'(z) for complex z.
    pub fn eval_dpsi_complex(&self, z: Complex64) -> Complex64 {
        self.base_dpsi_complex(z + self.complex_shift())
    }

    fn complex_shift(&self) -> Complex64 {
        Complex64::new(self.accumulated_shift(), 0.0)
    }

    fn base_at_shift_f64(&self) -> Complex64 {
        self.base_psi_complex(self.complex_shift())
    }

    fn base_psi_complex(&self, w: Complex64) -> Complex64 {
        let at = Complex64::new(self.base_alpha_tilde(), 0.0);
        let beta = self.beta();
        let lin = at * w + beta * w * w;
        let jump = match self.pi() {
            LevyMeasure::Zero => Complex64::new(0.0, 0.0),
            LevyMeasure::Stable { c, alpha } => {
                let drift = self.stable_compensation_drift();
                c * w.powf(*alpha) - w * drift
            }
            LevyMeasure::ExpDensity => {
                // Stable form x[(1−2/e) − 1/(1+x)], as in the real evaluator.
                let two_over_e = 2.0 * (-1.0f64).exp();
                w * (Complex64::new(1.0 - two_over_e, 0.0)
                    - (Complex64::new(1.0, 0.0) + w).inv())
            }
            LevyMeasure::InverseSquareExp { rate } => {
                let (e1, _) = self.inverse_square_consts();
                let s = w + rate;
                let sls = if s.norm() == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    s * (Complex64::new(1.0, 0.0) + w / rate).ln()
                };
                sls - w - w * e1
            }
            LevyMeasure::Atoms(atoms) => atoms.iter().fold(
                Complex64::new(0.0, 0.0),
                |acc, &(l, m)| {
                    let comp = if l <= 1.0 { w * l } else { Complex64::new(0.0, 0.0) };
                    acc + m * ((-w * l).exp() - 1.0 + comp)
                },
            ),
            LevyMeasure::Tabulated(pts) => tabulated_complex(pts, w, false),
        };
        lin + jump
    }

    fn base_dpsi_complex(&self, w: Complex64) -> Complex64 {
        let at = Complex64::new(self.base_alpha_tilde(), 0.0);
        let beta = self.beta();
        let lin = at + 2.0 * beta * w;
        let jump = match self.pi() {
            LevyMeasure::Zero => Complex64::new(0.0, 0.0),
            LevyMeasure::Stable { c, alpha } => {
                let drift = self.stable_compensation_drift();
                c * alpha * w.powf(alpha - 1.0) - drift
            }
            LevyMeasure::ExpDensity => {
                let two_over_e = 2.0 * (-1.0f64).exp();
                let d = Complex64::new(1.0, 0.0) + w;
                Complex64::new(1.0 - two_over_e, 0.0) - (d * d).inv()
            }
            LevyMeasure::InverseSquareExp { rate } => {
                let (e1, _) = self.inverse_square_consts();
                (Complex64::new(1.0, 0.0) + w / rate).ln() - e1
            }
            LevyMeasure::Atoms(atoms) => atoms.iter().fold(
                Complex64::new(0.0, 0.0),
                |acc, &(l, m)| {
                    let comp = if l <= 1.0 { l } else { 0.0 };
                    acc + m * (comp - l * (-w * l).exp())
                },
            ),
            LevyMeasure::Tabulated(pts) => tabulated_complex(pts, w, true),
        };
        lin + jump
    }
}

/// Composite Simpson over the tabulated support for the complex jump
/// integrand (or its derivative).
fn tabulated_complex(pts: &[(f64, f64)], w: Complex64, deriv: bool) -> Complex64 {
    let lo = pts[0].0;
    let hi = pts.last().unwrap().0;
    let n = 4096usize;
    let h = (hi - lo) / n as f64;
    let f = |l: f64| -> Complex64 {
        let dens = crate::mechanism::tabulated_density(pts, l);
        if deriv {
            let comp = if l <= 1.0 { l } else { 0.0 };
            dens * (Complex64::new(comp, 0.0) - l * (-w * l).exp())
        } else {
            let comp = if l <= 1.0 { w * l } else { Complex64::new(0.0, 0.0) };
            dens * ((-w * l).exp() - 1.0 + comp)
        }
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * f(lo + h * i as f64);
    }
    acc * h / 3.0
}
