use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_6};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::CircuitError;

/// Random single-qubit gate family used between two-qubit layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    SqrtX,
    SqrtY,
    SqrtW,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::SqrtX, GateKind::SqrtY, GateKind::SqrtW];

    /// Token used in circuit files.
    pub fn token(self) -> &'static str {
        match self {
            GateKind::SqrtX => "X2",
            GateKind::SqrtY => "Y2",
            GateKind::SqrtW => "W2",
        }
    }

    pub fn matrix(self) -> GateMatrix {
        single_qubit_gate(self)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for GateKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X2" => Ok(GateKind::SqrtX),
            "Y2" => Ok(GateKind::SqrtY),
            "W2" => Ok(GateKind::SqrtW),
            other => Err(CircuitError::UnknownGate(other.to_string())),
        }
    }
}

/// Dense row-major unitary on one or two qubits.
///
/// For two-qubit gates the basis index is `2 * a + b` where `a` is the first
/// qubit of the coupler (the lower id).
#[derive(Clone, Debug, PartialEq)]
pub struct GateMatrix {
    arity: usize,
    entries: Vec<Complex64>,
}

impl GateMatrix {
    pub fn new(arity: usize, entries: Vec<Complex64>) -> Result<Self, CircuitError> {
        if !(1..=2).contains(&arity) || entries.len() != 1 << (2 * arity) {
            return Err(CircuitError::BadMatrixShape {
                arity,
                len: entries.len(),
            });
        }
        Ok(Self { arity, entries })
    }

    pub fn identity(arity: usize) -> GateMatrix {
        let d = 1usize << arity;
        let entries = (0..d * d)
            .map(|i| Complex64::new(if i % (d + 1) == 0 { 1.0 } else { 0.0 }, 0.0))
            .collect();
        GateMatrix { arity, entries }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn adjoint(&self) -> GateMatrix {
        let d = self.dim();
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.get(r, c).conj();
            }
        }
        GateMatrix {
            arity: self.arity,
            entries,
        }
    }

    pub fn mul(&self, other: &GateMatrix) -> GateMatrix {
        assert_eq!(self.arity, other.arity);
        let d = self.dim();
        let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.get(r, k);
                for c in 0..d {
                    entries[r * d + c] += a * other.get(k, c);
                }
            }
        }
        GateMatrix {
            arity: self.arity,
            entries,
        }
    }

    /// Largest entrywise deviation of `U U^dagger` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.mul(&self.adjoint());
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let expect = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod.get(r, c) - Complex64::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }
}

pub fn single_qubit_gate(kind: GateKind) -> GateMatrix {
    let s = FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re * s, im * s);
    let entries = match kind {
        GateKind::SqrtX => vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(1.0, 0.0)],
        GateKind::SqrtY => vec![c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
        GateKind::SqrtW => vec![c(1.0, 0.0), c(-s, -s), c(s, -s), c(1.0, 0.0)],
    };
    GateMatrix { arity: 1, entries }
}

/// Five-parameter fSim gate angles (radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FsimParams {
    pub theta: f64,
    pub phi: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub delta_minus_off: f64,
}

impl FsimParams {
    pub fn new(
        theta: f64,
        phi: f64,
        delta_plus: f64,
        delta_minus: f64,
        delta_minus_off: f64,
    ) -> Self {
        Self {
            theta,
            phi,
            delta_plus,
            delta_minus,
            delta_minus_off,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.theta,
            self.phi,
            self.delta_plus,
            self.delta_minus,
            self.delta_minus_off,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn matrix(&self) -> GateMatrix {
        fsim(self)
    }
}

impl Default for FsimParams {
    /// Nominal Sycamore-style gate: theta = pi/2, phi = pi/6, no phase offsets.
    fn default() -> Self {
        Self::new(FRAC_PI_2, FRAC_PI_6, 0.0, 0.0, 0.0)
    }
}

/// fSim matrix. The second middle diagonal entry carries `e^{i(d+ - d-)}`,
/// which keeps the gate unitary for any `d-`.
pub fn fsim(p: &FsimParams) -> GateMatrix {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let phase = |angle: f64| Complex64::from_polar(1.0, angle);
    let minus_i = Complex64::new(0.0, -1.0);
    let (sin, cos) = p.theta.sin_cos();
    let d_p = p.delta_plus;
    let e11 = phase(d_p + p.delta_minus) * cos;
    let e12 = minus_i * phase(d_p - p.delta_minus_off) * sin;
    let e21 = minus_i * phase(d_p + p.delta_minus_off) * sin;
    let e22 = phase(d_p - p.delta_minus) * cos;
    let e33 = phase(2.0 * d_p - p.phi);
    let entries = vec![
        one, zero, zero, zero, //
        zero, e11, e12, zero, //
        zero, e21, e22, zero, //
        zero, zero, zero, e33,
    ];
    GateMatrix { arity: 2, entries }
}
