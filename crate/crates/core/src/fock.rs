//! Truncated number-basis states and ladder operators.
//!
//! Every matrix here is the top-left `d x d` block of its infinite
//! counterpart. In particular the raising operators send `|d-1>` to zero,
//! so the superoperator layer is responsible for detecting population that
//! would be pushed past the edge.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance for probability sums, traces and Hermiticity.
pub const PROB_TOL: f64 = 1e-10;
/// Negative roundoff below this magnitude is clamped to zero.
pub const NEG_CLAMP: f64 = 1e-12;
/// Smallest eigenvalue accepted for a density matrix.
pub const PSD_TOL: f64 = 1e-9;

/// Number of retained basis states `|0>, ..., |d-1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockDimension(usize);

impl FockDimension {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Largest representable photon number, `d - 1`.
    pub fn max_photons(self) -> usize {
        self.0 - 1
    }
}

impl TryFrom<usize> for FockDimension {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Self::new(d)
    }
}

impl From<FockDimension> for usize {
    fn from(d: FockDimension) -> usize {
        d.0
    }
}

/// Photon-number distribution `p(n)` of a state diagonal in the number basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonDistribution {
    p: Vec<f64>,
}

impl PhotonDistribution {
    /// Validates `p` as a probability vector.
    ///
    /// Entries in `[-1e-12, 0)` are treated as roundoff: they are clamped to
    /// zero and the vector is renormalized. Anything more negative, or a sum
    /// further than `1e-10` from one, is rejected.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        FockDimension::new(p.len())?;
        let mut p = p;
        let mut clamped = false;
        for (n, x) in p.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidDistribution(format!("p({n}) is not finite")));
            }
            if *x < 0.0 {
                if *x < -NEG_CLAMP {
                    return Err(Error::InvalidDistribution(format!("p({n}) = {x:e} is negative")));
                }
                *x = 0.0;
                clamped = true;
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
        }
        if clamped {
            p.iter_mut().for_each(|x| *x /= total);
        }
        Ok(Self { p })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        FockDimension::new(weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < -NEG_CLAMP) {
            return Err(Error::InvalidDistribution("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights have zero total".into()));
        }
        Ok(Self {
            p: weights.into_iter().map(|w| w.max(0.0) / total).collect(),
        })
    }

    /// The number state `|n>`.
    pub fn fock(n: usize, dim: FockDimension) -> Result<Self> {
        if n >= dim.get() {
            return Err(Error::OutOfRange(format!("Fock state |{n}> does not fit in dimension {}", dim.get())));
        }
        let mut p = vec![0.0; dim.get()];
        p[n] = 1.0;
        Ok(Self { p })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    pub fn dim(&self) -> FockDimension {
        FockDimension(self.p.len())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn get(&self, n: usize) -> f64 {
        self.p.get(n).copied().unwrap_or(0.0)
    }

    pub fn vacuum_probability(&self) -> f64 {
        self.p[0]
    }

    /// `sum_n n p(n)`.
    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(n, x)| n as f64 * x).sum()
    }

    /// Probability mass on photon numbers `>= n`.
    pub fn mass_at_least(&self, n: usize) -> f64 {
        self.p.iter().skip(n).sum()
    }

    /// Largest absolute entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &PhotonDistribution) -> f64 {
        let len = self.len().max(other.len());
        (0..len)
            .map(|n| (self.get(n) - other.get(n)).abs())
            .fold(0.0, f64::max)
    }
}

/// A density operator on the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        let state = Self::from_reduced(rho)?;
        state.check_positive()?;
        Ok(state)
    }

    /// Builds a state whose positivity is guaranteed by construction (the
    /// output of a Kraus-form map); only Hermiticity and trace are checked.
    pub(crate) fn from_reduced(rho: DMatrix<C64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is {}x{}, not square",
                rho.nrows(),
                rho.ncols()
            )));
        }
        FockDimension::new(rho.nrows())?;
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        let state = Self { rho };
        let asym = state.hermiticity_defect();
        if asym > PROB_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (defect {asym:e})")));
        }
        let tr = state.trace();
        if (tr - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}, not 1")));
        }
        Ok(state)
    }

    pub fn from_distribution(p: &PhotonDistribution) -> Self {
        let diag = DVector::from_iterator(p.len(), p.probabilities().iter().map(|&x| C64::new(x, 0.0)));
        Self {
            rho: DMatrix::from_diagonal(&diag),
        }
    }

    /// `|psi><psi|` for the normalized amplitude vector `amplitudes`.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        FockDimension::new(amplitudes.len())?;
        let psi = DVector::from_column_slice(amplitudes);
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        let psi = psi / C64::new(norm, 0.0);
        Self::from_reduced(&psi * psi.adjoint())
    }

    pub fn fock(n: usize, dim: FockDimension) -> Result<Self> {
        Ok(Self::from_distribution(&PhotonDistribution::fock(n, dim)?))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn dim(&self) -> FockDimension {
        FockDimension(self.rho.nrows())
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    /// Real parts of the diagonal.
    pub fn populations(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re).collect()
    }

    /// Largest `|rho[m][n]|` with `m != n`.
    pub fn max_off_diagonal(&self) -> f64 {
        let d = self.rho.nrows();
        let mut worst = 0.0f64;
        for m in 0..d {
            for n in 0..d {
                if m != n {
                    worst = worst.max(self.rho[(m, n)].norm());
                }
            }
        }
        worst
    }

    /// Extracts `p(n)`, failing with `NotDiagonal` if any coherence exceeds `tol`.
    pub fn diagonal_part(&self, tol: f64) -> Result<PhotonDistribution> {
        let worst = self.max_off_diagonal();
        if worst > tol {
            return Err(Error::NotDiagonal { max_off_diagonal: worst });
        }
        PhotonDistribution::new(self.populations())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.rho.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Re-runs every invariant check, including the eigenvalue bound.
    pub fn check(&self) -> Result<()> {
        Self::from_reduced(self.rho.clone())?;
        self.check_positive()
    }

    fn check_positive(&self) -> Result<()> {
        let smallest = self.eigenvalues()[0];
        if smallest < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {smallest:e}")));
        }
        Ok(())
    }

    fn hermiticity_defect(&self) -> f64 {
        let d = self.rho.nrows();
        let mut worst = 0.0f64;
        for m in 0..d {
            for n in m..d {
                worst = worst.max((self.rho[(m, n)] - self.rho[(n, m)].conj()).norm());
            }
        }
        worst
    }

    /// Real part of `Tr(rho A)`.
    pub fn expectation(&self, op: &FockOperator) -> Result<f64> {
        Ok(self.trace_with(op)?.re)
    }

    /// `Tr(rho A)` for an arbitrary (possibly non-Hermitian) operator.
    pub fn trace_with(&self, op: &FockOperator) -> Result<C64> {
        expect_dim(self.dim(), op.dim())?;
        let d = self.rho.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..d {
            for k in 0..d {
                acc += self.rho[(m, k)] * op.m[(k, m)];
            }
        }
        Ok(acc)
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.rho.shape() != other.rho.shape() {
            return f64::INFINITY;
        }
        self.rho
            .iter()
            .zip(other.rho.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn expect_dim(expected: FockDimension, found: FockDimension) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            expected: expected.get(),
            found: found.get(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    /// Bare raising operator `sum |n+1><n|`.
    RaiseSG,
    /// Bare lowering operator `sum |n><n+1|`.
    LowerSG,
    Annihilate,
    Create,
    Number,
    Custom,
}

/// Matrix of a single-mode operator on the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    m: DMatrix<C64>,
    kind: OperatorKind,
}

impl FockOperator {
    /// Builds one of the named ladder or number operators.
    ///
    /// `Custom` yields the identity.
    pub fn make(kind: OperatorKind, dim: FockDimension) -> Self {
        let d = dim.get();
        let one = C64::new(1.0, 0.0);
        let mut m = DMatrix::<C64>::zeros(d, d);
        match kind {
            OperatorKind::RaiseSG => (0..d - 1).for_each(|n| m[(n + 1, n)] = one),
            OperatorKind::LowerSG => (0..d - 1).for_each(|n| m[(n, n + 1)] = one),
            OperatorKind::Annihilate => (1..d).for_each(|n| m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0)),
            OperatorKind::Create => (1..d).for_each(|n| m[(n, n - 1)] = C64::new((n as f64).sqrt(), 0.0)),
            OperatorKind::Number => (0..d).for_each(|n| m[(n, n)] = C64::new(n as f64, 0.0)),
            OperatorKind::Custom => m.fill_with_identity(),
        }
        Self { m, kind }
    }

    pub fn identity(dim: FockDimension) -> Self {
        Self::make(OperatorKind::Custom, dim)
    }

    /// Diagonal operator `f(n)` in the number basis.
    pub fn number_function(dim: FockDimension, f: impl Fn(usize) -> f64) -> Self {
        let d = dim.get();
        let diag = DVector::from_iterator(d, (0..d).map(|n| C64::new(f(n), 0.0)));
        Self {
            m: DMatrix::from_diagonal(&diag),
            kind: OperatorKind::Custom,
        }
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidParameter("operator matrix must be square".into()));
        }
        FockDimension::new(m.nrows())?;
        Ok(Self {
            m,
            kind: OperatorKind::Custom,
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> FockDimension {
        FockDimension(self.m.nrows())
    }

    /// Operator product `self * rhs`.
    pub fn compose(&self, rhs: &FockOperator) -> Result<FockOperator> {
        expect_dim(self.dim(), rhs.dim())?;
        Ok(Self {
            m: &self.m * &rhs.m,
            kind: OperatorKind::Custom,
        })
    }

    pub fn pow(&self, k: u32) -> FockOperator {
        let mut out = Self::identity(self.dim());
        for _ in 0..k {
            out.m = &out.m * &self.m;
        }
        if k == 1 {
            out.kind = self.kind;
        }
        out
    }

    pub fn adjoint(&self) -> FockOperator {
        let kind = match self.kind {
            OperatorKind::RaiseSG => OperatorKind::LowerSG,
            OperatorKind::LowerSG => OperatorKind::RaiseSG,
            OperatorKind::Annihilate => OperatorKind::Create,
            OperatorKind::Create => OperatorKind::Annihilate,
            k => k,
        };
        Self {
            m: self.m.adjoint(),
            kind,
        }
    }

    pub fn apply(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        if v.len() != self.m.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.m.nrows(),
                found: v.len(),
            });
        }
        Ok(&self.m * v)
    }

    /// `A rho B` without normalization.
    pub(crate) fn sandwich(&self, rho: &DMatrix<C64>, right: &FockOperator) -> DMatrix<C64> {
        &self.m * rho * &right.m
    }
}

/// Convenience wrapper around [`FockOperator::make`].
pub fn make_operator(kind: OperatorKind, dim: FockDimension) -> FockOperator {
    FockOperator::make(kind, dim)
}

/// Number-basis vector `|n>`.
pub fn basis_vector(n: usize, dim: FockDimension) -> Result<DVector<C64>> {
    if n >= dim.get() {
        return Err(Error::OutOfRange(format!("|{n}> does not fit in dimension {}", dim.get())));
    }
    let mut v = DVector::zeros(dim.get());
    v[n] = C64::new(1.0, 0.0);
    Ok(v)
}
