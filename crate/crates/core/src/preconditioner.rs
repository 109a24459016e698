//! The sparsifying preconditioner: gather `α_iᵀ r_τ` at every point, then
//! solve the factored sparse system.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::multifrontal::{factorize, SparseFactorization};
use crate::sparse::{assemble, sparsify, SparseSystem};
use crate::stencil::StencilLibrary;

/// `z = solve(f, sparsify(r))`.
pub fn precondition(
    f: &SparseFactorization,
    lib: &StencilLibrary,
    r: &VectorField,
) -> Result<VectorField> {
    if f.grid() != lib.grid() || r.grid() != lib.grid() {
        return Err(Error::DimensionMismatch(
            "factorization, library and residual are on different grids".into(),
        ));
    }
    let mut z = sparsify(lib, r.values())?;
    f.solve_in_place(&mut z)?;
    VectorField::from_values(*r.grid(), z)
}

/// Assembled, factored preconditioner for one medium.
#[derive(Debug)]
pub struct SparsifyingPreconditioner {
    library: StencilLibrary,
    system: SparseSystem,
    factors: SparseFactorization,
}

impl SparsifyingPreconditioner {
    pub fn new(library: StencilLibrary, m: &ScalarField, p: &[ScalarField]) -> Result<Self> {
        let system = assemble(&library, m, p).map_err(|e| e.at("assemble"))?;
        let factors = factorize(&system).map_err(|e| e.at("factorize"))?;
        Ok(Self {
            library,
            system,
            factors,
        })
    }

    pub fn library(&self) -> &StencilLibrary {
        &self.library
    }

    pub fn system(&self) -> &SparseSystem {
        &self.system
    }

    pub fn factors(&self) -> &SparseFactorization {
        &self.factors
    }

    /// Apply to a flat vector in flatten order.
    pub fn apply_into(&self, r: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let z = sparsify(&self.library, r)?;
        out.copy_from_slice(&z);
        self.factors.solve_in_place(out)
    }

    pub fn apply(&self, r: &VectorField) -> Result<VectorField> {
        precondition(&self.factors, &self.library, r)
    }
}
