// SPDX-License-Identifier: Apache-2.0

use crate::error::ConicError;
use crate::linalg::{self, CMat, RMat};

/// Hermitian input tolerance for [`embed_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Real symmetric embedding `[[Re M, -Im M], [Im M, Re M]]` of a Hermitian
/// matrix. Every eigenvalue of `M` appears twice in the result.
pub fn embed_hermitian(m: &CMat) -> Result<RMat, ConicError> {
    if m.nrows() != m.ncols() {
        return Err(ConicError::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if !linalg::all_finite(m) {
        return Err(ConicError::NonFinite("matrix to embed".into()));
    }
    let defect = linalg::hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(ConicError::NotHermitian(format!("defect {defect:e}")));
    }
    let n = m.nrows();
    Ok(RMat::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    }))
}
