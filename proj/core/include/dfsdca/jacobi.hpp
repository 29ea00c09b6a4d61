#pragma once

#include <vector>

#include "dfsdca/dense.hpp"

namespace dfsdca {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Intended for n <= 64; throws when the matrix is not square.
std::vector<double> symmetric_eigenvalues(DenseMatrix a, double tol = 1e-14,
                                          int max_sweeps = 100);

double min_eigenvalue(const DenseMatrix& a);
double max_eigenvalue(const DenseMatrix& a);

}  // namespace dfsdca
