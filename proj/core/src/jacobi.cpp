#include "dfsdca/jacobi.hpp"

#include <algorithm>
#include <cmath>

#include "dfsdca/error.hpp"

namespace dfsdca {

std::vector<double> symmetric_eigenvalues(DenseMatrix a, double tol, int max_sweeps) {
  if (a.rows() != a.cols()) throw Error("eigenvalues: matrix is not square");
  const std::size_t n = a.rows();

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * scale || off == 0.0) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle zeroing a(p,q); t is the smaller root of
        // t^2 + 2 t theta - 1 = 0.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double min_eigenvalue(const DenseMatrix& a) {
  const auto e = symmetric_eigenvalues(a);
  return e.empty() ? 0.0 : e.front();
}

double max_eigenvalue(const DenseMatrix& a) {
  const auto e = symmetric_eigenvalues(a);
  return e.empty() ? 0.0 : e.back();
}

}  // namespace dfsdca
