#ifndef EVSCHED_HERMITIAN_HPP
#define EVSCHED_HERMITIAN_HPP

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "evsched/errors.hpp"

namespace evsched {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline bool is_hermitian(const CMatrix& h, double tol = 1e-12) {
    if (h.rows() != h.cols()) {
        return false;
    }
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    return (h - h.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Real symmetric embedding [[Re H, -Im H], [Im H, Re H]].
inline Eigen::MatrixXd hermitian_embed(const CMatrix& h) {
    if (!is_hermitian(h)) {
        throw DomainError("hermitian_embed: input is not Hermitian");
    }
    const auto n = h.rows();
    Eigen::MatrixXd out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = h.real();
    out.topRightCorner(n, n) = -h.imag();
    out.bottomLeftCorner(n, n) = h.imag();
    out.bottomRightCorner(n, n) = h.real();
    return out;
}

struct EigenPair {
    double value = 0.0;
    CVector vector;         // unit norm
    bool degenerate = false;  // top eigenvalue not simple
};

/// Largest eigenvalue of a Hermitian matrix with its unit eigenvector.
inline EigenPair top_eigenpair(const CMatrix& h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    const auto n = h.rows();
    EigenPair out;
    out.value = es.eigenvalues()(n - 1);
    out.vector = es.eigenvectors().col(n - 1);
    out.vector /= out.vector.norm();
    if (n > 1) {
        const double gap = es.eigenvalues()(n - 1) - es.eigenvalues()(n - 2);
        out.degenerate = gap <= 1e-9 * std::max(1.0, std::abs(out.value));
    }
    return out;
}

/// Trace(W) - lambda_max(W); zero iff rank(W) <= 1.
inline double rank_residual(const CMatrix& w, double psd_tol = 1e-8) {
    if (!is_hermitian(w, 1e-9)) {
        throw DomainError("rank_residual: matrix is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(w, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev(0) < -psd_tol) {
        throw DomainError("rank_residual: matrix is not positive semidefinite");
    }
    return std::max(0.0, w.trace().real() - ev(ev.size() - 1));
}

/// Rank-one factor sqrt(lambda_max) * w_max, rotated so entry `ref` is real and >= 0.
inline CVector rank_one_factor(const CMatrix& w, Eigen::Index ref = 0) {
    const auto top = top_eigenpair(w);
    CVector v = std::sqrt(std::max(0.0, top.value)) * top.vector;
    const double mag = std::abs(v(ref));
    if (mag > 0.0) {
        v *= std::conj(v(ref)) / mag;
    }
    return v;
}

} // namespace evsched

#endif
