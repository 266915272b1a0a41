#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string_view>

#include "lqgent/errors.hpp"

namespace lqgent {

using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Mat42 = Eigen::Matrix<double, 4, 2>;
using Mat24 = Eigen::Matrix<double, 2, 4>;

/// Normal-mode label: common (+) and differential (-) motion.
enum class Mode { Plus = 0, Minus = 1 };

constexpr int mode_offset(Mode s) { return s == Mode::Plus ? 0 : 2; }

/// Phase-space ordering of a 4x4 covariance.
///   NormalMode: (x+, p+, x-, p-)
///   BareMode:   (x1, p1, x2, p2)
enum class Basis { NormalMode, BareMode };

constexpr std::string_view to_string(Basis b) {
  return b == Basis::NormalMode ? "normal" : "bare";
}

/// Standard symplectic form for two modes, J = diag(j, j), j = ((0, 1), (-1, 0)).
inline Mat4 symplectic_form() {
  Mat4 j = Mat4::Zero();
  j(0, 1) = 1.0;
  j(1, 0) = -1.0;
  j(2, 3) = 1.0;
  j(3, 2) = -1.0;
  return j;
}

/// Per-mode 2x2 covariance entries (xx, xp, pp).
struct ModeCov {
  double xx = 0.0;
  double xp = 0.0;
  double pp = 0.0;

  Mat2 matrix() const {
    Mat2 m;
    m << xx, xp, xp, pp;
    return m;
  }
  double det() const { return xx * pp - xp * xp; }
};

/// Real symmetric 4x4 covariance carrying its basis tag.
/// Construction symmetrizes the input.
class CovMatrix {
 public:
  CovMatrix() = default;
  CovMatrix(const Mat4& m, Basis basis) : m_(0.5 * (m + m.transpose())), basis_(basis) {
    if (!m_.allFinite()) throw DomainError("covariance contains non-finite entries");
  }

  const Mat4& matrix() const { return m_; }
  Basis basis() const { return basis_; }
  double operator()(int i, int j) const { return m_(i, j); }

  Mat2 block(Mode s) const {
    const int o = mode_offset(s);
    return m_.block<2, 2>(o, o);
  }
  ModeCov mode(Mode s) const {
    const int o = mode_offset(s);
    return {m_(o, o), m_(o, o + 1), m_(o + 1, o + 1)};
  }
  /// Upper-right 2x2 block, correlations between the two modes of the basis.
  Mat2 cross_block() const { return m_.block<2, 2>(0, 2); }

  bool block_diagonal(double rel_tol = 1e-12) const {
    return cross_block().norm() <= rel_tol * std::max(m_.norm(), 1.0);
  }

 private:
  Mat4 m_ = Mat4::Zero();
  Basis basis_ = Basis::NormalMode;
};

inline CovMatrix block_diag(const Mat2& plus, const Mat2& minus, Basis basis = Basis::NormalMode) {
  Mat4 m = Mat4::Zero();
  m.block<2, 2>(0, 0) = plus;
  m.block<2, 2>(2, 2) = minus;
  return CovMatrix(m, basis);
}

inline Mat4 symmetrize(const Mat4& m) { return 0.5 * (m + m.transpose()); }

}  // namespace lqgent
