#pragma once

// Common numeric types and the error hierarchy shared by every tdscope module.

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdscope {

using cplx = std::complex<double>;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;

/// Dense complex column vector holding one 3-vector per voxel (voxel-major).
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I_unit{0.0, 1.0};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a mathematical operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Evaluation at a singular point of a kernel or special function.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to reach its tolerance.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A configured resource budget (memory, voxel count) would be exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline Mat3 sym_part(const Mat3& m) { return 0.5 * (m + m.transpose()); }

inline double rel_diff(const Eigen::Ref<const Eigen::MatrixXcd>& a,
                       const Eigen::Ref<const Eigen::MatrixXcd>& b) {
  const double nb = b.norm();
  const double d = (a - b).norm();
  return nb > 0.0 ? d / nb : d;
}

}  // namespace detail

}  // namespace tdscope
