#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace coseg {

using Index = Eigen::Index;
using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using VecX = Eigen::VectorXd;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using MatX3i = Eigen::Matrix<int, Eigen::Dynamic, 3>;
using MatX2i = Eigen::Matrix<int, Eigen::Dynamic, 2>;

/// Error taxonomy; the numeric values double as CLI exit codes.
enum class ErrorKind : int {
  io = 1,
  argument = 2,
  degenerate_input = 3,
  numerical = 4,
  contract = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace coseg
