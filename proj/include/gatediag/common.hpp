#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gatediag {

inline constexpr const char* kVersion = "gatediag 0.1.0";

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy. The CLI maps config/contract/domain violations to exit
// code 2 and everything else (training divergence, estimation failures,
// I/O trouble) to exit code 1.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct contract_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct estimation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct training_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gatediag
