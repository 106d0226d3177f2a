#pragma once

#include <Eigen/Dense>

namespace mz {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Eigen::Index;

}  // namespace mz
