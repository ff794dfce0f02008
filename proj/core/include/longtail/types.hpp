#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace longtail {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Raised for violated preconditions and malformed inputs.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Index of the maximum entry; ties resolve to the lowest index.
inline int argmax(const Eigen::Ref<const Vector>& values)
{
    int best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

} // namespace longtail
