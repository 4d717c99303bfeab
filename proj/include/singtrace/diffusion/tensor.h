#ifndef SINGTRACE_DIFFUSION_TENSOR_H_
#define SINGTRACE_DIFFUSION_TENSOR_H_

#include <Eigen/Dense>

namespace singtrace::diffusion {

// Frame-major activations: one row per frame, one column per channel.
template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixD = Matrix<double>;
using MatrixF = Matrix<float>;

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_TENSOR_H_
