#pragma once

#include <complex>

#include <Eigen/Core>

namespace sps {

// Dimension of the truncated emitter+cavity space.
inline constexpr int kDim = 4;
// Dimension of the vectorized (Liouville) space.
inline constexpr int kSuperDim = kDim * kDim;

template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using Matrix4 = Eigen::Matrix<Complex<Scalar>, kDim, kDim>;

template <typename Scalar>
using SuperMatrix = Eigen::Matrix<Complex<Scalar>, kSuperDim, kSuperDim>;

template <typename Scalar>
using SuperVector = Eigen::Matrix<Complex<Scalar>, kSuperDim, 1>;

using Matrix4cd = Matrix4<double>;
using SuperMatrixd = SuperMatrix<double>;
using SuperVectord = SuperVector<double>;

// Column-stacking vectorization: vec(A rho B) = (B^T kron A) vec(rho).
template <typename Derived>
SuperVector<typename Derived::RealScalar> vec(const Eigen::MatrixBase<Derived>& m)
{
    return m.reshaped();
}

template <typename Derived>
Matrix4<typename Derived::RealScalar> unvec(const Eigen::MatrixBase<Derived>& v)
{
    return v.reshaped(kDim, kDim);
}

// Index of element (row, col) inside vec(.).
constexpr int vec_index(int row, int col) { return row + kDim * col; }

template <typename Scalar>
SuperMatrix<Scalar> kron(const Matrix4<Scalar>& a, const Matrix4<Scalar>& b)
{
    SuperMatrix<Scalar> out;
    for (int i = 0; i < kDim; ++i) {
        for (int j = 0; j < kDim; ++j) {
            out.template block<kDim, kDim>(i * kDim, j * kDim) = a(i, j) * b;
        }
    }
    return out;
}

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived>& m)
{
    using Plain = typename Derived::PlainObject;
    return Plain((m + m.adjoint()) / typename Derived::RealScalar(2));
}

} // namespace sps
