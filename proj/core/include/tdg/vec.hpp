#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tdg/error.hpp"

namespace tdg {

// All math is double precision; vectors in the shared text/image space are
// plain Vec with the dimension carried by context.
using Vec = std::vector<double>;

// Zero-vector threshold for normalization and cosine.
inline constexpr double kNormEpsilon = 1e-12;

// Dense row-major matrix. Everything here is desk-scale (dims < 100), so
// naive loops are fine and keep reductions bit-reproducible.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  Vec row_vec(std::size_t i) const {
    return Vec(data.begin() + static_cast<std::ptrdiff_t>(i * cols),
               data.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
  }

  bool operator==(const Mat& other) const = default;
};

double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);

// a / ||a||; throws DegenerateInputError when ||a|| <= kNormEpsilon.
Vec normalized(const Vec& a);

// (a.b)/(||a|| ||b||), clamped to [-1, 1]. Throws on zero vectors and on
// mismatched lengths.
double cosine(const Vec& a, const Vec& b);

// Gradient of cosine(a, b) with respect to a: (b_hat - cos * a_hat) / ||a||.
Vec cosine_grad_wrt_first(const Vec& a, const Vec& b);

bool all_finite(const Vec& a);
void require_finite(const Vec& a, const char* what);

void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha * x
void scale_in_place(Vec& a, double s);
Vec scaled(const Vec& a, double s);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);

Vec matvec(const Mat& m, const Vec& x);
Vec matvec_transposed(const Mat& m, const Vec& u);  // m^T u
void add_outer(Mat& m, const Vec& u, const Vec& x, double alpha);  // m += alpha * u x^T
Mat matmul(const Mat& a, const Mat& b);

// Solves gram * X = rhs for symmetric positive definite gram via Cholesky;
// throws NumericError when the factorization breaks down.
Mat solve_spd(Mat gram, Mat rhs);

// Central-difference gradient oracle: component i is
// (f(x + h e_i) - f(x - h e_i)) / (2h). Used by every module's gradient
// tests; throws NumericError when f returns a non-finite value.
Vec central_difference_gradient(const std::function<double(const Vec&)>& f,
                                const Vec& x, double h);

}  // namespace tdg
