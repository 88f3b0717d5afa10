#include "tdg/vec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tdg {

namespace {

void require_same_length(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": length mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
}

}  // namespace

double dot(const Vec& a, const Vec& b) {
  require_same_length(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec normalized(const Vec& a) {
  const double n = norm(a);
  if (!(n > kNormEpsilon)) {
    throw DegenerateInputError("normalize: vector norm " + std::to_string(n) +
                               " below threshold");
  }
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = a[i] / n;
  }
  return out;
}

double cosine(const Vec& a, const Vec& b) {
  require_same_length(a, b, "cosine");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) {
    throw DegenerateInputError("cosine: zero-vector input");
  }
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

Vec cosine_grad_wrt_first(const Vec& a, const Vec& b) {
  require_same_length(a, b, "cosine_grad");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) {
    throw DegenerateInputError("cosine_grad: zero-vector input");
  }
  const double c = dot(a, b) / (na * nb);
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = (b[i] / nb - c * a[i] / na) / na;
  }
  return out;
}

bool all_finite(const Vec& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Vec& a, const char* what) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) {
      throw NumericError(std::string(what) + ": non-finite value " +
                         std::to_string(a[i]) + " at index " +
                         std::to_string(i));
    }
  }
}

void axpy(double alpha, const Vec& x, Vec& y) {
  require_same_length(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] += alpha * x[i];
  }
}

void scale_in_place(Vec& a, double s) {
  for (double& v : a) v *= s;
}

Vec scaled(const Vec& a, double s) {
  Vec out(a);
  scale_in_place(out, s);
  return out;
}

Vec add(const Vec& a, const Vec& b) {
  require_same_length(a, b, "add");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vec sub(const Vec& a, const Vec& b) {
  require_same_length(a, b, "sub");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vec matvec(const Mat& m, const Vec& x) {
  if (x.size() != m.cols) {
    throw DimensionError("matvec: expected length " + std::to_string(m.cols) +
                         ", got " + std::to_string(x.size()));
  }
  Vec out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      s += r[j] * x[j];
    }
    out[i] = s;
  }
  return out;
}

Vec matvec_transposed(const Mat& m, const Vec& u) {
  if (u.size() != m.rows) {
    throw DimensionError("matvec_transposed: expected length " +
                         std::to_string(m.rows) + ", got " +
                         std::to_string(u.size()));
  }
  Vec out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      out[j] += r[j] * u[i];
    }
  }
  return out;
}

void add_outer(Mat& m, const Vec& u, const Vec& x, double alpha) {
  if (u.size() != m.rows || x.size() != m.cols) {
    throw DimensionError("add_outer: shape mismatch");
  }
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    const double ui = alpha * u[i];
    for (std::size_t j = 0; j < m.cols; ++j) {
      r[j] += ui * x[j];
    }
  }
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) {
    throw DimensionError("matmul: inner dimensions differ");
  }
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t l = 0; l < a.cols; ++l) {
      const double ail = a.at(i, l);
      if (ail == 0.0) continue;
      const double* br = b.row(l);
      double* orow = out.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) {
        orow[j] += ail * br[j];
      }
    }
  }
  return out;
}

Mat solve_spd(Mat gram, Mat rhs) {
  if (gram.rows != gram.cols || gram.rows != rhs.rows) {
    throw DimensionError("solve_spd: shape mismatch");
  }
  const std::size_t n = gram.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = gram.at(i, j);
      for (std::size_t l = 0; l < j; ++l) {
        sum -= gram.at(i, l) * gram.at(j, l);
      }
      if (i == j) {
        if (!(sum > 0.0)) {
          throw NumericError("solve_spd: matrix not positive definite");
        }
        gram.at(i, i) = std::sqrt(sum);
      } else {
        gram.at(i, j) = sum / gram.at(j, j);
      }
    }
  }
  for (std::size_t col = 0; col < rhs.cols; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = rhs.at(i, col);
      for (std::size_t l = 0; l < i; ++l) {
        sum -= gram.at(i, l) * rhs.at(l, col);
      }
      rhs.at(i, col) = sum / gram.at(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double sum = rhs.at(ii, col);
      for (std::size_t l = ii + 1; l < n; ++l) {
        sum -= gram.at(l, ii) * rhs.at(l, col);
      }
      rhs.at(ii, col) = sum / gram.at(ii, ii);
    }
  }
  return rhs;
}

Vec central_difference_gradient(const std::function<double(const Vec&)>& f,
                                const Vec& x, double h) {
  if (!(h > 0.0)) {
    throw ConfigError("central_difference_gradient: h must be positive");
  }
  Vec grad(x.size(), 0.0);
  Vec probe(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("central_difference_gradient: non-finite f at component " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace tdg
