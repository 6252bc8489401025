#pragma once

// Point data on the slit tangent bundle plus small dense tensor containers.
// Dimensions are a compile-time-bounded n <= 4, so everything is fixed-size
// arrays underneath; TensorValue keeps a variance signature so producers can
// state index placement explicitly.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

inline constexpr int kMaxDim = 4;
inline constexpr int kMaxXOrder = 2;
inline constexpr int kMaxYOrder = 6;
inline constexpr int kMaxTotalOrder = 8;

using Vec = std::array<double, kMaxDim>;
using Mat = std::array<Vec, kMaxDim>;

inline constexpr int kMaxRank = 4;

// A base point x with a nonzero tangent y, plus the distance to the domain
// guard's zero set (1.0 when the chart is guard-free).  Accepted samples keep
// margin >= 1e-3.
struct TangentSample {
    int n = 0;
    Vec x{};
    Vec y{};
    double margin = 1.0;
};

enum class Slot : std::int8_t { Upper = 1, Lower = -1 };

class TensorValue {
  public:
    TensorValue() = default;
    TensorValue(int n, std::initializer_list<Slot> variance)
        : TensorValue(n, std::vector<Slot>(variance)) {}
    TensorValue(int n, std::vector<Slot> variance)
        : n_(n), var_(std::move(variance)) {
        std::size_t len = 1;
        for (std::size_t r = 0; r < var_.size(); ++r) len *= n_;
        data_.assign(len, 0.0);
    }

    int dim() const { return n_; }
    int rank() const { return static_cast<int>(var_.size()); }
    Slot variance(int slot) const { return var_[slot]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double& operator()(int i) { return data_[i]; }
    double operator()(int i) const { return data_[i]; }
    double& operator()(int i, int j) { return data_[i * n_ + j]; }
    double operator()(int i, int j) const { return data_[i * n_ + j]; }
    double& operator()(int i, int j, int k) { return data_[(i * n_ + j) * n_ + k]; }
    double operator()(int i, int j, int k) const { return data_[(i * n_ + j) * n_ + k]; }
    double& operator()(int i, int j, int k, int l) {
        return data_[((i * n_ + j) * n_ + k) * n_ + l];
    }
    double operator()(int i, int j, int k, int l) const {
        return data_[((i * n_ + j) * n_ + k) * n_ + l];
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

  private:
    int n_ = 0;
    std::vector<Slot> var_;
    std::vector<double> data_;
};

inline double max_abs_diff(const TensorValue& a, const TensorValue& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// ---------------------------------------------------------------------------
// Dense helpers on n x n blocks of Mat

inline double determinant(int n, const Mat& a) {
    Mat lu = a;
    double det = 1.0;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int r = k + 1; r < n; ++r)
            if (std::abs(lu[r][k]) > std::abs(lu[piv][k])) piv = r;
        if (piv != k) {
            std::swap(lu[piv], lu[k]);
            det = -det;
        }
        if (lu[k][k] == 0.0) return 0.0;
        det *= lu[k][k];
        for (int r = k + 1; r < n; ++r) {
            double f = lu[r][k] / lu[k][k];
            for (int c = k; c < n; ++c) lu[r][c] -= f * lu[k][c];
        }
    }
    return det;
}

inline Mat matrix_inverse(int n, const Mat& a) {
    Mat lu = a;
    Mat inv{};
    for (int i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int r = k + 1; r < n; ++r)
            if (std::abs(lu[r][k]) > std::abs(lu[piv][k])) piv = r;
        if (std::abs(lu[piv][k]) < 1e-300)
            throw DomainError("singular matrix");
        std::swap(lu[piv], lu[k]);
        std::swap(inv[piv], inv[k]);
        double d = 1.0 / lu[k][k];
        for (int c = 0; c < n; ++c) { lu[k][c] *= d; inv[k][c] *= d; }
        for (int r = 0; r < n; ++r) {
            if (r == k) continue;
            double f = lu[r][k];
            if (f == 0.0) continue;
            for (int c = 0; c < n; ++c) {
                lu[r][c] -= f * lu[k][c];
                inv[r][c] -= f * inv[k][c];
            }
        }
    }
    return inv;
}

// Smallest eigenvalue of a symmetric block via cyclic Jacobi rotations.
inline double symmetric_min_eigenvalue(int n, const Mat& a) {
    Mat m = a;
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += m[p][q] * m[p][q];
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(m[p][q]) < 1e-300) continue;
                double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < n; ++k) {
                    double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    double ev = m[0][0];
    for (int i = 1; i < n; ++i) ev = std::min(ev, m[i][i]);
    return ev;
}

inline double dot(int n, const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(int n, const Vec& a) { return std::sqrt(dot(n, a, a)); }

}  // namespace finsler
