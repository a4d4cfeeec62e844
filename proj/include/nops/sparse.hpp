#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <tuple>
#include <vector>

#include "nops/errors.hpp"

namespace nops {

inline double abs_sq(double v) { return v * v; }
inline double abs_sq(const std::complex<double>& v) { return std::norm(v); }

/// Square sparse matrix in compressed-row storage. Column indices are sorted
/// within each row and duplicates are merged at construction.
template <class T>
struct CsrMatrix {
    int n = 0;
    std::vector<int> row_ptr;  // size n+1
    std::vector<int> col;
    std::vector<T> val;

    static CsrMatrix from_triplets(int n, std::vector<std::tuple<int, int, T>> triplets) {
        if (n <= 0) throw argument_error("CsrMatrix: dimension must be positive");
        for (const auto& [r, c, v] : triplets)
            if (r < 0 || r >= n || c < 0 || c >= n)
                throw dimension_error("CsrMatrix: triplet index out of range");
        std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
        });
        CsrMatrix m;
        m.n = n;
        m.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
        for (std::size_t i = 0; i < triplets.size(); ++i) {
            const auto& [r, c, v] = triplets[i];
            const bool same_slot = i > 0 && std::get<0>(triplets[i - 1]) == r &&
                                   std::get<1>(triplets[i - 1]) == c;
            if (same_slot) {
                m.val.back() += v;
            } else {
                m.col.push_back(c);
                m.val.push_back(v);
                ++m.row_ptr[static_cast<std::size_t>(r) + 1];
            }
        }
        for (int r = 0; r < n; ++r) m.row_ptr[static_cast<std::size_t>(r) + 1] += m.row_ptr[r];
        return m;
    }

    std::size_t nnz() const { return val.size(); }

    void mul(const T* x, T* y) const {
        for (int r = 0; r < n; ++r) {
            T acc{};
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += val[k] * x[col[k]];
            y[r] = acc;
        }
    }

    std::vector<T> mul(const std::vector<T>& x) const {
        std::vector<T> y(static_cast<std::size_t>(n));
        mul(x.data(), y.data());
        return y;
    }

    /// ||Ax - b|| / ||b||; returns 0 for b = 0 with x = 0.
    double relative_residual(const std::vector<T>& x, const std::vector<T>& b) const {
        double rn = 0.0, bn = 0.0;
        std::vector<T> ax = mul(x);
        for (int i = 0; i < n; ++i) {
            rn += abs_sq(ax[i] - b[i]);
            bn += abs_sq(b[i]);
        }
        if (bn == 0.0) return rn == 0.0 ? 0.0 : std::sqrt(rn);
        return std::sqrt(rn / bn);
    }
};

struct CgResult {
    std::vector<double> x;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Conjugate gradients for SPD systems. Converges when the recurrence
/// residual satisfies ||r||/||b|| <= tol and the recomputed true residual
/// confirms it; throws a numeric error carrying the residual on stagnation.
CgResult solve_cg(const CsrMatrix<double>& A, const std::vector<double>& b, double tol,
                  int max_iter);

/// Banded LU with partial pivoting (LAPACK-style band storage). T is double
/// or std::complex<double>.
template <class T>
class BandedLU {
  public:
    explicit BandedLU(const CsrMatrix<T>& A);

    std::vector<T> solve(const std::vector<T>& b) const;

    int lower_bandwidth() const { return kl_; }
    int upper_bandwidth() const { return ku_; }

  private:
    int n_ = 0, kl_ = 0, ku_ = 0, rows_ = 0;
    std::vector<T> ab_;       // rows_ x n, fill-extended band
    std::vector<int> ipiv_;

    T& at(int i, int j) { return ab_[static_cast<std::size_t>(ku_ + kl_ + i - j) * n_ + j]; }
    const T& at(int i, int j) const {
        return ab_[static_cast<std::size_t>(ku_ + kl_ + i - j) * n_ + j];
    }
};

extern template class BandedLU<double>;
extern template class BandedLU<std::complex<double>>;

}  // namespace nops
