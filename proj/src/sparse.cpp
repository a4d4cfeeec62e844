#include "nops/sparse.hpp"

#include <string>

namespace nops {

CgResult solve_cg(const CsrMatrix<double>& A, const std::vector<double>& b, double tol,
                  int max_iter) {
    const int n = A.n;
    if (static_cast<int>(b.size()) != n) throw dimension_error("solve_cg: rhs size mismatch");
    if (tol <= 0.0) throw argument_error("solve_cg: tolerance must be positive");

    CgResult res;
    res.x.assign(static_cast<std::size_t>(n), 0.0);

    double bnorm2 = 0.0;
    for (double v : b) bnorm2 += v * v;
    if (bnorm2 == 0.0) return res;  // x = 0 solves exactly

    std::vector<double> r = b;  // r = b - A*0
    std::vector<double> p = r;
    std::vector<double> ap(static_cast<std::size_t>(n));
    double rr = bnorm2;
    const double stop2 = tol * tol * bnorm2;

    for (int it = 0; it < max_iter; ++it) {
        A.mul(p.data(), ap.data());
        double pap = 0.0;
        for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0.0)
            throw numeric_error("solve_cg: matrix is not positive definite (p'Ap = " +
                                std::to_string(pap) + ")");
        const double alpha = rr / pap;
        for (int i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        double rr_new = 0.0;
        for (int i = 0; i < n; ++i) rr_new += r[i] * r[i];
        res.iterations = it + 1;
        if (rr_new <= stop2) {
            res.relative_residual = A.relative_residual(res.x, b);
            if (res.relative_residual <= tol) return res;
            // recurrence drifted from the true residual; keep iterating
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (int i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    const double final_res = A.relative_residual(res.x, b);
    throw numeric_error("solve_cg: no convergence after " + std::to_string(max_iter) +
                        " iterations, relative residual " + std::to_string(final_res));
}

template <class T>
BandedLU<T>::BandedLU(const CsrMatrix<T>& A) {
    n_ = A.n;
    for (int r = 0; r < n_; ++r)
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) {
            kl_ = std::max(kl_, r - A.col[k]);
            ku_ = std::max(ku_, A.col[k] - r);
        }
    // kl extra rows on top hold pivoting fill (effective upper bandwidth ku+kl).
    rows_ = 2 * kl_ + ku_ + 1;
    ab_.assign(static_cast<std::size_t>(rows_) * n_, T{});
    ipiv_.assign(static_cast<std::size_t>(n_), 0);

    for (int r = 0; r < n_; ++r)
        for (int k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) at(r, A.col[k]) = A.val[k];

    const int kuw = ku_ + kl_;  // working upper bandwidth
    for (int j = 0; j < n_; ++j) {
        const int last = std::min(j + kl_, n_ - 1);
        int piv = j;
        double best = std::abs(at(j, j));
        for (int i = j + 1; i <= last; ++i) {
            const double m = std::abs(at(i, j));
            if (m > best) {
                best = m;
                piv = i;
            }
        }
        ipiv_[j] = piv;
        if (best == 0.0)
            throw numeric_error("BandedLU: singular pivot at column " + std::to_string(j));
        if (piv != j) {
            const int cend = std::min(j + kuw, n_ - 1);
            for (int c = j; c <= cend; ++c) std::swap(at(j, c), at(piv, c));
        }
        const T pivot = at(j, j);
        for (int i = j + 1; i <= last; ++i) {
            const T m = at(i, j) / pivot;
            at(i, j) = m;
            if (m == T{}) continue;
            const int cend = std::min(j + kuw, n_ - 1);
            for (int c = j + 1; c <= cend; ++c) at(i, c) -= m * at(j, c);
        }
    }
}

template <class T>
std::vector<T> BandedLU<T>::solve(const std::vector<T>& b) const {
    if (static_cast<int>(b.size()) != n_) throw dimension_error("BandedLU::solve: rhs size mismatch");
    std::vector<T> x = b;
    const int kuw = ku_ + kl_;
    for (int j = 0; j < n_; ++j) {
        if (ipiv_[j] != j) std::swap(x[j], x[ipiv_[j]]);
        const int last = std::min(j + kl_, n_ - 1);
        for (int i = j + 1; i <= last; ++i) x[i] -= at(i, j) * x[j];
    }
    for (int j = n_ - 1; j >= 0; --j) {
        const int cend = std::min(j + kuw, n_ - 1);
        T acc = x[j];
        for (int c = j + 1; c <= cend; ++c) acc -= at(j, c) * x[c];
        x[j] = acc / at(j, j);
    }
    return x;
}

template class BandedLU<double>;
template class BandedLU<std::complex<double>>;

}  // namespace nops
