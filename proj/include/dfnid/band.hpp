// Compact-storage LU factorization for banded systems with partial pivoting,
// after the classic bandec/banbks scheme. The DFN Newton matrices are ~300
// unknowns with bandwidths ~15, so this is the whole linear-algebra cost of
// a simulation.
#pragma once

#include <cmath>
#include <vector>

namespace dfnid {

class BandedLu {
 public:
  BandedLu(int n, int kl, int ku)
      : n_(n), kl_(kl), ku_(ku), mm_(kl + ku + 1),
        a_(static_cast<std::size_t>(n) * mm_, 0.0),
        al_(static_cast<std::size_t>(n) * (kl > 0 ? kl : 1), 0.0), idx_(n, 0) {}

  int size() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }

  void zero() {
    std::fill(a_.begin(), a_.end(), 0.0);
    factored_ = false;
  }

  // Assembly access in diagonal-aligned storage; (row, col) must lie inside
  // the band. Only valid before factor().
  double& entry(int row, int col) {
    return a_[static_cast<std::size_t>(row) * mm_ + (col - row + kl_)];
  }

  bool in_band(int row, int col) const {
    const int k = col - row + kl_;
    return k >= 0 && k < mm_ && col >= 0 && col < n_;
  }

  // In-place factorization; returns false on a (near-)zero pivot.
  bool factor() {
    const int n = n_, kl = kl_, mm = mm_;
    // Left-justify the first kl rows.
    for (int i = 0; i < kl; ++i) {
      double* row = &a_[static_cast<std::size_t>(i) * mm];
      const int shift = kl - i;
      for (int k = shift; k < mm; ++k) row[k - shift] = row[k];
      for (int k = mm - shift; k < mm; ++k) row[k] = 0.0;
    }
    int l = kl;
    for (int k = 0; k < n; ++k) {
      double* rowk = &a_[static_cast<std::size_t>(k) * mm];
      if (l < n) ++l;
      int piv = k;
      double dum = std::fabs(rowk[0]);
      for (int j = k + 1; j < l; ++j) {
        const double v = std::fabs(a_[static_cast<std::size_t>(j) * mm]);
        if (v > dum) {
          dum = v;
          piv = j;
        }
      }
      idx_[k] = piv;
      if (dum < 1e-300) return false;
      if (piv != k) {
        double* rowp = &a_[static_cast<std::size_t>(piv) * mm];
        for (int j = 0; j < mm; ++j) std::swap(rowk[j], rowp[j]);
      }
      for (int i = k + 1; i < l; ++i) {
        double* rowi = &a_[static_cast<std::size_t>(i) * mm];
        const double m = rowi[0] / rowk[0];
        al_[static_cast<std::size_t>(k) * kl_ + (i - k - 1)] = m;
        for (int j = 1; j < mm; ++j) rowi[j - 1] = rowi[j] - m * rowk[j];
        rowi[mm - 1] = 0.0;
      }
    }
    factored_ = true;
    return true;
  }

  // Solves A x = b in place; requires a prior successful factor().
  void solve(double* b) const {
    const int n = n_, kl = kl_, mm = mm_;
    int l = kl;
    for (int k = 0; k < n; ++k) {
      const int i = idx_[k];
      if (i != k) std::swap(b[k], b[i]);
      if (l < n) ++l;
      for (int j = k + 1; j < l; ++j)
        b[j] -= al_[static_cast<std::size_t>(k) * kl_ + (j - k - 1)] * b[k];
    }
    l = 1;
    for (int i = n - 1; i >= 0; --i) {
      const double* rowi = &a_[static_cast<std::size_t>(i) * mm];
      double x = b[i];
      for (int k = 1; k < l; ++k) x -= rowi[k] * b[i + k];
      b[i] = x / rowi[0];
      if (l < mm) ++l;
    }
  }

  bool factored() const { return factored_; }

 private:
  int n_, kl_, ku_, mm_;
  std::vector<double> a_;
  std::vector<double> al_;
  std::vector<int> idx_;
  bool factored_ = false;
};

}  // namespace dfnid
