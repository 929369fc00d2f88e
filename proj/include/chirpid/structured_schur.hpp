// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <fftw3.h>

#include <Eigen/Dense>

#include "chirpid/lift_types.hpp"

namespace chirpid {

namespace detail {

/// In-place 4-D complex FFT plans shared by all kernels of one shape. Plan
/// creation is serialised; execution through fftw_execute_dft is reentrant.
class Fft4Plans {
 public:
  static const Fft4Plans& get(int p1, int p2) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<Fft4Plans>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{p1, p2}];
    if (!slot) slot.reset(new Fft4Plans(p1, p2));
    return *slot;
  }

  ~Fft4Plans() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  Fft4Plans(const Fft4Plans&) = delete;
  Fft4Plans& operator=(const Fft4Plans&) = delete;

  void forward(fftw_complex* data) const { fftw_execute_dft(forward_, data, data); }
  void backward(fftw_complex* data) const { fftw_execute_dft(backward_, data, data); }

 private:
  Fft4Plans(int p1, int p2) {
    const int dims[4] = {p1, p2, p1, p2};
    const std::size_t total = static_cast<std::size_t>(p1) * p2 * p1 * p2;
    auto* scratch = fftw_alloc_complex(total);
    forward_ = fftw_plan_dft(4, dims, scratch, scratch, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft(4, dims, scratch, scratch, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(scratch);
  }

  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

struct FftwDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

inline FftwBuffer fftw_buffer(std::size_t n) { return FftwBuffer(fftw_alloc_complex(n)); }

}  // namespace detail

/// Schur complement of the certificate block in real form, computed from
/// 4-D FFT cross-correlations instead of per-row products.
///
/// Every unknown's coefficient matrix is a 2 x 2 arrangement of one pattern:
/// a 2-level Toeplitz shift (lag unknowns) or a 2-level Hankel indicator
/// (grid unknowns). For patterns E, E' and blocks X, Z of the scaling
/// matrix, tr(E X E' Z) is a correlation of X with Z^T evaluated at the
/// patterns' offsets, so all entries of one family pair come out of a single
/// inverse FFT.
class StructuredSchur {
 public:
  StructuredSchur(const LiftDimensions& dims, int num_lag_vars, const std::vector<int>& lag_re,
                  const std::vector<int>& lag_im, const Eigen::MatrixXi& grid_re, const Eigen::MatrixXi& grid_im,
                  int num_vars)
      : dims_(dims), p1_(2 * dims.m1), p2_(2 * dims.m2), num_vars_(num_vars) {
    slot_size_ = static_cast<std::size_t>(p1_) * p2_;
    total_ = slot_size_ * slot_size_;
    vars_.resize(static_cast<std::size_t>(num_vars));
    const int m2 = dims.m2;
    for (int d1 = 0; d1 < dims.m1; ++d1) {
      for (int d2 = -(m2 - 1); d2 < m2; ++d2) {
        const auto s = static_cast<std::size_t>(d1 * (2 * m2 - 1) + d2 + m2 - 1);
        const bool zero = d1 == 0 && d2 == 0;
        if (lag_re[s] >= 0) {
          auto& v = vars_[static_cast<std::size_t>(lag_re[s])];
          v.family = kLagRe;
          v.first.push_back({offset(-d1, -d2), 1.0});
          v.second.push_back({offset(d1, d2), 1.0});
          if (!zero) {
            v.first.push_back({offset(d1, d2), 1.0});
            v.second.push_back({offset(-d1, -d2), 1.0});
          }
        }
        if (lag_im[s] >= 0) {
          auto& v = vars_[static_cast<std::size_t>(lag_im[s])];
          v.family = kLagIm;
          v.first = {{offset(-d1, -d2), 1.0}, {offset(d1, d2), -1.0}};
          v.second = {{offset(d1, d2), 1.0}, {offset(-d1, -d2), -1.0}};
        }
      }
    }
    for (int a = 0; a < dims.n1; ++a) {
      for (int b = 0; b < dims.n2; ++b) {
        for (auto [idx, fam] : {std::pair{grid_re(a, b), kGridRe}, std::pair{grid_im(a, b), kGridIm}}) {
          if (idx < 0) continue;
          auto& v = vars_[static_cast<std::size_t>(idx)];
          v.family = fam;
          v.first = {{offset(a, b), 1.0}};
          v.second = {{offset(a, b), 1.0}};
        }
      }
    }
    (void)num_lag_vars;
  }

  /// Unscaled contribution of the certificate block, M_ij = <B_i, W B_j W>.
  Eigen::MatrixXd compute(const Eigen::MatrixXd& w) const {
    const auto& plans = detail::Fft4Plans::get(p1_, p2_);
    const int nc = dims_.block_side();
    // Spectra of the four scaling blocks W^{ab}.
    std::array<detail::FftwBuffer, 4> spec;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        auto buf = detail::fftw_buffer(total_);
        std::fill_n(reinterpret_cast<double*>(buf.get()), 2 * total_, 0.0);
        for (int r = 0; r < nc; ++r) {
          const std::size_t rbase = slot_index(r) * slot_size_;
          for (int c = 0; c < nc; ++c) buf[rbase + slot_index(c)][0] = w(a * nc + r, b * nc + c);
        }
        plans.forward(buf.get());
        spec[static_cast<std::size_t>(2 * a + b)] = std::move(buf);
      }
    }
    // Negated frequency index per slot, for flipped (Hankel) patterns.
    std::vector<std::size_t> neg(slot_size_);
    for (int k1 = 0; k1 < p1_; ++k1)
      for (int k2 = 0; k2 < p2_; ++k2)
        neg[static_cast<std::size_t>(k1 * p2_ + k2)] =
            static_cast<std::size_t>(((p1_ - k1) % p1_) * p2_ + (p2_ - k2) % p2_);

    const double inv_total = 1.0 / static_cast<double>(total_);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num_vars_, num_vars_);
    auto work = detail::fftw_buffer(total_);
    for (int fi = 0; fi < 4; ++fi) {
      for (int fj = fi; fj < 4; ++fj) {
        const bool flip1 = is_hankel(fi);
        const bool flip2 = is_hankel(fj);
        std::fill_n(reinterpret_cast<double*>(work.get()), 2 * total_, 0.0);
        for (const auto& bi : kBlocks[fi]) {
          for (const auto& bj : kBlocks[fj]) {
            // X = W^{beta gamma}, correlated against Z^T = W^{alpha delta}.
            const auto& u = spec[static_cast<std::size_t>(2 * bi.col + bj.row)];
            const auto& v = spec[static_cast<std::size_t>(2 * bi.row + bj.col)];
            const double coef = bi.coef * bj.coef;
            for (std::size_t s1 = 0; s1 < slot_size_; ++s1) {
              const std::size_t t1 = flip1 ? neg[s1] : s1;
              for (std::size_t s2 = 0; s2 < slot_size_; ++s2) {
                const std::size_t t2 = flip2 ? neg[s2] : s2;
                const std::size_t k = s1 * slot_size_ + s2;
                const std::size_t kv = t1 * slot_size_ + t2;
                const double ur = u[k][0], ui = u[k][1];
                const double vr = v[kv][0], vi = -v[kv][1];
                work[k][0] += coef * (ur * vr - ui * vi);
                work[k][1] += coef * (ur * vi + ui * vr);
              }
            }
          }
        }
        plans.backward(work.get());
        for (int i = 0; i < num_vars_; ++i) {
          const auto& vi = vars_[static_cast<std::size_t>(i)];
          if (vi.family != fi) continue;
          for (int j = 0; j < num_vars_; ++j) {
            const auto& vj = vars_[static_cast<std::size_t>(j)];
            if (vj.family != fj || (fi == fj && j < i)) continue;
            double acc = 0.0;
            for (const auto& a : vi.first)
              for (const auto& b : vj.second) acc += a.weight * b.weight * work[a.index * slot_size_ + b.index][0];
            acc *= inv_total;
            out(i, j) = acc;
            out(j, i) = acc;
          }
        }
      }
    }
    return out;
  }

 private:
  enum Family { kLagRe = 0, kLagIm = 1, kGridRe = 2, kGridIm = 3 };
  struct Tap {
    std::size_t index;
    double weight;
  };
  struct Var {
    int family = -1;
    std::vector<Tap> first;
    std::vector<Tap> second;
  };
  struct BlockCoef {
    int row;
    int col;
    double coef;
  };
  // Placement of each family's pattern in the 2 x 2 real form:
  //   Re lag  [[K, 0], [0, K]]      Im lag  [[0, L], [-L, 0]]
  //   Re grid [[H, 0], [0, -H]]     Im grid [[0, -H], [-H, 0]]
  static constexpr std::array<std::array<BlockCoef, 2>, 4> kBlocks{{
      {{{0, 0, 1.0}, {1, 1, 1.0}}},
      {{{0, 1, 1.0}, {1, 0, -1.0}}},
      {{{0, 0, 1.0}, {1, 1, -1.0}}},
      {{{0, 1, -1.0}, {1, 0, -1.0}}},
  }};

  static bool is_hankel(int family) { return family >= kGridRe; }

  std::size_t offset(int o1, int o2) const {
    const int a = ((o1 % p1_) + p1_) % p1_;
    const int b = ((o2 % p2_) + p2_) % p2_;
    return static_cast<std::size_t>(a * p2_ + b);
  }

  /// Padded slot index of a row of the m1 m2 square block.
  std::size_t slot_index(int r) const {
    const int j = r / dims_.m2;
    const int p = r % dims_.m2;
    return static_cast<std::size_t>(j * p2_ + p);
  }

  LiftDimensions dims_;
  int p1_;
  int p2_;
  int num_vars_;
  std::size_t slot_size_ = 0;
  std::size_t total_ = 0;
  std::vector<Var> vars_;
};

}  // namespace chirpid
