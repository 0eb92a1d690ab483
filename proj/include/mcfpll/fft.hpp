#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "mcfpll/core.hpp"

namespace mcfpll {

namespace detail {
// The FFTW planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Real-to-complex forward transform of a fixed length (any n >= 1).
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n), in_(n), out_(n / 2 + 1) {
    if (n == 0) throw Error(ErrorKind::parameter, "RealFft: length must be > 0");
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.data(),
                                 reinterpret_cast<fftw_complex*>(out_.data()), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }

  /// Returns bins 0..n/2 of the DFT of `x` (size n).
  std::span<const std::complex<double>> forward(std::span<const double> x) {
    if (x.size() != n_) throw Error(ErrorKind::parameter, "RealFft: input length mismatch");
    std::copy(x.begin(), x.end(), in_.begin());
    fftw_execute(plan_);
    return out_;
  }

 private:
  std::size_t n_;
  std::vector<double> in_;
  std::vector<std::complex<double>> out_;
  fftw_plan plan_{};
};

}  // namespace mcfpll
