#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace pcorr::fft {

using cplx = std::complex<double>;

/// FFTW's planner is not reentrant; every plan creation and destruction
/// goes through this lock. Executing an existing plan is thread-safe.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

enum class Direction { forward = FFTW_FORWARD, inverse = FFTW_BACKWARD };

/// Unnormalized 2-D complex DFT of a fixed size, usable from many threads
/// at once on caller-owned buffers of any alignment.
class Plan2D {
 public:
  Plan2D(int rows, int cols, Direction dir) : rows_(rows), cols_(cols) {
    std::vector<cplx> a(static_cast<std::size_t>(rows) * cols);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_2d(rows, cols, reinterpret_cast<fftw_complex*>(a.data()),
                             reinterpret_cast<fftw_complex*>(a.data()), static_cast<int>(dir),
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan_) throw std::runtime_error("fftw plan creation failed");
  }
  Plan2D(const Plan2D&) = delete;
  Plan2D& operator=(const Plan2D&) = delete;
  ~Plan2D() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// The plan is in-place; distinct buffers are handled by copying first.
  void execute(const cplx* in, cplx* out) const {
    if (in != out) std::copy(in, in + static_cast<std::size_t>(rows_) * cols_, out);
    fftw_execute_dft(plan_, reinterpret_cast<fftw_complex*>(out), reinterpret_cast<fftw_complex*>(out));
  }

 private:
  int rows_, cols_;
  fftw_plan plan_ = nullptr;
};

/// One-shot unnormalized transform.
inline std::vector<cplx> dft2(std::vector<cplx> data, int rows, int cols, Direction dir) {
  Plan2D plan(rows, cols, dir);
  plan.execute(data.data(), data.data());
  return data;
}

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
inline int smooth_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace pcorr::fft
