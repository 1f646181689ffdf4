#pragma once

// Thin RAII wrapper over FFTW's 2D complex transform. Planning uses
// FFTW_ESTIMATE so results do not depend on timing measurements, and plan
// creation is serialized because the FFTW planner is not thread safe.

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace spdclab::fft {

enum class Direction { forward, backward };

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Unnormalized in-place 2D DFT of a row-major rows x cols array:
//   forward:  X[m,n] = sum_{k,l} x[k,l] exp(-2 pi i (km/rows + ln/cols))
//   backward: same with +i.
inline void transform_2d(std::span<std::complex<double>> data, std::size_t rows,
                         std::size_t cols, Direction dir) {
  if (data.size() != rows * cols) throw std::invalid_argument("fft: size mismatch");
  if (data.empty()) return;
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), ptr, ptr,
                            dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }
  if (!plan) throw std::runtime_error("fft: planner failed");
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace spdclab::fft
