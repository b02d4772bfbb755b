#include "pwdesk/fft.hpp"
#include "pwdesk/error.hpp"

#include <fftw3.h>
#include <mutex>

namespace pwdesk {

namespace {
// FFTW planning is not thread safe; execution with new-array is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
} // namespace

Fft3d::Fft3d(std::array<int, 3> dims) : dims_(dims) {
  for (int d : dims_)
    if (d < 1) throw InputError("FFT dims must be positive");
  std::lock_guard<std::mutex> lock(planner_mutex());
  std::vector<std::complex<double>> scratch(size());
  auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
  plan_fw_ = fftw_plan_dft_3d(dims_[0], dims_[1], dims_[2], p, p,
                              FFTW_FORWARD, FFTW_ESTIMATE);
  plan_bw_ = fftw_plan_dft_3d(dims_[0], dims_[1], dims_[2], p, p,
                              FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft3d::~Fft3d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fw_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_bw_));
}

std::size_t Fft3d::size() const {
  return std::size_t(dims_[0]) * dims_[1] * dims_[2];
}

void Fft3d::backward(std::vector<std::complex<double>>& data) const {
  if (data.size() != size()) throw InputError("FFT buffer size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_bw_), p, p);
}

void Fft3d::forward(std::vector<std::complex<double>>& data) const {
  if (data.size() != size()) throw InputError("FFT buffer size mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_fw_), p, p);
  const double scale = 1.0 / double(size());
  for (auto& v : data) v *= scale;
}

int fft_friendly_size(int n) {
  if (n < 1) n = 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int f : {2, 3, 5})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

} // namespace pwdesk
