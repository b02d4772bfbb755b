#ifndef PWDESK_FFT_HPP
#define PWDESK_FFT_HPP

#include <array>
#include <complex>
#include <vector>

namespace pwdesk {

/// 3D complex FFT on a dims[0] x dims[1] x dims[2] grid, x-major layout
/// (index = (ix*n1 + iy)*n2 + iz). Conventions:
///   backward: f(r) = sum_G c(G) exp(+i G.r)      (no scaling)
///   forward:  c(G) = (1/N) sum_r f(r) exp(-i G.r)
/// Reentrant: transforms never mutate shared state after construction.
class Fft3d {
 public:
  explicit Fft3d(std::array<int, 3> dims);
  ~Fft3d();
  Fft3d(const Fft3d&) = delete;
  Fft3d& operator=(const Fft3d&) = delete;

  std::array<int, 3> dims() const { return dims_; }
  std::size_t size() const;

  void backward(std::vector<std::complex<double>>& data) const; // G -> r
  void forward(std::vector<std::complex<double>>& data) const;  // r -> G

 private:
  std::array<int, 3> dims_;
  void* plan_fw_ = nullptr;
  void* plan_bw_ = nullptr;
};

/// Smallest 2,3,5-smooth integer >= n.
int fft_friendly_size(int n);

} // namespace pwdesk

#endif
