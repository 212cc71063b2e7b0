#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace embercall::detail {

/// Real-to-complex FFT of a fixed length, backed by FFTW. Plans are created
/// under a global lock (the FFTW planner is not thread-safe); execution is
/// safe from multiple threads on distinct instances.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// in.size() == size(), out.size() == bins().
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  /// Unnormalized inverse: forward then inverse scales by size().
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  std::size_t n_;
  double* real_ = nullptr;
  void* spectrum_ = nullptr;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace embercall::detail
