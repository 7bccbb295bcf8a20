#include "mdmx/kernels.hpp"

#include <cstdlib>

namespace mdmx::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sqdist(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace scalar

namespace {

struct Dispatch {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  double (*sqdist)(const double*, const double*, std::size_t);
  std::string name;
};

Dispatch pick_backend() {
  const char* force = std::getenv("MDMX_KERNELS");
  const std::string want = force ? force : "";
#ifdef MDMX_HAVE_AVX2_BUILD
  const bool cpu_ok = __builtin_cpu_supports("avx2");
  if (want == "avx2" || (want.empty() && cpu_ok)) {
    return {avx2::dot, avx2::axpy, avx2::scale, avx2::sqdist, "avx2"};
  }
#endif
  return {scalar::dot, scalar::axpy, scalar::scale, scalar::sqdist, "scalar"};
}

const Dispatch& backend() {
  static const Dispatch d = pick_backend();
  return d;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  return backend().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  backend().axpy(alpha, x, y, n);
}

void scale(double alpha, double* x, std::size_t n) {
  backend().scale(alpha, x, n);
}

double sqdist(const double* a, const double* b, std::size_t n) {
  return backend().sqdist(a, b, n);
}

const std::string& active_backend() { return backend().name; }

}  // namespace mdmx::kernels
