#pragma once

// Hot arithmetic kernels with scalar reference implementations and an AVX2
// path selected at runtime. The two paths are equivalence-tested; set
// MDMX_KERNELS=scalar|avx2 to force one.

#include <cstddef>
#include <string>

namespace mdmx::kernels {

// y[i] dot x[i] over n doubles
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// x *= alpha
void scale(double alpha, double* x, std::size_t n);

// sum_i (a[i] - b[i])^2
double sqdist(const double* a, const double* b, std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
double sqdist(const double* a, const double* b, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MDMX_HAVE_AVX2_BUILD 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
double sqdist(const double* a, const double* b, std::size_t n);
}  // namespace avx2
#endif

// Name of the dispatch target in use ("scalar" or "avx2").
const std::string& active_backend();

}  // namespace mdmx::kernels
