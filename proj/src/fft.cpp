#include "psfinv/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace psfinv::fft {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// FFTW_ESTIMATE keeps plans (and therefore results) reproducible run to run.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int rows, int cols, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(rows, cols, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(static_cast<size_t>(rows) * cols);
    auto* out = fftw_alloc_complex(static_cast<size_t>(rows) * cols);
    fftw_plan plan = fftw_plan_dft_2d(rows, cols, in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

ComplexGrid run(const ComplexGrid& x, int sign) {
  ComplexGrid in = x;
  ComplexGrid out(x.rows(), x.cols());
  fftw_plan plan = cache().get(static_cast<int>(x.rows()), static_cast<int>(x.cols()), sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace

ComplexGrid forward(const ComplexGrid& x) { return run(x, FFTW_FORWARD); }

ComplexGrid forward(const Grid& x) { return run(x.cast<std::complex<double>>(), FFTW_FORWARD); }

ComplexGrid inverse(const ComplexGrid& x) {
  ComplexGrid out = run(x, FFTW_BACKWARD);
  out /= static_cast<double>(x.size());
  return out;
}

Grid inverse_real(const ComplexGrid& x) { return inverse(x).real(); }

}  // namespace psfinv::fft
