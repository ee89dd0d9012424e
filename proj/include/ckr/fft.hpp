#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <tuple>

#include <fftw3.h>

#include "ckr/errors.hpp"

namespace ckr::fft {

// Thin wrapper over FFTW for in-place complex transforms along one axis of a
// row-major n1 x n2 array. Plans are cached per (n1, n2, axis, sign) and
// created with FFTW_ESTIMATE | FFTW_UNALIGNED so a cached plan can be executed
// on any buffer with the same layout (fftw_execute_dft is thread-safe; the
// planner is not, hence the mutex).
//
// Transforms are unnormalized, exactly as FFTW computes them:
//   sign=FFTW_FORWARD:   out[m] = sum_k in[k] exp(-2*pi*i*m*k/N)
// Callers apply the 1/sqrt(N) unitary scaling themselves.

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

    // axis: 1 transforms columns of length n1 (stride n2), 2 transforms rows
    // of length n2 (stride 1).
    fftw_plan get(int n1, int n2, int axis, int sign, std::complex<double>* buf) {
        const Key key{n1, n2, axis, sign};
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        auto* data = reinterpret_cast<fftw_complex*>(buf);
        fftw_plan plan = nullptr;
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        if (axis == 1) {
            int n = n1;
            plan = fftw_plan_many_dft(1, &n, n2, data, nullptr, n2, 1,
                                      data, nullptr, n2, 1, sign, flags);
        } else {
            int n = n2;
            plan = fftw_plan_many_dft(1, &n, n1, data, nullptr, 1, n2,
                                      data, nullptr, 1, n2, sign, flags);
        }
        if (!plan) throw NumericalError("fftw: failed to create plan");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    using Key = std::tuple<int, int, int, int>;

    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<Key, fftw_plan> plans_;
};

// In-place unnormalized transform along `axis` of the row-major n1 x n2 array.
inline void transform_axis(std::complex<double>* data, int n1, int n2, int axis, int sign) {
    fftw_plan plan = PlanCache::instance().get(n1, n2, axis, sign, data);
    auto* raw = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, raw, raw);
}

} // namespace ckr::fft
