#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ckr/errors.hpp"

namespace ckr {

enum class ScheduleKind { Log, Linear };

// Sorted, unique kick counts at which the slow probes run.
struct SampleSchedule {
    std::vector<std::int64_t> times;

    void validate(std::int64_t t_max) const {
        if (times.empty()) throw ConfigError("schedule: empty");
        for (size_t i = 0; i < times.size(); ++i) {
            if (times[i] < 0 || times[i] > t_max)
                throw ConfigError("schedule: time " + std::to_string(times[i]) +
                                  " outside [0, " + std::to_string(t_max) + "]");
            if (i > 0 && times[i] <= times[i - 1])
                throw ConfigError("schedule: times must be strictly increasing");
        }
    }
};

// Log spacing dedups to integers, so the actual sample count can be smaller
// than requested at early times.
inline SampleSchedule make_schedule(ScheduleKind kind, int samples, std::int64_t t_max) {
    if (samples < 1) throw ConfigError("schedule: samples must be >= 1");
    std::vector<std::int64_t> t{0};
    if (t_max > 0) {
        if (kind == ScheduleKind::Linear) {
            for (int i = 1; i < samples; ++i)
                t.push_back(static_cast<std::int64_t>(
                    std::llround(static_cast<double>(i) * t_max / (samples - 1))));
        } else {
            const double lmax = std::log(static_cast<double>(t_max));
            const int k = std::max(samples - 1, 1);
            for (int i = 0; i < k; ++i)
                t.push_back(static_cast<std::int64_t>(
                    std::llround(std::exp(lmax * i / std::max(k - 1, 1)))));
        }
        t.push_back(t_max);
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return SampleSchedule{std::move(t)};
}

// Which probes run at scheduled times (energy additionally runs every step).
struct ProbeSet {
    bool svn = true;
    bool slin = true;
    bool energy = true;
    bool marginals = false;
    bool decoherence = false;
    bool husimi = false;
    std::vector<std::int64_t> marginal_times; // marginal/husimi snapshot times

    bool any_schmidt() const { return svn || slin; }
};

} // namespace ckr
