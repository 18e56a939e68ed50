#include "c2t/types.hpp"

#include <algorithm>
#include <cmath>

namespace c2t {

std::optional<PhaseId> phase_from_name(const std::string& name) {
    if (name == "EW_S") return PhaseId::EW_straight;
    if (name == "EW_L") return PhaseId::EW_left;
    if (name == "NS_S") return PhaseId::NS_straight;
    if (name == "NS_L") return PhaseId::NS_left;
    return std::nullopt;
}

double DiurnalProfile::at(double t) const {
    if (points.empty()) return 1.0;
    if (t <= points.front().first) return points.front().second;
    if (t >= points.back().first) return points.back().second;
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (t <= points[i].first) {
            const auto& [t0, m0] = points[i - 1];
            const auto& [t1, m1] = points[i];
            double u = (t - t0) / std::max(1e-12, t1 - t0);
            return m0 + u * (m1 - m0);
        }
    }
    return points.back().second;
}

double SimConfig::rate_multiplier(double t) const {
    double m = 1.0;
    if (surge) {
        if (t >= surge->start_s) {
            double u = surge->ramp_s > 0 ? std::min(1.0, (t - surge->start_s) / surge->ramp_s) : 1.0;
            m *= 1.0 + u * (surge->factor - 1.0);
        }
    }
    if (diurnal) m *= diurnal->at(t);
    return m;
}

void SimConfig::validate() const {
    if (grid_rows < 1) throw ConfigError("grid_rows must be >= 1");
    if (grid_cols < 1) throw ConfigError("grid_cols must be >= 1");
    if (link_length <= 0) throw ConfigError("link_length must be > 0");
    if (lanes_per_movement < 1) throw ConfigError("lanes_per_movement must be >= 1");
    if (dt <= 0) throw ConfigError("dt must be > 0");
    if (green_s <= 0) throw ConfigError("green_s must be > 0");
    if (yellow_s <= 0) throw ConfigError("yellow_s must be > 0");
    if (allred_s <= 0) throw ConfigError("allred_s must be > 0");
    if (arrival_rate_per_entry < 0) throw ConfigError("arrival_rate_per_entry must be >= 0");
    if (horizon_s <= 0) throw ConfigError("horizon_s must be > 0");
    auto divides = [&](double dur) {
        double r = std::fmod(dur, dt);
        return r < 1e-9 || dt - r < 1e-9;
    };
    if (!divides(green_s)) throw ConfigError("green_s must be a multiple of dt");
    if (!divides(yellow_s)) throw ConfigError("yellow_s must be a multiple of dt");
    if (!divides(allred_s)) throw ConfigError("allred_s must be a multiple of dt");
    if (car_following.v_max <= 0) throw ConfigError("car_following.v_max must be > 0");
    if (car_following.a_max_accel <= 0) throw ConfigError("car_following.a_max_accel must be > 0");
    if (car_following.min_gap <= 0) throw ConfigError("car_following.min_gap must be > 0");
    if (car_following.headway <= 0) throw ConfigError("car_following.headway must be > 0");
}

double percentile_lower(std::vector<double> samples, double alpha, double empty_value) {
    if (samples.empty()) return empty_value;
    std::sort(samples.begin(), samples.end());
    std::size_t n = samples.size();
    std::size_t idx = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
    if (idx < 1) idx = 1;
    if (idx > n) idx = n;
    return samples[idx - 1];
}

} // namespace c2t
