#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace c2t {

// Approach indexing used everywhere: 0=N, 1=E, 2=S, 3=W (side the traffic
// enters the intersection from).
enum class Approach : int { N = 0, E = 1, S = 2, W = 3 };

enum class PhaseId : int { EW_straight = 0, EW_left = 1, NS_straight = 2, NS_left = 3 };
enum class SignalStage : int { green = 0, yellow = 1, allred = 2 };
enum class Movement : int { straight = 0, left = 1 };

inline const char* phase_name(PhaseId p) {
    switch (p) {
        case PhaseId::EW_straight: return "EW_S";
        case PhaseId::EW_left: return "EW_L";
        case PhaseId::NS_straight: return "NS_S";
        case PhaseId::NS_left: return "NS_L";
    }
    return "?";
}

std::optional<PhaseId> phase_from_name(const std::string& name);

struct PhaseState {
    PhaseId phase = PhaseId::EW_straight;
    SignalStage stage = SignalStage::green;
    double elapsed = 0.0; // seconds since stage start
};

struct CarFollowing {
    double v_max = 11.11;        // m/s
    double a_max_accel = 2.0;    // m/s^2
    double b_comfort = 2.0;      // m/s^2
    double b_emergency = 6.0;    // m/s^2
    double min_gap = 2.5;        // m
    double headway = 1.5;        // s
};

struct SurgeProfile {
    double factor = 4.0;
    double start_s = 0.0;
    double ramp_s = 300.0;
};

// Piecewise-linear multiplier on the base arrival rate.
struct DiurnalProfile {
    std::vector<std::pair<double, double>> points; // (t seconds, multiplier)
    double at(double t) const;
};

struct SimConfig {
    int grid_rows = 2;
    int grid_cols = 2;
    double link_length = 200.0;  // m
    int lanes_per_movement = 1;
    double dt = 1.0;             // s, fixed
    double green_s = 30.0;
    double yellow_s = 3.0;
    double allred_s = 2.0;
    double arrival_rate_per_entry = 0.08; // veh/s per entry link
    std::optional<SurgeProfile> surge;
    std::optional<DiurnalProfile> diurnal;
    double horizon_s = 600.0;
    std::uint64_t seed = 1;
    CarFollowing car_following;

    double rate_multiplier(double t) const;
    void validate() const; // throws ConfigError naming the offending field
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct Observation {
    int intersection_id = 0;
    double time = 0.0;
    PhaseState phase;
    std::array<double, 4> q{};   // queue count per approach [N,E,S,W]
    std::array<double, 4> p{};   // pressure per approach: n_in - n_out
    double mean_delay = 0.0;     // s
    double throughput = 0.0;     // veh per observation window
    double ttc_p10 = 0.0;        // s
    double ttc_p50 = 0.0;        // s
    double h_brake = 0.0;        // harsh-brake count in window
    int rho_red = 0;             // red-light risk flag
    double v_near = 0.0;         // m/s
    double a_near = 0.0;         // m/s^2
    double d_stop = 0.0;         // m
};

struct EpisodeMetrics {
    std::optional<double> att;   // s; absent when no vehicle completed
    double aql = 0.0;            // veh per intersection (time average)
    std::optional<double> awt;   // s
    double throughput = 0.0;     // veh/h
    double ttc_p10 = 0.0;        // s
    double ttc_p25 = 0.0;        // s
    double brakes_per_km = 0.0;
    double oscillation = 0.0;    // switches / decision points
    double mask_activation_rate = 0.0;
};

constexpr double kTtcCap = 10.0;        // s
constexpr double kHarshBrake = -3.0;    // m/s^2
constexpr double kObsWindow = 30.0;     // s, trailing window for thru/brakes/TTC
constexpr double kStopSpeed = 0.1;      // m/s, "queued"/waiting threshold

// Sorted-order lower interpolation percentile: element at 1-based index
// ceil(alpha * n). Empty input yields `empty_value`.
double percentile_lower(std::vector<double> samples, double alpha, double empty_value);

} // namespace c2t
