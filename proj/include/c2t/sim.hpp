#pragma once

#include "c2t/rng.hpp"
#include "c2t/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace c2t {

// --- rewards over observations ---------------------------------------------

// Negative intersection pressure: -sum_i (n_in,i - n_out,i).
inline double pressure_reward(const Observation& obs) {
    return -(obs.p[0] + obs.p[1] + obs.p[2] + obs.p[3]);
}

// Pressure term minus a delay penalty.
inline double external_reward_tl(const Observation& obs, double lambda_delay) {
    return pressure_reward(obs) - lambda_delay * obs.mean_delay;
}

// --- TTC --------------------------------------------------------------------

// gap / closing speed when closing, else the cap.
inline double ttc_sample(double gap, double closing_speed, double cap = kTtcCap) {
    if (closing_speed <= 0.0) return cap;
    double t = gap / closing_speed;
    return t < cap ? t : cap;
}

struct TtcStats {
    double p10 = kTtcCap;
    double p50 = kTtcCap;
};

TtcStats ttc_statistics(const std::vector<double>& samples, double cap = kTtcCap);

// --- network ----------------------------------------------------------------

struct Lane {
    Movement movement = Movement::straight;
    std::vector<int> vehicles; // front first (descending position)
};

struct Link {
    int id = -1;
    int from_inter = -1; // -1: entry portal
    int to_inter = -1;   // -1: exit portal
    Approach heading = Approach::N; // direction of travel
    double length = 0.0;
    std::vector<Lane> lanes; // straight lanes first, then left lanes
};

struct Vehicle {
    int id = -1;
    std::vector<int> route;          // link ids
    std::vector<Movement> movements; // movement at the downstream node of route[i]
    int route_idx = 0;
    int lane_idx = 0;
    double pos = 0.0;   // m from link start; stop line at link length
    double v = 0.0;
    double a = 0.0;     // realized acceleration last step
    double spawn_time = 0.0;
    double finish_time = -1.0;
    double cum_wait = 0.0; // s with v < kStopSpeed
    double dist = 0.0;     // m traveled
    bool active = false;
    // integration scratch
    double a_cmd = 0.0;
    double frame_pos = 0.0; // new position in the coordinates of the pre-step link
    long stamp = -1;        // step index of last integration
};

struct StepEvents {
    int spawned = 0;
    int completed = 0;
    int harsh_brakes = 0;
    int switches = 0;
    int decisions = 0;
};

struct IntersectionState {
    int id = -1;
    int row = 0, col = 0;
    std::array<int, 4> in_link{-1, -1, -1, -1};  // by approach
    std::array<int, 4> out_link{-1, -1, -1, -1}; // by heading
    PhaseState signal;
    PhaseId pending_phase = PhaseId::EW_straight;
    std::array<double, 4> phase_red_s{}; // time since each phase last held green
};

inline Approach opposite(Approach a) { return static_cast<Approach>((static_cast<int>(a) + 2) % 4); }

// Left turn under right-hand traffic: E->N->W->S->E.
Approach left_of(Approach heading);

// Does `phase` give green to (heading, movement)?
bool phase_serves(PhaseId phase, Approach heading, Movement movement);

// Deterministic microscopic grid simulator. dt-stepped; actions are consumed
// only at decision points (green expiry).
class Simulator {
public:
    explicit Simulator(const SimConfig& config);

    // One action per intersection. Returns observations of the post-step state.
    std::vector<Observation> step(const std::vector<PhaseId>& actions, StepEvents* events = nullptr);

    std::vector<Observation> observe() const;
    Observation observe_intersection(int i) const;

    // Intersections whose green has expired and will consume an action this step.
    std::vector<bool> needs_action() const;

    double time() const { return time_; }
    int num_intersections() const { return static_cast<int>(inters_.size()); }
    int num_lanes() const;
    const SimConfig& config() const { return cfg_; }
    const IntersectionState& intersection(int i) const { return inters_[i]; }
    const Link& link(int id) const { return links_[id]; }
    const std::vector<Link>& links() const { return links_; }
    const Vehicle& vehicle(int id) const { return vehicles_[id]; }
    const std::vector<Vehicle>& vehicles_all() const { return vehicles_; }
    long total_harsh_brakes() const { return harsh_brakes_; }
    const std::vector<float>& last_ttc_samples(int inter) const {
        return windows_[inter][(step_index_ - 1 + window_slots_) % window_slots_].ttc;
    }

    long spawned_count() const { return spawned_; }
    long completed_count() const { return completed_; }
    long on_network_count() const;

    // episode aggregates (since construction)
    long total_switches() const { return switches_; }
    long total_decisions() const { return decisions_; }

private:
    struct WindowSlot {
        int crossings = 0;
        int brakes = 0;
        std::vector<float> ttc;
    };

    void build_network();
    bool lane_green(const IntersectionState& is, Approach heading, Movement mv) const;
    void update_signals(const std::vector<PhaseId>& actions, StepEvents& ev);
    void move_vehicles(StepEvents& ev);
    void spawn_vehicles(StepEvents& ev);
    void record_window();
    bool try_insert(Vehicle& v, StepEvents& ev);

    SimConfig cfg_;
    double time_ = 0.0;
    long step_index_ = 0;
    std::vector<Link> links_;
    std::vector<IntersectionState> inters_;
    std::vector<Vehicle> vehicles_;
    std::vector<int> entry_links_;
    std::vector<Rng> entry_rngs_;
    std::vector<std::vector<Vehicle>> pending_; // per entry link, blocked spawns
    std::vector<std::vector<WindowSlot>> windows_; // [intersection][slot]
    int window_slots_ = 30;
    long spawned_ = 0;
    long completed_ = 0;
    long switches_ = 0;
    long decisions_ = 0;
    long harsh_brakes_ = 0;
    int next_vehicle_id_ = 0;
};

// --- episode metrics ---------------------------------------------------------

// Accumulates per-step statistics needed by episode_metrics().
class EpisodeRecorder {
public:
    void record_step(const Simulator& sim, const StepEvents& ev);
    void record_mask(bool mask_active); // one entry per shaped TLC step

    EpisodeMetrics metrics(const Simulator& sim, double horizon_s) const;

private:
    long steps_ = 0;
    double queued_sum_ = 0.0;
    std::array<long, 1001> ttc_hist_{}; // 0.01 s bins, capped at kTtcCap
    long ttc_n_ = 0;
    long mask_steps_ = 0;
    long mask_zero_ = 0;
    double ttc_from_hist(double alpha) const;
};

} // namespace c2t
