#include "c2t/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace c2t {

TtcStats ttc_statistics(const std::vector<double>& samples, double cap) {
    TtcStats s;
    s.p10 = percentile_lower(samples, 0.10, cap);
    s.p50 = percentile_lower(samples, 0.50, cap);
    return s;
}

Approach left_of(Approach heading) {
    switch (heading) {
        case Approach::E: return Approach::N;
        case Approach::N: return Approach::W;
        case Approach::W: return Approach::S;
        case Approach::S: return Approach::E;
    }
    return Approach::N;
}

bool phase_serves(PhaseId phase, Approach heading, Movement movement) {
    bool ew = heading == Approach::E || heading == Approach::W;
    switch (phase) {
        case PhaseId::EW_straight: return ew && movement == Movement::straight;
        case PhaseId::EW_left: return ew && movement == Movement::left;
        case PhaseId::NS_straight: return !ew && movement == Movement::straight;
        case PhaseId::NS_left: return !ew && movement == Movement::left;
    }
    return false;
}

namespace {
// step stamp sentinel stored in Vehicle::route_idx? no: use a dedicated map in
// Simulator via frame stamps held in the vehicle's `a_cmd` scratch is ugly;
// keep a per-step stamp vector instead.
constexpr double kLeftTurnProb = 0.20;
// Fairness override: a phase with waiting demand that has not held green for
// this long preempts the controller's choice at the next decision point, as a
// real signal controller's max-red constraint would. 240 s is a last-resort
// bound: it stops outright starvation without turning the override into the
// de facto controller, so policies still have to learn to rotate on their own.
constexpr double kMaxRedS = 240.0;
} // namespace

Simulator::Simulator(const SimConfig& config) : cfg_(config) {
    cfg_.validate();
    window_slots_ = std::max(1, static_cast<int>(std::lround(kObsWindow / cfg_.dt)));
    build_network();
    windows_.assign(inters_.size(), std::vector<WindowSlot>(window_slots_));
    pending_.resize(entry_links_.size());
    entry_rngs_.reserve(entry_links_.size());
    for (std::size_t i = 0; i < entry_links_.size(); ++i)
        entry_rngs_.push_back(Rng::split(cfg_.seed, 1000 + i));
}

void Simulator::build_network() {
    const int R = cfg_.grid_rows, C = cfg_.grid_cols;
    inters_.resize(static_cast<std::size_t>(R) * C);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) {
            auto& is = inters_[r * C + c];
            is.id = r * C + c;
            is.row = r;
            is.col = c;
            is.signal = PhaseState{PhaseId::EW_straight, SignalStage::green, 0.0};
        }

    auto neighbor = [&](int r, int c, Approach h) -> int {
        // neighbor the traffic reaches when leaving (r,c) heading h
        int nr = r, nc = c;
        switch (h) {
            case Approach::N: nr = r - 1; break;
            case Approach::S: nr = r + 1; break;
            case Approach::E: nc = c + 1; break;
            case Approach::W: nc = c - 1; break;
        }
        if (nr < 0 || nr >= R || nc < 0 || nc >= C) return -1;
        return nr * C + nc;
    };

    auto make_link = [&](int from, int to, Approach heading) {
        Link ln;
        ln.id = static_cast<int>(links_.size());
        ln.from_inter = from;
        ln.to_inter = to;
        ln.heading = heading;
        ln.length = cfg_.link_length;
        int lpm = cfg_.lanes_per_movement;
        ln.lanes.resize(static_cast<std::size_t>(2) * lpm);
        for (int k = 0; k < lpm; ++k) ln.lanes[k].movement = Movement::straight;
        for (int k = 0; k < lpm; ++k) ln.lanes[lpm + k].movement = Movement::left;
        links_.push_back(std::move(ln));
        return links_.back().id;
    };

    // outgoing links (interior links double as the neighbor's incoming link)
    for (auto& is : inters_)
        for (int h = 0; h < 4; ++h) {
            Approach heading = static_cast<Approach>(h);
            int nb = neighbor(is.row, is.col, heading);
            int id = make_link(is.id, nb, heading);
            is.out_link[h] = id;
            if (nb >= 0) inters_[nb].in_link[static_cast<int>(opposite(heading))] = id;
        }
    // entry links where no interior link feeds an approach
    for (auto& is : inters_)
        for (int a = 0; a < 4; ++a)
            if (is.in_link[a] < 0) {
                Approach heading = opposite(static_cast<Approach>(a));
                int id = make_link(-1, is.id, heading);
                is.in_link[a] = id;
                entry_links_.push_back(id);
            }
}

int Simulator::num_lanes() const {
    // Approach lanes only: links feeding an intersection. Boundary exit links
    // are sinks and not part of the 4-approaches x 2-movements count.
    int n = 0;
    for (const auto& l : links_)
        if (l.to_inter >= 0) n += static_cast<int>(l.lanes.size());
    return n;
}

long Simulator::on_network_count() const {
    long n = 0;
    for (const auto& l : links_)
        for (const auto& lane : l.lanes) n += static_cast<long>(lane.vehicles.size());
    return n;
}

bool Simulator::lane_green(const IntersectionState& is, Approach heading, Movement mv) const {
    return is.signal.stage == SignalStage::green && phase_serves(is.signal.phase, heading, mv);
}

std::vector<bool> Simulator::needs_action() const {
    std::vector<bool> out(inters_.size());
    for (std::size_t i = 0; i < inters_.size(); ++i) {
        const auto& s = inters_[i].signal;
        out[i] = s.stage == SignalStage::green && s.elapsed + 1e-9 >= cfg_.green_s;
    }
    return out;
}

void Simulator::update_signals(const std::vector<PhaseId>& actions, StepEvents& ev) {
    for (std::size_t i = 0; i < inters_.size(); ++i) {
        auto& is = inters_[i];
        auto& s = is.signal;
        if (s.stage == SignalStage::green && s.elapsed + 1e-9 >= cfg_.green_s) {
            ev.decisions++;
            decisions_++;
            PhaseId a = actions[i];
            int starved = -1;
            for (int p = 0; p < 4; ++p) {
                if (is.phase_red_s[p] < kMaxRedS) continue;
                if (starved >= 0 && is.phase_red_s[p] <= is.phase_red_s[starved]) continue;
                bool demand = false;
                for (int ap = 0; ap < 4 && !demand; ++ap) {
                    const Link& in = links_[is.in_link[ap]];
                    for (const auto& lane : in.lanes) {
                        if (!lane.vehicles.empty() &&
                            phase_serves(static_cast<PhaseId>(p), in.heading, lane.movement)) {
                            demand = true;
                            break;
                        }
                    }
                }
                if (demand) starved = p;
            }
            if (starved >= 0) a = static_cast<PhaseId>(starved);
            if (a == s.phase) {
                s.elapsed = 0.0; // green extension, no interphase
            } else {
                is.pending_phase = a;
                s.stage = SignalStage::yellow;
                s.elapsed = 0.0;
                ev.switches++;
                switches_++;
            }
        } else if (s.stage == SignalStage::yellow && s.elapsed + 1e-9 >= cfg_.yellow_s) {
            s.stage = SignalStage::allred;
            s.elapsed = 0.0;
        } else if (s.stage == SignalStage::allred && s.elapsed + 1e-9 >= cfg_.allred_s) {
            s.stage = SignalStage::green;
            s.phase = is.pending_phase;
            s.elapsed = 0.0;
        }
    }
}

void Simulator::move_vehicles(StepEvents& ev) {
    const auto& cf = cfg_.car_following;
    const double dt = cfg_.dt;
    const double sqrt_ab = std::sqrt(cf.a_max_accel * cf.b_comfort);
    const double inf = std::numeric_limits<double>::infinity();

    // pass 1: accelerations from the pre-step snapshot
    for (const auto& link : links_) {
        for (const auto& lane : link.lanes) {
            for (std::size_t k = 0; k < lane.vehicles.size(); ++k) {
                Vehicle& veh = vehicles_[lane.vehicles[k]];
                double lead_pos = inf, lead_v = 0.0;
                if (k > 0) {
                    const Vehicle& lead = vehicles_[lane.vehicles[k - 1]];
                    lead_pos = lead.pos;
                    lead_v = lead.v;
                } else if (link.to_inter >= 0) {
                    const auto& is = inters_[link.to_inter];
                    if (lane_green(is, link.heading, lane.movement)) {
                        const Link& next = links_[veh.route[veh.route_idx + 1]];
                        // rearmost vehicle on the lane this vehicle will enter
                        int mv_next = static_cast<int>(veh.movements[veh.route_idx + 1]);
                        int lane_next = mv_next * cfg_.lanes_per_movement + (veh.id % cfg_.lanes_per_movement);
                        const Lane& target = next.lanes[lane_next];
                        if (!target.vehicles.empty()) {
                            const Vehicle& lead = vehicles_[target.vehicles.back()];
                            lead_pos = link.length + lead.pos;
                            lead_v = lead.v;
                        }
                    } else {
                        lead_pos = link.length + cf.min_gap; // stops exactly at the line
                        lead_v = 0.0;
                    }
                }
                double acc;
                if (lead_pos == inf) {
                    double ratio = veh.v / cf.v_max;
                    acc = cf.a_max_accel * (1.0 - ratio * ratio * ratio * ratio);
                } else {
                    double s = lead_pos - veh.pos;
                    if (s <= 0.01) {
                        acc = -cf.b_emergency;
                    } else {
                        double s_star = cf.min_gap +
                            std::max(0.0, veh.v * cf.headway + veh.v * (veh.v - lead_v) / (2.0 * sqrt_ab));
                        double ratio = veh.v / cf.v_max;
                        acc = cf.a_max_accel * (1.0 - ratio * ratio * ratio * ratio - (s_star / s) * (s_star / s));
                    }
                }
                veh.a_cmd = std::clamp(acc, -cf.b_emergency, cf.a_max_accel);
            }
        }
    }

    // pass 2: integrate front-to-back, clamp, cross, retire
    std::vector<int> order; // scratch per lane
    for (auto& link : links_) {
        for (std::size_t li = 0; li < link.lanes.size(); ++li) {
            Lane& lane = link.lanes[li];
            order.assign(lane.vehicles.begin(), lane.vehicles.end());
            for (std::size_t k = 0; k < order.size(); ++k) {
                Vehicle& veh = vehicles_[order[k]];
                if (veh.stamp == step_index_) continue; // crossed in from an earlier lane this step
                veh.stamp = step_index_;
                double v_des = std::clamp(veh.v + veh.a_cmd * dt, 0.0, cf.v_max);
                double newpos = veh.pos + v_des * dt;

                // follower constraint within lane (leader already integrated)
                if (k > 0) {
                    const Vehicle& lead = vehicles_[order[k - 1]];
                    newpos = std::min(newpos, lead.frame_pos - cf.min_gap);
                }

                bool is_front = (k == 0);
                bool crossed = false;
                if (link.to_inter >= 0) {
                    const auto& is = inters_[link.to_inter];
                    bool green = lane_green(is, link.heading, lane.movement);
                    if (!green) {
                        newpos = std::min(newpos, link.length);
                    } else if (is_front && newpos >= link.length) {
                        // try to enter the next link
                        const Link& next = links_[veh.route[veh.route_idx + 1]];
                        int mv_next = static_cast<int>(veh.movements[veh.route_idx + 1]);
                        int lane_next = mv_next * cfg_.lanes_per_movement + (veh.id % cfg_.lanes_per_movement);
                        Lane& target = links_[next.id].lanes[lane_next];
                        double overshoot = newpos - link.length;
                        bool room = true;
                        if (!target.vehicles.empty()) {
                            const Vehicle& rear = vehicles_[target.vehicles.back()];
                            if (rear.pos - cf.min_gap < overshoot) room = false;
                        }
                        if (room) {
                            crossed = true;
                            veh.frame_pos = newpos;
                            veh.route_idx++;
                            veh.lane_idx = lane_next;
                            double disp = newpos - veh.pos;
                            double v_new = std::max(0.0, disp / dt);
                            veh.a = (v_new - veh.v) / dt;
                            if (veh.a < kHarshBrake) {
                                ev.harsh_brakes++;
                                harsh_brakes_++;
                                windows_[is.id][step_index_ % window_slots_].brakes++;
                            }
                            veh.v = v_new;
                            veh.dist += disp;
                            veh.pos = overshoot;
                            if (veh.v < kStopSpeed) veh.cum_wait += dt;
                            lane.vehicles.erase(std::find(lane.vehicles.begin(), lane.vehicles.end(), veh.id));
                            target.vehicles.push_back(veh.id);
                            // crossing event credited to the intersection passed
                            windows_[is.id][step_index_ % window_slots_].crossings++;
                        } else {
                            newpos = std::min(newpos, link.length);
                        }
                    } else if (newpos >= link.length) {
                        newpos = link.length; // non-front vehicle may not cross this step
                    }
                } else if (newpos >= link.length) {
                    // exit portal: retire
                    double disp = newpos - veh.pos;
                    veh.dist += disp;
                    veh.v = std::max(0.0, disp / dt);
                    veh.frame_pos = newpos;
                    veh.finish_time = time_ + dt;
                    veh.active = false;
                    completed_++;
                    ev.completed++;
                    lane.vehicles.erase(std::find(lane.vehicles.begin(), lane.vehicles.end(), veh.id));
                    continue;
                }

                if (!crossed) {
                    newpos = std::max(newpos, veh.pos); // leaders only move forward
                    double disp = newpos - veh.pos;
                    double v_new = std::max(0.0, disp / dt);
                    veh.a = (v_new - veh.v) / dt;
                    if (veh.a < kHarshBrake && link.to_inter >= 0) {
                        ev.harsh_brakes++;
                        harsh_brakes_++;
                        windows_[link.to_inter][step_index_ % window_slots_].brakes++;
                    }
                    veh.v = v_new;
                    veh.dist += disp;
                    veh.pos = newpos;
                    veh.frame_pos = newpos;
                    if (veh.v < kStopSpeed) veh.cum_wait += dt;
                }
            }
        }
    }
}

bool Simulator::try_insert(Vehicle& v, StepEvents& ev) {
    const Link& entry = links_[v.route[0]];
    int lane_idx = static_cast<int>(v.movements[0]) * cfg_.lanes_per_movement +
                   (next_vehicle_id_ % cfg_.lanes_per_movement);
    const Lane& lane = entry.lanes[lane_idx];
    const auto& cf = cfg_.car_following;
    double rear_pos = lane.vehicles.empty() ? std::numeric_limits<double>::infinity()
                                            : vehicles_[lane.vehicles.back()].pos;
    if (rear_pos < cf.min_gap) return false;
    v.lane_idx = lane_idx;
    v.pos = 0.0;
    v.v = std::min(cf.v_max, std::max(0.0, (rear_pos - cf.min_gap) / cf.headway));
    v.spawn_time = time_;
    v.active = true;
    v.id = next_vehicle_id_++;
    vehicles_.push_back(v);
    links_[entry.id].lanes[lane_idx].vehicles.push_back(v.id);
    spawned_++;
    ev.spawned++;
    return true;
}

void Simulator::spawn_vehicles(StepEvents& ev) {
    double mult = cfg_.rate_multiplier(time_);
    for (std::size_t e = 0; e < entry_links_.size(); ++e) {
        Rng& rng = entry_rngs_[e];
        // blocked backlog first, preserving order
        auto& backlog = pending_[e];
        while (!backlog.empty()) {
            if (!try_insert(backlog.front(), ev)) break;
            backlog.erase(backlog.begin());
        }
        int n = rng.poisson(cfg_.arrival_rate_per_entry * cfg_.dt * mult);
        for (int k = 0; k < n; ++k) {
            Vehicle v;
            // route: straight corridor with occasional left turns
            int cur = entry_links_[e];
            std::size_t cap = static_cast<std::size_t>(2 * (cfg_.grid_rows + cfg_.grid_cols) + 4);
            while (true) {
                v.route.push_back(cur);
                const Link& ln = links_[cur];
                if (ln.to_inter < 0) {
                    v.movements.push_back(Movement::straight);
                    break;
                }
                Movement mv = (v.route.size() < cap && rng.bernoulli(kLeftTurnProb)) ? Movement::left
                                                                                     : Movement::straight;
                v.movements.push_back(mv);
                Approach nh = mv == Movement::left ? left_of(ln.heading) : ln.heading;
                cur = inters_[ln.to_inter].out_link[static_cast<int>(nh)];
            }
            if (!try_insert(v, ev)) backlog.push_back(std::move(v));
        }
    }
}

void Simulator::record_window() {
    for (std::size_t i = 0; i < inters_.size(); ++i) {
        auto& slot = windows_[i][step_index_ % window_slots_];
        const auto& is = inters_[i];
        for (int a = 0; a < 4; ++a) {
            const Link& link = links_[is.in_link[a]];
            for (const auto& lane : link.lanes) {
                bool green = lane_green(is, link.heading, lane.movement);
                for (std::size_t k = 0; k < lane.vehicles.size(); ++k) {
                    const Vehicle& veh = vehicles_[lane.vehicles[k]];
                    if (k > 0) {
                        const Vehicle& lead = vehicles_[lane.vehicles[k - 1]];
                        slot.ttc.push_back(static_cast<float>(
                            ttc_sample(lead.pos - veh.pos, veh.v - lead.v)));
                    } else if (!green) {
                        slot.ttc.push_back(static_cast<float>(
                            ttc_sample(link.length - veh.pos, veh.v)));
                    }
                }
            }
        }
    }
}

std::vector<Observation> Simulator::step(const std::vector<PhaseId>& actions, StepEvents* events) {
    assert(actions.size() == inters_.size());
    StepEvents ev;
    // fresh window slot for this step
    for (auto& w : windows_) {
        auto& slot = w[step_index_ % window_slots_];
        slot.crossings = 0;
        slot.brakes = 0;
        slot.ttc.clear();
    }
    update_signals(actions, ev);
    move_vehicles(ev);
    spawn_vehicles(ev);
    record_window();
    for (auto& is : inters_) {
        is.signal.elapsed += cfg_.dt;
        for (int p = 0; p < 4; ++p) {
            if (is.signal.stage == SignalStage::green &&
                p == static_cast<int>(is.signal.phase)) {
                is.phase_red_s[p] = 0.0;
            } else {
                is.phase_red_s[p] += cfg_.dt;
            }
        }
    }
    time_ += cfg_.dt;
    step_index_++;
    if (events) *events = ev;
    return observe();
}

Observation Simulator::observe_intersection(int i) const {
    const auto& is = inters_[i];
    Observation o;
    o.intersection_id = i;
    o.time = time_;
    o.phase = is.signal;

    double wait_sum = 0.0;
    int wait_n = 0;
    double near_d = std::numeric_limits<double>::infinity();
    int near_id = -1;
    for (int a = 0; a < 4; ++a) {
        const Link& in = links_[is.in_link[a]];
        int n_in = 0, queued = 0;
        for (const auto& lane : in.lanes) {
            n_in += static_cast<int>(lane.vehicles.size());
            for (int vid : lane.vehicles) {
                const Vehicle& veh = vehicles_[vid];
                if (veh.v < kStopSpeed) queued++;
                wait_sum += veh.cum_wait;
                wait_n++;
            }
            if (!lane.vehicles.empty()) {
                const Vehicle& head = vehicles_[lane.vehicles.front()];
                double d = in.length - head.pos;
                if (d < near_d) {
                    near_d = d;
                    near_id = head.id;
                }
            }
        }
        const Link& out = links_[is.out_link[static_cast<int>(opposite(static_cast<Approach>(a)))]];
        int n_out = 0;
        for (const auto& lane : out.lanes) n_out += static_cast<int>(lane.vehicles.size());
        o.q[a] = queued;
        o.p[a] = n_in - n_out;
    }
    o.mean_delay = wait_n > 0 ? wait_sum / wait_n : 0.0;
    if (near_id >= 0) {
        const Vehicle& v = vehicles_[near_id];
        o.v_near = v.v;
        o.a_near = v.a;
        o.d_stop = near_d;
    }

    std::vector<double> ttc;
    int thru = 0, brakes = 0;
    for (const auto& slot : windows_[i]) {
        thru += slot.crossings;
        brakes += slot.brakes;
        for (float s : slot.ttc) ttc.push_back(s);
    }
    o.throughput = thru;
    o.h_brake = brakes;
    TtcStats ts = ttc_statistics(ttc);
    o.ttc_p10 = ts.p10;
    o.ttc_p50 = ts.p50;

    // red-light risk: some vehicle on a red-facing lane cannot comfortably stop
    // and would reach the stop line within the yellow interval
    o.rho_red = 0;
    for (int a = 0; a < 4 && !o.rho_red; ++a) {
        const Link& in = links_[is.in_link[a]];
        for (const auto& lane : in.lanes) {
            if (lane_green(is, in.heading, lane.movement)) continue;
            if (lane.vehicles.empty()) continue;
            const Vehicle& head = vehicles_[lane.vehicles.front()];
            if (head.v <= kStopSpeed) continue;
            double d = std::max(0.01, in.length - head.pos);
            double t_cross = d / head.v;
            double req_decel = head.v * head.v / (2.0 * d);
            if (t_cross <= cfg_.yellow_s && req_decel > cfg_.car_following.b_comfort) {
                o.rho_red = 1;
                break;
            }
        }
    }
    return o;
}

std::vector<Observation> Simulator::observe() const {
    std::vector<Observation> out;
    out.reserve(inters_.size());
    for (std::size_t i = 0; i < inters_.size(); ++i) out.push_back(observe_intersection(static_cast<int>(i)));
    return out;
}

// --- EpisodeRecorder ---------------------------------------------------------

void EpisodeRecorder::record_step(const Simulator& sim, const StepEvents& ev) {
    (void)ev;
    steps_++;
    long queued = 0;
    for (const auto& link : sim.links()) {
        if (link.to_inter < 0) continue;
        for (const auto& lane : link.lanes)
            for (int vid : lane.vehicles)
                if (sim.vehicle(vid).v < kStopSpeed) queued++;
    }
    queued_sum_ += static_cast<double>(queued) / sim.num_intersections();
    // pool the TTC samples recorded this step
    for (int i = 0; i < sim.num_intersections(); ++i) {
        for (float s : sim.last_ttc_samples(i)) {
            int bin = static_cast<int>(std::lround(std::min<double>(s, kTtcCap) * 100.0));
            bin = std::clamp(bin, 0, 1000);
            ttc_hist_[bin]++;
            ttc_n_++;
        }
    }
}

void EpisodeRecorder::record_mask(bool mask_active) {
    mask_steps_++;
    if (!mask_active) mask_zero_++;
}

double EpisodeRecorder::ttc_from_hist(double alpha) const {
    if (ttc_n_ == 0) return kTtcCap;
    long idx = static_cast<long>(std::ceil(alpha * static_cast<double>(ttc_n_)));
    if (idx < 1) idx = 1;
    long cum = 0;
    for (int b = 0; b <= 1000; ++b) {
        cum += ttc_hist_[b];
        if (cum >= idx) return b / 100.0;
    }
    return kTtcCap;
}

EpisodeMetrics EpisodeRecorder::metrics(const Simulator& sim, double horizon_s) const {
    EpisodeMetrics m;
    double tt_sum = 0.0, wait_sum = 0.0, km = 0.0;
    long done = 0, brakes = 0;
    for (const auto& v : sim.vehicles_all()) {
        km += v.dist / 1000.0;
        if (v.finish_time >= 0.0) {
            done++;
            tt_sum += v.finish_time - v.spawn_time;
            wait_sum += v.cum_wait;
        }
    }
    brakes = sim.total_harsh_brakes();
    if (done > 0) {
        m.att = tt_sum / done;
        m.awt = wait_sum / done;
    }
    m.aql = steps_ > 0 ? queued_sum_ / steps_ : 0.0;
    m.throughput = static_cast<double>(done) * 3600.0 / horizon_s;
    m.ttc_p10 = ttc_from_hist(0.10);
    m.ttc_p25 = ttc_from_hist(0.25);
    m.brakes_per_km = km > 1e-9 ? static_cast<double>(brakes) / km : 0.0;
    m.oscillation = sim.total_decisions() > 0
        ? static_cast<double>(sim.total_switches()) / sim.total_decisions() : 0.0;
    m.mask_activation_rate = mask_steps_ > 0 ? static_cast<double>(mask_zero_) / mask_steps_ : 0.0;
    return m;
}

} // namespace c2t
