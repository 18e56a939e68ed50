#pragma once

#include "c2t/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace c2t {

inline constexpr const char* kCaptionSchemaVersion = "c2t-caption-v1";

struct Caption {
    std::string text;
    std::uint64_t template_id = 0;
    std::string schema_version = kCaptionSchemaVersion;
};

// Normative caption grammar (fixed slot order, one space after each ';'):
//   phase=<EW_S|EW_L|NS_S|NS_L>; elapsed=<int>s; q=[N:<int>,E:<int>,S:<int>,W:<int>]veh;
//   p=[N:<int>,E:<int>,S:<int>,W:<int>]; delay=<x.x>s; thru=<int>veh/30s;
//   ttc_p10=<x.xx>s; ttc_p50=<x.xx>s; brakes=<int>; red_risk=<0|1>;
//   near_v=<x.xx>m/s; near_a=<x.xx>m/s2; near_d=<x.x>m
Caption render_caption(const Observation& obs);

// Coarse-bin template identity. Pairs of observations sharing every bin share
// a template id.
std::uint64_t caption_template_id(const Observation& obs);

// Bin tables used by template ids and the structured feature encoder.
int queue_bin(double q);   // {0, 1-3, 4-8, >8} -> 0..3
int delay_bin(double d);   // 5 s bins, clamped to 0..6
int ttc_bin(double ttc);   // {<1.5, 1.5-3, >3} -> 0..2
int brake_bin(double h);   // {0, 1-2, 3-5, >5} -> 0..3

// Inverse of render_caption up to rendering precision (exact on integers).
std::optional<Observation> parse_caption(const std::string& text);

// Appendix-style free-prose rendering: same facts, seed-dependent sentence
// order / synonyms plus irrelevant filler sentences.
std::string unstructured_caption(const Observation& obs, std::uint64_t style_seed);

// The numeric facts a judge needs, recoverable from either caption form.
struct JudgeView {
    double mean_q = 0.0;
    double delay = 0.0;
    double ttc_p10 = kTtcCap;
    double ttc_p50 = kTtcCap;
    double h_brake = 0.0;
    int rho_red = 0;
};

std::optional<JudgeView> judge_view(const std::string& caption_text);

} // namespace c2t
