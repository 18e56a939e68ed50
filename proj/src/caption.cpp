#include "c2t/caption.hpp"

#include "c2t/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <vector>

namespace c2t {

namespace {

std::string fmt_int(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(v)));
    return buf;
}

std::string fmt(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    // avoid "-0.0"
    if (buf[0] == '-') {
        bool all_zero = true;
        for (const char* p = buf + 1; *p; ++p)
            if (*p != '0' && *p != '.') { all_zero = false; break; }
        if (all_zero) return buf + 1;
    }
    return buf;
}

const char* approach_letter(int a) {
    static const char* names[4] = {"N", "E", "S", "W"};
    return names[a];
}

} // namespace

int queue_bin(double q) {
    long v = std::lround(q);
    if (v <= 0) return 0;
    if (v <= 3) return 1;
    if (v <= 8) return 2;
    return 3;
}

int delay_bin(double d) {
    int b = static_cast<int>(std::floor(d / 5.0));
    if (b < 0) b = 0;
    if (b > 6) b = 6;
    return b;
}

int ttc_bin(double ttc) {
    if (ttc < 1.5) return 0;
    if (ttc <= 3.0) return 1;
    return 2;
}

int brake_bin(double h) {
    long v = std::lround(h);
    if (v <= 0) return 0;
    if (v <= 2) return 1;
    if (v <= 5) return 2;
    return 3;
}

std::uint64_t caption_template_id(const Observation& obs) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (int a = 0; a < 4; ++a) h = fnv1a_u64(static_cast<std::uint64_t>(queue_bin(obs.q[a])), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(delay_bin(obs.mean_delay)), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(ttc_bin(obs.ttc_p10)), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(obs.rho_red), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(obs.phase.phase), h);
    return h;
}

Caption render_caption(const Observation& obs) {
    std::string s;
    s.reserve(256);
    s += "phase=";
    s += phase_name(obs.phase.phase);
    s += "; elapsed=" + fmt_int(obs.phase.elapsed) + "s";
    s += "; q=[";
    for (int a = 0; a < 4; ++a) {
        if (a) s += ",";
        s += std::string(approach_letter(a)) + ":" + fmt_int(obs.q[a]);
    }
    s += "]veh; p=[";
    for (int a = 0; a < 4; ++a) {
        if (a) s += ",";
        s += std::string(approach_letter(a)) + ":" + fmt_int(obs.p[a]);
    }
    s += "]; delay=" + fmt(obs.mean_delay, 1) + "s";
    s += "; thru=" + fmt_int(obs.throughput) + "veh/30s";
    s += "; ttc_p10=" + fmt(obs.ttc_p10, 2) + "s";
    s += "; ttc_p50=" + fmt(obs.ttc_p50, 2) + "s";
    s += "; brakes=" + fmt_int(obs.h_brake);
    s += "; red_risk=" + std::string(obs.rho_red ? "1" : "0");
    s += "; near_v=" + fmt(obs.v_near, 2) + "m/s";
    s += "; near_a=" + fmt(obs.a_near, 2) + "m/s2";
    s += "; near_d=" + fmt(obs.d_stop, 1) + "m";
    Caption c;
    c.text = std::move(s);
    c.template_id = caption_template_id(obs);
    return c;
}

namespace {

// slot list "key=value" split on "; "
std::vector<std::pair<std::string, std::string>> split_slots(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find("; ", pos);
        std::string tok = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        std::size_t eq = tok.find('=');
        if (eq == std::string::npos) return {};
        out.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
        if (end == std::string::npos) break;
        pos = end + 2;
    }
    return out;
}

bool parse_vec4(const std::string& v, std::array<double, 4>& out, const char* suffix) {
    // "[N:5,E:2,S:4,W:0]" + suffix
    std::string body = v;
    if (suffix && *suffix) {
        std::size_t sl = std::strlen(suffix);
        if (body.size() < sl || body.compare(body.size() - sl, sl, suffix) != 0) return false;
        body = body.substr(0, body.size() - sl);
    }
    if (body.size() < 2 || body.front() != '[' || body.back() != ']') return false;
    body = body.substr(1, body.size() - 2);
    std::istringstream ss(body);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 4) return false;
        std::size_t colon = item.find(':');
        if (colon == std::string::npos) return false;
        out[i++] = std::stod(item.substr(colon + 1));
    }
    return i == 4;
}

bool strip_suffix(std::string& v, const char* suffix) {
    std::size_t sl = std::strlen(suffix);
    if (v.size() < sl || v.compare(v.size() - sl, sl, suffix) != 0) return false;
    v = v.substr(0, v.size() - sl);
    return true;
}

} // namespace

std::optional<Observation> parse_caption(const std::string& text) {
    auto slots = split_slots(text);
    static const char* expected[] = {"phase",   "elapsed", "q",      "p",        "delay",
                                     "thru",    "ttc_p10", "ttc_p50", "brakes",  "red_risk",
                                     "near_v",  "near_a",  "near_d"};
    if (slots.size() != 13) return std::nullopt;
    for (int i = 0; i < 13; ++i)
        if (slots[i].first != expected[i]) return std::nullopt;

    Observation o;
    try {
        auto ph = phase_from_name(slots[0].second);
        if (!ph) return std::nullopt;
        o.phase.phase = *ph;
        std::string v = slots[1].second;
        if (!strip_suffix(v, "s")) return std::nullopt;
        o.phase.elapsed = std::stod(v);
        if (!parse_vec4(slots[2].second, o.q, "veh")) return std::nullopt;
        if (!parse_vec4(slots[3].second, o.p, "")) return std::nullopt;
        v = slots[4].second;
        if (!strip_suffix(v, "s")) return std::nullopt;
        o.mean_delay = std::stod(v);
        v = slots[5].second;
        if (!strip_suffix(v, "veh/30s")) return std::nullopt;
        o.throughput = std::stod(v);
        v = slots[6].second;
        if (!strip_suffix(v, "s")) return std::nullopt;
        o.ttc_p10 = std::stod(v);
        v = slots[7].second;
        if (!strip_suffix(v, "s")) return std::nullopt;
        o.ttc_p50 = std::stod(v);
        o.h_brake = std::stod(slots[8].second);
        o.rho_red = std::stoi(slots[9].second);
        v = slots[10].second;
        if (!strip_suffix(v, "m/s")) return std::nullopt;
        o.v_near = std::stod(v);
        v = slots[11].second;
        if (!strip_suffix(v, "m/s2")) return std::nullopt;
        o.a_near = std::stod(v);
        v = slots[12].second;
        if (!strip_suffix(v, "m")) return std::nullopt;
        o.d_stop = std::stod(v);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return o;
}

std::string unstructured_caption(const Observation& obs, std::uint64_t style_seed) {
    Rng rng(fnv1a_u64(style_seed, 0x9e3779b97f4a7c15ull));
    auto pick = [&](const char* a, const char* b) { return rng.bernoulli(0.5) ? a : b; };

    std::vector<std::string> sentences;
    sentences.push_back(std::string(pick("The signal is showing phase ", "Right now the controller sits in phase ")) +
                        phase_name(obs.phase.phase) + " and has held it for " + fmt_int(obs.phase.elapsed) + "s.");
    {
        std::string q = std::string(pick("Queues by approach come to ", "Waiting traffic by approach stands at "));
        for (int a = 0; a < 4; ++a) {
            if (a) q += ", ";
            q += std::string(approach_letter(a)) + ":" + fmt_int(obs.q[a]);
        }
        q += " vehicles.";
        sentences.push_back(q);
    }
    {
        std::string p = std::string(pick("Pressure reads ", "The pressure figures are "));
        for (int a = 0; a < 4; ++a) {
            if (a) p += ", ";
            p += std::string(approach_letter(a)) + ":" + fmt_int(obs.p[a]);
        }
        p += ".";
        sentences.push_back(p);
    }
    sentences.push_back(std::string(pick("Average delay is ", "Mean delay currently measures ")) +
                        fmt(obs.mean_delay, 1) + "s while " + fmt_int(obs.throughput) +
                        "veh got through in the last 30s.");
    sentences.push_back(std::string(pick("Time-to-collision percentiles are ", "Rear-end time-to-collision comes to ")) +
                        fmt(obs.ttc_p10, 2) + "s (p10) and " + fmt(obs.ttc_p50, 2) + "s (p50).");
    sentences.push_back(std::string(pick("There were ", "The window saw ")) + fmt_int(obs.h_brake) +
                        " harsh brakes and the red-light risk flag is " + (obs.rho_red ? "1" : "0") + ".");
    sentences.push_back(std::string(pick("The nearest vehicle is ", "Closest to a stop line, a vehicle is ")) +
                        fmt(obs.d_stop, 1) + "m out, moving at " + fmt(obs.v_near, 2) +
                        "m/s with acceleration " + fmt(obs.a_near, 2) + "m/s2.");

    static const char* fillers[] = {
        "The sky is clear over the junction.",
        "A delivery van idles somewhere out of frame.",
        "Nothing else of note is happening nearby.",
        "The pavement looks dry.",
        "A billboard flickers across the street.",
    };
    int f1 = static_cast<int>(rng.uniform_int(5));
    int f2 = static_cast<int>(rng.uniform_int(5));
    sentences.push_back(fillers[f1]);
    if (f2 != f1) sentences.push_back(fillers[f2]);

    rng.shuffle(sentences);
    std::string out;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i) out += " ";
        out += sentences[i];
    }
    return out;
}

namespace {

// pull the first number (with optional sign/decimal) starting at or after `from`
std::optional<double> number_after(const std::string& s, std::size_t from) {
    for (std::size_t i = from; i < s.size(); ++i) {
        char c = s[i];
        if ((c >= '0' && c <= '9') || (c == '-' && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9')) {
            std::size_t end = i + 1;
            while (end < s.size() && ((s[end] >= '0' && s[end] <= '9') || s[end] == '.')) ++end;
            try {
                return std::stod(s.substr(i, end - i));
            } catch (const std::exception&) {
                return std::nullopt;
            }
        }
    }
    return std::nullopt;
}

std::optional<double> number_before_token(const std::string& s, const std::string& token) {
    std::size_t pos = s.find(token);
    if (pos == std::string::npos) return std::nullopt;
    // scan backwards over the number immediately preceding the token
    std::size_t end = pos;
    while (end > 0 && s[end - 1] == ' ') --end;
    std::size_t start = end;
    while (start > 0 && ((s[start - 1] >= '0' && s[start - 1] <= '9') || s[start - 1] == '.' || s[start - 1] == '-'))
        --start;
    if (start == end) return std::nullopt;
    try {
        return std::stod(s.substr(start, end - start));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

std::optional<JudgeView> judge_view(const std::string& caption_text) {
    if (auto obs = parse_caption(caption_text)) {
        JudgeView v;
        v.mean_q = (obs->q[0] + obs->q[1] + obs->q[2] + obs->q[3]) / 4.0;
        v.delay = obs->mean_delay;
        v.ttc_p10 = obs->ttc_p10;
        v.ttc_p50 = obs->ttc_p50;
        v.h_brake = obs->h_brake;
        v.rho_red = obs->rho_red;
        return v;
    }
    // free-prose extraction keyed on stable anchors of the unstructured renderer
    JudgeView v;
    auto p10 = number_before_token(caption_text, "s (p10)");
    auto p50 = number_before_token(caption_text, "s (p50)");
    if (!p10 || !p50) return std::nullopt;
    v.ttc_p10 = *p10;
    v.ttc_p50 = *p50;

    // queue sentence: "... approach ... N:a, E:b, S:c, W:d vehicles."
    std::size_t qpos = caption_text.find("by approach");
    if (qpos == std::string::npos) return std::nullopt;
    double qsum = 0.0;
    std::size_t cursor = qpos;
    for (int a = 0; a < 4; ++a) {
        std::string key = std::string(1, "NESW"[a]) + ":";
        std::size_t kp = caption_text.find(key, cursor);
        if (kp == std::string::npos) return std::nullopt;
        auto num = number_after(caption_text, kp + 2);
        if (!num) return std::nullopt;
        qsum += *num;
        cursor = kp + 2;
    }
    v.mean_q = qsum / 4.0;

    std::size_t dpos = caption_text.find("delay");
    if (dpos == std::string::npos) return std::nullopt;
    auto d = number_after(caption_text, dpos);
    if (!d) return std::nullopt;
    v.delay = *d;

    std::size_t bpos = caption_text.find("harsh brake");
    if (bpos == std::string::npos) return std::nullopt;
    auto hb = number_before_token(caption_text.substr(0, bpos + 12), " harsh brake");
    if (!hb) return std::nullopt;
    v.h_brake = *hb;

    std::size_t rpos = caption_text.find("risk flag is ");
    if (rpos == std::string::npos) return std::nullopt;
    auto rf = number_after(caption_text, rpos + 12);
    if (!rf) return std::nullopt;
    v.rho_red = static_cast<int>(*rf);
    return v;
}

} // namespace c2t
