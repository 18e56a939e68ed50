#include "c2t/io.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace c2t::io {

std::string fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    std::string s(buf);
    if (s == "-0" || s.rfind("-0.", 0) == 0) {
        bool all_zero = true;
        for (char c : s)
            if (c != '-' && c != '0' && c != '.') all_zero = false;
        if (all_zero) s.erase(0, 1);
    }
    return s;
}

namespace {

json obs_to_json(const Observation& o) {
    return json{{"id", o.intersection_id},
                {"t", o.time},
                {"phase", phase_name(o.phase.phase)},
                {"stage", static_cast<int>(o.phase.stage)},
                {"elapsed", o.phase.elapsed},
                {"q", o.q},
                {"p", o.p},
                {"delay", o.mean_delay},
                {"thru", o.throughput},
                {"ttc_p10", o.ttc_p10},
                {"ttc_p50", o.ttc_p50},
                {"brakes", o.h_brake},
                {"red_risk", o.rho_red},
                {"near_v", o.v_near},
                {"near_a", o.a_near},
                {"near_d", o.d_stop}};
}

Observation obs_from_json(const json& j) {
    Observation o;
    o.intersection_id = j.at("id").get<int>();
    o.time = j.at("t").get<double>();
    auto ph = phase_from_name(j.at("phase").get<std::string>());
    if (!ph) throw IoError("observation: unknown phase name");
    o.phase.phase = *ph;
    o.phase.stage = static_cast<SignalStage>(j.at("stage").get<int>());
    o.phase.elapsed = j.at("elapsed").get<double>();
    o.q = j.at("q").get<std::array<double, 4>>();
    o.p = j.at("p").get<std::array<double, 4>>();
    o.mean_delay = j.at("delay").get<double>();
    o.throughput = j.at("thru").get<double>();
    o.ttc_p10 = j.at("ttc_p10").get<double>();
    o.ttc_p50 = j.at("ttc_p50").get<double>();
    o.h_brake = j.at("brakes").get<double>();
    o.rho_red = j.at("red_risk").get<int>();
    o.v_near = j.at("near_v").get<double>();
    o.a_near = j.at("near_a").get<double>();
    o.d_stop = j.at("near_d").get<double>();
    return o;
}

json caption_to_json(const Caption& c) {
    return json{{"text", c.text}, {"template_id", c.template_id}, {"schema_version", c.schema_version}};
}

Caption caption_from_json(const json& j) {
    Caption c;
    c.text = j.at("text").get<std::string>();
    c.template_id = j.at("template_id").get<std::uint64_t>();
    c.schema_version = j.at("schema_version").get<std::string>();
    return c;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    return f;
}

} // namespace

void save_pool(const std::string& path, const std::vector<PoolEntry>& pool) {
    auto f = open_out(path);
    for (const auto& e : pool)
        f << json{{"obs", obs_to_json(e.obs)}, {"caption", caption_to_json(e.caption)}}.dump() << '\n';
}

std::vector<PoolEntry> load_pool(const std::string& path) {
    auto f = open_in(path);
    std::vector<PoolEntry> pool;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        pool.push_back({obs_from_json(j.at("obs")), caption_from_json(j.at("caption"))});
    }
    return pool;
}

void save_dataset(const std::string& path, const PrefDataset& ds) {
    auto f = open_out(path);
    f << json{{"schema_version", ds.schema_version},
              {"sampled", ds.sampled},
              {"abstained", ds.abstained},
              {"parse_errors", ds.parse_errors},
              {"low_yield_warning", ds.low_yield_warning},
              {"pool_exhausted", ds.pool_exhausted}}
             .dump()
      << '\n';
    for (const auto& p : ds.pairs) {
        f << json{{"c1", caption_to_json(p.c1)},
                  {"c2", caption_to_json(p.c2)},
                  {"o1", obs_to_json(p.o1)},
                  {"o2", obs_to_json(p.o2)},
                  {"y", p.y},
                  {"w", p.w},
                  {"template_key", p.template_key},
                  {"judge_meta", p.judge_meta}}
                 .dump()
          << '\n';
    }
}

PrefDataset load_dataset(const std::string& path) {
    auto f = open_in(path);
    PrefDataset ds;
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty dataset file: " + path);
    json hdr = json::parse(line);
    ds.schema_version = hdr.at("schema_version").get<std::string>();
    if (ds.schema_version != kCaptionSchemaVersion)
        throw IoError("dataset schema version mismatch: " + ds.schema_version);
    ds.sampled = hdr.at("sampled").get<long>();
    ds.abstained = hdr.at("abstained").get<long>();
    ds.parse_errors = hdr.at("parse_errors").get<long>();
    ds.low_yield_warning = hdr.at("low_yield_warning").get<bool>();
    ds.pool_exhausted = hdr.at("pool_exhausted").get<bool>();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        LabeledPair p;
        p.c1 = caption_from_json(j.at("c1"));
        p.c2 = caption_from_json(j.at("c2"));
        p.o1 = obs_from_json(j.at("o1"));
        p.o2 = obs_from_json(j.at("o2"));
        p.y = j.at("y").get<int>();
        p.w = j.at("w").get<double>();
        p.template_key = j.at("template_key").get<std::uint64_t>();
        p.judge_meta = j.at("judge_meta").get<std::string>();
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

void save_reward_model(const std::string& path, const RewardModelParams& p) {
    json j{{"format", "c2t-reward-model-v1"},
           {"feature_mode", feature_kind_name(p.encoder.kind)},
           {"drop_risk", p.encoder.drop_risk},
           {"drop_congestion", p.encoder.drop_congestion},
           {"mu", p.encoder.mu},
           {"sd", p.encoder.sd},
           {"hidden", p.hidden},
           {"W1", p.W1},
           {"b1", p.b1},
           {"w2", p.w2},
           {"b2", p.b2},
           {"tau_bt", p.hyper.tau_bt},
           {"eta", p.hyper.eta},
           {"zeta", p.hyper.zeta}};
    open_out(path) << j.dump(2) << '\n';
}

RewardModelParams load_reward_model(const std::string& path) {
    json j = json::parse(open_in(path));
    if (j.value("format", "") != "c2t-reward-model-v1") throw IoError("not a reward model file: " + path);
    RewardModelParams p;
    p.encoder.kind = feature_kind_from_name(j.at("feature_mode").get<std::string>());
    p.encoder.drop_risk = j.at("drop_risk").get<bool>();
    p.encoder.drop_congestion = j.at("drop_congestion").get<bool>();
    p.encoder.mu = j.at("mu").get<std::array<double, 8>>();
    p.encoder.sd = j.at("sd").get<std::array<double, 8>>();
    p.hidden = j.at("hidden").get<int>();
    p.W1 = j.at("W1").get<std::vector<double>>();
    p.b1 = j.at("b1").get<std::vector<double>>();
    p.w2 = j.at("w2").get<std::vector<double>>();
    p.b2 = j.at("b2").get<double>();
    p.hyper.tau_bt = j.at("tau_bt").get<double>();
    p.hyper.eta = j.at("eta").get<double>();
    p.hyper.zeta = j.at("zeta").get<double>();
    return p;
}

namespace {

json mlp_to_json(const Mlp& m) {
    return json{{"in", m.in}, {"hidden", m.hidden}, {"out", m.out},
                {"W1", m.W1}, {"b1", m.b1}, {"W2", m.W2}, {"b2", m.b2}};
}

Mlp mlp_from_json(const json& j) {
    Mlp m;
    m.in = j.at("in").get<int>();
    m.hidden = j.at("hidden").get<int>();
    m.out = j.at("out").get<int>();
    m.W1 = j.at("W1").get<std::vector<double>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.W2 = j.at("W2").get<std::vector<double>>();
    m.b2 = j.at("b2").get<std::vector<double>>();
    return m;
}

} // namespace

void save_policy(const std::string& path, const PolicyParams& policy, const ValueParams& value) {
    json j{{"format", "c2t-policy-v1"}, {"policy", mlp_to_json(policy)}, {"value", mlp_to_json(value)}};
    open_out(path) << j.dump(2) << '\n';
}

void load_policy(const std::string& path, PolicyParams& policy, ValueParams& value) {
    json j = json::parse(open_in(path));
    if (j.value("format", "") != "c2t-policy-v1") throw IoError("not a policy file: " + path);
    policy = mlp_from_json(j.at("policy"));
    value = mlp_from_json(j.at("value"));
}

namespace {

json run_config_to_json(const RunConfig& c) {
    json sim{{"grid_rows", c.sim.grid_rows},
             {"grid_cols", c.sim.grid_cols},
             {"link_length", c.sim.link_length},
             {"lanes_per_movement", c.sim.lanes_per_movement},
             {"green_s", c.sim.green_s},
             {"yellow_s", c.sim.yellow_s},
             {"allred_s", c.sim.allred_s},
             {"arrival_rate_per_entry", c.sim.arrival_rate_per_entry},
             {"horizon_s", c.sim.horizon_s}};
    if (c.sim.surge)
        sim["surge"] = {{"factor", c.sim.surge->factor},
                        {"start_s", c.sim.surge->start_s},
                        {"ramp_s", c.sim.surge->ramp_s}};
    if (c.sim.diurnal) {
        json pts = json::array();
        for (auto& [t, m] : c.sim.diurnal->points) pts.push_back({t, m});
        sim["diurnal"] = pts;
    }
    json pairing{{"alpha", c.pairing.alpha},
                 {"beta", c.pairing.beta},
                 {"gamma_pair", c.pairing.gamma_pair},
                 {"delta1", c.pairing.delta1},
                 {"delta2", c.pairing.delta2}};
    json shaping{{"tau_ttc", c.shaping.tau_ttc},
                 {"a_max_mask", c.shaping.a_max_mask},
                 {"kappa", c.shaping.kappa},
                 {"lambda_max", c.shaping.lambda_max},
                 {"warmup_iters", c.shaping.warmup_iters},
                 {"clip_c", c.shaping.clip_c},
                 {"use_intrinsic", c.shaping.use_intrinsic},
                 {"use_mask", c.shaping.use_mask},
                 {"use_norm", c.shaping.use_norm},
                 {"use_schedule", c.shaping.use_schedule}};
    json ppo{{"lr", c.ppo.lr},
             {"buffer", c.ppo.buffer},
             {"sample", c.ppo.sample},
             {"hidden", c.ppo.hidden},
             {"clip", c.ppo.clip},
             {"batch", c.ppo.batch},
             {"minibatches", c.ppo.minibatches},
             {"entropy_coef", c.ppo.entropy_coef},
             {"gae_lambda", c.ppo.gae_lambda},
             {"gamma_discount", c.ppo.gamma_discount},
             {"iterations", c.ppo.iterations},
             {"episodes", c.ppo.episodes},
             {"horizon", c.ppo.horizon},
             {"lambda_delay", c.ppo.lambda_delay}};
    return json{{"sim", sim},
                {"pairing", pairing},
                {"shaping", shaping},
                {"ppo", ppo},
                {"feature_mode", c.feature_mode},
                {"drop_risk", c.drop_risk},
                {"drop_congestion", c.drop_congestion},
                {"judge", c.judge},
                {"pool_size", c.pool_size},
                {"pair_budget", c.pair_budget},
                {"rm_hidden", c.rm_hidden},
                {"rm_epochs", c.rm_epochs}};
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    json j = json::parse(open_in(path));
    RunConfig c;
    if (j.contains("sim")) {
        const json& s = j["sim"];
        get_if(s, "grid_rows", c.sim.grid_rows);
        get_if(s, "grid_cols", c.sim.grid_cols);
        get_if(s, "link_length", c.sim.link_length);
        get_if(s, "lanes_per_movement", c.sim.lanes_per_movement);
        get_if(s, "green_s", c.sim.green_s);
        get_if(s, "yellow_s", c.sim.yellow_s);
        get_if(s, "allred_s", c.sim.allred_s);
        get_if(s, "arrival_rate_per_entry", c.sim.arrival_rate_per_entry);
        get_if(s, "horizon_s", c.sim.horizon_s);
        if (s.contains("surge")) {
            SurgeProfile sp;
            get_if(s["surge"], "factor", sp.factor);
            get_if(s["surge"], "start_s", sp.start_s);
            get_if(s["surge"], "ramp_s", sp.ramp_s);
            c.sim.surge = sp;
        }
        if (s.contains("diurnal")) {
            DiurnalProfile dp;
            for (const auto& pt : s["diurnal"])
                dp.points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
            c.sim.diurnal = dp;
        }
    }
    if (j.contains("pairing")) {
        const json& s = j["pairing"];
        get_if(s, "alpha", c.pairing.alpha);
        get_if(s, "beta", c.pairing.beta);
        get_if(s, "gamma_pair", c.pairing.gamma_pair);
        get_if(s, "delta1", c.pairing.delta1);
        get_if(s, "delta2", c.pairing.delta2);
    }
    if (j.contains("shaping")) {
        const json& s = j["shaping"];
        get_if(s, "tau_ttc", c.shaping.tau_ttc);
        get_if(s, "a_max_mask", c.shaping.a_max_mask);
        get_if(s, "kappa", c.shaping.kappa);
        get_if(s, "lambda_max", c.shaping.lambda_max);
        get_if(s, "warmup_iters", c.shaping.warmup_iters);
        get_if(s, "clip_c", c.shaping.clip_c);
        get_if(s, "use_intrinsic", c.shaping.use_intrinsic);
        get_if(s, "use_mask", c.shaping.use_mask);
        get_if(s, "use_norm", c.shaping.use_norm);
        get_if(s, "use_schedule", c.shaping.use_schedule);
    }
    if (j.contains("ppo")) {
        const json& s = j["ppo"];
        get_if(s, "lr", c.ppo.lr);
        get_if(s, "buffer", c.ppo.buffer);
        get_if(s, "sample", c.ppo.sample);
        get_if(s, "hidden", c.ppo.hidden);
        get_if(s, "clip", c.ppo.clip);
        get_if(s, "batch", c.ppo.batch);
        get_if(s, "minibatches", c.ppo.minibatches);
        get_if(s, "entropy_coef", c.ppo.entropy_coef);
        get_if(s, "gae_lambda", c.ppo.gae_lambda);
        get_if(s, "gamma_discount", c.ppo.gamma_discount);
        get_if(s, "iterations", c.ppo.iterations);
        get_if(s, "episodes", c.ppo.episodes);
        get_if(s, "horizon", c.ppo.horizon);
        get_if(s, "lambda_delay", c.ppo.lambda_delay);
    }
    get_if(j, "feature_mode", c.feature_mode);
    get_if(j, "drop_risk", c.drop_risk);
    get_if(j, "drop_congestion", c.drop_congestion);
    get_if(j, "judge", c.judge);
    get_if(j, "pool_size", c.pool_size);
    get_if(j, "pair_budget", c.pair_budget);
    get_if(j, "rm_hidden", c.rm_hidden);
    get_if(j, "rm_epochs", c.rm_epochs);
    return c;
}

std::string run_config_json(const RunConfig& cfg) { return run_config_to_json(cfg).dump(); }

std::string config_hash(const RunConfig& cfg) {
    std::string s = run_config_json(cfg);
    std::uint64_t h = fnv1a(s.data(), s.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_training_curve_csv(const std::string& path, const std::vector<IterationStats>& curve) {
    auto f = open_out(path);
    f << "iter,att,aql,awt,throughput,ttc_p10,ttc_p25,brakes_per_km,oscillation,mask_rate,"
         "mean_r1,mean_r2,mean_r3\n";
    for (const auto& it : curve) {
        const auto& m = it.metrics;
        f << it.iter << ',' << (m.att ? fixed(*m.att) : "") << ',' << fixed(m.aql) << ','
          << (m.awt ? fixed(*m.awt) : "") << ',' << fixed(m.throughput) << ',' << fixed(m.ttc_p10)
          << ',' << fixed(m.ttc_p25) << ',' << fixed(m.brakes_per_km) << ',' << fixed(m.oscillation)
          << ',' << fixed(it.mask_rate) << ',' << fixed(it.mean_r1) << ',' << fixed(it.mean_r2)
          << ',' << fixed(it.mean_r3) << '\n';
    }
}

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, EpisodeMetrics>>& rows) {
    auto f = open_out(path);
    f << "name,att,aql,awt,throughput,ttc_p10,ttc_p25,brakes_per_km,oscillation\n";
    for (const auto& [name, m] : rows) {
        f << name << ',' << (m.att ? fixed(*m.att) : "") << ',' << fixed(m.aql) << ','
          << (m.awt ? fixed(*m.awt) : "") << ',' << fixed(m.throughput) << ',' << fixed(m.ttc_p10)
          << ',' << fixed(m.ttc_p25) << ',' << fixed(m.brakes_per_km) << ',' << fixed(m.oscillation)
          << '\n';
    }
}

void write_text(const std::string& path, const std::string& content) { open_out(path) << content; }

std::string read_text(const std::string& path) {
    auto f = open_in(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace c2t::io
