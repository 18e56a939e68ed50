#include "doctest.h"

#include "c2t/io.hpp"
#include "c2t/pipeline.hpp"

#include "httplib.h"
#include "json.hpp"

#include <filesystem>
#include <thread>

namespace fs = std::filesystem;
using namespace c2t;

namespace {

fs::path tmp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("c2t_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<PoolEntry> tiny_pool(int n) {
    SimConfig env;
    env.grid_rows = 1;
    env.grid_cols = 1;
    env.arrival_rate_per_entry = 0.12;
    env.horizon_s = 120;
    return collect_pool(env, n, CaptionMode::structured, 3);
}

} // namespace

TEST_CASE("pool round-trips through JSONL") {
    auto dir = tmp_dir("pool");
    auto pool = tiny_pool(40);
    std::string path = (dir / "pool.jsonl").string();
    io::save_pool(path, pool);
    auto loaded = io::load_pool(path);
    REQUIRE(loaded.size() == pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        CHECK(loaded[i].caption.text == pool[i].caption.text);
        CHECK(loaded[i].obs.q == pool[i].obs.q);
        CHECK(loaded[i].obs.ttc_p10 == pool[i].obs.ttc_p10);
        CHECK(render_caption(loaded[i].obs).text == pool[i].caption.text);
    }
}

TEST_CASE("preference dataset round-trips byte-for-byte") {
    auto dir = tmp_dir("dataset");
    auto pool = tiny_pool(60);
    auto stats = PoolStats::from_pool(pool);
    JudgeProfile prof;
    SyntheticJudge judge(prof, stats);
    Rng rng(2);
    PairingConfig cfg;
    auto ds = build_pref_dataset(pool, cfg, stats, judge, 80, rng);
    REQUIRE(!ds.pairs.empty());
    std::string p1 = (dir / "ds1.jsonl").string();
    std::string p2 = (dir / "ds2.jsonl").string();
    io::save_dataset(p1, ds);
    io::save_dataset(p2, io::load_dataset(p1));
    CHECK(io::read_text(p1) == io::read_text(p2));
    auto back = io::load_dataset(p1);
    CHECK(back.pairs.size() == ds.pairs.size());
    CHECK(back.sampled == ds.sampled);
    CHECK(back.abstained == ds.abstained);
}

TEST_CASE("reward model and policy files round-trip") {
    auto dir = tmp_dir("model");
    auto pool = tiny_pool(30);
    EncoderSpec spec = EncoderSpec::fit(FeatureKind::structured_fusion, pool);
    RewardModelParams p = RewardModelParams::init(spec, 8, ScorerHyper{}, 5);
    std::string mp = (dir / "m.json").string();
    io::save_reward_model(mp, p);
    auto q = io::load_reward_model(mp);
    CHECK(q.W1 == p.W1);
    CHECK(q.w2 == p.w2);
    CHECK(q.b2 == p.b2);
    CHECK(q.encoder.kind == p.encoder.kind);
    auto f = encode(pool[0].obs, pool[0].caption.text, spec);
    CHECK(score(q, f) == score(p, f));

    Mlp pol = Mlp::init(kPolicyFeatureDim, 20, 4, 1);
    Mlp val = Mlp::init(kPolicyFeatureDim, 20, 1, 2);
    std::string pp = (dir / "p.json").string();
    io::save_policy(pp, pol, val);
    Mlp pol2, val2;
    io::load_policy(pp, pol2, val2);
    CHECK(pol2.flatten() == pol.flatten());
    CHECK(val2.flatten() == val.flatten());
}

TEST_CASE("config hash is stable and sensitive") {
    io::RunConfig a, b;
    CHECK(io::config_hash(a) == io::config_hash(b));
    b.pair_budget = 999;
    CHECK(io::config_hash(a) != io::config_hash(b));
    io::RunConfig c = a;
    c.shaping.lambda_max = 0.7;
    CHECK(io::config_hash(a) != io::config_hash(c));
}

TEST_CASE("run config loads from JSON with defaults for missing keys") {
    auto dir = tmp_dir("cfg");
    std::string path = (dir / "run.json").string();
    io::write_text(path, R"({
      "sim": {"grid_rows": 3, "arrival_rate_per_entry": 0.05,
              "surge": {"factor": 4.0, "start_s": 50.0, "ramp_s": 100.0}},
      "shaping": {"lambda_max": 0.7, "use_norm": false},
      "ppo": {"iterations": 7},
      "judge": "noisy:0.05",
      "pair_budget": 123
    })");
    auto cfg = io::load_run_config(path);
    CHECK(cfg.sim.grid_rows == 3);
    CHECK(cfg.sim.grid_cols == 2); // default preserved
    CHECK(cfg.sim.arrival_rate_per_entry == doctest::Approx(0.05));
    REQUIRE(cfg.sim.surge.has_value());
    CHECK(cfg.sim.surge->factor == doctest::Approx(4.0));
    CHECK(cfg.shaping.lambda_max == doctest::Approx(0.7));
    CHECK(!cfg.shaping.use_norm);
    CHECK(cfg.ppo.iterations == 7);
    CHECK(cfg.judge == "noisy:0.05");
    CHECK(cfg.pair_budget == 123);
}

TEST_CASE("fixed formatting is byte-stable") {
    CHECK(io::fixed(1.5) == "1.500000");
    CHECK(io::fixed(1.25, 2) == "1.25");
    CHECK(io::fixed(-0.0000001, 2) == "0.00"); // no negative zero
}

TEST_CASE("http judge round-trips through a local server with caching") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        auto j = nlohmann::json::parse(req.body);
        REQUIRE(j.contains("prompt_template_id"));
        std::string c1 = j.at("c1").get<std::string>();
        std::string c2 = j.at("c2").get<std::string>();
        std::string verdict = c1.size() > c2.size() ? "1" : (c2.size() > c1.size() ? "2" : "abstain");
        res.set_content(nlohmann::json{{"verdict", verdict}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto dir = tmp_dir("http");
    {
        HttpJudge judge("127.0.0.1", port, "tpl-1", (dir / "cache").string());
        auto v = judge.judge("aaaa", "bb");
        REQUIRE(v.has_value());
        CHECK(*v == Verdict::first);
        auto v2 = judge.judge("bb", "aaaa");
        REQUIRE(v2.has_value());
        CHECK(*v2 == Verdict::second);
        auto v3 = judge.judge("same", "slen");
        REQUIRE(v3.has_value());
        CHECK(*v3 == Verdict::abstain);
        int before = hits.load();
        auto v4 = judge.judge("aaaa", "bb"); // served from the on-disk cache
        REQUIRE(v4.has_value());
        CHECK(*v4 == Verdict::first);
        CHECK(hits.load() == before);
    }
    server.stop();
    th.join();
}

TEST_CASE("sign test p-values") {
    // 8 of 10 successes: (C(10,8)+C(10,9)+C(10,10)) / 2^10 = 56/1024
    CHECK(sign_test_p(8, 10) == doctest::Approx(56.0 / 1024.0).epsilon(1e-9));
    CHECK(sign_test_p(0, 10) == doctest::Approx(1.0));
    CHECK(sign_test_p(10, 10) == doctest::Approx(1.0 / 1024.0).epsilon(1e-9));
    CHECK(sign_test_p(5, 5) == doctest::Approx(1.0 / 32.0).epsilon(1e-9));
}

TEST_CASE("ablation matrices expand to the documented cardinalities") {
    io::RunConfig base;
    CHECK(ablation_variants("A1", base).size() == 4);
    CHECK(ablation_variants("A2", base).size() == 3);
    CHECK(ablation_variants("A3", base).size() == 3);
    CHECK(ablation_variants("B1", base).size() == 3);
    CHECK(ablation_variants("B2", base).size() == 3);
    CHECK(ablation_variants("C2", base).size() == 3);
    CHECK(ablation_variants("D1", base).size() == 6);
    CHECK(ablation_variants("D2", base).size() == 9);
    CHECK_THROWS_AS(ablation_variants("Z9", base), ConfigError);
    // A1 external-only is the plain pressure baseline: everything off
    auto a1 = ablation_variants("A1", base);
    CHECK(!a1[0].second.shaping.use_intrinsic);
    CHECK(!a1[0].second.shaping.use_mask);
    CHECK(!a1[0].second.shaping.use_norm);
    // no_intrinsic keeps normalization so the pair isolates the intrinsic
    CHECK(!a1[1].second.shaping.use_intrinsic);
    CHECK(a1[1].second.shaping.use_norm);
}

TEST_CASE("pipeline caches stage outputs and reuses them") {
    auto dir = tmp_dir("pipeline");
    io::RunConfig cfg;
    cfg.sim.grid_rows = 1;
    cfg.sim.grid_cols = 1;
    cfg.sim.horizon_s = 120;
    cfg.sim.arrival_rate_per_entry = 0.12;
    cfg.pool_size = 150;
    cfg.pair_budget = 60;
    cfg.rm_hidden = 8;
    cfg.rm_epochs = 5;
    cfg.ppo.iterations = 2;
    cfg.ppo.episodes = 1;
    cfg.ppo.horizon = 120;
    cfg.ppo.sample = 64;
    cfg.ppo.minibatches = 2;
    cfg.ppo.batch = 16;
    cfg.shaping.warmup_iters = 2;

    auto first = run_pipeline(cfg, 11, dir.string());
    CHECK(first.cache_hits == 0);
    CHECK(fs::exists(first.pool_path));
    CHECK(fs::exists(first.dataset_path));
    CHECK(fs::exists(first.model_path));
    CHECK(fs::exists(first.policy_path));
    CHECK(fs::exists(first.curve_path));

    auto second = run_pipeline(cfg, 11, dir.string());
    CHECK(second.cache_hits == 4); // pool, dataset, model, policy all reused
    CHECK(second.eval.throughput == first.eval.throughput);
    CHECK(second.eval.ttc_p10 == first.eval.ttc_p10);

    // external-only skips stages 1-3 entirely
    io::RunConfig ext = cfg;
    ext.shaping.use_intrinsic = false;
    ext.shaping.use_mask = false;
    auto third = run_pipeline(ext, 12, dir.string());
    CHECK(third.pool_path.empty());
    CHECK(third.dataset_path.empty());
    CHECK(third.model_path.empty());
    CHECK(fs::exists(third.policy_path));
}

TEST_CASE("identical pipeline runs produce byte-identical curve CSVs") {
    auto d1 = tmp_dir("det1");
    auto d2 = tmp_dir("det2");
    io::RunConfig cfg;
    cfg.sim.grid_rows = 1;
    cfg.sim.grid_cols = 1;
    cfg.sim.horizon_s = 120;
    cfg.pool_size = 120;
    cfg.pair_budget = 50;
    cfg.rm_hidden = 8;
    cfg.rm_epochs = 4;
    cfg.ppo.iterations = 2;
    cfg.ppo.episodes = 1;
    cfg.ppo.horizon = 120;
    cfg.ppo.sample = 64;
    cfg.ppo.minibatches = 2;
    cfg.ppo.batch = 16;
    cfg.shaping.warmup_iters = 2;
    auto a = run_pipeline(cfg, 21, d1.string());
    auto b = run_pipeline(cfg, 21, d2.string());
    CHECK(io::read_text(a.curve_path) == io::read_text(b.curve_path));
    CHECK(io::read_text(a.eval_path) == io::read_text(b.eval_path));
}
