#include "c2t/judge.hpp"

#include "c2t/rng.hpp"

#include <filesystem>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

namespace c2t {

namespace fs = std::filesystem;
using nlohmann::json;

struct HttpJudge::Impl {
    std::string host;
    int port = 0;
    std::string prompt_template_id;
    fs::path cache_dir;
    httplib::Client client;

    Impl(std::string h, int p, std::string tpl, std::string cache)
        : host(std::move(h)), port(p), prompt_template_id(std::move(tpl)),
          cache_dir(cache), client(host, port) {
        client.set_read_timeout(30, 0);
        if (!cache_dir.empty()) fs::create_directories(cache_dir);
    }

    fs::path cache_path(const std::string& c1, const std::string& c2) const {
        std::uint64_t h = fnv1a(prompt_template_id.data(), prompt_template_id.size());
        h = fnv1a(c1.data(), c1.size(), h);
        h = fnv1a(c2.data(), c2.size(), h);
        char name[32];
        std::snprintf(name, sizeof(name), "%016llx.json", static_cast<unsigned long long>(h));
        return cache_dir / name;
    }
};

HttpJudge::HttpJudge(std::string host, int port, std::string prompt_template_id, std::string cache_dir)
    : impl_(std::make_unique<Impl>(std::move(host), port, std::move(prompt_template_id),
                                   std::move(cache_dir))) {}

HttpJudge::~HttpJudge() = default;

std::optional<Verdict> HttpJudge::judge(const std::string& c1, const std::string& c2) {
    fs::path cached;
    if (!impl_->cache_dir.empty()) {
        cached = impl_->cache_path(c1, c2);
        if (fs::exists(cached)) {
            std::ifstream in(cached);
            json j = json::parse(in, nullptr, false);
            if (!j.is_discarded() && j.contains("verdict")) {
                std::string v = j["verdict"];
                if (v == "1") return Verdict::first;
                if (v == "2") return Verdict::second;
                return Verdict::abstain;
            }
        }
    }
    json req{{"prompt_template_id", impl_->prompt_template_id}, {"c1", c1}, {"c2", c2}};
    auto res = impl_->client.Post("/judge", req.dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("verdict")) return std::nullopt;
    std::string v = j["verdict"];
    if (!cached.empty()) {
        std::ofstream out(cached);
        out << json{{"verdict", v}}.dump() << "\n";
    }
    if (v == "1") return Verdict::first;
    if (v == "2") return Verdict::second;
    return Verdict::abstain;
}

std::string HttpJudge::id() const {
    return "http:" + impl_->host + ":" + std::to_string(impl_->port) + "/" + impl_->prompt_template_id;
}

} // namespace c2t
