#include "promptlab/gateway.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "promptlab/errors.hpp"

namespace promptlab {

std::string to_string(BackendTag tag) {
    switch (tag) {
        case BackendTag::live: return "live";
        case BackendTag::simulated: return "simulated";
        case BackendTag::cache: return "cache";
        case BackendTag::scripted: return "scripted";
    }
    return "unknown";
}

namespace {

std::uint64_t fnv1a(const std::string& data, std::uint64_t h) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string canonical_request(const ModelRequest& r, const std::string& model_name) {
    char temp[64];
    std::snprintf(temp, sizeof(temp), "%.17g", r.temperature);
    std::ostringstream out;
    // \x1f separators prevent field-boundary ambiguity.
    out << model_name << '\x1f' << r.system_text << '\x1f' << r.user_text << '\x1f' << temp
        << '\x1f' << r.max_tokens;
    return out.str();
}

}  // namespace

std::string request_hash(const ModelRequest& request, const std::string& model_name) {
    const std::string canon = canonical_request(request, model_name);
    const std::uint64_t h1 = fnv1a(canon, 0xcbf29ce484222325ULL);
    const std::uint64_t h2 = fnv1a(canon, 0x84222325cbf29ce4ULL);
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(h1),
                  static_cast<unsigned long long>(h2));
    return buf;
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint_url.empty()) throw ConfigError("backend endpoint_url is empty");
    if (config_.retry_budget < 0) throw ConfigError("retry_budget must be >= 0");
}

ModelResponse HttpBackend::complete(const ModelRequest& request) {
    nlohmann::ordered_json body{
        {"model", config_.model_name},
        {"messages",
         nlohmann::ordered_json::array({{{"role", "system"}, {"content", request.system_text}},
                                        {{"role", "user"}, {"content", request.user_text}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens}};
    const std::string payload = body.dump();

    const auto start = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retry_budget; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(250) * (1 << (attempt - 1)));
        }
        httplib::Client client(config_.endpoint_url);
        client.set_connection_timeout(config_.timeout.count(), 0);
        client.set_read_timeout(config_.timeout.count(), 0);
        httplib::Headers headers;
        if (!config_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        }
        auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;  // transient transport failure, retry
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;  // server-side, retry
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProtocolError(res->status, "model endpoint returned HTTP " +
                                                 std::to_string(res->status) + ": " + res->body);
        }
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ResponseParseError(std::string("response is not valid JSON: ") + e.what());
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty() || !parsed["choices"][0].contains("message") ||
            !parsed["choices"][0]["message"].contains("content")) {
            throw ResponseParseError("response missing choices[0].message.content");
        }
        ModelResponse response;
        response.text = parsed["choices"][0]["message"]["content"].get<std::string>();
        response.backend_tag = BackendTag::live;
        response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        return response;
    }
    throw TransportError("model endpoint unreachable after " +
                         std::to_string(config_.retry_budget + 1) + " attempts (" + last_error +
                         "): " + config_.endpoint_url);
}

struct CachingBackend::Impl {
    std::shared_ptr<Backend> inner;
    std::filesystem::path cache_dir;
    std::string model_name;
    std::mutex write_mutex;
    std::atomic<std::uint64_t> inner_calls{0};
};

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path cache_dir,
                               std::string model_name)
    : impl_(std::make_shared<Impl>()) {
    impl_->inner = std::move(inner);
    impl_->cache_dir = std::move(cache_dir);
    impl_->model_name = std::move(model_name);
    std::filesystem::create_directories(impl_->cache_dir);
}

ModelResponse CachingBackend::complete(const ModelRequest& request) {
    const std::string key = request_hash(request, impl_->model_name);
    const auto path = impl_->cache_dir / (key + ".json");
    {
        std::ifstream in(path);
        if (in) {
            nlohmann::json entry = nlohmann::json::parse(in);
            ModelResponse response;
            response.text = entry.at("response").at("text").get<std::string>();
            response.backend_tag = BackendTag::cache;
            return response;
        }
    }
    ModelResponse response = impl_->inner->complete(request);
    impl_->inner_calls.fetch_add(1);
    nlohmann::ordered_json entry{
        {"request",
         {{"system_text", request.system_text},
          {"user_text", request.user_text},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens},
          {"model", impl_->model_name}}},
        {"response", {{"text", response.text}, {"backend_tag", to_string(response.backend_tag)}}}};
    {
        std::lock_guard<std::mutex> lock(impl_->write_mutex);
        // Write-then-rename so a concurrent reader never sees a torn file.
        const auto tmp = impl_->cache_dir / (key + ".tmp");
        std::ofstream out(tmp);
        out << entry.dump(2) << "\n";
        out.close();
        std::filesystem::rename(tmp, path);
    }
    return response;
}

std::uint64_t CachingBackend::inner_calls() const { return impl_->inner_calls.load(); }

std::shared_ptr<Backend> make_live_backend(const BackendConfig& config) {
    auto http = std::make_shared<HttpBackend>(config);
    if (config.cache_dir) {
        return std::make_shared<CachingBackend>(http, *config.cache_dir, config.model_name);
    }
    return http;
}

}  // namespace promptlab
