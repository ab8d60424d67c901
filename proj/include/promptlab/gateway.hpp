#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace promptlab {

struct ModelRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_tokens = 2048;
};

enum class BackendTag { live, simulated, cache, scripted };

std::string to_string(BackendTag tag);

struct ModelResponse {
    std::string text;
    BackendTag backend_tag = BackendTag::live;
    std::chrono::milliseconds latency{0};
};

struct BackendConfig {
    std::string endpoint_url;
    std::string model_name;
    std::chrono::seconds timeout{60};
    int retry_budget = 2;
    std::optional<std::filesystem::path> cache_dir;
    std::string api_key;  // sent as a Bearer token when non-empty
};

// Single-turn completion. Implementations must be safe for concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ModelResponse complete(const ModelRequest& request) = 0;
};

// 128-bit request fingerprint over (system, user, temperature, max_tokens,
// model). Stable across runs and processes; used for cache filenames.
std::string request_hash(const ModelRequest& request, const std::string& model_name);

// POST {endpoint}/v1/chat/completions with retry + exponential backoff.
// Throws TransportError / ProtocolError / ResponseParseError.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig config);
    ModelResponse complete(const ModelRequest& request) override;

private:
    BackendConfig config_;
};

// Content-addressed on-disk cache in front of any backend. Hits are
// bit-identical to the original response text; writes are serialized.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path cache_dir,
                   std::string model_name);
    ModelResponse complete(const ModelRequest& request) override;

    std::uint64_t inner_calls() const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

std::shared_ptr<Backend> make_live_backend(const BackendConfig& config);

}  // namespace promptlab
