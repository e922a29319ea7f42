#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

// httplib drags in the libc resolver headers, whose `_res` macro breaks any
// later header using `_res` as an identifier (Eigen does).
#ifdef _res
#undef _res
#endif

#include "velab/video.hpp"

namespace velab {

// Scores a rendered result by asking a vision-language endpoint to grade it.
// The endpoint speaks a minimal JSON protocol:
//   POST <path>  {"model": ..., "prompt": ..., "images": [<base64 ppm>, ...]}
// and replies with a body whose first numeric token is the grade.

struct VlmConfig {
    std::string host = "127.0.0.1";
    int port = 8089;
    std::string path = "/v1/score";
    std::string model = "grader-v1";
    std::string token_env = "VLM_API_TOKEN";  // env var holding the bearer token
    int max_retries = 4;
    int initial_backoff_ms = 100;
    int frames_per_request = 4;
    int timeout_sec = 30;
};

struct VlmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string base64_encode(const std::string& in) {
    static const char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= in.size()) {
        const std::uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                                (static_cast<unsigned char>(in[i + 1]) << 8) |
                                static_cast<unsigned char>(in[i + 2]);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += tbl[v & 63];
        i += 3;
    }
    const std::size_t rem = in.size() - i;
    if (rem == 1) {
        const std::uint32_t v = static_cast<unsigned char>(in[i]) << 16;
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        const std::uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                                (static_cast<unsigned char>(in[i + 1]) << 8);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::string frame_to_ppm_bytes(const VideoTensor& v, int frame) {
    std::ostringstream os;
    os << "P6\n" << v.width << " " << v.height << "\n255\n";
    for (int y = 0; y < v.height; ++y)
        for (int x = 0; x < v.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double q = std::clamp(v.at(frame, y, x, c), 0.0, 1.0) * 255.0 + 0.5;
                os.put(static_cast<char>(static_cast<int>(q)));
            }
    return os.str();
}

// First numeric token in the body, e.g. "8.5/10, minor halo" -> 8.5.
inline std::optional<double> first_number(const std::string& body) {
    std::size_t i = 0;
    while (i < body.size()) {
        const char ch = body[i];
        if (std::isdigit(static_cast<unsigned char>(ch)) ||
            ((ch == '-' || ch == '+') && i + 1 < body.size() &&
             std::isdigit(static_cast<unsigned char>(body[i + 1])))) {
            std::size_t end = 0;
            try {
                const double v = std::stod(body.substr(i), &end);
                return v;
            } catch (...) {
            }
        }
        ++i;
    }
    return std::nullopt;
}

// Any occurrence of the secret in a log line is masked before emission.
inline std::string redact(std::string text, const std::string& secret) {
    if (secret.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(secret, pos)) != std::string::npos) {
        text.replace(pos, secret.size(), "[REDACTED]");
        pos += 10;
    }
    return text;
}

}  // namespace detail

class VlmClient {
public:
    using LogFn = std::function<void(const std::string&)>;

    explicit VlmClient(VlmConfig cfg, LogFn log = nullptr) : cfg_(std::move(cfg)), log_(std::move(log)) {
        if (const char* tok = std::getenv(cfg_.token_env.c_str())) token_ = tok;
    }

    // Picks frames_per_request frames at evenly spaced indices and sends one request.
    double score(const VideoTensor& video, const std::string& prompt) const {
        if (!video.valid()) throw VlmError("vlm: invalid video");
        const int n = std::min(cfg_.frames_per_request, video.frames);
        nlohmann::json images = nlohmann::json::array();
        for (int k = 0; k < n; ++k) {
            const int f = (n == 1) ? 0 : static_cast<int>(std::llround(k * double(video.frames - 1) / (n - 1)));
            images.push_back(detail::base64_encode(detail::frame_to_ppm_bytes(video, f)));
        }
        nlohmann::json req{{"model", cfg_.model}, {"prompt", prompt}, {"images", images}};
        return post_with_retry(req.dump());
    }

    double score_batch(const std::vector<VideoTensor>& videos, const std::string& prompt) const {
        if (videos.empty()) throw VlmError("vlm: empty batch");
        double total = 0.0;
        for (const auto& v : videos) total += score(v, prompt);
        return total / static_cast<double>(videos.size());
    }

    const std::string& token() const { return token_; }

private:
    void log(const std::string& msg) const {
        if (log_) log_(detail::redact(msg, token_));
    }

    double post_with_retry(const std::string& body) const {
        int backoff = cfg_.initial_backoff_ms;
        std::string last_err;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                log("vlm: retry " + std::to_string(attempt) + " after " + std::to_string(backoff) + "ms (" +
                    last_err + ")");
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
            }
            httplib::Client cli(cfg_.host, cfg_.port);
            cli.set_connection_timeout(cfg_.timeout_sec);
            cli.set_read_timeout(cfg_.timeout_sec);
            httplib::Headers headers;
            if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
            auto res = cli.Post(cfg_.path, headers, body, "application/json");
            if (!res) {
                last_err = "transport error";
                continue;
            }
            if (res->status >= 500) {
                last_err = "server status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw VlmError("vlm: request rejected with status " + std::to_string(res->status));
            const auto num = detail::first_number(res->body);
            if (!num) throw VlmError("vlm: no numeric grade in response body");
            log("vlm: scored " + std::to_string(*num));
            return *num;
        }
        throw VlmError("vlm: exhausted retries: " + last_err);
    }

    VlmConfig cfg_;
    LogFn log_;
    std::string token_;
};

}  // namespace velab
