// Minimal scoring endpoint for offline testing of the VLM client.
//
//   mock_vlm --port 8089 --reply "7.5" --fail-first 2
//
// Replies with HTTP 500 for the first --fail-first requests, then serves the
// configured reply body to every POST on /v1/score.

#include <atomic>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

int main(int argc, char** argv) {
    CLI::App app{"mock scoring endpoint"};
    int port = 8089;
    std::string reply = "8";
    int fail_first = 0;
    std::string require_token;
    app.add_option("--port", port, "listen port");
    app.add_option("--reply", reply, "response body for successful requests");
    app.add_option("--fail-first", fail_first, "number of initial requests answered with 500");
    app.add_option("--require-token", require_token, "reject requests lacking this bearer token");
    CLI11_PARSE(app, argc, argv);

    httplib::Server srv;
    std::atomic<int> served{0};
    srv.Post("/v1/score", [&](const httplib::Request& req, httplib::Response& res) {
        if (!require_token.empty() &&
            req.get_header_value("Authorization") != "Bearer " + require_token) {
            res.status = 401;
            res.set_content("missing or wrong token", "text/plain");
            return;
        }
        const int n = served.fetch_add(1);
        if (n < fail_first) {
            res.status = 500;
            res.set_content("injected failure", "text/plain");
            return;
        }
        res.set_content(reply, "text/plain");
    });
    srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });

    std::cout << "listening on port " << port << "\n";
    if (!srv.listen("0.0.0.0", port)) {
        std::cerr << "failed to bind port " << port << "\n";
        return 1;
    }
    return 0;
}
