// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>

#include "ceir/server.hpp"

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ceir-server: HTTP + WebSocket exploration service"};
    std::string listen = env_or("CEIR_LISTEN", "127.0.0.1:8080");
    ceir::ServiceConfig cfg;
    cfg.max_sessions = std::atoi(env_or("CEIR_MAX_SESSIONS", "16").c_str());
    cfg.map_size = std::atoi(env_or("CEIR_MAP_SIZE", "256").c_str());
    unsigned io_threads = 2;
    app.add_option("--listen", listen, "host:port (env CEIR_LISTEN); port 0 picks a free port");
    app.add_option("--max-sessions", cfg.max_sessions, "Concurrent sessions (env CEIR_MAX_SESSIONS)")
        ->check(CLI::Range(1, 100000));
    app.add_option("--map-size", cfg.map_size, "Speed-color map entries (env CEIR_MAP_SIZE)")->check(CLI::Range(2, 1 << 20));
    app.add_option("--render-workers", cfg.render_workers, "Render threads per frame (0 = all cores)");
    app.add_option("--io-threads", io_threads, "Network threads")->check(CLI::Range(1, 64));
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) {
        std::cerr << "error: --listen must be host:port\n";
        return 2;
    }

    // Block the stop signals here so every thread inherits the mask; main waits for them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    try {
        ceir::Service svc(cfg);
        ceir::Server server(svc, listen.substr(0, colon),
                            static_cast<unsigned short>(std::stoi(listen.substr(colon + 1))), io_threads);
        server.start();
        std::cout << "listening on " << listen.substr(0, colon) << ":" << server.port() << std::endl;
        int sig = 0;
        sigwait(&stop_signals, &sig);
        server.stop();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
