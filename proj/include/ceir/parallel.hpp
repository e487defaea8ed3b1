// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "ceir/camera.hpp"

namespace ceir {

constexpr int kTileSize = 32;

inline unsigned default_worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs `fn(x0, y0, x1, y1)` over kTileSize tiles on a small worker pool. Tiles are disjoint,
/// so per-pixel writes need no synchronization.
template <class TileFn>
void parallel_tiles(const ImageDims& dims, TileFn&& fn, unsigned workers = 0) {
    const int tx = (dims.width + kTileSize - 1) / kTileSize;
    const int ty = (dims.height + kTileSize - 1) / kTileSize;
    const int tiles = tx * ty;
    if (workers == 0) workers = default_worker_count();
    workers = std::min<unsigned>(workers, static_cast<unsigned>(tiles));

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto run = [&] {
        try {
            for (int t = next++; t < tiles; t = next++) {
                const int x0 = (t % tx) * kTileSize, y0 = (t / tx) * kTileSize;
                fn(x0, y0, std::min(x0 + kTileSize, dims.width), std::min(y0 + kTileSize, dims.height));
            }
        } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
            next = tiles;
        }
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (unsigned i = 1; i < workers; ++i) pool.emplace_back(run);
        run();
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace ceir
