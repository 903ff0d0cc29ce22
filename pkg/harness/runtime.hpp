// Minimal vertex-centric runtime: graph loading, none-aware scalar helpers,
// and the striped-lock slot machinery the generated kernels build on.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

// Canonical in-kernel encoding of the none value.  Slot encodings use
// per-field sentinels chosen by the reduction direction; kernels decode to
// this word, compute, and re-encode.
static const int64_t NONEVAL = INT64_MIN + 1;

static inline bool istrue(int64_t x) { return x != 0 && x != NONEVAL; }

// min, max, + and - treat the none value as an identity; this mirrors the
// abstract engine's filtering semantics.
static inline int64_t kmin(int64_t a, int64_t b) {
    if (a == NONEVAL) return b;
    if (b == NONEVAL) return a;
    return a < b ? a : b;
}
static inline int64_t kmax(int64_t a, int64_t b) {
    if (a == NONEVAL) return b;
    if (b == NONEVAL) return a;
    return a > b ? a : b;
}
static inline int64_t kadd(int64_t a, int64_t b) {
    if (a == NONEVAL) return b;
    if (b == NONEVAL) return a;
    return a + b;
}
static inline int64_t ksub(int64_t a, int64_t b) {
    if (b == NONEVAL) return a;
    if (a == NONEVAL) return -b;
    return a - b;
}
static inline int64_t kneg(int64_t a) { return a == NONEVAL ? NONEVAL : -a; }

struct EdgeRef {
    int64_t src;
    int64_t dst;
    int64_t weight;
    int64_t capacity;
};

// Reduction slots: one word per value field.  Single-field kernels reduce
// with a true compare-and-swap; multi-field kernels serialize through a
// striped lock (a compound compare-and-swap is not portable).
static const int MAX_FIELDS = 6;

struct VSlot {
    std::atomic<int64_t> w[MAX_FIELDS];
};

static const int STRIPES = 64;
static std::mutex g_stripes[STRIPES];

static inline std::mutex& stripe_for(const VSlot* s) {
    return g_stripes[(reinterpret_cast<uintptr_t>(s) >> 6) % STRIPES];
}

struct Graph {
    int64_t n = 0;
    bool directed = true;
    std::vector<EdgeRef> edges;
    // in-edges sorted by source, out-edges sorted by destination; the order
    // fixes the fold order and must match the reference engine
    std::vector<std::vector<EdgeRef>> ins;
    std::vector<std::vector<EdgeRef>> outs;

    void finish() {
        ins.assign(n, {});
        outs.assign(n, {});
        for (const auto& e : edges) {
            ins[e.dst].push_back(e);
            outs[e.src].push_back(e);
        }
        for (auto& v : ins)
            std::stable_sort(v.begin(), v.end(),
                             [](const EdgeRef& a, const EdgeRef& b) { return a.src < b.src; });
        for (auto& v : outs)
            std::stable_sort(v.begin(), v.end(),
                             [](const EdgeRef& a, const EdgeRef& b) { return a.dst < b.dst; });
    }
};

inline bool load_graph(const std::string& path, Graph& g) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open graph file " << path << "\n";
        return false;
    }
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;
        if (first == "vertices") {
            std::string mode;
            if (!(ss >> g.n >> mode)) return false;
            g.directed = (mode == "directed");
            have_header = true;
            continue;
        }
        if (!have_header) {
            std::cerr << "edge before header\n";
            return false;
        }
        EdgeRef e{};
        e.src = std::strtoll(first.c_str(), nullptr, 10);
        if (!(ss >> e.dst >> e.weight >> e.capacity)) return false;
        g.edges.push_back(e);
        if (!g.directed) g.edges.push_back({e.dst, e.src, e.weight, e.capacity});
    }
    g.finish();
    return true;
}
