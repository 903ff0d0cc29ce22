// Vertex-centric driver: loads an edge list, initializes through the
// generated kernel, iterates push or pull rounds to a fixpoint, and writes
// `vertex value` lines compatible with the reference engine's dump.
//
// Build with -DKERNEL_HEADER='"<emitted kernel>.hpp"'.

#include "runtime.hpp"

#ifndef KERNEL_HEADER
#error "define KERNEL_HEADER to the emitted kernel file"
#endif
#include KERNEL_HEADER

#include <cstring>
#include <thread>

struct Options {
    std::string graph;
    std::string mode = "pull";
    std::string out;
    std::vector<int64_t> sources;
    int max_iters = 10000;
    int threads = 1;
    bool force = false;
};

static bool parse_args(int argc, char** argv, Options& o) {
    for (int i = 1; i < argc; i++) {
        std::string a = argv[i];
        auto need = [&](const char* what) -> const char* {
            if (i + 1 >= argc) {
                std::cerr << "missing value for " << what << "\n";
                return nullptr;
            }
            return argv[++i];
        };
        if (a == "--mode") {
            const char* v = need("--mode");
            if (!v) return false;
            o.mode = v;
        } else if (a == "--out") {
            const char* v = need("--out");
            if (!v) return false;
            o.out = v;
        } else if (a == "--max-iters") {
            const char* v = need("--max-iters");
            if (!v) return false;
            o.max_iters = std::atoi(v);
        } else if (a == "--threads") {
            const char* v = need("--threads");
            if (!v) return false;
            o.threads = std::atoi(v);
        } else if (a == "--sources") {
            const char* v = need("--sources");
            if (!v) return false;
            std::stringstream ss(v);
            std::string part;
            while (std::getline(ss, part, ','))
                o.sources.push_back(std::strtoll(part.c_str(), nullptr, 10));
        } else if (a == "--force") {
            o.force = true;
        } else if (o.graph.empty()) {
            o.graph = a;
        } else {
            std::cerr << "unexpected argument " << a << "\n";
            return false;
        }
    }
    if (o.graph.empty()) {
        std::cerr << "usage: harness <graph> [--mode push|pull] [--sources a,b] "
                     "[--max-iters N] [--threads T] [--out FILE]\n";
        return false;
    }
    if (o.mode != "push" && o.mode != "pull") {
        std::cerr << "mode must be push or pull\n";
        return false;
    }
    return true;
}

static bool value_eq(const VValueType& a, const VValueType& b) {
    const int64_t* wa = &a.first;
    const int64_t* wb = &b.first;
    for (int i = 0; i < VFIELDS; i++)
        if (wa[i] != wb[i]) return false;
    return true;
}

static void dump_value(std::ostream& os, const VValueType& v) {
    const int64_t* w = &v.first;
    bool none = true;
    for (int i = 0; i < VFIELDS; i++) {
        int64_t dec = w[i];
        // re-derive per-field noneness from the shared none struct
        const int64_t* s = &VNONE.first;
        if (dec != s[i]) none = false;
    }
    if (none) {
        os << "⊥";
        return;
    }
    const int64_t* s = &VNONE.first;
    if (VFIELDS > 1) os << "(";
    for (int i = 0; i < VFIELDS; i++) {
        if (i) os << ", ";
        if (w[i] == s[i]) {
            os << "⊥";
        } else if (VFIELD_KINDS[i] == 'b') {
            os << (w[i] ? "true" : "false");
        } else {
            os << w[i];
        }
    }
    if (VFIELDS > 1) os << ")";
}

// parallel for over [0, n) split into contiguous chunks
template <class F>
static void par_for(int64_t n, int threads, F body) {
    if (threads <= 1) {
        for (int64_t i = 0; i < n; i++) body(i);
        return;
    }
    std::vector<std::thread> pool;
    int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; t++) {
        int64_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([=]() {
            for (int64_t i = lo; i < hi; i++) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

int main(int argc, char** argv) {
    Options opt;
    if (!parse_args(argc, argv, opt)) return 2;
    Graph g;
    if (!load_graph(opt.graph, g)) return 2;
    while ((int)opt.sources.size() < VNUM_SOURCES) opt.sources.push_back(0);

    std::vector<VValueType> cur(g.n), prev(g.n);
    std::vector<char> changed(g.n, 0);
    for (int64_t v = 0; v < g.n; v++) {
        cur[v] = init_from(v, g.n, opt.sources.data());
        prev[v] = VNONE;
        changed[v] = !value_eq(cur[v], prev[v]);
    }

    std::vector<VSlot> slots(g.n);
    int iters = 1;
    bool converged = false;
    while (iters < opt.max_iters) {
        bool any_active = false;
        for (int64_t v = 0; v < g.n; v++)
            if (changed[v]) { any_active = true; break; }
        if (!any_active) {
            converged = true;
            break;
        }
        std::vector<VValueType> next(g.n);
        if (opt.mode == "pull") {
            // single writer per vertex: local sequential reduce over in-edges
            par_for(g.n, opt.threads, [&](int64_t v) {
                bool active = false;
                for (const auto& e : g.ins[v])
                    if (changed[e.src]) { active = true; break; }
                if (!active) {
                    next[v] = cur[v];
                    return;
                }
                VValueType acc = cur[v];
                for (const auto& e : g.ins[v]) {
                    VValueType msg = propagate(cur[e.src], e);
                    if (!is_none(msg)) acc = reduce_local(acc, msg);
                }
                next[v] = acc;
            });
        } else {
            // changed vertices push through the atomic reduce
            for (int64_t v = 0; v < g.n; v++) vslot_store(slots[v], cur[v]);
            par_for(g.n, opt.threads, [&](int64_t u) {
                if (!changed[u]) return;
                for (const auto& e : g.outs[u]) {
                    VValueType msg = propagate(cur[u], e);
                    if (!is_none(msg)) reduce(slots[e.dst], msg);
                }
            });
            for (int64_t v = 0; v < g.n; v++) next[v] = vslot_load(slots[v]);
        }
        iters++;
        bool moved = false;
        for (int64_t v = 0; v < g.n; v++) {
            changed[v] = !value_eq(next[v], cur[v]);
            moved = moved || changed[v];
        }
        prev.swap(cur);
        cur.swap(next);
        if (!moved) {
            converged = true;
            break;
        }
    }

    std::ostream* os = &std::cout;
    std::ofstream fout;
    if (!opt.out.empty()) {
        fout.open(opt.out);
        if (!fout) {
            std::cerr << "cannot open " << opt.out << "\n";
            return 2;
        }
        os = &fout;
    }
    for (int64_t v = 0; v < g.n; v++) {
        *os << v << " ";
        dump_value(*os, cur[v]);
        *os << "\n";
    }
    if (!converged)
        std::cerr << "warning: iteration budget exhausted after " << iters << " rounds\n";
    return 0;
}
