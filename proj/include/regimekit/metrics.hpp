#ifndef REGIMEKIT_METRICS_HPP
#define REGIMEKIT_METRICS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "regimekit/errors.hpp"
#include "regimekit/states.hpp"
#include "regimekit/vlmc.hpp"

namespace regimekit {

struct UnconditionalStats {
    Distribution p{};
    double tail_ratio = 0;    // (p1+p5)/(p2+p3+p4), +inf when the middle is empty
    double entropy_bits = 0;  // Shannon entropy, base 2
};

inline UnconditionalStats unconditional_stats(const Distribution& p) {
    double total = 0;
    for (double v : p) total += v;
    if (std::fabs(total - 1.0) > 1e-6) throw DataError("unconditional_stats: p must sum to 1");

    UnconditionalStats s;
    s.p = p;
    double tails = p[0] + p[4];
    double middle = p[1] + p[2] + p[3];
    s.tail_ratio = middle > 0.0 ? tails / middle : std::numeric_limits<double>::infinity();
    for (double v : p)
        if (v > 0.0) s.entropy_bits -= v * std::log2(v);
    return s;
}

struct Order1Metrics {
    std::array<double, kStateCount> self_persistence{};  // M_i = p(R_i | R_i)
    double v1 = 0;  // tail reversal: (p(R1|R5) + p(R5|R1)) / 2
    double v2 = 0;  // moderate reversal: (p(R2|R4) + p(R4|R2)) / 2
    std::array<bool, kStateCount> present{};  // length-1 context observed/retained
};

struct OrderKMetrics {
    int k = 0;
    double continuation = 0;  // C_k
    double exhaustion = 0;    // E_k
    double zigzag = 0;        // Z_k
    double burst = 0;         // B_k
};

// Cross-tree context aggregation. All contexts are kept internally; the
// published-table view (tree_count >= min_tree_count) is a filter applied at
// export time. Mean distributions weight each tree equally.
struct AggregatedContexts {
    struct Entry {
        int tree_count = 0;
        std::int64_t total_count = 0;
        Distribution mean{};
    };
    std::map<StateSeq, Entry> contexts;  // keyed oldest -> newest; includes the empty root
    int trees = 0;
    int min_tree_count = 3;

    const Entry* find(const StateSeq& ctx) const {
        auto it = contexts.find(ctx);
        return it == contexts.end() ? nullptr : &it->second;
    }

    Distribution root_mean() const {
        const Entry* e = find({});
        if (!e) throw DataError("aggregate: missing root entry");
        return e->mean;
    }

    std::vector<std::pair<StateSeq, Entry>> filtered() const {
        std::vector<std::pair<StateSeq, Entry>> out;
        for (const auto& [ctx, e] : contexts)
            if (!ctx.empty() && e.tree_count >= min_tree_count) out.emplace_back(ctx, e);
        return out;
    }
};

inline AggregatedContexts aggregate_contexts(const std::vector<ContextTree>& trees,
                                             int min_tree_count = 3) {
    if (trees.empty()) throw DataError("aggregate: no trees");
    AggregatedContexts agg;
    agg.trees = static_cast<int>(trees.size());
    agg.min_tree_count = min_tree_count;
    for (const auto& t : trees) {
        t.visit([&](const StateSeq& ctx, const ContextTree::Node& nd) {
            auto& e = agg.contexts[ctx];
            ++e.tree_count;
            e.total_count += nd.count;
            Distribution d = nd.distribution();
            for (int i = 0; i < kStateCount; ++i) e.mean[i] += d[i];
        });
    }
    for (auto& [ctx, e] : agg.contexts)
        for (int i = 0; i < kStateCount; ++i) e.mean[i] /= static_cast<double>(e.tree_count);
    return agg;
}

inline AggregatedContexts tree_as_aggregate(const ContextTree& t) {
    return aggregate_contexts({t}, 1);
}

inline Order1Metrics order1_metrics(const AggregatedContexts& agg) {
    Order1Metrics m;
    auto prob = [&](State ctx, State next) {
        const auto* e = agg.find({ctx});
        if (!e) return 0.0;
        return e->mean[static_cast<int>(next)];
    };
    for (int i = 0; i < kStateCount; ++i) {
        State s = static_cast<State>(i);
        m.present[i] = agg.find({s}) != nullptr;
        m.self_persistence[i] = prob(s, s);
    }
    m.v1 = 0.5 * (prob(State::R5, State::R1) + prob(State::R1, State::R5));
    m.v2 = 0.5 * (prob(State::R4, State::R2) + prob(State::R2, State::R4));
    return m;
}

inline Order1Metrics order1_metrics(const ContextTree& t) {
    return order1_metrics(tree_as_aggregate(t));
}

namespace detail {

inline StateSeq homogeneous_context(State s, int k) { return StateSeq(static_cast<std::size_t>(k), s); }

// Length-k alternation of R1/R5 ending (newest) in `last`.
inline StateSeq alternating_context(State last, int k) {
    StateSeq ctx(static_cast<std::size_t>(k));
    State other = last == State::R1 ? State::R5 : State::R1;
    for (int i = k - 1; i >= 0; --i) ctx[static_cast<std::size_t>(i)] = ((k - 1 - i) % 2 == 0) ? last : other;
    return ctx;
}

inline bool is_calm(const StateSeq& ctx) {
    for (State s : ctx)
        if (s == State::R1 || s == State::R5) return false;
    return true;
}

}  // namespace detail

// Order-k family. Count weights (C_k, B_k) run over every observed length-k
// context; absent contexts contribute zero through the indicator.
inline OrderKMetrics higher_order_metrics(const AggregatedContexts& agg, int k) {
    if (k < 1) throw ConfigError("metrics: k must be >= 1");
    OrderKMetrics m;
    m.k = k;

    std::int64_t denom = 0;
    for (const auto& [ctx, e] : agg.contexts)
        if (static_cast<int>(ctx.size()) == k) denom += e.total_count;

    if (denom > 0) {
        for (int i = 0; i < kStateCount; ++i) {
            State s = static_cast<State>(i);
            const auto* e = agg.find(detail::homogeneous_context(s, k));
            if (!e) continue;
            m.continuation += static_cast<double>(e->total_count) / static_cast<double>(denom) *
                              e->mean[i];
        }
        for (const auto& [ctx, e] : agg.contexts) {
            if (static_cast<int>(ctx.size()) != k || !detail::is_calm(ctx)) continue;
            m.burst += static_cast<double>(e.total_count) / static_cast<double>(denom) *
                       (e.mean[0] + e.mean[4]);
        }
    }

    auto prob = [&](const StateSeq& ctx, State next) {
        const auto* e = agg.find(ctx);
        return e ? e->mean[static_cast<int>(next)] : 0.0;
    };
    m.exhaustion = 0.5 * (prob(detail::homogeneous_context(State::R1, k), State::R5) +
                          prob(detail::homogeneous_context(State::R5, k), State::R1));
    m.zigzag = 0.5 * (prob(detail::alternating_context(State::R1, k), State::R5) +
                      prob(detail::alternating_context(State::R5, k), State::R1));
    return m;
}

inline OrderKMetrics higher_order_metrics(const ContextTree& t, int k) {
    return higher_order_metrics(tree_as_aggregate(t), k);
}

}  // namespace regimekit

#endif
