#ifndef REGIMEKIT_VLMC_HPP
#define REGIMEKIT_VLMC_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimekit/errors.hpp"
#include "regimekit/states.hpp"

namespace regimekit {

using Distribution = std::array<double, kStateCount>;

struct PruneConfig {
    double cutoff = 3.372;  // likelihood-ratio threshold for Lambda = 2 n KL
    int max_depth = 4;
    std::int64_t min_count = 1;
};

// KL divergence in nats with 0 ln 0 = 0. Throws when p has mass where q has
// none.
inline double kl_divergence(const Distribution& p, const Distribution& q) {
    double acc = 0.0;
    for (int i = 0; i < kStateCount; ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) throw SupportViolationError("kl: support(p) not within support(q)");
        acc += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(acc, 0.0);
}

// Suffix tree over past-state windows. A node's context is written oldest ->
// newest; each tree edge prepends the state one day older, so the path for
// context (c_1 .. c_L) is root -> child[c_L] -> ... -> child[c_1]. The root
// holds the unconditional state distribution.
class ContextTree {
public:
    struct Node {
        std::array<std::int64_t, kStateCount> next_counts{};
        std::int64_t count = 0;
        std::array<std::int32_t, kStateCount> children{-1, -1, -1, -1, -1};
        double lambda = 0.0;  // 2 n KL against the parent (0 at the root)
        int depth = 0;

        Distribution distribution() const {
            Distribution d{};
            if (count > 0)
                for (int i = 0; i < kStateCount; ++i)
                    d[i] = static_cast<double>(next_counts[i]) / static_cast<double>(count);
            return d;
        }
    };

    int max_depth = 0;
    bool pruned = false;

    const Node& root() const { return nodes_[0]; }
    const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t node_count() const { return nodes_.size(); }

    int depth() const {
        int d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.depth);
        return d;
    }

    // Deepest stored node whose context is a suffix of `history`.
    std::int32_t match(const StateSeq& history) const {
        std::int32_t id = 0;
        for (std::size_t back = 0; back < history.size(); ++back) {
            State older = history[history.size() - 1 - back];
            std::int32_t child = nodes_[static_cast<std::size_t>(id)].children[static_cast<int>(older)];
            if (child < 0) break;
            id = child;
        }
        return id;
    }

    // Node for an exact context (oldest -> newest), -1 if absent.
    std::int32_t find(const StateSeq& context) const {
        std::int32_t id = 0;
        for (std::size_t back = 0; back < context.size(); ++back) {
            State older = context[context.size() - 1 - back];
            std::int32_t child = nodes_[static_cast<std::size_t>(id)].children[static_cast<int>(older)];
            if (child < 0) return -1;
            id = child;
        }
        return id;
    }

    // Preorder walk; contexts are materialized oldest -> newest.
    void visit(const std::function<void(const StateSeq&, const Node&)>& fn) const {
        StateSeq context;
        visit_rec(0, context, fn);
    }

    friend ContextTree build_context_tree(const StateSeq&, const PruneConfig&);
    friend ContextTree prune_tree(const ContextTree&, const PruneConfig&);
    friend ContextTree context_tree_from_json(const nlohmann::json&);

private:
    std::vector<Node> nodes_{Node{}};

    std::int32_t get_or_create(std::int32_t parent, State older) {
        std::int32_t& slot = nodes_[static_cast<std::size_t>(parent)].children[static_cast<int>(older)];
        if (slot < 0) {
            slot = static_cast<std::int32_t>(nodes_.size());
            Node n;
            n.depth = nodes_[static_cast<std::size_t>(parent)].depth + 1;
            std::int32_t id = slot;
            nodes_.push_back(n);
            return id;
        }
        return slot;
    }

    void visit_rec(std::int32_t id, StateSeq& context,
                   const std::function<void(const StateSeq&, const Node&)>& fn) const {
        fn(context, nodes_[static_cast<std::size_t>(id)]);
        for (int k = 0; k < kStateCount; ++k) {
            std::int32_t child = nodes_[static_cast<std::size_t>(id)].children[k];
            if (child < 0) continue;
            context.insert(context.begin(), static_cast<State>(k));  // one day older in front
            visit_rec(child, context, fn);
            context.erase(context.begin());
        }
    }
};

// Maximum-likelihood context tree: every context of length 0..max_depth that
// occurs with a successor gets its occurrence count and next-state counts.
inline ContextTree build_context_tree(const StateSeq& s, const PruneConfig& cfg = {}) {
    if (cfg.max_depth < 1) throw ConfigError("vlmc: max_depth must be >= 1");
    if (static_cast<int>(s.size()) <= cfg.max_depth)
        throw SequenceTooShortError("vlmc: sequence shorter than max_depth + 1");

    ContextTree t;
    t.max_depth = cfg.max_depth;
    t.nodes_[0].count = static_cast<std::int64_t>(s.size());
    for (State v : s) ++t.nodes_[0].next_counts[static_cast<int>(v)];

    const std::size_t n = s.size();
    for (std::size_t u = 1; u < n; ++u) {
        std::int32_t id = 0;
        const std::size_t max_len = std::min<std::size_t>(cfg.max_depth, u);
        for (std::size_t len = 1; len <= max_len; ++len) {
            id = t.get_or_create(id, s[u - len]);
            auto& nd = t.nodes_[static_cast<std::size_t>(id)];
            ++nd.count;
            ++nd.next_counts[static_cast<int>(s[u])];
        }
    }

    // Lambda for every non-root node, for reporting and pruning.
    std::function<void(std::int32_t, const Distribution&)> fill =
        [&](std::int32_t id, const Distribution& parent_dist) {
            auto& nd = t.nodes_[static_cast<std::size_t>(id)];
            Distribution d = nd.distribution();
            if (id != 0)
                nd.lambda = 2.0 * static_cast<double>(nd.count) * kl_divergence(d, parent_dist);
            for (int k = 0; k < kStateCount; ++k)
                if (nd.children[k] >= 0) fill(nd.children[k], d);
        };
    fill(0, t.nodes_[0].distribution());
    return t;
}

// Bottom-up pruning: a node survives when Lambda exceeds the cutoff (and it
// has at least min_count observations), or when any descendant survives, so
// suffix lookups can still reach deeper significant contexts.
inline ContextTree prune_tree(const ContextTree& t, const PruneConfig& cfg = {}) {
    std::vector<char> keep(t.node_count(), 0);
    std::function<bool(std::int32_t)> mark = [&](std::int32_t id) -> bool {
        const auto& nd = t.node(id);
        bool any_child = false;
        for (int k = 0; k < kStateCount; ++k)
            if (nd.children[k] >= 0 && mark(nd.children[k])) any_child = true;
        bool own = id == 0 || (nd.count >= cfg.min_count && nd.lambda > cfg.cutoff);
        keep[static_cast<std::size_t>(id)] = static_cast<char>(own || any_child);
        return keep[static_cast<std::size_t>(id)];
    };
    mark(0);

    ContextTree out;
    out.max_depth = t.max_depth;
    out.pruned = true;
    out.nodes_.clear();
    std::function<std::int32_t(std::int32_t)> copy = [&](std::int32_t id) -> std::int32_t {
        std::int32_t nid = static_cast<std::int32_t>(out.nodes_.size());
        out.nodes_.push_back(t.node(id));
        auto reset = out.nodes_[static_cast<std::size_t>(nid)].children;
        for (int k = 0; k < kStateCount; ++k)
            out.nodes_[static_cast<std::size_t>(nid)].children[k] = -1;
        for (int k = 0; k < kStateCount; ++k) {
            std::int32_t child = reset[k];
            if (child >= 0 && keep[static_cast<std::size_t>(child)]) {
                std::int32_t mapped = copy(child);
                out.nodes_[static_cast<std::size_t>(nid)].children[k] = mapped;
            }
        }
        return nid;
    };
    copy(0);
    return out;
}

// Distribution at the deepest retained context matching a suffix of history;
// the root's unconditional distribution when nothing deeper matches.
inline Distribution predict_next(const ContextTree& t, const StateSeq& history) {
    return t.node(t.match(history)).distribution();
}

// --- JSON serialization (lossless: integer counts are authoritative) ---

inline nlohmann::json context_tree_to_json(const ContextTree& t) {
    std::function<nlohmann::json(std::int32_t, const StateSeq&)> conv =
        [&](std::int32_t id, const StateSeq& context) {
            const auto& nd = t.node(id);
            nlohmann::json j;
            j["context"] = nlohmann::json::array();
            for (State s : context) j["context"].push_back(to_string(s));
            j["count"] = nd.count;
            j["next_counts"] = nd.next_counts;
            Distribution d = nd.distribution();
            j["probs"] = d;
            j["lambda"] = nd.lambda;
            nlohmann::json children = nlohmann::json::object();
            for (int k = 0; k < kStateCount; ++k) {
                if (nd.children[k] < 0) continue;
                StateSeq child_ctx = context;
                child_ctx.insert(child_ctx.begin(), static_cast<State>(k));
                children[kStateNames[k]] = conv(nd.children[k], child_ctx);
            }
            j["children"] = std::move(children);
            return j;
        };
    nlohmann::json j;
    j["alphabet"] = kStateNames;
    j["max_depth"] = t.max_depth;
    j["pruned"] = t.pruned;
    j["root"] = conv(0, {});
    return j;
}

inline ContextTree context_tree_from_json(const nlohmann::json& j) {
    ContextTree t;
    t.max_depth = j.at("max_depth").get<int>();
    t.pruned = j.at("pruned").get<bool>();
    t.nodes_.clear();
    std::function<std::int32_t(const nlohmann::json&, int)> conv =
        [&](const nlohmann::json& nj, int depth) -> std::int32_t {
        std::int32_t id = static_cast<std::int32_t>(t.nodes_.size());
        t.nodes_.emplace_back();
        {
            auto& nd = t.nodes_[static_cast<std::size_t>(id)];
            nd.count = nj.at("count").get<std::int64_t>();
            nd.next_counts = nj.at("next_counts").get<std::array<std::int64_t, kStateCount>>();
            nd.lambda = nj.at("lambda").get<double>();
            nd.depth = depth;
        }
        const auto& children = nj.at("children");
        for (int k = 0; k < kStateCount; ++k) {
            auto it = children.find(kStateNames[k]);
            if (it == children.end()) continue;
            std::int32_t child = conv(*it, depth + 1);
            t.nodes_[static_cast<std::size_t>(id)].children[k] = child;
        }
        return id;
    };
    conv(j.at("root"), 0);
    return t;
}

}  // namespace regimekit

#endif
