#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "regimekit/metrics.hpp"

using namespace regimekit;
using Catch::Approx;

namespace {

StateSeq seq_from_digits(const std::string& digits) {
    StateSeq s;
    for (char c : digits) s.push_back(state_from_index(c - '1'));
    return s;
}

AggregatedContexts table_with(const std::vector<std::pair<std::string, Distribution>>& rows,
                              std::int64_t count_each = 10) {
    AggregatedContexts agg;
    agg.trees = 1;
    Distribution uniform{0.2, 0.2, 0.2, 0.2, 0.2};
    agg.contexts[{}] = {1, 100, uniform};
    for (const auto& [digits, dist] : rows) {
        AggregatedContexts::Entry e;
        e.tree_count = 3;
        e.total_count = count_each;
        e.mean = dist;
        agg.contexts[seq_from_digits(digits)] = e;
    }
    return agg;
}

}  // namespace

TEST_CASE("unconditional stats: published developed-Extreme row") {
    UnconditionalStats s = unconditional_stats({0.312, 0.159, 0.121, 0.137, 0.271});
    REQUIRE(s.tail_ratio == Approx(1.397).margin(5e-3));
    REQUIRE(s.entropy_bits == Approx(2.219).margin(5e-3));
}

TEST_CASE("unconditional stats: uniform and degenerate") {
    UnconditionalStats u = unconditional_stats({0.2, 0.2, 0.2, 0.2, 0.2});
    REQUIRE(u.tail_ratio == Approx(2.0 / 3.0));
    REQUIRE(u.entropy_bits == Approx(std::log2(5.0)));

    UnconditionalStats d = unconditional_stats({1, 0, 0, 0, 0});
    REQUIRE(d.entropy_bits == 0.0);
    REQUIRE(std::isinf(d.tail_ratio));

    REQUIRE_THROWS_AS(unconditional_stats({0.5, 0.1, 0.1, 0.1, 0.1}), DataError);
}

TEST_CASE("entropy is maximal exactly at the uniform distribution") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    double uniform_entropy = unconditional_stats({0.2, 0.2, 0.2, 0.2, 0.2}).entropy_bits;
    for (int t = 0; t < 100; ++t) {
        Distribution p{0.2, 0.2, 0.2, 0.2, 0.2};
        double shift = u(rng);
        int i = static_cast<int>(rng() % 5), j = static_cast<int>(rng() % 5);
        if (i == j) continue;
        p[i] += shift;
        p[j] -= shift;
        if (p[i] < 0 || p[j] < 0 || std::fabs(shift) < 1e-9) continue;
        REQUIRE(unconditional_stats(p).entropy_bits < uniform_entropy);
    }
}

TEST_CASE("order-1 metrics from the figure tree values") {
    AggregatedContexts agg = table_with({
        {"1", {0.350, 0.080, 0.120, 0.120, 0.330}},
        {"4", {0.400, 0.143, 0.086, 0.086, 0.286}},
        {"5", {0.403, 0.125, 0.056, 0.139, 0.278}},
    });
    Order1Metrics m = order1_metrics(agg);
    REQUIRE(m.self_persistence[0] == Approx(0.350));
    REQUIRE(m.v1 == Approx(0.5 * (0.330 + 0.403)));
    REQUIRE(m.present[0]);
    REQUIRE_FALSE(m.present[1]);        // R2 context absent
    REQUIRE(m.self_persistence[1] == 0.0);  // absent contexts contribute zero
    REQUIRE(m.v2 == Approx(0.5 * 0.143));   // only p(R2|R4) present
}

TEST_CASE("order-1 metrics on a deterministic cycle tree") {
    StateSeq s;
    for (int i = 0; i < 60; ++i) s.push_back(i % 2 == 0 ? State::R1 : State::R5);
    ContextTree t = prune_tree(build_context_tree(s));
    Order1Metrics m = order1_metrics(t);
    REQUIRE(m.self_persistence[0] == 0.0);
    REQUIRE(m.v1 == 1.0);
}

TEST_CASE("order-2 metrics reproduce the published developed-Extreme cross-check") {
    // rows from the aggregated developed-Extreme context table
    AggregatedContexts agg = table_with({
        {"11", {0.307, 0.115, 0.106, 0.065, 0.407}},
        {"55", {0.351, 0.190, 0.112, 0.121, 0.225}},
        {"15", {0.368, 0.073, 0.061, 0.108, 0.391}},
        {"51", {0.329, 0.145, 0.091, 0.079, 0.356}},
    });
    OrderKMetrics m = higher_order_metrics(agg, 2);
    REQUIRE(m.exhaustion == Approx(0.379).margin(1e-3));
    REQUIRE(m.zigzag == Approx(0.362).margin(1e-3));
}

TEST_CASE("continuation and burst weighting") {
    // two length-2 contexts, counts 30 and 10: C2 weights the homogeneous
    // run by count share; B2 weights the calm context likewise
    AggregatedContexts agg = table_with({{"11", {0.5, 0.1, 0.1, 0.1, 0.2}}}, 30);
    AggregatedContexts::Entry calm;
    calm.tree_count = 3;
    calm.total_count = 10;
    calm.mean = {0.25, 0.2, 0.2, 0.2, 0.15};
    agg.contexts[seq_from_digits("23")] = calm;

    OrderKMetrics m = higher_order_metrics(agg, 2);
    REQUIRE(m.continuation == Approx(30.0 / 40.0 * 0.5));
    REQUIRE(m.burst == Approx(10.0 / 40.0 * (0.25 + 0.15)));
    REQUIRE(m.exhaustion == Approx(0.5 * 0.2));  // only p(R5|R1R1); R5R5 absent
    REQUIRE(m.zigzag == 0.0);

    // no homogeneous run at k = 3
    OrderKMetrics m3 = higher_order_metrics(agg, 3);
    REQUIRE(m3.continuation == 0.0);
}

TEST_CASE("metric outputs stay in [0,1] on random trees") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> pick(0, 4);
    for (int trial = 0; trial < 10; ++trial) {
        StateSeq s;
        for (int i = 0; i < 500; ++i) s.push_back(state_from_index(pick(rng)));
        ContextTree t = prune_tree(build_context_tree(s));
        Order1Metrics m1 = order1_metrics(t);
        for (double v : m1.self_persistence) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
        for (int k : {2, 3}) {
            OrderKMetrics mk = higher_order_metrics(t, k);
            for (double v : {mk.continuation, mk.exhaustion, mk.zigzag, mk.burst}) {
                REQUIRE(v >= 0.0);
                REQUIRE(v <= 1.0);
            }
        }
    }
}

TEST_CASE("aggregate: single tree identity") {
    StateSeq s;
    std::mt19937 rng(23);
    std::uniform_int_distribution<int> pick(0, 4);
    for (int i = 0; i < 300; ++i) s.push_back(state_from_index(pick(rng)));
    ContextTree t = prune_tree(build_context_tree(s));
    AggregatedContexts agg = aggregate_contexts({t}, 1);
    REQUIRE(agg.trees == 1);
    std::size_t nodes = 0;
    t.visit([&](const StateSeq& ctx, const ContextTree::Node& nd) {
        ++nodes;
        const auto* e = agg.find(ctx);
        REQUIRE(e != nullptr);
        REQUIRE(e->tree_count == 1);
        REQUIRE(e->total_count == nd.count);
        Distribution d = nd.distribution();
        for (int i = 0; i < 5; ++i) REQUIRE(e->mean[i] == Approx(d[i]));
    });
    REQUIRE(agg.contexts.size() == nodes);
}

TEST_CASE("aggregate: hand-set two-tree mean and filtering") {
    StateSeq a = seq_from_digits("1111111111");   // R1 run
    StateSeq b = seq_from_digits("1515151515");   // alternation
    PruneConfig cfg;
    cfg.max_depth = 2;
    ContextTree ta = build_context_tree(a, cfg);
    ContextTree tb = build_context_tree(b, cfg);
    AggregatedContexts agg = aggregate_contexts({ta, tb}, 2);

    const auto* r1 = agg.find(seq_from_digits("1"));
    REQUIRE(r1 != nullptr);
    REQUIRE(r1->tree_count == 2);
    // tree a: p(R1|R1) = 1; tree b: p(R5|R1) = 1 -> mean (0.5, 0, 0, 0, 0.5)
    REQUIRE(r1->mean[0] == Approx(0.5));
    REQUIRE(r1->mean[4] == Approx(0.5));
    REQUIRE(r1->total_count == 9 + 5);

    // context R5 appears in one tree only -> filtered at min_tree_count 2
    bool in_filtered = false;
    for (const auto& [ctx, e] : agg.filtered())
        if (ctx == seq_from_digits("5")) in_filtered = true;
    REQUIRE_FALSE(in_filtered);
    REQUIRE(agg.find(seq_from_digits("5")) != nullptr);  // still tracked internally

    // mean distributions sum to 1
    for (const auto& [ctx, e] : agg.contexts) {
        double total = 0;
        for (double v : e.mean) total += v;
        REQUIRE(total == Approx(1.0).margin(1e-12));
    }
}
