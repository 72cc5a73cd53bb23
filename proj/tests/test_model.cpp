#include "doctest.h"

#include "helpers.hpp"
#include "privaros/model.hpp"

using namespace privaros;

namespace {

// Camera feed processed locally; telemetry may use the network but has no
// path from the camera.
CommunicationGraph process_locally_fixture() {
    CommunicationGraph g;
    g.add_node("Camera").add_node("ObstacleDetect").add_node("Navigator").add_node("Telemetry");
    g.add_node(std::string(node::camera)).add_node(std::string(node::network));
    g.add_node(std::string(node::filesystem));
    g.add_edge(std::string(node::camera), "Camera");
    g.add_edge("Camera", "ObstacleDetect", topic("CamOutput"));
    g.add_edge("ObstacleDetect", "Navigator");
    g.add_edge("Telemetry", std::string(node::network));
    return g;
}

// Every camera flow to the network passes through BlurFilter.
CommunicationGraph blur_exported_fixture() {
    CommunicationGraph g;
    g.add_node("Camera").add_node("BlurFilter").add_node("Navigator");
    g.add_node(std::string(node::camera)).add_node(std::string(node::network));
    g.mark_trusted("BlurFilter");
    g.add_edge(std::string(node::camera), "Camera");
    g.add_edge("Camera", "BlurFilter", topic("CamOutput"));
    g.add_edge("BlurFilter", "Navigator", topic("ScrubbedImage"));
    g.add_edge("Navigator", std::string(node::network));
    return g;
}

}  // namespace

TEST_CASE("topic keys match on topic with open or equal types") {
    CHECK(topic("a").matches(topic("a")));
    CHECK(topic("a").matches(topic("a", "T")));
    CHECK(topic("a", "T").matches(topic("a")));
    CHECK(topic("a", "T").matches(topic("a", "T")));
    CHECK_FALSE(topic("a", "T").matches(topic("a", "U")));
    CHECK_FALSE(topic("a").matches(topic("b")));
    CHECK_FALSE(topic("a", "T").matches(topic("b", "T")));
}

TEST_CASE("validate_graph") {
    SUBCASE("empty graph has no violations") {
        CHECK(validate_graph(CommunicationGraph{}).empty());
    }
    SUBCASE("edge to an undeclared node is reported by name") {
        CommunicationGraph g;
        g.add_node("A");
        g.add_edge("A", "B");
        auto v = validate_graph(g);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == Violation::Kind::UndeclaredNode);
        CHECK(v[0].detail.find("B") != std::string::npos);
    }
    SUBCASE("undeclared trusted node is reported") {
        CommunicationGraph g;
        g.mark_trusted("Ghost");
        auto v = validate_graph(g);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == Violation::Kind::UndeclaredTrusted);
    }
    SUBCASE("transcribed ProcessLocally graph is valid") {
        CHECK(validate_graph(process_locally_fixture()).empty());
    }
}

TEST_CASE("reachable") {
    auto pl = process_locally_fixture();
    auto blur = blur_exported_fixture();

    SUBCASE("ProcessLocally: camera cannot reach the network") {
        CHECK_FALSE(reachable(pl, node::camera, node::network));
        CHECK_FALSE(reachable(pl, node::camera, node::filesystem));
        CHECK(reachable(pl, node::camera, "Navigator"));
    }
    SUBCASE("BlurExportedImages: network reachable only through the blur node") {
        CHECK(reachable(blur, node::camera, node::network));
        CHECK_FALSE(reachable(blur, node::camera, node::network, {"BlurFilter"}));
    }
    SUBCASE("src == dst holds via the zero-length path") {
        CommunicationGraph g;
        g.add_node("only");
        CHECK(reachable(g, "only", "only"));
    }
    SUBCASE("avoided endpoints are still usable as endpoints") {
        CHECK(reachable(blur, "BlurFilter", node::network, {"BlurFilter"}));
    }
    SUBCASE("unknown nodes throw") {
        CHECK_THROWS_AS((void)reachable(pl, "nope", node::network), UnknownNodeError);
        CHECK_THROWS_AS((void)reachable(pl, node::camera, "nope"), UnknownNodeError);
    }
}

TEST_CASE("permits") {
    CommunicationGraph g;
    g.add_node("Camera").add_node("BlurFilter").add_node("BadCameraStatus");
    g.add_edge("Camera", "BlurFilter", topic("CamOutput"));

    CHECK(permits(g, "Camera", "BlurFilter", topic("CamOutput")) == Decision::Allow);
    CHECK(permits(g, "Camera", "BlurFilter", topic("Other")) == Decision::Deny);
    CHECK(permits(g, "Camera", "BadCameraStatus", topic("CamOutput")) == Decision::Deny);
    // annotated edge restricts the pair to that topic: raw OS flow denied
    CHECK(permits(g, "Camera", "BlurFilter") == Decision::Deny);
    // unknown nodes yield DENY rather than an error
    CHECK(permits(g, "ghost", "BlurFilter", topic("CamOutput")) == Decision::Deny);

    g.add_edge("Camera", "BlurFilter");
    CHECK(permits(g, "Camera", "BlurFilter") == Decision::Allow);
}

TEST_CASE("reachable agrees with brute-force path enumeration on graphs <= 8 nodes") {
    testutil::Rng rng(20240811);
    for (int trial = 0; trial < 400; ++trial) {
        auto g = testutil::random_graph(rng);
        std::vector<std::string> ids;
        for (const auto& [id, role] : g.nodes) ids.push_back(id);
        std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
        for (int q = 0; q < 20; ++q) {
            std::string src = ids[pick(rng)];
            std::string dst = ids[pick(rng)];
            std::set<std::string> avoiding;
            if (rng() % 2) avoiding.insert(ids[pick(rng)]);
            CAPTURE(src);
            CAPTURE(dst);
            REQUIRE(reachable(g, src, dst, avoiding) ==
                    testutil::oracle_reachable(g, src, dst, avoiding));
        }
    }
}

TEST_CASE("permits equals the edge-scan oracle and is monotone under edge addition") {
    testutil::Rng rng(77001);
    for (int trial = 0; trial < 500; ++trial) {
        auto g = testutil::random_graph(rng);
        std::vector<std::string> ids;
        for (const auto& [id, role] : g.nodes) ids.push_back(id);
        std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
        std::vector<std::tuple<std::string, std::string, std::optional<TopicKey>>> queries;
        for (int q = 0; q < 10; ++q) {
            std::optional<TopicKey> key;
            if (rng() % 2) key = testutil::random_key(rng);
            queries.emplace_back(ids[pick(rng)], ids[pick(rng)], key);
        }
        for (const auto& [src, dst, key] : queries) {
            REQUIRE((permits(g, src, dst, key) == Decision::Allow) ==
                    testutil::oracle_permits(g, src, dst, key));
        }
        // monotonicity: a new edge never flips ALLOW to DENY
        std::vector<bool> before;
        for (const auto& [src, dst, key] : queries)
            before.push_back(permits(g, src, dst, key) == Decision::Allow);
        auto g2 = g;
        std::optional<TopicKey> new_key;
        if (rng() % 2) new_key = testutil::random_key(rng);
        g2.add_edge(ids[pick(rng)], ids[pick(rng)], new_key);
        for (std::size_t i = 0; i < queries.size(); ++i) {
            if (!before[i]) continue;
            const auto& [src, dst, key] = queries[i];
            REQUIRE(permits(g2, src, dst, key) == Decision::Allow);
        }
    }
}

TEST_CASE("valid graphs never make permits throw") {
    testutil::Rng rng(5150);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = testutil::random_graph(rng);
        REQUIRE(validate_graph(g).empty());
        for (const auto& [a, ra] : g.nodes)
            for (const auto& [b, rb] : g.nodes) {
                (void)permits(g, a, b);
                (void)permits(g, a, b, topic("alpha", "T1"));
            }
        (void)permits(g, "undeclared", "alsonot", std::nullopt);
    }
}

TEST_CASE("graph_intersection permits exactly the flows both graphs permit") {
    testutil::Rng rng(90210);
    for (int trial = 0; trial < 300; ++trial) {
        auto a = testutil::random_graph(rng);
        auto b = testutil::random_graph(rng);
        auto both = graph_intersection(a, b);
        REQUIRE(validate_graph(both).empty());
        std::vector<std::string> ids;
        for (const auto& [id, role] : both.nodes) ids.push_back(id);
        if (ids.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
        for (int q = 0; q < 20; ++q) {
            std::string src = ids[pick(rng)];
            std::string dst = ids[pick(rng)];
            // typed queries: fully concrete keys decide intersection semantics
            TopicKey key = testutil::random_key(rng);
            if (!key.type_name) key.type_name = "T1";
            bool in_a = testutil::oracle_permits(a, src, dst, key);
            bool in_b = testutil::oracle_permits(b, src, dst, key);
            bool in_both = permits(both, src, dst, key) == Decision::Allow;
            CAPTURE(src);
            CAPTURE(dst);
            REQUIRE(in_both == (in_a && in_b));
        }
    }
}

TEST_CASE("graph_intersection is commutative and idempotent in permit-semantics") {
    testutil::Rng rng(160218);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = testutil::random_graph(rng);
        auto b = testutil::random_graph(rng);
        auto ab = graph_intersection(a, b);
        auto ba = graph_intersection(b, a);
        auto aa = graph_intersection(a, a);
        std::vector<std::string> ids;
        for (const auto& [id, role] : ab.nodes) ids.push_back(id);
        if (ids.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
        for (int q = 0; q < 15; ++q) {
            std::string src = ids[pick(rng)], dst = ids[pick(rng)];
            TopicKey key = testutil::random_key(rng);
            if (!key.type_name) key.type_name = "T1";
            REQUIRE(permits(ab, src, dst, key) == permits(ba, src, dst, key));
            if (a.has_node(src) && a.has_node(dst))
                REQUIRE(permits(aa, src, dst, key) == permits(a, src, dst, key));
        }
    }
}

TEST_CASE("whitelist intersection keeps only commonly allowed addresses") {
    CommunicationGraph a, b;
    a.net_whitelist = {"10.0.0.1", "10.0.0.2"};
    b.net_whitelist = {"10.0.0.2", "10.0.0.3"};
    CHECK(graph_intersection(a, b).net_whitelist == std::set<std::string>{"10.0.0.2"});
}

TEST_CASE("base_name strips instance suffixes") {
    CHECK(base_name("BlurFilter") == "BlurFilter");
    CHECK(base_name("BlurFilter#2") == "BlurFilter");
    CHECK(base_name("a#b#3") == "a#b");
}
