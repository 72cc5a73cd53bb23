#pragma once

// Test-only fixtures and independent oracles. Oracles re-derive behavior from
// first principles (edge scans, exhaustive path enumeration, classic
// ray-casting) and must stay independent of the library implementation.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "privaros/airspace.hpp"
#include "privaros/model.hpp"
#include "privaros/refmon.hpp"

namespace testutil {

using namespace privaros;

using Rng = std::mt19937_64;

inline std::string node_name(std::size_t i) { return "n" + std::to_string(i); }

// Random graph over app nodes n0..n{k-1} plus occasionally the distinguished
// sensor/sink nodes, with a mix of annotated and unannotated edges.
inline CommunicationGraph random_graph(Rng& rng, std::size_t max_nodes = 8) {
    std::uniform_int_distribution<std::size_t> node_count(1, max_nodes);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> topic_pick(0, 2);
    CommunicationGraph g;
    std::size_t n = node_count(rng);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(node_name(i));
        g.add_node(ids.back(), NodeRole::App);
    }
    if (coin(rng)) {
        ids.push_back(std::string(node::camera));
        g.add_node(ids.back());
    }
    if (coin(rng)) {
        ids.push_back(std::string(node::network));
        g.add_node(ids.back());
    }
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    std::uniform_int_distribution<std::size_t> edge_count(0, 2 * ids.size());
    std::size_t m = edge_count(rng);
    const char* topics[] = {"alpha", "beta", "gamma"};
    const char* types[] = {"T1", "T2"};
    for (std::size_t i = 0; i < m; ++i) {
        std::string src = ids[pick(rng)];
        std::string dst = ids[pick(rng)];
        if (src == dst) continue;
        std::optional<TopicKey> key;
        if (coin(rng)) {
            TopicKey k{topics[topic_pick(rng)], std::nullopt};
            if (coin(rng)) k.type_name = types[coin(rng)];
            key = k;
        }
        g.add_edge(src, dst, key);
    }
    for (const auto& id : ids)
        if (coin(rng) && rng() % 4 == 0) g.mark_trusted(id);
    return g;
}

inline TopicKey random_key(Rng& rng) {
    std::uniform_int_distribution<int> topic_pick(0, 2);
    std::uniform_int_distribution<int> coin(0, 1);
    const char* topics[] = {"alpha", "beta", "gamma"};
    const char* types[] = {"T1", "T2"};
    TopicKey k{topics[topic_pick(rng)], std::nullopt};
    if (coin(rng)) k.type_name = types[coin(rng)];
    return k;
}

// Oracle: direct edge-scan transcription of the whitelist rule.
inline bool oracle_permits(const CommunicationGraph& g, const std::string& src,
                           const std::string& dst, const std::optional<TopicKey>& key) {
    for (const auto& e : g.edges) {
        if (e.src != src || e.dst != dst) continue;
        if (!e.key) return true;
        if (!key) continue;
        if (key->topic != e.key->topic) continue;
        if (!key->type_name || !e.key->type_name || *key->type_name == *e.key->type_name)
            return true;
    }
    return false;
}

// Oracle: exhaustive enumeration of simple paths whose interior nodes avoid
// the given set.
inline bool oracle_reachable(const CommunicationGraph& g, const std::string& src,
                             const std::string& dst, const std::set<std::string>& avoiding) {
    if (src == dst) return true;
    std::set<std::string> visited{src};
    std::function<bool(const std::string&)> dfs = [&](const std::string& cur) -> bool {
        for (const auto& e : g.edges) {
            if (e.src != cur) continue;
            if (e.dst == dst) return true;
            if (avoiding.count(e.dst) || visited.count(e.dst)) continue;
            visited.insert(e.dst);
            if (dfs(e.dst)) return true;
            visited.erase(e.dst);
        }
        return false;
    };
    return dfs(src);
}

// Oracle: classic even-odd ray casting with explicit boundary handling.
inline bool oracle_point_in_polygon(const GeoPoint& p, const GeoPolygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        const GeoPoint& a = v[i];
        const GeoPoint& b = v[(i + 1) % n];
        double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
        if (cross == 0.0 && std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) &&
            std::min(a.lat, b.lat) <= p.lat && p.lat <= std::max(a.lat, b.lat))
            return true;  // on the boundary: inside by convention
    }
    bool in = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((v[i].lat > p.lat) != (v[j].lat > p.lat)) {
            double x = (v[j].lon - v[i].lon) * (p.lat - v[i].lat) / (v[j].lat - v[i].lat) + v[i].lon;
            if (p.lon < x) in = !in;
        }
    }
    return in;
}

// Synthetic baseline platform: 29 nodes (25 services + the four distinguished
// sensor/sink nodes) and exactly 69 edges, every node touched by at least one
// edge so a full-coverage run exercises the whole whitelist.
inline CommunicationGraph platform_fixture() {
    CommunicationGraph g;
    std::vector<std::string> apps;
    for (int i = 1; i <= 25; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "svc%02d", i);
        apps.emplace_back(buf);
        g.add_node(apps.back(), NodeRole::App);
    }
    g.add_node(std::string(node::camera));
    g.add_node(std::string(node::gps));
    g.add_node(std::string(node::network));
    g.add_node(std::string(node::filesystem));
    g.net_whitelist.insert("*");

    for (std::size_t i = 0; i + 1 < apps.size(); ++i) g.add_edge(apps[i], apps[i + 1]);  // 24
    g.add_edge(std::string(node::camera), apps[0]);
    g.add_edge(std::string(node::camera), apps[1]);
    g.add_edge(std::string(node::gps), apps[2]);
    g.add_edge(apps[3], std::string(node::network));
    g.add_edge(apps[4], std::string(node::filesystem));

    Rng rng(6927);  // deterministic fill to exactly 69 edges
    const char* topics[] = {"telemetry", "diag", "video"};
    std::uniform_int_distribution<std::size_t> pick(0, apps.size() - 1);
    while (g.edges.size() < 69) {
        std::string src = apps[pick(rng)];
        std::string dst;
        switch (rng() % 8) {
            case 0: dst = std::string(node::network); break;
            case 1: dst = std::string(node::filesystem); break;
            default: dst = apps[pick(rng)];
        }
        if (src == dst) continue;
        std::optional<TopicKey> key;
        if (dst != node::network && dst != node::filesystem && rng() % 2) {
            TopicKey k{topics[rng() % 3], std::nullopt};
            if (rng() % 2) k.type_name = "T" + std::to_string(rng() % 2 + 1);
            key = k;
        }
        g.add_edge(src, dst, key);
    }
    return g;
}

// Full-coverage run: exercise every whitelisted edge exactly once through the
// matching kernel hook, using one registered process per app node.
inline void drive_platform(RefMon& mon, const CommunicationGraph& g) {
    std::map<std::string, Pid> pid_of;
    Pid next = 1;
    for (const auto& [id, role] : g.nodes)
        if (role == NodeRole::App) {
            pid_of[id] = next;
            mon.register_process(next, id);
            ++next;
        }
    int file_counter = 0;
    for (const auto& e : g.edges) {
        if (e.src == node::camera || e.src == node::gps) {
            mon.hook_sensor_read(pid_of.at(e.dst), e.src);
        } else if (e.dst == node::network) {
            mon.hook_send_net(pid_of.at(e.src), "host" + e.src + ".example", "payload");
        } else if (e.dst == node::filesystem) {
            mon.file_create(pid_of.at(e.src), "/data/out" + std::to_string(file_counter++), "x");
        } else {
            mon.hook_connect(pid_of.at(e.src), pid_of.at(e.dst), Abstraction::LocalStream, e.key);
        }
    }
}

// Random convex polygon: points on a circle, radius jittered, sorted by angle.
inline GeoPolygon random_convex_polygon(Rng& rng, double cx, double cy, double scale) {
    std::uniform_int_distribution<int> vcount(3, 9);
    std::uniform_real_distribution<double> angle_jitter(0.05, 0.95);
    std::uniform_real_distribution<double> radius(0.4 * scale, scale);
    int n = vcount(rng);
    std::vector<double> angles;
    for (int i = 0; i < n; ++i)
        angles.push_back((i + angle_jitter(rng)) * 2.0 * 3.14159265358979323846 / n);
    GeoPolygon poly;
    for (double a : angles) {
        double r = radius(rng);
        poly.vertices.push_back({cy + r * std::sin(a), cx + r * std::cos(a)});
    }
    return poly;
}

}  // namespace testutil
