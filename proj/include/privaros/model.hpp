#pragma once

#include <compare>
#include <initializer_list>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "privaros/crypto.hpp"
#include "privaros/digest.hpp"
#include "privaros/wire.hpp"

namespace privaros {

// Distinguished sensor sources and sinks. These are graph endpoints, not
// applications; further sensor names may be introduced by policies.
namespace node {
inline constexpr std::string_view camera = "CAMERA";
inline constexpr std::string_view gps = "GPS";
inline constexpr std::string_view network = "NETWORK";
inline constexpr std::string_view filesystem = "FILESYSTEM";
}  // namespace node

using NodeId = std::string;

enum class NodeRole { App, Sensor, Sink };

inline NodeRole default_role(std::string_view id) {
    if (id == node::camera || id == node::gps) return NodeRole::Sensor;
    if (id == node::network || id == node::filesystem) return NodeRole::Sink;
    return NodeRole::App;
}

inline std::string_view role_name(NodeRole r) {
    switch (r) {
        case NodeRole::App: return "app";
        case NodeRole::Sensor: return "sensor";
        case NodeRole::Sink: return "sink";
    }
    return "app";
}

// Dual-instance policies (one process per graph node) name instances with a
// `#k` suffix; base_name strips it back to the application name.
inline std::string base_name(std::string_view node_id) {
    auto pos = node_id.rfind('#');
    if (pos == std::string_view::npos) return std::string(node_id);
    return std::string(node_id.substr(0, pos));
}

struct TopicKey {
    std::string topic;
    std::optional<std::string> type_name;  // absent in manifests, concrete at runtime

    // Two keys match iff topics are equal and either side leaves the type open.
    bool matches(const TopicKey& other) const {
        if (topic != other.topic) return false;
        if (!type_name || !other.type_name) return true;
        return *type_name == *other.type_name;
    }

    std::string str() const {
        std::string s = "topic=" + topic;
        if (type_name) s += ",type=" + *type_name;
        return s;
    }

    auto operator<=>(const TopicKey&) const = default;
};

inline TopicKey topic(std::string name) { return TopicKey{std::move(name), std::nullopt}; }

inline TopicKey topic(std::string name, std::string type) {
    return TopicKey{std::move(name), std::move(type)};
}

struct AppManifest {
    std::set<std::string> publishes;   // topic names; default verdict is DENY
    std::set<std::string> subscribes;

    bool may_publish(std::string_view t) const { return publishes.count(std::string(t)) > 0; }
    bool may_subscribe(std::string_view t) const { return subscribes.count(std::string(t)) > 0; }

    bool operator==(const AppManifest&) const = default;
};

struct AppIdentity {
    std::string name;
    Digest binary_digest{};  // digest of the exact byte image, never a path
    AppManifest manifest;
    Signature certificate{};

    // Canonical byte string the certificate authority signs.
    std::string certified_payload() const {
        WireWriter w;
        w.bytes(name);
        w.digest(binary_digest);
        w.u32(static_cast<std::uint32_t>(manifest.publishes.size()));
        for (const auto& t : manifest.publishes) w.bytes(t);
        w.u32(static_cast<std::uint32_t>(manifest.subscribes.size()));
        for (const auto& t : manifest.subscribes) w.bytes(t);
        return w.take();
    }
};

class CertificateAuthority {
public:
    explicit CertificateAuthority(std::string_view seed = "privaros.ca")
        : key_(make_keypair(seed)) {}

    const PublicKey& public_key() const { return key_.pub; }

    AppIdentity issue(std::string name, const Digest& binary_digest, AppManifest manifest) const {
        AppIdentity id;
        id.name = std::move(name);
        id.binary_digest = binary_digest;
        id.manifest = std::move(manifest);
        id.certificate = sign(key_, id.certified_payload());
        return id;
    }

    bool check(const AppIdentity& id) const {
        return privaros::verify(key_.pub, id.certified_payload(), id.certificate);
    }

private:
    KeyPair key_;
};

struct Edge {
    NodeId src;
    NodeId dst;
    std::optional<TopicKey> key;  // absent: edge covers ROS and raw OS flows alike

    auto operator<=>(const Edge&) const = default;
};

// The policy object: a whitelist of permitted directed flows. Absence of an
// edge means the flow is forbidden.
struct CommunicationGraph {
    std::map<NodeId, NodeRole> nodes;
    std::set<Edge> edges;
    std::set<NodeId> trusted;         // declassifiers; must be declared nodes
    std::set<std::string> net_whitelist;  // permitted outbound network addresses

    CommunicationGraph& add_node(NodeId id) {
        NodeRole role = default_role(id);
        return add_node(std::move(id), role);
    }

    CommunicationGraph& add_node(NodeId id, NodeRole role) {
        nodes.emplace(std::move(id), role);
        return *this;
    }

    CommunicationGraph& add_edge(NodeId src, NodeId dst,
                                 std::optional<TopicKey> key = std::nullopt) {
        edges.insert(Edge{std::move(src), std::move(dst), std::move(key)});
        return *this;
    }

    CommunicationGraph& mark_trusted(NodeId id) {
        trusted.insert(std::move(id));
        return *this;
    }

    bool has_node(std::string_view id) const { return nodes.count(std::string(id)) > 0; }

    bool operator==(const CommunicationGraph&) const = default;
};

enum class Decision { Allow, Deny };

inline std::string_view decision_name(Decision d) {
    return d == Decision::Allow ? "ALLOW" : "DENY";
}

struct Violation {
    enum class Kind { UndeclaredNode, UndeclaredTrusted };
    Kind kind;
    std::string detail;  // names the offending edge endpoint or trusted entry
};

// Total function: reports every invariant breach in the graph.
inline std::vector<Violation> validate_graph(const CommunicationGraph& g) {
    std::vector<Violation> out;
    for (const auto& e : g.edges) {
        if (!g.has_node(e.src))
            out.push_back({Violation::Kind::UndeclaredNode,
                           "edge " + e.src + " -> " + e.dst + ": undeclared node " + e.src});
        if (!g.has_node(e.dst))
            out.push_back({Violation::Kind::UndeclaredNode,
                           "edge " + e.src + " -> " + e.dst + ": undeclared node " + e.dst});
    }
    for (const auto& t : g.trusted) {
        if (!g.has_node(t))
            out.push_back({Violation::Kind::UndeclaredTrusted, "trusted node " + t + " undeclared"});
    }
    return out;
}

// ALLOW iff an edge (src,dst) exists and either the edge is unannotated or the
// queried key matches its annotation. A keyless query (raw OS flow) is
// permitted only by an unannotated edge. Unknown nodes yield DENY.
inline Decision permits(const CommunicationGraph& g, std::string_view src, std::string_view dst,
                        const std::optional<TopicKey>& key = std::nullopt) {
    auto lo = g.edges.lower_bound(Edge{std::string(src), std::string(dst), std::nullopt});
    for (auto it = lo; it != g.edges.end() && it->src == src && it->dst == dst; ++it) {
        if (!it->key) return Decision::Allow;
        if (key && key->matches(*it->key)) return Decision::Allow;
    }
    return Decision::Deny;
}

struct UnknownNodeError : std::invalid_argument {
    explicit UnknownNodeError(const std::string& id)
        : std::invalid_argument("unknown node: " + id) {}
};

// True iff a directed path src -> dst exists whose interior nodes avoid
// `avoiding`. src == dst holds by the zero-length path convention: a process
// can always access its own data. Endpoints themselves are never excluded.
inline bool reachable(const CommunicationGraph& g, std::string_view src, std::string_view dst,
                      const std::set<NodeId>& avoiding = {}) {
    if (!g.has_node(src)) throw UnknownNodeError(std::string(src));
    if (!g.has_node(dst)) throw UnknownNodeError(std::string(dst));
    if (src == dst) return true;
    std::set<NodeId> seen{std::string(src)};
    std::queue<NodeId> frontier;
    frontier.push(std::string(src));
    while (!frontier.empty()) {
        NodeId cur = std::move(frontier.front());
        frontier.pop();
        auto lo = g.edges.lower_bound(Edge{cur, "", std::nullopt});
        for (auto it = lo; it != g.edges.end() && it->src == cur; ++it) {
            if (it->dst == dst) return true;
            if (avoiding.count(it->dst) || !seen.insert(it->dst).second) continue;
            frontier.push(it->dst);
        }
    }
    return false;
}

// Edge-wise AND of two whitelists: a flow is permitted by the result iff it is
// permitted by both inputs. Used when a drone sits inside overlapping host
// airspaces. The network whitelist intersects; trusted marks survive only for
// nodes present in the result.
inline CommunicationGraph graph_intersection(const CommunicationGraph& a,
                                             const CommunicationGraph& b) {
    CommunicationGraph out;
    for (const auto& [id, role] : a.nodes) out.add_node(id, role);
    for (const auto& [id, role] : b.nodes) out.nodes.emplace(id, role);
    for (const auto& ea : a.edges) {
        auto lo = b.edges.lower_bound(Edge{ea.src, ea.dst, std::nullopt});
        for (auto it = lo; it != b.edges.end() && it->src == ea.src && it->dst == ea.dst; ++it) {
            const Edge& eb = *it;
            if (!ea.key) {
                out.edges.insert(eb);
            } else if (!eb.key) {
                out.edges.insert(ea);
            } else if (ea.key->matches(*eb.key)) {
                // keep the more specific annotation
                out.edges.insert(ea.key->type_name ? ea : eb);
            }
        }
    }
    for (const auto& t : a.trusted)
        if (out.has_node(t)) out.trusted.insert(t);
    for (const auto& t : b.trusted)
        if (out.has_node(t)) out.trusted.insert(t);
    // "*" permits any address
    bool a_any = a.net_whitelist.count("*") > 0;
    bool b_any = b.net_whitelist.count("*") > 0;
    if (a_any && b_any) out.net_whitelist.insert("*");
    for (const auto& addr : a.net_whitelist)
        if (addr != "*" && (b_any || b.net_whitelist.count(addr))) out.net_whitelist.insert(addr);
    for (const auto& addr : b.net_whitelist)
        if (addr != "*" && a_any) out.net_whitelist.insert(addr);
    return out;
}

}  // namespace privaros
