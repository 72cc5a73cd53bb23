#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "privaros/middleware.hpp"
#include "privaros/model.hpp"
#include "privaros/refmon.hpp"

namespace privaros {

// ---------------------------------------------------------------------------
// High-level policies and the application inventory they compile against.
// ---------------------------------------------------------------------------

enum class PolicyKind { ProcessLocally, BlurExportedImages, UseDroneLanes };

inline std::string_view policy_kind_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::ProcessLocally: return "ProcessLocally";
        case PolicyKind::BlurExportedImages: return "BlurExportedImages";
        case PolicyKind::UseDroneLanes: return "UseDroneLanes";
    }
    return "ProcessLocally";
}

inline std::optional<PolicyKind> policy_kind_from_name(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "processlocally") return PolicyKind::ProcessLocally;
    if (lower == "blurexportedimages") return PolicyKind::BlurExportedImages;
    if (lower == "usedronelanes") return PolicyKind::UseDroneLanes;
    return std::nullopt;
}

struct LogDestination {
    enum class Kind { Filesystem, Network };
    Kind kind = Kind::Filesystem;
    std::string address;  // meaningful for Network
};

struct HighLevelPolicy {
    PolicyKind kind = PolicyKind::ProcessLocally;
    std::string blur_app;       // BlurExportedImages: designated trusted blur application
    std::string logger_app;     // UseDroneLanes: trusted logger
    LogDestination log_destination;

    static HighLevelPolicy process_locally() { return {PolicyKind::ProcessLocally, "", "", {}}; }

    static HighLevelPolicy blur_exported_images(std::string blur) {
        return {PolicyKind::BlurExportedImages, std::move(blur), "", {}};
    }

    static HighLevelPolicy use_drone_lanes(std::string logger, LogDestination dest) {
        return {PolicyKind::UseDroneLanes, "", std::move(logger), std::move(dest)};
    }
};

struct InventoryEntry {
    std::string name;
    bool camera = false;        // declared CAMERA input: handles raw camera data
    bool gps = false;           // declared GPS input
    bool network_facing = false;
    bool file_writing = false;
};

struct AppInventory {
    std::vector<InventoryEntry> apps;

    const InventoryEntry* find(std::string_view name) const {
        for (const auto& a : apps)
            if (a.name == name) return &a;
        return nullptr;
    }
};

struct UnresolvedTrustedAppError : std::runtime_error {
    explicit UnresolvedTrustedAppError(const std::string& name)
        : std::runtime_error("trusted app " + name + " is not in the inventory") {}
};

// ---------------------------------------------------------------------------
// Policy compiler. High-level policies become whitelists of permitted flows;
// apps that handle raw camera data form a closed partition that can never
// reach a sink except through the designated trusted declassifier.
// ---------------------------------------------------------------------------

namespace detail {

inline void add_common_nodes(CommunicationGraph& g, const AppInventory& inv) {
    for (const auto& a : inv.apps) g.add_node(a.name, NodeRole::App);
    g.add_node(std::string(node::camera), NodeRole::Sensor);
    g.add_node(std::string(node::gps), NodeRole::Sensor);
    g.add_node(std::string(node::network), NodeRole::Sink);
    g.add_node(std::string(node::filesystem), NodeRole::Sink);
}

}  // namespace detail

inline CommunicationGraph compile_policy(const HighLevelPolicy& p, const AppInventory& inv) {
    CommunicationGraph g;
    detail::add_common_nodes(g, inv);
    g.net_whitelist.insert("*");  // address pinning is a separate, handwritten concern

    auto camera_apps = [&](auto&& pred) {
        std::vector<std::string> out;
        for (const auto& a : inv.apps)
            if (a.camera && pred(a)) out.push_back(a.name);
        return out;
    };

    switch (p.kind) {
        case PolicyKind::ProcessLocally: {
            // Camera-handling apps may only talk among themselves; everything
            // they touch inherits the no-network/no-filesystem restriction.
            auto tainted = [&](const InventoryEntry& a) { return a.camera; };
            for (const auto& a : inv.apps) {
                if (a.camera) g.add_edge(std::string(node::camera), a.name);
                if (a.gps) g.add_edge(std::string(node::gps), a.name);
                for (const auto& b : inv.apps) {
                    if (a.name == b.name) continue;
                    if (tainted(a) && !tainted(b)) continue;
                    g.add_edge(a.name, b.name);
                }
                if (a.network_facing && !tainted(a)) g.add_edge(a.name, std::string(node::network));
                if (a.file_writing && !tainted(a)) g.add_edge(a.name, std::string(node::filesystem));
            }
            break;
        }

        case PolicyKind::BlurExportedImages: {
            const InventoryEntry* blur = inv.find(p.blur_app);
            if (!blur) throw UnresolvedTrustedAppError(p.blur_app);
            const std::string& B = blur->name;
            auto in_c = [&](const InventoryEntry& a) { return a.camera && a.name != B; };
            auto raw_and_net = camera_apps(
                [&](const InventoryEntry& a) { return a.name != B && a.network_facing; });
            // An app that needs the raw feed AND network egress forces the
            // dual-instance variant: a second blur process interposes on the
            // outbound path while the first sanitizes the shared stream.
            bool dual = !raw_and_net.empty();
            const std::string egress = B + "#2";
            if (dual) g.add_node(egress, NodeRole::App).mark_trusted(egress);
            g.mark_trusted(B);

            g.add_edge(std::string(node::camera), B);
            for (const auto& a : inv.apps) {
                if (in_c(a)) g.add_edge(std::string(node::camera), a.name);
                if (a.gps) g.add_edge(std::string(node::gps), a.name);
            }
            for (const auto& a : inv.apps) {
                for (const auto& b : inv.apps) {
                    if (a.name == b.name) continue;
                    if (in_c(a) && !(in_c(b) || b.name == B)) continue;
                    g.add_edge(a.name, b.name);
                }
                if (dual && in_c(a)) g.add_edge(a.name, egress);
                if (a.network_facing && !in_c(a)) g.add_edge(a.name, std::string(node::network));
                if (a.file_writing && !in_c(a)) g.add_edge(a.name, std::string(node::filesystem));
            }
            if (dual) g.add_edge(egress, std::string(node::network));
            break;
        }

        case PolicyKind::UseDroneLanes: {
            const InventoryEntry* logger = inv.find(p.logger_app);
            if (!logger) throw UnresolvedTrustedAppError(p.logger_app);
            const std::string& L = logger->name;
            g.mark_trusted(L);
            g.add_edge(std::string(node::gps), L);
            for (const auto& a : inv.apps) {
                if (a.camera) g.add_edge(std::string(node::camera), a.name);
                if (a.gps && a.name != L) g.add_edge(std::string(node::gps), a.name);
                // the logger is isolated: GPS in, log destination out, nothing
                // else. No app may feed it fake fixes or read the lane log.
                if (a.name == L) continue;
                for (const auto& b : inv.apps)
                    if (a.name != b.name && b.name != L) g.add_edge(a.name, b.name);
                if (a.network_facing) g.add_edge(a.name, std::string(node::network));
                if (a.file_writing) g.add_edge(a.name, std::string(node::filesystem));
            }
            if (p.log_destination.kind == LogDestination::Kind::Filesystem) {
                g.add_edge(L, std::string(node::filesystem));
            } else {
                g.add_edge(L, std::string(node::network));
                g.net_whitelist.insert(p.log_destination.address);
            }
            break;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Policy file format (UTF-8, LF):
//   nodes:
//   <name> app|sensor|sink [trusted]
//   edges:
//   <src> -> <dst> [topic=T[,type=Y]]
//   netwhitelist:
//   <address>
// Blank lines and lines starting with `#` are ignored. An empty file is the
// empty (deny-everything) graph.
// ---------------------------------------------------------------------------

struct PolicyParseError : std::runtime_error {
    enum class Kind { Syntax, UndeclaredNode };
    Kind kind;
    std::size_t line;

    PolicyParseError(Kind k, std::size_t line_no, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
          kind(k),
          line(line_no) {}
};

namespace detail {

inline std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline TopicKey parse_key_token(const std::string& tok, std::size_t line_no) {
    if (tok.rfind("topic=", 0) != 0)
        throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                               "expected topic=... annotation, got '" + tok + "'");
    std::string rest = tok.substr(6);
    auto comma = rest.find(',');
    if (comma == std::string::npos) {
        if (rest.empty())
            throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no, "empty topic name");
        return TopicKey{rest, std::nullopt};
    }
    std::string topic_name = rest.substr(0, comma);
    std::string type_part = rest.substr(comma + 1);
    if (topic_name.empty() || type_part.rfind("type=", 0) != 0 || type_part.size() == 5)
        throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                               "malformed key annotation '" + tok + "'");
    return TopicKey{topic_name, type_part.substr(5)};
}

}  // namespace detail

inline CommunicationGraph parse_policy(std::string_view text) {
    CommunicationGraph g;
    enum class Section { Start, Nodes, Edges, Whitelist };
    Section section = Section::Start;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto toks = detail::tokenize(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks.size() == 1 && toks[0] == "nodes:") {
            if (section != Section::Start)
                throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                       "nodes: section out of order");
            section = Section::Nodes;
            continue;
        }
        if (toks.size() == 1 && toks[0] == "edges:") {
            if (section != Section::Nodes)
                throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                       "edges: section out of order");
            section = Section::Edges;
            continue;
        }
        if (toks.size() == 1 && toks[0] == "netwhitelist:") {
            if (section != Section::Nodes && section != Section::Edges)
                throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                       "netwhitelist: section out of order");
            section = Section::Whitelist;
            continue;
        }
        switch (section) {
            case Section::Start:
                throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                       "expected nodes: header before content");
            case Section::Nodes: {
                if (toks.size() < 2 || toks.size() > 3)
                    throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                           "node line must be '<name> <role> [trusted]'");
                NodeRole role;
                if (toks[1] == "app") role = NodeRole::App;
                else if (toks[1] == "sensor") role = NodeRole::Sensor;
                else if (toks[1] == "sink") role = NodeRole::Sink;
                else
                    throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                           "unknown role '" + toks[1] + "'");
                if (toks.size() == 3) {
                    if (toks[2] != "trusted")
                        throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                               "unexpected token '" + toks[2] + "'");
                    g.mark_trusted(toks[0]);
                }
                g.add_node(toks[0], role);
                break;
            }
            case Section::Edges: {
                if ((toks.size() != 3 && toks.size() != 4) || toks[1] != "->")
                    throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                           "edge line must be '<src> -> <dst> [topic=T[,type=Y]]'");
                if (!g.has_node(toks[0]))
                    throw PolicyParseError(PolicyParseError::Kind::UndeclaredNode, line_no,
                                           "undeclared node '" + toks[0] + "'");
                if (!g.has_node(toks[2]))
                    throw PolicyParseError(PolicyParseError::Kind::UndeclaredNode, line_no,
                                           "undeclared node '" + toks[2] + "'");
                std::optional<TopicKey> key;
                if (toks.size() == 4) key = detail::parse_key_token(toks[3], line_no);
                g.add_edge(toks[0], toks[2], std::move(key));
                break;
            }
            case Section::Whitelist: {
                if (toks.size() != 1)
                    throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                           "whitelist line must be a single address");
                g.net_whitelist.insert(toks[0]);
                break;
            }
        }
    }
    return g;
}

inline std::string serialize_policy(const CommunicationGraph& g) {
    std::ostringstream out;
    out << "nodes:\n";
    for (const auto& [id, role] : g.nodes) {
        out << id << ' ' << role_name(role);
        if (g.trusted.count(id)) out << " trusted";
        out << '\n';
    }
    out << "edges:\n";
    for (const auto& e : g.edges) {
        out << e.src << " -> " << e.dst;
        if (e.key) out << ' ' << e.key->str();
        out << '\n';
    }
    out << "netwhitelist:\n";
    for (const auto& addr : g.net_whitelist) out << addr << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Graph extraction from audit logs (audit2allow-style): each distinct allowed
// (src, dst, key) becomes a whitelist edge, with sensor/sink nodes synthesized.
// Self-flows are a process touching its own objects, not policy edges. The
// result is a candidate for an administrator to refine, never auto-loaded.
// ---------------------------------------------------------------------------

struct LogParseError : std::runtime_error {
    std::size_t line;
    LogParseError(std::size_t line_no, const std::string& msg)
        : std::runtime_error("audit line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct GraphCandidate {
    CommunicationGraph graph;
};

inline GraphCandidate extract_graph(const std::vector<AuditRecord>& log) {
    GraphCandidate out;
    for (const auto& r : log) {
        if (r.decision != Decision::Allow) continue;
        if (r.src == r.dst) continue;
        out.graph.add_node(r.src);
        out.graph.add_node(r.dst);
        out.graph.add_edge(r.src, r.dst, r.key);
    }
    return out;
}

inline GraphCandidate extract_graph_text(std::string_view exported) {
    std::istringstream in{std::string(exported)};
    std::string line;
    std::size_t line_no = 0;
    std::vector<AuditRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 8) throw LogParseError(line_no, "expected 8 tab-separated fields");
        AuditRecord r;
        try {
            r.time = std::stoull(fields[0]);
            r.graph_version = std::stoull(fields[7]);
        } catch (const std::exception&) {
            throw LogParseError(line_no, "malformed numeric field");
        }
        r.src = fields[2];
        r.dst = fields[3];
        if (fields[4] != "-") {
            try {
                r.key = detail::parse_key_token(fields[4], line_no);
            } catch (const PolicyParseError& e) {
                throw LogParseError(line_no, e.what());
            }
        }
        if (fields[6] == "ALLOW") r.decision = Decision::Allow;
        else if (fields[6] == "DENY") r.decision = Decision::Deny;
        else throw LogParseError(line_no, "verdict must be ALLOW or DENY");
        bool known_hook = false;
        for (Hook h : {Hook::Connect, Hook::Send, Hook::FileCreate, Hook::FileRead, Hook::FileWrite,
                       Hook::ShmAttach, Hook::MqSend, Hook::PipeConnect, Hook::SensorRead}) {
            if (fields[1] == hook_name(h)) {
                r.hook = h;
                known_hook = true;
            }
        }
        if (!known_hook) throw LogParseError(line_no, "unknown hook '" + fields[1] + "'");
        records.push_back(std::move(r));
    }
    return extract_graph(records);
}

// ---------------------------------------------------------------------------
// User agent: translate application names in the policy to process ids and
// load the graph into the reference monitor. Atomic on failure: the previous
// policy stays active if any app node does not resolve.
// ---------------------------------------------------------------------------

inline ActivationRecord bind_and_load(Runtime& rt, const CommunicationGraph& g) {
    auto violations = validate_graph(g);
    if (!violations.empty()) throw InvalidGraphError(violations);
    std::map<NodeId, Pid> binding;
    for (const auto& [id, role] : g.nodes) {
        if (role != NodeRole::App) continue;
        auto pid = rt.running_pid_of_node(id);
        if (!pid) throw UnresolvedAppError(id);
        binding.emplace(id, *pid);
    }
    return rt.activate_policy(g, std::move(binding));
}

// Inventory file: one app per line, `<name> [camera] [gps] [net] [file]`.
inline AppInventory parse_inventory(std::string_view text) {
    AppInventory inv;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::tokenize(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        InventoryEntry e;
        e.name = toks[0];
        for (std::size_t i = 1; i < toks.size(); ++i) {
            if (toks[i] == "camera") e.camera = true;
            else if (toks[i] == "gps") e.gps = true;
            else if (toks[i] == "net") e.network_facing = true;
            else if (toks[i] == "file") e.file_writing = true;
            else
                throw PolicyParseError(PolicyParseError::Kind::Syntax, line_no,
                                       "unknown inventory flag '" + toks[i] + "'");
        }
        inv.apps.push_back(std::move(e));
    }
    return inv;
}

}  // namespace privaros
