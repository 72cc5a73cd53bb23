#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "privaros/model.hpp"

namespace privaros {

using Pid = std::uint64_t;
using ObjId = std::uint64_t;
using Time = std::uint64_t;

// Logical time; one tick models a millisecond of simulated time.
struct LogicalClock {
    Time now = 0;
    Time tick() { return ++now; }
    void advance(Time n) { now += n; }
};

enum class Mode { None, ManifestOnly, Full };

inline std::string_view mode_name(Mode m) {
    switch (m) {
        case Mode::None: return "none";
        case Mode::ManifestOnly: return "manifest";
        case Mode::Full: return "full";
    }
    return "none";
}

inline std::optional<Mode> mode_from_name(std::string_view s) {
    if (s == "none") return Mode::None;
    if (s == "manifest" || s == "manifest-only") return Mode::ManifestOnly;
    if (s == "full") return Mode::Full;
    return std::nullopt;
}

enum class Abstraction {
    LocalStream,
    NetworkStream,
    Datagram,
    SharedMemory,
    Pipe,
    MessageQueue,
    File,
};

inline std::string_view abstraction_name(Abstraction a) {
    switch (a) {
        case Abstraction::LocalStream: return "local-stream";
        case Abstraction::NetworkStream: return "network-stream";
        case Abstraction::Datagram: return "datagram";
        case Abstraction::SharedMemory: return "shared-memory";
        case Abstraction::Pipe: return "pipe";
        case Abstraction::MessageQueue: return "message-queue";
        case Abstraction::File: return "file";
    }
    return "local-stream";
}

enum class Hook {
    Connect,
    Send,
    FileCreate,
    FileRead,
    FileWrite,
    ShmAttach,
    MqSend,
    PipeConnect,
    SensorRead,
};

inline std::string_view hook_name(Hook h) {
    switch (h) {
        case Hook::Connect: return "connect";
        case Hook::Send: return "send";
        case Hook::FileCreate: return "file_create";
        case Hook::FileRead: return "file_read";
        case Hook::FileWrite: return "file_write";
        case Hook::ShmAttach: return "shm_attach";
        case Hook::MqSend: return "mq_send";
        case Hook::PipeConnect: return "pipe_connect";
        case Hook::SensorRead: return "sensor_read";
    }
    return "connect";
}

struct KernelObjectLabel {
    NodeId creator;            // never changes after creation
    Abstraction abstraction;
    std::string extra;         // for files: the persisted creator attribute
};

struct KernelObject {
    ObjId id = 0;
    KernelObjectLabel label;
    Pid endpoint_a = 0;            // initiator (streams/pipes)
    Pid endpoint_b = 0;            // peer
    std::optional<TopicKey> key;   // middleware channels annotate their stream
    bool open = true;
    std::string shm_bytes;
    std::deque<std::string> mq;
};

struct Verdict {
    Decision decision = Decision::Deny;
    std::string rule;   // edge / whitelist entry / permissive reason that justified it
    Hook hook = Hook::Connect;
    std::uint64_t graph_version = 0;

    bool allowed() const { return decision == Decision::Allow; }
};

struct AuditRecord {
    Time time = 0;
    Hook hook = Hook::Connect;
    NodeId src;
    NodeId dst;
    std::optional<TopicKey> key;
    Abstraction abstraction = Abstraction::LocalStream;
    Decision decision = Decision::Deny;
    std::uint64_t graph_version = 0;
};

struct InvalidGraphError : std::invalid_argument {
    explicit InvalidGraphError(const std::vector<Violation>& violations)
        : std::invalid_argument(format(violations)) {}

    static std::string format(const std::vector<Violation>& vs) {
        std::string msg = "invalid graph:";
        for (const auto& v : vs) msg += " [" + v.detail + "]";
        return msg;
    }
};

struct NoSuchFileError : std::runtime_error {
    explicit NoSuchFileError(const std::string& path)
        : std::runtime_error("no such file: " + path) {}
};

struct UnknownPidError : std::invalid_argument {
    explicit UnknownPidError(Pid pid)
        : std::invalid_argument("unknown pid: " + std::to_string(pid)) {}
};

// Simulated OS kernel layer. Every inter-process communication abstraction is
// mediated here; verdicts enforce the active communication graph at process
// granularity. OS-level enforcement is live only in Full mode; None models
// plain ROS and ManifestOnly models SROS, neither of which mediates kernel
// abstractions.
class RefMon {
public:
    struct NetDelivery {
        Time time = 0;
        NodeId src;
        std::string addr;
        std::string payload;
    };

    struct FileEntry {
        NodeId creator;  // persisted attribute, immutable
        std::string contents;
    };

    RefMon(LogicalClock& clock, Mode mode) : clock_(clock), mode_(mode) {}

    Mode mode() const { return mode_; }

    // -- process registry ---------------------------------------------------

    void register_process(Pid pid, NodeId node) { node_of_[pid] = std::move(node); }

    const NodeId& node_of(Pid pid) const {
        auto it = node_of_.find(pid);
        if (it == node_of_.end()) throw UnknownPidError(pid);
        return it->second;
    }

    // -- policy -------------------------------------------------------------

    struct Activation {
        std::uint64_t version = 0;
        Time at = 0;
    };

    Activation load_policy(CommunicationGraph g) {
        auto violations = validate_graph(g);
        if (!violations.empty()) throw InvalidGraphError(violations);
        graph_ = std::move(g);
        ++graph_version_;
        cache_.clear();
        Activation act{graph_version_, clock_.now};
        if (policy_changed_) policy_changed_();
        return act;
    }

    Activation unload_policy() {
        graph_.reset();
        ++graph_version_;
        cache_.clear();
        Activation act{graph_version_, clock_.now};
        if (policy_changed_) policy_changed_();
        return act;
    }

    void on_policy_change(std::function<void()> cb) { policy_changed_ = std::move(cb); }

    const std::optional<CommunicationGraph>& active_graph() const { return graph_; }
    std::uint64_t graph_version() const { return graph_version_; }

    // -- connection-oriented hooks -------------------------------------------

    struct ConnectResult {
        Verdict verdict;
        std::optional<ObjId> object;  // created only on ALLOW
    };

    ConnectResult hook_connect(Pid src, Pid dst, Abstraction kind,
                               const std::optional<TopicKey>& key = std::nullopt) {
        Verdict v = evaluate(Hook::Connect, node_of(src), node_of(dst), key, kind);
        if (!v.allowed()) return {v, std::nullopt};
        ObjId id = make_object(node_of(src), kind, src, dst, key);
        return {v, id};
    }

    // Per-direction data-plane check on an established stream or pipe: the
    // sender identity travels with the message, so the verdict is computed
    // where both endpoint identities are known.
    Verdict hook_send_stream(Pid src, ObjId obj) {
        KernelObject& o = object(obj);
        if (!o.open) throw std::logic_error("send on closed object");
        Pid peer = (o.endpoint_a == src) ? o.endpoint_b : o.endpoint_a;
        return evaluate(Hook::Send, node_of(src), node_of(peer), o.key, o.label.abstraction);
    }

    // Outbound network send: allowed only to whitelisted destinations, and
    // only for processes the graph lets reach the NETWORK sink.
    Verdict hook_send_net(Pid src, std::string_view dst_addr, std::string_view payload,
                          const std::optional<TopicKey>& key = std::nullopt) {
        const NodeId& sn = node_of(src);
        Verdict v;
        if (!enforcing()) {
            v = record(Hook::Send, sn, std::string(node::network), key,
                       Abstraction::NetworkStream, Decision::Allow, "permissive");
        } else {
            bool edge_ok = permits(*graph_, sn, node::network, key) == Decision::Allow;
            bool addr_ok = whitelisted(dst_addr);
            Decision d = edge_ok && addr_ok ? Decision::Allow : Decision::Deny;
            std::string rule = !edge_ok ? "no-edge:" + sn + "->NETWORK"
                                        : (addr_ok ? "netwhitelist:" + std::string(dst_addr)
                                                   : "unlisted-addr:" + std::string(dst_addr));
            v = record(Hook::Send, sn, std::string(node::network), key,
                       Abstraction::NetworkStream, d, rule);
        }
        if (v.allowed())
            net_transcript_.push_back({clock_.now, sn, std::string(dst_addr), std::string(payload)});
        return v;
    }

    // Sensor feeds are modeled as datagrams from the distinguished source node.
    Verdict hook_sensor_read(Pid reader, std::string_view sensor) {
        return evaluate(Hook::SensorRead, std::string(sensor), node_of(reader), std::nullopt,
                        Abstraction::Datagram);
    }

    // -- files ----------------------------------------------------------------

    Verdict file_create(Pid src, const std::string& path, std::string_view data = "") {
        const NodeId& sn = node_of(src);
        auto it = files_.find(path);
        if (it != files_.end()) return file_write(src, path, data);  // creator attribute persists
        Verdict v = evaluate(Hook::FileCreate, sn, std::string(node::filesystem), std::nullopt,
                             Abstraction::File);
        if (v.allowed()) files_[path] = FileEntry{sn, std::string(data)};
        return v;
    }

    std::pair<Verdict, std::string> file_read(Pid src, const std::string& path) {
        auto it = files_.find(path);
        if (it == files_.end()) throw NoSuchFileError(path);
        Verdict v = file_access(src, it->second.creator, Hook::FileRead);
        return {v, v.allowed() ? it->second.contents : std::string()};
    }

    Verdict file_write(Pid src, const std::string& path, std::string_view data) {
        auto it = files_.find(path);
        if (it == files_.end()) throw NoSuchFileError(path);
        Verdict v = file_access(src, it->second.creator, Hook::FileWrite);
        if (v.allowed()) it->second.contents.append(data);
        return v;
    }

    bool file_exists(const std::string& path) const { return files_.count(path) > 0; }

    const FileEntry& file_entry(const std::string& path) const {
        auto it = files_.find(path);
        if (it == files_.end()) throw NoSuchFileError(path);
        return it->second;
    }

    // Session save/restore for the persistent store; creator attributes survive.
    std::string save_files() const {
        std::ostringstream out;
        for (const auto& [path, f] : files_) {
            out << to_hex(path) << '\t' << to_hex(f.creator) << '\t' << to_hex(f.contents) << '\n';
        }
        return out.str();
    }

    void restore_files(const std::string& saved) {
        files_.clear();
        std::istringstream in(saved);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto t1 = line.find('\t');
            auto t2 = line.find('\t', t1 + 1);
            if (t1 == std::string::npos || t2 == std::string::npos)
                throw std::invalid_argument("malformed file store record");
            files_[from_hex(line.substr(0, t1))] =
                FileEntry{from_hex(line.substr(t1 + 1, t2 - t1 - 1)), from_hex(line.substr(t2 + 1))};
        }
    }

    // -- other abstractions ---------------------------------------------------

    ObjId create_shm(Pid creator) {
        return make_object(node_of(creator), Abstraction::SharedMemory, creator, 0, std::nullopt);
    }

    ObjId create_mq(Pid creator) {
        return make_object(node_of(creator), Abstraction::MessageQueue, creator, 0, std::nullopt);
    }

    ObjId create_pipe(Pid creator) {
        return make_object(node_of(creator), Abstraction::Pipe, creator, 0, std::nullopt);
    }

    // Attacher may observe the creator's data: verdict keyed creator -> attacher.
    Verdict hook_shm_attach(Pid src, ObjId obj) {
        KernelObject& o = object(obj);
        Verdict v = evaluate(Hook::ShmAttach, o.label.creator, node_of(src), std::nullopt,
                             Abstraction::SharedMemory);
        if (v.allowed()) o.endpoint_b = src;
        return v;
    }

    // Sender pushes data toward the queue's creator: verdict keyed src -> creator.
    Verdict hook_mq_send(Pid src, ObjId obj, std::string_view payload) {
        KernelObject& o = object(obj);
        Verdict v = evaluate(Hook::MqSend, node_of(src), o.label.creator, std::nullopt,
                             Abstraction::MessageQueue);
        if (v.allowed()) o.mq.emplace_back(payload);
        return v;
    }

    // Connector may read from the pipe: verdict keyed creator -> connector.
    // Uses the recorded creator label even if the creator has stopped.
    Verdict hook_pipe_connect(Pid src, ObjId obj) {
        KernelObject& o = object(obj);
        Verdict v = evaluate(Hook::PipeConnect, o.label.creator, node_of(src), std::nullopt,
                             Abstraction::Pipe);
        if (v.allowed()) o.endpoint_b = src;
        return v;
    }

    // -- datagrams (delivery-time verdicts) ------------------------------------

    // The receiving port may not be bound yet; the sender identity is attached
    // to the packet and the verdict is evaluated at delivery.
    void dgram_send(Pid src, const std::string& port, std::string_view payload) {
        dgram_ports_[port].packets.push_back({node_of(src), std::string(payload)});
    }

    void dgram_bind(Pid pid, const std::string& port) { dgram_ports_[port].bound = pid; }

    // Drains deliverable packets for the bound receiver; each packet gets its
    // own audited verdict against the sender recorded at send time.
    std::vector<std::string> dgram_recv(Pid pid, const std::string& port) {
        auto it = dgram_ports_.find(port);
        std::vector<std::string> out;
        if (it == dgram_ports_.end() || it->second.bound != pid) return out;
        for (auto& pkt : it->second.packets) {
            Verdict v = evaluate(Hook::Send, pkt.sender, node_of(pid), std::nullopt,
                                 Abstraction::Datagram);
            if (v.allowed()) out.push_back(std::move(pkt.payload));
        }
        it->second.packets.clear();
        return out;
    }

    // -- object and sink access -------------------------------------------------

    KernelObject& object(ObjId id) {
        auto it = objects_.find(id);
        if (it == objects_.end()) throw std::invalid_argument("unknown kernel object");
        return it->second;
    }

    void close_object(ObjId id) { object(id).open = false; }

    const std::vector<NetDelivery>& network_transcript() const { return net_transcript_; }
    const std::map<std::string, FileEntry>& files() const { return files_; }

    // -- audit --------------------------------------------------------------

    const std::vector<AuditRecord>& audit_log() const { return audit_; }

    std::uint64_t send_hook_count() const { return send_hooks_; }
    std::uint64_t cache_misses() const { return cache_misses_; }

    // Newline-delimited export, tab-separated fields in the order
    // (time, hook, src, dst, key, abstraction, verdict, graph-version).
    // key is `-` when absent, else `topic=T` or `topic=T,type=Y`.
    static std::string format_record(const AuditRecord& r) {
        std::ostringstream out;
        out << r.time << '\t' << hook_name(r.hook) << '\t' << r.src << '\t' << r.dst << '\t'
            << (r.key ? r.key->str() : "-") << '\t' << abstraction_name(r.abstraction) << '\t'
            << decision_name(r.decision) << '\t' << r.graph_version;
        return out.str();
    }

    std::string export_audit_log() const {
        std::string out;
        for (const auto& r : audit_) {
            out += format_record(r);
            out += '\n';
        }
        return out;
    }

private:
    struct Packet {
        NodeId sender;
        std::string payload;
    };

    struct DgramPort {
        std::optional<Pid> bound;
        std::vector<Packet> packets;
    };

    bool enforcing() const { return mode_ == Mode::Full && graph_.has_value(); }

    bool whitelisted(std::string_view addr) const {
        const auto& wl = graph_->net_whitelist;
        return wl.count("*") > 0 || wl.count(std::string(addr)) > 0;
    }

    Verdict file_access(Pid src, const NodeId& creator, Hook hook) {
        const NodeId& sn = node_of(src);
        if (sn == creator) {
            // self-access: a process can always reach its own files
            return record(hook, creator, sn, std::nullopt, Abstraction::File, Decision::Allow,
                          "self");
        }
        return evaluate(hook, creator, sn, std::nullopt, Abstraction::File);
    }

    ObjId make_object(NodeId creator, Abstraction kind, Pid a, Pid b,
                      std::optional<TopicKey> key) {
        ObjId id = next_obj_++;
        KernelObject o;
        o.id = id;
        o.label = KernelObjectLabel{creator, kind, kind == Abstraction::File ? creator : ""};
        o.endpoint_a = a;
        o.endpoint_b = b;
        o.key = std::move(key);
        objects_.emplace(id, std::move(o));
        return id;
    }

    // Core verdict: pure function of (src node, dst node, key, abstraction) for
    // a fixed graph version. Cached per tuple; the cache is dropped on every
    // policy (un)load so no evaluation can observe a half-loaded graph.
    Verdict evaluate(Hook hook, const NodeId& src, const NodeId& dst,
                     const std::optional<TopicKey>& key, Abstraction abs) {
        if (!enforcing())
            return record(hook, src, dst, key, abs, Decision::Allow, "permissive");
        CacheKey ck{src, dst, key, abs};
        auto it = cache_.find(ck);
        if (it != cache_.end())
            return record(hook, src, dst, key, abs, it->second.first, it->second.second);
        ++cache_misses_;
        clock_.tick();  // policy evaluation cost, analogous to the in-kernel hook overhead
        Decision d = permits(*graph_, src, dst, key);
        std::string rule = d == Decision::Allow
                               ? "edge:" + src + "->" + dst
                               : "no-edge:" + src + "->" + dst + (key ? "[" + key->str() + "]" : "");
        cache_.emplace(std::move(ck), std::make_pair(d, rule));
        return record(hook, src, dst, key, abs, d, rule);
    }

    Verdict record(Hook hook, const NodeId& src, const NodeId& dst,
                   const std::optional<TopicKey>& key, Abstraction abs, Decision d,
                   std::string rule) {
        Time t = clock_.tick();
        audit_.push_back(AuditRecord{t, hook, src, dst, key, abs, d, graph_version_});
        if (hook == Hook::Send) ++send_hooks_;
        return Verdict{d, std::move(rule), hook, graph_version_};
    }

    using CacheKey = std::tuple<NodeId, NodeId, std::optional<TopicKey>, Abstraction>;

    LogicalClock& clock_;
    Mode mode_;
    std::optional<CommunicationGraph> graph_;
    std::uint64_t graph_version_ = 0;
    std::function<void()> policy_changed_;
    std::map<Pid, NodeId> node_of_;
    std::map<ObjId, KernelObject> objects_;
    std::map<std::string, FileEntry> files_;
    std::map<std::string, DgramPort> dgram_ports_;
    std::vector<NetDelivery> net_transcript_;
    std::vector<AuditRecord> audit_;
    std::map<CacheKey, std::pair<Decision, std::string>> cache_;
    std::uint64_t next_obj_ = 1;
    std::uint64_t send_hooks_ = 0;
    std::uint64_t cache_misses_ = 0;
};

}  // namespace privaros
