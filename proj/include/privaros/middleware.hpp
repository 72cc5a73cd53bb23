#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "privaros/attest.hpp"
#include "privaros/model.hpp"
#include "privaros/refmon.hpp"

namespace privaros {

enum class ProcState { Running, Stopped };

struct AppProcess {
    Pid pid = 0;
    AppIdentity identity;
    std::string binary_image;
    Time launched_at = 0;
    ProcState state = ProcState::Running;
    NodeId node;  // identity name, suffixed #k for concurrent instances
};

enum class ChannelState { Open, TornDown };

struct Channel {
    std::uint64_t channel_id = 0;
    Pid publisher = 0;
    Pid subscriber = 0;
    TopicKey key;  // type_name always concrete while OPEN
    Abstraction transport = Abstraction::LocalStream;
    ChannelState state = ChannelState::Open;
    ObjId kernel_object = 0;
    bool injected = false;  // set up by redirection, exempt from manifest matching
};

struct Message {
    TopicKey key;
    std::string payload;
    Time at = 0;
};

enum class LaunchFailure { BadCertificate, DigestMismatch };

struct LaunchError : std::runtime_error {
    LaunchFailure kind;
    LaunchError(LaunchFailure k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

struct ManifestDeniedError : std::runtime_error {
    ManifestDeniedError(const std::string& app, const std::string& topic_name, bool publishing)
        : std::runtime_error("manifest of " + app + " does not allow " +
                             (publishing ? "publishing" : "subscribing") + " on topic " + topic_name) {}
};

struct NotRunningError : std::runtime_error {
    explicit NotRunningError(Pid pid)
        : std::runtime_error("process " + std::to_string(pid) + " is not running") {}
};

struct NotAdvertisedError : std::runtime_error {
    NotAdvertisedError(Pid pid, const TopicKey& key)
        : std::runtime_error("pid " + std::to_string(pid) + " has no advertisement for " + key.str()) {}
};

struct NotTrustedError : std::runtime_error {
    explicit NotTrustedError(const NodeId& via)
        : std::runtime_error("redirection target " + via + " is not a trusted node in the active graph") {}
};

struct EdgeNotPermittedError : std::runtime_error {
    EdgeNotPermittedError(const NodeId& src, const NodeId& dst)
        : std::runtime_error("active graph does not permit " + src + " -> " + dst) {}
};

struct UnresolvedAppError : std::runtime_error {
    explicit UnresolvedAppError(const std::string& name)
        : std::runtime_error("policy names app " + name + " with no running process") {}
};

struct RedirectRecord {
    NodeId src, dst, via;
    TopicKey key, out_key;
    std::vector<std::uint64_t> torn;
    std::vector<std::uint64_t> created;
};

struct ActivationRecord {
    std::uint64_t version = 0;
    Time at = 0;
    std::map<NodeId, Pid> binding;
    std::vector<std::uint64_t> torn_channels;
    std::vector<RedirectRecord> redirects;
};

// Deterministic single-runtime pub/sub middleware over the kernel layer.
// Discovery is centralized (one matchmaker) but idempotent and
// order-independent, so the observable behavior matches a decentralized
// protocol. All operations are serialized on one logical event loop.
class Runtime {
public:
    using MessageHandler = std::function<void(Runtime&, Pid self, const Message&)>;

    Runtime(Mode mode, const CertificateAuthority& ca, std::string_view tee_seed = "drone")
        : mode_(mode), ca_key_(ca.public_key()), refmon_(clock_, mode), tee_(clock_, tee_seed) {
        refmon_.on_policy_change([this] { enforce_channels(); });
        tee_.measure_boot_images(default_boot_components());
    }

    Runtime(Mode mode, const CertificateAuthority& ca,
            const std::vector<std::pair<std::string, std::string>>& boot_components,
            std::string_view tee_seed = "drone")
        : mode_(mode), ca_key_(ca.public_key()), refmon_(clock_, mode), tee_(clock_, tee_seed) {
        refmon_.on_policy_change([this] { enforce_channels(); });
        tee_.measure_boot_images(boot_components);
    }

    static std::vector<std::pair<std::string, std::string>> default_boot_components() {
        return {{"bootloader", "bootloader-image-v1"},
                {"kernel", "kernel-image-v1"},
                {"refmon", "refmon-module-v1"},
                {"middleware", "middleware-stack-v1"}};
    }

    Mode mode() const { return mode_; }
    Time now() const { return clock_.now; }
    void advance_clock(Time ticks) { clock_.advance(ticks); }
    RefMon& kernel() { return refmon_; }
    const RefMon& kernel() const { return refmon_; }
    Tee& tee() { return tee_; }
    const Tee& tee() const { return tee_; }

    // Shared-memory transport optimization flag; hook mediation is identical.
    void set_transport(Abstraction t) {
        if (t != Abstraction::LocalStream && t != Abstraction::SharedMemory)
            throw std::invalid_argument("channel transport must be local-stream or shared-memory");
        transport_ = t;
    }

    // -- process lifecycle ----------------------------------------------------

    // Launches an application image under a claimed identity.
    //   Full: certificate must verify and digest(image) must equal the certified
    //         binary digest, binding identity to the executable, not a path.
    //   ManifestOnly: certificate must verify; any image presented under the
    //         registered name is accepted (the SROS path-identity weakness).
    //   None: no checks at all.
    // Accepted launches are recorded in the TEE launch log with the digest of
    // the image actually executed.
    AppProcess& launch_app(std::string image, AppIdentity identity) {
        if (mode_ != Mode::None && !verify(ca_key_, identity.certified_payload(), identity.certificate))
            throw LaunchError(LaunchFailure::BadCertificate,
                              "certificate for " + identity.name + " does not verify under the CA key");
        Digest actual = sha256(image);
        if (mode_ == Mode::Full && actual != identity.binary_digest)
            throw LaunchError(LaunchFailure::DigestMismatch,
                              "binary digest mismatch for " + identity.name);
        AppProcess proc;
        proc.pid = next_pid_++;
        proc.node = assign_node_id(identity.name);
        proc.identity = std::move(identity);
        proc.binary_image = std::move(image);
        proc.launched_at = clock_.tick();
        procs_.emplace(proc.pid, proc);
        refmon_.register_process(proc.pid, procs_.at(proc.pid).node);
        tee_.record_launch(procs_.at(proc.pid).identity.name, actual);
        return procs_.at(proc.pid);
    }

    void stop_app(Pid pid) {
        AppProcess& p = proc(pid);
        if (p.state == ProcState::Stopped) return;
        p.state = ProcState::Stopped;
        std::erase_if(pubs_, [&](const Registration& r) { return r.pid == pid; });
        std::erase_if(subs_, [&](const Registration& r) { return r.pid == pid; });
        for (auto& ch : channels_) {
            if (ch.state == ChannelState::Open && (ch.publisher == pid || ch.subscriber == pid))
                tear_down(ch);
        }
    }

    AppProcess& proc(Pid pid) {
        auto it = procs_.find(pid);
        if (it == procs_.end()) throw UnknownPidError(pid);
        return it->second;
    }

    const AppProcess& proc(Pid pid) const {
        auto it = procs_.find(pid);
        if (it == procs_.end()) throw UnknownPidError(pid);
        return it->second;
    }

    std::optional<Pid> running_pid_of_node(std::string_view node_id) const {
        for (const auto& [pid, p] : procs_)
            if (p.state == ProcState::Running && p.node == node_id) return pid;
        return std::nullopt;
    }

    // -- registration -----------------------------------------------------------

    // Manifests list topics only (not types); enforced in ManifestOnly and Full.
    std::uint64_t advertise(Pid pid, TopicKey key) {
        const AppProcess& p = running(pid);
        if (mode_ != Mode::None && !p.identity.manifest.may_publish(key.topic))
            throw ManifestDeniedError(p.identity.name, key.topic, true);
        return add_registration(pubs_, pid, std::move(key), false);
    }

    std::uint64_t subscribe(Pid pid, TopicKey key) {
        const AppProcess& p = running(pid);
        if (mode_ != Mode::None && !p.identity.manifest.may_subscribe(key.topic))
            throw ManifestDeniedError(p.identity.name, key.topic, false);
        return add_registration(subs_, pid, std::move(key), false);
    }

    // The set of concrete type names currently advertised under a topic.
    std::set<std::string> probe_type(std::string_view topic_name) const {
        std::set<std::string> out;
        for (const auto& r : pubs_) {
            if (r.key.topic != topic_name) continue;
            auto it = procs_.find(r.pid);
            if (it == procs_.end() || it->second.state != ProcState::Running) continue;
            if (r.key.type_name) out.insert(*r.key.type_name);
        }
        return out;
    }

    // -- matchmaking and delivery -----------------------------------------------

    // Pairs every publisher registration with every subscriber registration
    // whose TopicKeys match, resolving the concrete type from the publisher
    // side, and opens a channel when the kernel-layer verdict is ALLOW (the
    // kernel checks the active graph; in None/ManifestOnly it is permissive).
    // Idempotent: existing OPEN channels are not duplicated; denied pairs are
    // left unconnected with the DENY on the audit log.
    std::vector<Channel> matchmake() {
        for (const auto& pr : pubs_) {
            if (!is_running(pr.pid)) continue;
            for (const auto& sr : subs_) {
                if (!is_running(sr.pid)) continue;
                if (!pr.key.matches(sr.key)) continue;
                TopicKey concrete = pr.key;  // publisher side carries the type
                if (!concrete.type_name) concrete.type_name = concrete.topic;
                if (find_open_channel(pr.pid, sr.pid, concrete)) continue;
                auto res = refmon_.hook_connect(pr.pid, sr.pid, transport_, concrete);
                if (!res.verdict.allowed()) continue;
                open_channel(pr.pid, sr.pid, concrete, *res.object, false);
            }
        }
        return open_channels();
    }

    // Delivers payload once per OPEN matching channel; every delivery runs the
    // kernel send hook, so the middleware cannot bypass the kernel layer.
    std::size_t publish(Pid pid, const TopicKey& key, std::string_view payload) {
        running(pid);
        bool advertised = false;
        for (const auto& r : pubs_)
            if (r.pid == pid && r.key.matches(key)) advertised = true;
        if (!advertised) throw NotAdvertisedError(pid, key);
        std::size_t delivered = 0;
        for (auto& ch : channels_) {
            if (ch.state != ChannelState::Open || ch.publisher != pid) continue;
            if (!ch.key.matches(key)) continue;
            Verdict v = refmon_.hook_send_stream(pid, ch.kernel_object);
            if (!v.allowed()) continue;
            deliver(ch.subscriber, Message{ch.key, std::string(payload), clock_.now});
            ++delivered;
        }
        return delivered;
    }

    std::size_t delivery_count() const { return deliveries_; }

    const std::vector<Message>& inbox(Pid pid) {
        running_or_stopped(pid);
        return inboxes_[pid];
    }

    void set_on_message(Pid pid, MessageHandler handler) { handlers_[pid] = std::move(handler); }

    // -- redirection --------------------------------------------------------------

    // Tears the direct src->dst channels on `key` (if any) and splices in the
    // trusted declassifier: src->via on the original key, via->dst on out_key.
    // The injected via->dst edge overrides the subscriber manifest; both hops
    // must still pass the kernel layer.
    RedirectRecord redirect(const NodeId& src, const NodeId& dst, const TopicKey& key,
                            const NodeId& via, TopicKey out_key) {
        const auto& graph = refmon_.active_graph();
        if (!graph || graph->trusted.count(via) == 0) throw NotTrustedError(via);
        if (permits(*graph, src, via, key) != Decision::Allow) throw EdgeNotPermittedError(src, via);
        if (!out_key.type_name) out_key.type_name = out_key.topic;
        if (permits(*graph, via, dst, out_key) != Decision::Allow)
            throw EdgeNotPermittedError(via, dst);
        return redirect_unchecked(src, dst, key, via, std::move(out_key));
    }

    // -- policy ---------------------------------------------------------------------

    // Loads a graph whose app nodes are already bound to pids: swaps the kernel
    // policy (tearing now-violating channels in the same step), then applies
    // automatic redirection through trusted declassifiers for every direct flow
    // the new graph interposes on. Running apps are never restarted.
    ActivationRecord activate_policy(CommunicationGraph g, std::map<NodeId, Pid> binding = {}) {
        CommunicationGraph staged = g;  // keep a copy for interposition scan
        last_torn_.clear();
        auto act = refmon_.load_policy(std::move(g));
        ActivationRecord rec;
        rec.version = act.version;
        rec.at = act.at;
        rec.binding = std::move(binding);
        rec.torn_channels = last_torn_;
        for (std::uint64_t chan_id : rec.torn_channels) {
            auto rr = try_interpose(staged, chan_id);
            if (rr) rec.redirects.push_back(std::move(*rr));
        }
        return rec;
    }

    RefMon::Activation unload_policy() { return refmon_.unload_policy(); }

    std::vector<std::uint64_t> last_torn_channels() const { return last_torn_; }

    // -- sensors and sinks -------------------------------------------------------

    void set_sensor_frame(std::string sensor, std::string bytes) {
        sensor_frames_[std::move(sensor)] = std::move(bytes);
    }

    // Mediated sensor access: nullopt when the kernel denies the flow.
    std::optional<std::string> read_sensor(Pid pid, std::string_view sensor) {
        running(pid);
        Verdict v = refmon_.hook_sensor_read(pid, sensor);
        if (!v.allowed()) return std::nullopt;
        auto it = sensor_frames_.find(std::string(sensor));
        return it == sensor_frames_.end() ? std::string() : it->second;
    }

    // -- event loop -----------------------------------------------------------------

    void enqueue(std::function<void()> task) { tasks_.push_back(std::move(task)); }

    bool step() {
        if (tasks_.empty()) return false;
        auto task = std::move(tasks_.front());
        tasks_.pop_front();
        clock_.tick();
        task();
        return true;
    }

    void run() {
        while (step()) {
        }
    }

    // -- channels ---------------------------------------------------------------------

    std::vector<Channel> open_channels() const {
        std::vector<Channel> out;
        for (const auto& ch : channels_)
            if (ch.state == ChannelState::Open) out.push_back(ch);
        return out;
    }

    const std::vector<Channel>& all_channels() const { return channels_; }

private:
    struct Registration {
        std::uint64_t id = 0;
        Pid pid = 0;
        TopicKey key;
        bool injected = false;
    };

    AppProcess& running(Pid pid) {
        AppProcess& p = proc(pid);
        if (p.state != ProcState::Running) throw NotRunningError(pid);
        return p;
    }

    void running_or_stopped(Pid pid) { proc(pid); }

    bool is_running(Pid pid) const {
        auto it = procs_.find(pid);
        return it != procs_.end() && it->second.state == ProcState::Running;
    }

    NodeId assign_node_id(const std::string& name) {
        auto taken = [&](const NodeId& id) {
            for (const auto& [pid, p] : procs_)
                if (p.state == ProcState::Running && p.node == id) return true;
            return false;
        };
        if (!taken(name)) return name;
        for (int k = 2;; ++k) {
            NodeId candidate = name + "#" + std::to_string(k);
            if (!taken(candidate)) return candidate;
        }
    }

    std::uint64_t add_registration(std::vector<Registration>& regs, Pid pid, TopicKey key,
                                   bool injected) {
        for (const auto& r : regs)
            if (r.pid == pid && r.key == key) return r.id;
        regs.push_back({next_reg_++, pid, std::move(key), injected});
        return regs.back().id;
    }

    Channel* find_open_channel(Pid pub, Pid sub, const TopicKey& key) {
        for (auto& ch : channels_)
            if (ch.state == ChannelState::Open && ch.publisher == pub && ch.subscriber == sub &&
                ch.key == key)
                return &ch;
        return nullptr;
    }

    Channel& open_channel(Pid pub, Pid sub, TopicKey key, ObjId obj, bool injected) {
        Channel ch;
        ch.channel_id = next_chan_++;
        ch.publisher = pub;
        ch.subscriber = sub;
        ch.key = std::move(key);
        ch.transport = transport_;
        ch.kernel_object = obj;
        ch.injected = injected;
        channels_.push_back(std::move(ch));
        return channels_.back();
    }

    void tear_down(Channel& ch) {
        if (ch.state == ChannelState::TornDown) return;
        ch.state = ChannelState::TornDown;  // in-flight data on the channel is dropped
        refmon_.close_object(ch.kernel_object);
        last_torn_.push_back(ch.channel_id);
    }

    void deliver(Pid to, Message msg) {
        ++deliveries_;
        inboxes_[to].push_back(msg);
        auto it = handlers_.find(to);
        if (it != handlers_.end() && it->second) {
            auto handler = it->second;
            enqueue([this, to, handler, msg = std::move(msg)] {
                if (is_running(to)) handler(*this, to, msg);
            });
        }
    }

    // Policy-change observer: tears every OPEN channel the new graph no longer
    // permits. Runs synchronously inside load/unload, between hook evaluations.
    void enforce_channels() {
        last_torn_.clear();
        const auto& graph = refmon_.active_graph();
        if (mode_ != Mode::Full || !graph) return;
        for (auto& ch : channels_) {
            if (ch.state != ChannelState::Open) continue;
            const NodeId& pub = refmon_.node_of(ch.publisher);
            const NodeId& sub = refmon_.node_of(ch.subscriber);
            if (permits(*graph, pub, sub, ch.key) != Decision::Allow) tear_down(ch);
        }
    }

    RedirectRecord redirect_unchecked(const NodeId& src, const NodeId& dst, const TopicKey& key,
                                      const NodeId& via, TopicKey out_key) {
        RedirectRecord rec;
        rec.src = src;
        rec.dst = dst;
        rec.via = via;
        rec.key = key;
        rec.out_key = out_key;

        auto src_pid = running_pid_of_node(src);
        auto dst_pid = running_pid_of_node(dst);
        auto via_pid = running_pid_of_node(via);
        if (!via_pid) throw UnresolvedAppError(via);

        // tear any remaining direct channels on the redirected key
        if (src_pid && dst_pid) {
            for (auto& ch : channels_) {
                if (ch.state == ChannelState::Open && ch.publisher == *src_pid &&
                    ch.subscriber == *dst_pid && ch.key.matches(key))
                    tear_down(ch);
            }
        }

        // src -> via: one channel per concrete type advertised under the key
        if (src_pid) {
            std::vector<TopicKey> concrete;
            for (const auto& r : pubs_)
                if (r.pid == *src_pid && r.key.matches(key))
                    concrete.push_back(TopicKey{r.key.topic,
                                                r.key.type_name ? r.key.type_name : key.type_name});
            if (concrete.empty()) concrete.push_back(key);
            for (auto ck : concrete) {
                if (!ck.type_name) ck.type_name = ck.topic;
                if (find_open_channel(*src_pid, *via_pid, ck)) continue;
                auto res = refmon_.hook_connect(*src_pid, *via_pid, transport_, ck);
                if (!res.verdict.allowed()) continue;
                rec.created.push_back(
                    open_channel(*src_pid, *via_pid, ck, *res.object, true).channel_id);
                add_registration(subs_, *via_pid, ck, true);
            }
        }

        // via -> dst on out_key, overriding dst's manifest for the injected edge
        if (!out_key.type_name) out_key.type_name = out_key.topic;
        add_registration(pubs_, *via_pid, out_key, true);
        if (dst_pid && !find_open_channel(*via_pid, *dst_pid, out_key)) {
            auto res = refmon_.hook_connect(*via_pid, *dst_pid, transport_, out_key);
            if (res.verdict.allowed()) {
                rec.created.push_back(
                    open_channel(*via_pid, *dst_pid, out_key, *res.object, true).channel_id);
                add_registration(subs_, *dst_pid, out_key, true);
            }
        }

        rec.torn = last_torn_;
        return rec;
    }

    // Automatic interposition after a policy load: if a torn direct flow
    // src->dst matches a trusted pattern src->T->dst in the new graph, splice
    // the declassifier in. The via->dst annotation (when present) names the
    // sanitized output topic.
    std::optional<RedirectRecord> try_interpose(const CommunicationGraph& g, std::uint64_t chan_id) {
        NodeId src, dst;
        TopicKey torn_key;
        bool found = false;
        for (const auto& ch : channels_) {
            if (ch.channel_id != chan_id) continue;
            src = refmon_.node_of(ch.publisher);
            dst = refmon_.node_of(ch.subscriber);
            torn_key = ch.key;
            found = true;
        }
        if (!found) return std::nullopt;
        for (const auto& via : g.trusted) {  // deterministic: lexicographic order
            if (via == src || via == dst) continue;
            if (!running_pid_of_node(via)) continue;
            if (permits(g, src, via, torn_key) != Decision::Allow) continue;
            std::optional<TopicKey> out;
            for (const auto& e : g.edges) {
                if (e.src != via || e.dst != dst) continue;
                TopicKey candidate = e.key ? *e.key : torn_key;
                if (!candidate.type_name) candidate.type_name = torn_key.type_name;
                if (permits(g, via, dst, candidate) == Decision::Allow) {
                    out = std::move(candidate);
                    break;
                }
            }
            if (!out) continue;
            last_torn_.clear();
            return redirect_unchecked(src, dst, torn_key, via, *out);
        }
        return std::nullopt;
    }

    Mode mode_;
    PublicKey ca_key_{};
    LogicalClock clock_;
    RefMon refmon_;
    Tee tee_;
    Abstraction transport_ = Abstraction::LocalStream;
    Pid next_pid_ = 1;
    std::uint64_t next_reg_ = 1;
    std::uint64_t next_chan_ = 1;
    std::map<Pid, AppProcess> procs_;
    std::vector<Registration> pubs_;
    std::vector<Registration> subs_;
    std::vector<Channel> channels_;
    std::map<Pid, std::vector<Message>> inboxes_;
    std::map<Pid, MessageHandler> handlers_;
    std::map<std::string, std::string> sensor_frames_;
    std::deque<std::function<void()>> tasks_;
    std::vector<std::uint64_t> last_torn_;
    std::size_t deliveries_ = 0;
};

}  // namespace privaros
