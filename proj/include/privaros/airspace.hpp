#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "privaros/crypto.hpp"
#include "privaros/middleware.hpp"
#include "privaros/policy.hpp"
#include "privaros/wire.hpp"

namespace privaros {

// ---------------------------------------------------------------------------
// Planar polygon geometry. Coordinates are decimal degrees treated as planar
// at desk scale; no geodesic math.
// ---------------------------------------------------------------------------

struct GeoPoint {
    double lat = 0;
    double lon = 0;

    bool operator==(const GeoPoint&) const = default;
};

struct GeoPolygon {
    std::vector<GeoPoint> vertices;  // ordered, closed implicitly (last -> first)

    bool operator==(const GeoPolygon&) const = default;
};

struct InvalidPolygonError : std::invalid_argument {
    explicit InvalidPolygonError(const std::string& why)
        : std::invalid_argument("invalid polygon: " + why) {}
};

namespace geo {

inline double cross(const GeoPoint& o, const GeoPoint& a, const GeoPoint& b) {
    return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

inline bool on_segment(const GeoPoint& a, const GeoPoint& b, const GeoPoint& p) {
    if (cross(a, b, p) != 0.0) return false;
    return std::min(a.lon, b.lon) <= p.lon && p.lon <= std::max(a.lon, b.lon) &&
           std::min(a.lat, b.lat) <= p.lat && p.lat <= std::max(a.lat, b.lat);
}

// Inclusive segment intersection: shared endpoints and touching count.
inline bool segments_intersect(const GeoPoint& p1, const GeoPoint& p2, const GeoPoint& q1,
                               const GeoPoint& q2) {
    double d1 = cross(q1, q2, p1);
    double d2 = cross(q1, q2, p2);
    double d3 = cross(p1, p2, q1);
    double d4 = cross(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(q1, q2, p1)) return true;
    if (d2 == 0 && on_segment(q1, q2, p2)) return true;
    if (d3 == 0 && on_segment(p1, p2, q1)) return true;
    if (d4 == 0 && on_segment(p1, p2, q2)) return true;
    return false;
}

}  // namespace geo

// Simplicity check: >= 3 vertices, no zero-length or overlapping adjacent
// edges, no two non-adjacent edges touching.
inline std::optional<std::string> polygon_defect(const GeoPolygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) return "needs at least 3 vertices";
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] == v[(i + 1) % n]) return "zero-length edge at vertex " + std::to_string(i);
    }
    for (std::size_t i = 0; i < n; ++i) {
        GeoPoint a1 = v[i], a2 = v[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            GeoPoint b1 = v[j], b2 = v[(j + 1) % n];
            bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // adjacent edges may only share their common endpoint
                GeoPoint shared = (j == i + 1) ? a2 : a1;
                GeoPoint a_free = (j == i + 1) ? a1 : a2;
                GeoPoint b_free = (j == i + 1) ? b2 : b1;
                if (geo::cross(shared, a_free, b_free) == 0.0 &&
                    (geo::on_segment(b1, b2, a_free) || geo::on_segment(a1, a2, b_free)))
                    return "overlapping adjacent edges at vertex " + std::to_string(j);
                continue;
            }
            if (geo::segments_intersect(a1, a2, b1, b2))
                return "edges " + std::to_string(i) + " and " + std::to_string(j) + " intersect";
        }
    }
    return std::nullopt;
}

inline bool polygon_valid(const GeoPolygon& poly) { return !polygon_defect(poly).has_value(); }

inline void require_valid(const GeoPolygon& poly) {
    if (auto defect = polygon_defect(poly)) throw InvalidPolygonError(*defect);
}

// Boundary-inclusive membership (enforce at the fence): points on an edge or
// vertex are inside. Interior test is by winding number.
inline bool point_in_polygon(const GeoPoint& p, const GeoPolygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i)
        if (geo::on_segment(v[i], v[(i + 1) % n], p)) return true;
    int winding = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const GeoPoint& a = v[i];
        const GeoPoint& b = v[(i + 1) % n];
        if (a.lat <= p.lat) {
            if (b.lat > p.lat && geo::cross(a, b, p) > 0) ++winding;
        } else {
            if (b.lat <= p.lat && geo::cross(a, b, p) < 0) --winding;
        }
    }
    return winding != 0;
}

// Areas overlap or boundaries touch; containment counts as intersection.
inline bool intersects(const GeoPolygon& a, const GeoPolygon& b) {
    for (const auto& p : a.vertices)
        if (point_in_polygon(p, b)) return true;
    for (const auto& p : b.vertices)
        if (point_in_polygon(p, a)) return true;
    const std::size_t na = a.vertices.size(), nb = b.vertices.size();
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j)
            if (geo::segments_intersect(a.vertices[i], a.vertices[(i + 1) % na], b.vertices[j],
                                        b.vertices[(j + 1) % nb]))
                return true;
    return false;
}

// Polygon file: one `lat lon` pair per line; blank and `#` lines ignored.
inline GeoPolygon parse_polygon_text(std::string_view text) {
    GeoPolygon poly;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first) || first[0] == '#') continue;
        GeoPoint p;
        char* end = nullptr;
        p.lat = std::strtod(first.c_str(), &end);
        if (end == first.c_str() || *end != '\0')
            throw std::invalid_argument("polygon line " + std::to_string(line_no) + ": bad latitude");
        if (!(ls >> p.lon))
            throw std::invalid_argument("polygon line " + std::to_string(line_no) + ": bad longitude");
        poly.vertices.push_back(p);
    }
    return poly;
}

inline std::string format_polygon_text(const GeoPolygon& poly) {
    std::string out;
    char buf[64];
    for (const auto& p : poly.vertices) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.lat, p.lon);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Permission artifact: the signed NPNT flight authorization bundling the
// geo-tagged policies of all intersected host airspaces.
//
// Canonical binary layout (little-endian):
//   magic "PVPA", u8 version(1),
//   drone public key (32),
//   flight region { u32 n, n * (u64 lat bits, u64 lon bits) },
//   u32 policy count, each { u32 id_len, id, polygon as above, u32 len, policy text },
//   u8 approved, u32 len + rejected zone id,
//   authority signature (32).
// ---------------------------------------------------------------------------

struct IssuedPolicy {
    std::string host_id;
    GeoPolygon airspace;
    std::string policy_text;  // serialized communication graph

    bool operator==(const IssuedPolicy&) const = default;
};

struct PermissionArtifact {
    PublicKey drone_key{};
    GeoPolygon flight_region;
    std::vector<IssuedPolicy> policies;
    bool approved = false;
    std::string rejected_zone;  // red zone id when rejected
    Signature authority_signature{};

    static constexpr std::string_view magic = "PVPA";

    bool operator==(const PermissionArtifact&) const = default;

    std::string signed_payload() const { return encode_body(); }

    std::string encode() const {
        std::string body = encode_body();
        body += digest_view(authority_signature);
        return body;
    }

    static PermissionArtifact decode(std::string_view data) {
        WireReader r(data);
        for (char c : magic)
            if (r.u8() != static_cast<std::uint8_t>(c)) throw WireError("bad artifact magic");
        if (r.u8() != 1) throw WireError("unsupported artifact version");
        PermissionArtifact a;
        a.drone_key = r.digest();
        a.flight_region = read_polygon(r);
        std::uint32_t n = r.u32();
        a.policies.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            IssuedPolicy p;
            p.host_id = r.bytes();
            p.airspace = read_polygon(r);
            p.policy_text = r.bytes();
            a.policies.push_back(std::move(p));
        }
        a.approved = r.u8() != 0;
        a.rejected_zone = r.bytes();
        a.authority_signature = r.digest();
        r.expect_done();
        return a;
    }

private:
    static void write_polygon(WireWriter& w, const GeoPolygon& poly) {
        w.u32(static_cast<std::uint32_t>(poly.vertices.size()));
        for (const auto& p : poly.vertices) {
            w.u64(std::bit_cast<std::uint64_t>(p.lat));
            w.u64(std::bit_cast<std::uint64_t>(p.lon));
        }
    }

    static GeoPolygon read_polygon(WireReader& r) {
        GeoPolygon poly;
        std::uint32_t n = r.u32();
        poly.vertices.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            GeoPoint p;
            p.lat = std::bit_cast<double>(r.u64());
            p.lon = std::bit_cast<double>(r.u64());
            poly.vertices.push_back(p);
        }
        return poly;
    }

    std::string encode_body() const {
        WireWriter w;
        for (char c : magic) w.u8(static_cast<std::uint8_t>(c));
        w.u8(1);
        w.digest(drone_key);
        write_polygon(w, flight_region);
        w.u32(static_cast<std::uint32_t>(policies.size()));
        for (const auto& p : policies) {
            w.bytes(p.host_id);
            write_polygon(w, p.airspace);
            w.bytes(p.policy_text);
        }
        w.u8(approved ? 1 : 0);
        w.bytes(rejected_zone);
        return w.take();
    }
};

// ---------------------------------------------------------------------------
// Digital-Sky-lite authority: registry of hosts (geo-tagged policies), red
// zones and drone identities; vets flight plans and issues signed artifacts.
// Registry persistence is an append-only newline-delimited text file.
// ---------------------------------------------------------------------------

struct UnknownDroneError : std::runtime_error {
    explicit UnknownDroneError(const std::string& key_hex)
        : std::runtime_error("drone key not registered: " + key_hex) {}
};

class Authority {
public:
    struct HostRecord {
        std::string id;
        GeoPolygon airspace;
        std::string policy_text;
    };

    struct RedZoneRecord {
        std::string id;
        GeoPolygon zone;
    };

    explicit Authority(std::string_view key_seed = "aviation-authority", std::string registry_path = "")
        : key_(make_keypair(key_seed)), registry_path_(std::move(registry_path)) {
        if (!registry_path_.empty()) reload();
    }

    const PublicKey& public_key() const { return key_.pub; }

    std::string register_host(std::string id, GeoPolygon airspace, std::string policy_text) {
        require_valid(airspace);
        parse_policy(policy_text);  // reject unparseable policies at registration
        require_fresh_id(id);
        persist(host_line(id, airspace, policy_text));
        hosts_.push_back({id, std::move(airspace), std::move(policy_text)});
        return id;
    }

    std::string register_redzone(std::string id, GeoPolygon zone) {
        require_valid(zone);
        require_fresh_id(id);
        persist(redzone_line(id, zone));
        redzones_.push_back({id, std::move(zone)});
        return id;
    }

    void register_drone(const PublicKey& drone_key) {
        if (drones_.insert(digest_view(drone_key)).second)
            persist("drone\t" + to_hex(drone_key) + "\n");
    }

    bool drone_registered(const PublicKey& drone_key) const {
        return drones_.count(digest_view(drone_key)) > 0;
    }

    // Rejects on the first intersecting red zone (registration order); else
    // approves and bundles the policy of every host airspace the region
    // intersects.
    PermissionArtifact submit_flight_plan(const PublicKey& drone_key, GeoPolygon region) const {
        if (!drone_registered(drone_key)) throw UnknownDroneError(to_hex(drone_key));
        require_valid(region);
        PermissionArtifact artifact;
        artifact.drone_key = drone_key;
        artifact.flight_region = region;
        artifact.approved = true;
        for (const auto& z : redzones_) {
            if (intersects(region, z.zone)) {
                artifact.approved = false;
                artifact.rejected_zone = z.id;
                break;
            }
        }
        if (artifact.approved) {
            for (const auto& h : hosts_)
                if (intersects(region, h.airspace))
                    artifact.policies.push_back({h.id, h.airspace, h.policy_text});
        }
        artifact.authority_signature = sign(key_, artifact.signed_payload());
        return artifact;
    }

    const std::vector<HostRecord>& hosts() const { return hosts_; }
    const std::vector<RedZoneRecord>& redzones() const { return redzones_; }

private:
    void require_fresh_id(const std::string& id) const {
        for (const auto& h : hosts_)
            if (h.id == id) throw std::invalid_argument("registry id already taken: " + id);
        for (const auto& z : redzones_)
            if (z.id == id) throw std::invalid_argument("registry id already taken: " + id);
    }

    static std::string polygon_field(const GeoPolygon& poly) {
        std::string out;
        char buf[64];
        for (std::size_t i = 0; i < poly.vertices.size(); ++i) {
            if (i) out += ';';
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", poly.vertices[i].lat,
                          poly.vertices[i].lon);
            out += buf;
        }
        return out;
    }

    static GeoPolygon parse_polygon_field(const std::string& field) {
        GeoPolygon poly;
        std::istringstream in(field);
        std::string pair;
        while (std::getline(in, pair, ';')) {
            auto comma = pair.find(',');
            if (comma == std::string::npos)
                throw std::invalid_argument("malformed polygon field in registry");
            poly.vertices.push_back(
                {std::strtod(pair.substr(0, comma).c_str(), nullptr),
                 std::strtod(pair.substr(comma + 1).c_str(), nullptr)});
        }
        return poly;
    }

    static std::string host_line(const std::string& id, const GeoPolygon& poly,
                                 const std::string& policy_text) {
        return "host\t" + id + "\t" + polygon_field(poly) + "\t" + to_hex(policy_text) + "\n";
    }

    static std::string redzone_line(const std::string& id, const GeoPolygon& poly) {
        return "redzone\t" + id + "\t" + polygon_field(poly) + "\n";
    }

    void persist(const std::string& line) {
        if (registry_path_.empty()) return;
        std::ofstream out(registry_path_, std::ios::app | std::ios::binary);
        if (!out) throw std::runtime_error("cannot open registry file " + registry_path_);
        out << line;
    }

    void reload() {
        std::ifstream in(registry_path_, std::ios::binary);
        if (!in) return;  // fresh registry
        std::string line;
        while (std::getline(in, line)) {
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
            if (fields[0] == "host" && fields.size() == 4) {
                hosts_.push_back({fields[1], parse_polygon_field(fields[2]), from_hex(fields[3])});
            } else if (fields[0] == "redzone" && fields.size() == 3) {
                redzones_.push_back({fields[1], parse_polygon_field(fields[2])});
            } else if (fields[0] == "drone" && fields.size() == 2) {
                drones_.insert(from_hex(fields[1]));
            } else {
                throw std::runtime_error("malformed registry record: " + line);
            }
        }
    }

    KeyPair key_;
    std::string registry_path_;
    std::vector<HostRecord> hosts_;
    std::vector<RedZoneRecord> redzones_;
    std::set<std::string> drones_;
};

// ---------------------------------------------------------------------------
// Drone-side geofence monitor: watches GPS fixes against the artifact's host
// airspaces, loading a host's policy on entry and unloading on exit.
// Overlapping hosts compose by graph intersection.
// ---------------------------------------------------------------------------

struct GeofenceEvent {
    enum class Kind { Enter, Exit };
    Kind kind;
    std::string host_id;

    bool operator==(const GeofenceEvent&) const = default;
};

struct NoArtifactError : std::logic_error {
    NoArtifactError() : std::logic_error("no permission artifact installed") {}
};

struct SignatureInvalidError : std::runtime_error {
    SignatureInvalidError() : std::runtime_error("artifact signature does not verify") {}
};

struct ArtifactRejectedError : std::runtime_error {
    explicit ArtifactRejectedError(const std::string& zone)
        : std::runtime_error("artifact was rejected (red zone " + zone + "); no-permission no-takeoff") {}
};

class GeofenceMonitor {
public:
    // runtime may be null for authorities or replay tools that only need the
    // event stream.
    explicit GeofenceMonitor(Runtime* runtime, PublicKey authority_key)
        : runtime_(runtime), authority_key_(authority_key) {}

    void install_artifact(PermissionArtifact artifact) {
        if (!verify(authority_key_, artifact.signed_payload(), artifact.authority_signature))
            throw SignatureInvalidError();
        if (!artifact.approved) throw ArtifactRejectedError(artifact.rejected_zone);
        graphs_.clear();
        for (const auto& p : artifact.policies) graphs_.emplace(p.host_id, parse_policy(p.policy_text));
        artifact_ = std::move(artifact);
        inside_.clear();
    }

    bool has_artifact() const { return artifact_.has_value(); }

    std::vector<GeofenceEvent> on_gps_update(const GeoPoint& fix) {
        if (!artifact_) throw NoArtifactError();
        std::vector<GeofenceEvent> events;
        bool was_empty = inside_.empty();
        bool changed = false;
        for (const auto& p : artifact_->policies) {
            bool now_inside = point_in_polygon(fix, p.airspace);
            bool was_inside = inside_.count(p.host_id) > 0;
            if (now_inside && !was_inside) {
                inside_.insert(p.host_id);
                events.push_back({GeofenceEvent::Kind::Enter, p.host_id});
                changed = true;
            } else if (!now_inside && was_inside) {
                inside_.erase(p.host_id);
                events.push_back({GeofenceEvent::Kind::Exit, p.host_id});
                changed = true;
            }
        }
        if (!point_in_polygon(fix, artifact_->flight_region)) {
            // outside the approved region: log the violation, keep enforcing
            // the last policy; recovery is a flight-control concern.
            violations_.push_back(fix);
        }
        if (changed && runtime_) {
            if (was_empty && !inside_.empty()) {
                baseline_ = runtime_->kernel().active_graph();  // pre-entry state
            }
            apply_active_policies();
        }
        return events;
    }

    const std::set<std::string>& inside() const { return inside_; }
    const std::vector<GeoPoint>& violations() const { return violations_; }

private:
    void apply_active_policies() {
        if (inside_.empty()) {
            // back to the pre-entry enforcement state
            if (baseline_) bind_and_load(*runtime_, *baseline_);
            else runtime_->unload_policy();
            baseline_.reset();
            return;
        }
        std::optional<CommunicationGraph> composed;
        for (const auto& p : artifact_->policies) {
            if (inside_.count(p.host_id) == 0) continue;
            const CommunicationGraph& g = graphs_.at(p.host_id);
            composed = composed ? graph_intersection(*composed, g) : g;
        }
        bind_and_load(*runtime_, *composed);
    }

    Runtime* runtime_;
    PublicKey authority_key_{};
    std::optional<PermissionArtifact> artifact_;
    std::map<std::string, CommunicationGraph> graphs_;
    std::optional<CommunicationGraph> baseline_;  // active graph before first entry
    std::set<std::string> inside_;
    std::vector<GeoPoint> violations_;
};

}  // namespace privaros
