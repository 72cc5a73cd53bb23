// Command-line front end: scenario runner, benchmarks, policy tooling, the
// aviation-authority registry and attestation utilities.

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "privaros/airspace.hpp"
#include "privaros/harness.hpp"
#include "privaros/policy.hpp"

using namespace privaros;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write file: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

void emit(const std::string& path_or_stdout, std::string_view data) {
    if (path_or_stdout.empty() || path_or_stdout == "-")
        std::cout << data;
    else
        write_file(path_or_stdout, data);
}

Mode parse_mode(const std::string& s) {
    auto m = mode_from_name(s);
    if (!m) throw UsageError("unknown mode: " + s + " (use none|manifest|full)");
    return *m;
}

json bench_json(const BenchStats& s) {
    return json{{"workload", s.workload},
                {"mode", std::string(mode_name(s.mode))},
                {"messages", s.messages},
                {"delivered", s.delivered},
                {"median_latency_ticks", s.median_latency_ticks},
                {"median_latency_us", s.median_latency_us},
                {"msgs_per_sec", s.msgs_per_sec}};
}

double overhead_pct(double base, double value) {
    return base > 0 ? (value - base) / base * 100.0 : 0.0;
}

// Demo drone fixture shared by `attest report` and `attest verify` defaults.
struct DemoDrone {
    CertificateAuthority ca;
    Runtime rt;

    DemoDrone() : ca("privaros.ca"), rt(Mode::Full, ca, "drone") {
        auto scrub = ca.issue("ScrubStatus", sha256("scrub-status-v1"),
                              {{"SanitizedStatus"}, {"CameraOutput"}});
        auto blur = ca.issue("BlurFilter", sha256("blur-filter-v1"),
                             {{"SanitizedImages"}, {"CameraOutput"}});
        rt.launch_app("scrub-status-v1", scrub);
        rt.launch_app("blur-filter-v1", blur);
    }

    static std::map<std::string, Digest> trusted_apps() {
        return {{"ScrubStatus", sha256("scrub-status-v1")},
                {"BlurFilter", sha256("blur-filter-v1")}};
    }

    static Digest expected_chain() {
        std::vector<MeasuredComponent> cs;
        for (const auto& [name, image] : Runtime::default_boot_components())
            cs.push_back({name, sha256(image)});
        return MeasurementChain::compute(cs);
    }
};

int cmd_scenarios(bool as_json) {
    for (const auto& s : builtin_scenarios()) {
        if (as_json) {
            json expected;
            for (const auto& [mode, out] : s.expected)
                expected[std::string(mode_name(mode))] = std::string(outcome_name(out));
            std::cout << json{{"name", s.name}, {"summary", s.summary}, {"expected", expected}}
                      << "\n";
        } else {
            std::cout << s.name << " — " << s.summary << "\n";
        }
    }
    return 0;
}

int cmd_run(const std::string& name, const std::string& mode_str, bool as_json) {
    Mode mode = parse_mode(mode_str);
    const Scenario& s = find_scenario(name);
    auto result = s.run(mode);
    Outcome expected = s.expected.at(mode);
    bool match = result.outcome == expected;
    if (as_json) {
        std::cout << json{{"command", "run"},
                          {"scenario", name},
                          {"mode", std::string(mode_name(mode))},
                          {"outcome", std::string(outcome_name(result.outcome))},
                          {"expected", std::string(outcome_name(expected))},
                          {"match", match}}
                  << "\n";
    } else {
        for (const auto& line : result.transcript) std::cout << line << "\n";
        std::cout << name << " [" << mode_name(mode) << "]: " << outcome_name(result.outcome)
                  << " (expected " << outcome_name(expected) << ")\n";
    }
    return match ? 0 : 1;
}

int cmd_bench(const std::string& workload_str, const std::string& mode_str, std::size_t count,
              bool as_json) {
    if (workload_str == "redirect") {
        auto rb = bench_redirection(count);
        if (as_json) {
            json j{{"command", "bench"},
                   {"workload", "redirect"},
                   {"direct", bench_json(rb.direct)},
                   {"null_filter", bench_json(rb.null_filter)},
                   {"pixelate_filter", bench_json(rb.pixelate_filter)},
                   {"null_overhead_ticks_pct", overhead_pct(rb.direct.median_latency_ticks,
                                                            rb.null_filter.median_latency_ticks)},
                   {"pixelate_overhead_us_pct", overhead_pct(rb.null_filter.median_latency_us,
                                                             rb.pixelate_filter.median_latency_us)}};
            std::cout << j << "\n";
        } else {
            auto line = [](const char* label, const BenchStats& s) {
                std::printf("%-18s median %.1f ticks / %.1f us, %.0f msg/s, %zu delivered\n", label,
                            s.median_latency_ticks, s.median_latency_us, s.msgs_per_sec,
                            s.delivered);
            };
            line("direct", rb.direct);
            line("null filter", rb.null_filter);
            line("pixelate filter", rb.pixelate_filter);
        }
        return 0;
    }

    auto w = workload_from_name(workload_str);
    if (!w)
        throw UsageError("unknown workload: " + workload_str +
                         " (use array-1m|pointcloud-1m|struct-32k|navsat|range|redirect)");
    Mode mode = parse_mode(mode_str);
    auto stats = bench(*w, mode, count);
    std::optional<BenchStats> baseline;
    if (mode == Mode::Full) baseline = bench(*w, Mode::None, count);
    if (as_json) {
        json j = bench_json(stats);
        j["command"] = "bench";
        if (baseline) {
            j["baseline_none"] = bench_json(*baseline);
            j["overhead_vs_none_ticks_pct"] =
                overhead_pct(baseline->median_latency_ticks, stats.median_latency_ticks);
            j["overhead_vs_none_us_pct"] =
                overhead_pct(baseline->median_latency_us, stats.median_latency_us);
        }
        std::cout << j << "\n";
    } else {
        std::printf("%s [%s]: median %.1f ticks / %.2f us per message, %.0f msg/s, %zu/%zu delivered\n",
                    stats.workload.c_str(), std::string(mode_name(mode)).c_str(),
                    stats.median_latency_ticks, stats.median_latency_us, stats.msgs_per_sec,
                    stats.delivered, stats.messages);
        if (baseline)
            std::printf("overhead vs none: %+.1f%% ticks, %+.1f%% wall\n",
                        overhead_pct(baseline->median_latency_ticks, stats.median_latency_ticks),
                        overhead_pct(baseline->median_latency_us, stats.median_latency_us));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Privacy-policy enforcement framework for delivery-drone software"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "one JSON object per result line");

    // run
    auto* run_cmd = app.add_subcommand("run", "run a builtin attack/defense scenario");
    std::string run_name, run_mode = "full";
    run_cmd->add_option("scenario", run_name, "scenario name (see `scenarios`)")->required();
    run_cmd->add_option("--mode", run_mode, "none|manifest|full")->capture_default_str();

    // scenarios
    auto* scen_cmd = app.add_subcommand("scenarios", "list builtin scenarios");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "publish/subscribe microbenchmarks");
    std::string bench_workload, bench_mode = "full";
    std::size_t bench_count = 200;
    bench_cmd->add_option("workload", bench_workload,
                          "array-1m|pointcloud-1m|struct-32k|navsat|range|redirect")
        ->required();
    bench_cmd->add_option("--mode", bench_mode, "none|manifest|full")->capture_default_str();
    bench_cmd->add_option("--count", bench_count, "messages per run")->capture_default_str();

    // policy
    auto* policy_cmd = app.add_subcommand("policy", "compile, check and extract policies");
    policy_cmd->require_subcommand(1);
    auto* compile_cmd = policy_cmd->add_subcommand("compile", "compile a high-level policy");
    std::string compile_kind, compile_inventory, compile_blur, compile_logger,
        compile_logdest = "file", compile_out;
    compile_cmd->add_option("--kind", compile_kind,
                            "ProcessLocally|BlurExportedImages|UseDroneLanes")
        ->required();
    compile_cmd->add_option("--inventory", compile_inventory, "inventory file")->required();
    compile_cmd->add_option("--blur-app", compile_blur, "trusted blur application name");
    compile_cmd->add_option("--logger-app", compile_logger, "trusted logger application name");
    compile_cmd->add_option("--log-dest", compile_logdest, "file or net:<address>");
    compile_cmd->add_option("-o,--out", compile_out, "output policy file (default stdout)");

    auto* parse_cmd = policy_cmd->add_subcommand("parse", "validate and normalize a policy file");
    std::string parse_in, parse_out;
    parse_cmd->add_option("file", parse_in, "policy file")->required();
    parse_cmd->add_option("-o,--out", parse_out, "normalized output (default stdout)");

    auto* extract_cmd =
        policy_cmd->add_subcommand("extract", "extract a candidate graph from an audit log");
    std::string extract_in, extract_out;
    extract_cmd->add_option("log", extract_in, "audit log export")->required();
    extract_cmd->add_option("-o,--out", extract_out, "output policy file (default stdout)");

    // airspace
    auto* air_cmd = app.add_subcommand("airspace", "aviation-authority registry operations");
    air_cmd->require_subcommand(1);
    std::string registry_path;
    air_cmd->add_option("--registry", registry_path, "registry file (persisted)")->required();

    auto* host_cmd = air_cmd->add_subcommand("host-register", "register a host airspace policy");
    std::string host_id, host_poly, host_policy;
    host_cmd->add_option("--id", host_id, "host id")->required();
    host_cmd->add_option("--polygon", host_poly, "polygon file, one 'lat lon' per line")
        ->required();
    host_cmd->add_option("--policy", host_policy, "policy file")->required();

    auto* red_cmd = air_cmd->add_subcommand("redzone-register", "register a no-fly zone");
    std::string red_id, red_poly;
    red_cmd->add_option("--id", red_id, "zone id")->required();
    red_cmd->add_option("--polygon", red_poly, "polygon file")->required();

    auto* drone_cmd = air_cmd->add_subcommand("drone-register", "register a drone public key");
    std::string drone_key_hex;
    drone_cmd->add_option("--key", drone_key_hex, "drone public key (64 hex chars)")->required();

    auto* plan_cmd = air_cmd->add_subcommand("plan-submit", "vet a flight plan, issue an artifact");
    std::string plan_key_hex, plan_poly, plan_out;
    plan_cmd->add_option("--drone-key", plan_key_hex, "drone public key (64 hex chars)")
        ->required();
    plan_cmd->add_option("--polygon", plan_poly, "flight region polygon file")->required();
    plan_cmd->add_option("-o,--out", plan_out, "artifact output file");

    // attest
    auto* attest_cmd = app.add_subcommand("attest", "attestation report tooling");
    attest_cmd->require_subcommand(1);
    auto* report_cmd = attest_cmd->add_subcommand("report", "produce a demo-drone report");
    std::string report_nonce, report_out;
    report_cmd->add_option("--nonce", report_nonce, "challenger nonce")->required();
    report_cmd->add_option("-o,--out", report_out, "report output file (default stdout)");

    auto* verify_cmd = attest_cmd->add_subcommand("verify", "verify a report file");
    std::string verify_in, verify_nonce, verify_chain_hex, verify_key_hex;
    std::vector<std::string> verify_trusted;
    verify_cmd->add_option("report", verify_in, "report file")->required();
    verify_cmd->add_option("--nonce", verify_nonce, "expected nonce")->required();
    verify_cmd->add_option("--chain", verify_chain_hex, "expected boot chain (hex, default demo)");
    verify_cmd->add_option("--drone-key", verify_key_hex,
                           "drone public key (hex, default demo drone)");
    verify_cmd->add_option("--trusted", verify_trusted,
                           "expected trusted app as name=digesthex (default demo set)");

    // global flags like --json may appear after any subcommand
    std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* cmd) {
        for (CLI::App* sub : cmd->get_subcommands([](const CLI::App*) { return true; })) {
            sub->fallthrough();
            enable_fallthrough(sub);
        }
    };
    enable_fallthrough(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (*run_cmd) return cmd_run(run_name, run_mode, as_json);
        if (*scen_cmd) return cmd_scenarios(as_json);
        if (*bench_cmd) return cmd_bench(bench_workload, bench_mode, bench_count, as_json);

        if (*compile_cmd) {
            auto kind = policy_kind_from_name(compile_kind);
            if (!kind) throw UsageError("unknown policy kind: " + compile_kind);
            auto inv = parse_inventory(read_file(compile_inventory));
            HighLevelPolicy p;
            p.kind = *kind;
            if (*kind == PolicyKind::BlurExportedImages) {
                if (compile_blur.empty()) throw UsageError("--blur-app is required for this kind");
                p.blur_app = compile_blur;
            }
            if (*kind == PolicyKind::UseDroneLanes) {
                if (compile_logger.empty())
                    throw UsageError("--logger-app is required for this kind");
                p.logger_app = compile_logger;
                if (compile_logdest == "file") {
                    p.log_destination = {LogDestination::Kind::Filesystem, ""};
                } else if (compile_logdest.rfind("net:", 0) == 0) {
                    p.log_destination = {LogDestination::Kind::Network, compile_logdest.substr(4)};
                } else {
                    throw UsageError("--log-dest must be 'file' or 'net:<address>'");
                }
            }
            emit(compile_out, serialize_policy(compile_policy(p, inv)));
            return 0;
        }
        if (*parse_cmd) {
            auto g = parse_policy(read_file(parse_in));
            emit(parse_out, serialize_policy(g));
            return 0;
        }
        if (*extract_cmd) {
            auto cand = extract_graph_text(read_file(extract_in));
            emit(extract_out, "# extracted candidate graph; review before loading\n" +
                                  serialize_policy(cand.graph));
            return 0;
        }

        if (air_cmd->parsed()) {
            Authority authority("aviation-authority", registry_path);
            if (*host_cmd) {
                authority.register_host(host_id, parse_polygon_text(read_file(host_poly)),
                                        read_file(host_policy));
                std::cout << "registered host " << host_id << "\n";
                return 0;
            }
            if (*red_cmd) {
                authority.register_redzone(red_id, parse_polygon_text(read_file(red_poly)));
                std::cout << "registered red zone " << red_id << "\n";
                return 0;
            }
            if (*drone_cmd) {
                authority.register_drone(digest_from_hex(drone_key_hex));
                std::cout << "registered drone key\n";
                return 0;
            }
            if (*plan_cmd) {
                auto artifact = authority.submit_flight_plan(
                    digest_from_hex(plan_key_hex), parse_polygon_text(read_file(plan_poly)));
                if (!plan_out.empty()) write_file(plan_out, artifact.encode());
                if (as_json) {
                    std::cout << json{{"command", "plan-submit"},
                                      {"approved", artifact.approved},
                                      {"rejected_zone", artifact.rejected_zone},
                                      {"policies", artifact.policies.size()}}
                              << "\n";
                } else if (artifact.approved) {
                    std::cout << "APPROVED with " << artifact.policies.size()
                              << " host policy(ies)\n";
                } else {
                    std::cout << "REJECTED: intersects red zone " << artifact.rejected_zone
                              << "\n";
                }
                return artifact.approved ? 0 : 1;
            }
        }

        if (*report_cmd) {
            DemoDrone demo;
            auto rep = demo.rt.tee().attest(report_nonce);
            emit(report_out, rep.encode());
            if (as_json)
                std::cout << json{{"command", "attest-report"},
                                  {"chain", to_hex(rep.boot_chain)},
                                  {"launches", rep.launch_log.size()}}
                          << "\n";
            return 0;
        }
        if (*verify_cmd) {
            auto rep = AttestationReport::decode(read_file(verify_in));
            Digest chain = verify_chain_hex.empty() ? DemoDrone::expected_chain()
                                                    : digest_from_hex(verify_chain_hex);
            std::map<std::string, Digest> trusted;
            if (verify_trusted.empty()) {
                trusted = DemoDrone::trusted_apps();
            } else {
                for (const auto& entry : verify_trusted) {
                    auto eq = entry.find('=');
                    if (eq == std::string::npos)
                        throw UsageError("--trusted expects name=digesthex, got " + entry);
                    trusted[entry.substr(0, eq)] = digest_from_hex(entry.substr(eq + 1));
                }
            }
            // the demo drone's key pair derives from its TEE seed
            PublicKey drone_pub = verify_key_hex.empty() ? make_keypair("drone").pub
                                                         : digest_from_hex(verify_key_hex);
            auto res = verify_report(rep, chain, trusted, drone_pub, verify_nonce);
            if (as_json) {
                std::cout << json{{"command", "attest-verify"},
                                  {"trusted", res.trusted},
                                  {"reason", res.reason}}
                          << "\n";
            } else {
                std::cout << (res.trusted ? "TRUSTED" : "UNTRUSTED(" + res.reason + ")") << "\n";
            }
            return res.trusted ? 0 : 1;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
