#include "doctest.h"

#include "privaros/harness.hpp"

using namespace privaros;

TEST_CASE("pixelation destroys the sentinel but keeps the image shape") {
    Image img = synthetic_camera_image();
    REQUIRE(img.pixels.find(camera_sentinel()) != std::string::npos);
    Image blurred = blur_pixelate(img);
    CHECK(blurred.width == img.width);
    CHECK(blurred.height == img.height);
    CHECK(blurred.pixels.size() == img.pixels.size());
    CHECK(blurred.pixels.find(camera_sentinel()) == std::string::npos);
    CHECK(blurred.encode().find(camera_sentinel()) == std::string::npos);
    CHECK(Image::decode(img.encode()).pixels == img.pixels);
}

TEST_CASE("image decoding rejects inconsistent payloads") {
    Image img = synthetic_camera_image();
    auto bytes = img.encode();
    CHECK_THROWS_AS((void)Image::decode(bytes.substr(0, 16)), WireError);   // truncated
    auto lied = bytes;
    lied[0] = 10;  // claimed width no longer matches the pixel count
    CHECK_THROWS_AS((void)Image::decode(lied), WireError);
}

TEST_CASE("every builtin scenario matches its expectation table") {
    REQUIRE(builtin_scenarios().size() >= 7);
    for (const auto& s : builtin_scenarios()) {
        REQUIRE(s.expected.size() == 3);  // expectations cover all three modes
        for (const auto& [mode, want] : s.expected) {
            CAPTURE(s.name);
            CAPTURE(mode_name(mode));
            auto result = s.run(mode);
            REQUIRE(result.outcome == want);
        }
    }
}

TEST_CASE("mode dominance: BLOCKED under ManifestOnly implies BLOCKED under Full") {
    for (const auto& s : builtin_scenarios()) {
        if (s.run(Mode::ManifestOnly).outcome == Outcome::Blocked) {
            CAPTURE(s.name);
            CHECK(s.run(Mode::Full).outcome == Outcome::Blocked);
        }
    }
}

TEST_CASE("run_scenario dispatches by name") {
    auto r = run_scenario("net-whitelist", Mode::Full);
    CHECK(r.outcome == Outcome::Blocked);
    CHECK_FALSE(r.transcript.empty());
    CHECK_THROWS_AS(run_scenario("no-such-thing", Mode::Full), UnknownScenarioError);
}

TEST_CASE("scrub redirection delivers exactly one rate-limited status byte in Full") {
    auto r = run_scenario("scrub-redirection", Mode::Full);
    CHECK(r.outcome == Outcome::Blocked);
    bool exactly_one = false;
    for (const auto& line : r.transcript)
        if (line == "status bytes delivered to fleet: 1") exactly_one = true;
    CHECK(exactly_one);
}

TEST_CASE("the leak verdict equals an independent sink grep") {
    // oracle: grep the sink transcript lines recorded during the run
    for (const auto& s : builtin_scenarios()) {
        for (Mode mode : {Mode::None, Mode::ManifestOnly, Mode::Full}) {
            auto result = s.run(mode);
            bool sentinel_hit = false;
            for (const auto& line : result.transcript)
                if (line.rfind("sentinel reached", 0) == 0) sentinel_hit = true;
            CAPTURE(s.name);
            CHECK((result.outcome == Outcome::Leak) == sentinel_hit);
        }
    }
}

TEST_CASE("direct-os-channel leaves the DENY on the audit log in Full") {
    auto r = run_scenario("direct-os-channel", Mode::Full);
    bool deny_logged = false;
    for (const auto& line : r.transcript)
        if (line.find("connect\tBadCameraStatus\tCamera") != std::string::npos &&
            line.find("DENY") != std::string::npos)
            deny_logged = true;
    CHECK(deny_logged);
}

TEST_CASE("bench workloads") {
    SUBCASE("payload sizes pin the published workloads") {
        CHECK(workload_payload_size(Workload::Array1m) == 1'048'576);
        CHECK(workload_payload_size(Workload::Struct32k) == 32'768);
    }
    SUBCASE("delivery counts are identical across modes") {
        for (Workload w : {Workload::Struct32k, Workload::Range}) {
            auto none = bench(w, Mode::None, 40);
            auto manifest = bench(w, Mode::ManifestOnly, 40);
            auto full = bench(w, Mode::Full, 40);
            CHECK(none.delivered == 40);
            CHECK(manifest.delivered == none.delivered);
            CHECK(full.delivered == none.delivered);
            CHECK(full.median_latency_ticks >= none.median_latency_ticks);
        }
    }
    SUBCASE("redirection adds a hop: null declassifier beats direct never") {
        auto rb = bench_redirection(20);
        CHECK(rb.direct.delivered == 20);
        CHECK(rb.null_filter.delivered == 20);
        CHECK(rb.pixelate_filter.delivered == 20);
        CHECK(rb.null_filter.median_latency_ticks > rb.direct.median_latency_ticks);
        CHECK(rb.pixelate_filter.median_latency_ticks >= rb.null_filter.median_latency_ticks);
    }
}
