#pragma once

// File formats: trace CSV, flat key=value configs, JSON reports.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "camsync/drift.hpp"
#include "camsync/noise.hpp"
#include "camsync/sync_sim.hpp"
#include "camsync/synth.hpp"

namespace camsync {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kTraceCsvHeader = "device_id,frame_seq,timestamp_ns";

/// One trace CSV row. frame_seq is the device-reported frame counter
/// (may have gaps); estimation relies only on timestamps, frame_seq is
/// cross-checked against the estimated slots.
struct TraceCsvRecord {
    std::string device_id;
    std::int64_t frame_seq = 0;
    std::int64_t timestamp_ns = 0;
};

/// Raw per-device rows in order of first appearance; validation happens
/// at analysis time so one bad device cannot sink the whole file.
struct DeviceTrace {
    std::string device_id;
    std::vector<std::int64_t> timestamps;
    std::vector<std::int64_t> frame_seq;
};

/// Parses the CSV (header required, LF or CRLF). Devices keep their order
/// of first appearance; rows of one device must be in timestamp order.
/// Throws parse_error with the 1-based line number.
std::vector<DeviceTrace> read_trace_csv(std::istream& in);

void write_trace_csv(std::ostream& out, const TimestampTrace& trace,
                     const std::vector<std::int64_t>& frame_seq);

/// Flat `key = value` config file: one pair per line, '#' comments,
/// blank lines ignored. Duplicate or unknown keys are errors at the
/// typed-extraction layer.
std::map<std::string, std::string, std::less<>> read_kv_config(std::istream& in);

/// Typed extraction; throws config_error naming the field.
TraceSpec trace_spec_from_config(const std::map<std::string, std::string, std::less<>>& kv);

struct SessionSpec {
    int n_devices = 2;
    double period_ns = 0.0;
    double camera_jitter_sigma_ns = 0.0;
    double offset_spread_ns = 1e8; ///< true offsets uniform in +-spread/2
    NetworkModel net;
    SessionConfig config;
};

SessionSpec session_spec_from_config(const std::map<std::string, std::string, std::less<>>& kv);

/// Devices for one session seed: phases uniform in [0, tau) and offsets
/// uniform in +-spread/2, drawn from documented substreams of the seed.
std::vector<SimDevice> make_session_devices(const SessionSpec& spec, std::uint64_t seed);

/// FNV-1a 64-bit over raw bytes, rendered as "fnv1a64:<hex>".
std::string fnv1a64_digest(std::string_view bytes);

/// Shortest decimal string that round-trips the double (times are integer
/// ns where exact, decimal strings where fractional — lossless across
/// languages).
std::string format_decimal(double v);

struct DeviceAnalysis {
    std::string device_id;
    std::size_t n_samples = 0;
    std::optional<PeriodEstimate> fit;
    std::optional<NoiseClassification> noise;
    std::vector<DriftReport> drift;
    std::vector<std::string> warnings;
    std::optional<std::string> error; ///< fatal for this device
};

nlohmann::ordered_json analysis_report_json(const std::vector<DeviceAnalysis>& devices,
                                            const std::string& input_digest);
nlohmann::ordered_json sync_report_json(const SyncReport& report);

/// Runs estimate/classify/drift for one parsed device, downgrading
/// per-stage problems to warnings; a failed fit marks the device in
/// error. Cross-checks frame_seq gaps against estimated slot gaps.
DeviceAnalysis analyze_device(const DeviceTrace& device, const std::vector<int>& train_sizes,
                              int test_size, bool refine);

} // namespace camsync
