#include "camsync/io.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace camsync {

namespace {

using json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::int64_t parse_i64(std::string_view s, const std::string& what, std::int64_t line = -1) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        fail(errc::parse_error, "bad integer for " + what + ": '" + std::string(s) + "'", line);
    return v;
}

double parse_f64(std::string_view s, const std::string& what) {
    std::string buf(s);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || buf.empty())
        fail(errc::config_error, "bad number for " + what + ": '" + buf + "'");
    return v;
}

/// Emit times losslessly: integers as JSON numbers, fractional reals as
/// round-tripping decimal strings.
json number_or_string(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.007199254740992e15)
        return json(static_cast<std::int64_t>(v));
    return json(format_decimal(v));
}

json model_json(const PhaseModel& m) {
    json j;
    j["phase_ns"] = number_or_string(m.phase_ns);
    j["period_ns"] = number_or_string(m.period_ns);
    j["noise_sigma_ns"] = number_or_string(m.noise_sigma_ns);
    return j;
}

json clusters_json(const std::vector<ClusterStats>& clusters) {
    json arr = json::array();
    for (const auto& c : clusters) {
        json j;
        j["k"] = c.k;
        j["count"] = c.count;
        j["tau_hat_ns"] = number_or_string(c.tau_hat_ns);
        j["sigma_hat_ns"] = number_or_string(c.sigma_hat_ns);
        arr.push_back(std::move(j));
    }
    return arr;
}

} // namespace

std::vector<DeviceTrace> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        fail(errc::parse_error, "empty input", 0);
    if (trim(line) != kTraceCsvHeader)
        fail(errc::parse_error,
             std::string("expected header '") + kTraceCsvHeader + "'", 1);

    std::vector<DeviceTrace> devices;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty())
            continue;
        const std::size_t c1 = row.find(',');
        const std::size_t c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
        if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos)
            fail(errc::parse_error, "expected 3 comma-separated fields", line_no);
        const std::string id(trim(row.substr(0, c1)));
        if (id.empty())
            fail(errc::parse_error, "empty device_id", line_no);
        const std::int64_t seq = parse_i64(trim(row.substr(c1 + 1, c2 - c1 - 1)),
                                           "frame_seq", line_no);
        const std::int64_t ts = parse_i64(trim(row.substr(c2 + 1)), "timestamp_ns", line_no);
        if (ts < 0)
            fail(errc::parse_error, "timestamp_ns must be nonnegative", line_no);

        auto it = std::find_if(devices.begin(), devices.end(),
                               [&](const DeviceTrace& d) { return d.device_id == id; });
        if (it == devices.end()) {
            devices.push_back(DeviceTrace{id, {}, {}});
            it = devices.end() - 1;
        }
        if (!it->timestamps.empty() && ts <= it->timestamps.back())
            fail(errc::parse_error,
                 "rows for device '" + id + "' not in increasing timestamp order", line_no);
        it->timestamps.push_back(ts);
        it->frame_seq.push_back(seq);
    }
    if (devices.empty())
        fail(errc::parse_error, "no data rows", line_no);
    return devices;
}

void write_trace_csv(std::ostream& out, const TimestampTrace& trace,
                     const std::vector<std::int64_t>& frame_seq) {
    out << kTraceCsvHeader << '\n';
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const std::int64_t seq =
            i < frame_seq.size() ? frame_seq[i] : static_cast<std::int64_t>(i);
        out << trace.device_id << ',' << seq << ',' << trace[i] << '\n';
    }
}

std::map<std::string, std::string, std::less<>> read_kv_config(std::istream& in) {
    std::map<std::string, std::string, std::less<>> kv;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view s = trim(line);
        if (s.empty() || s.front() == '#')
            continue;
        const std::size_t eq = s.find('=');
        if (eq == std::string_view::npos)
            fail(errc::config_error, "expected 'key = value'", line_no);
        const std::string key(trim(s.substr(0, eq)));
        const std::string value(trim(s.substr(eq + 1)));
        if (key.empty())
            fail(errc::config_error, "empty key", line_no);
        if (!kv.emplace(key, value).second)
            fail(errc::config_error, "duplicate key '" + key + "'", line_no);
    }
    return kv;
}

namespace {

class KvReader {
public:
    explicit KvReader(const std::map<std::string, std::string, std::less<>>& kv) : kv_(kv) {}

    std::optional<std::string> get(const std::string& key) {
        seen_.push_back(key);
        const auto it = kv_.find(key);
        if (it == kv_.end())
            return std::nullopt;
        return it->second;
    }
    std::string require(const std::string& key) {
        auto v = get(key);
        if (!v)
            fail(errc::config_error, "missing field: " + key);
        return *v;
    }
    double get_f64(const std::string& key, double fallback) {
        const auto v = get(key);
        return v ? parse_f64(*v, key) : fallback;
    }
    std::int64_t get_i64(const std::string& key, std::int64_t fallback) {
        const auto v = get(key);
        if (!v)
            return fallback;
        try {
            return parse_i64(*v, key);
        } catch (const Error&) {
            fail(errc::config_error, "bad integer for " + key + ": '" + *v + "'");
        }
    }
    void reject_unknown() const {
        for (const auto& [key, value] : kv_)
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                fail(errc::config_error, "unknown key '" + key + "'");
    }

private:
    const std::map<std::string, std::string, std::less<>>& kv_;
    std::vector<std::string> seen_;
};

std::vector<Segment> parse_segments(const std::string& text) {
    std::vector<Segment> segments;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string_view sv = trim(item);
        const std::size_t colon = sv.find(':');
        if (colon == std::string_view::npos)
            fail(errc::config_error, "segments entries must look like 'frames:phase_offset_ns'");
        Segment seg;
        seg.n_frames = static_cast<int>(parse_i64(trim(sv.substr(0, colon)), "segments"));
        seg.phase_offset_ns = parse_f64(trim(sv.substr(colon + 1)), "segments");
        segments.push_back(seg);
    }
    if (segments.empty())
        fail(errc::config_error, "segments given but empty");
    return segments;
}

} // namespace

TraceSpec trace_spec_from_config(const std::map<std::string, std::string, std::less<>>& kv) {
    KvReader r(kv);
    TraceSpec spec;
    spec.tau_ns = parse_f64(r.require("period_ns"), "period_ns");
    spec.tau0_ns = r.get_f64("phase_ns", 0.0);
    spec.n_frames = static_cast<int>(r.get_i64("frames", 0));
    spec.jitter_sigma_ns = r.get_f64("jitter_sigma_ns", 0.0);
    spec.drop_prob = r.get_f64("drop_prob", 0.0);
    spec.skew_ns_per_min = r.get_f64("skew_ns_per_min", 0.0);
    spec.skew_onset_ns = r.get_f64("skew_onset_ns", 0.0);
    spec.seed = static_cast<std::uint64_t>(r.get_i64("seed", 0));
    if (const auto id = r.get("device_id"))
        spec.device_id = *id;
    if (const auto segs = r.get("segments"))
        spec.segments = parse_segments(*segs);
    r.reject_unknown();
    try {
        validate_spec(spec);
    } catch (const Error& e) {
        fail(errc::config_error, e.what());
    }
    return spec;
}

SessionSpec session_spec_from_config(const std::map<std::string, std::string, std::less<>>& kv) {
    KvReader r(kv);
    SessionSpec s;
    s.n_devices = static_cast<int>(r.get_i64("devices", 2));
    s.period_ns = parse_f64(r.require("period_ns"), "period_ns");
    s.camera_jitter_sigma_ns = r.get_f64("camera_jitter_sigma_ns", 0.0);
    s.offset_spread_ns = r.get_f64("offset_spread_ns", 1e8);
    s.net.base_latency_ns = r.get_f64("base_latency_ns", 5e6);
    s.net.latency_jitter_sigma_ns = r.get_f64("latency_jitter_sigma_ns", 0.0);
    s.net.asymmetry_ns = r.get_f64("asymmetry_ns", 0.0);
    s.net.loss_prob = r.get_f64("loss_prob", 0.0);
    s.net.seed = static_cast<std::uint64_t>(r.get_i64("net_seed", 0));
    s.config.n_exchanges = static_cast<int>(r.get_i64("exchanges", 100));
    s.config.max_retries = static_cast<int>(r.get_i64("max_retries", 3));
    s.config.train_frames = static_cast<int>(r.get_i64("train_frames", 50));
    s.config.video_frames = static_cast<int>(r.get_i64("video_frames", 300));
    s.config.exposure_quantization_ns = r.get_f64("exposure_quantization_ns", 0.0);
    s.config.seed = static_cast<std::uint64_t>(r.get_i64("seed", 1));
    r.reject_unknown();
    if (s.n_devices < 2)
        fail(errc::config_error, "devices must be >= 2");
    if (!(s.period_ns > 0.0))
        fail(errc::config_error, "period_ns must be positive");
    if (s.config.n_exchanges < 1)
        fail(errc::config_error, "exchanges must be >= 1");
    return s;
}

std::vector<SimDevice> make_session_devices(const SessionSpec& spec, std::uint64_t seed) {
    SplitMix64 rng(substream(seed, 0xD));
    std::vector<SimDevice> devices;
    for (int d = 0; d < spec.n_devices; ++d) {
        SimDevice dev;
        dev.device_id = "dev" + std::to_string(d);
        dev.camera.tau_ns = spec.period_ns;
        dev.camera.tau0_local_ns = rng.next_unit() * spec.period_ns;
        dev.camera.jitter_sigma_ns = spec.camera_jitter_sigma_ns;
        // device 0 is the leader and defines the time axis
        dev.true_clock_offset_ns =
            d == 0 ? 0.0 : rng.next_uniform(-spec.offset_spread_ns / 2, spec.offset_spread_ns / 2);
        devices.push_back(std::move(dev));
    }
    return devices;
}

std::string fnv1a64_digest(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016" PRIx64, h);
    return buf;
}

std::string format_decimal(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

DeviceAnalysis analyze_device(const DeviceTrace& device, const std::vector<int>& train_sizes,
                              int test_size, bool refine) {
    DeviceAnalysis out;
    out.device_id = device.device_id;
    out.n_samples = device.timestamps.size();

    TimestampTrace trace;
    try {
        trace = validate_trace(device.device_id, device.timestamps);
    } catch (const Error& e) {
        out.error = std::string(errc_name(e.code())) + ": " + e.what();
        return out;
    }

    EstimateOptions options;
    options.refine = refine;
    try {
        out.fit = estimate(trace, options);
    } catch (const Error& e) {
        out.error = std::string(errc_name(e.code())) + ": " + e.what();
        return out;
    }

    // frame_seq is device-reported and not trusted; cross-check its gaps
    // against the estimated slot gaps and warn on disagreement.
    try {
        const FrameIndexAssignment assignment = assign_indices(trace, out.fit->model);
        std::size_t mismatches = 0;
        for (std::size_t i = 1; i < assignment.indices.size(); ++i) {
            const std::int64_t est_gap = assignment.indices[i] - assignment.indices[i - 1];
            const std::int64_t seq_gap = device.frame_seq[i] - device.frame_seq[i - 1];
            if (est_gap != seq_gap)
                ++mismatches;
        }
        if (mismatches > 0)
            out.warnings.push_back("frame_seq gaps disagree with estimated slot gaps at " +
                                   std::to_string(mismatches) + " of " +
                                   std::to_string(assignment.indices.size() - 1) + " steps");
    } catch (const Error& e) {
        out.warnings.push_back(std::string("slot cross-check failed (") + errc_name(e.code()) +
                               ")");
    }

    if (trace.size() >= 20) {
        try {
            out.noise = classify(trace);
        } catch (const Error& e) {
            out.warnings.push_back(std::string("noise classification failed (") +
                                   errc_name(e.code()) + "): " + e.what());
        }
    } else {
        out.warnings.push_back("trace too short for noise classification (needs 20 samples)");
    }

    int effective_test = test_size;
    if (effective_test > static_cast<int>(trace.size())) {
        effective_test = static_cast<int>(trace.size());
        out.warnings.push_back("test window clamped to trace length " +
                               std::to_string(effective_test));
    }
    for (int train : train_sizes) {
        if (static_cast<int>(trace.size()) < train + 2) {
            out.warnings.push_back("skipping train size " + std::to_string(train) +
                                   ": trace too short");
            continue;
        }
        try {
            out.drift.push_back(drift_coefficient(trace, train, effective_test, options));
        } catch (const Error& e) {
            out.warnings.push_back("drift at train size " + std::to_string(train) +
                                   " failed (" + errc_name(e.code()) + "): " + e.what());
        }
    }
    return out;
}

nlohmann::ordered_json analysis_report_json(const std::vector<DeviceAnalysis>& devices,
                                            const std::string& input_digest) {
    json root;
    root["schema_version"] = kReportSchemaVersion;
    root["tool"] = "camsync";
    root["version"] = kToolkitVersion;
    root["input_digest"] = input_digest;
    json device_arr = json::array();
    for (const auto& d : devices) {
        json j;
        j["device_id"] = d.device_id;
        j["n_samples"] = d.n_samples;
        if (d.error) {
            j["error"] = *d.error;
        }
        if (d.fit) {
            j["model"] = model_json(d.fit->model);
            j["tau_init_ns"] = number_or_string(d.fit->tau_init_ns);
            j["objective_ns2"] = number_or_string(d.fit->objective);
            j["refined"] = d.fit->refined;
            j["clusters"] = clusters_json(d.fit->clusters);
        }
        if (d.noise) {
            json nj;
            nj["regime"] = d.noise->regime == NoiseRegime::unimodal ? "unimodal"
                                                                    : "multi_cluster";
            nj["drop_rate"] = number_or_string(d.noise->drop_rate);
            nj["significance"] = number_or_string(d.noise->significance);
            json carr = json::array();
            for (const auto& c : d.noise->clusters) {
                json cj;
                cj["k"] = c.stats.k;
                cj["count"] = c.stats.count;
                cj["tau_hat_ns"] = number_or_string(c.stats.tau_hat_ns);
                cj["sigma_hat_ns"] = number_or_string(c.stats.sigma_hat_ns);
                cj["normality_tested"] = c.normality.tested;
                if (c.normality.tested) {
                    cj["normality_statistic"] =
                        std::isfinite(c.normality.statistic)
                            ? number_or_string(c.normality.statistic)
                            : json("inf");
                    cj["normality_pass"] = c.normality.pass;
                    if (c.normality.degenerate_variance)
                        cj["degenerate_variance"] = true;
                }
                carr.push_back(std::move(cj));
            }
            nj["clusters"] = std::move(carr);
            j["noise"] = std::move(nj);
        }
        if (!d.drift.empty()) {
            json darr = json::array();
            for (const auto& rep : d.drift) {
                json dj;
                dj["train_size"] = rep.train_size;
                dj["test_size"] = rep.test_size;
                dj["drift_ms_per_min"] = number_or_string(rep.drift_ms_per_min);
                dj["slope_sign"] = rep.slope_sign;
                dj["fit"] = model_json(rep.fit);
                json series = json::array();
                for (const auto& [t, r] : rep.residual_series)
                    series.push_back(json::array({t, number_or_string(r)}));
                dj["residual_series"] = std::move(series);
                darr.push_back(std::move(dj));
            }
            j["drift"] = std::move(darr);
        }
        j["warnings"] = d.warnings;
        device_arr.push_back(std::move(j));
    }
    root["devices"] = std::move(device_arr);
    return root;
}

nlohmann::ordered_json sync_report_json(const SyncReport& report) {
    json root;
    root["schema_version"] = kReportSchemaVersion;
    root["tool"] = "camsync";
    root["version"] = kToolkitVersion;
    root["seed"] = report.seed;
    root["period_ns"] = number_or_string(report.period_ns);
    root["target_phase_ns"] = number_or_string(report.target_phase_ns);
    json devices = json::array();
    for (const auto& d : report.devices) {
        json j;
        j["device_id"] = d.device_id;
        j["true_offset_ns"] = number_or_string(d.true_offset_ns);
        j["estimated_offset_ns"] = number_or_string(d.estimated_offset_ns);
        j["offset_error_ns"] = number_or_string(d.offset_error_ns);
        j["rounds_used"] = d.rounds_used;
        devices.push_back(std::move(j));
    }
    root["devices"] = std::move(devices);
    json pairs = json::array();
    for (const auto& p : report.pairwise_skew_ns) {
        json j;
        j["a"] = p.device_a;
        j["b"] = p.device_b;
        j["skew_ns"] = number_or_string(p.skew_ns);
        pairs.push_back(std::move(j));
    }
    root["pairwise_skew_ns"] = std::move(pairs);
    root["max_skew_ns"] = number_or_string(report.max_skew_ns);
    return root;
}

} // namespace camsync
