// camsync command line: synthesize timestamp traces, analyze recorded
// ones, and run multi-device synchronization simulations.
//
// Exit codes: 0 success, 1 usage error, 2 input parse error, 3 runtime
// analysis failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "camsync/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitRuntime = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        camsync::fail(camsync::errc::parse_error, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        camsync::fail(camsync::errc::config_error, "cannot write '" + path + "'");
    out << bytes;
}

int exit_code_for(const camsync::Error& e) {
    switch (e.code()) {
    case camsync::errc::parse_error:
    case camsync::errc::config_error:
        return kExitParse;
    default:
        return kExitRuntime;
    }
}

std::vector<int> parse_train_list(const std::string& text) {
    std::vector<int> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            sizes.push_back(std::stoi(item));
        } catch (const std::exception&) {
            camsync::fail(camsync::errc::config_error, "bad --train entry '" + item + "'");
        }
        if (sizes.back() < 2)
            camsync::fail(camsync::errc::config_error, "train sizes must be >= 2");
    }
    if (sizes.empty())
        camsync::fail(camsync::errc::config_error, "--train list is empty");
    return sizes;
}

int run_analyze(const std::string& input, const std::string& train_list, int test_size,
                bool no_refine, const std::string& out_path) {
    const std::string bytes = read_file(input);
    std::istringstream in(bytes);
    const std::vector<camsync::DeviceTrace> parsed = camsync::read_trace_csv(in);
    const std::vector<int> train_sizes = parse_train_list(train_list);

    std::vector<camsync::DeviceAnalysis> analyses;
    bool any_error = false;
    for (const auto& device : parsed) {
        analyses.push_back(camsync::analyze_device(device, train_sizes, test_size, !no_refine));
        if (analyses.back().error) {
            any_error = true;
            std::cerr << "camsync: device '" << device.device_id
                      << "' failed: " << *analyses.back().error << "\n";
        }
    }
    const std::string report =
        camsync::analysis_report_json(analyses, camsync::fnv1a64_digest(bytes)).dump(2) + "\n";
    if (out_path.empty())
        std::cout << report;
    else
        write_file(out_path, report);
    return any_error ? kExitRuntime : kExitOk;
}

int run_generate(const std::string& spec_path, const std::string& out_path) {
    const std::string bytes = read_file(spec_path);
    std::istringstream in(bytes);
    const auto kv = camsync::read_kv_config(in);
    const camsync::TraceSpec spec = camsync::trace_spec_from_config(kv);
    const camsync::GeneratedTrace gen = camsync::generate(spec);
    std::ostringstream csv;
    camsync::write_trace_csv(csv, gen.trace, gen.true_indices.indices);
    write_file(out_path, csv.str());
    std::cout << "wrote " << gen.trace.size() << " rows to " << out_path
              << " (dropped " << gen.meta.dropped_frames << ", jitter redraws "
              << gen.meta.jitter_redraws << ")\n";
    return kExitOk;
}

int run_simulate(const std::string& config_path, int seeds, const std::string& out_dir) {
    const std::string bytes = read_file(config_path);
    std::istringstream in(bytes);
    const auto kv = camsync::read_kv_config(in);
    const camsync::SessionSpec spec = camsync::session_spec_from_config(kv);
    if (seeds < 1)
        camsync::fail(camsync::errc::config_error, "--seeds must be >= 1");
    std::filesystem::create_directories(out_dir);

    std::vector<double> max_skews;
    int failed = 0;
    for (int k = 0; k < seeds; ++k) {
        const std::uint64_t seed = spec.config.seed + static_cast<std::uint64_t>(k);
        camsync::SessionConfig config = spec.config;
        config.seed = seed;
        char name[32];
        std::snprintf(name, sizeof name, "report_seed%05llu.json",
                      static_cast<unsigned long long>(seed));
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        try {
            const camsync::SyncReport report =
                camsync::run_session(camsync::make_session_devices(spec, seed), spec.net, config);
            write_file(path, camsync::sync_report_json(report).dump(2) + "\n");
            max_skews.push_back(report.max_skew_ns);
        } catch (const camsync::Error& e) {
            ++failed;
            std::cerr << "camsync: seed " << seed << " failed: " << e.what() << "\n";
        }
    }
    if (max_skews.empty()) {
        std::cerr << "camsync: all " << seeds << " sessions failed\n";
        return kExitRuntime;
    }

    std::vector<double> sorted = max_skews;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double worst = sorted.back();
    const double within =
        static_cast<double>(std::count_if(sorted.begin(), sorted.end(),
                                          [](double s) { return s <= 250e3; })) /
        static_cast<double>(sorted.size());

    nlohmann::ordered_json summary;
    summary["schema_version"] = camsync::kReportSchemaVersion;
    summary["sessions"] = seeds;
    summary["sessions_failed"] = failed;
    summary["max_skew_ns"] = camsync::format_decimal(worst);
    summary["median_skew_ns"] = camsync::format_decimal(median);
    summary["fraction_within_250us"] = camsync::format_decimal(within);
    write_file((std::filesystem::path(out_dir) / "summary.json").string(),
               summary.dump(2) + "\n");

    std::cout << "sessions=" << seeds << " failed=" << failed
              << " max_skew_ns=" << camsync::format_decimal(worst)
              << " median_skew_ns=" << camsync::format_decimal(median)
              << " fraction_within_250us=" << camsync::format_decimal(within) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"camera timestamp trace analysis and multi-device sync simulation"};
    app.require_subcommand(1);

    std::string analyze_input, analyze_out;
    std::string train_list = "25,50,200";
    int test_size = 1000;
    bool no_refine = false;
    auto* analyze = app.add_subcommand("analyze", "fit phase models and drift reports from a trace CSV");
    analyze->add_option("input", analyze_input, "trace CSV file")->required();
    analyze->add_option("--train", train_list, "comma-separated train sizes (default 25,50,200)");
    analyze->add_option("--test", test_size, "test window size (default 1000)");
    analyze->add_flag("--no-refine", no_refine, "skip the slot-reassignment refinement pass");
    analyze->add_option("--out", analyze_out, "report path (default: stdout)");

    std::string gen_spec, gen_out;
    auto* generate = app.add_subcommand("generate", "write a synthetic trace CSV from a spec config");
    generate->add_option("spec", gen_spec, "trace spec config file")->required();
    generate->add_option("--out", gen_out, "output CSV path")->required();

    std::string sim_config, sim_out;
    int sim_seeds = 1;
    auto* simulate = app.add_subcommand("simulate", "run seeded multi-device sync sessions");
    simulate->add_option("config", sim_config, "session config file")->required();
    simulate->add_option("--seeds", sim_seeds, "number of consecutive session seeds");
    simulate->add_option("--out", sim_out, "report output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*analyze)
            return run_analyze(analyze_input, train_list, test_size, no_refine, analyze_out);
        if (*generate)
            return run_generate(gen_spec, gen_out);
        if (*simulate)
            return run_simulate(sim_config, sim_seeds, sim_out);
    } catch (const camsync::Error& e) {
        std::cerr << "camsync: error (" << camsync::errc_name(e.code()) << "): " << e.what();
        if (e.index() >= 0)
            std::cerr << " [line/index " << e.index() << "]";
        std::cerr << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "camsync: error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
