#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace camsync {

enum class errc {
    empty_trace,
    non_monotonic,
    duplicate_timestamp,
    non_positive_period,
    index_collision,
    length_mismatch,
    degenerate_seed,
    no_convergence,
    infeasible_band,
    too_short,
    too_few_samples,
    invalid_spec,
    invalid_model,
    unwrap_ambiguous,
    message_lost,
    no_samples,
    period_mismatch,
    session_failed,
    parse_error,
    config_error,
};

const char* errc_name(errc c);

/// Single exception type for the toolkit; `code()` identifies the failure
/// kind and `index()` carries the offending element/line where applicable.
class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what, std::int64_t index = -1)
        : std::runtime_error(what), code_(code), index_(index) {}

    errc code() const noexcept { return code_; }
    std::int64_t index() const noexcept { return index_; }

private:
    errc code_;
    std::int64_t index_;
};

[[noreturn]] inline void fail(errc code, const std::string& what, std::int64_t index = -1) {
    throw Error(code, what, index);
}

} // namespace camsync
