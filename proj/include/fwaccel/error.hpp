#pragma once

#include <stdexcept>
#include <string>

namespace fwaccel {

// Machine-readable error categories; the CLI maps these to exit codes.
enum class Errc {
    invalid_input,
    frame_mismatch,
    low_speed,
    degenerate_lift,
    invalid_model,
    infeasible_constraint,
    identification_failure,
    envelope_violation,
    config_error,
    io_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

inline const char* errc_name(Errc code) {
    switch (code) {
        case Errc::invalid_input: return "invalid_input";
        case Errc::frame_mismatch: return "frame_mismatch";
        case Errc::low_speed: return "low_speed";
        case Errc::degenerate_lift: return "degenerate_lift";
        case Errc::invalid_model: return "invalid_model";
        case Errc::infeasible_constraint: return "infeasible_constraint";
        case Errc::identification_failure: return "identification_failure";
        case Errc::envelope_violation: return "envelope_violation";
        case Errc::config_error: return "config_error";
        case Errc::io_error: return "io_error";
    }
    return "unknown";
}

}  // namespace fwaccel
