#ifndef VCM_ERROR_HPP
#define VCM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace vcm {

// Error categories; the C API and the CLI map these onto status/exit codes.
enum class ErrorKind {
    InvalidArg,  // bad parameters, unusable selections, missing required inputs
    Io,          // file cannot be opened/read/written
    Format,      // malformed or inconsistent data (streams, CSV, JSON, dims)
    Numeric,     // divergence, degenerate fits, non-finite results
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace vcm

#endif
