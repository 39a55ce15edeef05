#pragma once

#include <stdexcept>
#include <string>

namespace gridshed {

// Invalid or inconsistent configuration: bad file, unknown key, out-of-range
// hyperparameter, unknown bus id.  The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A checkpoint file that cannot be read back: wrong magic, unsupported
// version, truncation, checksum mismatch, architecture mismatch.
// The CLI maps this to exit code 3.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gridshed
