#pragma once

#include <stdexcept>
#include <string>

namespace duoadapt {

// Base for everything this library throws. Each failure class gets its own
// type so callers (and the CLI exit-code mapping) can tell them apart.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad values fed into an operation (non-finite joints, misaligned wrist, ...).
struct InvalidInputError : Error {
    using Error::Error;
};

// A hyper-parameter outside its documented range (alpha, beta, ...).
struct InvalidParameterError : Error {
    using Error::Error;
};

// Point configuration from which a rotation is not identifiable.
struct DegenerateConfigError : Error {
    using Error::Error;
};

// Arithmetic mean of rotations has no unique SO(3) projection.
struct DegenerateMeanError : Error {
    using Error::Error;
};

// Filesystem-level failure (open/read/write).
struct IoError : Error {
    using Error::Error;
};

// File carries an unknown magic or an unsupported format version.
struct FormatVersionError : Error {
    using Error::Error;
};

// File content does not match its checksum (includes truncation).
struct ChecksumError : Error {
    using Error::Error;
};

// Malformed or out-of-range configuration file content.
struct ConfigError : Error {
    using Error::Error;
};

// Rotation initialization could not produce a usable estimate.
struct InitializationError : Error {
    using Error::Error;
};

// Checkpoint does not match the run it is being resumed into.
struct IncompatibleCheckpointError : Error {
    using Error::Error;
};

// Non-finite loss or similar numerical breakdown during adaptation.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace duoadapt
