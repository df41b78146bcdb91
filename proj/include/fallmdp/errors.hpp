#pragma once

#include <stdexcept>
#include <string>

namespace fallmdp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pendulum length is non-positive; the dynamics are undefined.
struct DegenerateState : Error {
    using Error::Error;
};

// A continuous action component lies outside the configured bounds.
struct ActionOutOfBounds : Error {
    using Error::Error;
};

// The requested contact transition is not in the adjacency matrix.
struct DisallowedContact : Error {
    using Error::Error;
};

// No successor contact is allowed from the current one.
struct NoAllowedContact : Error {
    using Error::Error;
};

// Triangle prediction collapsed (predicted length or COM height non-positive).
struct DegeneratePrediction : Error {
    using Error::Error;
};

// Weights file declares a different network shape than expected.
struct TopologyMismatch : Error {
    using Error::Error;
};

// A data file failed to parse or has inconsistent contents.
struct MalformedFile : Error {
    using Error::Error;
};

// A configuration value violates its documented constraints.
struct ConfigInvalid : Error {
    using Error::Error;
};

}  // namespace fallmdp
