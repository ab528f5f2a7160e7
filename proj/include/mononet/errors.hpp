#pragma once

#include <stdexcept>
#include <string>

namespace mononet {

// Base class for all library errors. Catch this at the CLI boundary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch between tensors (e.g. matmul inner dims).
struct DimensionError : Error {
    using Error::Error;
};

// Structurally invalid model description (bad layer stack, bad widths).
struct SpecError : Error {
    using Error::Error;
};

// An API precondition was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

// A computation produced NaN or Inf where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// Malformed binary container (model files, image archives).
struct FormatError : Error {
    using Error::Error;
};

// Malformed text input (CSV, config, score tables); carries line info in the message.
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input whose content is unusable (bad labels, empty classes).
struct DataError : Error {
    using Error::Error;
};

// Rank correlation is undefined because one variable has zero rank variance.
struct UndefinedCorrelationError : Error {
    using Error::Error;
};

// Training produced a non-finite loss; reports where it happened.
struct DivergedError : Error {
    int epoch = -1;
    int batch = -1;
    DivergedError(const std::string& msg, int epoch_, int batch_)
        : Error(msg), epoch(epoch_), batch(batch_) {}
};

} // namespace mononet
