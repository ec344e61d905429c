#pragma once

#include <stdexcept>
#include <string>

namespace fedlorar {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct NonFiniteResult : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct InvalidSpec : Error {
    using Error::Error;
};
struct NotClassification : Error {
    using Error::Error;
};
struct EmptyDataset : Error {
    using Error::Error;
};
struct IncompatibleSchemas : Error {
    using Error::Error;
};
struct EmptyPopulation : Error {
    using Error::Error;
};
struct InvalidConfig : Error {
    using Error::Error;
};

// Wire / transport errors.
struct WireError : Error {
    using Error::Error;
};
struct MalformedFrame : WireError {
    using WireError::WireError;
};
struct TruncatedFrame : WireError {
    using WireError::WireError;
};
struct VersionMismatch : WireError {
    using WireError::WireError;
};
struct PayloadTooLarge : WireError {
    using WireError::WireError;
};
struct ClientDisconnected : Error {
    using Error::Error;
};

} // namespace fedlorar
