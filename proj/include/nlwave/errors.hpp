#pragma once

#include <stdexcept>
#include <string>

namespace nlwave {

/// Invalid parameters or inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A characteristic foot or stencil fell outside the stored lattice.
class GridError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A field does not cover the domain an integral needs.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input file produced by an earlier stage is absent or unreadable.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nlwave
