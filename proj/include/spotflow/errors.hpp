// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace spotflow {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A cache lookup needed by a partial forward or blend found no entry.
class CacheIncompleteError : public Error {
public:
    using Error::Error;
};

/// The active and reuse sets overlap or do not cover the token grid.
class RoutingError : public Error {
public:
    using Error::Error;
};

/// A reuse-set latent was written during a spot step.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace spotflow
