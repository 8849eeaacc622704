// Copyright 2026 The ivos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ivos {

// Problems with input data or configuration. The CLI maps these to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Problems talking to an LLM backend. The CLI maps these to exit code 3 so
// orchestration scripts can retry only backend failures.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResolutionMismatch : DataError {
    ResolutionMismatch(int ah, int aw, int bh, int bw)
        : DataError("resolution mismatch: " + std::to_string(ah) + "x" +
                    std::to_string(aw) + " vs " + std::to_string(bh) + "x" +
                    std::to_string(bw)) {}
    explicit ResolutionMismatch(const std::string& what) : DataError(what) {}
};

struct CountSumMismatch : DataError {
    using DataError::DataError;
};

struct ParseError : DataError {
    using DataError::DataError;
};

struct SchemaViolation : DataError {
    using DataError::DataError;
};

struct UnknownExpression : DataError {
    explicit UnknownExpression(const std::string& id)
        : DataError("unknown expression: " + id) {}
};

struct UnknownIndex : DataError {
    explicit UnknownIndex(int index)
        : DataError("unknown object index: " + std::to_string(index)) {}
};

struct ConfigError : DataError {
    using DataError::DataError;
};

struct FrameReadError : DataError {
    FrameReadError(long long frame, const std::string& why)
        : DataError("frame " + std::to_string(frame) + ": " + why) {}
};

struct MissingBinding : DataError {
    explicit MissingBinding(const std::string& name)
        : DataError("missing binding: " + name), placeholder(name) {}
    std::string placeholder;
};

struct NotUnidirectional : DataError {
    NotUnidirectional() : DataError("interaction is not unidirectional") {}
};

struct MissingTargetTrack : DataError {
    explicit MissingTargetTrack(const std::string& expression_id)
        : DataError("actor-target expression lacks target track: " +
                    expression_id) {}
};

struct UnsupportedKind : BackendError {
    using BackendError::BackendError;
};

struct TransportError : BackendError {
    using BackendError::BackendError;
};

struct RateLimited : BackendError {
    using BackendError::BackendError;
};

// A backend reply that could not be parsed after the allowed reprompt.
struct ParseFailure : BackendError {
    ParseFailure(const std::string& context, const std::string& raw)
        : BackendError("unparseable reply for " + context + ": " + raw),
          raw_text(raw) {}
    std::string raw_text;
};

}  // namespace ivos
