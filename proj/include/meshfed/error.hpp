/*
Copyright 2026 The meshfed Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meshfed {

/// Every failure raised by the library carries one of these codes so callers
/// can branch on the kind of failure without parsing messages.
enum class Errc {
    // core
    InvalidNamespace,
    InvalidTensor,
    DuplicateEntry,
    SpecMismatch,
    // wire
    BodyTooLarge,
    BadMagic,
    UnsupportedVersion,
    TruncatedFrame,
    UnknownKind,
    MalformedPayload,
    // topology
    DuplicateNode,
    HubInLeaves,
    TooFewNodes,
    TooManyEdgesRequested,
    SizeMismatch,
    UnknownNode,
    SelfEdge,
    // aggregation
    EmptyInput,
    NonPositiveWeight,
    // refmodel
    EmptyShard,
    BadRatios,
    TooManyShards,
    // node / sim
    NoPeersForModel,
    NoAliveNodes,
    ValidationError,
    Io,
    BindFailed,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace meshfed
