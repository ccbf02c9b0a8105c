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

// Shared codec fixtures. One JSON object per line:
//   {"name": ..., "frame": <hex>, "expect": <description>}   decodes to that
//   {"name": ..., "frame": <hex>, "error": <Errc name>}       must be rejected
// A description is {"kind", "sender", "namespace"} plus the body fields:
// ANNOUNCE {"mode", "address"}, MODEL_SPEC {"layout": [{"name","dtype","shape"}]},
// WEIGHTS {"round", "sample_count", "entries": [{"name","dtype","shape","values"}]}.
// Values are plain JSON numbers; every vector value is finite, so the shortest
// round-trip decimal form pins the bits.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "meshfed/error.hpp"
#include "meshfed/wire.hpp"

namespace meshfed::conformance {

struct Vector {
    std::string name;
    wire::Bytes frame;
    std::optional<wire::Message> expect;
    std::optional<Errc> error;
};

nlohmann::ordered_json describe(const wire::Message& m);
/// Throws ValidationError on a description that does not name a message.
wire::Message from_description(const nlohmann::json& j);

std::string to_line(const Vector& v);
Vector from_line(const std::string& line);

/// The fixed vector set, grouped by file stem ("valid", "invalid").
std::vector<std::pair<std::string, std::vector<Vector>>> standard_vectors();

/// Empty when the vector passes: decoding matches bit for bit and, for valid
/// vectors, re-encoding the expectation reproduces the frame.
std::optional<std::string> check(const Vector& v);

}  // namespace meshfed::conformance
