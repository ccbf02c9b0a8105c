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

#include "meshfed/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace meshfed::log {

namespace {

Level from_env() {
    const char* v = std::getenv("MESHFED_LOG");
    if (v == nullptr) return Level::Error;
    std::string s(v);
    if (s == "debug") return Level::Debug;
    if (s == "info") return Level::Info;
    return Level::Error;
}

std::atomic<int>& current() {
    static std::atomic<int> lvl{static_cast<int>(from_env())};
    return lvl;
}

}  // namespace

Level level() noexcept { return static_cast<Level>(current().load()); }

void set_level(Level l) noexcept { current().store(static_cast<int>(l)); }

void write(Level l, std::string_view msg) {
    if (static_cast<int>(l) > current().load()) return;
    static std::mutex mu;
    static constexpr const char* tags[] = {"error", "info", "debug"};
    std::lock_guard lock(mu);
    std::cerr << "[meshfed " << tags[static_cast<int>(l)] << "] " << msg << '\n';
}

}  // namespace meshfed::log
