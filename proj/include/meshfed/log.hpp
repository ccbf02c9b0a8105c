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

// Human-readable diagnostics on stderr. Verbosity comes from MESHFED_LOG
// (error | info | debug), read once; default is error.

#include <string_view>

namespace meshfed::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

Level level() noexcept;
void set_level(Level level) noexcept;

void write(Level level, std::string_view msg);

inline void error(std::string_view msg) { write(Level::Error, msg); }
inline void info(std::string_view msg) { write(Level::Info, msg); }
inline void debug(std::string_view msg) { write(Level::Debug, msg); }

}  // namespace meshfed::log
