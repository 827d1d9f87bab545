// Copyright 2026 The odsel Authors.
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

#include <iosfwd>
#include <memory>

#include "odsel/llm.h"

namespace odsel {

// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

// Maps a library error to kExitData or kExitRuntime.
int exit_code_for(ErrorCode code);

// The odsel command line. `transport` backs live LLM calls; tests inject a
// fake. Writes only to `out`, `err` and paths named by flags.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            std::shared_ptr<ChatTransport> transport = nullptr);

}  // namespace odsel
