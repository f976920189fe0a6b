// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <string>

namespace metriccam::cmd {

using Json = nlohmann::json;
using Progress = std::function<void(const std::string& variant, long iter, double total)>;

inline constexpr const char* kVersion = "0.1.0";

// Worker threads: the config's "threads" if given, else 1, capped by
// METRICCAM_THREADS when that is set.
int resolve_threads(const Json& cfg);

Json synth(const Json& cfg);
Json train(const Json& cfg, const Progress& progress);
Json ablate(const Json& cfg, const Progress& progress);
Json eval_depth(const Json& cfg);
Json reconstruct(const Json& cfg);
Json measure(const Json& cfg);
// "passed" is false when any case fails; no exception is thrown for that.
Json gradcheck(const Json& cfg);

}  // namespace metriccam::cmd
