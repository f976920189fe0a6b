// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "error.hpp"

#include <atomic>
#include <cstdio>

namespace metriccam {
namespace {

void stderr_sink(const std::string& message) {
  std::fprintf(stderr, "metriccam warning: %s\n", message.c_str());
}

std::atomic<WarningSink> g_sink{&stderr_sink};

}  // namespace

void set_warning_sink(WarningSink sink) {
  g_sink.store(sink ? sink : &stderr_sink);
}

void warn(const std::string& message) { g_sink.load()(message); }

}  // namespace metriccam
