// Copyright 2026 The mrconv Authors.
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

#include "mrconv/diagnostics.h"

#include <iostream>
#include <mutex>
#include <utility>

namespace mrconv {
namespace {

std::mutex g_mutex;

WarningHandler& handler_slot() {
  static WarningHandler handler;
  return handler;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard<std::mutex> lock(g_mutex);
  return std::exchange(handler_slot(), std::move(handler));
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_mutex);
  if (handler_slot()) {
    handler_slot()(message);
  } else {
    std::cerr << "mrconv: warning: " << message << '\n';
  }
}

}  // namespace mrconv
