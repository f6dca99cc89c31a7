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

#ifndef MRCONV_DIAGNOSTICS_H_
#define MRCONV_DIAGNOSTICS_H_

#include <functional>
#include <string>
#include <utility>

namespace mrconv {

using WarningHandler = std::function<void(const std::string&)>;

// Non-fatal diagnostics (e.g. ignored mask bits) go through this handler.
// The default prints "mrconv: warning: ..." to stderr. Passing an empty
// handler restores the default. Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

// Installs a handler for the lifetime of the object.
class ScopedWarningHandler {
 public:
  explicit ScopedWarningHandler(WarningHandler handler)
      : previous_(set_warning_handler(std::move(handler))) {}
  ~ScopedWarningHandler() { set_warning_handler(std::move(previous_)); }
  ScopedWarningHandler(const ScopedWarningHandler&) = delete;
  ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
  WarningHandler previous_;
};

}  // namespace mrconv

#endif  // MRCONV_DIAGNOSTICS_H_
