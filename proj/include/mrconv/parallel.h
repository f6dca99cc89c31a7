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

#ifndef MRCONV_PARALLEL_H_
#define MRCONV_PARALLEL_H_

#include <functional>

namespace mrconv {

// Worker count for kernels, read once from MRC_THREADS (default 1).
int thread_count();

// Overrides the worker count for the rest of the process. 0 restores the
// environment default.
void set_thread_count(int n);

// Calls fn(row) for every row in [0, rows). Rows are split into contiguous
// chunks across workers; each row is processed by exactly one worker, so the
// result is identical to the sequential loop whenever rows are independent.
void parallel_rows(int rows, const std::function<void(int)>& fn);

}  // namespace mrconv

#endif  // MRCONV_PARALLEL_H_
