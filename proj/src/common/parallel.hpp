// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace cgru {

/// Worker count: hardware concurrency capped by the CGRU_THREADS env var.
std::size_t worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Bodies must only
/// write to index-owned slots; results then do not depend on worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace cgru
