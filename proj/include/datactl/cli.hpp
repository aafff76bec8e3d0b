// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace datactl::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 pass/success, 1 FAIL, 2 indeterminate, 3 usage or data error.
int run(int argc, const char* const* argv);

}  // namespace datactl::cli
