// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tailcast {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  config,
  schema,
  integrity,
  degenerate,
  io,
  empty_subset,
  insufficient_tail,
  strategy_unavailable,
  dimension,
  consistency,
  domain,
  divergence,
  fit,
  checksum,
  version,
};

std::string_view to_string(ErrorKind kind);

/// 2 for configuration problems, 3 for data problems, 4 for numeric ones.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// Non-fatal conditions (empty window sets, truncated samples, ...) go through
// a process-wide sink. The default sink writes to stderr.
using WarningSink = std::function<void(std::string_view)>;

void warn(std::string_view message);
WarningSink set_warning_sink(WarningSink sink);

/// Collects warnings for the lifetime of the object.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view needle) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace tailcast
