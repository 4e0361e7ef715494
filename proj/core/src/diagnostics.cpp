// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace tailcast {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config error";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::integrity: return "integrity error";
    case ErrorKind::degenerate: return "degenerate error";
    case ErrorKind::io: return "io error";
    case ErrorKind::empty_subset: return "empty-subset error";
    case ErrorKind::insufficient_tail: return "insufficient-tail error";
    case ErrorKind::strategy_unavailable: return "strategy-unavailable error";
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::consistency: return "consistency error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::divergence: return "divergence error";
    case ErrorKind::fit: return "fit error";
    case ErrorKind::checksum: return "checksum error";
    case ErrorKind::version: return "version error";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::schema:
    case ErrorKind::integrity:
    case ErrorKind::degenerate:
    case ErrorKind::io:
    case ErrorKind::empty_subset:
    case ErrorKind::insufficient_tail:
    case ErrorKind::strategy_unavailable:
    case ErrorKind::checksum:
    case ErrorKind::version:
      return 3;
    case ErrorKind::dimension:
    case ErrorKind::consistency:
    case ErrorKind::domain:
    case ErrorKind::divergence:
    case ErrorKind::fit:
      return 4;
  }
  return 1;
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink() {
  static WarningSink s = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return s;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

WarningSink set_warning_sink(WarningSink next) {
  std::lock_guard lock(sink_mutex());
  auto previous = std::move(sink());
  sink() = std::move(next);
  return previous;
}

ScopedWarningCapture::ScopedWarningCapture() {
  previous_ = set_warning_sink([this](std::string_view msg) { messages_.emplace_back(msg); });
}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_sink(std::move(previous_)); }

bool ScopedWarningCapture::contains(std::string_view needle) const {
  for (const auto& m : messages_) {
    if (m.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace tailcast
