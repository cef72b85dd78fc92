#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "discom/server/state.hpp"

namespace discom::server {

/// Directory-backed persistence. Layout:
///   manifest.json                  metadata, the commit point
///   images/<export>/<version>.xml  one file per committed version
///   workbooks/<hex id>.<gen>.xml   stored intermediate documents
/// Blobs are written before the manifest that references them, each through
/// temp file + fsync + rename, so a crash leaves either the old or the new
/// manifest and every file it names.
class Store {
 public:
  explicit Store(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Empty state for a fresh directory. Throws Error(Integrity) naming the
  /// damaged file on any corrupt or missing record.
  PlatformState load();

  void commit(const PlatformState& state);

  /// Called at named points inside commit; used for fault injection.
  using FaultHook = std::function<void(std::string_view step)>;
  void set_fault_hook(FaultHook hook) { hook_ = std::move(hook); }

 private:
  void fault(std::string_view step) const {
    if (hook_) hook_(step);
  }

  std::filesystem::path dir_;
  std::map<std::string, std::int64_t> persisted_versions_;
  std::map<std::string, std::uint64_t> persisted_generations_;
  FaultHook hook_;
};

/// Hook for DISCOM_FAULT_CRASH_AT="step[:n]": terminates the process without
/// cleanup at the n-th time commit reaches `step` (n defaults to 1).
Store::FaultHook crash_hook_from_env();

}  // namespace discom::server
