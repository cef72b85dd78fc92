#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "discom/server/credentials.hpp"
#include "discom/server/state.hpp"
#include "discom/server/store.hpp"

namespace discom::server {

struct PlatformOptions {
  /// 0 runs propagation on the calling thread before the mutating call
  /// returns, which makes scenario replays deterministic.
  unsigned workers = 0;
  std::chrono::milliseconds sweep_interval{60'000};
  HashStrength hash_strength = HashStrength::Interactive;
  /// Empty: state lives in memory only.
  std::filesystem::path data_dir;
};

using composition::PollResult;
using composition::Revocation;
using composition::UpdateDelta;

struct ExportRequest {
  std::string space;
  std::string name;
  std::string description;
  model::RangeRef range;
  composition::Visibility visibility;
};

struct ExportPatch {
  std::optional<std::string> name;
  std::optional<std::string> description;
  std::optional<composition::Visibility> visibility;
};

struct Propagation {
  std::vector<std::pair<std::string, std::int64_t>> committed;  // export id, new version
  std::optional<std::string> cycle;  // diagnostic when the workbook sits on a cross-workbook cycle
};

/// The platform service. Every public member is thread-safe: mutations are
/// serialized and persisted before they return, reads run concurrently.
class Platform {
 public:
  explicit Platform(PlatformOptions options = {});
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  // Accounts. The first user may be created without a caller.
  void bootstrap_admin(const std::string& id, const std::string& secret);
  std::string login(const std::string& user, const std::string& secret);
  /// User id behind a token; Error(Authentication) otherwise.
  std::string authenticate(const std::string& token) const;
  void add_user(const std::string& caller, const std::string& id, const std::string& name,
                const std::string& secret, bool admin = false);
  std::vector<composition::User> list_users(const std::string& caller) const;
  void remove_user(const std::string& caller, const std::string& id);

  // Spaces.
  composition::Space create_space(const std::string& caller, const std::string& name);
  composition::Space add_member(const std::string& caller, const std::string& space, const std::string& user,
                                composition::MemberRole role);
  composition::Space remove_member(const std::string& caller, const std::string& space, const std::string& user);
  std::vector<composition::Space> list_spaces(const std::string& caller) const;
  void delete_space(const std::string& caller, const std::string& space);

  // Exports.
  composition::ExportDescriptor register_export(const std::string& caller, const ExportRequest& request);
  std::vector<composition::ExportDescriptor> catalog(const std::string& caller) const;
  composition::ExportDescriptor update_export(const std::string& caller, const std::string& id,
                                              const ExportPatch& patch);
  void revoke_export(const std::string& caller, const std::string& id);
  std::int64_t push_contribution(const std::string& caller, const std::string& export_id,
                                 const model::RangeImage& image, std::int64_t base_version);
  model::RangeImage latest_image(const std::string& caller, const std::string& export_id) const;

  // Imports.
  composition::ImportBinding bind_import(const std::string& caller, const std::string& export_id,
                                         const model::RangeRef& target);
  std::vector<composition::ImportBinding> list_imports(const std::string& caller) const;
  void delete_import(const std::string& caller, const std::string& id);
  PollResult poll_updates(const std::string& caller,
                          const std::vector<std::pair<std::string, std::int64_t>>& known);

  // Intermediate workbooks.
  std::string upload_intermediate(const std::string& caller, const std::string& document,
                                  const std::vector<std::string>& exports, const std::vector<std::string>& imports);
  void delete_workbook(const std::string& caller, const std::string& id);

  /// Runs the four propagation steps for one stored workbook right now.
  Propagation propagate(const std::string& workbook_id);
  /// Blocks until the propagation queue is empty and no worker is busy.
  void drain();

  PlatformState snapshot() const;
  std::vector<std::string> diagnostics() const;
  const PlatformOptions& options() const noexcept { return options_; }

 private:
  template <class Fn>
  auto mutate(Fn&& fn);
  void enqueue(const std::set<std::string>& workbooks);
  void enqueue_stale();
  void run_sync_queue();
  bool take_next(std::string& id);  // requires q_mu_
  void finish(const std::string& id);
  void worker_loop();
  void sweep_loop();
  void refresh_ranks(const PlatformState& state);
  void record_diagnostic(const std::string& text);

  PlatformOptions options_;
  std::unique_ptr<Store> store_;

  mutable std::shared_mutex state_mu_;
  PlatformState state_;

  mutable std::mutex session_mu_;
  std::map<std::string, std::string> sessions_;  // token -> user

  // Lock order: state_mu_ before q_mu_, never the reverse.
  mutable std::mutex q_mu_;
  std::condition_variable q_cv_;
  std::condition_variable idle_cv_;
  std::set<std::string> queued_;
  std::set<std::string> running_;
  std::map<std::string, std::size_t> ranks_;  // topological rank of each stored workbook
  std::vector<std::string> diagnostics_;
  bool sync_active_ = false;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
  std::thread sweeper_;
};

/// Workbook graph analysis: an edge runs from the workbook hosting an export
/// to every stored workbook importing it.
struct WorkbookGraph {
  std::map<std::string, std::size_t> rank;               // topological position; cyclic nodes last
  std::map<std::string, std::vector<std::string>> cycle;  // workbook -> export ids on its cycle
  std::map<std::string, std::set<std::string>> downstream;  // export id -> importing workbooks
};

WorkbookGraph analyse_workbooks(const PlatformState& state);

}  // namespace discom::server
