#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "discom/agent/client.hpp"
#include "discom/composition/composition.hpp"
#include "discom/engine/evaluator.hpp"
#include "discom/model/range_image.hpp"
#include "discom/model/workbook.hpp"

namespace discom::agent {

struct ExportLink {
  composition::ExportDescriptor descriptor;
  std::int64_t acked_version = 0;                // last version the platform acknowledged
  std::optional<model::RangeImage> last_pushed;  // image of acked_version
  bool paused = false;                           // conflict persisted after a retry
  std::string problem;
};

struct ImportLink {
  composition::ImportBinding binding;
  bool stale = false;   // export revoked or access withdrawn
  bool broken = false;  // delta did not fit the target
  std::string problem;
};

struct PendingPush {
  std::string export_id;
  model::RangeImage image;
};

struct TickReport {
  bool online = false;
  std::vector<std::string> pushed;   // export ids in push order
  std::vector<std::string> applied;  // binding ids
  std::vector<std::string> revoked;  // binding ids
  bool uploaded = false;
  std::vector<std::string> problems;
};

/// One workbook and its sync state. Not thread-safe: AgentRunner serializes
/// access. Export/import metadata and sync state live in the workbook's
/// properties under "discom.*", so saving the workbook saves the agent.
class Agent {
 public:
  Agent(model::Workbook workbook, PlatformClient client);

  const model::Workbook& workbook() const noexcept { return wb_; }
  PlatformClient& client() noexcept { return client_; }

  /// Local edit ("=..." formula or literal text); creates the sheet if
  /// needed. Throws Error(Precondition) for cells under an import target.
  engine::ChangeSet edit(const model::CellAddress& addr, std::string_view input);
  bool is_imported(const model::CellAddress& addr) const;

  /// Registers on the platform and starts tracking. One API call each.
  composition::ExportDescriptor register_export(const std::string& space, const std::string& name,
                                                const std::string& description, const model::RangeRef& range,
                                                const composition::Visibility& visibility);
  composition::ImportBinding bind_import(const std::string& export_id, const model::RangeRef& target);

  /// Tracks an already registered descriptor or binding.
  void track_export(const composition::ExportDescriptor& descriptor);
  void track_import(const composition::ImportBinding& binding);

  /// Exports whose computed image differs from the last acknowledged push.
  std::set<std::string> detect_modified_exports() const;

  engine::ChangeSet apply_import(const composition::UpdateDelta& delta);

  /// detect, flush, poll and apply, re-detect and flush, classify and upload.
  /// Never throws for platform failures; they land in the report.
  TickReport sync_tick();

  /// Clears the paused flag so the next tick pushes again.
  void resume_export(const std::string& id);

  bool online() const noexcept { return online_; }
  const std::map<std::string, ExportLink>& exports() const noexcept { return exports_; }
  const std::map<std::string, ImportLink>& imports() const noexcept { return imports_; }
  const std::deque<PendingPush>& pending() const noexcept { return pending_; }
  composition::WorkbookRole role() const;

  /// Called whenever durable state changed (after each acknowledged push and
  /// at the end of a tick). The runner saves the workbook file here.
  void set_checkpoint(std::function<void(const Agent&)> fn) { checkpoint_ = std::move(fn); }

  /// Workbook as uploaded to the platform: sync-state properties removed.
  std::string upload_document() const;

 private:
  void enqueue_modified();
  bool flush(TickReport& report);
  void acknowledge(ExportLink& link, model::RangeImage image, std::int64_t version);
  void persist();
  void load();
  void checkpoint();

  model::Workbook wb_;
  PlatformClient client_;
  std::map<std::string, ExportLink> exports_;
  std::map<std::string, ImportLink> imports_;
  std::deque<PendingPush> pending_;
  std::string last_upload_;
  bool online_ = false;
  std::function<void(const Agent&)> checkpoint_;
};

/// Atomic temp-file + rename write used for workbook files.
void save_text_file(const std::string& path, const std::string& text);
std::string load_text_file(const std::string& path);

}  // namespace discom::agent
