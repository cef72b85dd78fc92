#include "discom/agent/agent.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "discom/error.hpp"

namespace discom::agent {

using composition::ExportDescriptor;
using composition::ImportBinding;
using wire::Json;

namespace {

constexpr const char* kExportsKey = "discom.exports";
constexpr const char* kImportsKey = "discom.imports";
constexpr const char* kPendingKey = "discom.pending";
constexpr const char* kUploadKey = "discom.upload";

Json parse_property(const model::Workbook& wb, const char* key) {
  auto it = wb.properties().find(key);
  if (it == wb.properties().end()) return Json::array();
  auto j = Json::parse(it->second, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::Integrity, std::string("workbook property ") + key + " is not JSON");
  return j;
}

std::string fingerprint(const std::string& document) {
  return std::to_string(std::hash<std::string>{}(document));
}

}  // namespace

Agent::Agent(model::Workbook workbook, PlatformClient client) : wb_(std::move(workbook)), client_(std::move(client)) {
  load();
  engine::evaluate_in_place(wb_);
}

void Agent::load() {
  try {
    for (const auto& e : parse_property(wb_, kExportsKey)) {
      ExportLink link;
      link.descriptor = wire::export_from_json(wire::field(e, "descriptor"));
      link.acked_version = e.value("acked_version", std::int64_t{0});
      if (e.contains("last_pushed") && e["last_pushed"].is_string())
        link.last_pushed = model::decode_range_image(e["last_pushed"].get<std::string>());
      link.paused = e.value("paused", false);
      link.problem = e.value("problem", std::string());
      exports_[link.descriptor.id] = std::move(link);
    }
    for (const auto& i : parse_property(wb_, kImportsKey)) {
      ImportLink link;
      link.binding = wire::import_from_json(wire::field(i, "binding"));
      link.stale = i.value("stale", false);
      link.broken = i.value("broken", false);
      link.problem = i.value("problem", std::string());
      imports_[link.binding.id] = std::move(link);
    }
    for (const auto& p : parse_property(wb_, kPendingKey))
      pending_.push_back(
          PendingPush{wire::string_field(p, "export_id"), model::decode_range_image(wire::string_field(p, "image"))});
  } catch (const Error& e) {
    throw Error(ErrorKind::Integrity, "workbook " + wb_.id() + " carries unreadable sync metadata: " + e.what());
  }
  if (auto it = wb_.properties().find(kUploadKey); it != wb_.properties().end()) last_upload_ = it->second;
}

void Agent::persist() {
  Json exports = Json::array();
  for (const auto& [_, link] : exports_) {
    Json e{{"descriptor", wire::to_json(link.descriptor)},
           {"acked_version", link.acked_version},
           {"paused", link.paused},
           {"problem", link.problem}};
    e["last_pushed"] = link.last_pushed ? Json(model::encode_range_image(*link.last_pushed)) : Json(nullptr);
    exports.push_back(std::move(e));
  }
  Json imports = Json::array();
  for (const auto& [_, link] : imports_)
    imports.push_back({{"binding", wire::to_json(link.binding)},
                       {"stale", link.stale},
                       {"broken", link.broken},
                       {"problem", link.problem}});
  Json pending = Json::array();
  for (const auto& p : pending_)
    pending.push_back({{"export_id", p.export_id}, {"image", model::encode_range_image(p.image)}});
  auto& props = wb_.properties();
  props[kExportsKey] = exports.dump();
  props[kImportsKey] = imports.dump();
  props[kPendingKey] = pending.dump();
  props[kUploadKey] = last_upload_;
}

void Agent::checkpoint() {
  if (checkpoint_) checkpoint_(*this);
}

bool Agent::is_imported(const model::CellAddress& addr) const {
  return std::any_of(imports_.begin(), imports_.end(),
                     [&](const auto& kv) { return !kv.second.stale && kv.second.binding.target.contains(addr); });
}

engine::ChangeSet Agent::edit(const model::CellAddress& addr, std::string_view input) {
  if (is_imported(addr))
    throw Error(ErrorKind::Precondition, addr.to_string() + " is filled by an import and cannot be edited");
  wb_.ensure_sheet(addr.sheet);
  wb_.set_input(addr, input);
  auto changes = engine::recalculate(wb_, {addr});
  enqueue_modified();
  persist();
  return changes;
}

ExportDescriptor Agent::register_export(const std::string& space, const std::string& name,
                                        const std::string& description, const model::RangeRef& range,
                                        const composition::Visibility& visibility) {
  auto d = client_.register_export(space, name, description, range, visibility);
  track_export(d);
  return d;
}

ImportBinding Agent::bind_import(const std::string& export_id, const model::RangeRef& target) {
  auto b = client_.bind_import(export_id, target);
  track_import(b);
  return b;
}

void Agent::track_export(const ExportDescriptor& descriptor) {
  auto& link = exports_[descriptor.id];
  link.descriptor = descriptor;
  persist();
}

void Agent::track_import(const ImportBinding& binding) {
  auto& link = imports_[binding.id];
  link.binding = binding;
  persist();
}

std::set<std::string> Agent::detect_modified_exports() const {
  std::set<std::string> out;
  for (const auto& [id, link] : exports_) {
    if (link.descriptor.revoked) continue;
    auto image = model::capture_image(wb_, link.descriptor.range, id, 1);
    if (!link.last_pushed || !image.same_values(*link.last_pushed)) out.insert(id);
  }
  return out;
}

void Agent::enqueue_modified() {
  for (const auto& [id, link] : exports_) {
    if (link.descriptor.revoked) continue;
    auto image = model::capture_image(wb_, link.descriptor.range, id, link.acked_version + 1);
    bool modified = !link.last_pushed || !image.same_values(*link.last_pushed);
    auto pos = std::find_if(pending_.begin(), pending_.end(), [&](const PendingPush& p) { return p.export_id == id; });
    if (!modified) {
      if (pos != pending_.end()) pending_.erase(pos);
    } else if (pos != pending_.end()) {
      pos->image = std::move(image);  // coalesce, keep queue position
    } else {
      pending_.push_back(PendingPush{id, std::move(image)});
    }
  }
}

void Agent::acknowledge(ExportLink& link, model::RangeImage image, std::int64_t version) {
  image.version = version;
  link.acked_version = version;
  link.descriptor.latest_version = std::max(link.descriptor.latest_version, version);
  link.last_pushed = std::move(image);
  link.problem.clear();
  persist();
  checkpoint();
}

engine::ChangeSet Agent::apply_import(const composition::UpdateDelta& delta) {
  auto it = imports_.find(delta.binding_id);
  if (it == imports_.end()) throw Error(ErrorKind::NotFound, "no tracked import '" + delta.binding_id + "'");
  auto& link = it->second;
  if (link.stale) return {};
  engine::ChangeSet changes;
  try {
    changes = composition::apply_image(wb_, link.binding.target, delta.image);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Integrity) {
      link.broken = true;
      link.problem = e.what();
      persist();
    }
    throw;
  }
  link.broken = false;
  link.binding.applied_version = delta.to_version;
  persist();
  return changes;
}

// Returns false once the platform turned out to be unreachable.
bool Agent::flush(TickReport& report) {
  for (auto it = pending_.begin(); it != pending_.end();) {
    auto found = exports_.find(it->export_id);
    if (found == exports_.end() || found->second.descriptor.revoked) {
      it = pending_.erase(it);
      continue;
    }
    auto& link = found->second;
    if (link.paused) {
      ++it;
      continue;
    }
    const auto& id = it->export_id;
    try {
      try {
        auto v = client_.push(id, it->image, link.acked_version);
        online_ = true;
        acknowledge(link, it->image, v);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Conflict) throw;
        online_ = true;
        // Refresh, then retry once on top of whatever is there.
        auto latest = client_.latest_image(id);
        if (latest.same_values(it->image)) {
          acknowledge(link, latest, latest.version);
          it = pending_.erase(it);
          continue;
        }
        try {
          auto v = client_.push(id, it->image, latest.version);
          acknowledge(link, it->image, v);
        } catch (const Error& again) {
          if (again.kind() != ErrorKind::Conflict) throw;
          link.paused = true;
          link.problem = "conflicting contributions to " + id + " persist after retry; pushes paused";
          report.problems.push_back(link.problem);
          ++it;
          continue;
        }
      }
      report.pushed.push_back(id);
      it = pending_.erase(it);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Transport) {
        online_ = false;
        persist();
        return false;
      }
      link.problem = e.what();
      if (e.kind() == ErrorKind::Precondition) link.descriptor.revoked = true;
      if (e.kind() == ErrorKind::Authorization || e.kind() == ErrorKind::NotFound) link.paused = true;
      report.problems.push_back(id + ": " + e.what());
      it = pending_.erase(it);
    }
  }
  persist();
  return true;
}

TickReport Agent::sync_tick() {
  TickReport report;
  enqueue_modified();
  bool reachable = flush(report);
  if (reachable) {
    try {
      std::vector<std::pair<std::string, std::int64_t>> known;
      for (const auto& [id, link] : imports_)
        if (!link.stale) known.emplace_back(id, link.binding.applied_version);
      auto poll = client_.poll(known);
      online_ = true;
      for (const auto& r : poll.revocations) {
        auto& link = imports_.at(r.binding_id);
        link.stale = true;
        link.problem = r.reason;
        report.revoked.push_back(r.binding_id);
      }
      for (const auto& d : poll.deltas) {
        try {
          apply_import(d);
          report.applied.push_back(d.binding_id);
        } catch (const Error& e) {
          report.problems.push_back(d.binding_id + ": " + e.what());
        }
      }
      if (!report.applied.empty()) {
        enqueue_modified();
        reachable = flush(report);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Transport) {
        online_ = false;
        reachable = false;
      } else {
        report.problems.push_back(std::string("poll: ") + e.what());
      }
    }
  }
  if (reachable && role() == composition::WorkbookRole::Intermediate) {
    auto document = upload_document();
    auto print = fingerprint(document);
    if (print != last_upload_) {
      try {
        std::vector<std::string> exports, imports;
        for (const auto& [id, link] : exports_)
          if (!link.descriptor.revoked) exports.push_back(id);
        for (const auto& [id, link] : imports_)
          if (!link.stale) imports.push_back(id);
        client_.upload(wb_.id(), document, exports, imports);
        last_upload_ = print;
        report.uploaded = true;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Transport) online_ = false;
        else report.problems.push_back(std::string("upload: ") + e.what());
      }
    }
  }
  report.online = online_;
  persist();
  checkpoint();
  return report;
}

void Agent::resume_export(const std::string& id) {
  auto it = exports_.find(id);
  if (it == exports_.end()) throw Error(ErrorKind::NotFound, "no tracked export '" + id + "'");
  it->second.paused = false;
  it->second.problem.clear();
  persist();
}

composition::WorkbookRole Agent::role() const {
  std::vector<ExportDescriptor> exports;
  std::vector<ImportBinding> imports;
  for (const auto& [_, link] : exports_)
    if (!link.descriptor.revoked) exports.push_back(link.descriptor);
  for (const auto& [_, link] : imports_)
    if (!link.stale) imports.push_back(link.binding);
  try {
    return composition::classify_workbook(wb_, exports, imports);
  } catch (const Error&) {
    return composition::WorkbookRole::Detached;  // a range names a sheet that does not exist yet
  }
}

std::string Agent::upload_document() const {
  auto copy = wb_;
  std::erase_if(copy.properties(), [](const auto& kv) { return kv.first.rfind("discom.", 0) == 0; });
  return model::encode_workbook(copy);
}

void save_text_file(const std::string& path, const std::string& text) {
  auto tmp = path + ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorKind::Transport, "cannot write " + tmp + ": " + std::strerror(errno));
  const char* p = text.data();
  std::size_t left = text.size();
  while (left > 0) {
    auto n = ::write(fd, p, left);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      ::close(fd);
      throw Error(ErrorKind::Transport, "cannot write " + tmp + ": " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error(ErrorKind::Transport, "cannot replace " + path + ": " + std::strerror(errno));
}

std::string load_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace discom::agent
