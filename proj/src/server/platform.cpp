#include "discom/server/platform.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "discom/error.hpp"

namespace discom::server {

using composition::ExportDescriptor;
using composition::ImportBinding;
using composition::MemberRole;
using composition::Space;
using composition::User;

namespace {

const User& require_user(const PlatformState& s, const std::string& id) {
  auto it = s.directory.users.find(id);
  if (it == s.directory.users.end()) throw Error(ErrorKind::Authentication, "unknown user '" + id + "'");
  return it->second;
}

void require_admin(const PlatformState& s, const std::string& caller) {
  if (!require_user(s, caller).admin) throw Error(ErrorKind::Authorization, "administrator rights required");
}

ExportRecord& find_export(PlatformState& s, const std::string& id) {
  auto it = s.exports.find(id);
  if (it == s.exports.end()) throw Error(ErrorKind::NotFound, "no export '" + id + "'");
  return it->second;
}

const ExportRecord& find_export(const PlatformState& s, const std::string& id) {
  return find_export(const_cast<PlatformState&>(s), id);
}

// The single read-access predicate every read path goes through.
bool permits(const PlatformState& s, const std::string& user, const ExportDescriptor& e) {
  if (e.revoked) return false;
  auto sp = s.directory.spaces.find(e.space);
  if (sp == s.directory.spaces.end()) return false;
  return composition::authorize(user, e, sp->second) == composition::Access::Permit;
}

std::string next_id(std::uint64_t& counter, const char* prefix) { return prefix + std::to_string(counter++); }

void revoke_in(PlatformState& s, const std::function<bool(const ExportDescriptor&)>& pred) {
  for (auto& [_, rec] : s.exports)
    if (!rec.descriptor.revoked && pred(rec.descriptor)) rec.descriptor.revoked = true;
}

std::set<std::string> importing_workbooks(const PlatformState& s, const std::string& export_id) {
  std::set<std::string> out;
  for (const auto& [id, wb] : s.workbooks)
    for (const auto& b : wb.imports) {
      auto it = s.imports.find(b);
      if (it != s.imports.end() && it->second.export_id == export_id) out.insert(id);
    }
  return out;
}

}  // namespace

WorkbookGraph analyse_workbooks(const PlatformState& s) {
  WorkbookGraph g;
  std::vector<std::string> nodes;
  std::map<std::string, std::size_t> index;
  for (const auto& [id, _] : s.workbooks) {
    index[id] = nodes.size();
    nodes.push_back(id);
  }
  for (const auto& [id, wb] : s.workbooks)
    for (const auto& b : wb.imports)
      if (auto it = s.imports.find(b); it != s.imports.end()) g.downstream[it->second.export_id].insert(id);

  auto n = nodes.size();
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t u = 0; u < n; ++u)
    for (const auto& e : s.workbooks.at(nodes[u]).exports)
      if (auto it = g.downstream.find(e); it != g.downstream.end())
        for (const auto& v : it->second) out[u].push_back(index[v]);

  // reach[u][v]: v reachable from u over at least one edge. Desk scale, so
  // a DFS per node is plenty.
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t src = 0; src < n; ++src) {
    std::vector<std::size_t> stack(out[src].begin(), out[src].end());
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (reach[src][v]) continue;
      reach[src][v] = true;
      for (auto w : out[v]) stack.push_back(w);
    }
  }

  for (std::size_t v = 0; v < n; ++v) {
    if (!reach[v][v]) continue;
    std::set<std::string> exports;
    for (std::size_t u = 0; u < n; ++u) {
      if (!(reach[v][u] && reach[u][v])) continue;
      for (const auto& e : s.workbooks.at(nodes[u]).exports) {
        auto it = g.downstream.find(e);
        if (it == g.downstream.end()) continue;
        for (const auto& w : it->second)
          if (reach[v][index[w]] && reach[index[w]][v]) exports.insert(e);
      }
    }
    g.cycle[nodes[v]] = {exports.begin(), exports.end()};
  }

  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t u = 0; u < n; ++u)
    for (auto v : out[u]) ++indegree[v];
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::size_t next_rank = 0;
  while (!ready.empty()) {
    auto u = ready.top();
    ready.pop();
    g.rank[nodes[u]] = next_rank++;
    for (auto v : out[u])
      if (--indegree[v] == 0) ready.push(v);
  }
  for (std::size_t v = 0; v < n; ++v)
    if (!g.rank.contains(nodes[v])) g.rank[nodes[v]] = next_rank++;
  return g;
}

Platform::Platform(PlatformOptions options) : options_(std::move(options)) {
  if (!options_.data_dir.empty()) {
    store_ = std::make_unique<Store>(options_.data_dir);
    state_ = store_->load();
    store_->set_fault_hook(crash_hook_from_env());
  }
  refresh_ranks(state_);
  for (unsigned i = 0; i < options_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
  if (options_.workers > 0) sweeper_ = std::thread([this] { sweep_loop(); });
  enqueue_stale();
  run_sync_queue();
}

Platform::~Platform() {
  {
    std::lock_guard lk(q_mu_);
    stopping_ = true;
  }
  q_cv_.notify_all();
  for (auto& t : workers_) t.join();
  if (sweeper_.joinable()) sweeper_.join();
}

template <class Fn>
auto Platform::mutate(Fn&& fn) {
  std::unique_lock lock(state_mu_);
  PlatformState next = state_;
  auto result = fn(next);
  if (store_) store_->commit(next);
  state_ = std::move(next);
  refresh_ranks(state_);
  return result;
}

// ---- accounts ----

void Platform::bootstrap_admin(const std::string& id, const std::string& secret) {
  {
    std::shared_lock lock(state_mu_);
    if (state_.directory.users.contains(id)) return;
  }
  auto digest = hash_secret(secret, options_.hash_strength);
  mutate([&](PlatformState& s) {
    s.directory.users.emplace(id, User{id, id, digest, true});
    return 0;
  });
}

std::string Platform::login(const std::string& user, const std::string& secret) {
  std::string digest;
  {
    std::shared_lock lock(state_mu_);
    auto it = state_.directory.users.find(user);
    if (it != state_.directory.users.end()) digest = it->second.credential;
  }
  if (!verify_secret(digest, secret)) throw Error(ErrorKind::Authentication, "invalid credentials");
  auto token = random_token();
  std::lock_guard lk(session_mu_);
  sessions_[token] = user;
  return token;
}

std::string Platform::authenticate(const std::string& token) const {
  std::string user;
  {
    std::lock_guard lk(session_mu_);
    auto it = sessions_.find(token);
    if (token.empty() || it == sessions_.end()) throw Error(ErrorKind::Authentication, "missing or invalid token");
    user = it->second;
  }
  std::shared_lock lock(state_mu_);
  require_user(state_, user);
  return user;
}

void Platform::add_user(const std::string& caller, const std::string& id, const std::string& name,
                        const std::string& secret, bool admin) {
  {
    std::shared_lock lock(state_mu_);
    require_admin(state_, caller);
  }
  if (id.empty()) throw Error(ErrorKind::Integrity, "user id must not be empty");
  if (secret.empty()) throw Error(ErrorKind::Integrity, "secret must not be empty");
  auto digest = hash_secret(secret, options_.hash_strength);
  mutate([&](PlatformState& s) {
    require_admin(s, caller);
    if (s.directory.users.contains(id)) throw Error(ErrorKind::Conflict, "user '" + id + "' already exists");
    s.directory.users.emplace(id, User{id, name.empty() ? id : name, digest, admin});
    return 0;
  });
}

std::vector<User> Platform::list_users(const std::string& caller) const {
  std::shared_lock lock(state_mu_);
  require_admin(state_, caller);
  std::vector<User> out;
  for (const auto& [_, u] : state_.directory.users) out.push_back(User{u.id, u.name, {}, u.admin});
  return out;
}

void Platform::remove_user(const std::string& caller, const std::string& id) {
  mutate([&](PlatformState& s) {
    require_admin(s, caller);
    if (caller == id) throw Error(ErrorKind::Precondition, "cannot remove yourself");
    if (!s.directory.users.contains(id)) throw Error(ErrorKind::NotFound, "no user '" + id + "'");
    for (const auto& [sid, sp] : s.directory.spaces)
      if (sp.creator == id) throw Error(ErrorKind::Precondition, "user '" + id + "' still creates space " + sid);
    for (auto& [_, sp] : s.directory.spaces) sp.members.erase(id);
    for (auto& [_, rec] : s.exports) rec.descriptor.visibility.users.erase(id);
    revoke_in(s, [&](const ExportDescriptor& e) { return e.owner == id; });
    std::erase_if(s.imports, [&](const auto& kv) { return kv.second.importer == id; });
    std::erase_if(s.workbooks, [&](const auto& kv) { return kv.second.owner == id; });
    s.directory.users.erase(id);
    return 0;
  });
  std::lock_guard lk(session_mu_);
  std::erase_if(sessions_, [&](const auto& kv) { return kv.second == id; });
}

// ---- spaces ----

Space Platform::create_space(const std::string& caller, const std::string& name) {
  return mutate([&](PlatformState& s) {
    require_user(s, caller);
    auto space = composition::create_space(s.directory, next_id(s.next_space, "space-"), caller, name);
    s.directory.spaces[space.id] = space;
    return space;
  });
}

Space Platform::add_member(const std::string& caller, const std::string& space, const std::string& user,
                           MemberRole role) {
  return mutate([&](PlatformState& s) {
    auto grown = composition::add_member(s.directory, s.directory.space(space), caller, user, role);
    s.directory.spaces[space] = grown;
    return grown;
  });
}

Space Platform::remove_member(const std::string& caller, const std::string& space, const std::string& user) {
  return mutate([&](PlatformState& s) {
    auto shrunk = composition::remove_member(s.directory.space(space), caller, user);
    s.directory.spaces[space] = shrunk;
    for (auto& [_, rec] : s.exports) {
      if (rec.descriptor.space != space) continue;
      rec.descriptor.visibility.users.erase(user);
      if (rec.descriptor.owner == user) rec.descriptor.revoked = true;
    }
    return shrunk;
  });
}

std::vector<Space> Platform::list_spaces(const std::string& caller) const {
  std::shared_lock lock(state_mu_);
  bool admin = require_user(state_, caller).admin;
  std::vector<Space> out;
  for (const auto& [_, sp] : state_.directory.spaces)
    if (admin || sp.is_member(caller)) out.push_back(sp);
  return out;
}

void Platform::delete_space(const std::string& caller, const std::string& space) {
  mutate([&](PlatformState& s) {
    const auto& sp = s.directory.space(space);
    if (sp.creator != caller && !require_user(s, caller).admin)
      throw Error(ErrorKind::Authorization, "only the creator may delete a space");
    revoke_in(s, [&](const ExportDescriptor& e) { return e.space == space; });
    s.directory.spaces.erase(space);
    return 0;
  });
}

// ---- exports ----

ExportDescriptor Platform::register_export(const std::string& caller, const ExportRequest& request) {
  return mutate([&](PlatformState& s) {
    require_user(s, caller);
    const auto& space = s.directory.space(request.space);
    if (!space.is_member(caller)) throw Error(ErrorKind::Authorization, "not a member of " + request.space);
    if (request.name.empty()) throw Error(ErrorKind::Integrity, "export name must not be empty");
    ExportDescriptor e;
    e.owner = caller;
    e.space = request.space;
    e.name = request.name;
    e.description = request.description;
    e.range = request.range;
    e.visibility = request.visibility;
    composition::validate_export(e, space);
    e.id = next_id(s.next_export, "export-");
    s.exports[e.id] = ExportRecord{e, {}};
    return e;
  });
}

std::vector<ExportDescriptor> Platform::catalog(const std::string& caller) const {
  std::shared_lock lock(state_mu_);
  require_user(state_, caller);
  std::vector<ExportDescriptor> out;
  for (const auto& [_, rec] : state_.exports)
    if (permits(state_, caller, rec.descriptor)) out.push_back(rec.descriptor);
  return out;
}

ExportDescriptor Platform::update_export(const std::string& caller, const std::string& id, const ExportPatch& patch) {
  return mutate([&](PlatformState& s) {
    auto& rec = find_export(s, id);
    if (rec.descriptor.owner != caller) throw Error(ErrorKind::Authorization, "only the owner may update " + id);
    if (rec.descriptor.revoked) throw Error(ErrorKind::Precondition, id + " is revoked");
    auto e = rec.descriptor;
    if (patch.name) {
      if (patch.name->empty()) throw Error(ErrorKind::Integrity, "export name must not be empty");
      e.name = *patch.name;
    }
    if (patch.description) e.description = *patch.description;
    if (patch.visibility) e.visibility = *patch.visibility;
    composition::validate_export(e, s.directory.space(e.space));
    rec.descriptor = e;
    return e;
  });
}

void Platform::revoke_export(const std::string& caller, const std::string& id) {
  mutate([&](PlatformState& s) {
    auto& rec = find_export(s, id);
    if (rec.descriptor.owner != caller && !require_user(s, caller).admin)
      throw Error(ErrorKind::Authorization, "only the owner may revoke " + id);
    rec.descriptor.revoked = true;
    return 0;
  });
}

std::int64_t Platform::push_contribution(const std::string& caller, const std::string& export_id,
                                         const model::RangeImage& image, std::int64_t base_version) {
  std::set<std::string> downstream;
  auto version = mutate([&](PlatformState& s) {
    auto& rec = find_export(s, export_id);
    auto& e = rec.descriptor;
    if (e.owner != caller) throw Error(ErrorKind::Authorization, "only the owner may push to " + export_id);
    if (e.revoked) throw Error(ErrorKind::Precondition, export_id + " is revoked");
    if (image.rows != e.range.rows() || image.cols != e.range.cols() ||
        image.cells.size() != static_cast<std::size_t>(e.range.size()))
      throw Error(ErrorKind::Integrity, "image dimensions do not match " + e.range.to_string());
    if (base_version != e.latest_version)
      throw Error::conflict_at(e.latest_version, "stale base version " + std::to_string(base_version) + " for " +
                                                     export_id + ", latest is " + std::to_string(e.latest_version));
    auto stored = image;
    stored.export_id = export_id;
    stored.version = composition::next_version(e);
    rec.versions.push_back(StoredVersion{std::make_shared<const model::RangeImage>(std::move(stored)), caller});
    e.latest_version = static_cast<std::int64_t>(rec.versions.size());
    downstream = importing_workbooks(s, export_id);
    return e.latest_version;
  });
  enqueue(downstream);
  run_sync_queue();
  return version;
}

model::RangeImage Platform::latest_image(const std::string& caller, const std::string& export_id) const {
  std::shared_lock lock(state_mu_);
  require_user(state_, caller);
  const auto& rec = find_export(state_, export_id);
  if (!permits(state_, caller, rec.descriptor))
    throw Error(ErrorKind::Authorization, "no read access to " + export_id);
  if (rec.versions.empty()) throw Error(ErrorKind::NotFound, export_id + " has no committed version");
  return *rec.versions.back().image;
}

// ---- imports ----

ImportBinding Platform::bind_import(const std::string& caller, const std::string& export_id,
                                    const model::RangeRef& target) {
  return mutate([&](PlatformState& s) {
    require_user(s, caller);
    const auto& rec = find_export(s, export_id);
    if (rec.descriptor.revoked) throw Error(ErrorKind::NotFound, export_id + " is revoked");
    if (!permits(s, caller, rec.descriptor)) throw Error(ErrorKind::Authorization, "no read access to " + export_id);
    const auto* role = s.directory.space(rec.descriptor.space).role_of(caller);
    if (!role || !composition::can_import(*role))
      throw Error(ErrorKind::Authorization, caller + " has no importing role in " + rec.descriptor.space);
    ImportBinding b;
    b.importer = caller;
    b.export_id = export_id;
    b.target = target;
    composition::validate_binding(b, rec.descriptor);
    b.id = next_id(s.next_import, "import-");
    s.imports[b.id] = b;
    return b;
  });
}

std::vector<ImportBinding> Platform::list_imports(const std::string& caller) const {
  std::shared_lock lock(state_mu_);
  require_user(state_, caller);
  std::vector<ImportBinding> out;
  for (const auto& [_, b] : state_.imports)
    if (b.importer == caller) out.push_back(b);
  return out;
}

void Platform::delete_import(const std::string& caller, const std::string& id) {
  mutate([&](PlatformState& s) {
    auto it = s.imports.find(id);
    if (it == s.imports.end()) throw Error(ErrorKind::NotFound, "no import '" + id + "'");
    if (it->second.importer != caller) throw Error(ErrorKind::Authorization, "only the importer may delete " + id);
    s.imports.erase(it);
    for (auto& [_, wb] : s.workbooks) std::erase(wb.imports, id);
    return 0;
  });
}

PollResult Platform::poll_updates(const std::string& caller,
                                  const std::vector<std::pair<std::string, std::int64_t>>& known) {
  PollResult out;
  // Exclusive: the reported known versions become the bindings' applied
  // versions. They are advisory and ride along with the next commit.
  std::unique_lock lock(state_mu_);
  require_user(state_, caller);
  for (const auto& [id, known_version] : known) {
    auto it = state_.imports.find(id);
    if (it == state_.imports.end()) throw Error(ErrorKind::NotFound, "no import '" + id + "'");
    auto& b = it->second;
    if (b.importer != caller) throw Error(ErrorKind::Authorization, id + " belongs to another user");
    auto ex = state_.exports.find(b.export_id);
    if (ex == state_.exports.end() || ex->second.descriptor.revoked) {
      out.revocations.push_back(Revocation{id, b.export_id, "export revoked"});
      continue;
    }
    if (!permits(state_, caller, ex->second.descriptor)) {
      out.revocations.push_back(Revocation{id, b.export_id, "access withdrawn"});
      continue;
    }
    auto latest = ex->second.descriptor.latest_version;
    b.applied_version = std::clamp<std::int64_t>(known_version, 0, latest);
    if (latest > known_version)
      out.deltas.push_back(UpdateDelta{id, b.export_id, *ex->second.versions.back().image, known_version, latest});
  }
  return out;
}

// ---- intermediates ----

std::string Platform::upload_intermediate(const std::string& caller, const std::string& document,
                                          const std::vector<std::string>& exports,
                                          const std::vector<std::string>& imports) {
  auto wb = model::decode_workbook(document);
  if (wb.id().empty()) throw Error(ErrorKind::Integrity, "uploaded workbook has no id");
  auto canonical = model::encode_workbook(wb);
  auto id = mutate([&](PlatformState& s) {
    require_user(s, caller);
    std::vector<ExportDescriptor> descs;
    std::vector<ImportBinding> binds;
    for (const auto& e : exports) {
      const auto& rec = find_export(s, e);
      if (rec.descriptor.owner != caller) throw Error(ErrorKind::Authorization, caller + " does not own " + e);
      descs.push_back(rec.descriptor);
    }
    for (const auto& i : imports) {
      auto it = s.imports.find(i);
      if (it == s.imports.end()) throw Error(ErrorKind::NotFound, "no import '" + i + "'");
      if (it->second.importer != caller) throw Error(ErrorKind::Authorization, caller + " does not own " + i);
      binds.push_back(it->second);
    }
    if (composition::classify_workbook(wb, descs, binds) != composition::WorkbookRole::Intermediate)
      throw Error(ErrorKind::Precondition, "workbook " + wb.id() + " is not intermediate; only ranges are exchanged");
    auto& rec = s.workbooks[wb.id()];
    if (!rec.owner.empty() && rec.owner != caller)
      throw Error(ErrorKind::Authorization, "workbook " + wb.id() + " belongs to " + rec.owner);
    rec.id = wb.id();
    rec.owner = caller;
    rec.document = canonical;
    rec.exports = exports;
    rec.imports = imports;
    rec.last_propagated.clear();
    ++rec.generation;
    return rec.id;
  });
  enqueue({id});
  run_sync_queue();
  return id;
}

void Platform::delete_workbook(const std::string& caller, const std::string& id) {
  mutate([&](PlatformState& s) {
    auto it = s.workbooks.find(id);
    if (it == s.workbooks.end()) throw Error(ErrorKind::NotFound, "no workbook '" + id + "'");
    if (it->second.owner != caller && !require_user(s, caller).admin)
      throw Error(ErrorKind::Authorization, "only the owner may delete workbook " + id);
    s.workbooks.erase(it);
    return 0;
  });
}

Propagation Platform::propagate(const std::string& workbook_id) {
  Propagation out;
  struct Input {
    ImportBinding binding;
    std::shared_ptr<const model::RangeImage> image;
    std::int64_t version = 0;
  };
  struct Output {
    ExportDescriptor descriptor;
    std::shared_ptr<const model::RangeImage> latest;
  };
  std::string document;
  std::uint64_t generation = 0;
  std::map<std::string, std::int64_t> previous;
  std::vector<Input> inputs;
  std::vector<Output> outputs;
  std::map<std::string, std::set<std::string>> downstream;
  {
    std::shared_lock lock(state_mu_);
    auto it = state_.workbooks.find(workbook_id);
    if (it == state_.workbooks.end()) throw Error(ErrorKind::NotFound, "no workbook '" + workbook_id + "'");
    const auto& rec = it->second;
    auto graph = analyse_workbooks(state_);
    if (auto c = graph.cycle.find(workbook_id); c != graph.cycle.end()) {
      std::string text = "propagation aborted: cross-workbook cycle through exports";
      for (std::size_t i = 0; i < c->second.size(); ++i) text += (i ? ", " : " ") + c->second[i];
      out.cycle = text;
    } else {
      document = rec.document;
      generation = rec.generation;
      previous = rec.last_propagated;
      downstream = std::move(graph.downstream);
      for (const auto& bid : rec.imports) {
        auto b = state_.imports.find(bid);
        if (b == state_.imports.end()) continue;
        Input in{b->second, nullptr, 0};
        auto ex = state_.exports.find(b->second.export_id);
        if (ex != state_.exports.end() && permits(state_, rec.owner, ex->second.descriptor) &&
            !ex->second.versions.empty()) {
          in.image = ex->second.versions.back().image;
          in.version = ex->second.descriptor.latest_version;
        }
        inputs.push_back(std::move(in));
      }
      for (const auto& eid : rec.exports) {
        auto ex = state_.exports.find(eid);
        if (ex == state_.exports.end() || ex->second.descriptor.revoked) continue;
        outputs.push_back(
            Output{ex->second.descriptor, ex->second.versions.empty() ? nullptr : ex->second.versions.back().image});
      }
    }
  }
  if (out.cycle) {
    record_diagnostic(*out.cycle);
    return out;
  }

  // 1) load  2) insert imports  3) recalculate  4) re-publish changed exports
  auto wb = model::decode_workbook(document);
  engine::evaluate_in_place(wb);
  std::map<std::string, std::int64_t> applied;
  for (const auto& in : inputs) {
    if (!in.image) continue;
    try {
      composition::apply_image(wb, in.binding.target, *in.image);
      applied[in.binding.export_id] = in.version;
    } catch (const Error& e) {
      record_diagnostic("workbook " + workbook_id + ", " + in.binding.id + ": " + e.what());
    }
  }
  std::vector<std::pair<std::size_t, model::RangeImage>> changed;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& d = outputs[i].descriptor;
    auto image = model::capture_image(wb, d.range, d.id, d.latest_version + 1);
    if (!outputs[i].latest || !image.same_values(*outputs[i].latest)) changed.emplace_back(i, std::move(image));
  }
  auto new_document = model::encode_workbook(wb);
  if (changed.empty() && new_document == document && applied == previous) return out;

  bool rerun = false;
  std::set<std::string> trigger;
  mutate([&](PlatformState& s) {
    auto it = s.workbooks.find(workbook_id);
    if (it == s.workbooks.end()) return 0;
    auto& rec = it->second;
    if (rec.generation != generation) {
      rerun = true;  // re-uploaded meanwhile
      return 0;
    }
    for (auto& [i, image] : changed) {
      const auto& d = outputs[i].descriptor;
      auto& ex = s.exports.at(d.id);
      if (ex.descriptor.revoked) continue;
      if (ex.descriptor.latest_version != d.latest_version) {
        rerun = true;  // owner pushed meanwhile
        continue;
      }
      image.version = composition::next_version(ex.descriptor);
      ex.versions.push_back(StoredVersion{std::make_shared<const model::RangeImage>(image), kPlatformAuthor});
      ex.descriptor.latest_version = image.version;
      out.committed.emplace_back(d.id, image.version);
      if (auto ds = downstream.find(d.id); ds != downstream.end()) trigger.insert(ds->second.begin(), ds->second.end());
    }
    if (new_document != rec.document) {
      rec.document = new_document;
      ++rec.generation;
    }
    rec.last_propagated = applied;
    return 0;
  });
  if (rerun) trigger.insert(workbook_id);
  enqueue(trigger);
  return out;
}

// ---- queue ----

void Platform::refresh_ranks(const PlatformState& state) {
  auto graph = analyse_workbooks(state);
  std::lock_guard lk(q_mu_);
  ranks_ = std::move(graph.rank);
}

void Platform::enqueue(const std::set<std::string>& workbooks) {
  if (workbooks.empty()) return;
  {
    std::lock_guard lk(q_mu_);
    queued_.insert(workbooks.begin(), workbooks.end());
  }
  q_cv_.notify_all();
}

void Platform::enqueue_stale() {
  std::set<std::string> stale;
  {
    std::shared_lock lock(state_mu_);
    for (const auto& [id, wb] : state_.workbooks) {
      for (const auto& bid : wb.imports) {
        auto b = state_.imports.find(bid);
        if (b == state_.imports.end()) continue;
        auto ex = state_.exports.find(b->second.export_id);
        if (ex == state_.exports.end() || ex->second.descriptor.latest_version == 0) continue;
        auto lp = wb.last_propagated.find(b->second.export_id);
        if (lp == wb.last_propagated.end() || lp->second != ex->second.descriptor.latest_version) stale.insert(id);
      }
    }
  }
  enqueue(stale);
}

bool Platform::take_next(std::string& id) {
  const std::string* best = nullptr;
  std::size_t best_rank = 0;
  for (const auto& q : queued_) {
    if (running_.contains(q)) continue;
    auto r = ranks_.contains(q) ? ranks_.at(q) : ranks_.size();
    if (!best || r < best_rank) {
      best = &q;
      best_rank = r;
    }
  }
  if (!best) return false;
  id = *best;
  queued_.erase(id);
  running_.insert(id);
  return true;
}

void Platform::finish(const std::string& id) {
  running_.erase(id);
  if (queued_.empty() && running_.empty()) idle_cv_.notify_all();
  q_cv_.notify_all();
}

void Platform::run_sync_queue() {
  if (options_.workers > 0) return;
  std::unique_lock lk(q_mu_);
  if (sync_active_) return;
  sync_active_ = true;
  std::string id;
  while (take_next(id)) {
    lk.unlock();
    try {
      propagate(id);
    } catch (const std::exception& e) {
      record_diagnostic("propagation of " + id + " failed: " + e.what());
    }
    lk.lock();
    finish(id);
  }
  sync_active_ = false;
  idle_cv_.notify_all();
}

void Platform::worker_loop() {
  std::unique_lock lk(q_mu_);
  for (;;) {
    std::string id;
    q_cv_.wait(lk, [&] { return stopping_ || take_next(id); });
    if (stopping_) return;
    lk.unlock();
    try {
      propagate(id);
    } catch (const std::exception& e) {
      record_diagnostic("propagation of " + id + " failed: " + e.what());
    }
    lk.lock();
    finish(id);
  }
}

void Platform::sweep_loop() {
  std::unique_lock lk(q_mu_);
  while (!stopping_) {
    if (q_cv_.wait_for(lk, options_.sweep_interval, [&] { return stopping_; })) return;
    lk.unlock();
    enqueue_stale();
    lk.lock();
  }
}

void Platform::drain() {
  run_sync_queue();
  std::unique_lock lk(q_mu_);
  idle_cv_.wait(lk, [&] { return queued_.empty() && running_.empty() && !sync_active_; });
}

void Platform::record_diagnostic(const std::string& text) {
  std::lock_guard lk(q_mu_);
  if (std::find(diagnostics_.begin(), diagnostics_.end(), text) == diagnostics_.end()) diagnostics_.push_back(text);
}

PlatformState Platform::snapshot() const {
  std::shared_lock lock(state_mu_);
  return state_;
}

std::vector<std::string> Platform::diagnostics() const {
  std::lock_guard lk(q_mu_);
  return diagnostics_;
}

}  // namespace discom::server
