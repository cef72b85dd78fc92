#include "discom/server/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "discom/error.hpp"
#include "discom/wire/json.hpp"

namespace discom::server {

namespace fs = std::filesystem;
using wire::Json;

namespace {

constexpr int kFormat = 1;

[[noreturn]] void corrupt(const fs::path& file, const std::string& why) {
  throw Error(ErrorKind::Integrity, "corrupt store record " + file.string() + ": " + why);
}

[[noreturn]] void io_failure(const fs::path& file, const char* what) {
  throw Error(ErrorKind::Transport, std::string(what) + " " + file.string() + ": " + std::strerror(errno));
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) io_failure(dir, "cannot open directory");
  ::fsync(fd);
  ::close(fd);
}

// temp + fsync + rename. The caller syncs the parent directory.
void write_atomic(const fs::path& file, std::string_view data) {
  auto tmp = file;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) io_failure(tmp, "cannot create");
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    auto n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_failure(tmp, "cannot write");
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_failure(tmp, "cannot sync");
  }
  ::close(fd);
  if (::rename(tmp.c_str(), file.c_str()) != 0) io_failure(file, "cannot rename into");
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) corrupt(file, "missing or unreadable");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex_id(std::string_view id) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : id) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

fs::path image_path(const fs::path& dir, const std::string& export_id, std::int64_t version) {
  return dir / "images" / export_id / (std::to_string(version) + ".xml");
}

fs::path workbook_path(const fs::path& dir, const std::string& id, std::uint64_t generation) {
  return dir / "workbooks" / (hex_id(id) + "." + std::to_string(generation) + ".xml");
}

Json manifest_json(const PlatformState& s) {
  Json users = Json::array();
  for (const auto& [_, u] : s.directory.users)
    users.push_back({{"id", u.id}, {"name", u.name}, {"credential", u.credential}, {"admin", u.admin}});
  Json spaces = Json::array();
  for (const auto& [_, sp] : s.directory.spaces) spaces.push_back(wire::to_json(sp));
  Json exports = Json::array();
  for (const auto& [_, rec] : s.exports) {
    Json authors = Json::array();
    for (const auto& v : rec.versions) authors.push_back(v.author);
    exports.push_back({{"descriptor", wire::to_json(rec.descriptor)}, {"authors", authors}});
  }
  Json imports = Json::array();
  for (const auto& [_, b] : s.imports) imports.push_back(wire::to_json(b));
  Json workbooks = Json::array();
  for (const auto& [_, w] : s.workbooks)
    workbooks.push_back({{"id", w.id},
                         {"owner", w.owner},
                         {"generation", w.generation},
                         {"exports", w.exports},
                         {"imports", w.imports},
                         {"last_propagated", w.last_propagated}});
  return Json{{"format", kFormat},
              {"counters", {{"space", s.next_space}, {"export", s.next_export}, {"import", s.next_import}}},
              {"users", users},
              {"spaces", spaces},
              {"exports", exports},
              {"imports", imports},
              {"workbooks", workbooks}};
}

}  // namespace

Store::Store(fs::path dir) : dir_(std::move(dir)) {}

PlatformState Store::load() {
  PlatformState s;
  persisted_versions_.clear();
  persisted_generations_.clear();
  fs::create_directories(dir_);
  auto manifest_file = dir_ / "manifest.json";
  if (!fs::exists(manifest_file)) return s;

  auto m = Json::parse(read_file(manifest_file), nullptr, false);
  if (m.is_discarded() || !m.is_object()) corrupt(manifest_file, "not valid JSON");
  try {
    if (wire::int_field(m, "format") != kFormat) corrupt(manifest_file, "unsupported format");
    const auto& counters = wire::field(m, "counters");
    s.next_space = counters.at("space").get<std::uint64_t>();
    s.next_export = counters.at("export").get<std::uint64_t>();
    s.next_import = counters.at("import").get<std::uint64_t>();
    for (const auto& u : wire::field(m, "users")) {
      composition::User user{wire::string_field(u, "id"), wire::string_field(u, "name"),
                             wire::string_field(u, "credential"), u.at("admin").get<bool>()};
      s.directory.users[user.id] = user;
    }
    for (const auto& j : wire::field(m, "spaces")) {
      auto sp = wire::space_from_json(j);
      s.directory.spaces[sp.id] = sp;
    }
    for (const auto& b : wire::field(m, "imports")) {
      auto binding = wire::import_from_json(b);
      s.imports[binding.id] = binding;
    }
    for (const auto& e : wire::field(m, "exports")) {
      ExportRecord rec;
      rec.descriptor = wire::export_from_json(wire::field(e, "descriptor"));
      const auto& authors = wire::field(e, "authors");
      if (!authors.is_array() || static_cast<std::int64_t>(authors.size()) != rec.descriptor.latest_version)
        corrupt(manifest_file, "version history of " + rec.descriptor.id + " does not match latest_version");
      s.exports[rec.descriptor.id] = std::move(rec);
    }
    for (const auto& w : wire::field(m, "workbooks")) {
      WorkbookRecord rec;
      rec.id = wire::string_field(w, "id");
      rec.owner = wire::string_field(w, "owner");
      rec.generation = w.at("generation").get<std::uint64_t>();
      rec.exports = w.at("exports").get<std::vector<std::string>>();
      rec.imports = w.at("imports").get<std::vector<std::string>>();
      rec.last_propagated = w.at("last_propagated").get<std::map<std::string, std::int64_t>>();
      s.workbooks[rec.id] = std::move(rec);
    }
    // Second pass: authors, once descriptors are known.
    for (const auto& e : m["exports"]) {
      auto& rec = s.exports[e["descriptor"]["id"].get<std::string>()];
      for (const auto& a : e["authors"]) rec.versions.push_back(StoredVersion{{}, a.get<std::string>()});
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Integrity && std::string_view(e.what()).starts_with("corrupt store")) throw;
    corrupt(manifest_file, e.what());
  } catch (const std::exception& e) {
    corrupt(manifest_file, e.what());
  }

  for (auto& [id, rec] : s.exports) {
    for (std::size_t i = 0; i < rec.versions.size(); ++i) {
      auto version = static_cast<std::int64_t>(i + 1);
      auto file = image_path(dir_, id, version);
      try {
        auto image = model::decode_range_image(read_file(file));
        if (image.export_id != id || image.version != version) corrupt(file, "image header does not match its path");
        if (image.rows != rec.descriptor.range.rows() || image.cols != rec.descriptor.range.cols())
          corrupt(file, "image dimensions do not match the export range");
        rec.versions[i].image = std::make_shared<const model::RangeImage>(std::move(image));
      } catch (const Error& e) {
        if (std::string_view(e.what()).starts_with("corrupt store")) throw;
        corrupt(file, e.what());
      }
    }
    persisted_versions_[id] = rec.descriptor.latest_version;
  }
  for (auto& [id, rec] : s.workbooks) {
    auto file = workbook_path(dir_, id, rec.generation);
    rec.document = read_file(file);
    try {
      model::decode_workbook(rec.document);
    } catch (const Error& e) {
      corrupt(file, e.what());
    }
    persisted_generations_[id] = rec.generation;
  }
  return s;
}

void Store::commit(const PlatformState& state) {
  std::set<fs::path> touched;
  for (const auto& [id, rec] : state.exports) {
    auto& done = persisted_versions_[id];
    for (auto v = done + 1; v <= rec.descriptor.latest_version; ++v) {
      auto file = image_path(dir_, id, v);
      fs::create_directories(file.parent_path());
      write_atomic(file, model::encode_range_image(*rec.versions[static_cast<std::size_t>(v - 1)].image));
      touched.insert(file.parent_path());
      fault("blob");
    }
  }
  std::vector<fs::path> superseded;
  for (const auto& [id, rec] : state.workbooks) {
    auto it = persisted_generations_.find(id);
    if (it != persisted_generations_.end() && it->second == rec.generation) continue;
    auto file = workbook_path(dir_, id, rec.generation);
    fs::create_directories(file.parent_path());
    write_atomic(file, rec.document);
    touched.insert(file.parent_path());
    if (it != persisted_generations_.end()) superseded.push_back(workbook_path(dir_, id, it->second));
    fault("blob");
  }
  for (const auto& [id, gen] : persisted_generations_)
    if (!state.workbooks.contains(id)) superseded.push_back(workbook_path(dir_, id, gen));
  for (const auto& d : touched) fsync_dir(d);
  fault("before-manifest");

  write_atomic(dir_ / "manifest.json", manifest_json(state).dump(1));
  fsync_dir(dir_);
  fault("after-manifest");

  for (const auto& [id, rec] : state.exports) persisted_versions_[id] = rec.descriptor.latest_version;
  persisted_generations_.clear();
  for (const auto& [id, rec] : state.workbooks) persisted_generations_[id] = rec.generation;
  std::error_code ec;
  for (const auto& f : superseded) fs::remove(f, ec);
}

Store::FaultHook crash_hook_from_env() {
  const char* spec = std::getenv("DISCOM_FAULT_CRASH_AT");
  if (!spec || !*spec) return {};
  std::string step(spec);
  long target = 1;
  if (auto colon = step.find(':'); colon != std::string::npos) {
    target = std::strtol(step.c_str() + colon + 1, nullptr, 10);
    step.resize(colon);
  }
  auto count = std::make_shared<std::atomic<long>>(0);
  return [step, target, count](std::string_view at) {
    if (at == step && ++*count >= target) ::_exit(86);
  };
}

}  // namespace discom::server
