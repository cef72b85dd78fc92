#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "discom/composition/composition.hpp"
#include "discom/model/range_image.hpp"

namespace discom::server {

inline constexpr const char* kPlatformAuthor = "platform";

// Images are immutable once committed; sharing them keeps state copies cheap.
struct StoredVersion {
  std::shared_ptr<const model::RangeImage> image;
  std::string author;  // owner id, or kPlatformAuthor for propagated versions
};

struct ExportRecord {
  composition::ExportDescriptor descriptor;
  std::vector<StoredVersion> versions;  // versions[i] holds version i + 1
};

struct WorkbookRecord {
  std::string id;
  std::string owner;
  std::string document;  // canonical workbook XML
  std::vector<std::string> exports;
  std::vector<std::string> imports;
  std::map<std::string, std::int64_t> last_propagated;  // export id -> version applied
  std::uint64_t generation = 0;  // bumped on every change to document
};

struct PlatformState {
  composition::Directory directory;
  std::map<std::string, ExportRecord> exports;
  std::map<std::string, composition::ImportBinding> imports;
  std::map<std::string, WorkbookRecord> workbooks;
  std::uint64_t next_space = 1;
  std::uint64_t next_export = 1;
  std::uint64_t next_import = 1;
};

}  // namespace discom::server
