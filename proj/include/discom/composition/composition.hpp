#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "discom/engine/evaluator.hpp"
#include "discom/model/address.hpp"
#include "discom/model/range_image.hpp"
#include "discom/model/workbook.hpp"

namespace discom::composition {

enum class MemberRole { Creator, Exporter, Importer, Both };

std::string_view to_string(MemberRole role) noexcept;
/// Throws Error(Parse) for an unknown role name.
MemberRole member_role_from(std::string_view name);

bool can_export(MemberRole role) noexcept;
bool can_import(MemberRole role) noexcept;

struct User {
  std::string id;
  std::string name;
  std::string credential;  // salted digest, never the secret itself
  bool admin = false;
};

struct Space {
  std::string id;
  std::string name;
  std::string creator;
  std::map<std::string, MemberRole> members;

  bool is_member(std::string_view user) const { return members.contains(std::string(user)); }
  const MemberRole* role_of(std::string_view user) const;
};

struct Visibility {
  enum class Kind { SpaceWide, Restricted };
  Kind kind = Kind::SpaceWide;
  std::set<std::string> users;  // Restricted only

  static Visibility space_wide() { return {}; }
  static Visibility restricted(std::set<std::string> users) { return {Kind::Restricted, std::move(users)}; }
  friend bool operator==(const Visibility&, const Visibility&) = default;
};

struct ExportDescriptor {
  std::string id;
  std::string owner;
  std::string space;
  std::string name;
  std::string description;
  model::RangeRef range;
  Visibility visibility;
  std::int64_t latest_version = 0;  // 0 = registered, nothing pushed yet
  bool revoked = false;
};

struct ImportBinding {
  std::string id;
  std::string importer;
  std::string export_id;
  model::RangeRef target;
  std::int64_t applied_version = 0;
};

/// Latest image of an export for a binding whose known version is older.
struct UpdateDelta {
  std::string binding_id;
  std::string export_id;
  model::RangeImage image;
  std::int64_t from_version = 0;
  std::int64_t to_version = 0;
};

/// Sent instead of data once a binding's export is revoked or unreadable.
struct Revocation {
  std::string binding_id;
  std::string export_id;
  std::string reason;
};

struct PollResult {
  std::vector<UpdateDelta> deltas;
  std::vector<Revocation> revocations;
};

/// Users and spaces, the part of platform state the pure operations read.
struct Directory {
  std::map<std::string, User> users;
  std::map<std::string, Space> spaces;

  const User& user(std::string_view id) const;    // Error(NotFound)
  const Space& space(std::string_view id) const;  // Error(NotFound)
};

/// New space whose sole member is the creator. Errors: NotFound for an
/// unknown creator, Conflict when the creator already has a space with that
/// name, Integrity for an empty name.
Space create_space(const Directory& dir, std::string id, std::string_view creator, std::string name);

/// Only the creator may add members; re-adding with the same role is a
/// no-op, a different role replaces the old one. The creator's own role
/// cannot be changed.
Space add_member(const Directory& dir, const Space& space, std::string_view caller, std::string_view user,
                 MemberRole role);

/// Creator-only. The creator cannot be removed.
Space remove_member(const Space& space, std::string_view caller, std::string_view user);

enum class Access { Permit, Deny };

/// Permit iff the user owns the export, or it is SpaceWide and the user is a
/// member of its space, or the user is in its Restricted set.
Access authorize(std::string_view user, const ExportDescriptor& exp, const Space& space);

/// Checks an export registration against its space: owner is a member with
/// an exporting role, Restricted users are members.
void validate_export(const ExportDescriptor& exp, const Space& space);

/// Import target must have exactly the export range's dimensions.
void validate_binding(const ImportBinding& binding, const ExportDescriptor& exp);

std::int64_t next_version(const ExportDescriptor& exp) noexcept;

enum class WorkbookRole { Detached, PureExporter, PureImporter, ExporterAndImporter, Intermediate };

std::string_view to_string(WorkbookRole role) noexcept;

/// Intermediate iff some exported cell is an imported cell, or is reachable
/// from one through the dependency graph. Exports and imports without such a
/// dependency classify as ExporterAndImporter. Throws Error(Integrity) when
/// a range names a sheet the workbook does not have.
WorkbookRole classify_workbook(const model::Workbook& wb, const std::vector<ExportDescriptor>& exports,
                               const std::vector<ImportBinding>& imports);

/// Writes an imported image into `target` as literals (creating the sheet
/// if needed) and recalculates from those cells. The platform and the agent
/// both apply imports through this one function. Throws Error(Integrity) on
/// a dimension mismatch, leaving the workbook untouched.
engine::ChangeSet apply_image(model::Workbook& wb, const model::RangeRef& target, const model::RangeImage& image);

}  // namespace discom::composition
