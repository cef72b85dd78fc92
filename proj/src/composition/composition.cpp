#include "discom/composition/composition.hpp"

#include "discom/error.hpp"

namespace discom::composition {

std::string_view to_string(MemberRole role) noexcept {
  switch (role) {
    case MemberRole::Creator: return "creator";
    case MemberRole::Exporter: return "exporter";
    case MemberRole::Importer: return "importer";
    case MemberRole::Both: return "both";
  }
  return "both";
}

MemberRole member_role_from(std::string_view name) {
  if (name == "creator") return MemberRole::Creator;
  if (name == "exporter") return MemberRole::Exporter;
  if (name == "importer") return MemberRole::Importer;
  if (name == "both") return MemberRole::Both;
  throw Error(ErrorKind::Parse, "unknown member role '" + std::string(name) + "'");
}

bool can_export(MemberRole role) noexcept { return role != MemberRole::Importer; }
bool can_import(MemberRole role) noexcept { return role != MemberRole::Exporter; }

const MemberRole* Space::role_of(std::string_view user) const {
  auto it = members.find(std::string(user));
  return it == members.end() ? nullptr : &it->second;
}

const User& Directory::user(std::string_view id) const {
  auto it = users.find(std::string(id));
  if (it == users.end()) throw Error(ErrorKind::NotFound, "unknown user '" + std::string(id) + "'");
  return it->second;
}

const Space& Directory::space(std::string_view id) const {
  auto it = spaces.find(std::string(id));
  if (it == spaces.end()) throw Error(ErrorKind::NotFound, "unknown space '" + std::string(id) + "'");
  return it->second;
}

Space create_space(const Directory& dir, std::string id, std::string_view creator, std::string name) {
  dir.user(creator);
  if (name.empty()) throw Error(ErrorKind::Integrity, "space name must not be empty");
  for (const auto& [_, s] : dir.spaces)
    if (s.creator == creator && s.name == name)
      throw Error(ErrorKind::Conflict, "space '" + name + "' already exists for " + std::string(creator));
  Space s{std::move(id), std::move(name), std::string(creator), {}};
  s.members.emplace(std::string(creator), MemberRole::Creator);
  return s;
}

Space add_member(const Directory& dir, const Space& space, std::string_view caller, std::string_view user,
                 MemberRole role) {
  if (caller != space.creator)
    throw Error(ErrorKind::Authorization, "only the creator of space '" + space.name + "' can add members");
  dir.user(user);
  if (role == MemberRole::Creator) throw Error(ErrorKind::Precondition, "a space has exactly one creator");
  if (user == space.creator) throw Error(ErrorKind::Precondition, "the creator's role cannot be changed");
  Space out = space;
  out.members[std::string(user)] = role;
  return out;
}

Space remove_member(const Space& space, std::string_view caller, std::string_view user) {
  if (caller != space.creator)
    throw Error(ErrorKind::Authorization, "only the creator of space '" + space.name + "' can remove members");
  if (user == space.creator) throw Error(ErrorKind::Precondition, "the creator cannot leave their own space");
  if (!space.is_member(user))
    throw Error(ErrorKind::NotFound, std::string(user) + " is not a member of '" + space.name + "'");
  Space out = space;
  out.members.erase(std::string(user));
  return out;
}

Access authorize(std::string_view user, const ExportDescriptor& exp, const Space& space) {
  if (user == exp.owner) return Access::Permit;
  if (exp.visibility.kind == Visibility::Kind::SpaceWide) return space.is_member(user) ? Access::Permit : Access::Deny;
  return exp.visibility.users.contains(std::string(user)) && space.is_member(user) ? Access::Permit : Access::Deny;
}

void validate_export(const ExportDescriptor& exp, const Space& space) {
  if (exp.name.empty()) throw Error(ErrorKind::Integrity, "export name must not be empty");
  const auto* role = space.role_of(exp.owner);
  if (!role) throw Error(ErrorKind::Authorization, exp.owner + " is not a member of space '" + space.name + "'");
  if (!can_export(*role)) throw Error(ErrorKind::Authorization, exp.owner + " may not export in '" + space.name + "'");
  for (const auto& u : exp.visibility.users)
    if (!space.is_member(u))
      throw Error(ErrorKind::Integrity, "restricted reader " + u + " is not a member of '" + space.name + "'");
}

void validate_binding(const ImportBinding& binding, const ExportDescriptor& exp) {
  if (binding.target.rows() != exp.range.rows() || binding.target.cols() != exp.range.cols())
    throw Error(ErrorKind::Integrity, "import target " + binding.target.to_string() + " is " +
                                          std::to_string(binding.target.rows()) + "x" +
                                          std::to_string(binding.target.cols()) + " but export " + exp.id + " is " +
                                          std::to_string(exp.range.rows()) + "x" + std::to_string(exp.range.cols()));
}

std::int64_t next_version(const ExportDescriptor& exp) noexcept { return exp.latest_version + 1; }

std::string_view to_string(WorkbookRole role) noexcept {
  switch (role) {
    case WorkbookRole::Detached: return "detached";
    case WorkbookRole::PureExporter: return "exporter";
    case WorkbookRole::PureImporter: return "importer";
    case WorkbookRole::ExporterAndImporter: return "exporter+importer";
    case WorkbookRole::Intermediate: return "intermediate";
  }
  return "detached";
}

}  // namespace discom::composition
