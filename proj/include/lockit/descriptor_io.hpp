#pragma once

#include "lockit/features.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lockit {

// LDSC binary layout (little-endian):
//   char[4] "LDSC" | u16 version=1 | u8 kind (0 global, 1 local) | u32 dim | u64 count
//   u32 layer-name byte length | layer-name UTF-8 bytes
//   global payload: count * dim f32
//   local payload:  count * (3 f32 point + dim f32 feature)
enum class DescriptorKind : std::uint8_t { Global = 0, Local = 1 };

struct LdscHeader {
  DescriptorKind kind = DescriptorKind::Global;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::string layer;
};

/// Writes one or more global descriptors (all of equal dimension).
void write_global_ldsc(std::ostream& os, const std::vector<GlobalDescriptor>& descriptors,
                       const std::string& layer = "global");
void write_local_ldsc(std::ostream& os, const LocalFeatureCloud& cloud);

LdscHeader read_ldsc_header(std::istream& is);
std::vector<GlobalDescriptor> read_global_ldsc(std::istream& is);
LocalFeatureCloud read_local_ldsc(std::istream& is);

void save_global_ldsc(const std::filesystem::path& path, const GlobalDescriptor& d,
                      const std::string& layer = "global");
void save_local_ldsc(const std::filesystem::path& path, const LocalFeatureCloud& cloud);
GlobalDescriptor load_global_ldsc(const std::filesystem::path& path);
LocalFeatureCloud load_local_ldsc(const std::filesystem::path& path);

std::filesystem::path global_ldsc_path(const std::filesystem::path& dir, const std::string& scan_id);
std::filesystem::path local_ldsc_path(const std::filesystem::path& dir, const std::string& scan_id);

}  // namespace lockit
