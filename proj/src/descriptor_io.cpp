#include "lockit/descriptor_io.hpp"

#include "binary_io.hpp"
#include "lockit/errors.hpp"

#include <fstream>

namespace lockit {

namespace {

constexpr std::uint16_t kLdscVersion = 1;

void write_header(std::ostream& os, const LdscHeader& h) {
  using detail::put;
  os.write("LDSC", 4);
  put<std::uint16_t>(os, kLdscVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(h.kind));
  put<std::uint32_t>(os, h.dim);
  put<std::uint64_t>(os, h.count);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(h.layer.size()));
  os.write(h.layer.data(), static_cast<std::streamsize>(h.layer.size()));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::BackendUnavailable, "cannot open: " + path.string());
  return is;
}

}  // namespace

void write_global_ldsc(std::ostream& os, const std::vector<GlobalDescriptor>& descriptors,
                       const std::string& layer) {
  const std::uint32_t dim = descriptors.empty() ? 0 : static_cast<std::uint32_t>(descriptors.front().dim());
  for (const auto& d : descriptors)
    if (d.dim() != dim) throw Error(Errc::DimensionMismatch, "mixed descriptor dimensions in one file");
  write_header(os, {DescriptorKind::Global, dim, descriptors.size(), layer});
  for (const auto& d : descriptors)
    for (Eigen::Index i = 0; i < d.values.size(); ++i) detail::put<float>(os, static_cast<float>(d.values[i]));
  if (!os) throw Error(Errc::Io, "failed writing LDSC stream");
}

void write_local_ldsc(std::ostream& os, const LocalFeatureCloud& cloud) {
  if (static_cast<std::size_t>(cloud.features.cols()) != cloud.points.size())
    throw Error(Errc::DimensionMismatch, "feature count differs from point count");
  write_header(os, {DescriptorKind::Local, static_cast<std::uint32_t>(cloud.dim()), cloud.size(), cloud.layer});
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) detail::put<float>(os, static_cast<float>(cloud.points[i][k]));
    const auto col = cloud.features.col(static_cast<Eigen::Index>(i));
    for (Eigen::Index k = 0; k < col.size(); ++k) detail::put<float>(os, static_cast<float>(col[k]));
  }
  if (!os) throw Error(Errc::Io, "failed writing LDSC stream");
}

LdscHeader read_ldsc_header(std::istream& is) {
  using detail::get;
  detail::expect_magic(is, "LDSC");
  const auto version = get<std::uint16_t>(is, "LDSC version");
  if (version != kLdscVersion) throw Error(Errc::Parse, "unsupported LDSC version " + std::to_string(version));
  LdscHeader h;
  const auto kind = get<std::uint8_t>(is, "LDSC kind");
  if (kind > 1) throw Error(Errc::Parse, "unknown LDSC kind " + std::to_string(kind));
  h.kind = static_cast<DescriptorKind>(kind);
  h.dim = get<std::uint32_t>(is, "LDSC dim");
  h.count = get<std::uint64_t>(is, "LDSC count");
  const auto len = get<std::uint32_t>(is, "LDSC layer length");
  h.layer.resize(len);
  is.read(h.layer.data(), len);
  if (!is) throw Error(Errc::Parse, "truncated LDSC layer name");
  return h;
}

std::vector<GlobalDescriptor> read_global_ldsc(std::istream& is) {
  const LdscHeader h = read_ldsc_header(is);
  if (h.kind != DescriptorKind::Global) throw Error(Errc::Parse, "expected a global LDSC file");
  std::vector<GlobalDescriptor> out(h.count);
  for (auto& d : out) {
    d.values.resize(h.dim);
    for (std::uint32_t k = 0; k < h.dim; ++k) d.values[k] = detail::get<float>(is, "LDSC payload");
  }
  return out;
}

LocalFeatureCloud read_local_ldsc(std::istream& is) {
  const LdscHeader h = read_ldsc_header(is);
  if (h.kind != DescriptorKind::Local) throw Error(Errc::Parse, "expected a local LDSC file");
  LocalFeatureCloud c;
  c.layer = h.layer;
  c.points.resize(h.count);
  c.features.resize(h.dim, static_cast<Eigen::Index>(h.count));
  for (std::uint64_t i = 0; i < h.count; ++i) {
    for (int k = 0; k < 3; ++k) c.points[i][k] = detail::get<float>(is, "LDSC point");
    for (std::uint32_t k = 0; k < h.dim; ++k)
      c.features(k, static_cast<Eigen::Index>(i)) = detail::get<float>(is, "LDSC payload");
  }
  return c;
}

void save_global_ldsc(const std::filesystem::path& path, const GlobalDescriptor& d, const std::string& layer) {
  auto os = open_out(path);
  write_global_ldsc(os, {d}, layer);
}

void save_local_ldsc(const std::filesystem::path& path, const LocalFeatureCloud& cloud) {
  auto os = open_out(path);
  write_local_ldsc(os, cloud);
}

GlobalDescriptor load_global_ldsc(const std::filesystem::path& path) {
  auto is = open_in(path);
  auto all = read_global_ldsc(is);
  if (all.size() != 1)
    throw Error(Errc::Parse, path.string() + ": expected exactly one global descriptor, found " +
                                 std::to_string(all.size()));
  return std::move(all.front());
}

LocalFeatureCloud load_local_ldsc(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_local_ldsc(is);
}

std::filesystem::path global_ldsc_path(const std::filesystem::path& dir, const std::string& scan_id) {
  return dir / (scan_id + ".g.ldsc");
}

std::filesystem::path local_ldsc_path(const std::filesystem::path& dir, const std::string& scan_id) {
  return dir / (scan_id + ".l.ldsc");
}

}  // namespace lockit
