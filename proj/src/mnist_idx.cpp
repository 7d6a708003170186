#include "fedvr/mnist_idx.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <vector>

namespace fedvr {

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::io_error, "cannot open " + path);
  f.seekg(0, std::ios::end);
  const auto len = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<unsigned char> buf(static_cast<std::size_t>(len));
  if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
  if (!f) fail(Errc::io_error, "read failed for " + path);
  return buf;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::string hex(std::uint32_t v) {
  char out[11];
  std::snprintf(out, sizeof out, "0x%08x", v);
  return out;
}

struct IdxHeader {
  std::uint32_t count = 0;
  std::size_t payload_off = 0;
};

IdxHeader parse_header(const std::vector<unsigned char>& buf, const std::string& path,
                       std::uint32_t want_magic, int extra_dims, std::uint32_t* dims_out) {
  const std::size_t header_len = 4 + 4 + 4u * static_cast<std::size_t>(extra_dims);
  if (buf.size() < header_len) fail(Errc::truncated_file, path + ": shorter than its header");
  const std::uint32_t magic = be32(buf, 0);
  if (magic != want_magic)
    fail(Errc::bad_magic, path + ": magic " + hex(magic) + ", expected " + hex(want_magic));
  IdxHeader h;
  h.count = be32(buf, 4);
  for (int i = 0; i < extra_dims; ++i) dims_out[i] = be32(buf, 8 + 4u * static_cast<std::size_t>(i));
  h.payload_off = header_len;
  return h;
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       std::int64_t limit) {
  require(limit >= 0, Errc::invalid_argument, "limit must be nonnegative");
  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);

  std::uint32_t dims[2] = {0, 0};
  const IdxHeader ih = parse_header(img, images_path, 0x00000803u, 2, dims);
  const IdxHeader lh = parse_header(lab, labels_path, 0x00000801u, 0, nullptr);

  const std::uint64_t pixels = std::uint64_t{dims[0]} * dims[1];
  require(pixels > 0, Errc::invalid_argument, images_path + ": zero image dimensions");
  if (img.size() < ih.payload_off + pixels * ih.count)
    fail(Errc::truncated_file, images_path + ": header promises " + std::to_string(ih.count) +
                                   " images, payload holds fewer");
  if (lab.size() < lh.payload_off + lh.count)
    fail(Errc::truncated_file, labels_path + ": header promises " + std::to_string(lh.count) +
                                   " labels, payload holds fewer");
  if (ih.count != lh.count)
    fail(Errc::count_mismatch, std::to_string(ih.count) + " images vs " +
                                   std::to_string(lh.count) + " labels");

  std::int64_t n = ih.count;
  if (limit > 0) {
    require(limit <= n, Errc::invalid_argument,
            "limit " + std::to_string(limit) + " exceeds file count " + std::to_string(n));
    n = limit;
  }
  require(n > 0, Errc::invalid_argument, images_path + ": no samples");

  Dataset ds;
  ds.num_classes = 10;
  ds.x.resize(n, static_cast<Eigen::Index>(pixels));
  ds.y.resize(static_cast<std::size_t>(n));
  constexpr double scale = 1.0 / 255.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const unsigned char* row = img.data() + ih.payload_off + static_cast<std::size_t>(i) * pixels;
    for (std::uint64_t j = 0; j < pixels; ++j)
      ds.x(i, static_cast<Eigen::Index>(j)) = static_cast<double>(row[j]) * scale;
    ds.y[static_cast<std::size_t>(i)] = lab[lh.payload_off + static_cast<std::size_t>(i)];
  }
  ds.validate();
  return ds;
}

}  // namespace fedvr
