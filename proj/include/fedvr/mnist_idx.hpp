#pragma once

#include <string>

#include "fedvr/dataset.hpp"

namespace fedvr {

// Reads an IDX image/label file pair (the classic handwritten-digit binary
// layout: big-endian header, magic 0x00000803 for images with dims
// [n, rows, cols], 0x00000801 for labels with dims [n], then raw bytes).
// Pixels are scaled to [0, 1] by 1/255. limit > 0 keeps only the first
// `limit` samples and must not exceed the file's count.
//
// Failure modes are distinct: missing/unreadable file, wrong magic, payload
// shorter than the header promises, image/label counts that disagree.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                       std::int64_t limit = 0);

}  // namespace fedvr
