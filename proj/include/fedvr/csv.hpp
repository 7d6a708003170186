#pragma once

#include <string>
#include <vector>

#include "fedvr/harness.hpp"

namespace fedvr {

inline constexpr const char* kMetricsCsvHeader =
    "round,train_loss,train_acc,test_loss,test_acc,grad_norm_sq,mean_lr,participating,floats_sent";

// Fixed header above, one row per evaluated round, reals with 17 significant
// digits (lossless for doubles), LF line endings, trailing newline. The
// cumulative local-step counter is not serialized.
std::string metrics_to_csv(const std::vector<RoundMetrics>& metrics);
void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& metrics);

// Strict inverse: exact header required, every row fully parsed.
std::vector<RoundMetrics> parse_metrics_csv(const std::string& text);

std::string read_text_file(const std::string& path);

}  // namespace fedvr
