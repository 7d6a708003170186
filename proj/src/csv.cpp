#include "fedvr/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fedvr {

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t from = 0;
  for (;;) {
    const auto to = line.find(sep, from);
    if (to == std::string::npos) {
      out.push_back(line.substr(from));
      return out;
    }
    out.push_back(line.substr(from, to - from));
    from = to + 1;
  }
}

double field_real(const std::string& v, int lineno) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    fail(Errc::invalid_argument, "csv line " + std::to_string(lineno) + ": bad real '" + v + "'");
  }
  require(used == v.size(), Errc::invalid_argument,
          "csv line " + std::to_string(lineno) + ": bad real '" + v + "'");
  return out;
}

std::int64_t field_int(const std::string& v, int lineno) {
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    fail(Errc::invalid_argument, "csv line " + std::to_string(lineno) + ": bad integer '" + v + "'");
  }
  require(used == v.size(), Errc::invalid_argument,
          "csv line " + std::to_string(lineno) + ": bad integer '" + v + "'");
  return out;
}

}  // namespace

std::string metrics_to_csv(const std::vector<RoundMetrics>& metrics) {
  std::string out = kMetricsCsvHeader;
  out += '\n';
  for (const auto& m : metrics) {
    out += std::to_string(m.round);
    out += ',';
    out += fmt_real(m.train_loss);
    out += ',';
    out += fmt_real(m.train_acc);
    out += ',';
    out += fmt_real(m.test_loss);
    out += ',';
    out += fmt_real(m.test_acc);
    out += ',';
    out += fmt_real(m.grad_norm_sq);
    out += ',';
    out += fmt_real(m.mean_lr);
    out += ',';
    out += std::to_string(m.participating);
    out += ',';
    out += std::to_string(m.floats_sent);
    out += '\n';
  }
  return out;
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& metrics) {
  std::ofstream f(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!f) fail(Errc::io_error, "cannot open " + path + " for writing");
  const std::string text = metrics_to_csv(metrics);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(Errc::io_error, "write failed for " + path);
}

std::vector<RoundMetrics> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::invalid_argument, "csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kMetricsCsvHeader, Errc::invalid_argument, "csv header mismatch: '" + line + "'");
  std::vector<RoundMetrics> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    require(f.size() == 9, Errc::invalid_argument,
            "csv line " + std::to_string(lineno) + ": expected 9 fields, got " +
                std::to_string(f.size()));
    RoundMetrics m;
    m.round = field_int(f[0], lineno);
    m.train_loss = field_real(f[1], lineno);
    m.train_acc = field_real(f[2], lineno);
    m.test_loss = field_real(f[3], lineno);
    m.test_acc = field_real(f[4], lineno);
    m.grad_norm_sq = field_real(f[5], lineno);
    m.mean_lr = field_real(f[6], lineno);
    m.participating = field_int(f[7], lineno);
    m.floats_sent = field_int(f[8], lineno);
    out.push_back(m);
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace fedvr
