#pragma once

#include <string>

#include "fedvr/harness.hpp"

namespace fedvr {

// key = value text, one pair per line; '#' starts a comment, blank lines are
// skipped. Unknown keys fail with the nearest documented key named; duplicate
// keys within one text fail too. Empty text yields the documented defaults.
// Parsing layers onto `base`, so a file and command-line overrides can be
// applied in sequence.
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig parse_config(const std::string& path, ExperimentConfig base = {});

// Canonical text: every key once, reals with 17 significant digits, so
// parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// Desk-scale digit-classification preset: 2000-train/1000-test subset,
// 10 clients, 5 participants per round, 60 rounds.
ExperimentConfig preset_desk();

// Mechanism grid rows, (adaptive_lr, local_momentum, local_mvr, global_mvr):
//   1:(off,off,off,off)  2:(off,on,off,off)  3:(on,off,off,off)
//   4:(on,on,off,off)    5:(off,on,on,off)   6:(off,on,on,on)
//   7:(on,on,on,on)
// Desk-scale schedule by default; paper_scale restores the full-size one
// (whole data files, 100 clients, 10 participants, 400 rounds, 80 epochs,
// batch 50).
ExperimentConfig preset_ablation(int row, bool paper_scale = false);

// Human-readable shard table: per-client sizes and class counts plus a
// skew summary (mean pairwise total-variation distance).
std::string partition_stats_report(const Dataset& ds, const std::vector<ClientShard>& shards);

}  // namespace fedvr
