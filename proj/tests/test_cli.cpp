#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "fedvr/config.hpp"
#include "fedvr/csv.hpp"

using namespace fedvr;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("fedsim_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FedError& e) {
    return e.code();
  }
  FAIL("expected a FedError");
  return Errc::invalid_argument;
}

// A config that touches every field class: enums, bools, ints, reals with
// digits that need all 17 significant places.
ExperimentConfig fancy_config() {
  ExperimentConfig c;
  c.model = ModelKind::logistic;
  c.input_dim = 12;
  c.hidden_dim = 30;
  c.num_classes = 4;
  c.l2_lambda = 1.0 / 3.0;
  c.data = DataSource::mnist;
  c.mnist_dir = "elsewhere/digits";
  c.train_limit = 4321;
  c.test_limit = 99;
  c.synth_train = 77;
  c.synth_test = 33;
  c.synth_noise = 0.1;  // not exactly representable
  c.clients = 13;
  c.alpha = 0.30000000000000004;
  c.partition_seed = 123456789012345ULL;
  c.algorithm = Algorithm::fedprox;
  c.adaptive_lr = false;
  c.local_momentum = false;
  c.local_mvr = false;
  c.global_mvr = false;
  c.k = 0.07;
  c.w = 2.5;
  c.fixed_lr = 0.015;
  c.local_momentum_beta = 0.3;
  c.fedprox_mu = 0.01;
  c.beta_mode = BetaMode::decaying;
  c.beta0 = 0.625;
  c.batch_size = 17;
  c.epochs = 3;
  c.rounds = 21;
  c.participants = 6;
  c.weighting = Weighting::sample_size;
  c.seed = 42;
  c.eval_every = 7;
  c.parallelism = 2;
  return c;
}

}  // namespace

TEST_CASE("empty text yields the documented defaults") {
  const ExperimentConfig parsed = parse_config_text("");
  CHECK(parsed == ExperimentConfig{});
  CHECK(parsed.model == ModelKind::mlp2);
  CHECK(parsed.input_dim == 784);
  CHECK(parsed.hidden_dim == 600);
  CHECK(parsed.rounds == 60);
  CHECK(parsed.batch_size == 50);
  CHECK(parsed.epochs == 2);
  CHECK(parsed.participants == 5);
  CHECK(parsed.clients == 10);
}

TEST_CASE("serialize then parse reproduces any config exactly") {
  const ExperimentConfig c = fancy_config();
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config_text(text);
  CHECK(back == c);

  // Defaults round-trip too.
  CHECK(parse_config_text(serialize_config(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("parsing layers onto the base config") {
  ExperimentConfig base;
  base.clients = 7;
  base.rounds = 99;
  const ExperimentConfig out = parse_config_text("alpha = 0.25\n", base);
  CHECK(out.clients == 7);
  CHECK(out.rounds == 99);
  CHECK(out.alpha == 0.25);
}

TEST_CASE("comments, blank lines, and padding are tolerated") {
  const std::string text =
      "# leading comment\n"
      "\n"
      "   batch_size =  25   # trailing note\n"
      "\tepochs\t=\t4\n"
      "seed = 11\n";
  const ExperimentConfig c = parse_config_text(text);
  CHECK(c.batch_size == 25);
  CHECK(c.epochs == 4);
  CHECK(c.seed == 11);
}

TEST_CASE("unknown keys name the nearest documented key") {
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("batchsize = 10\n")),
                       doctest::Contains("closest is 'batch_size'"), FedError);
  CHECK_THROWS_WITH_AS(static_cast<void>(parse_config_text("algoritm = fedavg\n")),
                       doctest::Contains("closest is 'algorithm'"), FedError);
  CHECK(code_of([] { static_cast<void>(parse_config_text("epoch = 3\n")); }) ==
        Errc::config_error);
}

TEST_CASE("malformed text fails with config errors") {
  auto bad = [](const std::string& text) {
    return code_of([text] { static_cast<void>(parse_config_text(text)); });
  };
  CHECK(bad("rounds = 5\nrounds = 6\n") == Errc::config_error);  // duplicate
  CHECK(bad("just words\n") == Errc::config_error);              // no '='
  CHECK(bad("= 5\n") == Errc::config_error);                     // empty key
  CHECK(bad("rounds = 12x\n") == Errc::config_error);
  CHECK(bad("alpha = abc\n") == Errc::config_error);
  CHECK(bad("adaptive_lr = yes\n") == Errc::config_error);
  CHECK(bad("seed = -3\n") == Errc::config_error);
  CHECK(bad("model = resnet\n") == Errc::config_error);
  CHECK(bad("data = cifar\n") == Errc::config_error);
  CHECK(bad("beta_mode = linear\n") == Errc::config_error);
  CHECK(bad("weighting = quadratic\n") == Errc::config_error);
  CHECK(bad("algorithm = sgd\n") == Errc::config_error);
  CHECK(bad("algorithm = row0\n") == Errc::config_error);
  CHECK(bad("algorithm = row8\n") == Errc::config_error);
}

TEST_CASE("grid-row names expand to mechanism flag combinations") {
  const ExperimentConfig r5 = parse_config_text("algorithm = row5\n");
  CHECK(r5.algorithm == Algorithm::proposed);
  CHECK_FALSE(r5.adaptive_lr);
  CHECK(r5.local_momentum);
  CHECK(r5.local_mvr);
  CHECK_FALSE(r5.global_mvr);

  const ExperimentConfig r1 = parse_config_text("algorithm = row1\n");
  CHECK_FALSE(r1.adaptive_lr);
  CHECK_FALSE(r1.local_momentum);
  CHECK_FALSE(r1.local_mvr);
  CHECK_FALSE(r1.global_mvr);

  const ExperimentConfig r7 = parse_config_text("algorithm = row7\n");
  CHECK(r7.adaptive_lr);
  CHECK(r7.local_momentum);
  CHECK(r7.local_mvr);
  CHECK(r7.global_mvr);
}

TEST_CASE("presets carry the desk and full-size schedules") {
  const ExperimentConfig desk = preset_desk();
  CHECK(desk.data == DataSource::mnist);
  CHECK(desk.train_limit == 2000);
  CHECK(desk.test_limit == 1000);
  CHECK(desk.clients == 10);
  CHECK(desk.participants == 5);
  CHECK(desk.rounds == 60);
  CHECK(desk.k == 0.6);  // benchmark-scale step numerator; plain config default is 0.1

  const ExperimentConfig row4 = preset_ablation(4);
  CHECK(row4.adaptive_lr);
  CHECK(row4.local_momentum);
  CHECK_FALSE(row4.local_mvr);
  CHECK_FALSE(row4.global_mvr);
  CHECK(row4.train_limit == 2000);

  const ExperimentConfig full = preset_ablation(6, true);
  CHECK_FALSE(full.adaptive_lr);
  CHECK(full.local_mvr);
  CHECK(full.global_mvr);
  CHECK(full.train_limit == 0);
  CHECK(full.test_limit == 0);
  CHECK(full.clients == 100);
  CHECK(full.participants == 10);
  CHECK(full.rounds == 400);
  CHECK(full.epochs == 80);
  CHECK(full.batch_size == 50);

  CHECK_THROWS_AS(static_cast<void>(preset_ablation(0)), FedError);
  CHECK_THROWS_AS(static_cast<void>(preset_ablation(8)), FedError);
}

TEST_CASE("metrics CSV: fixed header, lossless reals, strict inverse") {
  std::vector<RoundMetrics> ms(2);
  ms[0].round = 1;
  ms[0].train_loss = 1.0 / 3.0;
  ms[0].train_acc = 0.1;
  ms[0].test_loss = 2.3000000000000007;
  ms[0].test_acc = 0.12345678901234567;
  ms[0].grad_norm_sq = 3.5e-12;
  ms[0].mean_lr = 0.07;
  ms[0].participating = 5;
  ms[0].floats_sent = 477010;
  ms[0].local_steps_total = 999;  // must not appear in the text
  ms[1].round = 2;
  ms[1].train_loss = 0.25;
  ms[1].participating = 3;

  const std::string text = metrics_to_csv(ms);
  const std::string header = text.substr(0, text.find('\n'));
  CHECK(header ==
        "round,train_loss,train_acc,test_loss,test_acc,grad_norm_sq,mean_lr,participating,"
        "floats_sent");
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.back() == '\n');
  CHECK(text.find("999") == std::string::npos);

  const std::vector<RoundMetrics> back = parse_metrics_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].round == 1);
  CHECK(back[0].train_loss == ms[0].train_loss);
  CHECK(back[0].test_loss == ms[0].test_loss);
  CHECK(back[0].test_acc == ms[0].test_acc);
  CHECK(back[0].grad_norm_sq == ms[0].grad_norm_sq);
  CHECK(back[0].mean_lr == ms[0].mean_lr);
  CHECK(back[0].participating == 5);
  CHECK(back[0].floats_sent == 477010);
  CHECK(back[0].local_steps_total == 0);
  CHECK(back[1].round == 2);
  CHECK(back[1].train_loss == 0.25);

  auto bad = [](const std::string& t) {
    try {
      static_cast<void>(parse_metrics_csv(t));
      return false;
    } catch (const FedError&) {
      return true;
    }
  };
  CHECK(bad("wrong,header\n1,2,3,4,5,6,7,8,9\n"));
  CHECK(bad(std::string(kMetricsCsvHeader) + "\n1,2,3\n"));
  CHECK(bad(std::string(kMetricsCsvHeader) + "\n1,2,3,4,x,6,7,8,9\n"));
}

TEST_CASE("CSV files round-trip through disk") {
  TempDir tmp;
  std::vector<RoundMetrics> ms(1);
  ms[0].round = 3;
  ms[0].train_loss = 0.5;
  const std::string path = tmp.path("m.csv");
  write_metrics_csv(path, ms);
  const std::string text = read_text_file(path);
  CHECK(text == metrics_to_csv(ms));
  const auto back = parse_metrics_csv(text);
  REQUIRE(back.size() == 1);
  CHECK(back[0].round == 3);

  CHECK_THROWS_AS(static_cast<void>(read_text_file(tmp.path("absent.csv"))), FedError);
}

TEST_CASE("shard report lists sizes, class counts, and the skew summary") {
  const Dataset ds = gen_synthetic(5, 60, 3, 3, 0.2);
  PartitionConfig pc;
  pc.num_clients = 4;
  pc.alpha = 0.6;
  pc.seed = 2;
  const auto shards = dirichlet_partition(ds, pc);
  const std::string report = partition_stats_report(ds, shards);
  CHECK(report.find("client") != std::string::npos);
  CHECK(report.find("clients=4") != std::string::npos);
  CHECK(report.find("assigned=60") != std::string::npos);
  CHECK(report.find("mean_pairwise_tv=") != std::string::npos);
  // One line per client plus header plus summary.
  CHECK(std::count(report.begin(), report.end(), '\n') == 6);
}

#ifdef FEDSIM_BINARY

namespace {

int run_binary(const std::string& args) {
  const std::string cmd = std::string(FEDSIM_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

// Tiny synthetic run: finishes in well under a second.
const char* kTinyConfig =
    "model = logistic\n"
    "input_dim = 6\n"
    "num_classes = 3\n"
    "data = synthetic\n"
    "synth_train = 90\n"
    "synth_test = 45\n"
    "clients = 4\n"
    "participants = 2\n"
    "rounds = 3\n"
    "batch_size = 8\n"
    "epochs = 1\n"
    "parallelism = 1\n";

}  // namespace

TEST_CASE("the binary runs an experiment and writes its metrics file") {
  TempDir tmp;
  const std::string cfg = tmp.file("tiny.cfg", kTinyConfig);
  CHECK(run_binary("run --config " + cfg + " --out " + tmp.path("out")) == 0);
  const std::string text = read_text_file(tmp.path("out") + "/metrics.csv");
  const auto ms = parse_metrics_csv(text);
  REQUIRE(ms.size() == 3);
  CHECK(ms[2].round == 3);

  // Overrides reach the run: more rounds, more rows.
  CHECK(run_binary("run --config " + cfg + " --set rounds=5 --out " + tmp.path("out5")) == 0);
  CHECK(parse_metrics_csv(read_text_file(tmp.path("out5") + "/metrics.csv")).size() == 5);
}

TEST_CASE("the binary distinguishes config problems from runtime problems") {
  TempDir tmp;
  const std::string cfg = tmp.file("tiny.cfg", kTinyConfig);
  // Unknown key in an override.
  CHECK(run_binary("run --config " + cfg + " --set bad_key=1 --out " + tmp.path("o1")) == 2);
  // Invalid value caught by validation.
  CHECK(run_binary("run --config " + cfg + " --set rounds=0 --out " + tmp.path("o2")) == 2);
  // Missing config file is a runtime (io) problem.
  CHECK(run_binary("run --config " + tmp.path("absent.cfg")) == 3);
  // Missing data files likewise.
  const std::string mnist_cfg = tmp.file("m.cfg", "data = mnist\nmnist_dir = /not/here\n");
  CHECK(run_binary("run --config " + mnist_cfg + " --out " + tmp.path("o3")) == 3);
  // CLI11 usage errors are nonzero too.
  CHECK(run_binary("") != 0);
  CHECK(run_binary("ablate --row 9") != 0);
}

TEST_CASE("the inspection verbs run on the tiny config") {
  TempDir tmp;
  const std::string cfg = tmp.file("tiny.cfg", kTinyConfig);
  CHECK(run_binary("probe --config " + cfg + " --pairs 2") == 0);
  CHECK(run_binary("partition-stats --config " + cfg) == 0);
  CHECK(run_binary("ablate --row 1 --config " + cfg + " --out " + tmp.path("ab")) == 0);
  CHECK(std::filesystem::exists(tmp.path("ab") + "/ablation_row1.csv"));
}

#endif  // FEDSIM_BINARY
