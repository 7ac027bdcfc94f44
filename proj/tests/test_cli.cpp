#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "brm/cli.hpp"
#include "brm/data.hpp"
#include "brm/rng.hpp"

namespace fs = std::filesystem;
using brm::cli::run;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("brm_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

int call(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (out_text) *out_text = out.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const std::vector<std::string> kQuick = {"--max-epochs", "3", "--per-class", "30"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("gen-data") {
  Scratch s("gen");
  const std::vector<std::string> flags = {"gen-data", "--classes", "10", "--per-class", "100", "--dim",
                                          "16",       "--sigma",   "0.05", "--seed",    "7"};
  CHECK(call(with(flags, {"--out", s / "a.csv"})) == 0);
  CHECK(call(with(flags, {"--out", s / "b.csv"})) == 0);
  const std::string a = slurp(s / "a.csv");
  CHECK(count_lines(a) == 1001);  // header + 1000 rows
  CHECK(a == slurp(s / "b.csv"));
  CHECK(call({"gen-data", "--classes", "1", "--out", s / "c.csv"}) == 2);
  CHECK(call({"gen-data", "--classes", "3", "--per-class", "4", "--format", "skb", "--side", "12",
              "--out", s / "d.skb"}) == 0);
  CHECK(brm::is_raster_file(s / "d.skb"));
  CHECK(call({"gen-data", "--classes", "3", "--out", (s.dir / "missing" / "x" / "e.csv").string()}) == 3);
  CHECK(call({"no-such-command"}) == 2);
  CHECK(call({"gen-data", "--bogus-flag", "1"}) == 2);
}

TEST_CASE("train writes metrics and checkpoints, resume continues") {
  Scratch s("train");
  CHECK(call(with({"train", "--out", s / "run"}, kQuick)) == 0);
  const std::string log = slurp(s / "run/metrics.jsonl");
  CHECK(count_lines(log) == 4);
  std::istringstream lines(log);
  std::string line;
  std::getline(lines, line);
  const auto header = nlohmann::json::parse(line);
  CHECK(header["config"]["bins"] == "75");
  CHECK(header["config"]["max-epochs"] == "3");
  std::getline(lines, line);
  const auto first = nlohmann::json::parse(line);
  for (const char* key : {"epoch", "loss", "lr", "val_recall_at_1", "val_knn_top1"}) CHECK(first.contains(key));
  CHECK(first["epoch"] == 1);
  CHECK(fs::exists(s / "run/best.ckpt"));
  CHECK(fs::exists(s / "run/final.ckpt"));

  CHECK(call({"train", "--out", s / "run", "--max-epochs", "5", "--per-class", "30", "--resume",
              s / "run/final.ckpt"}) == 0);
  const std::string resumed = slurp(s / "run/metrics.jsonl");
  CHECK(count_lines(resumed) == 6);
  CHECK(resumed.substr(0, log.size()) == log);
  std::istringstream rl(resumed);
  std::string last;
  while (std::getline(rl, line)) last = line;
  CHECK(nlohmann::json::parse(last)["epoch"] == 5);

  // the resumed run ends where an uninterrupted five-epoch run ends
  CHECK(call({"train", "--out", s / "straight", "--max-epochs", "5", "--per-class", "30"}) == 0);
  CHECK(slurp(s / "straight/final.ckpt") == slurp(s / "run/final.ckpt"));
}

TEST_CASE("config file precedence") {
  Scratch s("config");
  {
    std::ofstream f(s / "run.cfg");
    f << "# test config\nbins = 30\nmax-epochs = 2\nper-class = 30\n";
  }
  CHECK(call({"train", "--config", s / "run.cfg", "--out", s / "a"}) == 0);
  CHECK(call({"train", "--config", s / "run.cfg", "--bins", "40", "--out", s / "b"}) == 0);
  auto header = [&](const std::string& dir) {
    std::istringstream in(slurp(dir + "/metrics.jsonl"));
    std::string line;
    std::getline(in, line);
    return nlohmann::json::parse(line)["config"];
  };
  CHECK(header(s / "a")["bins"] == "30");
  CHECK(header(s / "b")["bins"] == "40");
  CHECK(header(s / "b")["max-epochs"] == "2");

  {
    std::ofstream f(s / "bad.cfg");
    f << "unknown-key = 1\n";
  }
  CHECK(call({"train", "--config", s / "bad.cfg", "--out", s / "c"}) == 2);
  CHECK(call({"train", "--config", s / "nope.cfg", "--out", s / "c"}) == 3);
  CHECK(call({"train", "--bins", "1", "--out", s / "c"}) == 2);
  CHECK(call({"train", "--loss", "hinge", "--out", s / "c"}) == 2);
}

TEST_CASE("degenerate data exits 4") {
  Scratch s("degenerate");
  brm::FeatureDataset ds;
  ds.vectors = brm::Matrix(10, 4);
  brm::Rng rng(1);
  for (double& v : ds.vectors.flat()) v = rng.normal();
  for (int i = 0; i < 10; ++i) ds.labels.push_back(i);
  ds.num_classes = 10;
  brm::save_features_csv(s / "single.csv", ds);
  CHECK(call({"train", "--data", s / "single.csv", "--loss", "triplet", "--layers", "4,4", "--out",
              s / "r"}) == 4);
  CHECK(call({"train", "--data", s / "single.csv", "--loss", "triplet", "--layers", "4,4",
              "--classes-per-batch", "4", "--samples-per-class", "1", "--batch-size", "4", "--out",
              s / "r2"}) == 4);
}

TEST_CASE("eval") {
  Scratch s("eval");
  CHECK(call({"train", "--out", s / "run", "--max-epochs", "30"}) == 0);
  std::string text;
  CHECK(call({"eval", "--checkpoint", s / "run/best.ckpt", "--split", "train", "--report",
              s / "report.json"},
             &text) == 0);
  const auto report = nlohmann::json::parse(slurp(s / "report.json"));
  CHECK(report["top1"].get<double>() >= report["recall_at"]["1"].get<double>() - 0.05);
  CHECK(report["confusion"].size() == 10);

  // dimension mismatch
  CHECK(call({"eval", "--checkpoint", s / "run/best.ckpt", "--dim", "12"}) == 5);
  CHECK(call({"eval", "--checkpoint", s / "missing.ckpt"}) == 3);
  CHECK(call({"eval", "--checkpoint", s / "run/best.ckpt", "--split", "test"}) == 2);

  // chance level: a near-untrained encoder on data whose labels carry no signal
  CHECK(call({"train", "--out", s / "untrained", "--max-epochs", "1", "--lr", "1e-12"}) == 0);
  CHECK(call({"gen-data", "--classes", "10", "--per-class", "100", "--dim", "16", "--seed", "3",
              "--out", s / "data.csv"}) == 0);
  brm::FeatureDataset ds = brm::load_features_csv(s / "data.csv");
  brm::Rng rng(5);
  rng.shuffle(ds.labels);
  brm::save_features_csv(s / "shuffled.csv", ds);
  CHECK(call({"eval", "--checkpoint", s / "untrained/final.ckpt", "--data", s / "shuffled.csv",
              "--report", s / "chance.json"}) == 0);
  const double top1 = nlohmann::json::parse(slurp(s / "chance.json"))["top1"].get<double>();
  CHECK(top1 >= 0.0);
  CHECK(top1 <= 0.2);
}

TEST_CASE("gradcheck command") {
  CHECK(call({"gradcheck", "--seeds", "5"}) == 0);
  CHECK(call({"gradcheck", "--seeds", "5", "--inject-fault", "neg-hist-sign"}) == 1);
  CHECK(call({"gradcheck", "--seeds", "5", "--tolerance", "1e-12"}) == 1);
  CHECK(call({"gradcheck", "--inject-fault", "other"}) == 2);
}

TEST_CASE("sweeps") {
  Scratch s("sweep");
  CHECK(call(with({"sweep-bins", "--bins", "25,75,150", "--out", s / "bins"}, kQuick)) == 0);
  const std::string csv = slurp(s / "bins/sweep_bins.csv");
  CHECK(csv.rfind("R,val_recall_at_1,final_loss\n", 0) == 0);
  CHECK(count_lines(csv) == 4);
  CHECK(call({"sweep-bins", "--bins", "1", "--out", s / "bad"}) == 2);

  const std::vector<std::string> cmp = {"compare-losses", "--losses", "brm,brm+ce,contrastive,triplet,lifted"};
  CHECK(call(with(with(cmp, {"--out", s / "c1"}), kQuick)) == 0);
  CHECK(call(with(with(cmp, {"--out", s / "c2"}), kQuick)) == 0);
  const std::string c1 = slurp(s / "c1/compare_losses.csv");
  CHECK(c1.rfind("loss,val_recall_at_1,epochs_to_converge\n", 0) == 0);
  CHECK(count_lines(c1) == 6);
  CHECK(c1 == slurp(s / "c2/compare_losses.csv"));
}

TEST_CASE("the executable reports the same exit codes") {
  const std::string exe = BRM_EXE;
  CHECK(std::system((exe + " gen-data --classes 1 --out /dev/null > /dev/null 2>&1").c_str()) != 0);
  CHECK(WEXITSTATUS(std::system((exe + " gen-data --classes 1 --out /dev/null > /dev/null 2>&1").c_str())) == 2);
  CHECK(WEXITSTATUS(std::system((exe + " gradcheck --seeds 3 > /dev/null 2>&1").c_str())) == 0);
}
