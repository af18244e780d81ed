// SPDX-License-Identifier: Apache-2.0
//
// Exercises the command-line surface end to end through the installed
// binary: data generation determinism, the pair builder, evaluation report
// format, and the config-file error contract.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int status = -1;
  std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
  const std::string command = std::string(AWE_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buffer;
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) result.output += buffer.data();
  const int rc = pclose(pipe);
  result.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("awe_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool dirs_identical(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.push_back(e.path().filename());
  for (const auto& e : fs::directory_iterator(b)) names_b.push_back(e.path().filename());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) return false;
  for (const auto& name : names_a)
    if (slurp(a / name) != slurp(b / name)) return false;
  return true;
}

}  // namespace

TEST_CASE("gen-data is deterministic per seed") {
  TempDir dir;
  const std::string common = "gen-data --seed 7 --types 3 --instances 3 --dim 4 "
                             "--min-len 4 --max-len 6 --out ";
  auto r1 = run_cli(common + (dir.path / "a").string());
  auto r2 = run_cli(common + (dir.path / "b").string());
  CHECK(r1.status == 0);
  CHECK(r2.status == 0);
  CHECK(dirs_identical(dir.path / "a", dir.path / "b"));
}

TEST_CASE("gen-data split writes three label-covering subsets") {
  TempDir dir;
  auto r = run_cli("gen-data --seed 3 --types 4 --instances 10 --dim 3 --min-len 4 "
                   "--max-len 6 --split 0.6,0.2,0.2 --out " +
                   dir.path.string());
  CHECK(r.status == 0);
  for (const char* split : {"train", "val", "test"})
    CHECK(fs::exists(dir.path / split / "index.tsv"));
}

TEST_CASE("pairs command writes a two-column tsv") {
  TempDir dir;
  REQUIRE(run_cli("gen-data --seed 5 --types 3 --instances 4 --dim 3 --min-len 4 --max-len 6 "
                  "--out " +
                  (dir.path / "data").string())
              .status == 0);
  auto r = run_cli("pairs --data " + (dir.path / "data").string() + " --n 10 --seed 2 --out " +
                   (dir.path / "p.tsv").string());
  CHECK(r.status == 0);
  std::ifstream in(dir.path / "p.tsv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.find('\t') != std::string::npos);
    ++rows;
  }
  CHECK(rows == 10);
}

TEST_CASE("eval prints the report for a two-segment same-type dataset") {
  TempDir dir;
  // Two instances of one type plus a second type (pair builders and the
  // corpus generator both need two types), evaluated on the pair subset.
  REQUIRE(run_cli("gen-data --seed 5 --types 2 --instances 2 --dim 3 --min-len 4 --max-len 5 "
                  "--noise 0.05 --out " +
                  (dir.path / "data").string())
              .status == 0);
  // Train nothing: a zero-epoch run writes an untrained checkpoint.
  std::ofstream cfg(dir.path / "c.cfg");
  cfg << "model = vae\n"
      << "data = " << (dir.path / "data").string() << "\n"
      << "out = " << (dir.path / "m.ckpt").string() << "\n"
      << "max_epochs = 0\n"
      << "feat_dim = 3\nhidden_dim = 4\nlatent_dim = 2\nnum_layers = 1\n";
  cfg.close();
  REQUIRE(run_cli("pretrain --config " + (dir.path / "c.cfg").string()).status == 0);

  auto r = run_cli("eval --checkpoint " + (dir.path / "m.ckpt").string() + " --data " +
                   (dir.path / "data").string());
  CHECK(r.status == 0);
  CHECK(r.output.find("ap_percent ") != std::string::npos);
  CHECK(r.output.find("num_pairs 6") != std::string::npos);
  CHECK(r.output.find("num_positives 2") != std::string::npos);
}

TEST_CASE("a two-segment same-type dataset scores ap_percent 100.0") {
  TempDir dir;
  REQUIRE(run_cli("gen-data --seed 6 --types 2 --instances 2 --dim 3 --min-len 4 --max-len 5 "
                  "--out " +
                  (dir.path / "data").string())
              .status == 0);
  // Reduce to two same-type segments by rewriting the index.
  std::ifstream in(dir.path / "data" / "index.tsv");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("w000", 0) == 0) lines.push_back(line);
  in.close();
  std::ofstream out(dir.path / "data" / "index.tsv", std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
  out.close();

  std::ofstream cfg(dir.path / "c.cfg");
  cfg << "model = vae\n"
      << "data = " << (dir.path / "data").string() << "\n"
      << "out = " << (dir.path / "m.ckpt").string() << "\n"
      << "max_epochs = 0\n"
      << "feat_dim = 3\nhidden_dim = 4\nlatent_dim = 2\nnum_layers = 1\n";
  cfg.close();
  REQUIRE(run_cli("pretrain --config " + (dir.path / "c.cfg").string()).status == 0);
  auto r = run_cli("eval --checkpoint " + (dir.path / "m.ckpt").string() + " --data " +
                   (dir.path / "data").string());
  CHECK(r.status == 0);
  CHECK(r.output.find("ap_percent 100.0\n") != std::string::npos);
}

TEST_CASE("baseline subcommand reports downsampling and dtw") {
  TempDir dir;
  REQUIRE(run_cli("gen-data --seed 9 --types 3 --instances 4 --dim 3 --min-len 4 --max-len 7 "
                  "--out " +
                  (dir.path / "data").string())
              .status == 0);
  for (const char* method : {"downsample", "dtw"}) {
    auto r = run_cli("baseline --method " + std::string(method) + " --data " +
                     (dir.path / "data").string());
    CHECK(r.status == 0);
    CHECK(r.output.find("ap_percent ") != std::string::npos);
  }
  auto bad = run_cli("baseline --method nearest --data " + (dir.path / "data").string());
  CHECK(bad.status != 0);
}

TEST_CASE("unknown config keys are rejected by name") {
  TempDir dir;
  std::ofstream cfg(dir.path / "bad.cfg");
  cfg << "model = vae\nnonsense_knob = 3\n";
  cfg.close();
  auto r = run_cli("pretrain --config " + (dir.path / "bad.cfg").string());
  CHECK(r.status != 0);
  CHECK(r.output.find("nonsense_knob") != std::string::npos);
}

TEST_CASE("malformed flags exit nonzero with usage") {
  auto r = run_cli("pretrain");  // missing --config
  CHECK(r.status != 0);
  auto r2 = run_cli("no-such-command");
  CHECK(r2.status != 0);
}

TEST_CASE("pr curve dumping writes threshold precision recall rows") {
  TempDir dir;
  REQUIRE(run_cli("gen-data --seed 11 --types 3 --instances 3 --dim 3 --min-len 4 "
                  "--max-len 6 --out " +
                  (dir.path / "data").string())
              .status == 0);
  auto r = run_cli("baseline --method downsample --data " + (dir.path / "data").string() +
                   " --pr-curve " + (dir.path / "pr.tsv").string());
  CHECK(r.status == 0);
  std::ifstream in(dir.path / "pr.tsv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    double th, prec, rec;
    char tab1, tab2;
    ls >> th >> std::noskipws >> tab1 >> std::skipws >> prec >> std::noskipws >> tab2 >>
        std::skipws >> rec;
    CHECK(!ls.fail());
    ++rows;
  }
  CHECK(rows > 0);
}
