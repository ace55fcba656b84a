// End-to-end tests of the command-line binary: exit codes, overwrite
// guards, determinism, and the generate/train/eval/predict flow.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "pedcast_cli_test";

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + PEDCAST_CLI_PATH + " " +
                          args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string out() { return slurp(kWork / "stdout.txt"); }
std::string err() { return slurp(kWork / "stderr.txt"); }

void write_config(const fs::path& p, const std::string& body) {
  std::ofstream os(p);
  os << body;
}

const char* kSmallConfig = R"(# small end-to-end run
[scenario]
seed = 5
num_tracks = 40
num_videos = 6
noise_sigma = 0.001

[window]
O = 6
T = 4
stride = 4

[model]
kind = lstm_ed
embed_dim = 8
num_layers = 1

[train]
batch_size = 16
learning_rate = 0.002
epochs = 2
eval_every = 1
seed = 3

[split]
train = 0.7
val = 0.1
test = 0.2
seed = 42

[paths]
out_dir = OUT
)";

std::string config_with_out(const fs::path& out_dir) {
  std::string s = kSmallConfig;
  s.replace(s.find("OUT"), 3, out_dir.string());
  return s;
}

struct Fixture {
  Fixture() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

Fixture fixture_once;

}  // namespace

TEST_CASE("no subcommand or unknown flags exit with the config code") {
  CHECK(run("") == 2);
  CHECK(run("generate") == 2);                    // missing --config
  CHECK(run("frobnicate") == 2);                  // unknown subcommand
  CHECK(run("eval --checkpoint x") == 2);         // missing --tracks
  CHECK(run("--help") == 0);
}

TEST_CASE("generate: writes corpus files, guards overwrites, honors --force") {
  const auto dir = kWork / "gen";
  write_config(kWork / "gen.cfg", config_with_out(dir));
  REQUIRE(run("generate --config " + (kWork / "gen.cfg").string()) == 0);
  CHECK(fs::exists(dir / "clean.tracks"));
  CHECK(fs::exists(dir / "perturbed.tracks"));
  const std::string first = slurp(dir / "clean.tracks");
  CHECK(first.rfind("#pedcast-tracks v1", 0) == 0);

  // second run refuses to clobber, --force allows it
  CHECK(run("generate --config " + (kWork / "gen.cfg").string()) == 2);
  CHECK(err().find("--force") != std::string::npos);
  CHECK(run("generate --config " + (kWork / "gen.cfg").string() + " --force") == 0);
  CHECK(slurp(dir / "clean.tracks") == first);  // byte-identical regeneration
}

TEST_CASE("generate: PEDCAST_SEED overrides the configured seed") {
  const auto dir = kWork / "gen_env";
  write_config(kWork / "gen_env.cfg", config_with_out(dir));
  REQUIRE(run("generate --config " + (kWork / "gen_env.cfg").string(),
              "PEDCAST_SEED=99") == 0);
  const std::string env_corpus = slurp(dir / "clean.tracks");
  CHECK(env_corpus != slurp(kWork / "gen" / "clean.tracks"));
  // malformed env seed is a config error
  CHECK(run("generate --config " + (kWork / "gen_env.cfg").string() + " --force",
            "PEDCAST_SEED=banana") == 2);
}

TEST_CASE("config file errors carry file and line and exit 2") {
  write_config(kWork / "bad1.cfg", "[scenario]\nseed = x\n");
  CHECK(run("generate --config " + (kWork / "bad1.cfg").string()) == 2);
  write_config(kWork / "bad2.cfg", "[scenario]\nwrong_key = 3\n");
  CHECK(run("generate --config " + (kWork / "bad2.cfg").string()) == 2);
  CHECK(err().find("bad2.cfg:2") != std::string::npos);
  write_config(kWork / "bad3.cfg", "[nosuch]\n");
  CHECK(run("generate --config " + (kWork / "bad3.cfg").string()) == 2);
  CHECK(run("generate --config " + (kWork / "missing.cfg").string()) == 2);
}

TEST_CASE("train: full tiny run writes checkpoints, log, and test tracks") {
  const auto dir = kWork / "trainrun";
  write_config(kWork / "train.cfg", config_with_out(dir));
  const std::string tracks = (kWork / "gen" / "perturbed.tracks").string();
  REQUIRE(run("train --config " + (kWork / "train.cfg").string() + " --tracks " +
              tracks) == 0);
  CHECK(fs::exists(dir / "last.pckp"));
  CHECK(fs::exists(dir / "last.pckp.train"));
  CHECK(fs::exists(dir / "best.pckp"));
  CHECK(fs::exists(dir / "log.csv"));
  CHECK(fs::exists(dir / "test.tracks"));
  const std::string log = slurp(dir / "log.csv");
  CHECK(log.find("epoch,train_loss") != std::string::npos);
  // 2 epochs -> header + 2 rows
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);

  // rerun without --force refuses; --resume continues instead
  CHECK(run("train --config " + (kWork / "train.cfg").string() + " --tracks " +
            tracks) == 2);
  CHECK(run("train --config " + (kWork / "train.cfg").string() + " --tracks " +
            tracks + " --epochs 3 --resume") == 0);
}

TEST_CASE("train: missing track file is a data error before any output") {
  const auto dir = kWork / "train_missing";
  write_config(kWork / "train_missing.cfg", config_with_out(dir));
  CHECK(run("train --config " + (kWork / "train_missing.cfg").string() +
            " --tracks " + (kWork / "no_such.tracks").string()) == 3);
  CHECK(!fs::exists(dir));
}

TEST_CASE("eval: reports metrics and writes sweep curves") {
  const auto ckpt = (kWork / "trainrun" / "last.pckp").string();
  const auto tracks = (kWork / "trainrun" / "test.tracks").string();
  REQUIRE(fs::exists(ckpt));
  REQUIRE(run("eval --checkpoint " + ckpt + " --tracks " + tracks) == 0);
  const std::string table = out();
  CHECK(table.find("lstm_ed") != std::string::npos);
  CHECK(table.find("ADE") != std::string::npos);

  const auto csv_path = (kWork / "sweep.csv").string();
  REQUIRE(run("eval --checkpoint " + ckpt + " --tracks " + tracks +
              " --horizon-sweep --out " + csv_path) == 0);
  const std::string csv = slurp(csv_path);
  CHECK(csv.rfind("step,ade_px,accuracy", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + T=4 steps
  // overwrite guard applies to the csv as well
  CHECK(run("eval --checkpoint " + ckpt + " --tracks " + tracks +
            " --horizon-sweep --out " + csv_path) == 2);

  CHECK(run("eval --checkpoint " + ckpt + " --tracks " + tracks +
            " --image-size nonsense") == 2);
  CHECK(run("eval --checkpoint " + (kWork / "nope.pckp").string() + " --tracks " +
            tracks) == 5);
}

TEST_CASE("predict: prints a forecast; unknown queries exit 6") {
  const auto ckpt = (kWork / "trainrun" / "last.pckp").string();
  const auto tracks = (kWork / "trainrun" / "test.tracks").string();
  // find a usable track id from the saved test tracks: first data line
  std::ifstream in(tracks);
  std::string header, line;
  std::getline(in, header);
  REQUIRE(std::getline(in, line));
  const auto tid_pos = line.find("\"track_id\":\"") + 12;
  const std::string tid = line.substr(tid_pos, line.find('"', tid_pos) - tid_pos);

  REQUIRE(run("predict --checkpoint " + ckpt + " --tracks " + tracks +
              " --track-id " + tid + " --frame 20") == 0);
  const std::string fc = out();
  CHECK(fc.find("p_cross") != std::string::npos);
  CHECK(std::count(fc.begin(), fc.end(), '\n') == 5);  // header + T=4 rows

  CHECK(run("predict --checkpoint " + ckpt + " --tracks " + tracks +
            " --track-id nosuchtrack --frame 20") == 6);
  CHECK(run("predict --checkpoint " + ckpt + " --tracks " + tracks +
            " --track-id " + tid + " --frame 99999") == 6);
  // frame exists but not enough observed history before it
  CHECK(run("predict --checkpoint " + ckpt + " --tracks " + tracks +
            " --track-id " + tid + " --frame 2") == 6);
}

TEST_CASE("corrupt track file yields the data exit code") {
  const auto bad = kWork / "corrupt.tracks";
  write_config(bad, "#pedcast-tracks v1\nnot json at all\n");
  const auto ckpt = (kWork / "trainrun" / "last.pckp").string();
  CHECK(run("eval --checkpoint " + ckpt + " --tracks " + bad.string()) == 3);
}
