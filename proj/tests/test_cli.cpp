// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "ipesr/checkpoint.hpp"
#include "ipesr/data.hpp"
#include "ipesr/metrics.hpp"
#include "ipesr/training.hpp"
#include "run_config.hpp"

namespace ipesr {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ipesr");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small enough to train in well under a second per epoch.
const std::vector<std::string> kTinySets = {
    "--set", "train.epochs=2",           "--set", "train.iters_per_epoch=3",
    "--set", "train.batch_size=2",       "--set", "train.val_scales=[2,4]",
    "--set", "sample.lr_patch=8",        "--set", "sample.pixels_per_patch=32",
    "--set", "model.encoder.blocks=1",   "--set", "model.encoder.channels=4",
    "--set", "model.decoder.hidden_layers=2", "--set", "model.decoder.hidden_width=8",
};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTinySets.begin(), kTinySets.end());
  return args;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new TempDir("ipesr_test_cli");
    write_toy_set(root_->path / "train", 0, 3, 40);
    write_toy_set(root_->path / "val", 0, 2, 36, 10);
    const auto r = cli(with_tiny({"train", "--train-dir", (root_->path / "train").string(),
                                  "--val-dir", (root_->path / "val").string(), "-o",
                                  (root_->path / "run").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
  }
  static fs::path path(const std::string& rel) { return root_->path / rel; }
  static std::string ckpt() { return (root_->path / "run" / "last.ipesr").string(); }

  static TempDir* root_;
};
TempDir* CliTest::root_ = nullptr;

TEST_F(CliTest, TrainWritesArtifacts) {
  EXPECT_TRUE(fs::exists(path("run/config.json")));
  EXPECT_TRUE(fs::exists(path("run/log.jsonl")));
  EXPECT_TRUE(fs::exists(path("run/best.ipesr")));
  EXPECT_TRUE(fs::exists(path("run/state.bin")));
  EXPECT_TRUE(fs::exists(path("run/checkpoints/epoch_0001.ipesr")));
  const Json cfg = Json::parse(slurp(path("run/config.json")));
  EXPECT_EQ(cfg["schema_version"], 1);
  EXPECT_EQ(cfg["train"]["epochs"], 2);
  EXPECT_EQ(cfg["model"]["encoder"]["channels"], 4);
}

TEST_F(CliTest, MissingDatasetPathNamesTheKey) {
  const auto r = cli({"train", "-o", path("x").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("data.train_dir"), std::string::npos) << r.err;
  const auto r2 = cli({"train", "--train-dir", path("train").string()});
  EXPECT_EQ(r2.code, kExitValidation);
  EXPECT_NE(r2.err.find("output_dir"), std::string::npos);
  const auto r3 = cli({"train", "--train-dir", path("nowhere").string(), "-o", path("y").string()});
  EXPECT_EQ(r3.code, kExitValidation);
}

TEST_F(CliTest, SameSeedGivesIdenticalLogs) {
  for (const char* name : {"s1", "s2"}) {
    const auto r = cli(with_tiny({"train", "--seed", "7", "--train-dir", path("train").string(),
                                  "-o", path(name).string()}));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(path("s1/log.jsonl")), slurp(path("s2/log.jsonl")));
  EXPECT_FALSE(slurp(path("s1/log.jsonl")).empty());
  EXPECT_NE(slurp(path("s1/log.jsonl")), slurp(path("run/log.jsonl")));
}

TEST_F(CliTest, ResumeFlag) {
  auto args = with_tiny({"train", "--train-dir", path("train").string(), "-o",
                         path("run").string(), "--resume"});
  args.insert(args.end(), {"--set", "train.epochs=3"});  // later --set wins
  const auto r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("epoch 2"), std::string::npos);
  EXPECT_EQ(r.out.find("epoch 0 "), std::string::npos);
}

TEST_F(CliTest, UnknownKeysAreErrors) {
  auto r = cli({"train", "--set", "train.epoch=3", "--train-dir", path("train").string(), "-o",
                path("u").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("epoch"), std::string::npos);
  const fs::path f = path("bad.json");
  std::ofstream(f) << R"({"schema_version": 1, "modle": {}})";
  r = cli({"train", "-c", f.string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("modle"), std::string::npos);
  std::ofstream(f) << R"({"schema_version": 2})";
  r = cli({"train", "-c", f.string()});
  EXPECT_EQ(r.code, kExitValidation);
  std::ofstream(f) << R"({"schema_version": 1, "train": {"epochs": "many"}})";
  r = cli({"train", "-c", f.string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("train.epochs"), std::string::npos);
}

TEST_F(CliTest, ParseErrorsAndHelp) {
  EXPECT_EQ(cli({}).code, kExitValidation);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({"sr", "--checkpoint", ckpt()}).code, kExitValidation);
}

TEST_F(CliTest, SrExplicitAnisotropicSize) {
  const auto out = path("sr_100x77.png");
  const auto r = cli({"sr", "--checkpoint", ckpt(), "-i", path("val/toy_010.png").string(), "-o",
                      out.string(), "--size", "100x77"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Image img = read_png(out);
  EXPECT_EQ(img.width(), 100);
  EXPECT_EQ(img.height(), 77);
}

TEST_F(CliTest, SrArbitraryScales) {
  for (const char* s : {"2.5", "12"}) {
    const auto out = path(std::string("sr_") + s + ".png");
    const auto r = cli({"sr", "--checkpoint", ckpt(), "-i", path("val/toy_010.png").string(), "-o",
                        out.string(), "--scale", s});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_png(out).width(), static_cast<int>(std::lround(36 * std::stod(s))));
  }
}

TEST_F(CliTest, SrIsIdempotent) {
  std::string bytes[2];
  for (int k = 0; k < 2; ++k) {
    const auto out = path("again.png");
    const auto r = cli({"sr", "--checkpoint", ckpt(), "-i", path("val/toy_011.png").string(),
                        "-o", out.string(), "--scale", "3.3"});
    ASSERT_EQ(r.code, 0) << r.err;
    bytes[k] = slurp(out);
  }
  EXPECT_FALSE(bytes[0].empty());
  EXPECT_EQ(bytes[0], bytes[1]);
}

TEST_F(CliTest, SrIdentityScaleReportsFit) {
  const auto r = cli({"sr", "--checkpoint", ckpt(), "-i", path("val/toy_010.png").string(), "-o",
                      path("id.png").string(), "--scale", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("identity-scale fit: PSNR"), std::string::npos) << r.out;
}

TEST_F(CliTest, SrErrors) {
  const auto in = path("val/toy_010.png").string();
  EXPECT_EQ(cli({"sr", "--checkpoint", ckpt(), "-i", in, "-o", path("e.png").string(), "--scale",
                 "2", "--size", "3x3"})
                .code,
            kExitValidation);
  EXPECT_EQ(cli({"sr", "--checkpoint", ckpt(), "-i", in, "-o", path("e.png").string(), "--size",
                 "3by3"})
                .code,
            kExitValidation);
  EXPECT_EQ(cli({"sr", "--checkpoint", ckpt(), "-i", in, "-o", path("e.png").string(), "--scale",
                 "-2"})
                .code,
            kExitValidation);
  EXPECT_NE(cli({"sr", "--checkpoint", path("none.ipesr").string(), "-i", in, "-o",
                 path("e.png").string(), "--scale", "2"})
                .code,
            0);
  EXPECT_NE(cli({"sr", "--checkpoint", ckpt(), "-i", path("none.png").string(), "-o",
                 path("e.png").string(), "--scale", "2"})
                .code,
            0);
}

TEST_F(CliTest, EvalEmitsFiveColumnsAndBicubicRow) {
  const auto table = path("table.json");
  const auto r = cli({"eval", "--checkpoint", ckpt(), "--data", path("val").string(), "--scales",
                      "2,3,4,6,12", "--table", table.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(table));
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0]["scores"].size(), 5u);
  EXPECT_EQ(j["rows"][1]["name"], "bicubic");
  EXPECT_NE(r.out.find("x12"), std::string::npos);
  EXPECT_NE(r.out.find("bicubic"), std::string::npos);

  // Bicubic column at s=2 against a direct metrics-module computation.
  const auto ds = Dataset::load(path("val"), "val");
  double mean = 0.0;
  for (const auto& hr : ds.images) {
    const Image lr = bicubic_resize(hr, 18, 18, true);
    mean += psnr(bicubic_resize(lr, 36, 36, true), hr, EvalProtocol{}, 2.0) / 2.0;
  }
  EXPECT_NEAR(j["rows"][1]["scores"][0]["psnr"].get<double>(), mean, 1e-9);
}

TEST_F(CliTest, SrAgreesWithEval) {
  const auto table = path("table2.json");
  const auto dump = path("dump");
  auto r = cli({"eval", "--checkpoint", ckpt(), "--data", path("val").string(), "--scales", "2",
                "--table", table.string(), "--dump-dir", dump.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(table));
  const double eval_psnr = j["per_image"][0]["model"][0]["psnr"].get<double>();

  const auto out = path("cross.png");
  r = cli({"sr", "--checkpoint", ckpt(), "-i", (dump / "toy_010_x2_lr.png").string(), "-o",
           out.string(), "--scale", "2", "--bit-depth", "16"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Image hr = read_png(path("val/toy_010.png"));
  const double sr_psnr = psnr(read_png(out), hr, EvalProtocol{}, 2.0);
  // Only 16-bit quantisation separates the two paths.
  EXPECT_NEAR(sr_psnr, eval_psnr, 0.01);
}

TEST_F(CliTest, EvalProtocolFlags) {
  const auto table = path("table_y.json");
  const auto r = cli({"eval", "--checkpoint", ckpt(), "--data", path("val").string(), "--scales",
                      "3", "--protocol", "y", "--shave", "2", "--table", table.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(table));
  EXPECT_EQ(j["protocol"]["channel_mode"], "y");
  EXPECT_EQ(j["protocol"]["shave_per_scale"][0], 2);
  EXPECT_EQ(cli({"eval", "--checkpoint", ckpt(), "--data", path("val").string(), "--protocol",
                 "lab"})
                .code,
            kExitValidation);
}

TEST_F(CliTest, AblateWritesReport) {
  const auto out = path("ablate");
  const auto r = cli(with_tiny({"ablate", "--train-dir", path("train").string(), "--eval-dir",
                                path("val").string(), "-o", out.string(), "--only", "ipe L=4",
                                "--only", "none", "--set", "eval.scales=[2,4]"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string md = slurp(out / "report.md");
  EXPECT_NE(md.find("| bicubic |"), std::string::npos);
  EXPECT_NE(md.find("| ipe L=4 |"), std::string::npos);
  EXPECT_NE(md.find("| none |"), std::string::npos);
  EXPECT_EQ(Json::parse(slurp(out / "report.json"))["rows"].size(), 3u);
  EXPECT_EQ(cli(with_tiny({"ablate", "--train-dir", path("train").string(), "--eval-dir",
                           path("val").string(), "-o", out.string(), "--only", "L=99"}))
                .code,
            kExitValidation);
}

TEST(Cli, SelfcheckPassesAndCatchesInjectedFault) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = cli({"selfcheck"});
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 120.0);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  r = cli({"selfcheck", "--inject-sinc-fault"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("FAIL IPE vs midpoint quadrature"), std::string::npos) << r.out;
  EXPECT_EQ(sinc_switch_threshold(), 1e-4);  // restored afterwards
}

TEST(Cli, Toyset) {
  TempDir dir("ipesr_test_toyset");
  const auto r = cli({"toyset", "-o", dir.path.string(), "--count", "2", "--size", "20"});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir.path / "toy_001.png"));
  EXPECT_EQ(cli({"toyset", "-o", dir.path.string(), "--count", "0"}).code, kExitValidation);
}

// --- configuration precedence ----------------------------------------------

TEST(Config, PrecedenceCliOverFileOverPreset) {
  TempDir dir("ipesr_test_cfg");
  const fs::path f = dir.path / "c.json";
  std::ofstream(f) << R"({"schema_version": 1, "preset": "paper",
                         "train": {"epochs": 7, "batch_size": 4},
                         "model": {"decoder": {"hidden_width": 32}}})";
  ConfigSources s;
  s.file = f;
  RunConfig c = resolve_config(s);
  EXPECT_EQ(c.preset, Preset::kPaper);
  EXPECT_EQ(c.train.epochs, 7);                  // file over preset
  EXPECT_EQ(c.train.iters_per_epoch, 1000);      // paper preset
  EXPECT_EQ(c.decoder.hidden_width, 32);
  s.sets = {"train.epochs=9", "model.decoder.encoding.variant=plain_pe"};
  s.seed = 5;
  c = resolve_config(s);
  EXPECT_EQ(c.train.epochs, 9);                  // CLI over file
  EXPECT_EQ(c.train.batch_size, 4);
  EXPECT_EQ(c.decoder.encoding.variant, EncodingVariant::kPlainPe);
  EXPECT_EQ(c.train.seed, 5u);
  EXPECT_EQ(c.sample.seed, 5u);
  s.preset = "desk";
  c = resolve_config(s);
  EXPECT_EQ(c.preset, Preset::kDesk);
  EXPECT_EQ(c.train.iters_per_epoch, 100);
  EXPECT_EQ(c.train.epochs, 9);

  ConfigSources bad;
  bad.sets = {"preset=paper"};
  EXPECT_THROW(resolve_config(bad), ValidationError);
  bad.sets = {"train.preset=paper"};
  EXPECT_THROW(resolve_config(bad), ValidationError);
  bad.sets = {"novalue"};
  EXPECT_THROW(resolve_config(bad), ValidationError);
}

TEST(Config, EnvironmentSearchPath) {
  TempDir dir("ipesr_test_env");
  std::ofstream(dir.path / "ipesr.json") << R"({"schema_version": 1, "train": {"epochs": 3}})";
  ::setenv("IPESR_CONFIG_PATH", ("/nonexistent:" + dir.path.string()).c_str(), 1);
  RunConfig c = resolve_config({});
  EXPECT_EQ(c.train.epochs, 3);
  ConfigSources explicit_file;
  std::ofstream(dir.path / "other.json") << R"({"schema_version": 1, "train": {"epochs": 4}})";
  explicit_file.file = dir.path / "other.json";
  EXPECT_EQ(resolve_config(explicit_file).train.epochs, 4);
  ::unsetenv("IPESR_CONFIG_PATH");
  EXPECT_EQ(resolve_config({}).train.epochs, 20);
}

TEST(Config, RoundTripThroughJson) {
  ConfigSources s;
  s.sets = {"model.decoder.encoding.bandwidth=6", "eval.channel_mode=y", "data.train_dir=/a/b"};
  const RunConfig c = resolve_config(s);
  TempDir dir("ipesr_test_cfg_rt");
  std::ofstream(dir.path / "c.json") << c.to_json().dump(2);
  ConfigSources back;
  back.file = dir.path / "c.json";
  const RunConfig d = resolve_config(back);
  EXPECT_EQ(d.to_json(), c.to_json());
}

}  // namespace
}  // namespace ipesr
