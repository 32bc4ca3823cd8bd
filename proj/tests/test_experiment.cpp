#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cddm/checkpoint.hpp"
#include "cddm/cli.hpp"
#include "cddm/errors.hpp"
#include "cddm/experiment.hpp"
#include "support.hpp"

using namespace cddm;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

struct Cli {
  int code = 0;
  std::string out, err;
};

Cli run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Cli r;
  r.code = cli_main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const char* kTinyConfig = R"(run:
  seed: 5
source:
  k: 2
model:
  hidden: 8
  blocks: 1
  embed_dim: 4
training:
  steps: 20
  batch: 8
  learning_rate: 0.001
  warmup: 2
evaluation:
  blocks: 50
entropy:
  first: 2
  last: 12
  samples: 100
  recommend_first: 2
  recommend_last: 12
)";

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"(
run: {id: sweep, seed: 9}
channel:
  mode: rayleigh
  snr_db: [0, 5.5]
  sigma_h: 0.1
schedule: {t_max: 40, m_mode: two-sigma-sq}
entropy: {tau: tau_hat}
)");
  CHECK(c.run_id == "sweep");
  CHECK(c.seed == 9);
  CHECK(c.channel == ChannelMode::rayleigh);
  CHECK(c.snr_db == std::vector<double>{0.0, 5.5});
  CHECK(c.sigma_h == std::vector<double>{0.1});
  CHECK(c.t_max == 40);
  CHECK(c.m_mode == MatchMode::two_sigma_sq);
  CHECK_FALSE(c.tau.has_value());
  CHECK(c.k == 32);  // untouched default

  CHECK(parse_config("").run_id == "run");
  CHECK_THROWS_AS(parse_config("run: {colour: red}"), FormatError);
  CHECK_THROWS_AS(parse_config("extras: {a: 1}"), FormatError);
  CHECK_THROWS_AS(parse_config("source: {k: many}"), FormatError);
  CHECK_THROWS_AS(parse_config("channel: {mode: fading}"), FormatError);
  CHECK_THROWS_AS(parse_config("run: [1, 2"), FormatError);
  CHECK_THROWS_AS(parse_config("- 1\n- 2\n"), FormatError);
}

TEST_CASE("rendered config parses back to the same config") {
  ExperimentConfig c = parse_config(kTinyConfig);
  c.snr_db = {1.5, 7.0};
  c.tau.reset();
  c.weighting = LossWeighting::weighted;
  const std::string text = render_config(c);
  CHECK(render_config(parse_config(text)) == text);
}

TEST_CASE("validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(validate(c));
  c.snr_db.clear();
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = ExperimentConfig{};
  c.sigma_h = {-0.1};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = ExperimentConfig{};
  c.alpha_first = 0.5;
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = ExperimentConfig{};
  c.source = SourceKind::file_corpus;
  CHECK_THROWS_AS(validate(c), ParameterError);
}

TEST_CASE("paired evaluation: both arms see the same realizations") {
  ExperimentConfig c = parse_config(kTinyConfig);
  c.channel = ChannelMode::rayleigh;
  c.snr_db = {10.0};
  const DiffusionSchedule s = make_schedule(c);
  Stream init(1);
  const DenoiserNet zero(training_config(c).architecture, init);
  const auto records = run_mse_experiment(c, zero, s);
  REQUIRE(records.size() == 1);
  // a zero network makes y = y_r / sqrt(abar_m); recompute that from the simulated draws
  SourceModel source = make_source(training_config(c));
  Stream rng = Stream(c.seed).split("mse").split("snr=10;sigma_h=0").split(std::uint64_t{0});
  const ObservationBatch b = simulate_observations(c, source, sigma_from_snr_db(10.0), 0.0, 50, rng);
  const double scale = 1.0 / std::sqrt(s.alpha_bar(records[0].m));
  const double n = static_cast<double>(b.x.size());
  CHECK(records[0].mse_without_cddm == doctest::Approx((b.x - b.y_r).squaredNorm() / n).epsilon(1e-12));
  CHECK(records[0].mse_with_cddm ==
        doctest::Approx((b.x - scale * b.y_r).squaredNorm() / n).epsilon(1e-12));
  CHECK(records[0].mse_x0_without_cddm == doctest::Approx((b.x0 - b.y_r).squaredNorm() / n).epsilon(1e-12));
}

TEST_CASE("noiseless awgn limit") {
  ExperimentConfig c = parse_config(kTinyConfig);
  c.snr_db = {120.0};
  const DiffusionSchedule s = make_schedule(c);
  Stream init(1);
  const DenoiserNet zero(training_config(c).architecture, init);
  const auto r = run_mse_experiment(c, zero, s);
  CHECK(r[0].m == 1);
  CHECK(r[0].mse_without_cddm < 1e-10);
  CHECK(r[0].mse_with_cddm < 1e-7);  // m = 1 rescales by 1/sqrt(alpha_1)
}

TEST_CASE("metrics file is append-only per run id") {
  ScratchDir dir("metrics");
  MetricsRecord r;
  r.run_id = "a";
  r.mse_with_cddm = 0.1;
  r.mse_without_cddm = 0.2;
  append_metrics_csv(dir / "m.csv", {r});
  r.run_id = "b";
  append_metrics_csv(dir / "m.csv", {r});
  CHECK_THROWS_AS(append_metrics_csv(dir / "m.csv", {r}), DuplicateRunError);
  const std::string text = slurp(dir / "m.csv");
  CHECK(count_lines(text) == 3);
  CHECK(text.rfind(kMetricsHeader, 0) == 0);
  CHECK(r.gain_db() == doctest::Approx(10 * std::log10(2.0)));
}

}

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
  const Cli none = run({});
  CHECK(none.code == kExitUsage);
  CHECK(none.err.find("Usage") != std::string::npos);
  CHECK(run({"mse-bench", "--bogus"}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  const Cli missing = run({"mse-bench", "--config", "/nonexistent/cfg.yaml"});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("config file not found") != std::string::npos);
  CHECK(missing.err.find("Usage") != std::string::npos);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("config and checkpoint errors have their own exit codes") {
  ScratchDir dir("cli_errors");
  write_text(dir / "bad.yaml", "source: {k: 2, colour: red}\n");
  CHECK(run({"mse-bench", "-c", (dir / "bad.yaml").string()}).code == kExitConfig);
  CHECK(run({"mse-bench", "--channel", "fading"}).code == kExitConfig);

  const Cli no_ckpt = run({"mse-bench", "--checkpoint", (dir / "none.ckpt").string(), "--out",
                           (dir / "m.csv").string()});
  CHECK(no_ckpt.code == kExitCheckpoint);
  CHECK(no_ckpt.err.find("none.ckpt") != std::string::npos);

  write_text(dir / "junk.ckpt", "definitely not a checkpoint");
  CHECK(run({"inspect-checkpoint", (dir / "junk.ckpt").string()}).code == kExitCheckpoint);

  // checkpoint trained for a different block length
  write_text(dir / "tiny.yaml", kTinyConfig);
  const std::string cfg = (dir / "tiny.yaml").string();
  const std::string ckpt = (dir / "t.ckpt").string();
  REQUIRE(run({"train", "-c", cfg, "--checkpoint", ckpt, "--steps", "2"}).code == kExitOk);
  CHECK(run({"mse-bench", "-c", cfg, "--checkpoint", ckpt, "--k", "3", "--out",
             (dir / "m.csv").string()})
            .code == kExitCheckpoint);
}

TEST_CASE("train, inspect, bench and report") {
  ScratchDir dir("cli_flow");
  write_text(dir / "tiny.yaml", kTinyConfig);
  const std::string cfg = (dir / "tiny.yaml").string();
  const std::string ckpt = (dir / "t.ckpt").string();

  const Cli trained = run({"train", "-c", cfg, "--checkpoint", ckpt});
  REQUIRE(trained.code == kExitOk);
  CHECK(std::filesystem::exists(ckpt + ".trace.csv"));
  CHECK(count_lines(slurp(ckpt + ".trace.csv")) == 21);

  const Cli inspected = run({"inspect-checkpoint", ckpt});
  CHECK(inspected.code == kExitOk);
  CHECK(inspected.out.find("signal_dim=4 hidden=8") != std::string::npos);
  CHECK(inspected.out.find("T=1000") != std::string::npos);
  CHECK(inspected.out.find("step 20 of 20") != std::string::npos);

  const std::string metrics = (dir / "m.csv").string();
  const Cli bench = run({"mse-bench", "-c", cfg, "--checkpoint", ckpt, "--channel", "awgn",
                         "--snr-db", "5,10,20", "--out", metrics, "--run-id", "one"});
  REQUIRE(bench.code == kExitOk);
  CHECK(count_lines(slurp(metrics)) == 1 + 3);

  const Cli sweep = run({"mse-bench", "-c", cfg, "--checkpoint", ckpt, "--channel", "rayleigh",
                         "--snr-db", "5,10,20", "--sigma-h", "0,0.1", "--out", metrics,
                         "--run-id", "two"});
  REQUIRE(sweep.code == kExitOk);
  CHECK(count_lines(slurp(metrics)) == 1 + 3 + 6);
  const std::string manifest = slurp(manifest_path(metrics, "two"));
  CHECK(manifest.find("seed: 5") != std::string::npos);
  CHECK(manifest.find("mode: rayleigh") != std::string::npos);

  const Cli dup = run({"mse-bench", "-c", cfg, "--checkpoint", ckpt, "--out", metrics,
                       "--run-id", "one"});
  CHECK(dup.code == kExitDuplicateRun);
  CHECK(count_lines(slurp(metrics)) == 10);

  const std::string report = (dir / "e.csv").string();
  const Cli ent = run({"entropy-report", "-c", cfg, "--checkpoint", ckpt, "--out", report});
  REQUIRE(ent.code == kExitOk);
  CHECK(count_lines(slurp(report)) == 1 + 11);
  CHECK(slurp(manifest_path(report, "run")).find("recommended_t_max") != std::string::npos);

  const std::string samples = (dir / "s.csv").string();
  const Cli smp = run({"sample", "-c", cfg, "--checkpoint", ckpt, "--snr-db", "10", "--blocks",
                       "3", "--out", samples});
  REQUIRE(smp.code == kExitOk);
  CHECK(count_lines(slurp(samples)) == 1 + 3 * 4);
}

TEST_CASE("zero-step checkpoint gives a degenerate entropy report with a warning") {
  ScratchDir dir("cli_zero");
  write_text(dir / "tiny.yaml", kTinyConfig);
  const std::string cfg = (dir / "tiny.yaml").string();
  const std::string ckpt = (dir / "z.ckpt").string();
  REQUIRE(run({"train", "-c", cfg, "--checkpoint", ckpt, "--steps", "0"}).code == kExitOk);
  const Cli ent = run({"entropy-report", "-c", cfg, "--checkpoint", ckpt, "--steps", "0", "--out",
                       (dir / "e.csv").string()});
  CHECK(ent.code == kExitOk);
  CHECK(ent.err.find("identically zero") != std::string::npos);
}

TEST_CASE("resumed training reproduces the uninterrupted checkpoint") {
  ScratchDir dir("cli_resume");
  write_text(dir / "tiny.yaml", kTinyConfig);
  const std::string cfg = (dir / "tiny.yaml").string();
  const std::string a = (dir / "a.ckpt").string(), b = (dir / "b.ckpt").string();
  REQUIRE(run({"train", "-c", cfg, "--checkpoint", a}).code == kExitOk);
  REQUIRE(run({"train", "-c", cfg, "--checkpoint", b, "--stop-after", "7"}).code == kExitOk);
  CHECK(run({"train", "-c", cfg, "--checkpoint", b, "--steps", "30", "--resume"}).code ==
        kExitCheckpoint);  // different training budget
  REQUIRE(run({"train", "-c", cfg, "--checkpoint", b, "--resume"}).code == kExitOk);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a + ".trace.csv") == slurp(b + ".trace.csv"));
}

TEST_CASE("diverging training exits with its own code") {
  ScratchDir dir("cli_diverge");
  write_text(dir / "tiny.yaml", kTinyConfig);
  const Cli r = run({"train", "-c", (dir / "tiny.yaml").string(), "--checkpoint",
                     (dir / "d.ckpt").string(), "--lr", "1e300"});
  CHECK(r.code == kExitTrainingAborted);
  CHECK(r.err.find("non-finite") != std::string::npos);
}

TEST_CASE("reruns are byte-identical") {
  ScratchDir dir("cli_determinism");
  write_text(dir / "tiny.yaml", kTinyConfig);
  const std::string cfg = (dir / "tiny.yaml").string();
  for (const char* tag : {"x", "y"}) {
    const std::string t(tag);
    REQUIRE(run({"mse-bench", "-c", cfg, "--train", "--checkpoint", (dir / (t + ".ckpt")).string(),
                 "--out", (dir / (t + "_m.csv")).string()})
                .code == kExitOk);
    REQUIRE(run({"entropy-report", "-c", cfg, "--checkpoint", (dir / (t + ".ckpt")).string(),
                 "--out", (dir / (t + "_e.csv")).string()})
                .code == kExitOk);
  }
  CHECK(slurp(dir / "x_m.csv") == slurp(dir / "y_m.csv"));
  CHECK(slurp(dir / "x_e.csv") == slurp(dir / "y_e.csv"));
  CHECK(slurp(dir / "x.ckpt") == slurp(dir / "y.ckpt"));
}

}
