#include "cddm/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <type_traits>
#include <sstream>

#include "cddm/equalizer.hpp"
#include "cddm/errors.hpp"
#include "cddm/format.hpp"
#include "cddm/sampler.hpp"

namespace cddm {

namespace {

template <typename T>
T scalar(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw FormatError("config: bad value for " + where);
  }
}

template <typename T>
std::vector<T> sequence(const YAML::Node& node, const std::string& where) {
  if (node.IsScalar()) return {scalar<T>(node, where)};
  if (!node.IsSequence()) throw FormatError("config: " + where + " must be a list");
  std::vector<T> out;
  for (const auto& item : node) out.push_back(scalar<T>(item, where));
  return out;
}

using Handler = std::function<void(ExperimentConfig&, const YAML::Node&, const std::string&)>;

template <typename Member>
Handler set(Member member) {
  return [member](ExperimentConfig& c, const YAML::Node& n, const std::string& where) {
    using T = std::remove_reference_t<decltype(c.*member)>;
    c.*member = scalar<T>(n, where);
  };
}

const std::map<std::string, std::map<std::string, Handler>>& handlers() {
  using C = ExperimentConfig;
  static const std::map<std::string, std::map<std::string, Handler>> table = {
      {"run",
       {{"id", set(&C::run_id)},
        {"seed", set(&C::seed)},
        {"checkpoint", set(&C::checkpoint)},
        {"out", set(&C::out)}}},
      {"channel",
       {{"mode", [](C& c, const YAML::Node& n, const std::string& w) {
           c.channel = parse_channel_mode(scalar<std::string>(n, w));
         }},
        {"snr_db", [](C& c, const YAML::Node& n, const std::string& w) {
           c.snr_db = sequence<double>(n, w);
         }},
        {"sigma_h", [](C& c, const YAML::Node& n, const std::string& w) {
           c.sigma_h = sequence<double>(n, w);
         }}}},
      {"source",
       {{"kind", [](C& c, const YAML::Node& n, const std::string& w) {
           c.source = parse_source_kind(scalar<std::string>(n, w));
         }},
        {"k", set(&C::k)},
        {"corpus", set(&C::corpus)}}},
      {"schedule",
       {{"steps", set(&C::schedule_steps)},
        {"alpha_first", set(&C::alpha_first)},
        {"alpha_last", set(&C::alpha_last)},
        {"t_max", set(&C::t_max)},
        {"m_mode", [](C& c, const YAML::Node& n, const std::string& w) {
           c.m_mode = parse_match_mode(scalar<std::string>(n, w));
         }}}},
      {"model",
       {{"hidden", set(&C::hidden)}, {"blocks", set(&C::blocks)}, {"embed_dim", set(&C::embed_dim)}}},
      {"training",
       {{"in_run", set(&C::train_in_run)},
        {"steps", set(&C::train_steps)},
        {"batch", set(&C::batch)},
        {"learning_rate", set(&C::learning_rate)},
        {"warmup", set(&C::warmup_steps)},
        {"weighting", [](C& c, const YAML::Node& n, const std::string& w) {
           const auto v = scalar<std::string>(n, w);
           if (v == "plain") c.weighting = LossWeighting::plain;
           else if (v == "weighted") c.weighting = LossWeighting::weighted;
           else throw FormatError("config: " + w + " must be plain or weighted");
         }}}},
      {"evaluation", {{"blocks", set(&C::eval_blocks)}}},
      {"entropy",
       {{"first", [](C& c, const YAML::Node& n, const std::string& w) { c.window.first = scalar<int>(n, w); }},
        {"last", [](C& c, const YAML::Node& n, const std::string& w) { c.window.last = scalar<int>(n, w); }},
        {"stride", [](C& c, const YAML::Node& n, const std::string& w) { c.window.stride = scalar<int>(n, w); }},
        {"samples", set(&C::mc_samples)},
        {"tau", [](C& c, const YAML::Node& n, const std::string& w) {
           if (n.IsNull() || (n.IsScalar() && n.Scalar() == "tau_hat")) c.tau.reset();
           else c.tau = scalar<double>(n, w);
         }},
        {"recommend_first", set(&C::recommend_first)},
        {"recommend_last", set(&C::recommend_last)}}},
  };
  return table;
}

std::string join(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_double(v[i]);
  return out + "]";
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig config;
  if (root.IsNull()) return config;
  if (!root.IsMap()) throw FormatError("config: top level must be a mapping of sections");
  const auto& table = handlers();
  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    const auto it = table.find(name);
    if (it == table.end()) throw FormatError("config: unknown section '" + name + "'");
    if (!section.second.IsMap()) throw FormatError("config: section '" + name + "' must be a mapping");
    for (const auto& entry : section.second) {
      const auto key = entry.first.as<std::string>();
      const auto h = it->second.find(key);
      if (h == it->second.end()) throw FormatError("config: unknown key '" + name + "." + key + "'");
      try {
        h->second(config, entry.second, name + "." + key);
      } catch (const ParameterError& e) {
        throw FormatError("config: " + name + "." + key + ": " + e.what());
      }
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "run:\n"
    << "  id: \"" << c.run_id << "\"\n"
    << "  seed: " << c.seed << "\n"
    << "  checkpoint: \"" << c.checkpoint << "\"\n"
    << "  out: \"" << c.out << "\"\n"
    << "channel:\n"
    << "  mode: " << to_string(c.channel) << "\n"
    << "  snr_db: " << join(c.snr_db) << "\n"
    << "  sigma_h: " << join(c.sigma_h) << "\n"
    << "source:\n"
    << "  kind: " << to_string(c.source) << "\n"
    << "  k: " << c.k << "\n"
    << "  corpus: \"" << c.corpus << "\"\n"
    << "schedule:\n"
    << "  steps: " << c.schedule_steps << "\n"
    << "  alpha_first: " << fmt_double(c.alpha_first) << "\n"
    << "  alpha_last: " << fmt_double(c.alpha_last) << "\n"
    << "  t_max: " << c.t_max << "\n"
    << "  m_mode: " << to_string(c.m_mode) << "\n"
    << "model:\n"
    << "  hidden: " << c.hidden << "\n"
    << "  blocks: " << c.blocks << "\n"
    << "  embed_dim: " << c.embed_dim << "\n"
    << "training:\n"
    << "  in_run: " << (c.train_in_run ? "true" : "false") << "\n"
    << "  steps: " << c.train_steps << "\n"
    << "  batch: " << c.batch << "\n"
    << "  learning_rate: " << fmt_double(c.learning_rate) << "\n"
    << "  warmup: " << c.warmup_steps << "\n"
    << "  weighting: " << (c.weighting == LossWeighting::plain ? "plain" : "weighted") << "\n"
    << "evaluation:\n"
    << "  blocks: " << c.eval_blocks << "\n"
    << "entropy:\n"
    << "  first: " << c.window.first << "\n"
    << "  last: " << c.window.last << "\n"
    << "  stride: " << c.window.stride << "\n"
    << "  samples: " << c.mc_samples << "\n"
    << "  tau: " << (c.tau ? fmt_double(*c.tau) : std::string("tau_hat")) << "\n"
    << "  recommend_first: " << c.recommend_first << "\n"
    << "  recommend_last: " << c.recommend_last << "\n";
  return o.str();
}

void validate(const ExperimentConfig& c) {
  if (c.k == 0) throw ParameterError("source.k must be at least 1");
  if (c.snr_db.empty()) throw ParameterError("channel.snr_db must list at least one SNR");
  for (double s : c.snr_db) {
    if (!std::isfinite(s)) throw ParameterError("channel.snr_db entries must be finite");
  }
  for (double s : c.sigma_h) {
    if (!(s >= 0.0)) throw ParameterError("channel.sigma_h entries must be nonnegative");
  }
  if (c.sigma_h.empty()) throw ParameterError("channel.sigma_h must list at least one value");
  if (c.eval_blocks == 0) throw ParameterError("evaluation.blocks must be positive");
  if (c.mc_samples == 0) throw ParameterError("entropy.samples must be positive");
  if (c.source == SourceKind::file_corpus && c.corpus.empty()) {
    throw ParameterError("source.corpus is required for file_corpus");
  }
  make_schedule(c);
  DenoiserNet::parameter_count(training_config(c).architecture);
}

DiffusionSchedule make_schedule(const ExperimentConfig& c) {
  return build_schedule(c.schedule_steps, c.alpha_first, c.alpha_last, c.t_max);
}

TrainingConfig training_config(const ExperimentConfig& c) {
  TrainingConfig t;
  t.architecture = Architecture{static_cast<int>(2 * c.k), c.hidden, c.blocks, c.embed_dim};
  t.channel = c.channel;
  t.source = c.source;
  t.corpus_path = c.corpus;
  t.steps = c.train_steps;
  t.batch = c.batch;
  t.seed = c.seed;
  t.learning_rate.base_rate = c.learning_rate;
  t.learning_rate.warmup_steps = c.warmup_steps;
  t.learning_rate.total_steps = c.train_steps;
  t.weighting = c.weighting;
  return t;
}

double to_db(double value) { return 10.0 * std::log10(value); }

double MetricsRecord::gain_db() const { return to_db(mse_without_cddm) - to_db(mse_with_cddm); }

ObservationBatch simulate_observations(const ExperimentConfig& config, SourceModel& source,
                                       double sigma, double sigma_h, Eigen::Index blocks,
                                       Stream& rng) {
  const std::size_t k = config.k;
  const auto n = static_cast<Eigen::Index>(2 * k);
  ObservationBatch b;
  b.x.resize(n, blocks);
  b.x0.resize(n, blocks);
  b.y_r.resize(n, blocks);
  b.h_r.resize(n, blocks);
  b.w_n.resize(n, blocks);
  for (Eigen::Index j = 0; j < blocks; ++j) {
    const RealSignalBlock block = source.sample(rng);
    Channel truth = Channel::awgn();
    Channel seen = Channel::awgn();
    if (config.channel == ChannelMode::rayleigh) {
      auto h = sample_rayleigh_channel(k, rng);
      seen = Channel::rayleigh(sigma_h > 0.0 ? perturb_estimate(h, sigma_h, rng) : h);
      truth = Channel::rayleigh(std::move(h));
    }
    const ComplexSymbolBlock y_c = transmit(pack_complex(block), truth, sigma, rng);
    const ChannelRealization actual = realize(truth, sigma, k);
    // the receiver only knows the (possibly perturbed) estimate
    const EqualizedObservation obs = receive(y_c, realize(seen, sigma, k));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      b.x(i, j) = block[u];
      b.x0(i, j) = actual.w_s_diag[u] * block[u];
      b.y_r(i, j) = obs.y_r[u];
      b.h_r(i, j) = obs.channel.h_r[u];
      b.w_n(i, j) = obs.channel.w_n_diag[u];
    }
  }
  return b;
}

namespace {

struct PointSums {
  double with = 0.0, without = 0.0, x0_with = 0.0, x0_without = 0.0;
};

constexpr std::size_t kEvalChunk = 1000;

MetricsRecord run_point(const ExperimentConfig& config, const DenoiserNet& net,
                        const DiffusionSchedule& schedule, SourceModel& source, double snr_db,
                        double sigma_h) {
  const auto start = std::chrono::steady_clock::now();
  const double sigma = sigma_from_snr_db(snr_db);
  const int m = select_m(schedule, sigma, config.m_mode);
  const auto n = static_cast<Eigen::Index>(2 * config.k);
  const Stream point = Stream(config.seed)
                           .split("mse")
                           .split("snr=" + fmt_double(snr_db) + ";sigma_h=" + fmt_double(sigma_h));
  PointSums sums;
  std::size_t done = 0;
  for (std::uint64_t chunk = 0; done < config.eval_blocks; ++chunk) {
    const auto size = static_cast<Eigen::Index>(std::min(kEvalChunk, config.eval_blocks - done));
    Stream rng = point.split(chunk);
    const ObservationBatch b = simulate_observations(config, source, sigma, sigma_h, size, rng);
    const Eigen::MatrixXd y = sample_batch(b.y_r, b.h_r, b.w_n, net, m, schedule);
    sums.with += (b.x - y).squaredNorm();
    sums.without += (b.x - b.y_r).squaredNorm();
    sums.x0_with += (b.x0 - y).squaredNorm();
    sums.x0_without += (b.x0 - b.y_r).squaredNorm();
    done += static_cast<std::size_t>(size);
  }
  const double count = static_cast<double>(config.eval_blocks) * static_cast<double>(n);
  MetricsRecord r;
  r.run_id = config.run_id;
  r.channel = config.channel;
  r.snr_db = snr_db;
  r.sigma_h = sigma_h;
  r.m = m;
  r.mse_with_cddm = sums.with / count;
  r.mse_without_cddm = sums.without / count;
  r.mse_x0_with_cddm = sums.x0_with / count;
  r.mse_x0_without_cddm = sums.x0_without / count;
  r.blocks = config.eval_blocks;
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

SourceModel evaluation_source(const ExperimentConfig& config) {
  return make_source(training_config(config));
}

}  // namespace

std::vector<MetricsRecord> run_mse_experiment(const ExperimentConfig& config,
                                              const DenoiserNet& net,
                                              const DiffusionSchedule& schedule) {
  validate(config);
  if (net.architecture().signal_dim != static_cast<int>(2 * config.k)) {
    throw DimensionError("checkpoint was trained for 2k = " +
                         std::to_string(net.architecture().signal_dim) + " but config has k = " +
                         std::to_string(config.k));
  }
  std::vector<MetricsRecord> out;
  for (double sigma_h : config.sigma_h) {
    for (double snr : config.snr_db) {
      SourceModel source = evaluation_source(config);
      out.push_back(run_point(config, net, schedule, source, snr, sigma_h));
    }
  }
  return out;
}

std::string metrics_csv_rows(const std::vector<MetricsRecord>& records) {
  std::ostringstream o;
  for (const auto& r : records) {
    o << r.run_id << ',' << to_string(r.channel) << ',' << fmt_double(r.snr_db) << ','
      << fmt_double(r.sigma_h) << ',' << r.m << ',' << fmt_double(r.mse_with_cddm) << ','
      << fmt_double(r.mse_without_cddm) << ',' << fmt_double(to_db(r.mse_with_cddm)) << ','
      << fmt_double(to_db(r.mse_without_cddm)) << ',' << fmt_double(r.gain_db()) << ','
      << fmt_double(r.mse_x0_with_cddm) << ',' << fmt_double(r.mse_x0_without_cddm) << ','
      << r.blocks << '\n';
  }
  return o.str();
}

void ensure_new_run(const std::filesystem::path& path, const std::string& run_id) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read existing metrics file: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) {
    throw FormatError("existing file " + path.string() + " is not a metrics CSV");
  }
  while (std::getline(in, line)) {
    if (line.substr(0, line.find(',')) == run_id) {
      throw DuplicateRunError("metrics file " + path.string() + " already has rows for run '" +
                              run_id + "'; refusing to overwrite");
    }
  }
}

void append_metrics_csv(const std::filesystem::path& path,
                        const std::vector<MetricsRecord>& records) {
  for (const auto& r : records) ensure_new_run(path, r.run_id);
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write metrics: " + path.string());
  if (fresh) out << kMetricsHeader << '\n';
  out << metrics_csv_rows(records);
  if (!out) throw IoError("write failed for metrics " + path.string());
}

EntropyOutcome run_entropy_experiment(const ExperimentConfig& config, const DenoiserNet& net,
                                      const DiffusionSchedule& schedule) {
  validate(config);
  SourceModel source = evaluation_source(config);
  Stream rng = Stream(config.seed).split("entropy");
  EntropyOutcome out;
  out.report = entropy_report(as_batch_estimator(net), source, schedule, config.channel,
                              config.window, config.mc_samples, config.tau, rng);
  out.recommendation = recommend_tmax(out.report, config.recommend_first, config.recommend_last);
  return out;
}

std::filesystem::path manifest_path(const std::filesystem::path& output, const std::string& run_id) {
  std::filesystem::path p = output;
  p += "." + run_id + ".manifest.yaml";
  return p;
}

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << "# SNR_dB = 10 log10(1 / (2 sigma^2)) for unit-energy blocks\n";
  out << render_config(config);
  if (!extra.empty()) {
    out << "results:\n";
    for (const auto& [key, value] : extra) out << "  " << key << ": " << value << "\n";
  }
  if (!out) throw IoError("write failed for manifest " + path.string());
}

}  // namespace cddm
