#include "cddm/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <span>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { raw(v, 4); }
  void u64(std::uint64_t v) { raw(v, 8); }
  void i64(std::int64_t v) { raw(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { raw(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  void doubles(std::span<const double> v) {
    for (double d : v) f64(d);
  }
  std::string take() { return std::move(out_); }

 private:
  void raw(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view data, std::string_view origin) : data_(data), origin_(origin) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  std::uint64_t u64() { return raw(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(raw(8)); }
  double f64() { return std::bit_cast<double>(raw(8)); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(u32())); }
  std::vector<double> doubles(std::size_t n) {
    need(8 * n);
    std::vector<double> v(n);
    for (double& d : v) d = f64();
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("checkpoint " + std::string(origin_) + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail("truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t raw(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view data_;
  std::string_view origin_;
  std::size_t pos_ = 0;
};

template <typename Enum>
Enum enum_from(Reader& r, std::uint32_t count, const char* what) {
  const std::uint32_t v = r.u32();
  if (v >= count) r.fail(std::string("invalid ") + what + " code " + std::to_string(v));
  return static_cast<Enum>(v);
}

}  // namespace

std::string encode_checkpoint(const TrainingState& state) {
  const auto& c = state.config;
  const auto& a = c.architecture;
  const auto& s = state.schedule;
  Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(config_hash(c, s));
  w.u32(static_cast<std::uint32_t>(a.signal_dim));
  w.u32(static_cast<std::uint32_t>(a.hidden));
  w.u32(static_cast<std::uint32_t>(a.blocks));
  w.u32(static_cast<std::uint32_t>(a.embed_dim));
  w.u32(static_cast<std::uint32_t>(s.steps()));
  w.f64(s.alpha_first());
  w.f64(s.alpha_last());
  w.u32(static_cast<std::uint32_t>(s.t_max()));
  w.u32(static_cast<std::uint32_t>(c.channel));
  w.u32(static_cast<std::uint32_t>(c.source));
  w.str(c.corpus_path);
  w.i64(c.steps);
  w.u32(static_cast<std::uint32_t>(c.batch));
  w.u64(c.seed);
  w.f64(c.learning_rate.base_rate);
  w.i64(c.learning_rate.warmup_steps);
  w.i64(c.learning_rate.total_steps);
  w.f64(c.learning_rate.min_rate);
  w.f64(c.adam.beta1);
  w.f64(c.adam.beta2);
  w.f64(c.adam.epsilon);
  w.u32(static_cast<std::uint32_t>(c.weighting));
  w.i64(state.step);
  w.i64(state.optimizer.step_count());
  w.u64(state.net.parameter_count());
  w.doubles(state.net.parameters());
  w.doubles(state.optimizer.first_moment());
  w.doubles(state.optimizer.second_moment());
  return w.take();
}

TrainingState decode_checkpoint(std::string_view bytes, std::string_view origin) {
  Reader r(bytes, origin);
  if (bytes.size() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    r.fail("bad magic bytes, not a checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint " + std::string(origin) + ": version " +
                       std::to_string(version) + " but this build reads version " +
                       std::to_string(kCheckpointVersion));
  }
  const std::uint64_t stored_hash = r.u64();

  TrainingConfig c;
  c.architecture.signal_dim = static_cast<int>(r.u32());
  c.architecture.hidden = static_cast<int>(r.u32());
  c.architecture.blocks = static_cast<int>(r.u32());
  c.architecture.embed_dim = static_cast<int>(r.u32());
  const int steps_T = static_cast<int>(r.u32());
  const double alpha_first = r.f64();
  const double alpha_last = r.f64();
  const int t_max = static_cast<int>(r.u32());
  c.channel = enum_from<ChannelMode>(r, 2, "channel");
  c.source = enum_from<SourceKind>(r, 4, "source");
  c.corpus_path = r.str();
  c.steps = r.i64();
  c.batch = static_cast<int>(r.u32());
  c.seed = r.u64();
  c.learning_rate.base_rate = r.f64();
  c.learning_rate.warmup_steps = r.i64();
  c.learning_rate.total_steps = r.i64();
  c.learning_rate.min_rate = r.f64();
  c.adam.beta1 = r.f64();
  c.adam.beta2 = r.f64();
  c.adam.epsilon = r.f64();
  c.weighting = enum_from<LossWeighting>(r, 2, "loss weighting");
  const std::int64_t completed = r.i64();
  const std::int64_t opt_step = r.i64();
  const std::uint64_t n = r.u64();

  DiffusionSchedule schedule = [&] {
    try {
      return build_schedule(steps_T, alpha_first, alpha_last, t_max);
    } catch (const ParameterError& e) {
      r.fail(std::string("invalid schedule: ") + e.what());
    }
  }();
  std::size_t expected = 0;
  try {
    expected = DenoiserNet::parameter_count(c.architecture);
  } catch (const ParameterError& e) {
    r.fail(std::string("invalid architecture: ") + e.what());
  }
  if (n != expected) {
    r.fail("architecture needs " + std::to_string(expected) + " weights but file holds " +
           std::to_string(n));
  }
  auto weights = r.doubles(n);
  auto m = r.doubles(n);
  auto v = r.doubles(n);
  if (!r.done()) r.fail("trailing bytes after tensors");
  if (config_hash(c, schedule) != stored_hash) r.fail("config hash does not match contents");

  return TrainingState{c, std::move(schedule), DenoiserNet(c.architecture, std::move(weights)),
                       AdamOptimizer(c.adam, std::move(m), std::move(v), opt_step), completed};
}

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state) {
  const std::string bytes = encode_checkpoint(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace cddm
