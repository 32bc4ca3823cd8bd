#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include "cddm/channel.hpp"
#include "cddm/rng.hpp"

namespace cddm {

enum class SourceKind { gaussian_mixture, unit_sphere, sparse, file_corpus };

const char* to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view text);

// Binary corpus of fixed-length real records: an 8-byte magic followed by float64
// little-endian values, 2k per record.
inline constexpr std::string_view kCorpusMagic = "CDDMCRP1";

void write_corpus(const std::filesystem::path& path, const std::vector<std::vector<double>>& records);
std::vector<std::vector<double>> read_corpus(const std::filesystem::path& path,
                                             std::size_t record_length);

// Sequential reader; wraps to the first record when the file is exhausted.
// Not thread-safe.
class CorpusReader {
 public:
  CorpusReader(const std::filesystem::path& path, std::size_t record_length);

  const std::vector<double>& next();
  void seek(std::uint64_t record_index);
  std::size_t record_count() const { return records_.size(); }
  std::uint64_t wraps() const { return wraps_; }

 private:
  std::filesystem::path path_;
  std::vector<std::vector<double>> records_;
  std::size_t cursor_ = 0;
  std::uint64_t wraps_ = 0;
};

// Synthetic stand-in for encoder latents. Every emitted block is power-normalized:
// the packed complex block has unit energy.
class SourceModel {
 public:
  SourceModel(SourceKind kind, std::size_t k);
  SourceModel(std::shared_ptr<CorpusReader> corpus, std::size_t k);

  SourceKind kind() const { return kind_; }
  std::size_t k() const { return k_; }

  RealSignalBlock sample(Stream& rng);
  // Positions a corpus source at its n-th draw; no-op for synthetic kinds.
  void seek(std::uint64_t draw_index);

 private:
  SourceKind kind_;
  std::size_t k_;
  std::shared_ptr<CorpusReader> corpus_;
};

// Synthetic kinds only; file_corpus needs a SourceModel with a reader.
RealSignalBlock sample_source(SourceKind kind, std::size_t k, Stream& rng);

// Component means of the mixture source: +-u1, +-u2 with u1 = (1,..,1)/sqrt(2k) and
// u2 = (1,-1,1,-1,..)/sqrt(2k).
std::vector<std::vector<double>> mixture_means(std::size_t k);

inline constexpr double kMixtureComponentStd = 0.1;
inline constexpr double kSparseZeroFraction = 0.75;

}  // namespace cddm
