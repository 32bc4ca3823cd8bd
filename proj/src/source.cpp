#include "cddm/source.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <string>

#include "cddm/errors.hpp"

namespace cddm {

const char* to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::gaussian_mixture: return "gaussian_mixture";
    case SourceKind::unit_sphere: return "unit_sphere";
    case SourceKind::sparse: return "sparse";
    case SourceKind::file_corpus: return "file_corpus";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view text) {
  for (auto kind : {SourceKind::gaussian_mixture, SourceKind::unit_sphere, SourceKind::sparse,
                    SourceKind::file_corpus}) {
    if (text == to_string(kind)) return kind;
  }
  throw ParameterError("unknown source kind '" + std::string(text) + "'");
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

RealSignalBlock normalized(std::vector<double> values) {
  return unpack_real(normalize_power(pack_complex(values)));
}

}  // namespace

void write_corpus(const std::filesystem::path& path,
                  const std::vector<std::vector<double>>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open corpus for writing: " + path.string());
  out.write(kCorpusMagic.data(), static_cast<std::streamsize>(kCorpusMagic.size()));
  for (const auto& rec : records) {
    for (double v : rec) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("write failed for corpus " + path.string());
}

std::vector<std::vector<double>> read_corpus(const std::filesystem::path& path,
                                             std::size_t record_length) {
  if (record_length == 0) throw ParameterError("corpus record length must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kCorpusMagic.size() ||
      !std::equal(kCorpusMagic.begin(), kCorpusMagic.end(), bytes.begin(),
                  [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
    throw FormatError("not a corpus file (bad magic): " + path.string());
  }
  const std::size_t payload = bytes.size() - kCorpusMagic.size();
  const std::size_t record_bytes = 8 * record_length;
  if (payload % record_bytes != 0) {
    throw FormatError("corpus " + path.string() + " is not a whole number of " +
                      std::to_string(record_length) + "-value records");
  }
  std::vector<std::vector<double>> records(payload / record_bytes,
                                           std::vector<double>(record_length));
  const unsigned char* p = bytes.data() + kCorpusMagic.size();
  for (auto& rec : records) {
    for (double& v : rec) {
      v = std::bit_cast<double>(get_u64(p));
      p += 8;
    }
  }
  return records;
}

CorpusReader::CorpusReader(const std::filesystem::path& path, std::size_t record_length)
    : path_(path), records_(read_corpus(path, record_length)) {
  if (records_.empty()) throw FormatError("corpus has no records: " + path.string());
}

const std::vector<double>& CorpusReader::next() {
  if (cursor_ == records_.size()) {
    cursor_ = 0;
    ++wraps_;
    std::clog << "cddm: corpus " << path_.string() << " exhausted, wrapping to first record\n";
  }
  return records_[cursor_++];
}

void CorpusReader::seek(std::uint64_t record_index) {
  wraps_ = record_index / records_.size();
  cursor_ = static_cast<std::size_t>(record_index % records_.size());
}

std::vector<std::vector<double>> mixture_means(std::size_t k) {
  const std::size_t n = 2 * k;
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> u1(n, s);
  std::vector<double> u2(n);
  for (std::size_t i = 0; i < n; ++i) u2[i] = (i % 2 == 0) ? s : -s;
  auto neg = [](std::vector<double> v) {
    for (double& x : v) x = -x;
    return v;
  };
  return {u1, neg(u1), u2, neg(u2)};
}

RealSignalBlock sample_source(SourceKind kind, std::size_t k, Stream& rng) {
  if (k == 0) throw ParameterError("source block needs k >= 1");
  const std::size_t n = 2 * k;
  std::vector<double> x(n);
  switch (kind) {
    case SourceKind::gaussian_mixture: {
      const auto means = mixture_means(k);
      const auto& mean = means[rng.uniform_int(0, means.size() - 1)];
      for (std::size_t i = 0; i < n; ++i) x[i] = mean[i] + kMixtureComponentStd * rng.normal();
      break;
    }
    case SourceKind::unit_sphere:
      for (double& v : x) v = rng.normal();
      break;
    case SourceKind::sparse: {
      for (double& v : x) v = rng.normal();
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      // partial Fisher-Yates: the first `zeros` entries of `order` are the zeroed coordinates
      const auto zeros = std::min(n - 1, static_cast<std::size_t>(kSparseZeroFraction * n));
      for (std::size_t i = 0; i < zeros; ++i) {
        std::swap(order[i], order[rng.uniform_int(i, n - 1)]);
        x[order[i]] = 0.0;
      }
      break;
    }
    case SourceKind::file_corpus:
      throw ParameterError("file_corpus source needs a corpus reader");
  }
  return normalized(std::move(x));
}

SourceModel::SourceModel(SourceKind kind, std::size_t k) : kind_(kind), k_(k) {
  if (kind == SourceKind::file_corpus) {
    throw ParameterError("file_corpus source needs a corpus reader");
  }
  if (k == 0) throw ParameterError("source block needs k >= 1");
}

SourceModel::SourceModel(std::shared_ptr<CorpusReader> corpus, std::size_t k)
    : kind_(SourceKind::file_corpus), k_(k), corpus_(std::move(corpus)) {
  if (!corpus_) throw ParameterError("file_corpus source needs a corpus reader");
}

RealSignalBlock SourceModel::sample(Stream& rng) {
  if (kind_ != SourceKind::file_corpus) return sample_source(kind_, k_, rng);
  return normalized(corpus_->next());
}

void SourceModel::seek(std::uint64_t draw_index) {
  if (corpus_) corpus_->seek(draw_index);
}

}  // namespace cddm
