// Copyright 2026 The Hydra Planner Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hydra/common.hpp"
#include "json.hpp"

namespace hydra {

/// Tokens per original (untruncated) sequence, in file order.
struct LengthSample {
  std::vector<Tokens> lengths;

  std::size_t size() const { return lengths.size(); }
  Tokens total_tokens() const { return std::accumulate(lengths.begin(), lengths.end(), Tokens{0}); }
};

enum class HistogramMode {
  kExact,     // per-bin token sums and squared sums recorded from the raw lengths
  kMidpoint,  // only counts are known; moments evaluated at bin midpoints
};

/// counts[k] = |{ l : k*bin_width < l <= (k+1)*bin_width }|.
struct LengthHistogram {
  Tokens bin_width = 1;
  std::vector<std::int64_t> counts;
  // Exact mode only: sum of l and of l^2 per bin.
  std::vector<double> token_sums;
  std::vector<double> square_sums;
  std::int64_t total_sequences = 0;
  double total_tokens = 0;
  HistogramMode mode = HistogramMode::kExact;

  std::size_t bins() const { return counts.size(); }
  double bin_midpoint(std::size_t k) const {
    return (static_cast<double>(k) + 0.5) * static_cast<double>(bin_width);
  }
  /// Sum of lengths in bin k (exact or midpoint).
  double first_moment(std::size_t k) const {
    return mode == HistogramMode::kExact ? token_sums[k]
                                         : static_cast<double>(counts[k]) * bin_midpoint(k);
  }
  /// Sum of squared lengths in bin k (exact or midpoint).
  double second_moment(std::size_t k) const {
    if (mode == HistogramMode::kExact) return square_sums[k];
    const double m = bin_midpoint(k);
    return static_cast<double>(counts[k]) * m * m;
  }
};

struct MiniBatch {
  std::vector<Tokens> lengths;
  Tokens token_budget = 0;
  Tokens context_length = 0;
  std::uint64_t seed = 0;

  Tokens total_tokens() const { return std::accumulate(lengths.begin(), lengths.end(), Tokens{0}); }
};

enum class LengthFormat { kCsv, kJsonl, kBinaryU32 };

inline LengthFormat parse_length_format(std::string_view s) {
  if (s == "csv") return LengthFormat::kCsv;
  if (s == "jsonl") return LengthFormat::kJsonl;
  if (s == "bin" || s == "binary" || s == "binary-u32" || s == "u32") return LengthFormat::kBinaryU32;
  throw InvalidArgument("unknown length format '" + std::string(s) + "' (csv, jsonl, binary-u32)");
}

/// Infers the format from the extension: .csv, .jsonl, anything else is binary.
inline LengthFormat length_format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") return LengthFormat::kCsv;
  if (ext == ".jsonl" || ext == ".json") return LengthFormat::kJsonl;
  return LengthFormat::kBinaryU32;
}

namespace detail {

inline Tokens parse_positive_length(std::string_view text, std::size_t record, const char* what) {
  std::size_t begin = 0, end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  const std::string token(text.substr(begin, end - begin));
  if (token.empty()) throw ParseError(std::string(what) + " record " + std::to_string(record) + ": empty value");
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(token, &used);
  } catch (const std::exception&) {
    throw ParseError(std::string(what) + " record " + std::to_string(record) + ": not an integer: '" + token + "'");
  }
  if (used != token.size()) {
    throw ParseError(std::string(what) + " record " + std::to_string(record) + ": trailing characters in '" + token + "'");
  }
  if (v < 1) {
    throw ParseError(std::string(what) + " record " + std::to_string(record) + ": length must be >= 1, got " + token);
  }
  return static_cast<Tokens>(v);
}

}  // namespace detail

/// Reads all lengths in file order. Record indices in errors are 1-based lines
/// for text formats and 0-based records for binary.
inline LengthSample load_lengths(const std::filesystem::path& path, LengthFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  LengthSample sample;
  if (format == LengthFormat::kBinaryU32) {
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0) {
      throw ParseError(path.string() + ": binary-u32 size " + std::to_string(bytes.size()) + " is not a multiple of 4");
    }
    sample.lengths.reserve(bytes.size() / 4);
    for (std::size_t r = 0; r < bytes.size() / 4; ++r) {
      const unsigned char* p = &bytes[4 * r];
      const std::uint32_t v = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                              (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      if (v == 0) throw ParseError("binary-u32 record " + std::to_string(r) + ": length must be >= 1, got 0");
      sample.lengths.push_back(static_cast<Tokens>(v));
    }
  } else {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (format == LengthFormat::kCsv) {
        sample.lengths.push_back(detail::parse_positive_length(line, lineno, "csv"));
      } else {
        nlohmann::json rec;
        try {
          rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
          throw ParseError("jsonl record " + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.is_object() || !rec.contains("len") || !rec["len"].is_number_integer()) {
          throw ParseError("jsonl record " + std::to_string(lineno) + ": expected {\"len\": <int>}");
        }
        const auto v = rec["len"].get<long long>();
        if (v < 1) throw ParseError("jsonl record " + std::to_string(lineno) + ": length must be >= 1");
        sample.lengths.push_back(static_cast<Tokens>(v));
      }
    }
  }
  if (sample.lengths.empty()) throw ParseError(path.string() + ": empty file");
  return sample;
}

inline LengthSample load_lengths(const std::filesystem::path& path) {
  return load_lengths(path, length_format_for_path(path));
}

inline void save_lengths(const LengthSample& sample, const std::filesystem::path& path, LengthFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  if (format == LengthFormat::kBinaryU32) {
    std::vector<unsigned char> bytes;
    bytes.reserve(sample.lengths.size() * 4);
    for (Tokens l : sample.lengths) {
      if (l < 1 || l > static_cast<Tokens>(UINT32_MAX)) throw InvalidArgument("length out of u32 range");
      const auto v = static_cast<std::uint32_t>(l);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xff));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else if (format == LengthFormat::kCsv) {
    for (Tokens l : sample.lengths) out << l << '\n';
  } else {
    for (Tokens l : sample.lengths) out << "{\"len\": " << l << "}\n";
  }
  if (!out) throw Error("write failed: " + path.string());
}

struct LogNormal {
  double mu = 0;
  double sigma = 1;
};

struct Pareto {
  double alpha = 1;
  double xmin = 1;
};

using LengthDistribution = std::variant<LogNormal, Pareto>;

/// Long-tail synthetic corpus. Each draw is rounded to the nearest integer and
/// clamped to [1, context_length].
inline LengthSample synth_longtail(const LengthDistribution& dist, std::size_t n, Tokens context_length,
                                   std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("synth_longtail: n must be >= 1");
  if (context_length < 1) throw InvalidArgument("synth_longtail: context_length must be >= 1");
  if (const auto* ln = std::get_if<LogNormal>(&dist)) {
    if (!(ln->sigma > 0) || !std::isfinite(ln->mu)) throw InvalidArgument("lognormal: need finite mu and sigma > 0");
  } else {
    const auto& p = std::get<Pareto>(dist);
    if (!(p.alpha > 0) || !(p.xmin > 0)) throw InvalidArgument("pareto: need alpha > 0 and xmin > 0");
  }
  Rng rng(derive_seed(seed, "synth"));
  LengthSample out;
  out.lengths.reserve(n);
  const double ctx = static_cast<double>(context_length);
  for (std::size_t i = 0; i < n; ++i) {
    double x;
    if (const auto* ln = std::get_if<LogNormal>(&dist)) {
      // Box-Muller, one normal per draw.
      const double u1 = rng.uniform_open0();
      const double u2 = rng.uniform();
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      x = std::exp(ln->mu + ln->sigma * z);
    } else {
      const auto& p = std::get<Pareto>(dist);
      x = p.xmin / std::pow(rng.uniform_open0(), 1.0 / p.alpha);
    }
    x = std::round(x);
    if (!(x >= 1.0)) x = 1.0;
    if (x > ctx) x = ctx;
    out.lengths.push_back(static_cast<Tokens>(x));
  }
  return out;
}

/// Draws uniformly with replacement, truncating each draw to context_length,
/// and stops at the first draw that brings the cumulative count to the budget.
inline MiniBatch sample_minibatch(const LengthSample& sample, Tokens token_budget, Tokens context_length,
                                  std::uint64_t seed) {
  if (sample.lengths.empty()) throw InvalidArgument("sample_minibatch: empty sample");
  if (token_budget < 1) throw InvalidArgument("sample_minibatch: token_budget must be >= 1");
  if (context_length < 1) throw InvalidArgument("sample_minibatch: context_length must be >= 1");
  Rng rng(derive_seed(seed, "minibatch"));
  MiniBatch mb{.lengths = {}, .token_budget = token_budget, .context_length = context_length, .seed = seed};
  Tokens total = 0;
  while (total < token_budget) {
    const Tokens l = std::min(sample.lengths[rng.below(sample.lengths.size())], context_length);
    mb.lengths.push_back(l);
    total += l;
  }
  return mb;
}

inline LengthHistogram build_histogram(const LengthSample& sample, Tokens bin_width) {
  if (bin_width < 1) throw InvalidArgument("build_histogram: bin_width must be >= 1");
  LengthHistogram h;
  h.bin_width = bin_width;
  h.mode = HistogramMode::kExact;
  Tokens max_len = 0;
  for (Tokens l : sample.lengths) max_len = std::max(max_len, l);
  const std::size_t nbins = static_cast<std::size_t>(ceil_div(max_len, bin_width));
  h.counts.assign(nbins, 0);
  h.token_sums.assign(nbins, 0.0);
  h.square_sums.assign(nbins, 0.0);
  for (Tokens l : sample.lengths) {
    const auto k = static_cast<std::size_t>((l - 1) / bin_width);
    h.counts[k] += 1;
    const double x = static_cast<double>(l);
    h.token_sums[k] += x;
    h.square_sums[k] += x * x;
    h.total_tokens += x;
  }
  h.total_sequences = static_cast<std::int64_t>(sample.lengths.size());
  return h;
}

}  // namespace hydra
