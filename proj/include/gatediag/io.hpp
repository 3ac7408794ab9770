#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gatediag/task.hpp"
#include "gatediag/training.hpp"

namespace gatediag {

// Per-sequence binary blocks: a fixed header (magic, version, D, T, count)
// followed by row-major double inputs, double targets, and a byte validity
// mask per sequence. Native little-endian doubles.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

// Textual key -> matrix checkpoint with kind tag, dims, and row-major
// matrices at 17 significant digits (lossless for doubles).
void write_checkpoint(const std::filesystem::path& path,
                      const ModelParams& model);
ModelParams read_checkpoint(const std::filesystem::path& path);

// Dot-decimal, 17-significant-digit formatting shared by every CSV.
std::string format_double(double value);

struct CsvWriter {
  explicit CsvWriter(const std::filesystem::path& path,
                     const std::string& header);
  ~CsvWriter();
  void row(const std::vector<std::string>& cells);
  std::FILE* file = nullptr;
};

std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace gatediag
