#pragma once

// Run configuration, e.g.
//
//   [run]
//   seed = 1
//   epochs = 10
//   batch_size = 16
//   learning_rate = 0.05
//   momentum = 0.9          # default
//   grad_mode = average     # default; or sum
//   precision = double      # default; or single
//   out = out
//
//   [data]
//   source = synthetic      # synthetic | idx | csv
//   n = 1000
//   classes = 3
//
//   [net]
//   description = builtin:toy
//   variant = fm            # fm | baseline | both
//
// Only run.seed is required. Unknown sections or keys are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "fm3d/checkpoint.hpp"
#include "fm3d/filter_map.hpp"

namespace fm3d {

enum class DataSource { Synthetic, Idx, Csv };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  std::optional<std::uint64_t> seed;  // synthetic; defaults to the run seed
  int n = 1000;
  int classes = 3;
  int height = 12;
  int width = 12;
  int channels = 2;
  int eval_n = 300;  // synthetic held-out samples drawn with seed + 1; 0 disables
  std::filesystem::path train_images, train_labels, eval_images, eval_labels;
  std::filesystem::path train_csv, eval_csv;
};

enum class VariantSelection { FilterMap, Baseline, Both };

struct RunConfig {
  std::uint64_t seed = 0;
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  GradMode grad_mode = GradMode::Average;
  Precision precision = Precision::Double;
  DataConfig data;
  std::string net_description = "builtin:toy";
  VariantSelection variant = VariantSelection::FilterMap;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> resume;
  std::filesystem::path base_dir;  // relative paths in the file resolve here
};

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text, const std::string& source,
                            const std::filesystem::path& base_dir = {});

// Throws BadValue for out-of-range fields.
void validate_config(const RunConfig& config);

VariantSelection parse_variant(std::string_view text);

}  // namespace fm3d
