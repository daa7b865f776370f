#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fm3d/config.hpp"
#include "fm3d/dataset.hpp"
#include "fm3d/model.hpp"
#include "fm3d/network.hpp"

namespace fm3d {

struct EpochRecord {
  std::uint64_t epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  std::optional<double> eval_acc;
  double wall_ms = 0;
};

// One metrics line: {"epoch","train_loss","train_acc","eval_acc"} in that
// order. Wall time goes to a separate timing file so metrics stay
// reproducible byte for byte.
std::string metrics_line(const EpochRecord& r);

struct DataBundle {
  Dataset train;
  std::optional<Dataset> eval;
};

DataBundle load_data(const RunConfig& config);

struct TrainResult {
  Variant variant = Variant::FilterMap;
  std::vector<EpochRecord> records;  // epochs run by this call
  std::size_t param_count = 0;
  NetPlan plan;
  std::filesystem::path out_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
};

// Trains one variant and writes metrics.jsonl, timing.jsonl, plan.txt and
// checkpoint.fm3d into out_dir. With config.resume set, continues from that
// checkpoint and appends to out_dir's metrics.
TrainResult train_variant(const RunConfig& config, Variant variant, const DataBundle& data,
                          const std::filesystem::path& out_dir);

// Trains the configured variant(s). "both" writes into out/fm and out/baseline.
std::vector<TrainResult> train(const RunConfig& config);

struct EvalResult {
  double accuracy = 0;
  double mean_loss = 0;
  std::size_t count = 0;
};

// Forward-only pass in fixed chunks; argmax ties go to the lowest class.
template <typename T>
EvalResult evaluate_model(Model<T>& model, const Dataset& data);

EvalResult evaluate(const Checkpoint& checkpoint, const Dataset& data);

// Builds the network of `config` in double precision with the configured
// variant ("both" checks the filter-map variant) and gradient mode, then
// checks gradients on the first batch of training data.
GradCheckReport run_gradcheck(const RunConfig& config, const GradCheckOptions& options);

}  // namespace fm3d
