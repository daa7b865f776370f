#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "calibration.hpp"
#include "doctest.h"
#include "fm3d/checkpoint.hpp"
#include "fm3d/records.hpp"
#include "fm3d/trainer.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace fm3d;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fm3d-unit-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small and fast: 120 samples of 2x8x8, one filter-map conv.
const char* kTinyNet = R"(input = 2x8x8
[conv]
kind = conv
filters = 12
kernel = 3
padding = 1
[relu]
kind = relu
[pool]
kind = avgpool
[fc]
kind = dense
units = 3
)";

RunConfig tiny_run(const fs::path& out) {
  fs::create_directories(out);
  std::ofstream(out / "tiny.net") << kTinyNet;
  RunConfig c;
  c.seed = 4;
  c.epochs = 2;
  c.batch_size = 16;
  c.learning_rate = 0.05;
  c.data.n = 120;
  c.data.height = 8;
  c.data.width = 8;
  c.data.eval_n = 30;
  c.net_description = (out / "tiny.net").string();
  c.out_dir = out / "run";
  return c;
}

}  // namespace

TEST_CASE("metrics lines have a fixed key order") {
  EpochRecord r{3, 0.5, 0.75, std::nullopt, 12.0};
  CHECK(metrics_line(r) == R"({"epoch":3,"train_loss":0.5,"train_acc":0.75,"eval_acc":null})");
  r.eval_acc = 1.0;
  CHECK(metrics_line(r) == R"({"epoch":3,"train_loss":0.5,"train_acc":0.75,"eval_acc":1.0})");
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  const fs::path dir = scratch("lr0");
  RunConfig c = tiny_run(dir);
  c.learning_rate = 0;
  c.epochs = 0;
  train(c);
  const Checkpoint init = load_checkpoint(c.out_dir / "checkpoint.fm3d");
  c.epochs = 2;
  c.out_dir = dir / "run2";
  train(c);
  const Checkpoint after = load_checkpoint(c.out_dir / "checkpoint.fm3d");
  for (const auto& t : init.tensors) {
    if (t.name.ends_with(".momentum")) continue;
    CHECK(after.find(t.name)->values == t.values);
  }
  fs::remove_all(dir);
}

TEST_CASE("training writes deterministic metrics and checkpoints") {
  const fs::path dir = scratch("det");
  RunConfig c = tiny_run(dir);
  const auto first = train(c).front();
  const std::string metrics = slurp(first.metrics), ckpt = slurp(first.checkpoint);
  CHECK(first.records.size() == 2);
  CHECK(fs::exists(c.out_dir / "timing.jsonl"));
  CHECK(slurp(c.out_dir / "plan.txt").find("ratio 9/2") != std::string::npos);
  train(c);
  CHECK(slurp(first.metrics) == metrics);
  CHECK(slurp(first.checkpoint) == ckpt);

  const auto records = read_records(metrics);
  REQUIRE(records.size() == 2);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i]["epoch"] == i + 1);
    CHECK(records[i]["eval_acc"].is_number());
    CHECK(records[i].begin().key() == "epoch");
  }
  CHECK(thrown([] { read_records("{\"epoch\":1}\nnot json\n"); }) == Errc::BadValue);
  fs::remove_all(dir);
}

TEST_CASE("resume continues the uninterrupted trajectory") {
  const fs::path dir = scratch("resume");
  RunConfig full = tiny_run(dir);
  full.epochs = 3;
  full.out_dir = dir / "full";
  train(full);

  RunConfig part = full;
  part.epochs = 1;
  part.out_dir = dir / "part";
  train(part);
  part.epochs = 3;
  part.resume = part.out_dir / "checkpoint.fm3d";
  const auto resumed = train(part).front();
  CHECK(resumed.records.size() == 2);
  CHECK(slurp(part.out_dir / "metrics.jsonl") == slurp(full.out_dir / "metrics.jsonl"));
  CHECK(slurp(part.out_dir / "checkpoint.fm3d") == slurp(full.out_dir / "checkpoint.fm3d"));

  RunConfig wrong = part;
  wrong.variant = VariantSelection::Baseline;
  CHECK(thrown([&] { train(wrong); }) == Errc::DimMismatch);
  fs::remove_all(dir);
}

TEST_CASE("non-finite loss names the step") {
  const fs::path dir = scratch("nan");
  RunConfig c = tiny_run(dir);
  c.learning_rate = 1e300;
  c.momentum = 0;
  CHECK(thrown([&] { train(c); }) == Errc::NonFiniteLoss);
  CHECK(thrown_message([&] { train(c); }).find("step ") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("evaluate") {
  const fs::path dir = scratch("eval");
  RunConfig c = tiny_run(dir);
  const auto r = train(c).front();
  const Checkpoint ckpt = load_checkpoint(r.checkpoint);
  const DataBundle data = load_data(c);
  const EvalResult e = evaluate(ckpt, data.train);
  CHECK(e.accuracy == r.records.back().train_acc);
  CHECK(e.mean_loss == r.records.back().train_loss);
  CHECK(e.count == 120);
  CHECK(thrown([&] { evaluate(ckpt, Dataset{}); }) == Errc::EmptyDataset);
  CHECK(thrown([&] { evaluate(ckpt, synth_dataset(1, 3, 3, 6, 6, 2)); }) == Errc::ShapeMismatch);

  fs::remove_all(dir);
}

TEST_CASE("untrained models score at chance") {
  // One sample per independently initialized model: each hit is Bernoulli(1/k).
  const NetDescription net = parse_net_description(kTinyNet, "tiny");
  const NetPlan plan = plan_description(net);
  const int n = 1200;
  const Dataset data = synth_dataset(99, n, 3, 8, 8, 2);
  double hits = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng(1000 + i);
    Model<double> m = build_model<double>(net, plan, Variant::FilterMap, GradMode::Average, rng);
    const std::vector<std::size_t> one{std::size_t(i)};
    hits += evaluate_model(m, data.gather(one)).accuracy;
  }
  const double acc = hits / n, p = 1.0 / 3, half = 2.576 * std::sqrt(p * (1 - p) / n);
  CHECK(acc >= p - half);
  CHECK(acc <= p + half);
}

TEST_CASE("checkpoint encoding") {
  Checkpoint c;
  c.precision = Precision::Single;
  c.grad_mode = GradMode::Sum;
  c.variant = Variant::Baseline;
  c.epochs_completed = 5;
  c.net_description = kTinyNet;
  c.rng_state = "1 2 3";
  c.tensors = {{"conv.weight", {2, 1}, {0.5, -1.25}}, {"fc.bias", {3}, {1, 2, 3}}};
  const auto bytes = encode_checkpoint(c);
  const Checkpoint d = decode_checkpoint(bytes);
  CHECK(d.tensors == c.tensors);
  CHECK(d.epochs_completed == 5);
  CHECK(d.precision == Precision::Single);
  CHECK(d.grad_mode == GradMode::Sum);
  CHECK(d.variant == Variant::Baseline);
  CHECK(encode_checkpoint(d) == bytes);

  for (std::size_t cut : {std::size_t(5), std::size_t(20), bytes.size() - 1}) {
    CHECK(thrown([&] { decode_checkpoint(std::span(bytes).first(cut)); }) == Errc::TruncatedFile);
  }
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(thrown([&] { decode_checkpoint(bad); }) == Errc::BadMagic);
  bad = bytes;
  bad[4] = 9;
  CHECK(thrown([&] { decode_checkpoint(bad); }) == Errc::VersionMismatch);
}

TEST_CASE("checkpoint round trip and architecture mismatch") {
  const fs::path dir = scratch("ckpt");
  RunConfig c = tiny_run(dir);
  const auto r = train(c).front();
  const auto raw = slurp(r.checkpoint);
  const Checkpoint ckpt = load_checkpoint(r.checkpoint);
  save_checkpoint(ckpt, dir / "copy.fm3d");
  CHECK(slurp(dir / "copy.fm3d") == raw);

  Checkpoint other = ckpt;
  for (auto& t : other.tensors) {
    if (t.name == "fc.weight") {
      t.dims = {4, 12};
      t.values.resize(48);
    }
  }
  const std::string msg = thrown_message([&] { evaluate(other, load_data(c).train); });
  CHECK(msg.rfind("DimMismatch", 0) == 0);
  CHECK(msg.find("layer 'fc'") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("reference baseline net learns the synthetic set") {
  const fs::path dir = scratch("reference");
  fs::create_directories(dir);
  std::ofstream(dir / "ref.net") << "input = 2x12x12\n[conv]\nkind = conv\nfilters = 12\nkernel = 3\npadding = 1\n"
                                    "[relu]\nkind = relu\n[pool]\nkind = maxpool\n[fc]\nkind = dense\nunits = 3\n";
  RunConfig c;
  c.seed = 1;
  c.batch_size = calibration::kBatchSize;
  c.learning_rate = calibration::kReferenceLearningRate;
  c.momentum = calibration::kMomentum;
  c.data.eval_n = 0;
  c.net_description = (dir / "ref.net").string();
  c.variant = VariantSelection::Baseline;
  c.out_dir = dir / "run";
  const auto r = train(c).front();
  CHECK(r.records.size() == 10);
  CHECK(r.records.back().train_acc >= calibration::kReferenceMinTrainAcc);
  fs::remove_all(dir);
}
