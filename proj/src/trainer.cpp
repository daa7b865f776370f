#include "fm3d/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fm3d/checkpoint.hpp"
#include "json.hpp"

namespace fm3d {
namespace {

constexpr std::size_t kEvalChunk = 256;

void check_input_shape(const NetDescription& net, const Dataset& data, std::string_view what) {
  const InputShape in = *net.input;
  const Shape expected{std::size_t(in.c), std::size_t(in.h), std::size_t(in.w)};
  if (data.sample_shape() != expected) {
    throw Error(Errc::ShapeMismatch, std::string(what) + " samples are " + shape_string(data.sample_shape()) +
                                         ", network expects " + shape_string(expected));
  }
}

std::ofstream open_output(const std::filesystem::path& path, bool append) {
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  return out;
}

template <typename T>
class Session {
 public:
  Session(const RunConfig& config, Variant variant, const NetDescription& net, const NetPlan& plan)
      : config_(config), variant_(variant), net_(net), rng_(config.seed),
        model_(build_model<T>(net, plan, variant, config.grad_mode, rng_)) {
    for (const auto& p : model_.params()) momentum_.emplace_back(p.value->shape());
  }

  void resume(const Checkpoint& ckpt) {
    if (ckpt.variant != variant_) {
      throw Error(Errc::DimMismatch, "checkpoint holds the " + std::string(to_string(ckpt.variant)) +
                                         " variant, run trains " + std::string(to_string(variant_)));
    }
    if (ckpt.precision != config_.precision || ckpt.grad_mode != config_.grad_mode) {
      throw Error(Errc::BadValue, "checkpoint precision or grad mode differs from the run configuration");
    }
    if (ckpt.net_description != net_.text) {
      throw Error(Errc::DimMismatch, "checkpoint was trained on a different network description");
    }
    restore_tensors(model_, ckpt, &momentum_);
    load_rng_state(rng_, ckpt.rng_state);
    epochs_done_ = ckpt.epochs_completed;
  }

  std::uint64_t epochs_done() const noexcept { return epochs_done_; }
  Model<T>& model() noexcept { return model_; }

  EpochRecord run_epoch(const DataBundle& data) {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset& train = data.train;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng_);

    const std::size_t batch = std::size_t(config_.batch_size);
    const std::size_t steps_per_epoch = (train.size() + batch - 1) / batch;
    const T lr = static_cast<T>(config_.learning_rate);
    const T mu = static_cast<T>(config_.momentum);
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t lo = step * batch, hi = std::min(train.size(), lo + batch);
      const Dataset b = train.gather(std::span<const std::size_t>(order).subspan(lo, hi - lo));
      const T loss = model_.loss_and_grad(tensor_cast<T>(b.images), b.labels);
      if (!std::isfinite(double(loss))) {
        throw Error(Errc::NonFiniteLoss, "loss is not finite at step " +
                                             std::to_string(epochs_done_ * steps_per_epoch + step) +
                                             " (epoch " + std::to_string(epochs_done_ + 1) + ")");
      }
      auto params = model_.params();
      for (std::size_t p = 0; p < params.size(); ++p) {
        T* theta = params[p].value->raw();
        const T* g = params[p].grad->raw();
        T* v = momentum_[p].raw();
        for (std::size_t i = 0; i < params[p].value->size(); ++i) {
          v[i] = mu * v[i] + g[i];
          theta[i] -= lr * v[i];
        }
      }
    }
    ++epochs_done_;

    EpochRecord rec;
    rec.epoch = epochs_done_;
    const EvalResult tr = evaluate_model(model_, train);
    rec.train_loss = tr.mean_loss;
    rec.train_acc = tr.accuracy;
    if (data.eval) rec.eval_acc = evaluate_model(model_, *data.eval).accuracy;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

  Checkpoint checkpoint() {
    Checkpoint ckpt;
    ckpt.precision = config_.precision;
    ckpt.grad_mode = config_.grad_mode;
    ckpt.variant = variant_;
    ckpt.epochs_completed = epochs_done_;
    ckpt.net_description = net_.text;
    ckpt.rng_state = save_rng_state(rng_);
    ckpt.tensors = capture_tensors(model_, momentum_);
    return ckpt;
  }

 private:
  const RunConfig& config_;
  Variant variant_;
  const NetDescription& net_;
  Rng rng_;
  Model<T> model_;
  std::vector<Tensor<T>> momentum_;
  std::uint64_t epochs_done_ = 0;
};

template <typename T>
TrainResult train_impl(const RunConfig& config, Variant variant, const DataBundle& data,
                       const std::filesystem::path& out_dir) {
  const NetDescription net = load_net_description(config.net_description);
  const NetPlan plan = plan_description(net);
  if (!net.trainable()) throw Error(Errc::BadDims, net.source + " has no input shape; it can only be planned");
  if (data.train.empty()) throw Error(Errc::EmptyDataset, "training set is empty");
  check_input_shape(net, data.train, "training");
  if (data.eval) check_input_shape(net, *data.eval, "evaluation");

  Session<T> session(config, variant, net, plan);
  const bool resuming = config.resume.has_value();
  if (resuming) session.resume(load_checkpoint(*config.resume));

  std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.variant = variant;
  result.param_count = session.model().param_count();
  result.plan = plan;
  result.out_dir = out_dir;
  result.metrics = out_dir / "metrics.jsonl";
  result.checkpoint = out_dir / "checkpoint.fm3d";
  {
    auto plan_out = open_output(out_dir / "plan.txt", false);
    plan_out << render_plan_report(plan, ReportFormat::Text);
  }
  auto metrics = open_output(result.metrics, resuming);
  auto timing = open_output(out_dir / "timing.jsonl", resuming);

  while (session.epochs_done() < std::uint64_t(config.epochs)) {
    EpochRecord rec = session.run_epoch(data);
    metrics << metrics_line(rec) << "\n" << std::flush;
    nlohmann::ordered_json t;
    t["epoch"] = rec.epoch;
    t["wall_ms"] = rec.wall_ms;
    timing << t.dump() << "\n" << std::flush;
    result.records.push_back(rec);
  }
  save_checkpoint(session.checkpoint(), result.checkpoint);
  return result;
}

template <typename T>
EvalResult evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& data) {
  const NetDescription net = parse_net_description(ckpt.net_description, "checkpoint");
  const NetPlan plan = plan_description(net);
  Rng rng(0);
  Model<T> model = build_model<T>(net, plan, ckpt.variant, ckpt.grad_mode, rng);
  restore_tensors<T>(model, ckpt, nullptr);
  if (data.empty()) throw Error(Errc::EmptyDataset, "evaluation set is empty");
  if (net.trainable()) check_input_shape(net, data, "evaluation");
  return evaluate_model(model, data);
}

}  // namespace

std::string metrics_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["train_acc"] = r.train_acc;
  j["eval_acc"] = r.eval_acc ? nlohmann::ordered_json(*r.eval_acc) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

DataBundle load_data(const RunConfig& config) {
  const DataConfig& d = config.data;
  DataBundle out;
  switch (d.source) {
    case DataSource::Synthetic: {
      const std::uint64_t seed = d.seed.value_or(config.seed);
      out.train = synth_dataset(seed, d.n, d.classes, d.height, d.width, d.channels);
      if (d.eval_n > 0) out.eval = synth_dataset(seed + 1, d.eval_n, d.classes, d.height, d.width, d.channels);
      break;
    }
    case DataSource::Idx:
      out.train = load_idx(d.train_images, d.train_labels);
      if (!d.eval_images.empty() || !d.eval_labels.empty()) {
        if (d.eval_images.empty() || d.eval_labels.empty()) {
          throw Error(Errc::MissingKey, "eval_images and eval_labels must be given together");
        }
        out.eval = load_idx(d.eval_images, d.eval_labels);
      }
      break;
    case DataSource::Csv:
      out.train = load_csv(d.train_csv, d.channels, d.height, d.width);
      if (!d.eval_csv.empty()) out.eval = load_csv(d.eval_csv, d.channels, d.height, d.width);
      break;
  }
  return out;
}

TrainResult train_variant(const RunConfig& config, Variant variant, const DataBundle& data,
                          const std::filesystem::path& out_dir) {
  validate_config(config);
  if (config.precision == Precision::Single) return train_impl<float>(config, variant, data, out_dir);
  return train_impl<double>(config, variant, data, out_dir);
}

std::vector<TrainResult> train(const RunConfig& config) {
  validate_config(config);
  const DataBundle data = load_data(config);
  switch (config.variant) {
    case VariantSelection::FilterMap:
      return {train_variant(config, Variant::FilterMap, data, config.out_dir)};
    case VariantSelection::Baseline:
      return {train_variant(config, Variant::Baseline, data, config.out_dir)};
    case VariantSelection::Both:
      if (config.resume) throw Error(Errc::BadValue, "resume needs a single variant");
      return {train_variant(config, Variant::FilterMap, data, config.out_dir / "fm"),
              train_variant(config, Variant::Baseline, data, config.out_dir / "baseline")};
  }
  return {};
}

template <typename T>
EvalResult evaluate_model(Model<T>& model, const Dataset& data) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "evaluation set is empty");
  std::size_t correct = 0;
  double loss_sum = 0;
  std::vector<std::size_t> idx;
  for (std::size_t lo = 0; lo < data.size(); lo += kEvalChunk) {
    const std::size_t hi = std::min(data.size(), lo + kEvalChunk);
    idx.resize(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    const Dataset chunk = data.gather(idx);
    const Tensor<T> logits = model.forward(tensor_cast<T>(chunk.images));
    const SoftmaxXent<T> sx = softmax_xent(logits, chunk.labels);
    loss_sum += double(sx.loss) * double(hi - lo);
    const std::vector<int> pred = argmax_rows(logits);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == chunk.labels[i];
  }
  return {double(correct) / double(data.size()), loss_sum / double(data.size()), data.size()};
}

template EvalResult evaluate_model(Model<float>&, const Dataset&);
template EvalResult evaluate_model(Model<double>&, const Dataset&);

EvalResult evaluate(const Checkpoint& checkpoint, const Dataset& data) {
  if (checkpoint.precision == Precision::Single) return evaluate_checkpoint<float>(checkpoint, data);
  return evaluate_checkpoint<double>(checkpoint, data);
}

GradCheckReport run_gradcheck(const RunConfig& config, const GradCheckOptions& options) {
  const NetDescription net = load_net_description(config.net_description);
  const NetPlan plan = plan_description(net);
  const Variant variant = config.variant == VariantSelection::Baseline ? Variant::Baseline : Variant::FilterMap;
  Rng rng(config.seed);
  Model<double> model = build_model<double>(net, plan, variant, config.grad_mode, rng);
  const DataBundle data = load_data(config);
  check_input_shape(net, data.train, "training");
  std::vector<std::size_t> idx(std::min<std::size_t>(data.train.size(), std::size_t(config.batch_size)));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Dataset batch = data.train.gather(idx);
  return grad_check(model, batch.images, batch.labels, options);
}

}  // namespace fm3d
